//! Globally adaptive Gauss–Kronrod (10/21 point) integration.

use std::collections::BinaryHeap;
use std::cmp::Ordering;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use thiserror::Error;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_067_173_349,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Gauss weights for the odd-indexed Kronrod nodes `XGK[1], XGK[3], ..., XGK[9]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("quadrature did not reach tolerance after {intervals} intervals (estimate {estimate:e}, error {error:e})")]
    NotConverged {
        intervals: usize,
        estimate: f64,
        error: f64,
    },
    #[error("integrand returned a non-finite value at {at}")]
    NonFinite { at: f64 },
    #[error("invalid integration limits [{a}, {b}]")]
    BadLimits { a: f64, b: f64 },
}

/// Scalar types the integrator can accumulate.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 0.0,
            max_intervals: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<V> {
    pub value: V,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment<V> {
    a: f64,
    b: f64,
    value: V,
    error: f64,
}

impl<V> PartialEq for Segment<V> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<V> Eq for Segment<V> {}
impl<V> PartialOrd for Segment<V> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<V> Ord for Segment<V> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> Result<(V, f64), QuadError> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |x: f64| -> Result<V, QuadError> {
        let v = f(x);
        if v.magnitude().is_finite() {
            Ok(v)
        } else {
            Err(QuadError::NonFinite { at: x })
        }
    };
    let fc = eval(center)?;
    let mut k = fc * WGK[10];
    let mut g = V::zero();
    for i in 0..10 {
        let dx = half * XGK[i];
        let pair = eval(center - dx)? + eval(center + dx)?;
        k = k + pair * WGK[i];
        if i % 2 == 1 {
            g = g + pair * WG[i / 2];
        }
    }
    let k = k * half;
    let g = g * half;
    Ok((k, (k - g).magnitude()))
}

/// Integrate `f` over `[points[0], points[last]]`, starting from the panels delimited by
/// `points` (which must be non-decreasing). Zero-width panels are skipped.
pub fn integrate_panels<V, F>(f: F, points: &[f64], opts: QuadOptions) -> Result<Integral<V>, QuadError>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    if points.len() < 2 {
        return Ok(Integral {
            value: V::zero(),
            error: 0.0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = V::zero();
    let mut total_err = 0.0;
    let mut evaluations = 0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(a.is_finite() && b.is_finite()) || b < a {
            return Err(QuadError::BadLimits { a, b });
        }
        if a == b {
            continue;
        }
        let (value, error) = kronrod(&f, a, b)?;
        evaluations += 21;
        total = total + value;
        total_err += error;
        heap.push(Segment { a, b, value, error });
    }
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(QuadError::NotConverged {
                intervals: heap.len(),
                estimate: total.magnitude(),
                error: total_err,
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in floating point.
            return Err(QuadError::NotConverged {
                intervals: heap.len() + 1,
                estimate: total.magnitude(),
                error: total_err,
            });
        }
        let (lv, le) = kronrod(&f, worst.a, mid)?;
        let (rv, re) = kronrod(&f, mid, worst.b)?;
        evaluations += 42;
        total = total - worst.value + lv + rv;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    // Re-sum to shed accumulated update rounding.
    let mut value = V::zero();
    let mut error = 0.0;
    for s in heap.iter() {
        value = value + s.value;
        error += s.error;
    }
    Ok(Integral {
        value,
        error,
        evaluations,
    })
}

/// Integrate `f` over `[a, b]`.
pub fn integrate<V, F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<Integral<V>, QuadError>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    integrate_panels(f, &[a, b], opts)
}

/// Integrate `f` over `[a, ∞)` using the map `x = a + s/(1-s)`, `s ∈ [0, 1)`.
///
/// `breaks` are interior points of the original variable where the integrand has features;
/// they are mapped into `s` and used as initial panel boundaries.
pub fn integrate_to_infinity<V, F>(
    f: F,
    a: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<Integral<V>, QuadError>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    let mut points = vec![0.0];
    let mut mapped: Vec<f64> = breaks
        .iter()
        .filter(|&&x| x > a && x.is_finite())
        .map(|&x| {
            let u = x - a;
            u / (1.0 + u)
        })
        .collect();
    mapped.sort_by(f64::total_cmp);
    points.extend(mapped);
    points.push(1.0);
    let g = |s: f64| {
        let one_minus = 1.0 - s;
        let x = a + s / one_minus;
        f(x) * (1.0 / (one_minus * one_minus))
    };
    integrate_panels(g, &points, opts)
}
