//! Independent numerical routes used to check the closed forms in `omx-core`.
//!
//! Everything here favours brute force over elegance: scans, fits, direct time integration
//! and quadrature. Nothing in this crate is used by the library itself.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, Matrix2, Vector2, Vector6};
use num_complex::Complex64;
use ode_solvers::{Dop853, OutputType, System};
use omx_core::constants::{C, HBAR, KB};
use omx_core::cooling::{self, CoolingScenario};
use omx_core::quadrature::{integrate_panels, integrate_to_infinity, QuadOptions};
use omx_core::ring_cavity::{self, RingCavityParams};
use omx_core::CMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Minimize `f` on `[a, b]` by golden-section search down to floating-point resolution.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..400 {
        if (b - a).abs() <= 4.0 * f64::EPSILON * (a.abs() + b.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Haar-distributed random unitary: QR of a complex Gaussian matrix with the phases of
/// `R`'s diagonal moved into `Q`.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> CMatrix {
    let z = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    });
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random real orthogonal matrix from the QR of a Gaussian matrix.
pub fn random_orthogonal<R: Rng>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let z = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = z.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Eigenvalues of a 2×2 Hermitian matrix in ascending order.
pub fn hermitian_2x2_eigenvalues(m: &Matrix2<Complex64>) -> [f64; 2] {
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let b = m[(0, 1)];
    let mean = 0.5 * (a + d);
    let half = 0.5 * (a - d);
    let rad = (half * half + b.norm_sqr()).sqrt();
    [mean - rad, mean + rad]
}

/// Determinant of the lossless loop matrix written out by hand:
/// `(1 - i t z)² - r² z²` with `z = e^{ikL}`.
pub fn loop_determinant(k: f64, p: &RingCavityParams) -> Complex64 {
    let z = Complex64::from_polar(1.0, k * p.length);
    let a = Complex64::new(1.0, 0.0) - Complex64::new(0.0, p.t) * z;
    a * a - z * z * (p.r * p.r)
}

/// Zeros of `|det(I - T_p)|` over one free spectral range, located by a dense scan of the
/// detuning followed by golden-section refinement. Returns the detunings in ascending order.
pub fn scan_resonance_detunings(p: &RingCavityParams, samples: usize) -> Vec<f64> {
    let f = |delta: f64| ring_cavity::closed_loop_matrix_at(delta, p).determinant().norm();
    let step = TAU / samples as f64;
    let grid: Vec<f64> = (0..=samples + 1).map(|i| -PI - step + step * i as f64).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| f(d)).collect();
    let mut roots = Vec::new();
    for i in 1..grid.len() - 1 {
        if vals[i] <= vals[i - 1] && vals[i] < vals[i + 1] {
            let d = golden_min(f, grid[i - 1], grid[i + 1]);
            if d > -PI && d <= PI {
                roots.push(d);
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Half splitting from a determinant scan, rad/s.
pub fn scanned_omega_s(p: &RingCavityParams) -> f64 {
    let roots = scan_resonance_detunings(p, 20_000);
    assert_eq!(roots.len(), 2, "expected two resonances per FSR, found {roots:?}");
    C * (roots[1] - roots[0]) / (2.0 * p.length)
}

/// Local maxima of `|e1| + |e2|` under a port-1 pump, refined by golden section.
pub fn response_peaks(p: &RingCavityParams, samples: usize) -> Vec<f64> {
    let input = Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let f = |delta: f64| match ring_cavity::intracavity_response_at(delta, 0.0, p, input) {
        Ok(e) => -(e[0].norm() + e[1].norm()),
        Err(_) => f64::NEG_INFINITY,
    };
    let step = TAU / samples as f64;
    let grid: Vec<f64> = (0..=samples + 1).map(|i| -PI - step + step * i as f64 + 0.5 * step).collect();
    let vals: Vec<f64> = grid.iter().map(|&d| f(d)).collect();
    let mut peaks = Vec::new();
    for i in 1..grid.len() - 1 {
        if vals[i] <= vals[i - 1] && vals[i] < vals[i + 1] {
            let d = golden_min(f, grid[i - 1], grid[i + 1]);
            if d > -PI && d <= PI {
                peaks.push(d);
            }
        }
    }
    peaks.sort_by(f64::total_cmp);
    peaks
}

/// Fit `1/|e|² = c (δ - δ0)² + c w²` around a resonance by linear least squares on
/// `1/|e|²` and return the half-width `w` in detuning units.
pub fn lorentzian_half_width(deltas: &[f64], magnitudes: &[f64]) -> f64 {
    let n = deltas.len();
    let centre = deltas.iter().sum::<f64>() / n as f64;
    let a = DMatrix::from_fn(n, 3, |i, j| (deltas[i] - centre).powi(j as i32));
    let y = DMatrix::from_fn(n, 1, |i, _| 1.0 / (magnitudes[i] * magnitudes[i]));
    let coef = a.svd(true, true).solve(&y, 1e-300).expect("least squares");
    let (c0, c1, c2) = (coef[0], coef[1], coef[2]);
    let minimum = c0 - c1 * c1 / (4.0 * c2);
    (minimum / c2).sqrt()
}

/// Linewidth from a Lorentzian fit of `|e1|` around the upper resonance, rad/s.
pub fn fitted_linewidth(p: &RingCavityParams) -> f64 {
    let delta0 = p.r.asin();
    let w_guess = p.t0 * p.t0 / 2.0;
    let input = Vector2::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0));
    let deltas: Vec<f64> = (0..201).map(|i| delta0 + w_guess * (-2.0 + 0.02 * i as f64)).collect();
    let mags: Vec<f64> = deltas
        .iter()
        .map(|&d| {
            let e = ring_cavity::intracavity_response_at(d, 0.0, p, input).expect("off resonance");
            (e[0].norm_sqr() + e[1].norm_sqr()).sqrt()
        })
        .collect();
    C * lorentzian_half_width(&deltas, &mags) / p.length
}

/// Static amplitudes computed independently: each mode receives `A/√2` through `√(2γ)`.
fn statics(s: &CoolingScenario) -> (Complex64, Complex64, f64, f64, f64) {
    let gamma = C * s.ring.t0 * s.ring.t0 / (2.0 * s.ring.length);
    let ws = C * s.ring.r.asin() / s.ring.length;
    let (dm, dp) = match s.pumped {
        cooling::PumpedMode::Lower => (0.0, 2.0 * ws),
        cooling::PumpedMode::Upper => (-2.0 * ws, 0.0),
    };
    let feed = (2.0 * gamma).sqrt() * s.pump_amplitude / 2.0_f64.sqrt();
    let cm = Complex64::new(feed, 0.0) / Complex64::new(gamma, dm);
    let cp = Complex64::new(feed, 0.0) / Complex64::new(gamma, dp);
    (cm, cp, gamma, dm, dp)
}

/// Back-action spectrum assembled from the input-noise transfer coefficients:
/// `S_F(Ω) = Σ_k α_k(Ω) β_k(-Ω)`, where `α_k` maps the input noise of mode `k` onto the
/// force and `β_k` its conjugate.
pub fn assembled_backaction_psd(s: &CoolingScenario, omega: f64) -> f64 {
    let (cm, cp, gamma, dm, dp) = statics(s);
    let ws = C * s.ring.r.asin() / s.ring.length;
    let g = 2.0 * ws * s.k_p * HBAR;
    let port = (2.0 * gamma).sqrt();
    let i = Complex64::new(0.0, 1.0);
    let alpha = |w: f64| {
        (
            i * g * cp.conj() * port / Complex64::new(gamma, dm - w),
            -i * g * cm.conj() * port / Complex64::new(gamma, dp - w),
        )
    };
    let beta = |w: f64| {
        (
            -i * g * cp * port / Complex64::new(gamma, -dm - w),
            i * g * cm * port / Complex64::new(gamma, -dp - w),
        )
    };
    let (am, ap) = alpha(omega);
    let (bm, bp) = beta(-omega);
    let total = am * bm + ap * bp;
    debug_assert!(total.im.abs() <= 1e-9 * total.norm().max(f64::MIN_POSITIVE));
    total.re
}

/// Occupation from direct quadrature of the mechanical sideband spectra over
/// `[-Ω_m, ∞)`. The narrow mechanical Lorentzian is integrated analytically against the
/// value of the smooth numerator at the peak, and the remainder numerically.
pub fn quadrature_occupation(s: &CoolingScenario, gamma_opt: f64) -> f64 {
    let m = &s.mech;
    let gamma_eff = m.gamma_m + gamma_opt;
    let xz2 = HBAR / (2.0 * m.mass * m.omega_m);
    let thermal = 2.0 * m.mass * KB * m.temperature * m.gamma_m;
    let half = 0.5 * gamma_eff;
    let lorentz = |w: f64| 1.0 / (half * half + w * w);
    let weight = (FRAC_PI_2 + (m.omega_m / half).atan()) / (PI * gamma_eff);
    let gamma = C * s.ring.t0 * s.ring.t0 / (2.0 * s.ring.length);

    let integral = |sign: f64| {
        let h = |w: f64| xz2 / (HBAR * HBAR) * (assembled_backaction_psd(s, sign * (m.omega_m + w)) + thermal);
        let h0 = h(0.0);
        let peak = h0 * weight;
        let mut breaks = vec![-m.omega_m];
        let mut scale = half;
        while scale < 10.0 * m.omega_m {
            if scale < m.omega_m {
                breaks.push(-scale);
            }
            breaks.push(scale);
            scale *= 10.0;
        }
        breaks.push(0.0);
        let resonance = 2.0 * C * s.ring.r.asin() / s.ring.length - m.omega_m;
        for k in [-3.0, -1.0, 1.0, 3.0] {
            let w = resonance + k * gamma;
            if w > -m.omega_m {
                breaks.push(w);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let far = 20.0 * m.omega_m;
        breaks.retain(|&b| b < far);
        breaks.push(far);
        let opts = QuadOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-16 * peak.abs(),
            max_intervals: 1_000_000,
        };
        let rest = |w: f64| (h(w) - h0) * lorentz(w) / TAU;
        let near = integrate_panels(rest, &breaks, opts).expect("near-field quadrature").value;
        let tail = integrate_to_infinity(rest, far, &[], opts).expect("tail quadrature").value;
        peak + near + tail
    };
    let plus = integral(1.0);
    let minus = integral(-1.0);
    0.5 * (plus + minus - 1.0)
}

/// Field fluctuations driven by a prescribed motion `x(t) = x0 cos Ω t`, in units of `1/γ`.
/// The drive is carried as a harmonic oscillator in the first two components.
struct DrivenFields {
    decay_minus: Complex64,
    decay_plus: Complex64,
    drive_minus: Complex64,
    drive_plus: Complex64,
    omega: f64,
}

impl System<f64, Vector6<f64>> for DrivenFields {
    fn system(&self, _t: f64, y: &Vector6<f64>, dy: &mut Vector6<f64>) {
        let u = y[0];
        let qm = Complex64::new(y[2], y[3]);
        let qp = Complex64::new(y[4], y[5]);
        let dqm = -self.decay_minus * qm + self.drive_plus * u;
        let dqp = -self.decay_plus * qp - self.drive_minus * u;
        dy[0] = self.omega * y[1];
        dy[1] = -self.omega * u;
        dy[2] = dqm.re;
        dy[3] = dqm.im;
        dy[4] = dqp.re;
        dy[5] = dqp.im;
    }
}

/// Sideband amplitudes per unit displacement from direct time integration and
/// demodulation over whole drive periods. Returns `(c₋, c₋†, c₊, c₊†)` at `e^{-iΩt}`.
pub fn demodulated_sidebands(s: &CoolingScenario, omega: f64) -> [Complex64; 4] {
    let (cm, cp, gamma, dm, dp) = statics(s);
    let ws = C * s.ring.r.asin() / s.ring.length;
    let g = 2.0 * ws * s.k_p;
    let norm = g * cm.norm().max(cp.norm()) / gamma;
    let sys = DrivenFields {
        decay_minus: Complex64::new(1.0, dm / gamma),
        decay_plus: Complex64::new(1.0, dp / gamma),
        drive_minus: cm * g / gamma / norm,
        drive_plus: cp * g / gamma / norm,
        omega: omega / gamma,
    };
    let qm0 = sys.drive_plus / sys.decay_minus;
    let qp0 = -sys.drive_minus / sys.decay_plus;
    let start = Vector6::new(1.0, 0.0, qm0.re, qm0.im, qp0.re, qp0.im);
    let period = TAU * gamma / omega;
    let settle_periods = (60.0 / period).ceil();
    let periods = 16.0;
    let per_period = 256.0;
    let t_start = settle_periods * period;
    let t_end = t_start + periods * period;
    let dt = period / per_period;
    let mut solver = Dop853::from_param(
        sys,
        0.0,
        t_end,
        dt,
        start,
        1e-11,
        1e-14,
        0.9,
        0.0,
        0.333,
        6.0,
        period / 8.0,
        0.0,
        100_000_000,
        1_000_000,
        OutputType::Dense,
    );
    solver.integrate().expect("driven field integration");
    let n_total = (settle_periods * per_period) as usize;
    let n_window = (periods * per_period) as usize;
    let ts = solver.x_out();
    let ys = solver.y_out();
    let mut acc = [Complex64::new(0.0, 0.0); 4];
    for idx in n_total..n_total + n_window {
        let t = ts[idx];
        let y = ys[idx];
        let qm = Complex64::new(y[2], y[3]);
        let qp = Complex64::new(y[4], y[5]);
        let rot = Complex64::from_polar(1.0, omega / gamma * t);
        acc[0] += qm * rot;
        acc[1] += qm.conj() * rot;
        acc[2] += qp * rot;
        acc[3] += qp.conj() * rot;
    }
    // x0 = 1, so each component carries a factor 1/2.
    acc.map(|a| 2.0 * norm * a / n_window as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn golden_finds_kink() {
        let x = golden_min(|x| (x - 0.3).abs(), 0.0, 1.0);
        assert!((x - 0.3).abs() < 1e-15);
    }

    #[test]
    fn unitary_is_unitary() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(1);
        let u = random_unitary(4, &mut rng);
        let e = &u.adjoint() * &u - CMatrix::identity(4, 4);
        assert!(e.iter().all(|z| z.norm() < 1e-14));
        let o = random_orthogonal(3, &mut rng);
        assert!((o.transpose() * &o - DMatrix::identity(3, 3)).amax() < 1e-14);
    }

    #[test]
    fn hand_determinant_matches_matrix() {
        let p = RingCavityParams::new(0.4, 0.0, 0.7, 5).unwrap();
        for k in [1.0, 2.5, 44.1] {
            let m = ring_cavity::closed_loop_matrix(k, &p).determinant();
            assert!((m - loop_determinant(k, &p)).norm() < 1e-13);
        }
    }

    #[test]
    fn two_by_two_eigenvalues() {
        let m = Matrix2::new(
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 2.0),
            Complex64::new(0.0, -2.0),
            Complex64::new(1.0, 0.0),
        );
        assert_eq!(hermitian_2x2_eigenvalues(&m), [-1.0, 3.0]);
    }

    #[test]
    fn lorentzian_fit_recovers_width() {
        let d: Vec<f64> = (0..101).map(|i| -1.0 + 0.02 * i as f64).collect();
        let m: Vec<f64> = d.iter().map(|x| 1.0 / ((x - 0.1) * (x - 0.1) + 0.09).sqrt()).collect();
        assert!((lorentzian_half_width(&d, &m) - 0.3).abs() < 1e-12);
    }
}
