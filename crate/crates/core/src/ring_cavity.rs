//! Transfer-matrix optics of a two-port ring cavity with a partially reflecting membrane.
//!
//! The loop has length `L`; the membrane sits at `z_x = L/2 + x` and couples the clockwise
//! and counter-clockwise travelling waves. Round-trip phases are tracked as
//! `kL = 2πN + φ` with the branch `N` stored in [`RingCavityParams::fsr_index`]; the
//! detuning coordinate is `δ = φ + π/2`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::constants::{C, EPS0, HBAR};
use crate::diagnostics::Warning;
use crate::quadrature::{integrate_panels, QuadError, QuadOptions};

/// Transverse area used by the field normalization, m².
pub const DEFAULT_BEAM_AREA: f64 = 1e-6;
const UNIT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RingError {
    #[error("invalid ring cavity parameters: {0}")]
    InvalidParams(String),
    #[error("pump sits on a pole of the loop (|det| = {det:e})")]
    SingularResponse { det: f64 },
    #[error("position z = {z} outside the loop [0, {length}]")]
    OutOfDomain { z: f64, length: f64 },
    #[error("energy integral failed: {0}")]
    Quadrature(#[from] QuadError),
}

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

const I: Complex64 = Complex64::new(0.0, 1.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingCavityParams {
    /// Membrane amplitude reflectivity.
    pub r: f64,
    /// Membrane amplitude transmittance (the transmitted wave picks up a factor `i t`).
    pub t: f64,
    /// Front mirror amplitude transmittance.
    pub t0: f64,
    /// Front mirror amplitude reflectivity.
    pub r0: f64,
    /// Loop length, m.
    pub length: f64,
    /// Free-spectral-range branch `N`.
    pub fsr_index: i64,
    /// Beam cross section entering the field normalization, m².
    pub beam_area: f64,
}

impl RingCavityParams {
    /// Lossless membrane and mirror: `t = √(1-r²)`, `r0 = √(1-t0²)`.
    pub fn new(r: f64, t0: f64, length: f64, fsr_index: i64) -> Result<Self, RingError> {
        let p = Self {
            r,
            t: (1.0 - r * r).max(0.0).sqrt(),
            t0,
            r0: (1.0 - t0 * t0).max(0.0).sqrt(),
            length,
            fsr_index,
            beam_area: DEFAULT_BEAM_AREA,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), RingError> {
        let bad = |msg: String| Err(RingError::InvalidParams(msg));
        if !(0.0..=1.0).contains(&self.r) {
            return bad(format!("membrane reflectivity r = {} outside [0, 1]", self.r));
        }
        if !(self.t >= 0.0) || (self.r * self.r + self.t * self.t - 1.0).abs() > UNIT_RTOL {
            return bad(format!("r² + t² = {} is not 1", self.r * self.r + self.t * self.t));
        }
        if !(0.0..=1.0).contains(&self.t0) {
            return bad(format!("mirror transmittance t0 = {} outside [0, 1]", self.t0));
        }
        if !(self.r0 >= 0.0) || (self.r0 * self.r0 + self.t0 * self.t0 - 1.0).abs() > UNIT_RTOL {
            return bad(format!("r0² + t0² = {} is not 1", self.r0 * self.r0 + self.t0 * self.t0));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return bad(format!("length must be positive, got {}", self.length));
        }
        if !(self.beam_area > 0.0 && self.beam_area.is_finite()) {
            return bad(format!("beam area must be positive, got {}", self.beam_area));
        }
        Ok(())
    }

    /// Free spectral range `2πc/L`, rad/s.
    pub fn fsr(&self) -> f64 {
        TAU * C / self.length
    }

    /// Wavenumber on this branch at detuning `δ`: `k = (2πN + δ - π/2) / L`.
    pub fn wavenumber_at(&self, delta: f64) -> f64 {
        (TAU * self.fsr_index as f64 + delta - FRAC_PI_2) / self.length
    }

    /// Detuning `δ = kL + π/2 - 2πN` of a wavenumber relative to this branch.
    pub fn detuning_of(&self, k: f64) -> f64 {
        k * self.length + FRAC_PI_2 - TAU * self.fsr_index as f64
    }
}

/// Linewidth (amplitude decay rate) `γ = c t0² / 2L`, rad/s.
pub fn linewidth(p: &RingCavityParams) -> f64 {
    C * p.t0 * p.t0 / (2.0 * p.length)
}

/// Propagation state for one wavenumber: `k` itself and `e^{ikL/2}` computed without
/// forming the large product `kL` when the wavenumber comes from a detuning.
#[derive(Debug, Clone, Copy)]
struct Propagation {
    k: f64,
    half_loop: Complex64,
}

impl Propagation {
    fn from_wavenumber(k: f64, p: &RingCavityParams) -> Self {
        Self {
            k,
            half_loop: cis(0.5 * k * p.length),
        }
    }

    fn from_detuning(delta: f64, p: &RingCavityParams) -> Self {
        let parity = if p.fsr_index.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        Self {
            k: p.wavenumber_at(delta),
            half_loop: cis(0.5 * (delta - FRAC_PI_2)) * parity,
        }
    }

    fn loop_factor(&self) -> Complex64 {
        self.half_loop * self.half_loop
    }

    /// Phase factors of the two arms, `e^{ik(L/2 + x)}` and `e^{ik(L/2 - x)}`.
    fn arms(&self, x: f64) -> (Complex64, Complex64) {
        let kx = cis(self.k * x);
        (self.half_loop * kx, self.half_loop * kx.conj())
    }
}

/// The four elementary 2×2 maps of the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferMatrices {
    /// Free propagation along the two arms, swapping the ports.
    pub ec: Matrix2<Complex64>,
    /// Propagation including the front-mirror reflection.
    pub cf: Matrix2<Complex64>,
    /// Front-mirror transmission of the input.
    pub ca: Matrix2<Complex64>,
    /// Membrane scattering `[[r, it], [it, r]]`.
    pub membrane: Matrix2<Complex64>,
}

impl TransferMatrices {
    /// One full circulation `T_ec · T_cf · M`.
    pub fn circulation(&self) -> Matrix2<Complex64> {
        self.ec * self.cf * self.membrane
    }

    /// Input injection `T_ec · T_ca`.
    pub fn injection(&self) -> Matrix2<Complex64> {
        self.ec * self.ca
    }
}

fn matrices(prop: Propagation, x: f64, p: &RingCavityParams) -> TransferMatrices {
    let (long, short) = prop.arms(x);
    let it = I * p.t;
    let r = Complex64::new(p.r, 0.0);
    TransferMatrices {
        ec: Matrix2::new(ZERO, long, short, ZERO),
        cf: Matrix2::new(long * p.r0, ZERO, ZERO, short * p.r0),
        ca: Matrix2::new(ONE * p.t0, ZERO, ZERO, ONE * p.t0),
        membrane: Matrix2::new(r, it, it, r),
    }
}

pub fn transfer_matrices(k: f64, x: f64, p: &RingCavityParams) -> TransferMatrices {
    matrices(Propagation::from_wavenumber(k, p), x, p)
}

pub fn transfer_matrices_at(delta: f64, x: f64, p: &RingCavityParams) -> TransferMatrices {
    matrices(Propagation::from_detuning(delta, p), x, p)
}

fn lossless_loop(loop_factor: Complex64, p: &RingCavityParams) -> Matrix2<Complex64> {
    let it = I * p.t;
    Matrix2::new(
        ONE - it * loop_factor,
        -loop_factor * p.r,
        -loop_factor * p.r,
        ONE - it * loop_factor,
    )
}

/// `I - T_p` for a perfectly reflecting front mirror, whose determinant vanishes on the
/// cavity resonances.
pub fn closed_loop_matrix(k: f64, p: &RingCavityParams) -> Matrix2<Complex64> {
    lossless_loop(Propagation::from_wavenumber(k, p).loop_factor(), p)
}

pub fn closed_loop_matrix_at(delta: f64, p: &RingCavityParams) -> Matrix2<Complex64> {
    lossless_loop(Propagation::from_detuning(delta, p).loop_factor(), p)
}

/// Resonant wavenumbers and frequencies of one FSR branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonancePair {
    pub k_minus: f64,
    pub k_plus: f64,
    pub omega_minus: f64,
    pub omega_plus: f64,
    /// Half splitting `c·arcsin(r)/L`, rad/s.
    pub omega_s: f64,
    pub fsr: f64,
    pub fsr_index: i64,
    /// Reduced round-trip phases `k±L - 2πN`, in (-π, 0].
    pub phase_minus: f64,
    pub phase_plus: f64,
}

impl ResonancePair {
    /// Half splitting recovered from the two log-phase solutions, rad/s.
    pub fn omega_s_from_phases(&self, length: f64) -> f64 {
        C * (self.phase_plus - self.phase_minus) / (2.0 * length)
    }

    /// Detuning coordinates of the two resonances.
    pub fn detunings(&self) -> (f64, f64) {
        (self.phase_minus + FRAC_PI_2, self.phase_plus + FRAC_PI_2)
    }
}

/// Solve `det(I - T_p) = 0` on branch `N`: `e^{ik±L} = ±r - it`.
pub fn solve_resonances(p: &RingCavityParams) -> Result<ResonancePair, RingError> {
    p.validate()?;
    let l = p.length;
    let branch = TAU * p.fsr_index as f64;
    // (1/(iL)) ln z with |z| = 1 is real: arg(z) / L.
    let log_phase = |z: Complex64| (z.ln() / I).re;
    let phase_plus = log_phase(Complex64::new(p.r, -p.t));
    let phase_minus = log_phase(Complex64::new(-p.r, -p.t));
    let k_plus = (branch + phase_plus) / l;
    let k_minus = (branch + phase_minus) / l;
    Ok(ResonancePair {
        k_minus,
        k_plus,
        omega_minus: C * k_minus,
        omega_plus: C * k_plus,
        omega_s: C * p.r.asin() / l,
        fsr: p.fsr(),
        fsr_index: p.fsr_index,
        phase_minus,
        phase_plus,
    })
}

fn response(prop: Propagation, x: f64, p: &RingCavityParams, input: Vector2<Complex64>) -> Result<Vector2<Complex64>, RingError> {
    let m = matrices(prop, x, p);
    let loop_matrix = Matrix2::identity() - m.circulation();
    let det = loop_matrix.determinant();
    if det.norm() < 1e-13 {
        return Err(RingError::SingularResponse { det: det.norm() });
    }
    let inv = Matrix2::new(loop_matrix[(1, 1)], -loop_matrix[(0, 1)], -loop_matrix[(1, 0)], loop_matrix[(0, 0)]) / det;
    Ok(inv * (m.injection() * input))
}

/// Circulating fields just after the front mirror for input amplitudes `input`:
/// `e = (I - T_p)⁻¹ T_in a`.
pub fn intracavity_response(
    k_p: f64,
    x: f64,
    p: &RingCavityParams,
    input: Vector2<Complex64>,
) -> Result<Vector2<Complex64>, RingError> {
    p.validate()?;
    response(Propagation::from_wavenumber(k_p, p), x, p, input)
}

/// [`intracavity_response`] at detuning `δ` on the configured branch.
pub fn intracavity_response_at(
    delta: f64,
    x: f64,
    p: &RingCavityParams,
    input: Vector2<Complex64>,
) -> Result<Vector2<Complex64>, RingError> {
    p.validate()?;
    response(Propagation::from_detuning(delta, p), x, p, input)
}

/// One point of a single-port pump sweep: `|e1/a1|` and `|e2/a1|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub delta: f64,
    pub ratio_1: f64,
    pub ratio_2: f64,
}

/// Sweep the detuning with unit pump in port 1.
pub fn response_sweep(p: &RingCavityParams, x: f64, deltas: &[f64]) -> Result<Vec<SweepPoint>, RingError> {
    p.validate()?;
    let input = Vector2::new(ONE, ZERO);
    deltas
        .par_iter()
        .map(|&delta| {
            let e = response(Propagation::from_detuning(delta, p), x, p, input)?;
            Ok(SweepPoint {
                delta,
                ratio_1: e[0].norm(),
                ratio_2: e[1].norm(),
            })
        })
        .collect()
}

/// Which standing-wave mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Lower frequency, node at the membrane.
    Minus,
    /// Upper frequency, antinode at the membrane.
    Plus,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::Minus => "minus",
            Branch::Plus => "plus",
        }
    }
}

/// Spatial profile of one resonant mode for a given membrane displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeProfile {
    pub branch: Branch,
    pub x: f64,
    pub k: f64,
    pub length: f64,
}

impl ModeProfile {
    pub fn new(branch: Branch, x: f64, p: &RingCavityParams) -> Result<Self, RingError> {
        let res = solve_resonances(p)?;
        let k = match branch {
            Branch::Minus => res.k_minus,
            Branch::Plus => res.k_plus,
        };
        Ok(Self {
            branch,
            x,
            k,
            length: p.length,
        })
    }

    /// Membrane position `L/2 + x`.
    pub fn membrane_position(&self) -> f64 {
        0.5 * self.length + self.x
    }

    /// Complex amplitude at `z ∈ [0, L]` (`z = L` is the same point as `z = 0`).
    pub fn amplitude(&self, z: f64) -> Result<Complex64, RingError> {
        if !(0.0..=self.length).contains(&z) {
            return Err(RingError::OutOfDomain { z, length: self.length });
        }
        let z = if z == self.length { 0.0 } else { z };
        Ok(self.amplitude_unchecked(z))
    }

    fn amplitude_unchecked(&self, z: f64) -> Complex64 {
        let shift = if z > self.membrane_position() { self.length } else { 0.0 };
        let arg = self.k * (z - shift - self.x);
        match self.branch {
            Branch::Minus => I * (2.0 * arg.sin()),
            Branch::Plus => Complex64::new(2.0 * arg.cos(), 0.0),
        }
    }

    /// Sample on a grid of positions, in parallel.
    pub fn sample(&self, zs: &[f64]) -> Result<Vec<Complex64>, RingError> {
        zs.par_iter().map(|&z| self.amplitude(z)).collect()
    }
}

/// Fold any position onto `[0, L)`.
pub fn fold(z: f64, length: f64) -> f64 {
    let w = z.rem_euclid(length);
    if w >= length {
        0.0
    } else {
        w
    }
}

pub fn mode_profile(branch: Branch, x: f64, p: &RingCavityParams, z: f64) -> Result<Complex64, RingError> {
    ModeProfile::new(branch, x, p)?.amplitude(z)
}

/// Gram matrix `G` of the stored energy `U = c† G c` for amplitudes `c = (c₋, c₊)`, J.
///
/// The field is `E⁺(z) = Σ N(ω±) P±(z) c±` with `N(ω) = √(ħω / 4Aε₀L)`, and
/// `G_ab = 2Aε₀ N_a N_b ∫ conj(P_a) P_b dz` over the loop, split at the membrane and into
/// half-wavelength panels.
pub fn cavity_energy_matrix(x: f64, p: &RingCavityParams) -> Result<Matrix2<Complex64>, RingError> {
    let res = solve_resonances(p)?;
    let minus = ModeProfile::new(Branch::Minus, x, p)?;
    let plus = ModeProfile::new(Branch::Plus, x, p)?;
    let z_x = minus.membrane_position();
    if !(z_x > 0.0 && z_x < p.length) {
        return Err(RingError::OutOfDomain { z: z_x, length: p.length });
    }
    let norm = |omega: f64| (HBAR * omega / (4.0 * p.beam_area * EPS0 * p.length)).sqrt();
    let n = [norm(res.omega_minus), norm(res.omega_plus)];
    let k_max = res.k_minus.abs().max(res.k_plus.abs());
    let panels = |a: f64, b: f64| -> Vec<f64> {
        let count = ((b - a) * k_max / PI).ceil().max(1.0) as usize;
        (0..=count).map(|i| a + (b - a) * i as f64 / count as f64).collect()
    };
    let mut breaks = panels(0.0, z_x);
    breaks.pop();
    breaks.extend(panels(z_x, p.length));
    let opts = QuadOptions {
        rel_tol: 1e-12,
        abs_tol: 1e-13 * p.length,
        max_intervals: 50_000_000,
    };
    let profiles = [minus, plus];
    let mut g = Matrix2::zeros();
    for a in 0..2 {
        for b in a..2 {
            let (pa, pb) = (profiles[a], profiles[b]);
            let integral = integrate_panels(
                |z: f64| pa.amplitude_unchecked(z).conj() * pb.amplitude_unchecked(z),
                &breaks,
                opts,
            )?;
            let value = integral.value * (2.0 * p.beam_area * EPS0 * n[a] * n[b]);
            g[(a, b)] = value;
            g[(b, a)] = value.conj();
        }
    }
    Ok(g)
}

/// Stored optical energy for mode amplitudes `c₋`, `c₊` (photon-number normalized), J.
pub fn cavity_energy(x: f64, p: &RingCavityParams, c_minus: Complex64, c_plus: Complex64) -> Result<f64, RingError> {
    if c_minus == ZERO && c_plus == ZERO {
        return Ok(0.0);
    }
    let g = cavity_energy_matrix(x, p)?;
    let c = Vector2::new(c_minus, c_plus);
    Ok((c.adjoint() * g * c)[(0, 0)].re)
}

/// Map from `(c₋(0), c₊(0))` to `(c₋(x), c₊(x))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMap {
    /// `I + x [[0, -ik_p], [-ik_p, 0]]`.
    pub linear: Matrix2<Complex64>,
    /// `[[cos k_p x, -i sin k_p x], [-i sin k_p x, cos k_p x]]`, unitary.
    pub exact: Matrix2<Complex64>,
    pub warning: Option<Warning>,
}

pub fn mode_mixing(x: f64, k_p: f64) -> MixingMap {
    let phase = k_p * x;
    let (s, c) = phase.sin_cos();
    let warning = (phase.abs() > 0.01).then_some(Warning::Linearization { phase: phase.abs() });
    MixingMap {
        linear: Matrix2::new(ONE, -I * phase, -I * phase, ONE),
        exact: Matrix2::new(ONE * c, -I * s, -I * s, ONE * c),
        warning,
    }
}

/// Standing-wave amplitudes `(c₋(x), c₊(x))` built from the travelling-wave amplitudes
/// `(c₁, c₂)`: `c± = e^{ik_pL/2} (e^{-ik_p x} c₁ ± e^{ik_p x} c₂) / √2`.
pub fn standing_waves(x: f64, k_p: f64, length: f64, travelling: Vector2<Complex64>) -> Vector2<Complex64> {
    let pre = cis(0.5 * k_p * length) * std::f64::consts::FRAC_1_SQRT_2;
    let a = cis(-k_p * x) * travelling[0];
    let b = cis(k_p * x) * travelling[1];
    Vector2::new(pre * (a - b), pre * (a + b))
}

/// `g = 2iω_s k_p`, rad/s per m.
pub fn coherent_coupling_strength(p: &RingCavityParams, k_p: f64) -> Result<Complex64, RingError> {
    let res = solve_resonances(p)?;
    Ok(I * (2.0 * res.omega_s * k_p))
}

/// Coupling of the standing-wave modes to the input channels at displacement `x`.
///
/// Modes and input channels transform with the same exact map `W(x)`, so the coupling
/// matrix is `√(2γ) W(x)† W(x)`.
pub fn environment_coupling(x: f64, k_p: f64, gamma: f64) -> Matrix2<Complex64> {
    let w = mode_mixing(x, k_p).exact;
    w.adjoint() * w * Complex64::new((2.0 * gamma).sqrt(), 0.0)
}

/// Central-difference first derivative of [`environment_coupling`] at `x = 0`, largest entry.
pub fn environment_linear_coefficient(k_p: f64, gamma: f64, step: f64) -> f64 {
    let d = (environment_coupling(step, k_p, gamma) - environment_coupling(-step, k_p, gamma)) / Complex64::new(2.0 * step, 0.0);
    d.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ring(r: f64) -> RingCavityParams {
        RingCavityParams::new(r, 0.01, 1.0, 0).unwrap()
    }

    #[test]
    fn params_validation() {
        assert!(RingCavityParams::new(1.2, 0.01, 1.0, 0).is_err());
        assert!(RingCavityParams::new(0.3, 0.01, 0.0, 0).is_err());
        assert!(RingCavityParams::new(0.3, 1.5, 1.0, 0).is_err());
        let mut p = ring(0.3);
        p.t = 0.5;
        assert!(p.validate().is_err());
        assert!(RingCavityParams::new(0.3, 0.0, 1.0, 0).is_ok());
    }

    #[test]
    fn membrane_is_unitary() {
        let p = ring(0.3);
        let m = transfer_matrices(3.0, 0.0, &p).membrane;
        let residual = m.adjoint() * m - Matrix2::identity();
        assert!(residual.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn symmetric_arms_at_rest() {
        let p = ring(0.3);
        let k = 4.2;
        let m = transfer_matrices(k, 0.0, &p);
        assert_eq!(m.ec[(0, 1)], m.ec[(1, 0)]);
        assert!((m.ec[(0, 1)] - cis(k * 0.5)).norm() < 1e-15);
        assert_eq!(m.ec[(0, 0)], ZERO);
    }

    #[test]
    fn circulation_independent_of_displacement() {
        let p = RingCavityParams::new(0.3, 0.01, 1.0, 0).unwrap();
        let k = 7.3;
        let a = transfer_matrices(k, 0.0, &p).circulation();
        let b = transfer_matrices(k, 1e-7, &p).circulation();
        assert!((a - b).iter().all(|z| z.norm() < 1e-14));
    }

    #[test]
    fn lossless_loop_entries() {
        let p = ring(0.0);
        let t = closed_loop_matrix(2.0, &p);
        assert_eq!(t[(0, 1)], ZERO);
        assert_eq!(t[(1, 0)], ZERO);
        let p = ring(0.3);
        let k = 2.0;
        let e = cis(k * p.length);
        let t = closed_loop_matrix(k, &p);
        assert!((t[(0, 0)] - (ONE - I * p.t * e)).norm() < 1e-15);
        assert!((t[(0, 1)] + e * p.r).norm() < 1e-15);
    }

    #[test]
    fn detuning_and_wavenumber_routes_agree() {
        let p = RingCavityParams::new(0.4, 0.02, 0.7, 3).unwrap();
        let delta = 0.37;
        let k = p.wavenumber_at(delta);
        assert!((p.detuning_of(k) - delta).abs() < 1e-13);
        let a = closed_loop_matrix(k, &p);
        let b = closed_loop_matrix_at(delta, &p);
        assert!((a - b).iter().all(|z| z.norm() < 1e-13));
        let ta = transfer_matrices(k, 0.01, &p);
        let tb = transfer_matrices_at(delta, 0.01, &p);
        assert!((ta.ec - tb.ec).iter().all(|z| z.norm() < 1e-13));
    }

    #[test]
    fn resonance_edge_cases() {
        let r0 = solve_resonances(&ring(0.0)).unwrap();
        assert_eq!(r0.omega_s, 0.0);
        assert_eq!(r0.k_plus, r0.k_minus);
        let r1 = solve_resonances(&ring(1.0)).unwrap();
        assert!((r1.omega_s - PI * C / 2.0).abs() < 1e-15 * r1.omega_s);
        assert!((r1.omega_s - r1.fsr / 4.0).abs() < 1e-6);
    }

    #[test]
    fn splitting_from_phases_matches_closed_form() {
        for r in [0.01, 0.1, 0.3, 0.9, 1.0] {
            let p = RingCavityParams::new(r, 0.01, 1.0, 5_000_000).unwrap();
            let res = solve_resonances(&p).unwrap();
            let rel = (res.omega_s_from_phases(p.length) - res.omega_s).abs() / res.omega_s;
            assert!(rel < 1e-12, "r={r}: {rel}");
            assert!(res.omega_s <= res.fsr / 4.0 * (1.0 + 1e-15));
        }
    }

    #[test]
    fn resonances_are_poles() {
        for r in [0.01, 0.1, 0.3, 0.9, 1.0] {
            let p = RingCavityParams::new(r, 0.01, 1.0, 0).unwrap();
            let res = solve_resonances(&p).unwrap();
            for k in [res.k_minus, res.k_plus] {
                assert!(closed_loop_matrix(k, &p).determinant().norm() < 1e-10);
            }
            let (dm, dp) = res.detunings();
            let p_far = RingCavityParams { fsr_index: 4_000_000, ..p };
            for d in [dm, dp] {
                assert!(closed_loop_matrix_at(d, &p_far).determinant().norm() < 1e-10);
            }
        }
    }

    #[test]
    fn linewidth_scaling() {
        assert_eq!(linewidth(&RingCavityParams::new(0.3, 0.0, 1.0, 0).unwrap()), 0.0);
        let g = linewidth(&ring(0.3));
        assert!((g - 1.49896229e4).abs() < 1e-4);
        let g2 = linewidth(&RingCavityParams::new(0.3, 0.01, 2.0, 0).unwrap());
        assert!((2.0 * g2 - g).abs() < 1e-12 * g);
    }

    #[test]
    fn zero_input_gives_zero_field() {
        let e = intracavity_response_at(0.1, 0.0, &ring(0.3), Vector2::zeros()).unwrap();
        assert_eq!(e, Vector2::zeros());
    }

    #[test]
    fn lossless_pole_is_singular() {
        let p = RingCavityParams::new(0.3, 0.0, 1.0, 0).unwrap();
        let res = solve_resonances(&p).unwrap();
        let err = intracavity_response(res.k_minus, 0.0, &p, Vector2::new(ONE, ZERO)).unwrap_err();
        assert!(matches!(err, RingError::SingularResponse { .. }));
    }

    #[test]
    fn profile_nodes_and_antinodes() {
        let p = RingCavityParams::new(0.3, 0.01, 1.0, 20).unwrap();
        for x in [0.0, 0.013, -0.021] {
            let minus = ModeProfile::new(Branch::Minus, x, &p).unwrap();
            let plus = ModeProfile::new(Branch::Plus, x, &p).unwrap();
            let zx = fold(x, p.length);
            assert!(minus.amplitude(zx).unwrap().norm() < 1e-12);
            assert!((plus.amplitude(zx).unwrap().norm() - 2.0).abs() < 1e-12);
        }
        let m = ModeProfile::new(Branch::Minus, 0.0, &p).unwrap();
        assert!(m.amplitude(-0.1).is_err());
        assert!(m.amplitude(1.1).is_err());
        assert_eq!(m.amplitude(1.0).unwrap(), m.amplitude(0.0).unwrap());
    }

    #[test]
    fn mixing_map_identity_and_unitarity() {
        let m = mode_mixing(0.0, 5.9e6);
        assert_eq!(m.linear, Matrix2::identity());
        assert!((m.exact - Matrix2::identity()).iter().all(|z| z.norm() == 0.0));
        assert!(m.warning.is_none());
        let big = mode_mixing(1e-8, 5.9e6);
        assert!(big.warning.is_some());
        let u = big.exact.adjoint() * big.exact - Matrix2::identity();
        assert!(u.iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn coupling_strength() {
        assert_eq!(coherent_coupling_strength(&ring(0.0), 5.0).unwrap().norm(), 0.0);
        let p = ring(0.3);
        let g = coherent_coupling_strength(&p, 5.9e6).unwrap();
        let res = solve_resonances(&p).unwrap();
        assert_eq!(g.re, 0.0);
        assert!((g.im - 2.0 * res.omega_s * 5.9e6).abs() < 1e-15 * g.im);
    }

    #[test]
    fn stored_energy_per_photon() {
        for r in [0.3, 0.9] {
            let p = RingCavityParams::new(r, 0.01, 1e-4, 94).unwrap();
            let res = solve_resonances(&p).unwrap();
            let g = cavity_energy_matrix(0.0, &p).unwrap();
            let expected = [
                HBAR * res.omega_minus * (1.0 + p.t / (res.k_minus * p.length)),
                HBAR * res.omega_plus * (1.0 - p.t / (res.k_plus * p.length)),
            ];
            for i in 0..2 {
                assert!((g[(i, i)].re - expected[i]).abs() < 1e-10 * expected[i], "r={r} mode {i}");
            }
            assert!(g[(0, 1)].norm() < 1e-10 * expected[0]);
        }
        let mirror = RingCavityParams::new(1.0, 0.01, 1e-4, 94).unwrap();
        let res = solve_resonances(&mirror).unwrap();
        let e = cavity_energy(3e-8, &mirror, ZERO, ONE).unwrap();
        assert!((e - HBAR * res.omega_plus).abs() < 1e-10 * e);
        assert_eq!(cavity_energy(0.0, &mirror, ZERO, ZERO).unwrap(), 0.0);
    }

    #[test]
    fn environment_coupling_has_no_linear_term() {
        let k_p = 5.9e6;
        let gamma = 3.7e4;
        assert!(environment_linear_coefficient(k_p, gamma, 1e-10) < 1e-10 * (2.0 * gamma).sqrt());
        let c = environment_coupling(2e-8, k_p, gamma);
        assert!((c[(0, 0)].re - (2.0 * gamma).sqrt()).abs() < 1e-12);
    }
}
