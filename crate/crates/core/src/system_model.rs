//! Matrix-pencil model of optical modes coupled to mechanical coordinates, and builders for
//! the standard example systems.
//!
//! A model holds `H(x) = H0 + Σ x_j H_j` (rad/s, rad/s per m) and the environment coupling
//! `Γ(x) = Γ0 + Σ x_j Γ_j` (√(rad/s), √(rad/s) per m) for `N` optical modes, `K ≤ N`
//! environment channels and `J` mechanical coordinates.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::constants::HBAR;
use crate::linalg::{hermitian_defect, max_abs};
use crate::ring_cavity::{self, RingCavityParams, RingError};
use crate::CMatrix;

/// Relative Hermiticity tolerance applied by [`LinearSystemModel::validate`].
pub const HERMITIAN_RTOL: f64 = 1e-12;

/// One invariant broken by a candidate model.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NonHermitian { matrix: String, max_asymmetry: f64 },
    DimensionMismatch { matrix: String, expected: String, found: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonHermitian {
                matrix,
                max_asymmetry,
            } => write!(f, "{matrix} is not Hermitian (max asymmetry {max_asymmetry:e})"),
            Violation::DimensionMismatch {
                matrix,
                expected,
                found,
            } => write!(f, "{matrix}: expected {expected}, found {found}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("length must be positive, got {0}")]
    NonPositiveLength(f64),
    #[error("linewidth must be non-negative, got {0}")]
    NegativeLinewidth(f64),
    #[error("parameter {name} must be {requirement}, got {value}")]
    NonPositiveParameter {
        name: &'static str,
        requirement: &'static str,
        value: f64,
    },
    #[error(transparent)]
    Ring(#[from] RingError),
}

impl ModelError {
    pub fn violations(&self) -> &[Violation] {
        match self {
            ModelError::Invalid(v) => v,
            _ => &[],
        }
    }
}

/// Mechanical oscillator attached to the optical system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalOscillator {
    /// kg
    pub mass: f64,
    /// rad/s
    pub omega_m: f64,
    /// rad/s
    pub gamma_m: f64,
    /// K
    pub temperature: f64,
    /// Static external force, N.
    pub external_force: f64,
}

impl MechanicalOscillator {
    pub fn new(mass: f64, omega_m: f64, gamma_m: f64, temperature: f64) -> Result<Self, ModelError> {
        let osc = Self {
            mass,
            omega_m,
            gamma_m,
            temperature,
            external_force: 0.0,
        };
        osc.validate()?;
        Ok(osc)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::NonPositiveParameter {
                    name,
                    requirement: "positive",
                    value,
                })
            }
        };
        let non_negative = |name, value: f64| {
            if value >= 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(ModelError::NonPositiveParameter {
                    name,
                    requirement: "non-negative",
                    value,
                })
            }
        };
        positive("mass", self.mass)?;
        positive("omega_m", self.omega_m)?;
        non_negative("gamma_m", self.gamma_m)?;
        non_negative("temperature", self.temperature)?;
        if !self.external_force.is_finite() {
            return Err(ModelError::NonPositiveParameter {
                name: "external_force",
                requirement: "finite",
                value: self.external_force,
            });
        }
        Ok(())
    }

    /// Zero-point position spread `√(ħ / 2 m Ω_m)`, m.
    pub fn x_zpf(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_m)).sqrt()
    }
}

/// Linearized optomechanical system as a pair of matrix pencils.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystemModel {
    pub n_modes: usize,
    pub n_mech: usize,
    pub h0: CMatrix,
    pub hj: Vec<CMatrix>,
    pub gamma0: CMatrix,
    pub gammaj: Vec<CMatrix>,
    pub mode_labels: Vec<String>,
    pub mech_labels: Vec<String>,
}

impl LinearSystemModel {
    /// Build a model with default labels and validate it.
    pub fn new(h0: CMatrix, hj: Vec<CMatrix>, gamma0: CMatrix, gammaj: Vec<CMatrix>) -> Result<Self, ModelError> {
        let n_modes = h0.nrows();
        let n_mech = hj.len();
        Self {
            n_modes,
            n_mech,
            h0,
            hj,
            gamma0,
            gammaj,
            mode_labels: default_labels("a", n_modes),
            mech_labels: default_labels("x", n_mech),
        }
        .validate()
    }

    /// Build a model without environment channels (`Γ0 = Γ_j = 0`, `K = N`).
    pub fn closed(h0: CMatrix, hj: Vec<CMatrix>) -> Result<Self, ModelError> {
        let n = h0.nrows();
        let gammaj = vec![CMatrix::zeros(n, n); hj.len()];
        Self::new(h0, hj, CMatrix::zeros(n, n), gammaj)
    }

    pub fn with_labels(mut self, modes: &[&str], mech: &[&str]) -> Result<Self, ModelError> {
        self.mode_labels = modes.iter().map(|s| s.to_string()).collect();
        self.mech_labels = mech.iter().map(|s| s.to_string()).collect();
        self.validate()
    }

    /// Number of environment channels `K`.
    pub fn n_channels(&self) -> usize {
        self.gamma0.ncols()
    }

    /// Return the model if every invariant holds, otherwise all violations found.
    pub fn validate(self) -> Result<Self, ModelError> {
        let violations = self.violations();
        if violations.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let n = self.n_modes;
        let k = self.gamma0.ncols();
        let mut out = Vec::new();
        let mut shape = |name: String, m: &CMatrix, rows: usize, cols: usize| {
            if m.shape() != (rows, cols) {
                out.push(Violation::DimensionMismatch {
                    matrix: name,
                    expected: format!("{rows}x{cols}"),
                    found: format!("{}x{}", m.nrows(), m.ncols()),
                });
                false
            } else {
                true
            }
        };
        let mut square = vec![];
        if shape("H0".into(), &self.h0, n, n) {
            square.push(("H0".to_string(), &self.h0));
        }
        for (j, h) in self.hj.iter().enumerate() {
            let name = format!("H{}", j + 1);
            if shape(name.clone(), h, n, n) {
                square.push((name, h));
            }
        }
        shape("Gamma0".into(), &self.gamma0, n, k);
        for (j, g) in self.gammaj.iter().enumerate() {
            shape(format!("Gamma{}", j + 1), g, n, k);
        }
        if k > n {
            out.push(Violation::DimensionMismatch {
                matrix: "Gamma0".into(),
                expected: format!("at most {n} environment channels"),
                found: format!("{k}"),
            });
        }
        let mut count = |what: &str, found: usize, expected: usize| {
            if found != expected {
                out.push(Violation::DimensionMismatch {
                    matrix: what.into(),
                    expected: format!("{expected} entries"),
                    found: format!("{found}"),
                });
            }
        };
        count("Hj list", self.hj.len(), self.n_mech);
        count("Gammaj list", self.gammaj.len(), self.n_mech);
        count("mode labels", self.mode_labels.len(), n);
        count("mechanical labels", self.mech_labels.len(), self.n_mech);
        for (name, m) in square {
            let defect = hermitian_defect(m);
            if defect > HERMITIAN_RTOL * max_abs(m) || !defect.is_finite() {
                out.push(Violation::NonHermitian {
                    matrix: name,
                    max_asymmetry: defect,
                });
            }
        }
        let finite = |m: &CMatrix| m.iter().all(|z| z.re.is_finite() && z.im.is_finite());
        if !finite(&self.gamma0) || !self.gammaj.iter().all(finite) {
            out.push(Violation::DimensionMismatch {
                matrix: "Gamma".into(),
                expected: "finite entries".into(),
                found: "non-finite entry".into(),
            });
        }
        out
    }

    /// Express the optical modes in a new basis: with old modes `a = U a'`, every `H`
    /// becomes `U† H U` and every `Γ` becomes `U† Γ`.
    pub fn rotate_optical(&self, u: &CMatrix) -> Result<Self, ModelError> {
        let ud = u.adjoint();
        Self {
            n_modes: self.n_modes,
            n_mech: self.n_mech,
            h0: &ud * &self.h0 * u,
            hj: self.hj.iter().map(|h| &ud * h * u).collect(),
            gamma0: &ud * &self.gamma0,
            gammaj: self.gammaj.iter().map(|g| &ud * g).collect(),
            mode_labels: default_labels("b", self.n_modes),
            mech_labels: self.mech_labels.clone(),
        }
        .validate()
    }

    /// Change mechanical coordinates to `x' = R x` for an orthogonal `R` (J×J). The new
    /// coefficients are `H'_k = Σ_j R_kj H_j`, likewise for `Γ`.
    pub fn rotate_mechanical(&self, r: &DMatrix<f64>, labels: &[&str]) -> Result<Self, ModelError> {
        if r.shape() != (self.n_mech, self.n_mech) {
            return Err(ModelError::Invalid(vec![Violation::DimensionMismatch {
                matrix: "mechanical rotation".into(),
                expected: format!("{0}x{0}", self.n_mech),
                found: format!("{}x{}", r.nrows(), r.ncols()),
            }]));
        }
        let combine = |mats: &[CMatrix], row: usize| {
            mats.iter()
                .enumerate()
                .fold(CMatrix::zeros(mats[0].nrows(), mats[0].ncols()), |acc, (j, m)| {
                    acc + m * Complex64::new(r[(row, j)], 0.0)
                })
        };
        Self {
            n_modes: self.n_modes,
            n_mech: self.n_mech,
            h0: self.h0.clone(),
            hj: (0..self.n_mech).map(|k| combine(&self.hj, k)).collect(),
            gamma0: self.gamma0.clone(),
            gammaj: (0..self.n_mech).map(|k| combine(&self.gammaj, k)).collect(),
            mode_labels: self.mode_labels.clone(),
            mech_labels: labels.iter().map(|s| s.to_string()).collect(),
        }
        .validate()
    }
}

fn default_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

fn real(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn diag(values: &[f64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        values.len(),
        values.iter().map(|&v| real(v)),
    ))
}

/// Identifier of a built-in example system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PresetId {
    SingleCavity,
    LigoArms,
    RacetrackDissipative,
    ThreeMode,
    CoupledCavity,
    RingCavityTwoMode,
}

impl PresetId {
    pub const ALL: [PresetId; 6] = [
        PresetId::SingleCavity,
        PresetId::LigoArms,
        PresetId::RacetrackDissipative,
        PresetId::ThreeMode,
        PresetId::CoupledCavity,
        PresetId::RingCavityTwoMode,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PresetId::SingleCavity => "single_cavity",
            PresetId::LigoArms => "ligo_arms",
            PresetId::RacetrackDissipative => "racetrack_dissipative",
            PresetId::ThreeMode => "three_mode",
            PresetId::CoupledCavity => "coupled_cavity",
            PresetId::RingCavityTwoMode => "ring_cavity_two_mode",
        }
    }

    /// Parameter names accepted by the preset, in canonical order.
    pub fn parameter_names(&self) -> &'static [&'static str] {
        match self {
            PresetId::SingleCavity => &["omega_a", "length"],
            PresetId::LigoArms => &["omega0", "g"],
            PresetId::RacetrackDissipative => &["omega_a", "gamma", "g_gamma"],
            PresetId::ThreeMode => &["omega1", "omega2", "g0"],
            PresetId::CoupledCavity => &["omega1", "omega2", "omega_s", "g1", "g2"],
            PresetId::RingCavityTwoMode => &["r", "t0", "length", "fsr_index", "k_p"],
        }
    }
}

impl fmt::Display for PresetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PresetId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PresetId::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = PresetId::ALL.iter().map(|p| p.as_str()).collect();
                format!("unknown preset '{s}' (expected one of {})", names.join(", "))
            })
    }
}

/// A preset together with its parameter record.
#[derive(Debug, Clone, PartialEq)]
pub enum Preset {
    SingleCavity { omega_a: f64, length: f64 },
    LigoArms { omega0: f64, g: f64 },
    RacetrackDissipative { omega_a: f64, gamma: f64, g_gamma: f64 },
    ThreeMode { omega1: f64, omega2: f64, g0: f64 },
    CoupledCavity { omega1: f64, omega2: f64, omega_s: f64, g1: f64, g2: f64 },
    RingCavityTwoMode { ring: RingCavityParams, k_p: f64 },
}

impl Preset {
    pub fn id(&self) -> PresetId {
        match self {
            Preset::SingleCavity { .. } => PresetId::SingleCavity,
            Preset::LigoArms { .. } => PresetId::LigoArms,
            Preset::RacetrackDissipative { .. } => PresetId::RacetrackDissipative,
            Preset::ThreeMode { .. } => PresetId::ThreeMode,
            Preset::CoupledCavity { .. } => PresetId::CoupledCavity,
            Preset::RingCavityTwoMode { .. } => PresetId::RingCavityTwoMode,
        }
    }

    pub fn build(&self) -> Result<LinearSystemModel, ModelError> {
        match *self {
            Preset::SingleCavity { omega_a, length } => single_cavity(omega_a, length),
            Preset::LigoArms { omega0, g } => ligo_arms(omega0, g),
            Preset::RacetrackDissipative {
                omega_a,
                gamma,
                g_gamma,
            } => racetrack(omega_a, gamma, g_gamma),
            Preset::ThreeMode { omega1, omega2, g0 } => three_mode(omega1, omega2, g0),
            Preset::CoupledCavity {
                omega1,
                omega2,
                omega_s,
                g1,
                g2,
            } => coupled_cavity(omega1, omega2, omega_s, g1, g2),
            Preset::RingCavityTwoMode { ring, k_p } => ring_cavity_two_mode(&ring, k_p),
        }
    }
}

/// One Fabry–Pérot mode whose frequency is pulled by the end-mirror position with
/// `g_ω = ω_a / L`.
pub fn single_cavity(omega_a: f64, length: f64) -> Result<LinearSystemModel, ModelError> {
    if !(length > 0.0) {
        return Err(ModelError::NonPositiveLength(length));
    }
    let g = omega_a / length;
    LinearSystemModel::closed(diag(&[omega_a]), vec![diag(&[-g])])?.with_labels(&["a"], &["x"])
}

/// Two identical arm cavities, each pulled by its own end mirror.
pub fn ligo_arms(omega0: f64, g: f64) -> Result<LinearSystemModel, ModelError> {
    LinearSystemModel::closed(diag(&[omega0, omega0]), vec![diag(&[-g, 0.0]), diag(&[0.0, -g])])?
        .with_labels(&["a", "b"], &["x1", "x2"])
}

/// One mode whose coupling to its waveguide depends on the resonator position.
pub fn racetrack(omega_a: f64, gamma: f64, g_gamma: f64) -> Result<LinearSystemModel, ModelError> {
    if !(gamma >= 0.0) {
        return Err(ModelError::NegativeLinewidth(gamma));
    }
    LinearSystemModel::new(
        diag(&[omega_a]),
        vec![diag(&[0.0])],
        diag(&[(2.0 * gamma).sqrt()]),
        vec![diag(&[g_gamma])],
    )?
    .with_labels(&["a"], &["x"])
}

/// Two transverse modes scattered into each other by an acoustic mode.
pub fn three_mode(omega1: f64, omega2: f64, g0: f64) -> Result<LinearSystemModel, ModelError> {
    let h1 = CMatrix::from_row_slice(2, 2, &[real(0.0), real(g0), real(g0), real(0.0)]);
    LinearSystemModel::closed(diag(&[omega1, omega2]), vec![h1])?.with_labels(&["a1", "a2"], &["x"])
}

/// Three-mode scattering constant `G0 = √(Λ ħ ω1 ω2 / (m Ω_m L²))`, rad/s per m.
pub fn three_mode_coupling_constant(
    overlap: f64,
    omega1: f64,
    omega2: f64,
    mass: f64,
    omega_m: f64,
    length: f64,
) -> Result<f64, ModelError> {
    if !(overlap >= 0.0 && overlap.is_finite()) {
        return Err(ModelError::NonPositiveParameter {
            name: "overlap",
            requirement: "non-negative",
            value: overlap,
        });
    }
    for (name, value) in [
        ("omega1", omega1),
        ("omega2", omega2),
        ("mass", mass),
        ("omega_m", omega_m),
        ("length", length),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ModelError::NonPositiveParameter {
                name,
                requirement: "positive",
                value,
            });
        }
    }
    Ok((overlap * HBAR * omega1 * omega2 / (mass * omega_m * length * length)).sqrt())
}

/// Two sub-cavities sharing a movable partially transmitting mirror.
pub fn coupled_cavity(omega1: f64, omega2: f64, omega_s: f64, g1: f64, g2: f64) -> Result<LinearSystemModel, ModelError> {
    let h0 = CMatrix::from_row_slice(2, 2, &[real(omega1), real(omega_s), real(omega_s), real(omega2)]);
    LinearSystemModel::closed(h0, vec![diag(&[-g1, g2])])?.with_labels(&["a", "b"], &["x"])
}

/// Ring cavity in its lower/upper standing-wave eigenbasis `(c₋, c₊)`.
///
/// The membrane displacement enters only through the off-diagonal generator
/// `H1 = [[0, 2iω_s k_p], [-2iω_s k_p, 0]]`, which reproduces the exact mode map
/// `dc±/dx = -i k_p c∓`. Both modes leak through the front mirror at `√(2γ)`.
pub fn ring_cavity_two_mode(ring: &RingCavityParams, k_p: f64) -> Result<LinearSystemModel, ModelError> {
    ring.validate()?;
    let res = ring_cavity::solve_resonances(ring)?;
    let g = 2.0 * res.omega_s * k_p;
    let h1 = CMatrix::from_row_slice(
        2,
        2,
        &[real(0.0), Complex64::new(0.0, g), Complex64::new(0.0, -g), real(0.0)],
    );
    let kappa = (2.0 * ring_cavity::linewidth(ring)).sqrt();
    LinearSystemModel::new(
        diag(&[res.omega_minus, res.omega_plus]),
        vec![h1],
        diag(&[kappa, kappa]),
        vec![CMatrix::zeros(2, 2)],
    )?
    .with_labels(&["c_minus", "c_plus"], &["x"])
}
