use std::fmt;

/// Non-fatal conditions attached to results.
#[derive(Debug, Clone, PartialEq)]
pub enum Warning {
    /// A resolved-sideband closed form was evaluated with `omega_m / gamma` below the threshold.
    RegimeViolation { sideband_ratio: f64, threshold: f64 },
    /// A linearized mixing map was requested with `|k_p x|` above 0.01.
    Linearization { phase: f64 },
    /// The mirrored (upper-mode) pump computation is an extension of the cooling derivation.
    MirroredPump,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::RegimeViolation {
                sideband_ratio,
                threshold,
            } => write!(
                f,
                "resolved-sideband approximation questionable: omega_m/gamma = {sideband_ratio} < {threshold}"
            ),
            Warning::Linearization { phase } => {
                write!(f, "linearized mixing used at |k_p x| = {phase} > 0.01")
            }
            Warning::MirroredPump => write!(
                f,
                "upper-mode pumping uses the mirrored detuning extension of the cooling formulas"
            ),
        }
    }
}
