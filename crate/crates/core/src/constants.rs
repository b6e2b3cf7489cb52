/// CODATA 2018 values in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    /// Reduced Planck constant, J·s.
    pub hbar: f64,
    /// Speed of light in vacuum, m/s.
    pub c: f64,
    /// Vacuum permittivity, F/m.
    pub eps0: f64,
    /// Boltzmann constant, J/K.
    pub kb: f64,
}

pub const HBAR: f64 = 1.054_571_817e-34;
pub const C: f64 = 299_792_458.0;
pub const EPS0: f64 = 8.854_187_812_8e-12;
pub const KB: f64 = 1.380_649e-23;

pub const CODATA: PhysicalConstants = PhysicalConstants {
    hbar: HBAR,
    c: C,
    eps0: EPS0,
    kb: KB,
};

impl Default for PhysicalConstants {
    fn default() -> Self {
        CODATA
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_positive() {
        let k = PhysicalConstants::default();
        assert!(k.hbar > 0.0 && k.c > 0.0 && k.eps0 > 0.0 && k.kb > 0.0);
        assert_eq!(k, CODATA);
    }
}
