use std::f64::consts::TAU;

use omx_core::constants::C;
use omx_core::cooling::{self, CoolingScenario, PumpedMode};
use omx_core::ring_cavity::{self, Branch, ModeProfile, RingCavityParams};
use omx_core::system_model::{coupled_cavity, three_mode, MechanicalOscillator};
use omx_core::{classify, ClassificationReport, LinearSystemModel};
use omx_oracles as oracle;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn magnitudes(rep: &ClassificationReport) -> Vec<f64> {
    let mut out = Vec::new();
    for c in &rep.coordinates {
        out.extend(c.dispersive_shifts.iter().copied());
        out.extend(c.coherent_mixing.iter().map(|z| z.norm()));
        out.extend(c.dissipative_derivs.iter().copied());
    }
    out
}

fn assert_invariant(model: &LinearSystemModel, seed: u64) {
    let base = classify(model).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = oracle::random_unitary(model.n_modes, &mut rng);
    let rotated = classify(&model.rotate_optical(&u).unwrap()).unwrap();
    assert_eq!(base.flags(), rotated.flags());
    let a = magnitudes(&base);
    let b = magnitudes(&rotated);
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-9 * scale, "{x} vs {y}");
    }
}

fn mech() -> MechanicalOscillator {
    MechanicalOscillator::new(1e-9, TAU * 1e6, 1.0, 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coupled_cavity_classification_is_basis_free(
        w1 in 0.5f64..2.0, dw in -0.5f64..0.5, ws in 0.1f64..1.0,
        g1 in 0.1f64..2.0, g2 in 0.1f64..2.0, seed in any::<u64>(),
    ) {
        assert_invariant(&coupled_cavity(w1, w1 + dw, ws, g1, g2).unwrap(), seed);
    }

    #[test]
    fn three_mode_classification_is_basis_free(
        w in 1.0f64..3.0, split in prop_oneof![Just(0.0), 0.05f64..0.5], g in 0.01f64..1.0, seed in any::<u64>(),
    ) {
        assert_invariant(&three_mode(w, w + split, g).unwrap(), seed);
    }

    #[test]
    fn coupled_cavity_mixing_closed_form(
        w1 in 0.5f64..2.0, dw in -0.5f64..0.5, ws in 0.1f64..1.0, g1 in 0.1f64..2.0, g2 in 0.1f64..2.0,
    ) {
        let rep = classify(&coupled_cavity(w1 - dw, w1 + dw, ws, g1, g2).unwrap()).unwrap();
        let c = &rep.coordinates[0];
        let r = (dw * dw + ws * ws).sqrt();
        let common = (g2 - g1) / 2.0;
        let split = (g1 + g2) * dw / (2.0 * r);
        prop_assert!((c.dispersive_shifts[0] - (common - split)).abs() <= 1e-10 * (g1 + g2));
        prop_assert!((c.dispersive_shifts[1] - (common + split)).abs() <= 1e-10 * (g1 + g2));
        let mixing = (g1 + g2) * ws / (4.0 * r * r);
        prop_assert!((c.coherent_mixing[(0, 1)].norm() - mixing).abs() <= 1e-10 * mixing);
    }

    #[test]
    fn resonances_are_determinant_zeros(r in 0.0f64..1.0, length in 0.05f64..3.0, n in 0i64..50) {
        let p = RingCavityParams::new(r, 0.0, length, n).unwrap();
        let res = ring_cavity::solve_resonances(&p).unwrap();
        for delta in [res.detunings().0, res.detunings().1] {
            prop_assert!(ring_cavity::closed_loop_matrix_at(delta, &p).determinant().norm() < 1e-12);
        }
        prop_assert!(res.omega_minus <= res.omega_plus);
    }

    #[test]
    fn mode_profiles_share_the_standing_wave_symmetry(r in 0.05f64..0.95, frac in 0.0f64..1.0) {
        let p = RingCavityParams::new(r, 0.0, 1.0, 3).unwrap();
        let x = (frac - 0.5) * 0.2;
        for branch in [Branch::Minus, Branch::Plus] {
            let prof = ModeProfile::new(branch, x, &p).unwrap();
            let zx = prof.membrane_position();
            // Reflection through the membrane maps the mode onto ± itself.
            for k in 1..20 {
                let d = 0.4 * k as f64 / 20.0;
                let a = prof.amplitude(ring_cavity::fold(zx + d, p.length)).unwrap();
                let b = prof.amplitude(ring_cavity::fold(zx - d, p.length)).unwrap();
                prop_assert!((a.norm() - b.norm()).abs() < 1e-9 * (1.0 + a.norm()));
            }
        }
    }

    #[test]
    fn backaction_spectrum_is_non_negative(
        ratio in 2.0f64..200.0, pump in 0.0f64..1e7, w in -10.0f64..10.0,
    ) {
        let m = mech();
        let t0 = (2.0 * m.omega_m / ratio / C).sqrt();
        let s = CoolingScenario::tuned(1.0, t0, 2, m, pump, 5.9e6).unwrap();
        for pumped in [PumpedMode::Lower, PumpedMode::Upper] {
            prop_assert!(cooling::backaction_psd(&s.with_pumped(pumped), w * m.omega_m).unwrap() >= 0.0);
        }
    }

    #[test]
    fn mirrored_pump_flips_damping(ratio in 2.0f64..500.0, pump in 1.0f64..1e7) {
        let m = mech();
        let t0 = (2.0 * m.omega_m / ratio / C).sqrt();
        let s = CoolingScenario::tuned(1.0, t0, 2, m, pump, 5.9e6).unwrap();
        let low = cooling::linear_response_damping(&s).unwrap().gamma_opt;
        let high = cooling::linear_response_damping(&s.with_pumped(PumpedMode::Upper)).unwrap().gamma_opt;
        prop_assert!(low > 0.0 && high < 0.0);
        prop_assert!((low + high).abs() <= 1e-10 * low);
    }

    #[test]
    fn damping_ratio_forms_agree(
        omega_m in 1e5f64..1e8, t0 in 1e-3f64..0.1, length in 0.01f64..2.0, single in 0.01f64..2.0,
    ) {
        let m = MechanicalOscillator::new(1e-9, omega_m, 1.0, 0.0).unwrap();
        let s = CoolingScenario::tuned(length, t0, 1, m, 1e4, 5.9e6).unwrap();
        let ratio = cooling::damping_ratio(&s, single, C * 5.9e6).unwrap();
        prop_assert!(ratio.max_relative_spread < 1e-12);
        prop_assert!((ratio.from_rates - ratio.linewidth_form).abs() < 1e-9 * ratio.linewidth_form);
    }

    #[test]
    fn occupation_between_limits(
        gamma_opt_ratio in 1e-3f64..1e6, temperature in 0.0f64..1.0,
    ) {
        let m = MechanicalOscillator::new(1e-9, TAU * 1e6, 1.0, temperature).unwrap();
        let t0 = (2.0 * m.omega_m / 100.0 / C).sqrt();
        let base = CoolingScenario::tuned(1.0, t0, 2, m, 1.0, 5.9e6).unwrap();
        let per = cooling::optical_spring_damping(&base).unwrap().gamma_opt;
        let mut s = base;
        s.pump_amplitude = (gamma_opt_ratio * m.gamma_m / per).sqrt();
        let occ = cooling::occupation_number(&s).unwrap();
        let lo = occ.n_th.min(occ.n_ba);
        let hi = occ.n_th.max(occ.n_ba);
        prop_assert!(occ.n_limit >= lo * (1.0 - 1e-12) && occ.n_limit <= hi * (1.0 + 1e-12));
    }
}
