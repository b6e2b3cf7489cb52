use std::f64::consts::{PI, TAU};

use omx_core::constants::C;
use omx_core::cooling::{self, CoolingScenario, PumpedMode};
use omx_core::ring_cavity::{self, RingCavityParams};
use omx_core::system_model::{coupled_cavity, MechanicalOscillator};
use omx_core::{classify, Complex64};
use omx_oracles as oracle;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn determinant_scan_locates_splitting() {
    for r in [0.01, 0.1, 0.3, 0.9] {
        let p = RingCavityParams::new(r, 0.01, 1.0, 7).unwrap();
        let res = ring_cavity::solve_resonances(&p).unwrap();
        let scanned = oracle::scanned_omega_s(&p);
        assert!(rel(scanned, res.omega_s) < 1e-10, "r={r}: {scanned} vs {}", res.omega_s);
        assert!(rel(res.omega_s_from_phases(p.length), res.omega_s) < 1e-12);
    }
}

#[test]
fn resonances_zero_the_hand_determinant() {
    let p = RingCavityParams::new(0.45, 0.0, 0.3, 11).unwrap();
    let res = ring_cavity::solve_resonances(&p).unwrap();
    for k in [res.k_minus, res.k_plus] {
        assert!(oracle::loop_determinant(k, &p).norm() < 1e-12);
    }
}

#[test]
fn fitted_linewidth_matches() {
    for (r, t0) in [(0.3, 0.01), (0.9, 0.02), (0.1, 0.005)] {
        let p = RingCavityParams::new(r, t0, 1.0, 0).unwrap();
        let fit = oracle::fitted_linewidth(&p);
        let gamma = ring_cavity::linewidth(&p);
        assert!(rel(fit, gamma) < 1e-2, "r={r} t0={t0}: {fit} vs {gamma}");
    }
}

#[test]
fn response_peak_splitting_ratio() {
    let p03 = RingCavityParams::new(0.3, 0.01, 1.0, 0).unwrap();
    let p1 = RingCavityParams::new(1.0, 0.01, 1.0, 0).unwrap();
    let a = oracle::response_peaks(&p03, 4000);
    let b = oracle::response_peaks(&p1, 4000);
    assert_eq!(a.len(), 2);
    assert_eq!(b.len(), 2);
    let ratio = (a[1] - a[0]) / (b[1] - b[0]);
    let expected = 0.3_f64.asin() / (PI / 2.0);
    assert!(rel(ratio, expected) < 1e-6, "{ratio} vs {expected}");
}

#[test]
fn coupled_cavity_second_order_residual() {
    let (w1, w2, ws, g1, g2) = (1.0e3, 1.6e3, 0.5e3, 7.0e5, 1.3e6);
    let m = coupled_cavity(w1, w2, ws, g1, g2).unwrap();
    let rep = classify(&m).unwrap();
    let shifts = &rep.coordinates[0].dispersive_shifts;
    let eig0 = &rep.eigvals;
    let canon_h1 = rep.basis.adjoint() * &m.hj[0] * &rep.basis;
    for x in [1e-9, 1e-8, 1e-7, 1e-6] {
        let h = &m.h0 + &m.hj[0] * Complex64::new(x, 0.0);
        let h2 = nalgebra::Matrix2::new(h[(0, 0)], h[(0, 1)], h[(1, 0)], h[(1, 1)]);
        let exact = oracle::hermitian_2x2_eigenvalues(&h2);
        for i in 0..2 {
            let residual = (exact[i] - eig0[i] - x * shifts[i]).abs();
            let second: f64 = (0..2)
                .filter(|&l| l != i)
                .map(|l| canon_h1[(i, l)].norm_sqr() / (eig0[i] - eig0[l]))
                .sum();
            assert!(rel(residual / (x * x), second.abs()) < 1e-2, "x={x}: {residual}");
        }
    }
}

fn mech(gamma_m: f64, temperature: f64) -> MechanicalOscillator {
    MechanicalOscillator::new(1e-9, TAU * 1e6, gamma_m, temperature).unwrap()
}

fn tuned(ratio: f64, pump: f64, m: MechanicalOscillator) -> CoolingScenario {
    let t0 = (2.0 * m.omega_m / ratio / C).sqrt();
    CoolingScenario::tuned(1.0, t0, 4, m, pump, TAU / 1064e-9).unwrap()
}

#[test]
fn sideband_response_matches_time_domain() {
    for pumped in [PumpedMode::Lower, PumpedMode::Upper] {
        let s = tuned(50.0, 1e5, mech(1.0, 0.0)).with_pumped(pumped);
        for omega in [s.mech.omega_m, 0.37 * s.mech.omega_m] {
            let r = cooling::sideband_response(&s, omega).unwrap();
            let o = oracle::demodulated_sidebands(&s, omega);
            let scale = r.minus.norm().max(r.plus.norm());
            for (a, b) in [r.minus, r.minus_conj, r.plus, r.plus_conj].iter().zip(o) {
                assert!((a - b).norm() < 1e-6 * scale, "{a} vs {b}");
            }
        }
    }
}

#[test]
fn backaction_closed_form_matches_assembly() {
    for pumped in [PumpedMode::Lower, PumpedMode::Upper] {
        let s = tuned(20.0, 3e5, mech(1.0, 0.0)).with_pumped(pumped);
        for k in -40..=40 {
            let w = 0.1 * k as f64 * s.mech.omega_m;
            let a = cooling::backaction_psd(&s, w).unwrap();
            let b = oracle::assembled_backaction_psd(&s, w);
            assert!(rel(a, b) < 1e-12, "Ω={w}: {a} vs {b}");
        }
    }
}

#[test]
fn occupation_matches_quadrature() {
    let ratio_cavity = 1e4;
    for gamma_ratio in [1.0, 1e3, 1e10] {
        for temperature in [0.0, 1e-6, 1e-3] {
            let gamma_opt = 1.5e-13;
            let base = tuned(ratio_cavity, 1.0, mech(gamma_opt / gamma_ratio, temperature));
            let per_power = cooling::optical_spring_damping(&base).unwrap().gamma_opt;
            let mut s = base;
            s.pump_amplitude = (gamma_opt / per_power).sqrt();
            let occ = cooling::occupation_number(&s).unwrap();
            let quad = oracle::quadrature_occupation(&s, occ.gamma_opt);
            assert!(
                rel(quad, occ.n_mean) < 1e-6,
                "γ_opt/γ_m={gamma_ratio} T={temperature}: {} vs {quad}",
                occ.n_mean
            );
        }
    }
}

#[test]
fn ringdown_matches_closed_form() {
    let omega_m = TAU * 1e6;
    let gamma = omega_m / 50.0;
    let gamma_opt = gamma / 200.0;
    let base = tuned(50.0, 1.0, mech(gamma_opt / 100.0, 0.0));
    let per_power = cooling::optical_spring_damping(&base).unwrap().gamma_opt;
    let mut s = base;
    s.pump_amplitude = (gamma_opt / per_power).sqrt();
    let out = cooling::ringdown_simulate(&s, 1e-12, 8.0 / (1.01 * gamma_opt)).unwrap();
    assert!(rel(out.gamma_eff, out.gamma_eff_closed_form) < 0.05);
    let lr = cooling::linear_response_damping(&s).unwrap().gamma_opt + s.mech.gamma_m;
    assert!(rel(out.gamma_eff, lr) < 0.02, "{} vs {lr}", out.gamma_eff);
}

#[test]
fn bare_oscillator_ringdown() {
    let omega_m = TAU * 1e6;
    let s = tuned(50.0, 0.0, mech(omega_m / 1000.0, 0.0));
    let out = cooling::ringdown_simulate(&s, 1e-12, 8000.0 / omega_m).unwrap();
    assert!(rel(out.gamma_eff, omega_m / 1000.0) < 1e-3, "{}", out.gamma_eff);
}

#[test]
fn heating_ringdown_grows() {
    let omega_m = TAU * 1e6;
    let gamma_opt = omega_m / 50.0 / 200.0;
    let base = tuned(50.0, 1.0, mech(gamma_opt / 100.0, 0.0));
    let per_power = cooling::optical_spring_damping(&base).unwrap().gamma_opt;
    let mut s = base.with_pumped(PumpedMode::Upper);
    s.pump_amplitude = (gamma_opt / per_power).sqrt();
    let out = cooling::ringdown_simulate(&s, 1e-14, 2.0 / gamma_opt).unwrap();
    assert!(out.gamma_eff < 0.0);
    assert!(rel(out.gamma_eff, out.gamma_eff_closed_form) < 0.05);
}
