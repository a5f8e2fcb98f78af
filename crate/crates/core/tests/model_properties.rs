use std::f64::consts::{FRAC_PI_2, PI};

use njpo_core::dynamics::Dynamics;
use njpo_core::model::{FieldState, Mode, ModeParams, PumpDrive, StabilityRegion, TwoModeSystem};
use num_complex::Complex;
use proptest::prelude::*;

type Sys = TwoModeSystem<f64>;

/// Devices with loss rates and Kerr coefficients spread around the measured
/// ones (values in Hz, scaled by 2π inside `from_hz`).
fn system() -> impl Strategy<Value = Sys> {
    (0.2e6..2e6f64, 0.2e6..2e6f64, 0.5..0.99f64, 0.5..0.99f64, 1e4..5e5f64, 1e4..5e5f64).prop_map(
        |(g3, g4, r3, r4, a3, a4)| {
            Sys::new(
                ModeParams::from_hz(4.3e9, g3, g3 * r3, a3).unwrap(),
                ModeParams::from_hz(6.1e9, g4, g4 * r4, a4).unwrap(),
            )
        },
    )
}

fn state() -> impl Strategy<Value = FieldState<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(a, b, c, d)| FieldState::new(Complex::new(a, b), Complex::new(c, d)))
}

/// `∂H/∂A*` by central differences over the real and imaginary parts.
fn wirtinger(sys: &Sys, pump: &PumpDrive<f64>, s: &FieldState<f64>, mode: Mode, h: f64) -> Complex<f64> {
    let shifted = |dz: Complex<f64>| {
        let mut t = *s;
        match mode {
            Mode::Three => t.a3 += dz,
            Mode::Four => t.a4 += dz,
        }
        sys.classical_hamiltonian(pump, &t)
    };
    let dx = (shifted(Complex::new(h, 0.0)) - shifted(Complex::new(-h, 0.0))) / (2.0 * h);
    let dy = (shifted(Complex::new(0.0, h)) - shifted(Complex::new(0.0, -h))) / (2.0 * h);
    Complex::new(dx, dy) * 0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conservative_drift_is_hamiltonian_gradient(
        sys in system(),
        eps_ratio in 0.0..5.0f64,
        delta_ratio in -5.0..5.0f64,
        s in state(),
    ) {
        // Work in units of Γ so that H is of order one.
        let g = sys.gamma_eff();
        let scaled = Sys::new(
            ModeParams::new(1.0, sys.mode3().gamma_total() / g, sys.mode3().gamma_ext() / g, sys.mode3().kerr() / g).unwrap(),
            ModeParams::new(1.0, sys.mode4().gamma_total() / g, sys.mode4().gamma_ext() / g, sys.mode4().kerr() / g).unwrap(),
        );
        let pump = PumpDrive::new(eps_ratio, delta_ratio).unwrap();
        let (c3, c4) = Dynamics::new(&scaled, &pump, &[]).conservative_drift(&s, 0.0);
        let i = Complex::new(0.0, 1.0);
        for (mode, c) in [(Mode::Three, c3), (Mode::Four, c4)] {
            let expect = -i * wirtinger(&scaled, &pump, &s, mode, 1e-6);
            let err = (c - expect).norm() / c.norm().max(1.0);
            prop_assert!(err < 1e-6, "{mode:?}: {c} vs {expect} ({err:e})");
        }
    }

    #[test]
    fn shift_reduces_to_onset_value_at_threshold(sys in system(), eps_ratio in 1.01..6.0f64) {
        let g = sys.gamma_eff();
        let eps = eps_ratio * g;
        let dth = sys.threshold_detuning(eps).unwrap();
        let at = sys.oscillation_frequency_shift(&PumpDrive::new(eps, dth).unwrap()).unwrap();
        let (onset, _) = sys.onset_frequency_shift(dth);
        prop_assert!((at - onset).abs() <= 1e-12 * onset.abs().max(1e-300), "{at} vs {onset}");
    }

    #[test]
    fn steady_state_is_a_co_rotating_fixed_point(
        sys in system(),
        eps_ratio in 1.05..5.0f64,
        u in 0.0..1.0f64,
        psi in -PI..PI,
    ) {
        let g = sys.gamma_eff();
        let eps = eps_ratio * g;
        let dth = sys.threshold_detuning(eps).unwrap();
        let delta = -1.5 * dth + 2.4 * dth * u;
        let pump = PumpDrive::new(eps, delta).unwrap();
        prop_assume!(delta < dth * (1.0 - 1e-9));
        let s = sys.steady_state(&pump, psi).unwrap();
        let d = Dynamics::new(&sys, &pump, &[]).drift(&s, 0.0, 0.0);
        let i = Complex::new(0.0, 1.0);
        // Each amplitude turns at minus its emission detuning.
        let r3 = d.a3 + i * sys.emission_detuning(&pump, Mode::Three) * s.a3;
        let r4 = d.a4 + i * sys.emission_detuning(&pump, Mode::Four) * s.a4;
        let scale = g * (s.a3.norm() + s.a4.norm());
        prop_assert!(r3.norm() / scale < 1e-9, "{}", r3.norm() / scale);
        prop_assert!(r4.norm() / scale < 1e-9, "{}", r4.norm() / scale);
    }

    #[test]
    fn photon_number_falls_with_detuning(sys in system(), eps_ratio in 1.05..5.0f64, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let g = sys.gamma_eff();
        let eps = eps_ratio * g;
        let dth = sys.threshold_detuning(eps).unwrap();
        let (lo, hi) = (u.min(v), u.max(v));
        prop_assume!(hi - lo > 1e-6);
        let at = |x: f64| sys.steady_state_photons(&PumpDrive::new(eps, -3.0 * dth + 3.9 * dth * x).unwrap()).unwrap();
        let (a, b) = (at(lo), at(hi));
        prop_assert!(b.0 < a.0 && b.1 < a.1, "{a:?} -> {b:?}");
    }

    #[test]
    fn regions_partition_the_plane(sys in system(), eps_ratio in 0.0..5.0f64, delta_ratio in -8.0..8.0f64) {
        let g = sys.gamma_eff();
        let eps = eps_ratio * g;
        let delta = delta_ratio * g;
        let region = sys.classify_region(&PumpDrive::new(eps, delta).unwrap());
        let expect = if eps <= g {
            StabilityRegion::GroundOnly
        } else {
            let dth = sys.threshold_detuning(eps).unwrap();
            if delta.abs() < dth {
                StabilityRegion::OscillationOnly
            } else if delta <= -dth {
                StabilityRegion::Bistable
            } else {
                StabilityRegion::GroundOnly
            }
        };
        let dth = sys.threshold_detuning(eps).unwrap_or(0.0);
        let near_edge = (eps - g).abs() < 1e-9 * g || (delta.abs() - dth).abs() < 1e-9 * g;
        prop_assume!(!near_edge);
        prop_assert_eq!(region, expect);
    }

    #[test]
    fn phase_sum_lies_between_right_angle_and_pi(sys in system(), eps_ratio in 1.0001..1e3f64) {
        let theta = sys.phase_sum(eps_ratio * sys.gamma_eff()).unwrap();
        prop_assert!(theta > FRAC_PI_2 && theta < PI, "{theta}");
    }
}

#[test]
fn region_boundary_is_negative_threshold_detuning() {
    let sys = Sys::paper_device();
    let g = sys.gamma_eff();
    for eps_ratio in [1.2, 2.0, 3.0, 4.5] {
        let eps = eps_ratio * g;
        let dth = sys.threshold_detuning(eps).unwrap();
        let just = |d: f64| sys.classify_region(&PumpDrive::new(eps, d).unwrap());
        assert_eq!(just(-dth * (1.0 - 1e-6)), StabilityRegion::OscillationOnly);
        assert_eq!(just(-dth * (1.0 + 1e-6)), StabilityRegion::Bistable);
        assert_eq!(just(dth * (1.0 + 1e-6)), StabilityRegion::GroundOnly);
    }
}
