use std::path::PathBuf;

use njpo_cli::config::{
    parse_config, render_config, AnalysisSection, AxisConfig, IntegratorSection, ModeConfig, NoiseSection, RunConfig,
    SweepConfig, ToneConfig,
};
use njpo_core::experiments::{AxisScale, SweepParam};
use njpo_core::model::Mode;
use proptest::prelude::*;

fn mode() -> impl Strategy<Value = ModeConfig> {
    (1e8..2e10f64, 1e4..1e7f64, 0.05..1.0f64, 1e2..1e6f64).prop_map(|(f, g, frac, k)| ModeConfig {
        frequency_hz: f,
        gamma_total_hz: g,
        gamma_ext_hz: g * frac,
        kerr_hz: k,
    })
}

fn tone() -> impl Strategy<Value = ToneConfig> {
    (any::<bool>(), 0.0..10.0f64, -1e6..1e6f64, -3.0..3.0f64).prop_map(|(m, n, d, p)| ToneConfig {
        mode: if m { Mode::Three } else { Mode::Four },
        photons: n,
        detuning_hz: d,
        phase: p,
    })
}

fn axis() -> impl Strategy<Value = AxisConfig> {
    (0usize..4, 1e-3..1e6f64, 1.0..100.0f64, 2usize..30, any::<bool>()).prop_map(|(p, lo, span, points, log)| {
        let param = [SweepParam::Epsilon, SweepParam::Delta, SweepParam::PhotonNumber, SweepParam::SignalDetuning][p];
        AxisConfig {
            param,
            min: lo,
            max: lo * span,
            points,
            scale: if log { AxisScale::Log } else { AxisScale::Linear },
        }
    })
}

prop_compose! {
    fn config()(
        mode3 in mode(),
        mode4 in mode(),
        epsilon_hz in 0.0..1e7f64,
        delta_hz in -1e7..1e7f64,
        tones in prop::collection::vec(tone(), 0..3),
        vacuum in any::<bool>(),
        vacuum_scale in 0.0..2.0f64,
        flicker in 0.0..1e9f64,
        samples in 2usize..1_000_000,
        rate in 1e3..1e9f64,
        transient in 0.0..1e-3f64,
        step_fraction in 1e-3..0.099f64,
        axes in prop::collection::vec(axis(), 0..3),
        trajectories in 1usize..5,
        rbw in 1.0..1e5f64,
        finest in 0.1..100.0f64,
        seed in any::<u64>(),
        workers in 1usize..16,
        name in "[a-z][a-z0-9_/ ]{0,12}",
    ) -> RunConfig {
        let mut seen = Vec::new();
        let axes: Vec<AxisConfig> = axes.into_iter().filter(|a| {
            let fresh = !seen.contains(&a.param);
            seen.push(a.param);
            fresh
        }).collect();
        RunConfig {
            mode3,
            mode4,
            epsilon_hz,
            delta_hz,
            tones,
            noise: NoiseSection { vacuum, vacuum_scale, flicker_amplitude: flicker },
            integrator: IntegratorSection { samples, sample_rate_hz: rate, transient_s: transient, step_fraction },
            sweep: (!axes.is_empty()).then_some(SweepConfig { axes, trajectories }),
            analysis: AnalysisSection { rbw_hz: rbw, finest_rbw_hz: finest },
            output: PathBuf::from(name),
            seed,
            workers,
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_inverts_render(c in config()) {
        let text = render_config(&c);
        let back = parse_config(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, c);
    }
}
