use serde::{Deserialize, Serialize};

use super::{
    coord, run_grid, simulate, to_hz, Artifact, ExperimentError, ExperimentResult, ExperimentSpec, PointOutput, SimSettings,
    SweepParam, SweepSpec,
};
use crate::analysis::{demodulate, detect_peaks, photon_spectral_density, SpectralDensity, WelchConfig};
use crate::dynamics::seed_state;
use crate::model::{Mode, PumpDrive, TwoModeSystem};

/// Pump-amplitude ramp at fixed detuning, recording the spectrum of both
/// modes at each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RampSpec {
    pub system: TwoModeSystem<f64>,
    /// Pump detuning δ in rad/s.
    pub delta: f64,
    /// A single `epsilon` axis.
    pub sweep: SweepSpec,
    pub settings: SimSettings,
    /// Target resolution bandwidth of the spectra in Hz.
    pub rbw_hz: f64,
}

impl RampSpec {
    /// Ramp over `[eps_min, eps_max]` at `δ = 0.26 Γ`.
    pub fn paper(system: TwoModeSystem<f64>, eps_min: f64, eps_max: f64, points: usize, seed: u64) -> Self {
        let g = system.gamma_eff();
        Self {
            system,
            delta: 0.26 * g,
            sweep: SweepSpec::new(vec![super::Axis::linear(SweepParam::Epsilon, eps_min, eps_max, points)], seed),
            settings: SimSettings::new(&system, true),
            rbw_hz: 20.0e3,
        }
    }
}

pub const RAMP_COLUMNS: [&str; 6] = ["predicted3_hz", "predicted4_hz", "peak3_hz", "peak4_hz", "sim_n3", "sim_n4"];

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub result: ExperimentResult,
}

impl Spectrogram {
    /// Spectra of one mode in grid order.
    pub fn spectra(&self, mode: Mode) -> Vec<Option<&SpectralDensity<f64>>> {
        let name = format!("psd_mode{}", mode.index());
        self.result
            .records
            .iter()
            .map(|r| {
                r.artifacts.iter().find_map(|a| match a {
                    Artifact::Spectrum { name: n, psd } if *n == name => Some(psd),
                    _ => None,
                })
            })
            .collect()
    }
}

/// Strongest spectral peak, interpolated; the raw maximum when no peak
/// clears the floor.
fn dominant_frequency(psd: &SpectralDensity<f64>) -> Option<f64> {
    detect_peaks(psd, 0.0).first().map(|p| p.frequency).or_else(|| psd.peak_frequency())
}

/// Spectra of both modes along an ε ramp, with the dominant peak of each
/// against the closed-form emission frequency (detection detuning, Hz).
pub fn pump_ramp_spectrogram(spec: &RampSpec, workers: usize) -> Result<Spectrogram, ExperimentError> {
    spec.settings.validate()?;
    if spec.sweep.axes.len() != 1 || spec.sweep.axes[0].param != SweepParam::Epsilon {
        return Err(ExperimentError::InvalidSweep("pump ramp sweeps exactly one epsilon axis".into()));
    }
    if !(spec.rbw_hz > 0.0) {
        return Err(ExperimentError::InvalidSettings("rbw_hz must be positive".into()));
    }
    let sys = &spec.system;
    let welch = WelchConfig::for_resolution(spec.settings.sample_rate, spec.rbw_hz);
    let records = run_grid(&spec.sweep, RAMP_COLUMNS.len(), workers, |coords, seed| {
        let eps = coord(&spec.sweep, coords, SweepParam::Epsilon, 0.0);
        let pump = PumpDrive::new(eps, spec.delta)?;
        let tr = simulate(sys, &pump, &[], &spec.settings, seed_state(seed), seed)?;
        let (n3, n4) = tr.mean_photons_after(f64::NEG_INFINITY);
        let psd3 = photon_spectral_density(&demodulate(&tr, Mode::Three, 0.0)?, &welch)?;
        let psd4 = photon_spectral_density(&demodulate(&tr, Mode::Four, 0.0)?, &welch)?;
        let oscillating = sys.steady_state_photons(&pump).is_ok() && eps > sys.gamma_eff();
        let (p3, p4) = if oscillating {
            (Some(to_hz(sys.emission_detuning(&pump, Mode::Three))), Some(to_hz(sys.emission_detuning(&pump, Mode::Four))))
        } else {
            (None, None)
        };
        Ok(PointOutput {
            values: vec![p3, p4, dominant_frequency(&psd3), dominant_frequency(&psd4), Some(n3), Some(n4)],
            artifacts: vec![
                Artifact::Spectrum { name: "psd_mode3".into(), psd: psd3 },
                Artifact::Spectrum { name: "psd_mode4".into(), psd: psd4 },
            ],
        })
    })?;
    Ok(Spectrogram {
        result: ExperimentResult {
            columns: RAMP_COLUMNS.iter().map(|s| s.to_string()).collect(),
            records,
            provenance: ExperimentSpec::PumpRamp(spec.clone()),
        },
    })
}
