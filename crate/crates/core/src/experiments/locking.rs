use serde::{Deserialize, Serialize};

use super::{
    coord, run_grid, simulate, Artifact, ExperimentError, ExperimentResult, ExperimentSpec, PointOutput, SimSettings, SweepParam,
    SweepSpec,
};
use crate::analysis::histogram::{histogram2d, uniformity_chi_square, UniformityTest, UNIFORMITY_BINS};
use crate::analysis::phase::{increment_variance, unwrap_phases};
use crate::analysis::{
    demodulate, linewidth, phase_statistics, photon_spectral_density, AnalysisError, Linewidth, Quadratures, WelchConfig,
};
use crate::dynamics::seed_state;
use crate::model::{InjectionTone, Mode, PumpDrive, TwoModeSystem};

/// Phase-space histogram resolution per axis.
pub const PHASE_SPACE_BINS: usize = 64;

/// Injection-locking scan over the input photon number of a resonant tone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockSpec {
    pub system: TwoModeSystem<f64>,
    pub pump: PumpDrive<f64>,
    pub tone_mode: Mode,
    /// A single `photon_number` axis.
    pub sweep: SweepSpec,
    pub settings: SimSettings,
    /// Finest resolution bandwidth tried when a line is unresolved, Hz.
    pub finest_rbw_hz: f64,
}

impl LockSpec {
    /// Tone on mode 3 at ε = 3Γ, δ = 0, over `photons` (log axis).
    pub fn default_for(system: TwoModeSystem<f64>, photons: (f64, f64, usize), seed: u64) -> Self {
        let g = system.gamma_eff();
        let mut settings = SimSettings::new(&system, true);
        settings.sample_rate = 2.0e6;
        Self {
            system,
            pump: PumpDrive { epsilon: 3.0 * g, delta: 0.0 },
            tone_mode: Mode::Three,
            sweep: SweepSpec::new(vec![super::Axis::log(SweepParam::PhotonNumber, photons.0, photons.1, photons.2)], seed),
            settings,
            finest_rbw_hz: 50.0,
        }
    }
}

pub const LOCK_COLUMNS: [&str; 10] = [
    "std3",
    "std4",
    "mean_phase3",
    "linewidth3_hz",
    "linewidth4_hz",
    "resolved3",
    "resolved4",
    "uniformity_p3",
    "narrowing3",
    "narrowing4",
];

/// Reference run without the tone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeRunning {
    pub linewidth3_hz: f64,
    pub linewidth4_hz: f64,
    pub std3: f64,
    pub std4: f64,
    pub uniformity_p3: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockingScan {
    pub result: ExperimentResult,
    pub free_running: FreeRunning,
    /// Photon number at the knee of the `std3` curve.
    pub knee_photon_number: Option<f64>,
}

/// −3 dB width, starting coarse and refining the resolution by factors of
/// eight while the line stays within ten resolution bandwidths, down to
/// `finest_rbw_hz` or the record length.
pub(crate) fn adaptive_linewidth(q: &Quadratures<f64>, finest_rbw_hz: f64) -> Result<Linewidth<f64>, AnalysisError> {
    let fs = q.sample_rate;
    let mut rbw = fs / 256.0;
    let mut last = None;
    loop {
        let cfg = WelchConfig::for_resolution(fs, rbw);
        if cfg.segment_len > q.len() {
            break;
        }
        let psd = photon_spectral_density(q, &cfg)?;
        let lw = linewidth(&psd)?;
        last = Some(lw);
        if let Linewidth::Resolved { fwhm, .. } = lw {
            if fwhm >= 10.0 * psd.resolution_bandwidth {
                break;
            }
        }
        if rbw <= finest_rbw_hz {
            break;
        }
        rbw = (rbw / 8.0).max(finest_rbw_hz);
    }
    last.ok_or(AnalysisError::SegmentTooLong { segment: WelchConfig::for_resolution(fs, rbw).segment_len, available: q.len() })
}

/// Chi-square uniformity of a phase record thinned to nearly independent
/// samples: the lag is the shortest one (by doubling) whose increment
/// variance reaches π², limited so that at least five samples per bin
/// remain.
pub fn thinned_uniformity(theta_unwrapped: &[f64]) -> Result<UniformityTest, AnalysisError> {
    let max_lag = (theta_unwrapped.len() / (5 * UNIFORMITY_BINS)).max(1);
    let mut lag = 1;
    while lag < max_lag {
        if increment_variance(theta_unwrapped, &[lag])[0] >= std::f64::consts::PI.powi(2) {
            break;
        }
        lag = (lag * 2).min(max_lag);
    }
    let thinned: Vec<f64> = theta_unwrapped.iter().step_by(lag).copied().collect();
    uniformity_chi_square(&thinned, UNIFORMITY_BINS)
}

/// Phase angles of a demodulated record.
pub(crate) fn angles(q: &Quadratures<f64>) -> Vec<f64> {
    q.i.iter().zip(&q.q).map(|(i, q)| q.atan2(*i)).collect()
}

/// Kneedle knee of a decreasing curve over `log10 x`: the point farthest
/// below the chord after both axes are scaled to [0, 1].
pub fn knee_point(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 || x.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let (x0, x1) = (lx[0], lx[lx.len() - 1]);
    let (ymin, ymax) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(x1 > x0) || !(ymax > ymin) {
        return None;
    }
    let mut best = (f64::NEG_INFINITY, None);
    for k in 0..x.len() {
        let xn = (lx[k] - x0) / (x1 - x0);
        let yn = (y[k] - ymin) / (ymax - ymin);
        let d = 1.0 - xn - yn;
        if d > best.0 {
            best = (d, Some(x[k]));
        }
    }
    best.1
}

/// Closed-form output amplitude, used to size phase-space histograms.
fn histogram_radius(sys: &TwoModeSystem<f64>, pump: &PumpDrive<f64>, mode: Mode) -> f64 {
    let n = sys
        .steady_state_photons(pump)
        .map(|(a, b)| if mode == Mode::Three { a } else { b })
        .unwrap_or(0.0)
        .max(0.5);
    2.0 * (2.0 * sys.mode(mode).gamma_ext() * n).sqrt()
}

struct ModeAnalysis {
    std: f64,
    mean: f64,
    linewidth: Linewidth<f64>,
    uniformity: Option<f64>,
    histogram: crate::analysis::Histogram2D,
}

fn analyse_mode(
    sys: &TwoModeSystem<f64>,
    pump: &PumpDrive<f64>,
    tr: &crate::dynamics::Trajectory<f64>,
    mode: Mode,
    finest_rbw_hz: f64,
) -> Result<ModeAnalysis, ExperimentError> {
    let q = demodulate(tr, mode, sys.emission_detuning(pump, mode))?;
    let th = angles(&q);
    let stats = phase_statistics(&th)?;
    let uniformity = thinned_uniformity(&unwrap_phases(&th)).ok().map(|u| u.p_value);
    let r = histogram_radius(sys, pump, mode);
    let histogram = histogram2d(&q.i, &q.q, (PHASE_SPACE_BINS, PHASE_SPACE_BINS), ((-r, r), (-r, r)))?;
    Ok(ModeAnalysis {
        std: stats.std,
        mean: stats.mean,
        linewidth: adaptive_linewidth(&q, finest_rbw_hz)?,
        uniformity,
        histogram,
    })
}

/// Phase statistics, linewidths and phase-space histograms of both modes for
/// each input photon number, plus a tone-free reference run. Phases are
/// taken in the frame of the free-running emission, where the tone sits.
pub fn injection_locking_scan(spec: &LockSpec, workers: usize) -> Result<LockingScan, ExperimentError> {
    spec.settings.validate()?;
    if spec.sweep.axes.len() != 1 || spec.sweep.axes[0].param != SweepParam::PhotonNumber {
        return Err(ExperimentError::InvalidSweep("locking scan sweeps exactly one photon_number axis".into()));
    }
    let sys = &spec.system;
    let pump = &spec.pump;
    if sys.steady_state_photons(pump).is_err() || pump.epsilon <= sys.gamma_eff() {
        return Err(ExperimentError::InvalidSettings("operating point does not oscillate".into()));
    }
    let other = spec.tone_mode.partner();

    let free_seed = spec.sweep.seed(spec.sweep.len(), 0);
    let free = simulate(sys, pump, &[], &spec.settings, seed_state(free_seed), free_seed)?;
    let f3 = analyse_mode(sys, pump, &free, spec.tone_mode, spec.finest_rbw_hz)?;
    let f4 = analyse_mode(sys, pump, &free, other, spec.finest_rbw_hz)?;
    let free_running = FreeRunning {
        linewidth3_hz: f3.linewidth.upper_bound(),
        linewidth4_hz: f4.linewidth.upper_bound(),
        std3: f3.std,
        std4: f4.std,
        uniformity_p3: f3.uniformity,
        seed: free_seed,
    };

    let records = run_grid(&spec.sweep, LOCK_COLUMNS.len(), workers, |coords, seed| {
        let n = coord(&spec.sweep, coords, SweepParam::PhotonNumber, 0.0);
        let tone = InjectionTone::with_photon_number(sys, spec.tone_mode, n, 0.0, 0.0)?;
        let tr = simulate(sys, pump, &[tone], &spec.settings, seed_state(seed), seed)?;
        let a = analyse_mode(sys, pump, &tr, spec.tone_mode, spec.finest_rbw_hz)?;
        let b = analyse_mode(sys, pump, &tr, other, spec.finest_rbw_hz)?;
        let resolved = |l: &Linewidth<f64>| Some(if matches!(l, Linewidth::Resolved { .. }) { 1.0 } else { 0.0 });
        Ok(PointOutput {
            values: vec![
                Some(a.std),
                Some(b.std),
                Some(a.mean),
                Some(a.linewidth.upper_bound()),
                Some(b.linewidth.upper_bound()),
                resolved(&a.linewidth),
                resolved(&b.linewidth),
                a.uniformity,
                Some(free_running.linewidth3_hz / a.linewidth.upper_bound()),
                Some(free_running.linewidth4_hz / b.linewidth.upper_bound()),
            ],
            artifacts: vec![
                Artifact::Histogram { name: format!("iq_mode{}", spec.tone_mode.index()), histogram: a.histogram },
                Artifact::Histogram { name: format!("iq_mode{}", other.index()), histogram: b.histogram },
            ],
        })
    })?;

    let result = ExperimentResult {
        columns: LOCK_COLUMNS.iter().map(|s| s.to_string()).collect(),
        records,
        provenance: ExperimentSpec::InjectionLocking(spec.clone()),
    };
    let (xs, ys): (Vec<f64>, Vec<f64>) = result
        .records
        .iter()
        .filter_map(|r| r.values[0].map(|s| (r.coords[0], s)))
        .unzip();
    Ok(LockingScan { knee_photon_number: knee_point(&xs, &ys), free_running, result })
}
