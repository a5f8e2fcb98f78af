//! Parameter sweeps reproducing the oscillator experiments: stability maps,
//! pump ramps, injection locking, synchronization with idler census, and
//! Kerr-coefficient extraction.
//!
//! Every sweep is described by a serializable [`ExperimentSpec`]; the result
//! carries that spec as its provenance, so [`rerun`] regenerates it bit for
//! bit. Grid points run on a bounded rayon pool and are collected in grid
//! order.

mod kerr;
mod locking;
mod map;
mod ramp;
mod sync;

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    histogram::Histogram2D, phase::unwrap_phases, AnalysisError, Quadratures, SpectralDensity,
};
use crate::dynamics::{derive_seed, integrate, Dynamics, DynamicsError, IntegratorConfig, NoiseConfig, Trajectory};
use crate::model::{FieldState, InjectionTone, ModelError, PumpDrive, TwoModeSystem};

pub use kerr::{invert_kerr_slopes, kerr_extraction_roundtrip, kerr_slopes, KerrFit, KerrSource, KerrSpec};
pub use locking::{injection_locking_scan, knee_point, thinned_uniformity, FreeRunning, LockSpec, LockingScan};
pub use map::{stability_map, MapSpec};
pub use ramp::{pump_ramp_spectrogram, RampSpec, Spectrogram};
pub use sync::{
    idler_census, synchronization_scan, GapWidth, IdlerClass, IdlerKind, IdlerPeak, SyncScan, SyncSpec,
    SynchronizationFit,
};

/// Recorded samples per run unless configured otherwise.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Default recording rate in Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 10.0e6;

/// Default transient discarded before analysis, in units of `1/Γ`.
pub const DEFAULT_TRANSIENT_PERIODS: f64 = 20.0;

/// Default bound on `dt · (fastest rate)`; half the integrator's guard.
pub const DEFAULT_STEP_FRACTION: f64 = 0.05;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error("Kerr inversion is singular (condition number {condition:.3e})")]
    SingularInversion { condition: f64 },
    #[error("worker pool: {0}")]
    Pool(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// A swept quantity. Frequencies and rates are in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Epsilon,
    Delta,
    PhotonNumber,
    SignalDetuning,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Epsilon => "epsilon",
            SweepParam::Delta => "delta",
            SweepParam::PhotonNumber => "photon_number",
            SweepParam::SignalDetuning => "signal_detuning",
        }
    }

    /// True for quantities stored in rad/s and reported in Hz.
    pub fn is_frequency(self) -> bool {
        !matches!(self, SweepParam::PhotonNumber)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisScale {
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub param: SweepParam,
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: AxisScale,
}

impl Axis {
    pub fn linear(param: SweepParam, min: f64, max: f64, points: usize) -> Self {
        Self { param, min, max, points, scale: AxisScale::Linear }
    }

    pub fn log(param: SweepParam, min: f64, max: f64, points: usize) -> Self {
        Self { param, min, max, points, scale: AxisScale::Log }
    }

    /// A single fixed value.
    pub fn fixed(param: SweepParam, value: f64) -> Self {
        Self::linear(param, value, value, 1)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let name = self.param.name();
        if self.points == 0 {
            return Err(ExperimentError::InvalidSweep(format!("axis {name} needs at least one point")));
        }
        if !self.min.is_finite() || !self.max.is_finite() {
            return Err(ExperimentError::InvalidSweep(format!("axis {name} has non-finite bounds")));
        }
        if self.points > 1 && !(self.max > self.min) {
            return Err(ExperimentError::InvalidSweep(format!("axis {name} needs max > min")));
        }
        if self.scale == AxisScale::Log && !(self.min > 0.0) {
            return Err(ExperimentError::InvalidSweep(format!("log axis {name} needs positive bounds")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                let u = k as f64 / last;
                match self.scale {
                    AxisScale::Linear => self.min + (self.max - self.min) * u,
                    AxisScale::Log => (self.min.ln() + (self.max.ln() - self.min.ln()) * u).exp(),
                }
            })
            .collect()
    }

    /// Grid spacing of a linear axis.
    pub fn step(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            (self.max - self.min) / (self.points - 1) as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axes: Vec<Axis>,
    pub trajectories: usize,
    pub master_seed: u64,
}

impl SweepSpec {
    pub fn new(axes: Vec<Axis>, master_seed: u64) -> Self {
        Self { axes, trajectories: 1, master_seed }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.axes.is_empty() {
            return Err(ExperimentError::InvalidSweep("no axes".into()));
        }
        if self.trajectories == 0 {
            return Err(ExperimentError::InvalidSweep("trajectories must be >= 1".into()));
        }
        for (k, a) in self.axes.iter().enumerate() {
            a.validate()?;
            if self.axes[..k].iter().any(|b| b.param == a.param) {
                return Err(ExperimentError::InvalidSweep(format!("axis {} declared twice", a.param.name())));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.points).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid coordinates in row-major order, first axis slowest.
    pub fn expand(&self) -> Vec<Vec<f64>> {
        let values: Vec<Vec<f64>> = self.axes.iter().map(Axis::values).collect();
        let mut out = vec![Vec::new()];
        for v in &values {
            out = out.iter().flat_map(|prefix| v.iter().map(move |&x| [prefix.as_slice(), &[x]].concat())).collect();
        }
        out
    }

    pub fn axis(&self, param: SweepParam) -> Option<&Axis> {
        self.axes.iter().find(|a| a.param == param)
    }

    pub fn position(&self, param: SweepParam) -> Option<usize> {
        self.axes.iter().position(|a| a.param == param)
    }

    /// Seed of trajectory `k` at grid point `index`.
    pub fn seed(&self, index: usize, k: usize) -> u64 {
        derive_seed(self.master_seed, (index * self.trajectories + k) as u64)
    }
}

/// How each run is integrated and sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimSettings {
    /// Noise model; its seed is replaced per run.
    pub noise: NoiseConfig,
    /// Samples kept after the transient.
    pub samples: usize,
    /// Recording rate in Hz.
    pub sample_rate: f64,
    /// Discarded lead-in, in s.
    pub transient: f64,
    /// Target `dt · (fastest rate)`.
    pub step_fraction: f64,
}

impl SimSettings {
    pub fn new(sys: &TwoModeSystem<f64>, vacuum_noise: bool) -> Self {
        let noise = if vacuum_noise { NoiseConfig::vacuum(0) } else { NoiseConfig::off(0) };
        Self {
            noise,
            samples: DEFAULT_SAMPLES,
            sample_rate: DEFAULT_SAMPLE_RATE,
            transient: DEFAULT_TRANSIENT_PERIODS / sys.gamma_eff(),
            step_fraction: DEFAULT_STEP_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.noise.validate()?;
        if self.samples < 2 {
            return Err(ExperimentError::InvalidSettings("samples must be >= 2".into()));
        }
        if !(self.sample_rate > 0.0) || !self.sample_rate.is_finite() {
            return Err(ExperimentError::InvalidSettings("sample_rate must be positive".into()));
        }
        if !(self.transient >= 0.0) || !self.transient.is_finite() {
            return Err(ExperimentError::InvalidSettings("transient must be >= 0".into()));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction < crate::dynamics::STABILITY_LIMIT) {
            return Err(ExperimentError::InvalidSettings(format!(
                "step_fraction must lie in (0, {})",
                crate::dynamics::STABILITY_LIMIT
            )));
        }
        Ok(())
    }

    /// Recorded span after the transient, in s.
    pub fn record_duration(&self) -> f64 {
        self.samples as f64 / self.sample_rate
    }

    pub fn with_noise_seed(&self, seed: u64) -> NoiseConfig {
        NoiseConfig { rng_seed: seed, ..self.noise }
    }
}

/// Integrates one run and drops the transient. The step is the largest
/// divisor of the sample interval meeting `step_fraction`.
pub fn simulate(
    sys: &TwoModeSystem<f64>,
    pump: &PumpDrive<f64>,
    tones: &[InjectionTone<f64>],
    settings: &SimSettings,
    initial: FieldState<f64>,
    seed: u64,
) -> Result<Trajectory<f64>, ExperimentError> {
    settings.validate()?;
    let dynamics = Dynamics::new(sys, pump, tones);
    let mut rate = dynamics.fastest_rate(&initial);
    if let Ok(ss) = sys.steady_state(pump, 0.0) {
        rate = rate.max(dynamics.fastest_rate(&ss));
    }
    let interval = 1.0 / settings.sample_rate;
    let stride = ((interval * rate / settings.step_fraction).ceil() as usize).max(1);
    let dt = interval / stride as f64;
    let lead = (settings.transient / interval).ceil() as usize;
    let total = lead + settings.samples - 1;
    let cfg = IntegratorConfig { dt, duration: dt * (total * stride) as f64, record_stride: stride, initial_state: initial };
    let traj = integrate(sys, pump, tones, &settings.with_noise_seed(seed), &cfg)?;
    let keep = traj.len().saturating_sub(settings.samples);
    Ok(Trajectory {
        times: traj.times[keep..].to_vec(),
        states: traj.states[keep..].to_vec(),
        provenance: traj.provenance,
    })
}

/// Mean frequency of a demodulated record in Hz (detection frame), from the
/// net phase advance over the record.
pub fn mean_frequency(q: &Quadratures<f64>) -> Result<f64, AnalysisError> {
    if q.len() < 2 {
        return Err(AnalysisError::TooFewSamples { needed: 2, got: q.len() });
    }
    let wrapped: Vec<f64> = q.i.iter().zip(&q.q).map(|(i, q)| q.atan2(*i)).collect();
    let th = unwrap_phases(&wrapped);
    let span = (q.len() - 1) as f64 / q.sample_rate;
    Ok((th[th.len() - 1] - th[0]) / span / std::f64::consts::TAU + q.detection_detuning / std::f64::consts::TAU)
}

/// Per-point side products written next to the aggregate table.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Spectrum { name: String, psd: SpectralDensity<f64> },
    Histogram { name: String, histogram: Histogram2D },
    Idlers { name: String, peaks: Vec<IdlerPeak> },
}

impl Artifact {
    pub fn name(&self) -> &str {
        match self {
            Artifact::Spectrum { name, .. } | Artifact::Histogram { name, .. } | Artifact::Idlers { name, .. } => name,
        }
    }
}

/// One grid point: coordinates, the seed of its first trajectory, scalar
/// outputs (averaged over trajectories) and an error marker when the point
/// failed.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub index: usize,
    pub coords: Vec<f64>,
    pub seed: u64,
    pub values: Vec<Option<f64>>,
    pub artifacts: Vec<Artifact>,
    pub error: Option<String>,
}

/// Every sweep the runner knows, tagged for the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "snake_case")]
pub enum ExperimentSpec {
    StabilityMap(MapSpec),
    PumpRamp(RampSpec),
    InjectionLocking(LockSpec),
    Synchronization(SyncSpec),
    KerrRoundtrip(KerrSpec),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub columns: Vec<String>,
    pub records: Vec<PointRecord>,
    pub provenance: ExperimentSpec,
}

impl ExperimentResult {
    pub fn sweep(&self) -> &SweepSpec {
        match &self.provenance {
            ExperimentSpec::StabilityMap(s) => &s.sweep,
            ExperimentSpec::PumpRamp(s) => &s.sweep,
            ExperimentSpec::InjectionLocking(s) => &s.sweep,
            ExperimentSpec::Synchronization(s) => &s.sweep,
            ExperimentSpec::KerrRoundtrip(s) => &s.sweep,
        }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Some(self.records.iter().map(|r| r.values[k]).collect())
    }

    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.error.is_some()).count()
    }

    /// Aggregate table: axis coordinates (frequencies in Hz), seed, scalar
    /// columns, error marker. Missing values are written as `nan`.
    pub fn write_csv<W: Write>(&self, w: W) -> io::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let axes = &self.sweep().axes;
        let mut header: Vec<String> = axes
            .iter()
            .map(|a| if a.param.is_frequency() { format!("{}_hz", a.param.name()) } else { a.param.name().to_string() })
            .collect();
        header.push("seed".into());
        header.extend(self.columns.iter().cloned());
        header.push("error".into());
        out.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r
                .coords
                .iter()
                .zip(axes)
                .map(|(&c, a)| fmt_full(if a.param.is_frequency() { to_hz(c) } else { c }))
                .collect();
            row.push(r.seed.to_string());
            row.extend(r.values.iter().map(|v| v.map_or_else(|| "nan".to_string(), fmt_full)));
            row.push(r.error.clone().unwrap_or_default());
            out.write_record(&row)?;
        }
        out.flush()
    }
}

/// 17 significant digits.
pub fn fmt_full(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_hz(omega: f64) -> f64 {
    omega / std::f64::consts::TAU
}

pub fn from_hz(f: f64) -> f64 {
    f * std::f64::consts::TAU
}

/// Reruns an experiment from its provenance block.
pub fn rerun(spec: &ExperimentSpec, workers: usize) -> Result<ExperimentResult, ExperimentError> {
    match spec {
        ExperimentSpec::StabilityMap(s) => stability_map(s, workers),
        ExperimentSpec::PumpRamp(s) => pump_ramp_spectrogram(s, workers).map(|r| r.result),
        ExperimentSpec::InjectionLocking(s) => injection_locking_scan(s, workers).map(|r| r.result),
        ExperimentSpec::Synchronization(s) => synchronization_scan(s, workers).map(|r| r.result),
        ExperimentSpec::KerrRoundtrip(s) => kerr_extraction_roundtrip(s, workers).map(|r| r.result),
    }
}

/// Output of one trajectory at a grid point.
pub(crate) struct PointOutput {
    pub values: Vec<Option<f64>>,
    pub artifacts: Vec<Artifact>,
}

/// Evaluates every grid point on a pool of `workers` threads, averaging the
/// scalar outputs over trajectories. Results come back in grid order.
pub(crate) fn run_grid<F>(sweep: &SweepSpec, n_columns: usize, workers: usize, eval: F) -> Result<Vec<PointRecord>, ExperimentError>
where
    F: Fn(&[f64], u64) -> Result<PointOutput, ExperimentError> + Sync,
{
    sweep.validate()?;
    let grid = sweep.expand();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let records = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(index, coords)| {
                let mut sums = vec![0.0; n_columns];
                let mut counts = vec![0usize; n_columns];
                let mut artifacts = Vec::new();
                let mut error = None;
                for k in 0..sweep.trajectories {
                    match eval(coords, sweep.seed(index, k)) {
                        Ok(out) => {
                            for (j, v) in out.values.iter().enumerate().take(n_columns) {
                                if let Some(v) = v {
                                    sums[j] += v;
                                    counts[j] += 1;
                                }
                            }
                            if k == 0 {
                                artifacts = out.artifacts;
                            }
                        }
                        Err(e) => {
                            error = Some(e.to_string());
                            break;
                        }
                    }
                }
                let values = if error.is_some() {
                    vec![None; n_columns]
                } else {
                    sums.iter().zip(&counts).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect()
                };
                PointRecord { index, coords: coords.clone(), seed: sweep.seed(index, 0), values, artifacts, error }
            })
            .collect()
    });
    Ok(records)
}

/// Coordinate of `param` at a grid point, or `default` when not swept.
pub(crate) fn coord(sweep: &SweepSpec, coords: &[f64], param: SweepParam, default: f64) -> f64 {
    sweep.position(param).map_or(default, |k| coords[k])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expansion_is_row_major() {
        let s = SweepSpec::new(
            vec![Axis::linear(SweepParam::Epsilon, 0.0, 1.0, 2), Axis::linear(SweepParam::Delta, 10.0, 30.0, 3)],
            7,
        );
        let g = s.expand();
        assert_eq!(g.len(), 6);
        assert_eq!(g[0], vec![0.0, 10.0]);
        assert_eq!(g[1], vec![0.0, 20.0]);
        assert_eq!(g[3], vec![1.0, 10.0]);
        assert_eq!(g[5], vec![1.0, 30.0]);
    }

    #[test]
    fn log_axis_endpoints() {
        let a = Axis::log(SweepParam::PhotonNumber, 0.01, 4.0, 5);
        let v = a.values();
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[4] - 4.0).abs() < 1e-12);
        assert!((v[2] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn invalid_sweeps() {
        assert!(SweepSpec::new(vec![Axis::linear(SweepParam::Delta, 0.0, 1.0, 0)], 0).validate().is_err());
        assert!(SweepSpec::new(vec![Axis::log(SweepParam::PhotonNumber, 0.0, 1.0, 3)], 0).validate().is_err());
        assert!(SweepSpec::new(vec![], 0).validate().is_err());
        let dup = vec![Axis::fixed(SweepParam::Delta, 0.0), Axis::fixed(SweepParam::Delta, 1.0)];
        assert!(SweepSpec::new(dup, 0).validate().is_err());
    }

    #[test]
    fn seeds_are_distinct_per_point_and_trajectory() {
        let mut s = SweepSpec::new(vec![Axis::linear(SweepParam::Delta, 0.0, 1.0, 4)], 99);
        s.trajectories = 3;
        let mut seeds: Vec<u64> = (0..4).flat_map(|i| (0..3).map(move |k| (i, k))).map(|(i, k)| s.seed(i, k)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 12);
    }

    #[test]
    fn simulate_keeps_requested_samples() {
        let sys = TwoModeSystem::paper_device();
        let g = sys.gamma_eff();
        let pump = PumpDrive::new(3.0 * g, 0.0).unwrap();
        let mut st = SimSettings::new(&sys, false);
        st.samples = 500;
        let tr = simulate(&sys, &pump, &[], &st, sys.steady_state(&pump, 0.0).unwrap(), 1).unwrap();
        assert_eq!(tr.len(), 500);
        let dt = tr.times[1] - tr.times[0];
        assert!((dt * st.sample_rate - 1.0).abs() < 1e-9);
        assert!(tr.times[0] >= st.transient - dt);
    }
}
