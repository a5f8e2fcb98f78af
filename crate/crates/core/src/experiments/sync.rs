use serde::{Deserialize, Serialize};

use super::{
    coord, mean_frequency, run_grid, simulate, to_hz, Artifact, Axis, ExperimentError, ExperimentResult, ExperimentSpec,
    PointOutput, SimSettings, SweepParam, SweepSpec,
};
use crate::analysis::{demodulate, detect_peaks, fit_sqrt_law, photon_spectral_density, SpectralDensity, SqrtLawFit, WelchConfig};
use crate::dynamics::seed_state;
use crate::model::{InjectionTone, Mode, PumpDrive, TwoModeSystem};

/// Peaks narrower than this multiple of the signal width count as narrow.
pub const NARROW_WIDTH_FACTOR: f64 = 3.0;

/// Census band around each oscillation line, in units of the
/// signal–oscillation separation.
pub const CENSUS_BAND: f64 = 1.5;

/// Floor offset for idler detection, dB.
pub const IDLER_FLOOR_DB: f64 = 10.0;

/// Synchronization scan over input photon number and signal detuning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyncSpec {
    pub system: TwoModeSystem<f64>,
    pub pump: PumpDrive<f64>,
    /// Axes `photon_number` and `signal_detuning` (rad/s, relative to the
    /// free-running emission of mode 3).
    pub sweep: SweepSpec,
    pub settings: SimSettings,
    /// Spectral resolution in Hz; also the synchronization tolerance.
    pub rbw_hz: f64,
}

impl SyncSpec {
    /// ε = 3Γ, δ = 0, over the given photon numbers and a symmetric
    /// detuning grid `±max_detuning_hz`.
    pub fn default_for(system: TwoModeSystem<f64>, photons: &[f64], max_detuning_hz: f64, points: usize, seed: u64) -> Self {
        let g = system.gamma_eff();
        let lo = photons.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = photons.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let n_axis = if photons.len() == 1 {
            Axis::fixed(SweepParam::PhotonNumber, lo)
        } else {
            Axis::log(SweepParam::PhotonNumber, lo, hi, photons.len())
        };
        let d = super::from_hz(max_detuning_hz);
        Self {
            system,
            pump: PumpDrive { epsilon: 3.0 * g, delta: 0.0 },
            sweep: SweepSpec::new(vec![n_axis, Axis::linear(SweepParam::SignalDetuning, -d, d, points)], seed),
            settings: SimSettings::new(&system, true),
            rbw_hz: 5.0e3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdlerKind {
    Signal,
    Oscillation,
    PrimaryIdler,
    SecondaryIdler,
    Unidentified,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdlerClass {
    Narrow,
    Broad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdlerPeak {
    pub mode: Mode,
    pub kind: IdlerKind,
    /// Detection detuning of the peak, Hz.
    pub frequency_hz: f64,
    /// Offset from the oscillation line of the same mode, Hz.
    pub offset_hz: f64,
    pub width_hz: f64,
    pub height: f64,
    pub class: IdlerClass,
}

/// Labels the spectral peaks of both modes around their oscillation lines.
///
/// With `Δ = signal − osc₃`, mode 3 carries the signal at `osc₃ + Δ` and a
/// secondary idler at `osc₃ − Δ`; mode 4 carries a primary idler at
/// `osc₄ − Δ` and a secondary idler at `osc₄ + Δ`. Only peaks within
/// `CENSUS_BAND·|Δ|` of the oscillation line are listed. Widths are
/// compared to the signal width to split narrow from broad lines.
pub fn idler_census(
    psd3: &SpectralDensity<f64>,
    psd4: &SpectralDensity<f64>,
    osc3_hz: f64,
    osc4_hz: f64,
    signal_hz: f64,
) -> Vec<IdlerPeak> {
    let sep = signal_hz - osc3_hz;
    let mut out = Vec::new();
    for (mode, psd, osc) in [(Mode::Three, psd3, osc3_hz), (Mode::Four, psd4, osc4_hz)] {
        let expected: Vec<(IdlerKind, f64)> = match mode {
            Mode::Three => vec![(IdlerKind::Signal, signal_hz), (IdlerKind::Oscillation, osc), (IdlerKind::SecondaryIdler, osc - sep)],
            Mode::Four => vec![(IdlerKind::Oscillation, osc), (IdlerKind::PrimaryIdler, osc - sep), (IdlerKind::SecondaryIdler, osc + sep)],
        };
        let mut peaks: Vec<_> = detect_peaks(psd, IDLER_FLOOR_DB)
            .into_iter()
            .filter(|p| (p.frequency - osc).abs() <= CENSUS_BAND * sep.abs())
            .collect();
        peaks.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        for p in peaks {
            let tol = (3.0 * psd.bin_width).max(0.5 * p.width);
            let kind = expected
                .iter()
                .filter(|(_, f)| (p.frequency - f).abs() <= tol)
                .min_by(|a, b| (p.frequency - a.1).abs().total_cmp(&(p.frequency - b.1).abs()))
                .map_or(IdlerKind::Unidentified, |e| e.0);
            out.push(IdlerPeak {
                mode,
                kind,
                frequency_hz: p.frequency,
                offset_hz: p.frequency - osc,
                width_hz: p.width,
                height: p.height,
                class: IdlerClass::Narrow,
            });
        }
    }
    let signal_width = out
        .iter()
        .find(|p| p.kind == IdlerKind::Signal)
        .map_or(2.0 * psd3.bin_width, |p| p.width_hz);
    for p in &mut out {
        p.class = if p.width_hz <= NARROW_WIDTH_FACTOR * signal_width { IdlerClass::Narrow } else { IdlerClass::Broad };
    }
    out
}

/// Width of the synchronization gap at one photon number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapWidth {
    pub photon_number: f64,
    /// Contiguous synchronized span around the smallest |Δs|, widened by
    /// one grid step (midpoint edges), Hz.
    pub width_hz: f64,
    /// Grid-resolution uncertainty, Hz.
    pub error_hz: f64,
    /// The synchronized span reaches the grid edge; the width is a lower
    /// bound.
    pub truncated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynchronizationFit {
    /// `g = c √⟨n⟩` with `c` in Hz.
    pub fit: SqrtLawFit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncScan {
    pub result: ExperimentResult,
    pub gaps: Vec<GapWidth>,
    pub fit: Option<SynchronizationFit>,
}

pub const SYNC_COLUMNS: [&str; 7] =
    ["osc3_hz", "osc4_hz", "signal_hz", "offset3_hz", "offset4_hz", "synchronized", "idlers"];

impl SyncScan {
    /// Whether each photon number's flags fall off monotonically away from
    /// the smallest |Δs| on each side.
    pub fn flags_monotone(&self) -> bool {
        let s = self.result.column_index("synchronized").expect("column exists");
        self.rows_by_photon_number().iter().all(|rows| {
            let centre = centre_index(rows);
            let flags: Vec<bool> = rows.iter().map(|r| r.2[s] == Some(1.0)).collect();
            let right_ok = flags[centre..].windows(2).all(|w| w[0] || !w[1]);
            let left_ok = flags[..=centre].windows(2).all(|w| !w[0] || w[1]);
            right_ok && left_ok
        })
    }

    /// Rows `(photon_number, Δs, values)` grouped by photon number, each
    /// group sorted by Δs.
    fn rows_by_photon_number(&self) -> Vec<Vec<(f64, f64, Vec<Option<f64>>)>> {
        group_rows(&self.result)
    }
}

fn group_rows(result: &ExperimentResult) -> Vec<Vec<(f64, f64, Vec<Option<f64>>)>> {
    let sweep = result.sweep();
    let mut groups: Vec<Vec<(f64, f64, Vec<Option<f64>>)>> = Vec::new();
    for r in &result.records {
        let n = coord(sweep, &r.coords, SweepParam::PhotonNumber, 0.0);
        let d = coord(sweep, &r.coords, SweepParam::SignalDetuning, 0.0);
        match groups.iter_mut().find(|g| g[0].0 == n) {
            Some(g) => g.push((n, d, r.values.clone())),
            None => groups.push(vec![(n, d, r.values.clone())]),
        }
    }
    for g in &mut groups {
        g.sort_by(|a, b| a.1.total_cmp(&b.1));
    }
    groups
}

fn centre_index(rows: &[(f64, f64, Vec<Option<f64>>)]) -> usize {
    rows.iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.abs().total_cmp(&b.1 .1.abs()))
        .map_or(0, |(k, _)| k)
}

fn gap_widths(result: &ExperimentResult, step_hz: f64) -> Vec<GapWidth> {
    let s = result.column_index("synchronized").expect("column exists");
    group_rows(result)
        .iter()
        .map(|rows| {
            let flag = |k: usize| rows[k].2[s] == Some(1.0);
            let c = centre_index(rows);
            if !flag(c) {
                return GapWidth { photon_number: rows[0].0, width_hz: 0.0, error_hz: step_hz, truncated: false };
            }
            let (mut lo, mut hi) = (c, c);
            while lo > 0 && flag(lo - 1) {
                lo -= 1;
            }
            while hi + 1 < rows.len() && flag(hi + 1) {
                hi += 1;
            }
            GapWidth {
                photon_number: rows[0].0,
                width_hz: to_hz(rows[hi].1 - rows[lo].1) + step_hz,
                error_hz: step_hz,
                truncated: lo == 0 || hi + 1 == rows.len(),
            }
        })
        .collect()
}

/// Per (⟨n⟩, Δs): mean oscillation frequencies of both modes, the
/// synchronization flag, spectra and the idler table; then gap widths per
/// ⟨n⟩ and their √⟨n⟩ fit.
///
/// The oscillation frequency is the mean phase-advance rate over the record.
/// A point counts as synchronized when the mode-3 oscillation frequency is
/// within one resolution bandwidth of the signal.
pub fn synchronization_scan(spec: &SyncSpec, workers: usize) -> Result<SyncScan, ExperimentError> {
    spec.settings.validate()?;
    let n_axis = spec.sweep.axis(SweepParam::PhotonNumber);
    let d_axis = spec.sweep.axis(SweepParam::SignalDetuning);
    if spec.sweep.axes.len() != 2 || n_axis.is_none() || d_axis.is_none() {
        return Err(ExperimentError::InvalidSweep("sync scan sweeps photon_number and signal_detuning".into()));
    }
    if !(spec.rbw_hz > 0.0) {
        return Err(ExperimentError::InvalidSettings("rbw_hz must be positive".into()));
    }
    let sys = &spec.system;
    let pump = &spec.pump;
    if sys.steady_state_photons(pump).is_err() || pump.epsilon <= sys.gamma_eff() {
        return Err(ExperimentError::InvalidSettings("operating point does not oscillate".into()));
    }
    let d0 = sys.emission_detuning(pump, Mode::Three);
    let welch = WelchConfig::for_resolution(spec.settings.sample_rate, spec.rbw_hz);

    let records = run_grid(&spec.sweep, SYNC_COLUMNS.len(), workers, |coords, seed| {
        let n = coord(&spec.sweep, coords, SweepParam::PhotonNumber, 0.0);
        let ds = coord(&spec.sweep, coords, SweepParam::SignalDetuning, 0.0);
        let tone = InjectionTone::with_photon_number(sys, Mode::Three, n, ds, 0.0)?;
        let tr = simulate(sys, pump, &[tone], &spec.settings, seed_state(seed), seed)?;
        let q3 = demodulate(&tr, Mode::Three, d0)?;
        let q4 = demodulate(&tr, Mode::Four, -d0)?;
        let (f3, f4) = (mean_frequency(&q3)?, mean_frequency(&q4)?);
        let psd3 = photon_spectral_density(&q3, &welch)?;
        let psd4 = photon_spectral_density(&q4, &welch)?;
        let signal = to_hz(d0 + ds);
        let synced = (f3 - signal).abs() <= psd3.resolution_bandwidth;
        // Spectra are in the detection frames, offset by ±Δ₀ from the rotating frame.
        let shift = to_hz(d0);
        let idlers = if synced { Vec::new() } else { idler_census(&psd3, &psd4, f3 - shift, f4 + shift, signal - shift) };
        Ok(PointOutput {
            values: vec![
                Some(f3),
                Some(f4),
                Some(signal),
                Some(f3 - signal),
                Some(f4 - to_hz(-d0 - ds)),
                Some(if synced { 1.0 } else { 0.0 }),
                Some(idlers.len() as f64),
            ],
            artifacts: vec![
                Artifact::Spectrum { name: "psd_mode3".into(), psd: psd3 },
                Artifact::Spectrum { name: "psd_mode4".into(), psd: psd4 },
                Artifact::Idlers { name: "idlers".into(), peaks: idlers },
            ],
        })
    })?;
    let result = ExperimentResult {
        columns: SYNC_COLUMNS.iter().map(|s| s.to_string()).collect(),
        records,
        provenance: ExperimentSpec::Synchronization(spec.clone()),
    };
    let step_hz = to_hz(d_axis.map_or(0.0, Axis::step));
    let gaps = gap_widths(&result, step_hz);
    let ns: Vec<f64> = gaps.iter().map(|g| g.photon_number).collect();
    let ws: Vec<f64> = gaps.iter().map(|g| g.width_hz).collect();
    let fit = fit_sqrt_law(&ns, &ws).ok().map(|fit| SynchronizationFit { fit });
    Ok(SyncScan { result, gaps, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::spectrum::complex_psd;
    use num_complex::Complex;
    use std::f64::consts::TAU;

    /// Narrow lines are pure tones; broad lines are tones with a random-walk
    /// phase.
    fn synthetic(lines: &[(f64, f64, f64)], fs: f64, n: usize, seed: u64) -> SpectralDensity<f64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut phases = vec![0.0; lines.len()];
        let mut data = vec![Complex::new(0.0, 0.0); n];
        for (k, z) in data.iter_mut().enumerate() {
            let t = k as f64 / fs;
            for (j, &(f, amp, diffusion)) in lines.iter().enumerate() {
                let step: f64 = rng.sample(rand_distr::StandardNormal);
                phases[j] += (diffusion / fs).sqrt() * step;
                *z += Complex::from_polar(amp, TAU * f * t + phases[j]);
            }
            let a: f64 = rng.sample(rand_distr::StandardNormal);
            let b: f64 = rng.sample(rand_distr::StandardNormal);
            *z += Complex::new(a, b) * 0.01;
        }
        complex_psd(&data, fs, &WelchConfig::new(4096)).unwrap()
    }

    #[test]
    fn census_labels_three_idlers() {
        let fs = 2.0e6;
        let (osc, sig) = (20.0e3, 200.0e3);
        let sep = sig - osc;
        let psd3 = synthetic(&[(osc, 3.0, 2.0e4), (sig, 1.0, 0.0), (osc - sep, 0.5, 2.0e5)], fs, 1 << 18, 1);
        let psd4 = synthetic(&[(-osc, 3.0, 2.0e4), (-osc - sep, 1.0, 0.0), (-osc + sep, 0.5, 2.0e5)], fs, 1 << 18, 2);
        let peaks = idler_census(&psd3, &psd4, osc, -osc, sig);
        let kinds: Vec<(Mode, IdlerKind, IdlerClass)> = peaks
            .iter()
            .filter(|p| !matches!(p.kind, IdlerKind::Signal | IdlerKind::Oscillation))
            .map(|p| (p.mode, p.kind, p.class))
            .collect();
        assert_eq!(
            kinds,
            vec![
                (Mode::Three, IdlerKind::SecondaryIdler, IdlerClass::Broad),
                (Mode::Four, IdlerKind::PrimaryIdler, IdlerClass::Narrow),
                (Mode::Four, IdlerKind::SecondaryIdler, IdlerClass::Broad),
            ],
            "{peaks:#?}"
        );
    }

    #[test]
    fn gap_from_flags() {
        let sys = TwoModeSystem::paper_device();
        let mut spec = SyncSpec::default_for(sys, &[1.0], 100.0e3, 5, 0);
        spec.sweep.axes[1] = Axis::linear(SweepParam::SignalDetuning, -TAU * 100.0e3, TAU * 100.0e3, 5);
        let flags = [0.0, 1.0, 1.0, 1.0, 0.0];
        let records = spec
            .sweep
            .expand()
            .into_iter()
            .enumerate()
            .map(|(index, coords)| super::super::PointRecord {
                index,
                coords,
                seed: 0,
                values: vec![None, None, None, None, None, Some(flags[index]), None],
                artifacts: vec![],
                error: None,
            })
            .collect();
        let result = ExperimentResult {
            columns: SYNC_COLUMNS.iter().map(|s| s.to_string()).collect(),
            records,
            provenance: ExperimentSpec::Synchronization(spec),
        };
        let g = gap_widths(&result, 50.0e3);
        assert_eq!(g.len(), 1);
        assert!((g[0].width_hz - 150.0e3).abs() < 1e-6);
        assert!(!g[0].truncated);
        let scan = SyncScan { result, gaps: g, fit: None };
        assert!(scan.flags_monotone());
    }
}
