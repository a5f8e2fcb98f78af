use serde::{Deserialize, Serialize};

use super::{
    coord, mean_frequency, run_grid, simulate, to_hz, ExperimentError, ExperimentResult, ExperimentSpec, PointOutput,
    SimSettings, SweepParam, SweepSpec,
};
use crate::analysis::{demodulate, fit::linear_fit};
use crate::dynamics::seed_state;
use crate::model::{Mode, PumpDrive, TwoModeSystem};

/// Largest acceptable condition number of the inversion.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KerrSource {
    /// Slopes from the closed-form intensities and frequencies.
    ClosedForm,
    /// Slopes from simulated runs.
    Simulated,
}

/// Round-trip test of Kerr-coefficient extraction from a detuning scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KerrSpec {
    /// Ground truth.
    pub system: TwoModeSystem<f64>,
    pub epsilon: f64,
    /// A single `delta` axis inside the oscillating region.
    pub sweep: SweepSpec,
    pub settings: SimSettings,
    pub source: KerrSource,
}

impl KerrSpec {
    /// ε = 3Γ with δ from −2.5Γ to 0.5Γ in seven steps.
    pub fn default_for(system: TwoModeSystem<f64>, source: KerrSource, seed: u64) -> Self {
        let g = system.gamma_eff();
        Self {
            system,
            epsilon: 3.0 * g,
            sweep: SweepSpec::new(vec![super::Axis::linear(SweepParam::Delta, -2.5 * g, 0.5 * g, 7)], seed),
            settings: SimSettings::new(&system, true),
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KerrFit {
    /// Estimated α₃/2π and α₄/2π in Hz.
    pub alpha3_hz: f64,
    pub alpha4_hz: f64,
    pub relative_error3: f64,
    pub relative_error4: f64,
    /// `d|A₃|²/dδ` in s/rad.
    pub slope_photons: f64,
    /// `dΔ₀/dδ` (dimensionless).
    pub slope_frequency: f64,
    pub condition: f64,
    /// Per-δ measurements; `n3` and `delta0_hz` columns.
    pub result: ExperimentResult,
}

/// Closed-form slopes `(d|A₃|²/dδ, dΔ₀/dδ)` for Kerr coefficients
/// `(α₃, α₄)` with the decay rates of `sys`.
pub fn kerr_slopes(sys: &TwoModeSystem<f64>, alpha3: f64, alpha4: f64) -> (f64, f64) {
    let (g3, g4) = (sys.mode3().gamma_total(), sys.mode4().gamma_total());
    let s = g3 + g4;
    let d = alpha3 * g4 + alpha4 * g3 + 2.0 * (alpha3 * alpha4).sqrt() * s;
    let sn = -2.0 * g4 / d;
    let e = g3 * g3 * alpha4 / g4 - g4 * alpha3;
    (sn, ((g3 - g4) + sn * e) / s)
}

/// Condition number of the map `(ln α₃, ln α₄) → (ln|s_n|, ln|s_Δ|)`.
fn condition_number(sys: &TwoModeSystem<f64>, a3: f64, a4: f64) -> f64 {
    let h = 1e-6;
    let logs = |x: f64, y: f64| {
        let (p, q) = kerr_slopes(sys, x, y);
        (p.abs().ln(), q.abs().ln())
    };
    let col = |dx: f64, dy: f64| {
        let (p1, q1) = logs(a3 * (1.0 + dx), a4 * (1.0 + dy));
        let (p0, q0) = logs(a3 * (1.0 - dx), a4 * (1.0 - dy));
        ((p1 - p0) / (2.0 * h), (q1 - q0) / (2.0 * h))
    };
    let (m11, m21) = col(h, 0.0);
    let (m12, m22) = col(0.0, h);
    // Singular values of a 2×2 matrix.
    let t = m11 * m11 + m12 * m12 + m21 * m21 + m22 * m22;
    let det = (m11 * m22 - m12 * m21).abs();
    let disc = (t * t - 4.0 * det * det).max(0.0).sqrt();
    let smax = ((t + disc) / 2.0).sqrt();
    let smin = ((t - disc) / 2.0).max(0.0).sqrt();
    if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    }
}

/// Inverts the slopes for `(α₃, α₄)` in rad/s.
///
/// The frequency slope fixes `α₄` as a linear function of `α₃`; the
/// intensity slope then gives a quadratic in `α₃` with one admissible root,
/// refined by Newton steps.
pub fn invert_kerr_slopes(sys: &TwoModeSystem<f64>, slope_photons: f64, slope_frequency: f64) -> Result<(f64, f64, f64), ExperimentError> {
    let singular = |condition: f64| ExperimentError::SingularInversion { condition };
    if !(slope_photons < 0.0) || !slope_photons.is_finite() || !slope_frequency.is_finite() {
        return Err(singular(f64::INFINITY));
    }
    let (g3, g4) = (sys.mode3().gamma_total(), sys.mode4().gamma_total());
    let s = g3 + g4;
    let d = -2.0 * g4 / slope_photons;
    let e = (s * slope_frequency - (g3 - g4)) / slope_photons;
    let (a, b) = (e * g4 / (g3 * g3), g4 * g4 / (g3 * g3));
    let (c0, c1) = (d - g3 * a, g4 + g3 * b);
    let qa = c1 * c1 - 4.0 * s * s * b;
    let qb = -(2.0 * c0 * c1 + 4.0 * s * s * a);
    let qc = c0 * c0;
    let disc = qb * qb - 4.0 * qa * qc;
    if !(disc >= 0.0) {
        return Err(singular(f64::INFINITY));
    }
    let root = disc.sqrt();
    let q = -0.5 * (qb + qb.signum() * root);
    let candidates = [q / qa, qc / q];
    let admissible = |x: f64| x > 0.0 && a + b * x > 0.0 && c0 - c1 * x >= -1e-12 * c0.abs();
    let mut x = candidates.into_iter().filter(|&x| x.is_finite() && admissible(x)).fold(f64::NAN, |acc, x| {
        if acc.is_nan() {
            x
        } else {
            acc.min(x)
        }
    });
    if x.is_nan() {
        return Err(singular(f64::INFINITY));
    }
    let f = |x: f64| {
        let y = a + b * x;
        g4 * x + g3 * y + 2.0 * s * (x * y).sqrt() - d
    };
    for _ in 0..4 {
        let y = a + b * x;
        let df = g4 + g3 * b + s * (y + b * x) / (x * y).sqrt();
        let next = x - f(x) / df;
        if !(next > 0.0 && a + b * next > 0.0) {
            break;
        }
        x = next;
    }
    let (a3, a4) = (x, a + b * x);
    let condition = condition_number(sys, a3, a4);
    if !(condition < MAX_CONDITION) {
        return Err(singular(condition));
    }
    Ok((a3, a4, condition))
}

/// Measures `|A₃|²` and `Δ₀` along a δ cut, fits both slopes and inverts
/// them for the Kerr coefficients.
pub fn kerr_extraction_roundtrip(spec: &KerrSpec, workers: usize) -> Result<KerrFit, ExperimentError> {
    if spec.sweep.axes.len() != 1 || spec.sweep.axes[0].param != SweepParam::Delta {
        return Err(ExperimentError::InvalidSweep("Kerr round-trip sweeps exactly one delta axis".into()));
    }
    if spec.sweep.len() < 2 {
        return Err(ExperimentError::InvalidSweep("Kerr round-trip needs at least two detunings".into()));
    }
    spec.settings.validate()?;
    let sys = &spec.system;
    let records = run_grid(&spec.sweep, 2, workers, |coords, seed| {
        let delta = coord(&spec.sweep, coords, SweepParam::Delta, 0.0);
        let pump = PumpDrive::new(spec.epsilon, delta)?;
        match spec.source {
            KerrSource::ClosedForm => {
                let (n3, _) = sys.steady_state_photons(&pump)?;
                let d0 = sys.oscillation_frequency_shift(&pump)?;
                Ok(PointOutput { values: vec![Some(n3), Some(to_hz(d0))], artifacts: Vec::new() })
            }
            KerrSource::Simulated => {
                let tr = simulate(sys, &pump, &[], &spec.settings, seed_state(seed), seed)?;
                let (n3, _) = tr.mean_photons_after(f64::NEG_INFINITY);
                let f3 = mean_frequency(&demodulate(&tr, Mode::Three, 0.0)?)?;
                Ok(PointOutput { values: vec![Some(n3), Some(f3)], artifacts: Vec::new() })
            }
        }
    })?;
    let result = ExperimentResult {
        columns: vec!["n3".into(), "delta0_hz".into()],
        records,
        provenance: ExperimentSpec::KerrRoundtrip(spec.clone()),
    };
    if let Some(bad) = result.records.iter().find(|r| r.error.is_some()) {
        return Err(ExperimentError::InvalidSweep(format!(
            "point {} failed: {}",
            bad.index,
            bad.error.as_deref().unwrap_or_default()
        )));
    }
    let deltas: Vec<f64> = result.records.iter().map(|r| r.coords[0]).collect();
    let n3: Vec<f64> = result.records.iter().map(|r| r.values[0].unwrap_or(f64::NAN)).collect();
    let d0: Vec<f64> = result.records.iter().map(|r| super::from_hz(r.values[1].unwrap_or(f64::NAN))).collect();
    let slope_photons = linear_fit(&deltas, &n3)?.slope;
    let slope_frequency = linear_fit(&deltas, &d0)?.slope;
    let (a3, a4, condition) = invert_kerr_slopes(sys, slope_photons, slope_frequency)?;
    let (t3, t4) = (sys.mode3().kerr(), sys.mode4().kerr());
    Ok(KerrFit {
        alpha3_hz: to_hz(a3),
        alpha4_hz: to_hz(a4),
        relative_error3: (a3 - t3).abs() / t3,
        relative_error4: (a4 - t4).abs() / t4,
        slope_photons,
        slope_frequency,
        condition,
        result,
    })
}
