use serde::{Deserialize, Serialize};

use super::{coord, run_grid, simulate, to_hz, ExperimentError, ExperimentResult, ExperimentSpec, PointOutput, SimSettings, SweepParam, SweepSpec};
use crate::dynamics::seed_state;
use crate::model::{PumpDrive, StabilityRegion, TwoModeSystem};

/// Stability map over the (ε, δ) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub system: TwoModeSystem<f64>,
    /// Axes over `epsilon` and `delta`; a missing axis is held at zero.
    pub sweep: SweepSpec,
    pub settings: SimSettings,
}

pub const MAP_COLUMNS: [&str; 8] = [
    "region",
    "closed_n3",
    "closed_n4",
    "closed_delta0_hz",
    "sim_n3",
    "sim_n4",
    "seeded_n3",
    "seeded_n4",
];

/// Closed-form and simulated photon numbers at every grid point. Each point
/// is integrated from a small random seed; bistable points are also run from
/// the oscillating steady state (`seeded_*` columns).
pub fn stability_map(spec: &MapSpec, workers: usize) -> Result<ExperimentResult, ExperimentError> {
    spec.settings.validate()?;
    for a in &spec.sweep.axes {
        if !matches!(a.param, SweepParam::Epsilon | SweepParam::Delta) {
            return Err(ExperimentError::InvalidSweep(format!("stability map cannot sweep {}", a.param.name())));
        }
    }
    let sys = &spec.system;
    let records = run_grid(&spec.sweep, MAP_COLUMNS.len(), workers, |coords, seed| {
        let eps = coord(&spec.sweep, coords, SweepParam::Epsilon, 0.0);
        let delta = coord(&spec.sweep, coords, SweepParam::Delta, 0.0);
        let pump = PumpDrive::new(eps, delta)?;
        let region = sys.classify_region(&pump);
        let (c3, c4) = match region {
            StabilityRegion::GroundOnly => (0.0, 0.0),
            _ => sys.steady_state_photons(&pump)?,
        };
        let d0 = sys.oscillation_frequency_shift(&pump).ok().map(to_hz);

        let ground = simulate(sys, &pump, &[], &spec.settings, seed_state(seed), seed)?;
        let (s3, s4) = ground.mean_photons_after(f64::NEG_INFINITY);
        let seeded = if region == StabilityRegion::Bistable {
            let tr = simulate(sys, &pump, &[], &spec.settings, sys.steady_state(&pump, 0.0)?, seed)?;
            Some(tr.mean_photons_after(f64::NEG_INFINITY))
        } else {
            None
        };
        let region_code = match region {
            StabilityRegion::GroundOnly => 1.0,
            StabilityRegion::OscillationOnly => 2.0,
            StabilityRegion::Bistable => 3.0,
        };
        Ok(PointOutput {
            values: vec![
                Some(region_code),
                Some(c3),
                Some(c4),
                d0,
                Some(s3),
                Some(s4),
                seeded.map(|s| s.0),
                seeded.map(|s| s.1),
            ],
            artifacts: Vec::new(),
        })
    })?;
    Ok(ExperimentResult {
        columns: MAP_COLUMNS.iter().map(|s| s.to_string()).collect(),
        records,
        provenance: ExperimentSpec::StabilityMap(spec.clone()),
    })
}
