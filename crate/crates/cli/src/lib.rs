//! Command-line front end: reads a run configuration, runs one experiment
//! and writes its tables and manifest to an output directory.

pub mod config;
pub mod output;

use std::fs;
use std::io;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use njpo_core::analysis::{
    demodulate, histogram2d, linewidth, phase_series, phase_statistics, photon_spectral_density, Linewidth, WelchConfig,
};
use njpo_core::dynamics::seed_state;
use njpo_core::experiments::{
    from_hz, injection_locking_scan, kerr_extraction_roundtrip, mean_frequency, pump_ramp_spectrogram, simulate,
    stability_map, synchronization_scan, to_hz, Axis, ExperimentError, ExperimentSpec, KerrSource, KerrSpec, LockSpec,
    MapSpec, RampSpec, SweepParam, SweepSpec, SyncSpec,
};
use njpo_core::model::{Mode, PumpDrive, StabilityRegion};
use serde_json::json;
use thiserror::Error;

use config::{parse_config, render_config, ConfigError, RunConfig, DEFAULT_CONFIG};
use output::OutputDir;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_RUN: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "njpo", version, about = "Nondegenerate parametric oscillator simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML); the bundled default when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Switch off vacuum and flicker noise.
    #[arg(long, global = true)]
    pub no_noise: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Closed-form photon numbers, frequencies and regions.
    SteadyState,
    /// One trajectory with its spectra, phase statistics and IQ histograms.
    Simulate,
    /// Stability map over pump amplitude and detuning.
    Map,
    /// Spectra along a pump-amplitude ramp.
    Ramp,
    /// Phase spread and linewidth against injected photon number.
    Lock,
    /// Synchronization gap and idler census against signal detuning.
    Sync,
    /// Kerr-coefficient extraction round trip.
    KerrFit {
        /// Use closed-form slopes instead of simulated runs.
        #[arg(long)]
        closed_form: bool,
    },
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SteadyState => "steady-state",
            Command::Simulate => "simulate",
            Command::Map => "map",
            Command::Ramp => "ramp",
            Command::Lock => "lock",
            Command::Sync => "sync",
            Command::KerrFit { .. } => "kerr-fit",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("run: {0}")]
    Run(#[from] ExperimentError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
            CliError::Run(_) => EXIT_RUN,
        }
    }
}

impl From<njpo_core::dynamics::DynamicsError> for CliError {
    fn from(e: njpo_core::dynamics::DynamicsError) -> Self {
        CliError::Run(e.into())
    }
}

impl From<njpo_core::analysis::AnalysisError> for CliError {
    fn from(e: njpo_core::analysis::AnalysisError) -> Self {
        CliError::Run(e.into())
    }
}

impl From<njpo_core::model::ModelError> for CliError {
    fn from(e: njpo_core::model::ModelError) -> Self {
        CliError::Run(e.into())
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Messages go to stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(dir) => {
            println!("wrote {}", dir.display());
            EXIT_OK
        }
        Err(e) => {
            eprintln!("njpo: {e}");
            e.exit_code()
        }
    }
}

/// Resolves the configuration with command-line overrides applied.
pub fn resolve_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let text = match &cli.config {
        Some(p) => fs::read_to_string(p)?,
        None => DEFAULT_CONFIG.to_string(),
    };
    let mut c = parse_config(&text)?;
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.output = o.clone();
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(CliError::Usage("--workers must be >= 1".into()));
        }
        c.workers = w;
    }
    if cli.no_noise {
        c.noise.vacuum = false;
        c.noise.flicker_amplitude = 0.0;
    }
    Ok(c)
}

/// Runs the parsed command; returns the output directory.
pub fn execute(cli: &Cli) -> Result<PathBuf, CliError> {
    let cfg = resolve_config(cli)?;
    let mut out = OutputDir::create(&cfg.output)?;
    let rendered = render_config(&cfg);
    out.write("config.toml", |w| w.write_all(rendered.as_bytes()))?;
    let (experiment, summary) = match cli.command {
        Command::SteadyState => steady_state(&cfg, &mut out)?,
        Command::Simulate => single_run(&cfg, &mut out)?,
        Command::Map => map(&cfg, &mut out)?,
        Command::Ramp => ramp(&cfg, &mut out)?,
        Command::Lock => lock(&cfg, &mut out)?,
        Command::Sync => sync(&cfg, &mut out)?,
        Command::KerrFit { closed_form } => kerr(&cfg, closed_form, &mut out)?,
    };
    let experiment = experiment.map(|e| serde_json::to_value(e).map_err(io::Error::other)).transpose()?;
    let root = out.path().to_path_buf();
    out.finish(cli.command.name(), cfg.seed, cfg.workers, &rendered, experiment, summary)?;
    Ok(root)
}

type Outcome = (Option<ExperimentSpec>, serde_json::Value);

/// The configured sweep, or `default` when none is given.
fn sweep_or(cfg: &RunConfig, default: Vec<Axis>) -> SweepSpec {
    cfg.sweep_spec().unwrap_or_else(|| SweepSpec::new(default, cfg.seed))
}

fn steady_state(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let g = sys.gamma_eff();
    let base = cfg.pump();
    let sweep = sweep_or(cfg, vec![Axis::linear(SweepParam::Epsilon, 0.5 * g, 5.0 * g, 10)]);
    let mut points = vec![(base.epsilon, base.delta)];
    for c in sweep.expand() {
        let eps = sweep.position(SweepParam::Epsilon).map_or(base.epsilon, |k| c[k]);
        let delta = sweep.position(SweepParam::Delta).map_or(base.delta, |k| c[k]);
        points.push((eps, delta));
    }
    let mut at_config = json!(null);
    out.write("steady_state.csv", |w| {
        let mut t = csv::Writer::from_writer(w);
        t.write_record([
            "epsilon_hz",
            "delta_hz",
            "epsilon_over_gamma",
            "region",
            "n3",
            "n4",
            "flux3",
            "flux4",
            "delta0_hz",
            "emission3_hz",
            "emission4_hz",
            "threshold_detuning_hz",
            "phase_sum",
        ])?;
        for (k, &(eps, delta)) in points.iter().enumerate() {
            let pump = PumpDrive::new(eps, delta).map_err(io::Error::other)?;
            let region = sys.classify_region(&pump);
            let n = match region {
                StabilityRegion::GroundOnly => Some((0.0, 0.0)),
                _ => sys.steady_state_photons(&pump).ok(),
            };
            let flux = n.map(|n| sys.output_flux(n));
            let shift = sys.oscillation_frequency_shift(&pump).ok();
            let oscillating = n.is_some_and(|(a, b)| a > 0.0 || b > 0.0);
            let emission = |m| oscillating.then(|| to_hz(sys.emission_detuning(&pump, m)));
            let row = [
                Some(to_hz(eps)),
                Some(to_hz(delta)),
                Some(eps / g),
                None,
                n.map(|n| n.0),
                n.map(|n| n.1),
                flux.map(|f| f.0),
                flux.map(|f| f.1),
                shift.map(to_hz),
                emission(Mode::Three),
                emission(Mode::Four),
                sys.threshold_detuning(eps).ok().map(to_hz),
                sys.phase_sum(eps).ok(),
            ];
            let mut rec: Vec<String> = row.iter().map(|v| v.map_or_else(|| "nan".to_string(), fmt)).collect();
            rec[3] = region.label().to_string();
            t.write_record(&rec)?;
            if k == 0 {
                at_config = json!({ "region": region.label(), "n3": n.map(|n| n.0), "n4": n.map(|n| n.1),
                    "delta0_hz": shift.map(to_hz) });
                println!(
                    "eps = {:.3} gamma, delta = {:.3} gamma: region {}, |A3|^2 = {}, |A4|^2 = {}",
                    eps / g,
                    delta / g,
                    region.label(),
                    n.map_or("-".into(), |n| format!("{:.4}", n.0)),
                    n.map_or("-".into(), |n| format!("{:.4}", n.1))
                );
            }
        }
        t.flush()
    })?;
    Ok((None, json!({ "points": points.len(), "configured_point": at_config })))
}

fn fmt(x: f64) -> String {
    njpo_core::experiments::fmt_full(x)
}

fn single_run(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let pump = cfg.pump();
    let tones = cfg.injection_tones();
    let settings = cfg.settings();
    let tr = simulate(&sys, &pump, &tones, &settings, seed_state(cfg.seed), cfg.seed)?;
    out.write("trajectory.csv", |w| tr.write_csv(w))?;
    let (n3, n4) = tr.mean_photons_after(f64::NEG_INFINITY);
    let welch = WelchConfig::for_resolution(settings.sample_rate, cfg.analysis.rbw_hz);
    let mut modes = Vec::new();
    for mode in [Mode::Three, Mode::Four] {
        let q = demodulate(&tr, mode, sys.emission_detuning(&pump, mode))?;
        let psd = photon_spectral_density(&q, &welch)?;
        let k = mode.index();
        out.write(&format!("psd_mode{k}.csv"), |w| psd.write_csv(w, &[("mode", k.to_string())]))?;
        let r = 2.0 * (2.0 * sys.mode(mode).gamma_ext() * (if k == 3 { n3 } else { n4 }).max(0.5)).sqrt();
        let h = histogram2d(&q.i, &q.q, (64, 64), ((-r, r), (-r, r)))?;
        out.write(&format!("iq_mode{k}.csv"), |w| h.write_csv(w, &[("mode", k.to_string())]))?;
        let stats = phase_series(&q).ok().and_then(|th| phase_statistics(&th).ok());
        let lw = linewidth(&psd).ok();
        modes.push(json!({
            "mode": k,
            "mean_frequency_hz": mean_frequency(&q).ok(),
            "phase_std": stats.as_ref().map(|s| s.std),
            "linewidth_hz": lw.as_ref().map(Linewidth::upper_bound),
            "linewidth_resolved": lw.as_ref().map(|l| matches!(l, Linewidth::Resolved { .. })),
        }));
    }
    println!("mean photons: |A3|^2 = {n3:.4}, |A4|^2 = {n4:.4}");
    let closed = sys.steady_state_photons(&pump).ok();
    let summary = json!({
        "n3": n3, "n4": n4,
        "closed_n3": closed.map(|c| c.0), "closed_n4": closed.map(|c| c.1),
        "samples": tr.len(),
        "provenance": tr.provenance,
        "modes": modes,
    });
    Ok((None, summary))
}

fn map(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let g = cfg.system().gamma_eff();
    let spec = MapSpec {
        system: cfg.system(),
        sweep: sweep_or(
            cfg,
            vec![Axis::linear(SweepParam::Epsilon, 0.5 * g, 4.0 * g, 5), Axis::linear(SweepParam::Delta, -4.0 * g, 2.0 * g, 5)],
        ),
        settings: cfg.settings(),
    };
    let r = stability_map(&spec, cfg.workers)?;
    out.write_result(&r)?;
    println!("{} points, {} failed", r.records.len(), r.failures());
    let summary = json!({ "points": r.records.len(), "failures": r.failures() });
    Ok((Some(r.provenance), summary))
}

fn ramp(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let g = sys.gamma_eff();
    let spec = RampSpec {
        system: sys,
        delta: cfg.pump().delta,
        sweep: sweep_or(cfg, vec![Axis::linear(SweepParam::Epsilon, 0.5 * g, 4.0 * g, 8)]),
        settings: cfg.settings(),
        rbw_hz: cfg.analysis.rbw_hz,
    };
    let r = pump_ramp_spectrogram(&spec, cfg.workers)?.result;
    out.write_result(&r)?;
    println!("{} spectra, {} failed", r.records.len(), r.failures());
    let summary = json!({ "points": r.records.len(), "failures": r.failures() });
    Ok((Some(r.provenance), summary))
}

fn lock(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let tone_mode = cfg.tones.first().map_or(Mode::Three, |t| t.mode);
    let spec = LockSpec {
        system: sys,
        pump: cfg.pump(),
        tone_mode,
        sweep: sweep_or(cfg, vec![Axis::log(SweepParam::PhotonNumber, 0.01, 4.0, 9)]),
        settings: cfg.settings(),
        finest_rbw_hz: cfg.analysis.finest_rbw_hz,
    };
    let scan = injection_locking_scan(&spec, cfg.workers)?;
    out.write_result(&scan.result)?;
    println!(
        "free-running linewidth {:.0} Hz, knee at <n> = {}",
        scan.free_running.linewidth3_hz,
        scan.knee_photon_number.map_or("-".into(), |k| format!("{k:.3}"))
    );
    let summary = json!({
        "free_running": scan.free_running,
        "knee_photon_number": scan.knee_photon_number,
        "failures": scan.result.failures(),
    });
    Ok((Some(scan.result.provenance), summary))
}

fn sync(cfg: &RunConfig, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let spec = SyncSpec {
        system: sys,
        pump: cfg.pump(),
        sweep: sweep_or(
            cfg,
            vec![
                Axis::log(SweepParam::PhotonNumber, 0.5, 4.0, 4),
                Axis::linear(SweepParam::SignalDetuning, from_hz(-1.0e6), from_hz(1.0e6), 21),
            ],
        ),
        settings: cfg.settings(),
        rbw_hz: cfg.analysis.rbw_hz,
    };
    let scan = synchronization_scan(&spec, cfg.workers)?;
    out.write_result(&scan.result)?;
    out.write("gaps.csv", |w| {
        let mut t = csv::Writer::from_writer(w);
        t.write_record(["photon_number", "width_hz", "error_hz", "truncated"])?;
        for g in &scan.gaps {
            t.write_record([fmt(g.photon_number), fmt(g.width_hz), fmt(g.error_hz), g.truncated.to_string()])?;
        }
        t.flush()
    })?;
    let fit = scan.fit.map(|f| json!({ "coefficient_hz": f.fit.coefficient, "r_squared": f.fit.r_squared }));
    for g in &scan.gaps {
        println!("<n> = {:.3}: gap {:.0} +- {:.0} Hz{}", g.photon_number, g.width_hz, g.error_hz, if g.truncated { " (truncated)" } else { "" });
    }
    let summary = json!({ "gaps": scan.gaps, "sqrt_fit": fit, "failures": scan.result.failures() });
    Ok((Some(scan.result.provenance), summary))
}

fn kerr(cfg: &RunConfig, closed_form: bool, out: &mut OutputDir) -> Result<Outcome, CliError> {
    let sys = cfg.system();
    let mut spec = KerrSpec::default_for(sys, if closed_form { KerrSource::ClosedForm } else { KerrSource::Simulated }, cfg.seed);
    spec.epsilon = cfg.pump().epsilon;
    spec.settings = cfg.settings();
    if let Some(s) = cfg.sweep_spec() {
        spec.sweep = s;
    }
    let fit = kerr_extraction_roundtrip(&spec, cfg.workers)?;
    out.write_result(&fit.result)?;
    println!(
        "alpha3/2pi = {:.0} Hz ({:+.2}%), alpha4/2pi = {:.0} Hz ({:+.2}%)",
        fit.alpha3_hz,
        100.0 * fit.relative_error3,
        fit.alpha4_hz,
        100.0 * fit.relative_error4
    );
    let summary = json!({
        "alpha3_hz": fit.alpha3_hz,
        "alpha4_hz": fit.alpha4_hz,
        "relative_error3": fit.relative_error3,
        "relative_error4": fit.relative_error4,
        "slope_photons": fit.slope_photons,
        "slope_frequency": fit.slope_frequency,
        "condition": fit.condition,
    });
    Ok((Some(fit.result.provenance), summary))
}
