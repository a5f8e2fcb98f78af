//! Run configuration: a TOML document with unit-suffixed quantities.
//!
//! Frequencies and rates are written in Hz (`"0.56 MHz"`, `"71 kHz"`, or a
//! bare number), pump and sweep values may also be given as multiples of the
//! effective loss rate (`"3 gamma"`), and durations accept `s`, `ms`, `us`
//! and `ns`. Values are kept in Hz here and converted to rad/s only when the
//! model objects are built.

use std::fmt::Write as _;
use std::ops::Range;
use std::path::PathBuf;

use njpo_core::dynamics::NoiseConfig;
use njpo_core::experiments::{from_hz, Axis, AxisScale, SimSettings, SweepParam, SweepSpec};
use njpo_core::model::{InjectionTone, Mode, ModeParams, PumpDrive, TwoModeSystem};
use thiserror::Error;
use toml::de::{DeTable, DeValue};
use toml::Spanned;

/// The bundled default: the measured device at ε = 3Γ, δ = 0.
pub const DEFAULT_CONFIG: &str = include_str!("../default.toml");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: missing field `{field}`")]
    MissingField { line: usize, field: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: bad unit in `{key}`: {message}")]
    BadUnit { line: usize, key: String, message: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue { line: usize, key: String, message: String },
    #[error("line {line}: {message}")]
    Invariant { line: usize, message: String },
}

impl ConfigError {
    pub fn line(&self) -> usize {
        match self {
            ConfigError::Syntax { line, .. }
            | ConfigError::MissingField { line, .. }
            | ConfigError::UnknownKey { line, .. }
            | ConfigError::BadUnit { line, .. }
            | ConfigError::InvalidValue { line, .. }
            | ConfigError::Invariant { line, .. } => *line,
        }
    }
}

/// One resonator mode, all values in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConfig {
    pub frequency_hz: f64,
    pub gamma_total_hz: f64,
    pub gamma_ext_hz: f64,
    pub kerr_hz: f64,
}

impl ModeConfig {
    fn params(&self) -> Result<ModeParams<f64>, njpo_core::model::ModelError> {
        ModeParams::from_hz(self.frequency_hz, self.gamma_total_hz, self.gamma_ext_hz, self.kerr_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToneConfig {
    pub mode: Mode,
    /// Input photon number per decay time of the driven mode.
    pub photons: f64,
    /// Offset from the free-running emission of the driven mode, Hz.
    pub detuning_hz: f64,
    pub phase: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisConfig {
    pub param: SweepParam,
    /// Hz for frequency parameters.
    pub min: f64,
    pub max: f64,
    pub points: usize,
    pub scale: AxisScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
    pub trajectories: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSection {
    pub vacuum: bool,
    pub vacuum_scale: f64,
    /// 1/f detuning-noise strength, (rad/s)² per decade.
    pub flicker_amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSection {
    pub samples: usize,
    pub sample_rate_hz: f64,
    pub transient_s: f64,
    pub step_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisSection {
    pub rbw_hz: f64,
    pub finest_rbw_hz: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode3: ModeConfig,
    pub mode4: ModeConfig,
    /// Pump amplitude ε/2π and detuning δ/2π, Hz.
    pub epsilon_hz: f64,
    pub delta_hz: f64,
    pub tones: Vec<ToneConfig>,
    pub noise: NoiseSection,
    pub integrator: IntegratorSection,
    pub sweep: Option<SweepConfig>,
    pub analysis: AnalysisSection,
    pub output: PathBuf,
    pub seed: u64,
    pub workers: usize,
}

impl RunConfig {
    pub fn default_config() -> Self {
        parse_config(DEFAULT_CONFIG).expect("bundled default config is valid")
    }

    pub fn system(&self) -> TwoModeSystem<f64> {
        TwoModeSystem::new(self.mode3.params().expect("validated"), self.mode4.params().expect("validated"))
    }

    pub fn pump(&self) -> PumpDrive<f64> {
        PumpDrive { epsilon: from_hz(self.epsilon_hz), delta: from_hz(self.delta_hz) }
    }

    /// Tones at their carrier offsets relative to the driven mode's
    /// emission frequency.
    pub fn injection_tones(&self) -> Vec<InjectionTone<f64>> {
        let sys = self.system();
        self.tones
            .iter()
            .map(|t| {
                InjectionTone::with_photon_number(&sys, t.mode, t.photons, from_hz(t.detuning_hz), t.phase)
                    .expect("validated")
            })
            .collect()
    }

    pub fn settings(&self) -> SimSettings {
        SimSettings {
            noise: NoiseConfig {
                vacuum_noise_on: self.noise.vacuum,
                vacuum_scale: self.noise.vacuum_scale,
                flicker_amplitude: self.noise.flicker_amplitude,
                rng_seed: self.seed,
            },
            samples: self.integrator.samples,
            sample_rate: self.integrator.sample_rate_hz,
            transient: self.integrator.transient_s,
            step_fraction: self.integrator.step_fraction,
        }
    }

    /// The configured sweep with frequencies in rad/s.
    pub fn sweep_spec(&self) -> Option<SweepSpec> {
        self.sweep.as_ref().map(|s| {
            SweepSpec { axes: s.axes.iter().map(axis_spec).collect(), trajectories: s.trajectories, master_seed: self.seed }
        })
    }
}

fn axis_spec(a: &AxisConfig) -> Axis {
    if a.param.is_frequency() {
        Axis { param: a.param, min: from_hz(a.min), max: from_hz(a.max), points: a.points, scale: a.scale }
    } else {
        Axis { param: a.param, min: a.min, max: a.max, points: a.points, scale: a.scale }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn param_key(p: SweepParam) -> &'static str {
    p.name()
}

fn param_from_key(s: &str) -> Option<SweepParam> {
    [SweepParam::Epsilon, SweepParam::Delta, SweepParam::PhotonNumber, SweepParam::SignalDetuning]
        .into_iter()
        .find(|p| p.name() == s)
}

#[derive(Clone, Copy, PartialEq)]
enum Unit {
    Frequency { gamma_hz: Option<f64> },
    Time,
    None,
}

/// A table being read: remembers which keys were consumed so leftovers can
/// be reported.
struct Section<'a, 'i> {
    text: &'a str,
    path: String,
    table: &'a DeTable<'i>,
    line: usize,
    used: Vec<&'static str>,
}

impl<'a, 'i> Section<'a, 'i> {
    fn new(text: &'a str, path: impl Into<String>, table: &'a DeTable<'i>, span: Range<usize>) -> Self {
        Self { text, path: path.into(), table, line: line_of(text, span.start), used: Vec::new() }
    }

    fn qualified(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.path, key)
        }
    }

    fn entry(&mut self, key: &'static str) -> Option<&'a Spanned<DeValue<'i>>> {
        self.used.push(key);
        self.table.get(key)
    }

    fn line_at(&self, v: &Spanned<DeValue<'_>>) -> usize {
        line_of(self.text, v.span().start)
    }

    fn missing(&self, key: &str) -> ConfigError {
        ConfigError::MissingField { line: self.line, field: self.qualified(key) }
    }

    fn invalid(&self, v: &Spanned<DeValue<'_>>, key: &str, message: impl Into<String>) -> ConfigError {
        ConfigError::InvalidValue { line: self.line_at(v), key: self.qualified(key), message: message.into() }
    }

    fn quantity(&mut self, key: &'static str, unit: Unit) -> Result<Option<f64>, ConfigError> {
        let Some(v) = self.entry(key) else { return Ok(None) };
        let x = match v.get_ref() {
            DeValue::Integer(i) => i64::from_str_radix(i.as_str(), i.radix())
                .map(|i| i as f64)
                .map_err(|e| self.invalid(v, key, e.to_string()))?,
            DeValue::Float(f) => f.as_str().replace('_', "").parse::<f64>().map_err(|e| self.invalid(v, key, e.to_string()))?,
            DeValue::String(s) => self.parse_with_unit(v, key, s, unit)?,
            other => return Err(self.invalid(v, key, format!("expected a number, found {}", other.type_str()))),
        };
        if !x.is_finite() {
            return Err(self.invalid(v, key, "must be finite"));
        }
        Ok(Some(x))
    }

    fn parse_with_unit(&self, v: &Spanned<DeValue<'_>>, key: &str, s: &str, unit: Unit) -> Result<f64, ConfigError> {
        let s = s.trim();
        let split = s.find(|c: char| c.is_ascii_alphabetic() && c != 'e' && c != 'E').unwrap_or(s.len());
        let (num, suffix) = (s[..split].trim(), s[split..].trim());
        let x: f64 = num.parse().map_err(|_| self.invalid(v, key, format!("cannot read a number from `{s}`")))?;
        let bad = |message: String| ConfigError::BadUnit { line: self.line_at(v), key: self.qualified(key), message };
        let factor = match (unit, suffix) {
            (_, "") => 1.0,
            (Unit::Frequency { .. }, "Hz") => 1.0,
            (Unit::Frequency { .. }, "kHz") => 1e3,
            (Unit::Frequency { .. }, "MHz") => 1e6,
            (Unit::Frequency { .. }, "GHz") => 1e9,
            (Unit::Frequency { gamma_hz: Some(g) }, "gamma") => g,
            (Unit::Time, "s") => 1.0,
            (Unit::Time, "ms") => return Ok(x / 1e3),
            (Unit::Time, "us") => return Ok(x / 1e6),
            (Unit::Time, "ns") => return Ok(x / 1e9),
            (Unit::Frequency { gamma_hz }, other) => {
                let allowed = if gamma_hz.is_some() { "Hz, kHz, MHz, GHz or gamma" } else { "Hz, kHz, MHz or GHz" };
                return Err(bad(format!("`{other}` is not a frequency unit (use {allowed})")));
            }
            (Unit::Time, other) => return Err(bad(format!("`{other}` is not a time unit (use s, ms, us or ns)"))),
            (Unit::None, other) => return Err(bad(format!("`{other}`: this value takes no unit"))),
        };
        Ok(x * factor)
    }

    fn require(&mut self, key: &'static str, unit: Unit) -> Result<f64, ConfigError> {
        self.quantity(key, unit)?.ok_or_else(|| self.missing(key))
    }

    fn integer(&mut self, key: &'static str) -> Result<Option<u64>, ConfigError> {
        let Some(v) = self.entry(key) else { return Ok(None) };
        let parsed = match v.get_ref() {
            DeValue::Integer(i) => u64::from_str_radix(i.as_str(), i.radix()).ok(),
            DeValue::String(s) => s.trim().parse::<u64>().ok(),
            _ => None,
        };
        parsed.map(Some).ok_or_else(|| self.invalid(v, key, "expected a non-negative integer"))
    }

    fn count(&mut self, key: &'static str) -> Result<Option<usize>, ConfigError> {
        Ok(self.integer(key)?.map(|n| n as usize))
    }

    fn boolean(&mut self, key: &'static str) -> Result<Option<bool>, ConfigError> {
        let Some(v) = self.entry(key) else { return Ok(None) };
        v.get_ref().as_bool().map(Some).ok_or_else(|| self.invalid(v, key, "expected true or false"))
    }

    fn string(&mut self, key: &'static str) -> Result<Option<(String, usize)>, ConfigError> {
        let Some(v) = self.entry(key) else { return Ok(None) };
        match v.get_ref().as_str() {
            Some(s) => Ok(Some((s.to_string(), self.line_at(v)))),
            None => Err(self.invalid(v, key, "expected a string")),
        }
    }

    fn subtable(&mut self, key: &'static str) -> Result<Option<Section<'a, 'i>>, ConfigError> {
        let Some(v) = self.entry(key) else { return Ok(None) };
        match v.get_ref() {
            DeValue::Table(t) => Ok(Some(Section::new(self.text, self.qualified(key), t, v.span()))),
            other => Err(self.invalid(v, key, format!("expected a table, found {}", other.type_str()))),
        }
    }

    fn table_array(&mut self, key: &'static str) -> Result<Vec<Section<'a, 'i>>, ConfigError> {
        let Some(v) = self.entry(key) else { return Ok(Vec::new()) };
        let DeValue::Array(items) = v.get_ref() else {
            return Err(self.invalid(v, key, "expected an array of tables"));
        };
        items
            .iter()
            .map(|item| match item.get_ref() {
                DeValue::Table(t) => Ok(Section::new(self.text, self.qualified(key), t, item.span())),
                _ => Err(self.invalid(item, key, "expected a table")),
            })
            .collect()
    }

    /// First leftover key in document order.
    fn unknown(&self) -> Option<ConfigError> {
        self.table
            .iter()
            .filter(|(k, _)| !self.used.contains(&k.get_ref().as_ref()))
            .min_by_key(|(k, _)| k.span().start)
            .map(|(k, _)| ConfigError::UnknownKey { line: line_of(self.text, k.span().start), key: self.qualified(k.get_ref()) })
    }
}

/// Collects unknown-key reports from every section, keeping the earliest.
#[derive(Default)]
struct Leftovers(Option<ConfigError>);

impl Leftovers {
    fn check(&mut self, s: &Section<'_, '_>) {
        if let Some(e) = s.unknown() {
            if self.0.as_ref().is_none_or(|old| e.line() < old.line()) {
                self.0 = Some(e);
            }
        }
    }
}

/// Scans the document for keys that are not part of the format, so that
/// they are reported ahead of anything else.
fn check_keys(text: &str, root: &DeTable<'_>, root_span: Range<usize>) -> Result<(), ConfigError> {
    const SCHEMA: &[(&str, &[&str])] = &[
        ("", &["mode3", "mode4", "pump", "tone", "noise", "integrator", "sweep", "analysis", "run"]),
        ("mode3", &["frequency", "gamma_total", "gamma_ext", "kerr"]),
        ("mode4", &["frequency", "gamma_total", "gamma_ext", "kerr"]),
        ("pump", &["epsilon", "delta"]),
        ("tone", &["mode", "photons", "detuning", "phase"]),
        ("noise", &["vacuum", "vacuum_scale", "flicker_amplitude"]),
        ("integrator", &["samples", "sample_rate", "transient", "step_fraction"]),
        ("sweep", &["trajectories", "axis"]),
        ("sweep.axis", &["param", "min", "max", "points", "scale"]),
        ("analysis", &["rbw", "finest_rbw"]),
        ("run", &["seed", "output", "workers"]),
    ];
    fn walk(
        text: &str,
        path: &str,
        table: &DeTable<'_>,
        span: Range<usize>,
        schema: &[(&str, &[&'static str])],
        out: &mut Leftovers,
    ) {
        let Some((_, keys)) = schema.iter().find(|(p, _)| *p == path) else { return };
        let mut s = Section::new(text, path, table, span);
        s.used = keys.to_vec();
        out.check(&s);
        for (k, v) in table.iter() {
            let child = if path.is_empty() { k.get_ref().to_string() } else { format!("{path}.{}", k.get_ref()) };
            match v.get_ref() {
                DeValue::Table(t) => walk(text, &child, t, v.span(), schema, out),
                DeValue::Array(items) => {
                    for item in items.iter() {
                        if let DeValue::Table(t) = item.get_ref() {
                            walk(text, &child, t, item.span(), schema, out);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let mut out = Leftovers::default();
    walk(text, "", root, root_span, SCHEMA, &mut out);
    out.0.map_or(Ok(()), Err)
}

fn read_mode(root: &mut Section<'_, '_>, key: &'static str) -> Result<ModeConfig, ConfigError> {
    let line = root.line;
    let mut s = root.subtable(key)?.ok_or(ConfigError::MissingField { line, field: format!("{key}.frequency") })?;
    let f = Unit::Frequency { gamma_hz: None };
    let m = ModeConfig {
        frequency_hz: s.require("frequency", f)?,
        gamma_total_hz: s.require("gamma_total", f)?,
        gamma_ext_hz: s.require("gamma_ext", f)?,
        kerr_hz: s.require("kerr", f)?,
    };
    m.params().map_err(|e| ConfigError::Invariant { line: s.line, message: format!("[{key}] {e}") })?;
    Ok(m)
}

/// Parses and validates a run configuration. Errors carry the line of the
/// offending key (or of its section when a key is missing).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let doc = DeTable::parse(text).map_err(|e| ConfigError::Syntax {
        line: e.span().map_or(1, |s| line_of(text, s.start)),
        message: e.message().to_string(),
    })?;
    check_keys(text, doc.get_ref(), doc.span())?;
    let mut root = Section::new(text, "", doc.get_ref(), 0..0);

    let mode3 = read_mode(&mut root, "mode3")?;
    let mode4 = read_mode(&mut root, "mode4")?;
    let gamma_hz = (mode3.gamma_total_hz * mode4.gamma_total_hz).sqrt();
    let fg = Unit::Frequency { gamma_hz: Some(gamma_hz) };
    let f = Unit::Frequency { gamma_hz: None };

    let mut pump = root.subtable("pump")?.ok_or(ConfigError::MissingField { line: 1, field: "pump.epsilon".into() })?;
    let epsilon_hz = pump.require("epsilon", fg)?;
    let delta_hz = pump.require("delta", fg)?;
    if epsilon_hz < 0.0 {
        return Err(ConfigError::Invariant { line: pump.line, message: "pump epsilon must be >= 0".into() });
    }

    let mut tones = Vec::new();
    for mut t in root.table_array("tone")? {
        let mode = match t.integer("mode")? {
            Some(3) => Mode::Three,
            Some(4) => Mode::Four,
            Some(_) => {
                let v = t.table.get("mode").expect("present");
                return Err(t.invalid(v, "mode", "must be 3 or 4"));
            }
            None => return Err(t.missing("mode")),
        };
        let tone = ToneConfig {
            mode,
            photons: t.require("photons", Unit::None)?,
            detuning_hz: t.quantity("detuning", fg)?.unwrap_or(0.0),
            phase: t.quantity("phase", Unit::None)?.unwrap_or(0.0),
        };
        if tone.photons < 0.0 {
            return Err(ConfigError::Invariant { line: t.line, message: "tone photons must be >= 0".into() });
        }
        tones.push(tone);
    }

    let noise = match root.subtable("noise")? {
        Some(mut s) => {
            let n = NoiseSection {
                vacuum: s.boolean("vacuum")?.unwrap_or(true),
                vacuum_scale: s.quantity("vacuum_scale", Unit::None)?.unwrap_or(1.0),
                flicker_amplitude: s.quantity("flicker_amplitude", Unit::None)?.unwrap_or(0.0),
            };
            let probe = NoiseConfig {
                vacuum_noise_on: n.vacuum,
                vacuum_scale: n.vacuum_scale,
                flicker_amplitude: n.flicker_amplitude,
                rng_seed: 0,
            };
            probe.validate().map_err(|e| ConfigError::Invariant { line: s.line, message: format!("[noise] {e}") })?;
            n
        }
        None => NoiseSection { vacuum: true, vacuum_scale: 1.0, flicker_amplitude: 0.0 },
    };

    let defaults = SimSettings::new(&TwoModeSystem::new(mode3.params().expect("checked"), mode4.params().expect("checked")), true);
    let integrator = match root.subtable("integrator")? {
        Some(mut s) => {
            let i = IntegratorSection {
                samples: s.count("samples")?.unwrap_or(defaults.samples),
                sample_rate_hz: s.quantity("sample_rate", f)?.unwrap_or(defaults.sample_rate),
                transient_s: s.quantity("transient", Unit::Time)?.unwrap_or(defaults.transient),
                step_fraction: s.quantity("step_fraction", Unit::None)?.unwrap_or(defaults.step_fraction),
            };
            let probe = SimSettings {
                noise: NoiseConfig::off(0),
                samples: i.samples,
                sample_rate: i.sample_rate_hz,
                transient: i.transient_s,
                step_fraction: i.step_fraction,
            };
            probe.validate().map_err(|e| ConfigError::Invariant { line: s.line, message: format!("[integrator] {e}") })?;
            i
        }
        None => IntegratorSection {
            samples: defaults.samples,
            sample_rate_hz: defaults.sample_rate,
            transient_s: defaults.transient,
            step_fraction: defaults.step_fraction,
        },
    };

    let sweep = match root.subtable("sweep")? {
        Some(mut s) => {
            let trajectories = s.count("trajectories")?.unwrap_or(1);
            let mut axes = Vec::new();
            for mut a in s.table_array("axis")? {
                let (name, line) = a.string("param")?.ok_or_else(|| a.missing("param"))?;
                let param = param_from_key(&name).ok_or(ConfigError::InvalidValue {
                    line,
                    key: a.qualified("param"),
                    message: format!("unknown sweep parameter `{name}`"),
                })?;
                let unit = if param.is_frequency() { fg } else { Unit::None };
                let min = a.require("min", unit)?;
                let max = a.quantity("max", unit)?.unwrap_or(min);
                let points = a.count("points")?.unwrap_or(1);
                let scale = match a.string("scale")? {
                    None => AxisScale::Linear,
                    Some((s, _)) if s == "linear" => AxisScale::Linear,
                    Some((s, _)) if s == "log" => AxisScale::Log,
                    Some((s, line)) => {
                        return Err(ConfigError::InvalidValue {
                            line,
                            key: a.qualified("scale"),
                            message: format!("expected `linear` or `log`, found `{s}`"),
                        })
                    }
                };
                let axis = AxisConfig { param, min, max, points, scale };
                axis_spec(&axis)
                    .validate()
                    .map_err(|e| ConfigError::Invariant { line: a.line, message: format!("[[sweep.axis]] {e}") })?;
                axes.push(axis);
            }
            let spec = SweepSpec { axes: axes.iter().map(axis_spec).collect(), trajectories, master_seed: 0 };
            spec.validate().map_err(|e| ConfigError::Invariant { line: s.line, message: format!("[sweep] {e}") })?;
            Some(SweepConfig { axes, trajectories })
        }
        None => None,
    };

    let analysis = match root.subtable("analysis")? {
        Some(mut s) => {
            let a = AnalysisSection {
                rbw_hz: s.quantity("rbw", f)?.unwrap_or(5e3),
                finest_rbw_hz: s.quantity("finest_rbw", f)?.unwrap_or(50.0),
            };
            if !(a.rbw_hz > 0.0 && a.finest_rbw_hz > 0.0) {
                return Err(ConfigError::Invariant { line: s.line, message: "resolution bandwidths must be positive".into() });
            }
            a
        }
        None => AnalysisSection { rbw_hz: 5e3, finest_rbw_hz: 50.0 },
    };

    let (output, seed, workers) = match root.subtable("run")? {
        Some(mut s) => {
            let output = s.string("output")?.map_or_else(|| PathBuf::from("out"), |(p, _)| PathBuf::from(p));
            let seed = s.integer("seed")?.unwrap_or(0);
            let workers = s.count("workers")?.unwrap_or(1);
            if workers == 0 {
                return Err(ConfigError::Invariant { line: s.line, message: "workers must be >= 1".into() });
            }
            (output, seed, workers)
        }
        None => (PathBuf::from("out"), 0, 1),
    };

    Ok(RunConfig {
        mode3,
        mode4,
        epsilon_hz,
        delta_hz,
        tones,
        noise,
        integrator,
        sweep,
        analysis,
        output,
        seed,
        workers,
    })
}

fn hz(x: f64) -> String {
    format!("\"{x} Hz\"")
}

fn plain(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x:?}")
    }
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

/// Writes a configuration that parses back to an identical value.
pub fn render_config(c: &RunConfig) -> String {
    let mut out = String::new();
    for (name, m) in [("mode3", &c.mode3), ("mode4", &c.mode4)] {
        let _ = writeln!(out, "[{name}]");
        let _ = writeln!(out, "frequency = {}", hz(m.frequency_hz));
        let _ = writeln!(out, "gamma_total = {}", hz(m.gamma_total_hz));
        let _ = writeln!(out, "gamma_ext = {}", hz(m.gamma_ext_hz));
        let _ = writeln!(out, "kerr = {}\n", hz(m.kerr_hz));
    }
    let _ = writeln!(out, "[pump]\nepsilon = {}\ndelta = {}\n", hz(c.epsilon_hz), hz(c.delta_hz));
    for t in &c.tones {
        let _ = writeln!(
            out,
            "[[tone]]\nmode = {}\nphotons = {}\ndetuning = {}\nphase = {}\n",
            t.mode.index(),
            plain(t.photons),
            hz(t.detuning_hz),
            plain(t.phase)
        );
    }
    let _ = writeln!(
        out,
        "[noise]\nvacuum = {}\nvacuum_scale = {}\nflicker_amplitude = {}\n",
        c.noise.vacuum,
        plain(c.noise.vacuum_scale),
        plain(c.noise.flicker_amplitude)
    );
    let _ = writeln!(
        out,
        "[integrator]\nsamples = {}\nsample_rate = {}\ntransient = \"{} s\"\nstep_fraction = {}\n",
        c.integrator.samples,
        hz(c.integrator.sample_rate_hz),
        c.integrator.transient_s,
        plain(c.integrator.step_fraction)
    );
    if let Some(s) = &c.sweep {
        let _ = writeln!(out, "[sweep]\ntrajectories = {}\n", s.trajectories);
        for a in &s.axes {
            let v = |x: f64| if a.param.is_frequency() { hz(x) } else { plain(x) };
            let scale = match a.scale {
                AxisScale::Linear => "linear",
                AxisScale::Log => "log",
            };
            let _ = writeln!(
                out,
                "[[sweep.axis]]\nparam = \"{}\"\nmin = {}\nmax = {}\npoints = {}\nscale = \"{scale}\"\n",
                param_key(a.param),
                v(a.min),
                v(a.max),
                a.points
            );
        }
    }
    let _ = writeln!(out, "[analysis]\nrbw = {}\nfinest_rbw = {}\n", hz(c.analysis.rbw_hz), hz(c.analysis.finest_rbw_hz));
    let seed = if c.seed > i64::MAX as u64 { format!("\"{}\"", c.seed) } else { c.seed.to_string() };
    let _ = writeln!(
        out,
        "[run]\nseed = {seed}\noutput = {}\nworkers = {}",
        quoted(&c.output.to_string_lossy()),
        c.workers
    );
    out
}
