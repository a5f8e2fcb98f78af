//! Time-domain integration of the quasiclassical two-mode equations of
//! motion under parametric pumping, coherent injection, vacuum noise and
//! optional 1/f pump-detuning noise.
//!
//! In the doubly rotating frame each amplitude obeys
//!
//! ```text
//! dA₃/dt = (iζ₃ − Γ₃)A₃ + iεA₄* − i√(2Γ₃₀)B₃(t) − i√(2Γ₃)ξ₃(t)
//! dA₄/dt = (iζ₄ − Γ₄)A₄ + iεA₃* − i√(2Γ₄₀)B₄(t) − i√(2Γ₄)ξ₄(t)
//! ```
//!
//! with `ζ_n` the Kerr-shifted detunings. The deterministic part is advanced
//! with classical RK4; the noise enters as an additive Gaussian increment
//! after each step.

use std::io::{self, Write};

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FieldState, InjectionTone, Mode, ModelError, PumpDrive, TwoModeSystem};
use crate::scalar::Real;

/// Bound on `dt · (fastest rate)` checked before a run.
pub const STABILITY_LIMIT: f64 = 0.1;

/// Amplitude of the random seed state used to leave the unstable ground
/// state in finite time.
pub const SEED_AMPLITUDE: f64 = 1e-3;

/// OU components per decade of the flicker band.
pub const FLICKER_COMPONENTS_PER_DECADE: f64 = 3.0;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("stability guard violated: dt·rate = {product:.3e} >= {limit}")]
    StabilityGuard { product: f64, limit: f64 },
    #[error("non-finite state at step {step} (t = {time:e} s)")]
    NonFinite { step: usize, time: f64 },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub vacuum_noise_on: bool,
    /// Multiplier on the half-photon vacuum level.
    pub vacuum_scale: f64,
    /// 1/f detuning-noise strength in (rad/s)² per decade of bandwidth. The
    /// one-sided spectrum of the detuning noise is `A_f / (f ln 10)`.
    pub flicker_amplitude: f64,
    pub rng_seed: u64,
}

impl NoiseConfig {
    pub fn off(rng_seed: u64) -> Self {
        Self { vacuum_noise_on: false, vacuum_scale: 1.0, flicker_amplitude: 0.0, rng_seed }
    }

    pub fn vacuum(rng_seed: u64) -> Self {
        Self { vacuum_noise_on: true, vacuum_scale: 1.0, flicker_amplitude: 0.0, rng_seed }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.vacuum_scale >= 0.0) || !self.vacuum_scale.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!("vacuum_scale must be >= 0, got {}", self.vacuum_scale)));
        }
        if !(self.flicker_amplitude >= 0.0) || !self.flicker_amplitude.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!(
                "flicker_amplitude must be >= 0, got {}",
                self.flicker_amplitude
            )));
        }
        Ok(())
    }

    fn vacuum_active(&self) -> bool {
        self.vacuum_noise_on && self.vacuum_scale > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct IntegratorConfig<T> {
    /// Time step in s.
    pub dt: T,
    /// Simulated time in s.
    pub duration: T,
    /// Integration steps between stored samples.
    pub record_stride: usize,
    pub initial_state: FieldState<T>,
}

impl<T: Real> IntegratorConfig<T> {
    pub fn n_steps(&self) -> usize {
        (self.duration / self.dt).round().to_usize().unwrap_or(0)
    }

    /// Interval between recorded samples in s.
    pub fn sample_interval(&self) -> T {
        self.dt * T::from_usize_lossy(self.record_stride)
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration > T::zero()) || !self.duration.is_finite() {
            return Err(DynamicsError::InvalidConfig(format!("duration must be positive, got {}", self.duration)));
        }
        if self.record_stride == 0 {
            return Err(DynamicsError::InvalidConfig("record_stride must be >= 1".into()));
        }
        if self.n_steps() == 0 {
            return Err(DynamicsError::InvalidConfig("duration shorter than one step".into()));
        }
        if !self.initial_state.is_finite() {
            return Err(DynamicsError::InvalidConfig("initial state is not finite".into()));
        }
        Ok(())
    }
}

/// Small random state with `|A_n| = SEED_AMPLITUDE` and uniform phases.
pub fn seed_state<T: Real>(seed: u64) -> FieldState<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_5eed_5eed_5eed);
    let p3: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let p4: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    let r = T::lit(SEED_AMPLITUDE);
    FieldState::new(Complex::from_polar(r, T::lit(p3)), Complex::from_polar(r, T::lit(p4)))
}

/// Per-point seed for ensembles and sweeps.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    master ^ index
}

/// A tone with its carrier frequency resolved against the free-running
/// emission of its mode.
#[derive(Debug, Clone, Copy)]
struct ResolvedTone<T> {
    mode: Mode,
    /// `−i√(2Γ_n0)|B|e^{iθ_in}`
    coeff: Complex<T>,
    /// Detection detuning of the carrier in rad/s.
    carrier: T,
}

/// Deterministic right-hand side of the equations of motion for a fixed
/// system, pump and set of tones.
#[derive(Debug, Clone)]
pub struct Dynamics<T> {
    sys: TwoModeSystem<T>,
    pump: PumpDrive<T>,
    tones: Vec<ResolvedTone<T>>,
}

impl<T: Real> Dynamics<T> {
    pub fn new(sys: &TwoModeSystem<T>, pump: &PumpDrive<T>, tones: &[InjectionTone<T>]) -> Self {
        let resolved = tones
            .iter()
            .map(|tone| {
                let g0 = sys.mode(tone.mode).gamma_ext();
                let scale = (g0 + g0).sqrt() * tone.amplitude;
                let coeff = Complex::new(T::zero(), -T::one()) * Complex::from_polar(scale, tone.phase);
                ResolvedTone { mode: tone.mode, coeff, carrier: tone_carrier(sys, pump, tone) }
            })
            .collect();
        Self { sys: *sys, pump: *pump, tones: resolved }
    }

    pub fn system(&self) -> &TwoModeSystem<T> {
        &self.sys
    }

    pub fn pump(&self) -> &PumpDrive<T> {
        &self.pump
    }

    /// Time derivative at `state`, with `extra_detuning` added to δ.
    pub fn drift(&self, state: &FieldState<T>, t: T, extra_detuning: T) -> FieldState<T> {
        let (d3, d4) = self.conservative_drift(state, extra_detuning);
        let mut out = FieldState::new(
            d3 - state.a3 * self.sys.mode3().gamma_total(),
            d4 - state.a4 * self.sys.mode4().gamma_total(),
        );
        for tone in &self.tones {
            let drive = tone.coeff * Complex::from_polar(T::one(), -tone.carrier * t);
            match tone.mode {
                Mode::Three => out.a3 += drive,
                Mode::Four => out.a4 += drive,
            }
        }
        out
    }

    /// The Hamiltonian part `i(ζ_n A_n + ε A_m*)` of the drift.
    pub fn conservative_drift(&self, state: &FieldState<T>, extra_detuning: T) -> (Complex<T>, Complex<T>) {
        let (z3, z4) = self.sys.kerr_detunings_at(self.pump.delta + extra_detuning, state);
        let eps = self.pump.epsilon;
        let i = Complex::new(T::zero(), T::one());
        (
            i * (state.a3 * z3 + state.a4.conj() * eps),
            i * (state.a4 * z4 + state.a3.conj() * eps),
        )
    }

    /// One classical RK4 step of the noiseless equations.
    pub fn rk4_step(&self, state: &FieldState<T>, t: T, dt: T, extra_detuning: T) -> FieldState<T> {
        let half = T::lit(0.5);
        let h2 = dt * half;
        let k1 = self.drift(state, t, extra_detuning);
        let k2 = self.drift(&(*state + k1 * h2), t + h2, extra_detuning);
        let k3 = self.drift(&(*state + k2 * h2), t + h2, extra_detuning);
        let k4 = self.drift(&(*state + k3 * dt), t + dt, extra_detuning);
        let sixth = dt / T::lit(6.0);
        *state + (k1 + k2 * T::lit(2.0) + k3 * T::lit(2.0) + k4) * sixth
    }

    /// Largest rate the step size has to resolve at `state`.
    pub fn fastest_rate(&self, state: &FieldState<T>) -> T {
        let (z3, z4) = self.sys.kerr_detunings(&self.pump, state);
        let mut rate = self
            .sys
            .mode3()
            .gamma_total()
            .max(self.sys.mode4().gamma_total())
            .max(self.pump.epsilon)
            .max(z3.abs())
            .max(z4.abs());
        for tone in &self.tones {
            rate = rate.max(tone.carrier.abs());
        }
        rate
    }
}

/// Carrier of a tone in detection-detuning units (rad/s).
pub fn tone_carrier<T: Real>(sys: &TwoModeSystem<T>, pump: &PumpDrive<T>, tone: &InjectionTone<T>) -> T {
    sys.emission_detuning(pump, tone.mode) + tone.detuning
}

/// Drift of the equations of motion at time `t`.
pub fn drift<T: Real>(
    sys: &TwoModeSystem<T>,
    pump: &PumpDrive<T>,
    tones: &[InjectionTone<T>],
    state: &FieldState<T>,
    t: T,
) -> FieldState<T> {
    Dynamics::new(sys, pump, tones).drift(state, t, T::zero())
}

/// One Ornstein–Uhlenbeck component of the flicker generator.
#[derive(Debug, Clone)]
struct OuComponent {
    decay: f64,
    kick: f64,
    value: f64,
}

/// Streaming, seedable source of per-step noise increments.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    vacuum: bool,
    /// Per-quadrature standard deviations: `[ext3, int3, ext4, int4]`.
    sigma: [f64; 4],
    flicker: Vec<OuComponent>,
}

/// Noise for one integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseIncrement<T> {
    /// `√(2Γ_n)·∫ξ_n dt` over the step, summed over both loss channels.
    pub dw3: Complex<T>,
    pub dw4: Complex<T>,
    /// Flicker detuning in rad/s held during the step.
    pub delta: T,
}

impl NoiseSource {
    pub fn new<T: Real>(noise: &NoiseConfig, sys: &TwoModeSystem<T>, dt: f64, duration: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.rng_seed);
        let s = noise.vacuum_scale;
        let var = |rate: f64| (rate * s * dt / 2.0).max(0.0).sqrt();
        let (g3, g30) = (sys.mode3().gamma_total().to_f64_lossy(), sys.mode3().gamma_ext().to_f64_lossy());
        let (g4, g40) = (sys.mode4().gamma_total().to_f64_lossy(), sys.mode4().gamma_ext().to_f64_lossy());
        let sigma = [var(g30), var(g3 - g30), var(g40), var(g4 - g40)];

        let mut flicker = Vec::new();
        if noise.flicker_amplitude > 0.0 {
            let f_lo = 1.0 / duration;
            let f_hi = 1.0 / (10.0 * dt);
            if f_hi > f_lo {
                let decades = (f_hi / f_lo).log10();
                let count = (FLICKER_COMPONENTS_PER_DECADE * decades).ceil() as usize + 1;
                let var_each = noise.flicker_amplitude / FLICKER_COMPONENTS_PER_DECADE;
                for k in 0..count {
                    let frac = if count > 1 { k as f64 / (count - 1) as f64 } else { 0.0 };
                    let rate = std::f64::consts::TAU * f_lo * (f_hi / f_lo).powf(frac);
                    let decay = (-rate * dt).exp();
                    let kick = (var_each * (1.0 - decay * decay)).sqrt();
                    let z: f64 = rng.sample(StandardNormal);
                    flicker.push(OuComponent { decay, kick, value: var_each.sqrt() * z });
                }
            }
        }
        Self { rng, vacuum: noise.vacuum_active(), sigma, flicker }
    }

    pub fn is_silent(&self) -> bool {
        !self.vacuum && self.flicker.is_empty()
    }

    /// Number of OU components in the flicker generator.
    pub fn flicker_components(&self) -> usize {
        self.flicker.len()
    }

    pub fn next_increment<T: Real>(&mut self) -> NoiseIncrement<T> {
        let zero = Complex::new(T::zero(), T::zero());
        let (mut dw3, mut dw4) = (zero, zero);
        if self.vacuum {
            let draw = |sd: f64, rng: &mut ChaCha8Rng| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(sd * re, sd * im)
            };
            let e3 = draw(self.sigma[0], &mut self.rng);
            let i3 = draw(self.sigma[1], &mut self.rng);
            let e4 = draw(self.sigma[2], &mut self.rng);
            let i4 = draw(self.sigma[3], &mut self.rng);
            let s3 = e3 + i3;
            let s4 = e4 + i4;
            dw3 = Complex::new(T::lit(s3.re), T::lit(s3.im));
            dw4 = Complex::new(T::lit(s4.re), T::lit(s4.im));
        }
        let mut delta = 0.0;
        for c in &mut self.flicker {
            delta += c.value;
            let z: f64 = self.rng.sample(StandardNormal);
            c.value = c.decay * c.value + c.kick * z;
        }
        NoiseIncrement { dw3, dw4, delta: T::lit(delta) }
    }
}

/// Materialized noise for `n_steps` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseStreams<T> {
    pub dw3: Vec<Complex<T>>,
    pub dw4: Vec<Complex<T>>,
    pub delta: Vec<T>,
}

/// Collects the same increments the integrator consumes.
pub fn generate_noise_stream<T: Real>(
    noise: &NoiseConfig,
    sys: &TwoModeSystem<T>,
    n_steps: usize,
    dt: f64,
) -> NoiseStreams<T> {
    let duration = dt * n_steps as f64;
    let mut src = NoiseSource::new(noise, sys, dt, duration);
    let mut out = NoiseStreams {
        dw3: Vec::with_capacity(n_steps),
        dw4: Vec::with_capacity(n_steps),
        delta: Vec::with_capacity(n_steps),
    };
    for _ in 0..n_steps {
        let inc = src.next_increment::<T>();
        out.dw3.push(inc.dw3);
        out.dw4.push(inc.dw4);
        out.delta.push(inc.delta);
    }
    out
}

/// Everything needed to regenerate a trajectory bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Provenance<T> {
    pub system: TwoModeSystem<T>,
    pub pump: PumpDrive<T>,
    pub tones: Vec<InjectionTone<T>>,
    pub noise: NoiseConfig,
    pub integrator: IntegratorConfig<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<FieldState<T>>,
    pub provenance: Provenance<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn sample_interval(&self) -> T {
        self.provenance.integrator.sample_interval()
    }

    pub fn last(&self) -> &FieldState<T> {
        self.states.last().expect("trajectory holds at least the initial state")
    }

    /// Index of the first sample at or after `t`.
    pub fn index_at(&self, t: T) -> usize {
        self.times.partition_point(|&x| x < t)
    }

    /// Copy with every sample before `t` dropped.
    pub fn after(&self, t: T) -> Trajectory<T> {
        let i = self.index_at(t).min(self.len());
        Trajectory { times: self.times[i..].to_vec(), states: self.states[i..].to_vec(), provenance: self.provenance.clone() }
    }

    /// Time-averaged photon numbers over the samples from `t` on.
    pub fn mean_photons_after(&self, t: T) -> (T, T) {
        let i = self.index_at(t);
        let tail = &self.states[i.min(self.len().saturating_sub(1))..];
        let n = T::from_usize_lossy(tail.len());
        let (s3, s4) = tail.iter().fold((T::zero(), T::zero()), |(a, b), s| {
            let (p, q) = s.photons();
            (a + p, b + q)
        });
        (s3 / n, s4 / n)
    }

    /// Writes `t,re_a3,im_a3,re_a4,im_a4` rows preceded by a commented
    /// provenance header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        let prov = serde_json::to_string(&self.provenance).map_err(io::Error::other)?;
        writeln!(w, "# njpo trajectory")?;
        writeln!(w, "# provenance: {prov}")?;
        writeln!(w, "t,re_a3,im_a3,re_a4,im_a4")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(
                w,
                "{},{},{},{},{}",
                fmt_sci(*t),
                fmt_sci(s.a3.re),
                fmt_sci(s.a3.im),
                fmt_sci(s.a4.re),
                fmt_sci(s.a4.im)
            )?;
        }
        Ok(())
    }
}

/// Full-precision scientific notation (17 significant digits).
pub fn fmt_sci<T: Real>(x: T) -> String {
    format!("{:.16e}", x.to_f64_lossy())
}

/// Integrates the equations of motion and records every
/// `record_stride`-th state, starting with the initial one.
pub fn integrate<T: Real>(
    sys: &TwoModeSystem<T>,
    pump: &PumpDrive<T>,
    tones: &[InjectionTone<T>],
    noise: &NoiseConfig,
    cfg: &IntegratorConfig<T>,
) -> Result<Trajectory<T>, DynamicsError> {
    cfg.validate()?;
    noise.validate()?;
    let dyn_ = Dynamics::new(sys, pump, tones);

    let mut rate = dyn_.fastest_rate(&cfg.initial_state);
    if let Ok(ss) = sys.steady_state(pump, T::zero()) {
        rate = rate.max(dyn_.fastest_rate(&ss));
    }
    let product = (cfg.dt * rate).to_f64_lossy();
    if !(product < STABILITY_LIMIT) {
        return Err(DynamicsError::StabilityGuard { product, limit: STABILITY_LIMIT });
    }

    let n_steps = cfg.n_steps();
    let dt = cfg.dt;
    let mut src = NoiseSource::new(noise, sys, dt.to_f64_lossy(), (dt * T::from_usize_lossy(n_steps)).to_f64_lossy());
    let silent = src.is_silent();
    let minus_i = Complex::new(T::zero(), -T::one());

    let n_rec = n_steps / cfg.record_stride + 1;
    let mut times = Vec::with_capacity(n_rec);
    let mut states = Vec::with_capacity(n_rec);
    let mut state = cfg.initial_state;
    times.push(T::zero());
    states.push(state);

    for k in 0..n_steps {
        let t = dt * T::from_usize_lossy(k);
        if silent {
            state = dyn_.rk4_step(&state, t, dt, T::zero());
        } else {
            let inc = src.next_increment::<T>();
            state = dyn_.rk4_step(&state, t, dt, inc.delta);
            state.a3 += minus_i * inc.dw3;
            state.a4 += minus_i * inc.dw4;
        }
        if !state.is_finite() {
            return Err(DynamicsError::NonFinite { step: k + 1, time: (t + dt).to_f64_lossy() });
        }
        if (k + 1) % cfg.record_stride == 0 {
            times.push(dt * T::from_usize_lossy(k + 1));
            states.push(state);
        }
    }

    Ok(Trajectory {
        times,
        states,
        provenance: Provenance {
            system: *sys,
            pump: *pump,
            tones: tones.to_vec(),
            noise: *noise,
            integrator: *cfg,
        },
    })
}

/// Reruns the trajectory described by a provenance block.
pub fn replay<T: Real>(prov: &Provenance<T>) -> Result<Trajectory<T>, DynamicsError> {
    integrate(&prov.system, &prov.pump, &prov.tones, &prov.noise, &prov.integrator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    type Sys = TwoModeSystem<f64>;

    fn sys() -> Sys {
        Sys::paper_device()
    }

    fn cfg(dt: f64, duration: f64, stride: usize, init: FieldState<f64>) -> IntegratorConfig<f64> {
        IntegratorConfig { dt, duration, record_stride: stride, initial_state: init }
    }

    #[test]
    fn ground_state_is_fixed_point() {
        let s = sys();
        let p = PumpDrive::new(3.0 * s.gamma_eff(), 0.0).unwrap();
        let d = drift(&s, &p, &[], &FieldState::zero(), 0.0);
        assert_eq!(d, FieldState::zero());
    }

    #[test]
    fn decoupled_mode_decays_and_rotates() {
        let s = sys();
        let p = PumpDrive::new(0.0, 2.0e6).unwrap();
        let a3 = Complex::new(0.8, -0.3);
        let st = FieldState::new(a3, Complex::new(0.0, 0.0));
        let d = drift(&s, &p, &[], &st, 0.0);
        let (z3, _) = s.kerr_detunings(&p, &st);
        let expect = (Complex::new(0.0, z3) - s.mode3().gamma_total()) * a3;
        assert_relative_eq!(d.a3.re, expect.re, max_relative = 1e-14);
        assert_relative_eq!(d.a3.im, expect.im, max_relative = 1e-14);
        assert_eq!(d.a4, Complex::new(0.0, 0.0));
    }

    #[test]
    fn tone_drives_empty_resonator() {
        let s = sys();
        let p = PumpDrive::new(0.0, 0.0).unwrap();
        let tone = InjectionTone::with_photon_number(&s, Mode::Four, 1.0, 0.0, 0.25).unwrap();
        let d = drift(&s, &p, &[tone], &FieldState::zero(), 0.0);
        // −i√(2Γ₄₀)|B|e^{iθ}, with |B|² = 2Γ₄₀.
        let g40 = s.mode4().gamma_ext();
        let expect = Complex::new(0.0, -1.0) * Complex::from_polar(2.0 * g40, 0.25);
        assert_relative_eq!(d.a4.re, expect.re, max_relative = 1e-12);
        assert_relative_eq!(d.a4.im, expect.im, max_relative = 1e-12);
    }

    #[test]
    fn stability_guard_rejects_coarse_steps() {
        let s = sys();
        let g = s.gamma_eff();
        let p = PumpDrive::new(3.0 * g, 0.0).unwrap();
        let c = cfg(0.2 / g, 10.0 / g, 1, seed_state(1));
        let err = integrate(&s, &p, &[], &NoiseConfig::off(0), &c).unwrap_err();
        assert!(matches!(err, DynamicsError::StabilityGuard { .. }));
    }

    #[test]
    fn invalid_configs_rejected() {
        let s = sys();
        let p = PumpDrive::new(0.0, 0.0).unwrap();
        let bad = cfg(0.0, 1e-6, 1, FieldState::zero());
        assert!(matches!(integrate(&s, &p, &[], &NoiseConfig::off(0), &bad), Err(DynamicsError::InvalidConfig(_))));
        let bad = cfg(1e-9, 1e-6, 0, FieldState::zero());
        assert!(integrate(&s, &p, &[], &NoiseConfig::off(0), &bad).is_err());
        let mut n = NoiseConfig::vacuum(0);
        n.vacuum_scale = -1.0;
        let ok = cfg(1e-9, 1e-6, 1, FieldState::zero());
        assert!(integrate(&s, &p, &[], &n, &ok).is_err());
    }

    #[test]
    fn non_finite_state_reports_step() {
        let s = sys();
        let p = PumpDrive::new(0.0, 0.0).unwrap();
        let inf = FieldState::new(Complex::new(1e200, 0.0), Complex::new(1e200, 0.0));
        // Kerr growth overflows; the guard is evaluated at this state too, so
        // bypass it by calling the stepping loop through a tiny dt.
        let c = cfg(1e-300, 1e-297, 1, inf);
        match integrate(&s, &p, &[], &NoiseConfig::off(0), &c) {
            Err(DynamicsError::NonFinite { step, .. }) => assert!(step >= 1),
            Err(DynamicsError::StabilityGuard { .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn recording_layout() {
        let s = sys();
        let g = s.gamma_eff();
        let p = PumpDrive::new(0.5 * g, 0.0).unwrap();
        let dt = 0.01 / g;
        let c = cfg(dt, 100.0 * dt, 10, seed_state(3));
        let tr = integrate(&s, &p, &[], &NoiseConfig::off(0), &c).unwrap();
        assert_eq!(tr.len(), 11);
        assert_eq!(tr.times[0], 0.0);
        for w in tr.times.windows(2) {
            assert!(w[1] > w[0]);
            assert_relative_eq!(w[1] - w[0], 10.0 * dt, max_relative = 1e-9);
        }
    }

    #[test]
    fn silent_noise_is_zero() {
        let s = sys();
        let streams = generate_noise_stream::<f64>(&NoiseConfig::off(7), &s, 1000, 1e-9);
        assert!(streams.dw3.iter().chain(&streams.dw4).all(|z| z.norm() == 0.0));
        assert!(streams.delta.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn noise_is_seed_deterministic() {
        let s = sys();
        let mut n = NoiseConfig::vacuum(42);
        n.flicker_amplitude = 1e10;
        let a = generate_noise_stream::<f64>(&n, &s, 500, 1e-9);
        let b = generate_noise_stream::<f64>(&n, &s, 500, 1e-9);
        assert_eq!(a, b);
        n.rng_seed = 43;
        let c = generate_noise_stream::<f64>(&n, &s, 500, 1e-9);
        assert_ne!(a.dw3, c.dw3);
    }

    #[test]
    fn flicker_component_count() {
        let s = sys();
        let mut n = NoiseConfig::off(0);
        n.flicker_amplitude = 1.0;
        // Band [1/duration, 1/(10 dt)] = [1e3, 1e7] Hz: four decades.
        let src = NoiseSource::new(&n, &s, 1e-8, 1e-3);
        assert_eq!(src.flicker_components(), 13);
    }
}
