//! Device parameters and the closed-form steady-state theory of the
//! two-mode parametric oscillator.
//!
//! Everything here is a pure function of its inputs. Rates are angular
//! frequencies (rad/s); amplitudes are in √photons, so `|A|²` is the
//! intracavity photon number.
//!
//! Frame conventions: each mode `n` is described in a frame rotating at
//! `ω_n + δ`. A field component whose frame amplitude advances as
//! `exp(−iνt)` is detected at detuning `ν` above the frame frequency, so the
//! free-running emission of mode 3 (mode 4) sits at `+Δ₀` (`−Δ₀`).

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{nearly_equal, wrap_phase, Real};

/// Relative width of the band around a region boundary that is resolved by
/// the tie-break rule of [`TwoModeSystem::classify_region`].
pub const BOUNDARY_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("pump amplitude {epsilon} is below the parametric threshold {gamma}")]
    BelowThreshold { epsilon: f64, gamma: f64 },
    #[error("no oscillating solution: only the ground state exists at this operating point")]
    GroundStateOnly,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// One of the two pumped resonator modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Mode {
    Three,
    Four,
}

impl Mode {
    pub fn index(self) -> u8 {
        match self {
            Mode::Three => 3,
            Mode::Four => 4,
        }
    }

    pub fn partner(self) -> Mode {
        match self {
            Mode::Three => Mode::Four,
            Mode::Four => Mode::Three,
        }
    }
}

impl TryFrom<u8> for Mode {
    type Error = ModelError;

    fn try_from(value: u8) -> Result<Self, Self::Error> {
        match value {
            3 => Ok(Mode::Three),
            4 => Ok(Mode::Four),
            other => Err(ModelError::InvalidParameter(format!(
                "mode index must be 3 or 4, got {other}"
            ))),
        }
    }
}

impl From<Mode> for u8 {
    fn from(m: Mode) -> u8 {
        m.index()
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Parameters of a single resonator mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModeParams<T>", bound = "T: Real")]
pub struct ModeParams<T> {
    omega: T,
    gamma_total: T,
    gamma_ext: T,
    kerr: T,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct RawModeParams<T> {
    omega: T,
    gamma_total: T,
    gamma_ext: T,
    kerr: T,
}

impl<T: Real> TryFrom<RawModeParams<T>> for ModeParams<T> {
    type Error = ModelError;

    fn try_from(r: RawModeParams<T>) -> Result<Self, ModelError> {
        ModeParams::new(r.omega, r.gamma_total, r.gamma_ext, r.kerr)
    }
}

impl<T: Real> ModeParams<T> {
    /// All arguments in rad/s.
    pub fn new(omega: T, gamma_total: T, gamma_ext: T, kerr: T) -> Result<Self, ModelError> {
        let finite = [omega, gamma_total, gamma_ext, kerr].iter().all(|v| v.is_finite());
        if !finite {
            return Err(ModelError::InvalidParameter("mode parameters must be finite".into()));
        }
        if omega <= T::zero() {
            return Err(ModelError::InvalidParameter(format!("omega must be positive, got {omega}")));
        }
        if kerr <= T::zero() {
            return Err(ModelError::InvalidParameter(format!("kerr must be positive, got {kerr}")));
        }
        if gamma_ext <= T::zero() {
            return Err(ModelError::InvalidParameter(format!(
                "gamma_ext must be positive, got {gamma_ext}"
            )));
        }
        if gamma_ext > gamma_total {
            return Err(ModelError::InvalidParameter(format!(
                "gamma_ext ({gamma_ext}) exceeds gamma_total ({gamma_total})"
            )));
        }
        Ok(Self { omega, gamma_total, gamma_ext, kerr })
    }

    /// Same as [`ModeParams::new`] with every argument given in Hz (ω/2π).
    pub fn from_hz(omega: T, gamma_total: T, gamma_ext: T, kerr: T) -> Result<Self, ModelError> {
        let k = T::TAU();
        Self::new(omega * k, gamma_total * k, gamma_ext * k, kerr * k)
    }

    pub fn omega(&self) -> T {
        self.omega
    }
    pub fn gamma_total(&self) -> T {
        self.gamma_total
    }
    pub fn gamma_ext(&self) -> T {
        self.gamma_ext
    }
    pub fn kerr(&self) -> T {
        self.kerr
    }
}

/// The pair of pumped modes together with the derived cross-Kerr
/// coefficient `α = √(α₃α₄)` and effective loss `Γ = √(Γ₃Γ₄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSystem<T>", bound = "T: Real")]
pub struct TwoModeSystem<T> {
    mode3: ModeParams<T>,
    mode4: ModeParams<T>,
    #[serde(skip_deserializing)]
    cross_kerr: T,
    #[serde(skip_deserializing)]
    gamma_eff: T,
}

#[derive(Deserialize)]
#[serde(bound = "T: Real")]
struct RawSystem<T> {
    mode3: ModeParams<T>,
    mode4: ModeParams<T>,
}

impl<T: Real> TryFrom<RawSystem<T>> for TwoModeSystem<T> {
    type Error = ModelError;

    fn try_from(r: RawSystem<T>) -> Result<Self, ModelError> {
        Ok(TwoModeSystem::new(r.mode3, r.mode4))
    }
}

/// Parametric pump: amplitude `ε` and detuning `δ`, with the pump at
/// `ω_p = ω₃ + ω₄ + 2δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PumpDrive<T> {
    pub epsilon: T,
    pub delta: T,
}

impl<T: Real> PumpDrive<T> {
    pub fn new(epsilon: T, delta: T) -> Result<Self, ModelError> {
        if !(epsilon >= T::zero()) || !epsilon.is_finite() || !delta.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "pump needs finite epsilon >= 0 and finite delta, got ({epsilon}, {delta})"
            )));
        }
        Ok(Self { epsilon, delta })
    }

    /// Pump frequency for a given system.
    pub fn pump_frequency(&self, sys: &TwoModeSystem<T>) -> T {
        sys.mode3.omega + sys.mode4.omega + self.delta + self.delta
    }
}

/// In-resonator amplitudes `(A₃, A₄)` in the doubly rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FieldState<T> {
    pub a3: Complex<T>,
    pub a4: Complex<T>,
}

impl<T: Real> FieldState<T> {
    pub fn new(a3: Complex<T>, a4: Complex<T>) -> Self {
        Self { a3, a4 }
    }

    pub fn zero() -> Self {
        Self { a3: Complex::new(T::zero(), T::zero()), a4: Complex::new(T::zero(), T::zero()) }
    }

    pub fn photons(&self) -> (T, T) {
        (self.a3.norm_sqr(), self.a4.norm_sqr())
    }

    pub fn amplitude(&self, mode: Mode) -> Complex<T> {
        match mode {
            Mode::Three => self.a3,
            Mode::Four => self.a4,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.a3.re.is_finite() && self.a3.im.is_finite() && self.a4.re.is_finite() && self.a4.im.is_finite()
    }

    /// Largest absolute component difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        [
            self.a3.re - other.a3.re,
            self.a3.im - other.a3.im,
            self.a4.re - other.a4.re,
            self.a4.im - other.a4.im,
        ]
        .iter()
        .fold(T::zero(), |m, d| m.max(d.abs()))
    }
}

impl<T: Real> std::ops::Add for FieldState<T> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self { a3: self.a3 + rhs.a3, a4: self.a4 + rhs.a4 }
    }
}

impl<T: Real> std::ops::Sub for FieldState<T> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        Self { a3: self.a3 - rhs.a3, a4: self.a4 - rhs.a4 }
    }
}

impl<T: Real> std::ops::Mul<T> for FieldState<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        Self { a3: self.a3 * k, a4: self.a4 * k }
    }
}

/// A coherent tone injected into one mode.
///
/// `detuning` is measured from the free-running emission frequency of the
/// targeted mode; `amplitude` is `|B|` in √(photons/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct InjectionTone<T> {
    pub mode: Mode,
    pub amplitude: T,
    pub detuning: T,
    pub phase: T,
}

impl<T: Real> InjectionTone<T> {
    pub fn new(mode: Mode, amplitude: T, detuning: T, phase: T) -> Result<Self, ModelError> {
        if !(amplitude >= T::zero()) || !amplitude.is_finite() || !detuning.is_finite() || !phase.is_finite() {
            return Err(ModelError::InvalidParameter(format!(
                "tone needs finite amplitude >= 0, got {amplitude}"
            )));
        }
        Ok(Self { mode, amplitude, detuning, phase: wrap_phase(phase) })
    }

    /// Tone carrying `photons` average coherent photons, `⟨n⟩ = |B|²/(2Γ_n0)`.
    pub fn with_photon_number(
        sys: &TwoModeSystem<T>,
        mode: Mode,
        photons: T,
        detuning: T,
        phase: T,
    ) -> Result<Self, ModelError> {
        if !(photons >= T::zero()) {
            return Err(ModelError::InvalidParameter(format!("photon number must be >= 0, got {photons}")));
        }
        let g0 = sys.mode(mode).gamma_ext;
        Self::new(mode, (photons * (g0 + g0)).sqrt(), detuning, phase)
    }
}

/// Stability regions of the `(ε, δ)` plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StabilityRegion {
    /// Region I: only the ground state is stable.
    GroundOnly,
    /// Region II: the ground state is unstable and the oscillator runs.
    OscillationOnly,
    /// Region III: ground state and oscillation are both stable.
    Bistable,
}

impl StabilityRegion {
    pub fn label(self) -> &'static str {
        match self {
            StabilityRegion::GroundOnly => "I",
            StabilityRegion::OscillationOnly => "II",
            StabilityRegion::Bistable => "III",
        }
    }
}

impl<T: Real> TwoModeSystem<T> {
    pub fn new(mode3: ModeParams<T>, mode4: ModeParams<T>) -> Self {
        let cross_kerr = (mode3.kerr * mode4.kerr).sqrt();
        let gamma_eff = (mode3.gamma_total * mode4.gamma_total).sqrt();
        Self { mode3, mode4, cross_kerr, gamma_eff }
    }

    /// The measured device: modes 3 and 4 at the static flux bias used for
    /// the oscillation experiments.
    pub fn paper_device() -> Self {
        let m3 = ModeParams::from_hz(T::lit(4.345e9), T::lit(0.56e6), T::lit(0.52e6), T::lit(71e3))
            .expect("valid mode 3");
        let m4 = ModeParams::from_hz(T::lit(6.150e9), T::lit(0.78e6), T::lit(0.70e6), T::lit(178e3))
            .expect("valid mode 4");
        Self::new(m3, m4)
    }

    pub fn mode3(&self) -> &ModeParams<T> {
        &self.mode3
    }
    pub fn mode4(&self) -> &ModeParams<T> {
        &self.mode4
    }
    pub fn mode(&self, m: Mode) -> &ModeParams<T> {
        match m {
            Mode::Three => &self.mode3,
            Mode::Four => &self.mode4,
        }
    }
    /// Cross-Kerr coefficient `α = √(α₃α₄)`.
    pub fn cross_kerr(&self) -> T {
        self.cross_kerr
    }
    /// Effective loss rate `Γ = √(Γ₃Γ₄)`; the parametric threshold is `ε = Γ`.
    pub fn gamma_eff(&self) -> T {
        self.gamma_eff
    }

    /// Returns a copy with replaced Kerr coefficients.
    pub fn with_kerr(&self, kerr3: T, kerr4: T) -> Result<Self, ModelError> {
        let m3 = ModeParams::new(self.mode3.omega, self.mode3.gamma_total, self.mode3.gamma_ext, kerr3)?;
        let m4 = ModeParams::new(self.mode4.omega, self.mode4.gamma_total, self.mode4.gamma_ext, kerr4)?;
        Ok(Self::new(m3, m4))
    }

    fn gamma_sum(&self) -> T {
        self.mode3.gamma_total + self.mode4.gamma_total
    }

    /// Nonlinear detunings `(ζ₃, ζ₄)` including self- and cross-Kerr shifts.
    pub fn kerr_detunings(&self, pump: &PumpDrive<T>, state: &FieldState<T>) -> (T, T) {
        self.kerr_detunings_at(pump.delta, state)
    }

    pub(crate) fn kerr_detunings_at(&self, delta: T, state: &FieldState<T>) -> (T, T) {
        let (n3, n4) = state.photons();
        let two_alpha = self.cross_kerr + self.cross_kerr;
        (
            delta + self.mode3.kerr * n3 + two_alpha * n4,
            delta + self.mode4.kerr * n4 + two_alpha * n3,
        )
    }

    /// Half-width `δ_th(ε)` of the detuning interval where the ground state
    /// is unstable.
    pub fn threshold_detuning(&self, epsilon: T) -> Result<T, ModelError> {
        let g = self.gamma_eff;
        if epsilon < g {
            return Err(ModelError::BelowThreshold { epsilon: epsilon.to_f64_lossy(), gamma: g.to_f64_lossy() });
        }
        let r = epsilon / g;
        let root = (r * r - T::one()).max(T::zero()).sqrt();
        Ok(self.gamma_sum() / T::lit(2.0) * root)
    }

    /// Region I/II/III of the operating point. Points on a boundary (to
    /// [`BOUNDARY_REL_TOL`]) go to the region with the smaller index.
    pub fn classify_region(&self, pump: &PumpDrive<T>) -> StabilityRegion {
        let tol = T::lit(BOUNDARY_REL_TOL);
        let g = self.gamma_eff;
        if pump.epsilon < g || nearly_equal(pump.epsilon, g, tol) {
            return StabilityRegion::GroundOnly;
        }
        let dth = self.threshold_detuning(pump.epsilon).expect("epsilon above threshold");
        let d = pump.delta;
        if d > dth || nearly_equal(d, dth, tol) {
            StabilityRegion::GroundOnly
        } else if d > -dth || nearly_equal(d, -dth, tol) {
            StabilityRegion::OscillationOnly
        } else {
            StabilityRegion::Bistable
        }
    }

    /// Photon numbers `(|A₃|², |A₄|²)` of the stable oscillating solution.
    ///
    /// Defined for `ε ≥ Γ` and `δ ≤ δ_th`; on the upper boundary both
    /// numbers are zero.
    pub fn steady_state_photons(&self, pump: &PumpDrive<T>) -> Result<(T, T), ModelError> {
        let dth = self.threshold_detuning(pump.epsilon).map_err(|_| ModelError::GroundStateOnly)?;
        let d = pump.delta;
        if d > dth && !nearly_equal(d, dth, T::lit(BOUNDARY_REL_TOL)) {
            return Err(ModelError::GroundStateOnly);
        }
        let (g3, g4) = (self.mode3.gamma_total, self.mode4.gamma_total);
        let denom = self.mode3.kerr * g4 + self.mode4.kerr * g3 + (self.cross_kerr + self.cross_kerr) * (g3 + g4);
        let n3 = ((g4 + g4) * (dth - d) / denom).max(T::zero());
        Ok((n3, g3 / g4 * n3))
    }

    /// Output photon fluxes `|C_n|² = 2Γ_n0|A_n|²`.
    pub fn output_flux(&self, photons: (T, T)) -> (T, T) {
        let two = T::lit(2.0);
        (two * self.mode3.gamma_ext * photons.0, two * self.mode4.gamma_ext * photons.1)
    }

    /// Emission detunings `(δ₃, δ₄)` at the oscillation onset.
    pub fn onset_frequency_shift(&self, delta: T) -> (T, T) {
        let (g3, g4) = (self.mode3.gamma_total, self.mode4.gamma_total);
        let d3 = delta * (g3 - g4) / (g3 + g4);
        (d3, -d3)
    }

    /// Emission detuning `Δ₀` of mode 3 above threshold; mode 4 emits at `−Δ₀`.
    pub fn oscillation_frequency_shift(&self, pump: &PumpDrive<T>) -> Result<T, ModelError> {
        let (n3, n4) = self.steady_state_photons(pump)?;
        let st = FieldState::new(Complex::new(n3.sqrt(), T::zero()), Complex::new(n4.sqrt(), T::zero()));
        let (z3, z4) = self.kerr_detunings(pump, &st);
        let (g3, g4) = (self.mode3.gamma_total, self.mode4.gamma_total);
        Ok((g3 * z4 - g4 * z3) / (g3 + g4))
    }

    /// Free-running emission detuning of one mode, zero where no
    /// oscillating solution exists.
    pub fn emission_detuning(&self, pump: &PumpDrive<T>, mode: Mode) -> T {
        match self.oscillation_frequency_shift(pump) {
            Ok(d0) => match mode {
                Mode::Three => d0,
                Mode::Four => -d0,
            },
            Err(_) => T::zero(),
        }
    }

    /// Phase sum `Θ = θ₃ + θ₄ ∈ (π/2, π)` of the oscillating solution.
    pub fn phase_sum(&self, epsilon: T) -> Result<T, ModelError> {
        let g = self.gamma_eff;
        if epsilon <= g {
            return Err(ModelError::BelowThreshold { epsilon: epsilon.to_f64_lossy(), gamma: g.to_f64_lossy() });
        }
        let r = epsilon / g;
        let x = (r * r - T::one()).sqrt();
        // tan Θ = −1/x with Θ in the second quadrant.
        Ok(T::FRAC_PI_2() + x.atan())
    }

    /// Phase of mode 3 locked by a resonant tone of phase `theta_in`.
    pub fn locked_phase(&self, epsilon: T, theta_in: T) -> Result<T, ModelError> {
        let g = self.gamma_eff;
        if epsilon <= g {
            return Err(ModelError::BelowThreshold { epsilon: epsilon.to_f64_lossy(), gamma: g.to_f64_lossy() });
        }
        let root = (epsilon * epsilon - g * g).sqrt();
        let offset = (T::lit(3.0) * g / (T::lit(2.0) * root)).atan();
        Ok(wrap_phase(theta_in - offset))
    }

    /// Classical energy `H/ħ` in rad/s.
    pub fn classical_hamiltonian(&self, pump: &PumpDrive<T>, state: &FieldState<T>) -> T {
        let (n3, n4) = state.photons();
        let half = T::lit(0.5);
        let d = pump.delta;
        let linear = d * n3 + half * self.mode3.kerr * n3 * n3 + d * n4 + half * self.mode4.kerr * n4 * n4;
        let cross = T::lit(2.0) * self.cross_kerr * n3 * n4;
        let pumped = T::lit(2.0) * pump.epsilon * (state.a3 * state.a4).re;
        -linear - cross - pumped
    }

    /// Average coherent photon number `⟨n⟩ = |B|²/(2Γ_n0)` of a tone.
    pub fn input_photon_number(&self, tone: &InjectionTone<T>) -> T {
        let g0 = self.mode(tone.mode).gamma_ext;
        tone.amplitude * tone.amplitude / (g0 + g0)
    }

    /// Oscillating steady state with phase difference `psi = θ₃ − θ₄`.
    pub fn steady_state(&self, pump: &PumpDrive<T>, psi: T) -> Result<FieldState<T>, ModelError> {
        let (n3, n4) = self.steady_state_photons(pump)?;
        let theta = self.phase_sum(pump.epsilon)?;
        let half = T::lit(0.5);
        let t3 = half * (theta + psi);
        let t4 = half * (theta - psi);
        Ok(FieldState::new(Complex::from_polar(n3.sqrt(), t3), Complex::from_polar(n4.sqrt(), t4)))
    }
}
