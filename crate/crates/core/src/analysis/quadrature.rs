use num_complex::Complex;

use super::AnalysisError;
use crate::dynamics::Trajectory;
use crate::model::Mode;
use crate::scalar::Real;

/// Output-field quadratures of one mode in a detection frame, in
/// √(photons/s).
///
/// `I + iQ` follows the engineering convention `e^{+iωt}` for a component
/// at detection detuning `ω`, so spectra computed from it place the
/// emission of mode 3 at `+Δ₀`. Since the frame amplitude of such a
/// component rotates as `e^{−iωt}`, the record is built from `A_n*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadratures<T> {
    pub mode: Mode,
    /// Detection detuning `δ_n` from the rotating frame, rad/s.
    pub detection_detuning: T,
    pub i: Vec<T>,
    pub q: Vec<T>,
    /// Samples per second.
    pub sample_rate: T,
    /// Time of the first sample in s.
    pub t0: T,
}

impl<T: Real> Quadratures<T> {
    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn field(&self) -> Vec<Complex<T>> {
        self.i.iter().zip(&self.q).map(|(&i, &q)| Complex::new(i, q)).collect()
    }

    /// Mean `I² + Q²`, the detected photon flux.
    pub fn mean_flux(&self) -> T {
        let s = self.i.iter().zip(&self.q).fold(T::zero(), |acc, (&i, &q)| acc + i * i + q * q);
        s / T::from_usize_lossy(self.len().max(1))
    }

    /// Builds quadratures from a raw baseband record.
    pub fn from_field(mode: Mode, detection_detuning: T, field: &[Complex<T>], sample_rate: T, t0: T) -> Self {
        Self {
            mode,
            detection_detuning,
            i: field.iter().map(|z| z.re).collect(),
            q: field.iter().map(|z| z.im).collect(),
            sample_rate,
            t0,
        }
    }

    /// Multiplies the record by `e^{iφ}`, e.g. to compensate a known output phase.
    pub fn rotated(&self, phi: T) -> Self {
        let r = Complex::from_polar(T::one(), phi);
        let field: Vec<_> = self.field().into_iter().map(|z| z * r).collect();
        Self::from_field(self.mode, self.detection_detuning, &field, self.sample_rate, self.t0)
    }
}

/// Output field `√(2Γ_n0)·A_n*·e^{−iδ_n t}` of one mode in the detection
/// frame at `detection_detuning` (rad/s).
pub fn demodulate<T: Real>(
    trajectory: &Trajectory<T>,
    mode: Mode,
    detection_detuning: T,
) -> Result<Quadratures<T>, AnalysisError> {
    let dt = trajectory.sample_interval();
    let fs = T::one() / dt;
    let nyquist_hz = fs / T::lit(2.0);
    let det_hz = detection_detuning / T::TAU();
    if det_hz.abs() >= nyquist_hz {
        return Err(AnalysisError::Aliasing {
            detuning_hz: det_hz.to_f64_lossy(),
            nyquist_hz: nyquist_hz.to_f64_lossy(),
        });
    }
    let g0 = trajectory.provenance.system.mode(mode).gamma_ext();
    let scale = (g0 + g0).sqrt();
    let t0 = trajectory.times.first().copied().unwrap_or_else(T::zero);
    let mut i = Vec::with_capacity(trajectory.len());
    let mut q = Vec::with_capacity(trajectory.len());
    for (&t, s) in trajectory.times.iter().zip(&trajectory.states) {
        let z = s.amplitude(mode).conj() * scale * Complex::from_polar(T::one(), -detection_detuning * t);
        i.push(z.re);
        q.push(z.im);
    }
    Ok(Quadratures { mode, detection_detuning, i, q, sample_rate: fs, t0 })
}
