//! Turns trajectories into measured quantities: quadratures, photon
//! spectral densities, histograms, linewidths and phase statistics.

use thiserror::Error;

pub mod fit;
pub mod histogram;
pub mod peaks;
pub mod phase;
pub mod quadrature;
pub mod spectrum;

pub use fit::{fit_sqrt_law, linear_fit, LinearFit, SqrtLawFit};
pub use histogram::{histogram2d, uniformity_chi_square, Histogram2D, UniformityTest};
pub use peaks::{detect_peaks, Peak, PeakOptions};
pub use phase::{circular_mean, phase_series, phase_statistics, PhaseStatistics};
pub use quadrature::{demodulate, Quadratures};
pub use spectrum::{
    frequency_noise_spectrum, linewidth, photon_spectral_density, welch_real, FrequencyNoise, Linewidth,
    NoiseFitResult, SpectralDensity, WelchConfig,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("detection detuning {detuning_hz:.6e} Hz outside the Nyquist band ±{nyquist_hz:.6e} Hz")]
    Aliasing { detuning_hz: f64, nyquist_hz: f64 },
    #[error("segment length {segment} exceeds the {available} available samples")]
    SegmentTooLong { segment: usize, available: usize },
    #[error("need at least {needed} segments, got {got}")]
    TooFewSegments { needed: usize, got: usize },
    #[error("no line found: peak is less than 6 dB above the median floor")]
    NoLineFound,
    #[error("phase undefined: amplitude vanishes on {fraction:.1}% of samples")]
    PhaseUndefined { fraction: f64 },
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("degenerate input: {0}")]
    Degenerate(String),
}
