//! Phase extraction and phase statistics.

use super::quadrature::Quadratures;
use super::AnalysisError;
use crate::scalar::{wrap_phase, Real};

/// Samples whose amplitude falls below this fraction of the mean amplitude
/// are treated as gaps.
pub const GAP_THRESHOLD: f64 = 1e-6;

/// Largest tolerated fraction of gap samples.
pub const MAX_GAP_FRACTION: f64 = 0.01;

/// Minimum sample count for [`phase_statistics`].
pub const MIN_PHASE_SAMPLES: usize = 1000;

/// Bins of the phase histogram returned by [`phase_statistics`].
pub const PHASE_HISTOGRAM_BINS: usize = 36;

/// Nearest-branch unwrapping of wrapped angles.
pub fn unwrap_phases<T: Real>(wrapped: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(wrapped.len());
    let mut offset = T::zero();
    let mut prev: Option<T> = None;
    for &w in wrapped {
        if let Some(p) = prev {
            offset += wrap_phase(w - p) - (w - p);
        }
        out.push(w + offset);
        prev = Some(w);
    }
    out
}

/// Continuous phase of `I + iQ`. Samples with vanishing amplitude are
/// bridged by linear interpolation.
pub fn phase_series<T: Real>(q: &Quadratures<T>) -> Result<Vec<T>, AnalysisError> {
    let n = q.len();
    if n == 0 {
        return Err(AnalysisError::TooFewSamples { needed: 1, got: 0 });
    }
    let amp: Vec<T> = q.i.iter().zip(&q.q).map(|(&i, &q)| i.hypot(q)).collect();
    let mean = amp.iter().fold(T::zero(), |a, &x| a + x) / T::from_usize_lossy(n);
    let cutoff = mean * T::lit(GAP_THRESHOLD);
    let valid: Vec<bool> = amp.iter().map(|&a| a > cutoff && a > T::zero()).collect();
    let gaps = valid.iter().filter(|v| !**v).count();
    let fraction = gaps as f64 / n as f64;
    if fraction > MAX_GAP_FRACTION {
        return Err(AnalysisError::PhaseUndefined { fraction: 100.0 * fraction });
    }

    let idx: Vec<usize> = (0..n).filter(|&k| valid[k]).collect();
    let wrapped: Vec<T> = idx.iter().map(|&k| q.q[k].atan2(q.i[k])).collect();
    let unwrapped = unwrap_phases(&wrapped);

    let mut out = vec![T::zero(); n];
    for (&k, &th) in idx.iter().zip(&unwrapped) {
        out[k] = th;
    }
    // Bridge gaps between neighbouring valid samples; hold the end values.
    let mut j = 0;
    for k in 0..n {
        if valid[k] {
            continue;
        }
        while j + 1 < idx.len() && idx[j + 1] < k {
            j += 1;
        }
        let before = idx.get(j).copied().filter(|&b| b < k);
        let after = idx.iter().copied().skip(j).find(|&a| a > k);
        out[k] = match (before, after) {
            (Some(b), Some(a)) => {
                let w = T::from_usize_lossy(k - b) / T::from_usize_lossy(a - b);
                out[b] + (out[a] - out[b]) * w
            }
            (Some(b), None) => out[b],
            (None, Some(a)) => out[a],
            (None, None) => T::zero(),
        };
    }
    Ok(out)
}

/// Mean direction of a set of angles.
pub fn circular_mean<T: Real>(angles: &[T]) -> T {
    let (s, c) = angles.iter().fold((T::zero(), T::zero()), |(s, c), &a| (s + a.sin(), c + a.cos()));
    s.atan2(c)
}

/// Mean resultant length `R ∈ [0, 1]`.
pub fn resultant_length<T: Real>(angles: &[T]) -> T {
    if angles.is_empty() {
        return T::zero();
    }
    let (s, c) = angles.iter().fold((T::zero(), T::zero()), |(s, c), &a| (s + a.sin(), c + a.cos()));
    (s * s + c * c).sqrt() / T::from_usize_lossy(angles.len())
}

/// Spread of a phase distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseStatistics<T> {
    /// Circular mean direction.
    pub mean: T,
    /// Standard deviation of the phases re-centred on the circular mean and
    /// wrapped to (−π, π]: `π/√3` for a uniform distribution, `σ` for a
    /// narrow wrapped Gaussian.
    pub std: T,
    /// Counts of the re-centred phases over (−π, π].
    pub histogram: Vec<usize>,
    /// Excess kurtosis of the re-centred phases: 0 for a Gaussian, −1.2 for
    /// a uniform distribution.
    pub excess_kurtosis: T,
}

pub fn phase_statistics<T: Real>(theta: &[T]) -> Result<PhaseStatistics<T>, AnalysisError> {
    if theta.len() < MIN_PHASE_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_PHASE_SAMPLES, got: theta.len() });
    }
    let mean = circular_mean(theta);
    let dev: Vec<f64> = theta.iter().map(|&t| wrap_phase(t - mean).to_f64_lossy()).collect();
    let n = dev.len() as f64;
    let mu = dev.iter().sum::<f64>() / n;
    let m2 = dev.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n;
    let m4 = dev.iter().map(|d| (d - mu).powi(4)).sum::<f64>() / n;
    let excess = if m2 > 0.0 { m4 / (m2 * m2) - 3.0 } else { 0.0 };

    let mut histogram = vec![0usize; PHASE_HISTOGRAM_BINS];
    let width = std::f64::consts::TAU / PHASE_HISTOGRAM_BINS as f64;
    for d in &dev {
        let b = ((d + std::f64::consts::PI) / width).floor() as isize;
        histogram[b.clamp(0, PHASE_HISTOGRAM_BINS as isize - 1) as usize] += 1;
    }
    Ok(PhaseStatistics { mean, std: T::lit(m2.sqrt()), histogram, excess_kurtosis: T::lit(excess) })
}

/// Variance of `θ(t + τ) − θ(t)` for each lag (in samples).
pub fn increment_variance<T: Real>(theta: &[T], lags: &[usize]) -> Vec<f64> {
    lags.iter()
        .map(|&lag| {
            if lag == 0 || lag >= theta.len() {
                return 0.0;
            }
            let d: Vec<f64> = theta.windows(lag + 1).map(|w| (w[lag] - w[0]).to_f64_lossy()).collect();
            let n = d.len() as f64;
            let m = d.iter().sum::<f64>() / n;
            d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n
        })
        .collect()
}
