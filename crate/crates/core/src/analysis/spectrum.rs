//! Welch-averaged spectral densities, linewidths and frequency-noise fits.

use std::io::{self, Write};

use num_complex::Complex;
use rustfft::FftPlanner;

use super::quadrature::Quadratures;
use super::AnalysisError;
use crate::dynamics::fmt_sci;
use crate::scalar::Real;

/// Minimum sample count for a frequency-noise spectrum.
pub const MIN_FREQUENCY_NOISE_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    Hann,
    Rectangular,
}

impl Window {
    fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); n],
            // Periodic Hann, which overlaps-adds to a constant at 50%.
            Window::Hann => (0..n)
                .map(|k| {
                    let x = T::TAU() * T::from_usize_lossy(k) / T::from_usize_lossy(n);
                    T::lit(0.5) * (T::one() - x.cos())
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WelchConfig {
    pub segment_len: usize,
    /// Fractional overlap in [0, 1).
    pub overlap: f64,
    pub window: Window,
}

impl WelchConfig {
    /// Hann window with 50% overlap.
    pub fn new(segment_len: usize) -> Self {
        Self { segment_len, overlap: 0.5, window: Window::Hann }
    }

    /// Shortest power-of-two Hann segment whose resolution bandwidth is at
    /// most `max_rbw_hz`.
    pub fn for_resolution(sample_rate: f64, max_rbw_hz: f64) -> Self {
        // Hann equivalent noise bandwidth is 1.5 bins.
        let n = (1.5 * sample_rate / max_rbw_hz).ceil().max(2.0) as usize;
        Self::new(n.next_power_of_two())
    }

    fn hop(&self) -> usize {
        let h = (self.segment_len as f64 * (1.0 - self.overlap)).round() as usize;
        h.max(1)
    }

    /// Number of segments that fit into `len` samples.
    pub fn segment_count(&self, len: usize) -> usize {
        if len < self.segment_len {
            0
        } else {
            (len - self.segment_len) / self.hop() + 1
        }
    }
}

/// Power spectral density on an ascending frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDensity<T> {
    /// Hz, relative to the detection frame.
    pub frequencies: Vec<T>,
    /// Density per Hz; photons/(s·Hz) for photon spectra.
    pub values: Vec<T>,
    /// Equivalent noise bandwidth of the window, Hz.
    pub resolution_bandwidth: T,
    /// Grid spacing, Hz.
    pub bin_width: T,
    /// Number of averaged segments.
    pub averages: usize,
}

impl<T: Real> SpectralDensity<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `Σ S(f) Δf`, the total power.
    pub fn total_power(&self) -> T {
        self.values.iter().fold(T::zero(), |a, &v| a + v) * self.bin_width
    }

    /// Power within `[f_lo, f_hi]`.
    pub fn band_power(&self, f_lo: T, f_hi: T) -> T {
        self.frequencies
            .iter()
            .zip(&self.values)
            .filter(|(&f, _)| f >= f_lo && f <= f_hi)
            .fold(T::zero(), |a, (_, &v)| a + v)
            * self.bin_width
    }

    pub fn peak_index(&self) -> Option<usize> {
        self.values
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, T)>, (k, &v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((k, v)),
            })
            .map(|(k, _)| k)
    }

    pub fn peak_frequency(&self) -> Option<T> {
        self.peak_index().map(|k| self.frequencies[k])
    }

    pub fn median(&self) -> T {
        median(&self.values)
    }

    /// Sub-spectrum restricted to `[f_lo, f_hi]`.
    pub fn band(&self, f_lo: T, f_hi: T) -> SpectralDensity<T> {
        let (f, v): (Vec<T>, Vec<T>) = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(&f, _)| f >= f_lo && f <= f_hi)
            .map(|(&f, &v)| (f, v))
            .unzip();
        SpectralDensity { frequencies: f, values: v, ..self.clone() }
    }

    /// Spectrum with the frequency axis shifted by `df`.
    pub fn shifted(&self, df: T) -> SpectralDensity<T> {
        SpectralDensity { frequencies: self.frequencies.iter().map(|&f| f + df).collect(), ..self.clone() }
    }

    /// CSV with commented metadata lines followed by `frequency_hz,density`.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> io::Result<()> {
        writeln!(w, "# axis: frequency_hz = detection-frame frequency in Hz")?;
        writeln!(w, "# resolution_bandwidth_hz: {}", fmt_sci(self.resolution_bandwidth))?;
        writeln!(w, "# bin_width_hz: {}", fmt_sci(self.bin_width))?;
        writeln!(w, "# averages: {}", self.averages)?;
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "frequency_hz,density")?;
        for (f, v) in self.frequencies.iter().zip(&self.values) {
            writeln!(w, "{},{}", fmt_sci(*f), fmt_sci(*v))?;
        }
        Ok(())
    }
}

pub(crate) fn median<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::zero();
    }
    let mut v = xs.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    *m
}

/// Averaged `|FFT|²` of windowed segments, un-normalized, in FFT bin order.
fn welch_core<T: Real>(
    data: &[Complex<T>],
    cfg: &WelchConfig,
) -> Result<(Vec<T>, usize, Vec<T>), AnalysisError> {
    let n = cfg.segment_len;
    if n < 2 || n > data.len() {
        return Err(AnalysisError::SegmentTooLong { segment: n, available: data.len() });
    }
    let count = cfg.segment_count(data.len());
    if count < 2 {
        return Err(AnalysisError::TooFewSegments { needed: 2, got: count });
    }
    let window = cfg.window.coefficients::<T>(n);
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let mut acc = vec![T::zero(); n];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    let hop = cfg.hop();
    for s in 0..count {
        let seg = &data[s * hop..s * hop + n];
        for ((b, &z), &w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = z * w;
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }
    let k = T::from_usize_lossy(count);
    for a in &mut acc {
        *a /= k;
    }
    Ok((acc, count, window))
}

fn window_sums<T: Real>(w: &[T]) -> (T, T) {
    w.iter().fold((T::zero(), T::zero()), |(s1, s2), &x| (s1 + x, s2 + x * x))
}

/// Two-sided spectral density of the complex record `I + iQ`, normalized
/// so that a coherent tone of flux `F` photons/s integrates to `F`.
pub fn photon_spectral_density<T: Real>(
    quadratures: &Quadratures<T>,
    cfg: &WelchConfig,
) -> Result<SpectralDensity<T>, AnalysisError> {
    complex_psd(&quadratures.field(), quadratures.sample_rate, cfg)
}

/// Two-sided Welch density of a complex baseband record.
pub fn complex_psd<T: Real>(
    field: &[Complex<T>],
    sample_rate: T,
    cfg: &WelchConfig,
) -> Result<SpectralDensity<T>, AnalysisError> {
    let (raw, count, window) = welch_core(field, cfg)?;
    let n = cfg.segment_len;
    let (s1, s2) = window_sums(&window);
    let norm = sample_rate * s2;
    let bin = sample_rate / T::from_usize_lossy(n);
    // fftshift: bins n/2..n are negative frequencies.
    let half = n / 2;
    let mut frequencies = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let src = (j + n - half) % n;
        let signed = j as f64 - half as f64;
        frequencies.push(bin * T::lit(signed));
        values.push(raw[src] / norm);
    }
    Ok(SpectralDensity {
        frequencies,
        values,
        resolution_bandwidth: sample_rate * s2 / (s1 * s1),
        bin_width: bin,
        averages: count,
    })
}

/// One-sided Welch density of a real series (bins from DC to Nyquist).
pub fn welch_real<T: Real>(series: &[T], sample_rate: T, cfg: &WelchConfig) -> Result<SpectralDensity<T>, AnalysisError> {
    let data: Vec<Complex<T>> = series.iter().map(|&x| Complex::new(x, T::zero())).collect();
    let (raw, count, window) = welch_core(&data, cfg)?;
    let n = cfg.segment_len;
    let (s1, s2) = window_sums(&window);
    let norm = sample_rate * s2;
    let bin = sample_rate / T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let mut frequencies = Vec::with_capacity(n / 2 + 1);
    let mut values = Vec::with_capacity(n / 2 + 1);
    for (k, &r) in raw.iter().enumerate().take(n / 2 + 1) {
        let edge = k == 0 || (n % 2 == 0 && k == n / 2);
        frequencies.push(bin * T::from_usize_lossy(k));
        values.push(if edge { r / norm } else { two * r / norm });
    }
    Ok(SpectralDensity {
        frequencies,
        values,
        resolution_bandwidth: sample_rate * s2 / (s1 * s1),
        bin_width: bin,
        averages: count,
    })
}

/// Result of a −3 dB width measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Linewidth<T> {
    Resolved { fwhm: T, center: T },
    /// Narrower than two grid bins.
    BelowResolution { bin_width: T, center: T },
}

impl<T: Real> Linewidth<T> {
    /// Measured width, or two bins as an upper bound when unresolved.
    pub fn upper_bound(&self) -> T {
        match *self {
            Linewidth::Resolved { fwhm, .. } => fwhm,
            Linewidth::BelowResolution { bin_width, .. } => bin_width + bin_width,
        }
    }

    pub fn center(&self) -> T {
        match *self {
            Linewidth::Resolved { center, .. } | Linewidth::BelowResolution { center, .. } => center,
        }
    }
}

/// Interpolated −3 dB crossing between bins `a` (above half) and `b`.
fn crossing<T: Real>(psd: &SpectralDensity<T>, a: usize, b: usize, level: T) -> T {
    let (fa, fb) = (psd.frequencies[a], psd.frequencies[b]);
    let (va, vb) = (psd.values[a], psd.values[b]);
    if va == vb {
        return fb;
    }
    fa + (fb - fa) * (va - level) / (va - vb)
}

/// Full width at half maximum around `peak`, in Hz.
pub(crate) fn half_power_width<T: Real>(psd: &SpectralDensity<T>, peak: usize) -> T {
    let level = psd.values[peak] / T::lit(2.0);
    let mut l = peak;
    while l > 0 && psd.values[l - 1] > level {
        l -= 1;
    }
    let mut r = peak;
    while r + 1 < psd.len() && psd.values[r + 1] > level {
        r += 1;
    }
    let left = if l > 0 { crossing(psd, l, l - 1, level) } else { psd.frequencies[0] };
    let right = if r + 1 < psd.len() { crossing(psd, r, r + 1, level) } else { psd.frequencies[r] };
    right - left
}

/// −3 dB full width of the dominant peak.
pub fn linewidth<T: Real>(psd: &SpectralDensity<T>) -> Result<Linewidth<T>, AnalysisError> {
    let peak = psd.peak_index().ok_or(AnalysisError::NoLineFound)?;
    let floor = psd.median();
    let six_db = T::lit(10f64.powf(0.6));
    if !(psd.values[peak] > floor * six_db) {
        return Err(AnalysisError::NoLineFound);
    }
    let center = psd.frequencies[peak];
    let width = half_power_width(psd, peak);
    if width < psd.bin_width + psd.bin_width {
        Ok(Linewidth::BelowResolution { bin_width: psd.bin_width, center })
    } else {
        Ok(Linewidth::Resolved { fwhm: width, center })
    }
}

/// Coefficients of `S(f) = A/f + W`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFitResult<T> {
    /// `A`, Hz² (density × frequency).
    pub flicker: T,
    /// `W`, Hz²/Hz.
    pub white: T,
    /// RMS relative residual of the fit.
    pub residual: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyNoise<T> {
    /// One-sided density of `(1/2π)·dθ/dt`, Hz²/Hz.
    pub spectrum: SpectralDensity<T>,
    /// `None` when the fit failed.
    pub fit: Option<NoiseFitResult<T>>,
}

/// Weighted least squares for `S = A/f + W` with relative weights.
pub fn fit_flicker_white<T: Real>(freqs: &[T], values: &[T]) -> Option<NoiseFitResult<T>> {
    let pts: Vec<(f64, f64)> = freqs
        .iter()
        .zip(values)
        .map(|(&f, &v)| (f.to_f64_lossy(), v.to_f64_lossy()))
        .filter(|&(f, v)| f > 0.0 && v > 0.0 && v.is_finite())
        .collect();
    if pts.len() < 3 {
        return None;
    }
    // Minimize Σ ((S − A/f − W)/S)²: linear in (A, W) with rows (1/(fS), 1/S).
    let solve = |use_a: bool, use_w: bool| -> Option<(f64, f64)> {
        let (mut saa, mut saw, mut sww, mut sa1, mut sw1) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(f, s) in &pts {
            let xa = if use_a { 1.0 / (f * s) } else { 0.0 };
            let xw = if use_w { 1.0 / s } else { 0.0 };
            saa += xa * xa;
            saw += xa * xw;
            sww += xw * xw;
            sa1 += xa;
            sw1 += xw;
        }
        match (use_a, use_w) {
            (true, true) => {
                let det = saa * sww - saw * saw;
                if det.abs() <= 1e-300 {
                    return None;
                }
                Some(((sa1 * sww - sw1 * saw) / det, (saa * sw1 - saw * sa1) / det))
            }
            (true, false) => (saa > 0.0).then(|| (sa1 / saa, 0.0)),
            (false, true) => (sww > 0.0).then(|| (0.0, sw1 / sww)),
            _ => None,
        }
    };
    let (mut a, mut w) = solve(true, true)?;
    if a < 0.0 {
        (a, w) = solve(false, true)?;
    } else if w < 0.0 {
        (a, w) = solve(true, false)?;
    }
    if !(a.is_finite() && w.is_finite()) {
        return None;
    }
    let n = pts.len() as f64;
    let ss: f64 = pts.iter().map(|&(f, s)| ((s - a / f - w) / s).powi(2)).sum();
    Some(NoiseFitResult { flicker: T::lit(a.max(0.0)), white: T::lit(w.max(0.0)), residual: T::lit((ss / n).sqrt()) })
}

/// Spectrum of the instantaneous frequency `(1/2π)·dθ/dt` and its
/// flicker-plus-white fit.
pub fn frequency_noise_spectrum<T: Real>(
    theta: &[T],
    sample_rate: T,
    cfg: &WelchConfig,
) -> Result<FrequencyNoise<T>, AnalysisError> {
    if theta.len() < MIN_FREQUENCY_NOISE_SAMPLES {
        return Err(AnalysisError::TooFewSamples { needed: MIN_FREQUENCY_NOISE_SAMPLES, got: theta.len() });
    }
    let k = sample_rate / T::TAU();
    let freq: Vec<T> = theta.windows(2).map(|w| (w[1] - w[0]) * k).collect();
    let spectrum = welch_real(&freq, sample_rate, cfg)?;
    let fit = fit_flicker_white(&spectrum.frequencies[1..], &spectrum.values[1..]);
    Ok(FrequencyNoise { spectrum, fit })
}

/// Least-squares slope of `log S` against `log f` over `[f_lo, f_hi]`.
pub fn loglog_slope<T: Real>(psd: &SpectralDensity<T>, f_lo: T, f_hi: T) -> Option<f64> {
    let pts: Vec<(f64, f64)> = psd
        .frequencies
        .iter()
        .zip(&psd.values)
        .filter(|(&f, &v)| f >= f_lo && f <= f_hi && f > T::zero() && v > T::zero())
        .map(|(&f, &v)| (f.to_f64_lossy().ln(), v.to_f64_lossy().ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
