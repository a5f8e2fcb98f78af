use super::spectrum::{half_power_width, SpectralDensity};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak<T> {
    /// Interpolated centre, Hz.
    pub frequency: T,
    pub height: T,
    /// −3 dB full width, Hz.
    pub width: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakOptions {
    /// Required height above the median floor, dB.
    pub floor_offset_db: f64,
    /// Required drop on both sides before a higher neighbour, dB.
    pub min_prominence_db: f64,
}

impl Default for PeakOptions {
    fn default() -> Self {
        Self { floor_offset_db: 10.0, min_prominence_db: 6.0 }
    }
}

/// Local maxima above `median + floor_offset_db`, sorted by height.
pub fn detect_peaks<T: Real>(psd: &SpectralDensity<T>, floor_offset_db: f64) -> Vec<Peak<T>> {
    detect_peaks_with(psd, &PeakOptions { floor_offset_db, ..PeakOptions::default() })
}

pub fn detect_peaks_with<T: Real>(psd: &SpectralDensity<T>, opts: &PeakOptions) -> Vec<Peak<T>> {
    let v = &psd.values;
    let n = v.len();
    if n < 3 {
        return Vec::new();
    }
    let threshold = psd.median() * T::lit(10f64.powf(opts.floor_offset_db / 10.0));
    let min_ratio = T::lit(10f64.powf(opts.min_prominence_db / 10.0));
    let mut peaks = Vec::new();
    for k in 0..n {
        let left_ok = k == 0 || v[k] > v[k - 1];
        let right_ok = k + 1 == n || v[k] >= v[k + 1];
        if !(left_ok && right_ok && v[k] > threshold) {
            continue;
        }
        // Prominence: lowest point on each side before a higher sample.
        let mut left_min = v[k];
        let mut j = k;
        while j > 0 && v[j - 1] <= v[k] {
            j -= 1;
            left_min = left_min.min(v[j]);
        }
        let mut right_min = v[k];
        let mut j = k;
        while j + 1 < n && v[j + 1] <= v[k] {
            j += 1;
            right_min = right_min.min(v[j]);
        }
        let base = left_min.max(right_min);
        if !(v[k] >= base * min_ratio) {
            continue;
        }
        peaks.push(Peak { frequency: interpolated_center(psd, k), height: v[k], width: half_power_width(psd, k) });
    }
    peaks.sort_by(|a, b| b.height.partial_cmp(&a.height).unwrap_or(std::cmp::Ordering::Equal));
    peaks
}

/// Parabolic vertex through the log-values around bin `k`.
fn interpolated_center<T: Real>(psd: &SpectralDensity<T>, k: usize) -> T {
    let f = psd.frequencies[k];
    if k == 0 || k + 1 >= psd.len() {
        return f;
    }
    let (a, b, c) = (psd.values[k - 1], psd.values[k], psd.values[k + 1]);
    if !(a > T::zero() && b > T::zero() && c > T::zero()) {
        return f;
    }
    let (la, lb, lc) = (a.ln(), b.ln(), c.ln());
    let denom = la - lb - lb + lc;
    if denom >= T::zero() {
        return f;
    }
    let shift = T::lit(0.5) * (la - lc) / denom;
    f + shift.max(-T::lit(0.5)).min(T::lit(0.5)) * psd.bin_width
}
