use std::io::{self, Write};

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::AnalysisError;
use crate::scalar::Real;

/// Angular bins of the uniformity test.
pub const UNIFORMITY_BINS: usize = 36;

/// Two-dimensional histogram over a rectangular range, with samples outside
/// the range kept in an overflow tally.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    pub x_bins: usize,
    pub y_bins: usize,
    /// Row-major `[ix * y_bins + iy]`.
    pub counts: Vec<u64>,
    pub overflow: u64,
}

impl Histogram2D {
    pub fn new(x_bins: usize, y_bins: usize, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        Self { x_range, y_range, x_bins, y_bins, counts: vec![0; x_bins * y_bins], overflow: 0 }
    }

    fn bin(value: f64, range: (f64, f64), bins: usize) -> Option<usize> {
        let (lo, hi) = range;
        if !(value >= lo && value <= hi) {
            return None;
        }
        let k = ((value - lo) / (hi - lo) * bins as f64).floor() as usize;
        Some(k.min(bins - 1))
    }

    pub fn add(&mut self, x: f64, y: f64) {
        match (Self::bin(x, self.x_range, self.x_bins), Self::bin(y, self.y_range, self.y_bins)) {
            (Some(ix), Some(iy)) => self.counts[ix * self.y_bins + iy] += 1,
            _ => self.overflow += 1,
        }
    }

    pub fn get(&self, ix: usize, iy: usize) -> u64 {
        self.counts[ix * self.y_bins + iy]
    }

    /// All samples seen, including the overflow tally.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow
    }

    pub fn nonzero_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    /// Adds the counts of a histogram with the same layout.
    pub fn merge(&mut self, other: &Histogram2D) -> Result<(), AnalysisError> {
        if self.x_bins != other.x_bins
            || self.y_bins != other.y_bins
            || self.x_range != other.x_range
            || self.y_range != other.y_range
        {
            return Err(AnalysisError::Degenerate("histogram layouts differ".into()));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow += other.overflow;
        Ok(())
    }

    /// Bin-centre coordinates and counts as `x,y,count` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, meta: &[(&str, String)]) -> io::Result<()> {
        writeln!(w, "# x_range: {:?}", self.x_range)?;
        writeln!(w, "# y_range: {:?}", self.y_range)?;
        writeln!(w, "# bins: {}x{}", self.x_bins, self.y_bins)?;
        writeln!(w, "# overflow: {}", self.overflow)?;
        for (k, v) in meta {
            writeln!(w, "# {k}: {v}")?;
        }
        writeln!(w, "x,y,count")?;
        let dx = (self.x_range.1 - self.x_range.0) / self.x_bins as f64;
        let dy = (self.y_range.1 - self.y_range.0) / self.y_bins as f64;
        for ix in 0..self.x_bins {
            for iy in 0..self.y_bins {
                let x = self.x_range.0 + (ix as f64 + 0.5) * dx;
                let y = self.y_range.0 + (iy as f64 + 0.5) * dy;
                writeln!(w, "{x:.16e},{y:.16e},{}", self.get(ix, iy))?;
            }
        }
        Ok(())
    }
}

/// Bins paired samples, e.g. `(I_n, Q_n)` for a phase-space plot or
/// `(I₃, I₄)` for a cross-quadrature plot.
pub fn histogram2d<T: Real>(
    x: &[T],
    y: &[T],
    bins: (usize, usize),
    range: ((f64, f64), (f64, f64)),
) -> Result<Histogram2D, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if bins.0 == 0 || bins.1 == 0 || !(range.0 .1 > range.0 .0) || !(range.1 .1 > range.1 .0) {
        return Err(AnalysisError::Degenerate("empty histogram layout".into()));
    }
    let mut h = Histogram2D::new(bins.0, bins.1, range.0, range.1);
    for (&a, &b) in x.iter().zip(y) {
        h.add(a.to_f64_lossy(), b.to_f64_lossy());
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformityTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson chi-square test of angles against the uniform distribution on
/// (−π, π].
pub fn uniformity_chi_square<T: Real>(angles: &[T], bins: usize) -> Result<UniformityTest, AnalysisError> {
    if bins < 2 || angles.len() < 5 * bins {
        return Err(AnalysisError::TooFewSamples { needed: 5 * bins.max(2), got: angles.len() });
    }
    let mut counts = vec![0usize; bins];
    let width = std::f64::consts::TAU / bins as f64;
    for &a in angles {
        let a = crate::scalar::wrap_phase(a).to_f64_lossy();
        let k = ((a + std::f64::consts::PI) / width).floor() as isize;
        counts[k.clamp(0, bins as isize - 1) as usize] += 1;
    }
    let expected = angles.len() as f64 / bins as f64;
    let statistic: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let dof = bins - 1;
    let dist = ChiSquared::new(dof as f64).map_err(|e| AnalysisError::Degenerate(e.to_string()))?;
    Ok(UniformityTest { statistic, dof, p_value: 1.0 - dist.cdf(statistic) })
}
