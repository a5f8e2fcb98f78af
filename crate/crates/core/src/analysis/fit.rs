use super::AnalysisError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqrtLawFit {
    pub coefficient: f64,
    pub r_squared: f64,
}

/// Least-squares `c` in `g = c·√n`, with the coefficient of determination.
pub fn fit_sqrt_law(n_values: &[f64], gap_values: &[f64]) -> Result<SqrtLawFit, AnalysisError> {
    if n_values.len() != gap_values.len() {
        return Err(AnalysisError::LengthMismatch(n_values.len(), gap_values.len()));
    }
    if n_values.len() < 3 {
        return Err(AnalysisError::Degenerate(format!("need at least 3 points, got {}", n_values.len())));
    }
    if n_values.iter().any(|&n| !(n > 0.0) || !n.is_finite()) || gap_values.iter().any(|g| !g.is_finite()) {
        return Err(AnalysisError::Degenerate("photon numbers must be positive and gaps finite".into()));
    }
    let sxy: f64 = n_values.iter().zip(gap_values).map(|(n, g)| n.sqrt() * g).sum();
    let sxx: f64 = n_values.iter().sum();
    let c = sxy / sxx;
    let mean = gap_values.iter().sum::<f64>() / gap_values.len() as f64;
    let ss_tot: f64 = gap_values.iter().map(|g| (g - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(AnalysisError::Degenerate("gap values have zero variance".into()));
    }
    let ss_res: f64 = n_values.iter().zip(gap_values).map(|(n, g)| (g - c * n.sqrt()).powi(2)).sum();
    Ok(SqrtLawFit { coefficient: c, r_squared: 1.0 - ss_res / ss_tot })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least-squares line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::Degenerate("need at least 2 points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(AnalysisError::Degenerate("x values have zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let ss_res: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(LinearFit { slope, intercept, r_squared })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_sqrt_law() {
        let n = [0.5, 1.0, 2.0, 4.0];
        let g: Vec<f64> = n.iter().map(|v: &f64| 2.0 * v.sqrt()).collect();
        let fit = fit_sqrt_law(&n, &g).unwrap();
        assert!((fit.coefficient - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbed_sqrt_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let n: Vec<f64> = (1..=20).map(|k| 0.25 * k as f64).collect();
        let g: Vec<f64> = n.iter().map(|v| 3.0 * v.sqrt() * (1.0 + 0.01 * rng.sample::<f64, _>(StandardNormal))).collect();
        let fit = fit_sqrt_law(&n, &g).unwrap();
        assert!((fit.coefficient / 3.0 - 1.0).abs() < 0.03);
        assert!(fit.r_squared > 0.99);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(fit_sqrt_law(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(fit_sqrt_law(&[1.0, 0.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(fit_sqrt_law(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0]).is_err());
        assert!(fit_sqrt_law(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn line_fit() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 3.0, 5.0, 7.0];
        let f = linear_fit(&x, &y).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }
}
