//! Log-log least-squares fits.

/// Ordinary least-squares fit of `ln y = intercept + slope * ln x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `ln y`.
    pub residual: f64,
    pub points: usize,
}

/// Fewer than this many points give no slope.
pub const MIN_FIT_POINTS: usize = 3;

/// `None` with fewer than [`MIN_FIT_POINTS`] points, a non-positive value, or
/// coincident abscissae.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Option<PowerFit> {
    if x.len() != y.len() || x.len() < MIN_FIT_POINTS {
        return None;
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0 && v.is_finite())) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = lx
        .iter()
        .zip(&ly)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    Some(PowerFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: lx.len(),
    })
}
