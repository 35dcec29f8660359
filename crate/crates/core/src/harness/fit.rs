//! Least-squares power-law fits in log-log coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `log y = intercept + slope log x` (natural logarithms).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Fits `y = exp(intercept) x^slope` to `(x, y)` pairs.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateFit> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints(format!(
            "rate fit needs at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|&&(x, y)| !(x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs positive finite values, got ({x:e}, {y:e})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two distinct abscissae".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = logs.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let ss_tot: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        points: logs.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_laws() {
        let f = fit_rate(&[(1.0, 1.0), (0.1, 0.1), (0.01, 0.01)]).unwrap();
        assert!((f.slope - 1.0).abs() < 1e-12 && (f.r_squared - 1.0).abs() < 1e-12);
        let pts: Vec<(f64, f64)> = [1.0, 0.3, 0.1, 0.03].iter().map(|&x| (x, 3.0 * x * x)).collect();
        let f = fit_rate(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn outlier_lowers_r_squared() {
        // log y = log x except the middle point, lifted by log 2
        let xs = [1.0, 0.5, 0.25, 0.125, 0.0625];
        let mut pts: Vec<(f64, f64)> = xs.iter().map(|&x| (x, x)).collect();
        pts[2].1 *= 2.0;
        let f = fit_rate(&pts).unwrap();
        // centered abscissae are symmetric, so the slope is unchanged and the
        // intercept moves by log 2 / 5
        assert!((f.slope - 1.0).abs() < 1e-12);
        let l2 = 2f64.ln();
        let ss_res = l2 * l2 * (1.0 - 1.0 / 5.0);
        let h = 2f64.ln();
        let ss_tot_x: f64 = [-2.0, -1.0, 0.0, 1.0, 2.0f64].iter().map(|k| (k * h).powi(2)).sum();
        let ss_tot = ss_tot_x + ss_res;
        assert!((f.r_squared - (1.0 - ss_res / ss_tot)).abs() < 1e-12);
        assert!(f.r_squared < 1.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(fit_rate(&[(1.0, 1.0)]), Err(Error::InsufficientPoints(_))));
        assert!(fit_rate(&[(1.0, 1.0), (0.1, 0.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (-0.1, 1.0)]).is_err());
        assert!(fit_rate(&[(1.0, 1.0), (1.0, 2.0)]).is_err());
    }
}
