use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::series::Z95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub gamma_hat: f64,
    pub stderr: f64,
    pub ci: (f64, f64),
    pub intercept: f64,
    pub n_points: usize,
}

/// `−log S` and its delta-method standard error from a survival estimate.
pub fn neg_log_survival(p_hat: f64, stderr: f64) -> Result<(f64, f64)> {
    if !(p_hat > 0.0 && p_hat < 1.0) {
        return Err(invalid(
            "S",
            format!("survival estimate {p_hat} gives no positive finite -log S"),
        ));
    }
    Ok((-p_hat.ln(), stderr / p_hat))
}

/// Weighted least squares of `log(−log S)` on `log T`. With all standard
/// errors positive the weights are `(−log S / se)²`; otherwise the points are
/// weighted equally and the slope error comes from the residuals.
pub fn exponent_fit(horizons: &[f64], neg_log_s: &[f64], stderr: &[f64]) -> Result<ExponentFit> {
    let n = horizons.len();
    if neg_log_s.len() != n || stderr.len() != n {
        return Err(Error::GridMismatch {
            expected: n,
            actual: neg_log_s.len().min(stderr.len()),
        });
    }
    if n < 4 {
        return Err(Error::InsufficientSamples { needed: 4, got: n });
    }
    if horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(invalid("T", "horizons must be positive"));
    }
    let (tmin, tmax) = horizons
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), t| (lo.min(*t), hi.max(*t)));
    if tmax / tmin < 10.0 * (1.0 - 1e-12) {
        return Err(invalid("T", format!("horizons span {tmin}..{tmax}, less than one decade")));
    }
    if let Some(v) = neg_log_s.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(invalid("-log S", format!("must be positive and finite, got {v}")));
    }
    let x: Vec<f64> = horizons.iter().map(|t| t.ln()).collect();
    let y: Vec<f64> = neg_log_s.iter().map(|v| v.ln()).collect();
    let known = stderr.iter().all(|s| *s > 0.0 && s.is_finite());
    let w: Vec<f64> = if known {
        neg_log_s.iter().zip(stderr).map(|(v, s)| (v / s).powi(2)).collect()
    } else {
        vec![1.0; n]
    };
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(&x).map(|(w, x)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = w
        .iter()
        .zip(x.iter().zip(&y))
        .map(|(w, (x, y))| w * (x - mx) * (y - my))
        .sum();
    let gamma_hat = sxy / sxx;
    let intercept = my - gamma_hat * mx;
    let se = if known {
        (1.0 / sxx).sqrt()
    } else {
        let rss: f64 = x
            .iter()
            .zip(&y)
            .map(|(x, y)| (y - intercept - gamma_hat * x).powi(2))
            .sum();
        (rss / (n as f64 - 2.0) / sxx).sqrt()
    };
    Ok(ExponentFit {
        gamma_hat,
        stderr: se,
        ci: (gamma_hat - Z95 * se, gamma_hat + Z95 * se),
        intercept,
        n_points: n,
    })
}
