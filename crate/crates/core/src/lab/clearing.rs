use serde::Serialize;

use crate::error::{invalid, Result};
use crate::series::unit_ball_volume;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClearingBound {
    /// Maximizer of the exponent `g`.
    pub alpha_star: f64,
    /// `g(α*)`.
    pub exponent_value: f64,
    /// Unit-ball volume used for `c_d`.
    pub c_d: f64,
    pub log_c0: f64,
    /// `exp(−ν̃ c_d (α* + ã)^d)` on the unit-circle image.
    pub clearing_probability: f64,
}

/// `exp(−ν c_d r^d)`: probability that a ball of radius `r` holds no trap.
pub fn clearing_probability(dim: usize, nu: f64, radius: f64) -> f64 {
    (-nu * unit_ball_volume(dim) * radius.powi(dim as i32)).exp()
}

/// Maximizes `g(α) = −ν J^{d/2} c_d 2^d α^d + T log C₀ / (J² α²)` over
/// `α > 0`. Writing `g = −Aα^d − B/α²`, the stationary point is
/// `α* = (2B/(dA))^{1/(d+2)}`.
pub fn clearing_bound(dim: usize, nu: f64, a: f64, length: f64, horizon: f64, log_c0: f64) -> Result<ClearingBound> {
    if dim == 0 {
        return Err(invalid("d", "must be at least 1"));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(invalid("T", format!("must be > 0, got {horizon}")));
    }
    if !(log_c0 < 0.0 && log_c0.is_finite()) {
        return Err(invalid("logC0", format!("must be finite and < 0, got {log_c0}")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(invalid("nu", format!("must be > 0, got {nu}")));
    }
    if !(length >= 1.0 && length.is_finite()) {
        return Err(invalid("J", format!("must be >= 1, got {length}")));
    }
    let d = dim as f64;
    let c_d = unit_ball_volume(dim);
    let big_a = nu * length.powf(d / 2.0) * c_d * 2f64.powi(dim as i32);
    let big_b = -horizon * log_c0 / (length * length);
    let alpha_star = (2.0 * big_b / (d * big_a)).powf(1.0 / (d + 2.0));
    let exponent_value = -big_a * alpha_star.powi(dim as i32) - big_b / (alpha_star * alpha_star);
    let nu_tilde = nu * length.powf(d / 2.0);
    let a_tilde = a / length.sqrt();
    Ok(ClearingBound {
        alpha_star,
        exponent_value,
        c_d,
        log_c0,
        clearing_probability: clearing_probability(dim, nu_tilde, alpha_star + a_tilde),
    })
}
