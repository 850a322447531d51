use serde::Serialize;

use crate::error::{invalid, Result};
use crate::stats::PathRecord;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauReport {
    /// `τ₀ = 0, τ₁, …` up to the horizon.
    pub times: Vec<f64>,
    /// Sample indices of the `τᵢ`.
    pub indices: Vec<usize>,
    /// `#(T)`, the number of `τᵢ` with `i ≥ 1` before the horizon.
    pub count: usize,
    /// Largest displacement between consecutive samples.
    pub max_step: f64,
    /// Whether `max_step < Λ/10`.
    pub guard_ok: bool,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// `τ_{i+1}` is the first sample time at which the centre of mass is at
/// distance at least `4Λ` from every earlier `X_{τ_k}`.
pub fn tau_sequence(path: &PathRecord, lambda: f64) -> Result<TauReport> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("Lambda", format!("must be > 0, got {lambda}")));
    }
    if path.is_empty() {
        return Err(crate::error::Error::Empty("path"));
    }
    let reach = 4.0 * lambda;
    let mut indices = vec![0usize];
    let mut max_step = 0.0f64;
    for i in 1..path.len() {
        max_step = max_step.max(dist(&path.centers[i], &path.centers[i - 1]));
        let x = &path.centers[i];
        if indices.iter().all(|&k| dist(x, &path.centers[k]) >= reach) {
            indices.push(i);
        }
    }
    let guard_ok = max_step < lambda / 10.0;
    if !guard_ok {
        log::warn!("centre-of-mass step {max_step} is not below Lambda/10 = {}", lambda / 10.0);
    }
    Ok(TauReport {
        times: indices.iter().map(|&i| path.times[i]).collect(),
        count: indices.len() - 1,
        indices,
        max_step,
        guard_ok,
    })
}

/// `C_d = Γ(d/2+1) / (16^d π^{d/2})`.
pub fn count_lower_bound_constant(dim: usize) -> f64 {
    1.0 / (16f64.powi(dim as i32) * crate::series::unit_ball_volume(dim))
}

/// `C_d T^{d/(d+2)} / Λ^d`, the level below which `#(T)` falls only with
/// exponentially small probability.
pub fn count_lower_bound(dim: usize, horizon: f64, lambda: f64) -> f64 {
    let d = dim as f64;
    count_lower_bound_constant(dim) * horizon.powf(d / (d + 2.0)) / lambda.powf(d)
}
