use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::spectral::{variance_series, FieldSamples, ModelParams, SeriesKind, SpectralModel};
use crate::stats::range_of;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub t: f64,
    /// `R(G_t * f)`.
    pub lhs: f64,
    /// `4d e^{−2π²t/J²} ‖f − f̄‖₂`.
    pub rhs: f64,
    pub holds: bool,
}

/// Compares the range of the heat-smoothed profile with its exponential
/// bound. The profile is projected onto the `K` retained modes.
pub fn range_smoothing_check(f: &FieldSamples, t: f64, modes: usize) -> Result<SmoothingReport> {
    if !(t.is_finite() && t > 0.0) {
        return Err(invalid("t", format!("must be > 0, got {t}")));
    }
    if t < 1.0 {
        log::warn!("smoothing bound is only claimed for t >= 1, got {t}");
    }
    let grid = f.grid_len();
    let model = SpectralModel::new(ModelParams {
        dim: f.dim,
        length: f.length,
        modes,
        grid,
        tail_tolerance: f64::INFINITY,
        ..ModelParams::default()
    })?;
    let state = model.init_from_profile(f)?;
    let smoothed = model.evaluate_fluctuation(&state.heat_convolve(t)?);
    let lhs = range_of(&smoothed)?;

    let mut mean = vec![0.0; f.dim];
    for p in f.points() {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v / grid as f64;
        }
    }
    let l2 = (f
        .points()
        .map(|p| p.iter().zip(&mean).map(|(v, m)| (v - m) * (v - m)).sum::<f64>())
        .sum::<f64>()
        / grid as f64)
        .sqrt();
    let lambda1 = 2.0 * PI * PI / (f.length * f.length);
    let rhs = 4.0 * f.dim as f64 * (-lambda1 * t).exp() * l2;
    // round-off floor of the transform for profiles with a large mean
    let scale = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = 1e-14 * scale * f.dim as f64;
    Ok(SmoothingReport {
        t,
        lhs,
        rhs,
        holds: lhs <= rhs + floor,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GspaceReport {
    pub t: f64,
    /// `(d(x,y), series, series/d(x,y))` per retained pair.
    pub rows: Vec<(f64, f64, f64)>,
    /// Pairs dropped because `x = y`.
    pub excluded: usize,
    /// Empirical lower and upper constants.
    pub c1: f64,
    pub c2: f64,
    pub spread: f64,
    pub passed: bool,
}

/// Maximum allowed ratio between the largest and smallest normalized
/// space-increment variance.
pub const GSPACE_MAX_SPREAD: f64 = 25.0;

/// Circle distance on `[0,1)`.
pub fn circle_distance(x: f64, y: f64) -> f64 {
    let h = (x - y).abs();
    h.min(1.0 - h)
}

/// Normalizes the space-increment variance series by the circle distance
/// for each pair, on the unit circle, truncated at `modes`.
pub fn gspace_ratio(t: f64, pairs: &[(f64, f64)], modes: usize) -> Result<GspaceReport> {
    if !(t >= 1.0) {
        return Err(invalid("t", format!("must be >= 1, got {t}")));
    }
    let resolution = 1.0 / (2 * modes + 1) as f64;
    let mut rows = Vec::new();
    let mut excluded = 0;
    for &(x, y) in pairs {
        let d = circle_distance(x, y);
        if d == 0.0 {
            excluded += 1;
            continue;
        }
        if d < resolution * (1.0 - 1e-12) {
            return Err(invalid(
                "pairs",
                format!("distance {d} is below the resolvable scale {resolution}"),
            ));
        }
        let v = variance_series(SeriesKind::SpaceIncrement, t, x, y, modes)?.value;
        rows.push((d, v, v / d));
    }
    if rows.is_empty() {
        return Err(Error::Empty("non-degenerate pairs"));
    }
    let c1 = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let c2 = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    let spread = c2 / c1;
    Ok(GspaceReport {
        t,
        rows,
        excluded,
        c1,
        c2,
        spread,
        passed: spread <= GSPACE_MAX_SPREAD,
    })
}
