//! Exact spectral simulation of the additive-noise stochastic heat equation
//! `∂ₜu = ½∂ₓ²u + Ẇ` on a circle of length `J`, with values in `R^d`.
//!
//! Each coordinate is expanded as
//!
//! ```text
//! u_j(t, x) = b₀ʲ + Σ_{k=1..K} √2 [ b_kʲ cos(2πkx/J) + c_kʲ sin(2πkx/J) ]
//! ```
//!
//! Projecting the white noise onto the orthonormal Fourier basis of `L²[0,J]`
//! turns every retained coefficient into an independent one-dimensional
//! process: `b₀` is a Brownian motion with variance `t/J`, and each `b_k`,
//! `c_k` is an Ornstein–Uhlenbeck process with rate `λ_k = 2π²k²/J²` and
//! noise variance `1/J`. The transition of an OU process is Gaussian and known
//! in closed form, so [`SpectralModel::evolve`] samples the truncated system
//! exactly for any step length.

use std::f64::consts::PI;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::series::inverse_square_tail;

/// Trap potential shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PotentialKind {
    /// `H = ∞ · 1_{B(0,a)}`: contact kills.
    Hard,
    /// `H = height · 1_{B(0,a)}`.
    SoftIndicator { height: f64 },
}

/// Physical and numerical parameters of one model configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Dimension `d` of the target space.
    pub dim: usize,
    /// Circle length `J`.
    pub length: f64,
    /// Trap intensity `ν`.
    pub intensity: f64,
    /// Trap radius `a`.
    pub trap_radius: f64,
    pub potential: PotentialKind,
    /// Mode cutoff `K`.
    pub modes: usize,
    /// Spatial grid size `M`.
    pub grid: usize,
    /// Sampling interval for geometry and trap checks.
    pub dt: f64,
    /// Horizon `T`.
    pub horizon: f64,
    /// Upper bound on the neglected stationary variance per real mode,
    /// `Σ_{k>K} 1/(4π²k²)`.
    pub tail_tolerance: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            dim: 2,
            length: 1.0,
            intensity: 1.0,
            trap_radius: 0.3,
            potential: PotentialKind::Hard,
            modes: 64,
            grid: 256,
            dt: 1.0 / 256.0,
            horizon: 1.0,
            tail_tolerance: 5e-3,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(self.length.is_finite() && self.length >= 1.0) {
            return Err(invalid("J", format!("must be >= 1, got {}", self.length)));
        }
        if !(self.intensity.is_finite() && self.intensity >= 0.0) {
            return Err(invalid("nu", format!("must be >= 0, got {}", self.intensity)));
        }
        if !(self.trap_radius > 0.0 && self.trap_radius <= 1.0) {
            return Err(invalid("a", format!("must lie in (0, 1], got {}", self.trap_radius)));
        }
        if let PotentialKind::SoftIndicator { height } = self.potential {
            if !(height.is_finite() && height >= 0.0) {
                return Err(invalid("height", format!("must be finite and >= 0, got {height}")));
            }
        }
        if self.modes == 0 {
            return Err(invalid("K", "must be at least 1"));
        }
        if self.grid < 2 * self.modes + 1 {
            return Err(invalid(
                "M",
                format!("grid {} cannot resolve {} modes (need M >= 2K+1)", self.grid, self.modes),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(invalid("T", format!("must be >= 0, got {}", self.horizon)));
        }
        let tail = tail_variance(self.modes);
        if tail >= self.tail_tolerance {
            return Err(invalid(
                "K",
                format!(
                    "neglected mode variance {tail:.3e} exceeds tolerance {:.3e}",
                    self.tail_tolerance
                ),
            ));
        }
        Ok(())
    }

    /// Number of sampling intervals and their common length covering `[0, T]`.
    pub fn time_steps(&self) -> (usize, f64) {
        time_grid(self.horizon, self.dt)
    }

    /// Short label of the numerical resolution, used in result files.
    pub fn resolution_tag(&self) -> String {
        format!("K{}-M{}-dt{}", self.modes, self.grid, self.dt)
    }
}

/// `Σ_{k>K} 1/(4π²k²)`, the stationary variance dropped per real mode pair.
pub fn tail_variance(modes: usize) -> f64 {
    inverse_square_tail(modes) / (4.0 * PI * PI)
}

/// Splits `[0, horizon]` into the fewest equal steps no longer than `dt`.
pub fn time_grid(horizon: f64, dt: f64) -> (usize, f64) {
    if horizon <= 0.0 {
        return (0, 0.0);
    }
    let n = (horizon / dt - 1e-9).ceil().max(1.0) as usize;
    (n, horizon / n as f64)
}

/// Mean-reversion rate of mode `k` on a circle of length `length`.
pub fn eigenvalue(k: usize, length: f64) -> f64 {
    2.0 * PI * PI * (k * k) as f64 / (length * length)
}

/// Values of a `R^d`-valued function at `M` equally spaced points of `[0, J)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSamples {
    pub length: f64,
    pub dim: usize,
    /// Row-major `M × d`.
    pub values: Vec<f64>,
}

impl FieldSamples {
    pub fn new(length: f64, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: values.len(),
            });
        }
        Ok(Self { length, dim, values })
    }

    /// Samples `f` at `x_m = mJ/M`.
    pub fn from_fn(length: f64, dim: usize, grid: usize, f: impl Fn(f64) -> Vec<f64>) -> Self {
        let mut values = Vec::with_capacity(grid * dim);
        for m in 0..grid {
            let v = f(m as f64 * length / grid as f64);
            assert_eq!(v.len(), dim, "profile returned wrong dimension");
            values.extend(v);
        }
        Self { length, dim, values }
    }

    pub fn grid_len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn grid_points(&self) -> Vec<f64> {
        let m = self.grid_len();
        (0..m).map(|i| i as f64 * self.length / m as f64).collect()
    }

    pub fn point(&self, m: usize) -> &[f64] {
        &self.values[m * self.dim..(m + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Pointwise difference `self − other`.
    pub fn sub(&self, other: &FieldSamples) -> Result<FieldSamples> {
        if self.values.len() != other.values.len() || self.dim != other.dim {
            return Err(Error::GridMismatch {
                expected: self.values.len(),
                actual: other.values.len(),
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(FieldSamples {
            length: self.length,
            dim: self.dim,
            values,
        })
    }
}

/// Fourier coefficients of the string at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StringState {
    pub t: f64,
    pub length: f64,
    pub dim: usize,
    pub modes: usize,
    /// `b₀ʲ`, one per coordinate.
    pub mean: Vec<f64>,
    /// `b_kʲ` at index `j*K + (k-1)`.
    pub cos: Vec<f64>,
    /// `c_kʲ` at index `j*K + (k-1)`.
    pub sin: Vec<f64>,
}

impl StringState {
    pub fn zero(dim: usize, modes: usize, length: f64) -> Self {
        Self {
            t: 0.0,
            length,
            dim,
            modes,
            mean: vec![0.0; dim],
            cos: vec![0.0; dim * modes],
            sin: vec![0.0; dim * modes],
        }
    }

    /// A string sitting at one point of `R^d`.
    pub fn constant(point: &[f64], modes: usize, length: f64) -> Self {
        let mut s = Self::zero(point.len(), modes, length);
        s.mean.copy_from_slice(point);
        s
    }

    #[inline]
    pub fn idx(&self, coord: usize, k: usize) -> usize {
        debug_assert!(k >= 1 && k <= self.modes);
        coord * self.modes + (k - 1)
    }

    pub fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(&self.cos)
            .chain(&self.sin)
            .all(|v| v.is_finite())
    }

    /// `Σ_k (b_kʲ² + c_kʲ²)` for coordinate `j`: the mean-square fluctuation
    /// of `u_j` about its spatial mean.
    pub fn fluctuation_energy(&self, coord: usize) -> f64 {
        let r = coord * self.modes..(coord + 1) * self.modes;
        self.cos[r.clone()]
            .iter()
            .chain(&self.sin[r])
            .map(|v| v * v)
            .sum()
    }

    /// Same state with every `k ≥ 1` mode scaled by `e^{−λ_k Δ}`; time is
    /// left unchanged.
    pub fn heat_convolve(&self, delta: f64) -> Result<StringState> {
        if !(delta >= 0.0) {
            return Err(invalid("delta", format!("must be >= 0, got {delta}")));
        }
        let mut out = self.clone();
        for k in 1..=self.modes {
            let decay = (-eigenvalue(k, self.length) * delta).exp();
            for j in 0..self.dim {
                let i = self.idx(j, k);
                out.cos[i] *= decay;
                out.sin[i] *= decay;
            }
        }
        Ok(out)
    }

    /// Coefficientwise `self − other`, stamped with `self.t`.
    pub fn sub(&self, other: &StringState) -> Result<StringState> {
        if self.dim != other.dim || self.modes != other.modes {
            return Err(Error::DimensionMismatch {
                expected: self.dim * (2 * self.modes + 1),
                actual: other.dim * (2 * other.modes + 1),
            });
        }
        let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x - y).collect();
        Ok(StringState {
            t: self.t,
            length: self.length,
            dim: self.dim,
            modes: self.modes,
            mean: diff(&self.mean, &other.mean),
            cos: diff(&self.cos, &other.cos),
            sin: diff(&self.sin, &other.sin),
        })
    }
}

/// Precomputed one-step OU transition for a fixed step length.
#[derive(Debug, Clone)]
pub struct OuStep {
    pub delta: f64,
    decay: Vec<f64>,
    std: Vec<f64>,
    mean_std: f64,
}

impl OuStep {
    pub fn new(modes: usize, length: f64, delta: f64) -> Result<Self> {
        Self::with_noise(modes, length, delta, 1.0)
    }

    /// `noise_scale = 0` gives the deterministic heat flow.
    pub fn with_noise(modes: usize, length: f64, delta: f64, noise_scale: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("must be > 0, got {delta}")));
        }
        let mut decay = Vec::with_capacity(modes);
        let mut std = Vec::with_capacity(modes);
        for k in 1..=modes {
            let lambda = eigenvalue(k, length);
            decay.push((-lambda * delta).exp());
            // (1 − e^{−2λΔ}) / (2λ), written with exp_m1 for small λΔ
            let var = -(-2.0 * lambda * delta).exp_m1() / (2.0 * lambda) / length;
            std.push(noise_scale * var.sqrt());
        }
        Ok(Self {
            delta,
            decay,
            std,
            mean_std: noise_scale * (delta / length).sqrt(),
        })
    }

    pub fn apply<R: Rng + ?Sized>(&self, state: &mut StringState, rng: &mut R) {
        let modes = state.modes;
        debug_assert_eq!(modes, self.decay.len());
        for j in 0..state.dim {
            let z: f64 = rng.sample(StandardNormal);
            state.mean[j] += self.mean_std * z;
            let base = j * modes;
            for k in 0..modes {
                let zc: f64 = rng.sample(StandardNormal);
                let zs: f64 = rng.sample(StandardNormal);
                let i = base + k;
                state.cos[i] = self.decay[k] * state.cos[i] + self.std[k] * zc;
                state.sin[i] = self.decay[k] * state.sin[i] + self.std[k] * zs;
            }
        }
        state.t += self.delta;
    }
}

/// Cos/sin tables `√2 cos(2πk x_m / J)`, `√2 sin(2πk x_m / J)`.
#[derive(Debug, Clone)]
struct Basis {
    grid: usize,
    modes: usize,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl Basis {
    fn new(modes: usize, grid: usize) -> Self {
        let mut cos = Vec::with_capacity(grid * modes);
        let mut sin = Vec::with_capacity(grid * modes);
        for m in 0..grid {
            for k in 1..=modes {
                // reduce the phase exactly before scaling to keep tables symmetric
                let phase = 2.0 * PI * ((k * m) % grid) as f64 / grid as f64;
                cos.push(std::f64::consts::SQRT_2 * phase.cos());
                sin.push(std::f64::consts::SQRT_2 * phase.sin());
            }
        }
        Self {
            grid,
            modes,
            cos,
            sin,
        }
    }
}

/// A validated configuration together with its evaluation tables.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    params: ModelParams,
    basis: Basis,
}

impl SpectralModel {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        let basis = Basis::new(params.modes, params.grid);
        Ok(Self { params, basis })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn zero_state(&self) -> StringState {
        StringState::zero(self.params.dim, self.params.modes, self.params.length)
    }

    /// Truncated discrete Fourier transform of a sampled initial profile.
    pub fn init_from_profile(&self, profile: &FieldSamples) -> Result<StringState> {
        let (dim, grid, modes) = (self.params.dim, self.params.grid, self.params.modes);
        if profile.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: profile.dim,
            });
        }
        if profile.grid_len() != grid {
            return Err(Error::GridMismatch {
                expected: grid,
                actual: profile.grid_len(),
            });
        }
        if !profile.is_finite() {
            return Err(Error::NonFinite("initial profile"));
        }
        let mut state = self.zero_state();
        let inv = 1.0 / grid as f64;
        for m in 0..grid {
            let row = profile.point(m);
            let cos_row = &self.basis.cos[m * modes..(m + 1) * modes];
            let sin_row = &self.basis.sin[m * modes..(m + 1) * modes];
            for (j, &v) in row.iter().enumerate() {
                state.mean[j] += v * inv;
                let base = j * modes;
                for k in 0..modes {
                    state.cos[base + k] += v * cos_row[k] * inv;
                    state.sin[base + k] += v * sin_row[k] * inv;
                }
            }
        }
        Ok(state)
    }

    /// Exact transition over `delta` for every retained mode.
    pub fn evolve<R: Rng + ?Sized>(
        &self,
        state: &StringState,
        delta: f64,
        rng: &mut R,
    ) -> Result<StringState> {
        let step = OuStep::new(state.modes, state.length, delta)?;
        let mut next = state.clone();
        step.apply(&mut next, rng);
        Ok(next)
    }

    /// Stepper for the configured sampling interval `delta`.
    pub fn stepper(&self, delta: f64) -> Result<OuStep> {
        OuStep::new(self.params.modes, self.params.length, delta)
    }

    pub fn evaluate(&self, state: &StringState) -> FieldSamples {
        self.evaluate_inner(state, true)
    }

    /// Evaluation with the spatial mean dropped. Ranges and other
    /// translation-invariant quantities are computed from this so that tiny
    /// fluctuations are not lost against a large mean.
    pub fn evaluate_fluctuation(&self, state: &StringState) -> FieldSamples {
        self.evaluate_inner(state, false)
    }

    fn evaluate_inner(&self, state: &StringState, with_mean: bool) -> FieldSamples {
        let (dim, grid, modes) = (state.dim, self.basis.grid, self.basis.modes);
        debug_assert_eq!(state.modes, modes);
        let mut values = vec![0.0; grid * dim];
        for m in 0..grid {
            let cos_row = &self.basis.cos[m * modes..(m + 1) * modes];
            let sin_row = &self.basis.sin[m * modes..(m + 1) * modes];
            for j in 0..dim {
                let b = &state.cos[j * modes..(j + 1) * modes];
                let c = &state.sin[j * modes..(j + 1) * modes];
                let mut acc = 0.0;
                for k in 0..modes {
                    acc += b[k] * cos_row[k] + c[k] * sin_row[k];
                }
                values[m * dim + j] = if with_mean { acc + state.mean[j] } else { acc };
            }
        }
        FieldSamples {
            length: state.length,
            dim,
            values,
        }
    }

    /// `G_Δ * f` for sampled `f`, restricted to the retained band.
    pub fn heat_convolve_samples(&self, samples: &FieldSamples, delta: f64) -> Result<FieldSamples> {
        let state = self.init_from_profile(samples)?;
        Ok(self.evaluate(&state.heat_convolve(delta)?))
    }

    /// Coefficients of `N(s,t) = u(t) − G_{t−s} * u(s)`.
    pub fn noise_segment_state(&self, from: &StringState, to: &StringState) -> Result<StringState> {
        if !(from.t < to.t) {
            return Err(Error::TimeOrder {
                earlier: from.t,
                later: to.t,
            });
        }
        to.sub(&from.heat_convolve(to.t - from.t)?)
    }

    /// `N(s,t)` sampled on the grid.
    pub fn noise_segment(&self, from: &StringState, to: &StringState) -> Result<FieldSamples> {
        Ok(self.evaluate(&self.noise_segment_state(from, to)?))
    }

    /// One draw of the stationary field `N⁽¹⁾(t; ·, 0)`: each mode at its
    /// stationary law, mode 0 absent, anchored to vanish at `x = 0`.
    pub fn sample_stationary_field<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldSamples {
        let mut state = self.zero_state();
        let length = self.params.length;
        for j in 0..state.dim {
            for k in 1..=state.modes {
                let sd = (1.0 / (2.0 * eigenvalue(k, length) * length)).sqrt();
                let i = state.idx(j, k);
                state.cos[i] = sd * rng.sample::<f64, _>(StandardNormal);
                state.sin[i] = sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let mut field = self.evaluate_fluctuation(&state);
        let dim = field.dim;
        let anchor: Vec<f64> = field.values[..dim].to_vec();
        for row in field.values.chunks_exact_mut(dim) {
            for (v, a) in row.iter_mut().zip(&anchor) {
                *v -= a;
            }
        }
        field
    }
}

/// Which variance series to evaluate (unit circle).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `Var u_j(t, x)` from zero initial data.
    U,
    /// `Var N⁽²⁾_j(t; x, y)`, the part of `N(t;x,y)` driven by noise before 0.
    N2,
    /// `Var N⁽¹⁾_j(t; x, y)`, the stationary part.
    N1Diff,
    /// `∫₀ᵗ∫[G(s,x,z) − G(s,y,z)]² dz ds = Var[N_j(0,t;x) − N_j(0,t;y)]`.
    SpaceIncrement,
}

impl FromStr for SeriesKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "u" => Ok(Self::U),
            "n2" => Ok(Self::N2),
            "n1diff" | "n1" => Ok(Self::N1Diff),
            "space" | "space_increment" | "gspace" => Ok(Self::SpaceIncrement),
            other => Err(invalid("kind", format!("unknown series kind `{other}`"))),
        }
    }
}

/// A truncated series and a bound on what the truncation dropped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesValue {
    pub value: f64,
    pub tail_bound: f64,
}

/// Per-coordinate variance series on the unit circle, truncated at `modes`.
///
/// In the real basis each retained mode `k ≥ 1` contributes
/// `w_k(t) · |1 − e^{2πik(x−y)}|² / λ_k` to a difference at `x, y`, where
/// `w_k = 1 − e^{−2λ_k t}` for noise on `[0,t]`, `e^{−2λ_k t}` for noise before
/// time 0, and `1` at stationarity.
pub fn variance_series(kind: SeriesKind, t: f64, x: f64, y: f64, modes: usize) -> Result<SeriesValue> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("must be >= 0, got {t}")));
    }
    for (name, p) in [("x", x), ("y", y)] {
        if !(0.0..1.0).contains(&p) {
            return Err(invalid(name, format!("must lie in [0,1), got {p}")));
        }
    }
    let h = x - y;
    let mut value = if kind == SeriesKind::U { t } else { 0.0 };
    for k in 1..=modes {
        let lambda = eigenvalue(k, 1.0);
        let weight = match kind {
            SeriesKind::U | SeriesKind::SpaceIncrement => -(-2.0 * lambda * t).exp_m1(),
            SeriesKind::N2 => (-2.0 * lambda * t).exp(),
            SeriesKind::N1Diff => 1.0,
        };
        let geometry = match kind {
            SeriesKind::U => 1.0,
            // |1 − e^{iθ}|² = 4 sin²(θ/2)
            _ => 4.0 * (PI * k as f64 * h).sin().powi(2),
        };
        value += weight * geometry / lambda;
    }
    let inv_tail = inverse_square_tail(modes) / (2.0 * PI * PI);
    let tail_bound = match kind {
        SeriesKind::U => inv_tail,
        SeriesKind::N2 => 4.0 * inv_tail * (-2.0 * eigenvalue(modes + 1, 1.0) * t).exp(),
        SeriesKind::N1Diff | SeriesKind::SpaceIncrement => 4.0 * inv_tail,
    };
    Ok(SeriesValue { value, tail_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeedTree};
    use std::f64::consts::SQRT_2;

    fn params(dim: usize, modes: usize, grid: usize) -> ModelParams {
        ModelParams {
            dim,
            modes,
            grid,
            tail_tolerance: 1.0,
            ..ModelParams::default()
        }
    }

    fn model(dim: usize, modes: usize, grid: usize) -> SpectralModel {
        SpectralModel::new(params(dim, modes, grid)).unwrap()
    }

    #[test]
    fn validate_rejects_coarse_grid_and_bad_values() {
        assert!(SpectralModel::new(params(1, 8, 16)).is_err());
        assert!(SpectralModel::new(params(1, 8, 17)).is_ok());
        let mut p = params(1, 8, 17);
        p.length = 0.5;
        assert!(p.validate().is_err());
        let mut p = params(1, 8, 17);
        p.trap_radius = 1.5;
        assert!(p.validate().is_err());
        let mut p = params(1, 8, 17);
        p.tail_tolerance = 1e-4;
        assert!(p.validate().is_err());
    }

    #[test]
    fn tail_variance_at_default_cutoff() {
        // Σ_{k>64} 1/(4π²k²) ≈ 3.92e-4; the pointwise dropped variance is twice that.
        let tail = tail_variance(64);
        assert!((tail - 3.9272e-4).abs() < 1e-7, "{tail}");
        assert!(tail < ModelParams::default().tail_tolerance);
    }

    #[test]
    fn init_zero_constant_and_single_mode() {
        let m = model(2, 8, 32);
        let zero = FieldSamples::from_fn(1.0, 2, 32, |_| vec![0.0, 0.0]);
        let s = m.init_from_profile(&zero).unwrap();
        assert!(s.mean.iter().chain(&s.cos).chain(&s.sin).all(|&v| v == 0.0));

        let three = FieldSamples::from_fn(1.0, 2, 32, |_| vec![3.0, 3.0]);
        let s = m.init_from_profile(&three).unwrap();
        assert!(s.mean.iter().all(|&v| (v - 3.0).abs() < 1e-14));
        assert!(s.cos.iter().chain(&s.sin).all(|&v| v.abs() < 1e-14));

        let cosine =
            FieldSamples::from_fn(1.0, 2, 32, |x| vec![SQRT_2 * (2.0 * PI * x).cos(), 0.0]);
        let s = m.init_from_profile(&cosine).unwrap();
        for j in 0..2 {
            for k in 1..=8 {
                let want = if j == 0 && k == 1 { 1.0 } else { 0.0 };
                assert!((s.cos[s.idx(j, k)] - want).abs() < 1e-13);
                assert!(s.sin[s.idx(j, k)].abs() < 1e-13);
            }
        }
    }

    #[test]
    fn init_rejects_bad_profiles() {
        let m = model(1, 4, 16);
        let short = FieldSamples::from_fn(1.0, 1, 15, |_| vec![0.0]);
        assert!(matches!(m.init_from_profile(&short), Err(Error::GridMismatch { .. })));
        let mut nan = FieldSamples::from_fn(1.0, 1, 16, |_| vec![0.0]);
        nan.values[3] = f64::NAN;
        assert!(matches!(m.init_from_profile(&nan), Err(Error::NonFinite(_))));
    }

    #[test]
    fn evaluate_examples() {
        let m = model(1, 4, 64);
        let mut s = m.zero_state();
        assert!(m.evaluate(&s).values.iter().all(|&v| v == 0.0));
        s.mean[0] = 5.0;
        assert!(m.evaluate(&s).values.iter().all(|&v| v == 5.0));
        let mut s = m.zero_state();
        let i = s.idx(0, 1);
        s.cos[i] = 1.0;
        let f = m.evaluate(&s);
        let max = f.values.iter().cloned().fold(f64::MIN, f64::max);
        assert!((max - SQRT_2).abs() < 1e-14);
        for (x, v) in f.grid_points().iter().zip(&f.values) {
            assert!((v - SQRT_2 * (2.0 * PI * x).cos()).abs() < 1e-13);
        }
    }

    #[test]
    fn evolve_rejects_nonpositive_delta() {
        let m = model(1, 4, 16);
        let mut rng = SeedTree::new(1).stream(Purpose::Noise, 0);
        assert!(m.evolve(&m.zero_state(), 0.0, &mut rng).is_err());
        assert!(m.evolve(&m.zero_state(), -1.0, &mut rng).is_err());
    }

    #[test]
    fn deterministic_decay_of_first_mode() {
        let m = model(1, 4, 16);
        let mut s = m.zero_state();
        let i = s.idx(0, 1);
        s.cos[i] = 1.0;
        let step = OuStep::with_noise(4, 1.0, 0.1, 0.0).unwrap();
        let mut rng = SeedTree::new(1).stream(Purpose::Noise, 0);
        step.apply(&mut s, &mut rng);
        // e^{-2π²·0.1} = 0.1389111...
        assert!((s.cos[i] - 0.138_911_133).abs() < 1e-9, "{}", s.cos[i]);
        assert!((s.t - 0.1).abs() < 1e-15);
    }

    #[test]
    fn deterministic_semigroup() {
        let m = model(2, 6, 16);
        let mut rng = SeedTree::new(3).stream(Purpose::Noise, 0);
        let start = m.evolve(&m.zero_state(), 0.05, &mut rng).unwrap();
        let mut a = start.clone();
        OuStep::with_noise(6, 1.0, 0.013, 0.0).unwrap().apply(&mut a, &mut rng);
        OuStep::with_noise(6, 1.0, 0.021, 0.0).unwrap().apply(&mut a, &mut rng);
        let mut b = start.clone();
        OuStep::with_noise(6, 1.0, 0.034, 0.0).unwrap().apply(&mut b, &mut rng);
        for (x, y) in a.cos.iter().chain(&a.sin).zip(b.cos.iter().chain(&b.sin)) {
            assert!((x - y).abs() <= 1e-12 * y.abs().max(1e-300), "{x} vs {y}");
        }
    }

    #[test]
    fn heat_convolve_examples() {
        let m = model(1, 4, 64);
        let mut s = m.zero_state();
        let i = s.idx(0, 1);
        s.cos[i] = 1.0;
        s.mean[0] = 2.0;
        assert_eq!(s.heat_convolve(0.0).unwrap(), s);
        let g = s.heat_convolve(1.0).unwrap();
        assert!((g.cos[i] - 2.675_287e-9).abs() < 1e-14);
        assert_eq!(g.mean[0], 2.0);
        assert!(s.heat_convolve(-0.1).is_err());
        let twice = s.heat_convolve(0.3).unwrap().heat_convolve(0.4).unwrap();
        let once = s.heat_convolve(0.7).unwrap();
        assert!((twice.cos[i] - once.cos[i]).abs() <= 1e-12 * once.cos[i]);
    }

    #[test]
    fn heat_convolve_samples_keeps_constants() {
        let m = model(1, 4, 16);
        let c = FieldSamples::from_fn(1.0, 1, 16, |_| vec![1.5]);
        let out = m.heat_convolve_samples(&c, 0.25).unwrap();
        assert!(out.values.iter().all(|v| (v - 1.5).abs() < 1e-14));
    }

    #[test]
    fn noise_segment_examples() {
        let m = model(2, 4, 16);
        let mut rng = SeedTree::new(5).stream(Purpose::Noise, 0);
        let s0 = m.evolve(&m.zero_state(), 0.2, &mut rng).unwrap();
        let mut s1 = s0.clone();
        OuStep::with_noise(4, 1.0, 0.3, 0.0).unwrap().apply(&mut s1, &mut rng);
        let n = m.noise_segment(&s0, &s1).unwrap();
        assert!(n.values.iter().all(|v| v.abs() < 1e-14));

        let z = m.zero_state();
        let s = m.evolve(&z, 0.5, &mut rng).unwrap();
        assert_eq!(m.noise_segment(&z, &s).unwrap(), m.evaluate(&s));
        assert!(matches!(m.noise_segment(&s, &z), Err(Error::TimeOrder { .. })));
    }

    #[test]
    fn parseval_on_grid() {
        let m = model(2, 8, 40);
        let mut rng = SeedTree::new(9).stream(Purpose::Noise, 0);
        let s = m.evolve(&m.zero_state(), 1.0, &mut rng).unwrap();
        let f = m.evaluate(&s);
        for j in 0..2 {
            let quad: f64 = f
                .points()
                .map(|p| (p[j] - s.mean[j]).powi(2))
                .sum::<f64>()
                / 40.0;
            assert!((quad - s.fluctuation_energy(j)).abs() < 1e-12);
        }
    }

    #[test]
    fn stationary_field_is_anchored() {
        let m = model(3, 16, 64);
        let mut rng = SeedTree::new(2).stream(Purpose::Noise, 0);
        let f = m.sample_stationary_field(&mut rng);
        assert_eq!(f.point(0), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn series_examples() {
        let u = variance_series(SeriesKind::U, 1.0, 0.3, 0.0, 20_000).unwrap();
        assert!((u.value - (1.0 + 1.0 / 12.0)).abs() < 1e-5);
        let n2 = variance_series(SeriesKind::N2, 1.0, 0.5, 0.0, 64).unwrap();
        let two_term = 2.0 * (-4.0 * PI * PI).exp() / (PI * PI);
        assert!((n2.value - two_term).abs() < 1e-20);
        let same = variance_series(SeriesKind::N2, 1.0, 0.25, 0.25, 64).unwrap();
        assert_eq!(same.value, 0.0);
        assert!(variance_series(SeriesKind::U, -1.0, 0.0, 0.0, 4).is_err());
        assert!(variance_series(SeriesKind::U, 1.0, 1.0, 0.0, 4).is_err());
        assert!("bogus".parse::<SeriesKind>().is_err());
    }

    #[test]
    fn stationary_difference_is_bridge_variance() {
        // Σ_k (1 − cos 2πkh)/(π²k²) = h(1−h)
        for &h in &[0.5, 0.25, 0.1, 1.0 / 128.0] {
            let s = variance_series(SeriesKind::N1Diff, 0.0, h, 0.0, 200_000).unwrap();
            assert!((s.value - h * (1.0 - h)).abs() < 2e-6, "{h}: {}", s.value);
            assert!((s.value - h * (1.0 - h)).abs() <= s.tail_bound);
        }
    }
}
