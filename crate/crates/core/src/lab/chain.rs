use std::f64::consts::PI;

use serde::Serialize;

use super::tau::{tau_sequence, TauReport};
use crate::error::{invalid, Error, Result};
use crate::rng::{Purpose, SeedTree};
use crate::sausage::{sausage_volume_voxel, PointCloud};
use crate::spectral::{SpectralModel, StringState};
use crate::stats::{range_of, PathRecord};
use crate::survival::Trajectory;

/// `E[(Σ_{k≠0}|a_k|²)^{1/2}] ≤ (Σ_{k≠0} 1/(2π²k²))^{1/2} = 1/√6`.
pub const C0_STANDARD: f64 = 0.408_248_290_463_863;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainConstants {
    /// `δ = a/100`.
    pub delta: f64,
    /// `L = E + 3|log a|`.
    pub l: f64,
    pub e_const: f64,
    /// Whether `E` had to be raised above the requested start value.
    pub raised: bool,
}

/// `δ` and `L` for trap radius `a`, raising `E` in unit steps from `e_start`
/// until `4d e^{−2π²L} ≤ δ`, `e^{2π²L} ≥ 8C₀d^{3/2}/δ` and `L ≥ 1` hold.
pub fn chain_constants(dim: usize, a: f64, e_start: f64) -> Result<ChainConstants> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid("a", format!("must lie in (0,1], got {a}")));
    }
    if !e_start.is_finite() {
        return Err(invalid("E", "must be finite"));
    }
    let d = dim as f64;
    let delta = a / 100.0;
    let ok = |l: f64| {
        4.0 * d * (-2.0 * PI * PI * l).exp() <= delta
            && (2.0 * PI * PI * l).exp() >= 8.0 * C0_STANDARD * d.powf(1.5) / delta
            && l >= 1.0
    };
    let mut e_const = e_start;
    for _ in 0..1000 {
        let l = e_const + 3.0 * a.ln().abs();
        if ok(l) {
            return Ok(ChainConstants {
                delta,
                l,
                e_const,
                raised: e_const != e_start,
            });
        }
        e_const += 1.0;
    }
    Err(invalid("E", "no admissible constant found"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainInterval {
    pub s: f64,
    pub t: f64,
    /// `R(G_{S_i − T_{i−1}} * N(T_{i−2}, T_{i−1}))`, the quantity that fixes `S_i`.
    pub smoothed_range: f64,
    /// Its exponential bound `4d e^{−2π²(S_i − T_{i−1})} ‖N − N̄‖₂`.
    pub smoothing_bound: f64,
    pub range_noise: f64,
    pub range_string: f64,
    /// Voxel volume of the radius-`a` sausage around `u(T_i)`.
    pub volume_string: f64,
    /// Voxel volume of the radius-`a/2` sausage around `N(T_{i−1}, T_i)`.
    pub volume_noise: f64,
    /// Combined voxel discretization bound of the two volumes.
    pub volume_tolerance: f64,
    pub range_ok: bool,
    pub volume_ok: bool,
    pub smoothing_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoppingChain {
    pub lambda: f64,
    pub constants: ChainConstants,
    pub tau: TauReport,
    pub s: Vec<f64>,
    pub t_seq: Vec<f64>,
    pub intervals: Vec<ChainInterval>,
    pub violations: usize,
}

impl StoppingChain {
    /// Ordering invariants: `τ` increasing, `T_i ≥ S_i ≥ T_{i−1} + L`, and
    /// `T_i` the first `τ` at or after `S_i`.
    pub fn check_invariants(&self, dt: f64) -> Result<()> {
        let eps = 1e-9 * dt.max(1.0);
        let fail = |msg: String| Err(Error::Unsupported(format!("chain invariant violated: {msg}")));
        if self.tau.times.windows(2).any(|w| !(w[0] < w[1])) {
            return fail("tau not increasing".into());
        }
        let mut prev = 0.0;
        for (i, (&s, &t)) in self.s.iter().zip(&self.t_seq).enumerate() {
            if s < prev + self.constants.l - eps {
                return fail(format!("S_{} = {s} < T_{} + L", i + 1, i));
            }
            if t < s {
                return fail(format!("T_{} = {t} < S_{} = {s}", i + 1, i + 1));
            }
            let first = self.tau.times.iter().find(|&&x| x >= s - eps);
            if first != Some(&t) {
                return fail(format!("T_{} is not the first tau after S_{}", i + 1, i + 1));
            }
            prev = t;
        }
        Ok(())
    }
}

fn fluctuation_range(model: &SpectralModel, state: &StringState) -> Result<f64> {
    range_of(&model.evaluate_fluctuation(state))
}

/// Builds the `S_i`, `T_i` chain on a simulated unit-circle trajectory and
/// evaluates the range and volume comparisons on every completed interval.
/// Stopping times are located on the sampling grid.
pub fn stopping_chain(
    model: &SpectralModel,
    trajectory: &Trajectory,
    lambda: f64,
    constants: &ChainConstants,
) -> Result<StoppingChain> {
    let params = model.params();
    if params.length != 1.0 {
        return Err(Error::Unsupported("the stopping chain is defined on the unit circle".into()));
    }
    if params.dim > 3 {
        return Err(Error::Unsupported("volume checks need d <= 3".into()));
    }
    if !(lambda > 1.0) {
        return Err(invalid("Lambda", format!("must be > 1, got {lambda}")));
    }
    let times = &trajectory.times;
    if times.len() < 2 {
        return Err(Error::InsufficientSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let dt = times[1] - times[0];
    if dt >= constants.l {
        return Err(Error::Resolution(format!(
            "sampling step {dt} cannot locate stopping times separated by L = {}",
            constants.l
        )));
    }
    let path = PathRecord::new(
        times.clone(),
        trajectory.states.iter().map(|s| s.mean.clone()).collect(),
        vec![0.0; times.len()],
    )?;
    let tau = tau_sequence(&path, lambda)?;

    let (a, delta, l, d) = (params.trap_radius, constants.delta, constants.l, params.dim as f64);
    let voxel = a / 8.0;
    let eps = 1e-9 * dt;
    let mut s_seq = Vec::new();
    let mut t_seq = Vec::new();
    let mut intervals = Vec::new();
    let mut prev_idx = 0usize;
    let mut profile = trajectory.states[0].clone();
    loop {
        let t_prev = times[prev_idx];
        let start = times.partition_point(|&t| t < t_prev + l - eps);
        let mut found = None;
        for j in start..times.len() {
            let smoothed = profile.heat_convolve(times[j] - t_prev)?;
            let r = fluctuation_range(model, &smoothed)?;
            if r <= delta {
                found = Some((j, r));
                break;
            }
        }
        let Some((s_idx, smoothed_range)) = found else { break };
        let Some(&t_idx) = tau.indices.iter().find(|&&k| k >= s_idx) else { break };

        let energy: f64 = (0..profile.dim).map(|j| profile.fluctuation_energy(j)).sum();
        let smoothing_bound = 4.0 * d * (-2.0 * PI * PI * (times[s_idx] - t_prev)).exp() * energy.sqrt();

        let noise = model.noise_segment_state(&trajectory.states[prev_idx], &trajectory.states[t_idx])?;
        let noise_samples = model.evaluate_fluctuation(&noise);
        let string_samples = model.evaluate_fluctuation(&trajectory.states[t_idx]);
        let range_noise = range_of(&noise_samples)?;
        let range_string = range_of(&string_samples)?;
        let vs = sausage_volume_voxel(&PointCloud::new(params.dim, string_samples.values)?, a, voxel)?;
        let vn = sausage_volume_voxel(&PointCloud::new(params.dim, noise_samples.values)?, a / 2.0, voxel)?;
        let volume_tolerance = vs.discretization_bound + vn.discretization_bound;
        intervals.push(ChainInterval {
            s: times[s_idx],
            t: times[t_idx],
            smoothed_range,
            smoothing_bound,
            range_noise,
            range_string,
            volume_string: vs.volume,
            volume_noise: vn.volume,
            volume_tolerance,
            range_ok: (range_string - range_noise).abs() <= 2.0 * delta,
            volume_ok: vs.volume + volume_tolerance >= vn.volume,
            smoothing_ok: smoothed_range <= smoothing_bound || times[s_idx] - t_prev < 1.0,
        });
        s_seq.push(times[s_idx]);
        t_seq.push(times[t_idx]);
        profile = noise;
        prev_idx = t_idx;
    }
    let violations = intervals
        .iter()
        .filter(|iv| !(iv.range_ok && iv.volume_ok && iv.smoothing_ok))
        .count();
    Ok(StoppingChain {
        lambda,
        constants: constants.clone(),
        tau,
        s: s_seq,
        t_seq,
        intervals,
        violations,
    })
}

/// Empirical separation scale: the 75% quantile of `R(N(0,L))` over
/// `replicas` strings started from 0, raised to just above 1 if smaller.
pub fn calibrate_lambda(model: &SpectralModel, l: f64, replicas: usize, tree: &SeedTree) -> Result<(f64, f64)> {
    if replicas == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    let mut ranges = Vec::with_capacity(replicas);
    for r in 0..replicas as u64 {
        let mut rng = tree.stream(Purpose::Calibration, r);
        let state = model.evolve(&model.zero_state(), l, &mut rng)?;
        ranges.push(fluctuation_range(model, &state)?);
    }
    ranges.sort_by(f64::total_cmp);
    let pos = 0.75 * (replicas - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let q = ranges[lo] + (pos - lo as f64) * (ranges[hi] - ranges[lo]);
    Ok((q.max(1.0 + 1e-6), q))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfinementReport {
    pub t: f64,
    /// `C₆ a^{4+η}`.
    pub window: f64,
    pub n: usize,
    pub hits: usize,
    pub frequency: f64,
    pub stderr: f64,
}

/// Frequency of the event: `R(N(0,t)) ≤ a/8`, and over `s ≤ C₆a^{4+η}`
/// both `sup_x |N(0,t+s,x) − N(0,t,x)|` and `|X_{t+s} − X_t|` stay below `a/16`.
/// The window is sampled at `substeps` equally spaced times.
pub fn confinement_frequency(
    model: &SpectralModel,
    t: f64,
    c6: f64,
    eta: f64,
    substeps: usize,
    replicas: usize,
    tree: &SeedTree,
) -> Result<ConfinementReport> {
    let a = model.params().trap_radius;
    if !(t > 0.0 && c6 > 0.0 && eta > 0.0 && substeps > 0 && replicas > 0) {
        return Err(invalid("confinement", "t, C6, eta, substeps and replicas must be positive"));
    }
    let window = c6 * a.powf(4.0 + eta);
    let step = model.stepper(window / substeps as f64)?;
    let mut hits = 0usize;
    for r in 0..replicas as u64 {
        let mut rng = tree.stream(Purpose::Diagnostics, r);
        let at_t = model.evolve(&model.zero_state(), t, &mut rng)?;
        if fluctuation_range(model, &at_t)? > a / 8.0 {
            continue;
        }
        let base = model.evaluate(&at_t);
        let mut state = at_t.clone();
        let mut ok = true;
        for _ in 0..substeps {
            step.apply(&mut state, &mut rng);
            let moved = model.evaluate(&state);
            let sup = moved
                .points()
                .zip(base.points())
                .map(|(p, q)| p.iter().zip(q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
                .fold(0.0, f64::max)
                .sqrt();
            let dx = state
                .mean
                .iter()
                .zip(&at_t.mean)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt();
            if sup > a / 16.0 || dx > a / 16.0 {
                ok = false;
                break;
            }
        }
        if ok {
            hits += 1;
        }
    }
    let p = hits as f64 / replicas as f64;
    Ok(ConfinementReport {
        t,
        window,
        n: replicas,
        hits,
        frequency: p,
        stderr: (p * (1.0 - p) / replicas as f64).sqrt(),
    })
}
