use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::chain::{calibrate_lambda, chain_constants, stopping_chain};
use super::smoothing::{gspace_ratio, range_smoothing_check, GspaceReport};
use crate::error::Result;
use crate::rng::{Purpose, SeedTree};
use crate::sausage::{box_counting_dimension, dyadic_scales, BoxCountReport, PointCloud};
use crate::spectral::{FieldSamples, ModelParams, SpectralModel};
use crate::stats::{center_of_mass, independence_test, ks_standard_normal, mean_var, radius, IndependenceReport, KsReport};
use crate::survival::simulate_trajectory;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrownianReport {
    pub delta: f64,
    pub n: usize,
    /// Sample variance of `X_{t₀+Δ} − X_{t₀}` per coordinate.
    pub variances: Vec<f64>,
    /// Expected variance `Δ/J`.
    pub expected: f64,
    pub variance_stderr: f64,
    pub variance_ok: bool,
    /// Normalized first-coordinate increments against `N(0,1)`.
    pub ks: KsReport,
}

/// Increments of the centre of mass over `Δ` after a burn-in `t₀`, one per
/// replica, compared with a Brownian motion of variance `Δ/J`.
pub fn center_of_mass_test(model: &SpectralModel, burn_in: f64, delta: f64, n: usize, tree: &SeedTree) -> Result<BrownianReport> {
    let incs: Vec<Vec<f64>> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = tree.stream(Purpose::Diagnostics, r);
            let mut s = model.zero_state();
            if burn_in > 0.0 {
                s = model.evolve(&s, burn_in, &mut rng)?;
            }
            let x0 = center_of_mass(&s);
            let s1 = model.evolve(&s, delta, &mut rng)?;
            Ok(center_of_mass(&s1).iter().zip(&x0).map(|(a, b)| a - b).collect())
        })
        .collect::<Result<_>>()?;
    let dim = model.params().dim;
    let expected = delta / model.params().length;
    let variances: Vec<f64> = (0..dim)
        .map(|j| mean_var(&incs.iter().map(|v| v[j]).collect::<Vec<_>>()).1)
        .collect();
    let variance_stderr = expected * (2.0 / (n as f64 - 1.0)).sqrt();
    let variance_ok = variances.iter().all(|v| (v - expected).abs() <= 4.0 * variance_stderr);
    let normalized: Vec<f64> = incs.iter().map(|v| v[0] / expected.sqrt()).collect();
    Ok(BrownianReport {
        delta,
        n,
        variances,
        expected,
        variance_stderr,
        variance_ok,
        ks: ks_standard_normal(&normalized)?,
    })
}

/// `(X_T, R_T)` for `n` strings started from 0, each sampled with one exact
/// transition, then the correlation test.
pub fn independence_run(model: &SpectralModel, horizon: f64, n: usize, tree: &SeedTree) -> Result<IndependenceReport> {
    let reps: Vec<(Vec<f64>, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = tree.stream(Purpose::Diagnostics, r);
            let s = model.evolve(&model.zero_state(), horizon, &mut rng)?;
            Ok((center_of_mass(&s), radius(model, &s)))
        })
        .collect::<Result<_>>()?;
    independence_test(&reps)
}

/// Number of random band-limited profiles, out of `n`, for which the
/// smoothing inequality holds at every `t` in `times`.
pub fn smoothing_sweep(dim: usize, modes: usize, grid: usize, times: &[f64], n: usize, tree: &SeedTree) -> Result<usize> {
    let mut held = 0;
    for r in 0..n as u64 {
        let mut rng = tree.stream(Purpose::Diagnostics, r);
        let amp: Vec<f64> = (0..dim * (2 * modes + 1)).map(|_| rng.sample(StandardNormal)).collect();
        let f = FieldSamples::from_fn(1.0, dim, grid, |x| {
            (0..dim)
                .map(|j| {
                    let base = j * (2 * modes + 1);
                    let mut v = amp[base];
                    for k in 1..=modes {
                        let th = 2.0 * std::f64::consts::PI * k as f64 * x;
                        v += amp[base + 2 * k - 1] * th.cos() + amp[base + 2 * k] * th.sin();
                    }
                    v
                })
                .collect()
        });
        let mut ok = true;
        for &t in times {
            ok &= range_smoothing_check(&f, t, modes)?.holds;
        }
        if ok {
            held += 1;
        }
    }
    Ok(held)
}

/// Box-counting slope of one stationary field draw `N⁽¹⁾(t;·,0)`.
pub fn stationary_box_count(dim: usize, modes: usize, grid: usize, scales: &[f64], tree: &SeedTree) -> Result<BoxCountReport> {
    let model = SpectralModel::new(ModelParams {
        dim,
        modes,
        grid,
        ..ModelParams::default()
    })?;
    let mut rng = tree.stream(Purpose::Diagnostics, 0);
    let field = model.sample_stationary_field(&mut rng);
    box_counting_dimension(&PointCloud::new(dim, field.values)?, scales)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSummary {
    pub runs: usize,
    pub lambda: f64,
    pub delta: f64,
    pub l: f64,
    pub intervals: usize,
    pub violations: usize,
    pub invariant_failures: usize,
}

/// Stopping chains on `runs` independent unit-circle trajectories.
pub fn chain_runs(params: &ModelParams, runs: usize, tree: &SeedTree) -> Result<ChainSummary> {
    let model = SpectralModel::new(params.clone())?;
    let constants = chain_constants(params.dim, params.trap_radius, 1.0)?;
    let (lambda, _) = calibrate_lambda(&model, constants.l, 1000, &tree.fork(1))?;
    let (_, dt) = params.time_steps();
    let results: Vec<(usize, usize, bool)> = (0..runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = tree.stream(Purpose::Noise, r);
            let traj = simulate_trajectory(&model, &model.zero_state(), &mut rng)?;
            let chain = stopping_chain(&model, &traj, lambda, &constants)?;
            Ok((chain.intervals.len(), chain.violations, chain.check_invariants(dt).is_ok()))
        })
        .collect::<Result<_>>()?;
    Ok(ChainSummary {
        runs,
        lambda,
        delta: constants.delta,
        l: constants.l,
        intervals: results.iter().map(|r| r.0).sum(),
        violations: results.iter().map(|r| r.1).sum(),
        invariant_failures: results.iter().filter(|r| !r.2).count(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsReport {
    pub brownian: BrownianReport,
    pub independence: IndependenceReport,
    pub smoothing_held: usize,
    pub smoothing_total: usize,
    pub gspace: GspaceReport,
    pub box_count: BoxCountReport,
    pub chain: ChainSummary,
}

/// Sizes for [`run_diagnostics`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsOptions {
    pub dim: usize,
    pub modes: usize,
    pub grid: usize,
    pub replicas: usize,
    pub box_modes: usize,
    pub box_grid: usize,
    pub chain_runs: usize,
    pub chain_horizon: f64,
    pub trap_radius: f64,
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        Self {
            dim: 2,
            modes: 16,
            grid: 64,
            replicas: 5000,
            box_modes: 256,
            box_grid: 16384,
            chain_runs: 20,
            chain_horizon: 40.0,
            trap_radius: 0.3,
        }
    }
}

/// Centre-of-mass law, independence, smoothing, space-increment ratios,
/// box counting and stopping chains in one report.
pub fn run_diagnostics(opts: &DiagnosticsOptions, tree: &SeedTree) -> Result<DiagnosticsReport> {
    let params = ModelParams {
        dim: opts.dim,
        modes: opts.modes,
        grid: opts.grid,
        trap_radius: opts.trap_radius,
        ..ModelParams::default()
    };
    let model = SpectralModel::new(params.clone())?;
    let brownian = center_of_mass_test(&model, 1.0, 0.1, opts.replicas, &tree.fork(1))?;
    let independence = independence_run(&model, 1.0, opts.replicas, &tree.fork(2))?;
    let smoothing_total = 100;
    let smoothing_held = smoothing_sweep(opts.dim, opts.modes, opts.grid, &[1.0, 2.0], smoothing_total, &tree.fork(3))?;
    let pairs: Vec<(f64, f64)> = (1..=7).map(|k| (2f64.powi(-k), 0.0)).collect();
    let gspace = gspace_ratio(1.0, &pairs, 4096)?;
    let box_count = stationary_box_count(3, opts.box_modes, opts.box_grid, &dyadic_scales(1, 6), &tree.fork(4))?;
    let chain_params = ModelParams {
        horizon: opts.chain_horizon,
        dt: 1.0 / 32.0,
        ..params
    };
    let chain = chain_runs(&chain_params, opts.chain_runs, &tree.fork(5))?;
    Ok(DiagnosticsReport {
        brownian,
        independence,
        smoothing_held,
        smoothing_total,
        gspace,
        box_count,
        chain,
    })
}
