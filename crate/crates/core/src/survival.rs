//! Annealed and quenched survival of the string among Poisson traps, the
//! sausage form of hard-trap survival, and the Brownian scaling map between
//! circles of length `J` and the unit circle.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::rng::{Purpose, SeedTree};
use crate::sausage::{bounding_box, sausage_volume_hit_or_miss, PointCloud};
use crate::series::Z95;
use crate::spectral::{FieldSamples, ModelParams, PotentialKind, SpectralModel, StringState};
use crate::traps::{path_functional, sample_environment, Box, PoissonEnvironment, PotentialSpec};

/// Extra margin, beyond the trap radius, by which trap windows exceed the
/// trajectory's bounding box.
pub const ENV_MARGIN: f64 = 0.5;

/// Minimum replica count for an annealed or quenched estimate.
pub const MIN_REPLICAS: usize = 100;

/// The string sampled at `t₀ = 0 < t₁ < … < t_n = T`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub samples: Vec<FieldSamples>,
    pub states: Vec<StringState>,
}

impl Trajectory {
    /// Every sampled point `u(t_i, x_m)` as one cloud.
    pub fn cloud(&self) -> Result<PointCloud> {
        let dim = self.samples[0].dim;
        let flat: Vec<f64> = self.samples.iter().flat_map(|s| s.values.iter().copied()).collect();
        PointCloud::new(dim, flat)
    }
}

/// Runs the exact spectral dynamics from `u0` over the model's time grid,
/// recording the string at every sample time including `t = 0`.
pub fn simulate_trajectory<R: rand::Rng + ?Sized>(
    model: &SpectralModel,
    u0: &StringState,
    rng: &mut R,
) -> Result<Trajectory> {
    let (n, dt) = model.params().time_steps();
    let mut times = Vec::with_capacity(n + 1);
    let mut samples = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut state = u0.clone();
    times.push(state.t);
    samples.push(model.evaluate(&state));
    states.push(state.clone());
    if n > 0 {
        let step = model.stepper(dt)?;
        for i in 1..=n {
            step.apply(&mut state, rng);
            // pin the clock to the grid to avoid drift from repeated addition
            state.t = u0.t + i as f64 * dt;
            times.push(state.t);
            samples.push(model.evaluate(&state));
            states.push(state.clone());
        }
    }
    Ok(Trajectory {
        times,
        samples,
        states,
    })
}

/// Whether no sampled string point lies in a closed trap ball. Fails if the
/// environment window does not cover the trajectory box padded by `a`.
pub fn survive_hard_once(trajectory: &Trajectory, env: &PoissonEnvironment, a: f64) -> Result<bool> {
    let cloud = trajectory.cloud()?;
    let needed = bounding_box(&cloud, a)?;
    if !env.region().contains_box(&needed) {
        return Err(Error::EnvironmentCoverage);
    }
    let survived = !cloud.points().any(|z| env.hits(z, a));
    Ok(survived)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalMethod {
    HardDirect,
    HardViaVolume,
    SoftWeight,
}

impl SurvivalMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::HardDirect => "hard_direct",
            Self::HardViaVolume => "hard_via_volume",
            Self::SoftWeight => "soft_weight",
        }
    }

    pub fn is_indicator(self) -> bool {
        self == Self::HardDirect
    }
}

impl std::str::FromStr for SurvivalMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard_direct" | "direct" => Ok(Self::HardDirect),
            "hard_via_volume" | "via_volume" | "volume" => Ok(Self::HardViaVolume),
            "soft_weight" | "soft" => Ok(Self::SoftWeight),
            other => Err(invalid("method", format!("unknown survival method `{other}`"))),
        }
    }
}

/// Grid moduli compared with the trap radius: `Δt^{1/4}` and `√(J/M)` should
/// both be below `a/10` for contact tests to resolve the string.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolutionReport {
    pub time_modulus: f64,
    pub space_modulus: f64,
    pub limit: f64,
    pub satisfied: bool,
}

pub fn resolution_report(params: &ModelParams) -> ResolutionReport {
    let (_, dt) = params.time_steps();
    let time_modulus = dt.powf(0.25);
    let space_modulus = (params.length / params.grid as f64).sqrt();
    let limit = params.trap_radius / 10.0;
    ResolutionReport {
        time_modulus,
        space_modulus,
        limit,
        satisfied: time_modulus < limit && space_modulus < limit,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n_replicas: usize,
    pub method: SurvivalMethod,
    pub params: ModelParams,
    pub resolution: ResolutionReport,
}

impl SurvivalEstimate {
    /// 95% interval: Wilson score for indicator methods, which stays
    /// informative when `p̂` is 0 or 1, and normal approximation otherwise.
    pub fn ci95(&self) -> (f64, f64) {
        if self.method.is_indicator() && self.n_replicas > 0 {
            let n = self.n_replicas as f64;
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / n;
            let centre = (self.p_hat + z2 / (2.0 * n)) / denom;
            let half = Z95 * (self.p_hat * (1.0 - self.p_hat) / n + z2 / (4.0 * n * n)).sqrt() / denom;
            return ((centre - half).max(0.0), (centre + half).min(1.0));
        }
        (self.p_hat - Z95 * self.stderr, self.p_hat + Z95 * self.stderr)
    }

    pub fn overlaps(&self, other: &SurvivalEstimate) -> bool {
        let (a, b) = self.ci95();
        let (c, d) = other.ci95();
        a <= d && c <= b
    }
}

/// Settings shared by the survival estimators.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurvivalConfig {
    pub params: ModelParams,
    pub replicas: usize,
    /// Hit-or-miss samples per replica for the volume route.
    pub volume_samples: usize,
    /// Fail instead of reporting when the grid moduli exceed `a/10`.
    pub strict_resolution: bool,
}

impl SurvivalConfig {
    pub fn new(params: ModelParams, replicas: usize) -> Self {
        Self {
            params,
            replicas,
            volume_samples: 4000,
            strict_resolution: false,
        }
    }

    fn checked_model(&self, method: SurvivalMethod) -> Result<(SpectralModel, ResolutionReport)> {
        if self.replicas < MIN_REPLICAS {
            return Err(Error::InsufficientSamples {
                needed: MIN_REPLICAS,
                got: self.replicas,
            });
        }
        let model = SpectralModel::new(self.params.clone())?;
        let hard = self.params.potential == PotentialKind::Hard;
        match method {
            SurvivalMethod::SoftWeight if hard => {
                return Err(invalid("method", "soft_weight needs a soft potential; use annealed_hard"))
            }
            SurvivalMethod::HardDirect | SurvivalMethod::HardViaVolume if !hard => {
                return Err(invalid("method", "hard methods need the hard potential"))
            }
            _ => {}
        }
        let report = resolution_report(&self.params);
        if !report.satisfied {
            let msg = format!(
                "grid moduli dt^(1/4) = {:.4}, sqrt(J/M) = {:.4} exceed a/10 = {:.4}",
                report.time_modulus, report.space_modulus, report.limit
            );
            if self.strict_resolution {
                return Err(Error::Resolution(msg));
            }
            log::debug!("{msg}");
        }
        Ok((model, report))
    }

    fn spec(&self) -> PotentialSpec {
        PotentialSpec {
            kind: self.params.potential,
            radius: self.params.trap_radius,
        }
    }
}

/// Trap window for an annealed replica: the trajectory box padded by
/// `a + ENV_MARGIN`.
fn replica_window(cloud: &PointCloud, a: f64) -> Result<Box> {
    bounding_box(cloud, a + ENV_MARGIN)
}

fn index_cell(region: &Box, a: f64) -> f64 {
    a.max(region.max_extent() / 128.0)
}

/// Survival weight of one annealed replica: an indicator for hard traps, a
/// Boltzmann weight for soft ones, or the conditional survival probability
/// `exp(−ν|sausage|)` for the volume route.
fn annealed_weight(
    model: &SpectralModel,
    config: &SurvivalConfig,
    method: SurvivalMethod,
    tree: &SeedTree,
    replica: u64,
) -> Result<f64> {
    let params = model.params();
    let a = params.trap_radius;
    let u0 = model.zero_state();
    let mut noise = tree.stream(Purpose::Noise, replica);
    let traj = simulate_trajectory(model, &u0, &mut noise)?;
    let cloud = traj.cloud()?;
    match method {
        SurvivalMethod::HardDirect => {
            let region = replica_window(&cloud, a)?;
            let mut env_rng = tree.stream(Purpose::Environment, replica);
            let env = sample_environment(&region, params.intensity, index_cell(&region, a), &mut env_rng)?;
            Ok(if survive_hard_once(&traj, &env, a)? { 1.0 } else { 0.0 })
        }
        SurvivalMethod::HardViaVolume => {
            let mut vol_rng = tree.stream(Purpose::Volume, replica);
            let vol = sausage_volume_hit_or_miss(&cloud, a, config.volume_samples, &mut vol_rng)?;
            Ok((-params.intensity * vol.volume).exp())
        }
        SurvivalMethod::SoftWeight => {
            let region = replica_window(&cloud, a)?;
            let mut env_rng = tree.stream(Purpose::Environment, replica);
            let env = sample_environment(&region, params.intensity, index_cell(&region, a), &mut env_rng)?;
            let v = path_functional(&traj.times, &traj.samples, &env, &config.spec())?;
            Ok((-v).exp())
        }
    }
}

/// Computes all replica weights in parallel and reduces them in replica
/// order, so the result does not depend on scheduling.
fn replicate(n: usize, f: impl Fn(u64) -> Result<f64> + Sync + Send) -> Result<Vec<f64>> {
    (0..n as u64).into_par_iter().map(f).collect()
}

fn summarize(
    weights: &[f64],
    method: SurvivalMethod,
    params: &ModelParams,
    resolution: ResolutionReport,
) -> SurvivalEstimate {
    let n = weights.len();
    let nf = n as f64;
    let p_hat = weights.iter().sum::<f64>() / nf;
    let stderr = if method.is_indicator() {
        (p_hat * (1.0 - p_hat) / nf).sqrt()
    } else {
        let var = weights.iter().map(|w| (w - p_hat).powi(2)).sum::<f64>() / (nf - 1.0);
        (var / nf).sqrt()
    };
    SurvivalEstimate {
        p_hat,
        stderr,
        n_replicas: n,
        method,
        params: params.clone(),
        resolution,
    }
}

fn trivial(config: &SurvivalConfig, method: SurvivalMethod, resolution: ResolutionReport) -> SurvivalEstimate {
    SurvivalEstimate {
        p_hat: 1.0,
        stderr: 0.0,
        n_replicas: config.replicas,
        method,
        params: config.params.clone(),
        resolution,
    }
}

/// `S_T = E exp(−ν|sausage|)` estimated directly (`HardDirect`) or through the
/// sausage volume (`HardViaVolume`). At `T = 0` the survival functional is an
/// empty integral and the estimate is exactly 1.
pub fn annealed_hard(config: &SurvivalConfig, method: SurvivalMethod, tree: &SeedTree) -> Result<SurvivalEstimate> {
    if method == SurvivalMethod::SoftWeight {
        return Err(invalid("method", "use annealed_soft for soft traps"));
    }
    let (model, resolution) = config.checked_model(method)?;
    if config.params.horizon == 0.0 {
        return Ok(trivial(config, method, resolution));
    }
    let weights = replicate(config.replicas, |r| annealed_weight(&model, config, method, tree, r))?;
    Ok(summarize(&weights, method, &config.params, resolution))
}

/// `S_T = E exp(−∫∫V)` for soft traps.
pub fn annealed_soft(config: &SurvivalConfig, tree: &SeedTree) -> Result<SurvivalEstimate> {
    let method = SurvivalMethod::SoftWeight;
    let (model, resolution) = config.checked_model(method)?;
    if config.params.horizon == 0.0 {
        return Ok(trivial(config, method, resolution));
    }
    let weights = replicate(config.replicas, |r| annealed_weight(&model, config, method, tree, r))?;
    Ok(summarize(&weights, method, &config.params, resolution))
}

/// Dispatches on the configured potential.
pub fn annealed(config: &SurvivalConfig, method: SurvivalMethod, tree: &SeedTree) -> Result<SurvivalEstimate> {
    match method {
        SurvivalMethod::SoftWeight => annealed_soft(config, tree),
        _ => annealed_hard(config, method, tree),
    }
}

/// A window around the origin that a string started at 0 leaves only with
/// negligible probability before `T`, for quenched runs on a fixed field.
pub fn quenched_window(params: &ModelParams) -> Result<Box> {
    let (d, j, t, a) = (params.dim, params.length, params.horizon, params.trap_radius);
    let half = a + ENV_MARGIN + 6.0 * (t / j).sqrt() + 8.0 * (j / 12.0).sqrt();
    Box::new(vec![-half; d], vec![half; d])
}

/// Samples one fixed field for quenched runs.
pub fn sample_quenched_environment(params: &ModelParams, tree: &SeedTree) -> Result<PoissonEnvironment> {
    let region = quenched_window(params)?;
    let mut rng = tree.stream(Purpose::Environment, u64::MAX);
    let cell = index_cell(&region, params.trap_radius);
    sample_environment(&region, params.intensity, cell, &mut rng)
}

/// `S_{T,η}`: expectation over the noise with the trap field held fixed.
/// A replica whose string leaves the field's window is an error.
pub fn quenched(
    config: &SurvivalConfig,
    env: &PoissonEnvironment,
    method: SurvivalMethod,
    tree: &SeedTree,
) -> Result<SurvivalEstimate> {
    if method == SurvivalMethod::HardViaVolume {
        return Err(Error::Unsupported(
            "the volume route averages over the field; quenched runs use hard_direct".into(),
        ));
    }
    let (model, resolution) = config.checked_model(method)?;
    if env.dim() != config.params.dim {
        return Err(Error::DimensionMismatch {
            expected: config.params.dim,
            actual: env.dim(),
        });
    }
    if config.params.horizon == 0.0 {
        return Ok(trivial(config, method, resolution));
    }
    let a = config.params.trap_radius;
    let spec = config.spec();
    let weights = replicate(config.replicas, |r| {
        let mut noise = tree.stream(Purpose::Noise, r);
        let traj = simulate_trajectory(&model, &model.zero_state(), &mut noise)?;
        match method {
            SurvivalMethod::HardDirect => Ok(if survive_hard_once(&traj, env, a)? { 1.0 } else { 0.0 }),
            _ => {
                let cloud = traj.cloud()?;
                if !env.region().contains_box(&bounding_box(&cloud, a)?) {
                    return Err(Error::EnvironmentCoverage);
                }
                Ok((-path_functional(&traj.times, &traj.samples, env, &spec)?).exp())
            }
        }
    })?;
    Ok(summarize(&weights, method, &config.params, resolution))
}

/// Parameters of the unit-circle image of a length-`J` problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScaledParams {
    pub t_tilde: f64,
    pub nu_tilde: f64,
    pub a_tilde: f64,
    pub h_scale: f64,
}

/// `(T J⁻², ν J^{d/2}, a J^{−1/2}, J³)`.
pub fn scaling_transform(params: &ModelParams) -> Result<ScaledParams> {
    let j = params.length;
    if !(j >= 1.0 && j.is_finite()) {
        return Err(invalid("J", format!("must be >= 1, got {j}")));
    }
    Ok(ScaledParams {
        t_tilde: params.horizon / (j * j),
        nu_tilde: params.intensity * j.powf(params.dim as f64 / 2.0),
        a_tilde: params.trap_radius / j.sqrt(),
        h_scale: j.powi(3),
    })
}

/// The unit-circle model equivalent in law to `params`. The time step is
/// scaled with the horizon so both sides sample the same instants.
pub fn unit_image(params: &ModelParams) -> Result<ModelParams> {
    let s = scaling_transform(params)?;
    let j = params.length;
    let potential = match params.potential {
        PotentialKind::Hard => PotentialKind::Hard,
        PotentialKind::SoftIndicator { height } => PotentialKind::SoftIndicator {
            height: height * s.h_scale,
        },
    };
    Ok(ModelParams {
        length: 1.0,
        horizon: s.t_tilde,
        intensity: s.nu_tilde,
        trap_radius: s.a_tilde,
        potential,
        dt: params.dt / (j * j),
        ..params.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub scaled: ScaledParams,
    pub native: SurvivalEstimate,
    pub unit: SurvivalEstimate,
    pub overlap: bool,
}

/// Estimates survival at length `J` and on its unit-circle image with
/// independent streams, and compares the 95% intervals.
pub fn scaling_check(config: &SurvivalConfig, method: SurvivalMethod, tree: &SeedTree) -> Result<ScalingReport> {
    let scaled = scaling_transform(&config.params)?;
    let unit_config = SurvivalConfig {
        params: unit_image(&config.params)?,
        ..config.clone()
    };
    let native = annealed(config, method, &tree.fork(1))?;
    let unit = annealed(&unit_config, method, &tree.fork(2))?;
    let overlap = native.overlaps(&unit);
    Ok(ScalingReport {
        scaled,
        native,
        unit,
        overlap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub base: SurvivalEstimate,
    pub refined: SurvivalEstimate,
    /// `refined − base`; a positive survival bias at coarse resolution shows
    /// up as a negative difference.
    pub difference: f64,
    pub difference_stderr: f64,
}

/// Re-runs an estimate with twice the modes and grid points and half the
/// time step.
pub fn resolution_doubling(config: &SurvivalConfig, method: SurvivalMethod, tree: &SeedTree) -> Result<ConvergenceReport> {
    let base = annealed(config, method, &tree.fork(10))?;
    let mut fine = config.clone();
    fine.params.modes *= 2;
    fine.params.grid *= 2;
    fine.params.dt /= 2.0;
    let refined = annealed(&fine, method, &tree.fork(11))?;
    Ok(ConvergenceReport {
        difference: refined.p_hat - base.p_hat,
        difference_stderr: (refined.stderr.powi(2) + base.stderr.powi(2)).sqrt(),
        base,
        refined,
    })
}
