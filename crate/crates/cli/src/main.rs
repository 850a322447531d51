use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use string_sausage::experiment::{self, resolve_threads, with_threads, ExperimentConfig, ExperimentKind};
use string_sausage::lab::{exponent_fit, neg_log_survival, run_diagnostics, DiagnosticsOptions};
use string_sausage::sausage::{box_counting_dimension, dyadic_scales, sausage_volume_hit_or_miss, sausage_volume_voxel};
use string_sausage::stats::{center_of_mass, radius, PathRecord};
use string_sausage::survival::{
    annealed, quenched, sample_quenched_environment, scaling_check, simulate_trajectory, SurvivalConfig, SurvivalMethod,
};
use string_sausage::traps::PoissonEnvironment;
use string_sausage::{Error, ModelParams, PotentialKind, Purpose, SeedTree, SpectralModel};

#[derive(Parser)]
#[command(name = "string-sausage", version, about = "Random strings among Poisson traps")]
struct Cli {
    /// Worker threads (the STRING_SAUSAGE_THREADS variable takes precedence).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one string and print its centre of mass and radius over time.
    Simulate(SimulateArgs),
    /// Sausage volume of a simulated string or of a Brownian path.
    Sausage(SausageArgs),
    /// Annealed or quenched survival probability.
    Survival(SurvivalArgs),
    /// Survival at length J against its unit-length image.
    ScalingCheck(ScalingArgs),
    /// Centre-of-mass law, independence, smoothing, box counting and stopping chains.
    Diagnostics(DiagnosticsArgs),
    /// Power-law fit of -log S against T from a CSV file.
    Fit(FitArgs),
    /// Batch sweep from a key-value or JSON configuration file.
    Run(RunArgs),
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long = "d", default_value_t = 2)]
    dim: usize,
    #[arg(long = "J", default_value_t = 1.0)]
    length: f64,
    #[arg(long = "nu", default_value_t = 1.0)]
    intensity: f64,
    #[arg(long = "a", default_value_t = 0.3)]
    trap_radius: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    horizon: f64,
    /// Mode cutoff.
    #[arg(long = "K", default_value_t = 16)]
    modes: usize,
    /// Spatial grid size.
    #[arg(long = "M", default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 1.0 / 128.0)]
    dt: f64,
    #[arg(long, default_value_t = 5e-3)]
    tail_tolerance: f64,
    /// Hard obstacles (the default).
    #[arg(long, conflicts_with = "soft")]
    hard: bool,
    /// Soft obstacles of the given height.
    #[arg(long, value_name = "HEIGHT")]
    soft: Option<f64>,
    #[arg(long)]
    seed: u64,
}

impl ModelArgs {
    fn params(&self) -> ModelParams {
        ModelParams {
            dim: self.dim,
            length: self.length,
            intensity: self.intensity,
            trap_radius: self.trap_radius,
            potential: match self.soft {
                Some(height) => PotentialKind::SoftIndicator { height },
                None => PotentialKind::Hard,
            },
            modes: self.modes,
            grid: self.grid,
            dt: self.dt,
            horizon: self.horizon,
            tail_tolerance: self.tail_tolerance,
        }
    }

    fn default_method(&self) -> SurvivalMethod {
        if self.soft.is_some() {
            SurvivalMethod::SoftWeight
        } else {
            SurvivalMethod::HardDirect
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum VolumeChoice {
    HitOrMiss,
    Voxel,
}

#[derive(Args)]
struct SausageArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Use a Brownian path with variance t/J instead of the string.
    #[arg(long)]
    wiener: bool,
    #[arg(long, value_enum, default_value_t = VolumeChoice::HitOrMiss)]
    method: VolumeChoice,
    /// Hit-or-miss samples.
    #[arg(long, default_value_t = 20_000)]
    samples: usize,
    /// Voxel edge, default a/8.
    #[arg(long)]
    voxel: Option<f64>,
    /// Brownian replicas for --wiener.
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Also report box counting over scales 2^-FROM..2^-TO.
    #[arg(long, num_args = 2, value_names = ["FROM", "TO"])]
    box_count: Option<Vec<i32>>,
}

#[derive(Args)]
struct SurvivalArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    /// hard_direct, hard_via_volume or soft_weight.
    #[arg(long)]
    method: Option<SurvivalMethod>,
    #[arg(long, default_value_t = 4000)]
    volume_samples: usize,
    /// Fail with status 3 when the grid does not resolve the trap radius.
    #[arg(long)]
    strict: bool,
    /// Quenched run in a stored environment.
    #[arg(long, conflicts_with = "quenched")]
    env: Option<PathBuf>,
    /// Quenched run in an environment sampled from the seed.
    #[arg(long)]
    quenched: bool,
    /// Store the sampled quenched environment.
    #[arg(long, requires = "quenched")]
    save_env: Option<PathBuf>,
}

#[derive(Args)]
struct ScalingArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 2000)]
    n: usize,
    #[arg(long)]
    method: Option<SurvivalMethod>,
    #[arg(long, default_value_t = 4000)]
    volume_samples: usize,
}

#[derive(Args)]
struct DiagnosticsArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long = "d", default_value_t = 2)]
    dim: usize,
    #[arg(long = "K", default_value_t = 16)]
    modes: usize,
    #[arg(long = "M", default_value_t = 64)]
    grid: usize,
    #[arg(long, default_value_t = 5000)]
    replicas: usize,
    /// Mode cutoff of the d=3 field used for box counting.
    #[arg(long, default_value_t = 256)]
    box_modes: usize,
    #[arg(long, default_value_t = 16384)]
    box_grid: usize,
    #[arg(long, default_value_t = 20)]
    chain_runs: usize,
    #[arg(long, default_value_t = 40.0)]
    chain_horizon: f64,
    #[arg(long = "a", default_value_t = 0.3)]
    trap_radius: f64,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with columns `T,neg_log_S[,stderr]`, or a survival run output.
    input: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Configuration file (`.json` or key = value lines).
    config: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn print_json(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate(args: &SimulateArgs) -> anyhow::Result<()> {
    let model = SpectralModel::new(args.model.params())?;
    let mut rng = SeedTree::new(args.model.seed).stream(Purpose::Noise, 0);
    let traj = simulate_trajectory(&model, &model.zero_state(), &mut rng)?;
    let centers = traj.states.iter().map(center_of_mass).collect();
    let radii = traj.states.iter().map(|s| radius(&model, s)).collect();
    let record = PathRecord::new(traj.times.clone(), centers, radii)?;
    let out = json!({
        "params": model.params(),
        "resolution_tag": model.params().resolution_tag(),
        "record": record,
    });
    let text = serde_json::to_string_pretty(&out)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

fn sausage(args: &SausageArgs, threads: usize) -> anyhow::Result<()> {
    let params = args.model.params();
    if args.wiener {
        let config = ExperimentConfig {
            experiment: ExperimentKind::Sausage,
            master_seed: args.model.seed,
            base: params.clone(),
            methods: vec![],
            replicas: args.n,
            volume_samples: args.samples,
            strict_resolution: false,
            lengths: vec![params.length],
            intensities: vec![params.intensity],
            radii: vec![params.trap_radius],
            horizons: vec![params.horizon],
            threads: Some(threads),
            csv_path: None,
            json_path: None,
        };
        let summary = experiment::run(&config)?;
        let row = &summary.rows[0];
        return print_json(&json!({
            "volume": row.estimate,
            "stderr": row.stderr,
            "n": row.n,
            "resolution_tag": row.resolution_tag,
        }));
    }
    let model = SpectralModel::new(params.clone())?;
    let tree = SeedTree::new(args.model.seed);
    let traj = simulate_trajectory(&model, &model.zero_state(), &mut tree.stream(Purpose::Noise, 0))?;
    let cloud = traj.cloud()?;
    let a = params.trap_radius;
    let estimate = match args.method {
        VolumeChoice::HitOrMiss => {
            sausage_volume_hit_or_miss(&cloud, a, args.samples, &mut tree.stream(Purpose::Volume, 0))?
        }
        VolumeChoice::Voxel => sausage_volume_voxel(&cloud, a, args.voxel.unwrap_or(a / 8.0))?,
    };
    let boxes = match &args.box_count {
        Some(r) => Some(box_counting_dimension(&cloud, &dyadic_scales(r[0], r[1]))?),
        None => None,
    };
    print_json(&json!({ "sausage": estimate, "box_count": boxes }))
}

fn survival(args: &SurvivalArgs) -> anyhow::Result<()> {
    let params = args.model.params();
    let method = args.method.unwrap_or_else(|| args.model.default_method());
    let config = SurvivalConfig {
        params: params.clone(),
        replicas: args.n,
        volume_samples: args.volume_samples,
        strict_resolution: args.strict,
    };
    let tree = SeedTree::new(args.model.seed);
    let cell = params.trap_radius.max(1e-3);
    let (estimate, mode) = if let Some(path) = &args.env {
        let env = PoissonEnvironment::load_json(path, cell)?;
        (quenched(&config, &env, method, &tree)?, "quenched")
    } else if args.quenched {
        let env = sample_quenched_environment(&params, &tree)?;
        if let Some(path) = &args.save_env {
            env.save_json(path)?;
        }
        (quenched(&config, &env, method, &tree)?, "quenched")
    } else {
        (annealed(&config, method, &tree)?, "annealed")
    };
    let (lo, hi) = estimate.ci95();
    print_json(&json!({
        "p_hat": estimate.p_hat,
        "stderr": estimate.stderr,
        "ci95": [lo, hi],
        "n": estimate.n_replicas,
        "method": method.name(),
        "mode": mode,
        "resolution": estimate.resolution,
        "resolution_tag": params.resolution_tag(),
    }))
}

fn scaling(args: &ScalingArgs) -> anyhow::Result<()> {
    let method = args.method.unwrap_or_else(|| args.model.default_method());
    let config = SurvivalConfig {
        params: args.model.params(),
        replicas: args.n,
        volume_samples: args.volume_samples,
        strict_resolution: false,
    };
    let rep = scaling_check(&config, method, &SeedTree::new(args.model.seed))?;
    print_json(&json!({
        "method": method.name(),
        "scaled": rep.scaled,
        "native": { "p_hat": rep.native.p_hat, "stderr": rep.native.stderr, "ci95": rep.native.ci95() },
        "unit": { "p_hat": rep.unit.p_hat, "stderr": rep.unit.stderr, "ci95": rep.unit.ci95() },
        "overlap": rep.overlap,
    }))
}

fn diagnostics(args: &DiagnosticsArgs) -> anyhow::Result<()> {
    let opts = DiagnosticsOptions {
        dim: args.dim,
        modes: args.modes,
        grid: args.grid,
        replicas: args.replicas,
        box_modes: args.box_modes,
        box_grid: args.box_grid,
        chain_runs: args.chain_runs,
        chain_horizon: args.chain_horizon,
        trap_radius: args.trap_radius,
    };
    let report = run_diagnostics(&opts, &SeedTree::new(args.seed))?;
    print_json(&report)
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim() == name)
}

fn fit(args: &FitArgs) -> anyhow::Result<()> {
    let mut reader = csv::Reader::from_path(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let headers = reader.headers()?.clone();
    let t_col = column(&headers, "T").ok_or_else(|| Error::Config("missing column `T`".into()))?;
    let direct = column(&headers, "neg_log_S");
    let estimate = column(&headers, "estimate");
    let se_col = column(&headers, "stderr");
    let method_col = column(&headers, "method");
    if direct.is_none() && estimate.is_none() {
        return Err(Error::Config("need a `neg_log_S` or `estimate` column".into()).into());
    }
    let parse = |rec: &csv::StringRecord, i: usize| -> anyhow::Result<f64> {
        let s = rec.get(i).unwrap_or("").trim();
        s.parse::<f64>().map_err(|_| Error::Config(format!("cannot parse `{s}`")).into())
    };
    let mut groups: Vec<(String, Vec<f64>, Vec<f64>, Vec<f64>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let key = method_col.and_then(|i| rec.get(i)).unwrap_or("").to_string();
        let t = parse(&rec, t_col)?;
        let se = match se_col {
            Some(i) => parse(&rec, i)?,
            None => 0.0,
        };
        let (v, se) = match direct {
            Some(i) => (parse(&rec, i)?, se),
            None => neg_log_survival(parse(&rec, estimate.unwrap())?, se)?,
        };
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                g.1.push(t);
                g.2.push(v);
                g.3.push(se);
            }
            None => groups.push((key, vec![t], vec![v], vec![se])),
        }
    }
    if groups.is_empty() {
        bail!(Error::Config("no data rows".into()));
    }
    let fits = groups
        .iter()
        .map(|(key, t, v, se)| Ok((key, exponent_fit(t, v, se)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    println!("method,gamma_hat,stderr,ci_low,ci_high,n_points");
    for (key, f) in fits {
        println!("{},{},{},{},{},{}", key, f.gamma_hat, f.stderr, f.ci.0, f.ci.1, f.n_points);
    }
    Ok(())
}

fn run(args: &RunArgs, threads: Option<usize>) -> anyhow::Result<()> {
    let mut config = ExperimentConfig::load(&args.config)?;
    if threads.is_some() {
        config.threads = threads;
    }
    if args.csv.is_some() {
        config.csv_path = args.csv.clone();
    }
    if args.json.is_some() {
        config.json_path = args.json.clone();
    }
    let summary = experiment::run_and_write(&config)?;
    if config.csv_path.is_none() {
        print!("{}", summary.csv());
    }
    Ok(())
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let threads = resolve_threads(cli.threads)?;
    match &cli.command {
        Command::Run(args) => run(args, cli.threads),
        Command::Sausage(args) => sausage(args, threads),
        command => with_threads(threads, || match command {
            Command::Simulate(args) => simulate(args),
            Command::Survival(args) => survival(args),
            Command::ScalingCheck(args) => scaling(args),
            Command::Diagnostics(args) => diagnostics(args),
            Command::Fit(args) => fit(args),
            Command::Run(_) | Command::Sausage(_) => unreachable!(),
        })?,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<Error>().map(experiment::exit_code).unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}
