//! Batch runs over a cartesian sweep of `(J, ν, a, T)` with a fixed master
//! seed, written as CSV rows plus a JSON summary.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::{Purpose, SeedTree};
use crate::sausage::{wiener_sausage_volume, GuardPolicy, PointCloud};
use crate::spectral::{ModelParams, PotentialKind};
use crate::stats::mean_var;
use crate::survival::{annealed, scaling_check, SurvivalConfig, SurvivalMethod};

pub const CSV_HEADER: &str = "experiment,d,J,nu,a,T,method,estimate,stderr,n,seed,resolution_tag";

/// Environment variable that overrides the worker count.
pub const THREADS_ENV: &str = "STRING_SAUSAGE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Annealed survival for each listed method.
    Survival,
    /// Survival at length `J` and on its unit-circle image.
    Scaling,
    /// Mean Wiener sausage volume of the centre of mass with radius `a`.
    Sausage,
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "survival" => Ok(Self::Survival),
            "scaling" | "scaling-check" | "scaling_check" => Ok(Self::Scaling),
            "sausage" | "wiener_sausage" => Ok(Self::Sausage),
            other => Err(Error::Config(format!("unknown experiment `{other}`"))),
        }
    }
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Survival => "survival",
            Self::Scaling => "scaling",
            Self::Sausage => "sausage",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub master_seed: u64,
    /// Template for everything not swept.
    pub base: ModelParams,
    pub methods: Vec<SurvivalMethod>,
    pub replicas: usize,
    pub volume_samples: usize,
    pub strict_resolution: bool,
    pub lengths: Vec<f64>,
    pub intensities: Vec<f64>,
    pub radii: Vec<f64>,
    pub horizons: Vec<f64>,
    pub threads: Option<usize>,
    pub csv_path: Option<PathBuf>,
    pub json_path: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| Error::Config(format!("cannot parse `{s}` in `{key}`")))
        })
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::Config(format!("sweep `{key}` is empty")));
    }
    Ok(items)
}

fn parse_one<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| Error::Config(format!("cannot parse `{value}` for `{key}`")))
}

impl ExperimentConfig {
    /// Parses `key = value` lines; `#` starts a comment. Sweep keys take
    /// comma-separated lists.
    pub fn from_key_values(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{}`", n + 1, k.trim())));
            }
        }
        Self::from_map(map)
    }

    /// Parses a JSON object with the same keys; lists may be JSON arrays.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
        let scalar = |v: &serde_json::Value| -> Result<String> {
            match v {
                serde_json::Value::String(s) => Ok(s.clone()),
                serde_json::Value::Number(n) => Ok(n.to_string()),
                serde_json::Value::Bool(b) => Ok(b.to_string()),
                other => Err(Error::Config(format!("unsupported value {other}"))),
            }
        };
        let mut map = BTreeMap::new();
        for (k, v) in obj {
            let s = match v {
                serde_json::Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>>>()?.join(","),
                other => scalar(other)?,
            };
            map.insert(k.clone(), s);
        }
        Self::from_map(map)
    }

    /// Picks the parser from the file extension (`.json` or key-value).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            Self::from_json(&text)
        } else {
            Self::from_key_values(&text)
        }
    }

    fn from_map(mut map: BTreeMap<String, String>) -> Result<Self> {
        let mut take = |k: &str| map.remove(k);
        let experiment = match take("experiment") {
            Some(v) => v.parse()?,
            None => ExperimentKind::Survival,
        };
        let master_seed: u64 = match take("seed") {
            Some(v) => parse_one("seed", &v)?,
            None => return Err(Error::Config("`seed` is required".into())),
        };
        let mut base = ModelParams::default();
        if let Some(v) = take("d") {
            base.dim = parse_one("d", &v)?;
        }
        if let Some(v) = take("K") {
            base.modes = parse_one("K", &v)?;
        }
        if let Some(v) = take("M") {
            base.grid = parse_one("M", &v)?;
        }
        if let Some(v) = take("dt") {
            base.dt = parse_one("dt", &v)?;
        }
        if let Some(v) = take("tail_tolerance") {
            base.tail_tolerance = parse_one("tail_tolerance", &v)?;
        }
        let height = take("height").map(|v| parse_one::<f64>("height", &v)).transpose()?;
        match take("potential").as_deref() {
            None | Some("hard") => {}
            Some("soft") => {
                base.potential = PotentialKind::SoftIndicator {
                    height: height.ok_or_else(|| Error::Config("soft potential needs `height`".into()))?,
                }
            }
            Some(other) => return Err(Error::Config(format!("unknown potential `{other}`"))),
        }
        let default_methods = match (experiment, base.potential) {
            (ExperimentKind::Sausage, _) => "hard_direct".to_string(),
            (_, PotentialKind::Hard) => "hard_direct".to_string(),
            (_, PotentialKind::SoftIndicator { .. }) => "soft_weight".to_string(),
        };
        let methods = parse_list("methods", &take("methods").unwrap_or(default_methods))?;
        let replicas = take("n").map(|v| parse_one("n", &v)).transpose()?.unwrap_or(1000);
        let volume_samples = take("volume_samples")
            .map(|v| parse_one("volume_samples", &v))
            .transpose()?
            .unwrap_or(4000);
        let strict_resolution = take("strict").map(|v| parse_one("strict", &v)).transpose()?.unwrap_or(false);
        let lengths = parse_list("J", &take("J").unwrap_or_else(|| "1".into()))?;
        let intensities = parse_list("nu", &take("nu").unwrap_or_else(|| "1".into()))?;
        let radii = parse_list("a", &take("a").unwrap_or_else(|| "0.3".into()))?;
        let horizons = parse_list("T", &take("T").unwrap_or_else(|| "1".into()))?;
        let threads = take("threads").map(|v| parse_one("threads", &v)).transpose()?;
        let csv_path = take("csv").map(PathBuf::from);
        let json_path = take("json").map(PathBuf::from);
        if let Some(k) = map.keys().next() {
            return Err(Error::Config(format!("unknown key `{k}`")));
        }
        let config = Self {
            experiment,
            master_seed,
            base,
            methods,
            replicas,
            volume_samples,
            strict_resolution,
            lengths,
            intensities,
            radii,
            horizons,
            threads,
            csv_path,
            json_path,
        };
        config.validate()?;
        Ok(config)
    }

    /// Checks every sweep point's model parameters up front.
    pub fn validate(&self) -> Result<()> {
        for p in self.points() {
            p.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.threads == Some(0) {
            return Err(Error::Config("`threads` must be positive".into()));
        }
        Ok(())
    }

    /// Sweep points in output order: `J`, then `ν`, then `a`, then `T`.
    pub fn points(&self) -> Vec<ModelParams> {
        let mut out = Vec::new();
        for &length in &self.lengths {
            for &intensity in &self.intensities {
                for &trap_radius in &self.radii {
                    for &horizon in &self.horizons {
                        out.push(ModelParams {
                            length,
                            intensity,
                            trap_radius,
                            horizon,
                            ..self.base.clone()
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub d: usize,
    pub length: f64,
    pub nu: f64,
    pub a: f64,
    pub horizon: f64,
    pub method: String,
    pub estimate: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
    pub resolution_tag: String,
}

impl ResultRow {
    /// One CSV line; floats use the shortest representation that parses
    /// back to the same value.
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.d,
            self.length,
            self.nu,
            self.a,
            self.horizon,
            self.method,
            self.estimate,
            self.stderr,
            self.n,
            self.seed,
            self.resolution_tag
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub threads: usize,
    pub rows: Vec<ResultRow>,
    /// Scaling runs: overlap verdict per sweep point.
    pub overlaps: Vec<bool>,
}

impl RunSummary {
    pub fn csv(&self) -> String {
        let mut out = String::with_capacity(128 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(out, "{}", r.to_csv());
        }
        out
    }
}

/// Worker count: the environment variable wins, then the explicit setting,
/// then the number of available cores.
pub fn resolve_threads(requested: Option<usize>) -> Result<usize> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}=`{v}` is not a positive integer")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        return Ok(n);
    }
    Ok(requested.unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)))
}

/// Runs `f` on a dedicated pool of `threads` workers.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))?;
    Ok(pool.install(f))
}

fn row(config: &ExperimentConfig, p: &ModelParams, method: &str, estimate: f64, stderr: f64, n: usize) -> ResultRow {
    ResultRow {
        experiment: config.experiment.name().to_string(),
        d: p.dim,
        length: p.length,
        nu: p.intensity,
        a: p.trap_radius,
        horizon: p.horizon,
        method: method.to_string(),
        estimate,
        stderr,
        n,
        seed: config.master_seed,
        resolution_tag: p.resolution_tag(),
    }
}

/// Mean Wiener sausage volume of the centre of mass `X` (variance `t/J` per
/// coordinate) with radius `a` up to `T`.
fn sausage_point(config: &ExperimentConfig, p: &ModelParams, tree: &SeedTree) -> Result<(f64, f64)> {
    use rayon::prelude::*;
    let (n, dt) = p.time_steps();
    let policy = if config.strict_resolution {
        GuardPolicy::Strict
    } else {
        GuardPolicy::WarnAndProceed
    };
    let step = Normal::new(0.0, (dt / p.length).sqrt()).map_err(|e| Error::Config(e.to_string()))?;
    let volumes: Vec<f64> = (0..config.replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = tree.stream(Purpose::Noise, r);
            let mut points = vec![0.0; (n + 1) * p.dim];
            for i in 1..=n {
                for j in 0..p.dim {
                    points[i * p.dim + j] = points[(i - 1) * p.dim + j] + step.sample(&mut rng);
                }
            }
            let times = (0..=n).map(|i| i as f64 * dt).collect();
            let cloud = PointCloud::from_path(p.dim, points, times)?;
            let mut vol_rng = tree.stream(Purpose::Volume, r);
            Ok(wiener_sausage_volume(&cloud, p.trap_radius, config.volume_samples, policy, &mut vol_rng)?.volume)
        })
        .collect::<Result<_>>()?;
    let (mean, var) = mean_var(&volumes);
    Ok((mean, (var / volumes.len() as f64).sqrt()))
}

/// Executes the sweep and returns the rows in sweep order.
pub fn run(config: &ExperimentConfig) -> Result<RunSummary> {
    config.validate()?;
    let threads = resolve_threads(config.threads)?;
    let root = SeedTree::new(config.master_seed);
    let (rows, overlaps) = with_threads(threads, || -> Result<_> {
        let mut rows = Vec::new();
        let mut overlaps = Vec::new();
        for (i, p) in config.points().into_iter().enumerate() {
            let tree = root.point(i as u64);
            let survival = SurvivalConfig {
                params: p.clone(),
                replicas: config.replicas,
                volume_samples: config.volume_samples,
                strict_resolution: config.strict_resolution,
            };
            match config.experiment {
                ExperimentKind::Survival => {
                    for (m, &method) in config.methods.iter().enumerate() {
                        let e = annealed(&survival, method, &tree.fork(m as u64))?;
                        rows.push(row(config, &p, method.name(), e.p_hat, e.stderr, e.n_replicas));
                    }
                }
                ExperimentKind::Scaling => {
                    for (m, &method) in config.methods.iter().enumerate() {
                        let rep = scaling_check(&survival, method, &tree.fork(m as u64))?;
                        let native = format!("{}_native", method.name());
                        let unit = format!("{}_unit", method.name());
                        rows.push(row(config, &p, &native, rep.native.p_hat, rep.native.stderr, rep.native.n_replicas));
                        rows.push(row(config, &p, &unit, rep.unit.p_hat, rep.unit.stderr, rep.unit.n_replicas));
                        overlaps.push(rep.overlap);
                    }
                }
                ExperimentKind::Sausage => {
                    let (mean, se) = sausage_point(config, &p, &tree)?;
                    rows.push(row(config, &p, "wiener_sausage", mean, se, config.replicas));
                }
            }
        }
        Ok((rows, overlaps))
    })??;
    Ok(RunSummary {
        config: config.clone(),
        threads,
        rows,
        overlaps,
    })
}

/// Runs and writes the configured CSV and JSON outputs.
pub fn run_and_write(config: &ExperimentConfig) -> Result<RunSummary> {
    let summary = run(config)?;
    if let Some(path) = &config.csv_path {
        std::fs::write(path, summary.csv())?;
    }
    if let Some(path) = &config.json_path {
        std::fs::write(path, serde_json::to_string_pretty(&summary)?)?;
    }
    Ok(summary)
}

/// Process exit status for a failed run: 2 for configuration problems, 3 for
/// a resolution guard, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InvalidParameter { .. } | Error::InsufficientSamples { .. } => 2,
        Error::Resolution(_) => 3,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "
        experiment = survival
        seed = 7
        d = 2
        K = 8
        M = 32
        dt = 0.0625
        n = 100
        nu = 0
        T = 0.25, 0.5, 1, 2
    ";

    #[test]
    fn zero_intensity_rows() {
        let config = ExperimentConfig::from_key_values(SMALL).unwrap();
        let s = run(&config).unwrap();
        assert_eq!(s.rows.len(), 4);
        assert!(s.rows.iter().all(|r| r.estimate == 1.0));
        let csv = s.csv();
        assert!(csv.starts_with(CSV_HEADER));
        assert_eq!(csv.lines().count(), 5);
    }

    #[test]
    fn config_errors() {
        assert!(matches!(
            ExperimentConfig::from_key_values("d = 2"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_key_values("seed = 1\nbogus = 3").is_err());
        assert!(ExperimentConfig::from_key_values("seed = 1\nT =").is_err());
        assert!(ExperimentConfig::from_key_values("seed = 1\nM = 4").is_err());
        let e = ExperimentConfig::from_key_values("seed = 1\nM = 4").unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn json_matches_key_values() {
        let a = ExperimentConfig::from_key_values(SMALL).unwrap();
        let b = ExperimentConfig::from_json(
            r#"{"experiment":"survival","seed":7,"d":2,"K":8,"M":32,"dt":0.0625,"n":100,"nu":0,"T":[0.25,0.5,1,2]}"#,
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
