//! Volumes of unions of balls around sampled strings and paths, and a
//! box-counting dimension estimate.

use std::collections::HashSet;

use rand::Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::index::GridIndex;
use crate::series::unit_ball_volume;
use crate::traps::Box;

/// A finite set of points in `R^d`, optionally tagged with sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    points: Vec<f64>,
    times: Option<Vec<f64>>,
}

impl PointCloud {
    pub fn new(dim: usize, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: points.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::Empty("point cloud"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point cloud"));
        }
        Ok(Self {
            dim,
            points,
            times: None,
        })
    }

    /// A path sampled at `times`, one point per time.
    pub fn from_path(dim: usize, points: Vec<f64>, times: Vec<f64>) -> Result<Self> {
        let mut cloud = Self::new(dim, points)?;
        if times.len() != cloud.len() {
            return Err(Error::GridMismatch {
                expected: cloud.len(),
                actual: times.len(),
            });
        }
        cloud.times = Some(times);
        Ok(cloud)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).ok_or(Error::Empty("point cloud"))?;
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.len(),
            });
        }
        Self::new(dim, rows.iter().flatten().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.points
    }

    pub fn times(&self) -> Option<&[f64]> {
        self.times.as_deref()
    }

    /// The first `n` points (and times).
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("point cloud"));
        }
        let n = n.min(self.len());
        Ok(Self {
            dim: self.dim,
            points: self.points[..n * self.dim].to_vec(),
            times: self.times.as_ref().map(|t| t[..n].to_vec()),
        })
    }

    /// Union of two clouds of equal dimension.
    pub fn union(&self, other: &PointCloud) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: other.dim,
            });
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&other.points);
        Self::new(self.dim, points)
    }

    pub fn push(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: p.len(),
            });
        }
        self.points.extend_from_slice(p);
        self.times = None;
        Ok(())
    }
}

/// Componentwise hull of the cloud grown by `pad` on every side.
pub fn bounding_box(cloud: &PointCloud, pad: f64) -> Result<Box> {
    if cloud.is_empty() {
        return Err(Error::Empty("point cloud"));
    }
    if !(pad >= 0.0 && pad.is_finite()) {
        return Err(invalid("pad", format!("must be finite and >= 0, got {pad}")));
    }
    let d = cloud.dim();
    let mut lower = vec![f64::INFINITY; d];
    let mut upper = vec![f64::NEG_INFINITY; d];
    for p in cloud.points() {
        for j in 0..d {
            lower[j] = lower[j].min(p[j]);
            upper[j] = upper[j].max(p[j]);
        }
    }
    for j in 0..d {
        lower[j] -= pad;
        upper[j] += pad;
    }
    Ok(Box { lower, upper })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeMethod {
    HitOrMiss,
    Voxel,
}

impl VolumeMethod {
    pub fn name(self) -> &'static str {
        match self {
            Self::HitOrMiss => "hit_or_miss",
            Self::Voxel => "voxel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SausageEstimate {
    pub volume: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub method: VolumeMethod,
    /// Voxel method only: total volume of voxels that straddle the boundary
    /// of the union, an upper bound on the estimator's deterministic error.
    pub discretization_bound: f64,
    /// Volume of the padded bounding box the estimate lives in.
    pub box_volume: f64,
}

pub const MIN_HIT_OR_MISS_SAMPLES: usize = 1000;

fn cloud_index(cloud: &PointCloud, region: &Box, radius: f64) -> GridIndex {
    GridIndex::build(cloud.flat(), cloud.dim(), &region.lower, &region.upper, radius)
}

/// Monte Carlo volume of `⋃ B(p, radius)` over the cloud: the padded box
/// volume times the fraction of uniform samples landing in the union.
pub fn sausage_volume_hit_or_miss<R: Rng + ?Sized>(
    cloud: &PointCloud,
    radius: f64,
    n_mc: usize,
    rng: &mut R,
) -> Result<SausageEstimate> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius", format!("must be > 0, got {radius}")));
    }
    if n_mc < MIN_HIT_OR_MISS_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_HIT_OR_MISS_SAMPLES,
            got: n_mc,
        });
    }
    let region = bounding_box(cloud, radius)?;
    let index = cloud_index(cloud, &region, radius);
    let mut z = vec![0.0; cloud.dim()];
    let mut hits = 0usize;
    for _ in 0..n_mc {
        region.sample_uniform(rng, &mut z);
        if index.any_within(&z, radius) {
            hits += 1;
        }
    }
    let box_volume = region.volume();
    let p = hits as f64 / n_mc as f64;
    Ok(SausageEstimate {
        volume: box_volume * p,
        stderr: box_volume * (p * (1.0 - p) / n_mc as f64).sqrt(),
        n_samples: n_mc,
        method: VolumeMethod::HitOrMiss,
        discretization_bound: 0.0,
        box_volume,
    })
}

/// Largest voxel grid the deterministic estimator will allocate.
pub const MAX_VOXELS: u128 = 1 << 28;

/// Deterministic volume: number of voxel centres within `radius` of the
/// cloud, times the voxel volume.
pub fn sausage_volume_voxel(cloud: &PointCloud, radius: f64, voxel: f64) -> Result<SausageEstimate> {
    let d = cloud.dim();
    if d > 3 {
        return Err(Error::Unsupported(format!("voxel volumes need d <= 3, got d = {d}")));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius", format!("must be > 0, got {radius}")));
    }
    if !(voxel > 0.0 && voxel <= radius / 4.0) {
        return Err(invalid(
            "voxel",
            format!("must lie in (0, radius/4 = {}], got {voxel}", radius / 4.0),
        ));
    }
    let region = bounding_box(cloud, radius)?;
    let shape: Vec<usize> = region
        .lower
        .iter()
        .zip(&region.upper)
        .map(|(l, u)| ((u - l) / voxel).ceil().max(1.0) as usize)
        .collect();
    let cells: u128 = shape.iter().map(|&s| s as u128).product();
    if cells > MAX_VOXELS {
        return Err(Error::TooManyCells {
            cells,
            limit: MAX_VOXELS,
        });
    }
    let cells = cells as usize;
    let mut strides = vec![1usize; d];
    for j in 1..d {
        strides[j] = strides[j - 1] * shape[j - 1];
    }
    let half_diag = 0.5 * voxel * (d as f64).sqrt();
    let r_in = radius;
    let r_near = radius + half_diag;
    let r_deep = (radius - half_diag).max(0.0);

    // inside: centre within r; near: within r + h; deep: within r − h
    let mut inside = vec![false; cells];
    let mut near = vec![false; cells];
    let mut deep = vec![false; cells];
    let centre = |j: usize, c: usize| region.lower[j] + (c as f64 + 0.5) * voxel;
    let mut lo = vec![0usize; d];
    let mut hi = vec![0usize; d];
    let mut cur = vec![0usize; d];
    for p in cloud.points() {
        for j in 0..d {
            let a = ((p[j] - r_near - region.lower[j]) / voxel - 0.5).floor().max(0.0) as usize;
            let b = ((p[j] + r_near - region.lower[j]) / voxel - 0.5).ceil().max(0.0) as usize;
            lo[j] = a.min(shape[j] - 1);
            hi[j] = b.min(shape[j] - 1);
        }
        cur.copy_from_slice(&lo);
        'cells: loop {
            let mut d2 = 0.0;
            let mut flat = 0;
            for j in 0..d {
                let diff = centre(j, cur[j]) - p[j];
                d2 += diff * diff;
                flat += cur[j] * strides[j];
            }
            if d2 <= r_near * r_near {
                near[flat] = true;
                if d2 <= r_in * r_in {
                    inside[flat] = true;
                    if d2 <= r_deep * r_deep {
                        deep[flat] = true;
                    }
                }
            }
            let mut j = 0;
            loop {
                if j == d {
                    break 'cells;
                }
                if cur[j] < hi[j] {
                    cur[j] += 1;
                    break;
                }
                cur[j] = lo[j];
                j += 1;
            }
        }
    }
    let count = |v: &[bool]| v.iter().filter(|b| **b).count();
    let cell_volume = voxel.powi(d as i32);
    let n_inside = count(&inside);
    let straddling = count(&near) - count(&deep);
    Ok(SausageEstimate {
        volume: n_inside as f64 * cell_volume,
        stderr: 0.0,
        n_samples: cells,
        method: VolumeMethod::Voxel,
        discretization_bound: straddling as f64 * cell_volume,
        box_volume: region.volume(),
    })
}

/// What to do when a path is too coarsely sampled for the requested radius.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GuardPolicy {
    Strict,
    WarnAndProceed,
}

/// `√Δt ≤ radius/10` for the largest step of the path's sample times.
pub fn path_guard(cloud: &PointCloud, radius: f64) -> Result<()> {
    let Some(times) = cloud.times() else {
        return Err(invalid("path", "sample times are required"));
    };
    let max_dt = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if max_dt.sqrt() > radius / 10.0 {
        return Err(Error::Resolution(format!(
            "path step {max_dt} has sqrt {} > radius/10 = {}",
            max_dt.sqrt(),
            radius / 10.0
        )));
    }
    Ok(())
}

/// Sausage volume around a centre-of-mass path, with the temporal
/// resolution guard applied according to `policy`.
pub fn wiener_sausage_volume<R: Rng + ?Sized>(
    path: &PointCloud,
    radius: f64,
    n_mc: usize,
    policy: GuardPolicy,
    rng: &mut R,
) -> Result<SausageEstimate> {
    if let Err(e) = path_guard(path, radius) {
        match (policy, &e) {
            (GuardPolicy::WarnAndProceed, Error::Resolution(msg)) => log::warn!("{msg}"),
            _ => return Err(e),
        }
    }
    sausage_volume_hit_or_miss(path, radius, n_mc, rng)
}

/// Expected volume of the `d = 3` Wiener sausage of radius `r` up to time `t`.
pub fn spitzer_volume(r: f64, t: f64) -> f64 {
    use std::f64::consts::PI;
    2.0 * PI * r * t + 4.0 * r * r * (2.0 * PI * t).sqrt() + 4.0 * PI * r.powi(3) / 3.0
}

/// `c_d a^d`, the volume of one ball.
pub fn ball_volume(dim: usize, radius: f64) -> f64 {
    unit_ball_volume(dim) * radius.powi(dim as i32)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxCountReport {
    pub scales: Vec<f64>,
    pub counts: Vec<usize>,
    pub slope: f64,
    /// Standard error of the least-squares slope.
    pub slope_stderr: f64,
}

/// Least-squares slope `β` of `y = α + βx` and its standard error.
pub fn ls_slope(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let se = if n > 2.0 { (rss / (n - 2.0) / sxx).sqrt() } else { 0.0 };
    (slope, intercept, se)
}

/// Minimum ratio between the coarsest and finest box-counting scale.
pub const MIN_SCALE_SPAN: f64 = 16.0;

/// Counts occupied grid cubes of side `ε` for each scale and fits the slope
/// of `log N_ε` against `log(1/ε)`.
pub fn box_counting_dimension(cloud: &PointCloud, scales: &[f64]) -> Result<BoxCountReport> {
    if scales.len() < 4 {
        return Err(Error::InsufficientSamples {
            needed: 4,
            got: scales.len(),
        });
    }
    if scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(invalid("scales", "must be positive and finite"));
    }
    if scales.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(invalid("scales", "must be strictly decreasing"));
    }
    let span = scales[0] / scales[scales.len() - 1];
    if span < MIN_SCALE_SPAN * (1.0 - 1e-12) {
        return Err(invalid(
            "scales",
            format!("span {span} is below the minimum ratio {MIN_SCALE_SPAN}"),
        ));
    }
    let d = cloud.dim();
    let mut counts = Vec::with_capacity(scales.len());
    let mut key = vec![0i64; d];
    for &eps in scales {
        let mut seen: HashSet<Vec<i64>> = HashSet::new();
        for p in cloud.points() {
            for j in 0..d {
                key[j] = (p[j] / eps).floor() as i64;
            }
            if !seen.contains(&key) {
                seen.insert(key.clone());
            }
        }
        counts.push(seen.len());
    }
    let x: Vec<f64> = scales.iter().map(|s| (1.0 / s).ln()).collect();
    let y: Vec<f64> = counts.iter().map(|&c| (c as f64).ln()).collect();
    let (slope, _, slope_stderr) = ls_slope(&x, &y);
    Ok(BoxCountReport {
        scales: scales.to_vec(),
        counts,
        slope,
        slope_stderr,
    })
}

/// `2^{-from}, …, 2^{-to}`.
pub fn dyadic_scales(from: i32, to: i32) -> Vec<f64> {
    (from..=to).map(|k| 2f64.powi(-k)).collect()
}
