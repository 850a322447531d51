//! Poisson trap fields and the potentials they generate.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::index::GridIndex;
use crate::spectral::{FieldSamples, PotentialKind};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Box {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::DegenerateBox(format!(
                "corner dimensions {} and {}",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (j, (l, u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::DegenerateBox(format!("axis {j}: [{l}, {u}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn max_extent(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| u - l)
            .fold(0.0, f64::max)
    }

    pub fn contains_point(&self, p: &[f64]) -> bool {
        p.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(x, (l, u))| *l <= *x && *x <= *u)
    }

    pub fn contains_box(&self, other: &Box) -> bool {
        self.lower.iter().zip(&other.lower).all(|(a, b)| a <= b)
            && self.upper.iter().zip(&other.upper).all(|(a, b)| a >= b)
    }

    pub fn padded(&self, pad: f64) -> Box {
        Box {
            lower: self.lower.iter().map(|l| l - pad).collect(),
            upper: self.upper.iter().map(|u| u + pad).collect(),
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, l), u) in out.iter_mut().zip(&self.lower).zip(&self.upper) {
            *o = l + (u - l) * rng.gen::<f64>();
        }
    }
}

/// Trap potential `H` with support in the closed ball of radius `radius`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub radius: f64,
}

impl PotentialSpec {
    pub fn hard(radius: f64) -> Self {
        Self {
            kind: PotentialKind::Hard,
            radius,
        }
    }

    pub fn soft(radius: f64, height: f64) -> Self {
        Self {
            kind: PotentialKind::SoftIndicator { height },
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius <= 1.0) {
            return Err(invalid("a", format!("support radius must lie in (0,1], got {}", self.radius)));
        }
        if let PotentialKind::SoftIndicator { height } = self.kind {
            if !(height > 0.0 && height.is_finite()) {
                return Err(invalid("height", format!("must be finite and > 0, got {height}")));
            }
        }
        Ok(())
    }

    /// The constant `𝒞` with `H ≥ 𝒞·1_{B(0,a/2)}`; `None` for hard traps.
    pub fn lower_constant(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Hard => None,
            PotentialKind::SoftIndicator { height } => Some(height),
        }
    }
}

/// A realisation of the Poisson trap field restricted to a box.
#[derive(Debug, Clone)]
pub struct PoissonEnvironment {
    dim: usize,
    points: Vec<f64>,
    region: Box,
    intensity: f64,
    index: GridIndex,
}

/// On-disk form of an environment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnvironmentRecord {
    pub dim: usize,
    pub nu: f64,
    #[serde(rename = "box")]
    pub region: Box,
    pub points: Vec<Vec<f64>>,
}

impl PoissonEnvironment {
    /// Builds an environment from explicit trap centres.
    pub fn from_points(region: Box, intensity: f64, points: Vec<f64>, index_cell: f64) -> Result<Self> {
        region.validate()?;
        let dim = region.dim();
        if points.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: points.len() % dim,
            });
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("trap centres"));
        }
        if let Some(p) = points.chunks_exact(dim).find(|p| !region.contains_point(p)) {
            return Err(invalid("points", format!("trap {p:?} lies outside the box")));
        }
        let cell = index_cell.max(region.max_extent() / 128.0);
        let index = GridIndex::build(&points, dim, &region.lower, &region.upper, cell);
        Ok(Self {
            dim,
            points,
            region,
            intensity,
            index,
        })
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

    pub fn region(&self) -> &Box {
        &self.region
    }

    pub fn intensity(&self) -> f64 {
        self.intensity
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.dim)
    }

    /// Distance from `z` to the nearest trap centre, `+∞` if there is none.
    pub fn min_distance(&self, z: &[f64]) -> f64 {
        self.index.min_distance(z)
    }

    /// Whether some trap centre lies within the closed ball `B(z, radius)`.
    pub fn hits(&self, z: &[f64], radius: f64) -> bool {
        self.index.any_within(z, radius)
    }

    pub fn count_within(&self, z: &[f64], radius: f64) -> usize {
        self.index.count_within(z, radius)
    }

    /// `V(z) = Σᵢ H(z − ξᵢ)`.
    pub fn potential_at(&self, z: &[f64], spec: &PotentialSpec) -> f64 {
        match spec.kind {
            PotentialKind::Hard => {
                if self.hits(z, spec.radius) {
                    f64::INFINITY
                } else {
                    0.0
                }
            }
            PotentialKind::SoftIndicator { height } => {
                height * self.count_within(z, spec.radius) as f64
            }
        }
    }

    pub fn to_record(&self) -> EnvironmentRecord {
        EnvironmentRecord {
            dim: self.dim,
            nu: self.intensity,
            region: self.region.clone(),
            points: self.points().map(|p| p.to_vec()).collect(),
        }
    }

    pub fn from_record(record: EnvironmentRecord, index_cell: f64) -> Result<Self> {
        if record.region.dim() != record.dim {
            return Err(Error::DimensionMismatch {
                expected: record.dim,
                actual: record.region.dim(),
            });
        }
        let mut flat = Vec::with_capacity(record.points.len() * record.dim);
        for p in &record.points {
            if p.len() != record.dim {
                return Err(Error::DimensionMismatch {
                    expected: record.dim,
                    actual: p.len(),
                });
            }
            flat.extend_from_slice(p);
        }
        Self::from_points(record.region, record.nu, flat, index_cell)
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), &self.to_record())?;
        Ok(())
    }

    pub fn load_json(path: &Path, index_cell: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_record(serde_json::from_str(&text)?, index_cell)
    }
}

/// Samples a Poisson field of intensity `nu` in `region`, indexed with
/// cells of edge at least `index_cell`.
pub fn sample_environment<R: Rng + ?Sized>(
    region: &Box,
    nu: f64,
    index_cell: f64,
    rng: &mut R,
) -> Result<PoissonEnvironment> {
    region.validate()?;
    if !(nu >= 0.0 && nu.is_finite()) {
        return Err(invalid("nu", format!("must be finite and >= 0, got {nu}")));
    }
    let mean = nu * region.volume();
    let count = if mean > 0.0 {
        Poisson::new(mean)
            .map_err(|e| invalid("nu", e.to_string()))?
            .sample(rng) as usize
    } else {
        0
    };
    let dim = region.dim();
    let mut points = vec![0.0; count * dim];
    for p in points.chunks_exact_mut(dim) {
        region.sample_uniform(rng, p);
    }
    PoissonEnvironment::from_points(region.clone(), nu, points, index_cell)
}

/// `∫∫ V(u(s,x)) dx ds` by the left-endpoint rule in time and the grid rule
/// in space. `samples[i]` is the string at `times[i]`; the last sample closes
/// the final interval and contributes no weight.
pub fn path_functional(
    times: &[f64],
    samples: &[FieldSamples],
    env: &PoissonEnvironment,
    spec: &PotentialSpec,
) -> Result<f64> {
    let height = match spec.kind {
        PotentialKind::SoftIndicator { height } => height,
        PotentialKind::Hard => {
            return Err(Error::Unsupported(
                "hard traps have no finite path functional; use the contact test".into(),
            ))
        }
    };
    if times.len() != samples.len() {
        return Err(Error::GridMismatch {
            expected: times.len(),
            actual: samples.len(),
        });
    }
    if times.len() < 2 {
        return Ok(0.0);
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(Error::TimeOrder {
            earlier: times[0],
            later: times[1],
        });
    }
    for w in times.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0) {
            return Err(invalid("times", "sampling must be uniform"));
        }
    }
    let grid = samples[0].grid_len();
    let mut hits: u64 = 0;
    for f in &samples[..samples.len() - 1] {
        if f.grid_len() != grid {
            return Err(Error::GridMismatch {
                expected: grid,
                actual: f.grid_len(),
            });
        }
        if !f.is_finite() {
            return Err(Error::NonFinite("string samples"));
        }
        hits += f
            .points()
            .map(|z| env.count_within(z, spec.radius) as u64)
            .sum::<u64>();
    }
    let dx = samples[0].length / grid as f64;
    Ok(height * hits as f64 * dx * dt)
}
