//! Centre of mass, radius and range of the string, plus the checks that the
//! centre of mass is a Brownian motion independent of the radius.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::spectral::{FieldSamples, SpectralModel, StringState};

/// Centre of mass and radius of one trajectory at its sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub times: Vec<f64>,
    pub centers: Vec<Vec<f64>>,
    pub radii: Vec<f64>,
}

impl PathRecord {
    pub fn new(times: Vec<f64>, centers: Vec<Vec<f64>>, radii: Vec<f64>) -> Result<Self> {
        if times.len() != centers.len() || times.len() != radii.len() {
            return Err(Error::GridMismatch {
                expected: times.len(),
                actual: centers.len().min(radii.len()),
            });
        }
        if let Some(w) = times.windows(2).find(|w| !(w[0] < w[1])) {
            return Err(Error::TimeOrder {
                earlier: w[0],
                later: w[1],
            });
        }
        if radii.iter().any(|r| !(*r >= 0.0)) {
            return Err(crate::error::invalid("radii", "must be nonnegative"));
        }
        Ok(Self {
            times,
            centers,
            radii,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Centre-of-mass path as a flat point list.
    pub fn center_points(&self) -> Vec<f64> {
        self.centers.iter().flatten().copied().collect()
    }
}

/// `X_t = ∫₀ᴶ u(t,x) dx / J`, i.e. the mode-0 coefficients.
pub fn center_of_mass(state: &StringState) -> Vec<f64> {
    state.mean.clone()
}

/// `max_x |u(t,x) − X_t|` over the model's evaluation grid. The grid maximum
/// never exceeds the continuum supremum.
pub fn radius(model: &SpectralModel, state: &StringState) -> f64 {
    let f = model.evaluate_fluctuation(state);
    f.points()
        .map(|p| p.iter().map(|v| v * v).sum::<f64>())
        .fold(0.0, f64::max)
        .sqrt()
}

/// Diameter of the sampled point set, by exhaustive pairwise comparison.
pub fn range_of(samples: &FieldSamples) -> Result<f64> {
    if samples.values.is_empty() {
        return Err(Error::Empty("samples"));
    }
    Ok(diameter(&samples.values, samples.dim))
}

/// Diameter of a flat `dim`-dimensional point list (0 when empty).
pub fn diameter(points: &[f64], dim: usize) -> f64 {
    let n = points.len() / dim;
    let mut best = 0.0f64;
    for i in 0..n {
        let p = &points[i * dim..(i + 1) * dim];
        for j in i + 1..n {
            let q = &points[j * dim..(j + 1) * dim];
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.max(d2);
        }
    }
    best.sqrt()
}

/// Sample Pearson correlation; 0 when either factor has zero variance.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len().min(y.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndependenceReport {
    pub n: usize,
    /// `corr(X_Tʲ, R_T)` for each coordinate `j`.
    pub correlations: Vec<f64>,
    pub threshold: f64,
    pub passed: bool,
}

/// Minimum replica count accepted by [`independence_test`].
pub const MIN_INDEPENDENCE_REPLICAS: usize = 100;

/// Per-coordinate correlation between `X_T` and `R_T` with pass threshold
/// `4/√N`.
pub fn independence_test(replicas: &[(Vec<f64>, f64)]) -> Result<IndependenceReport> {
    let n = replicas.len();
    if n < MIN_INDEPENDENCE_REPLICAS {
        return Err(Error::InsufficientSamples {
            needed: MIN_INDEPENDENCE_REPLICAS,
            got: n,
        });
    }
    let dim = replicas[0].0.len();
    if let Some((x, _)) = replicas.iter().find(|(x, _)| x.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            actual: x.len(),
        });
    }
    let radii: Vec<f64> = replicas.iter().map(|(_, r)| *r).collect();
    let correlations: Vec<f64> = (0..dim)
        .map(|j| {
            let xs: Vec<f64> = replicas.iter().map(|(x, _)| x[j]).collect();
            correlation(&xs, &radii)
        })
        .collect();
    let threshold = 4.0 / (n as f64).sqrt();
    let passed = correlations.iter().all(|c| c.abs() <= threshold);
    Ok(IndependenceReport {
        n,
        correlations,
        threshold,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KsReport {
    pub n: usize,
    pub statistic: f64,
    /// Asymptotic 1% critical value `1.6276/√N`.
    pub critical_value: f64,
    pub passed: bool,
}

/// One-sample Kolmogorov–Smirnov test against `N(0,1)`.
pub fn ks_standard_normal(samples: &[f64]) -> Result<KsReport> {
    if samples.is_empty() {
        return Err(Error::Empty("samples"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("samples"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let n = sorted.len() as f64;
    let mut statistic = 0.0f64;
    for (i, v) in sorted.iter().enumerate() {
        let f = normal.cdf(*v);
        statistic = statistic
            .max((i as f64 + 1.0) / n - f)
            .max(f - i as f64 / n);
    }
    let critical_value = 1.6276 / n.sqrt();
    Ok(KsReport {
        n: sorted.len(),
        statistic,
        critical_value,
        passed: statistic <= critical_value,
    })
}

/// Sample mean and unbiased sample variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if n == 0.0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, SeedTree};
    use crate::spectral::ModelParams;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn model(dim: usize, modes: usize, grid: usize) -> SpectralModel {
        SpectralModel::new(ModelParams {
            dim,
            modes,
            grid,
            tail_tolerance: 1.0,
            ..ModelParams::default()
        })
        .unwrap()
    }

    #[test]
    fn center_and_radius_examples() {
        let m = model(1, 4, 64);
        let s = StringState::constant(&[3.0], 4, 1.0);
        assert_eq!(center_of_mass(&s), vec![3.0]);
        assert_eq!(radius(&m, &s), 0.0);

        let mut s = m.zero_state();
        let i = s.idx(0, 1);
        s.cos[i] = 1.0;
        assert_eq!(center_of_mass(&s), vec![0.0]);
        assert!((radius(&m, &s) - 2f64.sqrt()).abs() < 1e-12);

        let m2 = model(2, 4, 64);
        let mut s = m2.zero_state();
        let (i, k) = (s.idx(0, 1), s.idx(1, 1));
        s.cos[i] = 1.0;
        s.sin[k] = 1.0;
        assert!((radius(&m2, &s) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn range_examples() {
        let f = FieldSamples::from_fn(1.0, 1, 64, |x| {
            vec![2f64.sqrt() * (2.0 * std::f64::consts::PI * x).cos()]
        });
        assert!((range_of(&f).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let c = FieldSamples::from_fn(1.0, 2, 8, |_| vec![1.0, -4.0]);
        assert_eq!(range_of(&c).unwrap(), 0.0);
        let shifted = FieldSamples {
            values: f.values.iter().map(|v| v + 17.5).collect(),
            ..f.clone()
        };
        assert!((range_of(&shifted).unwrap() - range_of(&f).unwrap()).abs() < 1e-12);
        let empty = FieldSamples {
            length: 1.0,
            dim: 1,
            values: vec![],
        };
        assert!(range_of(&empty).is_err());
    }

    #[test]
    fn zero_variance_correlation_is_zero() {
        let reps: Vec<(Vec<f64>, f64)> = (0..200).map(|i| (vec![i as f64], 1.0)).collect();
        let rep = independence_test(&reps).unwrap();
        assert_eq!(rep.correlations, vec![0.0]);
        assert!(rep.passed);
        assert!(independence_test(&reps[..50]).is_err());
    }

    #[test]
    fn dependence_is_detected() {
        let mut rng = SeedTree::new(3).stream(Purpose::Diagnostics, 0);
        let reps: Vec<(Vec<f64>, f64)> = (0..1000)
            .map(|_| {
                let x: f64 = rng.sample(StandardNormal);
                (vec![x.abs()], x.abs())
            })
            .collect();
        let rep = independence_test(&reps).unwrap();
        assert!((rep.correlations[0] - 1.0).abs() < 1e-12);
        assert!(!rep.passed);
    }

    #[test]
    fn ks_accepts_normals_and_rejects_uniforms() {
        let mut rng = SeedTree::new(9).stream(Purpose::Diagnostics, 0);
        let normals: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        assert!(ks_standard_normal(&normals).unwrap().passed);
        let uniforms: Vec<f64> = (0..10_000).map(|_| rng.gen::<f64>()).collect();
        assert!(!ks_standard_normal(&uniforms).unwrap().passed);
    }

    #[test]
    fn path_record_invariants() {
        assert!(PathRecord::new(vec![0.0, 1.0], vec![vec![0.0]; 2], vec![0.0, 1.0]).is_ok());
        assert!(PathRecord::new(vec![1.0, 1.0], vec![vec![0.0]; 2], vec![0.0, 1.0]).is_err());
        assert!(PathRecord::new(vec![0.0, 1.0], vec![vec![0.0]; 2], vec![0.0, -1.0]).is_err());
        assert!(PathRecord::new(vec![0.0], vec![vec![0.0]; 2], vec![0.0]).is_err());
    }

    fn field(dim: usize) -> impl Strategy<Value = FieldSamples> {
        prop::collection::vec(-5.0f64..5.0, dim * 16).prop_map(move |values| FieldSamples {
            length: 1.0,
            dim,
            values,
        })
    }

    proptest! {
        #[test]
        fn range_is_subadditive(f in field(2), g in field(2)) {
            let sum = FieldSamples {
                values: f.values.iter().zip(&g.values).map(|(a, b)| a + b).collect(),
                ..f.clone()
            };
            let lhs = range_of(&sum).unwrap() - range_of(&f).unwrap();
            prop_assert!(lhs <= range_of(&g).unwrap() + 1e-12);
        }

        #[test]
        fn radius_and_range_sandwich(coeffs in prop::collection::vec(-1.0f64..1.0, 2 * 2 * 6 + 2)) {
            let m = model(2, 6, 32);
            let mut s = m.zero_state();
            s.mean.copy_from_slice(&coeffs[..2]);
            s.cos.copy_from_slice(&coeffs[2..14]);
            s.sin.copy_from_slice(&coeffs[14..26]);
            let r = radius(&m, &s);
            let range = range_of(&m.evaluate(&s)).unwrap();
            prop_assert!(r <= range + 1e-9);
            prop_assert!(range <= 2.0 * r + 1e-9);
        }
    }
}
