//! Finite geometric data sets and mm-spaces.
//!
//! Points are indexed `0..n` and every structure is a dense matrix. A feature
//! family is kept exactly as given; for a finite family the pointwise closure
//! of the family is the family itself, so no closure step is ever applied.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{max_all, Scalar};

/// Probability weights with full support.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure<S> {
    weights: Vec<S>,
}

impl<S: Scalar> DiscreteMeasure<S> {
    /// Rejects zero or negative weights and totals other than one.
    pub fn new(weights: Vec<S>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        for (index, w) in weights.iter().enumerate() {
            if *w <= S::zero() {
                return Err(Error::NonPositiveWeight { index });
            }
        }
        check_unit_mass(&weights)?;
        Ok(DiscreteMeasure { weights })
    }

    /// Drops zero weights instead of rejecting them. Returns the measure on
    /// the surviving points and their original indices.
    pub fn normalize_support(weights: Vec<S>) -> Result<(Self, Vec<usize>)> {
        let mut kept = Vec::new();
        let mut out = Vec::new();
        for (index, w) in weights.into_iter().enumerate() {
            if w < S::zero() {
                return Err(Error::NegativeWeight { index });
            }
            if w > S::zero() {
                kept.push(index);
                out.push(w);
            }
        }
        if out.is_empty() {
            return Err(Error::EmptyMeasure);
        }
        check_unit_mass(&out)?;
        Ok((DiscreteMeasure { weights: out }, kept))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMeasure);
        }
        Ok(DiscreteMeasure {
            weights: vec![S::from_ratio(1, n as i64); n],
        })
    }

    pub fn dirac() -> Self {
        DiscreteMeasure {
            weights: vec![S::one()],
        }
    }

    /// Product measure, indexed `x * nu.len() + y`.
    pub fn product(&self, nu: &Self) -> Self {
        let mut weights = Vec::with_capacity(self.len() * nu.len());
        for a in &self.weights {
            for b in &nu.weights {
                weights.push(a.clone() * b);
            }
        }
        DiscreteMeasure { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &S {
        &self.weights[i]
    }

    pub fn max_atom(&self) -> S {
        max_all(self.weights.iter().cloned()).unwrap_or_else(S::zero)
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut weights = self.weights.clone();
        for (i, &p) in perm.iter().enumerate() {
            weights[p] = self.weights[i].clone();
        }
        DiscreteMeasure { weights }
    }
}

pub(crate) fn check_unit_mass<S: Scalar>(weights: &[S]) -> Result<()> {
    let sum: S = weights.iter().cloned().sum();
    if (sum.clone() - S::one()).abs() > S::mass_tolerance() {
        return Err(Error::MassNotOne {
            sum: sum.exact_string(),
        });
    }
    Ok(())
}

/// Finite family of real features on `points` points; one row per feature.
/// Duplicate rows are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFamily<S> {
    rows: Vec<Vec<S>>,
    labels: Vec<String>,
    points: usize,
}

impl<S: Scalar> FeatureFamily<S> {
    pub fn new(rows: Vec<Vec<S>>, labels: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyFeatureFamily);
        }
        let points = rows[0].len();
        if points == 0 {
            return Err(Error::EmptyMeasure);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != points {
                return Err(Error::RaggedFeatures {
                    row,
                    len: r.len(),
                    expected: points,
                });
            }
        }
        if labels.len() != rows.len() {
            return Err(Error::LabelCount {
                labels: labels.len(),
                expected: rows.len(),
            });
        }
        Ok(FeatureFamily {
            rows,
            labels,
            points,
        })
    }

    /// Labels rows `f0, f1, ...`.
    pub fn from_rows(rows: Vec<Vec<S>>) -> Result<Self> {
        let labels = (0..rows.len()).map(|i| format!("f{i}")).collect();
        Self::new(rows, labels)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<S>] {
        &self.rows
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Composition `F ∘ map` for a point map `map: 0..len -> 0..points`.
    pub fn pull_back(&self, map: &[usize]) -> Self {
        let rows = self
            .rows
            .iter()
            .map(|r| map.iter().map(|&p| r[p].clone()).collect())
            .collect();
        FeatureFamily {
            rows,
            labels: self.labels.clone(),
            points: map.len(),
        }
    }

    /// Appends the rows of `other` (same point count).
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if other.points != self.points {
            return Err(Error::LengthMismatch {
                left: self.points,
                right: other.points,
            });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend(other.labels.iter().cloned());
        Ok(FeatureFamily {
            rows,
            labels,
            points: self.points,
        })
    }

    /// Index of the first occurrence of each distinct row.
    pub fn distinct_rows(&self) -> Vec<usize> {
        let mut keep: Vec<usize> = Vec::new();
        for (i, r) in self.rows.iter().enumerate() {
            if !keep.iter().any(|&k| rows_equal(&self.rows[k], r)) {
                keep.push(i);
            }
        }
        keep
    }

    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let rows = indices.iter().map(|&i| self.rows[i].clone()).collect();
        let labels = indices.iter().map(|&i| self.labels[i].clone()).collect();
        Self::new(rows, labels)
    }
}

pub(crate) fn rows_equal<S: Scalar>(a: &[S], b: &[S]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.approx_eq(y))
}

/// Sup-norm distance between two functions on the same points.
pub(crate) fn sup_norm<S: Scalar>(a: &[S], b: &[S]) -> S {
    max_all(a.iter().zip(b).map(|(x, y)| (x.clone() - y).abs())).unwrap_or_else(S::zero)
}

/// `d_F(x, y) = max_f |f(x) - f(y)|`.
pub fn induced_metric<S: Scalar>(features: &FeatureFamily<S>) -> Matrix<S> {
    let n = features.points();
    Matrix::from_fn(n, n, |x, y| {
        max_all(
            features
                .rows()
                .iter()
                .map(|r| (r[x].clone() - &r[y]).abs()),
        )
        .unwrap_or_else(S::zero)
    })
}

/// Whether every row is 1-Lipschitz for `dist` (within tolerance).
pub fn first_non_lipschitz_row<S: Scalar>(rows: &[Vec<S>], dist: &Matrix<S>) -> Option<usize> {
    rows.iter().position(|r| !is_lipschitz(r, dist))
}

pub fn is_lipschitz<S: Scalar>(f: &[S], dist: &Matrix<S>) -> bool {
    let n = f.len();
    (0..n).all(|x| {
        (x + 1..n).all(|y| !(f[x].clone() - &f[y]).abs().definitely_gt(&dist[(x, y)]))
    })
}

/// A finite geometric data set: points, a feature family whose induced
/// metric separates them, and a full-support probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometricDataSet<S> {
    points: Vec<String>,
    features: FeatureFamily<S>,
    measure: DiscreteMeasure<S>,
    metric: Matrix<S>,
}

impl<S: Scalar> GeometricDataSet<S> {
    pub fn new(features: FeatureFamily<S>, measure: DiscreteMeasure<S>) -> Result<Self> {
        let labels = (0..features.points()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, features, measure)
    }

    pub fn with_labels(
        points: Vec<String>,
        features: FeatureFamily<S>,
        measure: DiscreteMeasure<S>,
    ) -> Result<Self> {
        if features.points() != measure.len() {
            return Err(Error::LengthMismatch {
                left: features.points(),
                right: measure.len(),
            });
        }
        if points.len() != measure.len() {
            return Err(Error::LabelCount {
                labels: points.len(),
                expected: measure.len(),
            });
        }
        let metric = induced_metric(&features);
        let n = measure.len();
        for x in 0..n {
            for y in x + 1..n {
                if metric[(x, y)].is_negligible() {
                    return Err(Error::SeparationFailure(x, y));
                }
            }
        }
        Ok(GeometricDataSet {
            points,
            features,
            measure,
            metric,
        })
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn features(&self) -> &FeatureFamily<S> {
        &self.features
    }

    pub fn measure(&self) -> &DiscreteMeasure<S> {
        &self.measure
    }

    pub fn metric(&self) -> &Matrix<S> {
        &self.metric
    }

    /// Moves point `i` to position `perm[i]`.
    pub fn relabeled(&self, perm: &[usize]) -> Result<Self> {
        let n = self.len();
        let mut inverse = vec![0; n];
        for (i, &p) in perm.iter().enumerate() {
            inverse[p] = i;
        }
        let features = self.features.pull_back(&inverse);
        let points = inverse.iter().map(|&i| self.points[i].clone()).collect();
        Self::with_labels(points, features, self.measure.permuted(perm))
    }
}

/// A finite mm-space: a metric with strictly positive off-diagonal entries
/// and a full-support probability measure.
#[derive(Debug, Clone, PartialEq)]
pub struct MmSpace<S> {
    dist: Matrix<S>,
    measure: DiscreteMeasure<S>,
}

impl<S: Scalar> MmSpace<S> {
    pub fn new(dist: Matrix<S>, measure: DiscreteMeasure<S>) -> Result<Self> {
        let n = measure.len();
        if dist.shape() != (n, n) {
            return Err(Error::ShapeMismatch {
                expected: (n, n),
                found: dist.shape(),
            });
        }
        for x in 0..n {
            if !dist[(x, x)].is_negligible() {
                return Err(Error::InvalidMetric(format!("nonzero diagonal at {x}")));
            }
            for y in 0..n {
                if !dist[(x, y)].approx_eq(&dist[(y, x)]) {
                    return Err(Error::InvalidMetric(format!("asymmetric at ({x}, {y})")));
                }
                if x != y && dist[(x, y)] <= S::tolerance() {
                    return Err(Error::SeparationFailure(x.min(y), x.max(y)));
                }
                for z in 0..n {
                    let via = dist[(x, z)].clone() + &dist[(z, y)];
                    if dist[(x, y)].definitely_gt(&via) {
                        return Err(Error::InvalidMetric(format!(
                            "triangle inequality fails for ({x}, {y}) via {z}"
                        )));
                    }
                }
            }
        }
        Ok(MmSpace { dist, measure })
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    pub fn dist(&self) -> &Matrix<S> {
        &self.dist
    }

    pub fn measure(&self) -> &DiscreteMeasure<S> {
        &self.measure
    }

    pub fn diameter(&self) -> S {
        max_all(self.dist.as_slice().iter().cloned()).unwrap_or_else(S::zero)
    }
}

/// The mm-space `(X, d_F, mu)` underlying a geometric data set.
pub fn gds_to_mm<S: Scalar>(x: &GeometricDataSet<S>) -> Result<MmSpace<S>> {
    MmSpace::new(induced_metric(x.features()), x.measure().clone())
}

/// The distance functions `d(p, .)`, one per point. Their induced metric is
/// `m.dist()` exactly.
pub fn mm_lip1_generators<S: Scalar>(m: &MmSpace<S>) -> FeatureFamily<S> {
    let rows = (0..m.len()).map(|p| m.dist().row(p).to_vec()).collect();
    let labels = (0..m.len()).map(|p| format!("d{p}")).collect();
    FeatureFamily::new(rows, labels).expect("non-empty square metric")
}

/// The distance generators followed by `count` random 1-Lipschitz functions
/// `z -> min_a (v_a + d(a, z))` over random anchor sets. Deterministic for a
/// given seed.
pub fn sample_lip1<S: Scalar>(m: &MmSpace<S>, count: usize, seed: u64) -> FeatureFamily<S> {
    let generators = mm_lip1_generators(m);
    if count == 0 {
        return generators;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = m.len();
    let diam = m.diameter();
    let scale = if diam.is_negligible() { S::one() } else { diam };
    let mut rows = Vec::with_capacity(count);
    for _ in 0..count {
        let anchors: Vec<(usize, S)> = loop {
            let mut chosen: Vec<(usize, S)> = Vec::new();
            for a in 0..n {
                if rng.random_bool(0.5) {
                    chosen.push((a, S::from_ratio(rng.random_range(0..=16), 16) * &scale));
                }
            }
            if !chosen.is_empty() {
                break chosen;
            }
        };
        let row = (0..n)
            .map(|z| {
                anchors
                    .iter()
                    .map(|(a, v)| v.clone() + &m.dist()[(*a, z)])
                    .reduce(|p, q| p.min_of(q))
                    .expect("non-empty anchors")
            })
            .collect();
        rows.push(row);
    }
    let labels = (0..count).map(|i| format!("lip{i}")).collect();
    let sampled = FeatureFamily::new(rows, labels).expect("rows have n entries");
    generators.concat(&sampled).expect("same point count")
}

/// Result of pushing a measure forward along a point map.
#[derive(Debug, Clone, PartialEq)]
pub struct Pushforward<S> {
    /// Mass of every target point, zeros included.
    pub full: Vec<S>,
    /// The measure restricted to its support.
    pub measure: DiscreteMeasure<S>,
    /// Target index of each point of `measure`.
    pub kept: Vec<usize>,
}

pub fn pushforward<S: Scalar>(
    measure: &DiscreteMeasure<S>,
    map: &[usize],
    targets: usize,
) -> Result<Pushforward<S>> {
    if map.len() != measure.len() {
        return Err(Error::LengthMismatch {
            left: map.len(),
            right: measure.len(),
        });
    }
    let mut full = vec![S::zero(); targets];
    for (w, &t) in measure.weights().iter().zip(map) {
        if t >= targets {
            return Err(Error::InvalidParameter(format!(
                "map sends a point to {t}, only {targets} targets"
            )));
        }
        full[t] += w;
    }
    let (pushed, kept) = DiscreteMeasure::normalize_support(full.clone())?;
    Ok(Pushforward {
        full,
        measure: pushed,
        kept,
    })
}
