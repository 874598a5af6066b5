//! Builders for named data sets, products and quotients.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::metrics::observable_diameter;
use crate::model::{
    first_non_lipschitz_row, pushforward, DiscreteMeasure, FeatureFamily, GeometricDataSet,
};
use crate::scalar::{NumericMode, Scalar};

/// One point, one constant feature per element of `values`, Dirac measure.
pub fn singleton_gds<S: Scalar>(values: &[S]) -> Result<GeometricDataSet<S>> {
    if values.is_empty() {
        return Err(Error::EmptyFeatureFamily);
    }
    let rows = values.iter().map(|v| vec![v.clone()]).collect();
    let labels = values.iter().map(|v| format!("c{}", v.exact_string())).collect();
    GeometricDataSet::with_labels(
        vec!["*".to_string()],
        FeatureFamily::new(rows, labels)?,
        DiscreteMeasure::dirac(),
    )
}

/// `X_N`: points `1..=N`, uniform, features `d_m(n) = [n != m]`.
pub fn n_point_discrete<S: Scalar>(n: usize) -> Result<GeometricDataSet<S>> {
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    let rows = (0..n)
        .map(|m| (0..n).map(|p| if p == m { S::zero() } else { S::one() }).collect())
        .collect();
    let labels = (1..=n).map(|m| format!("d{m}")).collect();
    GeometricDataSet::with_labels(
        (1..=n).map(|p| p.to_string()).collect(),
        FeatureFamily::new(rows, labels)?,
        DiscreteMeasure::uniform(n)?,
    )
}

/// `X × Y` with features `F_X ∘ pr_1 ∪ F_Y ∘ pr_2` and the product measure.
/// Point `(x, y)` has index `x * |Y| + y`.
pub fn product_gds<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
) -> Result<GeometricDataSet<S>> {
    let m = y.len();
    let cells = x.len() * m;
    let first: Vec<usize> = (0..cells).map(|c| c / m).collect();
    let second: Vec<usize> = (0..cells).map(|c| c % m).collect();
    let mut left = x.features().pull_back(&first);
    let mut right = y.features().pull_back(&second);
    left = relabel(left, "x.")?;
    right = relabel(right, "y.")?;
    let features = left.concat(&right)?;
    let points = (0..cells)
        .map(|c| format!("({},{})", x.points()[c / m], y.points()[c % m]))
        .collect();
    GeometricDataSet::with_labels(points, features, x.measure().product(y.measure()))
}

fn relabel<S: Scalar>(f: FeatureFamily<S>, prefix: &str) -> Result<FeatureFamily<S>> {
    let labels = f.labels().iter().map(|l| format!("{prefix}{l}")).collect();
    FeatureFamily::new(f.rows().to_vec(), labels)
}

/// The projection `X × Y -> X` as a point map.
pub fn first_projection(x_len: usize, y_len: usize) -> Vec<usize> {
    (0..x_len * y_len).map(|c| c / y_len).collect()
}

/// A quotient of `X` by a 1-Lipschitz family `G`, with its quotient map.
#[derive(Debug, Clone, PartialEq)]
pub struct Quotient<S> {
    pub data: GeometricDataSet<S>,
    /// `map[x]` is the class of `x`.
    pub map: Vec<usize>,
}

/// Merges points at `d_G`-distance zero, pushes the measure forward and
/// descends `G` to the classes. The quotient carries exactly the descended
/// rows, so `F_Y ∘ map = G` row for row.
pub fn quotient_gds<S: Scalar>(x: &GeometricDataSet<S>, g: &[Vec<S>]) -> Result<Quotient<S>> {
    let labels = (0..g.len()).map(|i| format!("g{i}")).collect();
    let family = FeatureFamily::new(g.to_vec(), labels)?;
    quotient_by_family(x, &family)
}

/// Quotient by the features of `X` with the given indices.
pub fn quotient_by_rows<S: Scalar>(x: &GeometricDataSet<S>, rows: &[usize]) -> Result<Quotient<S>> {
    quotient_by_family(x, &x.features().select(rows)?)
}

pub fn quotient_by_family<S: Scalar>(
    x: &GeometricDataSet<S>,
    g: &FeatureFamily<S>,
) -> Result<Quotient<S>> {
    if g.points() != x.len() {
        return Err(Error::LengthMismatch {
            left: g.points(),
            right: x.len(),
        });
    }
    if let Some(row) = first_non_lipschitz_row(g.rows(), x.metric()) {
        return Err(Error::NotLipschitzFamily { row });
    }
    let n = x.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut a: usize) -> usize {
        while parent[a] != a {
            parent[a] = parent[parent[a]];
            a = parent[a];
        }
        a
    }
    let dg = crate::model::induced_metric(g);
    for a in 0..n {
        for b in a + 1..n {
            if dg[(a, b)].is_negligible() {
                if S::MODE == NumericMode::Float && !dg[(a, b)].is_zero() {
                    log::warn!(
                        "merging points {a} and {b} at distance {} within tolerance",
                        dg[(a, b)]
                    );
                }
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut class_of_root = vec![usize::MAX; n];
    let mut reps = Vec::new();
    let mut map = Vec::with_capacity(n);
    for p in 0..n {
        let r = find(&mut parent, p);
        if class_of_root[r] == usize::MAX {
            class_of_root[r] = reps.len();
            reps.push(p);
        }
        map.push(class_of_root[r]);
    }
    let pushed = pushforward(x.measure(), &map, reps.len())?;
    let rows = g
        .rows()
        .iter()
        .map(|r| reps.iter().map(|&p| r[p].clone()).collect())
        .collect();
    let features = FeatureFamily::new(rows, g.labels().to_vec())?;
    let points = (0..reps.len())
        .map(|c| {
            (0..n)
                .filter(|&p| map[p] == c)
                .map(|p| x.points()[p].clone())
                .collect::<Vec<_>>()
                .join("+")
        })
        .collect();
    let data = GeometricDataSet::with_labels(points, features, pushed.measure)?;
    Ok(Quotient { data, map })
}

#[derive(Debug, Clone, PartialEq)]
pub enum LevyKind<S> {
    /// `X_1, X_2, ..., X_N`.
    Discrete,
    /// `B, B × B, ...` for a base data set `B`.
    ProductPowers(GeometricDataSet<S>),
}

pub fn levy_sequence<S: Scalar>(kind: &LevyKind<S>, n_max: usize) -> Result<Vec<GeometricDataSet<S>>> {
    let mut out = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let next = match kind {
            LevyKind::Discrete => n_point_discrete(n)?,
            LevyKind::ProductPowers(base) => match out.last() {
                None => base.clone(),
                Some(prev) => product_gds(prev, base)?,
            },
        };
        out.push(next);
    }
    Ok(out)
}

/// `table[n][k] = od(X_n; -κ_k)`.
pub fn levy_table<S: Scalar>(seq: &[GeometricDataSet<S>], kappas: &[S]) -> Result<Vec<Vec<S>>> {
    seq.iter()
        .map(|x| kappas.iter().map(|k| observable_diameter(x, k)).collect())
        .collect()
}

/// A random data set with `n` points and `k` features whose values are
/// multiples of `scale / 8` in `[0, scale]`, and weights proportional to
/// integers in `1..=4`. Separation is enforced by redrawing; after repeated
/// failures the first feature is replaced by distinct values.
pub fn random_gds<S: Scalar>(n: usize, k: usize, seed: u64, scale: i64) -> Result<GeometricDataSet<S>> {
    if n == 0 {
        return Err(Error::EmptyMeasure);
    }
    if k == 0 {
        return Err(Error::EmptyFeatureFamily);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<i64> = (0..n).map(|_| rng.random_range(1..=4)).collect();
    let total: i64 = raw.iter().sum();
    let weights: Vec<S> = raw.iter().map(|&w| S::from_ratio(w, total)).collect();
    let measure = DiscreteMeasure::new(weights)?;
    for attempt in 0..64 {
        let mut rows: Vec<Vec<S>> = (0..k)
            .map(|_| {
                (0..n)
                    .map(|_| S::from_ratio(rng.random_range(0..=8) * scale, 8))
                    .collect()
            })
            .collect();
        if attempt == 63 {
            let mut perm: Vec<i64> = (0..n as i64).collect();
            perm.shuffle(&mut rng);
            rows[0] = perm
                .iter()
                .map(|&p| S::from_ratio(p * scale, n as i64))
                .collect();
        }
        let features = FeatureFamily::from_rows(rows)?;
        match GeometricDataSet::new(features, measure.clone()) {
            Ok(x) => return Ok(x),
            Err(Error::SeparationFailure(..)) => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("the last attempt separates all points")
}
