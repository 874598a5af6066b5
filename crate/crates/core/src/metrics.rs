//! Ky Fan and Prohorov metrics, Hausdorff distances, partial and observable
//! diameters.

use crate::cells::CellSet;
use crate::coupling::flow::bipartite_max_flow;
use crate::coupling::Coupling;
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::matrix::Matrix;
use crate::model::GeometricDataSet;
use crate::scalar::{max_all, min_all, sorted_distinct, Scalar};

/// `min { ε >= 0 : μ(|a - b| > ε) <= ε }`.
///
/// On `[d_j, d_{j+1})` between consecutive distinct differences the tail
/// mass is a constant `T_j`, so the first interval where `max(d_j, T_j)`
/// does not pass `d_{j+1}` gives the answer.
pub fn ky_fan<S: Scalar>(measure: &[S], a: &[S], b: &[S]) -> Result<S> {
    if a.len() != measure.len() || b.len() != measure.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len().max(measure.len()),
        });
    }
    let diffs: Vec<S> = a.iter().zip(b).map(|(x, y)| (x.clone() - y).abs()).collect();
    Ok(ky_fan_from_diffs(measure, &diffs))
}

pub(crate) fn ky_fan_from_diffs<S: Scalar>(measure: &[S], diffs: &[S]) -> S {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&i, &j| diffs[i].total_cmp(&diffs[j]));
    let total: S = measure.iter().cloned().sum();
    let mut level = S::zero();
    let mut below = S::zero();
    let mut k = 0;
    loop {
        // mass with diff <= level
        while k < order.len() && !diffs[order[k]].definitely_gt(&level) {
            below += &measure[order[k]];
            k += 1;
        }
        let tail = total.clone() - &below;
        let candidate = level.clone().max_of(tail);
        if k == order.len() {
            return candidate;
        }
        let next = &diffs[order[k]];
        if candidate <= *next {
            return candidate;
        }
        level = next.clone();
    }
}

/// Ky Fan distance under a coupling between `f ∘ pr_1` and `g ∘ pr_2`.
pub fn ky_fan_coupling<S: Scalar>(pi: &Coupling<S>, f: &[S], g: &[S]) -> Result<S> {
    if f.len() != pi.rows() || g.len() != pi.cols() {
        return Err(Error::ShapeMismatch {
            expected: (pi.rows(), pi.cols()),
            found: (f.len(), g.len()),
        });
    }
    let m = pi.cols();
    let diffs: Vec<S> = (0..pi.rows() * m)
        .map(|c| (f[c / m].clone() - &g[c % m]).abs())
        .collect();
    Ok(ky_fan_from_diffs(pi.weights(), &diffs))
}

fn check_prohorov_input<S: Scalar>(mu: &[S], nu: &[S], d: &Matrix<S>) -> Result<()> {
    if mu.len() != nu.len() {
        return Err(Error::LengthMismatch {
            left: mu.len(),
            right: nu.len(),
        });
    }
    if d.shape() != (mu.len(), mu.len()) {
        return Err(Error::ShapeMismatch {
            expected: (mu.len(), mu.len()),
            found: d.shape(),
        });
    }
    Ok(())
}

fn distance_levels<S: Scalar>(d: &Matrix<S>) -> Vec<S> {
    let mut levels = d.as_slice().to_vec();
    levels.push(S::zero());
    sorted_distinct(levels)
}

/// Combines the per-level deficits: the answer is `max(δ_j, m_j)` at the
/// first level whose value does not exceed the next level.
fn first_feasible<S: Scalar>(levels: &[S], j: usize, deficit: S) -> Option<S> {
    let value = levels[j].clone().max_of(deficit);
    match levels.get(j + 1) {
        Some(next) if value > *next => None,
        _ => Some(value),
    }
}

pub const PROHOROV_BRUTE_FORCE_MAX: usize = 20;

/// Prohorov distance by scanning every subset `A` (n <= 20).
pub fn prohorov_brute_force<S: Scalar>(mu: &[S], nu: &[S], d: &Matrix<S>) -> Result<S> {
    prohorov_brute_force_with(Exec::default(), mu, nu, d)
}

pub fn prohorov_brute_force_with<S: Scalar>(
    exec: Exec,
    mu: &[S],
    nu: &[S],
    d: &Matrix<S>,
) -> Result<S> {
    check_prohorov_input(mu, nu, d)?;
    let n = mu.len();
    if n > PROHOROV_BRUTE_FORCE_MAX {
        return Err(Error::SizeLimit {
            cells: n,
            limit: PROHOROV_BRUTE_FORCE_MAX,
        });
    }
    let levels = distance_levels(d);
    for j in 0..levels.len() {
        // ball[a]: points within level j of a
        let ball: Vec<u32> = (0..n)
            .map(|a| {
                (0..n)
                    .filter(|&x| !d[(x, a)].definitely_gt(&levels[j]))
                    .fold(0u32, |acc, x| acc | 1 << x)
            })
            .collect();
        let subsets = 1u64 << n;
        let chunks = subsets.div_ceil(exec::CHUNK);
        let deficits = exec::map_range(exec, chunks as usize, |chunk| {
            let start = chunk as u64 * exec::CHUNK;
            let end = (start + exec::CHUNK).min(subsets);
            let mut best = S::zero();
            for a in start..end {
                let a = a as u32;
                let mut hood = 0u32;
                let mut nu_a = S::zero();
                for p in 0..n {
                    if a >> p & 1 == 1 {
                        hood |= ball[p];
                        nu_a += &nu[p];
                    }
                }
                let mu_u: S = (0..n)
                    .filter(|&x| hood >> x & 1 == 1)
                    .map(|x| mu[x].clone())
                    .sum();
                let gap = nu_a - mu_u;
                if gap > best {
                    best = gap;
                }
            }
            best
        });
        let deficit = max_all(deficits).unwrap_or_else(S::zero);
        if let Some(v) = first_feasible(&levels, j, deficit) {
            return Ok(v);
        }
    }
    unreachable!("the last level is always feasible")
}

/// Prohorov distance via Strassen's theorem: the deficit at level `δ_j` is
/// `ν(X) - maxflow(ν -> μ along d <= δ_j)`. The predicate is monotone in `j`,
/// so the first feasible level is found by bisection.
pub fn prohorov<S: Scalar>(mu: &[S], nu: &[S], d: &Matrix<S>) -> Result<S> {
    check_prohorov_input(mu, nu, d)?;
    let levels = distance_levels(d);
    let total: S = nu.iter().cloned().sum();
    let deficit = |j: usize| {
        let (flow, _) = bipartite_max_flow(nu, mu, |y, x| !d[(y, x)].definitely_gt(&levels[j]));
        let gap = total.clone() - flow;
        if gap > S::zero() {
            gap
        } else {
            S::zero()
        }
    };
    let (mut lo, mut hi) = (0, levels.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if first_feasible(&levels, mid, deficit(mid)).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(first_feasible(&levels, lo, deficit(lo)).expect("last level is feasible"))
}

/// Prohorov distance between `a_* μ` and `b_* μ` on the real line.
pub fn prohorov_of_pushforwards<S: Scalar>(measure: &[S], a: &[S], b: &[S]) -> Result<S> {
    if a.len() != measure.len() || b.len() != measure.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let points = sorted_distinct(a.iter().chain(b).cloned().collect());
    let index = |v: &S| {
        points
            .iter()
            .position(|p| p.approx_eq(v))
            .expect("value is among the points")
    };
    let mut pa = vec![S::zero(); points.len()];
    let mut pb = vec![S::zero(); points.len()];
    for i in 0..measure.len() {
        pa[index(&a[i])] += &measure[i];
        pb[index(&b[i])] += &measure[i];
    }
    let d = Matrix::from_fn(points.len(), points.len(), |i, j| {
        (points[i].clone() - &points[j]).abs()
    });
    prohorov(&pa, &pb, &d)
}

/// `max_{(x, y) ∈ S} |u - v|` over grid-indexed values; zero on the empty set.
pub fn sup_pseudometric<S: Scalar>(set: &CellSet, u: &[S], v: &[S]) -> Result<S> {
    let cells = set.rows() * set.cols();
    if u.len() != cells || v.len() != cells {
        return Err(Error::LengthMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let m = set.cols();
    Ok(max_all(set.iter().map(|(x, y)| {
        let c = x * m + y;
        (u[c].clone() - &v[c]).abs()
    }))
    .unwrap_or_else(S::zero))
}

/// `sup_{(x, y) ∈ S} |f(x) - g(y)|`, the sup distance of `f ∘ pr_1` and
/// `g ∘ pr_2` on `S`.
pub fn sup_on_cells<S: Scalar>(set: &CellSet, f: &[S], g: &[S]) -> S {
    max_all(set.iter().map(|(x, y)| (f[x].clone() - &g[y]).abs())).unwrap_or_else(S::zero)
}

/// Hausdorff distance between `{0..a}` and `{0..b}` under `dist`.
pub fn hausdorff<S: Scalar>(a: usize, b: usize, dist: impl Fn(usize, usize) -> S) -> Result<S> {
    if a == 0 || b == 0 {
        return Err(Error::EmptyFamily);
    }
    let table = Matrix::from_fn(a, b, &dist);
    Ok(hausdorff_of_table(&table))
}

pub(crate) fn hausdorff_of_table<S: Scalar>(table: &Matrix<S>) -> S {
    let (a, b) = table.shape();
    let forward = (0..a).map(|i| min_all(table.row(i).iter().cloned()).expect("non-empty"));
    let backward = (0..b).map(|j| min_all((0..a).map(|i| table[(i, j)].clone())).expect("non-empty"));
    max_all(forward.chain(backward)).expect("non-empty")
}

/// Atoms of `values_* weights` merged by value and sorted.
pub(crate) fn atoms<S: Scalar>(values: &[S], weights: &[S]) -> Vec<(S, S)> {
    let mut pairs: Vec<(S, S)> = values.iter().cloned().zip(weights.iter().cloned()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(S, S)> = Vec::with_capacity(pairs.len());
    for (v, w) in pairs {
        match out.last_mut() {
            Some(last) if last.0.approx_eq(&v) => last.1 += w,
            _ => out.push((v, w)),
        }
    }
    out
}

/// Smallest `max - min` over windows of consecutive atoms carrying mass at
/// least `alpha`.
pub fn partial_diameter<S: Scalar>(values: &[S], weights: &[S], alpha: &S) -> Result<S> {
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch {
            left: values.len(),
            right: weights.len(),
        });
    }
    if *alpha < S::zero() || *alpha > S::one() {
        return Err(Error::InvalidParameter(format!(
            "mass threshold {alpha} outside [0, 1]"
        )));
    }
    let atoms = atoms(values, weights);
    Ok(window_diameter(&atoms, alpha))
}

fn window_diameter<S: Scalar>(atoms: &[(S, S)], alpha: &S) -> S {
    if alpha.is_negligible() || atoms.is_empty() {
        return S::zero();
    }
    let reaches = |mass: &S| !alpha.definitely_gt(mass);
    let mut best: Option<S> = None;
    let mut mass = S::zero();
    let mut lo = 0;
    for hi in 0..atoms.len() {
        mass += &atoms[hi].1;
        while lo < hi && reaches(&(mass.clone() - &atoms[lo].1)) {
            mass -= &atoms[lo].1;
            lo += 1;
        }
        if reaches(&mass) {
            let width = atoms[hi].0.clone() - &atoms[lo].0;
            best = Some(match best {
                None => width,
                Some(b) => b.min_of(width),
            });
        }
    }
    // mass short of alpha by rounding: fall back to the full range
    best.unwrap_or_else(|| atoms[atoms.len() - 1].0.clone() - &atoms[0].0)
}

/// `od(X; -κ) = max_f pd(f_* μ; 1 - κ)` for `κ ∈ [0, 1]`.
pub fn observable_diameter<S: Scalar>(x: &GeometricDataSet<S>, kappa: &S) -> Result<S> {
    observable_diameter_of(x.features().rows(), x.measure().weights(), kappa)
}

pub fn observable_diameter_of<S: Scalar>(rows: &[Vec<S>], weights: &[S], kappa: &S) -> Result<S> {
    if *kappa < S::zero() || *kappa > S::one() {
        return Err(Error::InvalidParameter(format!("kappa {kappa} outside [0, 1]")));
    }
    let alpha = S::one() - kappa;
    let mut best = S::zero();
    for r in rows {
        best = best.max_of(partial_diameter(r, weights, &alpha)?);
    }
    Ok(best)
}

/// Every `κ ∈ [0, 1]` at which some `pd(f_* μ; 1 - κ)` can jump: `1 - w` for
/// the mass `w` of each window of consecutive atoms, plus `0` and `1`.
pub fn od_breakpoints<S: Scalar>(rows: &[Vec<S>], weights: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(), S::one()];
    for r in rows {
        let atoms = atoms(r, weights);
        for lo in 0..atoms.len() {
            let mut mass = S::zero();
            for atom in &atoms[lo..] {
                mass += &atom.1;
                let k = S::one() - &mass;
                if k >= S::zero() {
                    out.push(k);
                }
            }
        }
    }
    sorted_distinct(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use crate::scalar::Zero;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn qs(xs: &[(i64, i64)]) -> Vec<Rational> {
        xs.iter().map(|&(n, d)| q(n, d)).collect()
    }

    #[test]
    fn ky_fan_examples() {
        let u2 = qs(&[(1, 2), (1, 2)]);
        let a = qs(&[(0, 1), (3, 1)]);
        assert_eq!(ky_fan(&u2, &a, &a).unwrap(), q(0, 1));
        assert_eq!(
            ky_fan(&u2, &qs(&[(0, 1), (0, 1)]), &qs(&[(1, 1), (1, 1)])).unwrap(),
            q(1, 1)
        );
        let u4 = vec![q(1, 4); 4];
        let zero = vec![q(0, 1); 4];
        let b = qs(&[(0, 1), (0, 1), (0, 1), (9, 10)]);
        assert_eq!(ky_fan(&u4, &zero, &b).unwrap(), q(1, 4));
        // large differences cap the value at the tail mass
        assert_eq!(ky_fan(&[q(1, 1)], &[q(0, 1)], &[q(7, 1)]).unwrap(), q(1, 1));
        // a small difference below its mass
        assert_eq!(ky_fan(&[q(1, 1)], &[q(0, 1)], &[q(1, 5)]).unwrap(), q(1, 5));
        assert!(ky_fan(&u2, &a, &a[..1]).is_err());
    }

    #[test]
    fn ky_fan_coupling_examples() {
        let one = [q(1, 1)];
        let p = Coupling::product(&one, &one);
        assert_eq!(ky_fan_coupling(&p, &[q(0, 1)], &[q(0, 1)]).unwrap(), q(0, 1));
        assert_eq!(ky_fan_coupling(&p, &[q(0, 1)], &[q(1, 1)]).unwrap(), q(1, 1));
        let p = Coupling::product(&qs(&[(1, 2), (1, 2)]), &one);
        assert_eq!(
            ky_fan_coupling(&p, &qs(&[(0, 1), (1, 1)]), &[q(1, 1)]).unwrap(),
            q(1, 2)
        );
    }

    fn two_point(a: Rational) -> Matrix<Rational> {
        Matrix::from_rows(vec![vec![q(0, 1), a.clone()], vec![a, q(0, 1)]]).unwrap()
    }

    #[test]
    fn prohorov_examples() {
        let d = two_point(q(3, 10));
        let (x, y) = (qs(&[(1, 1), (0, 1)]), qs(&[(0, 1), (1, 1)]));
        assert_eq!(prohorov_brute_force(&x, &y, &d).unwrap(), q(3, 10));
        assert_eq!(prohorov(&x, &y, &d).unwrap(), q(3, 10));
        assert_eq!(prohorov(&x, &x, &d).unwrap(), q(0, 1));

        let d = two_point(q(1, 1));
        let (u, w) = (qs(&[(1, 2), (1, 2)]), qs(&[(7, 10), (3, 10)]));
        assert_eq!(prohorov_brute_force(&u, &w, &d).unwrap(), q(1, 5));
        assert_eq!(prohorov(&u, &w, &d).unwrap(), q(1, 5));
    }

    #[test]
    fn sup_and_hausdorff_examples() {
        let empty = CellSet::empty(1, 2).unwrap();
        let u = qs(&[(0, 1), (1, 1)]);
        let v = qs(&[(2, 5), (0, 1)]);
        assert_eq!(sup_pseudometric(&empty, &u, &v).unwrap(), q(0, 1));
        let one = CellSet::from_cells(1, 2, &[(0, 0)]).unwrap();
        assert_eq!(sup_pseudometric(&one, &u, &v).unwrap(), q(2, 5));

        let a = [q(0, 1)];
        let b = [q(1, 1), q(1, 5)];
        let h = hausdorff(1, 2, |i, j| (a[i].clone() - &b[j]).abs()).unwrap();
        assert_eq!(h, q(1, 1));
        // {0} vs {1, 0.2}: forward 0.2, backward max(1, 0.2) = 1
        let h = hausdorff(2, 1, |i, j| (b[i].clone() - &a[j]).abs()).unwrap();
        assert_eq!(h, q(1, 1));
        assert_eq!(hausdorff::<Rational>(0, 1, |_, _| q(0, 1)), Err(Error::EmptyFamily));
    }

    #[test]
    fn hausdorff_constant_families() {
        // {0} vs {0.2}: both directions give 0.2
        let h = hausdorff(1, 1, |_, _| q(1, 5)).unwrap();
        assert_eq!(h, q(1, 5));
        let a = [q(0, 1), q(1, 5)];
        let h = hausdorff(2, 2, |i, j| (a[i].clone() - &a[j]).abs()).unwrap();
        assert_eq!(h, q(0, 1));
    }

    #[test]
    fn partial_diameter_examples() {
        assert_eq!(
            partial_diameter(&[q(3, 1)], &[q(1, 1)], &q(1, 1)).unwrap(),
            q(0, 1)
        );
        let u = qs(&[(1, 2), (1, 2)]);
        let v = qs(&[(0, 1), (1, 1)]);
        assert_eq!(partial_diameter(&v, &u, &q(1, 2)).unwrap(), q(0, 1));
        let w = qs(&[(1, 3), (1, 3), (1, 3)]);
        let f = qs(&[(0, 1), (1, 1), (1, 1)]);
        assert_eq!(partial_diameter(&f, &w, &q(4, 5)).unwrap(), q(1, 1));
        assert_eq!(partial_diameter(&f, &w, &q(0, 1)).unwrap(), q(0, 1));
        assert_eq!(partial_diameter(&f, &w, &q(2, 3)).unwrap(), q(0, 1));
        assert!(partial_diameter(&f, &w, &q(3, 2)).is_err());
    }

    #[test]
    fn observable_diameter_examples() {
        use crate::model::{DiscreteMeasure, FeatureFamily};
        let x = GeometricDataSet::new(
            FeatureFamily::from_rows(vec![qs(&[(0, 1), (1, 1)])]).unwrap(),
            DiscreteMeasure::uniform(2).unwrap(),
        )
        .unwrap();
        assert_eq!(observable_diameter(&x, &q(3, 10)).unwrap(), q(1, 1));
        assert_eq!(observable_diameter(&x, &q(1, 2)).unwrap(), q(0, 1));
        let bp = od_breakpoints(x.features().rows(), x.measure().weights());
        assert_eq!(bp, qs(&[(0, 1), (1, 2), (1, 1)]));
    }

    fn measure_strategy(n: usize) -> impl Strategy<Value = Vec<Rational>> {
        prop::collection::vec(0i64..5, n).prop_map(|raw| {
            let mut raw = raw;
            if raw.iter().all(|&w| w == 0) {
                raw[0] = 1;
            }
            let total: i64 = raw.iter().sum();
            raw.iter().map(|&w| q(w, total)).collect()
        })
    }

    fn metric_strategy(n: usize) -> impl Strategy<Value = Matrix<Rational>> {
        // points on a line give a valid metric
        prop::collection::vec(0i64..10, n).prop_map(move |pos| {
            Matrix::from_fn(n, n, |i, j| q((pos[i] - pos[j]).abs(), 8))
        })
    }

    proptest! {
        #[test]
        fn prohorov_paths_agree(
            (mu, nu, d) in (1usize..7).prop_flat_map(|n| (measure_strategy(n), measure_strategy(n), metric_strategy(n)))
        ) {
            let a = prohorov_brute_force(&mu, &nu, &d).unwrap();
            let b = prohorov(&mu, &nu, &d).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a <= q(1, 1));
            prop_assert_eq!(prohorov(&nu, &mu, &d).unwrap(), b);
        }

        #[test]
        fn ky_fan_bounds_prohorov_of_pushforwards(
            (mu, a, b) in (1usize..7).prop_flat_map(|n| (
                measure_strategy(n),
                prop::collection::vec(-6i64..6, n),
                prop::collection::vec(-6i64..6, n),
            ))
        ) {
            let a: Vec<Rational> = a.iter().map(|&v| q(v, 4)).collect();
            let b: Vec<Rational> = b.iter().map(|&v| q(v, 4)).collect();
            let kf = ky_fan(&mu, &a, &b).unwrap();
            prop_assert!(kf <= q(1, 1));
            prop_assert!(prohorov_of_pushforwards(&mu, &a, &b).unwrap() <= kf);
            let zero_on_support = mu.iter().zip(a.iter().zip(&b)).all(|(w, (x, y))| w.is_zero() || x == y);
            prop_assert_eq!(kf.is_zero(), zero_on_support);
        }

        #[test]
        fn partial_diameter_monotone(
            (mu, f) in (1usize..7).prop_flat_map(|n| (measure_strategy(n), prop::collection::vec(-6i64..6, n))),
            steps in 1i64..20,
        ) {
            let f: Vec<Rational> = f.iter().map(|&v| q(v, 2)).collect();
            let mut prev = q(0, 1);
            for k in 0..=steps {
                let v = partial_diameter(&f, &mu, &q(k, steps)).unwrap();
                prop_assert!(v >= prev);
                prev = v;
            }
        }

        #[test]
        fn partial_diameter_left_continuous(
            (mu, f) in (1usize..6).prop_flat_map(|n| (measure_strategy(n), prop::collection::vec(-6i64..6, n))),
        ) {
            let f: Vec<Rational> = f.iter().map(|&v| q(v, 2)).collect();
            let bps = od_breakpoints(std::slice::from_ref(&f), &mu);
            for k in bps {
                let alpha = q(1, 1) - k;
                if alpha.is_zero() {
                    continue;
                }
                let below = alpha.clone() - q(1, 1000);
                if below < q(0, 1) {
                    continue;
                }
                prop_assert_eq!(
                    partial_diameter(&f, &mu, &alpha).unwrap(),
                    partial_diameter(&f, &mu, &below).unwrap()
                );
            }
        }

        #[test]
        fn hausdorff_triangle(
            a in prop::collection::vec(-8i64..8, 1..4),
            b in prop::collection::vec(-8i64..8, 1..4),
            c in prop::collection::vec(-8i64..8, 1..4),
        ) {
            let h = |x: &[i64], y: &[i64]| {
                hausdorff(x.len(), y.len(), |i, j| q((x[i] - y[j]).abs(), 1)).unwrap()
            };
            prop_assert_eq!(h(&a, &b), h(&b, &a));
            prop_assert!(h(&a, &c) <= h(&a, &b) + h(&b, &c));
        }
    }
}
