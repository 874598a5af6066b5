//! Domination and isomorphism by exhaustive search over point maps.
//!
//! Maps `X -> Y` are indexed lexicographically: map `i` sends point `k` to
//! digit `k` of `i` in base `|Y|`, most significant digit first. The first
//! accepted map in that order is the witness.

use crate::constructions::{quotient_gds, Quotient};
use crate::error::{Error, Result};
use crate::exec::{self, Budget};
use crate::model::{pushforward, sup_norm, GeometricDataSet};
use crate::observable::dconc_exact;
use crate::scalar::Scalar;

fn map_count(n: usize, m: usize, budget: &Budget) -> Result<u64> {
    let needed = (m as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > budget.max_maps {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.max_maps,
        });
    }
    Ok(needed as u64)
}

fn decode_map(mut index: u64, n: usize, m: usize) -> Vec<usize> {
    let mut map = vec![0; n];
    for slot in map.iter_mut().rev() {
        *slot = (index % m as u64) as usize;
        index /= m as u64;
    }
    map
}

fn close<S: Scalar>(a: &[S], b: &[S], tol: &S) -> bool {
    let d = sup_norm(a, b);
    d <= *tol || d.is_negligible()
}

/// Every row of `a` lies within `tol` of some row of `b`.
fn rows_covered<S: Scalar>(a: &[Vec<S>], b: &[Vec<S>], tol: &S) -> bool {
    a.iter().all(|r| b.iter().any(|s| close(r, s, tol)))
}

fn preserves_measure<S: Scalar>(x: &GeometricDataSet<S>, y: &GeometricDataSet<S>, map: &[usize]) -> bool {
    let pushed = pushforward(x.measure(), map, y.len()).expect("map in range");
    pushed
        .full
        .iter()
        .zip(y.measure().weights())
        .all(|(a, b)| a.approx_eq(b))
}

/// `map` pushes `μ_X` to `μ_Y` and every row of `F_Y ∘ map` is within `tol`
/// of a row of `family`.
fn is_domination_from<S: Scalar>(
    x: &GeometricDataSet<S>,
    family: &[Vec<S>],
    y: &GeometricDataSet<S>,
    map: &[usize],
    tol: &S,
) -> bool {
    preserves_measure(x, y, map) && rows_covered(y.features().pull_back(map).rows(), family, tol)
}

/// Whether `map` is a domination `X -> Y`.
pub fn is_domination<S: Scalar>(x: &GeometricDataSet<S>, y: &GeometricDataSet<S>, map: &[usize], tol: &S) -> bool {
    map.len() == x.len()
        && map.iter().all(|&t| t < y.len())
        && is_domination_from(x, x.features().rows(), y, map, tol)
}

/// Whether `map` is an isomorphism: measure preserving, and the pulled back
/// family equals `F_X` as a set of rows within `tol`.
pub fn is_isomorphism<S: Scalar>(x: &GeometricDataSet<S>, y: &GeometricDataSet<S>, map: &[usize], tol: &S) -> bool {
    if !is_domination(x, y, map, tol) {
        return false;
    }
    let pulled = y.features().pull_back(map);
    rows_covered(x.features().rows(), pulled.rows(), tol)
}

fn search<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    budget: &Budget,
    accept: impl Fn(&[usize]) -> bool + Sync + Send,
) -> Result<Option<Vec<usize>>> {
    let (n, m) = (x.len(), y.len());
    let len = map_count(n, m, budget)?;
    Ok(exec::find_first(budget.exec, len, |i| accept(&decode_map(i, n, m))).map(|i| decode_map(i, n, m)))
}

/// The first domination `X -> Y` in lexicographic order, if any. `X`
/// dominates `Y` (written `Y ⪯ X`) iff one exists.
pub fn check_domination<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    tol: &S,
    budget: &Budget,
) -> Result<Option<Vec<usize>>> {
    search(x, y, budget, |map| is_domination_from(x, x.features().rows(), y, map, tol))
}

/// The first isomorphism `X -> Y` in lexicographic order, if any.
pub fn check_isomorphism<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    tol: &S,
    budget: &Budget,
) -> Result<Option<Vec<usize>>> {
    search(x, y, budget, |map| is_isomorphism(x, y, map, tol))
}

/// `second ∘ first`.
pub fn compose_maps(first: &[usize], second: &[usize]) -> Vec<usize> {
    first.iter().map(|&i| second[i]).collect()
}

/// Outcome of the universal-property check for one quotient and one target.
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalCheck<S> {
    pub quotient: Quotient<S>,
    /// Dominations `g: X -> Z` with `F_Z ∘ g` inside `G`.
    pub dominations: usize,
    /// Those `g` that factor as `h ∘ p` through the quotient map `p` with
    /// `h` a domination.
    pub factored: usize,
    /// The first `g` that does not factor.
    pub counterexample: Option<Vec<usize>>,
}

impl<S> UniversalCheck<S> {
    pub fn holds(&self) -> bool {
        self.dominations == self.factored
    }
}

/// For `Y = X/G` with quotient map `p`, every domination `g: X -> Z` with
/// `F_Z ∘ g ⊆ G` must factor through `p`. Searches every `g` and every
/// `h: Y -> Z`.
pub fn quotient_universal_check<S: Scalar>(
    x: &GeometricDataSet<S>,
    g: &[Vec<S>],
    z: &GeometricDataSet<S>,
    tol: &S,
    budget: &Budget,
) -> Result<UniversalCheck<S>> {
    let quotient = quotient_gds(x, g)?;
    let (n, m) = (x.len(), z.len());
    let len = map_count(n, m, budget)?;
    let k = quotient.data.len();
    map_count(k, m, budget)?;
    let found = exec::map_range(budget.exec, len as usize, |i| {
        let map = decode_map(i as u64, n, m);
        is_domination_from(x, g, z, &map, tol).then_some(map)
    });
    let mut dominations = 0;
    let mut factored = 0;
    let mut counterexample = None;
    for gmap in found.into_iter().flatten() {
        dominations += 1;
        let factors = (0..(m as u64).pow(k as u32)).any(|j| {
            let h = decode_map(j, k, m);
            compose_maps(&quotient.map, &h) == gmap && is_domination(&quotient.data, z, &h, tol)
        });
        if factors {
            factored += 1;
        } else if counterexample.is_none() {
            counterexample = Some(gmap);
        }
    }
    Ok(UniversalCheck {
        quotient,
        dominations,
        factored,
        counterexample,
    })
}

/// The reduced target built from a domination `φ: X -> X'` and an exact
/// `dconc(X, Y)` solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTarget<S> {
    pub domination: Vec<usize>,
    /// `Y' = Y / u(F_{X'} ∘ φ)`.
    pub target: Quotient<S>,
    pub distinct_features: usize,
    pub source_features: usize,
    pub dconc_reduced: S,
    pub dconc_original: S,
}

impl<S: Scalar> ReducedTarget<S> {
    /// `#F_{Y'} <= #F_{X'}` and `dconc(X', Y') <= dconc(X, Y)`.
    pub fn holds(&self) -> bool {
        self.distinct_features <= self.source_features
            && (self.dconc_reduced <= self.dconc_original || self.dconc_reduced.approx_eq(&self.dconc_original))
    }
}

/// `None` when `X` does not dominate `X'`.
pub fn reduced_target<S: Scalar>(
    x: &GeometricDataSet<S>,
    x_prime: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    tol: &S,
    budget: &Budget,
) -> Result<Option<ReducedTarget<S>>> {
    let Some(phi) = check_domination(x, x_prime, tol, budget)? else {
        return Ok(None);
    };
    let original = dconc_exact(x, y, budget)?;
    let pulled = x_prime.features().pull_back(&phi);
    let mut rows: Vec<Vec<S>> = Vec::new();
    for r in pulled.rows() {
        let i = x
            .features()
            .rows()
            .iter()
            .position(|f| close(r, f, tol))
            .expect("domination covers every row");
        let g = y.features().row(original.forward[i]).to_vec();
        if !rows.iter().any(|s| close(s, &g, &S::zero())) {
            rows.push(g);
        }
    }
    let target = quotient_gds(y, &rows)?;
    let reduced = dconc_exact(x_prime, &target.data, budget)?;
    Ok(Some(ReducedTarget {
        domination: phi,
        distinct_features: target.data.features().len(),
        source_features: x_prime.features().len(),
        target,
        dconc_reduced: reduced.value,
        dconc_original: original.value,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{first_projection, product_gds, random_gds, singleton_gds};
    use crate::scalar::{Rational, Zero};
    use proptest::prelude::*;

    fn q(n: i64) -> Rational {
        Rational::from_int(n)
    }

    #[test]
    fn lexicographic_decoding() {
        assert_eq!(decode_map(0, 3, 2), vec![0, 0, 0]);
        assert_eq!(decode_map(1, 3, 2), vec![0, 0, 1]);
        assert_eq!(decode_map(6, 3, 2), vec![1, 1, 0]);
    }

    #[test]
    fn singletons() {
        let b = Budget::default();
        let zero = singleton_gds(&[q(0)]).unwrap();
        let one = singleton_gds(&[q(1)]).unwrap();
        let t = Rational::zero();
        assert_eq!(check_domination(&zero, &one, &t, &b).unwrap(), None);
        assert_eq!(check_domination(&zero, &zero, &t, &b).unwrap(), Some(vec![0]));
        assert_eq!(check_isomorphism(&zero, &one, &t, &b).unwrap(), None);
        // tolerance admits the match
        assert!(check_domination(&zero, &one, &q(1), &b).unwrap().is_some());
    }

    #[test]
    fn identity_relabeling_and_projection() {
        let b = Budget::default();
        let t = Rational::zero();
        let x = random_gds::<Rational>(3, 2, 3, 1).unwrap();
        let y = random_gds::<Rational>(2, 2, 4, 1).unwrap();
        assert!(check_isomorphism(&x, &x, &t, &b).unwrap().is_some());
        let perm = vec![2, 0, 1];
        let r = x.relabeled(&perm).unwrap();
        let w = check_isomorphism(&x, &r, &t, &b).unwrap().unwrap();
        assert!(is_isomorphism(&x, &r, &w, &t));
        let p = product_gds(&x, &y).unwrap();
        let pr = first_projection(x.len(), y.len());
        assert!(is_domination(&p, &x, &pr, &t));
        assert!(check_domination(&p, &x, &t, &b).unwrap().is_some());
    }

    #[test]
    fn budget_is_enforced() {
        let x = random_gds::<Rational>(7, 1, 1, 1).unwrap();
        assert!(matches!(
            check_domination(&x, &x, &q(0), &Budget::default()),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn universal_property_on_quotients() {
        let b = Budget::default();
        let t = Rational::zero();
        for seed in 0..5 {
            let x = random_gds::<Rational>(4, 3, seed, 1).unwrap();
            let g = vec![x.features().row(0).to_vec(), x.features().row(2).to_vec()];
            let smaller = quotient_gds(&x, &g[..1]).unwrap().data;
            for z in [&smaller, &quotient_gds(&x, &g).unwrap().data] {
                let check = quotient_universal_check(&x, &g, z, &t, &b).unwrap();
                assert!(check.holds(), "seed {seed}");
                assert!(check.dominations > 0);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn domination_is_transitive(seed in any::<u64>()) {
            let b = Budget::default();
            let t = Rational::zero();
            let x = random_gds::<Rational>(4, 3, seed, 1).unwrap();
            let y = quotient_gds(&x, &x.features().rows()[..2]).unwrap();
            let z = quotient_gds(&y.data, &y.data.features().rows()[..1]).unwrap();
            prop_assert!(is_domination(&x, &y.data, &y.map, &t));
            prop_assert!(is_domination(&y.data, &z.data, &z.map, &t));
            let composed = compose_maps(&y.map, &z.map);
            prop_assert!(is_domination(&x, &z.data, &composed, &t));
            prop_assert!(check_domination(&x, &z.data, &t, &b).unwrap().is_some());
        }

        #[test]
        fn mutual_domination_gives_isomorphism(seed in any::<u64>(), other in any::<u64>()) {
            let b = Budget::default();
            let t = Rational::zero();
            let x = random_gds::<Rational>(3, 2, seed, 1).unwrap();
            let y = random_gds::<Rational>(3, 2, other, 1).unwrap();
            for (a, c) in [(&x, &y), (&x, &x)] {
                let both = check_domination(a, c, &t, &b).unwrap().is_some()
                    && check_domination(c, a, &t, &b).unwrap().is_some();
                if both {
                    prop_assert!(check_isomorphism(a, c, &t, &b).unwrap().is_some());
                }
            }
        }

        #[test]
        fn reduced_target_properties(seed in any::<u64>()) {
            let b = Budget::default();
            let t = Rational::zero();
            let x = random_gds::<Rational>(3, 2, seed, 1).unwrap();
            let y = random_gds::<Rational>(3, 2, seed.wrapping_add(17), 1).unwrap();
            let x_prime = quotient_gds(&x, &x.features().rows()[..1]).unwrap().data;
            let r = reduced_target(&x, &x_prime, &y, &t, &b).unwrap().unwrap();
            prop_assert!(r.holds());
        }
    }
}
