//! Couplings of two finite measures and the solvers built on them.

pub mod flow;
pub mod program;
pub mod simplex;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::cells::CellSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::metrics;
use crate::scalar::Scalar;

pub use program::{ProgramMode, ProgramSolution, SetMassProgram};
pub use simplex::{LinearProgram, LpOutcome, Relation};

/// A probability measure on `X × Y` with prescribed marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling<S> {
    plan: Matrix<S>,
}

impl<S: Scalar> Coupling<S> {
    /// Checks non-negativity and both marginals (exactly, or within `1e-9`
    /// for floats).
    pub fn new(plan: Matrix<S>, mu: &[S], nu: &[S]) -> Result<Self> {
        if plan.shape() != (mu.len(), nu.len()) {
            return Err(Error::ShapeMismatch {
                expected: (mu.len(), nu.len()),
                found: plan.shape(),
            });
        }
        if plan.as_slice().iter().any(|v| *v < -S::tolerance()) {
            return Err(Error::NegativeWeight {
                index: plan
                    .as_slice()
                    .iter()
                    .position(|v| *v < -S::tolerance())
                    .unwrap_or(0),
            });
        }
        let c = Coupling { plan };
        let rows_ok = c.row_marginal().iter().zip(mu).all(|(a, b)| a.approx_eq(b));
        let cols_ok = c.col_marginal().iter().zip(nu).all(|(a, b)| a.approx_eq(b));
        if !rows_ok || !cols_ok {
            return Err(Error::MarginalMismatch);
        }
        Ok(c)
    }

    pub(crate) fn from_plan_unchecked(plan: Matrix<S>) -> Self {
        Coupling { plan }
    }

    pub fn product(mu: &[S], nu: &[S]) -> Self {
        Coupling {
            plan: Matrix::from_fn(mu.len(), nu.len(), |x, y| mu[x].clone() * &nu[y]),
        }
    }

    pub fn plan(&self) -> &Matrix<S> {
        &self.plan
    }

    pub fn rows(&self) -> usize {
        self.plan.rows()
    }

    pub fn cols(&self) -> usize {
        self.plan.cols()
    }

    pub fn get(&self, x: usize, y: usize) -> &S {
        &self.plan[(x, y)]
    }

    pub fn row_marginal(&self) -> Vec<S> {
        (0..self.rows())
            .map(|x| self.plan.row(x).iter().cloned().sum())
            .collect()
    }

    pub fn col_marginal(&self) -> Vec<S> {
        (0..self.cols())
            .map(|y| (0..self.rows()).map(|x| self.plan[(x, y)].clone()).sum())
            .collect()
    }

    pub fn mass(&self, set: &CellSet) -> S {
        set.iter().map(|(x, y)| self.plan[(x, y)].clone()).sum()
    }

    /// Cells carrying positive mass.
    pub fn support(&self) -> Result<CellSet> {
        CellSet::from_fn(self.rows(), self.cols(), |x, y| {
            self.plan[(x, y)].definitely_gt(&S::zero())
        })
    }

    pub fn transpose(&self) -> Self {
        Coupling {
            plan: self.plan.transpose(),
        }
    }

    /// Row-major weights, the measure on `X × Y` indexed `x * cols + y`.
    pub fn weights(&self) -> &[S] {
        self.plan.as_slice()
    }
}

/// A coupling maximising `π(S)` and the maximal mass, via max-flow. The flow
/// is completed to a full coupling with the northwest-corner rule on the
/// residual marginals.
pub fn max_mass_on_set<S: Scalar>(mu: &[S], nu: &[S], set: &CellSet) -> Result<(S, Coupling<S>)> {
    check_marginals(mu, nu)?;
    let (value, mut plan) = flow::bipartite_max_flow(mu, nu, |x, y| set.contains(x, y));
    let mut row_left: Vec<S> = (0..mu.len())
        .map(|x| mu[x].clone() - plan.row(x).iter().cloned().sum::<S>())
        .collect();
    let mut col_left: Vec<S> = (0..nu.len())
        .map(|y| nu[y].clone() - (0..mu.len()).map(|x| plan[(x, y)].clone()).sum::<S>())
        .collect();
    northwest_fill(&mut plan, &mut row_left, &mut col_left);
    Ok((value, Coupling::from_plan_unchecked(plan)))
}

/// `max_{π ∈ Π(μ, ν)} π(S)` only.
pub fn max_mass_value<S: Scalar>(mu: &[S], nu: &[S], set: &CellSet) -> S {
    flow::bipartite_max_flow(mu, nu, |x, y| set.contains(x, y)).0
}

fn northwest_fill<S: Scalar>(plan: &mut Matrix<S>, rows: &mut [S], cols: &mut [S]) {
    let (mut x, mut y) = (0, 0);
    while x < rows.len() && y < cols.len() {
        if !rows[x].definitely_gt(&S::zero()) {
            x += 1;
            continue;
        }
        if !cols[y].definitely_gt(&S::zero()) {
            y += 1;
            continue;
        }
        let t = rows[x].clone().min_of(cols[y].clone());
        plan[(x, y)] += &t;
        rows[x] -= &t;
        cols[y] -= &t;
    }
}

fn check_marginals<S: Scalar>(mu: &[S], nu: &[S]) -> Result<()> {
    let a: S = mu.iter().cloned().sum();
    let b: S = nu.iter().cloned().sum();
    if !a.approx_eq(&b) || mu.iter().chain(nu).any(|w| *w < S::zero()) {
        return Err(Error::InfeasibleMarginals);
    }
    Ok(())
}

/// Gluing along the shared marginal `ν`:
/// `ρ(x, y, z) = π1(x, y) π2(y, z) / ν(y)`, indexed `(x * m + y) * l + z`.
pub fn glue<S: Scalar>(p1: &Coupling<S>, p2: &Coupling<S>) -> Result<Vec<S>> {
    let (n, m, l) = (p1.rows(), p1.cols(), p2.cols());
    if p2.rows() != m {
        return Err(Error::LengthMismatch {
            left: m,
            right: p2.rows(),
        });
    }
    let nu1 = p1.col_marginal();
    let nu2 = p2.row_marginal();
    if nu1.iter().zip(&nu2).any(|(a, b)| !a.approx_eq(b)) {
        return Err(Error::MarginalMismatch);
    }
    let mut out = vec![S::zero(); n * m * l];
    for x in 0..n {
        for y in 0..m {
            if nu1[y].is_zero() || p1.get(x, y).is_zero() {
                continue;
            }
            for z in 0..l {
                out[(x * m + y) * l + z] = p1.get(x, y).clone() * p2.get(y, z) / &nu1[y];
            }
        }
    }
    Ok(out)
}

/// The `(X, Z)` marginal of the gluing.
pub fn compose<S: Scalar>(p1: &Coupling<S>, p2: &Coupling<S>) -> Result<Coupling<S>> {
    let rho = glue(p1, p2)?;
    let (n, m, l) = (p1.rows(), p1.cols(), p2.cols());
    let plan = Matrix::from_fn(n, l, |x, z| {
        (0..m).map(|y| rho[(x * m + y) * l + z].clone()).sum()
    });
    Ok(Coupling::from_plan_unchecked(plan))
}

/// Relational composition `{(x, z) : ∃y, (x, y) ∈ a, (y, z) ∈ b}`.
pub fn compose_sets(a: &CellSet, b: &CellSet) -> Result<CellSet> {
    if a.cols() != b.rows() {
        return Err(Error::LengthMismatch {
            left: a.cols(),
            right: b.rows(),
        });
    }
    CellSet::from_fn(a.rows(), b.cols(), |x, z| {
        (0..a.cols()).any(|y| a.contains(x, y) && b.contains(y, z))
    })
}

/// Prohorov distance between two couplings of the same pair of spaces,
/// as measures on `X × Y` with the product metric `max(d_X, d_Y)`.
pub fn coupling_prohorov<S: Scalar>(
    pi: &Coupling<S>,
    rho: &Coupling<S>,
    dx: &Matrix<S>,
    dy: &Matrix<S>,
) -> Result<S> {
    let (n, m) = (pi.rows(), pi.cols());
    if rho.plan.shape() != (n, m) || dx.shape() != (n, n) || dy.shape() != (m, m) {
        return Err(Error::ShapeMismatch {
            expected: (n, m),
            found: rho.plan.shape(),
        });
    }
    let d = Matrix::from_fn(n * m, n * m, |a, b| {
        let (x1, y1) = (a / m, a % m);
        let (x2, y2) = (b / m, b % m);
        dx[(x1, x2)].clone().max_of(dy[(y1, y2)].clone())
    });
    metrics::prohorov(pi.weights(), rho.weights(), &d)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnumerationMode {
    /// Every vertex of the transportation polytope (`n * m <= 9`).
    Vertices,
    /// Free cells on the grid `k / resolution · min(μ_x, ν_y)`.
    Grid { resolution: usize },
}

pub const MAX_VERTEX_CELLS: usize = 9;

/// Enumerates couplings of `mu` and `nu`; at most `limit` candidates are
/// generated before giving up with [`Error::SizeLimit`].
pub fn enumerate_couplings<S: Scalar>(
    mu: &[S],
    nu: &[S],
    mode: EnumerationMode,
    limit: usize,
) -> Result<Vec<Coupling<S>>> {
    check_marginals(mu, nu)?;
    let (n, m) = (mu.len(), nu.len());
    match mode {
        EnumerationMode::Vertices => {
            if n * m > MAX_VERTEX_CELLS {
                return Err(Error::SizeLimit {
                    cells: n * m,
                    limit: MAX_VERTEX_CELLS,
                });
            }
            let mut out: Vec<Coupling<S>> = Vec::new();
            for bits in 0u128..1 << (n * m) {
                if bits.count_ones() as usize > n + m - 1 {
                    continue;
                }
                let support = CellSet::from_bits(n, m, bits)?;
                if let Some(plan) = peel_leaves(mu, nu, &support) {
                    if !out.iter().any(|c| c.plan == plan) {
                        out.push(Coupling { plan });
                        if out.len() > limit {
                            return Err(Error::SizeLimit {
                                cells: out.len(),
                                limit,
                            });
                        }
                    }
                }
            }
            Ok(out)
        }
        EnumerationMode::Grid { resolution } => {
            if resolution == 0 {
                return Err(Error::InvalidParameter("grid resolution must be positive".into()));
            }
            let free = (n - 1) * (m - 1);
            let count = (resolution as u128 + 1).checked_pow(free as u32);
            match count {
                Some(c) if c <= limit as u128 => {}
                _ => {
                    return Err(Error::SizeLimit {
                        cells: free,
                        limit,
                    })
                }
            }
            let count = count.expect("checked above") as usize;
            let r = S::from_int(resolution as i64);
            let mut out = Vec::new();
            for mut code in 0..count {
                let mut plan = Matrix::filled(n, m, S::zero());
                for x in 0..n - 1 {
                    for y in 0..m - 1 {
                        let k = code % (resolution + 1);
                        code /= resolution + 1;
                        plan[(x, y)] = S::from_int(k as i64) / &r * mu[x].clone().min_of(nu[y].clone());
                    }
                }
                for x in 0..n - 1 {
                    let used: S = plan.row(x)[..m - 1].iter().cloned().sum();
                    plan[(x, m - 1)] = mu[x].clone() - used;
                }
                for y in 0..m {
                    let used: S = (0..n - 1).map(|x| plan[(x, y)].clone()).sum();
                    plan[(n - 1, y)] = nu[y].clone() - used;
                }
                if plan.as_slice().iter().all(|v| *v >= -S::tolerance()) {
                    out.push(Coupling { plan });
                }
            }
            Ok(out)
        }
    }
}

/// Solves the transportation equations on an acyclic support by repeatedly
/// fixing a row or column with a single remaining cell.
fn peel_leaves<S: Scalar>(mu: &[S], nu: &[S], support: &CellSet) -> Option<Matrix<S>> {
    let (n, m) = (mu.len(), nu.len());
    let mut rows = mu.to_vec();
    let mut cols = nu.to_vec();
    let mut live = *support;
    let mut plan = Matrix::filled(n, m, S::zero());
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; m];
    loop {
        let mut progressed = false;
        for x in 0..n {
            if row_done[x] {
                continue;
            }
            let cells: Vec<usize> = (0..m).filter(|&y| live.contains(x, y)).collect();
            match cells.as_slice() {
                [] => {
                    if !rows[x].is_negligible() {
                        return None;
                    }
                    row_done[x] = true;
                    progressed = true;
                }
                [y] => {
                    let y = *y;
                    let t = rows[x].clone();
                    plan[(x, y)] = t.clone();
                    cols[y] -= t;
                    rows[x] = S::zero();
                    live.remove(x, y);
                    row_done[x] = true;
                    progressed = true;
                }
                _ => {}
            }
        }
        for y in 0..m {
            if col_done[y] {
                continue;
            }
            let cells: Vec<usize> = (0..n).filter(|&x| live.contains(x, y)).collect();
            match cells.as_slice() {
                [] => {
                    if !cols[y].is_negligible() {
                        return None;
                    }
                    col_done[y] = true;
                    progressed = true;
                }
                [x] => {
                    let x = *x;
                    let t = cols[y].clone();
                    plan[(x, y)] = t.clone();
                    rows[x] -= t;
                    cols[y] = S::zero();
                    live.remove(x, y);
                    col_done[y] = true;
                    progressed = true;
                }
                _ => {}
            }
        }
        if row_done.iter().all(|&d| d) && col_done.iter().all(|&d| d) {
            break;
        }
        if !progressed {
            // a cycle remains
            return None;
        }
    }
    if plan.as_slice().iter().any(|v| *v < -S::tolerance()) {
        return None;
    }
    Some(plan)
}

/// A random coupling: a convex combination of the product coupling and a
/// few greedy couplings built along random cell orders. Weights are
/// multiples of `1/4`, so exact inputs give exact outputs.
pub fn random_coupling<S: Scalar, R: Rng + ?Sized>(mu: &[S], nu: &[S], rng: &mut R) -> Coupling<S> {
    let (n, m) = (mu.len(), nu.len());
    let parts = rng.random_range(1..=3usize);
    let mut raw: Vec<i64> = (0..=parts).map(|_| rng.random_range(0..=4)).collect();
    if raw.iter().all(|&w| w == 0) {
        raw[0] = 1;
    }
    let total: i64 = raw.iter().sum();
    let mut plan = Matrix::filled(n, m, S::zero());
    let product = Coupling::product(mu, nu);
    let mut order: Vec<usize> = (0..n * m).collect();
    for (k, &w) in raw.iter().enumerate() {
        if w == 0 {
            continue;
        }
        let part = if k == 0 {
            product.plan.clone()
        } else {
            order.shuffle(rng);
            greedy(mu, nu, &order)
        };
        let lambda = S::from_ratio(w, total);
        for (dst, src) in (0..n * m).zip(part.as_slice()) {
            plan[(dst / m, dst % m)] += lambda.clone() * src;
        }
    }
    Coupling { plan }
}

/// Fills cells in `order` with as much mass as both residual marginals allow.
pub(crate) fn greedy<S: Scalar>(mu: &[S], nu: &[S], order: &[usize]) -> Matrix<S> {
    let m = nu.len();
    let mut rows = mu.to_vec();
    let mut cols = nu.to_vec();
    let mut plan = Matrix::filled(mu.len(), m, S::zero());
    for &c in order {
        let (x, y) = (c / m, c % m);
        let t = rows[x].clone().min_of(cols[y].clone());
        if t > S::zero() {
            plan[(x, y)] = t.clone();
            rows[x] -= &t;
            cols[y] -= t;
        }
    }
    plan
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn measure(raw: &[i64]) -> Vec<Rational> {
        let total: i64 = raw.iter().sum();
        raw.iter().map(|&w| q(w, total)).collect()
    }

    #[test]
    fn coupling_validation() {
        let mu = measure(&[1, 1]);
        let plan = Matrix::from_rows(vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 2)]]).unwrap();
        assert!(Coupling::new(plan.clone(), &mu, &mu).is_ok());
        assert_eq!(
            Coupling::new(plan, &mu, &measure(&[1, 3])),
            Err(Error::MarginalMismatch)
        );
    }

    #[test]
    fn vertices_of_two_by_two() {
        let mu = measure(&[1, 1]);
        let vs = enumerate_couplings(&mu, &mu, EnumerationMode::Vertices, 100).unwrap();
        assert_eq!(vs.len(), 2);
        let vs = enumerate_couplings(&measure(&[1, 2]), &measure(&[1, 1, 1]), EnumerationMode::Vertices, 100)
            .unwrap();
        for c in &vs {
            assert!(Coupling::new(c.plan.clone(), &measure(&[1, 2]), &measure(&[1, 1, 1])).is_ok());
        }
        assert!(vs.len() >= 3);
    }

    #[test]
    fn grid_enumeration_contains_product() {
        let mu = measure(&[1, 1]);
        let nu = measure(&[1, 3]);
        let cs = enumerate_couplings(&mu, &nu, EnumerationMode::Grid { resolution: 4 }, 1000).unwrap();
        assert!(cs.contains(&Coupling::product(&mu, &nu)));
        for c in &cs {
            assert!(Coupling::new(c.plan.clone(), &mu, &nu).is_ok());
        }
        assert!(matches!(
            enumerate_couplings(&measure(&[1; 4]), &measure(&[1; 4]), EnumerationMode::Grid { resolution: 4 }, 1000),
            Err(Error::SizeLimit { .. })
        ));
    }

    #[test]
    fn glue_has_both_marginals() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b, c) = (measure(&[1, 2]), measure(&[1, 1, 1]), measure(&[3, 1]));
        let p1 = random_coupling(&a, &b, &mut rng);
        let p2 = random_coupling(&b, &c, &mut rng);
        let rho = glue(&p1, &p2).unwrap();
        let (n, m, l) = (2, 3, 2);
        for x in 0..n {
            for y in 0..m {
                let s: Rational = (0..l).map(|z| rho[(x * m + y) * l + z].clone()).sum();
                assert_eq!(&s, p1.get(x, y));
            }
        }
        for y in 0..m {
            for z in 0..l {
                let s: Rational = (0..n).map(|x| rho[(x * m + y) * l + z].clone()).sum();
                assert_eq!(&s, p2.get(y, z));
            }
        }
        let xz = compose(&p1, &p2).unwrap();
        assert!(Coupling::new(xz.plan().clone(), &a, &c).is_ok());
    }

    #[test]
    fn max_mass_witness_attains_value() {
        let mu = measure(&[1, 1, 2]);
        let nu = measure(&[3, 1]);
        let s = CellSet::from_cells(3, 2, &[(0, 1), (2, 1)]).unwrap();
        let (v, c) = max_mass_on_set(&mu, &nu, &s).unwrap();
        assert_eq!(v, q(1, 4));
        assert_eq!(c.mass(&s), v);
        assert!(Coupling::new(c.plan().clone(), &mu, &nu).is_ok());
    }

    #[test]
    fn coupling_prohorov_of_identical_is_zero() {
        let mu = measure(&[1, 1]);
        let d = Matrix::from_rows(vec![vec![q(0, 1), q(1, 1)], vec![q(1, 1), q(0, 1)]]).unwrap();
        let p = Coupling::product(&mu, &mu);
        assert_eq!(coupling_prohorov(&p, &p, &d, &d).unwrap(), q(0, 1));
    }

    proptest! {
        #[test]
        fn flow_agrees_with_lp(
            a in prop::collection::vec(1i64..5, 1..4),
            b in prop::collection::vec(1i64..5, 1..4),
            bits in any::<u16>(),
        ) {
            let (mu, nu) = (measure(&a), measure(&b));
            let s = CellSet::from_bits(mu.len(), nu.len(), bits as u128).unwrap();
            let (v, c) = max_mass_on_set(&mu, &nu, &s).unwrap();
            let lp = SetMassProgram::new(mu.clone(), nu.clone(), ProgramMode::MaximizeMassOnSet(s))
                .unwrap()
                .solve()
                .unwrap();
            prop_assert_eq!(&v, &lp.value);
            prop_assert_eq!(c.mass(&s), v);
            prop_assert!(Coupling::new(c.plan().clone(), &mu, &nu).is_ok());
        }

        #[test]
        fn random_couplings_are_valid(
            a in prop::collection::vec(1i64..5, 1..5),
            b in prop::collection::vec(1i64..5, 1..5),
            seed in any::<u64>(),
        ) {
            let (mu, nu) = (measure(&a), measure(&b));
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let c = random_coupling(&mu, &nu, &mut rng);
            prop_assert!(Coupling::new(c.plan().clone(), &mu, &nu).is_ok());
        }
    }
}
