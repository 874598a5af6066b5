//! The box distance.
//!
//! `Box(X, Y) = min_{π, S} max(1 - π(S), 2 H_S)` where `H_S` is the Hausdorff
//! distance between the lifted families under the sup distance on `S`. For a
//! fixed `S` the second term does not depend on `π`, so the exact solver
//! enumerates cell sets and maximises `π(S)` by max-flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cells::{low_bits, CellSet};
use crate::coupling::{max_mass_on_set, max_mass_value, Coupling};
use crate::error::{Error, Result};
use crate::exec::{self, Budget, Exec};
use crate::matrix::Matrix;
use crate::metrics::sup_on_cells;
use crate::model::{is_lipschitz, FeatureFamily, GeometricDataSet, MmSpace};
use crate::scalar::{min_all, sorted_distinct, Scalar};

/// `max |dX(x1, x2) - dY(y1, y2)|` over pairs of cells of `S`.
pub fn distortion<S: Scalar>(set: &CellSet, dx: &Matrix<S>, dy: &Matrix<S>) -> S {
    let cells: Vec<(usize, usize)> = set.iter().collect();
    let mut best = S::zero();
    for (a, &(x1, y1)) in cells.iter().enumerate() {
        for &(x2, y2) in &cells[a + 1..] {
            best = best.max_of((dx[(x1, x2)].clone() - &dy[(y1, y2)]).abs());
        }
    }
    best
}

/// `H_S(F ∘ pr_1, G ∘ pr_2)`; zero on the empty set.
pub fn hausdorff_on_set<S: Scalar>(set: &CellSet, fx: &FeatureFamily<S>, fy: &FeatureFamily<S>) -> S {
    let table = Matrix::from_fn(fx.len(), fy.len(), |i, j| {
        sup_on_cells(set, fx.row(i), fy.row(j))
    });
    crate::metrics::hausdorff_of_table(&table)
}

/// `max(1 - π(S), 2 H_S)`.
pub fn box_objective<S: Scalar>(
    pi: &Coupling<S>,
    set: &CellSet,
    fx: &FeatureFamily<S>,
    fy: &FeatureFamily<S>,
) -> Result<S> {
    if (set.rows(), set.cols()) != (pi.rows(), pi.cols())
        || fx.points() != pi.rows()
        || fy.points() != pi.cols()
    {
        return Err(Error::ShapeMismatch {
            expected: (pi.rows(), pi.cols()),
            found: (set.rows(), set.cols()),
        });
    }
    let h = hausdorff_on_set(set, fx, fy);
    Ok((S::one() - pi.mass(set)).max_of(h.clone() + h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxSolution<S> {
    pub value: S,
    pub coupling: Coupling<S>,
    pub set: CellSet,
}

/// Integer ranks of `|f_i(x) - g_j(y)|` among all such values, so that
/// `H_S` is computed with integer max/min only.
struct RankedFamilies<S> {
    values: Vec<S>,
    /// `rank[i][j][cell]`
    rank: Vec<Vec<Vec<u16>>>,
}

impl<S: Scalar> RankedFamilies<S> {
    fn new(fx: &FeatureFamily<S>, fy: &FeatureFamily<S>) -> Self {
        let m = fy.points();
        let cells = fx.points() * m;
        let diff = |i: usize, j: usize, c: usize| (fx.row(i)[c / m].clone() - &fy.row(j)[c % m]).abs();
        let mut all = Vec::new();
        for i in 0..fx.len() {
            for j in 0..fy.len() {
                all.extend((0..cells).map(|c| diff(i, j, c)));
            }
        }
        let values = sorted_distinct(all);
        let rank = (0..fx.len())
            .map(|i| {
                (0..fy.len())
                    .map(|j| {
                        (0..cells)
                            .map(|c| {
                                let d = diff(i, j, c);
                                values.iter().position(|v| v.approx_eq(&d)).expect("present") as u16
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        RankedFamilies { values, rank }
    }

    /// Rank of `H_S`, or `None` for the empty set.
    fn h_rank(&self, bits: u128) -> Option<u16> {
        if bits == 0 {
            return None;
        }
        let p = self.rank.len();
        let q = self.rank[0].len();
        let mut sup = vec![0u16; p * q];
        for i in 0..p {
            for j in 0..q {
                let r = &self.rank[i][j];
                let mut b = bits;
                let mut s = 0u16;
                while b != 0 {
                    let c = b.trailing_zeros() as usize;
                    b &= b - 1;
                    s = s.max(r[c]);
                }
                sup[i * q + j] = s;
            }
        }
        let forward = (0..p).map(|i| (0..q).map(|j| sup[i * q + j]).min().unwrap_or(0)).max();
        let backward = (0..q).map(|j| (0..p).map(|i| sup[i * q + j]).min().unwrap_or(0)).max();
        Some(forward.unwrap_or(0).max(backward.unwrap_or(0)))
    }

    fn twice_h(&self, bits: u128) -> S {
        match self.h_rank(bits) {
            None => S::zero(),
            Some(r) => {
                let v = &self.values[r as usize];
                v.clone() + v
            }
        }
    }
}

/// Ranks of the pair distortions `|dX(x1, x2) - dY(y1, y2)|`.
struct RankedDistortion<S> {
    values: Vec<S>,
    cells: usize,
    /// `rank[a * cells + b]`
    rank: Vec<u16>,
}

impl<S: Scalar> RankedDistortion<S> {
    fn new(dx: &Matrix<S>, dy: &Matrix<S>) -> Self {
        let m = dy.rows();
        let cells = dx.rows() * m;
        let pair = |a: usize, b: usize| (dx[(a / m, b / m)].clone() - &dy[(a % m, b % m)]).abs();
        let mut all = vec![S::zero()];
        for a in 0..cells {
            for b in a + 1..cells {
                all.push(pair(a, b));
            }
        }
        let values = sorted_distinct(all);
        let mut rank = vec![0u16; cells * cells];
        for a in 0..cells {
            for b in 0..cells {
                let d = pair(a, b);
                rank[a * cells + b] = values.iter().position(|v| v.approx_eq(&d)).expect("present") as u16;
            }
        }
        RankedDistortion {
            values,
            cells,
            rank,
        }
    }

    fn dis_rank(&self, bits: u128) -> u16 {
        let mut best = 0u16;
        let mut outer = bits;
        while outer != 0 {
            let a = outer.trailing_zeros() as usize;
            outer &= outer - 1;
            let mut inner = outer;
            while inner != 0 {
                let b = inner.trailing_zeros() as usize;
                inner &= inner - 1;
                best = best.max(self.rank[a * self.cells + b]);
            }
        }
        best
    }

    fn dis(&self, bits: u128) -> S {
        self.values[self.dis_rank(bits) as usize].clone()
    }
}

/// Minimises `max(1 - mass(S), term(S))` over subsets `S` of `cells`.
/// `mass_bound` must bound `mass` from above; it prunes before `mass` runs.
/// Ties go to the lowest enumeration index.
fn minimize_over_sets<S, T, B, M>(
    exec: Exec,
    cells: &[usize],
    term: T,
    mass_bound: B,
    mass: M,
) -> (S, u128)
where
    S: Scalar,
    T: Fn(u128) -> S + Sync + Send,
    B: Fn(u128) -> S + Sync + Send,
    M: Fn(u128) -> S + Sync + Send,
{
    let expand = |index: u64| -> u128 {
        let mut bits = 0u128;
        let mut i = index;
        while i != 0 {
            let k = i.trailing_zeros() as usize;
            i &= i - 1;
            bits |= 1 << cells[k];
        }
        bits
    };
    let all: u128 = cells.iter().fold(0, |acc, &c| acc | 1 << c);
    // the full set gives a global bound; only strictly worse sets are pruned by it
    let global = (S::one() - mass(all)).max_of(term(all));
    let len = 1u64 << cells.len();
    let best = exec::min_over_range(exec, len, |index, local: Option<&S>| {
        let bits = expand(index);
        let t = term(bits);
        if t > global || local.is_some_and(|b| t >= *b) {
            return None;
        }
        let lower = (S::one() - mass_bound(bits)).max_of(t.clone());
        if lower > global || local.is_some_and(|b| lower >= *b) {
            return None;
        }
        let value = (S::one() - mass(bits)).max_of(t);
        Some((value, bits))
    });
    match best {
        Some((_, (value, bits))) => (value, bits),
        None => (global, all),
    }
}

fn projection_bound<S: Scalar>(mu: &[S], nu: &[S], m: usize, bits: u128) -> S {
    let (mut rows, mut cols) = (0u128, 0u128);
    let mut b = bits;
    while b != 0 {
        let c = b.trailing_zeros() as usize;
        b &= b - 1;
        rows |= 1 << (c / m);
        cols |= 1 << (c % m);
    }
    let pick = |w: &[S], mask: u128| -> S {
        w.iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, v)| v.clone())
            .sum()
    };
    pick(mu, rows).min_of(pick(nu, cols))
}

fn check_cells(n: usize, m: usize, budget: &Budget) -> Result<()> {
    let limit = budget.max_cells.min(crate::cells::MAX_CELLS).min(62);
    if n * m > limit {
        return Err(Error::SizeLimit {
            cells: n * m,
            limit,
        });
    }
    Ok(())
}

/// Exact box distance of two geometric data sets by enumerating every cell
/// set of the `n × m` grid.
pub fn box_exact<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    budget: &Budget,
) -> Result<BoxSolution<S>> {
    let (n, m) = (x.len(), y.len());
    check_cells(n, m, budget)?;
    let ranked = RankedFamilies::new(x.features(), y.features());
    let (mu, nu) = (x.measure().weights(), y.measure().weights());
    let cells: Vec<usize> = (0..n * m).collect();
    let to_set = |bits| CellSet::from_bits(n, m, bits).expect("grid fits");
    let (value, bits) = minimize_over_sets(
        budget.exec,
        &cells,
        |b| ranked.twice_h(b),
        |b| projection_bound(mu, nu, m, b),
        |b| max_mass_value(mu, nu, &to_set(b)),
    );
    let set = to_set(bits);
    let (_, coupling) = max_mass_on_set(mu, nu, &set)?;
    Ok(BoxSolution {
        value,
        coupling,
        set,
    })
}

/// `Box_π(F_X, F_Y) = min_S max(1 - π(S), 2 H_S)`, over subsets of the
/// support of `π`.
pub fn box_at_coupling<S: Scalar>(
    pi: &Coupling<S>,
    fx: &FeatureFamily<S>,
    fy: &FeatureFamily<S>,
    budget: &Budget,
) -> Result<(S, CellSet)> {
    let (n, m) = (pi.rows(), pi.cols());
    if fx.points() != n || fy.points() != m {
        return Err(Error::ShapeMismatch {
            expected: (n, m),
            found: (fx.points(), fy.points()),
        });
    }
    let support = pi.support()?;
    let cells: Vec<usize> = support.iter().map(|(x, y)| x * m + y).collect();
    if cells.len() > budget.max_cells.min(62) {
        return Err(Error::SizeLimit {
            cells: cells.len(),
            limit: budget.max_cells.min(62),
        });
    }
    let ranked = RankedFamilies::new(fx, fy);
    let weights = pi.weights();
    let mass = |bits: u128| -> S {
        let mut b = bits;
        let mut s = S::zero();
        while b != 0 {
            let c = b.trailing_zeros() as usize;
            b &= b - 1;
            s += &weights[c];
        }
        s
    };
    let (value, bits) = minimize_over_sets(budget.exec, &cells, |b| ranked.twice_h(b), mass, mass);
    Ok((value, CellSet::from_bits(n, m, bits)?))
}

/// Box distance of mm-spaces: `min_S max(1 - max_π π(S), dis S)`.
pub fn box_mm_exact<S: Scalar>(mx: &MmSpace<S>, my: &MmSpace<S>, budget: &Budget) -> Result<BoxSolution<S>> {
    let (n, m) = (mx.len(), my.len());
    check_cells(n, m, budget)?;
    let ranked = RankedDistortion::new(mx.dist(), my.dist());
    let (mu, nu) = (mx.measure().weights(), my.measure().weights());
    let cells: Vec<usize> = (0..n * m).collect();
    let to_set = |bits| CellSet::from_bits(n, m, bits).expect("grid fits");
    let (value, bits) = minimize_over_sets(
        budget.exec,
        &cells,
        |b| ranked.dis(b),
        |b| projection_bound(mu, nu, m, b),
        |b| max_mass_value(mu, nu, &to_set(b)),
    );
    let set = to_set(bits);
    let (_, coupling) = max_mass_on_set(mu, nu, &set)?;
    Ok(BoxSolution {
        value,
        coupling,
        set,
    })
}

/// `dis π = min_S max(1 - π(S), dis S)`. For every level `δ` of the pair
/// distortions the best `S` is a maximum-mass clique of the graph joining
/// support cells whose pair distortion is at most `δ`.
pub fn dis_coupling<S: Scalar>(
    pi: &Coupling<S>,
    dx: &Matrix<S>,
    dy: &Matrix<S>,
    budget: &Budget,
) -> Result<(S, CellSet)> {
    let (n, m) = (pi.rows(), pi.cols());
    if dx.shape() != (n, n) || dy.shape() != (m, m) {
        return Err(Error::ShapeMismatch {
            expected: (n, m),
            found: (dx.rows(), dy.rows()),
        });
    }
    let support: Vec<(usize, usize)> = pi.support()?.iter().collect();
    if support.len() > budget.max_cells {
        return Err(Error::SizeLimit {
            cells: support.len(),
            limit: budget.max_cells,
        });
    }
    let k = support.len();
    let pair = |a: usize, b: usize| {
        let (x1, y1) = support[a];
        let (x2, y2) = support[b];
        (dx[(x1, x2)].clone() - &dy[(y1, y2)]).abs()
    };
    let mut levels = vec![S::zero()];
    for a in 0..k {
        for b in a + 1..k {
            levels.push(pair(a, b));
        }
    }
    let levels = sorted_distinct(levels);
    // heaviest cells first
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| pi.get(support[b].0, support[b].1).total_cmp(pi.get(support[a].0, support[a].1)));
    let weights: Vec<S> = order
        .iter()
        .map(|&a| pi.get(support[a].0, support[a].1).clone())
        .collect();

    let mut best_value = S::one();
    let mut best_set = 0u64;
    for delta in &levels {
        if *delta >= best_value {
            break;
        }
        let adj: Vec<u64> = (0..k)
            .map(|a| {
                (0..k)
                    .filter(|&b| b != a && !pair(order[a], order[b]).definitely_gt(delta))
                    .fold(0u64, |acc, b| acc | 1 << b)
            })
            .collect();
        let (mass, clique) = max_weight_clique(&adj, &weights);
        let value = (S::one() - mass).max_of(delta.clone());
        if value < best_value {
            best_value = value;
            best_set = clique;
        }
    }
    let mut set = CellSet::empty(n, m)?;
    for (pos, &a) in order.iter().enumerate() {
        if best_set >> pos & 1 == 1 {
            set.insert(support[a].0, support[a].1);
        }
    }
    Ok((best_value, set))
}

/// Branch and bound over vertices sorted by decreasing weight.
fn max_weight_clique<S: Scalar>(adj: &[u64], weights: &[S]) -> (S, u64) {
    fn grow<S: Scalar>(
        adj: &[u64],
        weights: &[S],
        current: u64,
        mass: S,
        candidates: u64,
        best: &mut (S, u64),
    ) {
        if mass > best.0 {
            *best = (mass.clone(), current);
        }
        let mut rest = candidates;
        while rest != 0 {
            let bound: S = (0..weights.len())
                .filter(|&v| rest >> v & 1 == 1)
                .map(|v| weights[v].clone())
                .sum();
            if mass.clone() + bound <= best.0 {
                return;
            }
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            grow(
                adj,
                weights,
                current | 1 << v,
                mass.clone() + &weights[v],
                rest & adj[v],
                best,
            );
        }
    }
    let all = if weights.len() == 64 {
        u64::MAX
    } else {
        (1u64 << weights.len()) - 1
    };
    let mut best = (S::zero(), 0u64);
    grow(adj, weights, 0, S::zero(), all, &mut best);
    best
}

/// `g(y) = dis S / 2 + min_{(x, z) ∈ S} (f(x) + dY(z, y))`.
pub fn lip1_witness<S: Scalar>(set: &CellSet, f: &[S], dx: &Matrix<S>, dy: &Matrix<S>) -> Result<Vec<S>> {
    if set.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    if f.len() != dx.rows() {
        return Err(Error::LengthMismatch {
            left: f.len(),
            right: dx.rows(),
        });
    }
    if !is_lipschitz(f, dx) {
        return Err(Error::WitnessNotLipschitz);
    }
    let half = distortion(set, dx, dy).half();
    Ok((0..dy.rows())
        .map(|y| {
            let inner = min_all(set.iter().map(|(x, z)| f[x].clone() + &dy[(z, y)])).expect("non-empty");
            half.clone() + inner
        })
        .collect())
}

/// `min max(|a - g1|, |b - g2|)` over `|g1 - g2| <= dy`, which is
/// `max(0, (|a - b| - dy) / 2)`.
pub fn two_point_fit<S: Scalar>(a: &S, b: &S, dy: &S) -> S {
    let gap = (a.clone() - b).abs() - dy;
    if gap > S::zero() {
        gap.half()
    } else {
        S::zero()
    }
}

/// A matched lower and upper bound on `H_S(Lip1(X), Lip1(Y))` at an extremal
/// pair of `S`.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionCertificate<S> {
    pub pair: ((usize, usize), (usize, usize)),
    /// `dX >= dY` at the pair; the distance function sits on `X`.
    pub favorable: bool,
    pub distortion: S,
    /// Two-point lower bound for the distance function of the first point.
    pub lower: S,
    /// Sup gap on `S` of the McShane-type witness for that function.
    pub upper: S,
}

impl<S: Scalar> DistortionCertificate<S> {
    /// `lower = upper = dis S / 2`.
    pub fn is_tight(&self) -> bool {
        let half = self.distortion.half();
        self.lower.approx_eq(&half) && self.upper.approx_eq(&half)
    }
}

pub fn distortion_certificate<S: Scalar>(
    set: &CellSet,
    dx: &Matrix<S>,
    dy: &Matrix<S>,
) -> Result<DistortionCertificate<S>> {
    if set.is_empty() {
        return Err(Error::EmptyCellSet);
    }
    let cells: Vec<(usize, usize)> = set.iter().collect();
    let mut pair = (cells[0], cells[0]);
    let mut dis = S::zero();
    for (a, &c1) in cells.iter().enumerate() {
        for &c2 in &cells[a + 1..] {
            let d = (dx[(c1.0, c2.0)].clone() - &dy[(c1.1, c2.1)]).abs();
            if d > dis {
                dis = d;
                pair = (c1, c2);
            }
        }
    }
    let ((x1, y1), (x2, y2)) = pair;
    let favorable = dx[(x1, x2)] >= dy[(y1, y2)];
    let (lower, upper) = if favorable {
        let f = dx.row(x1).to_vec();
        let g = lip1_witness(set, &f, dx, dy)?;
        (
            two_point_fit(&f[x1], &f[x2], &dy[(y1, y2)]),
            sup_on_cells(set, &f, &g),
        )
    } else {
        let t = set.transpose();
        let f = dy.row(y1).to_vec();
        let g = lip1_witness(&t, &f, dy, dx)?;
        (
            two_point_fit(&f[y1], &f[y2], &dx[(x1, x2)]),
            sup_on_cells(&t, &f, &g),
        )
    };
    Ok(DistortionCertificate {
        pair,
        favorable,
        distortion: dis,
        lower,
        upper,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxHeuristicOptions {
    pub restarts: usize,
    pub max_rounds: usize,
    pub seed: u64,
}

impl BoxHeuristicOptions {
    pub fn with_seed(seed: u64) -> Self {
        BoxHeuristicOptions {
            restarts: 6,
            max_rounds: 50,
            seed,
        }
    }
}

impl Default for BoxHeuristicOptions {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxHeuristicRun<S> {
    /// `max(1 - π(S), 2 H_S)` at the returned pair; an upper bound on `Box`.
    pub value: S,
    pub coupling: Coupling<S>,
    pub set: CellSet,
    pub trace: Vec<S>,
}

/// Upper bound on `Box` without enumerating cell sets.
///
/// An optimal `S` can always be taken of the form
/// `C(u, v, t) = {|f - u(f)| <= t for all f} ∩ {|v(g) - g| <= t for all g}`
/// for assignments `u`, `v` and a threshold `t`: enlarging `S` to that set
/// keeps `H_S <= t` and can only increase the transportable mass. The search
/// grows a cell set greedily, closes it to this form, then moves single
/// assignments while the best threshold for the pair improves.
pub fn box_heuristic<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    opts: &BoxHeuristicOptions,
) -> Result<BoxHeuristicRun<S>> {
    let (n, m) = (x.len(), y.len());
    if n * m > crate::cells::MAX_CELLS {
        return Err(Error::SizeLimit {
            cells: n * m,
            limit: crate::cells::MAX_CELLS,
        });
    }
    let (fx, fy) = (x.features(), y.features());
    let (p, q) = (fx.len(), fy.len());
    let (mu, nu) = (x.measure().weights(), y.measure().weights());
    let ranked = RankedFamilies::new(fx, fy);
    let to_set = |bits| CellSet::from_bits(n, m, bits).expect("grid fits");
    let objective = |bits: u128| -> S {
        let mass = max_mass_value(mu, nu, &to_set(bits));
        (S::one() - mass).max_of(ranked.twice_h(bits))
    };
    // cells of C(u, v, t) for threshold rank r
    let closure = |u: &[usize], v: &[usize], r: u16| -> u128 {
        let mut bits = low_bits(n * m);
        for (i, &j) in u.iter().enumerate() {
            for (c, &rc) in ranked.rank[i][j].iter().enumerate() {
                if rc > r {
                    bits &= !(1 << c);
                }
            }
        }
        for (j, &i) in v.iter().enumerate() {
            for (c, &rc) in ranked.rank[i][j].iter().enumerate() {
                if rc > r {
                    bits &= !(1 << c);
                }
            }
        }
        bits
    };
    // best threshold for an assignment pair: mass rises and 2t rises with t,
    // so the optimum sits where the two terms cross
    let pair_value = |u: &[usize], v: &[usize]| -> (S, u128) {
        let top = ranked.values.len();
        let eval = |r: usize| {
            let bits = closure(u, v, r as u16);
            let mass = max_mass_value(mu, nu, &to_set(bits));
            let t = &ranked.values[r];
            ((S::one() - mass), t.clone() + t, bits)
        };
        let (mut lo, mut hi) = (0, top - 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (a, b, _) = eval(mid);
            if b >= a {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let mut best = (S::one(), 0u128);
        for r in [lo.saturating_sub(1), lo] {
            let (a, b, bits) = eval(r);
            let v = a.max_of(b);
            if v < best.0 {
                best = (v, bits);
            }
        }
        best
    };
    let argmins = |bits: u128| -> (Vec<usize>, Vec<usize>) {
        let sup = |i: usize, j: usize| {
            let mut b = bits;
            let mut s = 0u16;
            while b != 0 {
                let c = b.trailing_zeros() as usize;
                b &= b - 1;
                s = s.max(ranked.rank[i][j][c]);
            }
            s
        };
        let u = (0..p).map(|i| (0..q).min_by_key(|&j| (sup(i, j), j)).expect("q >= 1")).collect();
        let v = (0..q).map(|j| (0..p).min_by_key(|&i| (sup(i, j), i)).expect("p >= 1")).collect();
        (u, v)
    };

    let mut best_value = S::one();
    let mut best_bits = 0u128;
    let mut trace = vec![best_value.clone()];
    let record = |value: S, bits: u128, best_value: &mut S, best_bits: &mut u128, trace: &mut Vec<S>| {
        if value < *best_value {
            *best_value = value;
            *best_bits = bits;
            trace.push(best_value.clone());
        }
    };

    // greedy growth from the empty set
    let mut grown = 0u128;
    for _ in 0..n * m {
        let mut step: Option<(S, u128)> = None;
        for c in 0..n * m {
            if grown >> c & 1 == 1 {
                continue;
            }
            let cand = grown | 1 << c;
            let v = objective(cand);
            if step.as_ref().is_none_or(|(b, _)| v < *b) {
                step = Some((v, cand));
            }
        }
        let (v, cand) = step.expect("a cell remains");
        grown = cand;
        record(v, cand, &mut best_value, &mut best_bits, &mut trace);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for start in 0..=opts.restarts {
        let (mut u, mut v) = if start == 0 {
            argmins(best_bits)
        } else {
            (
                (0..p).map(|_| rng.random_range(0..q)).collect::<Vec<_>>(),
                (0..q).map(|_| rng.random_range(0..p)).collect::<Vec<_>>(),
            )
        };
        let (mut current, mut bits) = pair_value(&u, &v);
        record(current.clone(), bits, &mut best_value, &mut best_bits, &mut trace);
        for _ in 0..opts.max_rounds {
            let mut improved = false;
            let (gu, gv) = argmins(bits);
            if (&gu, &gv) != (&u, &v) {
                let (val, b) = pair_value(&gu, &gv);
                if val < current {
                    (u, v, current, bits) = (gu, gv, val, b);
                    improved = true;
                }
            }
            if !improved {
                'moves: for side in 0..2 {
                    let (len, choices) = if side == 0 { (p, q) } else { (q, p) };
                    for i in 0..len {
                        for j in 0..choices {
                            let (mut cu, mut cv) = (u.clone(), v.clone());
                            let slot = if side == 0 { &mut cu[i] } else { &mut cv[i] };
                            if *slot == j {
                                continue;
                            }
                            *slot = j;
                            let (val, b) = pair_value(&cu, &cv);
                            if val < current {
                                (u, v, current, bits) = (cu, cv, val, b);
                                improved = true;
                                break 'moves;
                            }
                        }
                    }
                }
            }
            record(current.clone(), bits, &mut best_value, &mut best_bits, &mut trace);
            if !improved {
                break;
            }
        }
    }

    let set = to_set(best_bits);
    let (_, coupling) = max_mass_on_set(mu, nu, &set)?;
    let value = box_objective(&coupling, &set, fx, fy)?;
    Ok(BoxHeuristicRun {
        value,
        coupling,
        set,
        trace,
    })
}

/// Largest `2 H_S - dis S` seen; used by tests and reports.
pub fn distortion_gap<S: Scalar>(set: &CellSet, x: &GeometricDataSet<S>, y: &GeometricDataSet<S>) -> S {
    let h = hausdorff_on_set(set, x.features(), y.features());
    h.clone() + h - distortion(set, x.metric(), y.metric())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{n_point_discrete, random_gds, singleton_gds};
    use crate::model::DiscreteMeasure;
    use crate::scalar::{Rational, Zero};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn two_point(a: Rational) -> Matrix<Rational> {
        Matrix::from_rows(vec![vec![q(0, 1), a.clone()], vec![a, q(0, 1)]]).unwrap()
    }

    fn point() -> Matrix<Rational> {
        Matrix::filled(1, 1, q(0, 1))
    }

    #[test]
    fn distortion_examples() {
        let single = CellSet::from_cells(2, 2, &[(0, 1)]).unwrap();
        assert!(distortion(&single, &two_point(q(1, 1)), &two_point(q(1, 2))).is_zero());
        let full = CellSet::full(2, 1).unwrap();
        assert_eq!(distortion(&full, &two_point(q(3, 4)), &point()), q(3, 4));
        let matched = CellSet::from_cells(2, 2, &[(0, 0), (1, 1)]).unwrap();
        assert_eq!(distortion(&matched, &two_point(q(1, 1)), &two_point(q(1, 4))), q(3, 4));
    }

    #[test]
    fn dis_coupling_examples() {
        let u2 = [q(1, 2), q(1, 2)];
        let id = Coupling::new(
            Matrix::from_rows(vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 2)]]).unwrap(),
            &u2,
            &u2,
        )
        .unwrap();
        let d = two_point(q(1, 1));
        let (v, s) = dis_coupling(&id, &d, &d, &Budget::default()).unwrap();
        assert!(v.is_zero());
        assert_eq!(s, CellSet::from_cells(2, 2, &[(0, 0), (1, 1)]).unwrap());

        let p = Coupling::product(&u2, &[q(1, 1)]);
        let (v, _) = dis_coupling(&p, &two_point(q(1, 5)), &point(), &Budget::default()).unwrap();
        assert_eq!(v, q(1, 5));
        let (v, s) = dis_coupling(&p, &two_point(q(4, 5)), &point(), &Budget::default()).unwrap();
        assert_eq!(v, q(1, 2));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn objective_examples() {
        let x = random_gds::<Rational>(3, 2, 4, 1).unwrap();
        let w = x.measure().weights();
        let id = Coupling::new(
            Matrix::from_fn(3, 3, |i, j| if i == j { w[i].clone() } else { q(0, 1) }),
            w,
            w,
        )
        .unwrap();
        let diag = CellSet::from_fn(3, 3, |i, j| i == j).unwrap();
        assert!(box_objective(&id, &diag, x.features(), x.features()).unwrap().is_zero());
        let empty = CellSet::empty(3, 3).unwrap();
        assert_eq!(box_objective(&id, &empty, x.features(), x.features()).unwrap(), q(1, 1));

        let a = singleton_gds(&[q(2, 1)]).unwrap();
        let b = singleton_gds(&[q(5, 1)]).unwrap();
        let one = Coupling::product(&[q(1, 1)], &[q(1, 1)]);
        let full = CellSet::full(1, 1).unwrap();
        assert_eq!(box_objective(&one, &full, a.features(), b.features()).unwrap(), q(6, 1));
    }

    #[test]
    fn exact_examples() {
        let b = Budget::default();
        let x = random_gds::<Rational>(3, 2, 9, 1).unwrap();
        assert!(box_exact(&x, &x, &b).unwrap().value.is_zero());
        let s2 = singleton_gds(&[q(2, 1)]).unwrap();
        let s5 = singleton_gds(&[q(5, 1)]).unwrap();
        assert_eq!(box_exact(&s2, &s5, &b).unwrap().value, q(1, 1));
        let x2 = n_point_discrete::<Rational>(2).unwrap();
        let one = singleton_gds(&[q(1, 1)]).unwrap();
        // every non-empty S has H_S = 1 here
        let sol = box_exact(&x2, &one, &b).unwrap();
        assert_eq!(sol.value, q(1, 1));
        assert_eq!(
            box_objective(&sol.coupling, &sol.set, x2.features(), one.features()).unwrap(),
            sol.value
        );
    }

    #[test]
    fn mm_examples() {
        let b = Budget::default();
        let u2 = DiscreteMeasure::uniform(2).unwrap();
        let pt = MmSpace::new(point(), DiscreteMeasure::dirac()).unwrap();
        for (a, want) in [(q(1, 5), q(1, 5)), (q(4, 5), q(1, 2))] {
            let m = MmSpace::new(two_point(a), u2.clone()).unwrap();
            assert!(box_mm_exact(&m, &m, &b).unwrap().value.is_zero());
            assert_eq!(box_mm_exact(&m, &pt, &b).unwrap().value, want);
        }
    }

    #[test]
    fn witness_examples() {
        let d = two_point(q(1, 1));
        let diag = CellSet::from_cells(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let f = [q(1, 3), q(1, 1)];
        let g = lip1_witness(&diag, &f, &d, &d).unwrap();
        assert!(sup_on_cells(&diag, &f, &g).is_zero());
        assert_eq!(
            lip1_witness(&CellSet::empty(2, 2).unwrap(), &f, &d, &d),
            Err(Error::EmptyCellSet)
        );
        let cert = distortion_certificate(&diag, &two_point(q(1, 1)), &two_point(q(1, 4))).unwrap();
        assert!(cert.favorable);
        assert!(cert.is_tight());
        assert_eq!(cert.upper, q(3, 8));
    }

    #[test]
    fn two_point_fit_matches_grid_oracle() {
        // exhaustive search over g1, g2 on a grid of step 1/16
        let grid: Vec<Rational> = (-32..=48).map(|k| q(k, 16)).collect();
        for (a, b, dy) in [(0, 1, 0), (0, 1, 1), (1, 0, 2), (0, 3, 1), (2, 2, 0)] {
            let (a, b, dy) = (q(a, 2), q(b, 2), q(dy, 4));
            let mut best: Option<Rational> = None;
            for g1 in &grid {
                for g2 in &grid {
                    if (g1.clone() - g2).abs() > dy {
                        continue;
                    }
                    let v = (a.clone() - g1).abs().max((b.clone() - g2).abs());
                    best = Some(best.map_or(v.clone(), |b| b.min(v)));
                }
            }
            assert_eq!(two_point_fit(&a, &b, &dy), best.unwrap());
        }
    }

    #[test]
    fn heuristic_matches_exact_on_small_instances() {
        for seed in 0..10 {
            let x = random_gds::<Rational>(2 + seed as usize % 2, 2, seed, 1).unwrap();
            let y = random_gds::<Rational>(3, 1 + seed as usize % 2, seed + 40, 1).unwrap();
            let exact = box_exact(&x, &y, &Budget::default()).unwrap();
            let h = box_heuristic(&x, &y, &BoxHeuristicOptions::with_seed(seed)).unwrap();
            assert!(h.value >= exact.value);
            assert!(h.trace.windows(2).all(|w| w[1] <= w[0]));
            assert_eq!(h.value, exact.value, "seed {seed}");
        }
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let x = random_gds::<Rational>(4, 2, 1, 1).unwrap();
        let y = random_gds::<Rational>(3, 2, 2, 1).unwrap();
        let a = box_exact(&x, &y, &Budget::default().with_exec(Exec::Parallel)).unwrap();
        let b = box_exact(&x, &y, &Budget::default().with_exec(Exec::Sequential)).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn lip1_witness_postconditions(seed in any::<u64>(), bits in 1u16..) {
            let x = random_gds::<Rational>(3, 2, seed, 1).unwrap();
            let y = random_gds::<Rational>(3, 2, seed ^ 0xff, 1).unwrap();
            let set = CellSet::from_bits(3, 3, bits as u128 & 0x1ff).unwrap();
            prop_assume!(!set.is_empty());
            let (dx, dy) = (x.metric(), y.metric());
            for f in x.features().rows() {
                let g = lip1_witness(&set, f, dx, dy).unwrap();
                prop_assert!(is_lipschitz(&g, dy));
                prop_assert!(sup_on_cells(&set, f, &g) <= distortion(&set, dx, dy).half());
            }
            // dis S <= 2 H_S for families that induce the metrics
            prop_assert!(distortion_gap(&set, &x, &y) >= q(0, 1));
        }
    }
}
