//! The observable distance `dconc`.
//!
//! `dconc(X, Y) = min_π H(π)` with `H(π)` the Hausdorff distance, under the
//! Ky Fan metric of `π`, between `F_X ∘ pr_1` and `F_Y ∘ pr_2`.
//!
//! `H(π) <= ε` holds iff there are assignments `u: F_X -> F_Y` and
//! `v: F_Y -> F_X` with `π(|f - u(f)| > ε) <= ε` and
//! `π(|v(g) - g| > ε) <= ε` for every `f` and `g`. Between consecutive
//! breakpoints `b_k <= ε < b_{k+1}` (the distinct values of `|f(x) - g(y)|`
//! below one, together with 0 and 1) the exceed sets are constant, so for a
//! fixed interval and assignment pair the best `ε` is `max(b_k, t*)`, where
//! `t*` is the least common cap a coupling can put on all exceed sets.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cells::{CellSet, MAX_CELLS};
use crate::coupling::{max_mass_value, random_coupling, Coupling, ProgramMode, SetMassProgram};
use crate::error::{Error, Result};
use crate::exec::{self, Budget};
use crate::matrix::Matrix;
use crate::metrics::{hausdorff_of_table, ky_fan_coupling};
use crate::model::{
    is_lipschitz, mm_lip1_generators, rows_equal, sample_lip1, FeatureFamily, GeometricDataSet,
    MmSpace,
};
use crate::scalar::{sorted_distinct, Scalar};

/// Table of `KF^π(f_i ∘ pr_1, g_j ∘ pr_2)`.
pub fn ky_fan_table<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    pi: &Coupling<S>,
) -> Result<Matrix<S>> {
    check_coupling(x, y, pi)?;
    let fx = x.features();
    let fy = y.features();
    let mut table = Matrix::filled(fx.len(), fy.len(), S::zero());
    for i in 0..fx.len() {
        for j in 0..fy.len() {
            table[(i, j)] = ky_fan_coupling(pi, fx.row(i), fy.row(j))?;
        }
    }
    Ok(table)
}

fn check_coupling<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    pi: &Coupling<S>,
) -> Result<()> {
    if (pi.rows(), pi.cols()) != (x.len(), y.len()) {
        return Err(Error::ShapeMismatch {
            expected: (x.len(), y.len()),
            found: (pi.rows(), pi.cols()),
        });
    }
    Ok(())
}

/// `d_conc^π(X, Y)`.
pub fn dconc_at_coupling<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    pi: &Coupling<S>,
) -> Result<S> {
    Ok(hausdorff_of_table(&ky_fan_table(x, y, pi)?))
}

/// For each `f ∈ F_X`, the first `g ∈ F_Y` minimising `KF^π(f, g)`.
pub fn feature_transfer<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    pi: &Coupling<S>,
) -> Result<Vec<usize>> {
    let table = ky_fan_table(x, y, pi)?;
    Ok(row_argmins(&table))
}

fn row_argmins<S: Scalar>(table: &Matrix<S>) -> Vec<usize> {
    (0..table.rows())
        .map(|i| {
            let row = table.row(i);
            (1..row.len()).fold(0, |best, j| if row[j] < row[best] { j } else { best })
        })
        .collect()
}

fn col_argmins<S: Scalar>(table: &Matrix<S>) -> Vec<usize> {
    row_argmins(&table.transpose())
}

/// An exact minimiser of `dconc`.
#[derive(Debug, Clone, PartialEq)]
pub struct DconcSolution<S> {
    pub value: S,
    pub coupling: Coupling<S>,
    /// `forward[i]`: the feature of `Y` matched to feature `i` of `X`.
    pub forward: Vec<usize>,
    /// `backward[j]`: the feature of `X` matched to feature `j` of `Y`.
    pub backward: Vec<usize>,
}

/// Shared precomputation: breakpoints, and for every feature pair the rank
/// of `|f(x) - g(y)|` among the breakpoints on each cell.
/// Per-key cap and plan, `None` where the key is not evaluated.
type CapSolutions<S> = Vec<Option<(S, Matrix<S>)>>;

struct Instance<S> {
    n: usize,
    m: usize,
    mu: Vec<S>,
    nu: Vec<S>,
    /// representative rows (first occurrence of each distinct row)
    xs: Vec<usize>,
    ys: Vec<usize>,
    /// `b_0 = 0 < ... < b_K = 1`
    levels: Vec<S>,
    /// `rank[a][b][cell]` for representatives `a`, `b`; values >= 1 get `K`
    rank: Vec<Vec<Vec<u16>>>,
}

impl<S: Scalar> Instance<S> {
    fn new(x: &GeometricDataSet<S>, y: &GeometricDataSet<S>) -> Result<Self> {
        let (n, m) = (x.len(), y.len());
        if n * m > MAX_CELLS {
            return Err(Error::SizeLimit {
                cells: n * m,
                limit: MAX_CELLS,
            });
        }
        let xs = x.features().distinct_rows();
        let ys = y.features().distinct_rows();
        let diff = |a: usize, b: usize, c: usize| {
            (x.features().row(a)[c / m].clone() - &y.features().row(b)[c % m]).abs()
        };
        let mut values = vec![S::zero(), S::one()];
        for &a in &xs {
            for &b in &ys {
                for c in 0..n * m {
                    let d = diff(a, b, c);
                    if d < S::one() {
                        values.push(d);
                    }
                }
            }
        }
        let levels = sorted_distinct(values);
        let top = levels.len() - 1;
        let rank = xs
            .iter()
            .map(|&a| {
                ys.iter()
                    .map(|&b| {
                        (0..n * m)
                            .map(|c| {
                                let d = diff(a, b, c);
                                if !d.definitely_gt(&S::zero()) {
                                    return 0;
                                }
                                levels[..top]
                                    .iter()
                                    .position(|l| l.approx_eq(&d))
                                    .unwrap_or(top) as u16
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Ok(Instance {
            n,
            m,
            mu: x.measure().weights().to_vec(),
            nu: y.measure().weights().to_vec(),
            xs,
            ys,
            levels,
            rank,
        })
    }

    fn top(&self) -> usize {
        self.levels.len() - 1
    }

    /// Cells where `|f_a - g_b| > b_k`.
    fn exceed(&self, a: usize, b: usize, k: usize) -> u128 {
        self.rank[a][b]
            .iter()
            .enumerate()
            .filter(|(_, &r)| r as usize > k)
            .fold(0, |acc, (c, _)| acc | 1 << c)
    }

    fn cells(&self, bits: u128) -> CellSet {
        CellSet::from_bits(self.n, self.m, bits).expect("grid fits")
    }

    /// `min_π π(E) = 1 - max_π π(complement)`.
    fn min_mass(&self, bits: u128) -> S {
        if bits == 0 {
            return S::zero();
        }
        S::one() - max_mass_value(&self.mu, &self.nu, &self.cells(bits).complement())
    }

    /// Least common cap on the sets and a coupling attaining it.
    fn common_cap(&self, key: &[u128]) -> (S, Matrix<S>) {
        if key.is_empty() {
            return (S::zero(), Coupling::product(&self.mu, &self.nu).plan().clone());
        }
        if key.len() == 1 {
            let (v, c) = crate::coupling::max_mass_on_set(
                &self.mu,
                &self.nu,
                &self.cells(key[0]).complement(),
            )
            .expect("marginals are valid");
            return (S::one() - v, c.plan().clone());
        }
        let sets = key.iter().map(|&b| self.cells(b)).collect();
        let program = SetMassProgram::new(
            self.mu.clone(),
            self.nu.clone(),
            ProgramMode::MinimizeCommonCap(sets),
        )
        .expect("marginals are valid");
        let sol = program.solve().expect("the product coupling is feasible");
        (sol.value, sol.plan)
    }

    /// Constraint sets for an assignment pair (indices into representatives),
    /// reduced to the inclusion-maximal non-empty ones, sorted.
    fn key(&self, u: &[usize], v: &[usize], k: usize) -> Vec<u128> {
        let mut sets: Vec<u128> = Vec::with_capacity(u.len() + v.len());
        for (a, &b) in u.iter().enumerate() {
            sets.push(self.exceed(a, b, k));
        }
        for (b, &a) in v.iter().enumerate() {
            sets.push(self.exceed(a, b, k));
        }
        maximal_sets(sets)
    }

    /// False when the pair cannot score below `current`: at the last level
    /// under `current` the cap is already at least the largest single-set
    /// minimum, and caps only grow at lower levels.
    fn may_improve(&self, u: &[usize], v: &[usize], current: &S, mins: &mut HashMap<u128, S>) -> bool {
        let Some(k) = (0..self.top()).rev().find(|&k| self.levels[k] < *current) else {
            return false;
        };
        self.key(u, v, k)
            .into_iter()
            .all(|bits| *mins.entry(bits).or_insert_with(|| self.min_mass(bits)) < *current)
    }

    /// Best `ε` for a fixed assignment pair: `max(b_k, t*_k)` at the first
    /// interval where it does not pass `b_{k+1}`, with the coupling.
    fn assignment_value(
        &self,
        u: &[usize],
        v: &[usize],
        memo: &mut HashMap<Vec<u128>, (S, Matrix<S>)>,
    ) -> (S, Matrix<S>) {
        let top = self.top();
        let mut feasible = |k: usize| {
            let (t, plan) = memo
                .entry(self.key(u, v, k))
                .or_insert_with_key(|key| self.common_cap(key))
                .clone();
            let value = self.levels[k].clone().max_of(t);
            (value <= self.levels[k + 1], value, plan)
        };
        let (mut lo, mut hi) = (0, top);
        let mut best: Option<(S, Matrix<S>)> = None;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (ok, value, plan) = feasible(mid);
            if ok {
                best = Some((value, plan));
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        match best {
            Some(b) if lo < top => b,
            _ => (S::one(), Coupling::product(&self.mu, &self.nu).plan().clone()),
        }
    }

    /// Admissible choices at interval `k`: candidates whose own lower bound
    /// stays within the interval, minus those whose exceed set contains
    /// another candidate's.
    fn choices(&self, k: usize, forward: bool) -> Vec<Vec<usize>> {
        let (outer, inner) = if forward {
            (self.xs.len(), self.ys.len())
        } else {
            (self.ys.len(), self.xs.len())
        };
        let next = &self.levels[k + 1];
        (0..outer)
            .map(|o| {
                let set = |i: usize| {
                    if forward {
                        self.exceed(o, i, k)
                    } else {
                        self.exceed(i, o, k)
                    }
                };
                let admissible: Vec<(usize, u128)> = (0..inner)
                    .map(|i| (i, set(i)))
                    .filter(|&(_, e)| self.levels[k].clone().max_of(self.min_mass(e)) <= *next)
                    .collect();
                admissible
                    .iter()
                    .filter(|&&(i, e)| {
                        !admissible.iter().any(|&(i2, e2)| {
                            (e2 & !e == 0) && (e2 != e || i2 < i)
                        })
                    })
                    .map(|&(i, _)| i)
                    .collect()
            })
            .collect()
    }
}

fn maximal_sets(mut sets: Vec<u128>) -> Vec<u128> {
    sets.retain(|&s| s != 0);
    sets.sort_unstable();
    sets.dedup();
    let keep: Vec<u128> = sets
        .iter()
        .copied()
        .filter(|&s| !sets.iter().any(|&t| t != s && s & !t == 0))
        .collect();
    keep
}

/// Mixed-radix decoding of an index into one choice per list.
fn decode(mut index: u64, lists: &[Vec<usize>], out: &mut Vec<usize>) {
    out.clear();
    for l in lists {
        let r = l.len() as u64;
        out.push(l[(index % r) as usize]);
        index /= r;
    }
}

fn combos(lists: &[Vec<usize>]) -> u64 {
    lists.iter().map(|l| l.len() as u64).product()
}

/// All assignment pairs admissible at interval `k`, grouped by constraint key.
struct Grid {
    forward: Vec<Vec<usize>>,
    backward: Vec<Vec<usize>>,
    keys: Vec<Vec<u128>>,
    /// key index of every assignment pair, in enumeration order
    pair_key: Vec<u32>,
}

impl Grid {
    fn build<S: Scalar>(inst: &Instance<S>, k: usize) -> Option<Grid> {
        let forward = inst.choices(k, true);
        let backward = inst.choices(k, false);
        if forward.iter().chain(&backward).any(Vec::is_empty) {
            return None;
        }
        let nf = combos(&forward);
        let nb = combos(&backward);
        let mut index: HashMap<Vec<u128>, u32> = HashMap::new();
        let mut keys = Vec::new();
        let mut pair_key = Vec::with_capacity((nf * nb) as usize);
        let (mut u, mut v) = (Vec::new(), Vec::new());
        for p in 0..nf * nb {
            decode(p % nf, &forward, &mut u);
            decode(p / nf, &backward, &mut v);
            let key = inst.key(&u, &v, k);
            let id = *index.entry(key.clone()).or_insert_with(|| {
                keys.push(key);
                (keys.len() - 1) as u32
            });
            pair_key.push(id);
        }
        Some(Grid {
            forward,
            backward,
            keys,
            pair_key,
        })
    }
}

/// Exact `dconc` with a witness coupling and witness assignments.
pub fn dconc_exact<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    budget: &Budget,
) -> Result<DconcSolution<S>> {
    let (p, q) = (x.features().len() as u128, y.features().len() as u128);
    let needed = q
        .checked_pow(p as u32)
        .and_then(|a| p.checked_pow(q as u32).and_then(|b| a.checked_mul(b)))
        .unwrap_or(u128::MAX);
    if needed > budget.max_assignments {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.max_assignments,
        });
    }
    let inst = Instance::new(x, y)?;
    let top = inst.top();
    let exec = budget.exec;

    let feasible_at = |k: usize| -> Option<(Grid, CapSolutions<S>)> {
        let grid = Grid::build(&inst, k)?;
        let next = &inst.levels[k + 1];
        let base = &inst.levels[k];
        let solved = exec::map_range(exec, grid.keys.len(), |i| {
            let (t, plan) = inst.common_cap(&grid.keys[i]);
            let value = base.clone().max_of(t);
            (value <= *next).then_some((value, plan))
        });
        solved.iter().any(Option::is_some).then_some((grid, solved))
    };

    let (mut lo, mut hi) = (0, top);
    let mut found = None;
    while lo < hi {
        let mid = (lo + hi) / 2;
        match feasible_at(mid) {
            Some(r) => {
                found = Some(r);
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }

    let (value, plan, u, v) = match found {
        Some((grid, solved)) if lo < top => {
            let mut best: Option<(usize, &S)> = None;
            for (pair, &id) in grid.pair_key.iter().enumerate() {
                if let Some((val, _)) = &solved[id as usize] {
                    if best.is_none_or(|(_, b)| val < b) {
                        best = Some((pair, val));
                    }
                }
            }
            let (pair, _) = best.expect("interval is feasible");
            let nf = combos(&grid.forward);
            let (mut u, mut v) = (Vec::new(), Vec::new());
            decode(pair as u64 % nf, &grid.forward, &mut u);
            decode(pair as u64 / nf, &grid.backward, &mut v);
            let (val, plan) = solved[grid.pair_key[pair] as usize]
                .clone()
                .expect("chosen pair is feasible");
            (val, plan, u, v)
        }
        _ => {
            let plan = Coupling::product(&inst.mu, &inst.nu).plan().clone();
            (S::one(), plan, Vec::new(), Vec::new())
        }
    };

    let coupling = Coupling::from_plan_unchecked(plan);
    let table = ky_fan_table(x, y, &coupling)?;
    let (forward, backward) = if u.is_empty() {
        (row_argmins(&table), col_argmins(&table))
    } else {
        expand_assignments(x.features(), y.features(), &inst, &u, &v)
    };
    debug_assert!(hausdorff_of_table(&table).approx_eq(&value));
    Ok(DconcSolution {
        value,
        coupling,
        forward,
        backward,
    })
}

/// Maps representative-level assignments back to every original row.
fn expand_assignments<S: Scalar>(
    fx: &FeatureFamily<S>,
    fy: &FeatureFamily<S>,
    inst: &Instance<S>,
    u: &[usize],
    v: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let rep = |fam: &FeatureFamily<S>, reps: &[usize], i: usize| {
        reps.iter()
            .position(|&r| rows_equal(fam.row(r), fam.row(i)))
            .expect("every row has a representative")
    };
    let forward = (0..fx.len())
        .map(|i| inst.ys[u[rep(fx, &inst.xs, i)]])
        .collect();
    let backward = (0..fy.len())
        .map(|j| inst.xs[v[rep(fy, &inst.ys, j)]])
        .collect();
    (forward, backward)
}

/// `dconc` exactly when the assignment budget allows, otherwise the
/// heuristic upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DconcOutcome<S> {
    pub value: S,
    pub coupling: Coupling<S>,
    pub exact: bool,
}

pub fn dconc<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    budget: &Budget,
    seed: u64,
) -> Result<DconcOutcome<S>> {
    match dconc_exact(x, y, budget) {
        Ok(s) => Ok(DconcOutcome {
            value: s.value,
            coupling: s.coupling,
            exact: true,
        }),
        Err(Error::BudgetExceeded { .. }) | Err(Error::SizeLimit { .. }) => {
            let h = dconc_heuristic(x, y, &HeuristicOptions::with_seed(seed))?;
            Ok(DconcOutcome {
                value: h.value,
                coupling: h.coupling,
                exact: false,
            })
        }
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HeuristicOptions {
    /// Random starting points in addition to the product coupling.
    pub restarts: usize,
    /// Improvement rounds per start.
    pub max_rounds: usize,
    pub seed: u64,
}

impl HeuristicOptions {
    pub fn with_seed(seed: u64) -> Self {
        HeuristicOptions {
            restarts: 6,
            max_rounds: 50,
            seed,
        }
    }
}

impl Default for HeuristicOptions {
    fn default() -> Self {
        Self::with_seed(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeuristicRun<S> {
    /// `d_conc^π` at the returned coupling, an upper bound on `dconc`.
    pub value: S,
    pub coupling: Coupling<S>,
    /// Best value after every accepted step; non-increasing.
    pub trace: Vec<S>,
}

/// Local search over assignment pairs. From a start coupling, the greedy
/// assignments are read off; then single-feature reassignments are tried,
/// each scored by its optimal coupling (a common-cap program per interval).
/// Works on any size; the scoring programs grow with `n * m`.
pub fn dconc_heuristic<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    opts: &HeuristicOptions,
) -> Result<HeuristicRun<S>> {
    let inst = Instance::new(x, y)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let (p, q) = (inst.xs.len(), inst.ys.len());
    let rep_x = x.features().select(&inst.xs)?;
    let rep_y = y.features().select(&inst.ys)?;
    let rx = GeometricDataSet::with_labels(x.points().to_vec(), rep_x, x.measure().clone())?;
    let ry = GeometricDataSet::with_labels(y.points().to_vec(), rep_y, y.measure().clone())?;

    let product = Coupling::product(&inst.mu, &inst.nu);
    let mut best_value = dconc_at_coupling(&rx, &ry, &product)?;
    let mut best_plan = product.plan().clone();
    let mut trace = vec![best_value.clone()];
    let mut memo = HashMap::new();
    let mut mins = HashMap::new();

    for start in 0..=opts.restarts {
        if best_value.is_zero() {
            break;
        }
        let (mut u, mut v) = if start == 0 {
            let t = ky_fan_table(&rx, &ry, &product)?;
            (row_argmins(&t), col_argmins(&t))
        } else if start % 2 == 1 {
            let c = random_coupling(&inst.mu, &inst.nu, &mut rng);
            let t = ky_fan_table(&rx, &ry, &c)?;
            (row_argmins(&t), col_argmins(&t))
        } else {
            (
                (0..p).map(|_| rng.random_range(0..q)).collect(),
                (0..q).map(|_| rng.random_range(0..p)).collect(),
            )
        };
        let (mut current, mut plan) = inst.assignment_value(&u, &v, &mut memo);
        for _ in 0..opts.max_rounds {
            // the greedy assignments of the current coupling
            let c = Coupling::from_plan_unchecked(plan.clone());
            let t = ky_fan_table(&rx, &ry, &c)?;
            let (gu, gv) = (row_argmins(&t), col_argmins(&t));
            let mut improved = false;
            if (gu.clone(), gv.clone()) != (u.clone(), v.clone()) {
                let (val, pl) = inst.assignment_value(&gu, &gv, &mut memo);
                if val < current {
                    (u, v, current, plan) = (gu, gv, val, pl);
                    improved = true;
                }
            }
            if !improved {
                'moves: for side in 0..2 {
                    let (len, choices) = if side == 0 { (p, q) } else { (q, p) };
                    for i in 0..len {
                        for j in 0..choices {
                            let (mut cu, mut cv) = (u.clone(), v.clone());
                            if side == 0 {
                                if cu[i] == j {
                                    continue;
                                }
                                cu[i] = j;
                            } else {
                                if cv[i] == j {
                                    continue;
                                }
                                cv[i] = j;
                            }
                            if !inst.may_improve(&cu, &cv, &current, &mut mins) {
                                continue;
                            }
                            let (val, pl) = inst.assignment_value(&cu, &cv, &mut memo);
                            if val < current {
                                (u, v, current, plan) = (cu, cv, val, pl);
                                improved = true;
                                break 'moves;
                            }
                        }
                    }
                }
            }
            if current < best_value {
                let c = Coupling::from_plan_unchecked(plan.clone());
                let actual = dconc_at_coupling(&rx, &ry, &c)?;
                if actual < best_value {
                    best_value = actual;
                    best_plan = plan.clone();
                    trace.push(best_value.clone());
                }
            }
            if !improved || best_value.is_zero() {
                break;
            }
        }
    }
    let coupling = Coupling::from_plan_unchecked(best_plan);
    let value = dconc_at_coupling(x, y, &coupling)?;
    Ok(HeuristicRun {
        value,
        coupling,
        trace,
    })
}

/// `min_{π, g ∈ F_Y} KF^π(w ∘ pr_1, g ∘ pr_2)` for a 1-Lipschitz `w` on `X`.
/// When `w ∈ F_X` this is a lower bound on `dconc(X, Y)`.
pub fn dconc_lower_witness<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    witness: &[S],
) -> Result<S> {
    if witness.len() != x.len() {
        return Err(Error::LengthMismatch {
            left: witness.len(),
            right: x.len(),
        });
    }
    if !is_lipschitz(witness, x.metric()) {
        return Err(Error::WitnessNotLipschitz);
    }
    let mu = x.measure().weights();
    let nu = y.measure().weights();
    let mut best = S::one();
    for g in y.features().rows() {
        best = best.min_of(min_ky_fan_over_couplings(mu, nu, witness, g)?);
    }
    Ok(best)
}

/// `min_π KF^π(f ∘ pr_1, g ∘ pr_2)`. For one pair the common-cap program
/// reduces to a single max-flow per interval.
pub fn min_ky_fan_over_couplings<S: Scalar>(mu: &[S], nu: &[S], f: &[S], g: &[S]) -> Result<S> {
    let (n, m) = (mu.len(), nu.len());
    if n * m > MAX_CELLS {
        return Err(Error::SizeLimit {
            cells: n * m,
            limit: MAX_CELLS,
        });
    }
    let diffs: Vec<S> = (0..n * m)
        .map(|c| (f[c / m].clone() - &g[c % m]).abs())
        .collect();
    let mut values: Vec<S> = diffs.iter().filter(|d| **d < S::one()).cloned().collect();
    values.extend([S::zero(), S::one()]);
    let levels = sorted_distinct(values);
    let top = levels.len() - 1;
    for k in 0..top {
        let within = CellSet::from_fn(n, m, |a, b| !diffs[a * m + b].definitely_gt(&levels[k]))?;
        let tail = S::one() - max_mass_value(mu, nu, &within);
        let value = levels[k].clone().max_of(tail);
        if value <= levels[k + 1] {
            return Ok(value);
        }
    }
    Ok(S::one())
}

/// Lower bound from every single feature of either side, and the heuristic
/// upper bound. Both are certified for geometric data sets.
#[derive(Debug, Clone, PartialEq)]
pub struct DconcBounds<S> {
    pub lower: S,
    pub upper: S,
}

pub fn dconc_bounds<S: Scalar>(
    x: &GeometricDataSet<S>,
    y: &GeometricDataSet<S>,
    seed: u64,
) -> Result<DconcBounds<S>> {
    let mut lower = S::zero();
    for f in x.features().rows() {
        lower = lower.max_of(dconc_lower_witness(x, y, f)?);
    }
    for g in y.features().rows() {
        lower = lower.max_of(dconc_lower_witness(y, x, g)?);
    }
    let upper = dconc_heuristic(x, y, &HeuristicOptions::with_seed(seed))?.value;
    Ok(DconcBounds { lower, upper })
}

/// The geometric data set `(X, G, μ)` with `G` the distance generators of
/// `M` plus `samples` random 1-Lipschitz functions.
pub fn lip1_dataset<S: Scalar>(
    mm: &MmSpace<S>,
    samples: usize,
    seed: u64,
) -> Result<GeometricDataSet<S>> {
    let family = if samples == 0 {
        mm_lip1_generators(mm)
    } else {
        sample_lip1(mm, samples, seed)
    };
    GeometricDataSet::new(family, mm.measure().clone())
}

/// Bounds for the mm-space reading, where `F` is all of `Lip1`. Both sides
/// use a finite sample of `Lip1`, so neither bound is certified: the
/// full family can only lower the upper bound, and the witness minimum over
/// sampled `g` can exceed the minimum over all of `Lip1(Y)`.
pub fn dconc_mm_bounds<S: Scalar>(
    mx: &MmSpace<S>,
    my: &MmSpace<S>,
    samples: usize,
    seed: u64,
) -> Result<DconcBounds<S>> {
    let x = lip1_dataset(mx, samples, seed)?;
    let y = lip1_dataset(my, samples, seed.wrapping_add(1))?;
    dconc_bounds(&x, &y, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{n_point_discrete, random_gds, singleton_gds};
    use crate::model::DiscreteMeasure;
    use crate::scalar::{Rational, Zero};

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    fn budget() -> Budget {
        Budget::default()
    }

    #[test]
    fn at_coupling_examples() {
        let a = singleton_gds(&[q(0, 1)]).unwrap();
        let b = singleton_gds(&[q(1, 1)]).unwrap();
        let pi = Coupling::product(&[q(1, 1)], &[q(1, 1)]);
        assert_eq!(dconc_at_coupling(&a, &b, &pi).unwrap(), q(1, 1));

        let x2 = n_point_discrete::<Rational>(2).unwrap();
        let one = singleton_gds(&[q(1, 1)]).unwrap();
        let pi = Coupling::product(x2.measure().weights(), one.measure().weights());
        assert_eq!(dconc_at_coupling(&x2, &one, &pi).unwrap(), q(1, 2));

        let x = random_gds::<Rational>(3, 2, 5, 1).unwrap();
        let id = Coupling::new(
            Matrix::from_fn(3, 3, |i, j| {
                if i == j {
                    x.measure().weight(i).clone()
                } else {
                    q(0, 1)
                }
            }),
            x.measure().weights(),
            x.measure().weights(),
        )
        .unwrap();
        assert_eq!(dconc_at_coupling(&x, &x, &id).unwrap(), q(0, 1));
    }

    #[test]
    fn exact_examples() {
        let x = random_gds::<Rational>(3, 2, 11, 1).unwrap();
        let s = dconc_exact(&x, &x, &budget()).unwrap();
        assert!(s.value.is_zero());

        let a = singleton_gds(&[q(0, 1), q(3, 1)]).unwrap();
        let b = singleton_gds(&[q(1, 1), q(7, 1)]).unwrap();
        assert_eq!(dconc_exact(&a, &b, &budget()).unwrap().value, q(1, 1));
    }

    #[test]
    fn discrete_versus_singleton() {
        let one = singleton_gds(&[q(1, 1)]).unwrap();
        for n in 2..=4 {
            let x = n_point_discrete::<Rational>(n).unwrap();
            let s = dconc_exact(&x, &one, &budget()).unwrap();
            assert!(s.value <= q(1, n as i64));
            assert_eq!(dconc_at_coupling(&x, &one, &s.coupling).unwrap(), s.value);
        }
    }

    #[test]
    fn lower_witness_examples() {
        let x = n_point_discrete::<Rational>(2).unwrap();
        let c = singleton_gds(&[q(0, 1)]).unwrap();
        let zero_x = GeometricDataSet::new(
            FeatureFamily::from_rows(vec![vec![q(0, 1), q(1, 1)]]).unwrap(),
            DiscreteMeasure::uniform(2).unwrap(),
        )
        .unwrap();
        assert_eq!(
            dconc_lower_witness(&zero_x, &c, &[q(0, 1), q(0, 1)]).unwrap(),
            q(0, 1)
        );
        assert_eq!(
            dconc_lower_witness(&x, &c, &[q(0, 1), q(2, 1)]),
            Err(Error::WitnessNotLipschitz)
        );
    }

    #[test]
    fn transfer_examples() {
        let a = singleton_gds(&[q(0, 1), q(5, 1)]).unwrap();
        let b = singleton_gds(&[q(2, 5)]).unwrap();
        let pi = Coupling::product(&[q(1, 1)], &[q(1, 1)]);
        assert_eq!(feature_transfer(&a, &b, &pi).unwrap(), vec![0, 0]);
    }

    #[test]
    fn exact_respects_budget() {
        let x = random_gds::<Rational>(2, 5, 1, 1).unwrap();
        let tight = Budget {
            max_assignments: 10,
            ..Budget::default()
        };
        assert!(matches!(
            dconc_exact(&x, &x, &tight),
            Err(Error::BudgetExceeded { .. })
        ));
        let out = dconc(&x, &x, &tight, 0).unwrap();
        assert!(!out.exact);
        assert!(out.value.is_zero());
    }

    #[test]
    fn heuristic_and_witness_bracket_exact() {
        for seed in 0..12 {
            let x = random_gds::<Rational>(2 + (seed as usize % 3), 1 + seed as usize % 3, seed, 1).unwrap();
            let y = random_gds::<Rational>(3 - (seed as usize % 2), 2, seed + 100, 1).unwrap();
            let exact = dconc_exact(&x, &y, &budget()).unwrap();
            assert_eq!(dconc_at_coupling(&x, &y, &exact.coupling).unwrap(), exact.value);
            let h = dconc_heuristic(&x, &y, &HeuristicOptions::with_seed(seed)).unwrap();
            assert!(h.value >= exact.value);
            assert!(h.trace.windows(2).all(|w| w[1] <= w[0]));
            for f in x.features().rows() {
                assert!(dconc_lower_witness(&x, &y, f).unwrap() <= exact.value);
            }
            let rev = dconc_exact(&y, &x, &budget()).unwrap();
            assert_eq!(rev.value, exact.value);
            // transferred features realise the coupling value
            let u = feature_transfer(&x, &y, &exact.coupling).unwrap();
            for (i, &j) in u.iter().enumerate() {
                let kf = ky_fan_coupling(&exact.coupling, x.features().row(i), y.features().row(j)).unwrap();
                assert!(kf <= exact.value);
            }
        }
    }
}
