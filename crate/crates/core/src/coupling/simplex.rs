//! Dense two-phase simplex with Bland's rule. All variables are
//! non-negative; the objective is minimised.

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub coeffs: Vec<S>,
    pub relation: Relation,
    pub rhs: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<S> {
    pub vars: usize,
    pub objective: Vec<S>,
    pub constraints: Vec<Constraint<S>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome<S> {
    Optimal { value: S, x: Vec<S> },
    Infeasible,
    Unbounded,
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new(objective: Vec<S>) -> Self {
        LinearProgram {
            vars: objective.len(),
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, coeffs: Vec<S>, relation: Relation, rhs: S) {
        debug_assert_eq!(coeffs.len(), self.vars);
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    pub fn solve(&self) -> LpOutcome<S> {
        solve(self)
    }
}

struct Tableau<S> {
    rows: Vec<Vec<S>>,
    basis: Vec<usize>,
    cols: usize,
}

enum Step {
    Optimal,
    Unbounded,
}

impl<S: Scalar> Tableau<S> {
    fn rhs(&self, i: usize) -> &S {
        &self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        if !p.is_one() {
            for v in self.rows[r].iter_mut() {
                if !v.is_zero() {
                    *v = v.clone() / &p;
                }
            }
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let factor = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= factor.clone() * pv;
                }
            }
            if S::MODE == crate::scalar::NumericMode::Float {
                for v in row.iter_mut() {
                    if v.abs() < S::from_f64(1e-13) {
                        *v = S::zero();
                    }
                }
            }
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[S], j: usize) -> S {
        let mut r = cost[j].clone();
        for (i, &b) in self.basis.iter().enumerate() {
            if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                r -= cost[b].clone() * &self.rows[i][j];
            }
        }
        r
    }

    fn optimize(&mut self, cost: &[S], allowed: impl Fn(usize) -> bool) -> Step {
        let neg_tol = -S::tolerance();
        loop {
            let entering = (0..self.cols)
                .filter(|&j| allowed(j) && !self.basis.contains(&j))
                .find(|&j| self.reduced_cost(cost, j) < neg_tol);
            let Some(c) = entering else {
                return Step::Optimal;
            };
            let mut leave: Option<(usize, S)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.definitely_gt(&S::zero()) {
                    continue;
                }
                let ratio = self.rhs(i).clone() / a;
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => {
                        ratio < *lr
                            && !ratio.approx_eq(lr)
                            || (ratio.approx_eq(lr) && self.basis[i] < self.basis[*li])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            match leave {
                None => return Step::Unbounded,
                Some((r, _)) => self.pivot(r, c),
            }
        }
    }

    fn objective(&self, cost: &[S]) -> S {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b].clone() * self.rhs(i))
            .sum()
    }
}

pub fn solve<S: Scalar>(lp: &LinearProgram<S>) -> LpOutcome<S> {
    let n = lp.vars;
    let m = lp.constraints.len();
    // column layout: structural | slack/surplus | artificial | rhs
    let slack_count = lp
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let mut normalized = Vec::with_capacity(m);
    for c in &lp.constraints {
        if c.rhs < S::zero() {
            let relation = match c.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            normalized.push((
                c.coeffs.iter().map(|v| -v.clone()).collect::<Vec<_>>(),
                relation,
                -c.rhs.clone(),
            ));
        } else {
            normalized.push((c.coeffs.clone(), c.relation, c.rhs.clone()));
        }
    }
    let art_count = normalized
        .iter()
        .filter(|c| c.1 != Relation::Le)
        .count();
    let art_start = n + slack_count;
    let cols = art_start + art_count;
    let mut rows = Vec::with_capacity(m);
    let mut basis = Vec::with_capacity(m);
    let (mut slack, mut art) = (n, art_start);
    for (coeffs, relation, rhs) in normalized {
        let mut row = vec![S::zero(); cols + 1];
        row[..n].clone_from_slice(&coeffs);
        row[cols] = rhs;
        match relation {
            Relation::Le => {
                row[slack] = S::one();
                basis.push(slack);
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -S::one();
                slack += 1;
                row[art] = S::one();
                basis.push(art);
                art += 1;
            }
            Relation::Eq => {
                row[art] = S::one();
                basis.push(art);
                art += 1;
            }
        }
        rows.push(row);
    }
    let mut t = Tableau { rows, basis, cols };

    if art_count > 0 {
        let phase1: Vec<S> = (0..cols)
            .map(|j| if j >= art_start { S::one() } else { S::zero() })
            .collect();
        t.optimize(&phase1, |_| true);
        if t.objective(&phase1).definitely_gt(&S::zero()) {
            return LpOutcome::Infeasible;
        }
        // drive artificials out of the basis; rows that cannot pivot are redundant
        let mut i = 0;
        while i < t.rows.len() {
            if t.basis[i] >= art_start {
                let col = (0..art_start).find(|&j| !t.rows[i][j].is_negligible());
                match col {
                    Some(j) => {
                        t.pivot(i, j);
                        i += 1;
                    }
                    None => {
                        t.rows.remove(i);
                        t.basis.remove(i);
                    }
                }
            } else {
                i += 1;
            }
        }
    }

    let mut cost = vec![S::zero(); cols];
    cost[..n].clone_from_slice(&lp.objective);
    match t.optimize(&cost, |j| j < art_start) {
        Step::Unbounded => LpOutcome::Unbounded,
        Step::Optimal => {
            let mut x = vec![S::zero(); n];
            for (i, &b) in t.basis.iter().enumerate() {
                if b < n {
                    x[b] = t.rhs(i).clone();
                }
            }
            let value = lp
                .objective
                .iter()
                .zip(&x)
                .map(|(c, v)| c.clone() * v)
                .sum();
            LpOutcome::Optimal { value, x }
        }
    }
}
