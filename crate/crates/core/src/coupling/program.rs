//! Linear programs over the transportation polytope `Π(μ, ν)` whose
//! constraints are masses of cell sets.

use crate::cells::CellSet;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

use super::simplex::{LinearProgram, LpOutcome, Relation};

#[derive(Debug, Clone, PartialEq)]
pub enum ProgramMode<S> {
    /// Find a coupling with `π(E) <= cap` for every `(E, cap)`.
    Feasibility(Vec<(CellSet, S)>),
    /// Minimise `t` subject to `π(E) <= t` for every `E`.
    MinimizeCommonCap(Vec<CellSet>),
    /// Maximise `π(S)`.
    MaximizeMassOnSet(CellSet),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetMassProgram<S> {
    mu: Vec<S>,
    nu: Vec<S>,
    mode: ProgramMode<S>,
}

/// Optimal value (zero for feasibility) and an optimal coupling matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgramSolution<S> {
    pub value: S,
    pub plan: Matrix<S>,
}

impl<S: Scalar> SetMassProgram<S> {
    /// Marginals may contain zeros but must carry equal total mass.
    pub fn new(mu: Vec<S>, nu: Vec<S>, mode: ProgramMode<S>) -> Result<Self> {
        let a: S = mu.iter().cloned().sum();
        let b: S = nu.iter().cloned().sum();
        if !a.approx_eq(&b) {
            return Err(Error::InfeasibleMarginals);
        }
        if mu.iter().chain(&nu).any(|w| *w < S::zero()) {
            return Err(Error::InfeasibleMarginals);
        }
        let shape = (mu.len(), nu.len());
        let sets: Vec<&CellSet> = match &mode {
            ProgramMode::Feasibility(caps) => caps.iter().map(|(e, _)| e).collect(),
            ProgramMode::MinimizeCommonCap(sets) => sets.iter().collect(),
            ProgramMode::MaximizeMassOnSet(s) => vec![s],
        };
        for e in sets {
            if (e.rows(), e.cols()) != shape {
                return Err(Error::ShapeMismatch {
                    expected: shape,
                    found: (e.rows(), e.cols()),
                });
            }
        }
        Ok(SetMassProgram { mu, nu, mode })
    }

    /// `None` when a feasibility program has no solution.
    pub fn solve(&self) -> Option<ProgramSolution<S>> {
        let (n, m) = (self.mu.len(), self.nu.len());
        let cells = n * m;
        let with_t = matches!(self.mode, ProgramMode::MinimizeCommonCap(_));
        let vars = cells + usize::from(with_t);
        let mut objective = vec![S::zero(); vars];
        match &self.mode {
            ProgramMode::MinimizeCommonCap(_) => objective[cells] = S::one(),
            ProgramMode::MaximizeMassOnSet(s) => {
                for (x, y) in s.iter() {
                    objective[x * m + y] = -S::one();
                }
            }
            ProgramMode::Feasibility(_) => {}
        }
        let mut lp = LinearProgram::new(objective);
        for x in 0..n {
            let mut row = vec![S::zero(); vars];
            for y in 0..m {
                row[x * m + y] = S::one();
            }
            lp.push(row, Relation::Eq, self.mu[x].clone());
        }
        // the last column sum follows from the others
        for y in 0..m.saturating_sub(1) {
            let mut row = vec![S::zero(); vars];
            for x in 0..n {
                row[x * m + y] = S::one();
            }
            lp.push(row, Relation::Eq, self.nu[y].clone());
        }
        let indicator = |e: &CellSet| {
            let mut row = vec![S::zero(); vars];
            for (x, y) in e.iter() {
                row[x * m + y] = S::one();
            }
            row
        };
        match &self.mode {
            ProgramMode::Feasibility(caps) => {
                for (e, cap) in caps {
                    lp.push(indicator(e), Relation::Le, cap.clone());
                }
            }
            ProgramMode::MinimizeCommonCap(sets) => {
                for e in sets {
                    let mut row = indicator(e);
                    row[cells] = -S::one();
                    lp.push(row, Relation::Le, S::zero());
                }
            }
            ProgramMode::MaximizeMassOnSet(_) => {}
        }
        match lp.solve() {
            LpOutcome::Optimal { value, x } => {
                let plan = Matrix::from_fn(n, m, |i, j| x[i * m + j].clone());
                let value = match &self.mode {
                    ProgramMode::MinimizeCommonCap(_) => value,
                    ProgramMode::MaximizeMassOnSet(_) => -value,
                    ProgramMode::Feasibility(_) => S::zero(),
                };
                Some(ProgramSolution { value, plan })
            }
            LpOutcome::Infeasible => None,
            LpOutcome::Unbounded => unreachable!("objective is bounded on a compact polytope"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::from_ratio(n, d)
    }

    #[test]
    fn maximize_mass_on_diagonal() {
        let diag = CellSet::from_cells(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let p = SetMassProgram::new(
            vec![q(1, 2), q(1, 2)],
            vec![q(1, 4), q(3, 4)],
            ProgramMode::MaximizeMassOnSet(diag),
        )
        .unwrap();
        assert_eq!(p.solve().unwrap().value, q(3, 4));
    }

    #[test]
    fn min_common_cap() {
        // off-diagonal and diagonal: best is to split evenly
        let diag = CellSet::from_cells(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let p = SetMassProgram::new(
            vec![q(1, 2), q(1, 2)],
            vec![q(1, 2), q(1, 2)],
            ProgramMode::MinimizeCommonCap(vec![diag, diag.complement()]),
        )
        .unwrap();
        assert_eq!(p.solve().unwrap().value, q(1, 2));
    }

    #[test]
    fn feasibility() {
        let diag = CellSet::from_cells(2, 2, &[(0, 0), (1, 1)]).unwrap();
        let mk = |cap| {
            SetMassProgram::new(
                vec![q(1, 2), q(1, 2)],
                vec![q(1, 2), q(1, 2)],
                ProgramMode::Feasibility(vec![(diag.complement(), cap)]),
            )
            .unwrap()
        };
        assert!(mk(q(0, 1)).solve().is_some());
        let off = CellSet::from_cells(2, 2, &[(0, 1)]).unwrap();
        let p = SetMassProgram::new(
            vec![q(1, 1), q(0, 1)],
            vec![q(0, 1), q(1, 1)],
            ProgramMode::Feasibility(vec![(off, q(1, 2))]),
        )
        .unwrap();
        assert!(p.solve().is_none());
    }

    #[test]
    fn unequal_marginals_rejected() {
        assert_eq!(
            SetMassProgram::<Rational>::new(
                vec![q(1, 1)],
                vec![q(1, 2)],
                ProgramMode::MinimizeCommonCap(vec![])
            ),
            Err(Error::InfeasibleMarginals)
        );
    }
}
