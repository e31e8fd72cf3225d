//! Block-diagonal semidefinite programs in equality standard form.
//!
//! ```text
//!   minimize    sum_k <C_k, X_k> + c^T u
//!   subject to  sum_k <A_ik, X_k> + f_i^T u = b_i,   i = 1..m
//!               X_k >= 0 (PSD),  u free
//! ```
//!
//! Rows reference block entries by their upper-triangle position `(i, j)`,
//! `i <= j`, and a coefficient `c` on such an entry means `c * X[i][j]`
//! (the symmetric partner is not counted separately).

mod facial;
mod ipm;
pub mod sdpa;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ipm::InteriorPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockEntry {
    pub block: usize,
    pub i: usize,
    pub j: usize,
}

impl BlockEntry {
    /// Normalizes to the upper triangle.
    pub fn new(block: usize, i: usize, j: usize) -> Self {
        if i <= j {
            BlockEntry { block, i, j }
        } else {
            BlockEntry { block, i: j, j: i }
        }
    }
}

/// Linear functional over block entries and free scalars.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearRow {
    pub blocks: Vec<(BlockEntry, f64)>,
    pub free: Vec<(usize, f64)>,
}

impl LinearRow {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty() && self.free.is_empty()
    }

    pub fn eval(&self, blocks: &[DMatrix<f64>], free: &DVector<f64>) -> f64 {
        let mut v = 0.0;
        for (e, c) in &self.blocks {
            v += c * blocks[e.block][(e.i, e.j)];
        }
        for &(k, c) in &self.free {
            v += c * free[k];
        }
        v
    }

    pub fn inf_norm(&self) -> f64 {
        self.blocks.iter().map(|(_, c)| c.abs()).chain(self.free.iter().map(|(_, c)| c.abs())).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EqualityRow {
    pub lhs: LinearRow,
    pub rhs: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SdpProblem {
    pub block_sizes: Vec<usize>,
    pub n_free: usize,
    pub equalities: Vec<EqualityRow>,
    /// All-zero means a pure feasibility problem.
    pub objective: LinearRow,
}

impl SdpProblem {
    pub fn validate(&self) -> Result<()> {
        let check = |row: &LinearRow, what: &str| -> Result<()> {
            for (e, _) in &row.blocks {
                let n = *self
                    .block_sizes
                    .get(e.block)
                    .ok_or_else(|| Error::Config(format!("{what}: block {} out of range", e.block)))?;
                if e.i > e.j || e.j >= n {
                    return Err(Error::Config(format!("{what}: bad entry {:?} for block side {n}", e)));
                }
            }
            for &(k, _) in &row.free {
                if k >= self.n_free {
                    return Err(Error::Config(format!("{what}: free index {k} out of range")));
                }
            }
            Ok(())
        };
        for (i, r) in self.equalities.iter().enumerate() {
            check(&r.lhs, &format!("equality {i}"))?;
        }
        check(&self.objective, "objective")
    }

    pub fn total_psd_side(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    /// Dense symmetric coefficient matrices of a row, one per block.
    pub fn row_matrices(&self, row: &LinearRow) -> Vec<DMatrix<f64>> {
        let mut mats: Vec<DMatrix<f64>> = self.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (e, c) in &row.blocks {
            let m = &mut mats[e.block];
            if e.i == e.j {
                m[(e.i, e.i)] += c;
            } else {
                m[(e.i, e.j)] += 0.5 * c;
                m[(e.j, e.i)] += 0.5 * c;
            }
        }
        mats
    }

    /// `sum_i y_i A_i` per block and `F^T y`.
    pub fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut mats: Vec<DMatrix<f64>> = self.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut free = DVector::zeros(self.n_free);
        for (row, &yi) in self.equalities.iter().zip(y.iter()) {
            for (e, c) in &row.lhs.blocks {
                let m = &mut mats[e.block];
                if e.i == e.j {
                    m[(e.i, e.i)] += c * yi;
                } else {
                    m[(e.i, e.j)] += 0.5 * c * yi;
                    m[(e.j, e.i)] += 0.5 * c * yi;
                }
            }
            for &(k, c) in &row.lhs.free {
                free[k] += c * yi;
            }
        }
        (mats, free)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Indeterminate,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub blocks: Vec<DMatrix<f64>>,
    pub free: DVector<f64>,
    /// Equality multipliers.
    pub dual: DVector<f64>,
    pub residuals: Residuals,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    /// Farkas ray `y` with `b^T y = 1`, `A^* y <= 0`, `F^T y = 0` when infeasible.
    pub certificate: Option<DVector<f64>>,
    pub message: String,
}

impl SdpSolution {
    pub fn is_feasible(&self) -> bool {
        self.status == SdpStatus::Feasible
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct SolverOptions {
    pub gap_tol: f64,
    pub feas_tol: f64,
    /// Absolute bound on the unscaled equality residual for a `Feasible` verdict.
    pub abs_feas_tol: f64,
    pub infeas_tol: f64,
    pub max_iterations: usize,
    /// Form the Schur complement with rayon. Entries are computed with the
    /// same arithmetic either way.
    pub parallel: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            abs_feas_tol: 1e-6,
            infeas_tol: 1e-8,
            max_iterations: 200,
            parallel: false,
        }
    }
}

/// Backend contract. Implementations must never report `Feasible` with a
/// violated equality or an indefinite block, and must only report
/// `Infeasible` together with a certificate.
pub trait SdpBackend: Send + Sync {
    fn solve(&self, prob: &SdpProblem, opts: &SolverOptions) -> SdpSolution;
    fn name(&self) -> &'static str;
}

pub fn solve(prob: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    InteriorPoint.solve(prob, opts)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub max_equality_residual: f64,
    pub min_block_eigenvalues: Vec<f64>,
    pub dual_cone_violation: f64,
    pub dual_free_residual: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
}

impl ResidualReport {
    pub fn primal_ok(&self, eq_tol: f64, eig_tol: f64) -> bool {
        self.max_equality_residual <= eq_tol && self.min_block_eigenvalues.iter().all(|&l| l >= -eig_tol)
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Recomputes every residual from the problem data and the reported point.
pub fn check_solution(prob: &SdpProblem, sol: &SdpSolution) -> ResidualReport {
    let max_equality_residual =
        prob.equalities.iter().map(|r| (r.lhs.eval(&sol.blocks, &sol.free) - r.rhs).abs()).fold(0.0, f64::max);
    let min_block_eigenvalues = sol.blocks.iter().map(min_eigenvalue).collect();

    let primal_objective = prob.objective.eval(&sol.blocks, &sol.free);
    let (mut dual_slack, fty) = prob.adjoint(&sol.dual);
    let cmats = prob.row_matrices(&prob.objective);
    let mut dual_cone_violation: f64 = 0.0;
    for (s, c) in dual_slack.iter_mut().zip(&cmats) {
        *s = c - &*s;
        dual_cone_violation = dual_cone_violation.max(-min_eigenvalue(s));
    }
    let mut cvec = DVector::zeros(prob.n_free);
    for &(k, c) in &prob.objective.free {
        cvec[k] += c;
    }
    let dual_free_residual = if prob.n_free == 0 { 0.0 } else { (fty - cvec).amax() };
    let dual_objective: f64 = prob.equalities.iter().zip(sol.dual.iter()).map(|(r, y)| r.rhs * y).sum();
    ResidualReport {
        max_equality_residual,
        min_block_eigenvalues,
        dual_cone_violation: dual_cone_violation.max(0.0),
        dual_free_residual,
        primal_objective,
        dual_objective,
        gap: (primal_objective - dual_objective).abs(),
    }
}

/// Checks a Farkas ray: `b^T y > 0`, `sum y_i A_i <= 0`, `F^T y = 0`, all
/// relative to `b^T y`.
pub fn verify_infeasibility_certificate(prob: &SdpProblem, y: &DVector<f64>, tol: f64) -> bool {
    if y.len() != prob.equalities.len() {
        return false;
    }
    let by: f64 = prob.equalities.iter().zip(y.iter()).map(|(r, yi)| r.rhs * yi).sum();
    if !(by > 0.0) {
        return false;
    }
    let (mats, fty) = prob.adjoint(y);
    let cone_ok = mats.iter().all(|m| max_eigenvalue(m) <= tol * by);
    let free_ok = fty.iter().all(|v| v.abs() <= tol * by);
    cone_ok && free_ok
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lambda_max_problem() -> SdpProblem {
        // min t  s.t.  Z = t I - diag(2, 1) >= 0
        SdpProblem {
            block_sizes: vec![2],
            n_free: 1,
            equalities: vec![
                EqualityRow {
                    lhs: LinearRow { blocks: vec![(BlockEntry::new(0, 0, 0), 1.0)], free: vec![(0, -1.0)] },
                    rhs: -2.0,
                },
                EqualityRow {
                    lhs: LinearRow { blocks: vec![(BlockEntry::new(0, 1, 1), 1.0)], free: vec![(0, -1.0)] },
                    rhs: -1.0,
                },
                EqualityRow {
                    lhs: LinearRow { blocks: vec![(BlockEntry::new(0, 0, 1), 1.0)], free: vec![] },
                    rhs: 0.0,
                },
            ],
            objective: LinearRow { blocks: vec![], free: vec![(0, 1.0)] },
        }
    }

    #[test]
    fn minimize_psd_scalar() {
        let prob = SdpProblem {
            block_sizes: vec![1],
            n_free: 0,
            equalities: vec![],
            objective: LinearRow { blocks: vec![(BlockEntry::new(0, 0, 0), 1.0)], free: vec![] },
        };
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SdpStatus::Feasible, "{}", sol.message);
        assert!(sol.blocks[0][(0, 0)].abs() < 1e-7);
    }

    #[test]
    fn lambda_max_is_two() {
        let prob = lambda_max_problem();
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SdpStatus::Feasible, "{}", sol.message);
        assert!((sol.free[0] - 2.0).abs() < 1e-7, "t = {}", sol.free[0]);
        let rep = check_solution(&prob, &sol);
        assert!(rep.gap <= 1e-7, "{rep:?}");
        assert!(rep.max_equality_residual <= 1e-7);
        assert!(rep.dual_cone_violation <= 1e-8);
    }

    #[test]
    fn scalar_lyapunov_feasibility() {
        // 2 a p + 1 + s = 0 with a = -1, s >= 0  =>  p >= 1/2
        let prob = SdpProblem {
            block_sizes: vec![1, 1],
            n_free: 0,
            equalities: vec![EqualityRow {
                lhs: LinearRow {
                    blocks: vec![(BlockEntry::new(0, 0, 0), -2.0), (BlockEntry::new(1, 0, 0), 1.0)],
                    free: vec![],
                },
                rhs: -1.0,
            }],
            objective: LinearRow::default(),
        };
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SdpStatus::Feasible, "{}", sol.message);
        assert!(sol.blocks[0][(0, 0)] >= 0.5 - 1e-8);
    }

    #[test]
    fn detects_infeasibility_with_certificate() {
        // X >= 0 (1x1) with X = -1
        let prob = SdpProblem {
            block_sizes: vec![1],
            n_free: 0,
            equalities: vec![EqualityRow {
                lhs: LinearRow { blocks: vec![(BlockEntry::new(0, 0, 0), 1.0)], free: vec![] },
                rhs: -1.0,
            }],
            objective: LinearRow::default(),
        };
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SdpStatus::Infeasible, "{}", sol.message);
        let cert = sol.certificate.as_ref().unwrap();
        assert!(verify_infeasibility_certificate(&prob, cert, 1e-7));
    }

    #[test]
    fn constant_contradiction_is_infeasible() {
        let prob = SdpProblem {
            block_sizes: vec![1],
            n_free: 0,
            equalities: vec![EqualityRow { lhs: LinearRow::default(), rhs: 3.0 }],
            objective: LinearRow::default(),
        };
        let sol = solve(&prob, &SolverOptions::default());
        assert_eq!(sol.status, SdpStatus::Infeasible);
    }

    #[test]
    fn check_solution_flags_perturbation() {
        let prob = lambda_max_problem();
        let blocks = vec![DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0])];
        let free = DVector::from_element(1, 2.0);
        let mut sol = SdpSolution {
            status: SdpStatus::Feasible,
            blocks,
            free,
            dual: DVector::from_vec(vec![-1.0, 0.0, 0.0]),
            residuals: Residuals::default(),
            primal_objective: 2.0,
            dual_objective: 2.0,
            iterations: 0,
            certificate: None,
            message: String::new(),
        };
        let rep = check_solution(&prob, &sol);
        assert!(rep.primal_ok(1e-12, 1e-12));
        assert!(rep.gap < 1e-12);
        sol.blocks[0][(1, 1)] += 1e-3;
        let rep = check_solution(&prob, &sol);
        assert!(!rep.primal_ok(1e-7, 1e-8));
        assert!(rep.max_equality_residual > 9e-4);
    }

    #[test]
    fn deterministic_solves() {
        let prob = lambda_max_problem();
        let a = solve(&prob, &SolverOptions::default());
        let b = solve(&prob, &SolverOptions::default());
        assert_eq!(a.status, b.status);
        assert_eq!(a.free, b.free);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn validate_rejects_bad_indices() {
        let mut prob = lambda_max_problem();
        prob.equalities[0].lhs.blocks.push((BlockEntry { block: 0, i: 0, j: 5 }, 1.0));
        assert!(prob.validate().is_err());
    }
}
