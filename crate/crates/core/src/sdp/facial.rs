//! Presolve that removes PSD indices forced to zero.
//!
//! A row `sum_i c_i X[i][i] = 0` with all `c_i` of one sign forces every
//! listed diagonal entry, and with it the whole row and column, to vanish.
//! Such rows come from top-degree monomials an SOS identity cannot match;
//! without them the problem has no interior point and interior-point
//! iterates stall near the face. Rows are rescanned until nothing changes.

use nalgebra::{DMatrix, DVector};

use super::{verify_infeasibility_certificate, EqualityRow, LinearRow, SdpProblem, SdpSolution, SdpStatus};

/// `|rhs|` at or below this fraction of the row norm counts as zero.
const ZERO_RHS: f64 = 1e-12;

pub(crate) struct Reduction {
    /// Surviving original indices per original block.
    kept: Vec<Vec<usize>>,
    /// Original block index of every reduced block.
    block_of: Vec<usize>,
    /// Rows that drove the reduction, with the sign of their coefficients.
    forcing: Vec<(usize, f64)>,
    pub problem: SdpProblem,
}

/// `None` when no index can be removed.
pub(crate) fn presolve(prob: &SdpProblem) -> Option<Reduction> {
    let mut zero: Vec<Vec<bool>> = prob.block_sizes.iter().map(|&n| vec![false; n]).collect();
    let mut forcing = Vec::new();
    let mut used = vec![false; prob.equalities.len()];
    loop {
        let mut changed = false;
        for (r, row) in prob.equalities.iter().enumerate() {
            if used[r] {
                continue;
            }
            if let Some((diag, sign)) = forcing_row(row, &zero) {
                for (k, i) in diag {
                    zero[k][i] = true;
                }
                used[r] = true;
                forcing.push((r, sign));
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    if forcing.is_empty() {
        return None;
    }

    let kept: Vec<Vec<usize>> = zero.iter().map(|z| (0..z.len()).filter(|&i| !z[i]).collect()).collect();
    let mut block_of = Vec::new();
    let mut new_block = vec![usize::MAX; kept.len()];
    for (k, idx) in kept.iter().enumerate() {
        if !idx.is_empty() {
            new_block[k] = block_of.len();
            block_of.push(k);
        }
    }
    let mut new_index: Vec<Vec<usize>> = zero.iter().map(|z| vec![usize::MAX; z.len()]).collect();
    for (k, idx) in kept.iter().enumerate() {
        for (t, &i) in idx.iter().enumerate() {
            new_index[k][i] = t;
        }
    }
    let map_row = |row: &LinearRow| LinearRow {
        blocks: row
            .blocks
            .iter()
            .filter(|(e, _)| !zero[e.block][e.i] && !zero[e.block][e.j])
            .map(|(e, c)| {
                let mut e2 = *e;
                e2.block = new_block[e.block];
                e2.i = new_index[e.block][e.i];
                e2.j = new_index[e.block][e.j];
                (e2, *c)
            })
            .collect(),
        free: row.free.clone(),
    };
    let problem = SdpProblem {
        block_sizes: block_of.iter().map(|&k| kept[k].len()).collect(),
        n_free: prob.n_free,
        equalities: prob.equalities.iter().map(|r| EqualityRow { lhs: map_row(&r.lhs), rhs: r.rhs }).collect(),
        objective: map_row(&prob.objective),
    };
    Some(Reduction { kept, block_of, forcing, problem })
}

/// Diagonal entries a row forces to zero, given the entries already removed.
fn forcing_row(row: &EqualityRow, zero: &[Vec<bool>]) -> Option<(Vec<(usize, usize)>, f64)> {
    if row.lhs.free.iter().any(|&(_, c)| c != 0.0) {
        return None;
    }
    let live: Vec<_> =
        row.lhs.blocks.iter().filter(|(e, c)| *c != 0.0 && !zero[e.block][e.i] && !zero[e.block][e.j]).collect();
    if live.is_empty() || live.iter().any(|(e, _)| e.i != e.j) {
        return None;
    }
    let sign = live[0].1.signum();
    if live.iter().any(|(_, c)| c.signum() != sign) {
        return None;
    }
    let norm = live.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max);
    if row.rhs.abs() > ZERO_RHS * norm {
        return None;
    }
    Some((live.iter().map(|(e, _)| (e.block, e.i)).collect(), sign))
}

impl Reduction {
    /// Maps a solution of the reduced problem back to the original one.
    pub fn lift(&self, prob: &SdpProblem, mut sol: SdpSolution) -> SdpSolution {
        let mut blocks: Vec<DMatrix<f64>> = prob.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        for (nb, &k) in self.block_of.iter().enumerate() {
            let Some(x) = sol.blocks.get(nb) else {
                continue;
            };
            let idx = &self.kept[k];
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    blocks[k][(i, j)] = x[(a, b)];
                }
            }
        }
        sol.blocks = blocks;
        if sol.status == SdpStatus::Infeasible {
            match sol.certificate.take().and_then(|y| self.repair_certificate(prob, y)) {
                Some(y) => sol.certificate = Some(y),
                None => {
                    sol.status = SdpStatus::Indeterminate;
                    sol.message = format!("{} on the reduced face; no certificate for the full problem", sol.message);
                }
            }
        }
        sol
    }

    /// Pushes the removed diagonal of `A^* y` negative with the forcing rows,
    /// which leaves `b^T y` unchanged.
    fn repair_certificate(&self, prob: &SdpProblem, y: DVector<f64>) -> Option<DVector<f64>> {
        if verify_infeasibility_certificate(prob, &y, 1e-6) {
            return Some(y);
        }
        for p in 0..13 {
            let t = 10f64.powi(p);
            let mut z = y.clone();
            for &(r, sign) in &self.forcing {
                z[r] -= t * sign;
            }
            if verify_infeasibility_certificate(prob, &z, 1e-6) {
                return Some(z);
            }
        }
        None
    }
}
