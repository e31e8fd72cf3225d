//! Structured balanced truncation baseline for discrete-time systems whose
//! `A` is affine in the parameters.
//!
//! The parameter box is normalized to `delta in [-1, 1]^p`, each coefficient
//! matrix is rank-factored as `U_l R_l`, and the system is written as the
//! upper LFT of
//!
//! ```text
//!   Abar = [[A0, U1, .., Up], [R1, 0, .., 0], .., [Rp, 0, .., 0]]
//!   Bbar = [B; 0; ..],  Cbar = [C, 0, ..]
//! ```
//!
//! with `Delta = diag(z^-1 I, delta_1 I, .., delta_p I)`. Block-diagonal
//! Gramians come from alternating linearized trace minimization.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymat::{Monomial, PolyMatrix};
use crate::psys::{ParamStateSpace, TimeDomain};
use crate::sdp::{self, BlockEntry, EqualityRow, LinearRow, SdpProblem, SolverOptions};

pub const RANK_TOL: f64 = 1e-10;
pub const SINGULAR_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct LftRealization {
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    pub cbar: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// State block first, then one block per parameter channel.
    pub block_sizes: Vec<usize>,
    /// Box center and half-width per parameter: `alpha = center + half * delta`.
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl LftRealization {
    pub fn n(&self) -> usize {
        self.block_sizes[0]
    }

    pub fn side(&self) -> usize {
        self.abar.nrows()
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.block_sizes.len());
        let mut acc = 0;
        for &s in &self.block_sizes {
            off.push(acc);
            acc += s;
        }
        off
    }

    /// `U_l` (rows 0..n of the channel's columns) and `R_l` for channel `l` (0-based).
    pub fn channel(&self, l: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let (n, off, r) = (self.n(), self.offsets()[l + 1], self.block_sizes[l + 1]);
        (self.abar.view((0, off), (n, r)).into_owned(), self.abar.view((off, 0), (r, n)).into_owned())
    }
}

fn constant_only(m: &PolyMatrix, name: &str) -> Result<DMatrix<f64>> {
    if m.terms().keys().any(|k| !k.is_one()) {
        return Err(Error::NotAffineLft(format!("{name} depends on the parameters")));
    }
    Ok(m.coeff(&Monomial::one(m.nvars())))
}

pub fn lft_realize(g: &ParamStateSpace) -> Result<LftRealization> {
    if g.time_domain != TimeDomain::Discrete {
        return Err(Error::TimeDomain("baseline requires discrete time".into()));
    }
    if g.a.degree() > 1 {
        return Err(Error::NotAffineLft(format!("A has degree {}", g.a.degree())));
    }
    let b = constant_only(&g.b, "B")?;
    let c = constant_only(&g.c, "C")?;
    let d = constant_only(&g.d, "D")?;
    let (n, p) = (g.n(), g.nvars());
    let bx = g.param_set.sampling_box();
    let center: Vec<f64> = bx.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect();
    let half_width: Vec<f64> = bx.iter().map(|&(lo, hi)| 0.5 * (hi - lo)).collect();

    let mut a0 = g.a.coeff(&Monomial::one(p));
    let mut factors = Vec::with_capacity(p);
    for l in 0..p {
        let m = g.a.coeff(&Monomial::var(p, l));
        a0 += &m * center[l];
        factors.push(rank_factor(&(m * half_width[l])));
    }

    let mut block_sizes = vec![n];
    block_sizes.extend(factors.iter().map(|(u, _)| u.ncols()));
    let side: usize = block_sizes.iter().sum();
    let mut abar = DMatrix::zeros(side, side);
    abar.view_mut((0, 0), (n, n)).copy_from(&a0);
    let mut off = n;
    for (u, r) in &factors {
        let k = u.ncols();
        abar.view_mut((0, off), (n, k)).copy_from(u);
        abar.view_mut((off, 0), (k, n)).copy_from(r);
        off += k;
    }
    let mut bbar = DMatrix::zeros(side, b.ncols());
    bbar.view_mut((0, 0), (n, b.ncols())).copy_from(&b);
    let mut cbar = DMatrix::zeros(c.nrows(), side);
    cbar.view_mut((0, 0), (c.nrows(), n)).copy_from(&c);
    Ok(LftRealization { abar, bbar, cbar, d, block_sizes, center, half_width })
}

/// `M = U R` with orthonormal `U`; each column of `U` has a positive
/// largest-magnitude entry.
fn rank_factor(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let mut idx: Vec<usize> = (0..s.len()).filter(|&i| s[i] > RANK_TOL * smax.max(1.0)).collect();
    idx.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
    let mut uf = DMatrix::zeros(n, idx.len());
    let mut rf = DMatrix::zeros(idx.len(), m.ncols());
    for (k, &i) in idx.iter().enumerate() {
        let col = u.column(i);
        let big = col.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        let sign = if big < 0.0 { -1.0 } else { 1.0 };
        uf.column_mut(k).copy_from(&(col * sign));
        rf.row_mut(k).copy_from(&(vt.row(i) * (s[i] * sign)));
    }
    (uf, rf)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct GramianOptions {
    /// Stopping test `||X - X_old||_F + ||Y - Y_old||_F <= tol`.
    pub tol: f64,
    pub max_iterations: usize,
    pub solver: SolverOptions,
}

impl Default for GramianOptions {
    fn default() -> Self {
        GramianOptions { tol: 1e-6, max_iterations: 100, solver: SolverOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct StructuredGramians {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// `trace(X Y)` after the initial solve and after every alternation.
    pub objective_log: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl StructuredGramians {
    pub fn trace_xy(&self) -> f64 {
        (&self.x * &self.y).trace()
    }
}

/// Largest eigenvalues of `Abar^T X Abar - X + Cbar^T Cbar` and
/// `Abar Y Abar^T - Y + Bbar Bbar^T`; both must be `<= 0`.
pub fn lyapunov_residuals(lft: &LftRealization, x: &DMatrix<f64>, y: &DMatrix<f64>) -> (f64, f64) {
    let a = &lft.abar;
    let rx = a.transpose() * x * a - x + lft.cbar.transpose() * &lft.cbar;
    let ry = a * y * a.transpose() - y + &lft.bbar * lft.bbar.transpose();
    (sdp::max_eigenvalue(&rx), sdp::max_eigenvalue(&ry))
}

/// SDP layout: one PSD block per Gramian block of X, then of Y, then the two
/// Lyapunov slacks.
struct Layout {
    blocks: Vec<usize>,
    /// Global index -> (block position within one Gramian, local index).
    local: Vec<(usize, usize)>,
    sizes: Vec<usize>,
}

impl Layout {
    fn new(lft: &LftRealization) -> Self {
        let blocks: Vec<usize> = (0..lft.block_sizes.len()).filter(|&k| lft.block_sizes[k] > 0).collect();
        let mut local = Vec::new();
        for (pos, &k) in blocks.iter().enumerate() {
            local.extend((0..lft.block_sizes[k]).map(|i| (pos, i)));
        }
        let sizes = blocks.iter().map(|&k| lft.block_sizes[k]).collect();
        Layout { blocks, local, sizes }
    }

    fn nb(&self) -> usize {
        self.blocks.len()
    }

    /// SDP entry of Gramian `which` (0 = X, 1 = Y) at global `(i, j)`, if structurally nonzero.
    fn entry(&self, which: usize, i: usize, j: usize) -> Option<BlockEntry> {
        let ((bi, li), (bj, lj)) = (self.local[i], self.local[j]);
        (bi == bj).then(|| BlockEntry::new(which * self.nb() + bi, li, lj))
    }

    fn problem(&self, lft: &LftRealization) -> SdpProblem {
        let side = lft.side();
        let mut sizes = self.sizes.clone();
        sizes.extend(self.sizes.iter());
        sizes.push(side);
        sizes.push(side);
        let at = lft.abar.transpose();
        let cc = lft.cbar.transpose() * &lft.cbar;
        let bb = &lft.bbar * lft.bbar.transpose();
        let mut equalities = Vec::new();
        // X - A^T X A - Sx = C^T C  and  Y - A Y A^T - Sy = B B^T.
        for (which, m, rhs) in [(0usize, &lft.abar, &cc), (1, &at, &bb)] {
            let slack = 2 * self.nb() + which;
            for i in 0..side {
                for j in i..side {
                    let mut acc: BTreeMap<BlockEntry, f64> = BTreeMap::new();
                    if let Some(e) = self.entry(which, i, j) {
                        *acc.entry(e).or_default() += 1.0;
                    }
                    // (M^T W M)_ij = sum_{k,l} M_ki W_kl M_lj
                    for k in 0..side {
                        for l in k..side {
                            let Some(e) = self.entry(which, k, l) else { continue };
                            let c = if k == l {
                                m[(k, i)] * m[(k, j)]
                            } else {
                                m[(k, i)] * m[(l, j)] + m[(l, i)] * m[(k, j)]
                            };
                            if c != 0.0 {
                                *acc.entry(e).or_default() -= c;
                            }
                        }
                    }
                    *acc.entry(BlockEntry::new(slack, i, j)).or_default() -= 1.0;
                    let blocks = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
                    equalities.push(EqualityRow { lhs: LinearRow { blocks, free: vec![] }, rhs: rhs[(i, j)] });
                }
            }
        }
        SdpProblem { block_sizes: sizes, n_free: 0, equalities, objective: LinearRow::default() }
    }

    /// `<wx, X> + <wy, Y>` as an objective row.
    fn objective(&self, wx: &DMatrix<f64>, wy: &DMatrix<f64>) -> LinearRow {
        let mut blocks = Vec::new();
        for (which, w) in [(0usize, wx), (1, wy)] {
            let n = w.nrows();
            for i in 0..n {
                for j in i..n {
                    if let Some(e) = self.entry(which, i, j) {
                        let c = if i == j { w[(i, i)] } else { w[(i, j)] + w[(j, i)] };
                        if c != 0.0 {
                            blocks.push((e, c));
                        }
                    }
                }
            }
        }
        LinearRow { blocks, free: vec![] }
    }

    fn assemble(&self, lft: &LftRealization, blocks: &[DMatrix<f64>], which: usize) -> DMatrix<f64> {
        let side = lft.side();
        let mut w = DMatrix::zeros(side, side);
        let offsets = lft.offsets();
        for (pos, &k) in self.blocks.iter().enumerate() {
            let s = lft.block_sizes[k];
            let b = &blocks[which * self.nb() + pos];
            w.view_mut((offsets[k], offsets[k]), (s, s)).copy_from(&((b + b.transpose()) * 0.5));
        }
        w
    }
}

pub fn solve_gramians(lft: &LftRealization, opts: &GramianOptions) -> Result<StructuredGramians> {
    let layout = Layout::new(lft);
    let mut prob = layout.problem(lft);
    let first = sdp::solve(&prob, &opts.solver);
    if !first.is_feasible() {
        return Err(Error::NoStructuredGramians(first.message));
    }
    let (mut x, mut y) = (layout.assemble(lft, &first.blocks, 0), layout.assemble(lft, &first.blocks, 1));
    let mut objective_log = vec![(&x * &y).trace()];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        prob.objective = layout.objective(&y, &x);
        let sol = sdp::solve(&prob, &opts.solver);
        if !sol.is_feasible() {
            log::debug!("gramian alternation {iterations}: {}", sol.message);
            break;
        }
        iterations += 1;
        let (xn, yn) = (layout.assemble(lft, &sol.blocks, 0), layout.assemble(lft, &sol.blocks, 1));
        let change = (&xn - &x).norm() + (&yn - &y).norm();
        x = xn;
        y = yn;
        objective_log.push((&x * &y).trace());
        log::debug!(
            "gramian alternation {iterations}: trace(XY) {:.6e} change {change:.2e}",
            objective_log[iterations]
        );
        if change <= opts.tol {
            converged = true;
            break;
        }
    }
    Ok(StructuredGramians { x, y, objective_log, iterations, converged })
}

/// Contragredient `T` with `T^T X T = T^-1 Y T^-T = diag(sigma)`, `sigma` descending.
fn balance_block(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let l = y.clone().cholesky()?.l();
    let m = l.transpose() * x * &l;
    let e = SymmetricEigen::new((&m + m.transpose()) * 0.5);
    let mut idx: Vec<usize> = (0..e.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| e.eigenvalues[b].total_cmp(&e.eigenvalues[a]));
    let n = x.nrows();
    let mut u = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    for (k, &i) in idx.iter().enumerate() {
        u.column_mut(k).copy_from(&e.eigenvectors.column(i));
        sigma.push(e.eigenvalues[i].max(0.0).sqrt());
    }
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, sigma.iter().map(|s| 1.0 / s.sqrt())));
    let t = &l * &u * &scale;
    let tinv = t.clone().try_inverse()?;
    Some((t, tinv, sigma))
}

#[derive(Clone, Debug)]
pub struct Truncation {
    pub reduced: ParamStateSpace,
    pub bound: f64,
    /// Balanced singular values per block.
    pub sigma: Vec<Vec<f64>>,
    /// Balanced realization before truncation.
    pub abar: DMatrix<f64>,
    pub bbar: DMatrix<f64>,
    pub cbar: DMatrix<f64>,
}

/// Balances every block and keeps the leading `keep[k]` coordinates of block `k`.
/// The reduced model reads the parameters up to the last retained channel.
/// The bound is twice the sum of the dropped balanced singular values.
pub fn balance_and_truncate(
    g: &ParamStateSpace,
    lft: &LftRealization,
    grams: &StructuredGramians,
    keep: &[usize],
) -> Result<Truncation> {
    let nb = lft.block_sizes.len();
    if keep.len() != nb || keep.iter().zip(&lft.block_sizes).any(|(k, s)| k > s) {
        return Err(Error::Config(format!("keep {keep:?} does not fit block sizes {:?}", lft.block_sizes)));
    }
    let offsets = lft.offsets();
    let side = lft.side();
    let mut t = DMatrix::zeros(side, side);
    let mut tinv = DMatrix::zeros(side, side);
    let mut sigma = Vec::with_capacity(nb);
    for k in 0..nb {
        let (o, s) = (offsets[k], lft.block_sizes[k]);
        if s == 0 {
            sigma.push(vec![]);
            continue;
        }
        let xk = grams.x.view((o, o), (s, s)).into_owned();
        let yk = grams.y.view((o, o), (s, s)).into_owned();
        let lambda_min = sdp::min_eigenvalue(&xk).min(sdp::min_eigenvalue(&yk));
        if lambda_min < SINGULAR_TOL {
            return Err(Error::SingularGramianBlock { block: k, lambda_min });
        }
        let (tk, tki, sk) = balance_block(&xk, &yk).ok_or(Error::SingularGramianBlock { block: k, lambda_min })?;
        t.view_mut((o, o), (s, s)).copy_from(&tk);
        tinv.view_mut((o, o), (s, s)).copy_from(&tki);
        sigma.push(sk);
    }
    let abal = &tinv * &lft.abar * &t;
    let bbal = &tinv * &lft.bbar;
    let cbal = &lft.cbar * &t;
    let bound = 2.0 * sigma.iter().zip(keep).map(|(s, &k)| s[k..].iter().sum::<f64>()).sum::<f64>();

    let n0 = keep[0];
    let pr = (1..nb).rev().find(|&k| keep[k] > 0).unwrap_or(0);
    let set = g.param_set.project(pr);
    let ar0 = abal.view((0, 0), (n0, n0)).into_owned();
    let mut constant = ar0;
    let mut terms = Vec::new();
    for l in 0..pr {
        let (o, r) = (offsets[l + 1], keep[l + 1]);
        if r == 0 || n0 == 0 {
            continue;
        }
        // delta = (alpha - c) / h
        let m = abal.view((0, o), (n0, r)) * abal.view((o, 0), (r, n0));
        let h = lft.half_width[l];
        constant -= &m * (lft.center[l] / h);
        terms.push((Monomial::var(pr, l), m / h));
    }
    terms.push((Monomial::one(pr), constant));
    let a = PolyMatrix::from_terms(n0, n0, pr, terms)?;
    let b = PolyMatrix::constant(bbal.view((0, 0), (n0, lft.bbar.ncols())).into_owned(), pr);
    let c = PolyMatrix::constant(cbal.view((0, 0), (lft.cbar.nrows(), n0)).into_owned(), pr);
    let d = PolyMatrix::constant(lft.d.clone(), pr);
    let reduced = ParamStateSpace::new(TimeDomain::Discrete, a.prune_relative(0.0), b, c, d, set)?;
    Ok(Truncation { reduced, bound, sigma, abar: abal, bbar: bbal, cbar: cbal })
}

/// Flips the sign of the reduced state basis so the largest-magnitude entry
/// of `B_r` is positive.
pub fn normalize_sign(sys: &ParamStateSpace) -> ParamStateSpace {
    let b = sys.b.coeff(&Monomial::one(sys.nvars()));
    let big = b.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if big >= 0.0 {
        return sys.clone();
    }
    let mut out = sys.clone();
    out.b = sys.b.scale(-1.0);
    out.c = sys.c.scale(-1.0);
    out
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub lft: LftRealization,
    pub gramians: StructuredGramians,
    pub truncation: Truncation,
}

/// Full pipeline: retain `n_prime` states and the first `p_prime` parameter channels.
pub fn baseline(g: &ParamStateSpace, n_prime: usize, p_prime: usize, opts: &GramianOptions) -> Result<BaselineResult> {
    if p_prime > g.nvars() || n_prime > g.n() {
        return Err(Error::Config(format!("n' = {n_prime}, p' = {p_prime} exceed n = {}, p = {}", g.n(), g.nvars())));
    }
    let lft = lft_realize(g)?;
    let gramians = solve_gramians(&lft, opts)?;
    let mut keep = lft.block_sizes.clone();
    keep[0] = n_prime;
    for k in keep.iter_mut().skip(1 + p_prime) {
        *k = 0;
    }
    let mut truncation = balance_and_truncate(g, &lft, &gramians, &keep)?;
    if truncation.reduced.nvars() < p_prime {
        truncation.reduced = truncation.reduced.with_param_set(g.param_set.project(p_prime))?;
    }
    Ok(BaselineResult { lft, gramians, truncation })
}

#[cfg(test)]
mod tests;
