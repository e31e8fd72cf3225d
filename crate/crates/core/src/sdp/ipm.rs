//! Reference backend: homogeneous self-dual embedding, HKM search direction,
//! Mehrotra predictor-corrector. Dense factorizations throughout.
//!
//! Embedding (with `S = C tau - A^* y - r_d` etc.):
//!
//! ```text
//!   A X + F u - b tau        = 0
//!   A^* y + S - C tau        = 0
//!   F^T y - c tau            = 0
//!   <C,X> + c^T u - b^T y + kappa = 0
//!   X, S >= 0,  tau, kappa >= 0
//! ```
//!
//! `tau > 0` at the limit gives a primal-dual optimal pair; `kappa > 0` gives
//! an infeasibility ray.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen, LU};
use rayon::prelude::*;

use super::{
    facial, verify_infeasibility_certificate, Residuals, SdpBackend, SdpProblem, SdpSolution, SdpStatus, SolverOptions,
};

#[derive(Clone, Copy, Debug, Default)]
pub struct InteriorPoint;

impl SdpBackend for InteriorPoint {
    fn solve(&self, prob: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
        match facial::presolve(prob) {
            Some(red) => {
                let sol = solve_hsd(&red.problem, opts);
                red.lift(prob, sol)
            }
            None => solve_hsd(prob, opts),
        }
    }

    fn name(&self) -> &'static str {
        "hsd-hkm"
    }
}

/// Symmetric sparse matrix; `(i, j, v)` with `i <= j` sets both `(i,j)` and `(j,i)` to `v`.
#[derive(Clone, Debug, Default)]
struct SparseSym {
    entries: Vec<(usize, usize, f64)>,
}

impl SparseSym {
    fn inner(&self, z: &DMatrix<f64>) -> f64 {
        let mut s = 0.0;
        for &(i, j, v) in &self.entries {
            if i == j {
                s += v * z[(i, i)];
            } else {
                s += v * (z[(i, j)] + z[(j, i)]);
            }
        }
        s
    }

    fn add_to(&self, out: &mut DMatrix<f64>, scale: f64) {
        for &(i, j, v) in &self.entries {
            out[(i, j)] += v * scale;
            if i != j {
                out[(j, i)] += v * scale;
            }
        }
    }

    /// `X * A * S^{-1}` for dense `X`, `S^{-1}`.
    fn sandwich(&self, x: &DMatrix<f64>, sinv: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let mut xa = DMatrix::<f64>::zeros(n, n);
        let mut used = vec![false; n];
        for &(i, j, v) in &self.entries {
            // column j of X*A gets v * X[:, i]; column i gets v * X[:, j]
            for r in 0..n {
                xa[(r, j)] += v * x[(r, i)];
            }
            used[j] = true;
            if i != j {
                for r in 0..n {
                    xa[(r, i)] += v * x[(r, j)];
                }
                used[i] = true;
            }
        }
        let mut y = DMatrix::<f64>::zeros(n, n);
        for c in 0..n {
            if !used[c] {
                continue;
            }
            for col in 0..n {
                let s = sinv[(c, col)];
                if s == 0.0 {
                    continue;
                }
                for r in 0..n {
                    y[(r, col)] += xa[(r, c)] * s;
                }
            }
        }
        y
    }
}

struct BlockRows {
    n: usize,
    rows: Vec<(usize, SparseSym)>,
}

struct Data {
    m: usize,
    nf: usize,
    blocks: Vec<BlockRows>,
    f: DMatrix<f64>,
    b: DVector<f64>,
    c_blocks: Vec<DMatrix<f64>>,
    c_free: DVector<f64>,
    row_scale: DVector<f64>,
}

type Blocks = Vec<DMatrix<f64>>;

fn inner(a: &Blocks, b: &Blocks) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn fro_norm(a: &Blocks) -> f64 {
    a.iter().map(|x| x.norm_squared()).sum::<f64>().sqrt()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

impl Data {
    fn new(prob: &SdpProblem, keep: &[usize]) -> Data {
        let m = keep.len();
        let nf = prob.n_free;
        let mut blocks: Vec<BlockRows> = prob.block_sizes.iter().map(|&n| BlockRows { n, rows: Vec::new() }).collect();
        let mut f = DMatrix::zeros(m, nf);
        let mut b = DVector::zeros(m);
        let mut row_scale = DVector::from_element(m, 1.0);
        for (r, &orig) in keep.iter().enumerate() {
            let row = &prob.equalities[orig];
            let s = row.lhs.inf_norm();
            let s = if s > 0.0 { s } else { 1.0 };
            row_scale[r] = s;
            b[r] = row.rhs / s;
            let mut per_block: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); prob.block_sizes.len()];
            for (e, c) in &row.lhs.blocks {
                let v = if e.i == e.j { *c } else { 0.5 * c };
                per_block[e.block].push((e.i, e.j, v / s));
            }
            for (k, mut ent) in per_block.into_iter().enumerate() {
                if ent.is_empty() {
                    continue;
                }
                ent.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
                let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(ent.len());
                for (i, j, v) in ent {
                    match merged.last_mut() {
                        Some(last) if last.0 == i && last.1 == j => last.2 += v,
                        _ => merged.push((i, j, v)),
                    }
                }
                blocks[k].rows.push((r, SparseSym { entries: merged }));
            }
            for &(k, c) in &row.lhs.free {
                f[(r, k)] += c / s;
            }
        }
        let c_blocks = prob.row_matrices(&prob.objective);
        let mut c_free = DVector::zeros(nf);
        for &(k, c) in &prob.objective.free {
            c_free[k] += c;
        }
        Data { m, nf, blocks, f, b, c_blocks, c_free, row_scale }
    }

    fn apply_a(&self, z: &Blocks) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (blk, zk) in self.blocks.iter().zip(z) {
            for (r, a) in &blk.rows {
                out[*r] += a.inner(zk);
            }
        }
        out
    }

    fn apply_at(&self, y: &DVector<f64>) -> Blocks {
        self.blocks
            .iter()
            .map(|blk| {
                let mut out = DMatrix::zeros(blk.n, blk.n);
                for (r, a) in &blk.rows {
                    a.add_to(&mut out, y[*r]);
                }
                out
            })
            .collect()
    }

    fn schur(&self, x: &Blocks, sinv: &Blocks, parallel: bool) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.m, self.m);
        for (k, blk) in self.blocks.iter().enumerate() {
            let column = |jj: usize| -> Vec<(usize, usize, f64)> {
                let (rj, aj) = &blk.rows[jj];
                let y = aj.sandwich(&x[k], &sinv[k]);
                blk.rows[jj..].iter().map(|(ri, ai)| (*ri, *rj, ai.inner(&y))).collect()
            };
            let cols: Vec<Vec<(usize, usize, f64)>> = if parallel {
                (0..blk.rows.len()).into_par_iter().map(column).collect()
            } else {
                (0..blk.rows.len()).map(column).collect()
            };
            for col in cols {
                for (i, j, v) in col {
                    m[(i, j)] += v;
                    if i != j {
                        m[(j, i)] += v;
                    }
                }
            }
        }
        m
    }
}

enum Factor {
    Empty,
    Chol(Cholesky<f64, nalgebra::Dyn>),
    Lu(LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

struct KktSolver<'a> {
    m_mat: DMatrix<f64>,
    f: &'a DMatrix<f64>,
    factor: Factor,
}

impl<'a> KktSolver<'a> {
    fn new(m_mat: DMatrix<f64>, f: &'a DMatrix<f64>) -> Option<Self> {
        let m = m_mat.nrows();
        let nf = f.ncols();
        if m + nf == 0 {
            return Some(KktSolver { m_mat, f, factor: Factor::Empty });
        }
        let scale = m_mat.diagonal().iter().fold(1e-300f64, |a, &b| a.max(b.abs())).max(1.0);
        if nf == 0 {
            let mut delta = 0.0;
            for _ in 0..8 {
                let mut reg = m_mat.clone();
                for i in 0..m {
                    reg[(i, i)] += delta;
                }
                if let Some(ch) = Cholesky::new(reg) {
                    return Some(KktSolver { m_mat, f, factor: Factor::Chol(ch) });
                }
                delta = if delta == 0.0 { 1e-14 * scale } else { delta * 100.0 };
            }
            None
        } else {
            let n = m + nf;
            let mut k = DMatrix::zeros(n, n);
            k.view_mut((0, 0), (m, m)).copy_from(&m_mat);
            k.view_mut((0, m), (m, nf)).copy_from(f);
            k.view_mut((m, 0), (nf, m)).copy_from(&f.transpose());
            let delta = 1e-13 * scale;
            for i in 0..m {
                k[(i, i)] += delta;
            }
            for i in m..n {
                k[(i, i)] -= 1e-13;
            }
            let lu = LU::new(k);
            if lu.is_invertible() {
                Some(KktSolver { m_mat, f, factor: Factor::Lu(lu) })
            } else {
                None
            }
        }
    }

    fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let m = self.m_mat.nrows();
        let nf = self.f.ncols();
        let dy = x.rows(0, m);
        let du = x.rows(m, nf);
        let mut out = DVector::zeros(m + nf);
        out.rows_mut(0, m).copy_from(&(&self.m_mat * dy + self.f * du));
        out.rows_mut(m, nf).copy_from(&(self.f.transpose() * dy));
        out
    }

    fn raw_solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.factor {
            Factor::Empty => DVector::zeros(0),
            Factor::Chol(ch) => ch.solve(r),
            Factor::Lu(lu) => lu.solve(r).unwrap_or_else(|| DVector::zeros(r.len())),
        }
    }

    fn solve(&self, r1: &DVector<f64>, r2: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let m = r1.len();
        let nf = r2.len();
        let mut rhs = DVector::zeros(m + nf);
        rhs.rows_mut(0, m).copy_from(r1);
        rhs.rows_mut(m, nf).copy_from(r2);
        let mut x = self.raw_solve(&rhs);
        for _ in 0..3 {
            let res = &rhs - self.apply(&x);
            if res.amax() <= 1e-15 * (1.0 + rhs.amax()) {
                break;
            }
            x += self.raw_solve(&res);
        }
        (x.rows(0, m).into_owned(), x.rows(m, nf).into_owned())
    }
}

/// Largest `t` with `X + t dX >= 0` (infinite if `dX` is PSD).
fn max_step_psd(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    if x.nrows() == 0 {
        return f64::INFINITY;
    }
    let Some(ch) = Cholesky::new(x.clone()) else {
        return 0.0;
    };
    let l = ch.l();
    let Some(linv) = l.clone().try_inverse() else {
        return 0.0;
    };
    let z = &linv * dx * linv.transpose();
    let lmin = SymmetricEigen::new(sym(z)).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

fn max_step_scalar(v: f64, dv: f64) -> f64 {
    if dv >= 0.0 {
        f64::INFINITY
    } else {
        -v / dv
    }
}

struct Direction {
    dx: Blocks,
    ds: Blocks,
    dy: DVector<f64>,
    du: DVector<f64>,
    dtau: f64,
    dkappa: f64,
}

fn failed(prob: &SdpProblem, status: SdpStatus, msg: String, iterations: usize) -> SdpSolution {
    SdpSolution {
        status,
        blocks: prob.block_sizes.iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        free: DVector::zeros(prob.n_free),
        dual: DVector::zeros(prob.equalities.len()),
        residuals: Residuals::default(),
        primal_objective: f64::NAN,
        dual_objective: f64::NAN,
        iterations,
        certificate: None,
        message: msg,
    }
}

/// Looser scaled tolerances (multiples of the configured ones) for the
/// iterate returned when the method stalls; the absolute equality bound is
/// never relaxed.
const STALL_FEAS_FACTOR: f64 = 100.0;
const STALL_GAP_FACTOR: f64 = 1000.0;

/// Most recent iterate meeting the stall tolerances, in the original scale.
struct Fallback {
    blocks: Blocks,
    free: DVector<f64>,
    dual: DVector<f64>,
    residuals: Residuals,
    objectives: (f64, f64),
    iteration: usize,
}

fn solve_hsd(prob: &SdpProblem, opts: &SolverOptions) -> SdpSolution {
    if let Err(e) = prob.validate() {
        return failed(prob, SdpStatus::Indeterminate, format!("malformed problem: {e}"), 0);
    }

    // Structurally empty rows: drop `0 = b` with `b` below the residual
    // tolerance, certify the others infeasible directly.
    let mut keep = Vec::new();
    for (i, row) in prob.equalities.iter().enumerate() {
        if row.lhs.blocks.iter().all(|(_, c)| *c == 0.0) && row.lhs.free.iter().all(|(_, c)| *c == 0.0) {
            if row.rhs.abs() > 0.1 * opts.abs_feas_tol {
                let mut y = DVector::zeros(prob.equalities.len());
                y[i] = 1.0 / row.rhs;
                let mut sol = failed(prob, SdpStatus::Infeasible, format!("equality {i} reads 0 = {}", row.rhs), 0);
                sol.certificate = Some(y);
                return sol;
            }
        } else {
            keep.push(i);
        }
    }

    let d = Data::new(prob, &keep);
    let nblk = d.blocks.len();
    let ntot: usize = d.blocks.iter().map(|b| b.n).sum();
    let nu = (ntot + 1) as f64;

    let mut x: Blocks = d.blocks.iter().map(|b| DMatrix::identity(b.n, b.n)).collect();
    let mut s: Blocks = x.clone();
    let mut y = DVector::<f64>::zeros(d.m);
    let mut u = DVector::<f64>::zeros(d.nf);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let bnorm = d.b.amax();
    let cnorm = fro_norm(&d.c_blocks);
    let cfnorm = if d.nf > 0 { d.c_free.amax() } else { 0.0 };
    let mut small_steps = 0;
    let mut last_msg = String::from("iteration limit reached");
    let mut fallback: Option<Fallback> = None;

    for iter in 0..opts.max_iterations {
        // residuals
        let ax = d.apply_a(&x);
        let rp = &d.b * tau - &ax - &d.f * &u;
        let aty = d.apply_at(&y);
        let rd: Blocks = (0..nblk).map(|k| &d.c_blocks[k] * tau - &aty[k] - &s[k]).collect();
        let rf = &d.c_free * tau - d.f.transpose() * &y;
        let cx = inner(&d.c_blocks, &x) + d.c_free.dot(&u);
        let by = d.b.dot(&y);
        let rg = kappa + cx - by;
        let xs = inner(&x, &s);
        let mu = (xs + tau * kappa) / nu;

        // convergence in the original scale
        let pres = if d.m > 0 { rp.amax() / tau / (1.0 + bnorm) } else { 0.0 };
        let dres =
            (fro_norm(&rd) / tau / (1.0 + cnorm)).max(if d.nf > 0 { rf.amax() / tau / (1.0 + cfnorm) } else { 0.0 });
        let pobj = cx / tau;
        let dobj = by / tau;
        let gap = ((pobj - dobj).abs()).max(xs / (tau * tau)) / (1.0 + pobj.abs() + dobj.abs());
        let abs_res = if d.m > 0 {
            rp.iter().zip(d.row_scale.iter()).map(|(r, sc)| (r / tau * sc).abs()).fold(0.0, f64::max)
        } else {
            0.0
        };
        log::trace!(
            "ipm {iter:3}: abs {abs_res:.2e} pres {pres:.2e} dres {dres:.2e} gap {gap:.2e} tau {tau:.2e} kappa {kappa:.2e} mu {mu:.2e}"
        );

        if pres <= opts.feas_tol && dres <= opts.feas_tol && gap <= opts.gap_tol && abs_res <= opts.abs_feas_tol {
            let blocks: Blocks = x.iter().map(|xk| xk / tau).collect();
            let mut dual = DVector::zeros(prob.equalities.len());
            for (r, &orig) in keep.iter().enumerate() {
                dual[orig] = y[r] / tau / d.row_scale[r];
            }
            return SdpSolution {
                status: SdpStatus::Feasible,
                blocks,
                free: &u / tau,
                dual,
                residuals: Residuals { primal: abs_res, dual: dres, gap },
                primal_objective: pobj,
                dual_objective: dobj,
                iterations: iter,
                certificate: None,
                message: "optimal".into(),
            };
        }
        // A stalled iterate is still accepted when only the scaled primal
        // residual is short and the unscaled one meets the absolute tolerance.
        if pres <= STALL_FEAS_FACTOR * opts.feas_tol
            && dres <= STALL_FEAS_FACTOR * opts.feas_tol
            && gap <= STALL_GAP_FACTOR * opts.gap_tol
            && abs_res <= opts.abs_feas_tol
        {
            let mut dual = DVector::zeros(prob.equalities.len());
            for (r, &orig) in keep.iter().enumerate() {
                dual[orig] = y[r] / tau / d.row_scale[r];
            }
            fallback = Some(Fallback {
                blocks: x.iter().map(|xk| xk / tau).collect(),
                free: &u / tau,
                dual,
                residuals: Residuals { primal: abs_res, dual: dres, gap },
                objectives: (pobj, dobj),
                iteration: iter,
            });
        }

        // primal infeasibility ray
        if by > 0.0 {
            let ray = fro_norm(&(0..nblk).map(|k| &aty[k] + &s[k]).collect::<Blocks>()).max(if d.nf > 0 {
                (d.f.transpose() * &y).amax()
            } else {
                0.0
            });
            if ray / by <= opts.infeas_tol {
                let mut cert = DVector::zeros(prob.equalities.len());
                for (r, &orig) in keep.iter().enumerate() {
                    cert[orig] = y[r] / by / d.row_scale[r];
                }
                if verify_infeasibility_certificate(prob, &cert, 1e-6) {
                    let mut sol = failed(prob, SdpStatus::Infeasible, "primal infeasible (Farkas ray)".into(), iter);
                    sol.certificate = Some(cert);
                    sol.residuals = Residuals { primal: pres, dual: dres, gap };
                    return sol;
                }
            }
        }
        // dual infeasibility ray
        if cx < 0.0 {
            let ray = (&ax + &d.f * &u).amax();
            if ray / (-cx) <= opts.infeas_tol {
                return failed(prob, SdpStatus::Indeterminate, "dual infeasible: primal unbounded".into(), iter);
            }
        }

        // factorizations
        let mut sinv = Vec::with_capacity(nblk);
        for sk in &s {
            match Cholesky::new(sk.clone()) {
                Some(ch) => sinv.push(sym(ch.inverse())),
                None => {
                    return failed(
                        prob,
                        SdpStatus::Indeterminate,
                        format!("lost dual positivity at iteration {iter}"),
                        iter,
                    );
                }
            }
        }
        let mmat = d.schur(&x, &sinv, opts.parallel);
        let Some(kkt) = KktSolver::new(mmat, &d.f) else {
            return failed(
                prob,
                SdpStatus::Indeterminate,
                format!("singular Schur complement at iteration {iter}"),
                iter,
            );
        };

        let xcs: Blocks = (0..nblk).map(|k| &x[k] * &d.c_blocks[k] * &sinv[k]).collect();
        let g = d.apply_a(&xcs);
        let cxcs = inner(&d.c_blocks, &xcs);
        let (v2, w2) = kkt.solve(&(&g + &d.b), &d.c_free);
        let xrds: Blocks = (0..nblk).map(|k| &x[k] * &rd[k] * &sinv[k]).collect();
        let a_xrds = d.apply_a(&xrds);
        let c_xrds = inner(&d.c_blocks, &xrds);
        let bmg = &d.b - &g;

        let direction = |eta: f64, rc: &Blocks, rtau: f64| -> Direction {
            let h1 = &rp * eta - d.apply_a(rc) + &a_xrds * eta;
            let h2 = &rf * eta;
            let (v1, w1) = kkt.solve(&h1, &h2);
            let num = -eta * rg - inner(&d.c_blocks, rc) + eta * c_xrds + bmg.dot(&v1) - d.c_free.dot(&w1) - rtau / tau;
            let den = -kappa / tau - cxcs - bmg.dot(&v2) + d.c_free.dot(&w2);
            let dtau = num / den;
            let dy = &v1 + &v2 * dtau;
            let du = &w1 + &w2 * dtau;
            let atdy = d.apply_at(&dy);
            let ds: Blocks = (0..nblk).map(|k| &rd[k] * eta - &atdy[k] + &d.c_blocks[k] * dtau).collect();
            let dx: Blocks = (0..nblk).map(|k| &rc[k] - sym(&x[k] * &ds[k] * &sinv[k])).collect();
            let dkappa = (rtau - kappa * dtau) / tau;
            Direction { dx, ds, dy, du, dtau, dkappa }
        };
        let step_limit = |dir: &Direction| -> f64 {
            let mut a = max_step_scalar(tau, dir.dtau).min(max_step_scalar(kappa, dir.dkappa));
            for k in 0..nblk {
                a = a.min(max_step_psd(&x[k], &dir.dx[k])).min(max_step_psd(&s[k], &dir.ds[k]));
            }
            a
        };

        // predictor
        let rc_aff: Blocks = x.iter().map(|xk| -xk).collect();
        let aff = direction(1.0, &rc_aff, -tau * kappa);
        let a_aff = step_limit(&aff).min(1.0);
        let mut xs_aff = 0.0;
        for k in 0..nblk {
            xs_aff += (&x[k] + &aff.dx[k] * a_aff).dot(&(&s[k] + &aff.ds[k] * a_aff));
        }
        let mu_aff = (xs_aff + (tau + a_aff * aff.dtau) * (kappa + a_aff * aff.dkappa)) / nu;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let rc: Blocks =
            (0..nblk).map(|k| &sinv[k] * (sigma * mu) - &x[k] - sym(&aff.dx[k] * &aff.ds[k] * &sinv[k])).collect();
        let rtau = sigma * mu - tau * kappa - aff.dtau * aff.dkappa;
        let dir = direction(1.0 - sigma, &rc, rtau);
        let amax = step_limit(&dir);
        let alpha = (0.98 * amax).min(1.0);
        if !alpha.is_finite() || alpha <= 0.0 {
            last_msg = format!("zero step at iteration {iter}");
            break;
        }
        if alpha < 1e-8 {
            small_steps += 1;
            if small_steps >= 3 {
                last_msg = format!("stalled at iteration {iter} (pres {pres:.1e}, dres {dres:.1e}, gap {gap:.1e})");
                break;
            }
        } else {
            small_steps = 0;
        }

        for k in 0..nblk {
            x[k] += &dir.dx[k] * alpha;
            s[k] += &dir.ds[k] * alpha;
            x[k] = sym(x[k].clone());
            s[k] = sym(s[k].clone());
        }
        y += &dir.dy * alpha;
        u += &dir.du * alpha;
        tau += alpha * dir.dtau;
        kappa += alpha * dir.dkappa;

        // keep the embedding from drifting to huge magnitudes
        let scale = tau.max(kappa).max(1e-300);
        if !(1e-8..=1e8).contains(&scale) {
            let inv = 1.0 / scale;
            for k in 0..nblk {
                x[k] *= inv;
                s[k] *= inv;
            }
            y *= inv;
            u *= inv;
            tau *= inv;
            kappa *= inv;
        }
        if !tau.is_finite() || !kappa.is_finite() {
            last_msg = format!("numerical breakdown at iteration {iter}");
            break;
        }
    }

    if let Some(fb) = fallback {
        return SdpSolution {
            status: SdpStatus::Feasible,
            blocks: fb.blocks,
            free: fb.free,
            dual: fb.dual,
            residuals: fb.residuals,
            primal_objective: fb.objectives.0,
            dual_objective: fb.objectives.1,
            iterations: fb.iteration,
            certificate: None,
            message: format!("solved to reduced accuracy ({last_msg})"),
        };
    }
    let mut sol = failed(prob, SdpStatus::Indeterminate, last_msg, opts.max_iterations);
    // best-effort point for diagnostics
    if tau > 0.0 {
        sol.blocks = x.iter().map(|xk| xk / tau).collect();
        sol.free = &u / tau;
    }
    sol
}
