//! Bounded-real block expressions for the error system.
//!
//! Continuous:
//! ```text
//! [ A~'P + PA~   P B~   C~' ]
//! [ B~'P         -I     D~' ]
//! [ C~           D~    -g2 I ]   + eps I + Q0 + sum_l Q_l q_l = 0
//! ```
//! Discrete:
//! ```text
//! [ P       A~P   B~   0     ]
//! [ PA~'    P     0    PC~'  ]
//! [ B~'     0     I    D~'   ]
//! [ 0       C~P   D~   g2 I  ]   - eps I - Q0 - sum_l Q_l q_l = 0
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polymat::{Monomial, PolyMatrix};
use crate::psys::{ParamStateSpace, TimeDomain};
use crate::sos::{FreePolyMatrixVar, PolyExpr, SosMatrixVar, SosProgram};

/// Error-system matrices as expressions (constant or affine in model unknowns).
#[derive(Clone, Debug)]
pub struct AugExpr {
    pub a: PolyExpr,
    pub b: PolyExpr,
    pub c: PolyExpr,
    pub d: PolyExpr,
}

impl AugExpr {
    pub fn fixed(sys: &ParamStateSpace) -> Self {
        AugExpr { a: (&sys.a).into(), b: (&sys.b).into(), c: (&sys.c).into(), d: (&sys.d).into() }
    }

    fn side(&self, td: TimeDomain) -> usize {
        let (n, m, o) = (self.a.shape().0, self.b.shape().1, self.c.shape().0);
        match td {
            TimeDomain::Continuous => n + m + o,
            TimeDomain::Discrete => 2 * n + m + o,
        }
    }
}

/// Unknown reduced-model matrices, each spanned by monomials in `alpha'`.
#[derive(Clone, Debug)]
pub struct ModelVars {
    pub a: FreePolyMatrixVar,
    pub b: FreePolyMatrixVar,
    pub c: FreePolyMatrixVar,
    pub d: FreePolyMatrixVar,
}

fn prefix_basis(nvars: usize, k: usize, degree: u32) -> Vec<Monomial> {
    crate::polymat::monomial_basis(k, degree).into_iter().map(|m| m.resize(nvars).expect("padding")).collect()
}

impl ModelVars {
    pub fn declare(prog: &mut SosProgram, dims: (usize, usize, usize), p_prime: usize, deg: [u32; 4]) -> Self {
        let (np, m, o) = dims;
        let p = prog.nvars();
        ModelVars {
            a: prog.declare_free_matrix("A'", np, np, prefix_basis(p, p_prime, deg[0])),
            b: prog.declare_free_matrix("B'", np, m, prefix_basis(p, p_prime, deg[1])),
            c: prog.declare_free_matrix("C'", o, np, prefix_basis(p, p_prime, deg[2])),
            d: prog.declare_free_matrix("D'", o, m, prefix_basis(p, p_prime, deg[3])),
        }
    }

    /// `A~ = diag(A, A')`, `B~ = [B; B']`, `C~ = [C, -C']`, `D~ = D - D'`.
    pub fn augmented(&self, prog: &SosProgram, g: &ParamStateSpace) -> Result<AugExpr> {
        let p = g.nvars();
        let (n, np) = (g.n(), self.a.shape().0);
        let a = PolyExpr::blocks(&[
            vec![(&g.a).into(), PolyExpr::zeros(n, np, p)],
            vec![PolyExpr::zeros(np, n, p), prog.free_expr(&self.a)],
        ])?;
        let b = PolyExpr::blocks(&[vec![(&g.b).into()], vec![prog.free_expr(&self.b)]])?;
        let c = PolyExpr::blocks(&[vec![(&g.c).into(), prog.free_expr(&self.c).scale(-1.0)]])?;
        let d = PolyExpr::from(&g.d).sub(&prog.free_expr(&self.d))?;
        Ok(AugExpr { a, b, c, d })
    }
}

/// `t * I_k` for a scalar (1 x 1) expression `t`.
pub fn scalar_identity(prog: &SosProgram, t: &PolyExpr, k: usize) -> Result<PolyExpr> {
    let nvars = t.nvars();
    let mut out = PolyExpr::zeros(k, k, nvars);
    for i in 0..k {
        let mut e = DMatrix::zeros(k, 1);
        e[(i, 0)] = 1.0;
        let col = PolyExpr::from(&PolyMatrix::constant(e.clone(), nvars));
        let row = PolyExpr::from(&PolyMatrix::constant(e.transpose(), nvars));
        out = out.add(&prog.mul(&prog.mul(&col, t)?, &row)?)?;
    }
    Ok(out)
}

/// The bounded-real block matrix (without margin or multipliers).
pub fn bounded_real_block(
    prog: &SosProgram,
    td: TimeDomain,
    aug: &AugExpr,
    p: &PolyExpr,
    gamma_sq: &PolyExpr,
) -> Result<PolyExpr> {
    let nv = prog.nvars();
    let (n, m, o) = (aug.a.shape().0, aug.b.shape().1, aug.c.shape().0);
    let z = |r, c| PolyExpr::zeros(r, c, nv);
    match td {
        TimeDomain::Continuous => {
            let pa = prog.mul(p, &aug.a)?;
            let top = pa.add(&pa.transpose())?;
            let pb = prog.mul(p, &aug.b)?;
            PolyExpr::blocks(&[
                vec![top, pb.clone(), aug.c.transpose()],
                vec![pb.transpose(), PolyExpr::identity(m, nv).scale(-1.0), aug.d.transpose()],
                vec![aug.c.clone(), aug.d.clone(), gamma_sq.scale(-1.0)],
            ])
        }
        TimeDomain::Discrete => {
            let ap = prog.mul(&aug.a, p)?;
            let pct = prog.mul(p, &aug.c.transpose())?;
            PolyExpr::blocks(&[
                vec![p.clone(), ap.clone(), aug.b.clone(), z(n, o)],
                vec![ap.transpose(), p.clone(), z(n, m), pct.clone()],
                vec![aug.b.transpose(), z(m, n), PolyExpr::identity(m, nv), aug.d.transpose()],
                vec![z(o, n), pct.transpose(), aug.d.clone(), gamma_sq.clone()],
            ])
        }
    }
}

/// Multiplier degrees and margin for [`assert_bounded_real`].
#[derive(Clone, Debug)]
pub struct MultiplierSpec {
    pub epsilon: f64,
    pub d_q0: u32,
    pub d_q: Vec<u32>,
}

/// Declares `Q0, Q_1..Q_L` and asserts the bounded-real identity for `G`'s
/// parameter set. Returns the multiplier variables.
pub fn assert_bounded_real(
    prog: &mut SosProgram,
    g: &ParamStateSpace,
    aug: &AugExpr,
    p: &PolyExpr,
    gamma_sq: &PolyExpr,
    spec: &MultiplierSpec,
) -> Result<Vec<SosMatrixVar>> {
    let td = g.time_domain;
    let k = aug.side(td);
    let nv = prog.nvars();
    let block = bounded_real_block(prog, td, aug, p, gamma_sq)?;
    let q0 = prog.declare_sos_matrix("Q0", k, spec.d_q0);
    let mut sum = PolyExpr::identity(k, nv).scale(spec.epsilon).add(&prog.sos_expr(&q0))?;
    let mut vars = vec![q0];
    for (l, q) in g.param_set.constraints().iter().enumerate() {
        let v = prog.declare_sos_matrix(&format!("Q{}", l + 1), k, spec.d_q[l]);
        sum = sum.add(&prog.sos_expr(&v).scale_poly(q)?)?;
        vars.push(v);
    }
    let total = match td {
        TimeDomain::Continuous => block.add(&sum)?,
        TimeDomain::Discrete => block.sub(&sum)?,
    };
    prog.assert_poly_eq(total)?;
    Ok(vars)
}

/// Fixed-data bounded-real block for `G - G'` with storage `P`.
pub fn fixed_block(
    g: &ParamStateSpace,
    gp: &ParamStateSpace,
    p_prime: usize,
    p: &PolyMatrix,
    gamma: f64,
) -> Result<PolyMatrix> {
    let err = crate::psys::augment(g, gp, p_prime)?;
    let prog = SosProgram::new(g.nvars());
    let g2 = PolyExpr::from(&PolyMatrix::identity(g.o(), g.nvars()).scale(gamma * gamma));
    let e = bounded_real_block(&prog, g.time_domain, &AugExpr::fixed(&err), &p.into(), &g2)?;
    Ok(e.evaluate_vars(|_| 0.0))
}

/// Discrete-time bounded-real block of side `2(n + n') + m + o`.
pub fn build_discrete_blocks(
    g: &ParamStateSpace,
    gp: &ParamStateSpace,
    p_prime: usize,
    p: &PolyMatrix,
    gamma: f64,
) -> Result<PolyMatrix> {
    if g.time_domain != TimeDomain::Discrete {
        return Err(Error::TimeDomain("discrete bounded-real block requested for a continuous system".into()));
    }
    fixed_block(g, gp, p_prime, p, gamma)
}

/// Continuous-time bounded-real block of side `n + n' + m + o`.
pub fn build_continuous_blocks(
    g: &ParamStateSpace,
    gp: &ParamStateSpace,
    p_prime: usize,
    p: &PolyMatrix,
    gamma: f64,
) -> Result<PolyMatrix> {
    if g.time_domain != TimeDomain::Continuous {
        return Err(Error::TimeDomain("continuous bounded-real block requested for a discrete system".into()));
    }
    fixed_block(g, gp, p_prime, p, gamma)
}
