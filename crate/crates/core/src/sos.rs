//! Sum-of-squares programs over polynomial matrices.
//!
//! Decision variables are either SOS matrices, parameterized through a PSD
//! Gram matrix `X(a) = (m(a) ⊗ I_n)^T Q (m(a) ⊗ I_n)`, or free polynomial
//! matrices with one scalar per `(monomial, row, col)`. Constraints are
//! polynomial-matrix identities `expr ≡ 0` with `expr` affine in the
//! decision scalars; compiling matches coefficients monomial by monomial and
//! yields a block-diagonal [`SdpProblem`].
//!
//! Gram rows are indexed monomial-major: row `a * n + i` pairs basis
//! monomial `a` with matrix row `i`.

use std::collections::{BTreeMap, HashMap};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::polymat::{monomial_basis, Monomial, PolyMatrix, Polynomial, PRUNE_TOL};
use crate::sdp::{self, BlockEntry, EqualityRow, LinearRow, SdpProblem, SdpSolution};

pub type ScalarId = usize;

/// Linear functional over decision scalars.
pub type LinearForm = BTreeMap<ScalarId, f64>;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub linear: BTreeMap<ScalarId, f64>,
}

impl Affine {
    fn constant(c: f64) -> Self {
        Affine { constant: c, linear: BTreeMap::new() }
    }

    fn add_scaled(&mut self, other: &Affine, s: f64) {
        self.constant += s * other.constant;
        for (&k, &v) in &other.linear {
            *self.linear.entry(k).or_insert(0.0) += s * v;
        }
    }

    fn prune(&mut self) {
        self.linear.retain(|_, v| v.abs() > PRUNE_TOL);
        if self.constant.abs() <= PRUNE_TOL {
            self.constant = 0.0;
        }
    }

    fn is_zero(&self) -> bool {
        self.constant == 0.0 && self.linear.is_empty()
    }

    fn has_vars(&self) -> bool {
        !self.linear.is_empty()
    }

    fn approx_eq(&self, other: &Affine, tol: f64) -> bool {
        if (self.constant - other.constant).abs() > tol {
            return false;
        }
        let keys: std::collections::BTreeSet<_> = self.linear.keys().chain(other.linear.keys()).collect();
        keys.into_iter().all(|k| {
            let a = self.linear.get(k).copied().unwrap_or(0.0);
            let b = other.linear.get(k).copied().unwrap_or(0.0);
            (a - b).abs() <= tol
        })
    }
}

type Key = (Monomial, usize, usize);

/// Polynomial-matrix expression affine in the decision scalars.
#[derive(Clone, Debug)]
pub struct PolyExpr {
    rows: usize,
    cols: usize,
    nvars: usize,
    entries: BTreeMap<Key, Affine>,
}

impl PolyExpr {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyExpr { rows, cols, nvars, entries: BTreeMap::new() }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        PolyExpr::from(&PolyMatrix::identity(n, nvars))
    }

    fn accumulate(&mut self, key: Key, a: &Affine, s: f64) {
        self.entries.entry(key).or_default().add_scaled(a, s);
    }

    fn pruned(mut self) -> Self {
        for a in self.entries.values_mut() {
            a.prune();
        }
        self.entries.retain(|_, a| !a.is_zero());
        self
    }

    pub fn has_vars(&self) -> bool {
        self.entries.values().any(Affine::has_vars)
    }

    pub fn degree(&self) -> u32 {
        self.entries.keys().map(|(m, _, _)| m.degree()).max().unwrap_or(0)
    }

    /// Number of stored `(monomial, row, col)` coefficients.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check(&self, other: &PolyExpr, op: &'static str) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VarCountMismatch { expected: self.nvars, got: other.nvars });
        }
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch { op, left: self.shape(), right: other.shape() });
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyExpr) -> Result<PolyExpr> {
        self.check(other, "add")?;
        let mut out = self.clone();
        for (k, a) in &other.entries {
            out.accumulate(k.clone(), a, 1.0);
        }
        Ok(out.pruned())
    }

    pub fn sub(&self, other: &PolyExpr) -> Result<PolyExpr> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> PolyExpr {
        let mut out = PolyExpr::zeros(self.rows, self.cols, self.nvars);
        for (k, a) in &self.entries {
            out.accumulate(k.clone(), a, s);
        }
        out.pruned()
    }

    /// Multiplies every entry by a fixed scalar polynomial.
    pub fn scale_poly(&self, q: &Polynomial) -> Result<PolyExpr> {
        if q.nvars() != self.nvars {
            return Err(Error::VarCountMismatch { expected: self.nvars, got: q.nvars() });
        }
        let mut out = PolyExpr::zeros(self.rows, self.cols, self.nvars);
        for ((m, r, c), a) in &self.entries {
            for (mq, &s) in q.terms() {
                out.accumulate((m.mul(mq), *r, *c), a, s);
            }
        }
        Ok(out.pruned())
    }

    pub fn transpose(&self) -> PolyExpr {
        let mut out = PolyExpr::zeros(self.cols, self.rows, self.nvars);
        for ((m, r, c), a) in &self.entries {
            out.entries.insert((m.clone(), *c, *r), a.clone());
        }
        out
    }

    /// Product; fails with the first offending scalar pair if both factors
    /// carry decision variables.
    fn mul_raw(&self, other: &PolyExpr) -> std::result::Result<PolyExpr, (ScalarId, ScalarId)> {
        let mut by_row: HashMap<usize, Vec<(&Monomial, usize, &Affine)>> = HashMap::new();
        for ((m, r, c), a) in &other.entries {
            by_row.entry(*r).or_default().push((m, *c, a));
        }
        let mut out = PolyExpr::zeros(self.rows, other.cols, self.nvars);
        for ((ml, r, k), al) in &self.entries {
            let Some(rhs) = by_row.get(k) else { continue };
            for &(mr, c, ar) in rhs {
                let key = (ml.mul(mr), *r, c);
                match (al.has_vars(), ar.has_vars()) {
                    (true, true) => {
                        return Err((*al.linear.keys().next().unwrap(), *ar.linear.keys().next().unwrap()));
                    }
                    (false, _) => out.accumulate(key, ar, al.constant),
                    (true, false) => out.accumulate(key, al, ar.constant),
                }
            }
        }
        Ok(out.pruned())
    }

    /// Symmetric up to `tol` in every coefficient.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let zero = Affine::default();
        self.entries.iter().all(|((m, r, c), a)| {
            let t = self.entries.get(&(m.clone(), *c, *r)).unwrap_or(&zero);
            a.approx_eq(t, tol)
        })
    }

    pub fn blocks(grid: &[Vec<PolyExpr>]) -> Result<PolyExpr> {
        let nvars = grid[0][0].nvars;
        let row_sizes: Vec<usize> = grid.iter().map(|r| r[0].rows).collect();
        let col_sizes: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
        let mut out = PolyExpr::zeros(row_sizes.iter().sum(), col_sizes.iter().sum(), nvars);
        let mut r0 = 0;
        for (bi, brow) in grid.iter().enumerate() {
            let mut c0 = 0;
            for (bj, b) in brow.iter().enumerate() {
                if b.shape() != (row_sizes[bi], col_sizes[bj]) {
                    return Err(Error::ShapeMismatch {
                        op: "blocks",
                        left: b.shape(),
                        right: (row_sizes[bi], col_sizes[bj]),
                    });
                }
                if b.nvars != nvars {
                    return Err(Error::VarCountMismatch { expected: nvars, got: b.nvars });
                }
                for ((m, r, c), a) in &b.entries {
                    out.entries.insert((m.clone(), r0 + r, c0 + c), a.clone());
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        Ok(out)
    }

    /// Substitutes decision values, returning a constant polynomial matrix.
    pub fn evaluate_vars(&self, value: impl Fn(ScalarId) -> f64) -> PolyMatrix {
        let mut terms: BTreeMap<Monomial, DMatrix<f64>> = BTreeMap::new();
        for ((m, r, c), a) in &self.entries {
            let v = a.constant + a.linear.iter().map(|(&k, &s)| s * value(k)).sum::<f64>();
            terms.entry(m.clone()).or_insert_with(|| DMatrix::zeros(self.rows, self.cols))[(*r, *c)] += v;
        }
        PolyMatrix::from_terms(self.rows, self.cols, self.nvars, terms).expect("consistent shapes")
    }
}

impl From<&PolyMatrix> for PolyExpr {
    fn from(p: &PolyMatrix) -> Self {
        let mut out = PolyExpr::zeros(p.rows(), p.cols(), p.nvars());
        for (m, c) in p.terms() {
            for r in 0..p.rows() {
                for col in 0..p.cols() {
                    let v = c[(r, col)];
                    if v != 0.0 {
                        out.entries.insert((m.clone(), r, col), Affine::constant(v));
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScalarSlot {
    Gram { block: usize, i: usize, j: usize },
    Free { index: usize },
}

/// Maps each decision scalar to its place in the compiled SDP.
#[derive(Clone, Debug)]
pub struct VarMap {
    pub slots: Vec<ScalarSlot>,
}

impl VarMap {
    pub fn value(&self, sol: &SdpSolution, id: ScalarId) -> f64 {
        match self.slots[id] {
            ScalarSlot::Gram { block, i, j } => sol.blocks[block][(i, j)],
            ScalarSlot::Free { index } => sol.free[index],
        }
    }
}

#[derive(Clone, Debug)]
pub struct SosMatrixVar {
    var: usize,
    n: usize,
    basis: Vec<Monomial>,
    block: usize,
    first: ScalarId,
}

impl SosMatrixVar {
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    pub fn gram_side(&self) -> usize {
        self.n * self.basis.len()
    }

    pub fn block(&self) -> usize {
        self.block
    }

    fn scalar(&self, p: usize, q: usize) -> ScalarId {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        let side = self.gram_side();
        self.first + p * (2 * side - p + 1) / 2 + (q - p)
    }

    /// Linear functional `<W, Q>` on the Gram matrix.
    pub fn gram_inner(&self, w: &DMatrix<f64>) -> LinearForm {
        let side = self.gram_side();
        assert_eq!(w.shape(), (side, side));
        let mut out = LinearForm::new();
        for p in 0..side {
            for q in p..side {
                let c = if p == q { w[(p, p)] } else { w[(p, q)] + w[(q, p)] };
                if c != 0.0 {
                    out.insert(self.scalar(p, q), c);
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct FreePolyMatrixVar {
    var: usize,
    rows: usize,
    cols: usize,
    basis: Vec<Monomial>,
    first: ScalarId,
}

impl FreePolyMatrixVar {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn basis(&self) -> &[Monomial] {
        &self.basis
    }

    /// Decision scalar for basis monomial `k`, entry `(r, c)`.
    pub fn scalar(&self, k: usize, r: usize, c: usize) -> ScalarId {
        self.first + (k * self.rows + r) * self.cols + c
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConstraintHandle(pub usize);

#[derive(Clone, Debug)]
pub struct SosProgram {
    nvars: usize,
    names: Vec<String>,
    slots: Vec<ScalarSlot>,
    owner: Vec<usize>,
    gram_sizes: Vec<usize>,
    n_free: usize,
    constraints: Vec<PolyExpr>,
    objective: LinearForm,
}

impl SosProgram {
    pub fn new(nvars: usize) -> Self {
        SosProgram {
            nvars,
            names: Vec::new(),
            slots: Vec::new(),
            owner: Vec::new(),
            gram_sizes: Vec::new(),
            n_free: 0,
            constraints: Vec::new(),
            objective: LinearForm::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn scalar_count(&self) -> usize {
        self.slots.len()
    }

    pub fn constraints(&self) -> &[PolyExpr] {
        &self.constraints
    }

    /// SOS matrix of side `n` and degree at most `2 * ceil(degree / 2)`.
    pub fn declare_sos_matrix(&mut self, name: &str, n: usize, degree: u32) -> SosMatrixVar {
        let basis = monomial_basis(self.nvars, degree.div_ceil(2));
        self.declare_sos_matrix_with_basis(name, n, basis)
    }

    pub fn declare_sos_matrix_with_basis(&mut self, name: &str, n: usize, basis: Vec<Monomial>) -> SosMatrixVar {
        assert!(n >= 1, "SOS matrix side must be positive");
        let var = self.names.len();
        self.names.push(name.to_string());
        let block = self.gram_sizes.len();
        let side = n * basis.len();
        self.gram_sizes.push(side);
        let first = self.slots.len();
        for i in 0..side {
            for j in i..side {
                self.slots.push(ScalarSlot::Gram { block, i, j });
                self.owner.push(var);
            }
        }
        SosMatrixVar { var, n, basis, block, first }
    }

    /// Free polynomial matrix spanned by `basis`.
    pub fn declare_free_matrix(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        basis: Vec<Monomial>,
    ) -> FreePolyMatrixVar {
        let var = self.names.len();
        self.names.push(name.to_string());
        let first = self.slots.len();
        for _ in 0..basis.len() * rows * cols {
            self.slots.push(ScalarSlot::Free { index: self.n_free });
            self.owner.push(var);
            self.n_free += 1;
        }
        FreePolyMatrixVar { var, rows, cols, basis, first }
    }

    pub fn sos_expr(&self, v: &SosMatrixVar) -> PolyExpr {
        let n = v.n;
        let mut out = PolyExpr::zeros(n, n, self.nvars);
        for (a, ma) in v.basis.iter().enumerate() {
            for (b, mb) in v.basis.iter().enumerate() {
                let m = ma.mul(mb);
                for i in 0..n {
                    for j in 0..n {
                        let id = v.scalar(a * n + i, b * n + j);
                        *out.entries.entry((m.clone(), i, j)).or_default().linear.entry(id).or_insert(0.0) += 1.0;
                    }
                }
            }
        }
        out
    }

    pub fn free_expr(&self, v: &FreePolyMatrixVar) -> PolyExpr {
        let mut out = PolyExpr::zeros(v.rows, v.cols, self.nvars);
        for (k, m) in v.basis.iter().enumerate() {
            for r in 0..v.rows {
                for c in 0..v.cols {
                    out.entries.entry((m.clone(), r, c)).or_default().linear.insert(v.scalar(k, r, c), 1.0);
                }
            }
        }
        out
    }

    pub fn var_name(&self, id: ScalarId) -> &str {
        &self.names[self.owner[id]]
    }

    /// Product of two expressions; rejects products of decision variables.
    pub fn mul(&self, a: &PolyExpr, b: &PolyExpr) -> Result<PolyExpr> {
        if a.cols != b.rows {
            return Err(Error::ShapeMismatch { op: "mul", left: a.shape(), right: b.shape() });
        }
        a.mul_raw(b).map_err(|(l, r)| Error::Bilinear {
            left: self.var_name(l).to_string(),
            right: self.var_name(r).to_string(),
        })
    }

    pub fn assert_poly_eq(&mut self, expr: PolyExpr) -> Result<ConstraintHandle> {
        if expr.nvars != self.nvars {
            return Err(Error::VarCountMismatch { expected: self.nvars, got: expr.nvars });
        }
        self.constraints.push(expr.pruned());
        Ok(ConstraintHandle(self.constraints.len() - 1))
    }

    pub fn set_objective(&mut self, objective: LinearForm) {
        self.objective = objective;
    }

    /// Coefficient-matching rows: `(rows, symmetric)` per constraint.
    fn constraint_rows(&self, expr: &PolyExpr) -> Vec<(LinearForm, f64)> {
        let symmetric = expr.is_symmetric(1e-12);
        expr.entries
            .iter()
            .filter(|((_, r, c), _)| !symmetric || r <= c)
            .filter(|(_, a)| !a.is_zero())
            .map(|(_, a)| (a.linear.clone(), -a.constant))
            .collect()
    }

    /// Number of scalar equalities a constraint contributes.
    pub fn equality_count(&self, h: ConstraintHandle) -> usize {
        self.constraint_rows(&self.constraints[h.0]).len()
    }

    fn lower_row(&self, form: &LinearForm) -> LinearRow {
        let mut row = LinearRow::default();
        for (&id, &c) in form {
            match self.slots[id] {
                ScalarSlot::Gram { block, i, j } => row.blocks.push((BlockEntry::new(block, i, j), c)),
                ScalarSlot::Free { index } => row.free.push((index, c)),
            }
        }
        row
    }

    pub fn compile(&self) -> (SdpProblem, VarMap) {
        let mut equalities = Vec::new();
        for expr in &self.constraints {
            for (form, rhs) in self.constraint_rows(expr) {
                equalities.push(EqualityRow { lhs: self.lower_row(&form), rhs });
            }
        }
        let prob = SdpProblem {
            block_sizes: self.gram_sizes.clone(),
            n_free: self.n_free,
            equalities,
            objective: self.lower_row(&self.objective),
        };
        (prob, VarMap { slots: self.slots.clone() })
    }

    pub fn dump_sdpa(&self) -> String {
        sdp::sdpa::write(&self.compile().0)
    }

    fn require_feasible(sol: &SdpSolution) -> Result<()> {
        if sol.is_feasible() {
            Ok(())
        } else {
            Err(Error::NotFeasible(format!("{:?}: {}", sol.status, sol.message)))
        }
    }

    pub fn gram(&self, sol: &SdpSolution, v: &SosMatrixVar) -> Result<DMatrix<f64>> {
        Self::require_feasible(sol)?;
        Ok(sol.blocks[v.block].clone())
    }

    pub fn extract_sos(&self, sol: &SdpSolution, v: &SosMatrixVar) -> Result<PolyMatrix> {
        let g = self.gram(sol, v)?;
        Ok(gram_to_poly(&g, v.n, &v.basis, self.nvars))
    }

    pub fn extract_free(&self, sol: &SdpSolution, v: &FreePolyMatrixVar) -> Result<PolyMatrix> {
        Self::require_feasible(sol)?;
        let mut terms = Vec::new();
        for (k, m) in v.basis.iter().enumerate() {
            let c = DMatrix::from_fn(v.rows, v.cols, |r, c| match self.slots[v.scalar(k, r, c)] {
                ScalarSlot::Free { index } => sol.free[index],
                ScalarSlot::Gram { .. } => unreachable!(),
            });
            terms.push((m.clone(), c));
        }
        PolyMatrix::from_terms(v.rows, v.cols, self.nvars, terms)
    }

    /// The owner variable index, for diagnostics.
    pub fn owner_of_sos(&self, v: &SosMatrixVar) -> &str {
        &self.names[v.var]
    }

    pub fn owner_of_free(&self, v: &FreePolyMatrixVar) -> &str {
        &self.names[v.var]
    }
}

/// `X(a) = sum_{a,b} Q[(a,i),(b,j)] m_a m_b`.
pub fn gram_to_poly(g: &DMatrix<f64>, n: usize, basis: &[Monomial], nvars: usize) -> PolyMatrix {
    let mut terms: BTreeMap<Monomial, DMatrix<f64>> = BTreeMap::new();
    for (a, ma) in basis.iter().enumerate() {
        for (b, mb) in basis.iter().enumerate() {
            let block = g.view((a * n, b * n), (n, n));
            let e = terms.entry(ma.mul(mb)).or_insert_with(|| DMatrix::zeros(n, n));
            *e += block;
        }
    }
    let mut out = PolyMatrix::from_terms(n, n, nvars, terms).expect("consistent shapes");
    // symmetrize away round-off
    out = out.add(&out.transpose()).expect("square").scale(0.5);
    out
}
