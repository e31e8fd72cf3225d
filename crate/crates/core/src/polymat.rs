//! Multivariate polynomials and polynomial matrices over `f64`.
//!
//! Monomials are ordered graded-lexicographically: by total degree first, and
//! within a degree by descending exponent of the first variable, then the
//! second, and so on. Every map in this module is keyed in that order, so
//! iteration (and everything derived from it, like SOS Gram indexing and
//! serialization) is reproducible.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Coefficients with magnitude at or below this are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(exponents: Vec<u32>) -> Self {
        Monomial(exponents)
    }

    pub fn one(nvars: usize) -> Self {
        Monomial(vec![0; nvars])
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        let mut e = vec![0; nvars];
        e[index] = 1;
        Monomial(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn nvars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.0.len(), other.0.len());
        Monomial(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Value at `alpha`, powers formed by repeated multiplication.
    pub fn eval(&self, alpha: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&e, &a) in self.0.iter().zip(alpha) {
            for _ in 0..e {
                v *= a;
            }
        }
        v
    }

    /// Pads (or, if the dropped exponents are zero, trims) to `nvars` variables.
    pub fn resize(&self, nvars: usize) -> Option<Monomial> {
        if nvars >= self.0.len() {
            let mut e = self.0.clone();
            e.resize(nvars, 0);
            Some(Monomial(e))
        } else if self.0[nvars..].iter().all(|&e| e == 0) {
            Some(Monomial(self.0[..nvars].to_vec()))
        } else {
            None
        }
    }

    /// True when only the first `k` variables appear.
    pub fn in_prefix(&self, k: usize) -> bool {
        self.0.iter().skip(k).all(|&e| e == 0)
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_one() {
            return write!(f, "1");
        }
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                write!(f, "*")?;
            }
            first = false;
            if e == 1 {
                write!(f, "a{}", i + 1)?;
            } else {
                write!(f, "a{}^{}", i + 1, e)?;
            }
        }
        Ok(())
    }
}

/// All monomials in `nvars` variables of total degree `<= max_degree`, in
/// graded-lex order. There are `C(nvars + max_degree, max_degree)` of them.
pub fn monomial_basis(nvars: usize, max_degree: u32) -> Vec<Monomial> {
    let mut out = Vec::new();
    for d in 0..=max_degree {
        let mut cur = vec![0u32; nvars];
        homogeneous(nvars, 0, d, &mut cur, &mut out);
    }
    out
}

fn homogeneous(nvars: usize, pos: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<Monomial>) {
    if nvars == 0 {
        if remaining == 0 {
            out.push(Monomial(Vec::new()));
        }
        return;
    }
    if pos == nvars - 1 {
        cur[pos] = remaining;
        out.push(Monomial(cur.clone()));
        cur[pos] = 0;
        return;
    }
    for e in (0..=remaining).rev() {
        cur[pos] = e;
        homogeneous(nvars, pos + 1, remaining - e, cur, out);
    }
    cur[pos] = 0;
}

#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Monomial, f64>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        Self::from_terms(nvars, [(Monomial::one(nvars), c)])
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        Self::from_terms(nvars, [(Monomial::var(nvars, index), 1.0)])
    }

    /// Sums duplicate monomials and prunes small coefficients.
    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, f64)>) -> Self {
        let mut map: BTreeMap<Monomial, f64> = BTreeMap::new();
        for (m, c) in terms {
            assert_eq!(m.nvars(), nvars, "monomial length must equal nvars");
            *map.entry(m).or_insert(0.0) += c;
        }
        let mut p = Polynomial { nvars, terms: map };
        p.prune();
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, f64> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, m: &Monomial) -> f64 {
        self.terms.get(m).copied().unwrap_or(0.0)
    }

    fn prune(&mut self) {
        self.terms.retain(|_, c| c.abs() > PRUNE_TOL);
    }

    pub fn eval(&self, alpha: &[f64]) -> f64 {
        self.terms.iter().map(|(m, c)| c * m.eval(alpha)).sum()
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        Self::from_terms(self.nvars, self.terms.iter().chain(other.terms.iter()).map(|(m, c)| (m.clone(), *c)))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Self::from_terms(self.nvars, self.terms.iter().map(|(m, c)| (m.clone(), c * s)))
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.scale(-1.0))
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, other.nvars);
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.push((ma.mul(mb), ca * cb));
            }
        }
        Self::from_terms(self.nvars, out)
    }

    pub fn resize_vars(&self, nvars: usize) -> Option<Polynomial> {
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            terms.push((m.resize(nvars)?, *c));
        }
        Some(Self::from_terms(nvars, terms))
    }
}

/// A matrix whose entries are polynomials, stored as a map from monomial to
/// dense coefficient matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    nvars: usize,
    terms: BTreeMap<Monomial, DMatrix<f64>>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize, nvars: usize) -> Self {
        PolyMatrix { rows, cols, nvars, terms: BTreeMap::new() }
    }

    pub fn constant(m: DMatrix<f64>, nvars: usize) -> Self {
        let (rows, cols) = m.shape();
        let mut out = Self::zeros(rows, cols, nvars);
        out.terms.insert(Monomial::one(nvars), m);
        out.prune();
        out
    }

    pub fn identity(n: usize, nvars: usize) -> Self {
        Self::constant(DMatrix::identity(n, n), nvars)
    }

    /// Builds from `(monomial, coefficient)` pairs; duplicates are summed.
    pub fn from_terms(
        rows: usize,
        cols: usize,
        nvars: usize,
        terms: impl IntoIterator<Item = (Monomial, DMatrix<f64>)>,
    ) -> Result<Self> {
        let mut out = Self::zeros(rows, cols, nvars);
        for (m, c) in terms {
            if m.nvars() != nvars {
                return Err(Error::VarCountMismatch { expected: nvars, got: m.nvars() });
            }
            if c.shape() != (rows, cols) {
                return Err(Error::ShapeMismatch { op: "from_terms", left: (rows, cols), right: c.shape() });
            }
            out.accumulate(m, &c, 1.0);
        }
        out.prune();
        Ok(out)
    }

    /// Scalar (1×1) polynomial matrix.
    pub fn from_poly(p: &Polynomial) -> Self {
        let mut out = Self::zeros(1, 1, p.nvars());
        for (m, c) in p.terms() {
            out.terms.insert(m.clone(), DMatrix::from_element(1, 1, *c));
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, DMatrix<f64>> {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn coeff(&self, m: &Monomial) -> DMatrix<f64> {
        self.terms.get(m).cloned().unwrap_or_else(|| DMatrix::zeros(self.rows, self.cols))
    }

    /// Polynomial in entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> Polynomial {
        Polynomial::from_terms(self.nvars, self.terms.iter().map(|(m, c)| (m.clone(), c[(i, j)])))
    }

    fn accumulate(&mut self, m: Monomial, c: &DMatrix<f64>, s: f64) {
        let rows = self.rows;
        let cols = self.cols;
        let e = self.terms.entry(m).or_insert_with(|| DMatrix::zeros(rows, cols));
        *e += c * s;
    }

    fn prune(&mut self) {
        for c in self.terms.values_mut() {
            c.apply(|x| {
                if x.abs() <= PRUNE_TOL {
                    *x = 0.0;
                }
            });
        }
        self.terms.retain(|_, c| c.iter().any(|x| *x != 0.0));
    }

    /// Zeroes coefficients below `rel` times the largest coefficient magnitude.
    pub fn prune_relative(&self, rel: f64) -> PolyMatrix {
        let scale = self.terms.values().map(|c| c.amax()).fold(0.0, f64::max);
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            c.apply(|x| {
                if x.abs() <= rel * scale {
                    *x = 0.0;
                }
            });
        }
        out.prune();
        out
    }

    pub fn evaluate(&self, alpha: &[f64]) -> Result<DMatrix<f64>> {
        if alpha.len() != self.nvars {
            return Err(Error::VarCountMismatch { expected: self.nvars, got: alpha.len() });
        }
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (m, c) in &self.terms {
            out += c * m.eval(alpha);
        }
        Ok(out)
    }

    fn check_vars(&self, other: &PolyMatrix) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::VarCountMismatch { expected: self.nvars, got: other.nvars });
        }
        Ok(())
    }

    pub fn add(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.check_vars(other)?;
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch { op: "add", left: self.shape(), right: other.shape() });
        }
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(m.clone(), c, 1.0);
        }
        out.prune();
        Ok(out)
    }

    pub fn sub(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> PolyMatrix {
        let mut out = Self::zeros(self.rows, self.cols, self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), c * s);
        }
        out.prune();
        out
    }

    /// Entrywise product with a scalar polynomial.
    pub fn scale_poly(&self, p: &Polynomial) -> Result<PolyMatrix> {
        if p.nvars() != self.nvars {
            return Err(Error::VarCountMismatch { expected: self.nvars, got: p.nvars() });
        }
        let mut out = Self::zeros(self.rows, self.cols, self.nvars);
        for (mp, cp) in p.terms() {
            for (m, c) in &self.terms {
                out.accumulate(m.mul(mp), c, *cp);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn matmul(&self, other: &PolyMatrix) -> Result<PolyMatrix> {
        self.check_vars(other)?;
        if self.cols != other.rows {
            return Err(Error::ShapeMismatch { op: "matmul", left: self.shape(), right: other.shape() });
        }
        let mut out = Self::zeros(self.rows, other.cols, self.nvars);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let prod = ca * cb;
                out.accumulate(ma.mul(mb), &prod, 1.0);
            }
        }
        out.prune();
        Ok(out)
    }

    pub fn transpose(&self) -> PolyMatrix {
        let mut out = Self::zeros(self.cols, self.rows, self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), c.transpose());
        }
        out
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols && self.terms.values().all(|c| (c - c.transpose()).amax() <= tol)
    }

    /// Assembles a block matrix. Every block row must have a consistent row
    /// count and every block column a consistent column count.
    pub fn blocks(grid: &[Vec<PolyMatrix>]) -> Result<PolyMatrix> {
        let nvars = grid.first().and_then(|r| r.first()).map(PolyMatrix::nvars).unwrap_or(0);
        let row_sizes: Vec<usize> = grid.iter().map(|r| r[0].rows).collect();
        let col_sizes: Vec<usize> = grid[0].iter().map(|b| b.cols).collect();
        let rows: usize = row_sizes.iter().sum();
        let cols: usize = col_sizes.iter().sum();
        let mut out = Self::zeros(rows, cols, nvars);
        let mut r0 = 0;
        for (bi, brow) in grid.iter().enumerate() {
            let mut c0 = 0;
            if brow.len() != col_sizes.len() {
                return Err(Error::ShapeMismatch {
                    op: "blocks",
                    left: (bi, brow.len()),
                    right: (bi, col_sizes.len()),
                });
            }
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
                for (m, c) in &b.terms {
                    let e = out.terms.entry(m.clone()).or_insert_with(|| DMatrix::zeros(rows, cols));
                    e.view_mut((r0, c0), c.shape()).copy_from(c);
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        Ok(out)
    }

    /// Sub-block `rows × cols` starting at `(r0, c0)`.
    pub fn view(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> PolyMatrix {
        let mut out = Self::zeros(rows, cols, self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), c.view((r0, c0), (rows, cols)).into_owned());
        }
        out.prune();
        out
    }

    /// Re-expresses over `nvars` variables. Fails if a dropped variable is used.
    pub fn resize_vars(&self, nvars: usize) -> Option<PolyMatrix> {
        let mut out = Self::zeros(self.rows, self.cols, nvars);
        for (m, c) in &self.terms {
            out.accumulate(m.resize(nvars)?, c, 1.0);
        }
        Some(out)
    }

    /// Substitutes fixed values for the variables at `indices`, keeping the
    /// variable count (the substituted variables no longer appear).
    pub fn substitute(&self, indices: &[usize], values: &[f64]) -> PolyMatrix {
        let mut out = Self::zeros(self.rows, self.cols, self.nvars);
        for (m, c) in &self.terms {
            let mut e = m.exponents().to_vec();
            let mut s = 1.0;
            for (&i, &v) in indices.iter().zip(values) {
                for _ in 0..e[i] {
                    s *= v;
                }
                e[i] = 0;
            }
            out.accumulate(Monomial::new(e), c, s);
        }
        out.prune();
        out
    }

    /// Drops all terms above `degree`.
    pub fn truncate_degree(&self, degree: u32) -> PolyMatrix {
        let mut out = self.clone();
        out.terms.retain(|m, _| m.degree() <= degree);
        out
    }

    /// True when only the first `k` variables appear.
    pub fn depends_only_on_prefix(&self, k: usize) -> bool {
        self.terms.keys().all(|m| m.in_prefix(k))
    }

    /// Replaces each coefficient matrix `C` by `C_left * C * C_right` style
    /// constant transforms: `left * self * right`.
    pub fn congruence(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<PolyMatrix> {
        if left.ncols() != self.rows || right.nrows() != self.cols {
            return Err(Error::ShapeMismatch { op: "congruence", left: left.shape(), right: right.shape() });
        }
        let mut out = Self::zeros(left.nrows(), right.ncols(), self.nvars);
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), left * c * right);
        }
        out.prune();
        Ok(out)
    }
}
