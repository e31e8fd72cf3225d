//! Parameter-dependent state-space systems and validation on parameter grids.

pub mod hinf;
pub mod lyap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymat::{PolyMatrix, Polynomial};

pub const DEFAULT_GRID: usize = 21;
/// Tolerance on `q(alpha) >= 0` when filtering grid points.
pub const ADMISSIBLE_TOL: f64 = 1e-9;
/// Relative accuracy used for grid-wide H-infinity evaluations.
pub const HINF_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeDomain {
    Continuous,
    Discrete,
}

#[derive(Clone, Debug)]
pub struct SemialgebraicSet {
    nvars: usize,
    constraints: Vec<Polynomial>,
    sampling_box: Vec<(f64, f64)>,
}

impl SemialgebraicSet {
    pub fn new(nvars: usize, constraints: Vec<Polynomial>, sampling_box: Vec<(f64, f64)>) -> Result<Self> {
        if sampling_box.len() != nvars {
            return Err(Error::VarCountMismatch { expected: nvars, got: sampling_box.len() });
        }
        if let Some(q) = constraints.iter().find(|q| q.nvars() != nvars) {
            return Err(Error::VarCountMismatch { expected: nvars, got: q.nvars() });
        }
        if sampling_box.iter().any(|(lo, hi)| !(lo <= hi)) {
            return Err(Error::Config("sampling box interval with lo > hi".into()));
        }
        Ok(SemialgebraicSet { nvars, constraints, sampling_box })
    }

    /// Box `[lo, hi]^p` described by `q_i = (hi - a_i)(a_i - lo) >= 0`.
    pub fn from_box(sampling_box: Vec<(f64, f64)>) -> Self {
        let p = sampling_box.len();
        let constraints = sampling_box
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| {
                let a = Polynomial::var(p, i);
                Polynomial::constant(p, hi).sub(&a).mul(&a.sub(&Polynomial::constant(p, lo)))
            })
            .collect();
        SemialgebraicSet { nvars: p, constraints, sampling_box }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn constraints(&self) -> &[Polynomial] {
        &self.constraints
    }

    pub fn sampling_box(&self) -> &[(f64, f64)] {
        &self.sampling_box
    }

    pub fn center(&self) -> Vec<f64> {
        self.sampling_box.iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect()
    }

    pub fn contains(&self, alpha: &[f64], tol: f64) -> bool {
        self.constraints.iter().all(|q| q.eval(alpha) >= -tol)
    }

    /// Admissible points of the `per_dim^p` box grid, row-major (first
    /// parameter slowest).
    pub fn grid(&self, per_dim: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .sampling_box
            .iter()
            .map(|&(lo, hi)| {
                if per_dim <= 1 {
                    vec![0.5 * (lo + hi)]
                } else {
                    (0..per_dim).map(|k| lo + (hi - lo) * k as f64 / (per_dim - 1) as f64).collect()
                }
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        points.retain(|a| self.contains(a, ADMISSIBLE_TOL));
        points
    }

    /// The set restricted to its first `k` parameters: box projection and
    /// the constraints that only involve them.
    pub fn project(&self, k: usize) -> SemialgebraicSet {
        SemialgebraicSet {
            nvars: k,
            constraints: self.constraints.iter().filter_map(|q| q.resize_vars(k)).collect(),
            sampling_box: self.sampling_box[..k].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FixedStateSpace {
    pub time_domain: TimeDomain,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

impl FixedStateSpace {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    pub fn o(&self) -> usize {
        self.c.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct ParamStateSpace {
    pub time_domain: TimeDomain,
    pub a: PolyMatrix,
    pub b: PolyMatrix,
    pub c: PolyMatrix,
    pub d: PolyMatrix,
    pub param_set: SemialgebraicSet,
}

impl ParamStateSpace {
    pub fn new(
        time_domain: TimeDomain,
        a: PolyMatrix,
        b: PolyMatrix,
        c: PolyMatrix,
        d: PolyMatrix,
        param_set: SemialgebraicSet,
    ) -> Result<Self> {
        let (n, m, o) = (a.rows(), b.cols(), c.rows());
        let shapes = [(&a, (n, n), "A"), (&b, (n, m), "B"), (&c, (o, n), "C"), (&d, (o, m), "D")];
        for (mat, want, name) in shapes {
            if mat.shape() != want {
                return Err(Error::ShapeMismatch { op: name_op(name), left: mat.shape(), right: want });
            }
            if mat.nvars() != param_set.nvars() {
                return Err(Error::VarCountMismatch { expected: param_set.nvars(), got: mat.nvars() });
            }
        }
        Ok(ParamStateSpace { time_domain, a, b, c, d, param_set })
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.b.cols()
    }

    pub fn o(&self) -> usize {
        self.c.rows()
    }

    pub fn nvars(&self) -> usize {
        self.param_set.nvars()
    }

    pub fn evaluate(&self, alpha: &[f64]) -> Result<FixedStateSpace> {
        Ok(FixedStateSpace {
            time_domain: self.time_domain,
            a: self.a.evaluate(alpha)?,
            b: self.b.evaluate(alpha)?,
            c: self.c.evaluate(alpha)?,
            d: self.d.evaluate(alpha)?,
        })
    }

    /// Re-expresses all matrices over `nvars` variables with `set`.
    pub fn with_param_set(&self, set: SemialgebraicSet) -> Result<Self> {
        let k = set.nvars();
        let lift = |m: &PolyMatrix| {
            m.resize_vars(k).ok_or_else(|| Error::Config(format!("system uses parameters beyond the first {k}")))
        };
        ParamStateSpace::new(self.time_domain, lift(&self.a)?, lift(&self.b)?, lift(&self.c)?, lift(&self.d)?, set)
    }

    /// Worst spectral margin over `points` (see [`FixedStateSpace::stability_margin`]).
    pub fn worst_stability_margin(&self, points: &[Vec<f64>]) -> Result<(f64, Vec<f64>)> {
        let mut worst = (f64::NEG_INFINITY, Vec::new());
        for p in points {
            let m = self.evaluate(p)?.stability_margin();
            if m > worst.0 {
                worst = (m, p.clone());
            }
        }
        Ok(worst)
    }
}

fn name_op(name: &str) -> &'static str {
    match name {
        "A" => "A must be n x n",
        "B" => "B must be n x m",
        "C" => "C must be o x n",
        _ => "D must be o x m",
    }
}

/// First `p_prime` entries of `alpha`.
pub fn project_params(alpha: &[f64], p_prime: usize) -> Result<Vec<f64>> {
    if p_prime > alpha.len() {
        return Err(Error::Config(format!("p' = {p_prime} exceeds p = {}", alpha.len())));
    }
    Ok(alpha[..p_prime].to_vec())
}

/// Error system `G - G'`:
/// `A~ = diag(A, A')`, `B~ = [B; B']`, `C~ = [C, -C']`, `D~ = D - D'`, where
/// `G'` reads the first `p_prime` parameters of `G`.
pub fn augment(g: &ParamStateSpace, gp: &ParamStateSpace, p_prime: usize) -> Result<ParamStateSpace> {
    if g.time_domain != gp.time_domain {
        return Err(Error::TimeDomain("original and reduced systems differ in time domain".into()));
    }
    if p_prime > g.nvars() || gp.nvars() != p_prime {
        return Err(Error::VarCountMismatch { expected: p_prime, got: gp.nvars() });
    }
    if g.m() != gp.m() || g.o() != gp.o() {
        return Err(Error::ShapeMismatch { op: "augment", left: (g.o(), g.m()), right: (gp.o(), gp.m()) });
    }
    let p = g.nvars();
    let lift = |m: &PolyMatrix| m.resize_vars(p).expect("padding never fails");
    let (ap, bp, cp, dp) = (lift(&gp.a), lift(&gp.b), lift(&gp.c), lift(&gp.d));
    let (n, np) = (g.n(), gp.n());
    let a =
        PolyMatrix::blocks(&[vec![g.a.clone(), PolyMatrix::zeros(n, np, p)], vec![PolyMatrix::zeros(np, n, p), ap]])?;
    let b = PolyMatrix::blocks(&[vec![g.b.clone()], vec![bp]])?;
    let c = PolyMatrix::blocks(&[vec![g.c.clone(), cp.scale(-1.0)]])?;
    let d = g.d.sub(&dp)?;
    ParamStateSpace::new(g.time_domain, a, b, c, d, g.param_set.clone())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridPoint {
    pub alpha: Vec<f64>,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampledError {
    pub max_error: f64,
    pub argmax: Vec<f64>,
    pub table: Vec<GridPoint>,
}

/// Thread count for grid sweeps, capped by `PARS_REDUCE_THREADS`.
pub fn grid_threads() -> usize {
    let avail = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    match std::env::var("PARS_REDUCE_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(cap) if cap >= 1 => cap.min(avail),
        _ => avail,
    }
}

/// Maps `f` over `items` in parallel, order preserved.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    let threads = grid_threads();
    if threads <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Max of `||G(alpha) - G'(T alpha)||_inf` over the admissible grid.
pub fn sampled_sup_error(
    g: &ParamStateSpace,
    gp: &ParamStateSpace,
    p_prime: usize,
    per_dim: usize,
) -> Result<SampledError> {
    let err = augment(g, gp, p_prime)?;
    let points = g.param_set.grid(per_dim);
    if points.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let values = par_map(&points, |alpha| err.evaluate(alpha)?.hinf_norm(HINF_TOL));
    let mut table = Vec::with_capacity(points.len());
    let mut best: Option<(f64, usize)> = None;
    for (k, (alpha, v)) in points.into_iter().zip(values).enumerate() {
        let v = v.map_err(|e| match e {
            Error::Unstable { margin } => {
                Error::Numerical(format!("infinite H-inf norm at alpha = {alpha:?} (spectral margin {margin:e})"))
            }
            e => e,
        })?;
        if best.is_none_or(|(b, _)| v > b) {
            best = Some((v, k));
        }
        table.push(GridPoint { alpha, error: v });
    }
    let (max_error, k) = best.expect("non-empty grid");
    Ok(SampledError { max_error, argmax: table[k].alpha.clone(), table })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polymat::Monomial;
    use nalgebra::Complex;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn example_a() -> ParamStateSpace {
        let p = 2;
        let a = PolyMatrix::from_terms(
            2,
            2,
            p,
            vec![
                (Monomial::one(p), DMatrix::from_row_slice(2, 2, &[0.0, 0.1, 0.3, 0.0])),
                (Monomial::var(p, 0), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])),
                (Monomial::var(p, 1), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 0.5])),
            ],
        )
        .unwrap();
        let b = PolyMatrix::constant(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]), p);
        let c = PolyMatrix::constant(DMatrix::from_row_slice(1, 2, &[1.0, 0.0]), p);
        let d = PolyMatrix::zeros(1, 1, p);
        let set = SemialgebraicSet::from_box(vec![(-1.0, 1.0), (-1.0, 1.0)]);
        ParamStateSpace::new(TimeDomain::Discrete, a, b, c, d, set).unwrap()
    }

    fn reduced(a: PolyMatrix, b: &[f64], c: &[f64]) -> ParamStateSpace {
        let n = a.rows();
        let set = SemialgebraicSet::from_box(vec![(-1.0, 1.0)]);
        ParamStateSpace::new(
            TimeDomain::Discrete,
            a,
            PolyMatrix::constant(DMatrix::from_row_slice(n, 1, b), 1),
            PolyMatrix::constant(DMatrix::from_row_slice(1, n, c), 1),
            PolyMatrix::zeros(1, 1, 1),
            set,
        )
        .unwrap()
    }

    #[test]
    fn projection() {
        assert_eq!(project_params(&[1.0, 2.0, 3.0], 2).unwrap(), vec![1.0, 2.0]);
        assert_eq!(project_params(&[1.0, 2.0], 2).unwrap(), vec![1.0, 2.0]);
        assert!(project_params(&[1.0, 2.0], 0).unwrap().is_empty());
        assert!(project_params(&[1.0], 2).is_err());
    }

    #[test]
    fn grid_is_row_major_and_filtered() {
        let set = SemialgebraicSet::from_box(vec![(-1.0, 1.0), (0.0, 2.0)]);
        let g = set.grid(3);
        assert_eq!(g.len(), 9);
        assert_eq!(g[0], vec![-1.0, 0.0]);
        assert_eq!(g[1], vec![-1.0, 1.0]);
        assert_eq!(g[3], vec![0.0, 0.0]);
        let disk = SemialgebraicSet::new(
            2,
            vec![Polynomial::constant(2, 1.0)
                .sub(&Polynomial::var(2, 0).mul(&Polynomial::var(2, 0)))
                .sub(&Polynomial::var(2, 1).mul(&Polynomial::var(2, 1)))],
            vec![(-1.0, 1.0), (-1.0, 1.0)],
        )
        .unwrap();
        // corners excluded
        assert_eq!(disk.grid(3).len(), 5);
    }

    #[test]
    fn example_evaluates() {
        let g = example_a();
        let f = g.evaluate(&[1.0, 1.0]).unwrap();
        assert_eq!(f.a, DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.3, 0.5]));
    }

    #[test]
    fn self_augmentation_has_zero_error() {
        let g = example_a();
        let e = augment(&g, &g, 2).unwrap();
        assert_eq!(e.n(), 4);
        let f = e.evaluate(&[0.3, -0.2]).unwrap();
        assert!(f.response(0.7).iter().all(|z| z.norm() < 1e-12));
        let s = sampled_sup_error(&g, &g, 2, 5).unwrap();
        assert!(s.max_error <= 1e-8);
    }

    #[test]
    fn augmented_response_is_difference() {
        let g = example_a();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a1 =
            PolyMatrix::from_terms(1, 1, 1, vec![(Monomial::var(1, 0), DMatrix::from_element(1, 1, 0.5))]).unwrap();
        let gp = reduced(a1, &[-1.0], &[-1.0]);
        let e = augment(&g, &gp, 1).unwrap();
        assert_eq!((e.n(), e.m(), e.o()), (3, 1, 1));
        for _ in 0..10 {
            let alpha = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let w = rng.random_range(0.0..3.0);
            let lhs = e.evaluate(&alpha).unwrap().response(w);
            let rhs: DMatrix<Complex<f64>> =
                g.evaluate(&alpha).unwrap().response(w) - gp.evaluate(&alpha[..1]).unwrap().response(w);
            assert!((lhs - rhs).iter().all(|z| z.norm() < 1e-10));
        }
    }

    #[test]
    fn published_gramian_reductions() {
        // the printed -1.7e-1 is the symmetric balanced value -sqrt(0.03)
        let off = -(0.03f64).sqrt();
        let g = example_a();
        let p1 = |c0: f64| {
            PolyMatrix::from_terms(1, 1, 1, vec![(Monomial::var(1, 0), DMatrix::from_element(1, 1, c0))]).unwrap()
        };
        let a2 = PolyMatrix::from_terms(
            2,
            2,
            1,
            vec![
                (Monomial::one(1), DMatrix::from_row_slice(2, 2, &[0.0, off, off, 0.0])),
                (Monomial::var(1, 0), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0])),
            ],
        )
        .unwrap();
        let e2 = sampled_sup_error(&g, &reduced(a2, &[-1.0, 0.0], &[-1.0, 0.0]), 1, DEFAULT_GRID).unwrap();
        assert!((e2.max_error - 0.14).abs() <= 0.01, "{}", e2.max_error);
        let e1 = sampled_sup_error(&g, &reduced(p1(0.5), &[-1.0], &[-1.0]), 1, DEFAULT_GRID).unwrap();
        assert!((e1.max_error - 0.27).abs() <= 0.01, "{}", e1.max_error);
        assert_eq!(e1.table.len(), 441);
    }

    #[test]
    fn unstable_grid_point_is_reported() {
        let g = example_a();
        let a = PolyMatrix::constant(DMatrix::from_element(1, 1, 1.5), 1);
        assert!(sampled_sup_error(&g, &reduced(a, &[1.0], &[1.0]), 1, 3).is_err());
    }
}
