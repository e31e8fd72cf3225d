//! Dense Lyapunov/Stein solvers and square-root balanced truncation.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{FixedStateSpace, TimeDomain};
use crate::error::{Error, Result};

fn vec(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

fn unvec(v: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let x = DMatrix::from_column_slice(n, n, v.as_slice());
    (&x + x.transpose()) * 0.5
}

/// Solves `A X + X A^T + Q = 0`.
pub fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let k = eye.kronecker(a) + a.kronecker(&eye);
    let x = k.lu().solve(&(-vec(q))).ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    Ok(unvec(&x, n))
}

/// Solves `A X A^T - X + Q = 0`.
pub fn stein(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let k = a.kronecker(a) - DMatrix::<f64>::identity(n * n, n * n);
    let x = k.lu().solve(&(-vec(q))).ok_or_else(|| Error::Numerical("singular Stein operator".into()))?;
    Ok(unvec(&x, n))
}

/// Controllability and observability Gramians of a stable system.
pub fn gramians(sys: &FixedStateSpace) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let bb = &sys.b * sys.b.transpose();
    let cc = sys.c.transpose() * &sys.c;
    match sys.time_domain {
        TimeDomain::Continuous => Ok((lyapunov(&sys.a, &bb)?, lyapunov(&sys.a.transpose(), &cc)?)),
        TimeDomain::Discrete => Ok((stein(&sys.a, &bb)?, stein(&sys.a.transpose(), &cc)?)),
    }
}

/// `L` with `L L^T = X` for symmetric PSD `X` (negative round-off clipped).
pub fn psd_sqrt_factor(x: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new((x + x.transpose()) * 0.5);
    let mut l = e.eigenvectors.clone();
    for (j, &lam) in e.eigenvalues.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        l.column_mut(j).scale_mut(s);
    }
    l
}

/// Square-root balanced truncation projections. Returns `(W, V, hsv)` with
/// `W` of shape `k x n`, `V` of shape `n x k`, `W V = I`, and the reduced
/// system `(W A V, W B, C V, D)`.
pub fn balanced_projection(sys: &FixedStateSpace, k: usize) -> Result<(DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let n = sys.n();
    if k > n {
        return Err(Error::Config(format!("cannot keep {k} of {n} states")));
    }
    let (wc, wo) = gramians(sys)?;
    let lc = psd_sqrt_factor(&wc);
    let lo = psd_sqrt_factor(&wo);
    let svd = (lo.transpose() * &lc).svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let hsv: Vec<f64> = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let mut w = DMatrix::zeros(k, n);
    let mut v = DMatrix::zeros(n, k);
    for (r, &i) in idx.iter().take(k).enumerate() {
        let s = svd.singular_values[i];
        if s <= 1e-13 * hsv[0].max(1e-300) {
            return Err(Error::Numerical("balanced truncation keeps a zero Hankel singular value".into()));
        }
        let f = 1.0 / s.sqrt();
        v.column_mut(r).copy_from(&(&lc * vt.row(i).transpose() * f));
        w.row_mut(r).copy_from(&(u.column(i).transpose() * lo.transpose() * f));
    }
    Ok((w, v, hsv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psys::hinf::spectral_radius;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn residuals_vanish() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut a = random(&mut rng, 4);
        a *= 0.8 / spectral_radius(&a);
        let q = random(&mut rng, 4);
        let q = &q * q.transpose();
        let x = stein(&a, &q).unwrap();
        assert!((&a * &x * a.transpose() - &x + &q).amax() < 1e-10);
        let ac = &a - DMatrix::identity(4, 4) * 2.0;
        let x = lyapunov(&ac, &q).unwrap();
        assert!((&ac * &x + &x * ac.transpose() + &q).amax() < 1e-10);
    }

    #[test]
    fn scalar_stein_closed_form() {
        let a = DMatrix::from_element(1, 1, 0.5);
        let q = DMatrix::from_element(1, 1, 1.0);
        assert!((stein(&a, &q).unwrap()[(0, 0)] - 1.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn balanced_projection_diagonalizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = random(&mut rng, 4);
        a *= 0.7 / spectral_radius(&a);
        let sys = FixedStateSpace {
            time_domain: TimeDomain::Discrete,
            a,
            b: DMatrix::from_fn(4, 1, |_, _| rng.random_range(-1.0..1.0)),
            c: DMatrix::from_fn(1, 4, |_, _| rng.random_range(-1.0..1.0)),
            d: DMatrix::zeros(1, 1),
        };
        let (w, v, hsv) = balanced_projection(&sys, 4).unwrap();
        assert!((&w * &v - DMatrix::<f64>::identity(4, 4)).amax() < 1e-8);
        let r = FixedStateSpace {
            time_domain: TimeDomain::Discrete,
            a: &w * &sys.a * &v,
            b: &w * &sys.b,
            c: &sys.c * &v,
            d: sys.d.clone(),
        };
        let (wc, wo) = gramians(&r).unwrap();
        let sig = DMatrix::from_diagonal(&DVector::from_vec(hsv));
        assert!((&wc - &sig).amax() < 1e-7);
        assert!((&wo - &sig).amax() < 1e-7);
    }
}
