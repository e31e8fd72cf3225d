//! H-infinity norm of fixed (parameter-free) systems.
//!
//! Continuous systems use the Hamiltonian level-set iteration: at a level
//! `gamma` the imaginary eigenvalues of the Hamiltonian mark the frequencies
//! where `sigma_max(G(jw)) = gamma`, and the response evaluated between them
//! raises the lower bound until no crossing remains. Discrete systems are
//! mapped to continuous ones by the bilinear transform `z = (1 + s) / (1 - s)`,
//! which preserves the norm, and are cross-checked with a frequency sweep.

use nalgebra::{Complex, DMatrix};

use super::{FixedStateSpace, TimeDomain};
use crate::error::{Error, Result};

pub const STABILITY_MARGIN: f64 = 1e-9;
const SWEEP_POINTS: usize = 2048;

pub fn sigma_max_complex(m: &DMatrix<Complex<f64>>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex<f64>> {
    if a.is_empty() {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn spectral_abscissa(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max)
}

pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a).iter().map(|l| l.norm()).fold(0.0, f64::max)
}

impl FixedStateSpace {
    /// Stability margin: abscissa (continuous) or radius minus one (discrete).
    pub fn stability_margin(&self) -> f64 {
        if self.n() == 0 {
            return f64::NEG_INFINITY;
        }
        match self.time_domain {
            TimeDomain::Continuous => spectral_abscissa(&self.a),
            TimeDomain::Discrete => spectral_radius(&self.a) - 1.0,
        }
    }

    pub fn is_stable(&self) -> bool {
        self.stability_margin() < -STABILITY_MARGIN
    }

    /// Transfer matrix at frequency `w`: `s = jw` or `z = e^{jw}`.
    pub fn response(&self, w: f64) -> DMatrix<Complex<f64>> {
        let z = match self.time_domain {
            TimeDomain::Continuous => Complex::new(0.0, w),
            TimeDomain::Discrete => Complex::new(w.cos(), w.sin()),
        };
        self.response_at(z)
    }

    pub fn response_at(&self, z: Complex<f64>) -> DMatrix<Complex<f64>> {
        let d = self.d.map(|v| Complex::new(v, 0.0));
        let n = self.n();
        if n == 0 {
            return d;
        }
        let mut zi_a = self.a.map(|v| Complex::new(-v, 0.0));
        for i in 0..n {
            zi_a[(i, i)] += z;
        }
        let b = self.b.map(|v| Complex::new(v, 0.0));
        let c = self.c.map(|v| Complex::new(v, 0.0));
        match zi_a.lu().solve(&b) {
            Some(x) => c * x + d,
            None => DMatrix::from_element(self.o(), self.m(), Complex::new(f64::INFINITY, 0.0)),
        }
    }

    pub fn gain(&self, w: f64) -> f64 {
        sigma_max_complex(&self.response(w))
    }

    /// H-infinity norm to relative accuracy `tol`.
    pub fn hinf_norm(&self, tol: f64) -> Result<f64> {
        if !self.is_stable() && self.n() > 0 {
            return Err(Error::Unstable { margin: self.stability_margin() });
        }
        match self.time_domain {
            TimeDomain::Continuous => Ok(hinf_continuous(self, tol)),
            TimeDomain::Discrete => {
                let primary = hinf_continuous(&self.bilinear_to_continuous()?, tol);
                if cfg!(debug_assertions) {
                    let (sweep, _) = sweep_peak(self, SWEEP_POINTS);
                    if sweep > primary * (1.0 + 10.0 * tol) + 1e-12 {
                        log::warn!("discrete H-inf cross-check: level-set {primary:e} below sweep {sweep:e}");
                        return Ok(sweep);
                    }
                }
                Ok(primary)
            }
        }
    }

    /// Continuous system with the same H-infinity norm (bilinear transform).
    pub fn bilinear_to_continuous(&self) -> Result<FixedStateSpace> {
        if self.time_domain != TimeDomain::Discrete {
            return Err(Error::TimeDomain("bilinear transform expects a discrete system".into()));
        }
        let n = self.n();
        if n == 0 {
            return Ok(FixedStateSpace { time_domain: TimeDomain::Continuous, ..self.clone() });
        }
        let eye = DMatrix::<f64>::identity(n, n);
        let inv = (&self.a + &eye).try_inverse().ok_or_else(|| Error::Numerical("A + I is singular".into()))?;
        let s2 = std::f64::consts::SQRT_2;
        Ok(FixedStateSpace {
            time_domain: TimeDomain::Continuous,
            a: &inv * (&self.a - &eye),
            b: &inv * &self.b * s2,
            c: &self.c * &inv * s2,
            d: &self.d - &self.c * &inv * &self.b,
        })
    }
}

fn hamiltonian(sys: &FixedStateSpace, gamma: f64) -> Option<DMatrix<f64>> {
    let (n, m, o) = (sys.n(), sys.m(), sys.o());
    let r = DMatrix::<f64>::identity(m, m) * (gamma * gamma) - sys.d.transpose() * &sys.d;
    let rinv = r.cholesky()?.inverse();
    let f = &sys.a + &sys.b * &rinv * sys.d.transpose() * &sys.c;
    let g = &sys.b * &rinv * sys.b.transpose();
    let h = sys.c.transpose() * (DMatrix::<f64>::identity(o, o) + &sys.d * &rinv * sys.d.transpose()) * &sys.c;
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    out.view_mut((0, 0), (n, n)).copy_from(&f);
    out.view_mut((0, n), (n, n)).copy_from(&g);
    out.view_mut((n, 0), (n, n)).copy_from(&(-h));
    out.view_mut((n, n), (n, n)).copy_from(&(-f.transpose()));
    Some(out)
}

/// Nonnegative frequencies where the Hamiltonian at `gamma` has imaginary eigenvalues.
fn crossings(sys: &FixedStateSpace, gamma: f64) -> Vec<f64> {
    let Some(h) = hamiltonian(sys, gamma) else {
        return Vec::new();
    };
    let scale = 1.0 + h.amax();
    let mut w: Vec<f64> =
        eigenvalues(&h).into_iter().filter(|l| l.re.abs() <= 1e-8 * scale.max(l.norm())).map(|l| l.im.abs()).collect();
    w.sort_by(f64::total_cmp);
    w.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    w
}

fn hinf_continuous(sys: &FixedStateSpace, tol: f64) -> f64 {
    let dnorm = sigma_max(&sys.d);
    if sys.n() == 0 || sys.b.amax() == 0.0 || sys.c.amax() == 0.0 {
        return dnorm;
    }
    let poles = eigenvalues(&sys.a);
    let wp = poles
        .iter()
        .filter(|l| l.im != 0.0)
        .max_by(|a, b| {
            let ka = (a.im / a.re).abs() / a.norm();
            let kb = (b.im / b.re).abs() / b.norm();
            ka.total_cmp(&kb)
        })
        .map(|l| l.norm())
        .unwrap_or_else(|| poles.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min));
    let mut lb = dnorm.max(sys.gain(0.0)).max(sys.gain(wp));
    if lb == 0.0 {
        return 0.0;
    }
    for _ in 0..100 {
        let gamma = (1.0 + 2.0 * tol) * lb;
        let w = crossings(sys, gamma);
        if w.is_empty() {
            return (1.0 + tol) * lb;
        }
        let mut probes: Vec<f64> = w.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        probes.extend(&w);
        if w.len() == 1 {
            probes.push(0.0);
            probes.push(0.5 * w[0]);
        }
        let next = probes.iter().map(|&x| sys.gain(x)).fold(lb, f64::max);
        if next <= lb * (1.0 + 1e-14) {
            return (1.0 + tol) * lb;
        }
        lb = next;
    }
    lb
}

fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        }
        if hi - lo <= 1e-13 * (1.0 + hi.abs()) {
            break;
        }
    }
    if f1 > f2 {
        (f1, x1)
    } else {
        (f2, x2)
    }
}

/// Peak gain over a dense frequency grid with golden-section refinement of
/// the best local maxima. Discrete: uniform on `[0, pi]`; continuous:
/// logarithmic on `[1e-5, 1e5]` plus zero. Returns `(peak, frequency)`.
pub fn sweep_peak(sys: &FixedStateSpace, points: usize) -> (f64, f64) {
    let grid: Vec<f64> = match sys.time_domain {
        TimeDomain::Discrete => (0..points).map(|k| std::f64::consts::PI * k as f64 / (points - 1) as f64).collect(),
        TimeDomain::Continuous => std::iter::once(0.0)
            .chain((0..points).map(|k| 10f64.powf(-5.0 + 10.0 * k as f64 / (points - 1) as f64)))
            .collect(),
    };
    let vals: Vec<f64> = grid.iter().map(|&w| sys.gain(w)).collect();
    let mut best = (vals[0], grid[0]);
    let mut peaks: Vec<usize> = (0..grid.len())
        .filter(|&k| (k == 0 || vals[k] >= vals[k - 1]) && (k + 1 == grid.len() || vals[k] >= vals[k + 1]))
        .collect();
    peaks.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    for &k in peaks.iter().take(5) {
        if vals[k] > best.0 {
            best = (vals[k], grid[k]);
        }
        let lo = grid[k.saturating_sub(1)];
        let hi = grid[(k + 1).min(grid.len() - 1)];
        if hi > lo {
            let (v, w) = golden_max(|w| sys.gain(w), lo, hi);
            if v > best.0 {
                best = (v, w);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fixed(
        td: TimeDomain,
        a: &[f64],
        b: &[f64],
        c: &[f64],
        d: &[f64],
        n: usize,
        m: usize,
        o: usize,
    ) -> FixedStateSpace {
        FixedStateSpace {
            time_domain: td,
            a: DMatrix::from_row_slice(n, n, a),
            b: DMatrix::from_row_slice(n, m, b),
            c: DMatrix::from_row_slice(o, n, c),
            d: DMatrix::from_row_slice(o, m, d),
        }
    }

    pub(crate) fn random_stable(rng: &mut ChaCha8Rng, td: TimeDomain, n: usize, m: usize, o: usize) -> FixedStateSpace {
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        match td {
            TimeDomain::Continuous => {
                let shift = spectral_abscissa(&a) + rng.random_range(0.1..1.0);
                a -= DMatrix::identity(n, n) * shift;
            }
            TimeDomain::Discrete => {
                let r = spectral_radius(&a);
                a *= rng.random_range(0.3..0.95) / r;
            }
        }
        FixedStateSpace {
            time_domain: td,
            a,
            b: DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0)),
            c: DMatrix::from_fn(o, n, |_, _| rng.random_range(-1.0..1.0)),
            d: DMatrix::from_fn(o, m, |_, _| rng.random_range(-0.5..0.5)),
        }
    }

    #[test]
    fn first_order_lowpass() {
        let s = fixed(TimeDomain::Continuous, &[-1.0], &[1.0], &[1.0], &[0.0], 1, 1, 1);
        assert!((s.hinf_norm(1e-9).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn direct_feedthrough_only() {
        let s = fixed(TimeDomain::Continuous, &[-2.0], &[0.0, 0.0], &[1.0], &[3.0, 4.0], 1, 2, 1);
        assert!((s.hinf_norm(1e-9).unwrap() - 5.0).abs() < 1e-9);
        let e = FixedStateSpace {
            time_domain: TimeDomain::Discrete,
            a: DMatrix::zeros(0, 0),
            b: DMatrix::zeros(0, 1),
            c: DMatrix::zeros(1, 0),
            d: DMatrix::from_element(1, 1, -0.7),
        };
        assert!((e.hinf_norm(1e-9).unwrap() - 0.7).abs() < 1e-12);
    }

    #[test]
    fn unstable_is_rejected() {
        let s = fixed(TimeDomain::Continuous, &[0.1], &[1.0], &[1.0], &[0.0], 1, 1, 1);
        assert!(matches!(s.hinf_norm(1e-6), Err(Error::Unstable { .. })));
        let s = fixed(TimeDomain::Discrete, &[1.0], &[1.0], &[1.0], &[0.0], 1, 1, 1);
        assert!(matches!(s.hinf_norm(1e-6), Err(Error::Unstable { .. })));
    }

    #[test]
    fn discrete_first_order_peak() {
        // 1 / (z - 0.5) peaks at z = 1 with gain 2
        let s = fixed(TimeDomain::Discrete, &[0.5], &[1.0], &[1.0], &[0.0], 1, 1, 1);
        assert!((s.hinf_norm(1e-10).unwrap() - 2.0).abs() < 1e-8);
        // 1 / (z + 0.5) peaks at z = -1
        let s = fixed(TimeDomain::Discrete, &[-0.5], &[1.0], &[1.0], &[0.0], 1, 1, 1);
        assert!((s.hinf_norm(1e-10).unwrap() - 2.0).abs() < 1e-8);
    }

    #[test]
    fn lightly_damped_resonance() {
        // w0 = 10, zeta = 0.01: peak 1 / (2 zeta sqrt(1 - zeta^2)) / w0^2 * w0^2
        let (w0, z) = (10.0, 0.01);
        let s = fixed(
            TimeDomain::Continuous,
            &[0.0, 1.0, -w0 * w0, -2.0 * z * w0],
            &[0.0, w0 * w0],
            &[1.0, 0.0],
            &[0.0],
            2,
            1,
            1,
        );
        let want = 1.0 / (2.0 * z * (1.0f64 - z * z).sqrt());
        assert!((s.hinf_norm(1e-9).unwrap() - want).abs() < 1e-6 * want);
    }

    #[test]
    fn agrees_with_frequency_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for td in [TimeDomain::Continuous, TimeDomain::Discrete] {
            for k in 0..25 {
                let n = 1 + k % 4;
                let s = random_stable(&mut rng, td, n, 1 + k % 2, 1 + (k / 2) % 2);
                let h = s.hinf_norm(1e-10).unwrap();
                let (sw, _) = sweep_peak(&s, 8192);
                assert!(sw <= h * (1.0 + 1e-8) + 1e-12, "{td:?} sweep {sw} > {h}");
                assert!(h - sw <= 1e-6 * (1.0 + h), "{td:?} level-set {h} vs sweep {sw}");
            }
        }
    }

    #[test]
    fn output_scaling_is_homogeneous() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = random_stable(&mut rng, TimeDomain::Continuous, 3, 1, 1);
        let h = s.hinf_norm(1e-10).unwrap();
        let mut t = s.clone();
        t.c *= -3.0;
        t.d *= -3.0;
        assert!((t.hinf_norm(1e-10).unwrap() - 3.0 * h).abs() < 1e-6 * h);
    }
}
