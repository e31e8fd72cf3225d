//! Initial reduced models for the alternation.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ReductionConfig;
use crate::error::{Error, Result};
use crate::polymat::PolyMatrix;
use crate::psys::hinf::{spectral_abscissa, spectral_radius};
use crate::psys::lyap::balanced_projection;
use crate::psys::{ParamStateSpace, TimeDomain};

/// Parameter-truncated original: trailing parameters frozen at the box
/// center, degrees clipped, then (for `n' < n`) balanced truncation of the
/// nominal system applied to every coefficient.
pub fn truncated_model(g: &ParamStateSpace, cfg: &ReductionConfig) -> Result<ParamStateSpace> {
    let (p, pp) = (g.nvars(), cfg.p_prime);
    let center = g.param_set.center();
    let idx: Vec<usize> = (pp..p).collect();
    let vals: Vec<f64> = idx.iter().map(|&i| center[i]).collect();
    let d = &cfg.degrees;
    let mut a = g.a.substitute(&idx, &vals).truncate_degree(d.a);
    let mut b = g.b.substitute(&idx, &vals).truncate_degree(d.b);
    let mut c = g.c.substitute(&idx, &vals).truncate_degree(d.c);
    let dd = g.d.substitute(&idx, &vals).truncate_degree(d.d);
    if cfg.n_prime < g.n() {
        let nominal = g.evaluate(&center)?;
        if !nominal.is_stable() {
            return Err(Error::Numerical("nominal system at the box center is unstable".into()));
        }
        let (w, v, _) = balanced_projection(&nominal, cfg.n_prime)?;
        let (im, io) = (DMatrix::identity(g.m(), g.m()), DMatrix::identity(g.o(), g.o()));
        a = a.congruence(&w, &v)?;
        b = b.congruence(&w, &im)?;
        c = c.congruence(&io, &v)?;
    } else if cfg.n_prime > g.n() {
        return Err(Error::Config(format!("n' = {} exceeds n = {}", cfg.n_prime, g.n())));
    }
    let lift = |m: PolyMatrix| m.resize_vars(pp).expect("trailing parameters substituted");
    ParamStateSpace::new(g.time_domain, lift(a), lift(b), lift(c), lift(dd), g.param_set.project(pp))
}

/// Random constant stable model from a seeded generator.
pub fn random_model(g: &ParamStateSpace, cfg: &ReductionConfig) -> Result<ParamStateSpace> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (np, m, o, pp) = (cfg.n_prime, g.m(), g.o(), cfg.p_prime);
    let mut a = DMatrix::from_fn(np, np, |_, _| rng.random_range(-1.0..1.0));
    match g.time_domain {
        TimeDomain::Continuous => {
            let shift = spectral_abscissa(&a) + 1.0;
            a -= DMatrix::identity(np, np) * shift;
        }
        TimeDomain::Discrete => {
            let r = spectral_radius(&a).max(1e-12);
            a *= 0.5 / r;
        }
    }
    let b = DMatrix::from_fn(np, m, |_, _| rng.random_range(-1.0..1.0));
    let c = DMatrix::from_fn(o, np, |_, _| rng.random_range(-1.0..1.0));
    ParamStateSpace::new(
        g.time_domain,
        PolyMatrix::constant(a, pp),
        PolyMatrix::constant(b, pp),
        PolyMatrix::constant(c, pp),
        PolyMatrix::zeros(o, m, pp),
        g.param_set.project(pp),
    )
}
