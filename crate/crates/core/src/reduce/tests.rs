use super::*;
use crate::catalog;
use crate::psys::TimeDomain;

fn illustrative_cfg(n_prime: usize, gamma: GammaSpec) -> ReductionConfig {
    let degrees = Degrees { a: 1, b: 1, c: 0, d: 0, p: 2, q0: 2, q: vec![0, 0] };
    ReductionConfig::new(n_prime, 1, degrees, gamma)
}

#[test]
fn config_validation() {
    let g = catalog::illustrative_discrete();
    let mut cfg = illustrative_cfg(2, GammaSpec::Fixed { value: 0.2 });
    assert!(cfg.validate(&g).is_ok());
    cfg.n_prime = 0;
    assert!(cfg.validate(&g).is_err());
    cfg.n_prime = 3;
    assert!(cfg.validate(&g).is_err());
    cfg.n_prime = 2;
    cfg.p_prime = 3;
    assert!(cfg.validate(&g).is_err());
    cfg.p_prime = 1;
    cfg.degrees.q = vec![0, 0, 0];
    assert!(cfg.validate(&g).is_err());
    cfg.degrees.q = vec![0];
    assert!(cfg.validate(&g).is_ok());
    cfg.gamma = GammaSpec::Bisect { lo: 0.3, hi: 0.2, tol: None };
    assert!(cfg.validate(&g).is_err());
}

#[test]
fn degenerate_io_is_rejected() {
    let g = catalog::illustrative_discrete();
    let p = g.nvars();
    let g0 = ParamStateSpace::new(
        g.time_domain,
        g.a.clone(),
        PolyMatrix::zeros(2, 0, p),
        g.c.clone(),
        PolyMatrix::zeros(1, 0, p),
        g.param_set.clone(),
    )
    .unwrap();
    let cfg = illustrative_cfg(2, GammaSpec::Fixed { value: 0.2 });
    assert!(matches!(cfg.validate(&g0), Err(Error::Config(_))));
}

#[test]
fn truncation_init_freezes_trailing_parameters() {
    let g = catalog::illustrative_discrete();
    let cfg = illustrative_cfg(2, GammaSpec::Fixed { value: 0.2 });
    let m = init::truncated_model(&g, &cfg).unwrap();
    assert_eq!(m.nvars(), 1);
    assert!(m.a.depends_only_on_prefix(1));
    let f = m.evaluate(&[0.4]).unwrap();
    let want = g.evaluate(&[0.4, 0.0]).unwrap();
    assert!((f.a - want.a).amax() < 1e-12);
    let cfg1 = illustrative_cfg(1, GammaSpec::Fixed { value: 0.2 });
    let m1 = init::truncated_model(&g, &cfg1).unwrap();
    assert_eq!(m1.n(), 1);
    assert!(m1.evaluate(&[0.0]).unwrap().is_stable());
}

#[test]
fn random_init_is_seeded() {
    let g = catalog::illustrative_discrete();
    let mut cfg = illustrative_cfg(2, GammaSpec::Fixed { value: 0.2 });
    cfg.seed = 42;
    let a = init::random_model(&g, &cfg).unwrap();
    let b = init::random_model(&g, &cfg).unwrap();
    assert_eq!(a.a, b.a);
    assert!(a.evaluate(&[0.0]).unwrap().is_stable());
}

#[test]
fn discrete_block_side() {
    let g = catalog::illustrative_discrete();
    let gp = catalog::illustrative_sos_n2();
    let p = PolyMatrix::identity(4, 2);
    let blk = blocks::build_discrete_blocks(&g, &gp, 1, &p, 1.0).unwrap();
    assert_eq!(blk.shape(), (10, 10));
    assert!(blk.is_symmetric(1e-12));
    assert!(blocks::build_continuous_blocks(&g, &gp, 1, &p, 1.0).is_err());
}

#[test]
fn exact_copy_is_certified_at_small_gamma() {
    let g = catalog::illustrative_discrete();
    let copy = g.clone();
    let degrees = Degrees { a: 1, b: 0, c: 0, d: 0, p: 0, q0: 2, q: vec![0, 0] };
    let cfg = ReductionConfig::new(2, 2, degrees, GammaSpec::Fixed { value: 0.1 });
    let (cert, rep) = step_p(&g, &copy, 0.1, &cfg).unwrap();
    assert_eq!(rep.status, SdpStatus::Feasible, "{}", rep.message);
    assert!(cert.is_some());
}

#[test]
fn unreachable_gamma_is_infeasible() {
    let g = catalog::illustrative_discrete();
    let cfg = illustrative_cfg(1, GammaSpec::Fixed { value: 0.001 });
    let m = init::truncated_model(&g, &cfg).unwrap();
    let (cert, rep) = step_p(&g, &m, 0.001, &cfg).unwrap();
    assert!(cert.is_none());
    assert_ne!(rep.status, SdpStatus::Feasible);
}

#[test]
fn step_model_accepts_previous_iterate() {
    let g = catalog::illustrative_discrete();
    let cfg = illustrative_cfg(1, GammaSpec::Fixed { value: 0.35 });
    let m = init::truncated_model(&g, &cfg).unwrap();
    let (cert, rep) = step_p(&g, &m, 0.35, &cfg).unwrap();
    let cert = cert.unwrap_or_else(|| panic!("{:?} {}", rep.status, rep.message));
    let (next, rep) = step_model(&g, &cert.p, 0.35, &cfg).unwrap();
    assert_eq!(rep.status, SdpStatus::Feasible, "{}", rep.message);
    let (model, _) = next.unwrap();
    assert!(model.a.depends_only_on_prefix(1));
    let err = psys::sampled_sup_error(&g, &model, 1, DEFAULT_TEST_GRID).unwrap();
    assert!(err.max_error <= 0.35 + 1e-6);
}

const DEFAULT_TEST_GRID: usize = 11;

#[test]
fn certified_runs_are_sound() {
    let g = catalog::illustrative_discrete();
    let mut cfg = illustrative_cfg(1, GammaSpec::Fixed { value: 0.3 });
    cfg.max_alternations = 3;
    cfg.grid_per_dim = DEFAULT_TEST_GRID;
    let Procedure::Certified(r) = run_procedure(&g, &cfg, 0.3, None).unwrap() else { panic!("expected certificate") };
    assert!(r.sampled.max_error <= r.certified_gamma + 1e-6);
    for a in g.param_set.grid(cfg.grid_per_dim) {
        assert!(sdp::min_eigenvalue(&r.certificate.evaluate(&a).unwrap()) >= -1e-7);
    }
    assert_eq!(r.reduced.time_domain, TimeDomain::Discrete);
}

// Oracle: substitute generic values for every decision scalar and count the
// (monomial, upper-triangle entry) pairs that stay nonzero.
#[test]
fn identity_row_count_matches_generic_evaluation() {
    use rand::{Rng, SeedableRng};
    let g = catalog::illustrative_discrete();
    let cfg = illustrative_cfg(2, GammaSpec::Fixed { value: 0.2 });
    let model = init::truncated_model(&g, &cfg).unwrap();
    let err = psys::augment(&g, &model, 1).unwrap();
    let mut prog = SosProgram::new(2);
    let pvar = prog.declare_sos_matrix("P", err.n(), cfg.degrees.p);
    let gamma = PolyExpr::from(&PolyMatrix::identity(1, 2).scale(0.04));
    let pexpr = prog.sos_expr(&pvar);
    assert_bounded_real(&mut prog, &g, &AugExpr::fixed(&err), &pexpr, &gamma, &cfg.multipliers(&g)).unwrap();
    let rows = prog.equality_count(crate::sos::ConstraintHandle(0));

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let values: Vec<f64> = (0..prog.scalar_count()).map(|_| rng.random_range(0.5..1.5)).collect();
    let numeric = prog.constraints()[0].evaluate_vars(|id| values[id]);
    let side = numeric.rows();
    assert_eq!(side, 2 * 4 + 1 + 1);
    let mut count = 0;
    for c in numeric.terms().values() {
        for i in 0..side {
            for j in i..side {
                if c[(i, j)].abs() > 1e-12 {
                    count += 1;
                }
            }
        }
    }
    assert_eq!(rows, count);
    // degree-3 identity in two parameters: at most 10 monomials per entry.
    assert!(rows <= 10 * side * (side + 1) / 2);
    assert_eq!(prog.compile().0.equalities.len(), rows);
}

#[test]
fn fixed_bounded_real_brackets_the_norm() {
    use crate::psys::FixedStateSpace;
    use nalgebra::DMatrix;
    let opts = SolverOptions::default();
    for td in [TimeDomain::Continuous, TimeDomain::Discrete] {
        let a = match td {
            TimeDomain::Continuous => DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -3.0]),
            TimeDomain::Discrete => DMatrix::from_row_slice(2, 2, &[0.5, 0.4, -0.2, 0.3]),
        };
        let sys = FixedStateSpace {
            time_domain: td,
            a,
            b: DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            c: DMatrix::from_row_slice(1, 2, &[1.0, 0.5]),
            d: DMatrix::from_element(1, 1, 0.1),
        };
        let h = sys.hinf_norm(1e-10).unwrap();
        let above = fixed_bounded_real(&sys, h + 1e-3, 1e-9, &opts).unwrap();
        assert!(above.is_feasible(), "{td:?} {}", above.message);
        let below = fixed_bounded_real(&sys, h - 1e-3, 1e-9, &opts).unwrap();
        assert!(!below.is_feasible(), "{td:?}");
    }
}
