//! Reduced-model search by alternating SOS programs and gamma bisection.
//!
//! With the reduced model fixed, the bounded-real identity is affine in the
//! storage function `P(alpha)` and the multipliers ([`step_p`]); with `P`
//! fixed it is affine in the model coefficients ([`step_model`]).
//! [`run_procedure`] alternates the two at a fixed level and
//! [`bisect_gamma`] searches the level.

pub mod blocks;
pub mod init;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polymat::{Monomial, PolyMatrix};
use crate::psys::{self, ParamStateSpace, SampledError};
use crate::sdp::{self, Residuals, SdpStatus, SolverOptions};
use crate::sos::{LinearForm, PolyExpr, SosProgram};
use blocks::{assert_bounded_real, scalar_identity, AugExpr, ModelVars, MultiplierSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Degrees {
    pub a: u32,
    pub b: u32,
    pub c: u32,
    pub d: u32,
    pub p: u32,
    pub q0: u32,
    /// One entry per constraint `q_l`, or a single entry used for all.
    pub q: Vec<u32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "camelCase", deny_unknown_fields)]
pub enum GammaSpec {
    Fixed {
        value: f64,
    },
    Bisect {
        lo: f64,
        hi: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InitStrategy {
    #[default]
    Truncate,
    Random,
}

/// What each subproblem asks the solver for.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StepObjective {
    /// Any point satisfying the identity at the probed level.
    Feasibility,
    /// Minimize `gamma^2` subject to `gamma` not exceeding the probed level.
    #[default]
    MinGamma,
}

/// Extracted coefficients below this fraction of the largest one are solver
/// noise on coefficients the identity forces to zero; they are dropped before
/// the next subproblem treats them as data.
pub const COEFF_NOISE: f64 = 1e-9;

fn d_delta() -> f64 {
    1e-4
}
fn d_epsilon() -> f64 {
    1e-6
}
fn d_outer() -> usize {
    20
}
fn d_alt() -> usize {
    30
}
fn d_grid() -> usize {
    psys::DEFAULT_GRID
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ReductionConfig {
    pub n_prime: usize,
    pub p_prime: usize,
    pub degrees: Degrees,
    #[serde(default = "d_delta")]
    pub delta: f64,
    #[serde(default = "d_epsilon")]
    pub epsilon: f64,
    pub gamma: GammaSpec,
    #[serde(default = "d_outer")]
    pub max_outer_iters: usize,
    #[serde(default = "d_alt")]
    pub max_alternations: usize,
    #[serde(default = "d_grid")]
    pub grid_per_dim: usize,
    #[serde(default)]
    pub init: InitStrategy,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub step_objective: StepObjective,
    #[serde(default)]
    pub solver: SolverOptions,
}

impl ReductionConfig {
    pub fn new(n_prime: usize, p_prime: usize, degrees: Degrees, gamma: GammaSpec) -> Self {
        ReductionConfig {
            n_prime,
            p_prime,
            degrees,
            delta: d_delta(),
            epsilon: d_epsilon(),
            gamma,
            max_outer_iters: d_outer(),
            max_alternations: d_alt(),
            grid_per_dim: d_grid(),
            init: InitStrategy::default(),
            seed: 0,
            step_objective: StepObjective::default(),
            solver: SolverOptions::default(),
        }
    }

    pub fn validate(&self, g: &ParamStateSpace) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        if g.m() == 0 || g.o() == 0 {
            return bad("systems without inputs or outputs cannot be reduced".into());
        }
        if self.n_prime == 0 {
            return bad("n' must be at least 1".into());
        }
        if self.n_prime > g.n() {
            return bad(format!("n' = {} exceeds n = {}", self.n_prime, g.n()));
        }
        if self.p_prime > g.nvars() {
            return bad(format!("p' = {} exceeds p = {}", self.p_prime, g.nvars()));
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive".into());
        }
        if !(self.epsilon >= 0.0) {
            return bad("epsilon must be nonnegative".into());
        }
        if self.grid_per_dim == 0 {
            return bad("grid must have at least one point per dimension".into());
        }
        let l = g.param_set.constraints().len();
        if !(self.degrees.q.len() == l || (self.degrees.q.len() == 1 && l > 0) || (self.degrees.q.is_empty() && l == 0))
        {
            return bad(format!("degrees.q has {} entries for {} constraints", self.degrees.q.len(), l));
        }
        match self.gamma {
            GammaSpec::Fixed { value } if !(value > 0.0) => bad("fixed gamma must be positive".into()),
            GammaSpec::Bisect { lo, hi, tol } => {
                if !(lo >= 0.0 && hi > lo) {
                    bad("gamma bounds need 0 <= lo < hi".into())
                } else if tol.is_some_and(|t| !(t > 0.0)) {
                    bad("gamma tolerance must be positive".into())
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn multipliers(&self, g: &ParamStateSpace) -> MultiplierSpec {
        let l = g.param_set.constraints().len();
        let d_q = if self.degrees.q.len() == l { self.degrees.q.clone() } else { vec![self.degrees.q[0]; l] };
        MultiplierSpec { epsilon: self.epsilon, d_q0: self.degrees.q0, d_q }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Subproblem {
    P,
    Model,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IterationRecord {
    pub probe: usize,
    pub step: usize,
    pub subproblem: Subproblem,
    pub gamma: f64,
    pub status: SdpStatus,
    pub residuals: Residuals,
    pub sdp_iterations: usize,
    /// Level reached by this step (`gamma` itself for feasibility steps).
    pub achieved_gamma: Option<f64>,
    /// Grid max of `||P - P_old||_2` (P steps after the first).
    pub p_change: Option<f64>,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub p: PolyMatrix,
    pub multipliers: Vec<PolyMatrix>,
    pub gamma: f64,
}

#[derive(Clone, Debug)]
pub struct StepReport {
    pub status: SdpStatus,
    pub residuals: Residuals,
    pub iterations: usize,
    pub message: String,
    pub achieved_gamma: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ReductionResult {
    pub reduced: ParamStateSpace,
    pub certificate: PolyMatrix,
    pub multipliers: Vec<PolyMatrix>,
    pub certified_gamma: f64,
    /// Bisection: the bracket closed within tolerance. Fixed level: the
    /// alternation met its `P`-change test.
    pub converged: bool,
    pub log: Vec<IterationRecord>,
    pub sampled: SampledError,
    /// `(gamma, certified)` for every level probed, in order.
    pub probes: Vec<(f64, bool)>,
}

/// Outcome of one fixed-level run.
#[derive(Clone, Debug)]
pub enum Procedure {
    Certified(Box<ReductionResult>),
    Infeasible { log: Vec<IterationRecord>, message: String },
}

struct GammaTerm {
    expr: PolyExpr,
    objective: Option<crate::sos::FreePolyMatrixVar>,
}

fn gamma_term(prog: &mut SosProgram, o: usize, gamma: f64, objective: StepObjective) -> Result<GammaTerm> {
    let nv = prog.nvars();
    match objective {
        StepObjective::Feasibility => {
            Ok(GammaTerm { expr: PolyExpr::from(&PolyMatrix::identity(o, nv).scale(gamma * gamma)), objective: None })
        }
        StepObjective::MinGamma => {
            let t = prog.declare_free_matrix("gamma^2", 1, 1, vec![Monomial::one(nv)]);
            let s = prog.declare_sos_matrix("gamma slack", 1, 0);
            let te = prog.free_expr(&t);
            let bound =
                te.add(&prog.sos_expr(&s))?.sub(&PolyExpr::from(&PolyMatrix::identity(1, nv).scale(gamma * gamma)))?;
            prog.assert_poly_eq(bound)?;
            let mut obj = LinearForm::new();
            obj.insert(t.scalar(0, 0, 0), 1.0);
            prog.set_objective(obj);
            Ok(GammaTerm { expr: scalar_identity(prog, &te, o)?, objective: Some(t) })
        }
    }
}

fn solve_program(prog: &SosProgram, cfg: &ReductionConfig) -> sdp::SdpSolution {
    let (problem, _) = prog.compile();
    sdp::solve(&problem, &cfg.solver)
}

fn report(sol: &sdp::SdpSolution, achieved: Option<f64>) -> StepReport {
    StepReport {
        status: sol.status,
        residuals: sol.residuals,
        iterations: sol.iterations,
        message: sol.message.clone(),
        achieved_gamma: achieved,
    }
}

fn achieved_gamma(prog: &SosProgram, sol: &sdp::SdpSolution, term: &GammaTerm, gamma: f64) -> Result<f64> {
    match &term.objective {
        None => Ok(gamma),
        Some(t) => {
            let v = prog.extract_free(sol, t)?.coeff(&Monomial::one(prog.nvars()))[(0, 0)];
            Ok(v.max(0.0).sqrt().min(gamma))
        }
    }
}

fn build_step_p(
    g: &ParamStateSpace,
    model: &ParamStateSpace,
    gamma: f64,
    cfg: &ReductionConfig,
) -> Result<(SosProgram, crate::sos::SosMatrixVar, GammaTerm, Vec<crate::sos::SosMatrixVar>)> {
    let err = psys::augment(g, model, cfg.p_prime)?;
    let mut prog = SosProgram::new(g.nvars());
    let pvar = prog.declare_sos_matrix("P", err.n(), cfg.degrees.p);
    let term = gamma_term(&mut prog, g.o(), gamma, cfg.step_objective)?;
    let pexpr = prog.sos_expr(&pvar);
    let mults = assert_bounded_real(&mut prog, g, &AugExpr::fixed(&err), &pexpr, &term.expr, &cfg.multipliers(g))?;
    Ok((prog, pvar, term, mults))
}

/// The compiled storage-function SDP for `model` at level `gamma`.
pub fn step_p_sdp(
    g: &ParamStateSpace,
    model: &ParamStateSpace,
    gamma: f64,
    cfg: &ReductionConfig,
) -> Result<sdp::SdpProblem> {
    Ok(build_step_p(g, model, gamma, cfg)?.0.compile().0)
}

/// Bounded-real LMI for a fixed system: is there `P >= 0` certifying
/// `||G||_inf <= gamma` with margin `epsilon`?
pub fn fixed_bounded_real(
    sys: &psys::FixedStateSpace,
    gamma: f64,
    epsilon: f64,
    solver: &SolverOptions,
) -> Result<sdp::SdpSolution> {
    let c = |m: &nalgebra::DMatrix<f64>| PolyMatrix::constant(m.clone(), 0);
    let g = ParamStateSpace::new(
        sys.time_domain,
        c(&sys.a),
        c(&sys.b),
        c(&sys.c),
        c(&sys.d),
        psys::SemialgebraicSet::from_box(vec![]),
    )?;
    let mut prog = SosProgram::new(0);
    let pvar = prog.declare_sos_matrix("P", g.n(), 0);
    let pexpr = prog.sos_expr(&pvar);
    let g2 = PolyExpr::from(&PolyMatrix::identity(g.o(), 0).scale(gamma * gamma));
    let spec = blocks::MultiplierSpec { epsilon, d_q0: 0, d_q: vec![] };
    assert_bounded_real(&mut prog, &g, &AugExpr::fixed(&g), &pexpr, &g2, &spec)?;
    Ok(sdp::solve(&prog.compile().0, solver))
}

/// Storage function and multipliers for a fixed reduced model.
pub fn step_p(
    g: &ParamStateSpace,
    model: &ParamStateSpace,
    gamma: f64,
    cfg: &ReductionConfig,
) -> Result<(Option<Certificate>, StepReport)> {
    let (prog, pvar, term, mults) = build_step_p(g, model, gamma, cfg)?;
    let sol = solve_program(&prog, cfg);
    if !sol.is_feasible() {
        return Ok((None, report(&sol, None)));
    }
    let achieved = achieved_gamma(&prog, &sol, &term, gamma)?;
    let cert = Certificate {
        p: prog.extract_sos(&sol, &pvar)?.prune_relative(COEFF_NOISE),
        multipliers: mults.iter().map(|v| prog.extract_sos(&sol, v)).collect::<Result<_>>()?,
        gamma: achieved,
    };
    Ok((Some(cert), report(&sol, Some(achieved))))
}

/// Reduced model (and multipliers) for a fixed storage function `P`.
pub fn step_model(
    g: &ParamStateSpace,
    p: &PolyMatrix,
    gamma: f64,
    cfg: &ReductionConfig,
) -> Result<(Option<(ParamStateSpace, Certificate)>, StepReport)> {
    let mut prog = SosProgram::new(g.nvars());
    let d = &cfg.degrees;
    let vars = ModelVars::declare(&mut prog, (cfg.n_prime, g.m(), g.o()), cfg.p_prime, [d.a, d.b, d.c, d.d]);
    let term = gamma_term(&mut prog, g.o(), gamma, cfg.step_objective)?;
    let aug = vars.augmented(&prog, g)?;
    let mults = assert_bounded_real(&mut prog, g, &aug, &PolyExpr::from(p), &term.expr, &cfg.multipliers(g))?;
    let sol = solve_program(&prog, cfg);
    if !sol.is_feasible() {
        return Ok((None, report(&sol, None)));
    }
    let pp = cfg.p_prime;
    let get = |v| -> Result<PolyMatrix> {
        prog.extract_free(&sol, v)?
            .prune_relative(COEFF_NOISE)
            .resize_vars(pp)
            .ok_or_else(|| Error::Numerical("model coefficient outside alpha'".into()))
    };
    let model = ParamStateSpace::new(
        g.time_domain,
        get(&vars.a)?,
        get(&vars.b)?,
        get(&vars.c)?,
        get(&vars.d)?,
        g.param_set.project(pp),
    )?;
    let achieved = achieved_gamma(&prog, &sol, &term, gamma)?;
    let cert = Certificate {
        p: p.clone(),
        multipliers: mults.iter().map(|v| prog.extract_sos(&sol, v)).collect::<Result<_>>()?,
        gamma: achieved,
    };
    Ok((Some((model, cert)), report(&sol, Some(achieved))))
}

/// `max_alpha ||X(alpha) - Y(alpha)||_2` over `points`.
pub fn grid_spectral_distance(x: &PolyMatrix, y: &PolyMatrix, points: &[Vec<f64>]) -> Result<f64> {
    let diff = x.sub(y)?;
    let mut worst: f64 = 0.0;
    for a in points {
        worst = worst.max(psys::hinf::sigma_max(&diff.evaluate(a)?));
    }
    Ok(worst)
}

pub fn initial_model(g: &ParamStateSpace, cfg: &ReductionConfig) -> Result<ParamStateSpace> {
    match cfg.init {
        InitStrategy::Truncate => init::truncated_model(g, cfg).or_else(|e| {
            log::warn!("truncation init failed ({e}); using random init");
            init::random_model(g, cfg)
        }),
        InitStrategy::Random => init::random_model(g, cfg),
    }
}

fn record(
    probe: usize,
    step: usize,
    sub: Subproblem,
    gamma: f64,
    r: &StepReport,
    p_change: Option<f64>,
) -> IterationRecord {
    IterationRecord {
        probe,
        step,
        subproblem: sub,
        gamma,
        status: r.status,
        residuals: r.residuals,
        sdp_iterations: r.iterations,
        achieved_gamma: r.achieved_gamma,
        p_change,
        message: r.message.clone(),
    }
}

fn check_stable(g: &ParamStateSpace, points: &[Vec<f64>]) -> Result<()> {
    let (margin, at) = g.worst_stability_margin(points)?;
    if margin >= -psys::hinf::STABILITY_MARGIN {
        return Err(Error::Config(format!("system is not stable on the grid (margin {margin:e} at alpha = {at:?})")));
    }
    Ok(())
}

fn run_inner(
    g: &ParamStateSpace,
    cfg: &ReductionConfig,
    gamma: f64,
    start: ParamStateSpace,
    probe: usize,
) -> Result<Procedure> {
    let points = g.param_set.grid(cfg.grid_per_dim);
    let mut log = Vec::new();
    let mut model = start;
    let mut best: Option<(ParamStateSpace, Certificate)> = None;
    let mut p_old: Option<PolyMatrix> = None;
    let mut converged = false;
    for step in 0..cfg.max_alternations {
        let (cert, rep) = step_p(g, &model, gamma, cfg)?;
        let Some(cert) = cert else {
            log.push(record(probe, step, Subproblem::P, gamma, &rep, None));
            if best.is_none() {
                let message = format!("first P step at gamma = {gamma}: {:?} ({})", rep.status, rep.message);
                return Ok(Procedure::Infeasible { log, message });
            }
            break;
        };
        let change = match &p_old {
            Some(old) => Some(grid_spectral_distance(&cert.p, old, &points)?),
            None => None,
        };
        log.push(record(probe, step, Subproblem::P, gamma, &rep, change));
        if best.as_ref().is_none_or(|(_, b)| cert.gamma <= b.gamma) {
            best = Some((model.clone(), cert.clone()));
        }
        if change.is_some_and(|c| c <= cfg.delta) {
            converged = true;
            break;
        }
        let (next, rep) = step_model(g, &cert.p, gamma, cfg)?;
        log.push(record(probe, step, Subproblem::Model, gamma, &rep, None));
        p_old = Some(cert.p);
        let Some((next_model, next_cert)) = next else {
            break;
        };
        if best.as_ref().is_none_or(|(_, b)| next_cert.gamma <= b.gamma) {
            best = Some((next_model.clone(), next_cert));
        }
        model = next_model;
    }
    let (reduced, cert) = best.expect("at least one certified pair");
    let sampled = psys::sampled_sup_error(g, &reduced, cfg.p_prime, cfg.grid_per_dim)?;
    Ok(Procedure::Certified(Box::new(ReductionResult {
        reduced,
        certificate: cert.p,
        multipliers: cert.multipliers,
        certified_gamma: cert.gamma,
        converged,
        log,
        sampled,
        probes: vec![(gamma, true)],
    })))
}

/// Alternation at a fixed level, starting from `start` or the configured
/// initialization.
pub fn run_procedure(
    g: &ParamStateSpace,
    cfg: &ReductionConfig,
    gamma: f64,
    start: Option<&ParamStateSpace>,
) -> Result<Procedure> {
    cfg.validate(g)?;
    check_stable(g, &g.param_set.grid(cfg.grid_per_dim))?;
    let start = match start {
        Some(m) => m.clone(),
        None => initial_model(g, cfg)?,
    };
    run_inner(g, cfg, gamma, start, 0)
}

/// Runs the configured level search: a single fixed-level run or bisection
/// with automatic doubling of the upper bound.
pub fn bisect_gamma(g: &ParamStateSpace, cfg: &ReductionConfig) -> Result<ReductionResult> {
    cfg.validate(g)?;
    check_stable(g, &g.param_set.grid(cfg.grid_per_dim))?;
    let init = initial_model(g, cfg)?;
    let (lo0, hi0, tol) = match cfg.gamma {
        GammaSpec::Fixed { value } => {
            return match run_inner(g, cfg, value, init, 0)? {
                Procedure::Certified(r) => Ok(*r),
                Procedure::Infeasible { message, .. } => Err(Error::Infeasible(message)),
            };
        }
        GammaSpec::Bisect { lo, hi, tol } => (lo, hi, tol),
    };
    let mut log = Vec::new();
    let mut probes = Vec::new();
    let mut hi = hi0;
    let mut probe = 0;
    let mut best = loop {
        let out = run_inner(g, cfg, hi, init.clone(), probe)?;
        probe += 1;
        match out {
            Procedure::Certified(r) => {
                probes.push((hi, true));
                log.extend(r.log.iter().cloned());
                break r;
            }
            Procedure::Infeasible { log: l, .. } => {
                probes.push((hi, false));
                log.extend(l);
                if hi >= hi0 * 1024.0 {
                    return Err(Error::BisectionCap(format!("no certificate up to gamma = {hi}")));
                }
                hi *= 2.0;
            }
        }
    };
    let tol = tol.unwrap_or(0.01 * hi);
    let mut lo = if probes.len() > 1 { hi / 2.0 } else { lo0 };
    hi = hi.min(best.certified_gamma);
    while hi - lo > tol && probe < cfg.max_outer_iters {
        let mid = 0.5 * (lo + hi);
        let out = run_inner(g, cfg, mid, best.reduced.clone(), probe)?;
        probe += 1;
        match out {
            Procedure::Certified(r) => {
                probes.push((mid, true));
                log.extend(r.log.iter().cloned());
                hi = mid.min(r.certified_gamma);
                best = r;
            }
            Procedure::Infeasible { log: l, .. } => {
                probes.push((mid, false));
                log.extend(l);
                lo = mid;
            }
        }
    }
    best.converged = hi - lo <= tol;
    best.log = log;
    best.probes = probes;
    Ok(*best)
}

#[cfg(test)]
mod tests;
