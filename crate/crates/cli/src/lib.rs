//! Subcommands behind the `pars-reduce` binary.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use pars_reduce::gramian::{self, GramianOptions};
use pars_reduce::io::{self, ModelFile};
use pars_reduce::psys::{self, GridPoint, ParamStateSpace};
use pars_reduce::reduce::{self, GammaSpec, IterationRecord, ReductionConfig};
use pars_reduce::{sdp, Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "pars-reduce", version, about = "Parameter and state reduction of parameter-dependent linear systems")]
pub struct Cli {
    /// Log as JSON lines on stderr.
    #[arg(long, global = true)]
    pub json_log: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// SOS-certified reduction with gamma bisection.
    Reduce(ReduceArgs),
    /// Structured balanced truncation (discrete time, affine A).
    Baseline(BaselineArgs),
    /// Sampled worst-case H-inf distance between two models.
    Validate(ValidateArgs),
    /// Reduce and baseline side by side for each config.
    Compare(CompareArgs),
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub config: PathBuf,
    /// Report path; the reduced model goes next to it as `<stem>.reduced.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// Grid points per parameter for validation.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Bisection range `LO:HI[:TOL]`, overriding the config.
    #[arg(long, value_parser = parse_gamma)]
    pub gamma: Option<GammaSpec>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the first storage-function SDP in SDPA sparse format.
    #[arg(long)]
    pub dump_sdp: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BaselineArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Retained sizes per LFT block, e.g. `2,1,0` (state block first).
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["n_prime", "p_prime"])]
    pub keep: Option<Vec<usize>>,
    #[arg(long)]
    pub n_prime: Option<usize>,
    #[arg(long)]
    pub p_prime: Option<usize>,
    /// Gramian alternation options (JSON).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub grid: Option<usize>,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    /// Original model.
    #[arg(long)]
    pub model: PathBuf,
    /// Reduced model, reading the leading parameters of the original.
    #[arg(long)]
    pub against: PathBuf,
    #[arg(long)]
    pub grid: Option<usize>,
    /// Per-point error table.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, required = true, num_args = 1..)]
    pub config: Vec<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub grid: Option<usize>,
}

pub fn parse_gamma(s: &str) -> std::result::Result<GammaSpec, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}"));
    match parts.as_slice() {
        [lo, hi] => Ok(GammaSpec::Bisect { lo: num(lo)?, hi: num(hi)?, tol: None }),
        [lo, hi, tol] => Ok(GammaSpec::Bisect { lo: num(lo)?, hi: num(hi)?, tol: Some(num(tol)?) }),
        _ => Err(format!("expected LO:HI or LO:HI:TOL, got `{s}`")),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SampledSummary {
    pub max_error: f64,
    pub argmax: Vec<f64>,
    pub grid_per_dim: usize,
    pub p_prime: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Probe {
    pub gamma: f64,
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineDetails {
    pub block_sizes: Vec<usize>,
    pub keep: Vec<usize>,
    pub bound: f64,
    pub sigma: Vec<Vec<f64>>,
    pub objective_log: Vec<f64>,
    pub alternations: usize,
    pub converged: bool,
}

/// Everything a run produced. Only `timing` varies between identical runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certified_gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub baseline: Option<BaselineDetails>,
    pub converged: bool,
    pub sampled_error: SampledSummary,
    pub probes: Vec<Probe>,
    pub iterations: Vec<IterationRecord>,
    pub error_table: Vec<GridPoint>,
    pub reduced_model: ModelFile,
    pub timing: Timing,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Recomputes the sampled error of the embedded reduced model.
    pub fn revalidate(&self, g: &ParamStateSpace) -> Result<f64> {
        let gp = self.reduced_model.to_system()?;
        let s = &self.sampled_error;
        Ok(psys::sampled_sup_error(g, &gp, s.p_prime, s.grid_per_dim)?.max_error)
    }
}

/// Exit status contract: 0 certified/converged, 2 best effort, 1 error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    BestEffort,
}

impl Status {
    pub fn code(self) -> u8 {
        match self {
            Status::Ok => 0,
            Status::BestEffort => 2,
        }
    }

    fn from_converged(c: bool) -> Self {
        if c {
            Status::Ok
        } else {
            Status::BestEffort
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// `report.json` -> `report.reduced.json`.
pub fn reduced_model_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into());
    out.with_file_name(format!("{stem}.reduced.json"))
}

fn summary(s: &psys::SampledError, grid: usize, p_prime: usize) -> SampledSummary {
    SampledSummary { max_error: s.max_error, argmax: s.argmax.clone(), grid_per_dim: grid, p_prime }
}

pub fn load_reduce_config(args: &ReduceArgs) -> Result<ReductionConfig> {
    let mut cfg: ReductionConfig = read_json(&args.config)?;
    if let Some(g) = args.grid {
        cfg.grid_per_dim = g;
    }
    if let Some(gamma) = args.gamma {
        cfg.gamma = gamma;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

pub fn run_reduce(g: &ParamStateSpace, cfg: &ReductionConfig) -> Result<RunReport> {
    let start = Instant::now();
    let r = reduce::bisect_gamma(g, cfg)?;
    for rec in &r.log {
        log::info!("{}", serde_json::to_string(rec).unwrap_or_default());
    }
    Ok(RunReport {
        command: "reduce".into(),
        config: serde_json::to_value(cfg).expect("configs serialize"),
        certified_gamma: Some(r.certified_gamma),
        baseline: None,
        converged: r.converged,
        sampled_error: summary(&r.sampled, cfg.grid_per_dim, cfg.p_prime),
        probes: r.probes.iter().map(|&(gamma, certified)| Probe { gamma, certified }).collect(),
        iterations: r.log,
        error_table: r.sampled.table,
        reduced_model: ModelFile::from_system(&r.reduced),
        timing: Timing { seconds: start.elapsed().as_secs_f64() },
    })
}

pub fn cmd_reduce(args: &ReduceArgs) -> Result<Status> {
    let g = io::read_model(&args.model)?;
    let cfg = load_reduce_config(args)?;
    cfg.validate(&g)?;
    if let Some(path) = &args.dump_sdp {
        let gamma = match cfg.gamma {
            GammaSpec::Fixed { value } => value,
            GammaSpec::Bisect { hi, .. } => hi,
        };
        let init = reduce::initial_model(&g, &cfg)?;
        write_file(path, &sdp::sdpa::write(&reduce::step_p_sdp(&g, &init, gamma, &cfg)?))?;
    }
    let report = run_reduce(&g, &cfg)?;
    write_file(&args.out, &report.to_json())?;
    let reduced = report.reduced_model.to_system()?;
    write_file(&reduced_model_path(&args.out), &io::model_json(&reduced))?;
    println!(
        "certified gamma {:.6}  sampled error {:.6}  converged {}",
        report.certified_gamma.unwrap_or(f64::NAN),
        report.sampled_error.max_error,
        report.converged
    );
    Ok(Status::from_converged(report.converged))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct BaselineConfig {
    pub n_prime: Option<usize>,
    pub p_prime: Option<usize>,
    pub keep: Option<Vec<usize>>,
    pub grid_per_dim: Option<usize>,
    pub options: GramianOptions,
}

pub fn run_baseline(g: &ParamStateSpace, cfg: &BaselineConfig) -> Result<RunReport> {
    let start = Instant::now();
    let lft = gramian::lft_realize(g)?;
    let keep = match (&cfg.keep, cfg.n_prime, cfg.p_prime) {
        (Some(k), _, _) => k.clone(),
        (None, n, p) => {
            let mut k = lft.block_sizes.clone();
            k[0] = n.unwrap_or(g.n());
            for x in k.iter_mut().skip(1 + p.unwrap_or(g.nvars())) {
                *x = 0;
            }
            k
        }
    };
    let grams = gramian::solve_gramians(&lft, &cfg.options)?;
    let t = gramian::balance_and_truncate(g, &lft, &grams, &keep)?;
    let reduced = gramian::normalize_sign(&t.reduced);
    let grid = cfg.grid_per_dim.unwrap_or(psys::DEFAULT_GRID);
    let pr = reduced.nvars();
    let sampled = psys::sampled_sup_error(g, &reduced, pr, grid)?;
    let mut echo = cfg.clone();
    echo.keep = Some(keep.clone());
    echo.grid_per_dim = Some(grid);
    Ok(RunReport {
        command: "baseline".into(),
        config: serde_json::to_value(&echo).expect("configs serialize"),
        certified_gamma: None,
        baseline: Some(BaselineDetails {
            block_sizes: lft.block_sizes.clone(),
            keep,
            bound: t.bound,
            sigma: t.sigma.clone(),
            objective_log: grams.objective_log.clone(),
            alternations: grams.iterations,
            converged: grams.converged,
        }),
        converged: grams.converged,
        sampled_error: summary(&sampled, grid, pr),
        probes: vec![],
        iterations: vec![],
        error_table: sampled.table,
        reduced_model: ModelFile::from_system(&reduced),
        timing: Timing { seconds: start.elapsed().as_secs_f64() },
    })
}

pub fn cmd_baseline(args: &BaselineArgs) -> Result<Status> {
    let g = io::read_model(&args.model)?;
    let mut cfg: BaselineConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => BaselineConfig::default(),
    };
    if args.keep.is_some() {
        cfg.keep = args.keep.clone();
    }
    cfg.n_prime = args.n_prime.or(cfg.n_prime);
    cfg.p_prime = args.p_prime.or(cfg.p_prime);
    cfg.grid_per_dim = args.grid.or(cfg.grid_per_dim);
    let report = run_baseline(&g, &cfg)?;
    write_file(&args.out, &report.to_json())?;
    let reduced = report.reduced_model.to_system()?;
    write_file(&reduced_model_path(&args.out), &io::model_json(&reduced))?;
    let b = report.baseline.as_ref().expect("baseline details");
    println!("bound {:.6}  sampled error {:.6}  converged {}", b.bound, report.sampled_error.max_error, b.converged);
    Ok(Status::from_converged(report.converged))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationReport {
    pub max_error: f64,
    pub argmax: Vec<f64>,
    pub grid_per_dim: usize,
    pub table: Vec<GridPoint>,
}

pub fn run_validate(g: &ParamStateSpace, gp: &ParamStateSpace, grid: usize) -> Result<ValidationReport> {
    let s = psys::sampled_sup_error(g, gp, gp.nvars(), grid)?;
    Ok(ValidationReport { max_error: s.max_error, argmax: s.argmax, grid_per_dim: grid, table: s.table })
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<Status> {
    let g = io::read_model(&args.model)?;
    let gp = io::read_model(&args.against)?;
    let r = run_validate(&g, &gp, args.grid.unwrap_or(psys::DEFAULT_GRID))?;
    println!("maxError {:.9}  argmax {:?}", r.max_error, r.argmax);
    if let Some(out) = &args.out {
        write_file(out, &serde_json::to_string_pretty(&r).expect("reports serialize"))?;
    }
    Ok(Status::Ok)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompareRow {
    pub config: String,
    pub method: String,
    pub n_prime: usize,
    pub p_prime: usize,
    /// Certified gamma for the SOS method, a-priori bound for the baseline.
    pub guarantee: f64,
    pub sampled_error: f64,
    pub converged: bool,
    pub seconds: f64,
}

pub fn run_compare(g: &ParamStateSpace, configs: &[(String, ReductionConfig)]) -> Result<Vec<CompareRow>> {
    let mut rows = Vec::new();
    for (name, cfg) in configs {
        let r = run_reduce(g, cfg)?;
        rows.push(CompareRow {
            config: name.clone(),
            method: "sos".into(),
            n_prime: cfg.n_prime,
            p_prime: cfg.p_prime,
            guarantee: r.certified_gamma.unwrap_or(f64::NAN),
            sampled_error: r.sampled_error.max_error,
            converged: r.converged,
            seconds: r.timing.seconds,
        });
        let bcfg = BaselineConfig {
            n_prime: Some(cfg.n_prime),
            p_prime: Some(cfg.p_prime),
            grid_per_dim: Some(cfg.grid_per_dim),
            ..Default::default()
        };
        match run_baseline(g, &bcfg) {
            Ok(b) => rows.push(CompareRow {
                config: name.clone(),
                method: "gramian".into(),
                n_prime: cfg.n_prime,
                p_prime: cfg.p_prime,
                guarantee: b.baseline.as_ref().map_or(f64::NAN, |d| d.bound),
                sampled_error: b.sampled_error.max_error,
                converged: b.converged,
                seconds: b.timing.seconds,
            }),
            Err(e) => log::warn!("{name}: baseline skipped: {e}"),
        }
    }
    Ok(rows)
}

pub fn cmd_compare(args: &CompareArgs) -> Result<Status> {
    let g = io::read_model(&args.model)?;
    let mut configs = Vec::new();
    for p in &args.config {
        let mut cfg: ReductionConfig = read_json(p)?;
        if let Some(grid) = args.grid {
            cfg.grid_per_dim = grid;
        }
        configs.push((p.display().to_string(), cfg));
    }
    let rows = run_compare(&g, &configs)?;
    println!(
        "{:<28} {:<8} {:>3} {:>3} {:>12} {:>12} {:>9}",
        "config", "method", "n'", "p'", "gamma/bound", "sampled", "seconds"
    );
    for r in &rows {
        println!(
            "{:<28} {:<8} {:>3} {:>3} {:>12.6} {:>12.6} {:>9.2}",
            r.config, r.method, r.n_prime, r.p_prime, r.guarantee, r.sampled_error, r.seconds
        );
    }
    if let Some(out) = &args.out {
        write_file(out, &serde_json::to_string_pretty(&rows).expect("rows serialize"))?;
    }
    Ok(Status::from_converged(rows.iter().all(|r| r.converged)))
}

pub fn run(cli: &Cli) -> Result<Status> {
    match &cli.command {
        Command::Reduce(a) => cmd_reduce(a),
        Command::Baseline(a) => cmd_baseline(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Compare(a) => cmd_compare(a),
    }
}
