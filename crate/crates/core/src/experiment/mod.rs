//! Replicated experiments: plans, deterministic seeding, the results file,
//! summaries and figures.

mod config;
mod figures;
mod results;
mod summary;

pub use config::{set_acfs, ExperimentConfig, ExperimentPlan};
pub use figures::{boxplot_svg, emit_figures, log_ticks, sensitivity_svg};
pub use results::{read_results, ResultRow, RESULTS_HEADER};
pub use summary::{
    ablation_summary, comparisons, method_summaries, sensitivity_summary, write_summaries, AblationRow, Comparison,
    MethodSummary, SensitivityRow,
};

use crate::baselines::{run_cem_so, run_gp_bo, run_kde_so, run_sgd_cvar, BaselineConfig};
use crate::error::{Error, Result};
use crate::pipeline::{run_acfs, Ablation, AcfsConfig, Solution};
use crate::risk::{oracle_evaluate, RiskParams};
use crate::scenario::{Dgp, DgpKind, Simulator};
use crate::seed::derive_seed;
use rayon::prelude::*;
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::mpsc;
use std::sync::Arc;
use std::time::Instant;

pub const RESULTS_FILE: &str = "results.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const SENSITIVITY_FILE: &str = "sensitivity.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Acfs,
    GpBo,
    CemSo,
    SgdCvar,
    KdeSo,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Acfs, Method::GpBo, Method::CemSo, Method::SgdCvar, Method::KdeSo];

    pub fn label(self) -> &'static str {
        match self {
            Method::Acfs => "acfs",
            Method::GpBo => "gp-bo",
            Method::CemSo => "cem-so",
            Method::SgdCvar => "sgd-cvar",
            Method::KdeSo => "kde-so",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.label() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown method {s:?}")))
    }
}

/// Formats a penalty weight the same way in labels, seeds and the results file.
pub fn lambda_label(lambda: f64) -> String {
    format!("{lambda}")
}

#[derive(Debug, Clone)]
enum Runner {
    Acfs(Box<AcfsConfig>),
    Baseline(Method),
}

/// One (dgp, lambda, method, replication) cell.
#[derive(Debug, Clone)]
pub struct Job {
    pub dgp: DgpKind,
    pub lambda: f64,
    pub label: String,
    pub rep: usize,
    runner: Runner,
}

impl Job {
    fn key(&self) -> (String, String, String, usize) {
        (self.dgp.label().to_string(), lambda_label(self.lambda), self.label.clone(), self.rep)
    }
}

fn reps(cfg: &ExperimentConfig, full: usize, fixed: Option<usize>) -> usize {
    fixed.unwrap_or_else(|| cfg.plan.scaled_reps(full))
}

/// Main comparison grid. `fixed_reps` bypasses the desk divisor on the replication count.
pub fn main_jobs(cfg: &ExperimentConfig, fixed_reps: Option<usize>) -> Vec<Job> {
    let acfs = cfg.acfs_scaled();
    let mut jobs = Vec::new();
    for &dgp in &cfg.plan.dgps {
        for &lambda in &cfg.plan.lambdas {
            for &m in &cfg.plan.methods {
                for rep in 0..reps(cfg, cfg.plan.reps, fixed_reps) {
                    let runner = match m {
                        Method::Acfs => Runner::Acfs(Box::new(acfs.clone())),
                        other => Runner::Baseline(other),
                    };
                    jobs.push(Job { dgp, lambda, label: m.label().to_string(), rep, runner });
                }
            }
        }
    }
    jobs
}

pub fn ablation_label(variant: &str) -> String {
    if variant == "full" {
        "acfs".to_string()
    } else {
        format!("acfs-{variant}")
    }
}

pub fn ablation_jobs(cfg: &ExperimentConfig, fixed_reps: Option<usize>) -> Result<Vec<Job>> {
    let mut jobs = Vec::new();
    for &dgp in &cfg.plan.dgps {
        for v in &cfg.plan.ablation_variants {
            let a = Ablation::from_variant(v)?;
            let acfs = cfg.acfs_scaled().with_ablation(a);
            for rep in 0..reps(cfg, cfg.plan.ablation_reps, fixed_reps) {
                jobs.push(Job {
                    dgp,
                    lambda: cfg.plan.ablation_lambda,
                    label: ablation_label(v),
                    rep,
                    runner: Runner::Acfs(Box::new(acfs.clone())),
                });
            }
        }
    }
    Ok(jobs)
}

pub fn sensitivity_label(param: &str, value: f64) -> String {
    format!("acfs@{param}={value}")
}

/// One-at-a-time grid around the configured defaults.
pub fn sensitivity_jobs(cfg: &ExperimentConfig, fixed_reps: Option<usize>) -> Result<Vec<Job>> {
    let mut points = Vec::new();
    for (param, values) in &cfg.plan.sensitivity_grid {
        for &v in values {
            let mut c = cfg.acfs.clone();
            set_acfs(&mut c, param, &toml::Value::Float(v))
                .or_else(|_| set_acfs(&mut c, param, &toml::Value::Integer(v as i64)))?;
            let c = c.scaled(cfg.plan.scale_divisor);
            c.validate()?;
            points.push((sensitivity_label(param, v), c));
        }
    }
    let mut jobs = Vec::new();
    for &dgp in &cfg.plan.dgps {
        for (label, c) in &points {
            for rep in 0..reps(cfg, cfg.plan.sensitivity_reps, fixed_reps) {
                jobs.push(Job {
                    dgp,
                    lambda: cfg.plan.sensitivity_lambda,
                    label: label.clone(),
                    rep,
                    runner: Runner::Acfs(Box::new(c.clone())),
                });
            }
        }
    }
    Ok(jobs)
}

/// Seed of the method run in one cell.
pub fn run_seed(master: u64, dgp: DgpKind, lambda: f64, label: &str, rep: usize) -> u64 {
    derive_seed(master, &[dgp.label(), &lambda_label(lambda), label, &rep.to_string()])
}

/// Seed of the final scoring draws; shared by every method in a replication.
pub fn evaluation_seed(master: u64, dgp: DgpKind, lambda: f64, rep: usize) -> u64 {
    derive_seed(master, &[dgp.label(), &lambda_label(lambda), "evaluation", &rep.to_string()])
}

fn solve(
    job: &Job,
    sim: Arc<dyn Simulator>,
    params: RiskParams,
    baselines: &BaselineConfig,
    seed: u64,
) -> Result<Solution> {
    match &job.runner {
        Runner::Acfs(c) => run_acfs(sim, c, params, seed),
        Runner::Baseline(Method::GpBo) => run_gp_bo(sim, params, baselines, seed),
        Runner::Baseline(Method::CemSo) => run_cem_so(sim, params, baselines, seed),
        Runner::Baseline(Method::SgdCvar) => run_sgd_cvar(sim, params, baselines, seed),
        Runner::Baseline(Method::KdeSo) => run_kde_so(sim, params, baselines, seed),
        Runner::Baseline(Method::Acfs) => unreachable!("the main method is built as Runner::Acfs"),
    }
}

/// Runs one cell. Method failures become rows with a failure status.
pub fn execute(job: &Job, cfg: &ExperimentConfig) -> ResultRow {
    let plan = &cfg.plan;
    let seed = run_seed(plan.master_seed, job.dgp, job.lambda, &job.label, job.rep);
    let dgp = Dgp::new(job.dgp, cfg.constants.clone());
    let started = Instant::now();
    let outcome = RiskParams::new(job.lambda, plan.alpha).and_then(|params| {
        let sol = solve(job, Arc::new(dgp.clone()), params, &cfg.baselines_scaled(), seed)?;
        let eval = evaluation_seed(plan.master_seed, job.dgp, job.lambda, job.rep);
        let est = oracle_evaluate(&sol.x_star, &dgp, plan.eval_draws, params, eval, false)?;
        Ok((sol, est))
    });
    let seconds = if plan.timing { started.elapsed().as_secs_f64() } else { 0.0 };
    let mut row = ResultRow {
        dgp: job.dgp,
        lambda: job.lambda,
        method: job.label.clone(),
        rep: job.rep,
        seed,
        x: [f64::NAN; 6],
        oracle_j: f64::NAN,
        oracle_ec: f64::NAN,
        oracle_cvar: f64::NAN,
        oracle_calls: 0,
        seconds,
        status: String::new(),
    };
    match outcome {
        Ok((sol, est)) => {
            row.x = *sol.x_star.as_array();
            row.oracle_j = est.total;
            row.oracle_ec = est.expected_cost;
            row.oracle_cvar = est.cvar;
            row.oracle_calls = sol.oracle_calls;
            row.status = "ok".to_string();
        }
        Err(e) => row.status = format!("failed: {e}"),
    }
    row
}

/// Runs every job not already in `path`, appending rows in job order.
/// Returns the rows in the file afterwards.
pub fn run_jobs(jobs: &[Job], cfg: &ExperimentConfig, path: &Path) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let existing = if path.exists() { results::load_for_append(path)? } else { Vec::new() };
    let done: HashSet<_> = existing.iter().map(ResultRow::key).collect();
    let pending: Vec<&Job> = jobs.iter().filter(|j| !done.contains(&j.key())).collect();
    let mut writer = results::Appender::open(path, existing.is_empty())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.plan.workers)
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;

    let (tx, rx) = mpsc::channel::<(usize, ResultRow)>();
    let mut written = Vec::with_capacity(pending.len());
    std::thread::scope(|scope| -> Result<()> {
        let collector = scope.spawn(move || -> Result<Vec<ResultRow>> {
            // rows arrive in any order; they are written strictly in job order
            let mut buffer = BTreeMap::new();
            let mut next = 0;
            let mut out = Vec::new();
            for (i, row) in rx {
                buffer.insert(i, row);
                while let Some(row) = buffer.remove(&next) {
                    writer.append(&row)?;
                    out.push(row);
                    next += 1;
                }
            }
            Ok(out)
        });
        pool.install(|| {
            pending.par_iter().enumerate().for_each_with(tx, |tx, (i, job)| {
                let _ = tx.send((i, execute(job, cfg)));
            })
        });
        written = collector.join().expect("collector thread panicked")?;
        Ok(())
    })?;
    let mut all = existing;
    all.extend(written);
    Ok(all)
}
