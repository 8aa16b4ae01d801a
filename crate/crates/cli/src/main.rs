use acfs_core::experiment::{
    ablation_jobs, emit_figures, main_jobs, run_jobs, sensitivity_jobs, write_summaries, ExperimentConfig, Method,
    ABLATION_FILE, RESULTS_FILE, SENSITIVITY_FILE,
};
use acfs_core::DgpKind;
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Benchmark harness for the spectral-risk optimisers.
#[derive(Parser)]
#[command(name = "acfs", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the method comparison and write results.csv.
    Run(Common),
    /// Summarise an existing results file.
    Summarize(Summarize),
    /// Run the full method and its four ablated variants.
    Ablation(Common),
    /// One-at-a-time parameter grid for the full method.
    Sensitivity(Common),
    /// Write SVG figures for whatever results exist in the output directory.
    Figures(Figures),
}

#[derive(Args)]
struct Common {
    /// TOML file with plan., acfs., baselines., sensitivity. and constants. keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated: dgp1, dgp2.
    #[arg(long, value_delimiter = ',')]
    dgp: Vec<DgpKind>,
    /// Comma-separated penalty weights.
    #[arg(long, value_delimiter = ',')]
    lambda: Vec<f64>,
    /// Comma-separated: acfs, gp-bo, cem-so, sgd-cvar, kde-so.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<Method>,
    /// Replications per cell, applied after the scale divisor.
    #[arg(long)]
    reps: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Desk profile: divide replications and every sample or iteration budget.
    #[arg(long)]
    scale_divisor: Option<usize>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write 0 in the seconds column so reruns are byte-identical.
    #[arg(long)]
    no_timing: bool,
}

#[derive(Args)]
struct Summarize {
    #[arg(long, default_value = "results")]
    out: PathBuf,
    /// Results file to read; defaults to OUT/results.csv.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Method the others are compared against.
    #[arg(long, default_value = "acfs")]
    reference: String,
    #[arg(long, default_value_t = 400)]
    bootstrap_reps: usize,
}

#[derive(Args)]
struct Figures {
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let plan = &mut cfg.plan;
    if !c.dgp.is_empty() {
        plan.dgps = c.dgp.clone();
    }
    if !c.lambda.is_empty() {
        plan.lambdas = c.lambda.clone();
        plan.ablation_lambda = c.lambda[0];
        plan.sensitivity_lambda = c.lambda[0];
    }
    if !c.methods.is_empty() {
        plan.methods = c.methods.clone();
    }
    if let Some(s) = c.seed {
        plan.master_seed = s;
    }
    if let Some(d) = c.scale_divisor {
        plan.scale_divisor = d;
    }
    if let Some(w) = c.workers {
        plan.workers = w;
    }
    if c.no_timing {
        plan.timing = false;
    }
    if c.reps == Some(0) {
        bail!("--reps must be positive");
    }
    cfg.validate()?;
    Ok(cfg)
}

fn report(path: &Path, bootstrap_reps: usize, reference: &str) -> Result<()> {
    let (files, text) =
        write_summaries(path, reference, bootstrap_reps).with_context(|| format!("summarising {}", path.display()))?;
    print!("{text}");
    for f in files {
        eprintln!("wrote {}", f.display());
    }
    Ok(())
}

fn execute(c: &Common, file: &str, which: &str) -> Result<()> {
    let cfg = load(c)?;
    let jobs = match which {
        "run" => main_jobs(&cfg, c.reps),
        "ablation" => ablation_jobs(&cfg, c.reps)?,
        _ => sensitivity_jobs(&cfg, c.reps)?,
    };
    std::fs::create_dir_all(&c.out).with_context(|| format!("creating {}", c.out.display()))?;
    let path = c.out.join(file);
    eprintln!("{} cells -> {}", jobs.len(), path.display());
    let t = Instant::now();
    let rows = run_jobs(&jobs, &cfg, &path)?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    eprintln!("{} rows ({failed} failed) in {:.1}s", rows.len(), t.elapsed().as_secs_f64());
    report(&path, cfg.plan.bootstrap_reps, "acfs")
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(c) => execute(&c, RESULTS_FILE, "run"),
        Command::Ablation(c) => execute(&c, ABLATION_FILE, "ablation"),
        Command::Sensitivity(c) => execute(&c, SENSITIVITY_FILE, "sensitivity"),
        Command::Summarize(s) => {
            let path = s.results.unwrap_or_else(|| s.out.join(RESULTS_FILE));
            report(&path, s.bootstrap_reps, &s.reference)
        }
        Command::Figures(f) => {
            for p in emit_figures(&f.out)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}
