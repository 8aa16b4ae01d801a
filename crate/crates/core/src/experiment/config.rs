use crate::baselines::BaselineConfig;
use crate::error::{Error, Result};
use crate::pipeline::{Ablation, AcfsConfig};
use crate::scenario::{CostConstants, DgpKind};
use crate::search::CrnMode;
use std::collections::BTreeMap;
use std::path::Path;
use toml::Value;

use super::Method;

/// What to run, independent of the optimiser settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub dgps: Vec<DgpKind>,
    pub lambdas: Vec<f64>,
    pub alpha: f64,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub master_seed: u64,
    pub eval_draws: usize,
    pub bootstrap_reps: usize,
    /// Divides replications and every sample or iteration budget.
    pub scale_divisor: usize,
    /// Worker threads; 0 lets the pool decide.
    pub workers: usize,
    /// Record wall-clock seconds; when off the column is written as 0.
    pub timing: bool,
    pub ablation_variants: Vec<String>,
    pub ablation_lambda: f64,
    pub ablation_reps: usize,
    pub sensitivity_grid: Vec<(String, Vec<f64>)>,
    pub sensitivity_lambda: f64,
    pub sensitivity_reps: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            dgps: vec![DgpKind::Dgp1, DgpKind::Dgp2],
            lambdas: vec![0.5, 0.7, 0.9],
            alpha: 0.95,
            methods: Method::ALL.to_vec(),
            reps: 100,
            master_seed: 20_240_601,
            eval_draws: 2000,
            bootstrap_reps: 400,
            scale_divisor: 1,
            workers: 0,
            timing: true,
            ablation_variants: Ablation::VARIANTS.iter().map(|s| s.to_string()).collect(),
            ablation_lambda: 0.7,
            ablation_reps: 50,
            sensitivity_grid: vec![
                ("n_a".into(), vec![800.0, 1200.0, 1600.0]),
                ("n_f".into(), vec![400.0, 800.0, 1200.0]),
                ("k_elites".into(), vec![2.0, 4.0, 6.0]),
                ("n_d".into(), vec![300.0, 450.0, 600.0]),
            ],
            sensitivity_lambda: 0.7,
            sensitivity_reps: 20,
        }
    }
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dgps.is_empty() || self.lambdas.is_empty() || self.methods.is_empty() {
            return bad("plan needs at least one dgp, lambda and method");
        }
        if self.reps == 0 || self.ablation_reps == 0 || self.sensitivity_reps == 0 {
            return bad("replication counts must be positive");
        }
        for l in self.lambdas.iter().chain([&self.ablation_lambda, &self.sensitivity_lambda]) {
            if !(*l >= 0.0 && l.is_finite()) {
                return bad("lambda must be finite and non-negative");
            }
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad("alpha must lie in (0, 1)");
        }
        if self.eval_draws < 2 || self.bootstrap_reps == 0 || self.scale_divisor == 0 {
            return bad("eval_draws, bootstrap_reps and scale_divisor must be positive");
        }
        for v in &self.ablation_variants {
            Ablation::from_variant(v).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }

    /// Replications after the desk divisor.
    pub fn scaled_reps(&self, reps: usize) -> usize {
        reps.div_ceil(self.scale_divisor).max(1)
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub plan: ExperimentPlan,
    pub acfs: AcfsConfig,
    pub baselines: BaselineConfig,
    pub constants: CostConstants,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Reads dotted keys under `plan.`, `acfs.`, `baselines.<method>.`,
    /// `sensitivity.` and `constants.`. Unknown keys are errors.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten(&table, "", &mut flat);
        let mut cfg = ExperimentConfig::default();
        let mut constants = BTreeMap::new();
        let mut grid: Option<Vec<(String, Vec<f64>)>> = None;
        for (key, value) in &flat {
            let (head, rest) = key.split_once('.').unwrap_or((key.as_str(), ""));
            match head {
                "plan" => set_plan(&mut cfg.plan, rest, value)?,
                "acfs" => set_acfs(&mut cfg.acfs, rest, value)?,
                "baselines" => set_baseline(&mut cfg.baselines, rest, value)?,
                "sensitivity" => {
                    let mut probe = AcfsConfig::default();
                    let values = reals(key, value)?;
                    for v in &values {
                        set_acfs(&mut probe, rest, &number(*v))?;
                    }
                    grid.get_or_insert_with(Vec::new).push((rest.to_string(), values));
                }
                "constants" => {
                    constants.insert(rest.to_string(), real(key, value)?);
                }
                _ => return Err(unknown(key)),
            }
        }
        if let Some(g) = grid {
            cfg.plan.sensitivity_grid = g;
        }
        if !constants.is_empty() {
            cfg.constants = CostConstants::default().with_overrides(&constants)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.plan.validate()?;
        self.acfs.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.baselines.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn acfs_scaled(&self) -> AcfsConfig {
        self.acfs.scaled(self.plan.scale_divisor)
    }

    pub fn baselines_scaled(&self) -> BaselineConfig {
        self.baselines.scaled(self.plan.scale_divisor)
    }
}

fn flatten(table: &toml::Table, prefix: &str, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(t, &key, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn unknown(key: &str) -> Error {
    Error::Config(format!("unknown configuration key {key:?}"))
}

fn number(v: f64) -> Value {
    if v.fract() == 0.0 && v.abs() < 9e15 {
        Value::Integer(v as i64)
    } else {
        Value::Float(v)
    }
}

fn real(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("{key}: expected a number"))),
    }
}

fn uint(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        Value::Float(f) if *f >= 0.0 && f.fract() == 0.0 => Ok(*f as usize),
        _ => Err(Error::Config(format!("{key}: expected a non-negative integer"))),
    }
}

fn boolean(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| Error::Config(format!("{key}: expected true or false")))
}

fn string(key: &str, v: &Value) -> Result<String> {
    v.as_str().map(str::to_string).ok_or_else(|| Error::Config(format!("{key}: expected a string")))
}

fn strings(key: &str, v: &Value) -> Result<Vec<String>> {
    match v {
        Value::Array(a) => a.iter().map(|x| string(key, x)).collect(),
        Value::String(s) => Ok(s.split(',').map(|p| p.trim().to_string()).collect()),
        _ => Err(Error::Config(format!("{key}: expected a list of strings"))),
    }
}

fn reals(key: &str, v: &Value) -> Result<Vec<f64>> {
    match v {
        Value::Array(a) => a.iter().map(|x| real(key, x)).collect(),
        other => Ok(vec![real(key, other)?]),
    }
}

fn set_plan(p: &mut ExperimentPlan, key: &str, v: &Value) -> Result<()> {
    let full = format!("plan.{key}");
    match key {
        "dgps" => p.dgps = strings(&full, v)?.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        "lambdas" => p.lambdas = reals(&full, v)?,
        "alpha" => p.alpha = real(&full, v)?,
        "methods" => p.methods = strings(&full, v)?.iter().map(|s| s.parse()).collect::<Result<_>>()?,
        "reps" => p.reps = uint(&full, v)?,
        "seed" => p.master_seed = uint(&full, v)? as u64,
        "eval_draws" => p.eval_draws = uint(&full, v)?,
        "bootstrap_reps" => p.bootstrap_reps = uint(&full, v)?,
        "scale_divisor" => p.scale_divisor = uint(&full, v)?,
        "workers" => p.workers = uint(&full, v)?,
        "timing" => p.timing = boolean(&full, v)?,
        "ablation_variants" => p.ablation_variants = strings(&full, v)?,
        "ablation_lambda" => p.ablation_lambda = real(&full, v)?,
        "ablation_reps" => p.ablation_reps = uint(&full, v)?,
        "sensitivity_lambda" => p.sensitivity_lambda = real(&full, v)?,
        "sensitivity_reps" => p.sensitivity_reps = uint(&full, v)?,
        _ => return Err(unknown(&full)),
    }
    Ok(())
}

/// Sets one optimiser field by name, as used in config files and sensitivity grids.
pub fn set_acfs(c: &mut AcfsConfig, key: &str, v: &Value) -> Result<()> {
    let full = format!("acfs.{key}");
    macro_rules! fields {
        ($($name:ident: $parse:ident),* $(,)?) => {
            match key {
                $(stringify!($name) => c.$name = $parse(&full, v)?,)*
                "crn_mode" => {
                    c.crn_mode = match string(&full, v)?.as_str() {
                        "common-normals" => CrnMode::CommonNormals,
                        "fixed-scenarios" => CrnMode::FixedScenarios,
                        other => return Err(Error::Config(format!("{full}: unknown mode {other:?}"))),
                    }
                }
                "no_cem" => c.ablation.no_cem = boolean(&full, v)?,
                "no_aug" => c.ablation.no_aug = boolean(&full, v)?,
                "no_rerank" => c.ablation.no_rerank = boolean(&full, v)?,
                "no_av" => c.ablation.no_av = boolean(&full, v)?,
                _ => return Err(unknown(&full)),
            }
        };
    }
    fields!(
        n_a: uint, n_b: uint, k_elites: uint, aug_radius: real, aug_ratio: real,
        grf_trees: uint, grf_min_node: uint, grf_mtry: uint, grf_sample_fraction: real,
        bandwidth_scale: real, kde_bandwidth: real,
        de_iters: uint, de_pop: uint, de_f: real, de_cr: real,
        n_c: uint, n_f: uint, n_d: uint,
        pool_de_top: uint, pool_perturb: uint, pool_perturb_sd: real, pool_lhd: uint, pool_cem: uint,
        shortlist: uint, n_seeds: uint, local_maxit: uint, fd_step: real,
        cem_iters: uint, cem_pop: uint, cem_mc: uint, cem_elite_frac: real, cem_smoothing: real,
        cem_seed_sd: real, cem_seed_frac: real, lhd_restarts: uint,
    );
    Ok(())
}

fn set_baseline(b: &mut BaselineConfig, key: &str, v: &Value) -> Result<()> {
    let full = format!("baselines.{key}");
    let (method, field) = key.split_once('.').ok_or_else(|| unknown(&full))?;
    macro_rules! fields {
        ($target:expr; $($name:ident: $parse:ident),* $(,)?) => {
            match field {
                $(stringify!($name) => $target.$name = $parse(&full, v)?,)*
                _ => return Err(unknown(&full)),
            }
        };
    }
    match method {
        "gp_bo" => fields!(b.gp_bo; n_init: uint, bo_steps: uint, mc: uint, refit_every: uint, n_candidates: uint,
            ei_polish_iters: uint, polish_mc: uint, polish_iters: uint),
        "cem_so" => fields!(b.cem_so; iters: uint, pop: uint, elite: real, smoothing: real, mc: uint, polish_mc: uint,
            polish_iters: uint),
        "sgd_cvar" => fields!(b.sgd_cvar; chains: uint, warm_iters: uint, fine_iters: uint, batch: uint, lr0: real,
            decay: real, fd_step: real, rescore_mc: uint, polish_mc: uint, polish_iters: uint),
        "kde_so" => fields!(b.kde_so; train: uint, bandwidth: real, de_mc: uint, de_iters: uint, de_pop: uint,
            starts: uint, local_iters: uint, final_mc: uint),
        _ => return Err(unknown(&full)),
    }
    Ok(())
}
