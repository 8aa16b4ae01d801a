//! The four competing optimisers. Each consumes the process only through an
//! [`Oracle`], so its draws land in the same ledger format as the main method.

mod kde;

pub use kde::KdeSurrogate;

use crate::error::{domain, Error, Result};
use crate::forest::TrainingSet;
use crate::pipeline::Solution;
use crate::risk::{RiskEstimate, RiskParams};
use crate::scenario::{Decision, Oracle, Simulator};
use crate::search::gp::{gp_fit_with_floor, random_point, NOISE_FLOOR};
use crate::search::{
    adam_optimize, bounded_quasi_newton, cem_optimize, de_optimize, fd_gradient, gp_expected_improvement, maximin_lhd,
    AdamParams, CemParams, DeParams, DecisionSpace, Domain, FnObjective, GpModel, Population, QnParams,
    SmoothObjective,
};
use crate::seed::SeedTree;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

pub mod lines {
    pub const GP_INIT: &str = "gpbo.init";
    pub const GP_ACQ: &str = "gpbo.acq";
    pub const GP_POLISH: &str = "gpbo.polish";
    pub const CEM_SEARCH: &str = "cemso.search";
    pub const CEM_POLISH: &str = "cemso.polish";
    pub const SGD_WARM: &str = "sgd.warm";
    pub const SGD_RESCORE: &str = "sgd.rescore";
    pub const SGD_FINE: &str = "sgd.fine";
    pub const SGD_POLISH: &str = "sgd.polish";
    pub const KDE_TRAIN: &str = "kdeso.train";
    pub const KDE_FINAL: &str = "kdeso.final";
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpBoConfig {
    pub n_init: usize,
    pub bo_steps: usize,
    pub mc: usize,
    pub refit_every: usize,
    pub n_candidates: usize,
    /// Iterations of the local EI polish after the candidate scan.
    pub ei_polish_iters: usize,
    pub polish_mc: usize,
    pub polish_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CemSoConfig {
    pub iters: usize,
    pub pop: usize,
    pub elite: f64,
    pub smoothing: f64,
    pub mc: usize,
    pub polish_mc: usize,
    pub polish_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub chains: usize,
    pub warm_iters: usize,
    pub fine_iters: usize,
    pub batch: usize,
    pub lr0: f64,
    pub decay: f64,
    pub fd_step: f64,
    pub rescore_mc: usize,
    pub polish_mc: usize,
    pub polish_iters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KdeSoConfig {
    pub train: usize,
    pub bandwidth: f64,
    pub de_mc: usize,
    pub de_iters: usize,
    pub de_pop: usize,
    pub starts: usize,
    pub local_iters: usize,
    pub final_mc: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineConfig {
    pub gp_bo: GpBoConfig,
    pub cem_so: CemSoConfig,
    pub sgd_cvar: SgdConfig,
    pub kde_so: KdeSoConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            gp_bo: GpBoConfig {
                n_init: 18,
                bo_steps: 25,
                mc: 130,
                refit_every: 5,
                n_candidates: 2000,
                ei_polish_iters: 20,
                polish_mc: 520,
                polish_iters: 80,
            },
            cem_so: CemSoConfig {
                iters: 12,
                pop: 55,
                elite: 0.15,
                smoothing: 0.6,
                mc: 130,
                polish_mc: 520,
                polish_iters: 80,
            },
            sgd_cvar: SgdConfig {
                chains: 2,
                warm_iters: 80,
                fine_iters: 160,
                batch: 60,
                lr0: 0.05,
                decay: 0.01,
                fd_step: 1e-3,
                rescore_mc: 500,
                polish_mc: 500,
                polish_iters: 80,
            },
            kde_so: KdeSoConfig {
                train: 2600,
                bandwidth: 0.15,
                de_mc: 100,
                de_iters: 55,
                de_pop: 85,
                starts: 5,
                local_iters: 80,
                final_mc: 130,
            },
        }
    }
}

fn shrink(v: usize, d: usize) -> usize {
    v.div_ceil(d).max(1)
}

impl BaselineConfig {
    /// Divides sample sizes and iteration counts by `divisor`; the SGD
    /// batch and the GP design stay as they are.
    pub fn scaled(&self, divisor: usize) -> Self {
        if divisor <= 1 {
            return self.clone();
        }
        let d = divisor;
        let mut c = self.clone();
        c.gp_bo.bo_steps = shrink(self.gp_bo.bo_steps, d);
        c.gp_bo.mc = shrink(self.gp_bo.mc, d).max(2);
        c.gp_bo.polish_mc = shrink(self.gp_bo.polish_mc, d).max(2);
        c.cem_so.iters = shrink(self.cem_so.iters, d);
        c.cem_so.mc = shrink(self.cem_so.mc, d).max(2);
        c.cem_so.polish_mc = 4 * c.cem_so.mc;
        c.sgd_cvar.warm_iters = shrink(self.sgd_cvar.warm_iters, d);
        c.sgd_cvar.fine_iters = shrink(self.sgd_cvar.fine_iters, d);
        c.sgd_cvar.rescore_mc = shrink(self.sgd_cvar.rescore_mc, d).max(2);
        c.sgd_cvar.polish_mc = shrink(self.sgd_cvar.polish_mc, d).max(2);
        c.kde_so.train = shrink(self.kde_so.train, d).max(2);
        c.kde_so.de_mc = shrink(self.kde_so.de_mc, d).max(2);
        c.kde_so.de_iters = shrink(self.kde_so.de_iters, d);
        c.kde_so.de_pop = shrink(self.kde_so.de_pop, d).max(8);
        c.kde_so.final_mc = shrink(self.kde_so.final_mc, d).max(2);
        c
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.gp_bo;
        let c = &self.cem_so;
        let s = &self.sgd_cvar;
        let k = &self.kde_so;
        let counts = [
            ("gp_bo.n_init", g.n_init),
            ("gp_bo.bo_steps", g.bo_steps),
            ("gp_bo.refit_every", g.refit_every),
            ("gp_bo.n_candidates", g.n_candidates),
            ("cem_so.iters", c.iters),
            ("cem_so.pop", c.pop),
            ("sgd_cvar.chains", s.chains),
            ("sgd_cvar.warm_iters", s.warm_iters),
            ("sgd_cvar.batch", s.batch),
            ("kde_so.de_iters", k.de_iters),
            ("kde_so.starts", k.starts),
        ];
        for (name, v) in counts {
            if v == 0 {
                return domain(format!("{name} must be positive"));
            }
        }
        let draws = [
            ("gp_bo.mc", g.mc),
            ("gp_bo.polish_mc", g.polish_mc),
            ("cem_so.mc", c.mc),
            ("cem_so.polish_mc", c.polish_mc),
            ("sgd_cvar.rescore_mc", s.rescore_mc),
            ("sgd_cvar.polish_mc", s.polish_mc),
            ("kde_so.train", k.train),
            ("kde_so.de_mc", k.de_mc),
            ("kde_so.final_mc", k.final_mc),
        ];
        for (name, v) in draws {
            if v < 2 {
                return domain(format!("{name} needs at least two draws"));
            }
        }
        if g.n_init < 2 {
            return domain("gp_bo.n_init must be at least 2");
        }
        if c.polish_mc != 4 * c.mc {
            return domain("cem_so.polish_mc must be four times cem_so.mc");
        }
        if !(c.elite > 0.0 && c.elite <= 1.0) || c.elite * (c.pop as f64) < 1.0 - 1e-9 {
            return domain("cem_so.elite must leave at least one elite");
        }
        if !(0.0..=1.0).contains(&c.smoothing) {
            return domain("cem_so.smoothing must lie in [0, 1]");
        }
        if k.de_pop < 4 {
            return domain("kde_so.de_pop must be at least 4");
        }
        for (name, v) in [("sgd_cvar.lr0", s.lr0), ("sgd_cvar.fd_step", s.fd_step), ("kde_so.bandwidth", k.bandwidth)] {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{name} must be positive"));
            }
        }
        if !(s.decay >= 0.0) {
            return domain("sgd_cvar.decay must be non-negative");
        }
        Ok(())
    }
}

/// Estimates from fresh, independent draws at every call.
struct PlainObjective<'a> {
    oracle: &'a Oracle,
    n: usize,
    params: RiskParams,
    seeds: SeedTree,
    calls: u64,
    line: &'a str,
    seen: Vec<(Vec<f64>, RiskEstimate)>,
    failure: Option<Error>,
}

impl PlainObjective<'_> {
    fn eval(&mut self, p: &[f64]) -> f64 {
        let x = DecisionSpace::new().decision(p);
        let s = self.seeds.index(self.calls).value();
        self.calls += 1;
        match self.oracle.evaluate(&x, self.n, s, false, self.params, self.line) {
            Ok(e) => {
                self.seen.push((p.to_vec(), e));
                e.total
            }
            Err(e) => {
                self.failure.get_or_insert(e);
                f64::NAN
            }
        }
    }
}

impl SmoothObjective for PlainObjective<'_> {
    fn value(&mut self, p: &[f64]) -> f64 {
        self.eval(p)
    }

    fn gradient(&mut self, p: &[f64]) -> Vec<f64> {
        let space = DecisionSpace::new();
        fd_gradient(|q| self.eval(q), p, 1e-3, &space)
    }
}

/// Bounded quasi-Newton on independent `n`-draw estimates. Returns the best
/// point found and the estimate that ranked it.
fn polish(
    oracle: &Oracle,
    x0: &Decision,
    n: usize,
    max_iter: usize,
    params: RiskParams,
    seed: u64,
    line: &str,
) -> Result<(Decision, RiskEstimate)> {
    let mut obj = PlainObjective {
        oracle,
        n,
        params,
        seeds: SeedTree::new(seed),
        calls: 0,
        line,
        seen: Vec::new(),
        failure: None,
    };
    let res = bounded_quasi_newton(&mut obj, x0.as_array(), &DecisionSpace::new(), &QnParams::with_max_iter(max_iter));
    if let Some(e) = obj.failure {
        return Err(e);
    }
    let res = res?;
    let est = obj
        .seen
        .iter()
        .rev()
        .find(|(p, e)| *p == res.x && e.total.to_bits() == res.f.to_bits())
        .map(|(_, e)| *e)
        .ok_or_else(|| Error::Numerical("polish lost track of its best estimate".into()))?;
    Ok((DecisionSpace::new().decision(&res.x), est))
}

fn finish(
    x: Decision,
    est: RiskEstimate,
    oracle: &Oracle,
    start: Instant,
    diagnostics: BTreeMap<String, f64>,
) -> Solution {
    Solution::assemble(x, est, oracle, vec![("total".to_string(), start.elapsed().as_secs_f64())], diagnostics)
}

/// Acquisition indices (1-based) after which the hyperparameters are refitted.
pub fn refit_schedule(bo_steps: usize, every: usize) -> Vec<usize> {
    (1..=bo_steps).filter(|t| every > 0 && t % every == 0).collect()
}

const GP_FIT_ATTEMPTS: usize = 3;

fn fit_gp(x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<GpModel> {
    let mut floor = NOISE_FLOOR;
    let mut last = None;
    for attempt in 0..GP_FIT_ATTEMPTS {
        match gp_fit_with_floor(x, y, SeedTree::new(seed).index(attempt as u64).value(), floor) {
            Ok(m) => return Ok(m),
            Err(e) => last = Some(e),
        }
        floor *= 1e3;
    }
    Err(Error::Numerical(format!(
        "GP fit failed after {GP_FIT_ATTEMPTS} attempts: {}",
        last.map(|e| e.to_string()).unwrap_or_default()
    )))
}

/// Gaussian-process Bayesian optimisation with expected improvement.
pub fn run_gp_bo(sim: Arc<dyn Simulator>, params: RiskParams, cfg: &BaselineConfig, seed: u64) -> Result<Solution> {
    cfg.validate()?;
    let g = &cfg.gp_bo;
    let start = Instant::now();
    let oracle = Oracle::new(sim);
    let space = DecisionSpace::new();
    let root = SeedTree::new(seed).child("gp-bo");
    let evals = root.child("evals");
    let mut k = 0u64;
    let mut evaluate = |p: &[f64], line: &str| -> Result<f64> {
        let s = evals.index(k).value();
        k += 1;
        Ok(oracle.evaluate(&space.decision(p), g.mc, s, false, params, line)?.total)
    };

    let mut xs = maximin_lhd(g.n_init, &space, root.child("lhd").value(), 5);
    let mut ys = Vec::with_capacity(g.n_init + g.bo_steps);
    for p in &xs {
        ys.push(evaluate(p, lines::GP_INIT)?);
    }
    let mut model = fit_gp(&xs, &ys, root.child("fit").index(0).value())?;
    let refits = refit_schedule(g.bo_steps, g.refit_every);
    let mut cand_rng = root.child("candidates").rng();
    for t in 1..=g.bo_steps {
        let best_y = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        let cands: Vec<Vec<f64>> =
            (0..g.n_candidates).map(|_| space.projected(&random_point(space.bounds(), &mut cand_rng))).collect();
        let ei = gp_expected_improvement(&model, &cands, best_y);
        let top = crate::search::argmin(&ei.iter().map(|v| -v).collect::<Vec<_>>());
        let neg_ei = |p: &[f64]| -gp_expected_improvement(&model, &[p.to_vec()], best_y)[0];
        let mut obj = FnObjective::new(neg_ei, |p: &[f64]| fd_gradient(neg_ei, p, 1e-5, &space));
        let chosen =
            match bounded_quasi_newton(&mut obj, &cands[top], &space, &QnParams::with_max_iter(g.ei_polish_iters)) {
                Ok(r) if r.f <= -ei[top] => r.x,
                _ => cands[top].clone(),
            };
        ys.push(evaluate(&chosen, lines::GP_ACQ)?);
        xs.push(chosen);
        model = if refits.contains(&t) {
            fit_gp(&xs, &ys, root.child("fit").index(t as u64).value())?
        } else {
            match GpModel::with_hyper(&xs, &ys, model.hyper().clone()) {
                Ok(m) => m,
                Err(_) => fit_gp(&xs, &ys, root.child("fit").index(t as u64).value())?,
            }
        };
    }
    let best = crate::search::argmin(&ys);
    let (x, est) = polish(
        &oracle,
        &space.decision(&xs[best]),
        g.polish_mc,
        g.polish_iters,
        params,
        root.child("polish").value(),
        lines::GP_POLISH,
    )?;
    let mut diag = BTreeMap::new();
    diag.insert("gpbo.evaluations".to_string(), ys.len() as f64);
    diag.insert("gpbo.refits".to_string(), refits.len() as f64);
    Ok(finish(x, est, &oracle, start, diag))
}

/// Cross-entropy search on direct estimates, then a polish.
pub fn run_cem_so(sim: Arc<dyn Simulator>, params: RiskParams, cfg: &BaselineConfig, seed: u64) -> Result<Solution> {
    cfg.validate()?;
    let c = &cfg.cem_so;
    let start = Instant::now();
    let oracle = Oracle::new(sim);
    let space = DecisionSpace::new();
    let root = SeedTree::new(seed).child("cem-so");
    let evals = root.child("evals");
    let mut k = 0u64;
    let mut failure = None;
    let objective = |p: &[f64]| {
        let s = evals.index(k).value();
        k += 1;
        match oracle.evaluate(&space.decision(p), c.mc, s, false, params, lines::CEM_SEARCH) {
            Ok(e) => e.total,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        }
    };
    let cp = CemParams::new(c.iters, c.pop, c.elite, c.smoothing);
    let res = cem_optimize(objective, &space, &cp, root.child("cem").value())?;
    if let Some(e) = failure {
        return Err(e);
    }
    let (x, est) = polish(
        &oracle,
        &space.decision(&res.mean),
        c.polish_mc,
        c.polish_iters,
        params,
        root.child("polish").value(),
        lines::CEM_POLISH,
    )?;
    let mut diag = BTreeMap::new();
    diag.insert("cemso.elite".to_string(), cp.n_elite() as f64);
    Ok(finish(x, est, &oracle, start, diag))
}

/// Adam on finite-difference mini-batch gradients: warm chains, a longer
/// run from the better one, then a polish.
pub fn run_sgd_cvar(sim: Arc<dyn Simulator>, params: RiskParams, cfg: &BaselineConfig, seed: u64) -> Result<Solution> {
    cfg.validate()?;
    let s = &cfg.sgd_cvar;
    let start = Instant::now();
    let oracle = Oracle::new(sim);
    let space = DecisionSpace::new();
    let root = SeedTree::new(seed).child("sgd-cvar");
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let batch_obj = |line: &'static str| {
        let (oracle, failure, space) = (&oracle, &failure, &space);
        move |p: &[f64], n: usize, bseed: u64| match oracle.evaluate(&space.decision(p), n, bseed, false, params, line)
        {
            Ok(e) => e.total,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                f64::NAN
            }
        }
    };
    let adam = |iters: usize| AdamParams {
        n_iters: iters,
        lr0: s.lr0,
        decay: s.decay,
        batch_size: s.batch,
        fd_step: s.fd_step,
        ..AdamParams::default()
    };

    let starts = maximin_lhd(s.chains, &space, root.child("starts").value(), 5);
    let mut ends = Vec::with_capacity(s.chains);
    for (i, x0) in starts.iter().enumerate() {
        ends.push(adam_optimize(
            batch_obj(lines::SGD_WARM),
            x0,
            &adam(s.warm_iters),
            root.child("chain").index(i as u64).value(),
            &space,
        ));
    }
    let rescore_seed = root.child("rescore").value();
    let mut scores = Vec::with_capacity(ends.len());
    for e in &ends {
        scores.push(
            oracle.evaluate(&space.decision(e), s.rescore_mc, rescore_seed, false, params, lines::SGD_RESCORE)?.total,
        );
    }
    let best = crate::search::argmin(&scores);
    let fine =
        adam_optimize(batch_obj(lines::SGD_FINE), &ends[best], &adam(s.fine_iters), root.child("fine").value(), &space);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let (x, est) = polish(
        &oracle,
        &space.decision(&fine),
        s.polish_mc,
        s.polish_iters,
        params,
        root.child("polish").value(),
        lines::SGD_POLISH,
    )?;
    let mut diag = BTreeMap::new();
    diag.insert("sgd.chosen_chain".to_string(), best as f64);
    Ok(finish(x, est, &oracle, start, diag))
}

/// DE and multi-start quasi-Newton on a kernel surrogate trained once.
pub fn run_kde_so(sim: Arc<dyn Simulator>, params: RiskParams, cfg: &BaselineConfig, seed: u64) -> Result<Solution> {
    cfg.validate()?;
    let k = &cfg.kde_so;
    let start = Instant::now();
    let oracle = Oracle::new(sim);
    let space = DecisionSpace::new();
    let root = SeedTree::new(seed).child("kde-so");

    let design = maximin_lhd(k.train, &space, root.child("lhd").value(), 3);
    let draws = root.child("draws");
    let mut data = TrainingSet::new();
    for (i, p) in design.iter().enumerate() {
        let x = space.decision(p);
        data.push(x, oracle.draw(&x, draws.index(i as u64).value(), lines::KDE_TRAIN)?);
    }
    let kde = KdeSurrogate::new(data, k.bandwidth)?;
    let sseed = root.child("surrogate").value();
    let score = |p: &[f64]| {
        kde.risk(oracle.simulator(), &space.decision(p), k.de_mc, params, sseed).map(|e| e.total).unwrap_or(f64::NAN)
    };
    let init = Population::evaluate(maximin_lhd(k.de_pop, &space, root.child("de-lhd").value(), 3), score);
    let de = DeParams { n_iters: k.de_iters, ..DeParams::default() };
    let pop = de_optimize(score, init, &space, &de, root.child("de").value())?;

    let mut starts: Vec<Vec<f64>> = Vec::new();
    for i in pop.ranking() {
        if starts.len() == k.starts {
            break;
        }
        if !starts.contains(&pop.members[i]) {
            starts.push(pop.members[i].clone());
        }
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s0 in &starts {
        let mut obj = FnObjective::new(score, |p: &[f64]| fd_gradient(score, p, 1e-3, &space));
        let Ok(r) = bounded_quasi_newton(&mut obj, s0, &space, &QnParams::with_max_iter(k.local_iters)) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| r.f < b.1) {
            best = Some((r.x, r.f));
        }
    }
    let (xb, fb) = best.ok_or_else(|| Error::Numerical("every surrogate refinement failed".into()))?;
    let x = space.decision(&xb);
    let est = oracle.evaluate(&x, k.final_mc, root.child("final").value(), false, params, lines::KDE_FINAL)?;
    let mut diag = BTreeMap::new();
    diag.insert("kdeso.surrogate".to_string(), fb);
    Ok(finish(x, est, &oracle, start, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Dgp, DgpKind, QuadraticTestbed};

    fn params() -> RiskParams {
        RiskParams::new(0.7, 0.95).unwrap()
    }

    fn quad() -> (Arc<dyn Simulator>, [f64; 6]) {
        let q = QuadraticTestbed::default();
        let c = q.center;
        (Arc::new(q), c)
    }

    fn max_err(x: &Decision, c: &[f64; 6]) -> f64 {
        x.as_array().iter().zip(c).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn defaults_valid_and_scaled_valid() {
        let c = BaselineConfig::default();
        c.validate().unwrap();
        for d in [2, 4, 10] {
            let s = c.scaled(d);
            s.validate().unwrap();
            assert_eq!(s.sgd_cvar.batch, 60);
        }
        let mut bad = c.clone();
        bad.cem_so.polish_mc = 500;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn refits_at_every_fifth_acquisition() {
        assert_eq!(refit_schedule(25, 5), vec![5, 10, 15, 20, 25]);
        assert_eq!(CemParams::new(12, 55, 0.15, 0.6).n_elite(), 9);
    }

    #[test]
    fn gp_bo_budget_and_quadratic() {
        let (sim, c) = quad();
        let mut hits = 0;
        for seed in 0..10 {
            let sol = run_gp_bo(sim.clone(), params(), &BaselineConfig::default(), seed).unwrap();
            assert_eq!(sol.ledger[lines::GP_INIT], 18 * 130);
            assert_eq!(sol.ledger[lines::GP_ACQ], 25 * 130);
            assert_eq!(sol.diagnostics["gpbo.evaluations"], 43.0);
            if max_err(&sol.x_star, &c) < 1e-2 {
                hits += 1;
            }
        }
        assert!(hits >= 9, "{hits}/10");
    }

    #[test]
    fn cem_so_budget_and_quadratic() {
        let (sim, c) = quad();
        let sol = run_cem_so(sim, params(), &BaselineConfig::default(), 3).unwrap();
        assert_eq!(sol.ledger[lines::CEM_SEARCH], 12 * 55 * 130);
        assert_eq!(sol.ledger[lines::CEM_POLISH] % 520, 0);
        assert!(max_err(&sol.x_star, &c) < 1e-2, "{:?}", sol.x_star);
    }

    #[test]
    fn sgd_budget_and_quadratic() {
        let (sim, c) = quad();
        let sol = run_sgd_cvar(sim, params(), &BaselineConfig::default(), 4).unwrap();
        // every Adam step differences twelve probes on one batch
        assert_eq!(sol.ledger[lines::SGD_WARM], 2 * 80 * 12 * 60);
        assert_eq!(sol.ledger[lines::SGD_FINE], 160 * 12 * 60);
        assert_eq!(sol.ledger[lines::SGD_RESCORE], 2 * 500);
        assert!(max_err(&sol.x_star, &c) < 5e-2, "{:?}", sol.x_star);
    }

    #[test]
    fn kde_so_budget() {
        let sim: Arc<dyn Simulator> = Arc::new(Dgp::standard(DgpKind::Dgp2));
        let cfg = BaselineConfig::default().scaled(4);
        let sol = run_kde_so(sim, params(), &cfg, 5).unwrap();
        assert_eq!(sol.ledger[lines::KDE_TRAIN], 650);
        assert_eq!(sol.ledger[lines::KDE_FINAL], cfg.kde_so.final_mc as u64);
        assert_eq!(sol.oracle_calls, 650 + cfg.kde_so.final_mc as u64);
    }

    #[test]
    fn runs_are_reproducible_and_feasible() {
        let sim: Arc<dyn Simulator> = Arc::new(Dgp::standard(DgpKind::Dgp1));
        let cfg = BaselineConfig::default().scaled(10);
        type Runner = fn(Arc<dyn Simulator>, RiskParams, &BaselineConfig, u64) -> Result<Solution>;
        let runners: [Runner; 4] = [run_gp_bo, run_cem_so, run_sgd_cvar, run_kde_so];
        for run in runners {
            let a = run(sim.clone(), params(), &cfg, 8).unwrap();
            let b = run(sim.clone(), params(), &cfg, 8).unwrap();
            assert_eq!(a.x_star, b.x_star);
            assert_eq!(a.ledger, b.ledger);
            assert!(Decision::new(*a.x_star.as_array()).is_ok());
        }
    }
}
