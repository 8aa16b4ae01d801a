use super::{lines, AcfsConfig};
use crate::baselines::KdeSurrogate;
use crate::error::{Error, Result};
use crate::forest::{ConditionalSampler, ForestModel, ForestParams, TrainingSet};
use crate::risk::{RiskEstimate, RiskParams};
use crate::scenario::{CrnCache, Decision, Oracle, ScenarioMatrix};
use crate::search::{
    bounded_quasi_newton, cem_optimize, crn_risk, de_optimize, fd_gradient, maximin_lhd, CemParams, CrnMode, DeParams,
    DecisionSpace, Domain, Population, QnParams, SmoothObjective,
};
use crate::seed::SeedTree;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::sync::Arc;

/// Points closer than this are treated as the same candidate.
const DUP_TOL: f64 = 1e-9;

pub struct Phase1 {
    pub data: TrainingSet,
    pub sampler: ConditionalSampler,
    /// Final DE population, best forest score first.
    pub ranked: Vec<(Decision, f64)>,
    pub elites: Vec<Decision>,
    /// Final CEM mean, absent when the warm start is disabled.
    pub mu_cem: Option<Vec<f64>>,
}

pub struct Phase2 {
    pub data: TrainingSet,
    pub sampler: ConditionalSampler,
    pub allocation: Vec<usize>,
}

pub struct Phase3 {
    /// Start points for refinement, best oracle estimate first.
    pub seeds: Vec<Decision>,
    pub seed_scores: Vec<f64>,
    pub shortlist: Vec<Decision>,
}

fn forest_params(cfg: &AcfsConfig) -> ForestParams {
    ForestParams {
        n_trees: cfg.grf_trees,
        min_node: cfg.grf_min_node,
        mtry: cfg.grf_mtry,
        sample_fraction: cfg.grf_sample_fraction,
    }
}

fn gaussian_around(center: &[f64], sd: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let space = DecisionSpace::new();
    let mut rng = SeedTree::new(seed).rng();
    (0..n)
        .map(|_| {
            let mut p: Vec<f64> = center
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c + sd * z
                })
                .collect();
            space.project(&mut p);
            p
        })
        .collect()
}

fn push_distinct(out: &mut Vec<Decision>, x: Decision) -> bool {
    if out.iter().any(|y| y.distance(&x) <= DUP_TOL) {
        return false;
    }
    out.push(x);
    true
}

/// Forest-surrogate scores of many candidates on a common synthetic seed.
fn surrogate_scores(
    sampler: &ConditionalSampler,
    oracle: &Oracle,
    xs: &[Decision],
    n: usize,
    params: RiskParams,
    seed: u64,
) -> Result<Vec<f64>> {
    xs.par_iter().map(|x| Ok(sampler.risk(x, n, params, |d, w| oracle.cost(d, w), seed)?.total)).collect()
}

fn sort_by_score<T>(items: Vec<T>, scores: &[f64]) -> Vec<(T, f64)> {
    let mut paired: Vec<(T, f64)> = items.into_iter().zip(scores.iter().copied()).collect();
    paired.sort_by(|a, b| a.1.total_cmp(&b.1));
    paired
}

/// Space-filling design, one draw per point, forest fit, CEM warm start,
/// and DE on the kernel surrogate.
pub fn phase1_explore(oracle: &Oracle, cfg: &AcfsConfig, params: RiskParams, seed: u64) -> Result<Phase1> {
    let space = DecisionSpace::new();
    let root = SeedTree::new(seed);

    let design = maximin_lhd(cfg.n_a, &space, root.child("lhd").value(), cfg.lhd_restarts);
    let draws = root.child("lhd-draws");
    let mut data = TrainingSet::new();
    for (i, p) in design.iter().enumerate() {
        let x = space.decision(p);
        let w = oracle.draw(&x, draws.index(i as u64).value(), lines::LHD)?;
        data.push(x, w);
    }
    let forest = ForestModel::fit(&data, &forest_params(cfg), root.child("forest").value())?;
    let sampler = ConditionalSampler::new(forest, data.clone(), cfg.bandwidth_scale)?;

    let mu_cem = if cfg.ablation.no_cem {
        None
    } else {
        let evals = root.child("cem-evals");
        let mut k = 0u64;
        let mut failure = None;
        let objective = |p: &[f64]| {
            let s = evals.index(k).value();
            k += 1;
            match oracle.evaluate(&space.decision(p), cfg.cem_mc, s, false, params, lines::CEM) {
                Ok(e) => e.total,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        };
        let cp = CemParams::new(cfg.cem_iters, cfg.cem_pop, cfg.cem_elite_frac, cfg.cem_smoothing);
        let res = cem_optimize(objective, &space, &cp, root.child("cem").value())?;
        if let Some(e) = failure {
            return Err(e);
        }
        Some(res.mean)
    };

    let kde = KdeSurrogate::new(data.clone(), cfg.kde_bandwidth)?;
    let kde_seed = root.child("kde").value();
    let kde_score = |p: &[f64]| {
        kde.risk(oracle.simulator(), &space.decision(p), cfg.n_c, params, kde_seed).map(|e| e.total).unwrap_or(f64::NAN)
    };

    let n_warm = match &mu_cem {
        Some(_) => ((cfg.de_pop as f64 * cfg.cem_seed_frac).ceil() as usize).min(cfg.de_pop),
        None => 0,
    };
    let mut members = match &mu_cem {
        Some(mu) => gaussian_around(mu, cfg.cem_seed_sd, n_warm, root.child("de-warm").value()),
        None => Vec::new(),
    };
    if cfg.de_pop > n_warm {
        members.extend(maximin_lhd(cfg.de_pop - n_warm, &space, root.child("de-lhd").value(), cfg.lhd_restarts));
    }
    let init = Population::evaluate(members, kde_score);
    let de = DeParams { n_iters: cfg.de_iters, f: cfg.de_f, cr: cfg.de_cr };
    let pop = de_optimize(kde_score, init, &space, &de, root.child("de").value())?;

    let finals: Vec<Decision> = pop.members.iter().map(|p| space.decision(p)).collect();
    let scores = surrogate_scores(&sampler, oracle, &finals, cfg.n_f, params, root.child("rescore").value())?;
    let ranked = sort_by_score(finals, &scores);
    let mut elites = Vec::with_capacity(cfg.k_elites);
    for (x, _) in &ranked {
        if elites.len() == cfg.k_elites {
            break;
        }
        push_distinct(&mut elites, *x);
    }

    Ok(Phase1 { data, sampler, ranked, elites, mu_cem })
}

/// Splits `n_b` over `k` ranks with weights `ratio^r`, rounding by largest
/// remainder (earlier rank wins ties).
pub fn allocate_augmentation(n_b: usize, k: usize, ratio: f64) -> Vec<usize> {
    if k == 0 {
        return Vec::new();
    }
    let weights: Vec<f64> = (0..k).map(|r| ratio.powi(r as i32)).collect();
    let total: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| n_b as f64 * w / total).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = n_b - out.iter().sum::<usize>();
    for &r in order.iter().take(short) {
        out[r] += 1;
    }
    out
}

/// Extra one-draw samples around each elite, then a refit on everything.
pub fn phase2_augment(p1: &Phase1, oracle: &Oracle, cfg: &AcfsConfig, seed: u64) -> Result<Phase2> {
    if cfg.ablation.no_aug {
        return Ok(Phase2 {
            data: p1.data.clone(),
            sampler: ConditionalSampler::new(p1.sampler.forest().clone(), p1.data.clone(), cfg.bandwidth_scale)?,
            allocation: vec![0; p1.elites.len()],
        });
    }
    let root = SeedTree::new(seed);
    let allocation = allocate_augmentation(cfg.n_b, p1.elites.len(), cfg.aug_ratio);
    let mut data = p1.data.clone();
    let draws = root.child("draws");
    let mut i = 0u64;
    for (r, (elite, &m)) in p1.elites.iter().zip(&allocation).enumerate() {
        let pts = gaussian_around(elite.as_array(), cfg.aug_radius, m, root.child("perturb").index(r as u64).value());
        for p in pts {
            let x = DecisionSpace::new().decision(&p);
            data.push(x, oracle.draw(&x, draws.index(i).value(), lines::AUG)?);
            i += 1;
        }
    }
    let forest = ForestModel::fit(&data, &forest_params(cfg), root.child("forest").value())?;
    let sampler = ConditionalSampler::new(forest, data.clone(), cfg.bandwidth_scale)?;
    Ok(Phase2 { data, sampler, allocation })
}

/// Elites, the best DE members, perturbations of the elites, a fresh design,
/// and draws around the CEM mean, with duplicates dropped.
pub fn build_candidate_pool(p1: &Phase1, cfg: &AcfsConfig, seed: u64) -> Vec<Decision> {
    let space = DecisionSpace::new();
    let root = SeedTree::new(seed);
    let mut pool = Vec::with_capacity(cfg.pool_size());
    for x in &p1.elites {
        push_distinct(&mut pool, *x);
    }
    for (x, _) in p1.ranked.iter().take(cfg.pool_de_top) {
        push_distinct(&mut pool, *x);
    }
    for (r, e) in p1.elites.iter().enumerate() {
        let pts = gaussian_around(
            e.as_array(),
            cfg.pool_perturb_sd,
            cfg.pool_perturb,
            root.child("perturb").index(r as u64).value(),
        );
        for p in pts {
            push_distinct(&mut pool, space.decision(&p));
        }
    }
    let (n_lhd, basin) = match &p1.mu_cem {
        Some(mu) => (cfg.pool_lhd, gaussian_around(mu, cfg.cem_seed_sd, cfg.pool_cem, root.child("basin").value())),
        None => (cfg.pool_lhd + cfg.pool_cem, Vec::new()),
    };
    if n_lhd > 0 {
        for p in maximin_lhd(n_lhd, &space, root.child("lhd").value(), cfg.lhd_restarts) {
            push_distinct(&mut pool, space.decision(&p));
        }
    }
    for p in basin {
        push_distinct(&mut pool, space.decision(&p));
    }
    pool
}

/// Forest screen of the pool, then direct estimates on the shortlist.
pub fn phase3_rerank(
    pool: &[Decision],
    p2: &Phase2,
    oracle: &Oracle,
    cfg: &AcfsConfig,
    params: RiskParams,
    seed: u64,
) -> Result<Phase3> {
    if pool.is_empty() {
        return Err(Error::Domain("empty candidate pool".into()));
    }
    let root = SeedTree::new(seed);
    let scores = surrogate_scores(&p2.sampler, oracle, pool, cfg.n_f, params, root.child("stage1").value())?;
    let ranked = sort_by_score(pool.to_vec(), &scores);
    let shortlist: Vec<Decision> = ranked.iter().take(cfg.shortlist).map(|(x, _)| *x).collect();
    if cfg.ablation.no_rerank {
        let top: Vec<(Decision, f64)> = ranked.into_iter().take(cfg.n_seeds).collect();
        return Ok(Phase3 {
            seeds: top.iter().map(|p| p.0).collect(),
            seed_scores: top.iter().map(|p| p.1).collect(),
            shortlist,
        });
    }
    let s2 = root.child("stage2").value();
    let antithetic = !cfg.ablation.no_av;
    let direct: Vec<f64> = shortlist
        .par_iter()
        .map(|x| Ok(oracle.evaluate(x, cfg.n_d, s2, antithetic, params, lines::STAGE2)?.total))
        .collect::<Result<_>>()?;
    let top: Vec<(Decision, f64)> = sort_by_score(shortlist.clone(), &direct).into_iter().take(cfg.n_seeds).collect();
    Ok(Phase3 { seeds: top.iter().map(|p| p.0).collect(), seed_scores: top.iter().map(|p| p.1).collect(), shortlist })
}

/// Sample-path objective for one refinement run: a fresh block at each
/// accepted iterate, shared by every probe until the next one.
struct PathObjective<'a> {
    oracle: &'a Oracle,
    params: RiskParams,
    n: usize,
    antithetic: bool,
    mode: CrnMode,
    fd_step: f64,
    seeds: SeedTree,
    cache: CrnCache,
    current: Option<(Decision, u64)>,
    generations: u64,
    fn_remaps: u64,
    grad_remaps: u64,
    failure: Option<Error>,
}

impl<'a> PathObjective<'a> {
    fn block(&self) -> Option<Arc<ScenarioMatrix>> {
        self.current.and_then(|(x, s)| self.cache.get(&x, s))
    }

    fn at(&mut self, m: &ScenarioMatrix, x: &Decision, line: &str) -> (f64, bool) {
        let remapped = m.decision() != x && self.mode == CrnMode::CommonNormals;
        match crn_risk(self.oracle, x, m, self.params, self.mode, line) {
            Ok(v) => (v, remapped),
            Err(e) => {
                self.failure.get_or_insert(e);
                (f64::NAN, false)
            }
        }
    }
}

impl SmoothObjective for PathObjective<'_> {
    fn value(&mut self, p: &[f64]) -> f64 {
        let Some(m) = self.block() else { return f64::NAN };
        let (v, remapped) = self.at(&m, &DecisionSpace::new().decision(p), lines::FN);
        self.fn_remaps += remapped as u64;
        v
    }

    fn gradient(&mut self, p: &[f64]) -> Vec<f64> {
        let Some(m) = self.block() else { return vec![f64::NAN; p.len()] };
        let space = DecisionSpace::new();
        let mut remaps = 0u64;
        let step = self.fd_step;
        let g = fd_gradient(
            |q| {
                let (v, r) = self.at(&m, &space.decision(q), lines::GRAD);
                remaps += r as u64;
                v
            },
            p,
            step,
            &space,
        );
        self.grad_remaps += remaps;
        g
    }

    fn advance(&mut self, p: &[f64]) -> bool {
        let x = DecisionSpace::new().decision(p);
        let s = self.seeds.index(self.generations).value();
        self.cache.invalidate();
        match self.cache.get_or_generate(self.oracle, &x, self.n, s, self.antithetic, lines::FN) {
            Ok(_) => {
                self.current = Some((x, s));
                self.generations += 1;
            }
            Err(e) => {
                self.failure.get_or_insert(e);
                self.current = None;
            }
        }
        true
    }
}

struct StartOutcome {
    x: Decision,
    iterations: usize,
    generations: u64,
    fn_remaps: u64,
    grad_remaps: u64,
}

fn refine_one(
    x0: &Decision,
    oracle: &Oracle,
    cfg: &AcfsConfig,
    params: RiskParams,
    seeds: SeedTree,
) -> Result<StartOutcome> {
    let mut obj = PathObjective {
        oracle,
        params,
        n: cfg.n_d,
        antithetic: !cfg.ablation.no_av,
        mode: cfg.crn_mode,
        fd_step: cfg.fd_step,
        seeds,
        cache: CrnCache::new(),
        current: None,
        generations: 0,
        fn_remaps: 0,
        grad_remaps: 0,
        failure: None,
    };
    let res =
        bounded_quasi_newton(&mut obj, x0.as_array(), &DecisionSpace::new(), &QnParams::with_max_iter(cfg.local_maxit));
    if let Some(e) = obj.failure {
        return Err(e);
    }
    let res = res?;
    Ok(StartOutcome {
        x: DecisionSpace::new().decision(&res.x),
        iterations: res.iterations,
        generations: obj.generations,
        fn_remaps: obj.fn_remaps,
        grad_remaps: obj.grad_remaps,
    })
}

/// Multi-start refinement on the process itself, then one common-seed
/// confirmation estimate per start; the lowest wins.
pub fn phase4_refine(
    starts: &[Decision],
    oracle: &Oracle,
    cfg: &AcfsConfig,
    params: RiskParams,
    seed: u64,
) -> Result<(Decision, RiskEstimate, BTreeMap<String, f64>)> {
    if starts.is_empty() {
        return Err(Error::Domain("no start points for refinement".into()));
    }
    let root = SeedTree::new(seed);
    // the block sequence is shared by all starts, so equal starts give equal paths
    let path_seeds = root.child("fn");
    let outcomes: Vec<Result<StartOutcome>> =
        starts.par_iter().map(|x0| refine_one(x0, oracle, cfg, params, path_seeds)).collect();

    let confirm_seed = root.child("confirm").value();
    let antithetic = !cfg.ablation.no_av;
    let mut best: Option<(Decision, RiskEstimate)> = None;
    let mut diag = BTreeMap::new();
    let (mut ok, mut iters, mut gens, mut fns, mut grads) = (0u64, 0usize, 0u64, 0u64, 0u64);
    let mut last_err = None;
    for out in outcomes {
        match out {
            Ok(o) => {
                let est = oracle.evaluate(&o.x, cfg.n_d, confirm_seed, antithetic, params, lines::CONFIRM)?;
                ok += 1;
                iters += o.iterations;
                gens += o.generations;
                fns += o.fn_remaps;
                grads += o.grad_remaps;
                if best.as_ref().is_none_or(|(_, b)| est.total < b.total) {
                    best = Some((o.x, est));
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    let Some((x, est)) = best else {
        let why = last_err.map(|e| e.to_string()).unwrap_or_default();
        return Err(Error::Numerical(format!("all {} refinement starts failed; last error: {why}", starts.len())));
    };
    diag.insert("phase4.starts".to_string(), starts.len() as f64);
    diag.insert("phase4.starts_ok".to_string(), ok as f64);
    diag.insert("phase4.iterations_mean".to_string(), iters as f64 / ok as f64);
    diag.insert("phase4.generations".to_string(), gens as f64);
    diag.insert("phase4.fn_remaps".to_string(), fns as f64);
    diag.insert("phase4.grad_remaps".to_string(), grads as f64);
    Ok((x, est, diag))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::{run_acfs, Ablation};
    use crate::scenario::{Dgp, DgpKind, QuadraticTestbed, Simulator};

    fn params() -> RiskParams {
        RiskParams::new(0.7, 0.95).unwrap()
    }

    fn small() -> AcfsConfig {
        AcfsConfig::default().scaled(8)
    }

    #[test]
    fn allocation_matches_geometric_shares() {
        assert_eq!(allocate_augmentation(700, 4, 0.6), vec![322, 193, 116, 69]);
        assert_eq!(allocate_augmentation(10, 1, 0.6), vec![10]);
        assert_eq!(allocate_augmentation(9, 3, 1.0), vec![3, 3, 3]);
        for n in [1, 7, 100, 701] {
            let a = allocate_augmentation(n, 4, 0.6);
            assert_eq!(a.iter().sum::<usize>(), n);
            assert!(a.windows(2).all(|w| w[0] >= w[1]));
        }
        assert!(allocate_augmentation(5, 0, 0.6).is_empty());
    }

    #[test]
    fn identical_starts_give_identical_results() {
        let oracle = Oracle::new(Arc::new(Dgp::standard(DgpKind::Dgp1)));
        let mut cfg = small();
        cfg.local_maxit = 6;
        let x = Decision::new([0.1, 0.15, 0.1, 0.2, 0.1, 0.4]).unwrap();
        let a = refine_one(&x, &oracle, &cfg, params(), SeedTree::new(3)).unwrap();
        let b = refine_one(&x, &oracle, &cfg, params(), SeedTree::new(3)).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.generations, b.generations);
    }

    #[test]
    fn phase4_ledger_matches_recorded_counts() {
        let oracle = Oracle::new(Arc::new(Dgp::standard(DgpKind::Dgp2)));
        let mut cfg = small();
        cfg.local_maxit = 5;
        let starts = [
            Decision::new([0.1, 0.1, 0.1, 0.1, 0.1, 0.5]).unwrap(),
            Decision::new([0.2, 0.0, 0.1, 0.2, 0.1, 0.3]).unwrap(),
        ];
        let (_, _, d) = phase4_refine(&starts, &oracle, &cfg, params(), 9).unwrap();
        let n = cfg.n_d as f64;
        let led = oracle.ledger();
        assert_eq!(led.get(lines::FN) as f64, n * (d["phase4.generations"] + d["phase4.fn_remaps"]));
        assert_eq!(led.get(lines::GRAD) as f64, n * d["phase4.grad_remaps"]);
        assert_eq!(led.get(lines::CONFIRM) as f64, n * 2.0);
    }

    #[test]
    fn pool_is_distinct_and_sized() {
        let oracle = Oracle::new(Arc::new(Dgp::standard(DgpKind::Dgp2)));
        let cfg = small();
        let p1 = phase1_explore(&oracle, &cfg, params(), 4).unwrap();
        let pool = build_candidate_pool(&p1, &cfg, 5);
        assert!(pool.len() <= cfg.pool_size());
        assert!(pool.len() >= cfg.pool_size() - cfg.k_elites - cfg.pool_de_top);
        for (i, a) in pool.iter().enumerate() {
            assert!(pool[i + 1..].iter().all(|b| a.distance(b) > DUP_TOL));
        }
        assert_eq!(p1.elites.len(), cfg.k_elites);
    }

    #[test]
    fn quadratic_testbed_optimum_is_found() {
        let q = QuadraticTestbed::default().with_noise(0.5);
        let center = q.center;
        let sim: Arc<dyn Simulator> = Arc::new(q);
        let cfg = AcfsConfig::default().scaled(4);
        let sol = run_acfs(sim, &cfg, params(), 21).unwrap();
        let err: f64 = sol.x_star.as_array().iter().zip(&center).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 0.02, "{:?}", sol.x_star);
    }

    #[test]
    fn ablation_flags_change_the_ledger() {
        let sim: Arc<dyn Simulator> = Arc::new(Dgp::standard(DgpKind::Dgp2));
        let mut base = AcfsConfig::default().scaled(10);
        base.local_maxit = 3;
        for v in Ablation::VARIANTS {
            let cfg = base.clone().with_ablation(Ablation::from_variant(v).unwrap());
            let sol = run_acfs(sim.clone(), &cfg, params(), 2).unwrap();
            let pool = sol.diagnostics["pool_size"] as usize;
            for (line, want) in cfg.fixed_budget(pool) {
                assert_eq!(sol.ledger.get(line).copied().unwrap_or(0), want, "{v} {line}");
            }
            let n = cfg.n_d as f64;
            let fn_draws = n * (sol.diagnostics["phase4.generations"] + sol.diagnostics["phase4.fn_remaps"]);
            assert_eq!(sol.ledger[lines::FN] as f64, fn_draws, "{v}");
            assert_eq!(sol.oracle_calls, sol.ledger.values().sum::<u64>());
        }
    }

    #[test]
    fn runs_are_reproducible() {
        let sim: Arc<dyn Simulator> = Arc::new(Dgp::standard(DgpKind::Dgp1));
        let mut cfg = AcfsConfig::default().scaled(10);
        cfg.local_maxit = 4;
        let a = run_acfs(sim.clone(), &cfg, params(), 17).unwrap();
        let b = run_acfs(sim, &cfg, params(), 17).unwrap();
        assert_eq!(a.x_star, b.x_star);
        assert_eq!(a.estimate, b.estimate);
        assert_eq!(a.ledger, b.ledger);
    }
}
