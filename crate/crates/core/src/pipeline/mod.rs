//! The four-phase optimiser: forest-guided exploration, focused
//! augmentation, two-stage reranking, and multi-start local refinement on
//! the process itself.

mod phases;

pub use phases::{
    allocate_augmentation, build_candidate_pool, phase1_explore, phase2_augment, phase3_rerank, phase4_refine, Phase1,
    Phase2, Phase3,
};

use crate::error::{domain, Result};
use crate::risk::{RiskEstimate, RiskParams};
use crate::scenario::{Decision, Oracle, Simulator};
use crate::search::CrnMode;
use crate::seed::SeedTree;
use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

/// Ledger line names.
pub mod lines {
    pub const LHD: &str = "phase1.lhd";
    pub const CEM: &str = "phase1.cem";
    pub const AUG: &str = "phase2.aug";
    pub const STAGE2: &str = "phase3.stage2";
    pub const FN: &str = "phase4.fn";
    pub const GRAD: &str = "phase4.grad";
    pub const CONFIRM: &str = "phase4.confirm";
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    pub no_cem: bool,
    pub no_aug: bool,
    pub no_rerank: bool,
    pub no_av: bool,
}

impl Ablation {
    pub const VARIANTS: [&'static str; 5] = ["full", "nocem", "noaug", "norerank", "noav"];

    pub fn from_variant(name: &str) -> Result<Self> {
        let mut a = Ablation::default();
        match name {
            "full" => {}
            "nocem" => a.no_cem = true,
            "noaug" => a.no_aug = true,
            "norerank" => a.no_rerank = true,
            "noav" => a.no_av = true,
            other => return domain(format!("unknown ablation variant {other:?}")),
        }
        Ok(a)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcfsConfig {
    pub n_a: usize,
    pub n_b: usize,
    pub k_elites: usize,
    pub aug_radius: f64,
    /// Geometric decay of the augmentation shares by elite rank.
    pub aug_ratio: f64,
    pub grf_trees: usize,
    pub grf_min_node: usize,
    pub grf_mtry: usize,
    pub grf_sample_fraction: f64,
    /// Multiplier on the Silverman jitter bandwidth.
    pub bandwidth_scale: f64,
    /// Decision-space kernel width of the exploration surrogate.
    pub kde_bandwidth: f64,
    pub de_iters: usize,
    pub de_pop: usize,
    pub de_f: f64,
    pub de_cr: f64,
    pub n_c: usize,
    pub n_f: usize,
    pub n_d: usize,
    pub pool_de_top: usize,
    pub pool_perturb: usize,
    pub pool_perturb_sd: f64,
    pub pool_lhd: usize,
    pub pool_cem: usize,
    pub shortlist: usize,
    pub n_seeds: usize,
    pub local_maxit: usize,
    pub fd_step: f64,
    pub crn_mode: CrnMode,
    pub cem_iters: usize,
    pub cem_pop: usize,
    pub cem_mc: usize,
    pub cem_elite_frac: f64,
    pub cem_smoothing: f64,
    pub cem_seed_sd: f64,
    pub cem_seed_frac: f64,
    pub lhd_restarts: usize,
    pub ablation: Ablation,
}

impl Default for AcfsConfig {
    fn default() -> Self {
        AcfsConfig {
            n_a: 1200,
            n_b: 700,
            k_elites: 4,
            aug_radius: 0.025,
            aug_ratio: 0.6,
            grf_trees: 70,
            grf_min_node: 15,
            grf_mtry: 3,
            grf_sample_fraction: 0.5,
            bandwidth_scale: 1.0,
            kde_bandwidth: 0.15,
            de_iters: 55,
            de_pop: 85,
            de_f: 0.7,
            de_cr: 0.9,
            n_c: 100,
            n_f: 800,
            n_d: 450,
            pool_de_top: 30,
            pool_perturb: 8,
            pool_perturb_sd: 0.025,
            pool_lhd: 60,
            pool_cem: 25,
            shortlist: 60,
            n_seeds: 30,
            local_maxit: 80,
            fd_step: 1e-3,
            crn_mode: CrnMode::CommonNormals,
            cem_iters: 7,
            cem_pop: 35,
            cem_mc: 300,
            cem_elite_frac: 0.15,
            cem_smoothing: 0.6,
            cem_seed_sd: 0.04,
            cem_seed_frac: 1.0 / 3.0,
            lhd_restarts: 5,
            ablation: Ablation::default(),
        }
    }
}

fn div_ceil(v: usize, d: usize) -> usize {
    v.div_ceil(d).max(1)
}

impl AcfsConfig {
    pub fn with_ablation(mut self, a: Ablation) -> Self {
        self.ablation = a;
        self
    }

    /// Nominal pool size before de-duplication.
    pub fn pool_size(&self) -> usize {
        self.k_elites + self.pool_de_top + self.k_elites * self.pool_perturb + self.pool_lhd + self.pool_cem
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_a", self.n_a),
            ("k_elites", self.k_elites),
            ("grf_trees", self.grf_trees),
            ("grf_min_node", self.grf_min_node),
            ("de_iters", self.de_iters),
            ("de_pop", self.de_pop),
            ("n_c", self.n_c),
            ("n_f", self.n_f),
            ("n_d", self.n_d),
            ("shortlist", self.shortlist),
            ("n_seeds", self.n_seeds),
            ("local_maxit", self.local_maxit),
            ("cem_iters", self.cem_iters),
            ("cem_pop", self.cem_pop),
            ("cem_mc", self.cem_mc),
        ];
        for (k, v) in counts {
            if v == 0 {
                return domain(format!("{k} must be positive"));
            }
        }
        if self.n_b == 0 && !self.ablation.no_aug {
            return domain("n_b must be positive");
        }
        if self.de_pop < 4 {
            return domain("de_pop must be at least 4");
        }
        if self.k_elites > self.de_pop {
            return domain("k_elites cannot exceed de_pop");
        }
        if self.n_a < 2 * self.grf_min_node {
            return domain("n_a must be at least twice grf_min_node");
        }
        if self.shortlist > self.pool_size() {
            return domain("shortlist larger than the candidate pool");
        }
        if self.n_seeds > self.shortlist {
            return domain("n_seeds larger than the shortlist");
        }
        if self.n_d < 2 || self.n_d % 2 != 0 {
            return domain("n_d must be even and at least 2");
        }
        let positive = [
            ("aug_radius", self.aug_radius),
            ("bandwidth_scale", self.bandwidth_scale),
            ("kde_bandwidth", self.kde_bandwidth),
            ("fd_step", self.fd_step),
            ("cem_seed_sd", self.cem_seed_sd),
            ("pool_perturb_sd", self.pool_perturb_sd),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return domain(format!("{k} must be positive"));
            }
        }
        if !(self.aug_ratio > 0.0 && self.aug_ratio <= 1.0) {
            return domain("aug_ratio must lie in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.cem_seed_frac) || !(0.0..=1.0).contains(&self.cem_smoothing) {
            return domain("cem_seed_frac and cem_smoothing must lie in [0, 1]");
        }
        if !(self.cem_elite_frac > 0.0 && self.cem_elite_frac <= 1.0)
            || self.cem_elite_frac * (self.cem_pop as f64) < 1.0
        {
            return domain("cem_elite_frac must leave at least one elite");
        }
        if !(self.grf_sample_fraction > 0.0 && self.grf_sample_fraction <= 1.0) {
            return domain("grf_sample_fraction must lie in (0, 1]");
        }
        Ok(())
    }

    /// Shrinks the sample and iteration budgets by `divisor` (rounding up,
    /// keeping `n_d` even and the DE population at 8 or more).
    pub fn scaled(&self, divisor: usize) -> Self {
        if divisor <= 1 {
            return self.clone();
        }
        let d = divisor;
        let mut c = self.clone();
        c.n_a = div_ceil(self.n_a, d).max(2 * self.grf_min_node);
        c.n_b = div_ceil(self.n_b, d);
        c.n_c = div_ceil(self.n_c, d);
        c.n_f = div_ceil(self.n_f, d);
        c.n_d = div_ceil(self.n_d, d).max(2).next_multiple_of(2);
        c.cem_mc = div_ceil(self.cem_mc, d);
        c.de_iters = div_ceil(self.de_iters, d);
        c.de_pop = div_ceil(self.de_pop, d).max(8);
        c.shortlist = div_ceil(self.shortlist, d);
        c.n_seeds = div_ceil(self.n_seeds, d).min(c.shortlist);
        c
    }

    /// Draws charged by the phases whose size does not depend on the search path.
    pub fn fixed_budget(&self, pool_len: usize) -> BTreeMap<&'static str, u64> {
        let a = self.ablation;
        let mut b = BTreeMap::new();
        b.insert(lines::LHD, self.n_a as u64);
        b.insert(lines::CEM, if a.no_cem { 0 } else { (self.cem_iters * self.cem_pop * self.cem_mc) as u64 });
        b.insert(lines::AUG, if a.no_aug { 0 } else { self.n_b as u64 });
        let stage2 = if a.no_rerank { 0 } else { (self.shortlist.min(pool_len) * self.n_d) as u64 };
        b.insert(lines::STAGE2, stage2);
        b
    }
}

/// What every optimiser returns.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x_star: Decision,
    /// The method's own final estimate at `x_star`.
    pub estimate: RiskEstimate,
    /// Total scenario draws charged to the oracle.
    pub oracle_calls: u64,
    pub ledger: BTreeMap<String, u64>,
    /// Wall-clock seconds per stage.
    pub timings: Vec<(String, f64)>,
    pub diagnostics: BTreeMap<String, f64>,
}

impl Solution {
    pub(crate) fn assemble(
        x_star: Decision,
        estimate: RiskEstimate,
        oracle: &Oracle,
        timings: Vec<(String, f64)>,
        diagnostics: BTreeMap<String, f64>,
    ) -> Self {
        Solution {
            x_star,
            estimate,
            oracle_calls: oracle.ledger().total(),
            ledger: oracle.ledger().snapshot(),
            timings,
            diagnostics,
        }
    }
}

/// Runs the four phases with seeds derived from `master_seed`.
pub fn run_acfs(sim: Arc<dyn Simulator>, cfg: &AcfsConfig, params: RiskParams, master_seed: u64) -> Result<Solution> {
    cfg.validate()?;
    let oracle = Oracle::new(sim);
    let root = SeedTree::new(master_seed).child("acfs");
    let mut timings = Vec::new();
    let mut diagnostics = BTreeMap::new();

    let t = Instant::now();
    let p1 = phase1_explore(&oracle, cfg, params, root.child("phase1").value())?;
    timings.push(("phase1".to_string(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let p2 = phase2_augment(&p1, &oracle, cfg, root.child("phase2").value())?;
    timings.push(("phase2".to_string(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let pool = build_candidate_pool(&p1, cfg, root.child("pool").value());
    diagnostics.insert("pool_size".to_string(), pool.len() as f64);
    let p3 = phase3_rerank(&pool, &p2, &oracle, cfg, params, root.child("phase3").value())?;
    timings.push(("phase3".to_string(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let (x_star, estimate, p4_diag) = phase4_refine(&p3.seeds, &oracle, cfg, params, root.child("phase4").value())?;
    timings.push(("phase4".to_string(), t.elapsed().as_secs_f64()));
    diagnostics.extend(p4_diag);

    Ok(Solution::assemble(x_star, estimate, &oracle, timings, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_pool_is_151() {
        let c = AcfsConfig::default();
        c.validate().unwrap();
        assert_eq!(c.pool_size(), 151);
    }

    #[test]
    fn scaling_keeps_invariants() {
        for d in [1, 2, 4, 8, 50] {
            let c = AcfsConfig::default().scaled(d);
            c.validate().unwrap();
            assert_eq!(c.n_d % 2, 0);
        }
        let c = AcfsConfig::default().scaled(4);
        assert_eq!((c.n_a, c.n_b, c.n_d, c.cem_mc, c.de_pop, c.n_seeds), (300, 175, 114, 75, 22, 8));
    }

    #[test]
    fn invalid_configs_rejected() {
        let d = AcfsConfig::default();
        for c in [
            AcfsConfig { n_seeds: 61, ..d.clone() },
            AcfsConfig { n_d: 451, ..d.clone() },
            AcfsConfig { shortlist: 200, ..d.clone() },
        ] {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn fixed_budget_lines() {
        let c = AcfsConfig::default();
        let b = c.fixed_budget(151);
        assert_eq!(b[lines::CEM], 7 * 35 * 300);
        assert_eq!(b[lines::STAGE2], 27_000);
        let b = c.clone().with_ablation(Ablation::from_variant("nocem").unwrap()).fixed_budget(151);
        assert_eq!(b[lines::CEM], 0);
        assert!(Ablation::from_variant("nothing").is_err());
    }
}
