use super::{ForestModel, TrainingSet};
use crate::error::{domain, Result};
use crate::risk::{spectral_risk, RiskEstimate, RiskParams};
use crate::scenario::{Decision, Row, DIM_W};
use crate::seed::{stream, Rng};
use crate::stats::{quantile_sorted, std_dev};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

/// Running sum held exactly as non-overlapping partials.
#[derive(Clone, Default)]
struct ExactSum(Vec<f64>);

impl ExactSum {
    fn add(&mut self, mut x: f64) {
        let mut kept = 0;
        for j in 0..self.0.len() {
            let mut y = self.0[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                self.0[kept] = lo;
                kept += 1;
            }
            x = hi;
        }
        self.0.truncate(kept);
        self.0.push(x);
    }

    /// Sign of the exact value minus `k`.
    fn cmp_to(&self, k: f64) -> std::cmp::Ordering {
        let mut d = self.clone();
        d.add(-k);
        let top = d.0.iter().rev().find(|p| **p != 0.0).copied().unwrap_or(0.0);
        top.partial_cmp(&0.0).expect("finite partials")
    }

    fn ceil(&self) -> f64 {
        use std::cmp::Ordering::*;
        let mut k = self.0.iter().sum::<f64>().ceil();
        while self.cmp_to(k) == Greater {
            k += 1.0;
        }
        while self.cmp_to(k - 1.0) != Greater {
            k -= 1.0;
        }
        k
    }
}

/// Systematic resampling with a scaled offset `v = n u in [0, 1)`: grid
/// point `m` is `v + m` against the cumulative weights scaled by `n`.
///
/// Index `i` receives `ceil(C_i - v) - ceil(C_{i-1} - v)` draws with the
/// partial sums `C_i` of `n w_j` taken exactly, so every count is the floor
/// or the ceiling of `n w_i`.
pub fn systematic_resample_at(w: &[f64], n: usize, v: f64) -> Vec<usize> {
    assert!(!w.is_empty(), "empty weight vector");
    assert!((0.0..1.0).contains(&v), "offset must lie in [0, 1)");
    let scale = n as f64;
    let last = w.iter().rposition(|&wi| wi > 0.0).expect("weights sum to zero");
    // partial sums within summation noise of an integer are taken as that
    // integer; weights that should total one rarely do exactly
    let tol = 4.0 * (w.len() + 1) as f64 * f64::EPSILON * scale.max(1.0);
    let mut out = Vec::with_capacity(n);
    let mut acc = ExactSum::default();
    let mut below = 0usize;
    for (i, &wi) in w[..last].iter().enumerate() {
        if wi == 0.0 {
            continue;
        }
        acc.add(scale * wi);
        let approx: f64 = acc.0.iter().sum();
        let mut edge =
            if (approx - approx.round()).abs() <= tol { ExactSum(vec![approx.round()]) } else { acc.clone() };
        edge.add(-v);
        let upto = (edge.ceil().max(0.0) as usize).min(n);
        out.extend(std::iter::repeat_n(i, upto.saturating_sub(below)));
        below = below.max(upto);
    }
    out.resize(n, last);
    out
}

/// One uniform offset, `n` evenly spaced points against the cumulative weights.
pub fn systematic_resample(w: &[f64], n: usize, rng: &mut Rng) -> Vec<usize> {
    let v: f64 = rng.random_range(0.0..1.0);
    systematic_resample_at(w, n, v)
}

/// `h_j = scale * 0.9 * min(sd_j, IQR_j / 1.34) * N^(-1/5)`, floored away from zero.
pub fn silverman_bandwidth(data: &TrainingSet, scale: f64) -> Result<[f64; DIM_W]> {
    let n = data.len();
    if n < 2 {
        return domain("bandwidth needs at least two outcomes");
    }
    let factor = scale * 0.9 * (n as f64).powf(-0.2);
    let mut h = [0.0; DIM_W];
    for (j, hj) in h.iter_mut().enumerate() {
        let mut col: Vec<f64> = data.outcomes().iter().map(|r| r[j]).collect();
        let sd = std_dev(&col);
        col.sort_by(f64::total_cmp);
        let iqr = quantile_sorted(&col, 0.75) - quantile_sorted(&col, 0.25);
        *hj = (factor * sd.min(iqr / 1.34)).max(1e-8 * (1.0 + sd.abs()));
    }
    Ok(h)
}

/// `n` rows `W_I + h * Z`, the indices `I` drawn from `w` by systematic
/// resampling and `Z` standard normal.
pub fn jittered_draws(outcomes: &[Row], bandwidth: &[f64; DIM_W], w: &[f64], n: usize, seed: u64) -> Vec<Row> {
    let mut rng = stream(seed);
    let idx = systematic_resample(w, n, &mut rng);
    idx.into_iter()
        .map(|i| {
            let base = outcomes[i];
            std::array::from_fn(|j| {
                let z: f64 = StandardNormal.sample(&mut rng);
                base[j] + bandwidth[j] * z
            })
        })
        .collect()
}

/// A fitted forest with its training data and jitter bandwidth.
#[derive(Debug, Clone)]
pub struct ConditionalSampler {
    forest: ForestModel,
    data: TrainingSet,
    bandwidth: [f64; DIM_W],
}

impl ConditionalSampler {
    pub fn new(forest: ForestModel, data: TrainingSet, bandwidth_scale: f64) -> Result<Self> {
        if forest.n_train() != data.len() {
            return domain("forest was fitted on a different training set");
        }
        let bandwidth = silverman_bandwidth(&data, bandwidth_scale)?;
        Ok(ConditionalSampler { forest, data, bandwidth })
    }

    pub fn with_bandwidth(mut self, h: [f64; DIM_W]) -> Self {
        self.bandwidth = h;
        self
    }

    pub fn forest(&self) -> &ForestModel {
        &self.forest
    }

    pub fn data(&self) -> &TrainingSet {
        &self.data
    }

    pub fn bandwidth(&self) -> &[f64; DIM_W] {
        &self.bandwidth
    }

    /// `n` synthetic outcomes `W_I + h * Z` with `I` drawn by systematic resampling.
    pub fn draw(&self, x: &Decision, n: usize, seed: u64) -> Vec<Row> {
        let w = self.forest.leaf_weights(x);
        self.draw_with_weights(&w, n, seed)
    }

    pub fn draw_with_weights(&self, w: &[f64], n: usize, seed: u64) -> Vec<Row> {
        jittered_draws(self.data.outcomes(), &self.bandwidth, w, n, seed)
    }

    /// Surrogate spectral risk from `n` synthetic draws at `x`.
    pub fn risk<F>(&self, x: &Decision, n: usize, params: RiskParams, cost: F, seed: u64) -> Result<RiskEstimate>
    where
        F: Fn(&Decision, &Row) -> f64,
    {
        let costs: Vec<f64> = self.draw(x, n, seed).iter().map(|w| cost(x, w)).collect();
        spectral_risk(&costs, params)
    }
}

/// Free-function form of [`ConditionalSampler::risk`].
pub fn surrogate_risk<F>(
    sampler: &ConditionalSampler,
    x: &Decision,
    n: usize,
    params: RiskParams,
    cost: F,
    seed: u64,
) -> Result<RiskEstimate>
where
    F: Fn(&Decision, &Row) -> f64,
{
    sampler.risk(x, n, params, cost, seed)
}
