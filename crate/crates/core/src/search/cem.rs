use super::{argmin, Domain, Population};
use crate::error::{Error, Result};
use crate::seed::stream;
use rand_distr::{Distribution, StandardNormal};

/// Non-finite scores tolerated per population slot before giving up.
const MAX_RETRIES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct CemParams {
    pub n_iters: usize,
    pub pop_size: usize,
    pub elite_frac: f64,
    pub smoothing: f64,
    /// Initial SD as a fraction of each box width.
    pub init_sd_frac: f64,
    /// Defaults to the box centre.
    pub init_mean: Option<Vec<f64>>,
}

impl CemParams {
    pub fn new(n_iters: usize, pop_size: usize, elite_frac: f64, smoothing: f64) -> Self {
        CemParams { n_iters, pop_size, elite_frac, smoothing, init_sd_frac: 0.25, init_mean: None }
    }

    pub fn n_elite(&self) -> usize {
        // tolerate products like 0.15 * 55 = 8.250000000000002
        let raw = self.elite_frac * self.pop_size as f64;
        ((raw - 1e-9).ceil() as usize).clamp(1, self.pop_size)
    }
}

#[derive(Debug, Clone)]
pub struct CemResult {
    /// Final sampling mean, projected into the domain.
    pub mean: Vec<f64>,
    pub best: Vec<f64>,
    pub best_score: f64,
    pub population: Population,
    /// Best-so-far score after each iteration.
    pub trace: Vec<f64>,
}

/// Cross-entropy minimisation with a diagonal Gaussian, projected samples,
/// and smoothed mean/SD updates from the elite set.
pub fn cem_optimize<D, F>(mut objective: F, domain: &D, params: &CemParams, seed: u64) -> Result<CemResult>
where
    D: Domain + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    if params.pop_size == 0 || params.elite_frac * (params.pop_size as f64) < 1.0 - 1e-9 {
        return Err(Error::Domain("need pop_size * elite_frac >= 1".into()));
    }
    if !(0.0..=1.0).contains(&params.smoothing) {
        return Err(Error::Domain("smoothing must lie in [0, 1]".into()));
    }
    let dim = domain.dim();
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut mean = match &params.init_mean {
        Some(m) if m.len() == dim => m.clone(),
        Some(_) => return Err(Error::Domain("initial mean has the wrong dimension".into())),
        None => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
    };
    let mut sd: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| params.init_sd_frac * (b - a)).collect();
    let n_elite = params.n_elite();
    let mut rng = stream(seed);
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut trace = Vec::with_capacity(params.n_iters);
    let mut population = Population::new(Vec::new(), Vec::new())?;

    for _ in 0..params.n_iters {
        let mut members = Vec::with_capacity(params.pop_size);
        let mut scores = Vec::with_capacity(params.pop_size);
        for _ in 0..params.pop_size {
            let mut tries = 0;
            loop {
                let mut x: Vec<f64> = (0..dim)
                    .map(|d| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        mean[d] + sd[d] * z
                    })
                    .collect();
                domain.project(&mut x);
                let s = objective(&x);
                if s.is_finite() {
                    members.push(x);
                    scores.push(s);
                    break;
                }
                tries += 1;
                if tries >= MAX_RETRIES {
                    return Err(Error::Numerical(format!("objective non-finite {MAX_RETRIES} times in a row")));
                }
            }
        }
        population = Population { members, scores };
        let order = population.ranking();
        let elite: Vec<&Vec<f64>> = order[..n_elite].iter().map(|&i| &population.members[i]).collect();
        let k = elite.len() as f64;
        for d in 0..dim {
            let m = elite.iter().map(|x| x[d]).sum::<f64>() / k;
            let v = elite.iter().map(|x| (x[d] - m) * (x[d] - m)).sum::<f64>() / k;
            mean[d] = params.smoothing * m + (1.0 - params.smoothing) * mean[d];
            sd[d] = params.smoothing * v.sqrt() + (1.0 - params.smoothing) * sd[d];
        }
        let i = argmin(&population.scores);
        if best.as_ref().is_none_or(|b| population.scores[i] < b.1) {
            best = Some((population.members[i].clone(), population.scores[i]));
        }
        trace.push(best.as_ref().map_or(f64::INFINITY, |b| b.1));
    }

    domain.project(&mut mean);
    let (best, best_score) = best.unwrap_or_else(|| (mean.clone(), f64::INFINITY));
    Ok(CemResult { mean, best, best_score, population, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{BoxBounds, DecisionSpace};

    fn sphere(c: Vec<f64>) -> impl FnMut(&[f64]) -> f64 {
        move |x| x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    #[test]
    fn elite_size() {
        assert_eq!(CemParams::new(12, 55, 0.15, 0.6).n_elite(), 9);
        assert_eq!(CemParams::new(7, 35, 1.0, 0.6).n_elite(), 35);
        assert!(cem_optimize(|_| 0.0, &BoxBounds::unit(2), &CemParams::new(1, 5, 0.1, 0.5), 1).is_err());
    }

    #[test]
    fn converges_on_interior_sphere() {
        let target = vec![0.12, 0.2, 0.08, 0.15, 0.1, 0.6];
        for seed in 0..10 {
            let r =
                cem_optimize(sphere(target.clone()), &DecisionSpace::new(), &CemParams::new(12, 55, 0.15, 0.6), seed)
                    .unwrap();
            let dist = r.mean.iter().zip(&target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            assert!(dist < 0.05, "seed {seed}: {dist}");
        }
    }

    #[test]
    fn full_elite_is_smoothed_population_mean() {
        let b = BoxBounds::unit(2);
        let mut p = CemParams::new(1, 8, 1.0, 0.6);
        p.init_mean = Some(vec![0.5, 0.5]);
        let r = cem_optimize(|x| x[0], &b, &p, 3).unwrap();
        for d in 0..2 {
            let m = r.population.members.iter().map(|x| x[d]).sum::<f64>() / 8.0;
            let expect = 0.6 * m + 0.4 * 0.5;
            assert!((r.mean[d] - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_smoothing_freezes_the_mean() {
        let mut p = CemParams::new(5, 20, 0.2, 0.0);
        p.init_mean = Some(vec![0.3, 0.7]);
        let r = cem_optimize(sphere(vec![0.9, 0.1]), &BoxBounds::unit(2), &p, 8).unwrap();
        assert_eq!(r.mean, vec![0.3, 0.7]);
    }

    #[test]
    fn best_so_far_never_increases_and_is_deterministic() {
        let f = |x: &[f64]| (x[0] - 0.3).powi(2) + (3.0 * x[1]).sin();
        let r = cem_optimize(f, &BoxBounds::unit(2), &CemParams::new(10, 30, 0.2, 0.6), 5).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        let s = cem_optimize(f, &BoxBounds::unit(2), &CemParams::new(10, 30, 0.2, 0.6), 5).unwrap();
        assert_eq!(r.mean, s.mean);
    }

    #[test]
    fn non_finite_candidates_are_resampled() {
        let mut calls = 0;
        let f = |x: &[f64]| {
            calls += 1;
            if calls % 3 == 0 {
                f64::NAN
            } else {
                x[0]
            }
        };
        let r = cem_optimize(f, &BoxBounds::unit(1), &CemParams::new(3, 10, 0.3, 0.5), 2).unwrap();
        assert!(r.population.scores.iter().all(|s| s.is_finite()));
        assert!(cem_optimize(|_| f64::NAN, &BoxBounds::unit(1), &CemParams::new(3, 10, 0.3, 0.5), 2).is_err());
    }
}
