use super::{finite_or_inf, Domain, Population};
use crate::error::{Error, Result};
use crate::seed::stream;
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeParams {
    pub n_iters: usize,
    pub f: f64,
    pub cr: f64,
}

impl Default for DeParams {
    fn default() -> Self {
        DeParams { n_iters: 55, f: 0.7, cr: 0.9 }
    }
}

/// DE/current-to-best/1/bin with generation-synchronous greedy selection.
/// A trial replaces its parent only when strictly better.
pub fn de_optimize<D, F>(
    mut objective: F,
    init: Population,
    domain: &D,
    params: &DeParams,
    seed: u64,
) -> Result<Population>
where
    D: Domain + ?Sized,
    F: FnMut(&[f64]) -> f64,
{
    let np = init.len();
    if np < 4 {
        return Err(Error::Domain(format!("differential evolution needs at least 4 members, got {np}")));
    }
    let dim = domain.dim();
    if init.members.iter().any(|m| m.len() != dim) {
        return Err(Error::Domain("population member has the wrong dimension".into()));
    }
    let mut pop = init;
    for s in &mut pop.scores {
        *s = finite_or_inf(*s);
    }
    let mut rng = stream(seed);
    for _ in 0..params.n_iters {
        let best = pop.members[pop.best_index()].clone();
        let mut trials = Vec::with_capacity(np);
        for i in 0..np {
            let r1 = pick(&mut rng, np, &[i]);
            let r2 = pick(&mut rng, np, &[i, r1]);
            let (xi, x1, x2) = (&pop.members[i], &pop.members[r1], &pop.members[r2]);
            let forced = rng.random_range(0..dim);
            let mut trial = xi.clone();
            for d in 0..dim {
                if d == forced || rng.random::<f64>() < params.cr {
                    trial[d] = xi[d] + params.f * (best[d] - xi[d]) + params.f * (x1[d] - x2[d]);
                }
            }
            domain.project(&mut trial);
            trials.push(trial);
        }
        for (i, trial) in trials.into_iter().enumerate() {
            let s = finite_or_inf(objective(&trial));
            if s < pop.scores[i] {
                pop.members[i] = trial;
                pop.scores[i] = s;
            }
        }
    }
    Ok(pop)
}

fn pick(rng: &mut crate::seed::Rng, n: usize, exclude: &[usize]) -> usize {
    loop {
        let k = rng.random_range(0..n);
        if !exclude.contains(&k) {
            return k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{maximin_lhd, BoxBounds};

    fn sphere(x: &[f64]) -> f64 {
        x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum()
    }

    fn start(n: usize, dim: usize, seed: u64, f: impl FnMut(&[f64]) -> f64) -> Population {
        Population::evaluate(maximin_lhd(n, &BoxBounds::unit(dim), seed, 1), f)
    }

    #[test]
    fn sphere_converges() {
        let mut ok = 0;
        for seed in 0..10 {
            let p = de_optimize(sphere, start(85, 6, seed, sphere), &BoxBounds::unit(6), &DeParams::default(), seed)
                .unwrap();
            if p.best().1 < 1e-3 {
                ok += 1;
            }
        }
        assert!(ok >= 9, "{ok}/10");
    }

    #[test]
    fn constant_objective_keeps_incumbents() {
        let p0 = start(10, 3, 1, |_| 1.0);
        let p = de_optimize(|_| 1.0, p0.clone(), &BoxBounds::unit(3), &DeParams::default(), 2).unwrap();
        assert_eq!(p, p0);
    }

    #[test]
    fn zero_f_zero_cr_is_stationary() {
        let p0 = start(12, 4, 3, sphere);
        let params = DeParams { n_iters: 10, f: 0.0, cr: 0.0 };
        assert_eq!(de_optimize(sphere, p0.clone(), &BoxBounds::unit(4), &params, 4).unwrap(), p0);
    }

    #[test]
    fn best_never_worsens() {
        let f = |x: &[f64]| (5.0 * x[0]).sin() + x[1] * x[1];
        let mut p = start(20, 2, 5, f);
        let mut prev = p.best().1;
        for k in 0..10 {
            let params = DeParams { n_iters: 1, ..DeParams::default() };
            p = de_optimize(f, p, &BoxBounds::unit(2), &params, k).unwrap();
            assert!(p.best().1 <= prev);
            prev = p.best().1;
        }
    }

    #[test]
    fn small_population_rejected() {
        assert!(de_optimize(sphere, start(3, 2, 0, sphere), &BoxBounds::unit(2), &DeParams::default(), 0).is_err());
    }
}
