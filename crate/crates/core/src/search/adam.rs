use super::fd::fd_gradient;
use super::Domain;
use crate::seed::SeedTree;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub n_iters: usize,
    /// Base rate; iteration `t` (from 0) uses `lr0 / (1 + decay * t)`.
    pub lr0: f64,
    pub decay: f64,
    pub batch_size: usize,
    pub fd_step: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            n_iters: 80,
            lr0: 0.05,
            decay: 0.01,
            batch_size: 60,
            fd_step: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamParams {
    pub fn rate(&self, t: usize) -> f64 {
        self.lr0 / (1.0 + self.decay * t as f64)
    }
}

/// Adam on finite-difference gradients of a mini-batch objective.
///
/// `objective(x, batch_size, batch_seed)` must be deterministic in its
/// arguments; each iteration draws a new batch seed and differences the
/// objective on that one batch.
pub fn adam_optimize<D, F>(mut objective: F, x0: &[f64], params: &AdamParams, seed: u64, domain: &D) -> Vec<f64>
where
    D: Domain + ?Sized,
    F: FnMut(&[f64], usize, u64) -> f64,
{
    let n = x0.len();
    let mut x = domain.projected(x0);
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let batches = SeedTree::new(seed).child("batch");
    for t in 0..params.n_iters {
        let bseed = batches.index(t as u64).value();
        let g = fd_gradient(|p| objective(p, params.batch_size, bseed), &x, params.fd_step, domain);
        let k = (t + 1) as i32;
        let c1 = 1.0 - params.beta1.powi(k);
        let c2 = 1.0 - params.beta2.powi(k);
        let lr = params.rate(t);
        for j in 0..n {
            let gj = if g[j].is_finite() { g[j] } else { 0.0 };
            m[j] = params.beta1 * m[j] + (1.0 - params.beta1) * gj;
            v[j] = params.beta2 * v[j] + (1.0 - params.beta2) * gj * gj;
            x[j] -= lr * (m[j] / c1) / ((v[j] / c2).sqrt() + params.eps);
        }
        domain.project(&mut x);
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::search::{BoxBounds, DecisionSpace};

    #[test]
    fn zero_gradient_or_rate_is_identity() {
        let x0 = [0.1, 0.2, 0.1, 0.1, 0.1, 0.3];
        let s = DecisionSpace::new();
        assert_eq!(adam_optimize(|_, _, _| 4.0, &x0, &AdamParams::default(), 1, &s), x0.to_vec());
        let p = AdamParams { lr0: 0.0, ..AdamParams::default() };
        assert_eq!(adam_optimize(|x, _, _| x[0] * x[0], &x0, &p, 1, &s), x0.to_vec());
    }

    #[test]
    fn quadratic_converges() {
        let c = [0.10, 0.15, 0.10, 0.20, 0.10, 0.40];
        let f = |x: &[f64], _: usize, _: u64| 100.0 * x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let p = AdamParams { n_iters: 200, ..AdamParams::default() };
        let x = adam_optimize(f, &[0.3, 0.0, 0.3, 0.0, 0.2, 0.9], &p, 2, &DecisionSpace::new());
        let d = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(d < 0.02, "{d} {x:?}");
    }

    #[test]
    fn batch_seeds_vary_and_repeat() {
        let mut seen = Vec::new();
        let p = AdamParams { n_iters: 3, ..AdamParams::default() };
        adam_optimize(
            |_, b, s| {
                assert_eq!(b, 60);
                seen.push(s);
                0.0
            },
            &[0.5],
            &p,
            7,
            &BoxBounds::unit(1),
        );
        seen.dedup();
        assert_eq!(seen.len(), 3);
        let noisy = |x: &[f64], _: usize, s: u64| (x[0] - 0.5).powi(2) + (s % 7) as f64 * x[0] * 1e-3;
        let a = adam_optimize(noisy, &[0.1], &p, 3, &BoxBounds::unit(1));
        assert_eq!(a, adam_optimize(noisy, &[0.1], &p, 3, &BoxBounds::unit(1)));
    }
}
