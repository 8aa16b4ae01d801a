use crate::error::{domain, Result};
use crate::forest::{jittered_draws, silverman_bandwidth, TrainingSet};
use crate::risk::{spectral_risk, RiskEstimate, RiskParams};
use crate::scenario::{Decision, Row, Simulator, DIM_W};

/// Decision-weighted kernel surrogate: training pairs are weighted by an
/// isotropic Gaussian kernel in decision space, and synthetic outcomes are
/// resampled from those weights with Silverman jitter.
#[derive(Debug, Clone)]
pub struct KdeSurrogate {
    data: TrainingSet,
    x_bandwidth: f64,
    jitter: [f64; DIM_W],
}

impl KdeSurrogate {
    pub fn new(data: TrainingSet, x_bandwidth: f64) -> Result<Self> {
        if !(x_bandwidth > 0.0) {
            return domain("kernel bandwidth must be positive");
        }
        let jitter = silverman_bandwidth(&data, 1.0)?;
        Ok(KdeSurrogate { data, x_bandwidth, jitter })
    }

    pub fn data(&self) -> &TrainingSet {
        &self.data
    }

    pub fn jitter(&self) -> &[f64; DIM_W] {
        &self.jitter
    }

    /// Normalised kernel weights at `x`.
    pub fn weights(&self, x: &Decision) -> Vec<f64> {
        let inv = 0.5 / (self.x_bandwidth * self.x_bandwidth);
        let logs: Vec<f64> = self
            .data
            .decisions()
            .iter()
            .map(|xi| {
                let d = x.distance(xi);
                -inv * d * d
            })
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut w: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = w.iter().sum();
        for v in &mut w {
            *v /= total;
        }
        w
    }

    pub fn draw(&self, x: &Decision, n: usize, seed: u64) -> Vec<Row> {
        jittered_draws(self.data.outcomes(), &self.jitter, &self.weights(x), n, seed)
    }

    pub fn risk(
        &self,
        sim: &dyn Simulator,
        x: &Decision,
        n: usize,
        params: RiskParams,
        seed: u64,
    ) -> Result<RiskEstimate> {
        let costs: Vec<f64> = self.draw(x, n, seed).iter().map(|w| sim.cost(x, w)).collect();
        spectral_risk(&costs, params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Dgp, DgpKind, QuadraticTestbed, ScenarioMatrix};
    use crate::search::{maximin_lhd, DecisionSpace};
    use crate::stats::{mean, std_dev};

    fn design(n: usize, seed: u64) -> Vec<Decision> {
        let s = DecisionSpace::new();
        maximin_lhd(n, &s, seed, 1).iter().map(|p| s.decision(p)).collect()
    }

    #[test]
    fn weights_are_normalised_and_decay() {
        let mut d = TrainingSet::new();
        let origin = Decision::zeros();
        for k in 0..40 {
            let v = k as f64 * 0.01;
            d.push(Decision::new([v, 0.0, 0.0, 0.0, 0.0, v]).unwrap(), [k as f64, 0.0, 1.0, 2.0, 3.0]);
        }
        let s = KdeSurrogate::new(d, 0.15).unwrap();
        let w = s.weights(&origin);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.windows(2).all(|p| p[1] < p[0]));
        assert!(KdeSurrogate::new(s.data().clone(), 0.0).is_err());
    }

    #[test]
    fn no_decision_dependence_means_agreement() {
        // outcomes drawn at one fixed decision carry no decision signal
        let q = QuadraticTestbed::default().with_noise(3.0);
        let anchor = Decision::zeros();
        let a = Decision::new([0.05, 0.1, 0.1, 0.0, 0.2, 0.2]).unwrap();
        let b = Decision::new([0.4, 0.0, 0.2, 0.1, 0.1, 0.9]).unwrap();
        let summed = |rows: Vec<Row>| mean(&rows.iter().map(|r| r.iter().sum::<f64>()).collect::<Vec<_>>());
        let mut diffs = Vec::new();
        for seed in 0..30 {
            let m = ScenarioMatrix::generate(&q, &anchor, 600, seed, false).unwrap();
            let mut d = TrainingSet::new();
            for (x, w) in design(600, seed).into_iter().zip(m.rows()) {
                d.push(x, *w);
            }
            let s = KdeSurrogate::new(d, 0.15).unwrap();
            diffs.push(summed(s.draw(&a, 100, seed)) - summed(s.draw(&b, 100, seed)));
        }
        let se = std_dev(&diffs) / (diffs.len() as f64).sqrt();
        assert!(mean(&diffs).abs() < 3.0 * se, "{} (se {se})", mean(&diffs));
    }

    #[test]
    fn surrogate_risk_is_deterministic() {
        let dgp = Dgp::standard(DgpKind::Dgp2);
        let mut d = TrainingSet::new();
        for (i, x) in design(300, 2).into_iter().enumerate() {
            d.push(x, dgp.sample(&x, 1, i as u64, false).unwrap().rows()[0]);
        }
        let s = KdeSurrogate::new(d, 0.15).unwrap();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        let x = Decision::new([0.1; 6]).unwrap();
        assert_eq!(s.risk(&dgp, &x, 100, p, 3).unwrap(), s.risk(&dgp, &x, 100, p, 3).unwrap());
    }
}
