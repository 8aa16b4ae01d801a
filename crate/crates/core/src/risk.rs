//! Empirical mean + CVaR estimators.

use crate::error::{domain, Result};
use crate::scenario::{Decision, Dgp, Simulator};
use crate::seed::Rng;
use crate::stats::{mean, median, quantile_sorted};
use rand::Rng as _;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    lambda: f64,
    alpha: f64,
}

impl RiskParams {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return domain(format!("lambda must be finite and nonnegative, got {lambda}"));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return domain(format!("alpha must lie in (0, 1), got {alpha}"));
        }
        Ok(RiskParams { lambda, alpha })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub total: f64,
    pub expected_cost: f64,
    pub cvar: f64,
    pub n_draws: usize,
}

/// Tail mass `n (1 - alpha)`, snapped to the nearest integer when it is one up to rounding.
fn tail_mass(n: usize, alpha: f64) -> f64 {
    let m = n as f64 * (1.0 - alpha);
    let r = m.round();
    if (m - r).abs() <= 1e-9 * m.max(1.0) {
        r
    } else {
        m
    }
}

/// Average of the worst `n (1 - alpha)` costs, the boundary order statistic
/// carrying the fractional remainder. Equals the minimum over `tau` of
/// `tau + sum_i (c_i - tau)^+ / (n (1 - alpha))`.
pub fn empirical_cvar(costs: &[f64], alpha: f64) -> Result<f64> {
    if costs.is_empty() {
        return domain("CVaR of an empty sample");
    }
    if !(0.0..1.0).contains(&alpha) {
        return domain(format!("alpha must lie in [0, 1), got {alpha}"));
    }
    let n = costs.len();
    let m = tail_mass(n, alpha);
    let k = (m.ceil() as usize).clamp(1, n);
    let mut v = costs.to_vec();
    // descending partition: v[..k-1] are the k-1 largest, v[k-1] is the k-th largest
    v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    let head: f64 = v[..k - 1].iter().sum();
    let boundary = v[k - 1];
    Ok((head + (m - (k - 1) as f64) * boundary) / m)
}

pub fn spectral_risk(costs: &[f64], params: RiskParams) -> Result<RiskEstimate> {
    let cvar = empirical_cvar(costs, params.alpha)?;
    let expected_cost = mean(costs);
    Ok(RiskEstimate { total: expected_cost + params.lambda * cvar, expected_cost, cvar, n_draws: costs.len() })
}

/// Influence-function standard error of the spectral-risk estimate.
pub fn spectral_risk_se(costs: &[f64], params: RiskParams) -> Result<f64> {
    if costs.len() < 2 {
        return domain("standard error needs at least two costs");
    }
    let mut sorted = costs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let var = quantile_sorted(&sorted, params.alpha);
    let scale = 1.0 / (1.0 - params.alpha);
    let phi: Vec<f64> = costs.iter().map(|&c| c + params.lambda * (var + scale * (c - var).max(0.0))).collect();
    Ok(crate::stats::std_dev(&phi) / (costs.len() as f64).sqrt())
}

/// Direct evaluation at `x` from `n` fresh draws of the true process.
pub fn oracle_evaluate(
    x: &Decision,
    dgp: &Dgp,
    n: usize,
    params: RiskParams,
    seed: u64,
    antithetic: bool,
) -> Result<RiskEstimate> {
    if n < 2 {
        return domain("oracle evaluation needs at least two draws");
    }
    let m = dgp.sample(x, n, seed, antithetic)?;
    spectral_risk(&m.costs(dgp as &dyn Simulator, x)?, params)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Median,
    Mean,
}

/// Percentile bootstrap interval of the median or mean.
pub fn bootstrap_ci(
    values: &[f64],
    statistic: Statistic,
    n_boot: usize,
    level: f64,
    rng: &mut Rng,
) -> Result<(f64, f64)> {
    if values.is_empty() {
        return domain("bootstrap of an empty sample");
    }
    if n_boot < 2 {
        return domain("bootstrap needs at least two replicates");
    }
    if !(level > 0.0 && level < 1.0) {
        return domain(format!("confidence level must lie in (0, 1), got {level}"));
    }
    let n = values.len();
    let mut resample = vec![0.0; n];
    let mut stats = Vec::with_capacity(n_boot);
    for _ in 0..n_boot {
        for r in &mut resample {
            *r = values[rng.random_range(0..n)];
        }
        stats.push(match statistic {
            Statistic::Median => median(&resample)?,
            Statistic::Mean => mean(&resample),
        });
    }
    stats.sort_by(f64::total_cmp);
    let tail = 0.5 * (1.0 - level);
    let lo = quantile_sorted(&stats, tail);
    let hi = quantile_sorted(&stats, 1.0 - tail);
    Ok((lo, hi.max(lo)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::DgpKind;
    use crate::seed::stream;
    use proptest::prelude::*;

    /// Minimum of the discrete RU objective over the sample points, which is
    /// where the piecewise-linear objective attains its minimum.
    fn ru_min(costs: &[f64], alpha: f64) -> f64 {
        let denom = costs.len() as f64 * (1.0 - alpha);
        costs
            .iter()
            .map(|&t| t + costs.iter().map(|c| (c - t).max(0.0)).sum::<f64>() / denom)
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn fixtures() {
        assert_eq!(empirical_cvar(&[2.0; 3], 0.9).unwrap(), 2.0);
        assert!((empirical_cvar(&[1.0, 2.0, 3.0, 4.0], 0.0).unwrap() - 2.5).abs() < 1e-15);
        assert!((empirical_cvar(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap() - 3.5).abs() < 1e-15);
        assert!((ru_min(&[1.0, 2.0, 3.0, 4.0], 0.5) - 3.5).abs() < 1e-15);
        assert!(empirical_cvar(&[], 0.5).is_err());
        assert!(empirical_cvar(&[1.0], 1.0).is_err());
        assert!(empirical_cvar(&[1.0], -0.1).is_err());
    }

    #[test]
    fn spectral_fixtures() {
        let c = [1.0, 2.0, 3.0, 4.0];
        let e = spectral_risk(&c, RiskParams::new(0.0, 0.5).unwrap()).unwrap();
        assert_eq!(e.total, 2.5);
        let e = spectral_risk(&c, RiskParams::new(0.5, 0.5).unwrap()).unwrap();
        assert!((e.total - 4.25).abs() < 1e-15);
        let e = spectral_risk(&[5.0], RiskParams::new(0.7, 0.95).unwrap()).unwrap();
        assert!((e.total - 8.5).abs() < 1e-15);
        assert!(RiskParams::new(-0.1, 0.5).is_err());
        assert!(RiskParams::new(0.1, 0.0).is_err());
    }

    #[test]
    fn fractional_tail_weight() {
        // n(1-alpha) = 2.5: top two in full, third at half weight
        let c = [0.0, 1.0, 5.0, 7.0, 10.0, 2.0, 3.0, 4.0, 6.0, 8.0];
        let v = empirical_cvar(&c, 0.75).unwrap();
        assert!((v - (10.0 + 8.0 + 0.5 * 7.0) / 2.5).abs() < 1e-12);
        assert!((v - ru_min(&c, 0.75)).abs() < 1e-12);
    }

    #[test]
    fn oracle_evaluate_is_deterministic() {
        let d = Dgp::standard(DgpKind::Dgp1);
        let x = Decision::new([0.1, 0.2, 0.1, 0.1, 0.1, 0.5]).unwrap();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        let a = oracle_evaluate(&x, &d, 200, p, 3, true).unwrap();
        assert_eq!(a, oracle_evaluate(&x, &d, 200, p, 3, true).unwrap());
        assert!(oracle_evaluate(&x, &d, 201, p, 3, true).is_err());
    }

    #[test]
    fn point_mass_gives_scaled_cost() {
        let x = Decision::new([0.1, 0.2, 0.1, 0.1, 0.1, 0.5]).unwrap();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        for kind in [DgpKind::Dgp1, DgpKind::Dgp2] {
            let d = Dgp::standard(kind).with_dispersion(0.0);
            let mp = d.params(&x).unwrap();
            let w: [f64; 5] = std::array::from_fn(|j| if kind == DgpKind::Dgp1 { mp.mu[j] } else { mp.mu[j].exp() });
            let c = d.cost(&x, &w);
            let e = oracle_evaluate(&x, &d, 50, p, 9, false).unwrap();
            assert!((e.total - 1.7 * c).abs() <= 1e-12 * c.abs());
        }
    }

    #[test]
    fn two_seeds_agree_within_standard_errors() {
        let d = Dgp::standard(DgpKind::Dgp1);
        let x = Decision::new([0.15, 0.15, 0.15, 0.15, 0.15, 0.5]).unwrap();
        let p = RiskParams::new(0.7, 0.95).unwrap();
        let a = d.sample(&x, 2000, 11, false).unwrap().costs(&d, &x).unwrap();
        let b = d.sample(&x, 2000, 12, false).unwrap().costs(&d, &x).unwrap();
        let (ja, jb) = (spectral_risk(&a, p).unwrap().total, spectral_risk(&b, p).unwrap().total);
        let se = (spectral_risk_se(&a, p).unwrap().powi(2) + spectral_risk_se(&b, p).unwrap().powi(2)).sqrt();
        assert!((ja - jb).abs() < 4.0 * se, "{ja} vs {jb}, se {se}");
    }

    #[test]
    fn bootstrap_fixtures() {
        let mut rng = stream(1);
        assert_eq!(bootstrap_ci(&[3.0; 7], Statistic::Median, 50, 0.95, &mut rng).unwrap(), (3.0, 3.0));
        let values: Vec<f64> = (1..=100).map(f64::from).collect();
        let mut hits = 0;
        for s in 0..50 {
            let (lo, hi) = bootstrap_ci(&values, Statistic::Median, 400, 0.95, &mut stream(s)).unwrap();
            assert!(lo <= hi);
            if lo <= 50.5 && 50.5 <= hi {
                hits += 1;
            }
        }
        assert!(hits >= 45);
        assert!(bootstrap_ci(&[], Statistic::Mean, 10, 0.9, &mut rng).is_err());
        assert!(bootstrap_ci(&[1.0], Statistic::Mean, 1, 0.9, &mut rng).is_err());
    }

    #[test]
    fn bootstrap_bounds_are_percentiles() {
        let values: Vec<f64> = (0..30).map(|i| ((i * 7919) % 31) as f64).collect();
        let (lo, hi) = bootstrap_ci(&values, Statistic::Mean, 400, 0.95, &mut stream(5)).unwrap();
        // replay the same stream by hand
        let mut rng = stream(5);
        let mut stats: Vec<f64> =
            (0..400).map(|_| (0..30).map(|_| values[rng.random_range(0..30)]).sum::<f64>() / 30.0).collect();
        stats.sort_by(f64::total_cmp);
        assert_eq!(lo, quantile_sorted(&stats, 0.025));
        assert_eq!(hi, quantile_sorted(&stats, 0.975));
    }

    proptest! {
        #[test]
        fn matches_ru_minimum(costs in proptest::collection::vec(-100.0f64..100.0, 1..50), alpha in 0.0f64..0.99) {
            let ours = empirical_cvar(&costs, alpha).unwrap();
            let scale = costs.iter().fold(1.0f64, |a, c| a.max(c.abs()));
            prop_assert!((ours - ru_min(&costs, alpha)).abs() <= 1e-9 * scale);
        }

        #[test]
        fn coherence(costs in proptest::collection::vec(-50.0f64..50.0, 1..60), alpha in 0.0f64..0.99,
                     shift in -100.0f64..100.0, k in 0.01f64..100.0) {
            let base = empirical_cvar(&costs, alpha).unwrap();
            let shifted: Vec<f64> = costs.iter().map(|c| c + shift).collect();
            let scaled: Vec<f64> = costs.iter().map(|c| c * k).collect();
            prop_assert!((empirical_cvar(&shifted, alpha).unwrap() - (base + shift)).abs() <= 1e-10 * (1.0 + base.abs() + shift.abs()));
            prop_assert!((empirical_cvar(&scaled, alpha).unwrap() - k * base).abs() <= 1e-10 * (1.0 + (k * base).abs()));
        }

        #[test]
        fn monotone_in_alpha(costs in proptest::collection::vec(-50.0f64..50.0, 2..80)) {
            let mut prev = f64::NEG_INFINITY;
            for i in 0..20 {
                let a = i as f64 / 20.0;
                let v = empirical_cvar(&costs, a).unwrap();
                prop_assert!(v >= prev - 1e-12);
                prev = v;
            }
            let mean = costs.iter().sum::<f64>() / costs.len() as f64;
            prop_assert!(empirical_cvar(&costs, 0.9).unwrap() >= mean - 1e-12);
        }

        #[test]
        fn affine_in_lambda(costs in proptest::collection::vec(-50.0f64..50.0, 1..40)) {
            let at = |l: f64| spectral_risk(&costs, RiskParams::new(l, 0.9).unwrap()).unwrap();
            let (a, b, c) = (at(0.0), at(0.5), at(1.5));
            prop_assert!((b.total - a.total - 0.5 * a.cvar).abs() <= 1e-10 * (1.0 + a.cvar.abs()));
            prop_assert!((c.total - a.total - 1.5 * a.cvar).abs() <= 1e-10 * (1.0 + a.cvar.abs()));
            prop_assert!((b.total - (b.expected_cost + 0.5 * b.cvar)).abs() <= 1e-12 * (1.0 + b.total.abs()));
        }
    }
}
