//! Heavy-tailed process: Gaussian copula with scaled Student-t marginals.

use super::constants::{Dgp1Costs, PAIRS};
use super::decision::{Decision, DIM_W};
use super::dgp::{repaired, MarginalParams};
use super::matrix::Row;
use crate::error::Result;

/// Location, scale, tail weight and raw pair correlations at `x`.
#[allow(clippy::type_complexity)]
pub fn raw_params(x: &Decision) -> ([f64; 5], [f64; 5], [f64; 5], [f64; 10]) {
    let [x1, x2, x3, x4, x5, x6] = *x.as_array();
    let x0 = x.residual();
    let mu = [
        2.10 - 1.50 * x6 - 1.10 * x1 + 1.20 * x0 + 0.75 * x2 * x3 - 0.55 * x1 * x6 * x6,
        2.30 - 1.30 * x1 - 1.70 * x3 + 0.95 * x0 - 0.65 * x6 * x6 + 0.45 * x2 * x2,
        1.90 - 1.50 * x2 - 1.05 * x6 + 0.75 * x0 + 0.55 * x1 * x2 - 0.35 * x3 * x6,
        1.70 - 1.20 * x4 - 0.90 * x6 + 0.60 * x0 + 0.40 * x3 * x5 - 0.30 * x2 * x4,
        1.50 - 1.00 * x5 - 0.80 * x6 + 0.50 * x0 + 0.35 * x1 * x4 - 0.25 * x3 * x3,
    ];
    let sigma = [
        0.20 + 0.75 * (1.0 - x6) * (1.0 - x1) + 0.30 * x0,
        0.24 + 0.65 * (1.0 - x3) + 0.28 * (1.0 - x6) + 0.22 * x0,
        0.22 + 0.60 * (1.0 - x2) + 0.20 * (1.0 - x6) + 0.16 * x0,
        0.18 + 0.50 * (1.0 - x4) + 0.18 * (1.0 - x6) + 0.14 * x0,
        0.16 + 0.45 * (1.0 - x5) + 0.15 * (1.0 - x6) + 0.12 * x0,
    ];
    let nu = [3.0 + 2.5 * x6, 3.0 + 2.0 * x3, 3.0 + 1.5 * x2, 3.5 + 2.0 * x4, 3.5 + 1.5 * x5];
    // order follows PAIRS: 12 13 14 15 23 24 25 34 35 45
    let r = [
        0.55 + 0.28 * (1.0 - x6),
        0.20 + 0.28 * (1.0 - x1),
        0.15 + 0.20 * (1.0 - x2),
        0.10 + 0.18 * (1.0 - x3),
        0.50 + 0.32 * (1.0 - 2.0 * x2),
        0.20 + 0.22 * (1.0 - x4),
        0.15 + 0.18 * (1.0 - x5),
        0.25 + 0.20 * (1.0 - x3),
        0.18 + 0.16 * (1.0 - x4),
        0.30 + 0.25 * (1.0 - 2.0 * x5),
    ];
    (mu, sigma, nu, r)
}

pub fn params(x: &Decision) -> Result<MarginalParams> {
    let (mu, sigma, nu, r) = raw_params(x);
    let (raw_corr, corr) = repaired(&r)?;
    Ok(MarginalParams { mu, sigma, nu: Some(nu), raw_corr, corr })
}

/// Damage + hinge penalty + capped exponential tail penalty + cross damage + allocation cost.
pub fn cost(w: &Row, x: &Decision, c: &Dgp1Costs) -> f64 {
    let x6 = x[5];
    let pos = w.map(|v| v.max(0.0));
    let mut dmg = 0.0;
    let mut hp = 0.0;
    let mut top = f64::NEG_INFINITY;
    for j in 0..DIM_W {
        dmg += c.dmg_a[j] * pos[j] * pos[j] * (1.0 - x[j]);
        hp += c.hp_b[j] * (w[j] - (c.hp_t0[j] + c.hp_t1[j] * x6)).max(0.0);
        top = top.max(w[j]);
    }
    let ep = (c.ep_kappa * (c.ep_beta * top - c.ep_gamma).exp()).min(c.ep_cap);
    let del: f64 = PAIRS.iter().zip(&c.del_d).map(|(&(j, k), d)| d * pos[j] * pos[k]).sum();
    dmg + hp + ep + del + allocation_cost(x, c)
}

pub fn allocation_cost(x: &Decision, c: &Dgp1Costs) -> f64 {
    c.ac_q * x.sq_norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::constants::CostConstants;
    use nalgebra::SymmetricEigen;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn zero_decision_values() {
        let p = params(&Decision::zeros()).unwrap();
        assert!(close(p.mu[0], 3.30));
        assert!(close(p.sigma[0], 1.25));
        assert_eq!(p.nu.unwrap()[0], 3.0);
    }

    #[test]
    fn full_x6_values() {
        let x = Decision::new([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let p = params(&x).unwrap();
        assert!(close(p.nu.unwrap()[0], 5.5));
        assert!(close(p.raw_corr[(0, 1)], 0.55));
    }

    #[test]
    fn r23_at_upper_x2() {
        let x = Decision::new([0.0, 0.70, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let p = params(&x).unwrap();
        assert!(close(p.raw_corr[(1, 2)], 0.372));
        assert!(close(p.raw_corr[(2, 1)], 0.372));
    }

    #[test]
    fn repaired_correlation_is_valid_everywhere() {
        let grid = [0.0, 0.35, 0.70];
        for &a in &grid {
            for &b in &grid {
                for &c in &[0.0, 1.0] {
                    let x = crate::scenario::feasible_project(&[a, b, 0.1, 0.0, b, c]).unwrap();
                    let p = params(&x).unwrap();
                    assert!(SymmetricEigen::new(p.corr).eigenvalues.min() > 0.0);
                    for j in 0..5 {
                        assert_eq!(p.corr[(j, j)], 1.0);
                        assert!(p.sigma[j] > 0.0 && p.nu.unwrap()[j] > 2.0);
                    }
                }
            }
        }
    }

    #[test]
    fn cost_at_zero_scenario() {
        let c = CostConstants::default().dgp1;
        let x = Decision::new([0.1, 0.2, 0.0, 0.1, 0.0, 0.5]).unwrap();
        let base = (c.ep_kappa * (-c.ep_gamma).exp()).min(c.ep_cap);
        assert!((cost(&[0.0; 5], &x, &c) - (allocation_cost(&x, &c) + base)).abs() < 1e-9);
        // every variable component is nonnegative
        for w in [[-3.0; 5], [1.0, -2.0, 4.0, 0.5, 9.0]] {
            assert!(cost(&w, &x, &c) >= allocation_cost(&x, &c));
        }
    }

    #[test]
    fn tail_penalty_is_capped() {
        let c = CostConstants::default().dgp1;
        let x = Decision::zeros();
        let a = cost(&[100.0, 0.0, 0.0, 0.0, 0.0], &x, &c);
        let b = cost(&[100.0, 0.0, 0.0, 0.0, 0.0], &x, &Dgp1Costs { ep_cap: 0.0, ..c.clone() });
        assert!((a - b - c.ep_cap).abs() < 1e-6 * a);
    }
}
