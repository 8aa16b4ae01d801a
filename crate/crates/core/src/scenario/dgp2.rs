//! Right-skewed demand process: Gaussian copula with log-normal marginals.

use super::constants::{Dgp2Costs, Dgp2Params};
use super::decision::{Decision, DIM_W};
use super::dgp::{repaired, MarginalParams};
use super::matrix::Row;
use crate::error::Result;

/// Lower bound on every log-scale.
pub const SIGMA_FLOOR: f64 = 0.05;

pub fn raw_params(x: &Decision, t: &Dgp2Params) -> ([f64; 5], [f64; 5], [f64; 10]) {
    let x6 = x[5];
    let x0 = x.residual();
    let mut mu = [0.0; DIM_W];
    let mut sigma = [0.0; DIM_W];
    for j in 0..DIM_W {
        let xj = x[j];
        mu[j] = t.mu_base[j] + t.mu_own[j] * xj + t.mu_x6[j] * x6 + t.mu_res[j] * x0 + t.mu_int[j] * xj * x6;
        sigma[j] = (t.sigma_base[j] + t.sigma_slope[j] * (1.0 - xj) + t.sigma_cross[j] * x6).max(SIGMA_FLOOR);
    }
    let mut r = [0.0; 10];
    for p in 0..10 {
        r[p] = t.corr_b[p] + t.corr_c[p] * (1.0 - x6);
    }
    (mu, sigma, r)
}

pub fn params(x: &Decision, t: &Dgp2Params) -> Result<MarginalParams> {
    let (mu, sigma, r) = raw_params(x, t);
    let (raw_corr, corr) = repaired(&r)?;
    Ok(MarginalParams { mu, sigma, nu: None, raw_corr, corr })
}

/// Capacity thresholds at `x`.
pub fn capacity(x: &Decision, c: &Dgp2Costs) -> [f64; DIM_W] {
    std::array::from_fn(|j| c.cap_base[j] + c.cap_own[j] * x[j] + c.cap_x6[j] * x[5])
}

/// Holding + shortage + procurement + coordination + setup.
pub fn cost(w: &Row, x: &Decision, c: &Dgp2Costs) -> f64 {
    let cap = capacity(x, c);
    let mut hold = 0.0;
    let mut short = 0.0;
    let mut proc = 0.0;
    for j in 0..DIM_W {
        hold += c.hold_h[j] * (cap[j] - w[j]).max(0.0);
        short += c.short_s[j] * (w[j] - cap[j]).max(0.0);
        proc += c.proc_p[j] * w[j].max(0.0).powf(c.proc_exponent);
    }
    let mean_w = w.iter().sum::<f64>() / DIM_W as f64;
    let coord = c.coord_kappa * x.allocated() * mean_w;
    hold + short + proc + coord + setup_cost(x, c)
}

pub fn setup_cost(x: &Decision, c: &Dgp2Costs) -> f64 {
    c.setup_q * x.sq_norm()
}
