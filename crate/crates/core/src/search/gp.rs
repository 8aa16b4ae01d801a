//! Gaussian-process regression with a squared-exponential ARD kernel.

use super::qn::{bounded_quasi_newton, FnObjective, QnParams};
use super::{BoxBounds, Domain};
use crate::error::{Error, Result};
use crate::seed::stream;
use crate::special::{normal_cdf, normal_pdf};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng as _;

pub const NOISE_FLOOR: f64 = 1e-8;
const RESTARTS: usize = 5;
const MAX_JITTER: f64 = 1e-2;

/// Log-scale kernel parameters (inputs in the unit box, standardised targets).
#[derive(Debug, Clone, PartialEq)]
pub struct GpHyper {
    pub log_signal: f64,
    pub log_lengths: Vec<f64>,
    pub log_noise: f64,
}

impl GpHyper {
    pub fn default_for(dim: usize) -> Self {
        GpHyper { log_signal: 0.0, log_lengths: vec![0.3f64.ln(); dim], log_noise: 1e-4f64.ln() }
    }

    /// Search box for the log-parameters, signal first and noise last.
    pub fn bounds(dim: usize) -> BoxBounds {
        let mut lo = vec![0.01f64.ln()];
        let mut hi = vec![100f64.ln()];
        lo.extend(std::iter::repeat_n(0.01f64.ln(), dim));
        hi.extend(std::iter::repeat_n(20f64.ln(), dim));
        lo.push(NOISE_FLOOR.ln());
        hi.push(0.0);
        BoxBounds::new(lo, hi).expect("static bounds")
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = vec![self.log_signal];
        v.extend(&self.log_lengths);
        v.push(self.log_noise);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let d = v.len() - 2;
        GpHyper { log_signal: v[0], log_lengths: v[1..=d].to_vec(), log_noise: v[d + 1].max(NOISE_FLOOR.ln()) }
    }

    pub fn signal(&self) -> f64 {
        self.log_signal.exp()
    }

    pub fn noise(&self) -> f64 {
        self.log_noise.exp().max(NOISE_FLOOR)
    }
}

/// A fitted process. Immutable.
#[derive(Debug, Clone)]
pub struct GpModel {
    lo: Vec<f64>,
    span: Vec<f64>,
    xs: Vec<Vec<f64>>,
    ys: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
    hyper: GpHyper,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
    jitter: f64,
}

struct Prepared {
    lo: Vec<f64>,
    span: Vec<f64>,
    xs: Vec<Vec<f64>>,
    ys: DVector<f64>,
    y_mean: f64,
    y_scale: f64,
}

fn prepare(x: &[Vec<f64>], y: &[f64]) -> Result<Prepared> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Domain("inputs and targets must be non-empty and equal in length".into()));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|r| r.len() != dim) {
        return Err(Error::Domain("inputs must share a positive dimension".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite training data".into()));
    }
    let mut distinct = x.to_vec();
    distinct.sort_by(|a, b| {
        a.iter().zip(b).map(|(p, q)| p.total_cmp(q)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Domain("need at least two distinct inputs".into()));
    }
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for r in x {
        for d in 0..dim {
            lo[d] = lo[d].min(r[d]);
            hi[d] = hi[d].max(r[d]);
        }
    }
    let span: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| if b > a { b - a } else { 1.0 }).collect();
    let xs = x.iter().map(|r| (0..dim).map(|d| (r[d] - lo[d]) / span[d]).collect()).collect();
    let n = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / n;
    let sd = (y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n).sqrt();
    let y_scale = if sd > 1e-12 * y_mean.abs().max(1.0) { sd } else { 1.0 };
    let ys = DVector::from_iterator(y.len(), y.iter().map(|v| (v - y_mean) / y_scale));
    Ok(Prepared { lo, span, xs, ys, y_mean, y_scale })
}

fn signal_kernel(xs: &[Vec<f64>], h: &GpHyper) -> DMatrix<f64> {
    let n = xs.len();
    let s2 = h.signal();
    let inv: Vec<f64> = h.log_lengths.iter().map(|l| (-2.0 * l).exp()).collect();
    DMatrix::from_fn(n, n, |i, j| s2 * (-0.5 * sq_scaled(&xs[i], &xs[j], &inv)).exp())
}

fn sq_scaled(a: &[f64], b: &[f64], inv_l2: &[f64]) -> f64 {
    a.iter().zip(b).zip(inv_l2).map(|((p, q), w)| (p - q) * (p - q) * w).sum()
}

/// Cholesky of `k + noise I`, adding jitter until it succeeds.
fn factor(k: &DMatrix<f64>, noise: f64) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = k.nrows();
    let mut jitter = 0.0;
    loop {
        let mut m = k.clone();
        for i in 0..n {
            m[(i, i)] += noise + jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
        jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
        if jitter > MAX_JITTER {
            return Err(Error::Numerical("covariance not positive definite at maximum jitter".into()));
        }
    }
}

/// Log marginal likelihood of standardised targets and its gradient in the
/// log-parameters.
fn mll_and_grad(xs: &[Vec<f64>], ys: &DVector<f64>, h: &GpHyper) -> Option<(f64, Vec<f64>)> {
    let n = xs.len();
    let kf = signal_kernel(xs, h);
    let (chol, _) = factor(&kf, h.noise()).ok()?;
    let alpha = chol.solve(ys);
    let log_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let mll = -0.5 * ys.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    // W = alpha alpha^T - K^{-1}; dL/dtheta = 0.5 tr(W dK)
    let w = &alpha * alpha.transpose() - chol.inverse();
    let dim = h.log_lengths.len();
    let mut grad = vec![0.0; dim + 2];
    let inv: Vec<f64> = h.log_lengths.iter().map(|l| (-2.0 * l).exp()).collect();
    for i in 0..n {
        for j in 0..n {
            let wk = w[(i, j)] * kf[(i, j)];
            grad[0] += 0.5 * wk;
            for d in 0..dim {
                let diff = xs[i][d] - xs[j][d];
                grad[1 + d] += 0.5 * wk * diff * diff * inv[d];
            }
        }
    }
    grad[dim + 1] = 0.5 * w.trace() * h.noise();
    Some((mll, grad))
}

impl GpModel {
    /// Conditions on the data at fixed hyperparameters.
    pub fn with_hyper(x: &[Vec<f64>], y: &[f64], hyper: GpHyper) -> Result<Self> {
        let p = prepare(x, y)?;
        if hyper.log_lengths.len() != p.xs[0].len() {
            return Err(Error::Domain("one lengthscale per input dimension".into()));
        }
        let kf = signal_kernel(&p.xs, &hyper);
        let (chol, jitter) = factor(&kf, hyper.noise())?;
        let alpha = chol.solve(&p.ys);
        Ok(GpModel {
            lo: p.lo,
            span: p.span,
            xs: p.xs,
            ys: p.ys,
            y_mean: p.y_mean,
            y_scale: p.y_scale,
            hyper,
            chol,
            alpha,
            jitter,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn n_train(&self) -> usize {
        self.xs.len()
    }

    /// Log marginal likelihood of this model's standardised data under `h`.
    pub fn log_marginal_likelihood(&self, h: &GpHyper) -> f64 {
        mll_and_grad(&self.xs, &self.ys, h).map_or(f64::NEG_INFINITY, |r| r.0)
    }

    /// Posterior mean and variance of the latent function, original units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let u: Vec<f64> = x.iter().enumerate().map(|(d, v)| (v - self.lo[d]) / self.span[d]).collect();
        let s2 = self.hyper.signal();
        let inv: Vec<f64> = self.hyper.log_lengths.iter().map(|l| (-2.0 * l).exp()).collect();
        let kstar =
            DVector::from_iterator(self.xs.len(), self.xs.iter().map(|r| s2 * (-0.5 * sq_scaled(r, &u, &inv)).exp()));
        let mean = kstar.dot(&self.alpha);
        let v = self.chol.solve(&kstar);
        let var = (s2 - kstar.dot(&v)).max(0.0);
        (self.y_mean + self.y_scale * mean, var * self.y_scale * self.y_scale)
    }
}

/// Fits hyperparameters by maximising the marginal likelihood from the
/// default start plus random restarts, then conditions on the data.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64], seed: u64) -> Result<GpModel> {
    gp_fit_with_floor(x, y, seed, NOISE_FLOOR)
}

/// As [`gp_fit`], with a raised lower bound on the noise variance.
pub fn gp_fit_with_floor(x: &[Vec<f64>], y: &[f64], seed: u64, noise_floor: f64) -> Result<GpModel> {
    let p = prepare(x, y)?;
    let dim = p.xs[0].len();
    let mut bounds = GpHyper::bounds(dim);
    if noise_floor > NOISE_FLOOR {
        let mut lo = bounds.lower().to_vec();
        let hi = bounds.upper().to_vec();
        lo[dim + 1] = noise_floor.ln().min(hi[dim + 1]);
        bounds = BoxBounds::new(lo, hi)?;
    }
    let mut rng = stream(seed);
    let mut starts = vec![GpHyper::default_for(dim).to_vec()];
    for _ in 1..RESTARTS {
        starts.push(random_point(&bounds, &mut rng));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in starts {
        let mut obj = FnObjective::new(
            |v: &[f64]| mll_and_grad(&p.xs, &p.ys, &GpHyper::from_slice(v)).map_or(f64::INFINITY, |r| -r.0),
            |v: &[f64]| {
                mll_and_grad(&p.xs, &p.ys, &GpHyper::from_slice(v))
                    .map_or(vec![0.0; v.len()], |r| r.1.iter().map(|g| -g).collect())
            },
        );
        let Ok(r) = bounded_quasi_newton(&mut obj, &s, &bounds, &QnParams::with_max_iter(100)) else {
            continue;
        };
        if r.f.is_finite() && best.as_ref().is_none_or(|b| r.f < b.0) {
            best = Some((r.f, r.x));
        }
    }
    let Some((_, h)) = best else {
        return Err(Error::Numerical("marginal likelihood could not be evaluated at any start".into()));
    };
    GpModel::with_hyper(x, y, GpHyper::from_slice(&h))
}

pub(crate) fn random_point(b: &BoxBounds, rng: &mut crate::seed::Rng) -> Vec<f64> {
    b.lower().iter().zip(b.upper()).map(|(l, h)| rng.random_range(*l..=*h)).collect()
}

/// Closed-form expected improvement below `best` for a normal prediction.
pub fn expected_improvement(mean: f64, sd: f64, best: f64) -> f64 {
    if !(sd > 0.0) {
        return 0.0;
    }
    let z = (best - mean) / sd;
    ((best - mean) * normal_cdf(z) + sd * normal_pdf(z)).max(0.0)
}

pub fn gp_expected_improvement(model: &GpModel, candidates: &[Vec<f64>], best_observed: f64) -> Vec<f64> {
    candidates
        .iter()
        .map(|c| {
            let (m, v) = model.predict(c);
            expected_improvement(m, v.sqrt(), best_observed)
        })
        .collect()
}
