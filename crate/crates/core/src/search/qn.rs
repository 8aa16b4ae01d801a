use super::Domain;
use crate::error::{Error, Result};
use std::collections::VecDeque;

/// Objective and gradient callbacks for [`bounded_quasi_newton`].
pub trait SmoothObjective {
    fn value(&mut self, x: &[f64]) -> f64;
    fn gradient(&mut self, x: &[f64]) -> Vec<f64>;

    /// Called once for the start point and once for every accepted iterate.
    /// Returns `true` if values at `x` may now differ from the ones seen in
    /// the line search (for instance because a new scenario block was drawn),
    /// so the optimiser must re-evaluate.
    fn advance(&mut self, _x: &[f64]) -> bool {
        false
    }
}

/// Adapts a pair of closures.
pub struct FnObjective<F, G> {
    pub f: F,
    pub g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    pub fn new(f: F, g: G) -> Self {
        FnObjective { f, g }
    }
}

impl<F, G> SmoothObjective for FnObjective<F, G>
where
    F: FnMut(&[f64]) -> f64,
    G: FnMut(&[f64]) -> Vec<f64>,
{
    fn value(&mut self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    fn gradient(&mut self, x: &[f64]) -> Vec<f64> {
        (self.g)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QnParams {
    pub max_iter: usize,
    pub memory: usize,
    pub pg_tol: f64,
    pub step_tol: f64,
    pub armijo: f64,
    pub max_backtracks: usize,
}

impl Default for QnParams {
    fn default() -> Self {
        QnParams { max_iter: 80, memory: 10, pg_tol: 1e-6, step_tol: 1e-9, armijo: 1e-4, max_backtracks: 40 }
    }
}

impl QnParams {
    pub fn with_max_iter(max_iter: usize) -> Self {
        QnParams { max_iter, ..QnParams::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QnStatus {
    MaxIter,
    StepTol,
    GradTol,
    LineSearch,
}

#[derive(Debug, Clone)]
pub struct QnResult {
    pub x: Vec<f64>,
    pub f: f64,
    /// Value at the start point, as first evaluated.
    pub f0: f64,
    pub iterations: usize,
    pub status: QnStatus,
}

/// Limited-memory quasi-Newton over a convex domain. The search direction
/// is the two-loop product, with components that would leave the domain
/// removed; trial points are projected and accepted on an Armijo condition.
/// Returns the best accepted iterate, so `f <= f0`.
pub fn bounded_quasi_newton<O, D>(obj: &mut O, x0: &[f64], domain: &D, params: &QnParams) -> Result<QnResult>
where
    O: SmoothObjective + ?Sized,
    D: Domain + ?Sized,
{
    let n = domain.dim();
    if x0.len() != n {
        return Err(Error::Domain("start point has the wrong dimension".into()));
    }
    let mut x = domain.projected(x0);
    obj.advance(&x);
    let mut f = obj.value(&x);
    if !f.is_finite() {
        return Err(Error::Numerical("objective is not finite at the start point".into()));
    }
    let f0 = f;
    let mut g = obj.gradient(&x);
    let mut best = (x.clone(), f);
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut status = QnStatus::MaxIter;
    let mut iterations = 0;

    while iterations < params.max_iter {
        let step_back: Vec<f64> = x.iter().zip(&g).map(|(a, b)| a - b).collect();
        let pg = inf_norm_diff(&domain.projected(&step_back), &x);
        if pg < params.pg_tol {
            status = QnStatus::GradTol;
            break;
        }
        let mut d = two_loop(&g, &memory);
        domain.restrict(&x, &mut d);
        if dot(&g, &d) >= 0.0 {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            domain.restrict(&x, &mut d);
            if dot(&g, &d) >= 0.0 {
                status = QnStatus::GradTol;
                break;
            }
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut t = if memory.is_empty() { (0.1 / dmax).min(1.0) } else { 1.0 };

        let mut accepted = None;
        for _ in 0..params.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let mut xt = domain.projected(&trial);
            snap(&mut xt, domain);
            if inf_norm_diff(&xt, &x) < params.step_tol {
                break;
            }
            let slope: f64 = g.iter().zip(xt.iter().zip(&x)).map(|(gi, (a, b))| gi * (a - b)).sum();
            let ft = obj.value(&xt);
            if slope < 0.0 && ft.is_finite() && ft <= f + params.armijo * slope {
                accepted = Some((xt, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((xt, ft)) = accepted else {
            status = if memory.is_empty() { QnStatus::StepTol } else { QnStatus::LineSearch };
            // a failed search with curvature memory gets one retry along -g
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };
        iterations += 1;
        let f_new = if obj.advance(&xt) { obj.value(&xt) } else { ft };
        let g_new = obj.gradient(&xt);
        let s: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).max(1e-300) && sy > 0.0 {
            if memory.len() == params.memory {
                memory.pop_front();
            }
            memory.push_back((s.clone(), y, 1.0 / sy));
        }
        let moved = s.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        x = xt;
        f = f_new;
        g = g_new;
        if f < best.1 {
            best = (x.clone(), f);
        }
        if moved < params.step_tol {
            status = QnStatus::StepTol;
            break;
        }
        status = QnStatus::MaxIter;
    }

    Ok(QnResult { x: best.0, f: best.1, f0, iterations, status })
}

/// Puts coordinates that ended within rounding of a bound exactly on it.
fn snap<D: Domain + ?Sized>(x: &mut [f64], domain: &D) {
    for ((v, lo), hi) in x.iter_mut().zip(domain.lower()).zip(domain.upper()) {
        let tol = 1e-12 * (hi - lo).max(1.0);
        if (*v - lo).abs() <= tol {
            *v = *lo;
        } else if (*v - hi).abs() <= tol {
            *v = *hi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `-H g` from the stored curvature pairs.
fn two_loop(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in &mut q {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.iter().map(|v| -v).collect()
}
