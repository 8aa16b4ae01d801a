use super::decision::{Decision, DIM_W, DIM_X};
use super::matrix::{Row, Simulator};
use crate::error::Result;

/// Convex test oracle: `C(W, x) = A |x - x*|^2 + c0 + sum_j W_j`.
///
/// With zero noise `W` is identically zero, so every estimator sees the
/// deterministic quadratic and the minimiser is known in closed form.
/// With positive noise `W_j = noise * (1 + x_j) * Z_j`, zero-mean and
/// decision dependent.
#[derive(Debug, Clone)]
pub struct QuadraticTestbed {
    pub center: [f64; DIM_X],
    pub scale: f64,
    pub offset: f64,
    pub noise: f64,
}

impl QuadraticTestbed {
    pub fn new(center: [f64; DIM_X], scale: f64, offset: f64) -> Self {
        QuadraticTestbed { center, scale, offset, noise: 0.0 }
    }

    pub fn with_noise(mut self, noise: f64) -> Self {
        self.noise = noise;
        self
    }

    /// Deterministic part of the cost.
    pub fn value(&self, x: &[f64; DIM_X]) -> f64 {
        let d: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        self.scale * d + self.offset
    }
}

impl Default for QuadraticTestbed {
    /// Interior minimiser with a visible curvature and a positive floor.
    fn default() -> Self {
        QuadraticTestbed::new([0.10, 0.15, 0.10, 0.20, 0.10, 0.40], 100.0, 5.0)
    }
}

impl Simulator for QuadraticTestbed {
    fn label(&self) -> &str {
        "quadratic"
    }

    fn transform(&self, x: &Decision, iid: &[Row]) -> Result<(Vec<Row>, Vec<Row>)> {
        let w = iid.iter().map(|z| std::array::from_fn(|j| self.noise * (1.0 + x[j]) * z[j])).collect();
        Ok((iid.to_vec(), w))
    }

    fn cost(&self, x: &Decision, w: &Row) -> f64 {
        self.value(x.as_array()) + w.iter().take(DIM_W).sum::<f64>()
    }
}
