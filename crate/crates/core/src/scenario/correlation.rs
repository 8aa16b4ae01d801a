use crate::error::{domain, Result};
use nalgebra::{Matrix5, SymmetricEigen};

/// Smallest eigenvalue kept by the repair.
pub const EIGEN_FLOOR: f64 = 1e-6;
const OFF_DIAGONAL_LIMIT: f64 = 0.99;

/// Turns a raw decision-dependent correlation matrix into a positive-definite
/// one: off-diagonals are clamped to `[-0.99, 0.99]`, eigenvalues below
/// `1e-6` are clipped, and the result is rescaled to a unit diagonal.
/// Matrices that are already comfortably positive definite pass through unchanged.
pub fn correlation_repair(raw: &Matrix5<f64>) -> Result<Matrix5<f64>> {
    let mut m = *raw;
    for i in 0..5 {
        for j in (i + 1)..5 {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return domain("correlation matrix has non-finite entries");
            }
            if (a - b).abs() > 1e-12 {
                return domain(format!("correlation matrix not symmetric at ({i}, {j})"));
            }
            let v = a.clamp(-OFF_DIAGONAL_LIMIT, OFF_DIAGONAL_LIMIT);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
        m[(i, i)] = 1.0;
    }
    let eig = SymmetricEigen::new(m);
    if eig.eigenvalues.min() >= EIGEN_FLOOR {
        return Ok(m);
    }
    let clipped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let rebuilt = eig.eigenvectors * Matrix5::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    let scale = rebuilt.diagonal().map(|d| 1.0 / d.sqrt());
    let mut out = Matrix5::zeros();
    for i in 0..5 {
        for j in 0..5 {
            out[(i, j)] = if i == j { 1.0 } else { 0.5 * (rebuilt[(i, j)] + rebuilt[(j, i)]) * scale[i] * scale[j] };
        }
    }
    Ok(out)
}
