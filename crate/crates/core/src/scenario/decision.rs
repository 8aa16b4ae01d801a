use crate::error::{domain, Result};
use std::fmt;
use std::ops::Index;

/// Number of decision components.
pub const DIM_X: usize = 6;
/// Number of uncertain-parameter components.
pub const DIM_W: usize = 5;

/// Upper bound for each of the first five allocations.
pub const ALLOC_MAX: f64 = 0.70;
/// Cap on the summed allocation `x_1 + ... + x_5`.
pub const ALLOC_BUDGET: f64 = 0.85;
/// Slack used when checking the budget so that projection is idempotent.
const BUDGET_SLACK: f64 = 1e-12;

/// A feasible decision: `x_j in [0, 0.70]` for the five allocations,
/// `x_6 in [0, 1]`, and at most 0.85 allocated in total.
#[derive(Clone, Copy, PartialEq)]
pub struct Decision([f64; DIM_X]);

impl Decision {
    /// Validates a raw vector without modifying it.
    pub fn new(x: [f64; DIM_X]) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return domain("decision has non-finite components");
        }
        for (j, v) in x[..DIM_W].iter().enumerate() {
            if !(0.0..=ALLOC_MAX).contains(v) {
                return domain(format!("x{} = {v} outside [0, {ALLOC_MAX}]", j + 1));
            }
        }
        if !(0.0..=1.0).contains(&x[5]) {
            return domain(format!("x6 = {} outside [0, 1]", x[5]));
        }
        let total: f64 = x[..DIM_W].iter().sum();
        if total > ALLOC_BUDGET + BUDGET_SLACK {
            return domain(format!("allocations sum to {total} > {ALLOC_BUDGET}"));
        }
        Ok(Decision(x))
    }

    pub fn zeros() -> Self {
        Decision([0.0; DIM_X])
    }

    pub fn as_array(&self) -> &[f64; DIM_X] {
        &self.0
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.0.to_vec()
    }

    /// Unallocated share `x_0 = max(0, 1 - sum_j x_j)`.
    pub fn residual(&self) -> f64 {
        (1.0 - self.allocated()).max(0.0)
    }

    pub fn allocated(&self) -> f64 {
        self.0[..DIM_W].iter().sum()
    }

    pub fn distance(&self, other: &Decision) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }

    pub fn sq_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }
}

impl Index<usize> for Decision {
    type Output = f64;
    fn index(&self, j: usize) -> &f64 {
        &self.0[j]
    }
}

impl fmt::Debug for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Decision({:?})", self.0)
    }
}

impl TryFrom<&[f64]> for Decision {
    type Error = crate::Error;
    fn try_from(v: &[f64]) -> Result<Self> {
        let arr: [f64; DIM_X] =
            v.try_into().map_err(|_| crate::Error::Domain(format!("expected {DIM_X} components, got {}", v.len())))?;
        Decision::new(arr)
    }
}

/// Clamps every component into its box, then rescales the first five
/// multiplicatively if their sum exceeds the budget. Idempotent.
pub fn feasible_project(raw: &[f64; DIM_X]) -> Result<Decision> {
    if raw.iter().any(|v| !v.is_finite()) {
        return domain("cannot project a non-finite vector");
    }
    Ok(Decision(project_in_place(*raw)))
}

pub(crate) fn project_in_place(mut x: [f64; DIM_X]) -> [f64; DIM_X] {
    for v in &mut x[..DIM_W] {
        *v = v.clamp(0.0, ALLOC_MAX);
    }
    x[5] = x[5].clamp(0.0, 1.0);
    let total: f64 = x[..DIM_W].iter().sum();
    if total > ALLOC_BUDGET + BUDGET_SLACK {
        let scale = ALLOC_BUDGET / total;
        for v in &mut x[..DIM_W] {
            *v *= scale;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn feasible_points_are_fixed() {
        let x = [0.1, 0.2, 0.05, 0.3, 0.2, 0.9];
        assert_eq!(feasible_project(&x).unwrap().as_array(), &x);
    }

    #[test]
    fn over_budget_is_rescaled() {
        let d = feasible_project(&[0.5, 0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let expect = [0.425, 0.425, 0.0, 0.0, 0.0, 0.5];
        for (a, b) in d.as_array().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn clamp_then_scale() {
        let d = feasible_project(&[-1.0, 2.0, 0.0, 0.0, 0.0, 2.0]).unwrap();
        assert_eq!(d.as_array(), &[0.0, 0.7, 0.0, 0.0, 0.0, 1.0]);
        assert!(Decision::new(*d.as_array()).is_ok());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(feasible_project(&[f64::NAN, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
        assert!(Decision::new([0.8, 0.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn residual_allocation() {
        let d = Decision::new([0.1, 0.1, 0.1, 0.1, 0.1, 0.0]).unwrap();
        assert!((d.residual() - 0.5).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn projection_is_feasible_and_idempotent(raw in proptest::array::uniform6(-3.0f64..3.0)) {
            let once = feasible_project(&raw).unwrap();
            prop_assert!(Decision::new(*once.as_array()).is_ok());
            let twice = feasible_project(once.as_array()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
