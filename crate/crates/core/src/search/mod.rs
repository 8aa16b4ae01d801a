//! Optimisation primitives shared by the four-phase optimiser and the
//! competitors. Everything works on plain `&[f64]` points of any dimension;
//! the feasible region is supplied through [`Domain`].

pub mod adam;
pub mod cem;
pub mod de;
pub mod fd;
pub mod gp;
pub mod lhd;
pub mod qn;

pub use adam::{adam_optimize, AdamParams};
pub use cem::{cem_optimize, CemParams, CemResult};
pub use de::{de_optimize, DeParams};
pub use fd::{crn_risk, fd_gradient, fd_gradient_crn, CrnMode};
pub use gp::{expected_improvement, gp_expected_improvement, gp_fit, GpHyper, GpModel};
pub use lhd::{latin_hypercube, maximin_lhd, min_pairwise_distance};
pub use qn::{bounded_quasi_newton, FnObjective, QnParams, QnResult, QnStatus, SmoothObjective};

use crate::error::{domain, Result};
use crate::scenario::decision::project_in_place;
use crate::scenario::{Decision, ALLOC_BUDGET, ALLOC_MAX, DIM_W, DIM_X};

/// Tolerance for "sitting on a bound".
const ACTIVE_EPS: f64 = 1e-12;

/// A closed convex region with a cheap projection.
pub trait Domain: Sync {
    fn lower(&self) -> &[f64];
    fn upper(&self) -> &[f64];

    fn dim(&self) -> usize {
        self.lower().len()
    }

    /// Maps any point into the region. Must be idempotent.
    fn project(&self, x: &mut [f64]);

    /// Zeroes the parts of direction `d` that leave the region immediately from `x`.
    fn restrict(&self, x: &[f64], d: &mut [f64]) {
        box_restrict(self.lower(), self.upper(), x, d);
    }

    fn projected(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        self.project(&mut y);
        y
    }
}

fn box_restrict(lo: &[f64], hi: &[f64], x: &[f64], d: &mut [f64]) {
    for j in 0..d.len() {
        if (x[j] <= lo[j] + ACTIVE_EPS && d[j] < 0.0) || (x[j] >= hi[j] - ACTIVE_EPS && d[j] > 0.0) {
            d[j] = 0.0;
        }
    }
}

/// Axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxBounds {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return domain("bounds must be non-empty and of equal length");
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return domain("need finite lo <= hi in every coordinate");
        }
        Ok(BoxBounds { lo, hi })
    }

    pub fn unit(dim: usize) -> Self {
        BoxBounds { lo: vec![0.0; dim], hi: vec![1.0; dim] }
    }

    /// The box part of the decision set.
    pub fn decision_box() -> Self {
        let mut hi = vec![ALLOC_MAX; DIM_X];
        hi[DIM_W] = 1.0;
        BoxBounds { lo: vec![0.0; DIM_X], hi }
    }

    pub fn width(&self, j: usize) -> f64 {
        self.hi[j] - self.lo[j]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

impl Domain for BoxBounds {
    fn lower(&self) -> &[f64] {
        &self.lo
    }

    fn upper(&self) -> &[f64] {
        &self.hi
    }

    fn project(&self, x: &mut [f64]) {
        for ((v, a), b) in x.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(*a, *b);
        }
    }
}

/// The decision set: the box plus the allocation budget.
#[derive(Debug, Clone)]
pub struct DecisionSpace {
    bounds: BoxBounds,
}

impl DecisionSpace {
    pub fn new() -> Self {
        DecisionSpace { bounds: BoxBounds::decision_box() }
    }

    pub fn bounds(&self) -> &BoxBounds {
        &self.bounds
    }

    /// Projects and wraps a point. Panics on a non-finite input.
    pub fn decision(&self, x: &[f64]) -> Decision {
        let arr: [f64; DIM_X] = x.try_into().expect("decision points have six components");
        crate::scenario::feasible_project(&arr).expect("finite point")
    }
}

impl Default for DecisionSpace {
    fn default() -> Self {
        Self::new()
    }
}

impl Domain for DecisionSpace {
    fn lower(&self) -> &[f64] {
        self.bounds.lower()
    }

    fn upper(&self) -> &[f64] {
        self.bounds.upper()
    }

    fn project(&self, x: &mut [f64]) {
        let arr: [f64; DIM_X] = (&*x).try_into().expect("decision points have six components");
        x.copy_from_slice(&project_in_place(arr));
    }

    fn restrict(&self, x: &[f64], d: &mut [f64]) {
        box_restrict(self.lower(), self.upper(), x, d);
        let allocated: f64 = x[..DIM_W].iter().sum();
        if allocated < ALLOC_BUDGET - 1e-10 {
            return;
        }
        // on the budget face: move within it by removing the mean over the
        // free allocation coordinates, re-fixing any that then hit zero
        let mut free: Vec<usize> = (0..DIM_W).filter(|&j| x[j] < ALLOC_MAX - ACTIVE_EPS || d[j] < 0.0).collect();
        for _ in 0..DIM_W {
            let excess: f64 = d[..DIM_W].iter().sum();
            if excess <= 0.0 || free.is_empty() {
                return;
            }
            let shift = excess / free.len() as f64;
            for &j in &free {
                d[j] -= shift;
            }
            let before = free.len();
            free.retain(|&j| {
                if x[j] <= ACTIVE_EPS && d[j] < 0.0 {
                    d[j] = 0.0;
                    false
                } else {
                    true
                }
            });
            if free.len() == before {
                return;
            }
        }
    }
}

/// Points with their scores, kept in step.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<Vec<f64>>,
    pub scores: Vec<f64>,
}

impl Population {
    pub fn new(members: Vec<Vec<f64>>, scores: Vec<f64>) -> Result<Self> {
        if members.len() != scores.len() {
            return domain("members and scores differ in length");
        }
        Ok(Population { members, scores })
    }

    /// Scores every member; non-finite scores become `+inf`.
    pub fn evaluate<F: FnMut(&[f64]) -> f64>(members: Vec<Vec<f64>>, mut f: F) -> Self {
        let scores = members.iter().map(|m| finite_or_inf(f(m))).collect();
        Population { members, scores }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn best_index(&self) -> usize {
        argmin(&self.scores)
    }

    pub fn best(&self) -> (&[f64], f64) {
        let i = self.best_index();
        (&self.members[i], self.scores[i])
    }

    /// Indices ordered by ascending score, ties by position.
    pub fn ranking(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[a].total_cmp(&self.scores[b]).then(a.cmp(&b)));
        idx
    }
}

pub(crate) fn finite_or_inf(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

/// First index of the smallest value (NaN ranks last).
pub(crate) fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] || (v[best].is_nan() && !v[i].is_nan()) {
            best = i;
        }
    }
    best
}
