use super::Domain;
use crate::seed::{stream, Rng};
use rand::seq::SliceRandom;
use rand::Rng as _;

/// One random Latin hypercube on the unit cube: in every dimension the
/// points occupy the `n` strata `[k/n, (k+1)/n)` once each.
pub fn latin_hypercube(n: usize, dim: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(rng);
        for (i, p) in pts.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[d] = (perm[i] as f64 + u) / n as f64;
        }
    }
    pts
}

pub fn min_pairwise_distance(pts: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let d2: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            best = best.min(d2);
        }
    }
    best.sqrt()
}

/// Best of `n_restarts` Latin hypercubes by minimum pairwise distance,
/// scaled to the domain's box and then projected into the domain.
pub fn maximin_lhd<D: Domain + ?Sized>(n: usize, domain: &D, seed: u64, n_restarts: usize) -> Vec<Vec<f64>> {
    assert!(n >= 1, "design needs at least one point");
    let dim = domain.dim();
    let mut rng = stream(seed);
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    for _ in 0..n_restarts.max(1) {
        let cand = latin_hypercube(n, dim, &mut rng);
        let score = min_pairwise_distance(&cand);
        if best.as_ref().is_none_or(|b| score > b.0) {
            best = Some((score, cand));
        }
    }
    let (lo, hi) = (domain.lower(), domain.upper());
    let mut pts = best.map(|b| b.1).unwrap_or_default();
    for p in &mut pts {
        for d in 0..dim {
            p[d] = lo[d] + p[d] * (hi[d] - lo[d]);
        }
        domain.project(p);
    }
    pts
}
