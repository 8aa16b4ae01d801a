//! Shared fixtures for the benchmarks.

use acfs_core::forest::{ForestModel, ForestParams, TrainingSet};
use acfs_core::search::{maximin_lhd, DecisionSpace};
use acfs_core::{Decision, Dgp, DgpKind};

/// A decision inside the feasible set used by every benchmark.
pub fn probe() -> Decision {
    Decision::new([0.10, 0.15, 0.10, 0.20, 0.10, 0.40]).expect("feasible")
}

/// `n` design points with one draw each from the given process.
pub fn training_set(kind: DgpKind, n: usize, seed: u64) -> TrainingSet {
    let dgp = Dgp::standard(kind);
    let space = DecisionSpace::new();
    let mut data = TrainingSet::new();
    for (i, p) in maximin_lhd(n, &space, seed, 1).iter().enumerate() {
        let x = space.decision(p);
        let w = dgp.sample(&x, 1, seed.wrapping_add(i as u64), false).expect("draw").rows()[0];
        data.push(x, w);
    }
    data
}

pub fn forest(data: &TrainingSet, seed: u64) -> ForestModel {
    ForestModel::fit(data, &ForestParams::default(), seed).expect("fit")
}
