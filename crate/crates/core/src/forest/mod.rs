//! Conditional weighted forest sampling: a tree ensemble over decisions whose
//! leaf co-membership defines per-query weights on the training outcomes.

mod cwfs;
mod tree;

pub use cwfs::{
    jittered_draws, silverman_bandwidth, surrogate_risk, systematic_resample, systematic_resample_at,
    ConditionalSampler,
};
pub use tree::{Node, Tree};

use crate::error::{domain, Result};
use crate::scenario::{Decision, Row, DIM_X};
use crate::seed::{Rng, SeedTree};
use rand::seq::index::sample;
use rayon::prelude::*;
use tree::GrowParams;

/// Decisions paired with one observed outcome each.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingSet {
    xs: Vec<Decision>,
    ws: Vec<Row>,
}

impl TrainingSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: Decision, w: Row) {
        self.xs.push(x);
        self.ws.push(w);
    }

    pub fn extend(&mut self, other: &TrainingSet) {
        self.xs.extend_from_slice(&other.xs);
        self.ws.extend_from_slice(&other.ws);
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.xs
    }

    pub fn outcomes(&self) -> &[Row] {
        &self.ws
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_node: usize,
    /// features tried per split
    pub mtry: usize,
    /// share of the data each tree is grown on, drawn without replacement
    pub sample_fraction: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams { n_trees: 70, min_node: 15, mtry: 3, sample_fraction: 0.5 }
    }
}

/// A fitted ensemble. Immutable; queries are safe from many threads.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    trees: Vec<Tree>,
    n_train: usize,
}

impl ForestModel {
    pub fn fit(data: &TrainingSet, params: &ForestParams, seed: u64) -> Result<Self> {
        let n = data.len();
        if params.n_trees == 0 || params.min_node == 0 {
            return domain("forest needs at least one tree and a positive node size");
        }
        if n < 2 * params.min_node {
            return domain(format!("forest needs at least {} points, got {n}", 2 * params.min_node));
        }
        let xs: Vec<[f64; DIM_X]> = data.xs.iter().map(|d| *d.as_array()).collect();
        let grow = GrowParams { min_node: params.min_node, mtry: params.mtry.max(1) };
        let m = ((params.sample_fraction * n as f64).round() as usize).clamp(1, n);
        let root = SeedTree::new(seed).child("forest");
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|k| {
                let mut rng: Rng = root.index(k as u64).rng();
                let mut sub: Vec<u32> = sample(&mut rng, n, m).into_iter().map(|i| i as u32).collect();
                sub.sort_unstable();
                Tree::grow(&xs, &data.ws, sub, &grow, &mut rng)
            })
            .collect();
        Ok(ForestModel { trees, n_train: n })
    }

    /// Hand-assembled model.
    pub fn from_trees(trees: Vec<Tree>, n_train: usize) -> Self {
        ForestModel { trees, n_train }
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// `w_i(x) = (1/K) sum_k 1[x_i in l_k(x)] / |l_k(x)|`.
    pub fn leaf_weights(&self, x: &Decision) -> Vec<f64> {
        let mut w = vec![0.0; self.n_train];
        let k = self.trees.len() as f64;
        for t in &self.trees {
            let members = t.members(t.leaf_of(x.as_array()));
            let share = 1.0 / (k * members.len() as f64);
            for &i in members {
                w[i as usize] += share;
            }
        }
        w
    }
}

#[cfg(test)]
mod tests {
    use super::tree::Node;
    use super::*;
    use crate::scenario::feasible_project;
    use crate::seed::stream;
    use rand::Rng as _;
    use rand_distr::{Distribution, StandardNormal};

    fn random_decision(rng: &mut Rng) -> Decision {
        feasible_project(&std::array::from_fn(|j| {
            if j < 5 {
                rng.random_range(0.0..0.4)
            } else {
                rng.random_range(0.0..1.0)
            }
        }))
        .unwrap()
    }

    fn noise_data(n: usize, seed: u64) -> TrainingSet {
        let mut rng = stream(seed);
        let mut d = TrainingSet::new();
        for _ in 0..n {
            let x = random_decision(&mut rng);
            let w = std::array::from_fn(|_| StandardNormal.sample(&mut rng));
            d.push(x, w);
        }
        d
    }

    fn signal_data(n: usize, seed: u64) -> TrainingSet {
        let mut rng = stream(seed);
        let mut d = TrainingSet::new();
        for _ in 0..n {
            let x = random_decision(&mut rng);
            let w = std::array::from_fn(|j| {
                10.0 * x[j % DIM_X]
                    + 5.0 * x[5]
                    + 0.1 * {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    }
            });
            d.push(x, w);
        }
        d
    }

    fn leaf(members: Vec<u32>) -> Node {
        Node::Leaf { members }
    }

    #[test]
    fn single_tree_weights() {
        let t = Tree::from_nodes(vec![
            Node::Split { feature: 0, threshold: 0.3, left: 1, right: 2 },
            leaf(vec![3, 7]),
            leaf(vec![0, 1, 2, 4, 5, 6]),
        ])
        .unwrap();
        let m = ForestModel::from_trees(vec![t], 8);
        let w = m.leaf_weights(&Decision::zeros());
        assert_eq!(w, vec![0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 0.5]);
    }

    #[test]
    fn two_singleton_trees() {
        let a = Tree::from_nodes(vec![leaf(vec![3])]).unwrap();
        let b = Tree::from_nodes(vec![leaf(vec![7])]).unwrap();
        let w = ForestModel::from_trees(vec![a, b], 8).leaf_weights(&Decision::zeros());
        assert_eq!(w[3], 0.5);
        assert_eq!(w[7], 0.5);
        assert_eq!(w.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn node_size_bounds_leaves() {
        assert!(ForestModel::fit(&noise_data(29, 1), &ForestParams::default(), 4).is_err());
        let d = noise_data(30, 1);
        for p in [ForestParams::default(), ForestParams { sample_fraction: 1.0, ..ForestParams::default() }] {
            let m = ForestModel::fit(&d, &p, 4).unwrap();
            assert!(m.trees().iter().all(|t| t.n_leaves() <= 2));
        }
    }

    #[test]
    fn every_index_in_one_leaf_per_tree() {
        let d = signal_data(400, 2);
        let m = ForestModel::fit(&d, &ForestParams::default(), 7).unwrap();
        for t in m.trees() {
            let mut seen = vec![0u32; d.len()];
            for (i, n) in t.nodes.iter().enumerate() {
                if let Node::Leaf { members } = n {
                    assert!(!members.is_empty(), "empty leaf {i}");
                    for &j in members {
                        seen[j as usize] += 1;
                    }
                }
            }
            assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn fitting_is_deterministic() {
        let d = signal_data(300, 3);
        let a = ForestModel::fit(&d, &ForestParams::default(), 9).unwrap();
        let b = ForestModel::fit(&d, &ForestParams::default(), 9).unwrap();
        assert_eq!(a, b);
        let c = ForestModel::fit(&d, &ForestParams::default(), 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identical_inputs_give_single_leaves() {
        let mut d = TrainingSet::new();
        let mut rng = stream(1);
        for _ in 0..100 {
            d.push(Decision::zeros(), std::array::from_fn(|_| rng.random_range(0.0..1.0)));
        }
        let m = ForestModel::fit(&d, &ForestParams::default(), 1).unwrap();
        assert!(m.trees().iter().all(|t| t.n_leaves() == 1));
        let w = m.leaf_weights(&Decision::zeros());
        assert!(w.iter().all(|&v| (v - 0.01).abs() < 1e-15));
    }

    #[test]
    fn constant_outputs_give_valid_weights() {
        let mut d = noise_data(200, 5);
        for w in &mut d.ws {
            *w = [1.0; 5];
        }
        let m = ForestModel::fit(&d, &ForestParams::default(), 2).unwrap();
        let w = m.leaf_weights(&Decision::zeros());
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_on_simplex() {
        let mut rng = stream(77);
        for s in 0..10u64 {
            let d = noise_data(120 + 40 * s as usize, s);
            let m = ForestModel::fit(&d, &ForestParams { n_trees: 15, ..ForestParams::default() }, s).unwrap();
            for _ in 0..20 {
                let w = m.leaf_weights(&random_decision(&mut rng));
                assert!(w.iter().all(|&v| v >= 0.0));
                assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uninformative_inputs_spread_weight() {
        let n = 500;
        let mut total = 0.0;
        let mut rng = stream(8);
        for s in 0..20 {
            let d = noise_data(n, 100 + s);
            let m = ForestModel::fit(&d, &ForestParams::default(), s).unwrap();
            let w = m.leaf_weights(&random_decision(&mut rng));
            total += w.iter().cloned().fold(0.0, f64::max);
        }
        let avg_max = total / 20.0;
        // noise still drives splits down to the node size, so weights stay
        // local at the leaf scale (about 1/40 here), never far above it
        assert!(avg_max < 10.0 / n as f64, "average max weight {avg_max} vs {}", 10.0 / n as f64);
    }

    fn local_mass(d: &TrainingSet, w: &[f64], q: &Decision, radius: f64) -> (f64, f64) {
        let inside: Vec<usize> = (0..d.len()).filter(|&i| d.xs[i].distance(q) <= radius).collect();
        let mass: f64 = inside.iter().map(|&i| w[i]).sum();
        (mass, inside.len() as f64 / d.len() as f64)
    }

    #[test]
    fn weights_concentrate_near_the_query() {
        let mut ratio = 0.0;
        let mut count = 0.0;
        let mut rng = stream(31);
        for s in 0..5 {
            let d = signal_data(1000, 200 + s);
            let m = ForestModel::fit(&d, &ForestParams::default(), s).unwrap();
            for _ in 0..20 {
                let q = random_decision(&mut rng);
                let (mass, base) = local_mass(&d, &m.leaf_weights(&q), &q, 0.1);
                if base > 0.0 {
                    ratio += mass / base;
                    count += 1.0;
                }
            }
        }
        assert!(ratio / count >= 2.0, "locality factor {}", ratio / count);
    }

    #[test]
    fn augmentation_raises_local_mass() {
        let mut before = 0.0;
        let mut after = 0.0;
        for s in 0..20 {
            let mut rng = stream(500 + s);
            let d = signal_data(1200, 300 + s);
            let q = random_decision(&mut rng);
            let m = ForestModel::fit(&d, &ForestParams::default(), s).unwrap();
            before += local_mass(&d, &m.leaf_weights(&q), &q, 0.05).0;
            let mut aug = d.clone();
            for _ in 0..700 {
                let raw: [f64; DIM_X] = std::array::from_fn(|j| {
                    q[j] + 0.025 * {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z
                    }
                });
                let x = feasible_project(&raw).unwrap();
                let w = std::array::from_fn(|j| {
                    10.0 * x[j % DIM_X]
                        + 5.0 * x[5]
                        + 0.1 * {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            z
                        }
                });
                aug.push(x, w);
            }
            let m2 = ForestModel::fit(&aug, &ForestParams::default(), s).unwrap();
            after += local_mass(&aug, &m2.leaf_weights(&q), &q, 0.05).0;
        }
        assert!(after > before, "{after} <= {before}");
    }
}
