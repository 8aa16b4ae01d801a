//! Multi-target regression tree grown on a subsample, with every training
//! point routed to a leaf afterwards.

use crate::error::{Error, Result};
use crate::scenario::{Row, DIM_W, DIM_X};
use crate::seed::Rng;
use rand::seq::index::sample;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// training indices routed here
        members: Vec<u32>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub(crate) nodes: Vec<Node>,
}

pub(crate) struct GrowParams {
    pub min_node: usize,
    pub mtry: usize,
}

impl Tree {
    /// Grows on `subsample` (indices into `xs`/`ws`), then routes all points.
    pub(crate) fn grow(
        xs: &[[f64; DIM_X]],
        ws: &[Row],
        subsample: Vec<u32>,
        params: &GrowParams,
        rng: &mut Rng,
    ) -> Tree {
        let mut tree = Tree { nodes: Vec::new() };
        let mut stack = vec![(tree.push_leaf(), subsample)];
        while let Some((node, members)) = stack.pop() {
            if let Some((feature, threshold)) = best_split(xs, ws, &members, params, rng) {
                let (l, r): (Vec<u32>, Vec<u32>) = members.iter().partition(|&&i| xs[i as usize][feature] <= threshold);
                let left = tree.push_leaf();
                let right = tree.push_leaf();
                tree.nodes[node] = Node::Split { feature, threshold, left, right };
                stack.push((right, r));
                stack.push((left, l));
            }
        }
        for (i, x) in xs.iter().enumerate() {
            let leaf = tree.leaf_of(x);
            if let Node::Leaf { members } = &mut tree.nodes[leaf] {
                members.push(i as u32);
            }
        }
        tree
    }

    fn push_leaf(&mut self) -> usize {
        self.nodes.push(Node::Leaf { members: Vec::new() });
        self.nodes.len() - 1
    }

    /// Index of the leaf node containing `x`.
    pub(crate) fn leaf_of(&self, x: &[f64; DIM_X]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Split { feature, threshold, left, right } => {
                    at = if x[*feature] <= *threshold { *left } else { *right }
                }
                Node::Leaf { .. } => return at,
            }
        }
    }

    pub(crate) fn members(&self, leaf: usize) -> &[u32] {
        match &self.nodes[leaf] {
            Node::Leaf { members } => members,
            Node::Split { .. } => &[],
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Builds a tree from explicit nodes, root first. Leaves list the
    /// training indices routed to them.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Tree> {
        let n = nodes.len();
        for node in &nodes {
            match node {
                Node::Split { feature, left, right, .. } => {
                    if *feature >= DIM_X || *left >= n || *right >= n || *left == 0 || *right == 0 {
                        return Err(Error::Config(format!("malformed split {node:?}")));
                    }
                }
                Node::Leaf { members } => {
                    if members.is_empty() {
                        return Err(Error::Config("empty leaf".into()));
                    }
                }
            }
        }
        if n == 0 {
            return Err(Error::Config("tree needs at least one node".into()));
        }
        Ok(Tree { nodes })
    }
}

/// Largest summed within-node sum-of-squares reduction over `mtry` random
/// features, subject to both children holding at least `min_node` members.
fn best_split(
    xs: &[[f64; DIM_X]],
    ws: &[Row],
    members: &[u32],
    params: &GrowParams,
    rng: &mut Rng,
) -> Option<(usize, f64)> {
    let n = members.len();
    if n < 2 * params.min_node {
        return None;
    }
    let mut total = [0.0; DIM_W];
    let mut total_sq = 0.0;
    for &i in members {
        for j in 0..DIM_W {
            let v = ws[i as usize][j];
            total[j] += v;
            total_sq += v * v;
        }
    }
    let parent_sse = total_sq - total.iter().map(|s| s * s).sum::<f64>() / n as f64;
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<u32> = members.to_vec();
    for feature in sample(rng, DIM_X, params.mtry.min(DIM_X)).into_iter() {
        order.sort_by(|&a, &b| xs[a as usize][feature].total_cmp(&xs[b as usize][feature]));
        let mut left = [0.0; DIM_W];
        let mut left_sq = 0.0;
        for pos in 0..n - 1 {
            let i = order[pos] as usize;
            for j in 0..DIM_W {
                let v = ws[i][j];
                left[j] += v;
                left_sq += v * v;
            }
            let nl = pos + 1;
            let nr = n - nl;
            if nl < params.min_node || nr < params.min_node {
                continue;
            }
            let here = xs[i][feature];
            let next = xs[order[pos + 1] as usize][feature];
            if here == next {
                continue;
            }
            let mut sse = left_sq - left.iter().map(|s| s * s).sum::<f64>() / nl as f64;
            let mut right_sq_sum = 0.0;
            for j in 0..DIM_W {
                let r = total[j] - left[j];
                right_sq_sum += r * r;
            }
            sse += (total_sq - left_sq) - right_sq_sum / nr as f64;
            let gain = parent_sse - sse;
            if best.is_none_or(|b| gain > b.0) {
                let mid = 0.5 * (here + next);
                best = Some((gain, feature, if mid < next { mid } else { here }));
            }
        }
    }
    best.filter(|b| b.0 > 0.0).map(|(_, f, t)| (f, t))
}
