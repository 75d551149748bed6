//! Decision-tree ensembles: random forests (bootstrap + exhaustive
//! midpoint splits) and extremely randomized trees (full sample + one
//! uniform random threshold per candidate feature).
//!
//! Trees grow until pure or below `min_samples_split`; each node considers
//! `ceil(sqrt(width))` candidate features and picks the split minimizing
//! the weighted Gini impurity, lowest feature index and threshold first.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, rng_from, Dataset, Model};
use crate::error::{Error, Result};
use crate::features::NUM_CATEGORIES;
use crate::num::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub min_samples_split: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode<F: Real = f64> {
    Split {
        feature: usize,
        threshold: F,
        left: usize,
        right: usize,
    },
    Leaf {
        counts: [u32; NUM_CATEGORIES],
    },
}

/// One decision tree; the root is node 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree<F: Real = f64> {
    pub(crate) nodes: Vec<TreeNode<F>>,
}

impl<F: Real> Tree<F> {
    fn leaf_counts(&self, row: &[F]) -> &[u32; NUM_CATEGORIES] {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { counts } => return counts,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest<F: Real = f64> {
    pub(crate) config: ForestConfig,
    pub(crate) input_width: usize,
    pub(crate) trees: Vec<Tree<F>>,
}

impl<F: Real> Forest<F> {
    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    pub(crate) fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub(crate) fn from_parts(
        config: ForestConfig,
        input_width: usize,
        trees: Vec<Tree<F>>,
    ) -> Self {
        Self {
            config,
            input_width,
            trees,
        }
    }

    /// Mean of the per-tree leaf class distributions.
    pub fn scores(&self, row: &[F]) -> [F; NUM_CATEGORIES] {
        let mut acc = [F::zero(); NUM_CATEGORIES];
        for tree in &self.trees {
            let counts = tree.leaf_counts(row);
            let total = F::from_usize(counts.iter().map(|&c| c as usize).sum());
            for (a, &c) in acc.iter_mut().zip(counts) {
                *a += F::from_usize(c as usize) / total;
            }
        }
        let n = F::from_usize(self.trees.len());
        for a in &mut acc {
            *a /= n;
        }
        acc
    }

    /// Single pure-leaf forest that always answers `label`.
    #[cfg(test)]
    pub(crate) fn constant_for_tests(label: usize, input_width: usize) -> Self {
        let mut counts = [0u32; NUM_CATEGORIES];
        counts[label] = 1;
        Self {
            config: ForestConfig {
                trees: 1,
                min_samples_split: 2,
            },
            input_width,
            trees: vec![Tree {
                nodes: vec![TreeNode::Leaf { counts }],
            }],
        }
    }
}

fn gini(counts: &[u32; NUM_CATEGORIES], total: usize) -> f64 {
    let mut acc = 1.0;
    for &c in counts {
        let p = c as f64 / total as f64;
        acc -= p * p;
    }
    acc
}

fn label_counts<F: Real>(data: &Dataset<F>, idx: &[usize]) -> [u32; NUM_CATEGORIES] {
    let mut counts = [0u32; NUM_CATEGORIES];
    for &i in idx {
        counts[data.label(i)] += 1;
    }
    counts
}

struct TreeBuilder<'a, F: Real> {
    data: &'a Dataset<F>,
    candidates: usize,
    min_samples_split: usize,
    random_threshold: bool,
    nodes: Vec<TreeNode<F>>,
}

impl<'a, F: Real> TreeBuilder<'a, F> {
    fn grow(&mut self, idx: &[usize], rng: &mut rand_chacha::ChaCha8Rng) -> usize {
        let counts = label_counts(self.data, idx);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || idx.len() < self.min_samples_split {
            self.nodes.push(TreeNode::Leaf { counts });
            return self.nodes.len() - 1;
        }

        let width = self.data.width();
        let mut features: Vec<usize> = (0..width).collect();
        let (chosen, _) = features.partial_shuffle(rng, self.candidates.min(width));
        let mut chosen: Vec<usize> = chosen.to_vec();
        chosen.sort_unstable();

        let mut best: Option<(f64, usize, F)> = None;
        for &feature in &chosen {
            if self.random_threshold {
                self.consider_random_threshold(idx, feature, rng, &mut best);
            } else {
                self.consider_midpoint_scan(idx, feature, &mut best);
            }
        }

        let Some((_, feature, threshold)) = best else {
            self.nodes.push(TreeNode::Leaf { counts });
            return self.nodes.len() - 1;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.data.row(i)[feature] <= threshold);
        if left_idx.is_empty() || right_idx.is_empty() {
            self.nodes.push(TreeNode::Leaf { counts });
            return self.nodes.len() - 1;
        }
        let left = self.grow(&left_idx, rng);
        let right = self.grow(&right_idx, rng);
        self.nodes.push(TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        });
        self.nodes.len() - 1
    }

    /// Exhaustive scan over midpoints of consecutive distinct values.
    fn consider_midpoint_scan(
        &self,
        idx: &[usize],
        feature: usize,
        best: &mut Option<(f64, usize, F)>,
    ) {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| {
            self.data.row(a)[feature]
                .partial_cmp(&self.data.row(b)[feature])
                .expect("feature values are finite")
        });
        let n = order.len();
        let mut left = [0u32; NUM_CATEGORIES];
        let mut right = label_counts(self.data, idx);
        for pos in 0..n - 1 {
            let i = order[pos];
            left[self.data.label(i)] += 1;
            right[self.data.label(i)] -= 1;
            let v = self.data.row(i)[feature];
            let v_next = self.data.row(order[pos + 1])[feature];
            if v >= v_next {
                continue;
            }
            let two = F::from_f64(2.0);
            let mut threshold = (v + v_next) / two;
            // fall back to the left value if the midpoint rounds up to the
            // right value, keeping the <= partition equal to the prefix
            if !(threshold >= v && threshold < v_next) {
                threshold = v;
            }
            let nl = pos + 1;
            let nr = n - nl;
            let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / n as f64;
            if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
                *best = Some((score, feature, threshold));
            }
        }
    }

    /// One uniform threshold inside the observed range of the feature.
    fn consider_random_threshold(
        &self,
        idx: &[usize],
        feature: usize,
        rng: &mut rand_chacha::ChaCha8Rng,
        best: &mut Option<(f64, usize, F)>,
    ) {
        let mut lo = F::infinity();
        let mut hi = F::neg_infinity();
        for &i in idx {
            let v = self.data.row(i)[feature];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo >= hi {
            return;
        }
        let u = F::from_f64(rng.random::<f64>());
        let mut threshold = lo + (hi - lo) * u;
        if !(threshold >= lo && threshold < hi) {
            threshold = lo;
        }
        let mut left = [0u32; NUM_CATEGORIES];
        let mut right = [0u32; NUM_CATEGORIES];
        let mut nl = 0usize;
        for &i in idx {
            if self.data.row(i)[feature] <= threshold {
                left[self.data.label(i)] += 1;
                nl += 1;
            } else {
                right[self.data.label(i)] += 1;
            }
        }
        let nr = idx.len() - nl;
        if nl == 0 || nr == 0 {
            return;
        }
        let score = (nl as f64 * gini(&left, nl) + nr as f64 * gini(&right, nr)) / idx.len() as f64;
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            *best = Some((score, feature, threshold));
        }
    }
}

fn train_ensemble<F: Real>(
    data: &Dataset<F>,
    config: &ForestConfig,
    seed: u64,
    bootstrap: bool,
    random_threshold: bool,
) -> Result<Forest<F>> {
    if data.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    if config.trees == 0 {
        return Err(Error::Validation("forest needs at least one tree".into()));
    }
    let candidates = (data.width() as f64).sqrt().ceil() as usize;
    let trees: Vec<Tree<F>> = (0..config.trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_from(derive_seed(seed, t as u64));
            let n = data.len();
            let idx: Vec<usize> = if bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let mut builder = TreeBuilder {
                data,
                candidates,
                min_samples_split: config.min_samples_split.max(2),
                random_threshold,
                nodes: Vec::new(),
            };
            let root = builder.grow(&idx, &mut rng);
            let mut nodes = builder.nodes;
            // move the root to index 0 for a fixed entry point
            if root != 0 {
                nodes.swap(0, root);
                let moved = root;
                for node in &mut nodes {
                    if let TreeNode::Split { left, right, .. } = node {
                        for child in [left, right] {
                            if *child == 0 {
                                *child = moved;
                            } else if *child == moved {
                                *child = 0;
                            }
                        }
                    }
                }
            }
            Tree { nodes }
        })
        .collect();
    Ok(Forest {
        config: config.clone(),
        input_width: data.width(),
        trees,
    })
}

/// Bootstrap sampling with exhaustive midpoint splits.
pub fn train_random_forest<F: Real>(
    data: &Dataset<F>,
    config: &ForestConfig,
    seed: u64,
) -> Result<Model<F>> {
    Ok(Model::Forest(train_ensemble(
        data, config, seed, true, false,
    )?))
}

/// Full training set per tree with one random threshold per candidate.
pub fn train_extra_trees<F: Real>(
    data: &Dataset<F>,
    config: &ForestConfig,
    seed: u64,
) -> Result<Model<F>> {
    Ok(Model::ExtraTrees(train_ensemble(
        data, config, seed, false, true,
    )?))
}
