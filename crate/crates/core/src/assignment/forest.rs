use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::PseudoLabeledSet;
use crate::{seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RfParams {
    pub n_trees: usize,
    /// Features tried per node; `None` means ⌈√width⌉.
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            features_per_split: None,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Gini classification tree, arena-stored with the root at 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTree {
    nodes: Vec<Node>,
}

impl ClassTree {
    pub fn classify(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { class } => return class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfClassifier {
    pub width: usize,
    pub params: RfParams,
    pub seed: u64,
    pub trees: Vec<ClassTree>,
}

impl RfClassifier {
    /// Trains `n_trees` trees, each on its own bootstrap resample with an
    /// RNG stream derived from `seed`, so the result does not depend on the
    /// thread count.
    pub fn fit(u: &PseudoLabeledSet, params: RfParams, seed: u64) -> Result<Self> {
        if u.len() < 2 {
            return Err(Error::invalid("random forest needs at least two rows"));
        }
        if params.n_trees == 0 || params.min_leaf == 0 || params.features_per_split == Some(0) {
            return Err(Error::invalid(format!("invalid forest parameters {params:?}")));
        }
        let width = u.width();
        let mtry = params
            .features_per_split
            .unwrap_or_else(|| (width as f64).sqrt().ceil() as usize)
            .clamp(1, width.max(1));
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive(seed, "rf-tree", t as u64));
                let n = u.len();
                let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
                let mut grower = Grower {
                    u,
                    mtry,
                    min_leaf: params.min_leaf,
                    rng,
                    nodes: Vec::new(),
                };
                grower.grow(sample);
                ClassTree { nodes: grower.nodes }
            })
            .collect();
        Ok(RfClassifier {
            width,
            params,
            seed,
            trees,
        })
    }

    /// Majority vote; ties go to the lower class id.
    pub fn classify(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.width {
            return Err(Error::Width {
                expected: self.width,
                actual: x.len(),
            });
        }
        let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
        for t in &self.trees {
            *votes.entry(t.classify(x)).or_insert(0) += 1;
        }
        let mut best = (0, 0);
        for (class, count) in votes {
            if count > best.1 {
                best = (class, count);
            }
        }
        Ok(best.0)
    }
}

struct Grower<'a> {
    u: &'a PseudoLabeledSet,
    mtry: usize,
    min_leaf: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn gini(counts: &BTreeMap<usize, usize>, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.values().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

fn majority(counts: &BTreeMap<usize, usize>) -> usize {
    let mut best = (0, 0);
    for (&class, &count) in counts {
        if count > best.1 {
            best = (class, count);
        }
    }
    best.0
}

impl Grower<'_> {
    fn counts(&self, rows: &[usize]) -> BTreeMap<usize, usize> {
        let mut c = BTreeMap::new();
        for &r in rows {
            *c.entry(self.u.labels[r]).or_insert(0) += 1;
        }
        c
    }

    fn grow(&mut self, rows: Vec<usize>) -> usize {
        let id = self.nodes.len();
        let counts = self.counts(&rows);
        self.nodes.push(Node::Leaf {
            class: majority(&counts),
        });
        if counts.len() < 2 || rows.len() < 2 * self.min_leaf {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&i| self.u.features[i][feature] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }

    /// Visits features in random order until `mtry` non-constant ones have
    /// been scored; returns the lowest weighted Gini split among them.
    fn best_split(&mut self, rows: &[usize]) -> Option<(usize, f64)> {
        let mut features: Vec<usize> = (0..self.u.width()).collect();
        features.shuffle(&mut self.rng);
        let n = rows.len();
        let total = self.counts(rows);
        let mut best: Option<(f64, usize, f64)> = None;
        let mut scored = 0;
        let mut order = rows.to_vec();
        for f in features {
            if scored == self.mtry {
                break;
            }
            let x = &self.u.features;
            order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]));
            if x[order[0]][f] == x[order[n - 1]][f] {
                continue;
            }
            scored += 1;
            let mut left: BTreeMap<usize, usize> = BTreeMap::new();
            let mut right = total.clone();
            for k in 0..n - 1 {
                let class = self.u.labels[order[k]];
                *left.entry(class).or_insert(0) += 1;
                *right.get_mut(&class).expect("class present") -= 1;
                let (lo, hi) = (x[order[k]][f], x[order[k + 1]][f]);
                let n_left = k + 1;
                if lo == hi || n_left < self.min_leaf || n - n_left < self.min_leaf {
                    continue;
                }
                let imp = (n_left as f64 * gini(&left, n_left) + (n - n_left) as f64 * gini(&right, n - n_left))
                    / n as f64;
                if best.is_none_or(|b| imp < b.0) {
                    best = Some((imp, f, lo + (hi - lo) / 2.0));
                }
            }
        }
        best.map(|b| (b.1, b.2))
    }
}
