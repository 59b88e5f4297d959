//! Regression tree used to divide the training samples.
//!
//! Each split minimises the summed squared error of the two children. The
//! tree is allowed to overfit: it is a clustering device whose nodes are cut
//! at some depth into divisions, not a final predictor.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::encoding::Encoder;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartParams {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for CartParams {
    fn default() -> Self {
        CartParams {
            min_leaf: 1,
            max_depth: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    /// Summed squared error of the two children.
    pub loss: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CartNode {
    /// Training row indices, ascending.
    pub samples: Vec<usize>,
    pub mean: f64,
    pub sse: f64,
    pub depth: usize,
    pub parent: Option<usize>,
    pub split: Option<Split>,
}

impl CartNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// Binary regression tree stored as a pre-order arena; `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "repr::Tree", try_from = "repr::Tree")]
pub struct CartTree {
    nodes: Vec<CartNode>,
    width: usize,
}

/// A set of training rows cut from the tree at some depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Division {
    pub id: usize,
    /// Tree node the division was cut at.
    pub node: usize,
    pub samples: Vec<usize>,
    pub mean: f64,
    pub n: usize,
    /// Population mean squared error of the performances.
    pub h: f64,
    /// Negated sample count.
    pub z: f64,
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Two-pass sum of squared deviations from the mean.
pub fn sse(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|y| (y - m) * (y - m)).sum()
}

/// Loss of a split: squared error of the left part plus that of the right.
pub fn split_loss(left: &[f64], right: &[f64]) -> Result<f64> {
    if left.is_empty() || right.is_empty() {
        return Err(Error::invalid("split with an empty side"));
    }
    Ok(sse(left) + sse(right))
}

impl CartTree {
    pub fn fit(x: &[Vec<f64>], y: &[f64], params: CartParams) -> Result<Self> {
        if x.is_empty() || x.len() != y.len() {
            return Err(Error::invalid(format!(
                "tree needs matching non-empty inputs, got {} rows and {} targets",
                x.len(),
                y.len()
            )));
        }
        if params.min_leaf == 0 {
            return Err(Error::invalid("min_leaf must be at least 1"));
        }
        let width = x[0].len();
        if let Some(row) = x.iter().find(|r| r.len() != width) {
            return Err(Error::Width {
                expected: width,
                actual: row.len(),
            });
        }
        let mut tree = CartTree {
            nodes: Vec::new(),
            width,
        };
        let builder = Builder { x, y, params };
        builder.grow(&mut tree.nodes, (0..x.len()).collect(), 0, None);
        Ok(tree)
    }

    /// Fits on encoded training rows.
    pub fn fit_dataset(train: &Dataset, encoder: &Encoder, params: CartParams) -> Result<Self> {
        let x = encoder.encode_dataset(train)?;
        Self::fit(&x, &train.performances(), params)
    }

    pub fn nodes(&self) -> &[CartNode] {
        &self.nodes
    }

    pub fn root(&self) -> &CartNode {
        &self.nodes[0]
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn leaf_index(&self, x: &[f64]) -> Result<usize> {
        if x.len() != self.width {
            return Err(Error::Width {
                expected: self.width,
                actual: x.len(),
            });
        }
        let mut i = 0;
        while let Some(s) = self.nodes[i].split {
            i = if x[s.feature] <= s.threshold { s.left } else { s.right };
        }
        Ok(i)
    }

    /// Mean performance of the leaf `x` falls into.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        Ok(self.nodes[self.leaf_index(x)?].mean)
    }

    fn division(&self, node: usize) -> Division {
        let nd = &self.nodes[node];
        let n = nd.samples.len();
        Division {
            id: 0,
            node,
            samples: nd.samples.clone(),
            mean: nd.mean,
            n,
            h: nd.sse / n as f64,
            z: -(n as f64),
        }
    }

    /// Every node at exactly depth `d` plus every leaf shallower than `d`, in
    /// pre-order.
    pub fn extract_divisions(&self, d: usize) -> Result<Vec<Division>> {
        if d == 0 {
            return Err(Error::invalid("division depth must be at least 1"));
        }
        let mut out = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            match node.split {
                Some(s) if node.depth < d => {
                    stack.push(s.right);
                    stack.push(s.left);
                }
                _ => out.push(self.division(i)),
            }
        }
        renumber(&mut out);
        Ok(out)
    }

    fn in_subtree(&self, mut node: usize, ancestor: usize) -> bool {
        loop {
            if node == ancestor {
                return true;
            }
            match self.nodes[node].parent {
                Some(p) => node = p,
                None => return false,
            }
        }
    }

    /// Replaces undersized divisions by their parent node until every
    /// division holds at least `min_size` rows or is the root. Collapsing a
    /// parent absorbs every division beneath it, so the result stays a
    /// partition.
    pub fn merge_small_divisions(&self, divisions: &[Division], min_size: usize) -> Result<Vec<Division>> {
        if min_size == 0 {
            return Err(Error::invalid("minimum division size must be at least 1"));
        }
        let mut divs = divisions.to_vec();
        while let Some(parent) = divs
            .iter()
            .find(|d| d.n < min_size && self.nodes[d.node].parent.is_some())
            .and_then(|d| self.nodes[d.node].parent)
        {
            divs.retain(|d| !self.in_subtree(d.node, parent));
            divs.push(self.division(parent));
            divs.sort_by_key(|d| d.node);
        }
        renumber(&mut divs);
        Ok(divs)
    }
}

fn renumber(divs: &mut [Division]) {
    for (i, d) in divs.iter_mut().enumerate() {
        d.id = i;
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    params: CartParams,
}

impl Builder<'_> {
    fn values(&self, samples: &[usize]) -> Vec<f64> {
        samples.iter().map(|&i| self.y[i]).collect()
    }

    fn grow(&self, nodes: &mut Vec<CartNode>, samples: Vec<usize>, depth: usize, parent: Option<usize>) -> usize {
        let ys = self.values(&samples);
        let id = nodes.len();
        let constant = ys.iter().all(|&v| v == ys[0]);
        let sse = if constant { 0.0 } else { sse(&ys) };
        nodes.push(CartNode {
            samples,
            mean: mean(&ys),
            sse,
            depth,
            parent,
            split: None,
        });

        let n = ys.len();
        if sse == 0.0 || n < 2 * self.params.min_leaf || depth >= self.params.max_depth {
            return id;
        }
        let Some(best) = self.best_split(&nodes[id].samples, sse) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = nodes[id]
            .samples
            .iter()
            .partition(|&&i| self.x[i][best.feature] <= best.threshold);
        let l = self.grow(nodes, left, depth + 1, Some(id));
        let r = self.grow(nodes, right, depth + 1, Some(id));
        nodes[id].split = Some(Split {
            feature: best.feature,
            threshold: best.threshold,
            loss: best.loss,
            left: l,
            right: r,
        });
        id
    }

    /// Exhaustive search over every feature and every midpoint between
    /// consecutive distinct values. A prefix-sum scan shortlists candidates,
    /// which are then scored with the two-pass `split_loss`; ties go to the
    /// lower feature index, then the lower threshold.
    fn best_split(&self, samples: &[usize], node_sse: f64) -> Option<Candidate> {
        let n = samples.len();
        let min_leaf = self.params.min_leaf;
        let shift = mean(&self.values(samples));
        let total: f64 = samples.iter().map(|&i| self.y[i] - shift).sum();
        let total_sq: f64 = samples.iter().map(|&i| (self.y[i] - shift).powi(2)).sum();

        let mut shortlist: Vec<(f64, usize, f64)> = Vec::new();
        let mut order: Vec<usize> = samples.to_vec();
        for f in 0..self.x[samples[0]].len() {
            order.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]).then(a.cmp(&b)));
            let (mut s, mut sq) = (0.0, 0.0);
            for k in 0..n - 1 {
                let yk = self.y[order[k]] - shift;
                s += yk;
                sq += yk * yk;
                let (lo, hi) = (self.x[order[k]][f], self.x[order[k + 1]][f]);
                let n_left = k + 1;
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let n_right = (n - n_left) as f64;
                let left = sq - s * s / n_left as f64;
                let right = (total_sq - sq) - (total - s).powi(2) / n_right;
                shortlist.push(((left + right).max(0.0), f, lo + (hi - lo) / 2.0));
            }
        }
        let fast_min = shortlist.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);
        if !fast_min.is_finite() {
            return None;
        }
        let tol = 1e-7 * node_sse + 1e-12 * total_sq.max(f64::MIN_POSITIVE);

        let mut best: Option<Candidate> = None;
        for &(approx, feature, threshold) in &shortlist {
            if approx > fast_min + tol {
                continue;
            }
            let (l, r): (Vec<f64>, Vec<f64>) = {
                let (li, ri): (Vec<usize>, Vec<usize>) =
                    samples.iter().partition(|&&i| self.x[i][feature] <= threshold);
                (self.values(&li), self.values(&ri))
            };
            let loss = split_loss(&l, &r).expect("candidate sides are non-empty");
            let better = match &best {
                None => true,
                Some(b) => {
                    loss < b.loss
                        || (loss == b.loss
                            && (feature < b.feature || (feature == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(Candidate {
                    feature,
                    threshold,
                    loss,
                });
            }
        }
        best
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    loss: f64,
}

/// Nested JSON form of the tree.
mod repr {
    use serde::{Deserialize, Serialize};

    use super::{CartNode, CartTree, Split};

    #[derive(Serialize, Deserialize)]
    pub struct Tree {
        width: usize,
        root: Node,
    }

    #[derive(Serialize, Deserialize)]
    struct Node {
        samples: Vec<usize>,
        mean: f64,
        sse: f64,
        depth: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        split: Option<Box<Branch>>,
    }

    #[derive(Serialize, Deserialize)]
    struct Branch {
        feature: usize,
        threshold: f64,
        loss: f64,
        left: Node,
        right: Node,
    }

    fn nest(nodes: &[CartNode], i: usize) -> Node {
        let n = &nodes[i];
        Node {
            samples: n.samples.clone(),
            mean: n.mean,
            sse: n.sse,
            depth: n.depth,
            split: n.split.map(|s| {
                Box::new(Branch {
                    feature: s.feature,
                    threshold: s.threshold,
                    loss: s.loss,
                    left: nest(nodes, s.left),
                    right: nest(nodes, s.right),
                })
            }),
        }
    }

    fn flatten(node: Node, parent: Option<usize>, out: &mut Vec<CartNode>) -> usize {
        let id = out.len();
        out.push(CartNode {
            samples: node.samples,
            mean: node.mean,
            sse: node.sse,
            depth: node.depth,
            parent,
            split: None,
        });
        if let Some(b) = node.split {
            let left = flatten(b.left, Some(id), out);
            let right = flatten(b.right, Some(id), out);
            out[id].split = Some(Split {
                feature: b.feature,
                threshold: b.threshold,
                loss: b.loss,
                left,
                right,
            });
        }
        id
    }

    impl From<CartTree> for Tree {
        fn from(t: CartTree) -> Self {
            Tree {
                width: t.width,
                root: nest(&t.nodes, 0),
            }
        }
    }

    impl TryFrom<Tree> for CartTree {
        type Error = String;

        fn try_from(t: Tree) -> Result<Self, String> {
            let mut nodes = Vec::new();
            flatten(t.root, None, &mut nodes);
            for n in &nodes {
                if let Some(s) = n.split {
                    if s.feature >= t.width {
                        return Err(format!("split feature {} out of range for width {}", s.feature, t.width));
                    }
                }
            }
            Ok(CartTree { nodes, width: t.width })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 18 samples: `rt_quality` = 0 gives a constant 300 (8 rows); with
    /// `rt_quality` = 1, `threads` <= 5 gives 122 and `threads` > 5 gives 40.
    pub(crate) fn figure_tree_data() -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for t in 1..=8 {
            x.push(vec![0.0, t as f64]);
            y.push(300.0);
        }
        for t in 1..=10 {
            x.push(vec![1.0, t as f64]);
            y.push(if t <= 5 { 122.0 } else { 40.0 });
        }
        (x, y)
    }

    fn sizes(divs: &[Division]) -> Vec<usize> {
        let mut s: Vec<usize> = divs.iter().map(|d| d.n).collect();
        s.sort_unstable();
        s
    }

    #[test]
    fn loss_examples() {
        assert_eq!(split_loss(&[1.0, 1.0], &[3.0, 3.0]).unwrap(), 0.0);
        assert_eq!(split_loss(&[0.0, 2.0], &[10.0]).unwrap(), 2.0);
        assert!(split_loss(&[], &[1.0]).is_err());
    }

    #[test]
    fn figure_tree_structure() {
        let (x, y) = figure_tree_data();
        let tree = CartTree::fit(&x, &y, CartParams::default()).unwrap();
        assert_eq!(tree.depth(), 2);
        let root = tree.root().split.unwrap();
        assert_eq!((root.feature, root.threshold), (0, 0.5));

        let d1 = tree.extract_divisions(1).unwrap();
        assert_eq!(sizes(&d1), [8, 10]);
        let d2 = tree.extract_divisions(2).unwrap();
        assert_eq!(sizes(&d2), [5, 5, 8]);
        assert!(d2.iter().any(|d| d.n == 5 && d.mean == 122.0));
        assert_eq!(tree.predict(&[1.0, 3.0]).unwrap(), 122.0);

        let ids: Vec<usize> = d2.iter().map(|d| d.id).collect();
        assert_eq!(ids, [0, 1, 2]);
    }

    #[test]
    fn merging() {
        let (x, y) = figure_tree_data();
        let tree = CartTree::fit(&x, &y, CartParams::default()).unwrap();
        let d2 = tree.extract_divisions(2).unwrap();
        assert_eq!(tree.merge_small_divisions(&d2, 5).unwrap(), d2);
        let merged = tree.merge_small_divisions(&d2, 6).unwrap();
        assert_eq!(sizes(&merged), [8, 10]);
        let all = tree.merge_small_divisions(&d2, 9).unwrap();
        assert_eq!(sizes(&all), [18]);
        assert_eq!(all[0].node, 0);
    }

    #[test]
    fn fourteen_and_four_merge_to_root() {
        let x: Vec<Vec<f64>> = (0..18).map(|i| vec![if i < 14 { 0.0 } else { 1.0 }]).collect();
        let y: Vec<f64> = (0..18).map(|i| if i < 14 { 10.0 } else { 50.0 }).collect();
        let tree = CartTree::fit(&x, &y, CartParams::default()).unwrap();
        let d = tree.extract_divisions(1).unwrap();
        assert_eq!(sizes(&d), [4, 14]);
        let m = tree.merge_small_divisions(&d, 5).unwrap();
        assert_eq!(sizes(&m), [18]);
    }

    #[test]
    fn constant_target_is_single_leaf() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, (i % 2) as f64]).collect();
        let tree = CartTree::fit(&x, &[0.1; 6], CartParams::default()).unwrap();
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.depth(), 0);
        let d = tree.extract_divisions(1).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].n, 6);
        assert!(tree.extract_divisions(0).is_err());
    }

    #[test]
    fn stopping_rules() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let y: Vec<f64> = (0..8).map(|i| (i * i) as f64).collect();
        let t = CartTree::fit(&x, &y, CartParams { min_leaf: 1, max_depth: 2 }).unwrap();
        assert_eq!(t.depth(), 2);
        let t = CartTree::fit(&x, &y, CartParams { min_leaf: 3, max_depth: 10 }).unwrap();
        assert!(t.nodes().iter().all(|n| n.samples.len() >= 3));
        assert!(CartTree::fit(&x, &y, CartParams { min_leaf: 0, max_depth: 3 }).is_err());
    }

    #[test]
    fn json_round_trip() {
        let (x, y) = figure_tree_data();
        let tree = CartTree::fit(&x, &y, CartParams::default()).unwrap();
        let json = serde_json::to_string(&tree).unwrap();
        assert!(json.contains("\"root\""));
        let back: CartTree = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tree);
    }
}
