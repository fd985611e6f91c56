//! CART regression tree on squared error, shared by the forest and the
//! boosted ensemble.
//!
//! Splits are `x[feature] <= threshold` where the threshold is a training
//! value, so fitted partitions depend only on the order of each feature.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Non-constant features to examine per node; `None` means all.
    pub max_features: Option<usize>,
}

/// Column-major view of a design matrix.
pub struct Columns {
    cols: Vec<Vec<f64>>,
}

impl Columns {
    pub fn from_rows(rows: &[Vec<f64>]) -> Columns {
        let d = rows.first().map_or(0, Vec::len);
        let cols = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Columns { cols }
    }

    pub fn n_features(&self) -> usize {
        self.cols.len()
    }
}

struct Builder<'a, R> {
    cols: &'a Columns,
    y: &'a [f64],
    params: TreeParams,
    rng: &'a mut R,
    nodes: Vec<Node>,
    order: Vec<usize>,
    scratch: Vec<(f64, usize)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl<R: Rng> Builder<'_, R> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let sum: f64 = idx.iter().map(|&i| self.y[i]).sum();
        self.nodes.push(Node::Leaf {
            value: sum / idx.len() as f64,
        });
        self.nodes.len() - 1
    }

    fn best_split(&mut self, idx: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let min_leaf = self.params.min_leaf.max(1);
        let mean = idx.iter().map(|&i| self.y[i]).sum::<f64>() / n as f64;
        let node_sse: f64 = idx.iter().map(|&i| (self.y[i] - mean).powi(2)).sum();
        let budget = self.params.max_features.unwrap_or(usize::MAX);
        self.order.shuffle(self.rng);
        let mut examined = 0;
        let mut best: Option<BestSplit> = None;
        for k in 0..self.order.len() {
            if examined >= budget {
                break;
            }
            let f = self.order[k];
            let col = &self.cols.cols[f];
            self.scratch.clear();
            self.scratch.extend(idx.iter().map(|&i| (col[i], i)));
            let lo = self
                .scratch
                .iter()
                .map(|p| p.0)
                .fold(f64::INFINITY, f64::min);
            let hi = self
                .scratch
                .iter()
                .map(|p| p.0)
                .fold(f64::NEG_INFINITY, f64::max);
            if lo == hi {
                continue;
            }
            examined += 1;
            self.scratch
                .sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            // centered running sum; the SSE reduction of a cut is
            // s² · n / (n_left · n_right)
            let mut left_sum = 0.0;
            for pos in 0..n - 1 {
                let (v, i) = self.scratch[pos];
                left_sum += self.y[i] - mean;
                let n_left = pos + 1;
                if n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                if v == self.scratch[pos + 1].0 {
                    continue;
                }
                let score = left_sum * left_sum * n as f64 / (n_left as f64 * (n - n_left) as f64);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature: f,
                        threshold: v,
                        score,
                    });
                }
            }
        }
        best.filter(|b| b.score > node_sse * 1e-14 && b.score > 0.0)
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let at_depth_limit = self.params.max_depth.is_some_and(|d| depth >= d);
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if at_depth_limit || pure || n < 2 * self.params.min_leaf.max(1) {
            return self.leaf(idx);
        }
        let Some(split) = self.best_split(idx) else {
            return self.leaf(idx);
        };
        let col = &self.cols.cols[split.feature];
        // stable partition keeps sample order deterministic
        let (mut left, mut right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| col[i] <= split.threshold);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 });
        let l = self.build(&mut left, depth + 1);
        let r = self.build(&mut right, depth + 1);
        self.nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        slot
    }
}

/// Fits a tree on the rows listed in `sample` (duplicates allowed).
pub fn fit_tree<R: Rng>(
    cols: &Columns,
    y: &[f64],
    sample: &[usize],
    params: TreeParams,
    rng: &mut R,
) -> RegressionTree {
    assert!(!sample.is_empty(), "tree needs at least one sample");
    let mut idx = sample.to_vec();
    let mut b = Builder {
        cols,
        y,
        params,
        rng,
        nodes: Vec::new(),
        order: (0..cols.n_features()).collect(),
        scratch: Vec::with_capacity(sample.len()),
    };
    let root = b.build(&mut idx, 0);
    debug_assert_eq!(root, 0);
    RegressionTree { nodes: b.nodes }
}
