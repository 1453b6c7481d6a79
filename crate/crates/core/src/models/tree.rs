use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{Matrix, MaxFeatures, Regressor};
use crate::error::{Error, Result};
use crate::rng::mix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub features_per_split: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: MaxFeatures::All,
        }
    }
}

/// One node of a fitted regression tree. Internal nodes keep the statistics
/// needed for impurity-based importance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// `(feature, threshold, left child, right child)` for internal nodes.
    pub split: Option<(usize, f64, usize, usize)>,
    pub n_samples: usize,
    /// Population variance of the targets reaching this node.
    pub impurity: f64,
    /// Mean target of the node.
    pub value: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }
}

/// CART regression tree stored as a flat arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl Tree {
    pub fn predict_one(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            let node = &self.nodes[i];
            match node.split {
                None => return node.value,
                Some((f, t, l, r)) => i = if row[f] <= t { l } else { r },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i].split {
                None => 0,
                Some((_, _, l, r)) => 1 + walk(nodes, l).max(walk(nodes, r)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Features used by at least one split.
    pub fn used_features(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_features];
        for n in &self.nodes {
            if let Some((f, ..)) = n.split {
                used[f] = true;
            }
        }
        used
    }

    /// Weighted impurity decrease credited to each feature, scaled by the
    /// root sample count.
    pub fn impurity_decrease(&self) -> Vec<f64> {
        let mut credit = vec![0.0; self.n_features];
        let total = self.nodes[0].n_samples as f64;
        for node in &self.nodes {
            if let Some((f, _, l, r)) = node.split {
                let (nl, nr) = (&self.nodes[l], &self.nodes[r]);
                let n = node.n_samples as f64;
                let child = (nl.n_samples as f64 * nl.impurity + nr.n_samples as f64 * nr.impurity) / n;
                credit[f] += (n / total) * (node.impurity - child).max(0.0);
            }
        }
        credit
    }
}

impl Regressor for Tree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        self.predict_one(row)
    }
}

/// Fit a regression tree on all rows of `x`.
pub fn fit_tree<R: RngCore>(x: &Matrix, y: &[f64], params: &TreeParams, rng: &mut R) -> Result<Tree> {
    let rows: Vec<usize> = (0..x.n_rows()).collect();
    fit_tree_on(x, y, rows, params, rng)
}

/// Fit on a multiset of row indices (bootstrap samples repeat rows).
pub(crate) fn fit_tree_on<R: RngCore>(
    x: &Matrix,
    y: &[f64],
    rows: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<Tree> {
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::Empty("no training rows".into()));
    }
    let mut builder = Builder {
        x,
        y,
        params,
        k: params.features_per_split.resolve(x.n_cols()),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    builder.grow(rows, 0, rng);
    Ok(Tree {
        nodes: builder.nodes,
        n_features: x.n_cols(),
    })
}

struct Builder<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    params: &'a TreeParams,
    k: usize,
    nodes: Vec<TreeNode>,
    scratch: Vec<(f64, f64)>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn grow<R: RngCore>(&mut self, rows: Vec<usize>, depth: usize, rng: &mut R) -> usize {
        let m = rows.len();
        let mean = rows.iter().map(|&i| self.y[i]).sum::<f64>() / m as f64;
        let impurity = rows.iter().map(|&i| (self.y[i] - mean).powi(2)).sum::<f64>() / m as f64;
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            split: None,
            n_samples: m,
            impurity,
            value: mean,
        });

        let p = self.params;
        let (lo, hi) = rows.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
            (lo.min(self.y[i]), hi.max(self.y[i]))
        });
        let stop = lo == hi
            || p.max_depth.is_some_and(|d| depth >= d)
            || m < p.min_samples_split.max(2)
            || m < 2 * p.min_samples_leaf;
        // draw the node salt even at leaves so sibling subtrees see a stable stream
        let salt = rng.gen::<u64>();
        if stop {
            return id;
        }
        let Some(best) = self.best_split(&rows, mean, salt) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x.get(i, best.feature) <= best.threshold);
        let l = self.grow(left, depth + 1, rng);
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id].split = Some((best.feature, best.threshold, l, r));
        id
    }

    /// Candidate features: the `k` with the smallest salted name hashes, so
    /// the choice follows names, not column positions.
    fn candidates(&self, salt: u64) -> Vec<usize> {
        let p = self.x.n_cols();
        if self.k >= p {
            return (0..p).collect();
        }
        let keys = self.x.keys();
        let mut order: Vec<(u64, usize)> = (0..p).map(|j| (mix(salt ^ keys[j]), j)).collect();
        order.select_nth_unstable_by(self.k - 1, |a, b| {
            a.0.cmp(&b.0).then_with(|| self.x.names()[a.1].cmp(&self.x.names()[b.1]))
        });
        order.truncate(self.k);
        order.into_iter().map(|(_, j)| j).collect()
    }

    fn best_split(&mut self, rows: &[usize], mean: f64, salt: u64) -> Option<BestSplit> {
        let min_leaf = self.params.min_samples_leaf.max(1);
        let m = rows.len();
        let mut best: Option<BestSplit> = None;
        for j in self.candidates(salt) {
            let col = self.x.column(j);
            self.scratch.clear();
            self.scratch.extend(rows.iter().map(|&i| (col[i], self.y[i] - mean)));
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            if self.scratch[0].0 == self.scratch[m - 1].0 {
                continue;
            }
            let total: f64 = self.scratch.iter().map(|s| s.1).sum();
            let mut left_sum = 0.0;
            for pos in 1..m {
                left_sum += self.scratch[pos - 1].1;
                if pos < min_leaf || m - pos < min_leaf {
                    continue;
                }
                let (a, b) = (self.scratch[pos - 1].0, self.scratch[pos].0);
                if a == b {
                    continue;
                }
                let right_sum = total - left_sum;
                // SSE reduction on centered targets
                let gain = left_sum * left_sum / pos as f64 + right_sum * right_sum / (m - pos) as f64
                    - total * total / m as f64;
                let better = match &best {
                    None => gain > 0.0,
                    Some(b) => {
                        gain > b.gain
                            || (gain == b.gain && j != b.feature && self.x.names()[j] < self.x.names()[b.feature])
                    }
                };
                if better {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        feature: j,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}
