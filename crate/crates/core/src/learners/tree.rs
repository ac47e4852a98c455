//! CART classification tree with Gini splits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed::{self, StageRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or no split improves impurity.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// Candidate features drawn per node; `None` evaluates all of them.
    pub features_per_split: Option<usize>,
    /// Draw one uniform threshold per candidate feature instead of searching (Extra Trees).
    pub random_thresholds: bool,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: None,
            min_leaf: 1,
            features_per_split: None,
            random_thresholds: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

/// A node keeps the class distribution of the training rows that reached it;
/// for leaves this is the prediction, for split nodes it feeds path attribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub distribution: Vec<f64>,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
    n_features: usize,
    n_classes: usize,
    depth: usize,
}

// Two Gini scores closer than this are treated as tied.
const TIE_EPS: f64 = 1e-12;

pub fn fit_tree(x: &Matrix, y: &[usize], n_classes: usize, params: &TreeParams) -> Result<DecisionTree> {
    let indices: Vec<usize> = (0..x.n_rows()).collect();
    let mut rng = seed::rng(params.seed, "tree", &[]);
    fit_tree_on(&Columns::new(x), y, n_classes, indices, params, &mut rng)
}

/// Column-major copy of the training matrix, shared by every tree of a forest.
pub(crate) struct Columns {
    n_rows: usize,
    data: Vec<f64>,
    binary: Vec<bool>,
}

impl Columns {
    pub(crate) fn new(x: &Matrix) -> Self {
        let (n, m) = (x.n_rows(), x.n_cols());
        let mut data = vec![0.0; n * m];
        for (i, row) in x.rows().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                data[j * n + i] = v;
            }
        }
        let binary = (0..m)
            .map(|j| data[j * n..(j + 1) * n].iter().all(|&v| v == 0.0 || v == 1.0))
            .collect();
        Columns { n_rows: n, data, binary }
    }

    fn n_cols(&self) -> usize {
        self.binary.len()
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.n_rows..(j + 1) * self.n_rows]
    }
}

/// Fit on a multiset of row indices (duplicates count, as in a bootstrap sample).
pub(crate) fn fit_tree_on(
    x: &Columns,
    y: &[usize],
    n_classes: usize,
    indices: Vec<usize>,
    params: &TreeParams,
    rng: &mut StageRng,
) -> Result<DecisionTree> {
    if indices.is_empty() || x.n_rows == 0 {
        return Err(Error::EmptyInput("cannot fit a tree on zero rows".into()));
    }
    if y.len() != x.n_rows {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows,
            actual: y.len(),
        });
    }
    if n_classes == 0 {
        return Err(Error::InvalidConfig("tree needs at least one class".into()));
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= n_classes) {
        return Err(Error::UnknownLabel(bad.to_string()));
    }
    if params.min_leaf == 0 {
        return Err(Error::InvalidConfig("min_leaf must be at least 1".into()));
    }
    let mut builder = Builder {
        x,
        y,
        n_classes,
        params,
        nodes: Vec::new(),
        depth: 0,
        order: Vec::new(),
        left: Vec::new(),
    };
    builder.build(indices, rng);
    Ok(DecisionTree {
        nodes: builder.nodes,
        n_features: x.n_cols(),
        n_classes,
        depth: builder.depth,
    })
}

struct Builder<'a> {
    x: &'a Columns,
    y: &'a [usize],
    n_classes: usize,
    params: &'a TreeParams,
    nodes: Vec<TreeNode>,
    depth: usize,
    // scratch reused across nodes
    order: Vec<usize>,
    left: Vec<usize>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Builder<'_> {
    /// Nodes own contiguous ranges of one index buffer that is partitioned in
    /// place; an explicit stack keeps deep real-valued trees off the call stack.
    fn build(&mut self, mut idx: Vec<usize>, rng: &mut StageRng) {
        self.order = (0..self.x.n_cols()).collect();
        self.left = vec![0; self.n_classes];
        let root_counts = self.counts(&idx);
        let root = self.push_node(&root_counts, idx.len());
        let mut stack = vec![(root, 0usize, idx.len(), 0usize, root_counts)];
        while let Some((slot, start, end, depth, counts)) = stack.pop() {
            self.depth = self.depth.max(depth);
            let Some(best) = self.best_split(&idx[start..end], &counts, depth, rng) else {
                continue;
            };
            let col = self.x.col(best.feature);
            let rows = &mut idx[start..end];
            let mut mid = 0;
            for k in 0..rows.len() {
                if col[rows[k]] <= best.threshold {
                    rows.swap(k, mid);
                    mid += 1;
                }
            }
            let left_counts = self.counts(&rows[..mid]);
            let right_counts: Vec<usize> = counts.iter().zip(&left_counts).map(|(p, l)| p - l).collect();
            let l = self.push_node(&left_counts, mid);
            let r = self.push_node(&right_counts, end - start - mid);
            self.nodes[slot].split = Some(Split {
                feature: best.feature,
                threshold: best.threshold,
                left: l,
                right: r,
            });
            stack.push((r, start + mid, end, depth + 1, right_counts));
            stack.push((l, start, start + mid, depth + 1, left_counts));
        }
    }

    fn push_node(&mut self, counts: &[usize], n: usize) -> usize {
        let n_f = n as f64;
        self.nodes.push(TreeNode {
            distribution: counts.iter().map(|&c| c as f64 / n_f).collect(),
            n_samples: n,
            split: None,
        });
        self.nodes.len() - 1
    }

    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for &i in rows {
            counts[self.y[i]] += 1;
        }
        counts
    }

    fn best_split(&mut self, rows: &[usize], parent: &[usize], depth: usize, rng: &mut StageRng) -> Option<Candidate> {
        let n = rows.len();
        if self.params.max_depth.is_some_and(|d| depth >= d) || n < 2 * self.params.min_leaf {
            return None;
        }
        if parent.iter().filter(|&&c| c > 0).count() <= 1 {
            return None;
        }
        let parent_score = parent.iter().map(|&c| (c * c) as f64).sum::<f64>() / n as f64;

        let m = self.x.n_cols();
        let mtry = self.params.features_per_split.unwrap_or(m).clamp(1, m);
        let mut order = std::mem::take(&mut self.order);
        order.iter_mut().enumerate().for_each(|(k, f)| *f = k);

        // Evaluate the first `mtry` candidates; if none of them improves the
        // node, keep drawing features until one does or all are exhausted.
        // Candidates come from a Fisher-Yates shuffle advanced one draw at a time.
        let mut best: Option<Candidate> = None;
        for k in 0..m {
            if k >= mtry && best.is_some() {
                break;
            }
            if mtry < m {
                let pick = rng.gen_range(k..m);
                order.swap(k, pick);
            }
            if let Some(c) = self.eval_feature(rows, order[k], parent, rng) {
                if c.score - parent_score > TIE_EPS * n as f64 && better(&c, best.as_ref()) {
                    best = Some(c);
                }
            }
        }
        self.order = order;
        best
    }

    /// Best threshold for one feature, scored as Σ_child Σ_c count² / n_child
    /// (larger is purer; weighted Gini = 1 - score / n).
    fn eval_feature(&mut self, rows: &[usize], feature: usize, parent: &[usize], rng: &mut StageRng) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf;
        let n = rows.len();
        let col = self.x.col(feature);
        let y = self.y;
        if self.params.random_thresholds || self.x.binary[feature] {
            let threshold = if self.params.random_thresholds {
                let (lo, hi) = rows
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(col[i]), hi.max(col[i])));
                if lo >= hi {
                    return None;
                }
                rng.gen_range(lo..hi)
            } else {
                0.5
            };
            let left = &mut self.left;
            left.iter_mut().for_each(|c| *c = 0);
            let mut n_left = 0;
            for &i in rows {
                if col[i] <= threshold {
                    left[y[i]] += 1;
                    n_left += 1;
                }
            }
            if n_left < min_leaf || n - n_left < min_leaf {
                return None;
            }
            return Some(Candidate {
                feature,
                threshold,
                score: split_score(left, n_left, parent, n),
            });
        }

        let mut pairs: Vec<(f64, usize)> = rows.iter().map(|&i| (col[i], y[i])).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let left = &mut self.left;
        left.iter_mut().for_each(|c| *c = 0);
        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            left[pairs[k].1] += 1;
            let (v, next) = (pairs[k].0, pairs[k + 1].0);
            let n_left = k + 1;
            if v == next || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let mut threshold = v + (next - v) / 2.0;
            if threshold >= next {
                threshold = v;
            }
            let c = Candidate {
                feature,
                threshold,
                score: split_score(left, n_left, parent, n),
            };
            if better(&c, best.as_ref()) {
                best = Some(c);
            }
        }
        best
    }
}

fn split_score(left: &[usize], n_left: usize, parent: &[usize], n: usize) -> f64 {
    let n_right = n - n_left;
    let mut l = 0.0;
    let mut r = 0.0;
    for (c, &lc) in left.iter().enumerate() {
        let rc = parent[c] - lc;
        l += (lc * lc) as f64;
        r += (rc * rc) as f64;
    }
    l / n_left as f64 + r / n_right as f64
}

/// Higher score wins; near-ties go to the lower feature index, then the lower threshold.
fn better(c: &Candidate, best: Option<&Candidate>) -> bool {
    match best {
        None => true,
        Some(b) => {
            if c.score > b.score + TIE_EPS {
                true
            } else if c.score < b.score - TIE_EPS {
                false
            } else {
                (c.feature, c.threshold) < (b.feature, b.threshold)
            }
        }
    }
}

impl DecisionTree {
    /// A tree that always predicts `distribution`.
    pub fn leaf(distribution: Vec<f64>, n_features: usize) -> Self {
        let n_classes = distribution.len();
        DecisionTree {
            nodes: vec![TreeNode {
                distribution,
                n_samples: 0,
                split: None,
            }],
            n_features,
            n_classes,
            depth: 0,
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn root_split(&self) -> Option<Split> {
        self.nodes[0].split
    }

    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut at = 0;
        while let Some(s) = self.nodes[at].split {
            at = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        at
    }

    /// Node indices visited from the root to the leaf, inclusive.
    pub fn path(&self, row: &[f64]) -> Vec<usize> {
        let mut at = 0;
        let mut path = vec![0];
        while let Some(s) = self.nodes[at].split {
            at = if row[s.feature] <= s.threshold { s.left } else { s.right };
            path.push(at);
        }
        path
    }

    pub fn distribution(&self, row: &[f64]) -> &[f64] {
        &self.nodes[self.leaf_index(row)].distribution
    }

    pub fn predict_class(&self, row: &[f64]) -> usize {
        super::argmax(self.distribution(row))
    }

    /// Predict as if `row[feature]` were `value`, without copying the row.
    pub fn predict_class_with(&self, row: &[f64], feature: usize, value: f64) -> usize {
        let mut at = 0;
        while let Some(s) = self.nodes[at].split {
            let v = if s.feature == feature { value } else { row[s.feature] };
            at = if v <= s.threshold { s.left } else { s.right };
        }
        super::argmax(&self.nodes[at].distribution)
    }

    /// Per-feature flag: does any split use it?
    pub fn used_features(&self) -> Vec<bool> {
        let mut used = vec![false; self.n_features];
        for s in self.nodes.iter().filter_map(|n| n.split) {
            used[s.feature] = true;
        }
        used
    }
}
