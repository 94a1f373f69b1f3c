//! CART-style decision tree over the single measured sample, the baseline
//! classifier. Greedy Gini splits with a deterministic tie-break (lowest
//! feature index, then lowest threshold).

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy)]
pub struct TreeConfig {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        TreeConfig {
            max_depth: 8,
            min_leaf: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum TreeNode {
    Leaf {
        label: u8,
        /// [unstable, stable] training counts at the leaf.
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

fn gini(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = counts[0] as f64 / n;
    let p1 = counts[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn class_counts(labels: &[u8], idx: &[usize]) -> [usize; 2] {
    let mut counts = [0usize; 2];
    for &i in idx {
        counts[labels[i] as usize] += 1;
    }
    counts
}

fn majority(counts: [usize; 2]) -> u8 {
    // ties resolve to unstable
    u8::from(counts[1] > counts[0])
}

struct Candidate {
    feature: usize,
    threshold: f64,
    weighted_gini: f64,
}

fn best_split(
    features: ArrayView2<f64>,
    labels: &[u8],
    idx: &[usize],
    min_leaf: usize,
) -> Option<Candidate> {
    let total = idx.len();
    let mut best: Option<Candidate> = None;
    for feature in 0..features.ncols() {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| {
            features[[a, feature]]
                .partial_cmp(&features[[b, feature]])
                .expect("finite features")
                .then(a.cmp(&b))
        });
        let mut left = [0usize; 2];
        let mut right = class_counts(labels, idx);
        for pos in 0..total - 1 {
            let i = order[pos];
            left[labels[i] as usize] += 1;
            right[labels[i] as usize] -= 1;
            let v_here = features[[i, feature]];
            let v_next = features[[order[pos + 1], feature]];
            if v_here == v_next {
                continue; // identical values cannot be separated
            }
            let n_left = pos + 1;
            let n_right = total - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let weighted = (n_left as f64 * gini(left) + n_right as f64 * gini(right))
                / total as f64;
            let threshold = 0.5 * (v_here + v_next);
            let better = match &best {
                None => true,
                // strict improvement, so iteration order (feature asc,
                // threshold asc) is the tie-break
                Some(b) => weighted < b.weighted_gini - 1e-15,
            };
            if better {
                best = Some(Candidate {
                    feature,
                    threshold,
                    weighted_gini: weighted,
                });
            }
        }
    }
    best
}

fn grow(
    features: ArrayView2<f64>,
    labels: &[u8],
    idx: &[usize],
    depth: usize,
    cfg: &TreeConfig,
) -> TreeNode {
    let counts = class_counts(labels, idx);
    let leaf = TreeNode::Leaf {
        label: majority(counts),
        counts,
    };
    if depth >= cfg.max_depth || counts[0] == 0 || counts[1] == 0 || idx.len() < 2 * cfg.min_leaf {
        return leaf;
    }
    let parent_gini = gini(counts);
    let candidate = match best_split(features, labels, idx, cfg.min_leaf) {
        Some(c) if c.weighted_gini < parent_gini - 1e-12 => c,
        _ => return leaf,
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| features[[i, candidate.feature]] <= candidate.threshold);
    TreeNode::Split {
        feature: candidate.feature,
        threshold: candidate.threshold,
        left: Box::new(grow(features, labels, &left_idx, depth + 1, cfg)),
        right: Box::new(grow(features, labels, &right_idx, depth + 1, cfg)),
    }
}

/// Fit on rows of `features` (one measured sample per row).
pub fn train_tree(features: ArrayView2<f64>, labels: &[u8], cfg: &TreeConfig) -> Result<TreeNode> {
    if features.nrows() == 0 {
        return Err(CoreError::NotReady("decision tree needs a nonempty training split".into()));
    }
    if features.nrows() != labels.len() {
        return Err(CoreError::shape(
            "train_tree",
            format!("{} rows but {} labels", features.nrows(), labels.len()),
        ));
    }
    let idx: Vec<usize> = (0..features.nrows()).collect();
    Ok(grow(features, labels, &idx, 0, cfg))
}

pub fn predict_tree(node: &TreeNode, row: ArrayView1<f64>) -> u8 {
    match node {
        TreeNode::Leaf { label, .. } => *label,
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            if row[*feature] <= *threshold {
                predict_tree(left, row)
            } else {
                predict_tree(right, row)
            }
        }
    }
}

pub fn tree_depth(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 0,
        TreeNode::Split { left, right, .. } => 1 + tree_depth(left).max(tree_depth(right)),
    }
}

pub fn node_count(node: &TreeNode) -> usize {
    match node {
        TreeNode::Leaf { .. } => 1,
        TreeNode::Split { left, right, .. } => 1 + node_count(left) + node_count(right),
    }
}

pub fn tree_accuracy(node: &TreeNode, features: ArrayView2<f64>, labels: &[u8]) -> f64 {
    let hits = features
        .rows()
        .into_iter()
        .zip(labels)
        .filter(|(row, &y)| predict_tree(node, *row) == y)
        .count();
    hits as f64 / labels.len() as f64
}
