//! CART classification trees grown greedily on Gini impurity.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Fraction of positive training samples in the leaf.
        fraction: f64,
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    /// Candidate features examined at each node, drawn without replacement.
    pub features_per_split: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: Some(8),
            features_per_split: 2,
        }
    }
}

/// Flat array of nodes; node 0 is the root. Samples with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
    pub max_depth: Option<usize>,
}

impl DecisionTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { fraction, .. } => return fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        let mut deepest = 0;
        let mut stack = vec![(0usize, 0usize)];
        while let Some((i, d)) = stack.pop() {
            match self.nodes[i] {
                Node::Leaf { .. } => deepest = deepest.max(d),
                Node::Split { left, right, .. } => {
                    stack.push((left, d + 1));
                    stack.push((right, d + 1));
                }
            }
        }
        deepest
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = pos as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

/// Lowest weighted Gini over the candidate features; ties keep the lower
/// feature index, then the lower threshold.
fn best_split(x: &[Vec<f64>], y: &[u8], idx: &mut [usize], features: &[usize]) -> Option<BestSplit> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| y[i] == 1).count();
    let mut best: Option<BestSplit> = None;
    for &f in features {
        idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_pos = 0;
        for k in 0..n - 1 {
            left_pos += usize::from(y[idx[k]] == 1);
            let (lo, hi) = (x[idx[k]][f], x[idx[k + 1]][f]);
            if lo == hi {
                continue;
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            let impurity = (n_left as f64 * gini(left_pos, n_left)
                + n_right as f64 * gini(total_pos - left_pos, n_right))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    impurity,
                });
            }
        }
    }
    best
}

pub(crate) fn check_rows(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::Data("no training rows".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Data(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::Data("rows have differing feature counts".into()));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::Data("labels must be 0 or 1".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("feature value".into()));
    }
    Ok(d)
}

pub fn fit_tree<R: Rng>(x: &[Vec<f64>], y: &[u8], params: &TreeParams, rng: &mut R) -> Result<DecisionTree> {
    check_rows(x, y)?;
    let indices: Vec<usize> = (0..x.len()).collect();
    fit_tree_on(x, y, indices, params, rng)
}

/// Grows a tree on the rows selected by `indices` (repeats allowed).
pub(crate) fn fit_tree_on<R: Rng>(
    x: &[Vec<f64>],
    y: &[u8],
    indices: Vec<usize>,
    params: &TreeParams,
    rng: &mut R,
) -> Result<DecisionTree> {
    let d = x[0].len();
    if params.features_per_split == 0 || params.features_per_split > d {
        return Err(Error::Config(format!(
            "features_per_split must be in [1, {d}], got {}",
            params.features_per_split
        )));
    }

    let mut nodes = vec![Node::Leaf {
        fraction: 0.0,
        count: 0,
    }];
    // (node slot, sample indices, depth)
    let mut work = vec![(0usize, indices, 0usize)];
    while let Some((slot, mut idx, depth)) = work.pop() {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| y[i] == 1).count();
        let leaf = Node::Leaf {
            fraction: if n == 0 { 0.0 } else { pos as f64 / n as f64 },
            count: n,
        };
        let stop = params.max_depth.is_some_and(|m| depth >= m) || pos == 0 || pos == n || n < 2;
        if stop {
            nodes[slot] = leaf;
            continue;
        }
        let mut features: Vec<usize> = if params.features_per_split == d {
            (0..d).collect()
        } else {
            sample(rng, d, params.features_per_split).into_vec()
        };
        features.sort_unstable();
        let Some(split) = best_split(x, y, &mut idx, &features) else {
            nodes[slot] = leaf;
            continue;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| x[i][split.feature] <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            fraction: 0.0,
            count: 0,
        });
        nodes.push(Node::Leaf {
            fraction: 0.0,
            count: 0,
        });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        work.push((right, right_idx, depth + 1));
        work.push((left, left_idx, depth + 1));
    }
    Ok(DecisionTree {
        nodes,
        max_depth: params.max_depth,
    })
}
