use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::tree::{check_rows, fit_tree_on, DecisionTree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` for unlimited depth.
    pub max_depth: Option<usize>,
    pub features_per_split: usize,
    /// Fit each tree on a same-size resample drawn with replacement.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: Some(8),
            features_per_split: 2,
            bootstrap: true,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub params: ForestParams,
}

/// Tree `t` draws from its own generator seeded with `seed ^ t`, so trees
/// can be grown in parallel with the same result as a sequential fit.
pub fn rf_fit(x: &[Vec<f64>], y: &[u8], params: &ForestParams) -> Result<RandomForest> {
    check_rows(x, y)?;
    if params.n_trees == 0 {
        return Err(crate::Error::Config("a forest needs at least one tree".into()));
    }
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        features_per_split: params.features_per_split,
    };
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ t as u64);
            let indices: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, indices, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RandomForest { trees, params: *params })
}

impl RandomForest {
    /// Mean leaf fraction over all trees.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}

pub fn rf_predict(forest: &RandomForest, row: &[f64]) -> f64 {
    forest.predict_proba(row)
}
