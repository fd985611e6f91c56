use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Columns, RegressionTree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbdtParams {
    pub n_rounds: usize,
    pub depth: usize,
    pub shrinkage: f64,
    pub min_leaf: usize,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            n_rounds: 200,
            depth: 6,
            shrinkage: 0.1,
            min_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gbdt {
    pub params: GbdtParams,
    pub init: f64,
    pub trees: Vec<RegressionTree>,
}

impl Gbdt {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_rounds(x, self.trees.len())
    }

    /// Prediction using only the first `rounds` trees.
    pub fn predict_rounds(&self, x: &[f64], rounds: usize) -> f64 {
        self.init
            + self.trees[..rounds.min(self.trees.len())]
                .iter()
                .map(|t| self.params.shrinkage * t.predict(x))
                .sum::<f64>()
    }
}

/// Stagewise least-squares boosting: start from the mean, then repeatedly
/// fit a depth-bounded tree to the residuals and add a shrunken copy.
pub fn fit_gbdt(x: &[Vec<f64>], y: &[f64], params: GbdtParams, seed: u64) -> Result<Gbdt> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::TooSmall(x.len(), 2));
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gbdt input"));
    }
    let cols = Columns::from_rows(x);
    let init = y.iter().sum::<f64>() / y.len() as f64;
    let mut fitted = vec![init; y.len()];
    let sample: Vec<usize> = (0..y.len()).collect();
    let tree_params = TreeParams {
        max_depth: Some(params.depth),
        min_leaf: params.min_leaf,
        max_features: None,
    };
    // Only feature-visit order consumes randomness; with all features
    // examined the fit is order independent up to exact ties.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trees = Vec::with_capacity(params.n_rounds);
    for _ in 0..params.n_rounds {
        let residual: Vec<f64> = y.iter().zip(&fitted).map(|(t, f)| t - f).collect();
        let tree = fit_tree(&cols, &residual, &sample, tree_params, &mut rng);
        for (f, row) in fitted.iter_mut().zip(x) {
            *f += params.shrinkage * tree.predict(row);
        }
        trees.push(tree);
    }
    Ok(Gbdt {
        params,
        init,
        trees,
    })
}
