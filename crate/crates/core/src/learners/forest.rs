use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, Columns, RegressionTree, TreeParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureFraction {
    Sqrt,
    All,
    Fraction(f64),
}

impl FeatureFraction {
    pub fn count(self, n_features: usize) -> usize {
        let k = match self {
            FeatureFraction::Sqrt => (n_features as f64).sqrt().round() as usize,
            FeatureFraction::All => n_features,
            FeatureFraction::Fraction(f) => (f * n_features as f64).round() as usize,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or `min_leaf` binds.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub feature_frac: FeatureFraction,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: None,
            min_leaf: 1,
            feature_frac: FeatureFraction::Sqrt,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub trees: Vec<RegressionTree>,
}

impl RandomForest {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }
}

/// Each tree draws from its own ChaCha stream (`seed`, tree index), so the
/// result does not depend on how many threads build it.
pub fn fit_random_forest(
    x: &[Vec<f64>],
    y: &[f64],
    params: ForestParams,
    seed: u64,
) -> Result<RandomForest> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if params.n_trees == 0 {
        return Err(Error::Empty);
    }
    if y.iter().any(|v| !v.is_finite()) || x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("random forest input"));
    }
    let cols = Columns::from_rows(x);
    let n = x.len();
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: Some(params.feature_frac.count(cols.n_features())),
    };
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64 + 1);
            let sample: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree(&cols, y, &sample, tree_params, &mut rng)
        })
        .collect();
    Ok(RandomForest { params, trees })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::rmse;

    #[test]
    fn one_sample_constant() {
        let f = fit_random_forest(&[vec![1.0, 2.0]], &[0.5], ForestParams::default(), 3).unwrap();
        assert_eq!(f.predict(&[10.0, -3.0]), 0.5);
    }

    #[test]
    fn seeded_fits_match() {
        let x: Vec<Vec<f64>> = (0..200)
            .map(|i| vec![(i % 17) as f64, (i % 5) as f64])
            .collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1]).collect();
        let a = fit_random_forest(&x, &y, ForestParams::default(), 42).unwrap();
        let b = fit_random_forest(&x, &y, ForestParams::default(), 42).unwrap();
        assert_eq!(a, b);
        let c = fit_random_forest(&x, &y, ForestParams::default(), 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn recovers_step_function() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut draw = |n: usize| -> (Vec<Vec<f64>>, Vec<f64>) {
            let x: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
            let y = x
                .iter()
                .map(|r| if r[0] > 0.5 { 1.0 } else { 0.0 })
                .collect();
            (x, y)
        };
        let (x, y) = draw(500);
        let (xt, yt) = draw(500);
        let f = fit_random_forest(&x, &y, ForestParams::default(), 1).unwrap();
        let p: Vec<f64> = xt.iter().map(|r| f.predict(r)).collect();
        let e = rmse(&p, &yt).unwrap();
        assert!(e < 0.1, "{e}");
    }

    #[test]
    fn feature_fraction_counts() {
        assert_eq!(FeatureFraction::Sqrt.count(25), 5);
        assert_eq!(FeatureFraction::Sqrt.count(1), 1);
        assert_eq!(FeatureFraction::All.count(9), 9);
        assert_eq!(FeatureFraction::Fraction(0.01).count(9), 1);
    }
}
