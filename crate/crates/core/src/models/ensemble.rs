use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::fit_tree_on;
use super::{EnsembleKind, EnsembleParams, Matrix, Regressor, Tree};
use crate::error::{Error, Result};
use crate::rng::stream;

/// A fitted forest or boosted ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub params: EnsembleParams,
    pub trees: Vec<Tree>,
    pub feature_names: Vec<String>,
    /// Initial prediction for boosting (training mean); zero for forests.
    pub base: f64,
    /// Training MSE after each boosting stage, starting with the base model.
    pub train_mse: Vec<f64>,
    used: Vec<bool>,
}

impl TreeEnsemble {
    fn new(params: &EnsembleParams, trees: Vec<Tree>, x: &Matrix, base: f64, train_mse: Vec<f64>) -> Self {
        let mut used = vec![false; x.n_cols()];
        for t in &trees {
            for (u, tu) in used.iter_mut().zip(t.used_features()) {
                *u |= tu;
            }
        }
        Self {
            params: params.clone(),
            trees,
            feature_names: x.names().to_vec(),
            base,
            train_mse,
            used,
        }
    }

    pub fn kind(&self) -> EnsembleKind {
        self.params.kind
    }

    /// Prediction using only the first `stages` trees of a boosted model.
    pub fn predict_staged(&self, row: &[f64], stages: usize) -> f64 {
        let lr = self.params.learning_rate;
        self.trees[..stages.min(self.trees.len())]
            .iter()
            .fold(self.base, |acc, t| acc + lr * t.predict_one(row))
    }

    pub fn summary(&self) -> EnsembleSummary {
        let depths: Vec<usize> = self.trees.iter().map(Tree::depth).collect();
        EnsembleSummary {
            kind: self.params.kind,
            n_trees: self.trees.len(),
            max_depth: depths.iter().copied().max().unwrap_or(0),
            mean_depth: depths.iter().sum::<usize>() as f64 / depths.len().max(1) as f64,
            n_leaves: self.trees.iter().map(Tree::n_leaves).sum(),
            params: self.params.clone(),
        }
    }
}

impl Regressor for TreeEnsemble {
    fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match self.params.kind {
            EnsembleKind::RandomForest => {
                self.trees.iter().map(|t| t.predict_one(row)).sum::<f64>() / self.trees.len() as f64
            }
            EnsembleKind::GradientBoost => self.predict_staged(row, self.trees.len()),
        }
    }

    fn reads_feature(&self, j: usize) -> bool {
        self.used[j]
    }
}

/// Structural summary written into experiment reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub kind: EnsembleKind,
    pub n_trees: usize,
    pub max_depth: usize,
    pub mean_depth: f64,
    pub n_leaves: usize,
    pub params: EnsembleParams,
}

fn check(x: &Matrix, y: &[f64], params: &EnsembleParams) -> Result<()> {
    params.validate()?;
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("no training rows".into()));
    }
    Ok(())
}

/// Bagged regression trees. Tree `i` draws its bootstrap sample and split
/// features from the stream keyed by `(seed, i)`.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &EnsembleParams, seed: u64) -> Result<TreeEnsemble> {
    check(x, y, params)?;
    let n = y.len();
    let tree_params = params.tree_params();
    let trees = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, &[i as u64]);
            let rows: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, y, rows, &tree_params, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TreeEnsemble::new(params, trees, x, 0.0, Vec::new()))
}

/// Least-squares gradient boosting: each stage fits a tree to the current
/// residuals and adds it scaled by the learning rate.
pub fn fit_gbt(x: &Matrix, y: &[f64], params: &EnsembleParams, seed: u64) -> Result<TreeEnsemble> {
    check(x, y, params)?;
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut fitted = vec![base; n];
    let tree_params = params.tree_params();
    let mut trees = Vec::with_capacity(params.n_estimators);
    let sse = |f: &[f64]| y.iter().zip(f).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n as f64;
    let mut history = vec![sse(&fitted)];
    let mut row = Vec::with_capacity(x.n_cols());
    for stage in 0..params.n_estimators {
        let residual: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
        let mut rng = stream(seed, &[stage as u64]);
        let tree = fit_tree_on(x, &residual, (0..n).collect(), &tree_params, &mut rng)?;
        for (i, f) in fitted.iter_mut().enumerate() {
            x.row_into(i, &mut row);
            *f += params.learning_rate * tree.predict_one(&row);
        }
        history.push(sse(&fitted));
        trees.push(tree);
    }
    Ok(TreeEnsemble::new(params, trees, x, base, history))
}

/// Predict every row of `x`.
pub fn predict(model: &TreeEnsemble, x: &Matrix) -> Result<Vec<f64>> {
    model.predict_matrix(x)
}
