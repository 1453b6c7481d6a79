//! Regression trees and tree ensembles (bagged random forests and
//! least-squares gradient boosting) with chronological grid search.

mod cv;
mod ensemble;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::name_key;

pub use cv::{fold_bounds, grid_search_cv, CvResult, GridSpec};
pub use ensemble::{fit_forest, fit_gbt, predict, EnsembleSummary, TreeEnsemble};
pub use tree::{fit_tree, Tree, TreeNode, TreeParams};

/// Column-major feature matrix with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n_rows: usize,
    names: Vec<String>,
    keys: Vec<u64>,
    cols: Vec<Vec<f64>>,
}

impl Matrix {
    pub fn from_columns(names: Vec<String>, cols: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != cols.len() {
            return Err(Error::DimensionMismatch {
                expected: names.len(),
                actual: cols.len(),
            });
        }
        let n_rows = cols.first().map_or(0, Vec::len);
        if let Some(c) = cols.iter().find(|c| c.len() != n_rows) {
            return Err(Error::DimensionMismatch {
                expected: n_rows,
                actual: c.len(),
            });
        }
        let keys = names.iter().map(|n| name_key(n)).collect();
        Ok(Self {
            n_rows,
            names,
            keys,
            cols,
        })
    }

    /// Row-major input; columns are named `x0`, `x1`, ...
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        let mut cols = vec![Vec::with_capacity(rows.len()); p];
        for r in rows {
            if r.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    actual: r.len(),
                });
            }
            for (c, v) in cols.iter_mut().zip(r) {
                c.push(*v);
            }
        }
        let mut m = Self::from_columns((0..p).map(|j| format!("x{j}")).collect(), cols)?;
        m.n_rows = rows.len();
        Ok(m)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub(crate) fn keys(&self) -> &[u64] {
        &self.keys
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.cols[j][i]
    }

    pub fn row_into(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.cols.iter().map(|c| c[i]));
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        let mut buf = Vec::with_capacity(self.n_cols());
        self.row_into(i, &mut buf);
        buf
    }

    pub fn take_rows(&self, rows: &[usize]) -> Matrix {
        Matrix {
            n_rows: rows.len(),
            names: self.names.clone(),
            keys: self.keys.clone(),
            cols: self.cols.iter().map(|c| rows.iter().map(|&i| c[i]).collect()).collect(),
        }
    }

    pub fn with_column(&self, j: usize, values: Vec<f64>) -> Matrix {
        let mut m = self.clone();
        m.cols[j] = values;
        m
    }
}

/// Anything that maps a feature row to a real prediction.
pub trait Regressor: Sync {
    fn n_features(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> f64;

    /// Whether predictions can depend on feature `j`. Models that return
    /// `false` promise their output is unchanged by that column.
    fn reads_feature(&self, _j: usize) -> bool {
        true
    }

    fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.n_cols() != self.n_features() {
            return Err(Error::DimensionMismatch {
                expected: self.n_features(),
                actual: x.n_cols(),
            });
        }
        let mut buf = Vec::with_capacity(x.n_cols());
        Ok((0..x.n_rows())
            .map(|i| {
                x.row_into(i, &mut buf);
                self.predict_row(&buf)
            })
            .collect())
    }
}

/// Closure-backed regressor, handy for analytic test models.
pub struct FnModel<F> {
    n_features: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(n_features: usize, f: F) -> Self {
        Self { n_features, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> Regressor for FnModel<F> {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        (self.f)(row)
    }
}

/// Mean squared error.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    if y.len() != yhat.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            actual: yhat.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("mse of zero samples".into()));
    }
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    RandomForest,
    GradientBoost,
}

/// Number of features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Fraction(f64),
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, p: usize) -> usize {
        let k = match self {
            MaxFeatures::All => p,
            MaxFeatures::Fraction(f) => (f * p as f64).ceil() as usize,
            MaxFeatures::Count(c) => c,
        };
        k.clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleParams {
    pub kind: EnsembleKind,
    pub n_estimators: usize,
    /// `None` grows until leaves are pure or constraints bind.
    #[serde(default)]
    pub max_depth: Option<usize>,
    #[serde(default = "default_min_split")]
    pub min_samples_split: usize,
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
    #[serde(default = "default_max_features")]
    pub features_per_split: MaxFeatures,
    /// Shrinkage, boosting only.
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    /// Bootstrap resampling, forests only.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_min_split() -> usize {
    2
}
fn default_min_leaf() -> usize {
    1
}
fn default_max_features() -> MaxFeatures {
    MaxFeatures::All
}
fn default_learning_rate() -> f64 {
    0.1
}
fn default_bootstrap() -> bool {
    true
}

impl EnsembleParams {
    pub fn forest(n_estimators: usize, max_depth: Option<usize>) -> Self {
        Self {
            kind: EnsembleKind::RandomForest,
            n_estimators,
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: MaxFeatures::Fraction(1.0 / 3.0),
            learning_rate: 0.1,
            bootstrap: true,
        }
    }

    pub fn boosting(n_estimators: usize, max_depth: Option<usize>, learning_rate: f64) -> Self {
        Self {
            kind: EnsembleKind::GradientBoost,
            n_estimators,
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            features_per_split: MaxFeatures::All,
            learning_rate,
            bootstrap: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::invalid("n_estimators must be at least 1"));
        }
        if self.max_depth == Some(0) {
            return Err(Error::invalid("max_depth must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::invalid("min_samples_leaf must be at least 1"));
        }
        if self.kind == EnsembleKind::GradientBoost && !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::invalid("learning_rate must lie in (0, 1]"));
        }
        if let MaxFeatures::Fraction(f) = self.features_per_split {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid("features_per_split fraction must lie in (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            min_samples_leaf: self.min_samples_leaf,
            features_per_split: self.features_per_split,
        }
    }

    /// Fit the ensemble this describes.
    pub fn fit(&self, x: &Matrix, y: &[f64], seed: u64) -> Result<TreeEnsemble> {
        match self.kind {
            EnsembleKind::RandomForest => fit_forest(x, y, self, seed),
            EnsembleKind::GradientBoost => fit_gbt(x, y, self, seed),
        }
    }
}
