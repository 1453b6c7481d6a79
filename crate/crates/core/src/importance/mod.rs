//! Feature importance: Pearson correlation, impurity decrease (MDI),
//! permutation importance (PFI) and Shapley attributions.

mod pfi;
mod shapley;

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Matrix, TreeEnsemble};

pub use pfi::pfi;
pub use shapley::{
    background_rows, shapley_exact, shapley_sampled, ShapleyResult, MAX_EXACT_FEATURES,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Pearson,
    Mdi,
    Pfi,
    Shapley,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pearson => "pearson",
            Method::Mdi => "mdi",
            Method::Pfi => "pfi",
            Method::Shapley => "shapley",
        })
    }
}

/// Per-feature scores from one method, ranked by descending score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: Method,
    pub features: Vec<String>,
    pub scores: Vec<f64>,
    /// Feature indices, best first. Equal scores rank by ascending name.
    pub ranking: Vec<usize>,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
}

impl ImportanceReport {
    pub fn new(method: Method, features: Vec<String>, scores: Vec<f64>) -> Self {
        assert_eq!(features.len(), scores.len());
        let mut ranking: Vec<usize> = (0..features.len()).collect();
        ranking.sort_by(|&a, &b| {
            scores[b]
                .total_cmp(&scores[a])
                .then_with(|| features[a].cmp(&features[b]))
        });
        Self {
            method,
            features,
            scores,
            ranking,
            model: None,
            repeats: None,
            seed: None,
        }
    }

    pub fn with_model(mut self, model: impl Into<String>) -> Self {
        self.model = Some(model.into());
        self
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn score(&self, feature: &str) -> Option<f64> {
        self.features.iter().position(|f| f == feature).map(|j| self.scores[j])
    }

    /// 1-based rank of each feature, indexed like `features`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.features.len()];
        for (pos, &j) in self.ranking.iter().enumerate() {
            ranks[j] = pos + 1;
        }
        ranks
    }

    /// Feature names, best first.
    pub fn ranked_names(&self) -> Vec<&str> {
        self.ranking.iter().map(|&j| self.features[j].as_str()).collect()
    }

    pub fn top(&self, k: usize) -> Vec<&str> {
        self.ranked_names().into_iter().take(k).collect()
    }

    /// `feature,score,rank,method`, best first.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["feature", "score", "rank", "method"])?;
        for (pos, &j) in self.ranking.iter().enumerate() {
            out.write_record([
                self.features[j].clone(),
                self.scores[j].to_string(),
                (pos + 1).to_string(),
                self.method.to_string(),
            ])?;
        }
        out.flush().map_err(|e| Error::io("importance csv", e))?;
        Ok(())
    }
}

/// Sample Pearson correlation. Fails when either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::Empty("correlation needs two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 {
        return Err(Error::ConstantColumn("x".into()));
    }
    if syy == 0.0 {
        return Err(Error::ConstantColumn("y".into()));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Absolute correlation of each column with `y`. Constant columns score 0.
pub fn pearson_report(x: &Matrix, y: &[f64]) -> Result<ImportanceReport> {
    let scores = (0..x.n_cols())
        .map(|j| match pearson(x.column(j), y) {
            Ok(r) => Ok(r.abs()),
            Err(Error::ConstantColumn(_)) => Ok(0.0),
            Err(e) => Err(e),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ImportanceReport::new(Method::Pearson, x.names().to_vec(), scores))
}

/// Mean decrease in impurity: each split credits its feature with the
/// sample-weighted variance reduction; credits are summed per tree, averaged
/// over trees and normalized to sum to one.
pub fn mdi(model: &TreeEnsemble) -> Result<ImportanceReport> {
    if model.trees.is_empty() {
        return Err(Error::Empty("ensemble has no trees".into()));
    }
    let p = model.feature_names.len();
    let mut total = vec![0.0; p];
    for tree in &model.trees {
        for (t, c) in total.iter_mut().zip(tree.impurity_decrease()) {
            *t += c;
        }
    }
    let n = model.trees.len() as f64;
    total.iter_mut().for_each(|t| *t /= n);
    let sum: f64 = total.iter().sum();
    if sum > 0.0 {
        total.iter_mut().for_each(|t| *t /= sum);
    }
    Ok(ImportanceReport::new(Method::Mdi, model.feature_names.clone(), total)
        .with_model(format!("{:?}", model.kind())))
}
