//! Scenario orchestration and cross-scenario analysis: category
//! contribution factors, short/long horizon groups and the MSE improvement
//! of a diverse feature vector over single-category feature sets.

mod scenario;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Category, Dataset};
use crate::error::{Error, Result};
use crate::models::{mse, EnsembleParams, Regressor};

pub use scenario::{
    run_scenario, scenario_seed, CategoryArm, FinalFeature, FraSummary, ModelChoice, ScenarioConfig, ScenarioResult,
    ScenarioRun, ShapleyConfig,
};

/// Share of each category's candidates that made it into the final vector.
/// Categories with no candidates are omitted.
pub fn contribution_factors(
    final_features: &[String],
    categories: &BTreeMap<String, Category>,
    candidate_counts: &BTreeMap<Category, usize>,
) -> Result<BTreeMap<Category, f64>> {
    let mut survivors: BTreeMap<Category, usize> = BTreeMap::new();
    for f in final_features {
        let cat = categories
            .get(f)
            .ok_or_else(|| Error::invalid(format!("feature `{f}` has no category")))?;
        *survivors.entry(*cat).or_default() += 1;
    }
    let mut out = BTreeMap::new();
    for (&cat, &n) in candidate_counts {
        if n == 0 {
            continue;
        }
        let s = survivors.get(&cat).copied().unwrap_or(0);
        if s > n {
            return Err(Error::invalid(format!(
                "{s} survivors exceed {n} candidates in category {cat}"
            )));
        }
        out.insert(cat, s as f64 / n as f64);
    }
    if let Some(cat) = survivors.keys().find(|c| !candidate_counts.contains_key(c)) {
        return Err(Error::invalid(format!("category {cat} has survivors but no candidates")));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    ShortTerm,
    LongTerm,
}

impl Horizon {
    pub const ALL: [Horizon; 2] = [Horizon::ShortTerm, Horizon::LongTerm];

    pub fn windows(self) -> [u32; 2] {
        match self {
            Horizon::ShortTerm => [1, 7],
            Horizon::LongTerm => [90, 180],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Horizon::ShortTerm => "short_term",
            Horizon::LongTerm => "long_term",
        }
    }
}

/// Feature importances merged across the windows of one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonGroup {
    pub horizon: Horizon,
    pub windows: Vec<u32>,
    pub importance: BTreeMap<String, f64>,
}

/// Merge the member windows of one horizon. A feature present in several
/// windows gets the mean of its importances.
pub fn merge_horizon(horizon: Horizon, by_window: &BTreeMap<u32, BTreeMap<String, f64>>) -> Result<HorizonGroup> {
    let mut acc: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for w in horizon.windows() {
        let map = by_window
            .get(&w)
            .ok_or_else(|| Error::Empty(format!("window {w} needed for {} group", horizon.label())))?;
        for (name, &v) in map {
            let e = acc.entry(name.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    Ok(HorizonGroup {
        horizon,
        windows: horizon.windows().to_vec(),
        importance: acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect(),
    })
}

pub fn group_horizons(by_window: &BTreeMap<u32, BTreeMap<String, f64>>) -> Result<(HorizonGroup, HorizonGroup)> {
    Ok((
        merge_horizon(Horizon::ShortTerm, by_window)?,
        merge_horizon(Horizon::LongTerm, by_window)?,
    ))
}

fn ranked<'a>(items: impl Iterator<Item = (&'a String, &'a f64)>, k: usize) -> Vec<(String, f64)> {
    let mut v: Vec<(String, f64)> = items.map(|(n, &s)| (n.clone(), s)).collect();
    v.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(k);
    v
}

/// The `k` most important features of a group, ties by name.
pub fn top_k(group: &HorizonGroup, k: usize) -> Vec<(String, f64)> {
    ranked(group.importance.iter(), k)
}

/// The `k` most important features of `a` that do not appear in `b`.
pub fn unique_top_k(a: &HorizonGroup, b: &HorizonGroup, k: usize) -> Vec<(String, f64)> {
    ranked(a.importance.iter().filter(|(n, _)| !b.importance.contains_key(*n)), k)
}

/// Percentage decrease in MSE of the diverse vector relative to a
/// single-category arm, expressed over the diverse MSE.
pub fn improvement_pct(mse_category: f64, mse_diverse: f64) -> Result<f64> {
    if mse_diverse == 0.0 {
        return Err(Error::Domain(
            "diverse-vector MSE is exactly zero; the target is probably leaking into the features".into(),
        ));
    }
    Ok((mse_category - mse_diverse) / mse_diverse * 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Improvement {
    pub mse_diverse: f64,
    pub arms: BTreeMap<Category, CategoryArm>,
    /// Mean improvement over the arms.
    pub mean: f64,
}

fn holdout_mse(params: &EnsembleParams, train: &Dataset, test: &Dataset, features: &[String], seed: u64) -> Result<f64> {
    let tr = train.select(features)?;
    let te = test.select(features)?;
    let model = params.fit(&tr.to_matrix(), tr.target()?, seed)?;
    mse(te.target()?, &model.predict_matrix(&te.to_matrix())?)
}

/// Train one model on the diverse feature vector and one per category on
/// that category's candidate features, all with the same hyperparameters,
/// seed and split, and compare their holdout MSE.
pub fn improvement(
    params: &EnsembleParams,
    train: &Dataset,
    test: &Dataset,
    final_features: &[String],
    seed: u64,
) -> Result<Improvement> {
    if final_features.is_empty() {
        return Err(Error::Empty("final feature vector".into()));
    }
    let mse_diverse = holdout_mse(params, train, test, final_features, seed)?;
    let mut arms = BTreeMap::new();
    for (cat, names) in train.features_by_category() {
        let m = holdout_mse(params, train, test, &names, seed)?;
        arms.insert(
            cat,
            CategoryArm {
                n_features: names.len(),
                mse: m,
                improvement_pct: improvement_pct(m, mse_diverse)?,
            },
        );
    }
    if arms.is_empty() {
        return Err(Error::Empty("no category has candidate features".into()));
    }
    let mean = arms.values().map(|a| a.improvement_pct).sum::<f64>() / arms.len() as f64;
    Ok(Improvement { mse_diverse, arms, mean })
}
