use std::collections::BTreeMap;

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{contribution_factors, improvement};
use crate::data::{chronological_split, make_target, slice_period, AlignedCorpus, Category, DropRecord, MetricSeries, Scenario};
use crate::error::{Error, Result, StageExt};
use crate::fra::{final_vector, fra_reduce, FraConfig, ReducedFeatureSet};
use crate::importance::{background_rows, mdi, shapley_sampled};
use crate::models::{grid_search_cv, EnsembleParams, EnsembleSummary, GridSpec};
use crate::rng::derive;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShapleyConfig {
    /// Cap on background rows drawn from the training slice.
    pub background_rows: usize,
    /// Training rows whose attributions are averaged into the ranking.
    pub explain_rows: usize,
    pub permutations: usize,
}

impl Default for ShapleyConfig {
    fn default() -> Self {
        Self {
            background_rows: 100,
            explain_rows: 50,
            permutations: 20,
        }
    }
}

/// Everything that drives a single scenario apart from the data and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub holdout: f64,
    /// Grid-search both ensembles before reduction. When false the
    /// `fra.forest` / `fra.boosting` parameters are used as given.
    pub tune: bool,
    pub cv_folds: usize,
    pub forest_grid: GridSpec,
    pub boosting_grid: GridSpec,
    pub fra: FraConfig,
    pub shapley: ShapleyConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            holdout: 0.2,
            tune: true,
            cv_folds: 5,
            forest_grid: GridSpec::default_forest(),
            boosting_grid: GridSpec::default_boosting(),
            fra: FraConfig::default(),
            shapley: ShapleyConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.holdout > 0.0 && self.holdout < 1.0) {
            return Err(Error::Config(format!("holdout {} outside (0, 1)", self.holdout)));
        }
        if self.tune {
            if self.cv_folds < 2 {
                return Err(Error::Config("cv_folds must be at least 2".into()));
            }
            if self.forest_grid.candidates.is_empty() || self.boosting_grid.candidates.is_empty() {
                return Err(Error::Config("tuning grids must not be empty".into()));
            }
        }
        if self.shapley.background_rows == 0 || self.shapley.explain_rows == 0 || self.shapley.permutations == 0 {
            return Err(Error::Config("shapley sizes must be at least 1".into()));
        }
        self.fra.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelChoice {
    pub params: EnsembleParams,
    /// Mean cross-validated MSE of the chosen candidate, when tuned.
    pub cv_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FraSummary {
    pub iterations: usize,
    pub forced_stop: bool,
    pub final_threshold: Option<f64>,
    pub survivors: Vec<String>,
    /// Survivors that are also among the top Shapley features.
    pub shapley_overlap: usize,
    pub overlap_depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalFeature {
    pub name: String,
    pub category: Category,
    /// Forest impurity importance on the final vector.
    pub importance: f64,
    /// `"fra"` or `"shapley"`, whichever list contributed it first.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryArm {
    pub n_features: usize,
    pub mse: f64,
    pub improvement_pct: f64,
}

/// Outcome of one scenario, enough to rebuild every report table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub id: String,
    pub set: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub candidates: BTreeMap<Category, usize>,
    pub excluded: Vec<DropRecord>,
    pub forest: ModelChoice,
    pub boosting: ModelChoice,
    pub fra: FraSummary,
    pub final_features: Vec<FinalFeature>,
    pub model: EnsembleSummary,
    pub mse_diverse: f64,
    pub arms: BTreeMap<Category, CategoryArm>,
    pub mean_improvement: f64,
    pub contribution: BTreeMap<Category, f64>,
}

impl ScenarioResult {
    pub fn importance_map(&self) -> BTreeMap<String, f64> {
        self.final_features.iter().map(|f| (f.name.clone(), f.importance)).collect()
    }
}

/// A scenario result together with the full reduction audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub result: ScenarioResult,
    pub reduction: ReducedFeatureSet,
}

/// Seed of a scenario, keyed by its period year and window.
pub fn scenario_seed(seed: u64, scenario: &Scenario) -> u64 {
    derive(seed, &[scenario.period_start.year() as u64, scenario.window as u64])
}

fn tune(grid: &GridSpec, fixed: &EnsembleParams, enabled: bool, x: &crate::models::Matrix, y: &[f64], folds: usize, seed: u64) -> Result<ModelChoice> {
    if !enabled {
        return Ok(ModelChoice {
            params: fixed.clone(),
            cv_mse: None,
        });
    }
    let cv = grid_search_cv(x, y, grid, folds, seed)?;
    Ok(ModelChoice {
        cv_mse: Some(cv.mean_mse[cv.chosen]),
        params: cv.best,
    })
}

/// Slice, target, split, tune, reduce, rank by Shapley values, build the
/// final vector, and score it against every single-category arm.
pub fn run_scenario(
    corpus: &AlignedCorpus,
    target: &MetricSeries,
    scenario: Scenario,
    config: &ScenarioConfig,
    seed: u64,
) -> Result<ScenarioRun> {
    config.validate()?;
    let seed = scenario_seed(seed, &scenario);
    let sub = |k: u64| derive(seed, &[k]);

    let (sliced, excluded) = slice_period(corpus, &scenario).stage("slice")?;
    if sliced.n_features() == 0 {
        return Err(Error::Empty("no feature is fully observed over the period".into())).stage("slice");
    }
    let data = make_target(&sliced, target, scenario.window).stage("target")?;
    let (train, test) = chronological_split(&data, config.holdout).stage("split")?;
    let x = train.to_matrix();
    let y = train.target()?;

    let forest = tune(&config.forest_grid, &config.fra.forest, config.tune, &x, y, config.cv_folds, sub(1)).stage("tune")?;
    let boosting =
        tune(&config.boosting_grid, &config.fra.boosting, config.tune, &x, y, config.cv_folds, sub(1)).stage("tune")?;

    let fra_config = FraConfig {
        forest: forest.params.clone(),
        boosting: boosting.params.clone(),
        seed: sub(2),
        ..config.fra.clone()
    };
    let reduction = fra_reduce(&train, &fra_config).stage("fra")?;

    let shap = (|| {
        let model = forest.params.fit(&x, y, sub(3))?;
        let bg = x.take_rows(&background_rows(x.n_rows(), config.shapley.background_rows, sub(4)));
        let ex = x.take_rows(&background_rows(x.n_rows(), config.shapley.explain_rows, sub(5)));
        shapley_sampled(&model, &bg, &ex, config.shapley.permutations, sub(6))
    })()
    .stage("shapley")?;

    let fv = final_vector(&reduction, &shap.report, config.fra.top_k_union, config.fra.target_count);

    let final_train = train.select(&fv.features).stage("importance")?;
    let model = forest
        .params
        .fit(&final_train.to_matrix(), y, sub(7))
        .stage("importance")?;
    let rf_importance = mdi(&model).stage("importance")?;
    let categories = train.category_map();
    let final_features = fv
        .features
        .iter()
        .enumerate()
        .map(|(i, name)| FinalFeature {
            name: name.clone(),
            category: categories[name],
            importance: rf_importance.score(name).unwrap_or(0.0),
            source: if i < fv.from_fra { "fra" } else { "shapley" }.to_string(),
        })
        .collect();

    let candidates: BTreeMap<Category, usize> =
        train.features_by_category().into_iter().map(|(c, v)| (c, v.len())).collect();
    let contribution = contribution_factors(&fv.features, &categories, &candidates).stage("contribution")?;
    let imp = improvement(&forest.params, &train, &test, &fv.features, sub(7)).stage("improvement")?;

    let result = ScenarioResult {
        id: scenario.id(),
        set: scenario.period_label(),
        scenario,
        seed,
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        candidates,
        excluded: excluded.records,
        forest,
        boosting,
        fra: FraSummary {
            iterations: reduction.iterations,
            forced_stop: reduction.forced_stop,
            final_threshold: reduction.audit.last().map(|r| r.threshold),
            survivors: reduction.survivors.clone(),
            shapley_overlap: fv.overlap,
            overlap_depth: fv.overlap_depth,
        },
        final_features,
        model: model.summary(),
        mse_diverse: imp.mse_diverse,
        arms: imp.arms,
        mean_improvement: imp.mean,
        contribution,
    };
    Ok(ScenarioRun { result, reduction })
}
