//! Iterative multi-method feature reduction.
//!
//! Each iteration fits a random forest and a boosted ensemble on the
//! surviving features, ranks them by impurity decrease and permutation
//! importance under both models, and removes every feature that sits in the
//! bottom half of all four rankings while its absolute correlation with the
//! target is below a threshold that rises every iteration.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::importance::{mdi, pearson_report, pfi, ImportanceReport};
use crate::models::{EnsembleParams, Matrix, MaxFeatures};
use crate::rng::derive;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FraConfig {
    pub target_count: usize,
    pub corr_start: f64,
    pub corr_step: f64,
    pub top_k_union: usize,
    pub max_iterations: usize,
    pub pfi_repeats: usize,
    pub forest: EnsembleParams,
    pub boosting: EnsembleParams,
    pub seed: u64,
}

impl Default for FraConfig {
    fn default() -> Self {
        Self {
            target_count: 100,
            corr_start: 0.5,
            corr_step: 0.025,
            top_k_union: 75,
            max_iterations: 200,
            pfi_repeats: 1,
            forest: EnsembleParams::forest(100, Some(8)),
            boosting: EnsembleParams {
                features_per_split: MaxFeatures::Fraction(0.5),
                ..EnsembleParams::boosting(100, Some(4), 0.1)
            },
            seed: 0,
        }
    }
}

impl FraConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.corr_start) {
            return Err(Error::invalid("corr_start must lie in [0, 1]"));
        }
        if !(self.corr_step > 0.0) {
            return Err(Error::invalid("corr_step must be positive"));
        }
        if self.top_k_union == 0 || self.top_k_union > self.target_count {
            return Err(Error::invalid("top_k_union must lie in [1, target_count]"));
        }
        if self.pfi_repeats == 0 {
            return Err(Error::invalid("pfi_repeats must be at least 1"));
        }
        self.forest.validate()?;
        self.boosting.validate()
    }

    /// Threshold used in iteration `i` (0-based).
    pub fn threshold(&self, i: usize) -> f64 {
        self.corr_start + self.corr_step * i as f64
    }
}

/// The four rankings computed on one feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourReports {
    pub forest_mdi: ImportanceReport,
    pub boosting_mdi: ImportanceReport,
    pub forest_pfi: ImportanceReport,
    pub boosting_pfi: ImportanceReport,
}

impl FourReports {
    pub fn all(&self) -> [&ImportanceReport; 4] {
        [&self.forest_mdi, &self.boosting_mdi, &self.forest_pfi, &self.boosting_pfi]
    }

    /// Mean 1-based rank per feature, indexed like the report features.
    pub fn mean_ranks(&self) -> Vec<f64> {
        let ranks: Vec<Vec<usize>> = self.all().iter().map(|r| r.ranks()).collect();
        (0..self.forest_mdi.len())
            .map(|j| ranks.iter().map(|r| r[j] as f64).sum::<f64>() / 4.0)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub feature: String,
    pub abs_corr: f64,
    /// Removed by the forced-progress rule rather than the main criterion.
    pub forced: bool,
}

/// One iteration of the reduction loop, enough to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub threshold: f64,
    pub n_features: usize,
    /// Feature names best-first for forest MDI, boosting MDI, forest PFI,
    /// boosting PFI.
    pub rankings: [Vec<String>; 4],
    pub removed: Vec<Removal>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedFeatureSet {
    pub initial: Vec<String>,
    /// Survivors ordered by ascending mean rank over the final four reports.
    pub survivors: Vec<String>,
    pub mean_ranks: Vec<f64>,
    pub abs_corr: BTreeMap<String, f64>,
    pub audit: Vec<IterationRecord>,
    pub iterations: usize,
    /// Set when the iteration cap stopped the loop above the target count.
    pub forced_stop: bool,
}

impl ReducedFeatureSet {
    pub fn removed(&self) -> impl Iterator<Item = &Removal> {
        self.audit.iter().flat_map(|r| r.removed.iter())
    }

    /// Structured, replayable audit trail.
    pub fn audit_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// The `floor(p / 2)` lowest-ranked features.
pub fn bottom_half(report: &ImportanceReport) -> Vec<String> {
    let names = report.ranked_names();
    let half = names.len() / 2;
    names[names.len() - half..].iter().map(|s| s.to_string()).collect()
}

fn evaluate(matrix: &Matrix, y: &[f64], config: &FraConfig, iteration: usize) -> Result<FourReports> {
    let seed = |tag: u64| derive(config.seed, &[iteration as u64, tag]);
    let fit_and_score = |params: &EnsembleParams, tag: u64| -> Result<(ImportanceReport, ImportanceReport)> {
        let model = params.fit(matrix, y, seed(tag))?;
        let m = mdi(&model)?;
        let p = pfi(&model, matrix, y, config.pfi_repeats, seed(tag + 10))?;
        Ok((m, p))
    };
    let (rf, gbt) = rayon::join(|| fit_and_score(&config.forest, 1), || fit_and_score(&config.boosting, 2));
    let (rf_mdi, rf_pfi) = rf?;
    let (gbt_mdi, gbt_pfi) = gbt?;
    Ok(FourReports {
        forest_mdi: rf_mdi.with_model("random_forest"),
        boosting_mdi: gbt_mdi.with_model("gradient_boost"),
        forest_pfi: rf_pfi.with_model("random_forest"),
        boosting_pfi: gbt_pfi.with_model("gradient_boost"),
    })
}

/// The least correlated feature that sits in the bottom half of at least
/// one ranking; ties go to the greater name.
fn weakest_bottom(names: &[String], bottoms: &[BTreeSet<String>], abs_corr: &BTreeMap<String, f64>) -> usize {
    (0..names.len())
        .filter(|&j| bottoms.iter().any(|b| b.contains(&names[j])))
        .min_by(|&a, &b| abs_corr[&names[a]].total_cmp(&abs_corr[&names[b]]).then_with(|| names[b].cmp(&names[a])))
        .expect("a ranking of two or more features has a bottom half")
}

pub fn fra_reduce(dataset: &Dataset, config: &FraConfig) -> Result<ReducedFeatureSet> {
    config.validate()?;
    let y = dataset.target()?;
    if dataset.n_features() == 0 {
        return Err(Error::Empty("feature set".into()));
    }
    let full = dataset.to_matrix();
    let corr = pearson_report(&full, y)?;
    let abs_corr: BTreeMap<String, f64> = corr.features.iter().cloned().zip(corr.scores.iter().copied()).collect();

    let mut current: Vec<String> = dataset.features.clone();
    let mut audit = Vec::new();
    let mut forced_stop = false;
    let mut iteration = 0;
    while current.len() > config.target_count {
        if iteration >= config.max_iterations {
            forced_stop = true;
            break;
        }
        let threshold = config.threshold(iteration);
        let matrix = dataset.select(&current)?.to_matrix();
        let reports = evaluate(&matrix, y, config, iteration)?;
        let bottoms: Vec<BTreeSet<String>> = reports.all().iter().map(|r| bottom_half(r).into_iter().collect()).collect();
        let mut removed: Vec<Removal> = current
            .iter()
            .filter(|f| bottoms.iter().all(|b| b.contains(*f)) && abs_corr[*f] < threshold)
            .map(|f| Removal {
                feature: f.clone(),
                abs_corr: abs_corr[f],
                forced: false,
            })
            .collect();
        if removed.is_empty() && threshold > 1.0 {
            let pick = &current[weakest_bottom(&current, &bottoms, &abs_corr)];
            removed.push(Removal {
                feature: pick.clone(),
                abs_corr: abs_corr[pick],
                forced: true,
            });
        }
        let gone: BTreeSet<&str> = removed.iter().map(|r| r.feature.as_str()).collect();
        let next: Vec<String> = current.iter().filter(|f| !gone.contains(f.as_str())).cloned().collect();
        audit.push(IterationRecord {
            iteration,
            threshold,
            n_features: current.len(),
            rankings: reports
                .all()
                .map(|r| r.ranked_names().into_iter().map(str::to_string).collect()),
            removed,
        });
        current = next;
        iteration += 1;
    }

    let matrix = dataset.select(&current)?.to_matrix();
    let finals = evaluate(&matrix, y, config, iteration)?;
    let mean = finals.mean_ranks();
    let mut order: Vec<usize> = (0..current.len()).collect();
    order.sort_by(|&a, &b| mean[a].total_cmp(&mean[b]).then_with(|| current[a].cmp(&current[b])));
    Ok(ReducedFeatureSet {
        initial: dataset.features.clone(),
        survivors: order.iter().map(|&j| current[j].clone()).collect(),
        mean_ranks: order.iter().map(|&j| mean[j]).collect(),
        abs_corr,
        audit,
        iterations: iteration,
        forced_stop,
    })
}

/// Final feature vector: union of the top-`k` reduced features and the
/// top-`k` Shapley features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalVector {
    /// Reduced-set entries in their rank order, then Shapley-only entries in
    /// Shapley rank order.
    pub features: Vec<String>,
    pub from_fra: usize,
    pub shapley_only: usize,
    /// Survivors that also appear in the top-`overlap_depth` Shapley features.
    pub overlap: usize,
    pub overlap_depth: usize,
}

pub fn final_vector(
    reduced: &ReducedFeatureSet,
    shapley: &ImportanceReport,
    k: usize,
    overlap_depth: usize,
) -> FinalVector {
    let shap_ranked = shapley.ranked_names();
    let mut features: Vec<String> = reduced.survivors.iter().take(k).cloned().collect();
    let from_fra = features.len();
    let mut seen: BTreeSet<String> = features.iter().cloned().collect();
    for name in shap_ranked.iter().take(k) {
        if seen.insert(name.to_string()) {
            features.push(name.to_string());
        }
    }
    let survivors: BTreeSet<&str> = reduced.survivors.iter().map(String::as_str).collect();
    let overlap = shap_ranked
        .iter()
        .take(overlap_depth)
        .filter(|n| survivors.contains(*n))
        .count();
    FinalVector {
        shapley_only: features.len() - from_fra,
        features,
        from_fra,
        overlap,
        overlap_depth,
    }
}
