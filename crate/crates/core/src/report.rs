//! Report tables and the on-disk result tree.
//!
//! Layout of a run directory:
//!
//! ```text
//! summary.json                      run overview
//! drop_log.csv                      metrics discarded while cleaning
//! exclusions.csv                    metrics excluded per scenario
//! scenarios/<set>_<window>.json     one ScenarioResult each
//! audit/<set>_<window>.json         feature-reduction audit trail
//! tables/feature_vectors.csv        scenario, n_features
//! tables/top5_features.csv          top features per set and horizon
//! tables/unique_top20.csv           horizon-unique features per set
//! tables/improvement_by_window.csv  mean improvement per window and set
//! tables/improvement_by_category.csv
//! plots/contribution_by_window.csv  contribution factor series
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::Category;
use crate::error::{Error, Result};
use crate::experiments::{merge_horizon, top_k, unique_top_k, Horizon, HorizonGroup, ScenarioResult, ScenarioRun};
use crate::pipeline::Prepared;

/// Placeholder for a table cell with no value, e.g. a category absent
/// from a set.
pub const MISSING_CELL: &str = "-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))
    }
}

fn pct(v: f64) -> String {
    format!("{v:.2}")
}

fn sets(results: &[ScenarioResult]) -> Vec<String> {
    let mut v: Vec<(chrono::NaiveDate, String)> =
        results.iter().map(|r| (r.scenario.period_start, r.set.clone())).collect();
    v.sort();
    v.dedup();
    v.into_iter().map(|(_, s)| s).collect()
}

fn windows(results: &[ScenarioResult]) -> Vec<u32> {
    let mut w: Vec<u32> = results.iter().map(|r| r.scenario.window).collect();
    w.sort_unstable();
    w.dedup();
    w
}

/// Final feature-vector size per scenario.
pub fn feature_vectors(results: &[ScenarioResult]) -> Table {
    let mut t = Table::new(&["scenario", "n_features"]);
    for r in results {
        t.rows.push(vec![r.id.clone(), r.final_features.len().to_string()]);
    }
    t
}

/// Horizon groups available for one set; a group needs all its windows.
pub fn horizon_groups(results: &[ScenarioResult], set: &str) -> Vec<HorizonGroup> {
    let by_window: BTreeMap<u32, BTreeMap<String, f64>> = results
        .iter()
        .filter(|r| r.set == set)
        .map(|r| (r.scenario.window, r.importance_map()))
        .collect();
    Horizon::ALL
        .iter()
        .filter_map(|&h| merge_horizon(h, &by_window).ok())
        .collect()
}

fn ranked_rows(t: &mut Table, set: &str, horizon: Horizon, list: Vec<(String, f64)>) {
    for (i, (name, score)) in list.into_iter().enumerate() {
        t.rows.push(vec![
            set.to_string(),
            horizon.label().to_string(),
            (i + 1).to_string(),
            name,
            score.to_string(),
        ]);
    }
}

/// The `k` most important features per set and horizon.
pub fn top_features(results: &[ScenarioResult], k: usize) -> Table {
    let mut t = Table::new(&["set", "horizon", "rank", "feature", "importance"]);
    for set in sets(results) {
        for g in horizon_groups(results, &set) {
            ranked_rows(&mut t, &set, g.horizon, top_k(&g, k));
        }
    }
    t
}

/// The `k` most important features unique to each horizon of a set.
pub fn unique_features(results: &[ScenarioResult], k: usize) -> Table {
    let mut t = Table::new(&["set", "horizon", "rank", "feature", "importance"]);
    for set in sets(results) {
        if let [a, b] = horizon_groups(results, &set).as_slice() {
            ranked_rows(&mut t, &set, a.horizon, unique_top_k(a, b, k));
            ranked_rows(&mut t, &set, b.horizon, unique_top_k(b, a, k));
        }
    }
    t
}

/// Mean improvement per window (rows) and set (columns).
pub fn improvement_by_window(results: &[ScenarioResult]) -> Table {
    let sets = sets(results);
    let mut header = vec!["window"];
    header.extend(sets.iter().map(String::as_str));
    let mut t = Table::new(&header);
    for w in windows(results) {
        let mut row = vec![w.to_string()];
        for s in &sets {
            let cell = results
                .iter()
                .find(|r| &r.set == s && r.scenario.window == w)
                .map_or(MISSING_CELL.to_string(), |r| pct(r.mean_improvement));
            row.push(cell);
        }
        t.rows.push(row);
    }
    t
}

/// Improvement per category (rows) and set (columns), averaged over the
/// set's windows. Categories with no candidates in a set show `-`.
pub fn improvement_by_category(results: &[ScenarioResult]) -> Table {
    let sets = sets(results);
    let mut header = vec!["category"];
    header.extend(sets.iter().map(String::as_str));
    let mut t = Table::new(&header);
    for cat in Category::FEATURE {
        let mut row = vec![cat.label().to_string()];
        for s in &sets {
            let vals: Vec<f64> = results
                .iter()
                .filter(|r| &r.set == s)
                .filter_map(|r| r.arms.get(&cat).map(|a| a.improvement_pct))
                .collect();
            row.push(if vals.is_empty() {
                MISSING_CELL.to_string()
            } else {
                pct(vals.iter().sum::<f64>() / vals.len() as f64)
            });
        }
        t.rows.push(row);
    }
    t
}

/// Long-format contribution factors for plotting.
pub fn contribution_by_window(results: &[ScenarioResult]) -> Table {
    let mut t = Table::new(&["set", "window", "category", "contribution"]);
    for r in results {
        for (cat, f) in &r.contribution {
            t.rows.push(vec![r.set.clone(), r.scenario.window.to_string(), cat.tag().to_string(), f.to_string()]);
        }
    }
    t
}

/// Every derived table keyed by its path inside a run directory.
pub fn render_tables(results: &[ScenarioResult]) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let tables = [
        ("tables/feature_vectors.csv", feature_vectors(results)),
        ("tables/top5_features.csv", top_features(results, 5)),
        ("tables/unique_top20.csv", unique_features(results, 20)),
        ("tables/improvement_by_window.csv", improvement_by_window(results)),
        ("tables/improvement_by_category.csv", improvement_by_category(results)),
        ("plots/contribution_by_window.csv", contribution_by_window(results)),
    ];
    tables
        .into_iter()
        .map(|(p, t)| Ok((PathBuf::from(p), t.to_csv()?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioLine {
    pub id: String,
    pub n_candidates: usize,
    pub n_features: usize,
    pub fra_iterations: usize,
    pub forced_stop: bool,
    pub mse_diverse: f64,
    pub mean_improvement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub corpus_columns: usize,
    pub dropped_while_cleaning: usize,
    pub indicators_added: usize,
    pub target: String,
    pub scenarios: Vec<ScenarioLine>,
}

fn summary(config: &RunConfig, prepared: &Prepared, runs: &[ScenarioRun]) -> RunSummary {
    RunSummary {
        seed: config.seed,
        corpus_columns: prepared.corpus.columns.len(),
        dropped_while_cleaning: prepared.dropped.len(),
        indicators_added: prepared.indicators_added,
        target: prepared.target.name.clone(),
        scenarios: runs
            .iter()
            .map(|r| ScenarioLine {
                id: r.result.id.clone(),
                n_candidates: r.result.candidates.values().sum(),
                n_features: r.result.final_features.len(),
                fra_iterations: r.result.fra.iterations,
                forced_stop: r.result.fra.forced_stop,
                mse_diverse: r.result.mse_diverse,
                mean_improvement: r.result.mean_improvement,
            })
            .collect(),
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

/// Every file of a run directory, in memory.
pub fn run_files(config: &RunConfig, prepared: &Prepared, runs: &[ScenarioRun]) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let mut files = vec![(PathBuf::from("summary.json"), json(&summary(config, prepared, runs))?)];
    let mut drop_log = Vec::new();
    prepared.dropped.write_csv(&mut drop_log)?;
    files.push((PathBuf::from("drop_log.csv"), drop_log));

    let mut excl = csv::Writer::from_writer(Vec::new());
    excl.write_record(["scenario", "metric", "reason", "detail"])?;
    for run in runs {
        let r = &run.result;
        for d in &r.excluded {
            excl.write_record([r.id.clone(), d.metric.clone(), d.reason.to_string(), d.detail.clone()])?;
        }
        files.push((PathBuf::from(format!("scenarios/{}.json", r.id)), json(r)?));
        files.push((PathBuf::from(format!("audit/{}.json", r.id)), json(&run.reduction)?));
    }
    files.push((
        PathBuf::from("exclusions.csv"),
        excl.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?,
    ));
    let results: Vec<ScenarioResult> = runs.iter().map(|r| r.result.clone()).collect();
    files.extend(render_tables(&results)?);
    Ok(files)
}

fn write_files(root: &Path, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (rel, bytes) in files {
        let path = root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Write a complete directory tree at `out`, replacing any previous tree.
/// Files are staged in a sibling temporary directory and moved into place
/// with a rename, so a failure never leaves a partial tree behind.
pub fn write_tree_atomic(out: &Path, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    let parent = match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let staging = tempfile::Builder::new()
        .prefix(".cryptodiv-staging-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    write_files(staging.path(), files)?;
    let staged = staging.keep();
    if out.exists() {
        let old = tempfile::Builder::new()
            .prefix(".cryptodiv-old-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        let old_path = old.path().join("previous");
        fs::rename(out, &old_path).map_err(|e| Error::io(out, e))?;
        if let Err(e) = fs::rename(&staged, out) {
            let _ = fs::rename(&old_path, out);
            let _ = fs::remove_dir_all(&staged);
            return Err(Error::io(out, e));
        }
    } else if let Err(e) = fs::rename(&staged, out) {
        let _ = fs::remove_dir_all(&staged);
        return Err(Error::io(out, e));
    }
    Ok(())
}

/// Replace individual files under `root`, each via a temp file and rename.
pub fn write_files_atomic(root: &Path, files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (rel, bytes) in files {
        let path = root.join(rel);
        let dir = path.parent().unwrap_or(root);
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        std::io::Write::write_all(&mut tmp, bytes).map_err(|e| Error::io(&path, e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
    }
    Ok(())
}

/// Read every stored scenario result of a run directory, ordered by
/// period and window.
pub fn load_results(run_dir: &Path) -> Result<Vec<ScenarioResult>> {
    let dir = run_dir.join("scenarios");
    let entries = fs::read_dir(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&dir, e))?.path();
        if path.extension().is_some_and(|e| e == "json") {
            let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let r: ScenarioResult =
                serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.to_string()))?;
            out.push(r);
        }
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("no scenario results under {}", dir.display())));
    }
    out.sort_by_key(|r| r.scenario);
    Ok(out)
}
