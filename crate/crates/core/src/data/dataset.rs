use std::collections::BTreeMap;
use std::io::{Read, Write};

use chrono::{Datelike, Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{parse_date, AlignedCorpus, Category, DropLog, DropReason, MetricSeries};
use crate::error::{Error, Result};
use crate::models::Matrix;

/// One experiment cell: a period start and a prediction window in days.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scenario {
    pub period_start: NaiveDate,
    pub window: u32,
}

impl Scenario {
    pub fn new(period_start: NaiveDate, window: u32) -> Self {
        Self {
            period_start,
            window,
        }
    }

    /// Period label, the start year (`"2017"`).
    pub fn period_label(&self) -> String {
        self.period_start.year().to_string()
    }

    /// `"<year>_<window>"`, e.g. `2017_7`.
    pub fn id(&self) -> String {
        format!("{}_{}", self.period_label(), self.window)
    }
}

/// Date-aligned feature matrix with an optional shifted target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub dates: Vec<NaiveDate>,
    pub features: Vec<String>,
    pub categories: Vec<Category>,
    /// One column per feature, each `dates.len()` long.
    pub columns: Vec<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    pub window: Option<u32>,
}

impl Dataset {
    pub fn new(
        dates: Vec<NaiveDate>,
        features: Vec<(String, Category, Vec<f64>)>,
    ) -> Result<Self> {
        let n = dates.len();
        let mut names = Vec::with_capacity(features.len());
        let mut categories = Vec::with_capacity(features.len());
        let mut columns = Vec::with_capacity(features.len());
        for (name, cat, col) in features {
            if col.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: col.len(),
                });
            }
            if names.contains(&name) {
                return Err(Error::DuplicateMetric(name));
            }
            names.push(name);
            categories.push(cat);
            columns.push(col);
        }
        Ok(Self {
            dates,
            features: names,
            categories,
            columns,
            target: None,
            window: None,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn target(&self) -> Result<&[f64]> {
        self.target.as_deref().ok_or(Error::MissingTarget)
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.feature_index(name).map(|j| self.columns[j].as_slice())
    }

    pub fn category_of(&self, name: &str) -> Option<Category> {
        self.feature_index(name).map(|j| self.categories[j])
    }

    pub fn category_map(&self) -> BTreeMap<String, Category> {
        self.features.iter().cloned().zip(self.categories.iter().copied()).collect()
    }

    /// Feature names grouped by category, in column order.
    pub fn features_by_category(&self) -> BTreeMap<Category, Vec<String>> {
        let mut out: BTreeMap<Category, Vec<String>> = BTreeMap::new();
        for (name, cat) in self.features.iter().zip(&self.categories) {
            out.entry(*cat).or_default().push(name.clone());
        }
        out
    }

    /// Restrict to the named features, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Dataset> {
        let mut out = Dataset {
            dates: self.dates.clone(),
            features: Vec::with_capacity(names.len()),
            categories: Vec::with_capacity(names.len()),
            columns: Vec::with_capacity(names.len()),
            target: self.target.clone(),
            window: self.window,
        };
        for name in names {
            let j = self
                .feature_index(name)
                .ok_or_else(|| Error::invalid(format!("unknown feature `{name}`")))?;
            out.features.push(name.clone());
            out.categories.push(self.categories[j]);
            out.columns.push(self.columns[j].clone());
        }
        Ok(out)
    }

    /// Rows `[start, end)`.
    pub fn rows(&self, start: usize, end: usize) -> Dataset {
        Dataset {
            dates: self.dates[start..end].to_vec(),
            features: self.features.clone(),
            categories: self.categories.clone(),
            columns: self.columns.iter().map(|c| c[start..end].to_vec()).collect(),
            target: self.target.as_ref().map(|t| t[start..end].to_vec()),
            window: self.window,
        }
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix::from_columns(self.features.clone(), self.columns.clone())
            .expect("dataset columns share one length")
    }

    /// CSV with a `date,<features...>[,target]` header followed by a
    /// `#category,<tags...>[,target]` row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let has_target = self.target.is_some();
        let mut header = vec!["date".to_string()];
        header.extend(self.features.iter().cloned());
        let mut cats = vec!["#category".to_string()];
        cats.extend(self.categories.iter().map(|c| c.tag().to_string()));
        if has_target {
            header.push("target".into());
            cats.push("target".into());
        }
        out.write_record(&header)?;
        out.write_record(&cats)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.format("%Y-%m-%d").to_string()];
            rec.extend(self.columns.iter().map(|c| c[i].to_string()));
            if let Some(t) = &self.target {
                rec.push(t[i].to_string());
            }
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::io("dataset", e))?;
        Ok(())
    }

    /// Inverse of [`Dataset::write_csv`]. The `#category` row is optional;
    /// without it every feature is tagged `macro`.
    pub fn read_csv<R: Read>(r: R, window: Option<u32>) -> Result<Dataset> {
        let src = std::path::PathBuf::from("dataset");
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("date") {
            return Err(Error::parse(&src, "first column must be `date`"));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let target_col = names.iter().position(|n| n == "target");
        let mut categories = vec![Category::Macro; names.len()];
        let mut dates = Vec::new();
        let mut cols = vec![Vec::new(); names.len()];
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if i == 0 && rec.get(0) == Some("#category") {
                for (j, tag) in rec.iter().skip(1).enumerate() {
                    if Some(j) != target_col {
                        categories[j] = tag.parse()?;
                    }
                }
                continue;
            }
            let date = rec
                .get(0)
                .and_then(parse_date)
                .ok_or_else(|| Error::parse(&src, format!("row {}: bad date", i + 2)))?;
            dates.push(date);
            for (j, col) in cols.iter_mut().enumerate() {
                let cell = rec.get(j + 1).unwrap_or("");
                col.push(cell.trim().parse::<f64>().map_err(|_| {
                    Error::parse(&src, format!("row {}: `{}` is not a number", i + 2, cell))
                })?);
            }
        }
        let target = target_col.map(|t| cols.remove(t));
        let mut names = names;
        if let Some(t) = target_col {
            names.remove(t);
            categories.remove(t);
        }
        let mut ds = Dataset::new(
            dates,
            names.into_iter().zip(categories).zip(cols).map(|((n, c), v)| (n, c, v)).collect(),
        )?;
        ds.window = target.as_ref().and(window.or(Some(1)));
        ds.target = target;
        Ok(ds)
    }
}

/// Restrict the corpus to `[period_start, end]` and keep only feature
/// columns that are fully observed over that range. Market columns are not
/// features and never appear in the result.
pub fn slice_period(corpus: &AlignedCorpus, scenario: &Scenario) -> Result<(Dataset, DropLog)> {
    let start = corpus
        .row_of(scenario.period_start)
        .ok_or_else(|| Error::Empty(format!("period start {} outside data range", scenario.period_start)))?;
    let dates = corpus.dates[start..].to_vec();
    if dates.is_empty() {
        return Err(Error::Empty("date range".into()));
    }
    let mut log = DropLog::default();
    let mut features = Vec::new();
    for col in corpus.columns.iter().filter(|c| c.category != Category::Market) {
        let window = &col.values[start..];
        match col.first_valid() {
            Some(first) if first > start => {
                log.push(
                    &col.name,
                    DropReason::LateStart,
                    format!("first value {} after {}", corpus.dates[first], scenario.period_start),
                );
                continue;
            }
            None => {
                log.push(&col.name, DropReason::LateStart, "no values".into());
                continue;
            }
            _ => {}
        }
        if let Some(gap) = window.iter().position(Option::is_none) {
            log.push(
                &col.name,
                DropReason::Incomplete,
                format!("missing from {}", dates[gap]),
            );
            continue;
        }
        features.push((
            col.name.clone(),
            col.category,
            window.iter().map(|v| v.unwrap()).collect(),
        ));
    }
    Ok((Dataset::new(dates, features)?, log))
}

/// Attach `target[t] = price[date_t + window]`, dropping rows with no
/// future price.
pub fn make_target(dataset: &Dataset, index_price: &MetricSeries, window: u32) -> Result<Dataset> {
    if window == 0 {
        return Err(Error::invalid("prediction window must be at least one day"));
    }
    let keep: Vec<(usize, f64)> = dataset
        .dates
        .iter()
        .enumerate()
        .filter_map(|(i, d)| {
            index_price
                .value_on(*d + Duration::days(window as i64))
                .map(|p| (i, p))
        })
        .collect();
    if keep.is_empty() {
        return Err(Error::Empty(format!(
            "`{}` has no values {window} days after any dataset row",
            index_price.name
        )));
    }
    let rows: Vec<usize> = keep.iter().map(|(i, _)| *i).collect();
    Ok(Dataset {
        dates: rows.iter().map(|&i| dataset.dates[i]).collect(),
        features: dataset.features.clone(),
        categories: dataset.categories.clone(),
        columns: dataset
            .columns
            .iter()
            .map(|c| rows.iter().map(|&i| c[i]).collect())
            .collect(),
        target: Some(keep.into_iter().map(|(_, p)| p).collect()),
        window: Some(window),
    })
}

/// Chronological holdout. The test part is the final `floor(n * fraction)`
/// rows, at least one.
pub fn chronological_split(dataset: &Dataset, holdout_fraction: f64) -> Result<(Dataset, Dataset)> {
    if !(holdout_fraction > 0.0 && holdout_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "holdout fraction {holdout_fraction} outside (0, 1)"
        )));
    }
    let n = dataset.n_rows();
    if n < 2 {
        return Err(Error::Empty(format!("{n} rows cannot be split")));
    }
    let test = ((n as f64 * holdout_fraction).floor() as usize).clamp(1, n - 1);
    Ok((dataset.rows(0, n - test), dataset.rows(n - test, n)))
}
