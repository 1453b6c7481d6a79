use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use super::{parse_date, Category, Corpus, MetricSeries};
use crate::error::{Error, Result};

/// Maps every metric name to its source file and category.
///
/// ```toml
/// [metrics]
/// CapRealUSD   = { file = "onchain.csv", category = "onchain_btc" }
/// usdc_SplyCur = { file = "onchain.csv", category = "onchain_usdc" }
/// ```
///
/// Relative file paths resolve against the manifest's directory.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub entries: BTreeMap<String, ManifestEntry>,
    base_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub file: PathBuf,
    pub category: Category,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManifest {
    metrics: BTreeMap<String, RawEntry>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    file: PathBuf,
    category: String,
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, base_dir).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn parse(text: &str, base_dir: PathBuf) -> Result<Self> {
        let raw: RawManifest = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let entries = raw
            .metrics
            .into_iter()
            .map(|(name, e)| {
                Ok((
                    name,
                    ManifestEntry {
                        file: e.file,
                        category: e.category.parse()?,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self { entries, base_dir })
    }

    fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base_dir.join(file)
        }
    }
}

/// Series read from one `date,<metric>,...` file, in header order.
pub type RawColumns = Vec<(String, Vec<(NaiveDate, Option<f64>)>)>;

pub fn read_metric_csv(path: &Path) -> Result<RawColumns> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::parse(path, format!("{other:?}")),
        })?;
    let headers = rdr.headers()?.clone();
    if headers.get(0).map(str::trim) != Some("date") {
        return Err(Error::parse(path, "first column must be `date`"));
    }
    let mut cols: RawColumns = headers
        .iter()
        .skip(1)
        .map(|h| (h.trim().to_string(), Vec::new()))
        .collect();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let raw_date = rec.get(0).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| {
            Error::parse(path, format!("row {}: unparseable date `{raw_date}`", line + 2))
        })?;
        for (j, (name, points)) in cols.iter_mut().enumerate() {
            let cell = rec.get(j + 1).unwrap_or("").trim();
            let value = if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<f64>().map_err(|_| {
                    Error::parse(path, format!("row {}: `{name}` = `{cell}` is not a number", line + 2))
                })?)
            };
            points.push((date, value.filter(|v| v.is_finite())));
        }
    }
    Ok(cols)
}

/// Load every file named in the manifest into a corpus.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let manifest = Manifest::from_path(manifest_path)?;
    let files: BTreeSet<&PathBuf> = manifest.entries.values().map(|e| &e.file).collect();

    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut series = Vec::with_capacity(manifest.entries.len());
    for file in files {
        let path = manifest.resolve(file);
        for (name, points) in read_metric_csv(&path)? {
            let entry = manifest.entries.get(&name).ok_or_else(|| Error::UnlistedMetric {
                metric: name.clone(),
                path: path.clone(),
            })?;
            if seen.insert(name.clone(), path.clone()).is_some() {
                return Err(Error::DuplicateMetric(name));
            }
            if &entry.file != file {
                return Err(Error::parse(
                    &path,
                    format!("metric `{name}` is listed under {}", entry.file.display()),
                ));
            }
            series.push(MetricSeries::new(name, entry.category, points));
        }
    }
    if let Some((name, e)) = manifest.entries.iter().find(|(n, _)| !seen.contains_key(*n)) {
        return Err(Error::parse(
            manifest.resolve(&e.file),
            format!("metric `{name}` not found"),
        ));
    }
    Corpus::new(series)
}
