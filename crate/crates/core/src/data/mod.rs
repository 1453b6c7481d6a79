//! Metric ingestion, cleaning and per-scenario dataset construction.

mod clean;
mod dataset;
mod ingest;

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use clean::{
    align, clean_corpus, dedupe, drop_degenerate, interpolate_fill, AlignedColumn, AlignedCorpus,
    CleanOptions, DropLog, DropReason, DropRecord, FORWARD_FILL_MAX_GAP,
};
pub use dataset::{chronological_split, make_target, slice_period, Dataset, Scenario};
pub use ingest::{load_corpus, read_metric_csv, Manifest, ManifestEntry};

/// Data category of a metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Macro,
    Technical,
    #[serde(rename = "sentiment")]
    SentimentInterest,
    #[serde(rename = "trad_index")]
    TraditionalIndex,
    #[serde(rename = "onchain_btc")]
    OnChainBtc,
    #[serde(rename = "onchain_usdc")]
    OnChainUsdc,
    /// Raw price / market-cap inputs. Used to derive indicators and targets,
    /// never as model features.
    Market,
}

impl Category {
    pub const ALL: [Category; 7] = [
        Category::Macro,
        Category::Technical,
        Category::SentimentInterest,
        Category::TraditionalIndex,
        Category::OnChainBtc,
        Category::OnChainUsdc,
        Category::Market,
    ];

    /// Categories that contribute model features.
    pub const FEATURE: [Category; 6] = [
        Category::Macro,
        Category::SentimentInterest,
        Category::OnChainBtc,
        Category::TraditionalIndex,
        Category::Technical,
        Category::OnChainUsdc,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Category::Macro => "macro",
            Category::Technical => "technical",
            Category::SentimentInterest => "sentiment",
            Category::TraditionalIndex => "trad_index",
            Category::OnChainBtc => "onchain_btc",
            Category::OnChainUsdc => "onchain_usdc",
            Category::Market => "market",
        }
    }

    /// Human-readable label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Category::Macro => "Macroeconomic Indicators",
            Category::Technical => "Technical Indicators",
            Category::SentimentInterest => "Sentiment and Interest Metrics",
            Category::TraditionalIndex => "Traditional Market Indices",
            Category::OnChainBtc => "On-chain Metrics (BTC)",
            Category::OnChainUsdc => "On-chain Metrics (USDC)",
            Category::Market => "Market Data",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Category {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Category::ALL
            .into_iter()
            .find(|c| c.tag() == s)
            .ok_or_else(|| Error::UnknownCategory(s.to_string()))
    }
}

/// One named daily series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub name: String,
    pub category: Category,
    pub points: Vec<(NaiveDate, Option<f64>)>,
}

impl MetricSeries {
    pub fn new(
        name: impl Into<String>,
        category: Category,
        points: Vec<(NaiveDate, Option<f64>)>,
    ) -> Self {
        Self {
            name: name.into(),
            category,
            points,
        }
    }

    /// Build a fully observed series on consecutive days from `start`.
    pub fn daily(
        name: impl Into<String>,
        category: Category,
        start: NaiveDate,
        values: &[f64],
    ) -> Self {
        let points = start
            .iter_days()
            .zip(values)
            .map(|(d, &v)| (d, Some(v)))
            .collect();
        Self::new(name, category, points)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_valid_date(&self) -> Option<NaiveDate> {
        self.points.iter().find(|(_, v)| v.is_some()).map(|(d, _)| *d)
    }

    pub fn value_on(&self, date: NaiveDate) -> Option<f64> {
        self.points
            .binary_search_by_key(&date, |(d, _)| *d)
            .ok()
            .and_then(|i| self.points[i].1)
    }
}

/// A set of uniquely named metric series, kept sorted by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    series: Vec<MetricSeries>,
}

impl Corpus {
    pub fn new(mut series: Vec<MetricSeries>) -> crate::Result<Self> {
        series.sort_by(|a, b| a.name.cmp(&b.name));
        if let Some(w) = series.windows(2).find(|w| w[0].name == w[1].name) {
            return Err(Error::DuplicateMetric(w[0].name.clone()));
        }
        Ok(Self { series })
    }

    pub fn series(&self) -> &[MetricSeries] {
        &self.series
    }

    pub fn get(&self, name: &str) -> Option<&MetricSeries> {
        self.series
            .binary_search_by(|s| s.name.as_str().cmp(name))
            .ok()
            .map(|i| &self.series[i])
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    pub fn insert(&mut self, series: MetricSeries) -> crate::Result<()> {
        match self
            .series
            .binary_search_by(|s| s.name.as_str().cmp(&series.name))
        {
            Ok(_) => Err(Error::DuplicateMetric(series.name)),
            Err(i) => {
                self.series.insert(i, series);
                Ok(())
            }
        }
    }
}

pub(crate) fn parse_date(s: &str) -> Option<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").ok()
}
