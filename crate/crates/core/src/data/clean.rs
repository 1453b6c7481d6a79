use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{Category, Corpus, MetricSeries};
use crate::error::{Error, Result};

/// Longest gap (in days) bridged by forward-filling traditional-index series.
/// Covers weekends and single-day holidays adjacent to them.
pub const FORWARD_FILL_MAX_GAP: usize = 4;

/// Keep the first point for each date and order points by date.
pub fn dedupe(series: &MetricSeries) -> MetricSeries {
    let mut points = series.points.clone();
    // stable sort keeps first occurrences ahead of later duplicates
    points.sort_by_key(|(d, _)| *d);
    points.dedup_by_key(|(d, _)| *d);
    MetricSeries {
        points,
        ..series.clone()
    }
}

/// Place the series on its own daily calendar and linearly interpolate
/// interior gaps. Leading and trailing gaps stay missing.
pub fn interpolate_fill(series: &MetricSeries) -> MetricSeries {
    let (Some(first), Some(last)) = (series.points.first(), series.points.last()) else {
        return series.clone();
    };
    let start = first.0;
    let len = (last.0 - start).num_days() as usize + 1;
    let mut values = vec![None; len];
    for &(d, v) in &series.points {
        values[(d - start).num_days() as usize] = v;
    }
    fill_interior(&mut values);
    MetricSeries {
        points: start.iter_days().zip(values).collect(),
        ..series.clone()
    }
}

fn fill_interior(values: &mut [Option<f64>]) {
    let mut prev: Option<(usize, f64)> = None;
    for i in 0..values.len() {
        let Some(v) = values[i] else { continue };
        if let Some((p, pv)) = prev {
            let span = (i - p) as f64;
            for (k, slot) in values.iter_mut().enumerate().take(i).skip(p + 1) {
                let t = (k - p) as f64 / span;
                *slot = Some(pv + (v - pv) * t);
            }
        }
        prev = Some((i, v));
    }
}

/// Carry the last value forward over gaps of at most `max_gap` days.
/// Returns the number of filled days.
fn forward_fill(values: &mut [Option<f64>], max_gap: usize) -> usize {
    let mut filled = 0;
    let mut i = 0;
    let mut last: Option<f64> = None;
    while i < values.len() {
        match values[i] {
            Some(v) => {
                last = Some(v);
                i += 1;
            }
            None => {
                let end = (i..values.len()).find(|&k| values[k].is_some()).unwrap_or(values.len());
                if let Some(v) = last {
                    if end - i <= max_gap {
                        values[i..end].iter_mut().for_each(|s| *s = Some(v));
                        filled += end - i;
                    }
                }
                i = end;
            }
        }
    }
    filled
}

/// A metric placed on the shared daily calendar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedColumn {
    pub name: String,
    pub category: Category,
    /// Values after forward-fill and interior interpolation.
    pub values: Vec<Option<f64>>,
    /// True where a value was reported by the source or bridged across a
    /// market closure; false where the day was missing or interpolated.
    pub observed: Vec<bool>,
}

impl AlignedColumn {
    pub fn first_valid(&self) -> Option<usize> {
        self.values.iter().position(Option::is_some)
    }

    pub fn missing_fraction(&self) -> f64 {
        match self.observed.iter().position(|&o| o) {
            None => 1.0,
            Some(first) => {
                let span = self.observed.len() - first;
                let missing = self.observed[first..].iter().filter(|&&o| !o).count();
                missing as f64 / span as f64
            }
        }
    }

    /// Longest run of consecutive equal values.
    pub fn longest_flat_run(&self) -> usize {
        let mut best = 0;
        let mut run = 0;
        let mut prev: Option<f64> = None;
        for v in &self.values {
            match (v, prev) {
                (Some(x), Some(p)) if *x == p => run += 1,
                (Some(_), _) => run = 1,
                (None, _) => run = 0,
            }
            prev = *v;
            best = best.max(run);
        }
        best
    }
}

/// All metrics on one strictly daily calendar.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignedCorpus {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<AlignedColumn>,
    /// Days forward-filled per traditional-index metric.
    pub forward_filled: BTreeMap<String, usize>,
}

impl AlignedCorpus {
    pub fn column(&self, name: &str) -> Option<&AlignedColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn start(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn end(&self) -> Option<NaiveDate> {
        self.dates.last().copied()
    }

    pub fn row_of(&self, date: NaiveDate) -> Option<usize> {
        let start = self.start()?;
        let offset = (date - start).num_days();
        (offset >= 0 && (offset as usize) < self.dates.len()).then_some(offset as usize)
    }

    /// Add a derived, fully reported column. Its length must match the calendar.
    pub fn push_column(&mut self, name: String, category: Category, values: Vec<Option<f64>>) -> Result<()> {
        if values.len() != self.dates.len() {
            return Err(Error::DimensionMismatch {
                expected: self.dates.len(),
                actual: values.len(),
            });
        }
        if self.column(&name).is_some() {
            return Err(Error::DuplicateMetric(name));
        }
        let observed = values.iter().map(Option::is_some).collect();
        self.columns.push(AlignedColumn {
            name,
            category,
            values,
            observed,
        });
        self.columns.sort_by(|a, b| a.name.cmp(&b.name));
        Ok(())
    }

    pub fn to_series(&self, name: &str) -> Option<MetricSeries> {
        let col = self.column(name)?;
        Some(MetricSeries::new(
            name,
            col.category,
            self.dates.iter().copied().zip(col.values.iter().copied()).collect(),
        ))
    }
}

/// Deduplicate every series and put them on the shared daily grid spanning
/// the earliest to the latest date in the corpus. Traditional-index series
/// are forward-filled across market closures before interior gaps are
/// interpolated.
pub fn align(corpus: &Corpus) -> AlignedCorpus {
    let deduped: Vec<MetricSeries> = corpus.series().iter().map(dedupe).collect();
    let start = deduped.iter().filter_map(|s| s.points.first()).map(|p| p.0).min();
    let end = deduped.iter().filter_map(|s| s.points.last()).map(|p| p.0).max();
    let (Some(start), Some(end)) = (start, end) else {
        return AlignedCorpus::default();
    };
    let len = (end - start).num_days() as usize + 1;
    let dates: Vec<NaiveDate> = start.iter_days().take(len).collect();

    let mut forward_filled = BTreeMap::new();
    let columns = deduped
        .into_iter()
        .map(|s| {
            let mut values = vec![None; len];
            for (d, v) in s.points {
                values[(d - start).num_days() as usize] = v;
            }
            if s.category == Category::TraditionalIndex {
                let n = forward_fill(&mut values, FORWARD_FILL_MAX_GAP);
                if n > 0 {
                    forward_filled.insert(s.name.clone(), n);
                }
            }
            let observed = values.iter().map(Option::is_some).collect();
            fill_interior(&mut values);
            AlignedColumn {
                name: s.name,
                category: s.category,
                values,
                observed,
            }
        })
        .collect();
    AlignedCorpus {
        dates,
        columns,
        forward_filled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    Missing,
    Flat,
    LateStart,
    Incomplete,
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DropReason::Missing => "missing",
            DropReason::Flat => "flat",
            DropReason::LateStart => "late_start",
            DropReason::Incomplete => "incomplete",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropRecord {
    pub metric: String,
    pub reason: DropReason,
    pub detail: String,
}

/// Dropped metrics, one record each.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DropLog {
    pub records: Vec<DropRecord>,
}

impl DropLog {
    pub fn push(&mut self, metric: &str, reason: DropReason, detail: String) {
        self.records.push(DropRecord {
            metric: metric.to_string(),
            reason,
            detail,
        });
    }

    pub fn extend(&mut self, other: DropLog) {
        self.records.extend(other.records);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// `metric,reason,detail`
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["metric", "reason", "detail"])?;
        for r in &self.records {
            out.write_record([r.metric.as_str(), &r.reason.to_string(), r.detail.as_str()])?;
        }
        out.flush().map_err(|e| Error::io("drop log", e))?;
        Ok(())
    }
}

/// Thresholds for discarding degenerate metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CleanOptions {
    /// A constant run of this many days or more drops the metric.
    pub flat_run_max: usize,
    /// Missing fraction above this drops the metric.
    pub missing_ratio_max: f64,
}

impl Default for CleanOptions {
    fn default() -> Self {
        Self {
            flat_run_max: 60,
            missing_ratio_max: 0.20,
        }
    }
}

/// Drop columns that stay flat or missing for too long.
///
/// The missing fraction is measured from a column's first reported value to
/// the end of the calendar, so metrics that simply started late are left for
/// [`super::slice_period`] to handle per period. Market columns are exempt.
pub fn drop_degenerate(columns: Vec<AlignedColumn>, opts: &CleanOptions) -> (Vec<AlignedColumn>, DropLog) {
    let mut log = DropLog::default();
    let kept = columns
        .into_iter()
        .filter(|c| {
            if c.category == Category::Market {
                return true;
            }
            let missing = c.missing_fraction();
            if missing > opts.missing_ratio_max {
                log.push(
                    &c.name,
                    DropReason::Missing,
                    format!("missing fraction {missing:.4} > {}", opts.missing_ratio_max),
                );
                return false;
            }
            let run = c.longest_flat_run();
            if run >= opts.flat_run_max {
                log.push(
                    &c.name,
                    DropReason::Flat,
                    format!("constant for {run} days >= {}", opts.flat_run_max),
                );
                return false;
            }
            true
        })
        .collect();
    (kept, log)
}

/// [`align`] followed by [`drop_degenerate`].
pub fn clean_corpus(corpus: &Corpus, opts: &CleanOptions) -> (AlignedCorpus, DropLog) {
    let mut aligned = align(corpus);
    let (kept, log) = drop_degenerate(std::mem::take(&mut aligned.columns), opts);
    aligned.columns = kept;
    aligned
        .forward_filled
        .retain(|name, _| aligned.columns.iter().any(|c| &c.name == name));
    (aligned, log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn day(n: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(n)
    }

    fn series(points: &[(i64, Option<f64>)]) -> MetricSeries {
        MetricSeries::new(
            "m",
            Category::Macro,
            points.iter().map(|&(d, v)| (day(d), v)).collect(),
        )
    }

    fn column(values: Vec<Option<f64>>, observed: Vec<bool>) -> AlignedColumn {
        AlignedColumn {
            name: "c".into(),
            category: Category::OnChainBtc,
            values,
            observed,
        }
    }

    #[test]
    fn dedupe_keeps_first() {
        let s = series(&[(0, Some(1.0)), (0, Some(2.0)), (1, Some(3.0))]);
        assert_eq!(dedupe(&s), series(&[(0, Some(1.0)), (1, Some(3.0))]));
        let unique = series(&[(0, Some(1.0)), (1, Some(3.0))]);
        assert_eq!(dedupe(&unique), unique);
    }

    #[test]
    fn dedupe_known_duplicate_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut pts: Vec<(i64, Option<f64>)> = (0..900).map(|d| (d, Some(d as f64))).collect();
        for _ in 0..100 {
            let d = rng.gen_range(0..900);
            pts.push((d, Some(-1.0)));
        }
        let out = dedupe(&series(&pts));
        assert_eq!(out.len(), 900);
        // originals come first, so no -1.0 survives
        assert!(out.points.iter().all(|(_, v)| *v != Some(-1.0)));
    }

    #[test]
    fn interpolation_cases() {
        let s = series(&[(0, Some(1.0)), (1, None), (2, Some(3.0))]);
        let vals: Vec<_> = interpolate_fill(&s).points.iter().map(|p| p.1).collect();
        assert_eq!(vals, vec![Some(1.0), Some(2.0), Some(3.0)]);

        // calendar gap: days 1..3 absent entirely
        let s = series(&[(0, Some(0.0)), (4, Some(4.0))]);
        let out = interpolate_fill(&s);
        let vals: Vec<_> = out.points.iter().map(|p| p.1.unwrap()).collect();
        assert_eq!(vals, vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(out.points[2].0, day(2));

        let full = series(&[(0, Some(5.0)), (1, Some(6.0))]);
        assert_eq!(interpolate_fill(&full), full);
    }

    #[test]
    fn edge_gaps_not_extrapolated() {
        let s = series(&[(0, None), (1, Some(1.0)), (2, None), (3, Some(2.0)), (4, None)]);
        let vals: Vec<_> = interpolate_fill(&s).points.iter().map(|p| p.1).collect();
        assert_eq!(vals, vec![None, Some(1.0), Some(1.5), Some(2.0), None]);
    }

    #[test]
    fn degenerate_constant_dropped() {
        let c = column(vec![Some(7.0); 100], vec![true; 100]);
        let (kept, log) = drop_degenerate(vec![c], &CleanOptions::default());
        assert!(kept.is_empty());
        assert_eq!(log.records[0].reason, DropReason::Flat);
    }

    #[test]
    fn degenerate_missing_dropped() {
        // 30% of days missing inside the span, interpolated afterwards
        let observed: Vec<bool> = (0..100).map(|i| i % 10 < 7).collect();
        let values = (0..100).map(|i| Some(i as f64)).collect();
        let c = column(values, observed);
        assert!((c.missing_fraction() - 0.30).abs() < 1e-12);
        let opts = CleanOptions {
            missing_ratio_max: 0.2,
            ..Default::default()
        };
        let (kept, log) = drop_degenerate(vec![c], &opts);
        assert!(kept.is_empty());
        assert_eq!(log.records[0].reason, DropReason::Missing);
    }

    #[test]
    fn varying_observed_column_kept() {
        let c = column((0..200).map(|i| Some((i as f64).sin())).collect(), vec![true; 200]);
        let (kept, log) = drop_degenerate(vec![c], &CleanOptions::default());
        assert_eq!(kept.len(), 1);
        assert!(log.is_empty());
    }

    #[test]
    fn late_start_is_not_missing() {
        let mut values = vec![None; 100];
        let mut observed = vec![false; 100];
        for i in 50..100 {
            values[i] = Some(i as f64);
            observed[i] = true;
        }
        let c = column(values, observed);
        assert_eq!(c.missing_fraction(), 0.0);
    }

    #[test]
    fn weekends_forward_filled_for_trad_indices() {
        // Mon-Fri observed, weekend missing
        let pts: Vec<(i64, Option<f64>)> = (0..21)
            .map(|d| (d, if d % 7 < 5 { Some(d as f64) } else { None }))
            .collect();
        let mut s = series(&pts);
        s.category = Category::TraditionalIndex;
        s.name = "spx".into();
        let corpus = Corpus::new(vec![s]).unwrap();
        let aligned = align(&corpus);
        let col = aligned.column("spx").unwrap();
        assert_eq!(col.values[5], Some(4.0));
        assert_eq!(col.values[6], Some(4.0));
        assert_eq!(col.missing_fraction(), 0.0);
        // trailing weekend (days 19, 20) is also bridged
        assert_eq!(aligned.forward_filled["spx"], 6);
    }

    #[test]
    fn drop_log_csv() {
        let mut log = DropLog::default();
        log.push("a", DropReason::Flat, "constant for 61 days".into());
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "metric,reason,detail\na,flat,constant for 61 days\n"
        );
    }

    proptest! {
        #[test]
        fn dedupe_and_fill_idempotent(raw in proptest::collection::vec((0i64..60, proptest::option::of(-1e3f64..1e3)), 0..80)) {
            let s = series(&raw);
            let once = dedupe(&s);
            prop_assert_eq!(dedupe(&once), once.clone());
            prop_assert!(once.points.windows(2).all(|w| w[0].0 < w[1].0));
            let filled = interpolate_fill(&once);
            prop_assert_eq!(interpolate_fill(&filled), filled);
        }

        #[test]
        fn drop_log_partitions(cols in proptest::collection::vec((0usize..4, 0usize..3), 1..20)) {
            let columns: Vec<AlignedColumn> = cols.iter().enumerate().map(|(i, &(kind, holes))| {
                let values: Vec<Option<f64>> = (0..100).map(|t| Some(if kind == 0 { 1.0 } else { (t * (kind + 1)) as f64 })).collect();
                let observed = (0..100).map(|t| t % 4 >= holes).collect();
                AlignedColumn { name: format!("c{i}"), category: Category::Macro, values, observed }
            }).collect();
            let names: Vec<String> = columns.iter().map(|c| c.name.clone()).collect();
            let (kept, log) = drop_degenerate(columns, &CleanOptions::default());
            let mut all: Vec<String> = kept.iter().map(|c| c.name.clone()).chain(log.records.iter().map(|r| r.metric.clone())).collect();
            all.sort();
            let mut expect = names;
            expect.sort();
            prop_assert_eq!(all, expect);
        }
    }
}
