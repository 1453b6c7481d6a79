//! Market-cap index over the largest assets, scaled by a power of the
//! log of the total capitalization.
//!
//! `index = S / (log10 S)^p` where `S` is the summed market cap of the
//! `top_n` largest assets on a given day.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::data::{parse_date, Category, MetricSeries};
use crate::error::{Error, Result};

/// Fewest overlapping days accepted by [`calibrate_power`].
pub const MIN_CALIBRATION_OVERLAP: usize = 30;

pub const DEFAULT_CANDIDATE_POWERS: [u32; 5] = [5, 6, 7, 8, 9];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexParams {
    pub top_n: usize,
    pub power: u32,
}

impl Default for IndexParams {
    fn default() -> Self {
        Self { top_n: 100, power: 7 }
    }
}

impl IndexParams {
    pub fn validate(&self) -> Result<()> {
        if self.top_n == 0 || self.power == 0 {
            return Err(Error::invalid("index top_n and power must be at least 1"));
        }
        Ok(())
    }
}

/// Market caps of all listed assets on one day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McapSnapshot {
    pub date: NaiveDate,
    pub caps: BTreeMap<String, f64>,
}

/// The `n` largest assets, descending by cap. Equal caps are ordered by
/// ascending symbol.
pub fn select_top_n(snapshot: &McapSnapshot, n: usize) -> Vec<(&str, f64)> {
    let mut assets: Vec<(&str, f64)> = snapshot.caps.iter().map(|(s, &c)| (s.as_str(), c)).collect();
    assets.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    assets.truncate(n);
    assets
}

/// Sum of the top-`n` caps.
pub fn top_n_sum(snapshot: &McapSnapshot, n: usize) -> f64 {
    select_top_n(snapshot, n).iter().map(|(_, c)| c).sum()
}

/// Index value for a capitalization sum. Requires `sum > 10`.
pub fn index_from_sum(sum: f64, power: u32) -> Result<f64> {
    if !(sum > 10.0) || !sum.is_finite() {
        return Err(Error::Domain(format!(
            "market cap sum {sum} must exceed 10 for a positive scaling denominator"
        )));
    }
    Ok(sum / sum.log10().powi(power as i32))
}

pub fn crypto100(snapshot: &McapSnapshot, params: &IndexParams) -> Result<f64> {
    params.validate()?;
    index_from_sum(top_n_sum(snapshot, params.top_n), params.power)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexRow {
    pub date: NaiveDate,
    pub sum_mcap: f64,
    pub index_value: f64,
    pub power: u32,
}

/// Daily index over a sequence of snapshots.
pub fn index_series(snapshots: &[McapSnapshot], params: &IndexParams) -> Result<Vec<IndexRow>> {
    params.validate()?;
    snapshots
        .iter()
        .map(|s| {
            let sum = top_n_sum(s, params.top_n);
            Ok(IndexRow {
                date: s.date,
                sum_mcap: sum,
                index_value: index_from_sum(sum, params.power)
                    .map_err(|e| Error::Domain(format!("{}: {e}", s.date)))?,
                power: params.power,
            })
        })
        .collect()
}

pub fn index_as_metric(rows: &[IndexRow], name: &str) -> MetricSeries {
    MetricSeries::new(
        name,
        Category::Market,
        rows.iter().map(|r| (r.date, Some(r.index_value))).collect(),
    )
}

/// Objective per candidate power and the selected power.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub power: u32,
    /// `(power, mean |ln index - ln reference|)` in ascending power order.
    pub fit: Vec<(u32, f64)>,
    pub overlap_days: usize,
}

/// Choose the power whose index tracks `reference` most closely in mean
/// absolute log ratio over the overlapping days. Ties go to the smaller power.
pub fn calibrate_power(
    index_sums: &[(NaiveDate, f64)],
    reference: &[(NaiveDate, f64)],
    candidates: &[u32],
) -> Result<Calibration> {
    let mut powers: Vec<u32> = candidates.to_vec();
    powers.sort_unstable();
    powers.dedup();
    if powers.is_empty() || powers[0] == 0 {
        return Err(Error::invalid("candidate powers must be a non-empty set of positive integers"));
    }
    let reference: BTreeMap<NaiveDate, f64> = reference.iter().copied().collect();
    let overlap: Vec<(f64, f64)> = index_sums
        .iter()
        .filter_map(|(d, s)| reference.get(d).map(|r| (*s, *r)))
        .filter(|(_, r)| *r > 0.0)
        .collect();
    if overlap.is_empty() {
        return Err(Error::Empty("no overlap between index sums and reference".into()));
    }
    if overlap.len() < MIN_CALIBRATION_OVERLAP {
        return Err(Error::invalid(format!(
            "calibration needs {MIN_CALIBRATION_OVERLAP} overlapping days, got {}",
            overlap.len()
        )));
    }
    let mut fit = Vec::with_capacity(powers.len());
    for &p in &powers {
        let mut total = 0.0;
        for &(s, r) in &overlap {
            total += (index_from_sum(s, p)?.ln() - r.ln()).abs();
        }
        fit.push((p, total / overlap.len() as f64));
    }
    // strict `<` keeps the smaller power on ties
    let best = fit
        .iter()
        .fold(fit[0], |best, &cand| if cand.1 < best.1 { cand } else { best });
    Ok(Calibration {
        power: best.0,
        fit,
        overlap_days: overlap.len(),
    })
}

/// Long-format `date,asset,market_cap_usd` into per-day snapshots.
pub fn read_mcaps<R: Read>(r: R, source: &Path) -> Result<Vec<McapSnapshot>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["date", "asset", "market_cap_usd"] {
        return Err(Error::parse(source, "expected header `date,asset,market_cap_usd`"));
    }
    let mut days: BTreeMap<NaiveDate, BTreeMap<String, f64>> = BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let date = parse_date(&rec[0]).ok_or_else(|| Error::parse(source, format!("row {row}: bad date `{}`", &rec[0])))?;
        let asset = rec[1].trim().to_string();
        let cap: f64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| Error::parse(source, format!("row {row}: bad market cap `{}`", &rec[2])))?;
        if !(cap >= 0.0) || !cap.is_finite() {
            return Err(Error::parse(source, format!("row {row}: market cap must be finite and non-negative")));
        }
        if days.entry(date).or_default().insert(asset.clone(), cap).is_some() {
            return Err(Error::parse(source, format!("row {row}: duplicate asset `{asset}` on {date}")));
        }
    }
    Ok(days
        .into_iter()
        .map(|(date, caps)| McapSnapshot { date, caps })
        .collect())
}

pub fn read_mcaps_file(path: &Path) -> Result<Vec<McapSnapshot>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_mcaps(f, path)
}

/// `date,<value>` reference price file.
pub fn read_reference(path: &Path) -> Result<Vec<(NaiveDate, f64)>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(f);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = parse_date(rec.get(0).unwrap_or(""))
            .ok_or_else(|| Error::parse(path, format!("row {}: bad date", i + 2)))?;
        let value = rec.get(1).and_then(|v| v.trim().parse::<f64>().ok());
        if let Some(v) = value {
            out.push((date, v));
        }
    }
    Ok(out)
}

/// `date,sum_mcap,index_value,power`
pub fn write_index_csv<W: Write>(rows: &[IndexRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["date", "sum_mcap", "index_value", "power"])?;
    for r in rows {
        out.write_record([
            r.date.format("%Y-%m-%d").to_string(),
            r.sum_mcap.to_string(),
            r.index_value.to_string(),
            r.power.to_string(),
        ])?;
    }
    out.flush().map_err(|e| Error::io("index csv", e))?;
    Ok(())
}

/// `power,objective` followed by a `chosen,<p>` row.
pub fn write_calibration_csv<W: Write>(cal: &Calibration, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["power", "objective"])?;
    for (p, obj) in &cal.fit {
        out.write_record([p.to_string(), obj.to_string()])?;
    }
    out.write_record(["chosen".to_string(), cal.power.to_string()])?;
    out.flush().map_err(|e| Error::io("calibration csv", e))?;
    Ok(())
}
