//! Synthetic corpora with planted structure, for examples, tests and
//! benchmarking the pipeline end to end.
//!
//! Every feature category is driven by its own smooth latent factor. The
//! total market cap is `exp` of a weighted sum of those factors taken
//! `lead` days earlier, so features observed today carry information about
//! the index `lead` days ahead in proportion to their category weight.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{Category, Corpus, MetricSeries};
use crate::error::{Error, Result};
use crate::index::McapSnapshot;
use crate::rng::{derive, name_key, stream};

/// Feature columns generated for one category.
#[derive(Debug, Clone, PartialEq)]
pub struct CategorySpec {
    pub category: Category,
    pub n_features: usize,
    /// Weight of the category's latent factor in the log market cap.
    pub weight: f64,
    /// Fraction of columns that track the latent factor; the rest are
    /// independent noise processes.
    pub informative: f64,
    /// First observed day, when later than the corpus start.
    pub start: Option<NaiveDate>,
}

impl CategorySpec {
    pub fn new(category: Category, n_features: usize, weight: f64) -> Self {
        Self {
            category,
            n_features,
            weight,
            informative: 0.5,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub start: NaiveDate,
    pub n_days: usize,
    pub categories: Vec<CategorySpec>,
    /// Days between a latent state and its effect on market cap.
    pub lead: u32,
    /// Standard deviation of the idiosyncratic log-cap noise.
    pub noise: f64,
    /// Drop weekend values of traditional-index columns.
    pub weekend_gaps: bool,
    /// Add a few flat and sparse columns that cleaning must discard.
    pub degenerate: bool,
    /// Assets in the market-cap table (at least the index's top 100).
    pub n_assets: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        let d = |y, m| NaiveDate::from_ymd_opt(y, m, 1).unwrap();
        let mut usdc = CategorySpec::new(Category::OnChainUsdc, 30, 0.8);
        usdc.start = Some(d(2018, 10));
        Self {
            start: d(2016, 1),
            n_days: 2000,
            categories: vec![
                CategorySpec::new(Category::Macro, 30, 0.4),
                CategorySpec::new(Category::SentimentInterest, 20, 0.3),
                CategorySpec::new(Category::TraditionalIndex, 40, 0.5),
                CategorySpec::new(Category::OnChainBtc, 138, 1.0),
                usdc,
            ],
            lead: 7,
            noise: 0.02,
            weekend_gaps: true,
            degenerate: true,
            n_assets: 105,
            seed: 0,
        }
    }
}

/// Generated metric series plus the daily market-cap table.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub series: Vec<MetricSeries>,
    pub mcaps: Vec<McapSnapshot>,
    /// Latent factor per category, one value per day.
    pub latent: BTreeMap<Category, Vec<f64>>,
}

/// Sum of a few sinusoids with random periods and phases, scaled to unit
/// amplitude. Bounded, so a chronological holdout stays in range.
fn latent_factor(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = stream(seed, &[0x6c61]);
    let parts: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(60.0..400.0), rng.gen_range(0.0..TAU), rng.gen_range(0.5..1.0)))
        .collect();
    let total: f64 = parts.iter().map(|p| p.2).sum();
    (0..n)
        .map(|t| parts.iter().map(|(per, ph, a)| a * (TAU * t as f64 / per + ph).sin()).sum::<f64>() / total)
        .collect()
}

fn category_prefix(c: Category) -> &'static str {
    match c {
        Category::Macro => "macro",
        Category::Technical => "tech",
        Category::SentimentInterest => "sent",
        Category::TraditionalIndex => "idx",
        Category::OnChainBtc => "btc",
        Category::OnChainUsdc => "usdc",
        Category::Market => "mkt",
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthCorpus> {
    if spec.n_days < 2 {
        return Err(Error::invalid("synthetic corpus needs at least two days"));
    }
    if spec.n_assets < 100 {
        return Err(Error::invalid("synthetic market needs at least 100 assets"));
    }
    let n = spec.n_days;
    let lead = spec.lead as usize;
    let dates: Vec<NaiveDate> = spec.start.iter_days().take(n).collect();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    // latent factors extend `lead` days before the start so the cap is
    // defined from day one
    let mut latent_full = BTreeMap::new();
    for c in &spec.categories {
        latent_full.insert(c.category, latent_factor(n + lead, derive(spec.seed, &[c.category as u64])));
    }

    let mut rng = stream(spec.seed, &[0x6d6b74]);
    let log_cap: Vec<f64> = (0..n)
        .map(|t| {
            let signal: f64 = spec.categories.iter().map(|c| c.weight * latent_full[&c.category][t]).sum();
            signal + spec.noise * std_normal.sample(&mut rng)
        })
        .collect();
    let total_cap: Vec<f64> = log_cap.iter().map(|l| 4e11 * (0.6 * l).exp()).collect();

    let mut series = Vec::new();
    let to_points = |vals: Vec<Option<f64>>| -> Vec<(NaiveDate, Option<f64>)> { dates.iter().copied().zip(vals).collect() };

    for c in &spec.categories {
        let z = &latent_full[&c.category][lead..];
        let first = c
            .start
            .map(|s| (s - spec.start).num_days().clamp(0, n as i64) as usize)
            .unwrap_or(0);
        let n_inf = (c.n_features as f64 * c.informative).round() as usize;
        for j in 0..c.n_features {
            let name = format!("{}_{:03}", category_prefix(c.category), j);
            let mut r = stream(spec.seed, &[name_key(&name)]);
            let scale = r.gen_range(0.5..5.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            let offset = r.gen_range(-10.0..10.0);
            let mut vals: Vec<Option<f64>> = if j < n_inf {
                let sigma = r.gen_range(0.02..0.6);
                z.iter()
                    .map(|&v| Some(offset + scale * (v + sigma * std_normal.sample(&mut r))))
                    .collect()
            } else {
                let phi = r.gen_range(0.8..0.99);
                let mut state = 0.0;
                (0..n)
                    .map(|_| {
                        state = phi * state + std_normal.sample(&mut r);
                        Some(offset + scale * state)
                    })
                    .collect()
            };
            for v in vals.iter_mut().take(first) {
                *v = None;
            }
            if spec.weekend_gaps && c.category == Category::TraditionalIndex {
                for (v, d) in vals.iter_mut().zip(&dates) {
                    if matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
                        *v = None;
                    }
                }
            }
            series.push(MetricSeries::new(name, c.category, to_points(vals)));
        }
    }

    if spec.degenerate {
        let flat: Vec<Option<f64>> = (0..n).map(|t| Some(if t < n / 2 { 1.0 } else { 2.0 })).collect();
        series.push(MetricSeries::new("macro_flat", Category::Macro, to_points(flat)));
        let mut r = stream(spec.seed, &[name_key("macro_sparse")]);
        let sparse: Vec<Option<f64>> = (0..n).map(|t| (t % 3 == 0).then(|| r.gen::<f64>())).collect();
        series.push(MetricSeries::new("macro_sparse", Category::Macro, to_points(sparse)));
    }

    // BTC market columns follow the total cap with their own noise
    let mut r = stream(spec.seed, &[0x627463]);
    let btc_share: Vec<f64> = (0..n).map(|t| 0.45 + 0.1 * (TAU * t as f64 / 500.0).sin()).collect();
    let mcap_btc: Vec<f64> = (0..n).map(|t| total_cap[t] * btc_share[t] * (1.0 + 0.01 * std_normal.sample(&mut r))).collect();
    let supply = 1.9e7;
    let market = [
        ("close-price", mcap_btc.iter().map(|m| m / supply).collect::<Vec<_>>()),
        ("market-cap", mcap_btc.clone()),
        (
            "volume",
            mcap_btc.iter().map(|m| m * r.gen_range(0.02..0.08)).collect(),
        ),
    ];
    for (name, vals) in market {
        series.push(MetricSeries::new(name, Category::Market, to_points(vals.into_iter().map(Some).collect())));
    }

    // Asset caps: fixed Zipf-like shares for the top 100 so their sum is the
    // total cap exactly; the tail stays below the smallest top-100 asset.
    let weights: Vec<f64> = (0..100).map(|i| 1.0 / (i as f64 + 1.0)).collect();
    let wsum: f64 = weights.iter().sum();
    let mut mcaps = Vec::with_capacity(n);
    for (t, d) in dates.iter().enumerate() {
        let mut caps = BTreeMap::new();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate().skip(1) {
            let v = total_cap[t] * w / wsum;
            acc += v;
            caps.insert(format!("A{i:03}"), v);
        }
        caps.insert("A000".to_string(), total_cap[t] - acc);
        let floor = total_cap[t] * weights[99] / wsum;
        for i in 100..spec.n_assets {
            caps.insert(format!("A{i:03}"), floor * 0.5 / (i - 99) as f64);
        }
        mcaps.push(McapSnapshot { date: *d, caps });
    }

    let latent = latent_full.into_iter().map(|(c, v)| (c, v[lead..].to_vec())).collect();
    Ok(SynthCorpus { series, mcaps, latent })
}

impl SynthCorpus {
    pub fn corpus(&self) -> Result<Corpus> {
        Corpus::new(self.series.clone())
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.mcaps.iter().map(|s| s.date).collect()
    }

    /// Write one CSV per category, a manifest and `mcaps.csv` into `dir`.
    /// Returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut by_cat: BTreeMap<Category, Vec<&MetricSeries>> = BTreeMap::new();
        for s in &self.series {
            by_cat.entry(s.category).or_default().push(s);
        }
        let dates = self.dates();
        let mut manifest = String::from("[metrics]\n");
        for (cat, list) in by_cat {
            let file = format!("{}.csv", cat.tag());
            let path = dir.join(&file);
            let mut w = csv::Writer::from_path(&path).map_err(|e| Error::parse(&path, e.to_string()))?;
            let mut header = vec!["date".to_string()];
            header.extend(list.iter().map(|s| s.name.clone()));
            w.write_record(&header)?;
            let lookup: Vec<BTreeMap<NaiveDate, Option<f64>>> =
                list.iter().map(|s| s.points.iter().copied().collect()).collect();
            for d in &dates {
                let mut rec = vec![d.to_string()];
                for m in &lookup {
                    rec.push(m.get(d).copied().flatten().map(|v| v.to_string()).unwrap_or_default());
                }
                w.write_record(&rec)?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            for s in list {
                manifest.push_str(&format!("\"{}\" = {{ file = \"{file}\", category = \"{}\" }}\n", s.name, cat.tag()));
            }
        }
        let manifest_path = dir.join("manifest.toml");
        fs::write(&manifest_path, manifest).map_err(|e| Error::io(&manifest_path, e))?;

        let mcap_path = dir.join("mcaps.csv");
        let mut w = csv::Writer::from_path(&mcap_path).map_err(|e| Error::parse(&mcap_path, e.to_string()))?;
        w.write_record(["date", "asset", "market_cap_usd"])?;
        for snap in &self.mcaps {
            for (asset, cap) in &snap.caps {
                w.write_record([snap.date.to_string(), asset.clone(), cap.to_string()])?;
            }
        }
        w.flush().map_err(|e| Error::io(&mcap_path, e))?;
        Ok(manifest_path)
    }
}

/// Reference series for calibration: the index at `power` scaled by `scale`.
pub fn reference_index(mcaps: &[McapSnapshot], power: u32, scale: f64) -> Result<Vec<(NaiveDate, f64)>> {
    let params = crate::index::IndexParams { top_n: 100, power };
    mcaps
        .iter()
        .map(|s| Ok((s.date, scale * crate::index::crypto100(s, &params)?)))
        .collect()
}
