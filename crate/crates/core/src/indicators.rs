//! Technical indicators derived from market series.
//!
//! Every function returns a vector aligned with its input; positions without
//! enough history are `None`.

use serde::{Deserialize, Serialize};

use crate::data::{AlignedCorpus, Category};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum IndicatorKind {
    Sma,
    Ema,
    Rsi,
    Bollinger,
}

impl IndicatorKind {
    pub fn tag(self) -> &'static str {
        match self {
            IndicatorKind::Sma => "SMA",
            IndicatorKind::Ema => "EMA",
            IndicatorKind::Rsi => "RSI",
            IndicatorKind::Bollinger => "BOLLINGER",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorSpec {
    pub kind: IndicatorKind,
    pub window: usize,
    pub source: String,
    /// Band width `k`, Bollinger only.
    pub band_width: f64,
}

impl IndicatorSpec {
    pub fn new(kind: IndicatorKind, window: usize, source: impl Into<String>) -> Self {
        Self {
            kind,
            window,
            source: source.into(),
            band_width: 2.0,
        }
    }

    /// `{KIND}{window}_{source}`, e.g. `EMA100_market-cap`.
    pub fn column_name(&self) -> String {
        format!("{}{}_{}", self.kind.tag(), self.window, self.source)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("indicator window must be at least 1"));
        }
        if self.kind == IndicatorKind::Bollinger && (self.window < 2 || !(self.band_width > 0.0)) {
            return Err(Error::invalid("Bollinger bands need window >= 2 and k > 0"));
        }
        Ok(())
    }

    /// Output columns as `(name, values)`. Bollinger produces `_upper` and
    /// `_lower` bands; the middle band duplicates the SMA.
    pub fn compute(&self, x: &[f64]) -> Result<Vec<(String, Vec<Option<f64>>)>> {
        self.validate()?;
        let name = self.column_name();
        Ok(match self.kind {
            IndicatorKind::Sma => vec![(name, sma(x, self.window))],
            IndicatorKind::Ema => vec![(name, ema(x, self.window))],
            IndicatorKind::Rsi => vec![(name, rsi(x, self.window))],
            IndicatorKind::Bollinger => {
                let b = bollinger(x, self.window, self.band_width);
                vec![(format!("{name}_upper"), b.upper), (format!("{name}_lower"), b.lower)]
            }
        })
    }
}

/// Simple moving average over the trailing `n` values.
pub fn sma(x: &[f64], n: usize) -> Vec<Option<f64>> {
    assert!(n >= 1, "window must be positive");
    (0..x.len())
        .map(|t| (t + 1 >= n).then(|| x[t + 1 - n..=t].iter().sum::<f64>() / n as f64))
        .collect()
}

/// Exponential moving average, `alpha = 2 / (n + 1)`, seeded with the SMA of
/// the first `n` values.
pub fn ema(x: &[f64], n: usize) -> Vec<Option<f64>> {
    assert!(n >= 1, "window must be positive");
    let mut out = vec![None; x.len()];
    if x.len() < n {
        return out;
    }
    let alpha = 2.0 / (n as f64 + 1.0);
    let mut e = x[..n].iter().sum::<f64>() / n as f64;
    out[n - 1] = Some(e);
    for t in n..x.len() {
        e = alpha * x[t] + (1.0 - alpha) * e;
        out[t] = Some(e);
    }
    out
}

/// Relative strength index with Wilder smoothing. Defined from index `n`.
/// A window with no losses reads 100, no gains 0, no movement 50.
pub fn rsi(x: &[f64], n: usize) -> Vec<Option<f64>> {
    assert!(n >= 1, "window must be positive");
    let mut out = vec![None; x.len()];
    if x.len() <= n {
        return out;
    }
    let delta = |t: usize| x[t] - x[t - 1];
    let (mut gain, mut loss) = (1..=n).fold((0.0, 0.0), |(g, l), t| {
        let d = delta(t);
        (g + d.max(0.0), l + (-d).max(0.0))
    });
    gain /= n as f64;
    loss /= n as f64;
    out[n] = Some(rsi_value(gain, loss));
    let nf = n as f64;
    for t in n + 1..x.len() {
        let d = delta(t);
        gain = (gain * (nf - 1.0) + d.max(0.0)) / nf;
        loss = (loss * (nf - 1.0) + (-d).max(0.0)) / nf;
        out[t] = Some(rsi_value(gain, loss));
    }
    out
}

fn rsi_value(gain: f64, loss: f64) -> f64 {
    if loss == 0.0 {
        if gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + gain / loss)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bollinger {
    pub mid: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
    pub lower: Vec<Option<f64>>,
}

/// SMA(n) with bands at `k` rolling population standard deviations.
pub fn bollinger(x: &[f64], n: usize, k: f64) -> Bollinger {
    assert!(n >= 1, "window must be positive");
    let mid = sma(x, n);
    let mut upper = vec![None; x.len()];
    let mut lower = vec![None; x.len()];
    for t in 0..x.len() {
        let Some(m) = mid[t] else { continue };
        let var = x[t + 1 - n..=t].iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        upper[t] = Some(m + k * sd);
        lower[t] = Some(m - k * sd);
    }
    Bollinger { mid, upper, lower }
}

/// Which indicators to derive for the corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndicatorBattery {
    /// Market series to derive from. Missing sources are skipped.
    pub sources: Vec<String>,
    pub sma_windows: Vec<usize>,
    pub ema_windows: Vec<usize>,
    pub rsi_windows: Vec<usize>,
    pub bollinger_windows: Vec<usize>,
}

impl Default for IndicatorBattery {
    fn default() -> Self {
        let windows = vec![5, 10, 14, 20, 30, 100, 200];
        Self {
            sources: vec!["close-price".into(), "market-cap".into(), "volume".into()],
            sma_windows: windows.clone(),
            ema_windows: windows,
            rsi_windows: Vec::new(),
            bollinger_windows: Vec::new(),
        }
    }
}

impl IndicatorBattery {
    pub fn none() -> Self {
        Self {
            sources: Vec::new(),
            sma_windows: Vec::new(),
            ema_windows: Vec::new(),
            rsi_windows: Vec::new(),
            bollinger_windows: Vec::new(),
        }
    }

    pub fn specs(&self) -> Vec<IndicatorSpec> {
        let mut specs = Vec::new();
        for src in &self.sources {
            let groups = [
                (IndicatorKind::Sma, &self.sma_windows),
                (IndicatorKind::Ema, &self.ema_windows),
                (IndicatorKind::Rsi, &self.rsi_windows),
                (IndicatorKind::Bollinger, &self.bollinger_windows),
            ];
            for (kind, windows) in groups {
                specs.extend(windows.iter().map(|&w| IndicatorSpec::new(kind, w, src.clone())));
            }
        }
        specs
    }

    /// Derive every indicator whose source exists and append them as
    /// technical columns. Returns the number of columns added.
    pub fn apply(&self, corpus: &mut AlignedCorpus) -> Result<usize> {
        let mut added = 0;
        for spec in self.specs() {
            let Some(col) = corpus.column(&spec.source) else { continue };
            let Some(first) = col.first_valid() else { continue };
            let end = col.values[first..]
                .iter()
                .position(Option::is_none)
                .map_or(col.values.len(), |k| first + k);
            let block: Vec<f64> = col.values[first..end].iter().map(|v| v.unwrap()).collect();
            for (name, values) in spec.compute(&block)? {
                let mut full = vec![None; corpus.dates.len()];
                full[first..end].copy_from_slice(&values);
                corpus.push_column(name, Category::Technical, full)?;
                added += 1;
            }
        }
        Ok(added)
    }
}
