use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ImportanceReport, Method};
use crate::error::{Error, Result};
use crate::models::{Matrix, Regressor};
use crate::rng::stream;

/// Largest feature count accepted by [`shapley_exact`] (2^p coalitions).
pub const MAX_EXACT_FEATURES: usize = 12;

/// Per-instance attributions and the global ranking derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyResult {
    pub features: Vec<String>,
    /// `phi[i][j]`: attribution of feature `j` for explained row `i`.
    pub phi: Vec<Vec<f64>>,
    /// Standard error of each sampled estimate; `None` for exact values.
    pub std_err: Option<Vec<Vec<f64>>>,
    /// Mean model output over the background rows.
    pub base_value: f64,
    /// Global importance: mean |phi| over explained rows.
    pub report: ImportanceReport,
}

fn check(model_p: usize, background: &Matrix, explain: &Matrix) -> Result<()> {
    if background.n_rows() == 0 {
        return Err(Error::Empty("background set".into()));
    }
    for m in [background, explain] {
        if m.n_cols() != model_p {
            return Err(Error::DimensionMismatch {
                expected: model_p,
                actual: m.n_cols(),
            });
        }
    }
    Ok(())
}

fn finish(
    explain: &Matrix,
    phi: Vec<Vec<f64>>,
    std_err: Option<Vec<Vec<f64>>>,
    base_value: f64,
    n_permutations: Option<usize>,
    seed: Option<u64>,
) -> ShapleyResult {
    let p = explain.n_cols();
    let rows = phi.len().max(1) as f64;
    let global: Vec<f64> = (0..p)
        .map(|j| phi.iter().map(|r| r[j].abs()).sum::<f64>() / rows)
        .collect();
    let mut report = ImportanceReport::new(Method::Shapley, explain.names().to_vec(), global);
    report.repeats = n_permutations;
    report.seed = seed;
    ShapleyResult {
        features: explain.names().to_vec(),
        phi,
        std_err,
        base_value,
        report,
    }
}

fn background_mean<M: Regressor + ?Sized>(model: &M, background: &Matrix) -> Result<f64> {
    let preds = model.predict_matrix(background)?;
    Ok(preds.iter().sum::<f64>() / preds.len() as f64)
}

/// Exact interventional Shapley values by enumerating every coalition.
///
/// `v(S)` is the mean prediction over background rows with the features in
/// `S` taken from the explained row and the rest from the background row.
pub fn shapley_exact<M: Regressor + ?Sized>(
    model: &M,
    background: &Matrix,
    explain: &Matrix,
) -> Result<ShapleyResult> {
    let p = model.n_features();
    if p > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            got: p,
            max: MAX_EXACT_FEATURES,
        });
    }
    check(p, background, explain)?;
    let bg: Vec<Vec<f64>> = (0..background.n_rows()).map(|i| background.row(i)).collect();
    let fact = |k: usize| (1..=k).map(|v| v as f64).product::<f64>();
    let weights: Vec<f64> = (0..p).map(|s| fact(s) * fact(p - s - 1) / fact(p)).collect();
    let n_masks = 1usize << p;

    let phi = (0..explain.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = explain.row(i);
            let mut hybrid = vec![0.0; p];
            let value: Vec<f64> = (0..n_masks)
                .map(|mask| {
                    let total: f64 = bg
                        .iter()
                        .map(|b| {
                            for j in 0..p {
                                hybrid[j] = if mask >> j & 1 == 1 { x[j] } else { b[j] };
                            }
                            model.predict_row(&hybrid)
                        })
                        .sum();
                    total / bg.len() as f64
                })
                .collect();
            (0..p)
                .map(|j| {
                    let bit = 1usize << j;
                    (0..n_masks)
                        .filter(|m| m & bit == 0)
                        .map(|m| weights[m.count_ones() as usize] * (value[m | bit] - value[m]))
                        .sum()
                })
                .collect::<Vec<f64>>()
        })
        .collect();
    Ok(finish(explain, phi, None, background_mean(model, background)?, None, None))
}

/// Monte Carlo Shapley values. Each of the `n_permutations` samples for an
/// explained row draws a random feature ordering and a random background
/// row, then credits each feature with the change in prediction when it is
/// switched from the background value to the explained value. The estimate
/// is unbiased for the interventional value computed by [`shapley_exact`].
pub fn shapley_sampled<M: Regressor + ?Sized>(
    model: &M,
    background: &Matrix,
    explain: &Matrix,
    n_permutations: usize,
    seed: u64,
) -> Result<ShapleyResult> {
    if n_permutations == 0 {
        return Err(Error::invalid("need at least one permutation"));
    }
    let p = model.n_features();
    check(p, background, explain)?;
    let nb = background.n_rows();
    let results: Vec<(Vec<f64>, Vec<f64>)> = (0..explain.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = explain.row(i);
            let mut rng = stream(seed, &[i as u64]);
            let mut order: Vec<usize> = (0..p).collect();
            let mut z = Vec::with_capacity(p);
            let mut sum = vec![0.0; p];
            let mut sumsq = vec![0.0; p];
            for _ in 0..n_permutations {
                order.shuffle(&mut rng);
                background.row_into(rng.gen_range(0..nb), &mut z);
                let mut prev = model.predict_row(&z);
                for &j in &order {
                    z[j] = x[j];
                    let cur = model.predict_row(&z);
                    let d = cur - prev;
                    sum[j] += d;
                    sumsq[j] += d * d;
                    prev = cur;
                }
            }
            let n = n_permutations as f64;
            let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
            let se: Vec<f64> = (0..p)
                .map(|j| {
                    if n_permutations < 2 {
                        return f64::INFINITY;
                    }
                    let var = ((sumsq[j] - n * mean[j] * mean[j]) / (n - 1.0)).max(0.0);
                    (var / n).sqrt()
                })
                .collect();
            (mean, se)
        })
        .collect();
    let (phi, se): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(finish(
        explain,
        phi,
        Some(se),
        background_mean(model, background)?,
        Some(n_permutations),
        Some(seed),
    ))
}

/// Up to `max` row indices drawn without replacement, in ascending order.
pub fn background_rows(n: usize, max: usize, seed: u64) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..n).collect();
    if n > max {
        rows.shuffle(&mut stream(seed, &[0x6267]));
        rows.truncate(max);
        rows.sort_unstable();
    }
    rows
}
