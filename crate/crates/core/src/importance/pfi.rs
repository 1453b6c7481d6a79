use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{ImportanceReport, Method};
use crate::error::{Error, Result};
use crate::models::{mse, Matrix, Regressor};
use crate::rng::{name_key, stream};

/// Permutation importance: mean increase in MSE when one column is shuffled.
///
/// The shuffle for feature `j` on repeat `r` comes from the stream keyed by
/// `(seed, hash(name_j), r)`. Features the model never reads score exactly
/// zero without being evaluated.
pub fn pfi<M: Regressor + ?Sized>(
    model: &M,
    x: &Matrix,
    y: &[f64],
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    if repeats == 0 {
        return Err(Error::invalid("permutation importance needs at least one repeat"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    let base_pred = model.predict_matrix(x)?;
    let baseline = mse(y, &base_pred)?;
    let n = x.n_rows();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i)).collect();

    let scores = (0..x.n_cols())
        .into_par_iter()
        .map(|j| {
            if !model.reads_feature(j) {
                return Ok(0.0);
            }
            let col = x.column(j);
            let key = name_key(&x.names()[j]);
            let mut buf = Vec::with_capacity(x.n_cols());
            let mut total = 0.0;
            for r in 0..repeats {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut stream(seed, &[key, r as u64]));
                let mut sse = 0.0;
                for i in 0..n {
                    buf.clear();
                    buf.extend_from_slice(&rows[i]);
                    buf[j] = col[perm[i]];
                    let d = y[i] - model.predict_row(&buf);
                    sse += d * d;
                }
                total += sse / n as f64 - baseline;
            }
            Ok(total / repeats as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut report = ImportanceReport::new(Method::Pfi, x.names().to_vec(), scores);
    report.repeats = Some(repeats);
    report.seed = Some(seed);
    Ok(report)
}
