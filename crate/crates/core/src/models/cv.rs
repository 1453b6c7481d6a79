use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mse, EnsembleParams, Matrix, Regressor};
use crate::error::{Error, Result};
use crate::rng::derive;

/// Candidate hyperparameter sets, scored in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub candidates: Vec<EnsembleParams>,
}

impl GridSpec {
    /// Default random-forest grid: estimators {100, 300}, depth {4, 8, 16},
    /// min split {2, 10}, split features {1/3, all}.
    pub fn default_forest() -> Self {
        let mut candidates = Vec::new();
        for n in [100, 300] {
            for depth in [4, 8, 16] {
                for split in [2, 10] {
                    for mf in [super::MaxFeatures::Fraction(1.0 / 3.0), super::MaxFeatures::All] {
                        let mut p = EnsembleParams::forest(n, Some(depth));
                        p.min_samples_split = split;
                        p.features_per_split = mf;
                        candidates.push(p);
                    }
                }
            }
        }
        Self { candidates }
    }

    /// Default boosting grid: estimators {100, 300}, depth {4, 8, 16},
    /// min split {2, 10}, learning rate {0.05, 0.1}, half the columns per split.
    pub fn default_boosting() -> Self {
        let mut candidates = Vec::new();
        for n in [100, 300] {
            for depth in [4, 8, 16] {
                for split in [2, 10] {
                    for lr in [0.05, 0.1] {
                        let mut p = EnsembleParams::boosting(n, Some(depth), lr);
                        p.min_samples_split = split;
                        p.features_per_split = super::MaxFeatures::Fraction(0.5);
                        candidates.push(p);
                    }
                }
            }
        }
        Self { candidates }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    /// Mean held-out MSE per candidate.
    pub mean_mse: Vec<f64>,
    /// `fold_mse[c][f]`.
    pub fold_mse: Vec<Vec<f64>>,
    pub chosen: usize,
    pub best: EnsembleParams,
}

/// Contiguous fold boundaries `[start, end)`; the first `n % k` folds get
/// one extra row.
pub fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let extra = n % k;
    let mut start = 0;
    (0..k)
        .map(|f| {
            let len = base + usize::from(f < extra);
            let b = (start, start + len);
            start += len;
            b
        })
        .collect()
}

/// k-fold grid search over contiguous, unshuffled folds. Every candidate is
/// fitted on fold `f` with seed `derive(seed, [f])`, so candidates share
/// random streams. The lowest mean MSE wins; ties go to the earlier candidate.
pub fn grid_search_cv(x: &Matrix, y: &[f64], grid: &GridSpec, k: usize, seed: u64) -> Result<CvResult> {
    if grid.candidates.is_empty() {
        return Err(Error::Empty("grid has no candidates".into()));
    }
    if k < 2 {
        return Err(Error::invalid("cross-validation needs at least 2 folds"));
    }
    if x.n_rows() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            actual: y.len(),
        });
    }
    if y.len() < k {
        return Err(Error::invalid(format!("{} rows cannot form {k} folds", y.len())));
    }
    for c in &grid.candidates {
        c.validate()?;
    }
    let folds = fold_bounds(y.len(), k);
    let jobs: Vec<(usize, usize)> = (0..grid.candidates.len())
        .flat_map(|c| (0..k).map(move |f| (c, f)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (lo, hi) = folds[f];
            let train: Vec<usize> = (0..lo).chain(hi..y.len()).collect();
            let test: Vec<usize> = (lo..hi).collect();
            let xtr = x.take_rows(&train);
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let model = grid.candidates[c].fit(&xtr, &ytr, derive(seed, &[f as u64]))?;
            let pred = model.predict_matrix(&x.take_rows(&test))?;
            let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            mse(&yte, &pred)
        })
        .collect::<Result<Vec<f64>>>()?;
    let fold_mse: Vec<Vec<f64>> = scores.chunks(k).map(<[f64]>::to_vec).collect();
    let mean_mse: Vec<f64> = fold_mse.iter().map(|f| f.iter().sum::<f64>() / k as f64).collect();
    let chosen = (0..mean_mse.len()).fold(0, |best, c| if mean_mse[c] < mean_mse[best] { c } else { best });
    Ok(CvResult {
        best: grid.candidates[chosen].clone(),
        mean_mse,
        fold_mse,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn folds_partition_rows() {
        let b = fold_bounds(11, 5);
        assert_eq!(b, vec![(0, 3), (3, 5), (5, 7), (7, 9), (9, 11)]);
        assert_eq!(fold_bounds(10, 5).iter().map(|(a, b)| b - a).sum::<usize>(), 10);
    }

    fn step_data(n: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| vec![r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)]).collect();
        let y = rows.iter().map(|v| if v[0] > 0.0 { 1.0 } else { 0.0 } + r.gen_range(-0.5..0.5)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn single_candidate_chosen() {
        let (x, y) = step_data(50, 1);
        let grid = GridSpec { candidates: vec![EnsembleParams::forest(5, Some(2))] };
        let res = grid_search_cv(&x, &y, &grid, 5, 0).unwrap();
        assert_eq!(res.chosen, 0);
        assert_eq!(res.fold_mse[0].len(), 5);
    }

    #[test]
    fn shallow_beats_memorizer_on_noisy_step() {
        let (x, y) = step_data(200, 2);
        let mut deep = EnsembleParams::forest(1, None);
        deep.bootstrap = false;
        deep.features_per_split = crate::models::MaxFeatures::All;
        let mut shallow = deep.clone();
        shallow.max_depth = Some(2);
        let grid = GridSpec { candidates: vec![deep, shallow] };
        let res = grid_search_cv(&x, &y, &grid, 5, 0).unwrap();
        assert_eq!(res.chosen, 1);
    }

    #[test]
    fn errors() {
        let (x, y) = step_data(10, 3);
        assert!(grid_search_cv(&x, &y, &GridSpec { candidates: vec![] }, 5, 0).is_err());
        let grid = GridSpec { candidates: vec![EnsembleParams::forest(2, Some(2))] };
        assert!(grid_search_cv(&x, &y, &grid, 1, 0).is_err());
        assert!(grid_search_cv(&x, &y, &grid, 11, 0).is_err());
    }

    #[test]
    fn default_grids_have_24_candidates() {
        assert_eq!(GridSpec::default_forest().candidates.len(), 24);
        assert_eq!(GridSpec::default_boosting().candidates.len(), 24);
    }
}
