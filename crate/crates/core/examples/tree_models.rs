//! Fit a regression tree, a random forest and a boosted ensemble on a
//! nonlinear target, then choose hyperparameters by cross-validation.
//!
//! cargo run --release --example tree_models

use cryptodiv::models::{fit_tree, grid_search_cv, mse, EnsembleParams, GridSpec, Matrix, Regressor, TreeParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cryptodiv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut sample = |n: usize| {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|r| (r[0] * 1.5).sin() + 0.5 * r[1] * r[2] + rng.gen_range(-0.2..0.2)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    };
    let (x, y) = sample(800);
    let (xt, yt) = sample(400);

    let tree = fit_tree(&x, &y, &TreeParams { max_depth: Some(6), ..Default::default() }, &mut ChaCha8Rng::seed_from_u64(0))?;
    println!("tree depth {} with {} leaves: test MSE {:.4}", tree.depth(), tree.n_leaves(), mse(&yt, &tree.predict_matrix(&xt)?)?);

    let forest = EnsembleParams::forest(200, Some(10)).fit(&x, &y, 1)?;
    println!("forest of 200: test MSE {:.4}", mse(&yt, &forest.predict_matrix(&xt)?)?);

    let gbt = EnsembleParams::boosting(300, Some(3), 0.05).fit(&x, &y, 1)?;
    println!(
        "boosting 300 stages: train MSE {:.4} -> {:.4}, test MSE {:.4}",
        gbt.train_mse[0],
        gbt.train_mse[gbt.train_mse.len() - 1],
        mse(&yt, &gbt.predict_matrix(&xt)?)?
    );

    let grid = GridSpec {
        candidates: vec![
            EnsembleParams::forest(100, Some(4)),
            EnsembleParams::forest(100, Some(12)),
            EnsembleParams::boosting(200, Some(2), 0.1),
            EnsembleParams::boosting(200, Some(4), 0.1),
        ],
    };
    let cv = grid_search_cv(&x, &y, &grid, 5, 11)?;
    for (c, m) in grid.candidates.iter().zip(&cv.mean_mse) {
        println!("  {:?} trees={} depth={:?}: CV MSE {m:.4}", c.kind, c.n_estimators, c.max_depth);
    }
    println!("chosen candidate #{}", cv.chosen);
    Ok(())
}
