//! Compare MDI, permutation importance and Shapley values on a forest fitted
//! to a known function, and check Shapley efficiency on one row.
//!
//! cargo run --release --example importance

use cryptodiv::importance::{mdi, pearson_report, pfi, shapley_exact, shapley_sampled};
use cryptodiv::models::{EnsembleParams, Matrix, Regressor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cryptodiv::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let names: Vec<String> = ["linear", "interact_a", "interact_b", "weak", "noise_1", "noise_2"].map(String::from).to_vec();
    let n = 600;
    let cols: Vec<Vec<f64>> = (0..names.len()).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = (0..n).map(|i| 2.0 * cols[0][i] + 3.0 * cols[1][i] * cols[2][i] + 0.3 * cols[3][i]).collect();
    let x = Matrix::from_columns(names.clone(), cols)?;

    let forest = EnsembleParams::forest(150, Some(10)).fit(&x, &y, 2)?;
    let reports = [
        pearson_report(&x, &y)?,
        mdi(&forest)?,
        pfi(&forest, &x, &y, 5, 3)?,
        shapley_sampled(&forest, &x.take_rows(&(0..100).collect::<Vec<_>>()), &x.take_rows(&(100..150).collect::<Vec<_>>()), 50, 4)?.report,
    ];
    println!("{:<12}{:>10}{:>10}{:>10}{:>10}", "feature", "|corr|", "MDI", "PFI", "SHAP");
    for (j, name) in names.iter().enumerate() {
        print!("{name:<12}");
        for r in &reports {
            print!("{:>10.4}", r.scores[j]);
        }
        println!();
    }

    let bg = x.take_rows(&(0..50).collect::<Vec<_>>());
    let row = x.take_rows(&[200]);
    let exact = shapley_exact(&forest, &bg, &row)?;
    let total: f64 = exact.phi[0].iter().sum();
    println!(
        "row 200: prediction {:.4} = base {:.4} + sum of attributions {:.4}",
        forest.predict_row(&row.row(0)),
        exact.base_value,
        total
    );
    Ok(())
}
