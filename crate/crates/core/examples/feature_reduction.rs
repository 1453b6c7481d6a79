//! Feature reduction on a planted problem: a few informative features hidden
//! among noise, removed iteration by iteration.
//!
//! cargo run --release --example feature_reduction -- [seed]

use chrono::NaiveDate;
use cryptodiv::data::{Category, Dataset};
use cryptodiv::fra::{fra_reduce, FraConfig};
use cryptodiv::models::EnsembleParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cryptodiv::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 500;
    let drivers: Vec<Vec<f64>> = (0..4).map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = (0..n)
        .map(|i| drivers[0][i] + drivers[1][i].powi(2) + (3.0 * drivers[2][i]).sin() + 0.5 * drivers[3][i])
        .collect();
    let mut cols: Vec<(String, Category, Vec<f64>)> = drivers
        .into_iter()
        .enumerate()
        .map(|(i, c)| (format!("driver_{i}"), Category::OnChainBtc, c))
        .collect();
    for i in 0..36 {
        cols.push((format!("noise_{i:02}"), Category::Macro, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    }
    let dates = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap().iter_days().take(n).collect();
    let mut data = Dataset::new(dates, cols)?;
    data.target = Some(y);
    data.window = Some(1);

    let config = FraConfig {
        target_count: 8,
        top_k_union: 8,
        forest: EnsembleParams::forest(60, Some(8)),
        boosting: EnsembleParams { n_estimators: 60, ..FraConfig::default().boosting },
        seed,
        ..Default::default()
    };
    let reduced = fra_reduce(&data, &config)?;
    for rec in &reduced.audit {
        let names: Vec<String> = rec
            .removed
            .iter()
            .map(|r| format!("{}{}", r.feature, if r.forced { "*" } else { "" }))
            .collect();
        println!("iter {:>2} threshold {:.3} features {:>2} removed [{}]", rec.iteration, rec.threshold, rec.n_features, names.join(" "));
    }
    println!("survivors (best first):");
    for (f, m) in reduced.survivors.iter().zip(&reduced.mean_ranks) {
        println!("  {f:<10} mean rank {m:.2}  |corr| {:.3}", reduced.abs_corr[f]);
    }
    Ok(())
}
