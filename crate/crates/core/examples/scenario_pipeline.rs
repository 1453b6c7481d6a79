//! Run one scenario end to end on a synthetic corpus and print the final
//! feature vector, category contributions and MSE improvements.
//!
//! cargo run --release --example scenario_pipeline -- [window] [seed]

use std::time::Instant;

use chrono::NaiveDate;
use cryptodiv::data::{clean_corpus, CleanOptions, Scenario};
use cryptodiv::experiments::{run_scenario, ScenarioConfig};
use cryptodiv::index::{index_as_metric, index_series, IndexParams};
use cryptodiv::indicators::IndicatorBattery;
use cryptodiv::models::{EnsembleParams, GridSpec};
use cryptodiv::synth::{generate, SynthSpec};

fn main() -> cryptodiv::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let window: u32 = args.first().map_or(7, |a| a.parse().expect("window"));
    let seed: u64 = args.get(1).map_or(1, |a| a.parse().expect("seed"));

    let synth = generate(&SynthSpec { seed, ..Default::default() })?;
    let (mut aligned, dropped) = clean_corpus(&synth.corpus()?, &CleanOptions::default());
    let added = IndicatorBattery::default().apply(&mut aligned)?;
    let target = index_as_metric(&index_series(&synth.mcaps, &IndexParams::default())?, "crypto100");
    println!(
        "corpus: {} columns after cleaning ({} dropped), {added} indicators",
        aligned.columns.len(),
        dropped.len()
    );

    let mut config = ScenarioConfig {
        forest_grid: GridSpec {
            candidates: vec![EnsembleParams::forest(20, Some(6)), EnsembleParams::forest(20, Some(10))],
        },
        boosting_grid: GridSpec {
            candidates: vec![EnsembleParams::boosting(30, Some(3), 0.1)],
        },
        cv_folds: 3,
        ..Default::default()
    };
    config.fra.corr_step = 0.05;

    let scenario = Scenario::new(NaiveDate::from_ymd_opt(2017, 1, 1).unwrap(), window);
    let t0 = Instant::now();
    let run = run_scenario(&aligned, &target, scenario, &config, seed)?;
    let r = &run.result;
    println!("scenario {} done in {:.1?}", r.id, t0.elapsed());
    println!(
        "train {} / test {} rows, {} candidates, {} FRA iterations, {} survivors, {} final features (overlap {})",
        r.n_train,
        r.n_test,
        r.candidates.values().sum::<usize>(),
        r.fra.iterations,
        r.fra.survivors.len(),
        r.final_features.len(),
        r.fra.shapley_overlap
    );
    println!("\ncontribution factors:");
    for (cat, f) in &r.contribution {
        println!("  {:<32} {:.3}", cat.label(), f);
    }
    println!("\ndiverse MSE {:.4e}", r.mse_diverse);
    for (cat, arm) in &r.arms {
        println!(
            "  {:<32} {:>4} features  MSE {:.4e}  improvement {:>9.2}%",
            cat.label(),
            arm.n_features,
            arm.mse,
            arm.improvement_pct
        );
    }
    println!("mean improvement {:.2}%", r.mean_improvement);
    Ok(())
}
