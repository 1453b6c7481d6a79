//! Build the daily market-cap index and recover its scaling power from a
//! noisy reference price.
//!
//! cargo run --release --example index_calibration -- [planted_power]

use cryptodiv::index::{calibrate_power, index_series, IndexParams, DEFAULT_CANDIDATE_POWERS};
use cryptodiv::synth::{generate, reference_index, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> cryptodiv::Result<()> {
    let planted: u32 = std::env::args().nth(1).map_or(6, |a| a.parse().expect("power"));
    let synth = generate(&SynthSpec { n_days: 365, ..Default::default() })?;

    let rows = index_series(&synth.mcaps, &IndexParams::default())?;
    for r in rows.iter().step_by(90) {
        println!("{}  top-100 cap {:.3e}  index {:.2}", r.date, r.sum_mcap, r.index_value);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let reference: Vec<_> = reference_index(&synth.mcaps, planted, 1.0)?
        .into_iter()
        .map(|(d, v)| (d, v * (1.0 + rng.gen_range(-0.02..0.02))))
        .collect();
    let sums: Vec<_> = rows.iter().map(|r| (r.date, r.sum_mcap)).collect();
    let cal = calibrate_power(&sums, &reference, &DEFAULT_CANDIDATE_POWERS)?;
    for (p, err) in &cal.fit {
        println!("power {p}: mean |log error| {err:.5}{}", if *p == cal.power { "  <- chosen" } else { "" });
    }
    println!("planted {planted}, recovered {} over {} days", cal.power, cal.overlap_days);
    Ok(())
}
