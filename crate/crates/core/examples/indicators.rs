//! Technical indicators on a random-walk price series.
//!
//! cargo run --release --example indicators

use cryptodiv::indicators::{bollinger, ema, rsi, sma, IndicatorBattery};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cell(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.2}"))
}

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut price = 100.0;
    let x: Vec<f64> = (0..60)
        .map(|_| {
            price *= 1.0 + rng.gen_range(-0.03..0.035);
            price
        })
        .collect();

    let (s, e, r, b) = (sma(&x, 10), ema(&x, 10), rsi(&x, 14), bollinger(&x, 20, 2.0));
    println!("{:>3} {:>8} {:>8} {:>8} {:>6} {:>8} {:>8}", "t", "price", "SMA10", "EMA10", "RSI14", "BB-low", "BB-up");
    for t in (0..x.len()).step_by(5) {
        println!(
            "{t:>3} {:>8.2} {:>8} {:>8} {:>6} {:>8} {:>8}",
            x[t],
            cell(s[t]),
            cell(e[t]),
            cell(r[t]),
            cell(b.lower[t]),
            cell(b.upper[t])
        );
    }

    let names: Vec<String> = IndicatorBattery::default().specs().iter().map(|s| s.column_name()).collect();
    println!("default battery: {} columns, e.g. {}", names.len(), names[..4].join(", "));
}
