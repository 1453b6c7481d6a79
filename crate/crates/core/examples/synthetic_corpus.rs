//! Generate the synthetic multi-category corpus, write it to disk as a
//! manifest plus one CSV per category, load it back and clean it.
//!
//! cargo run --release --example synthetic_corpus -- [out_dir]

use std::collections::BTreeMap;
use std::path::PathBuf;

use cryptodiv::data::{clean_corpus, load_corpus, CleanOptions};
use cryptodiv::indicators::IndicatorBattery;
use cryptodiv::synth::{generate, SynthSpec};

fn main() -> cryptodiv::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("cryptodiv_synth"));
    let spec = SynthSpec::default();
    let synth = generate(&spec)?;
    let manifest = synth.write(&out)?;
    println!("wrote {} series and {} market-cap days under {}", synth.series.len(), synth.mcaps.len(), out.display());

    let corpus = load_corpus(&manifest)?;
    let (mut aligned, dropped) = clean_corpus(&corpus, &CleanOptions::default());
    for d in &dropped.records {
        println!("dropped {}: {} ({})", d.metric, d.reason, d.detail);
    }
    let added = IndicatorBattery::default().apply(&mut aligned)?;

    let mut per_category: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &aligned.columns {
        *per_category.entry(c.category.label()).or_default() += 1;
    }
    println!("{} days, {} columns ({added} indicators)", aligned.dates.len(), aligned.columns.len());
    for (label, n) in per_category {
        println!("  {label:<32} {n}");
    }
    for (metric, days) in aligned.forward_filled.iter().take(3) {
        println!("  {metric}: {days} days forward-filled");
    }
    Ok(())
}
