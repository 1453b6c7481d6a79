use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use chrono::NaiveDate;
use cryptodiv::data::Category;
use cryptodiv::index::{crypto100, IndexParams, McapSnapshot};
use cryptodiv::synth::{generate, CategorySpec, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cryptodiv"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn cryptodiv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

#[test]
fn index_matches_library_per_day() {
    let dir = tempfile::tempdir().unwrap();
    let mcaps = dir.path().join("mcaps.csv");
    let days = [("2021-01-01", [6e11, 2e11, 1e9]), ("2021-01-02", [6.5e11, 1.8e11, 2e9]), ("2021-01-03", [7e11, 1.7e11, 3e9])];
    let mut text = String::from("date,asset,market_cap_usd\n");
    for (d, caps) in &days {
        for (a, c) in ["BTC", "ETH", "DOGE"].iter().zip(caps) {
            text.push_str(&format!("{d},{a},{c}\n"));
        }
    }
    fs::write(&mcaps, text).unwrap();
    let out = dir.path().join("index.csv");
    let o = run(&["index", "--mcaps", s(&mcaps), "--power", "7", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));

    let rows = read_rows(&out);
    assert_eq!(rows.len(), 3);
    for (row, (d, caps)) in rows.iter().zip(&days) {
        let snap = McapSnapshot {
            date: NaiveDate::parse_from_str(d, "%Y-%m-%d").unwrap(),
            caps: ["BTC", "ETH", "DOGE"].iter().map(|a| a.to_string()).zip(caps.iter().copied()).collect(),
        };
        let expected = crypto100(&snap, &IndexParams::default()).unwrap();
        assert_eq!(row[0], *d);
        assert_eq!(row[2].parse::<f64>().unwrap(), expected);
        assert_eq!(row[3], "7");
    }
}

#[test]
fn index_calibration_recovers_planted_power() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut mcaps = String::from("date,asset,market_cap_usd\n");
    let mut reference = String::from("date,price\n");
    let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
    for d in start.iter_days().take(120) {
        let caps: Vec<f64> = (0..5).map(|_| rng.gen_range(1e10..5e11)).collect();
        for (i, c) in caps.iter().enumerate() {
            mcaps.push_str(&format!("{d},A{i},{c}\n"));
        }
        let sum: f64 = caps.iter().sum();
        reference.push_str(&format!("{d},{}\n", sum / sum.log10().powi(7) * rng.gen_range(0.99..1.01)));
    }
    fs::write(dir.path().join("mcaps.csv"), mcaps).unwrap();
    fs::write(dir.path().join("ref.csv"), reference).unwrap();
    let out = dir.path().join("index.csv");
    let o = run(&[
        "index",
        "--mcaps",
        s(&dir.path().join("mcaps.csv")),
        "--out",
        s(&out),
        "--calibrate",
        "--reference",
        s(&dir.path().join("ref.csv")),
        "--power",
        "5",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("calibrated power: 7"));
    let table = fs::read_to_string(dir.path().join("index_calibration.csv")).unwrap();
    assert!(table.trim_end().ends_with("chosen,7"), "{table}");
    assert!(read_rows(&out).iter().all(|r| r[3] == "7"));
}

#[test]
fn missing_input_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nowhere/mcaps.csv");
    let o = run(&["index", "--mcaps", s(&missing), "--out", s(&dir.path().join("i.csv"))]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains(s(&missing)), "{}", stderr(&o));
    assert!(!dir.path().join("i.csv").exists());
}

#[test]
fn unknown_config_key_is_rejected_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "manifest = \"m.toml\"\nseed = 1\n\n[experiment]\nholdot = 0.3\n").unwrap();
    let o = run(&["run", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert!(!o.status.success());
    let err = stderr(&o);
    assert!(err.contains("holdot"), "{err}");
    assert!(err.contains("line 5"), "{err}");
    assert!(!dir.path().join("out").exists());
}

fn planted_fixture(path: &Path) {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    let n = 400;
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut names: Vec<String> = (0..8).map(|i| format!("signal_{i}")).collect();
    names.extend((0..32).map(|i| format!("noise_{i:02}")));
    let mut w = csv::Writer::from_path(path).unwrap();
    let mut header = vec!["date".to_string()];
    header.extend(names.iter().cloned());
    header.push("target".into());
    w.write_record(&header).unwrap();
    let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    for (t, d) in start.iter_days().take(n).enumerate() {
        let mut rec = vec![d.to_string()];
        rec.extend((0..8).map(|_| y[t].to_string()));
        rec.extend((0..32).map(|_| rng.gen_range(-1.0..1.0f64).to_string()));
        rec.push(y[t].to_string());
        w.write_record(&rec).unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn fra_audit_shows_shrinking_feature_counts() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("planted.csv");
    planted_fixture(&data);
    let out = dir.path().join("fra");
    let o = run(&["fra", "--dataset", s(&data), "--out", s(&out), "--seed", "3", "--target-features", "10"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let audit: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("audit.json")).unwrap()).unwrap();
    let counts: Vec<u64> = audit["audit"].as_array().unwrap().iter().map(|r| r["n_features"].as_u64().unwrap()).collect();
    assert_eq!(counts[0], 40);
    assert!(counts.windows(2).all(|w| w[1] <= w[0]), "{counts:?}");
    let removed: Vec<u64> = audit["audit"].as_array().unwrap().iter().map(|r| r["removed"].as_array().unwrap().len() as u64).collect();
    for i in 1..counts.len() {
        assert_eq!(counts[i], counts[i - 1] - removed[i - 1]);
    }
    assert!(removed.iter().sum::<u64>() > 0);
    let survivors = read_rows(&out.join("survivors.csv"));
    assert!(survivors.len() <= 10);
    let kept = survivors.iter().filter(|r| r[1].starts_with("signal_")).count();
    assert!(kept >= 7, "{survivors:?}");
}

#[test]
fn importance_ranks_every_feature() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("planted.csv");
    planted_fixture(&data);
    for method in ["pearson", "mdi", "pfi", "shapley"] {
        let out = dir.path().join(format!("{method}.csv"));
        let o = run(&[
            "importance", "--dataset", s(&data), "--method", method, "--out", s(&out), "--permutations", "5",
            "--explain", "10", "--background", "20", "--repeats", "1",
        ]);
        assert!(o.status.success(), "{method}: {}", stderr(&o));
        let rows = read_rows(&out);
        assert_eq!(rows.len(), 40, "{method}");
        assert!(rows[0][0].starts_with("signal_"), "{method}: top is {}", rows[0][0]);
    }
}

/// Small corpus and config so end-to-end runs finish in seconds.
fn small_workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        n_days: 800,
        categories: vec![
            CategorySpec::new(Category::Macro, 6, 1.0),
            CategorySpec::new(Category::OnChainBtc, 8, 1.0),
            CategorySpec::new(Category::SentimentInterest, 4, 0.5),
        ],
        seed: 5,
        ..Default::default()
    };
    generate(&spec).unwrap().write(&dir.path().join("data")).unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        r#"
manifest = "data/manifest.toml"
seed = 11
periods = ["2017-01-01"]
windows = [1, 30]

[target]
mcaps = "data/mcaps.csv"

[indicators]
sma_windows = [5, 20]
ema_windows = [10]

[experiment]
tune = false

[experiment.fra]
target_count = 12
top_k_union = 8
corr_step = 0.1

[experiment.fra.forest]
kind = "random_forest"
n_estimators = 10
max_depth = 6

[experiment.fra.boosting]
kind = "gradient_boost"
n_estimators = 15
max_depth = 3

[experiment.shapley]
explain_rows = 10
permutations = 5
"#,
    )
    .unwrap();
    (dir, cfg)
}

fn files_under(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn run_is_reproducible_and_report_needs_no_corpus() {
    let (dir, cfg) = small_workspace();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for (out, jobs) in [(&a, "1"), (&b, "3")] {
        let o = run(&["run", "--config", s(&cfg), "--out", s(out), "--jobs", jobs]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let tree = files_under(&a);
    assert_eq!(tree, files_under(&b));
    for f in ["summary.json", "scenarios/2017_1.json", "scenarios/2017_30.json", "tables/feature_vectors.csv"] {
        assert!(tree.iter().any(|(p, _)| p == Path::new(f)), "missing {f}");
    }

    // the same seed given as a flag overrides the file and changes nothing
    let c = dir.path().join("c");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&c), "--seed", "11"]);
    assert!(o.status.success());
    assert_eq!(tree, files_under(&c));

    fs::remove_dir_all(dir.path().join("data")).unwrap();
    let tables = dir.path().join("rerendered");
    let o = run(&["report", "--results", s(&a), "--out", s(&tables)]);
    assert!(o.status.success(), "{}", stderr(&o));
    for (p, bytes) in tree.iter().filter(|(p, _)| p.starts_with("tables")) {
        assert_eq!(&fs::read(tables.join(p)).unwrap(), bytes, "{}", p.display());
    }
}

#[test]
fn prepare_then_fra_on_scenario_split() {
    let (dir, cfg) = small_workspace();
    let data = dir.path().join("train.csv");
    let o = run(&["prepare", "--config", s(&cfg), "--scenario", "2017_30", "--out", s(&data)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&data).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().ends_with(",target"));
    assert!(lines.next().unwrap().starts_with("#category,"));

    let out = dir.path().join("fra");
    let o = run(&["fra", "--dataset", s(&data), "--config", s(&cfg), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("audit.json").exists() && out.join("survivors.csv").exists());
}

#[test]
fn failed_run_leaves_no_output() {
    let (dir, cfg) = small_workspace();
    fs::remove_file(dir.path().join("data/mcaps.csv")).unwrap();
    let out = dir.path().join("out");
    let o = run(&["run", "--config", s(&cfg), "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("mcaps.csv"), "{}", stderr(&o));
    assert!(!out.exists());
}
