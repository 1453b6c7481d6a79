//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use cryptodiv::data::{clean_corpus, Category, CleanOptions, Dataset, MetricSeries, Scenario};
use cryptodiv::experiments::{improvement_pct, run_scenario, ScenarioConfig};
use cryptodiv::fra::{fra_reduce, FraConfig};
use cryptodiv::importance::{mdi, pfi, shapley_exact, shapley_sampled};
use cryptodiv::index::{calibrate_power, crypto100, index_from_sum, IndexParams, McapSnapshot};
use cryptodiv::indicators::{bollinger, ema, rsi, sma};
use cryptodiv::models::{
    fit_gbt, fit_tree, fold_bounds, grid_search_cv, mse, EnsembleParams, FnModel, GridSpec, Matrix, MaxFeatures,
    Regressor, TreeParams,
};
use cryptodiv::rng::derive;
use cryptodiv::synth::{generate, CategorySpec, SynthSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

// 1 ------------------------------------------------------------------------

fn single_asset(cap: f64) -> McapSnapshot {
    McapSnapshot {
        date: date(2020, 1, 1),
        caps: BTreeMap::from([("X".to_string(), cap)]),
    }
}

fn index_correctness() -> Check {
    let p = IndexParams::default();
    let a = crypto100(&single_asset(1e10), &p).map_err(|e| e.to_string())?;
    ensure(rel_err(a, 1000.0) <= 1e-9, || format!("S=1e10 gave {a}"))?;

    // split the same total over many assets: only the sum matters
    let mut caps = BTreeMap::new();
    for i in 0..150 {
        caps.insert(format!("A{i:03}"), if i < 100 { 1e10 } else { 1.0 });
    }
    let b = crypto100(&McapSnapshot { date: date(2020, 1, 1), caps }, &p).map_err(|e| e.to_string())?;
    let oracle = 1e12 / (12.0f64 * 12.0 * 12.0 * 12.0 * 12.0 * 12.0 * 12.0);
    ensure(rel_err(b, oracle) <= 1e-12, || format!("S=1e12 gave {b}, oracle {oracle}"))?;

    // market-cap scale grid, 1e4 .. 1e14
    let grid: Vec<f64> = (0..100).map(|i| 10f64.powf(4.0 + 10.0 * i as f64 / 99.0)).collect();
    let vals: Vec<f64> = grid.iter().map(|&s| index_from_sum(s, 7).unwrap()).collect();
    ensure(vals.windows(2).all(|w| w[1] > w[0]), || "index not increasing on grid".into())?;
    Ok(format!("1e10 -> {a}, 1e12 rel err {:.1e}, 100-point grid increasing", rel_err(b, oracle)))
}

// 2 ------------------------------------------------------------------------

fn power_calibration() -> Check {
    let mut hits = 0;
    for trial in 0..25u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let planted = 5 + (trial % 5) as u32;
        let mut log_s = rng.gen_range(24.0..27.0);
        let mut sums = Vec::new();
        let mut reference = Vec::new();
        for (i, d) in date(2020, 1, 1).iter_days().take(365).enumerate() {
            log_s += rng.gen_range(-0.04..0.04);
            let s: f64 = f64::exp(log_s);
            sums.push((d, s));
            let noise = rng.gen_range(-0.02..0.02);
            let r = s / s.log10().powi(planted as i32) * f64::exp(noise);
            if i % 7 != 3 {
                reference.push((d, r));
            }
        }
        let cal = calibrate_power(&sums, &reference, &[5, 6, 7, 8, 9]).map_err(|e| e.to_string())?;
        if cal.power == planted {
            hits += 1;
        }
    }
    ensure(hits == 25, || format!("recovered {hits}/25"))?;
    Ok("planted power recovered in 25/25 trials".into())
}

// 3 ------------------------------------------------------------------------

fn sma_oracle(x: &[f64], n: usize, t: usize) -> Option<f64> {
    if t + 1 < n {
        return None;
    }
    let mut s = 0.0;
    for v in &x[t + 1 - n..=t] {
        s += v;
    }
    Some(s / n as f64)
}

/// Closed form of the recursion: seed weighted by (1-a)^(t-n+1) plus the
/// geometrically weighted later inputs.
fn ema_oracle(x: &[f64], n: usize, t: usize) -> Option<f64> {
    if t + 1 < n {
        return None;
    }
    let a = 2.0 / (n as f64 + 1.0);
    let seed = x[..n].iter().sum::<f64>() / n as f64;
    let mut v = (1.0 - a).powi((t + 1 - n) as i32) * seed;
    for s in n..=t {
        v += a * (1.0 - a).powi((t - s) as i32) * x[s];
    }
    Some(v)
}

fn wilder_closed_form(moves: &[f64], n: usize, t: usize) -> f64 {
    // moves[i] is the move into day i + 1
    let w = (n as f64 - 1.0) / n as f64;
    let first = moves[..n].iter().sum::<f64>() / n as f64;
    let mut v = w.powi((t - n) as i32) * first;
    for s in n + 1..=t {
        v += w.powi((t - s) as i32) * moves[s - 1] / n as f64;
    }
    v
}

fn rsi_oracle(x: &[f64], n: usize, t: usize) -> Option<f64> {
    if t < n {
        return None;
    }
    let gains: Vec<f64> = x.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    let losses: Vec<f64> = x.windows(2).map(|w| (w[0] - w[1]).max(0.0)).collect();
    let g = wilder_closed_form(&gains, n, t);
    let l = wilder_closed_form(&losses, n, t);
    Some(if l == 0.0 { if g == 0.0 { 50.0 } else { 100.0 } } else { 100.0 * g / (g + l) })
}

fn band_oracle(x: &[f64], n: usize, k: f64, t: usize) -> Option<(f64, f64)> {
    let m = sma_oracle(x, n, t)?;
    let w = &x[t + 1 - n..=t];
    let var = w.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
    Some((m + k * var.sqrt(), m - k * var.sqrt()))
}

fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol * (1.0 + b.abs()),
        _ => false,
    }
}

fn indicator_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut checked = 0usize;
    for s in 0..50 {
        let len = rng.gen_range(40..120);
        let mut level = rng.gen_range(10.0..1000.0);
        let x: Vec<f64> = (0..len)
            .map(|_| {
                level *= 1.0 + rng.gen_range(-0.05..0.05);
                level
            })
            .collect();
        for n in [1usize, 2, 5, 14, 20] {
            let (a, b, c) = (sma(&x, n), ema(&x, n), rsi(&x, n));
            for t in 0..len {
                ensure(close(a[t], sma_oracle(&x, n, t), 1e-9), || format!("SMA series {s} n {n} t {t}"))?;
                ensure(close(b[t], ema_oracle(&x, n, t), 1e-9), || format!("EMA series {s} n {n} t {t}"))?;
                ensure(close(c[t], rsi_oracle(&x, n, t), 1e-9), || format!("RSI series {s} n {n} t {t}"))?;
                checked += 3;
            }
            if n >= 2 {
                let k = rng.gen_range(0.5..3.0);
                let bb = bollinger(&x, n, k);
                for t in 0..len {
                    let o = band_oracle(&x, n, k, t);
                    ensure(close(bb.upper[t], o.map(|v| v.0), 1e-9), || format!("upper band series {s} t {t}"))?;
                    ensure(close(bb.lower[t], o.map(|v| v.1), 1e-9), || format!("lower band series {s} t {t}"))?;
                    checked += 2;
                }
            }
        }
    }

    let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.7).sin() * 5.0).collect();
    ensure(ema(&x, 1).iter().zip(&x).all(|(e, v)| *e == Some(*v)), || "EMA n=1 not identity".into())?;
    let up: Vec<f64> = (0..30).map(|i| i as f64).collect();
    let down: Vec<f64> = up.iter().rev().copied().collect();
    ensure(rsi(&up, 14)[14..].iter().all(|v| *v == Some(100.0)), || "RSI of rising series".into())?;
    ensure(rsi(&down, 14)[14..].iter().all(|v| *v == Some(0.0)), || "RSI of falling series".into())?;
    let flat = vec![7.25; 30];
    let b = bollinger(&flat, 20, 2.0);
    ensure(
        (19..30).all(|t| b.upper[t] == Some(7.25) && b.lower[t] == Some(7.25) && b.mid[t] == Some(7.25)),
        || "zero-variance bands not collapsed".into(),
    )?;
    Ok(format!("{checked} values match oracles; identity/extreme cases exact"))
}

// 4 ------------------------------------------------------------------------

fn model_sanity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rows: Vec<Vec<f64>> = (0..300).map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r[0].sin() + r[1] * r[2] + rng.gen_range(-0.3..0.3)).collect();
    let x = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let tree = fit_tree(&x, &y, &TreeParams::default(), &mut ChaCha8Rng::seed_from_u64(0)).map_err(|e| e.to_string())?;
    let pred = tree.predict_matrix(&x).map_err(|e| e.to_string())?;
    ensure(pred == y, || "single tree does not reproduce training targets".into())?;

    let gbt = fit_gbt(&x, &y, &EnsembleParams::boosting(200, Some(3), 0.1), 1).map_err(|e| e.to_string())?;
    ensure(gbt.train_mse.len() == 201, || "missing stage losses".into())?;
    ensure(gbt.train_mse.windows(2).all(|w| w[1] <= w[0]), || "boosting loss increased".into())?;

    let x200 = x.take_rows(&(0..200).collect::<Vec<_>>());
    let y200 = &y[..200];
    let grid = GridSpec {
        candidates: vec![
            EnsembleParams::forest(8, Some(2)),
            EnsembleParams::forest(8, Some(6)),
            EnsembleParams::boosting(30, Some(2), 0.1),
            EnsembleParams::boosting(30, Some(4), 0.3),
        ],
    };
    let seed = 77;
    let cv = grid_search_cv(&x200, y200, &grid, 5, seed).map_err(|e| e.to_string())?;
    // brute force: refit every candidate on every fold, one at a time
    let mut oracle_mean = Vec::new();
    for cand in &grid.candidates {
        let mut total = 0.0;
        for (f, (lo, hi)) in fold_bounds(200, 5).into_iter().enumerate() {
            let train: Vec<usize> = (0..200).filter(|i| *i < lo || *i >= hi).collect();
            let test: Vec<usize> = (lo..hi).collect();
            let ytr: Vec<f64> = train.iter().map(|&i| y200[i]).collect();
            let m = cand.fit(&x200.take_rows(&train), &ytr, derive(seed, &[f as u64])).map_err(|e| e.to_string())?;
            let yte: Vec<f64> = test.iter().map(|&i| y200[i]).collect();
            total += mse(&yte, &m.predict_matrix(&x200.take_rows(&test)).unwrap()).unwrap();
        }
        oracle_mean.push(total / 5.0);
    }
    let oracle_best = (0..4).fold(0, |b, c| if oracle_mean[c] < oracle_mean[b] { c } else { b });
    ensure(cv.mean_mse == oracle_mean, || format!("{:?} vs {:?}", cv.mean_mse, oracle_mean))?;
    ensure(cv.chosen == oracle_best, || "different winner".into())?;
    Ok(format!("tree memorizes 300 rows; 200-stage loss monotone; CV winner #{} agrees exactly", cv.chosen))
}

// 5 ------------------------------------------------------------------------

fn importance_axioms() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let rows: Vec<Vec<f64>> = (0..400).map(|_| (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] + r[1] * r[2] + 0.5 * r[3]).collect();
    let x = Matrix::from_rows(&rows).map_err(|e| e.to_string())?;
    let mut params = EnsembleParams::forest(50, Some(8));
    params.features_per_split = MaxFeatures::Fraction(0.5);
    let forest = params.fit(&x, &y, 3).map_err(|e| e.to_string())?;
    let m = mdi(&forest).map_err(|e| e.to_string())?;
    let total: f64 = m.scores.iter().sum();
    ensure((total - 1.0).abs() <= 1e-9, || format!("MDI sums to {total}"))?;

    // x5 is never read by this model
    let mut p = EnsembleParams::forest(20, Some(6));
    p.features_per_split = MaxFeatures::All;
    let narrow = Matrix::from_rows(&rows.iter().map(|r| vec![r[0], r[5]]).collect::<Vec<_>>()).unwrap();
    let y0: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let m0 = p.fit(&narrow, &y0, 0).map_err(|e| e.to_string())?;
    let unused = if m0.reads_feature(1) { None } else { Some(pfi(&m0, &narrow, &y0, 5, 1).unwrap().scores[1]) };
    let f = FnModel::new(6, |r: &[f64]| r[0] * r[1] + (2.0 * r[2]).sin() - r[3] * r[4] * r[0]);
    let pf = pfi(&f, &x, &y, 3, 2).map_err(|e| e.to_string())?;
    ensure(unused == Some(0.0), || format!("unused tree feature PFI {unused:?}"))?;
    ensure(pf.scores[5] == 0.0, || format!("ignored input PFI {}", pf.scores[5]))?;

    let bg = x.take_rows(&(0..40).collect::<Vec<_>>());
    let ex = x.take_rows(&(100..105).collect::<Vec<_>>());
    let exact = shapley_exact(&f, &bg, &ex).map_err(|e| e.to_string())?;
    for i in 0..ex.n_rows() {
        let sum: f64 = exact.phi[i].iter().sum();
        let gap = f.predict_row(&ex.row(i)) - exact.base_value;
        ensure((sum - gap).abs() <= 1e-9, || format!("efficiency off by {}", sum - gap))?;
        ensure(exact.phi[i][5] == 0.0, || "null player has non-zero value".into())?;
    }
    let est = shapley_sampled(&f, &bg, &ex, 2000, 11).map_err(|e| e.to_string())?;
    let se = est.std_err.as_ref().unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..ex.n_rows() {
        for j in 0..6 {
            let d = (est.phi[i][j] - exact.phi[i][j]).abs();
            if se[i][j] > 0.0 {
                worst = worst.max(d / se[i][j]);
            }
            ensure(d <= 3.0 * se[i][j] + 1e-12, || format!("row {i} feature {j}: |diff| {d} > 3 SE {}", se[i][j]))?;
        }
    }
    Ok(format!("MDI sum 1 (err {:.1e}); unused PFI 0; efficiency & null player hold; sampled within {worst:.2} SE", (total - 1.0).abs()))
}

// 6 ------------------------------------------------------------------------

fn planted_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 500;
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut cols = Vec::new();
    for i in 0..8 {
        cols.push((format!("signal_{i}"), Category::OnChainBtc, y.clone()));
    }
    for i in 0..32 {
        cols.push((format!("noise_{i:02}"), Category::Macro, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()));
    }
    let dates = date(2019, 1, 1).iter_days().take(n).collect();
    let mut ds = Dataset::new(dates, cols).unwrap();
    ds.target = Some(y);
    ds.window = Some(1);
    ds
}

fn fra_planted() -> Check {
    let mut good = 0;
    let mut max_iter = 0;
    let mut kept_counts = Vec::new();
    for seed in 0..20u64 {
        let ds = planted_dataset(1000 + seed);
        let cfg = FraConfig {
            target_count: 10,
            top_k_union: 10,
            forest: EnsembleParams::forest(50, Some(8)),
            boosting: EnsembleParams {
                n_estimators: 50,
                max_depth: Some(3),
                ..FraConfig::default().boosting
            },
            seed,
            ..Default::default()
        };
        let res = fra_reduce(&ds, &cfg).map_err(|e| e.to_string())?;
        ensure(res.iterations <= 200 && !res.forced_stop, || format!("seed {seed}: {} iterations", res.iterations))?;
        ensure(res.survivors.len() <= 10, || format!("seed {seed}: {} survivors", res.survivors.len()))?;
        let removed: Vec<&String> = res.removed().map(|r| &r.feature).collect();
        let all: BTreeSet<&String> = res.survivors.iter().chain(removed.iter().copied()).collect();
        ensure(
            all.len() == 40 && res.survivors.len() + removed.len() == 40,
            || format!("seed {seed}: audit does not partition the features"),
        )?;
        for rec in &res.audit {
            for r in &rec.removed {
                let in_all = rec
                    .rankings
                    .iter()
                    .all(|rk| rk[rk.len() - rk.len() / 2..].contains(&r.feature));
                ensure(r.forced || (in_all && r.abs_corr < rec.threshold), || {
                    format!("seed {seed}: unsound removal of {}", r.feature)
                })?;
            }
        }
        let kept = res.survivors.iter().filter(|s| s.starts_with("signal_")).count();
        kept_counts.push(kept);
        if kept >= 7 {
            good += 1;
        }
        max_iter = max_iter.max(res.iterations);
    }
    ensure(good >= 18, || format!("only {good}/20 seeds kept >= 7 signals ({kept_counts:?})"))?;
    Ok(format!("{good}/20 seeds kept >= 7 of 8 signals; max {max_iter} iterations; audits partition"))
}

// 7 ------------------------------------------------------------------------

fn two_category_run(seed: u64) -> Result<(f64, f64, f64, f64, f64), String> {
    let lead = 7u32;
    let spec = SynthSpec {
        start: date(2016, 1, 1),
        n_days: 900,
        categories: vec![
            CategorySpec::new(Category::OnChainBtc, 10, 1.0),
            CategorySpec::new(Category::Macro, 10, 1.0),
        ],
        lead,
        weekend_gaps: false,
        degenerate: false,
        seed,
        ..Default::default()
    };
    let synth = generate(&spec).map_err(|e| e.to_string())?;
    let (corpus, _) = clean_corpus(&synth.corpus().map_err(|e| e.to_string())?, &CleanOptions::default());
    // target = g(A) + h(B) + noise, observed `lead` days after its drivers
    let a = &synth.latent[&Category::OnChainBtc];
    let b = &synth.latent[&Category::Macro];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7467);
    let dates = synth.dates();
    let points = (0..dates.len())
        .map(|t| {
            let v = (t >= lead as usize).then(|| {
                let s = t - lead as usize;
                100.0 + 10.0 * a[s] + 10.0 * (2.0 * b[s]).tanh() + rng.gen_range(-0.5..0.5)
            });
            (dates[t], v)
        })
        .collect();
    let target = MetricSeries::new("target", Category::Market, points);

    let mut config = ScenarioConfig {
        tune: false,
        ..Default::default()
    };
    config.fra.target_count = 12;
    config.fra.top_k_union = 8;
    config.fra.forest = EnsembleParams::forest(60, Some(10));
    config.fra.boosting = EnsembleParams::boosting(60, Some(3), 0.1);
    config.shapley.permutations = 10;
    config.shapley.explain_rows = 30;
    let run = run_scenario(&corpus, &target, Scenario::new(date(2016, 1, 8), lead), &config, seed)
        .map_err(|e| e.to_string())?;
    let r = run.result;
    let arm = |c: Category| r.arms.get(&c).ok_or_else(|| format!("no {c} arm"));
    let (ab, am) = (arm(Category::OnChainBtc)?, arm(Category::Macro)?);
    Ok((r.mse_diverse, ab.mse, am.mse, ab.improvement_pct, am.improvement_pct))
}

fn diversity_improvement() -> Check {
    let spot = improvement_pct(2.0, 1.0).map_err(|e| e.to_string())?;
    ensure(spot == 100.0, || format!("MSE ratio 2 gave {spot}%"))?;
    let spot2 = improvement_pct(0.9, 0.6).map_err(|e| e.to_string())?;
    ensure((spot2 - 50.0).abs() < 1e-12, || format!("0.9 vs 0.6 gave {spot2}%"))?;

    let mut wins = 0;
    let mut positive = true;
    let mut ratios = Vec::new();
    for seed in 0..20u64 {
        let (div, a, b, pa, pb) = two_category_run(seed)?;
        if div < a && div < b {
            wins += 1;
        }
        positive &= pa > 0.0 && pb > 0.0 || !(div < a && div < b);
        ratios.push(a.min(b) / div);
    }
    ensure(wins >= 19, || format!("diverse vector won {wins}/20 (min single/diverse ratios {ratios:.2?})"))?;
    ensure(positive, || "a winning run reported a non-positive improvement".into())?;
    let median = {
        let mut r = ratios.clone();
        r.sort_by(f64::total_cmp);
        r[10]
    };
    Ok(format!("diverse MSE below both categories in {wins}/20 seeds; median best-single/diverse ratio {median:.2}"))
}

// 8 & 9 -------------------------------------------------------------------

const RUN_CONFIG: &str = r#"
manifest = "data/manifest.toml"
seed = 2024
periods = ["2017-01-01", "2019-01-01"]
windows = [1, 7, 30, 90, 180]

[target]
mcaps = "data/mcaps.csv"

[experiment]
holdout = 0.2
tune = true
cv_folds = 3

[experiment.forest_grid]
candidates = [
  { kind = "random_forest", n_estimators = 20, max_depth = 6, features_per_split = { fraction = 0.333 } },
  { kind = "random_forest", n_estimators = 20, max_depth = 10, features_per_split = { fraction = 0.333 } },
]

[experiment.boosting_grid]
candidates = [
  { kind = "gradient_boost", n_estimators = 30, max_depth = 3, learning_rate = 0.1 },
]

[experiment.fra]
target_count = 100
top_k_union = 75
corr_start = 0.5
corr_step = 0.05

[experiment.fra.forest]
kind = "random_forest"
n_estimators = 20
max_depth = 8

[experiment.fra.boosting]
kind = "gradient_boost"
n_estimators = 30
max_depth = 3

[experiment.shapley]
background_rows = 50
explain_rows = 30
permutations = 20
"#;

fn tree_files(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

fn prepare_workspace() -> Result<Workspace, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let root = dir.path().to_path_buf();
    let synth = generate(&SynthSpec { seed: 8, ..Default::default() }).map_err(|e| e.to_string())?;
    synth.write(&root.join("data")).map_err(|e| e.to_string())?;
    fs::write(root.join("run.toml"), RUN_CONFIG).map_err(|e| e.to_string())?;
    Ok(Workspace { _dir: dir, root })
}

fn run_cli(ws: &Workspace, out: &str, jobs: usize) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_cryptodiv"))
        .args(["run", "--config"])
        .arg(ws.root.join("run.toml"))
        .args(["--out"])
        .arg(ws.root.join(out))
        .args(["--jobs", &jobs.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    ensure(status.status.success(), || {
        format!("run failed: {}", String::from_utf8_lossy(&status.stderr))
    })
}

fn determinism(ws: &Workspace) -> Check {
    run_cli(ws, "out_a", 1)?;
    run_cli(ws, "out_b", 2)?;
    let a = tree_files(&ws.root.join("out_a"));
    let b = tree_files(&ws.root.join("out_b"));
    ensure(!a.is_empty(), || "empty output tree".into())?;
    let names_a: Vec<&PathBuf> = a.keys().collect();
    let names_b: Vec<&PathBuf> = b.keys().collect();
    ensure(names_a == names_b, || "file lists differ".into())?;
    for (k, v) in &a {
        ensure(&b[k] == v, || format!("{} differs", k.display()))?;
    }
    let summary = String::from_utf8_lossy(&a[Path::new("summary.json")]).into_owned();
    let features: serde_json::Value = serde_json::from_str(&summary).map_err(|e| e.to_string())?;
    let cols = features["corpus_columns"].as_u64().unwrap_or(0);
    Ok(format!("{} files byte-identical across two runs (1 vs 2 workers); corpus {cols} columns", a.len()))
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), String> {
    let mut r = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let header = r.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(|e| e.to_string()))
        .collect::<Result<Vec<Vec<String>>, String>>()?;
    Ok((header, rows))
}

fn schema(ws: &Workspace) -> Check {
    let t = ws.root.join("out_a/tables");
    let (h, rows) = read_csv(&t.join("feature_vectors.csv"))?;
    ensure(h == ["scenario", "n_features"], || format!("feature_vectors header {h:?}"))?;
    let ids: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    let expected: Vec<String> = ["2017", "2019"]
        .iter()
        .flat_map(|y| [1, 7, 30, 90, 180].map(|w| format!("{y}_{w}")))
        .collect();
    ensure(ids == expected, || format!("scenarios {ids:?}"))?;
    ensure(rows.iter().all(|r| r[1].parse::<usize>().is_ok_and(|n| n > 0)), || "bad feature counts".into())?;

    for (file, per_group) in [("top5_features.csv", 5usize), ("unique_top20.csv", 20)] {
        let (h, rows) = read_csv(&t.join(file))?;
        ensure(h == ["set", "horizon", "rank", "feature", "importance"], || format!("{file} header {h:?}"))?;
        for set in ["2017", "2019"] {
            for hz in ["short_term", "long_term"] {
                let n = rows.iter().filter(|r| r[0] == set && r[1] == hz).count();
                let ok = if per_group == 5 { n == 5 } else { n <= 20 };
                ensure(ok, || format!("{file}: {n} rows for {set}/{hz}"))?;
            }
        }
    }

    let (h, rows) = read_csv(&t.join("improvement_by_window.csv"))?;
    ensure(h == ["window", "2017", "2019"], || format!("by-window header {h:?}"))?;
    let windows: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    ensure(windows == ["1", "7", "30", "90", "180"], || format!("windows {windows:?}"))?;
    ensure(
        rows.iter().all(|r| r[1..].iter().all(|c| c.parse::<f64>().is_ok())),
        || "non-numeric window improvement".into(),
    )?;

    let (h, rows) = read_csv(&t.join("improvement_by_category.csv"))?;
    ensure(h == ["category", "2017", "2019"], || format!("by-category header {h:?}"))?;
    let labels: Vec<&str> = rows.iter().map(|r| r[0].as_str()).collect();
    let expected_labels = [
        "Macroeconomic Indicators",
        "Sentiment and Interest Metrics",
        "On-chain Metrics (BTC)",
        "Traditional Market Indices",
        "Technical Indicators",
        "On-chain Metrics (USDC)",
    ];
    ensure(labels == expected_labels, || format!("category rows {labels:?}"))?;
    let usdc = &rows[5];
    ensure(usdc[1] == "-" && usdc[2].parse::<f64>().is_ok(), || format!("USDC row {usdc:?}"))?;
    ensure(
        rows[..5].iter().all(|r| r[1..].iter().all(|c| c.parse::<f64>().is_ok())),
        || "missing category improvement".into(),
    )?;
    Ok("five tables match the expected layouts, USDC shows '-' for 2017".into())
}

// ---------------------------------------------------------------------------

fn report(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok(d) if elapsed <= budget => (true, d),
        Ok(d) => (false, format!("{d}; over the {budget:?} budget")),
        Err(e) => (false, e),
    };
    println!(
        "criterion {n} {} {name}: {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    pass
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut ok = true;
    ok &= report(1, "index correctness", Duration::from_secs(1), index_correctness);
    ok &= report(2, "power calibration", Duration::from_secs(10), power_calibration);
    ok &= report(3, "indicator oracles", Duration::from_secs(5), indicator_oracles);
    ok &= report(4, "model sanity", min(1), model_sanity);
    ok &= report(5, "importance axioms", min(2), importance_axioms);
    ok &= report(6, "planted-relevance reduction", min(5), fra_planted);
    ok &= report(7, "diversity improvement", min(10), diversity_improvement);
    let ws = prepare_workspace();
    match &ws {
        Ok(ws) => {
            ok &= report(8, "end-to-end determinism", min(10), || determinism(ws));
            ok &= report(9, "table schemas", Duration::from_secs(5), || schema(ws));
        }
        Err(e) => {
            println!("criterion 8 FAIL end-to-end determinism: workspace setup failed: {e}");
            println!("criterion 9 FAIL table schemas: workspace setup failed: {e}");
            ok = false;
        }
    }
    if !ok {
        std::process::exit(1);
    }
}
