//! Command-line interface. Flags given on the command line take precedence
//! over the config file, which takes precedence over built-in defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::RunConfig;
use crate::data::{chronological_split, make_target, slice_period, Dataset, Scenario};
use crate::error::{Error, Result};
use crate::fra::{fra_reduce, FraConfig};
use crate::importance::{background_rows, mdi, pearson_report, pfi, shapley_sampled, ImportanceReport};
use crate::index::{
    calibrate_power, index_series, read_mcaps_file, read_reference, write_calibration_csv, write_index_csv,
    IndexParams, DEFAULT_CANDIDATE_POWERS,
};
use crate::models::EnsembleParams;
use crate::pipeline::{prepare, run_all};
use crate::report::{load_results, render_tables, run_files, write_files_atomic, write_tree_atomic};
use crate::rng::derive;

#[derive(Debug, Parser)]
#[command(name = "cryptodiv", version, about = "Crypto index, feature reduction and data-diversity experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute the daily market-cap index, optionally calibrating its power.
    Index(IndexArgs),
    /// Run every configured scenario and write the full result tree.
    Run(RunArgs),
    /// Write the training split of one scenario as a dataset CSV.
    Prepare(PrepareArgs),
    /// Run feature reduction on a prepared dataset.
    Fra(FraArgs),
    /// Rank the features of a prepared dataset by one importance method.
    Importance(ImportanceArgs),
    /// Re-render report tables from stored scenario results.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct IndexArgs {
    /// Long-format CSV `date,asset,market_cap_usd`.
    #[arg(long)]
    pub mcaps: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub power: u32,
    #[arg(long, default_value_t = 100)]
    pub top_n: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Choose the power that best matches `--reference`.
    #[arg(long, requires = "reference")]
    pub calibrate: bool,
    /// Reference index CSV `date,value`.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Candidate powers for calibration.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<u32>>,
    /// Where to write the calibration table (default: next to `--out`).
    #[arg(long)]
    pub calibration_out: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct Overrides {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated period starts, `YYYY-MM-DD` or a bare year.
    #[arg(long, value_delimiter = ',', value_parser = parse_period)]
    pub periods: Option<Vec<NaiveDate>>,
    #[arg(long, value_delimiter = ',')]
    pub windows: Option<Vec<u32>>,
    #[arg(long)]
    pub target_features: Option<usize>,
    #[arg(long)]
    pub corr_start: Option<f64>,
    #[arg(long)]
    pub corr_step: Option<f64>,
    /// Features taken from each ranking into the final vector.
    #[arg(long)]
    pub top_k: Option<usize>,
    #[arg(long)]
    pub power: Option<u32>,
    #[arg(long)]
    pub holdout: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.jobs {
            cfg.jobs = Some(v);
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.periods {
            cfg.periods = v.clone();
        }
        if let Some(v) = &self.windows {
            cfg.windows = v.clone();
        }
        if let Some(v) = self.target_features {
            cfg.experiment.fra.target_count = v;
        }
        if let Some(v) = self.corr_start {
            cfg.experiment.fra.corr_start = v;
        }
        if let Some(v) = self.corr_step {
            cfg.experiment.fra.corr_step = v;
        }
        if let Some(v) = self.top_k {
            cfg.experiment.fra.top_k_union = v;
        }
        if let Some(v) = self.power {
            cfg.index.power = v;
        }
        if let Some(v) = self.holdout {
            cfg.experiment.holdout = v;
        }
    }
}

fn parse_period(s: &str) -> std::result::Result<NaiveDate, String> {
    if let Ok(y) = s.parse::<i32>() {
        return NaiveDate::from_ymd_opt(y, 1, 1).ok_or_else(|| format!("bad year {s}"));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("bad date {s}: {e}"))
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub overrides: Overrides,
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Scenario id, `<year>_<window>`.
    #[arg(long)]
    pub scenario: String,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub power: Option<u32>,
}

#[derive(Debug, Args)]
pub struct FraArgs {
    /// Dataset CSV with a target column.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Take reduction and model settings from this run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub target_features: Option<usize>,
    #[arg(long)]
    pub corr_start: Option<f64>,
    #[arg(long)]
    pub corr_step: Option<f64>,
    #[arg(long)]
    pub top_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pearson,
    Mdi,
    Pfi,
    Shapley,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Forest,
    Boosting,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, value_enum, default_value = "forest")]
    pub model: ModelArg,
    /// Take model settings from this run config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Shuffles per feature for permutation importance.
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 50)]
    pub permutations: usize,
    #[arg(long, default_value_t = 100)]
    pub background: usize,
    #[arg(long, default_value_t = 50)]
    pub explain: usize,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory holding `scenarios/*.json`.
    #[arg(long)]
    pub results: PathBuf,
    /// Output directory (default: the run directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse the process arguments and run. Errors are printed to stderr.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index(a) => cmd_index(a),
        Command::Run(a) => cmd_run(a),
        Command::Prepare(a) => cmd_prepare(a),
        Command::Fra(a) => cmd_fra(a),
        Command::Importance(a) => cmd_importance(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn create(path: &Path) -> Result<fs::File> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path).map_err(|e| Error::io(path, e))
}

fn cmd_index(a: IndexArgs) -> Result<()> {
    let snaps = read_mcaps_file(&a.mcaps)?;
    let mut params = IndexParams {
        top_n: a.top_n,
        power: a.power,
    };
    if a.calibrate {
        let reference_path = a.reference.as_ref().expect("clap enforces --reference");
        let reference = read_reference(reference_path)?;
        let sums: Vec<(NaiveDate, f64)> = index_series(&snaps, &params)?
            .into_iter()
            .map(|r| (r.date, r.sum_mcap))
            .collect();
        let candidates = a.candidates.clone().unwrap_or_else(|| DEFAULT_CANDIDATE_POWERS.to_vec());
        let cal = calibrate_power(&sums, &reference, &candidates)?;
        let cal_path = a
            .calibration_out
            .clone()
            .unwrap_or_else(|| a.out.with_file_name(format!("{}_calibration.csv", stem(&a.out))));
        write_calibration_csv(&cal, create(&cal_path)?)?;
        println!("calibrated power: {} (mean abs log error {:e})", cal.power, cal.fit.iter().find(|f| f.0 == cal.power).map_or(f64::NAN, |f| f.1));
        params.power = cal.power;
    }
    let rows = index_series(&snaps, &params)?;
    write_index_csv(&rows, create(&a.out)?)?;
    println!("wrote {} index rows to {}", rows.len(), a.out.display());
    Ok(())
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or("index".into(), |s| s.to_string_lossy().into_owned())
}

fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let cfg = load_config(&a.config, &a.overrides)?;
    let prepared = prepare(&cfg)?;
    eprintln!(
        "corpus: {} columns ({} dropped while cleaning, {} indicators added)",
        prepared.corpus.columns.len(),
        prepared.dropped.len(),
        prepared.indicators_added
    );
    let runs = run_all(&cfg, &prepared)?;
    let files = run_files(&cfg, &prepared, &runs)?;
    write_tree_atomic(&cfg.out, &files)?;
    for r in &runs {
        eprintln!(
            "{}: {} features, mean improvement {:.2}%",
            r.result.id,
            r.result.final_features.len(),
            r.result.mean_improvement
        );
    }
    println!("wrote {} scenarios to {}", runs.len(), cfg.out.display());
    Ok(())
}

fn parse_scenario_id(id: &str) -> Result<(i32, u32)> {
    let bad = || Error::invalid(format!("scenario id `{id}` is not `<year>_<window>`"));
    let (y, w) = id.split_once('_').ok_or_else(bad)?;
    Ok((y.parse().map_err(|_| bad())?, w.parse().map_err(|_| bad())?))
}

fn cmd_prepare(a: PrepareArgs) -> Result<()> {
    let overrides = Overrides {
        holdout: a.holdout,
        power: a.power,
        ..Default::default()
    };
    let cfg = load_config(&a.config, &overrides)?;
    let (year, window) = parse_scenario_id(&a.scenario)?;
    let period = cfg
        .periods
        .iter()
        .copied()
        .find(|p| chrono::Datelike::year(p) == year)
        .ok_or_else(|| Error::invalid(format!("no configured period starts in {year}")))?;
    let prepared = prepare(&cfg)?;
    let (sliced, _) = slice_period(&prepared.corpus, &Scenario::new(period, window))?;
    let data = make_target(&sliced, &prepared.target, window)?;
    let (train, _) = chronological_split(&data, cfg.experiment.holdout)?;
    train.write_csv(create(&a.out)?)?;
    println!(
        "wrote {} rows x {} features to {}",
        train.n_rows(),
        train.n_features(),
        a.out.display()
    );
    Ok(())
}

fn read_dataset(path: &Path) -> Result<Dataset> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::read_csv(f, None).map_err(|e| match e {
        Error::Parse { message, .. } => Error::parse(path, message),
        other => other,
    })
}

fn cmd_fra(a: FraArgs) -> Result<()> {
    let data = read_dataset(&a.dataset)?;
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?.experiment.fra,
        None => FraConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.target_features {
        cfg.target_count = v;
        cfg.top_k_union = cfg.top_k_union.min(v);
    }
    if let Some(v) = a.corr_start {
        cfg.corr_start = v;
    }
    if let Some(v) = a.corr_step {
        cfg.corr_step = v;
    }
    if let Some(v) = a.top_k {
        cfg.top_k_union = v;
    }
    let reduced = fra_reduce(&data, &cfg)?;

    let mut survivors = csv::Writer::from_writer(Vec::new());
    survivors.write_record(["rank", "feature", "mean_rank", "abs_corr"])?;
    for (i, (f, m)) in reduced.survivors.iter().zip(&reduced.mean_ranks).enumerate() {
        survivors.write_record([(i + 1).to_string(), f.clone(), m.to_string(), reduced.abs_corr[f].to_string()])?;
    }
    let files = vec![
        (PathBuf::from("audit.json"), format!("{}\n", reduced.audit_json()?).into_bytes()),
        (
            PathBuf::from("survivors.csv"),
            survivors.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?,
        ),
    ];
    write_tree_atomic(&a.out, &files)?;
    println!(
        "{} -> {} features in {} iterations{}",
        reduced.initial.len(),
        reduced.survivors.len(),
        reduced.iterations,
        if reduced.forced_stop { " (stopped at the iteration cap)" } else { "" }
    );
    Ok(())
}

fn cmd_importance(a: ImportanceArgs) -> Result<()> {
    let data = read_dataset(&a.dataset)?;
    let x = data.to_matrix();
    let y = data.target()?;
    let fra = match &a.config {
        Some(p) => RunConfig::load(p)?.experiment.fra,
        None => FraConfig::default(),
    };
    let (params, label): (EnsembleParams, &str) = match a.model {
        ModelArg::Forest => (fra.forest, "random_forest"),
        ModelArg::Boosting => (fra.boosting, "gradient_boost"),
    };
    let fit = || params.fit(&x, y, derive(a.seed, &[1]));
    let report: ImportanceReport = match a.method {
        MethodArg::Pearson => pearson_report(&x, y)?,
        MethodArg::Mdi => mdi(&fit()?)?.with_model(label),
        MethodArg::Pfi => pfi(&fit()?, &x, y, a.repeats, derive(a.seed, &[2]))?.with_model(label),
        MethodArg::Shapley => {
            let model = fit()?;
            let bg = x.take_rows(&background_rows(x.n_rows(), a.background, derive(a.seed, &[3])));
            let ex = x.take_rows(&background_rows(x.n_rows(), a.explain, derive(a.seed, &[4])));
            shapley_sampled(&model, &bg, &ex, a.permutations, derive(a.seed, &[5]))?
                .report
                .with_model(label)
        }
    };
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    write_files_atomic(
        a.out.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new(".")),
        &[(PathBuf::from(a.out.file_name().ok_or_else(|| Error::invalid("--out needs a file name"))?), buf)],
    )?;
    println!("ranked {} features; top: {}", report.len(), report.top(5).join(", "));
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    let results = load_results(&a.results)?;
    let out = a.out.unwrap_or_else(|| a.results.clone());
    write_files_atomic(&out, &render_tables(&results)?)?;
    println!("rendered tables for {} scenarios into {}", results.len(), out.display());
    Ok(())
}
