//! Full experiment run: load and clean the corpus, derive indicators, build
//! the target, then run every (period, window) scenario.

use rayon::prelude::*;

use crate::config::RunConfig;
use crate::data::{clean_corpus, load_corpus, AlignedCorpus, Category, DropLog, MetricSeries, Scenario};
use crate::error::{Error, Result, StageExt};
use crate::experiments::{run_scenario, ScenarioRun};
use crate::index::{index_as_metric, index_series, read_mcaps_file};

/// Name of the target series when it is computed from market caps.
pub const INDEX_METRIC: &str = "crypto100";

/// Cleaned corpus with indicators, ready for slicing.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub corpus: AlignedCorpus,
    pub dropped: DropLog,
    pub indicators_added: usize,
    pub target: MetricSeries,
}

/// Load, clean and extend the corpus and resolve the target series.
///
/// Indicators are computed on the whole cleaned history before any period
/// is sliced, so long windows are already warmed up at the period start.
pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let raw = load_corpus(&config.manifest).stage("load")?;
    let (mut corpus, dropped) = clean_corpus(&raw, &config.clean);
    let indicators_added = config.indicators.apply(&mut corpus).stage("indicators")?;
    let target = match (&config.target.metric, &config.target.mcaps) {
        (Some(name), _) => {
            let series = raw
                .get(name)
                .ok_or_else(|| Error::Config(format!("target metric `{name}` is not in the corpus")))?;
            if series.category != Category::Market {
                return Err(Error::Config(format!("target metric `{name}` must be tagged `market`")));
            }
            crate::data::interpolate_fill(&crate::data::dedupe(series))
        }
        (None, Some(path)) => {
            let snaps = read_mcaps_file(path).stage("index")?;
            index_as_metric(&index_series(&snaps, &config.index).stage("index")?, INDEX_METRIC)
        }
        (None, None) => return Err(Error::Config("no target configured".into())),
    };
    Ok(Prepared {
        corpus,
        dropped,
        indicators_added,
        target,
    })
}

/// Scenarios in period-major order.
pub fn scenarios(config: &RunConfig) -> Vec<Scenario> {
    config
        .periods
        .iter()
        .flat_map(|&p| config.windows.iter().map(move |&w| Scenario::new(p, w)))
        .collect()
}

/// Run every scenario. Scenarios are independent and run in parallel;
/// results come back in [`scenarios`] order.
pub fn run_all(config: &RunConfig, prepared: &Prepared) -> Result<Vec<ScenarioRun>> {
    let work = || {
        scenarios(config)
            .into_par_iter()
            .map(|s| {
                run_scenario(&prepared.corpus, &prepared.target, s, &config.experiment, config.seed).map_err(|e| {
                    Error::Scenario {
                        id: s.id(),
                        source: Box::new(e),
                    }
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    match config.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}
