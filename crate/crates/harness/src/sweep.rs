//! Grid execution: decode every context at every grid point, score, and
//! assemble rows in canonical order (grid point, then context id).

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use divdecode_core::corpus::{
    synthesize_world, Caption, Corpus, CorpusError, Lexicon, LexiconError, WorldError,
};
use divdecode_core::decoders::{decode_context, CaptionSet, DecodeParams};
use divdecode_core::metrics::{Evaluator, MetricReport};
use divdecode_core::models::{train_ngram, ModelError, ScoringModel, TableModel};
use rayon::prelude::*;

use crate::config::{ConfigError, ModelSpec, SweepConfig};
use crate::plot::{emit_tradeoff_svg, tradeoff_points, Axis, PlotError};
use crate::report::{aggregate, error_row, write_csv, Row, AGGREGATE_ID};

pub const THREADS_ENV: &str = "DIVDECODE_THREADS";
pub const RESULTS_FILE: &str = "results.csv";
/// Plots written next to the CSV: (file, x axis, y axis).
pub const PLOTS: [(&str, Axis, Axis); 2] = [
    (
        "tradeoff_oracle_cider.svg",
        Axis::SelfCider,
        Axis::OracleCider,
    ),
    ("tradeoff_allspice.svg", Axis::SelfCider, Axis::Allspice),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Threads {
    Serial,
    /// Rayon's global pool.
    Default,
    Fixed(usize),
}

impl Threads {
    /// Reads `DIVDECODE_THREADS`: unset uses the default pool, `0` runs
    /// serially, `n` caps the pool at `n` workers.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(THREADS_ENV) {
            Err(_) => Ok(Threads::Default),
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(0) => Ok(Threads::Serial),
                Ok(n) => Ok(Threads::Fixed(n)),
                Err(_) => Err(format!(
                    "{THREADS_ENV} must be a non-negative integer, got {v:?}"
                )),
            },
        }
    }

    /// Maps `f` over `items`, preserving order whatever the scheduling.
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Result<Vec<R>, SweepError>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            Threads::Serial => Ok(items.iter().map(f).collect()),
            Threads::Default => Ok(items.par_iter().map(f).collect()),
            Threads::Fixed(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| SweepError::Threads(e.to_string()))?;
                Ok(pool.install(|| items.par_iter().map(f).collect()))
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {message}")]
    Output { path: String, message: String },
    #[error("worker pool: {0}")]
    Threads(String),
}

impl SweepError {
    pub fn is_usage(&self) -> bool {
        match self {
            SweepError::Config(e) => e.is_usage(),
            SweepError::Model(ModelError::InvalidParams(_)) => true,
            _ => false,
        }
    }
}

/// Corpus, lexicon and scoring model a sweep runs against.
pub struct Setup {
    pub corpus: Corpus,
    pub lexicon: Lexicon,
    pub model: Box<dyn ScoringModel>,
}

impl Setup {
    pub fn from_config(config: &SweepConfig) -> Result<Self, SweepError> {
        let lexicon = match &config.lexicon {
            Some(path) => Lexicon::load(path)?,
            None => Lexicon::builtin(),
        };
        let corpus = match &config.corpus {
            Some(path) => Corpus::load(path)?,
            None => {
                let w = config.world;
                synthesize_world(&lexicon, w.contexts, w.refs_per_context, w.seed)?.corpus
            }
        };
        let model: Box<dyn ScoringModel> = match &config.model {
            ModelSpec::Ngram(spec) => Box::new(train_ngram(&corpus, (*spec).into())?),
            ModelSpec::Table { path } => Box::new(TableModel::load(path)?),
        };
        Ok(Setup {
            corpus,
            lexicon,
            model,
        })
    }
}

pub struct SweepOutput {
    pub points: Vec<DecodeParams>,
    pub rows: Vec<Row>,
}

type Outcome = Result<(CaptionSet, MetricReport), String>;

/// Runs every grid point over every context of the setup's corpus.
pub fn run_grid(
    setup: &Setup,
    points: &[DecodeParams],
    threads: Threads,
) -> Result<Vec<Row>, SweepError> {
    let evaluator = Evaluator::new(&setup.corpus, &setup.lexicon);
    let ids: Vec<&str> = setup.corpus.context_ids().collect();
    let items: Vec<(usize, &str)> = (0..points.len())
        .flat_map(|p| ids.iter().map(move |&id| (p, id)))
        .collect();
    let outcomes: Vec<Outcome> = threads.map(&items, |&(p, id)| {
        let set = decode_context(setup.model.as_ref(), id, &points[p])
            .map_err(|e| format!("{id}: {e}"))?;
        let refs = &setup.corpus.context(id).expect("id from corpus").eval_refs;
        let report = evaluator
            .evaluate(&set.captions, refs)
            .map_err(|e| format!("{id}: {e}"))?;
        Ok((set, report))
    })?;

    let mut rows = Vec::with_capacity(items.len() + points.len());
    for (params, chunk) in points.iter().zip(outcomes.chunks(ids.len().max(1))) {
        if let Some(Err(message)) = chunk.iter().find(|o| o.is_err()) {
            rows.push(error_row(params, message));
            continue;
        }
        let done: Vec<&(CaptionSet, MetricReport)> = chunk.iter().flatten().collect();
        for (set, report) in &done {
            rows.push(Row {
                params: params.clone(),
                context_id: set.context_id.clone(),
                report: Some(report.clone()),
            });
        }
        let reports: Vec<MetricReport> = done.iter().map(|(_, r)| r.clone()).collect();
        let captions: Vec<&Caption> = done.iter().flat_map(|(s, _)| &s.captions).collect();
        rows.push(Row {
            params: params.clone(),
            context_id: AGGREGATE_ID.into(),
            report: Some(aggregate(&reports, &captions, &evaluator)),
        });
    }
    Ok(rows)
}

/// Expands the grid, reports its size on stderr, and runs it.
pub fn run_sweep(config: &SweepConfig, threads: Threads) -> Result<SweepOutput, SweepError> {
    let points = config.expand()?;
    let setup = Setup::from_config(config)?;
    eprintln!(
        "sweep: {} grid points x {} contexts = {} decode jobs",
        points.len(),
        setup.corpus.len(),
        points.len() * setup.corpus.len()
    );
    let rows = run_grid(&setup, &points, threads)?;
    Ok(SweepOutput { points, rows })
}

fn output_error(path: &Path, e: impl ToString) -> SweepError {
    SweepError::Output {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// Writes `results.csv` and the tradeoff plots into `dir`. Returns the
/// paths written. A plot with no plottable point is skipped.
pub fn write_outputs(rows: &[Row], dir: &Path) -> Result<Vec<PathBuf>, SweepError> {
    fs::create_dir_all(dir).map_err(|e| output_error(dir, e))?;
    let csv_path = dir.join(RESULTS_FILE);
    let file = File::create(&csv_path).map_err(|e| output_error(&csv_path, e))?;
    write_csv(rows, BufWriter::new(file)).map_err(|e| output_error(&csv_path, e))?;
    let mut written = vec![csv_path];
    for (name, x, y) in PLOTS {
        let points = tradeoff_points(rows, x, y);
        if points.is_empty() {
            eprintln!("skipping {name}: no plottable points");
            continue;
        }
        let path = dir.join(name);
        emit_tradeoff_svg(&points, x.label(), y.label(), &path)?;
        written.push(path);
    }
    Ok(written)
}
