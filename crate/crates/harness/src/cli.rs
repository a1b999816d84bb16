//! Command-line interface. Exit codes: 0 success, 2 usage or parameter
//! validation error, 1 runtime error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use divdecode_core::corpus::{save_scenes, synthesize_world, Corpus, Lexicon};
use divdecode_core::decoders::{decode, CaptionSet, DecodeError, DecodeParams, Method};
use divdecode_core::metrics::Evaluator;
use divdecode_core::models::{train_ngram, NGramModelParams, ScoringModel, TableModel};
use divdecode_core::spice::allspice_from_tuple_file;

use crate::config::SweepConfig;
use crate::plot::{emit_tradeoff_svg, tradeoff_points, Axis};
use crate::report::{evaluate_sets, read_csv, write_csv, Row};
use crate::sweep::{run_sweep, write_outputs, Threads};

#[derive(Debug, Parser)]
#[command(
    name = "divdecode",
    version,
    about = "Diverse caption decoding and set-level evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize a captioning world: corpus.jsonl, scenes.json, lexicon.json.
    GenWorld(GenWorldArgs),
    /// Decode caption sets for every context of a corpus (JSONL output).
    Decode(DecodeArgs),
    /// Score caption sets (or pre-parsed tuple files) into a CSV table.
    Eval(EvalArgs),
    /// Run a parameter sweep from a TOML config or a built-in preset.
    Sweep(SweepArgs),
    /// Render a tradeoff scatter from a metric CSV.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
struct GenWorldArgs {
    #[arg(long, default_value = "world")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 200)]
    contexts: usize,
    #[arg(long, default_value_t = 10)]
    refs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Lexicon JSON; the built-in lexicon when absent.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DecodeArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Strict logit table JSON. Without it an n-gram model is trained on
    /// the corpus.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = NGramModelParams::default().order)]
    order: usize,
    #[arg(long, default_value_t = NGramModelParams::default().add_k)]
    add_k: f64,
    #[arg(long, default_value_t = NGramModelParams::default().beta)]
    beta: f64,
    #[arg(long)]
    method: Method,
    #[arg(long = "temperature", visible_alias = "T", default_value_t = 1.0)]
    temperature: f64,
    #[arg(long = "top-k", visible_alias = "K")]
    top_k: Option<usize>,
    #[arg(long = "top-p", visible_alias = "p")]
    top_p: Option<f64>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, visible_alias = "G")]
    groups: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 5)]
    n_samples: usize,
    #[arg(long, default_value_t = DecodeParams::DEFAULT_MAX_LEN)]
    max_len: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Caption-set JSONL as written by `decode`.
    #[arg(long, conflicts_with = "tuples", required_unless_present = "tuples")]
    captions: Option<PathBuf>,
    #[arg(long, required_unless_present = "tuples")]
    corpus: Option<PathBuf>,
    /// Pre-parsed scene-graph tuple file scored with AllSPICE only.
    #[arg(long)]
    tuples: Option<PathBuf>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    config: Option<PathBuf>,
    /// `default` or `sample-size`.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the config's output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Print the resolved config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Debug, Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    /// self_cider, div1, div2 or mbleu4 (plotted as 1 - mbleu4).
    #[arg(long, default_value = "self_cider")]
    x: Axis,
    /// oracle_cider, avg_cider or allspice.
    #[arg(long, default_value = "oracle_cider")]
    y: Axis,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn runtime(e: impl std::fmt::Display) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<DecodeError> for Failure {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::InvalidParams(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let outcome = match cli.command {
        Command::GenWorld(a) => gen_world(a),
        Command::Decode(a) => decode_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Plot(a) => plot_cmd(a),
    };
    match outcome {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            1
        }
    }
}

fn load_lexicon(path: Option<&Path>) -> Result<Lexicon, Failure> {
    match path {
        Some(p) => Lexicon::load(p).map_err(Failure::runtime),
        None => Ok(Lexicon::builtin()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

/// Opens `path` for writing, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let file =
                File::create(p).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display())))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout()))),
    }
}

fn gen_world(a: GenWorldArgs) -> Result<(), Failure> {
    let lexicon = load_lexicon(a.lexicon.as_deref())?;
    let world = synthesize_world(&lexicon, a.contexts, a.refs, a.seed)
        .map_err(|e| Failure::Usage(e.to_string()))?;
    fs::create_dir_all(&a.out_dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", a.out_dir.display())))?;
    world
        .corpus
        .save(a.out_dir.join("corpus.jsonl"))
        .map_err(Failure::runtime)?;
    save_scenes(&world.scenes, a.out_dir.join("scenes.json")).map_err(Failure::runtime)?;
    write_text(&a.out_dir.join("lexicon.json"), &lexicon.to_json())?;
    eprintln!(
        "wrote {} contexts to {}",
        world.corpus.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn decode_cmd(a: DecodeArgs) -> Result<(), Failure> {
    let params = DecodeParams {
        method: a.method,
        temperature: a.temperature,
        top_k: a.top_k,
        top_p: a.top_p,
        m: a.m,
        groups: a.groups,
        lambda: a.lambda,
        n_samples: if a.method.is_sampling() {
            a.n_samples
        } else {
            a.m.unwrap_or(1)
        },
        max_len: a.max_len,
        seed: a.seed,
    };
    params.validate()?;
    let corpus_path = a
        .corpus
        .ok_or_else(|| Failure::Usage("decode needs --corpus".into()))?;
    let corpus = Corpus::load(&corpus_path).map_err(Failure::runtime)?;
    let model: Box<dyn ScoringModel> = match &a.table {
        Some(path) => Box::new(TableModel::load(path).map_err(Failure::runtime)?),
        None => {
            let p = NGramModelParams {
                order: a.order,
                add_k: a.add_k,
                beta: a.beta,
            };
            p.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            Box::new(train_ngram(&corpus, p).map_err(Failure::runtime)?)
        }
    };
    let sets = decode(model.as_ref(), &corpus, &params)?;
    let mut out = sink(a.out.as_deref())?;
    for set in &sets {
        let line = serde_json::to_string(set).map_err(Failure::runtime)?;
        writeln!(out, "{line}").map_err(Failure::runtime)?;
    }
    out.flush().map_err(Failure::runtime)
}

fn read_caption_sets(path: &Path) -> Result<Vec<CaptionSet>, Failure> {
    let file =
        File::open(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut sets = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let set: CaptionSet = serde_json::from_str(&line)
            .map_err(|e| Failure::Runtime(format!("{}: line {}: {e}", path.display(), i + 1)))?;
        sets.push(set);
    }
    Ok(sets)
}

fn eval_cmd(a: EvalArgs) -> Result<(), Failure> {
    let lexicon = load_lexicon(a.lexicon.as_deref())?;
    let mut out = sink(a.out.as_deref())?;
    if let Some(tuples) = &a.tuples {
        let scores = allspice_from_tuple_file(tuples, a.lexicon.as_ref().map(|_| &lexicon))
            .map_err(Failure::runtime)?;
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "context_id",
            "precision",
            "recall",
            "f1",
            "matched",
            "n_candidate",
            "n_reference",
        ])
        .map_err(Failure::runtime)?;
        for (id, s) in scores {
            w.write_record([
                id,
                s.precision.to_string(),
                s.recall.to_string(),
                s.f1.to_string(),
                s.matched.to_string(),
                s.n_candidate.to_string(),
                s.n_reference.to_string(),
            ])
            .map_err(Failure::runtime)?;
        }
        w.flush().map_err(Failure::runtime)?;
        drop(w);
        return out.flush().map_err(Failure::runtime);
    }
    let (Some(captions), Some(corpus)) = (a.captions, a.corpus) else {
        return Err(Failure::Usage(
            "eval needs --captions and --corpus, or --tuples".into(),
        ));
    };
    let corpus = Corpus::load(&corpus).map_err(Failure::runtime)?;
    let sets = read_caption_sets(&captions)?;
    let evaluator = Evaluator::new(&corpus, &lexicon);
    // Group by decode parameters, keeping first-appearance order.
    let mut groups: Vec<(DecodeParams, Vec<CaptionSet>)> = Vec::new();
    for set in sets {
        match groups.iter_mut().find(|(p, _)| *p == set.params) {
            Some((_, v)) => v.push(set),
            None => groups.push((set.params.clone(), vec![set])),
        }
    }
    let rows: Vec<Row> = groups
        .iter()
        .flat_map(|(p, sets)| evaluate_sets(p, sets, &corpus, &evaluator))
        .collect();
    write_csv(&rows, &mut out).map_err(Failure::runtime)?;
    out.flush().map_err(Failure::runtime)
}

fn sweep_cmd(a: SweepArgs) -> Result<(), Failure> {
    let mut config = match (&a.config, &a.preset) {
        (Some(path), _) => SweepConfig::load(path).map_err(|e| {
            if e.is_usage() {
                Failure::Usage(e.to_string())
            } else {
                Failure::Runtime(e.to_string())
            }
        })?,
        (None, Some(name)) => SweepConfig::preset(name).ok_or_else(|| {
            Failure::Usage(format!("unknown preset {name:?} (default, sample-size)"))
        })?,
        (None, None) => return Err(Failure::Usage("sweep needs --config or --preset".into())),
    };
    if let Some(dir) = a.output_dir {
        config.output_dir = dir;
    }
    if a.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    let threads = Threads::from_env().map_err(Failure::Usage)?;
    let output = run_sweep(&config, threads).map_err(|e| {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    })?;
    for path in write_outputs(&output.rows, &config.output_dir).map_err(Failure::runtime)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn plot_cmd(a: PlotArgs) -> Result<(), Failure> {
    let file =
        File::open(&a.csv).map_err(|e| Failure::Runtime(format!("{}: {e}", a.csv.display())))?;
    let rows = read_csv(file).map_err(|e| Failure::Runtime(format!("{}: {e}", a.csv.display())))?;
    let points = tradeoff_points(&rows, a.x, a.y);
    emit_tradeoff_svg(&points, a.x.label(), a.y.label(), &a.out).map_err(Failure::runtime)
}
