//! Metric rows, corpus aggregates and the CSV table.

use std::io::{Read, Write};

use divdecode_core::corpus::{Caption, Corpus};
use divdecode_core::decoders::{CaptionSet, DecodeParams, Method};
use divdecode_core::metrics::{vocab_size, Evaluator, MetricReport};

pub const CSV_COLUMNS: [&str; 18] = [
    "method",
    "T",
    "K",
    "p",
    "m",
    "G",
    "lambda",
    "n_samples",
    "context_id",
    "avg_cider",
    "oracle_cider",
    "mbleu4",
    "div1",
    "div2",
    "self_cider",
    "allspice",
    "vocab_size",
    "pct_novel",
];

pub const AGGREGATE_ID: &str = "ALL";
pub const ERROR_ID: &str = "ERROR";

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub params: DecodeParams,
    pub context_id: String,
    /// `None` on an error row.
    pub report: Option<MetricReport>,
}

impl Row {
    pub fn is_aggregate(&self) -> bool {
        self.context_id == AGGREGATE_ID
    }
}

/// Arithmetic mean of the per-context reports. `vocab_size` and `pct_novel`
/// are not averaged: they are recomputed over every caption of the grid
/// point. Optional columns average over the contexts that have a value.
pub fn aggregate(
    reports: &[MetricReport],
    captions: &[&Caption],
    evaluator: &Evaluator,
) -> MetricReport {
    let n = reports.len().max(1) as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    let mean_opt = |f: fn(&MetricReport) -> Option<f64>| {
        let values: Vec<f64> = reports.iter().filter_map(f).collect();
        (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
    };
    MetricReport {
        avg_cider: mean(|r| r.avg_cider),
        oracle_cider: mean(|r| r.oracle_cider),
        mbleu4: mean_opt(|r| r.mbleu4),
        div1: mean(|r| r.div1),
        div2: mean(|r| r.div2),
        self_cider: mean_opt(|r| r.self_cider),
        allspice: mean(|r| r.allspice),
        vocab_size: vocab_size(captions.iter().copied()),
        pct_novel: evaluator.novelty().pct_novel(captions.iter().copied()),
    }
}

/// Scores one grid point's caption sets against the eval references:
/// one row per set, in the given order, then the aggregate row.
pub fn evaluate_sets(
    params: &DecodeParams,
    sets: &[CaptionSet],
    corpus: &Corpus,
    evaluator: &Evaluator,
) -> Vec<Row> {
    let mut rows = Vec::with_capacity(sets.len() + 1);
    let mut reports = Vec::with_capacity(sets.len());
    for set in sets {
        let outcome = match corpus.context(&set.context_id) {
            Some(refs) => evaluator
                .evaluate(&set.captions, &refs.eval_refs)
                .map_err(|e| format!("{}: {e}", set.context_id)),
            None => Err(format!("{}: context not in corpus", set.context_id)),
        };
        match outcome {
            Ok(report) => {
                reports.push(report.clone());
                rows.push(Row {
                    params: params.clone(),
                    context_id: set.context_id.clone(),
                    report: Some(report),
                });
            }
            Err(message) => return vec![error_row(params, &message)],
        }
    }
    let captions: Vec<&Caption> = sets.iter().flat_map(|s| &s.captions).collect();
    rows.push(Row {
        params: params.clone(),
        context_id: AGGREGATE_ID.into(),
        report: Some(aggregate(&reports, &captions, evaluator)),
    });
    rows
}

pub fn error_row(params: &DecodeParams, message: &str) -> Row {
    eprintln!("grid point {} failed: {message}", config_id(params));
    Row {
        params: params.clone(),
        context_id: ERROR_ID.into(),
        report: None,
    }
}

/// Short human-readable label of a grid point.
pub fn config_id(p: &DecodeParams) -> String {
    let mut id = format!("{} T={}", p.method, p.temperature);
    for (name, value) in [
        ("K", p.top_k.map(|v| v.to_string())),
        ("p", p.top_p.map(|v| v.to_string())),
        ("m", p.m.map(|v| v.to_string())),
        ("G", p.groups.map(|v| v.to_string())),
        ("lambda", p.lambda.map(|v| v.to_string())),
    ] {
        if let Some(v) = value {
            id.push_str(&format!(" {name}={v}"));
        }
    }
    if p.method.is_sampling() {
        id.push_str(&format!(" n={}", p.n_samples));
    }
    id
}

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn record(row: &Row) -> Vec<String> {
    let p = &row.params;
    let mut out = vec![
        p.method.to_string(),
        p.temperature.to_string(),
        cell(p.top_k),
        cell(p.top_p),
        cell(p.m),
        cell(p.groups),
        cell(p.lambda),
        p.n_samples.to_string(),
        row.context_id.clone(),
    ];
    match &row.report {
        Some(r) => out.extend([
            r.avg_cider.to_string(),
            r.oracle_cider.to_string(),
            cell(r.mbleu4),
            r.div1.to_string(),
            r.div2.to_string(),
            cell(r.self_cider),
            r.allspice.to_string(),
            r.vocab_size.to_string(),
            r.pct_novel.to_string(),
        ]),
        None => out.extend(std::iter::repeat_n(String::new(), 9)),
    }
    out
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_COLUMNS)?;
    for row in rows {
        writer.write_record(record(row))?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum CsvReadError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("header does not match the metric table columns")]
    Header,
    #[error("line {line}: {message}")]
    Value { line: u64, message: String },
}

fn parse_opt<T: std::str::FromStr>(
    s: &str,
    line: u64,
    name: &str,
) -> Result<Option<T>, CsvReadError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| CsvReadError::Value {
        line,
        message: format!("bad {name} value {s:?}"),
    })
}

fn parse_req<T: std::str::FromStr>(s: &str, line: u64, name: &str) -> Result<T, CsvReadError> {
    parse_opt(s, line, name)?.ok_or_else(|| CsvReadError::Value {
        line,
        message: format!("missing {name}"),
    })
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: Read>(input: R) -> Result<Vec<Row>, CsvReadError> {
    let mut reader = csv::Reader::from_reader(input);
    if reader.headers()? != CSV_COLUMNS.as_slice() {
        return Err(CsvReadError::Header);
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let line = r.position().map(|p| p.line()).unwrap_or(0);
        let f = |i: usize| r.get(i).unwrap_or("");
        let method: Method = f(0).parse().map_err(|_| CsvReadError::Value {
            line,
            message: format!("bad method {:?}", f(0)),
        })?;
        let params = DecodeParams {
            method,
            temperature: parse_req(f(1), line, "T")?,
            top_k: parse_opt(f(2), line, "K")?,
            top_p: parse_opt(f(3), line, "p")?,
            m: parse_opt(f(4), line, "m")?,
            groups: parse_opt(f(5), line, "G")?,
            lambda: parse_opt(f(6), line, "lambda")?,
            n_samples: parse_req(f(7), line, "n_samples")?,
            max_len: DecodeParams::DEFAULT_MAX_LEN,
            seed: 0,
        };
        let context_id = f(8).to_string();
        let report = if f(9).is_empty() {
            None
        } else {
            Some(MetricReport {
                avg_cider: parse_req(f(9), line, "avg_cider")?,
                oracle_cider: parse_req(f(10), line, "oracle_cider")?,
                mbleu4: parse_opt(f(11), line, "mbleu4")?,
                div1: parse_req(f(12), line, "div1")?,
                div2: parse_req(f(13), line, "div2")?,
                self_cider: parse_opt(f(14), line, "self_cider")?,
                allspice: parse_req(f(15), line, "allspice")?,
                vocab_size: parse_req(f(16), line, "vocab_size")?,
                pct_novel: parse_req(f(17), line, "pct_novel")?,
            })
        };
        rows.push(Row {
            params,
            context_id,
            report,
        });
    }
    Ok(rows)
}
