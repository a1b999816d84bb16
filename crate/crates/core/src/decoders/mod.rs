//! Caption decoders: naive sampling, top-K, top-p, beam search and diverse
//! beam search, all driven by temperature-adjusted next-token scores.

mod beam;
mod sampling;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Caption, Corpus};
use crate::models::{ModelError, ScoringModel};
use crate::rng::stable_hash;

pub use beam::{beam_search, diverse_beam_search};
pub use sampling::{
    naive_step, sample_naive, sample_topk, sample_topp, top_k_step, top_p_step, truncate_top_k,
    truncate_top_p,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sp,
    Topk,
    Topp,
    Bs,
    Dbs,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sp => "sp",
            Method::Topk => "topk",
            Method::Topp => "topp",
            Method::Bs => "bs",
            Method::Dbs => "dbs",
        }
    }

    pub fn is_sampling(self) -> bool {
        matches!(self, Method::Sp | Method::Topk | Method::Topp)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = DecodeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sp" => Ok(Method::Sp),
            "topk" => Ok(Method::Topk),
            "topp" => Ok(Method::Topp),
            "bs" => Ok(Method::Bs),
            "dbs" => Ok(Method::Dbs),
            other => Err(DecodeError::InvalidParams(format!(
                "unknown method {other:?}"
            ))),
        }
    }
}

/// Decoding configuration. Fields that a method does not use are `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub method: Method,
    #[serde(rename = "T")]
    pub temperature: f64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<usize>,
    #[serde(rename = "p", default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub n_samples: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl DecodeParams {
    pub const DEFAULT_MAX_LEN: usize = 20;

    fn base(method: Method) -> Self {
        DecodeParams {
            method,
            temperature: 1.0,
            top_k: None,
            top_p: None,
            m: None,
            groups: None,
            lambda: None,
            n_samples: 5,
            max_len: Self::DEFAULT_MAX_LEN,
            seed: 0,
        }
    }

    pub fn sp(temperature: f64) -> Self {
        DecodeParams {
            temperature,
            ..Self::base(Method::Sp)
        }
    }

    pub fn topk(k: usize, temperature: f64) -> Self {
        DecodeParams {
            temperature,
            top_k: Some(k),
            ..Self::base(Method::Topk)
        }
    }

    pub fn topp(p: f64, temperature: f64) -> Self {
        DecodeParams {
            temperature,
            top_p: Some(p),
            ..Self::base(Method::Topp)
        }
    }

    pub fn bs(m: usize, temperature: f64) -> Self {
        DecodeParams {
            temperature,
            m: Some(m),
            ..Self::base(Method::Bs)
        }
    }

    pub fn dbs(m: usize, groups: usize, lambda: f64, temperature: f64) -> Self {
        DecodeParams {
            temperature,
            m: Some(m),
            groups: Some(groups),
            lambda: Some(lambda),
            ..Self::base(Method::Dbs)
        }
    }

    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_samples = n;
        self
    }

    pub fn with_max_len(mut self, max_len: usize) -> Self {
        self.max_len = max_len;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), DecodeError> {
        let bad = |msg: String| Err(DecodeError::InvalidParams(msg));
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad(format!("temperature must be > 0, got {}", self.temperature));
        }
        if self.max_len == 0 {
            return bad("max_len must be >= 1".into());
        }
        if self.method.is_sampling() && self.n_samples == 0 {
            return bad("n_samples must be >= 1".into());
        }
        match self.method {
            Method::Sp => {}
            Method::Topk => match self.top_k {
                Some(k) if k >= 1 => {}
                _ => return bad("top-K sampling needs K >= 1".into()),
            },
            Method::Topp => match self.top_p {
                Some(p) if p > 0.0 && p <= 1.0 => {}
                _ => return bad("top-p sampling needs p in (0, 1]".into()),
            },
            Method::Bs => match self.m {
                Some(m) if m >= 1 => {}
                _ => return bad("beam search needs m >= 1".into()),
            },
            Method::Dbs => {
                let (Some(m), Some(g), Some(lambda)) = (self.m, self.groups, self.lambda) else {
                    return bad("diverse beam search needs m, G and lambda".into());
                };
                if m == 0 || g == 0 {
                    return bad("diverse beam search needs m >= 1 and G >= 1".into());
                }
                if m % g != 0 {
                    return bad(format!("m = {m} is not divisible by G = {g}"));
                }
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    return bad(format!("lambda must be >= 0, got {lambda}"));
                }
            }
        }
        Ok(())
    }

    /// Seed for one context: the run seed offset by a stable hash of the id,
    /// so outputs do not depend on the position of the context in a corpus.
    pub fn context_seed(&self, context_id: &str) -> u64 {
        self.seed.wrapping_add(stable_hash(context_id))
    }
}

/// The captions produced for one context.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptionSet {
    pub context_id: String,
    pub params: DecodeParams,
    pub captions: Vec<Caption>,
}

/// Runs the configured method on one context with `params.seed` used as is.
pub fn decode_one<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<CaptionSet, DecodeError> {
    params.validate()?;
    let captions = match params.method {
        Method::Sp => sample_naive(model, context_id, params)?,
        Method::Topk => sample_topk(model, context_id, params)?,
        Method::Topp => sample_topp(model, context_id, params)?,
        Method::Bs => beam_search(model, context_id, params)?,
        Method::Dbs => diverse_beam_search(model, context_id, params)?,
    };
    Ok(CaptionSet {
        context_id: context_id.to_string(),
        params: params.clone(),
        captions,
    })
}

/// Decodes one context with its derived per-context seed.
pub fn decode_context<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<CaptionSet, DecodeError> {
    let local = params.clone().with_seed(params.context_seed(context_id));
    let mut set = decode_one(model, context_id, &local)?;
    set.params = params.clone();
    Ok(set)
}

/// Decodes every context of `corpus`, in context-id order.
pub fn decode<M: ScoringModel + ?Sized>(
    model: &M,
    corpus: &Corpus,
    params: &DecodeParams,
) -> Result<Vec<CaptionSet>, DecodeError> {
    params.validate()?;
    let mut sets = Vec::with_capacity(corpus.len());
    let mut failures = Vec::new();
    for id in corpus.context_ids() {
        match decode_context(model, id, params) {
            Ok(set) => sets.push(set),
            Err(DecodeError::Model(e)) => failures.push((id.to_string(), e)),
            Err(e) => return Err(e),
        }
    }
    if failures.is_empty() {
        Ok(sets)
    } else {
        Err(DecodeError::Contexts(failures))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DecodeError {
    #[error("invalid decode parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("decoding failed for {} context(s): {}", .0.len(), summarize(.0))]
    Contexts(Vec<(String, ModelError)>),
}

fn summarize(failures: &[(String, ModelError)]) -> String {
    failures
        .iter()
        .map(|(id, e)| format!("{id}: {e}"))
        .collect::<Vec<_>>()
        .join("; ")
}
