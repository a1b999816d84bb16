//! Diverse caption decoding over pluggable scoring models, with the
//! diversity/accuracy metric suite used to compare decoders.
//!
//! * [`corpus`]: tokens, reference corpora and the synthetic captioning world
//! * [`models`]: the [`models::ScoringModel`] interface, a strict logit table
//!   and an interpolated n-gram captioner
//! * [`decoders`]: naive / top-K / top-p sampling, beam search and diverse
//!   beam search
//! * [`metrics`]: BLEU, mBLEU, Div-n, CIDEr-D, Self-CIDEr, vocabulary size
//!   and novelty
//! * [`spice`]: scene-graph extraction, SPICE and AllSPICE

pub mod corpus;
pub mod decoders;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod spice;

pub use corpus::{Caption, Corpus, Lexicon, Token};
pub use decoders::{CaptionSet, DecodeParams, Method};
pub use metrics::MetricReport;
pub use models::ScoringModel;
