//! Next-token scoring models.

mod ngram;
mod table;

use std::collections::HashMap;

use crate::corpus::{Token, BOS, EOS};

pub use ngram::{train_ngram, NGramModel, NGramModelParams};
pub use table::TableModel;

/// Ordered model vocabulary. Always contains `<eos>` and never `<bos>`.
#[derive(Clone, Debug, PartialEq)]
pub struct Vocab {
    tokens: Vec<Token>,
    index: HashMap<Token, usize>,
    eos: usize,
}

impl Vocab {
    pub fn new(tokens: Vec<Token>) -> Result<Self, ModelError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if t.as_str() == BOS {
                return Err(ModelError::InvalidVocab(
                    "vocabulary must not contain <bos>".into(),
                ));
            }
            if index.insert(t.clone(), i).is_some() {
                return Err(ModelError::InvalidVocab(format!("duplicate token {t}")));
            }
        }
        let eos = *index
            .get(EOS)
            .ok_or_else(|| ModelError::InvalidVocab("vocabulary must contain <eos>".into()))?;
        Ok(Vocab { tokens, index, eos })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn eos(&self) -> usize {
        self.eos
    }

    pub fn token(&self, id: usize) -> &Token {
        &self.tokens[id]
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<Token> {
        ids.iter().map(|&i| self.tokens[i].clone()).collect()
    }
}

/// Next-token logits conditioned on a context id and the prefix generated so
/// far. The prefix holds vocabulary ids and excludes the implicit `<bos>`.
///
/// Implementations must be pure: equal arguments give bit-identical vectors.
pub trait ScoringModel: Send + Sync {
    fn vocab(&self) -> &Vocab;

    fn next_scores(&self, context_id: &str, prefix: &[usize]) -> Result<Vec<f64>, ModelError>;
}

impl<M: ScoringModel + ?Sized> ScoringModel for Box<M> {
    fn vocab(&self) -> &Vocab {
        (**self).vocab()
    }

    fn next_scores(&self, context_id: &str, prefix: &[usize]) -> Result<Vec<f64>, ModelError> {
        (**self).next_scores(context_id, prefix)
    }
}

/// `exp(v_i / T) / sum_j exp(v_j / T)`, evaluated after shifting by the max.
pub fn softmax_with_temperature(logits: &[f64], temperature: f64) -> Result<Vec<f64>, ModelError> {
    check_temperature(temperature)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits
        .iter()
        .map(|&v| ((v - max) / temperature).exp())
        .collect();
    let total: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= total;
    }
    Ok(probs)
}

/// Natural-log counterpart of [`softmax_with_temperature`].
pub fn log_softmax_with_temperature(
    logits: &[f64],
    temperature: f64,
) -> Result<Vec<f64>, ModelError> {
    check_temperature(temperature)?;
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = logits.iter().map(|&v| (v - max) / temperature).collect();
    let log_total = scaled.iter().map(|s| s.exp()).sum::<f64>().ln();
    Ok(scaled.into_iter().map(|s| s - log_total).collect())
}

fn check_temperature(temperature: f64) -> Result<(), ModelError> {
    if temperature > 0.0 && temperature.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidTemperature(temperature))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("unknown context {0:?}")]
    UnknownContext(String),
    #[error("prefix not covered: context {context:?}, prefix {prefix:?}")]
    PrefixNotCovered { context: String, prefix: String },
    #[error("logit table: {0}")]
    InvalidTable(String),
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid n-gram parameters: {0}")]
    InvalidParams(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_logits_give_uniform_probs() {
        for t in [0.1, 1.0, 7.0] {
            let p = softmax_with_temperature(&[1.0; 4], t).unwrap();
            assert!(p.iter().all(|&x| (x - 0.25).abs() < 1e-15));
        }
    }

    #[test]
    fn two_logit_reference_values() {
        // 1 / (1 + e^-2) and 1 / (1 + e^-4), evaluated to 12 digits offline.
        let p = softmax_with_temperature(&[2.0, 0.0], 1.0).unwrap();
        assert!((p[0] - 0.880797077978).abs() < 1e-8);
        assert!((p[1] - 0.119202922022).abs() < 1e-8);
        let p = softmax_with_temperature(&[2.0, 0.0], 0.5).unwrap();
        assert!((p[0] - 0.982013790038).abs() < 1e-8);
        assert!((p[1] - 0.017986209962).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_positive_temperature() {
        assert!(softmax_with_temperature(&[0.0], 0.0).is_err());
        assert!(softmax_with_temperature(&[0.0], -1.0).is_err());
        assert!(log_softmax_with_temperature(&[0.0], 0.0).is_err());
    }

    #[test]
    fn huge_logit_gap_is_stable() {
        let p = softmax_with_temperature(&[1e9, 0.0, -5.0], 1.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
        let lp = log_softmax_with_temperature(&[1e9, 0.0], 1.0).unwrap();
        assert_eq!(lp[0], 0.0);
        assert!(lp[1].is_finite());
    }

    #[test]
    fn sharper_with_lower_temperature() {
        let v = [0.3, 1.2, -0.4, 1.1];
        let mut last = 0.0;
        for t in [1.0, 0.5, 0.1, 0.01] {
            let p = softmax_with_temperature(&v, t).unwrap()[1];
            assert!(p >= last);
            last = p;
        }
    }

    proptest! {
        #[test]
        fn shift_invariant(v in proptest::collection::vec(-20.0f64..20.0, 1..8), c in -50.0f64..50.0, t in 0.05f64..5.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = softmax_with_temperature(&v, t).unwrap();
            let b = softmax_with_temperature(&shifted, t).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn argmax_preserved(v in proptest::collection::vec(-20.0f64..20.0, 2..8), t in 0.05f64..5.0) {
            let argmax = |xs: &[f64]| xs.iter().enumerate().fold(0, |b, (i, x)| if *x > xs[b] { i } else { b });
            let mut sorted = v.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            prop_assume!(sorted[0] - sorted[1] > 1e-9);
            let p = softmax_with_temperature(&v, t).unwrap();
            prop_assert_eq!(argmax(&p), argmax(&v));
        }

        #[test]
        fn log_softmax_matches_softmax(v in proptest::collection::vec(-20.0f64..20.0, 1..8), t in 0.1f64..5.0) {
            let p = softmax_with_temperature(&v, t).unwrap();
            let lp = log_softmax_with_temperature(&v, t).unwrap();
            for (x, y) in p.iter().zip(&lp) {
                prop_assert!((x - y.exp()).abs() < 1e-12);
            }
        }
    }
}
