use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{ModelError, ScoringModel, Vocab};
use crate::corpus::{Caption, Corpus, Token, EOS};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NGramModelParams {
    pub order: usize,
    pub add_k: f64,
    /// Weight of the per-context component.
    pub beta: f64,
}

impl Default for NGramModelParams {
    fn default() -> Self {
        NGramModelParams {
            order: 3,
            add_k: 0.1,
            beta: 0.7,
        }
    }
}

impl NGramModelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.order == 0 {
            return Err(ModelError::InvalidParams("order must be >= 1".into()));
        }
        if !(self.add_k > 0.0 && self.add_k.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "add_k must be > 0, got {}",
                self.add_k
            )));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(ModelError::InvalidParams(format!(
                "beta must be in [0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default)]
struct HistoryCounts {
    total: u64,
    next: HashMap<u32, u64>,
}

/// Add-k smoothed counts for every history length `0..order`.
#[derive(Clone, Debug, Default)]
struct Counts {
    by_history: HashMap<Vec<u32>, HistoryCounts>,
}

impl Counts {
    fn observe(&mut self, seq: &[u32], order: usize) {
        for i in 1..seq.len() {
            for h in 0..=(order - 1).min(i) {
                let entry = self.by_history.entry(seq[i - h..i].to_vec()).or_default();
                entry.total += 1;
                *entry.next.entry(seq[i]).or_insert(0) += 1;
            }
        }
    }

    /// Longest suffix of `history` (at most `order - 1` long) with a
    /// non-zero count; the empty history always qualifies after training.
    fn lookup(&self, history: &[u32], order: usize) -> &HistoryCounts {
        let longest = (order - 1).min(history.len());
        for h in (0..=longest).rev() {
            if let Some(c) = self.by_history.get(&history[history.len() - h..]) {
                if c.total > 0 {
                    return c;
                }
            }
        }
        unreachable!("unigram counts exist for any trained component")
    }

    fn add_probs(&self, history: &[u32], params: &NGramModelParams, weight: f64, out: &mut [f64]) {
        let counts = self.lookup(history, params.order);
        let denom = counts.total as f64 + params.add_k * out.len() as f64;
        let base = weight * params.add_k / denom;
        for p in out.iter_mut() {
            *p += base;
        }
        for (&w, &c) in &counts.next {
            out[w as usize] += weight * c as f64 / denom;
        }
    }
}

/// Interpolated n-gram captioner:
/// `P(w | h, ctx) = beta * P_ctx(w | h) + (1 - beta) * P_all(w | h)`,
/// each component add-k smoothed with backoff to shorter histories on zero
/// count. Scores are natural-log probabilities.
#[derive(Clone, Debug)]
pub struct NGramModel {
    vocab: Vocab,
    params: NGramModelParams,
    global: Counts,
    per_context: HashMap<String, Counts>,
    bos: u32,
}

pub fn train_ngram(corpus: &Corpus, params: NGramModelParams) -> Result<NGramModel, ModelError> {
    params.validate()?;
    if corpus.all_train().is_empty() {
        return Err(ModelError::EmptyCorpus);
    }
    let words: BTreeSet<&str> = corpus
        .all_train()
        .iter()
        .flat_map(|c| c.tokens.iter().map(Token::as_str))
        .filter(|w| *w != EOS)
        .collect();
    let mut tokens: Vec<Token> = words
        .into_iter()
        .map(|w| Token::new(w).expect("corpus tokens are valid"))
        .collect();
    tokens.push(Token::new(EOS).expect("eos is a valid token"));
    let vocab = Vocab::new(tokens)?;
    let bos = vocab.len() as u32;

    let encode = |c: &Caption| -> Vec<u32> {
        let mut seq = Vec::with_capacity(c.len() + 2);
        seq.push(bos);
        seq.extend(
            c.tokens
                .iter()
                .map(|t| vocab.id(t.as_str()).expect("in vocab") as u32),
        );
        seq.push(vocab.eos() as u32);
        seq
    };

    let mut global = Counts::default();
    let mut per_context = HashMap::with_capacity(corpus.len());
    for (id, refs) in corpus.contexts() {
        let mut local = Counts::default();
        for caption in &refs.train_refs {
            let seq = encode(caption);
            local.observe(&seq, params.order);
            global.observe(&seq, params.order);
        }
        per_context.insert(id.clone(), local);
    }
    Ok(NGramModel {
        vocab,
        params,
        global,
        per_context,
        bos,
    })
}

impl NGramModel {
    pub fn params(&self) -> &NGramModelParams {
        &self.params
    }

    /// Interpolated next-token probabilities.
    pub fn next_probs(&self, context_id: &str, prefix: &[usize]) -> Result<Vec<f64>, ModelError> {
        let local = self
            .per_context
            .get(context_id)
            .ok_or_else(|| ModelError::UnknownContext(context_id.to_string()))?;
        let mut history = Vec::with_capacity(prefix.len() + 1);
        history.push(self.bos);
        history.extend(prefix.iter().map(|&i| i as u32));
        let mut probs = vec![0.0; self.vocab.len()];
        let beta = self.params.beta;
        if beta > 0.0 {
            local.add_probs(&history, &self.params, beta, &mut probs);
        }
        if beta < 1.0 {
            self.global
                .add_probs(&history, &self.params, 1.0 - beta, &mut probs);
        }
        Ok(probs)
    }
}

impl ScoringModel for NGramModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_scores(&self, context_id: &str, prefix: &[usize]) -> Result<Vec<f64>, ModelError> {
        Ok(self
            .next_probs(context_id, prefix)?
            .into_iter()
            .map(f64::ln)
            .collect())
    }
}
