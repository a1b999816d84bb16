use std::collections::HashMap;

use crate::corpus::{ngrams, Caption};

use super::MetricError;

pub const BLEU_ORDER: usize = 4;

/// Sentence BLEU-4 without smoothing: geometric mean of clipped n-gram
/// precisions times `exp(min(0, 1 - r/c))`, where `r` is the reference
/// length closest to the candidate length (shorter wins ties). Any zero
/// precision, including an order the candidate is too short for, gives 0.
pub fn bleu(candidate: &Caption, refs: &[Caption]) -> Result<f64, MetricError> {
    bleu_n(candidate, refs, BLEU_ORDER)
}

pub fn bleu_n(candidate: &Caption, refs: &[Caption], max_n: usize) -> Result<f64, MetricError> {
    if refs.is_empty() {
        return Err(MetricError::NoReferences);
    }
    let cand = Counts::new(candidate, max_n);
    let refs: Vec<Counts> = refs.iter().map(|r| Counts::new(r, max_n)).collect();
    Ok(bleu_counts(&cand, refs.iter(), max_n))
}

/// N-gram counts of one caption for orders `1..=max_n`.
struct Counts {
    len: usize,
    grams: Vec<HashMap<String, usize>>,
}

impl Counts {
    fn new(caption: &Caption, max_n: usize) -> Self {
        Counts {
            len: caption.len(),
            grams: (1..=max_n)
                .map(|n| ngrams(&caption.tokens, n).expect("n >= 1"))
                .collect(),
        }
    }
}

/// `refs` must be non-empty.
fn bleu_counts<'a, I>(cand: &Counts, refs: I, max_n: usize) -> f64
where
    I: Iterator<Item = &'a Counts> + Clone,
{
    if cand.len == 0 {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 0..max_n {
        let total: usize = cand.grams[n].values().sum();
        if total == 0 {
            return 0.0;
        }
        let clipped: usize = cand.grams[n]
            .iter()
            .map(|(g, &c)| {
                let max_ref = refs
                    .clone()
                    .map(|r| r.grams[n].get(g).copied().unwrap_or(0))
                    .max()
                    .unwrap_or(0);
                c.min(max_ref)
            })
            .sum();
        if clipped == 0 {
            return 0.0;
        }
        log_sum += (clipped as f64 / total as f64).ln();
    }
    let c = cand.len as f64;
    let r = refs
        .map(|r| r.len)
        .min_by_key(|&len| ((len as i64 - cand.len as i64).abs(), len))
        .expect("refs non-empty") as f64;
    let brevity = (1.0 - r / c).min(0.0).exp();
    brevity * (log_sum / max_n as f64).exp()
}

/// Mean BLEU-4 of each caption against the rest of its set. Lower means a
/// more diverse set.
pub fn mbleu(set: &[Caption]) -> Result<f64, MetricError> {
    if set.len() < 2 {
        return Err(MetricError::SetTooSmall {
            need: 2,
            have: set.len(),
        });
    }
    let counts: Vec<Counts> = set.iter().map(|c| Counts::new(c, BLEU_ORDER)).collect();
    let total: f64 = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let rest = counts
                .iter()
                .enumerate()
                .filter(move |(j, _)| *j != i)
                .map(|(_, r)| r);
            bleu_counts(c, rest, BLEU_ORDER)
        })
        .sum();
    Ok(total / set.len() as f64)
}
