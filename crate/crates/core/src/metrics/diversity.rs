use std::collections::HashSet;

use crate::corpus::{ngrams, Caption, Corpus, Token};

/// Distinct n-grams across the whole set divided by its total word count.
pub fn div_n(set: &[Caption], n: usize) -> f64 {
    let words: usize = set.iter().map(Caption::len).sum();
    if words == 0 {
        return 0.0;
    }
    let distinct: HashSet<String> = set
        .iter()
        .flat_map(|c| ngrams(&c.tokens, n).expect("n >= 1").into_keys())
        .collect();
    distinct.len() as f64 / words as f64
}

/// Number of distinct words over every caption of every set.
pub fn vocab_size<'a>(captions: impl IntoIterator<Item = &'a Caption>) -> usize {
    captions
        .into_iter()
        .flat_map(|c| c.tokens.iter())
        .collect::<HashSet<&Token>>()
        .len()
}

/// Exact token sequences of the training references.
#[derive(Clone, Debug, Default)]
pub struct NoveltyIndex {
    seen: HashSet<Vec<Token>>,
}

impl NoveltyIndex {
    pub fn new(corpus: &Corpus) -> Self {
        NoveltyIndex {
            seen: corpus
                .all_train()
                .iter()
                .map(|c| c.tokens.clone())
                .collect(),
        }
    }

    pub fn is_novel(&self, caption: &Caption) -> bool {
        !self.seen.contains(&caption.tokens)
    }

    /// Percentage of captions that are not a training reference verbatim.
    pub fn pct_novel<'a>(&self, captions: impl IntoIterator<Item = &'a Caption>) -> f64 {
        let (mut novel, mut total) = (0usize, 0usize);
        for c in captions {
            total += 1;
            if self.is_novel(c) {
                novel += 1;
            }
        }
        if total == 0 {
            0.0
        } else {
            100.0 * novel as f64 / total as f64
        }
    }
}

pub fn pct_novel<'a>(captions: impl IntoIterator<Item = &'a Caption>, corpus: &Corpus) -> f64 {
    NoveltyIndex::new(corpus).pct_novel(captions)
}
