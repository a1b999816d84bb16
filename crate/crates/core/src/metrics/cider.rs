//! CIDEr-D with corpus document frequencies.
//!
//! A document is one context: the union of its train and eval references.
//! Per order `n`, each caption becomes the vector `count(g) * idf(g)`; the
//! similarity of candidate `c` to reference `r` is
//! `sum_g min(c_g, r_g) * r_g / (|c| |r|)` damped by
//! `exp(-(len_c - len_r)^2 / (2 sigma^2))`. The score is 10 times the mean
//! over orders 1..=4 of the mean over references.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use crate::corpus::{ngrams, Caption, Corpus};

pub const CIDER_ORDER: usize = 4;
pub const DEFAULT_SIGMA: f64 = 6.0;

#[derive(Clone, Debug)]
pub struct IdfTable {
    idf: Vec<HashMap<String, f64>>,
    n_documents: usize,
}

impl IdfTable {
    /// Builds document frequencies from arbitrary reference groups.
    pub fn from_documents<'a, I, D>(documents: I) -> Self
    where
        I: IntoIterator<Item = D>,
        D: IntoIterator<Item = &'a Caption>,
    {
        let mut df: Vec<HashMap<String, usize>> = vec![HashMap::new(); CIDER_ORDER];
        let mut n_documents = 0;
        for doc in documents {
            n_documents += 1;
            let mut seen: Vec<HashSet<String>> = vec![HashSet::new(); CIDER_ORDER];
            for caption in doc {
                for (n, set) in seen.iter_mut().enumerate() {
                    set.extend(ngrams(&caption.tokens, n + 1).expect("n >= 1").into_keys());
                }
            }
            for (n, set) in seen.into_iter().enumerate() {
                for g in set {
                    *df[n].entry(g).or_insert(0) += 1;
                }
            }
        }
        let total = n_documents as f64;
        let idf = df
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(g, d)| (g, (total / d as f64).ln()))
                    .collect()
            })
            .collect();
        IdfTable { idf, n_documents }
    }

    pub fn n_documents(&self) -> usize {
        self.n_documents
    }

    /// Weight of an n-gram; unseen n-grams get the maximum, `ln N`.
    pub fn weight(&self, n: usize, gram: &str) -> f64 {
        self.idf[n - 1]
            .get(gram)
            .copied()
            .unwrap_or_else(|| (self.n_documents.max(1) as f64).ln())
    }

    pub fn contains(&self, n: usize, gram: &str) -> bool {
        self.idf[n - 1].contains_key(gram)
    }
}

pub fn build_idf(corpus: &Corpus) -> IdfTable {
    IdfTable::from_documents(
        corpus
            .contexts()
            .values()
            .map(|refs| refs.train_refs.iter().chain(&refs.eval_refs)),
    )
}

/// Precomputed tf-idf vectors of one caption, entries sorted by n-gram so
/// every sum runs in a fixed order.
#[derive(Clone, Debug)]
pub struct CiderVector {
    weights: Vec<Vec<(String, f64)>>,
    norms: Vec<f64>,
    len: usize,
}

impl CiderVector {
    pub fn new(caption: &Caption, idf: &IdfTable) -> Self {
        let mut weights = Vec::with_capacity(CIDER_ORDER);
        let mut norms = Vec::with_capacity(CIDER_ORDER);
        for n in 1..=CIDER_ORDER {
            let mut w: Vec<(String, f64)> = ngrams(&caption.tokens, n)
                .expect("n >= 1")
                .into_iter()
                .map(|(g, c)| {
                    let v = c as f64 * idf.weight(n, &g);
                    (g, v)
                })
                .collect();
            w.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            norms.push(w.iter().map(|(_, v)| v * v).sum::<f64>().sqrt());
            weights.push(w);
        }
        CiderVector {
            weights,
            norms,
            len: caption.len(),
        }
    }

    /// Per-order similarities to one reference, before the x10 scaling.
    fn order_similarities(&self, reference: &CiderVector, sigma: f64) -> [f64; CIDER_ORDER] {
        let delta = self.len as f64 - reference.len as f64;
        let penalty = (-(delta * delta) / (2.0 * sigma * sigma)).exp();
        let mut out = [0.0; CIDER_ORDER];
        for (n, slot) in out.iter_mut().enumerate() {
            let denom = self.norms[n] * reference.norms[n];
            if denom == 0.0 {
                continue;
            }
            let (hyp, refw) = (&self.weights[n], &reference.weights[n]);
            let (mut i, mut j, mut dot) = (0, 0, 0.0);
            while i < hyp.len() && j < refw.len() {
                match hyp[i].0.cmp(&refw[j].0) {
                    Ordering::Less => i += 1,
                    Ordering::Greater => j += 1,
                    Ordering::Equal => {
                        dot += hyp[i].1.min(refw[j].1) * refw[j].1;
                        i += 1;
                        j += 1;
                    }
                }
            }
            *slot = penalty * dot / denom;
        }
        out
    }

    pub fn similarity(&self, reference: &CiderVector, sigma: f64) -> f64 {
        let per_order = self.order_similarities(reference, sigma);
        10.0 * per_order.iter().sum::<f64>() / CIDER_ORDER as f64
    }

    /// CIDEr-D against a reference set.
    pub fn score(&self, refs: &[CiderVector], sigma: f64) -> f64 {
        if refs.is_empty() {
            return 0.0;
        }
        refs.iter().map(|r| self.similarity(r, sigma)).sum::<f64>() / refs.len() as f64
    }
}

pub fn cider_d(candidate: &Caption, refs: &[Caption], idf: &IdfTable, sigma: f64) -> f64 {
    let refs: Vec<CiderVector> = refs.iter().map(|r| CiderVector::new(r, idf)).collect();
    CiderVector::new(candidate, idf).score(&refs, sigma)
}
