//! Accuracy and diversity measures for caption sets.

mod bleu;
mod cider;
mod diversity;
pub mod jacobi;
mod self_cider;

use serde::Serialize;

use crate::corpus::{Caption, Corpus, Lexicon};
use crate::spice::allspice;

pub use bleu::{bleu, bleu_n, mbleu, BLEU_ORDER};
pub use cider::{build_idf, cider_d, CiderVector, IdfTable, CIDER_ORDER, DEFAULT_SIGMA};
pub use diversity::{div_n, pct_novel, vocab_size, NoveltyIndex};
pub use jacobi::{symmetric_eigen, SymmetricEigen};
pub use self_cider::{cider_kernel, self_cider, spectrum_score, SelfCiderReport};

/// `(max, mean)` of a per-caption metric over a non-empty set.
pub fn oracle_and_average<F>(set: &[Caption], mut metric: F) -> Result<(f64, f64), MetricError>
where
    F: FnMut(&Caption) -> f64,
{
    if set.is_empty() {
        return Err(MetricError::SetTooSmall { need: 1, have: 0 });
    }
    let mut best = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for c in set {
        let v = metric(c);
        best = best.max(v);
        sum += v;
    }
    Ok((best, sum / set.len() as f64))
}

/// All metrics for one caption set. `mbleu4` and `self_cider` need at least
/// two captions and are `None` otherwise.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub avg_cider: f64,
    pub oracle_cider: f64,
    pub mbleu4: Option<f64>,
    pub div1: f64,
    pub div2: f64,
    pub self_cider: Option<f64>,
    pub allspice: f64,
    pub vocab_size: usize,
    pub pct_novel: f64,
}

/// Shared state for scoring many caption sets against one corpus.
pub struct Evaluator<'a> {
    idf: IdfTable,
    novelty: NoveltyIndex,
    lexicon: &'a Lexicon,
}

impl<'a> Evaluator<'a> {
    pub fn new(corpus: &Corpus, lexicon: &'a Lexicon) -> Self {
        Evaluator {
            idf: build_idf(corpus),
            novelty: NoveltyIndex::new(corpus),
            lexicon,
        }
    }

    pub fn idf(&self) -> &IdfTable {
        &self.idf
    }

    pub fn novelty(&self) -> &NoveltyIndex {
        &self.novelty
    }

    pub fn evaluate(&self, set: &[Caption], refs: &[Caption]) -> Result<MetricReport, MetricError> {
        if refs.is_empty() {
            return Err(MetricError::NoReferences);
        }
        let ref_vectors: Vec<CiderVector> = refs
            .iter()
            .map(|r| CiderVector::new(r, &self.idf))
            .collect();
        let (oracle_cider, avg_cider) = oracle_and_average(set, |c| {
            CiderVector::new(c, &self.idf).score(&ref_vectors, DEFAULT_SIGMA)
        })?;
        let (mbleu4, self_cider) = if set.len() >= 2 {
            (Some(mbleu(set)?), Some(self_cider(set, &self.idf)?.score))
        } else {
            (None, None)
        };
        Ok(MetricReport {
            avg_cider,
            oracle_cider,
            mbleu4,
            div1: div_n(set, 1),
            div2: div_n(set, 2),
            self_cider,
            allspice: allspice(set, refs, self.lexicon).f1,
            vocab_size: vocab_size(set),
            pct_novel: self.novelty.pct_novel(set),
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("at least one reference caption is required")]
    NoReferences,
    #[error("caption set needs at least {need} caption(s), got {have}")]
    SetTooSmall { need: usize, have: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cap(s: &str) -> Caption {
        Caption::parse(s)
    }

    #[test]
    fn oracle_average_examples() {
        let set = [cap("a"), cap("b")];
        let mut values = [0.0, 10.0].into_iter();
        assert_eq!(
            oracle_and_average(&set, |_| values.next().unwrap()).unwrap(),
            (10.0, 5.0)
        );
        let (o, a) = oracle_and_average(&[cap("x"), cap("x")], |c| c.len() as f64).unwrap();
        assert_eq!(o, a);
        assert!(oracle_and_average(&[], |_| 0.0).is_err());
    }

    #[test]
    fn report_ranges_on_synthetic_world() {
        let lex = Lexicon::builtin();
        let world = crate::corpus::synthesize_world(&lex, 10, 6, 8).unwrap();
        let eval = Evaluator::new(&world.corpus, &lex);
        for refs in world.corpus.contexts().values() {
            // Score the train refs as if generated.
            let r = eval.evaluate(&refs.train_refs, &refs.eval_refs).unwrap();
            assert!(r.oracle_cider >= r.avg_cider);
            assert!((0.0..=10.0).contains(&r.oracle_cider));
            for v in [
                r.div1,
                r.div2,
                r.allspice,
                r.mbleu4.unwrap(),
                r.self_cider.unwrap(),
            ] {
                assert!((0.0..=1.0).contains(&v), "{r:?}");
            }
            assert_eq!(r.pct_novel, 0.0);
        }
    }

    #[test]
    fn singleton_set_has_no_pairwise_metrics() {
        let lex = Lexicon::builtin();
        let world = crate::corpus::synthesize_world(&lex, 3, 4, 8).unwrap();
        let eval = Evaluator::new(&world.corpus, &lex);
        let refs = world.corpus.contexts().values().next().unwrap();
        let r = eval
            .evaluate(&refs.train_refs[..1], &refs.eval_refs)
            .unwrap();
        assert_eq!((r.mbleu4, r.self_cider), (None, None));
    }
}
