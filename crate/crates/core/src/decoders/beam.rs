//! Beam search and diverse (grouped, Hamming-penalized) beam search.
//!
//! Both share one group engine. At every time step a group extends each live
//! hypothesis by every token and ranks the extensions by search score (higher
//! first, ties to the lexicographically smaller id sequence). Extensions that
//! emitted `<eos>` or reached `max_len` retire into the group's completed
//! pool, which keeps its best `width`; the best `width` unfinished ones stay
//! live. Retired hypotheses never take a live slot. A group stops once its
//! pool is full and no live hypothesis scores above the pool's worst, or when
//! nothing is live. There is no length normalization.
//!
//! This is still a breadth-limited search: a live prefix pruned early can
//! have had a completion better than the pool's worst.
//!
//! In diverse beam search, group `g` ranks extensions by
//! `log p_T(w) - lambda * count(w)`, where `count(w)` is how many of the
//! `width` best-ranked extensions of groups `0..g` at the same time step
//! ended in `w`.

use std::cmp::Ordering;

use crate::corpus::Caption;
use crate::models::{log_softmax_with_temperature, ScoringModel};

use super::{DecodeError, DecodeParams};

#[derive(Clone, Debug)]
struct Hypothesis {
    ids: Vec<usize>,
    /// Sum of temperature-adjusted log-probabilities.
    logprob: f64,
    /// `logprob` minus accumulated diversity penalties.
    score: f64,
}

fn by_score(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.ids.cmp(&b.ids))
}

fn by_logprob(a: &Hypothesis, b: &Hypothesis) -> Ordering {
    b.logprob
        .total_cmp(&a.logprob)
        .then_with(|| a.ids.cmp(&b.ids))
}

struct Group {
    width: usize,
    live: Vec<Hypothesis>,
    done: Vec<Hypothesis>,
    active: bool,
}

impl Group {
    fn new(width: usize) -> Self {
        Group {
            width,
            live: vec![Hypothesis {
                ids: Vec::new(),
                logprob: 0.0,
                score: 0.0,
            }],
            done: Vec::new(),
            active: true,
        }
    }

    /// Expands one time step. `penalty[w]` is subtracted from the search
    /// score of every extension ending in `w`. Returns the last tokens of
    /// the kept extensions.
    fn step<M: ScoringModel + ?Sized>(
        &mut self,
        model: &M,
        context_id: &str,
        params: &DecodeParams,
        penalty: &[f64],
    ) -> Result<Vec<usize>, DecodeError> {
        let eos = model.vocab().eos();
        let mut candidates = Vec::with_capacity(self.live.len() * penalty.len());
        for hyp in &self.live {
            let logp = log_softmax_with_temperature(
                &model.next_scores(context_id, &hyp.ids)?,
                params.temperature,
            )?;
            for (w, lp) in logp.into_iter().enumerate() {
                let mut ids = Vec::with_capacity(hyp.ids.len() + 1);
                ids.extend_from_slice(&hyp.ids);
                ids.push(w);
                candidates.push(Hypothesis {
                    ids,
                    logprob: hyp.logprob + lp,
                    score: hyp.score + lp - penalty[w],
                });
            }
        }
        candidates.sort_by(by_score);
        let chosen = candidates
            .iter()
            .take(self.width)
            .map(|h| *h.ids.last().expect("extended"))
            .collect();
        self.live.clear();
        for hyp in candidates {
            let last = *hyp.ids.last().expect("extended");
            if last == eos || hyp.ids.len() >= params.max_len {
                self.done.push(hyp);
            } else if self.live.len() < self.width {
                self.live.push(hyp);
            }
        }
        self.done.sort_by(by_score);
        self.done.truncate(self.width);
        self.active = !self.live.is_empty() && !self.settled();
        Ok(chosen)
    }

    fn settled(&self) -> bool {
        match self.done.get(self.width - 1) {
            Some(kth) => self.live.iter().all(|h| h.score < kth.score),
            None => false,
        }
    }

    fn finish(mut self) -> Vec<Hypothesis> {
        self.done.sort_by(by_score);
        self.done.truncate(self.width);
        self.done
    }
}

fn run_groups<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
    n_groups: usize,
    width: usize,
    lambda: f64,
) -> Result<Vec<Caption>, DecodeError> {
    let vocab = model.vocab();
    let mut groups: Vec<Group> = (0..n_groups).map(|_| Group::new(width)).collect();
    let mut counts = vec![0usize; vocab.len()];
    let mut penalty = vec![0.0; vocab.len()];
    for _ in 0..params.max_len {
        if groups.iter().all(|g| !g.active) {
            break;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for group in groups.iter_mut().filter(|g| g.active) {
            for (p, &c) in penalty.iter_mut().zip(&counts) {
                *p = lambda * c as f64;
            }
            for w in group.step(model, context_id, params, &penalty)? {
                counts[w] += 1;
            }
        }
    }
    let mut finished: Vec<Hypothesis> = groups.into_iter().flat_map(Group::finish).collect();
    finished.sort_by(by_logprob);
    let eos = vocab.eos();
    Ok(finished
        .into_iter()
        .map(|h| {
            let body = match h.ids.last() {
                Some(&w) if w == eos => &h.ids[..h.ids.len() - 1],
                _ => &h.ids[..],
            };
            Caption::with_logprob(vocab.decode(body), h.logprob)
        })
        .collect())
}

/// Width-`m` beam search over `sum_t ln softmax_T(scores)`. Returns at most
/// `m` completed captions, best first.
pub fn beam_search<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<Vec<Caption>, DecodeError> {
    params.validate()?;
    let m = params.m.unwrap_or(1);
    run_groups(model, context_id, params, 1, m, 0.0)
}

/// `G` groups of `m / G` beams expanded in order at each step, each group
/// penalized for tokens already chosen at that step by earlier groups.
/// Output is every group's completed list, sorted by unpenalized logprob.
pub fn diverse_beam_search<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<Vec<Caption>, DecodeError> {
    params.validate()?;
    let (Some(m), Some(g), Some(lambda)) = (params.m, params.groups, params.lambda) else {
        return Err(DecodeError::InvalidParams(
            "diverse beam search needs m, G and lambda".into(),
        ));
    };
    run_groups(model, context_id, params, g, m / g, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TableModel;

    /// vocab [x, y, <eos>], one step: logits x = 1.0, y = 0.5.
    fn gap_table() -> TableModel {
        TableModel::from_json(
            r#"{"vocab": ["x", "y", "<eos>"], "contexts": {"c": {"<bos>": [1.0, 0.5, -5.0]}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn width_one_is_greedy() {
        // Greedy takes "a" (0.6) although "b <eos>" (0.4) is the single best sequence.
        let m = TableModel::from_json(&format!(
            r#"{{"vocab": ["a", "b", "<eos>"], "contexts": {{"c": {{
                "<bos>": [{a}, {b}, -1e9], "<bos> a": [0.0, 0.0, 0.0], "<bos> b": [-1e9, -1e9, 0.0]}}}}}}"#,
            a = 0.6f64.ln(),
            b = 0.4f64.ln()
        ))
        .unwrap();
        let params = DecodeParams::bs(1, 1.0).with_max_len(2);
        let out = beam_search(&m, "c", &params).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].text(), "a a");
        assert!((out[0].logprob.unwrap() - (0.6f64.ln() + (1.0f64 / 3.0).ln())).abs() < 1e-12);
        let wide = beam_search(&m, "c", &DecodeParams::bs(2, 1.0).with_max_len(2)).unwrap();
        assert_eq!(wide[0].text(), "b");
    }

    #[test]
    fn argmax_at_width_one_is_temperature_free() {
        let m = gap_table();
        let cold = beam_search(&m, "c", &DecodeParams::bs(1, 0.5).with_max_len(1)).unwrap();
        let warm = beam_search(&m, "c", &DecodeParams::bs(1, 1.0).with_max_len(1)).unwrap();
        assert_eq!(cold[0].tokens, warm[0].tokens);
    }

    #[test]
    fn hamming_penalty_flips_second_group_past_gap() {
        let m = gap_table();
        let run = |lambda: f64| {
            let params = DecodeParams::dbs(2, 2, lambda, 1.0).with_max_len(1);
            let out = diverse_beam_search(&m, "c", &params).unwrap();
            out.iter().map(Caption::text).collect::<Vec<_>>()
        };
        assert_eq!(run(0.4), ["x", "x"]);
        assert_eq!(run(0.6), ["x", "y"]);
    }

    #[test]
    fn exhausted_search_returns_fewer() {
        let m =
            TableModel::from_json(r#"{"vocab": ["<eos>"], "contexts": {"c": {"<bos>": [0.0]}}}"#)
                .unwrap();
        let out = beam_search(&m, "c", &DecodeParams::bs(3, 1.0)).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].is_empty());
        assert_eq!(out[0].logprob, Some(0.0));
    }
}
