use crate::corpus::Caption;
use crate::models::{softmax_with_temperature, ModelError, ScoringModel};
use crate::rng::Rng;

use super::{DecodeError, DecodeParams};

/// Mass shortfall tolerated when checking whether a nucleus reached `p`.
const NUCLEUS_SLACK: f64 = 1e-12;

/// Token ids by descending probability, ties to the lower id.
fn ranked(probs: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
    order
}

fn renormalize(probs: &[f64], keep: &[usize]) -> Vec<f64> {
    if keep.len() == probs.len() {
        return probs.to_vec();
    }
    let mass: f64 = keep.iter().map(|&i| probs[i]).sum();
    let mut out = vec![0.0; probs.len()];
    for &i in keep {
        out[i] = probs[i] / mass;
    }
    out
}

/// Keeps the `k` most probable entries and renormalizes. `k` larger than the
/// vocabulary keeps everything and returns `probs` unchanged.
pub fn truncate_top_k(probs: &[f64], k: usize) -> Vec<f64> {
    let order = ranked(probs);
    let k = k.clamp(1, probs.len());
    renormalize(probs, &order[..k])
}

/// Keeps the shortest most-probable prefix whose mass reaches `p` (at least
/// one entry) and renormalizes. `p >= 1` keeps everything.
pub fn truncate_top_p(probs: &[f64], p: f64) -> Vec<f64> {
    if p >= 1.0 {
        return probs.to_vec();
    }
    let order = ranked(probs);
    let mut mass = 0.0;
    let mut n = 0;
    for &i in &order {
        mass += probs[i];
        n += 1;
        if mass >= p - NUCLEUS_SLACK {
            break;
        }
    }
    renormalize(probs, &order[..n])
}

pub fn naive_step(logits: &[f64], temperature: f64) -> Result<Vec<f64>, ModelError> {
    softmax_with_temperature(logits, temperature)
}

pub fn top_k_step(logits: &[f64], temperature: f64, k: usize) -> Result<Vec<f64>, ModelError> {
    Ok(truncate_top_k(
        &softmax_with_temperature(logits, temperature)?,
        k,
    ))
}

pub fn top_p_step(logits: &[f64], temperature: f64, p: f64) -> Result<Vec<f64>, ModelError> {
    Ok(truncate_top_p(
        &softmax_with_temperature(logits, temperature)?,
        p,
    ))
}

/// Ancestral sampling of `n_samples` captions. Sample `i` draws from its own
/// stream `Rng::stream(seed, i)`, so a larger sample is a superset of a
/// smaller one. The logprob is the sum of log step probabilities of the
/// distribution actually sampled from.
fn sample_with<M, F>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
    step: F,
) -> Result<Vec<Caption>, DecodeError>
where
    M: ScoringModel + ?Sized,
    F: Fn(&[f64]) -> Result<Vec<f64>, ModelError>,
{
    let vocab = model.vocab();
    let eos = vocab.eos();
    let mut captions = Vec::with_capacity(params.n_samples);
    for i in 0..params.n_samples {
        let mut rng = Rng::stream(params.seed, i as u64);
        let mut prefix = Vec::new();
        let mut logprob = 0.0;
        for _ in 0..params.max_len {
            let dist = step(&model.next_scores(context_id, &prefix)?)?;
            let w = rng.categorical(&dist);
            logprob += dist[w].ln();
            if w == eos {
                break;
            }
            prefix.push(w);
        }
        captions.push(Caption::with_logprob(vocab.decode(&prefix), logprob));
    }
    Ok(captions)
}

pub fn sample_naive<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<Vec<Caption>, DecodeError> {
    params.validate()?;
    let t = params.temperature;
    sample_with(model, context_id, params, |v| naive_step(v, t))
}

pub fn sample_topk<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<Vec<Caption>, DecodeError> {
    params.validate()?;
    let (t, k) = (params.temperature, params.top_k.unwrap_or(1));
    sample_with(model, context_id, params, |v| top_k_step(v, t, k))
}

pub fn sample_topp<M: ScoringModel + ?Sized>(
    model: &M,
    context_id: &str,
    params: &DecodeParams,
) -> Result<Vec<Caption>, DecodeError> {
    params.validate()?;
    let (t, p) = (params.temperature, params.top_p.unwrap_or(1.0));
    sample_with(model, context_id, params, |v| top_p_step(v, t, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::TableModel;

    #[test]
    fn top_k_arithmetic() {
        let q = truncate_top_k(&[0.5, 0.3, 0.2], 2);
        assert!((q[0] - 0.625).abs() < 1e-15 && (q[1] - 0.375).abs() < 1e-15 && q[2] == 0.0);
        assert_eq!(truncate_top_k(&[0.2, 0.5, 0.3], 99), vec![0.2, 0.5, 0.3]);
        // boundary tie goes to the lower index
        assert_eq!(
            truncate_top_k(&[0.25, 0.25, 0.5], 2),
            vec![0.25 / 0.75, 0.0, 0.5 / 0.75]
        );
    }

    #[test]
    fn top_p_arithmetic() {
        let q = truncate_top_p(&[0.5, 0.3, 0.2], 0.8);
        assert!((q[0] - 0.625).abs() < 1e-15 && (q[1] - 0.375).abs() < 1e-15 && q[2] == 0.0);
        assert_eq!(truncate_top_p(&[0.5, 0.3, 0.2], 0.5), vec![1.0, 0.0, 0.0]);
        assert_eq!(truncate_top_p(&[0.5, 0.3, 0.2], 1.0), vec![0.5, 0.3, 0.2]);
        assert_eq!(truncate_top_p(&[0.2, 0.3, 0.5], 0.01), vec![0.0, 0.0, 1.0]);
    }

    fn forced_table() -> TableModel {
        // "a b" then <eos>, each step dominated by a +1e9 logit.
        TableModel::from_json(
            r#"{"vocab": ["a", "b", "<eos>"], "contexts": {"c": {
                "<bos>": [1e9, 0.0, 0.0], "<bos> a": [0.0, 1e9, 0.0], "<bos> a b": [0.0, 0.0, 1e9]}}}"#,
        )
        .unwrap()
    }

    #[test]
    fn degenerate_rows_sample_greedy_path() {
        let m = forced_table();
        for params in [
            DecodeParams::sp(1.0),
            DecodeParams::topk(2, 1.0),
            DecodeParams::topp(0.9, 1.0),
        ] {
            let params = params.with_samples(20).with_seed(4);
            let caps = match params.method {
                super::super::Method::Sp => sample_naive(&m, "c", &params),
                super::super::Method::Topk => sample_topk(&m, "c", &params),
                _ => sample_topp(&m, "c", &params),
            }
            .unwrap();
            for c in caps {
                assert_eq!(c.text(), "a b");
                assert_eq!(c.logprob, Some(0.0));
            }
        }
    }

    #[test]
    fn same_seed_same_samples() {
        let m = TableModel::from_json(
            r#"{"vocab": ["a", "<eos>"], "contexts": {"c": {"<bos>": [0.0, 0.0], "<bos> a": [0.0, 0.0], "<bos> a a": [0.0, 0.0]}}}"#,
        )
        .unwrap();
        let params = DecodeParams::sp(1.0)
            .with_samples(30)
            .with_max_len(3)
            .with_seed(12);
        let a = sample_naive(&m, "c", &params).unwrap();
        assert_eq!(a, sample_naive(&m, "c", &params).unwrap());
        assert!(a.iter().all(|c| c.len() <= 3 && c.logprob.unwrap() <= 0.0));
        let more = sample_naive(&m, "c", &params.clone().with_samples(40)).unwrap();
        assert_eq!(&more[..30], &a[..]);
    }

    #[test]
    fn uncovered_prefix_propagates() {
        let m = TableModel::from_json(
            r#"{"vocab": ["a", "<eos>"], "contexts": {"c": {"<bos>": [5.0, 0.0]}}}"#,
        )
        .unwrap();
        let err = sample_naive(&m, "c", &DecodeParams::sp(1.0).with_seed(1)).unwrap_err();
        assert!(matches!(
            err,
            DecodeError::Model(ModelError::PrefixNotCovered { .. })
        ));
    }
}
