use serde::Serialize;

use crate::corpus::Caption;

use super::cider::{CiderVector, IdfTable, DEFAULT_SIGMA};
use super::jacobi::symmetric_eigen;
use super::MetricError;

#[derive(Clone, Debug, Serialize)]
pub struct SelfCiderReport {
    pub kernel: Vec<Vec<f64>>,
    /// Largest first.
    pub eigenvalues: Vec<f64>,
    pub score: f64,
}

/// Pairwise CIDEr-D similarity kernel of a caption set, scaled to `[0, 1]`
/// and symmetrized; the diagonal is fixed at 1.
pub fn cider_kernel(set: &[Caption], idf: &IdfTable) -> Vec<Vec<f64>> {
    let vectors: Vec<CiderVector> = set.iter().map(|c| CiderVector::new(c, idf)).collect();
    let k = set.len();
    let mut kernel = vec![vec![0.0; k]; k];
    for i in 0..k {
        kernel[i][i] = 1.0;
        for j in i + 1..k {
            let forward = vectors[i].similarity(&vectors[j], DEFAULT_SIGMA) / 10.0;
            let backward = vectors[j].similarity(&vectors[i], DEFAULT_SIGMA) / 10.0;
            let sym = 0.5 * (forward + backward);
            kernel[i][j] = sym;
            kernel[j][i] = sym;
        }
    }
    kernel
}

/// Score from a kernel spectrum: `-ln(l1 / sum l) / ln k`, clamped to
/// `[0, 1]`. Small negative eigenvalues from rounding count as zero.
pub fn spectrum_score(eigenvalues: &[f64]) -> f64 {
    let k = eigenvalues.len();
    if k < 2 {
        return 0.0;
    }
    let total: f64 = eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let top = eigenvalues[0].max(0.0);
    if total <= 0.0 || top <= 0.0 {
        return 0.0;
    }
    (-(top / total).ln() / (k as f64).ln()).clamp(0.0, 1.0)
}

/// Set diversity from the eigen-spectrum of the CIDEr kernel: 0 for a set
/// of identical captions, 1 for mutually dissimilar captions.
pub fn self_cider(set: &[Caption], idf: &IdfTable) -> Result<SelfCiderReport, MetricError> {
    if set.len() < 2 {
        return Err(MetricError::SetTooSmall {
            need: 2,
            have: set.len(),
        });
    }
    let kernel = cider_kernel(set, idf);
    let eigenvalues = symmetric_eigen(&kernel).values;
    let score = spectrum_score(&eigenvalues);
    Ok(SelfCiderReport {
        kernel,
        eigenvalues,
        score,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Corpus;
    use crate::metrics::cider::build_idf;

    fn cap(s: &str) -> Caption {
        Caption::parse(s)
    }

    fn idf() -> IdfTable {
        let c: Corpus =
            crate::corpus::synthesize_world(&crate::corpus::Lexicon::builtin(), 20, 4, 2)
                .unwrap()
                .corpus;
        build_idf(&c)
    }

    #[test]
    fn identical_set_scores_zero() {
        let c = cap("a red cat on a mat");
        let r = self_cider(&[c.clone(), c.clone(), c.clone()], &idf()).unwrap();
        assert!(r.score.abs() < 1e-9);
        assert!((r.eigenvalues[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_set_scores_one() {
        let r = self_cider(
            &[
                cap("cat mat"),
                cap("dog rug"),
                cap("tree car"),
                cap("horse bench"),
            ],
            &idf(),
        )
        .unwrap();
        assert!((r.score - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spectrum_example() {
        // eigenvalues of [[1,.5,0],[.5,1,0],[0,0,1]]
        let s = spectrum_score(&[1.5, 1.0, 0.5]);
        assert!((s - 2f64.ln() / 3f64.ln()).abs() < 1e-15);
        assert!((s - 0.6309).abs() < 1e-4);
    }

    #[test]
    fn singleton_rejected() {
        assert!(self_cider(&[cap("a cat")], &idf()).is_err());
    }
}
