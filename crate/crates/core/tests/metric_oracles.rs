#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashSet};

use divdecode_core::corpus::{Caption, ContextRefs, Corpus};
use divdecode_core::metrics::{
    bleu, build_idf, cider_d, cider_kernel, div_n, mbleu, oracle_and_average, self_cider,
    symmetric_eigen, IdfTable, DEFAULT_SIGMA,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn cap(s: &str) -> Caption {
    Caption::parse(s)
}

const TOY: [(&str, &str, &str); 4] = [
    ("c0", "a cat on a mat", "a kitten on a mat"),
    ("c1", "a dog on a rug", "a dog near a tree"),
    ("c2", "a man riding a horse", "a man on a horse"),
    ("c3", "a red car near a tree", "a car"),
];

fn toy_corpus() -> Corpus {
    let mut contexts = BTreeMap::new();
    for (id, train, eval) in TOY {
        contexts.insert(
            id.to_string(),
            ContextRefs {
                train_refs: vec![cap(train)],
                eval_refs: vec![cap(eval)],
            },
        );
    }
    Corpus::new(contexts).unwrap()
}

fn grams(words: &[&str], n: usize) -> Vec<String> {
    if words.len() < n {
        return Vec::new();
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

/// Dense re-implementation straight from the definition: explicit n-gram
/// universe, document frequencies recounted from raw text.
fn cider_brute_force(candidate: &str, refs: &[&str]) -> f64 {
    let docs: Vec<Vec<&str>> = TOY.iter().map(|(_, a, b)| vec![*a, *b]).collect();
    let n_docs = docs.len() as f64;
    let cand: Vec<&str> = candidate.split(' ').collect();
    let mut total = 0.0;
    for n in 1..=4 {
        let mut per_ref = 0.0;
        for r in refs {
            let rw: Vec<&str> = r.split(' ').collect();
            let (cg, rg) = (grams(&cand, n), grams(&rw, n));
            let universe: Vec<String> = {
                let mut u: Vec<String> = cg.iter().chain(&rg).cloned().collect();
                u.sort();
                u.dedup();
                u
            };
            let idf = |g: &String| {
                let df = docs
                    .iter()
                    .filter(|d| {
                        d.iter()
                            .any(|s| grams(&s.split(' ').collect::<Vec<_>>(), n).contains(g))
                    })
                    .count();
                if df == 0 {
                    n_docs.ln()
                } else {
                    (n_docs / df as f64).ln()
                }
            };
            let count = |v: &Vec<String>, g: &String| v.iter().filter(|x| *x == g).count() as f64;
            let vc: Vec<f64> = universe.iter().map(|g| count(&cg, g) * idf(g)).collect();
            let vr: Vec<f64> = universe.iter().map(|g| count(&rg, g) * idf(g)).collect();
            let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let dot: f64 = vc.iter().zip(&vr).map(|(a, b)| a.min(*b) * b).sum();
            let denom = norm(&vc) * norm(&vr);
            let delta = cand.len() as f64 - rw.len() as f64;
            let pen = (-(delta * delta) / (2.0 * 36.0)).exp();
            if denom > 0.0 {
                per_ref += pen * dot / denom;
            }
        }
        total += per_ref / refs.len() as f64;
    }
    10.0 * total / 4.0
}

#[test]
fn cider_matches_brute_force() {
    let idf = build_idf(&toy_corpus());
    for (c, refs) in [
        ("a tree", vec!["a dog near a tree", "a red car near a tree"]),
        ("red car", vec!["a red car near a tree", "a car"]),
        ("a horse", vec!["a man on a horse", "a man riding a horse"]),
        ("cat mat", vec!["a cat on a mat", "a kitten on a mat"]),
    ] {
        let ref_caps: Vec<Caption> = refs.iter().map(|r| cap(r)).collect();
        let got = cider_d(&cap(c), &ref_caps, &idf, DEFAULT_SIGMA);
        let want = cider_brute_force(c, &refs);
        assert!((got - want).abs() < 1e-12, "{c}: {got} vs {want}");
    }
    // idf spot value on the toy corpus: "near a" occurs in c1 and c3
    assert!((idf.weight(2, "near a") - 2f64.ln()).abs() < 1e-12);
}

#[test]
fn identity_endpoints() {
    let idf = build_idf(&toy_corpus());
    for s in [
        "a dog near a tree",
        "a man riding a horse",
        "a red car near a tree",
    ] {
        let c = cap(s);
        assert_eq!(bleu(&c, std::slice::from_ref(&c)).unwrap(), 1.0);
        let v = cider_d(&c, std::slice::from_ref(&c), &idf, DEFAULT_SIGMA);
        assert!((v - 10.0).abs() < 1e-9, "{v}");
    }
}

fn random_set(rng: &mut StdRng, k: usize) -> Vec<Caption> {
    const WORDS: [&str; 10] = [
        "a", "cat", "dog", "on", "mat", "red", "tree", "near", "man", "horse",
    ];
    (0..k)
        .map(|_| {
            let len = rng.random_range(1..=7);
            let words: Vec<&str> = (0..len)
                .map(|_| WORDS[rng.random_range(0..WORDS.len())])
                .collect();
            cap(&words.join(" "))
        })
        .collect()
}

#[test]
fn oracle_dominates_average() {
    let idf = build_idf(&toy_corpus());
    let refs = vec![cap("a dog near a tree"), cap("a cat on a mat")];
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..100 {
        let k = rng.random_range(1..=8);
        let set = random_set(&mut rng, k);
        let (o, a) = oracle_and_average(&set, |c| cider_d(c, &refs, &idf, DEFAULT_SIGMA)).unwrap();
        assert!(o >= a);
        let (o, a) = oracle_and_average(&set, |c| bleu(c, &refs).unwrap()).unwrap();
        assert!(o >= a);
    }
}

#[test]
fn jacobi_agrees_with_nalgebra() {
    let mut rng = StdRng::seed_from_u64(99);
    for _ in 0..100 {
        let n = 8;
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i..n {
                let v: f64 = rng.random_range(-1.0..1.0);
                m[i][j] = v;
                m[j][i] = v;
            }
        }
        let e = symmetric_eigen(&m);
        let rec = e.reconstruct();
        let frob: f64 = m
            .iter()
            .flatten()
            .zip(rec.iter().flatten())
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(frob < 1e-9, "{frob}");
        let trace: f64 = (0..n).map(|i| m[i][i]).sum();
        assert!((e.values.iter().sum::<f64>() - trace).abs() < 1e-9);

        let dm = nalgebra::DMatrix::from_fn(n, n, |i, j| m[i][j]);
        let mut reference: Vec<f64> = dm.symmetric_eigen().eigenvalues.iter().copied().collect();
        reference.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in e.values.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}

fn world_idf() -> IdfTable {
    let lex = divdecode_core::Lexicon::builtin();
    build_idf(
        &divdecode_core::corpus::synthesize_world(&lex, 40, 6, 5)
            .unwrap()
            .corpus,
    )
}

#[test]
fn kernel_is_symmetric_unit_diagonal_psd() {
    let idf = world_idf();
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..50 {
        let k = rng.random_range(2..=8);
        let set = random_set(&mut rng, k);
        let kernel = cider_kernel(&set, &idf);
        for i in 0..k {
            assert_eq!(kernel[i][i], 1.0);
            for j in 0..k {
                assert!((kernel[i][j] - kernel[j][i]).abs() < 1e-9);
            }
        }
        let report = self_cider(&set, &idf).unwrap();
        assert!(
            report.eigenvalues.iter().all(|&l| l >= -1e-8),
            "{:?}",
            report.eigenvalues
        );
        assert!((0.0..=1.0).contains(&report.score));
    }
}

#[test]
fn self_cider_is_permutation_invariant() {
    let idf = world_idf();
    let mut rng = StdRng::seed_from_u64(21);
    for _ in 0..50 {
        let k = rng.random_range(2..=6);
        let set = random_set(&mut rng, k);
        let mut shuffled = set.clone();
        shuffled.reverse();
        shuffled.rotate_left(1);
        let a = self_cider(&set, &idf).unwrap().score;
        let b = self_cider(&shuffled, &idf).unwrap().score;
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn self_cider_endpoints() {
    let idf = world_idf();
    let same = vec![cap("a red cat on a mat"); 5];
    assert!(self_cider(&same, &idf).unwrap().score.abs() < 1e-9);
    let disjoint = vec![
        cap("cat mat"),
        cap("dog tree"),
        cap("horse bench"),
        cap("bird boat"),
    ];
    assert!((self_cider(&disjoint, &idf).unwrap().score - 1.0).abs() < 1e-9);
}

#[test]
fn duplication_recomputed_literally() {
    let mut rng = StdRng::seed_from_u64(5);
    for _ in 0..50 {
        let k = rng.random_range(2..=5);
        let set = random_set(&mut rng, k);
        let doubled: Vec<Caption> = set.iter().chain(&set).cloned().collect();
        for n in [1, 2] {
            let numerator = |s: &[Caption]| {
                s.iter()
                    .flat_map(|c| {
                        let w: Vec<&str> = c.tokens.iter().map(|t| t.as_str()).collect();
                        grams(&w, n)
                    })
                    .collect::<HashSet<String>>()
                    .len()
            };
            assert_eq!(numerator(&set), numerator(&doubled));
            assert!((div_n(&doubled, n) - div_n(&set, n) / 2.0).abs() < 1e-15);
        }
        assert!(mbleu(&doubled).unwrap() >= mbleu(&set).unwrap() - 1e-12);
    }
}

#[test]
fn mbleu_mixed_example() {
    let same = cap("a cat on a mat");
    let other = cap("two dogs under the tree");
    let set = vec![same.clone(), same.clone(), other.clone()];
    let want = (bleu(&same, &[same.clone(), other.clone()]).unwrap() * 2.0
        + bleu(&other, &[same.clone(), same.clone()]).unwrap())
        / 3.0;
    assert!((mbleu(&set).unwrap() - want).abs() < 1e-15);
    assert!((want - 2.0 / 3.0).abs() < 1e-15);
}
