//! Scene-graph tuples, SPICE and the set-level AllSPICE score.
//!
//! Graphs are extracted with an exact extractor for the template grammar
//! `a [attr] obj rel a [attr] obj (and ...)*`. All stored words are canonical
//! synonym-class representatives, so set union is synonym-aware.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Caption, Lexicon, Role, Token};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneGraph {
    #[serde(default)]
    pub objects: BTreeSet<String>,
    #[serde(default)]
    pub attributes: BTreeSet<(String, String)>,
    #[serde(default)]
    pub relations: BTreeSet<(String, String, String)>,
}

impl SceneGraph {
    pub fn len(&self) -> usize {
        self.objects.len() + self.attributes.len() + self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_subset(&self, other: &SceneGraph) -> bool {
        self.objects.is_subset(&other.objects)
            && self.attributes.is_subset(&other.attributes)
            && self.relations.is_subset(&other.relations)
    }

    pub fn intersection_len(&self, other: &SceneGraph) -> usize {
        self.objects.intersection(&other.objects).count()
            + self.attributes.intersection(&other.attributes).count()
            + self.relations.intersection(&other.relations).count()
    }

    pub fn extend(&mut self, other: &SceneGraph) {
        self.objects.extend(other.objects.iter().cloned());
        self.attributes.extend(other.attributes.iter().cloned());
        self.relations.extend(other.relations.iter().cloned());
    }

    /// Rewrites every word to its canonical synonym.
    pub fn canonicalized(&self, lexicon: &Lexicon) -> SceneGraph {
        let c = |w: &String| canonicalize(w, lexicon);
        SceneGraph {
            objects: self.objects.iter().map(c).collect(),
            attributes: self.attributes.iter().map(|(o, a)| (c(o), c(a))).collect(),
            relations: self
                .relations
                .iter()
                .map(|(s, r, o)| (c(s), c(r), c(o)))
                .collect(),
        }
    }
}

pub fn canonicalize(word: &str, lexicon: &Lexicon) -> String {
    lexicon.canonical(word).to_string()
}

/// Left-to-right extraction over the template grammar. Unknown words,
/// articles and conjunctions are skipped; ungrammatical input yields a
/// partial (possibly empty) graph rather than an error.
pub fn extract_graph(caption: &Caption, lexicon: &Lexicon) -> SceneGraph {
    extract_tokens(&caption.tokens, lexicon)
}

pub fn extract_tokens(tokens: &[Token], lexicon: &Lexicon) -> SceneGraph {
    let mut graph = SceneGraph::default();
    let mut last_object: Option<String> = None;
    let mut pending_attr: Option<String> = None;
    let mut pending_rels: Vec<(String, String)> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let word = tokens[i].as_str();
        let pair = tokens
            .get(i + 1)
            .map(|next| format!("{word} {}", next.as_str()));
        let (item, role, width) = match pair.as_deref().map(|p| (p, lexicon.role(p))) {
            Some((p, Some(Role::Relation))) => (p.to_string(), Some(Role::Relation), 2),
            _ => (word.to_string(), lexicon.role(word), 1),
        };
        i += width;
        match role {
            Some(Role::Object) => {
                let obj = canonicalize(&item, lexicon);
                graph.objects.insert(obj.clone());
                if let Some(attr) = pending_attr.take() {
                    graph.attributes.insert((obj.clone(), attr));
                }
                for (subject, rel) in pending_rels.drain(..) {
                    graph.relations.insert((subject, rel, obj.clone()));
                }
                last_object = Some(obj);
            }
            Some(Role::Attribute) => {
                pending_attr = Some(canonicalize(&item, lexicon));
            }
            Some(Role::Relation) => {
                pending_attr = None;
                if let Some(subject) = &last_object {
                    pending_rels.push((subject.clone(), canonicalize(&item, lexicon)));
                }
            }
            None => pending_attr = None,
        }
    }
    graph
}

pub fn merge_graphs<'a>(graphs: impl IntoIterator<Item = &'a SceneGraph>) -> SceneGraph {
    let mut merged = SceneGraph::default();
    for g in graphs {
        merged.extend(g);
    }
    merged
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpiceScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub matched: usize,
    pub n_candidate: usize,
    pub n_reference: usize,
}

impl SpiceScore {
    pub fn from_counts(matched: usize, n_candidate: usize, n_reference: usize) -> Self {
        let ratio = |num: usize, den: usize| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(matched, n_candidate);
        let recall = ratio(matched, n_reference);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        SpiceScore {
            precision,
            recall,
            f1,
            matched,
            n_candidate,
            n_reference,
        }
    }
}

/// Tuple-level F-score. An empty candidate (or reference) scores zero.
pub fn spice_f1(candidate: &SceneGraph, reference: &SceneGraph) -> SpiceScore {
    SpiceScore::from_counts(
        candidate.intersection_len(reference),
        candidate.len(),
        reference.len(),
    )
}

pub fn spice(candidate: &Caption, refs: &[Caption], lexicon: &Lexicon) -> SpiceScore {
    let reference = merge_graphs(
        &refs
            .iter()
            .map(|r| extract_graph(r, lexicon))
            .collect::<Vec<_>>(),
    );
    spice_f1(&extract_graph(candidate, lexicon), &reference)
}

/// SPICE of the union graph of a whole caption set against the union graph
/// of the references.
pub fn allspice(set: &[Caption], refs: &[Caption], lexicon: &Lexicon) -> SpiceScore {
    let graphs = |caps: &[Caption]| {
        caps.iter()
            .map(|c| extract_graph(c, lexicon))
            .collect::<Vec<_>>()
    };
    spice_f1(&merge_graphs(&graphs(set)), &merge_graphs(&graphs(refs)))
}

#[derive(Debug, Deserialize)]
struct TupleEntry {
    candidates: Vec<GraphItem>,
    references: Vec<GraphItem>,
}

/// A list element is one caption's graph or a group of graphs.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum GraphItem {
    Many(Vec<SceneGraph>),
    One(SceneGraph),
}

impl GraphItem {
    fn graphs(&self) -> &[SceneGraph] {
        match self {
            GraphItem::Many(v) => v,
            GraphItem::One(g) => std::slice::from_ref(g),
        }
    }
}

/// Scores a pre-parsed tuple file
/// (`{"ctx": {"candidates": [graph, ...], "references": [graph, ...]}}`,
/// where any element may also be a nested list of graphs) with AllSPICE, canonicalizing words through `lexicon` when given.
pub fn allspice_from_tuple_file(
    path: impl AsRef<Path>,
    lexicon: Option<&Lexicon>,
) -> Result<BTreeMap<String, SpiceScore>, TupleFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| TupleFileError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let entries: BTreeMap<String, TupleEntry> =
        serde_json::from_str(&text).map_err(|e| TupleFileError::Parse(e.to_string()))?;
    Ok(entries
        .into_iter()
        .map(|(id, entry)| {
            let canon = |g: &SceneGraph| match lexicon {
                Some(lex) => g.canonicalized(lex),
                None => g.clone(),
            };
            let merged = |items: &[GraphItem]| {
                merge_graphs(
                    &items
                        .iter()
                        .flat_map(GraphItem::graphs)
                        .map(canon)
                        .collect::<Vec<_>>(),
                )
            };
            let (cand, refs) = (merged(&entry.candidates), merged(&entry.references));
            (id, spice_f1(&cand, &refs))
        })
        .collect())
}

#[derive(Debug, thiserror::Error)]
pub enum TupleFileError {
    #[error("tuple file: {0}")]
    Parse(String),
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

    fn lex() -> Lexicon {
        Lexicon::builtin()
    }

    fn cap(s: &str) -> Caption {
        Caption::parse(s)
    }

    fn set<T: Ord + Clone>(items: &[T]) -> BTreeSet<T> {
        items.iter().cloned().collect()
    }

    fn s(x: &str) -> String {
        x.to_string()
    }

    #[test]
    fn canonicalize_examples() {
        let l = lex();
        assert_eq!(canonicalize("kitten", &l), "cat");
        assert_eq!(canonicalize("zebra", &l), "zebra");
        for w in ["kitten", "cat", "next to", "couch"] {
            let once = canonicalize(w, &l);
            assert_eq!(canonicalize(&once, &l), once);
        }
    }

    #[test]
    fn extract_simple_clause() {
        let g = extract_graph(&cap("a red cat on a mat"), &lex());
        assert_eq!(g.objects, set(&[s("cat"), s("mat")]));
        assert_eq!(g.attributes, set(&[(s("cat"), s("red"))]));
        assert_eq!(g.relations, set(&[(s("cat"), s("on"), s("mat"))]));
        assert!(extract_graph(&cap(""), &lex()).is_empty());
    }

    #[test]
    fn extract_two_word_relations_and_conjunctions() {
        let g = extract_graph(
            &cap("a little kitten next to a rug and a dog sitting on a wooden bench"),
            &lex(),
        );
        assert_eq!(g.objects, set(&[s("bench"), s("cat"), s("dog"), s("mat")]));
        assert_eq!(
            g.attributes,
            set(&[(s("cat"), s("little")), (s("bench"), s("wooden"))])
        );
        assert_eq!(
            g.relations,
            set(&[
                (s("cat"), s("beside"), s("mat")),
                (s("dog"), s("sitting on"), s("bench"))
            ])
        );
    }

    #[test]
    fn attribute_must_immediately_precede_object() {
        let g = extract_graph(&cap("a red and cat"), &lex());
        assert!(g.attributes.is_empty());
        // Relation with no object on its left yields nothing.
        let g = extract_graph(&cap("on a mat"), &lex());
        assert!(g.relations.is_empty());
    }

    #[test]
    fn merge_examples() {
        let l = lex();
        let g = extract_graph(&cap("a red cat on a mat"), &l);
        assert_eq!(merge_graphs([&g, &g]), g);
        assert_eq!(merge_graphs([&g, &SceneGraph::default()]), g);
        let a = extract_graph(&cap("a cat"), &l);
        let b = extract_graph(&cap("a kitten"), &l);
        assert_eq!(merge_graphs([&a, &b]).objects, set(&[s("cat")]));
    }

    #[test]
    fn f1_from_counts() {
        let score = SpiceScore::from_counts(2, 4, 8);
        assert_eq!(score.precision, 0.5);
        assert_eq!(score.recall, 0.25);
        assert!((score.f1 - 1.0 / 3.0).abs() < 1e-15);
        let g = extract_graph(&cap("a red cat on a mat"), &lex());
        let same = spice_f1(&g, &g);
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        let other = extract_graph(&cap("a dog"), &lex());
        assert_eq!(spice_f1(&g, &other).f1, 0.0);
        let empty = SceneGraph::default();
        assert_eq!(spice_f1(&empty, &empty).f1, 0.0);
    }

    #[test]
    fn f1_on_constructed_graphs() {
        // 4 candidate tuples, 2 shared, 8 reference tuples.
        let reference = SceneGraph {
            objects: set(&[s("cat"), s("mat"), s("dog"), s("ball")]),
            attributes: set(&[(s("cat"), s("red")), (s("dog"), s("big"))]),
            relations: set(&[
                (s("cat"), s("on"), s("mat")),
                (s("dog"), s("near"), s("ball")),
            ]),
        };
        let candidate = SceneGraph {
            objects: set(&[s("cat"), s("tree"), s("car")]),
            attributes: set(&[(s("cat"), s("red"))]),
            relations: BTreeSet::new(),
        };
        let score = spice_f1(&candidate, &reference);
        assert_eq!(
            (score.matched, score.n_candidate, score.n_reference),
            (2, 4, 8)
        );
        assert!((score.f1 - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn allspice_singleton_is_spice() {
        let l = lex();
        let refs = [cap("a red cat on a mat"), cap("a cat near a dog")];
        let c = cap("a cat on a rug");
        assert_eq!(
            allspice(std::slice::from_ref(&c), &refs, &l),
            spice(&c, &refs, &l)
        );
    }

    #[test]
    fn tuple_file_scoring() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tuples.json");
        fs::write(
            &path,
            r#"{"img": {"candidates": [{"objects": ["kitten"]}, {"objects": ["cat"], "relations": [["cat","on","mat"]]}],
                        "references": [{"objects": ["cat", "mat"], "attributes": [["cat","red"]], "relations": [["cat","on","rug"]]}]}}"#,
        )
        .unwrap();
        let scores = allspice_from_tuple_file(&path, Some(&lex())).unwrap();
        let s = scores["img"];
        // candidate {cat, (cat,on,mat)} vs reference {cat, mat, (cat,red), (cat,on,mat)}
        assert_eq!((s.matched, s.n_candidate, s.n_reference), (2, 2, 4));
        let raw = allspice_from_tuple_file(&path, None).unwrap();
        assert_eq!(raw["img"].matched, 1);

        fs::write(
            &path,
            r#"{"img": {"candidates": [[{"objects": ["kitten"]}, {"objects": ["cat"], "relations": [["cat","on","mat"]]}]],
                        "references": [[{"objects": ["cat", "mat"], "attributes": [["cat","red"]], "relations": [["cat","on","rug"]]}]]}}"#,
        )
        .unwrap();
        assert_eq!(
            allspice_from_tuple_file(&path, Some(&lex())).unwrap()["img"],
            s
        );
        fs::write(&path, r#"{"img": {"candidates": 3, "references": []}}"#).unwrap();
        assert!(matches!(
            allspice_from_tuple_file(&path, None),
            Err(TupleFileError::Parse(_))
        ));
    }
}
