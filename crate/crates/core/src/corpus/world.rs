//! Synthetic captioning world: random ground-truth scenes realized as
//! reference captions by a fixed template grammar.
//!
//! Grammar (one clause per scene relation, clauses in random order):
//!
//! ```text
//! caption := clause ("and" clause)*
//! clause  := "a" [attr] obj rel "a" [attr] obj
//! ```
//!
//! Every word is drawn uniformly from the synonym class of the scene item it
//! realizes. Each scene attribute is placed on at least one mention of its
//! object somewhere in the context's reference set; every other mention
//! independently carries a random attribute of its object with probability
//! one half.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use super::{tokenize, Caption, ContextRefs, Corpus, CorpusError, Lexicon, Role};
use crate::rng::Rng;
use crate::spice::SceneGraph;

const MIN_ROLE_ITEMS: usize = 4;
const ATTRIBUTE_RATE: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct World {
    pub corpus: Corpus,
    pub scenes: BTreeMap<String, SceneGraph>,
}

#[derive(Clone)]
struct Mention {
    object: usize,
    attribute: Option<usize>,
}

pub fn synthesize_world(
    lexicon: &Lexicon,
    n_contexts: usize,
    refs_per_context: usize,
    seed: u64,
) -> Result<World, WorldError> {
    let objects = lexicon.canonical_items(Role::Object);
    let attributes = lexicon.canonical_items(Role::Attribute);
    let relations = lexicon.canonical_items(Role::Relation);
    for (name, items) in [
        ("objects", &objects),
        ("attributes", &attributes),
        ("relations", &relations),
    ] {
        if items.len() < MIN_ROLE_ITEMS {
            return Err(WorldError::LexiconTooSmall {
                role: name,
                have: items.len(),
            });
        }
    }
    if refs_per_context < 2 {
        return Err(WorldError::TooFewRefs(refs_per_context));
    }
    if n_contexts == 0 {
        return Err(WorldError::Corpus(CorpusError::NoContexts));
    }

    let width = n_contexts.saturating_sub(1).to_string().len().max(4);
    let mut rng = Rng::new(seed);
    let mut contexts = BTreeMap::new();
    let mut scenes = BTreeMap::new();
    for idx in 0..n_contexts {
        let id = format!("ctx{idx:0width$}");
        let (scene, refs) = sample_context(
            &mut rng,
            lexicon,
            (&objects, &attributes, &relations),
            refs_per_context,
        );
        let mut split = ContextRefs::default();
        for (i, caption) in refs.into_iter().enumerate() {
            if i % 2 == 0 {
                split.train_refs.push(caption);
            } else {
                split.eval_refs.push(caption);
            }
        }
        contexts.insert(id.clone(), split);
        scenes.insert(id, scene);
    }
    Ok(World {
        corpus: Corpus::new(contexts)?,
        scenes,
    })
}

type Pools<'a> = (&'a [&'a str], &'a [&'a str], &'a [&'a str]);

fn sample_context(
    rng: &mut Rng,
    lexicon: &Lexicon,
    (objects, attributes, relations): Pools<'_>,
    n_refs: usize,
) -> (SceneGraph, Vec<Caption>) {
    let mut pool: Vec<&str> = objects.to_vec();
    rng.shuffle(&mut pool);
    let n_obj = rng.range_inclusive(2, 4);
    let scene_objects: Vec<&str> = pool[..n_obj].to_vec();

    let object_attrs: Vec<Vec<&str>> = scene_objects
        .iter()
        .map(|_| {
            let mut attrs = attributes.to_vec();
            rng.shuffle(&mut attrs);
            let k = rng.range_inclusive(0, 2);
            attrs.truncate(k);
            attrs.sort_unstable();
            attrs
        })
        .collect();

    // A chain over a random object order mentions every object; extra
    // relations are added on top up to the sampled count.
    let mut order: Vec<usize> = (0..n_obj).collect();
    rng.shuffle(&mut order);
    let n_rel = rng.range_inclusive((n_obj - 1).max(1), 3);
    let mut triples: Vec<(usize, &str, usize)> = Vec::with_capacity(n_rel);
    for w in order.windows(2) {
        let (s, o) = if rng.bernoulli(0.5) {
            (w[0], w[1])
        } else {
            (w[1], w[0])
        };
        triples.push((s, *rng.choose(relations), o));
    }
    let mut attempts = 0;
    while triples.len() < n_rel && attempts < 64 {
        attempts += 1;
        let s = rng.below(n_obj);
        let o = rng.below(n_obj);
        let r = *rng.choose(relations);
        if s != o && !triples.contains(&(s, r, o)) {
            triples.push((s, r, o));
        }
    }

    let mut scene = SceneGraph::default();
    for (i, obj) in scene_objects.iter().enumerate() {
        scene.objects.insert(obj.to_string());
        for attr in &object_attrs[i] {
            scene.attributes.insert((obj.to_string(), attr.to_string()));
        }
    }
    for &(s, r, o) in &triples {
        scene.relations.insert((
            scene_objects[s].to_string(),
            r.to_string(),
            scene_objects[o].to_string(),
        ));
    }

    // Clause order per reference, then one mention per clause side.
    let plans: Vec<Vec<usize>> = (0..n_refs)
        .map(|_| {
            let mut idx: Vec<usize> = (0..triples.len()).collect();
            rng.shuffle(&mut idx);
            idx
        })
        .collect();
    let mut mentions: Vec<Vec<[Mention; 2]>> = plans
        .iter()
        .map(|plan| {
            plan.iter()
                .map(|&t| {
                    let (s, _, o) = triples[t];
                    [
                        Mention {
                            object: s,
                            attribute: None,
                        },
                        Mention {
                            object: o,
                            attribute: None,
                        },
                    ]
                })
                .collect()
        })
        .collect();

    let mut reserved: BTreeSet<(usize, usize, usize)> = BTreeSet::new();
    for (obj, attrs) in object_attrs.iter().enumerate() {
        let slots: Vec<(usize, usize, usize)> = mentions
            .iter()
            .enumerate()
            .flat_map(|(r, clauses)| {
                clauses.iter().enumerate().flat_map(move |(c, pair)| {
                    pair.iter()
                        .enumerate()
                        .filter(move |(_, m)| m.object == obj)
                        .map(move |(side, _)| (r, c, side))
                })
            })
            .collect();
        let mut slots = slots;
        rng.shuffle(&mut slots);
        for (a, slot) in (0..attrs.len()).zip(slots.iter()) {
            mentions[slot.0][slot.1][slot.2].attribute = Some(a);
            reserved.insert(*slot);
        }
    }
    for (r, clauses) in mentions.iter_mut().enumerate() {
        for (c, pair) in clauses.iter_mut().enumerate() {
            for (side, m) in pair.iter_mut().enumerate() {
                let attrs = &object_attrs[m.object];
                if reserved.contains(&(r, c, side)) || attrs.is_empty() {
                    continue;
                }
                if rng.bernoulli(ATTRIBUTE_RATE) {
                    m.attribute = Some(rng.below(attrs.len()));
                }
            }
        }
    }

    let refs = plans
        .iter()
        .zip(&mentions)
        .map(|(plan, clauses)| {
            let mut words: Vec<String> = Vec::new();
            for (ci, (&t, pair)) in plan.iter().zip(clauses).enumerate() {
                if ci > 0 {
                    words.push("and".into());
                }
                let rel = triples[t].1;
                for (side, m) in pair.iter().enumerate() {
                    words.push("a".into());
                    if let Some(a) = m.attribute {
                        words.push(surface(rng, lexicon, object_attrs[m.object][a]));
                    }
                    words.push(surface(rng, lexicon, scene_objects[m.object]));
                    if side == 0 {
                        words.push(surface(rng, lexicon, rel));
                    }
                }
            }
            Caption::new(tokenize(&words.join(" ")))
        })
        .collect();
    (scene, refs)
}

fn surface(rng: &mut Rng, lexicon: &Lexicon, item: &str) -> String {
    rng.choose(&lexicon.surface_forms(item)).to_string()
}

pub fn save_scenes(
    scenes: &BTreeMap<String, SceneGraph>,
    path: impl AsRef<Path>,
) -> Result<(), CorpusError> {
    let path = path.as_ref();
    let mut text = serde_json::to_string(scenes).expect("scenes serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| CorpusError::io(path, e))
}

pub fn load_scenes(path: impl AsRef<Path>) -> Result<BTreeMap<String, SceneGraph>, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Malformed {
        line: e.line(),
        message: e.to_string(),
    })
}

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("lexicon too small to sample a scene: {have} distinct {role}, need {MIN_ROLE_ITEMS}")]
    LexiconTooSmall { role: &'static str, have: usize },
    #[error("refs_per_context must be at least 2, got {0}")]
    TooFewRefs(usize),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
