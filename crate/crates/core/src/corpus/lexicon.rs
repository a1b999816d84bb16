use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Function words of the template grammar. They carry no scene content.
pub const FUNCTION_WORDS: [&str; 2] = ["a", "and"];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Object,
    Attribute,
    Relation,
}

#[derive(Serialize, Deserialize)]
struct LexiconFile {
    objects: Vec<String>,
    attributes: Vec<String>,
    relations: Vec<String>,
    #[serde(default)]
    synonyms: Vec<Vec<String>>,
}

/// Role-tagged vocabulary of the synthetic world plus its synonym classes.
///
/// Relations may span two words ("next to"). Each synonym class maps to its
/// lexicographically smallest member.
#[derive(Clone, Debug, PartialEq)]
pub struct Lexicon {
    objects: BTreeSet<String>,
    attributes: BTreeSet<String>,
    relations: BTreeSet<String>,
    synonym_classes: Vec<BTreeSet<String>>,
    canonical: HashMap<String, String>,
}

impl Lexicon {
    pub fn new<S: AsRef<str>>(
        objects: &[S],
        attributes: &[S],
        relations: &[S],
        synonyms: &[Vec<S>],
    ) -> Result<Self, LexiconError> {
        let collect = |items: &[S]| -> Result<BTreeSet<String>, LexiconError> {
            items
                .iter()
                .map(|s| {
                    let w = s.as_ref().trim().to_lowercase();
                    if w.is_empty() {
                        Err(LexiconError::EmptyEntry)
                    } else {
                        Ok(w.split_whitespace().collect::<Vec<_>>().join(" "))
                    }
                })
                .collect()
        };
        let objects = collect(objects)?;
        let attributes = collect(attributes)?;
        let relations = collect(relations)?;
        for w in objects.iter().chain(&attributes) {
            if w.contains(' ') {
                return Err(LexiconError::MultiWord(w.clone()));
            }
        }
        if let Some(w) = relations.iter().find(|r| r.split(' ').count() > 2) {
            return Err(LexiconError::MultiWord(w.clone()));
        }
        for (a, b) in [
            (&objects, &attributes),
            (&objects, &relations),
            (&attributes, &relations),
        ] {
            if let Some(w) = a.intersection(b).next() {
                return Err(LexiconError::RoleOverlap(w.clone()));
            }
        }
        let mut canonical = HashMap::new();
        let mut synonym_classes = Vec::with_capacity(synonyms.len());
        for class in synonyms {
            let class = collect(class)?;
            let Some(rep) = class.first().cloned() else {
                continue;
            };
            for w in &class {
                if !(objects.contains(w) || attributes.contains(w) || relations.contains(w)) {
                    return Err(LexiconError::UnknownSynonym(w.clone()));
                }
                if canonical.insert(w.clone(), rep.clone()).is_some() {
                    return Err(LexiconError::SynonymOverlap(w.clone()));
                }
            }
            synonym_classes.push(class);
        }
        Ok(Lexicon {
            objects,
            attributes,
            relations,
            synonym_classes,
            canonical,
        })
    }

    /// The lexicon the default synthetic world is built from.
    pub fn builtin() -> Self {
        Lexicon::new(
            &[
                "cat", "kitten", "dog", "puppy", "man", "guy", "woman", "lady", "child", "kid",
                "table", "desk", "car", "truck", "bike", "bicycle", "tree", "ball", "mat", "rug",
                "horse", "bench", "sofa", "couch", "bird", "boat", "chair", "lamp",
            ],
            &[
                "red", "blue", "green", "yellow", "white", "black", "small", "little", "large",
                "big", "wooden", "old", "young", "shiny",
            ],
            &[
                "on",
                "near",
                "beside",
                "next to",
                "under",
                "below",
                "behind",
                "holding",
                "riding",
                "facing",
                "looking at",
                "sitting on",
            ],
            &[
                vec!["cat", "kitten"],
                vec!["dog", "puppy"],
                vec!["man", "guy"],
                vec!["woman", "lady"],
                vec!["child", "kid"],
                vec!["table", "desk"],
                vec!["car", "truck"],
                vec!["bike", "bicycle"],
                vec!["mat", "rug"],
                vec!["sofa", "couch"],
                vec!["small", "little"],
                vec!["large", "big"],
                vec!["near", "beside", "next to"],
                vec!["under", "below"],
            ],
        )
        .expect("builtin lexicon is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, LexiconError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| LexiconError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let file: LexiconFile =
            serde_json::from_str(&text).map_err(|e| LexiconError::Parse(e.to_string()))?;
        Lexicon::new(
            &file.objects,
            &file.attributes,
            &file.relations,
            &file.synonyms,
        )
    }

    pub fn to_json(&self) -> String {
        let file = LexiconFile {
            objects: self.objects.iter().cloned().collect(),
            attributes: self.attributes.iter().cloned().collect(),
            relations: self.relations.iter().cloned().collect(),
            synonyms: self
                .synonym_classes
                .iter()
                .map(|c| c.iter().cloned().collect())
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("lexicon serializes")
    }

    pub fn objects(&self) -> &BTreeSet<String> {
        &self.objects
    }

    pub fn attributes(&self) -> &BTreeSet<String> {
        &self.attributes
    }

    pub fn relations(&self) -> &BTreeSet<String> {
        &self.relations
    }

    pub fn synonym_classes(&self) -> &[BTreeSet<String>] {
        &self.synonym_classes
    }

    pub fn role(&self, item: &str) -> Option<Role> {
        if self.objects.contains(item) {
            Some(Role::Object)
        } else if self.attributes.contains(item) {
            Some(Role::Attribute)
        } else if self.relations.contains(item) {
            Some(Role::Relation)
        } else {
            None
        }
    }

    /// Smallest member of the item's synonym class, or the item itself.
    pub fn canonical<'a>(&'a self, item: &'a str) -> &'a str {
        self.canonical.get(item).map(String::as_str).unwrap_or(item)
    }

    /// Members of the synonym class of `item` (just `item` when it has none).
    pub fn surface_forms<'a>(&'a self, item: &'a str) -> Vec<&'a str> {
        let rep = self.canonical(item);
        match self.synonym_classes.iter().find(|c| c.contains(rep)) {
            Some(class) => class.iter().map(String::as_str).collect(),
            None => vec![rep],
        }
    }

    /// Canonical items of one role: one entry per synonym class.
    pub fn canonical_items(&self, role: Role) -> Vec<&str> {
        let set = match role {
            Role::Object => &self.objects,
            Role::Attribute => &self.attributes,
            Role::Relation => &self.relations,
        };
        set.iter()
            .map(String::as_str)
            .filter(|w| self.canonical(w) == *w)
            .collect()
    }

    /// True when the single word occurs in some lexicon item or is a
    /// grammar function word.
    pub fn knows(&self, word: &str) -> bool {
        FUNCTION_WORDS.contains(&word)
            || self.objects.contains(word)
            || self.attributes.contains(word)
            || self
                .relations
                .iter()
                .any(|r| r.split(' ').any(|w| w == word))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LexiconError {
    #[error("empty lexicon entry")]
    EmptyEntry,
    #[error("{0:?}: objects and attributes are single words, relations at most two")]
    MultiWord(String),
    #[error("{0:?} appears in more than one role")]
    RoleOverlap(String),
    #[error("synonym {0:?} is not a lexicon item")]
    UnknownSynonym(String),
    #[error("{0:?} appears in more than one synonym class")]
    SynonymOverlap(String),
    #[error("lexicon: {0}")]
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

    #[test]
    fn builtin_is_consistent() {
        let lex = Lexicon::builtin();
        assert_eq!(lex.canonical("kitten"), "cat");
        assert_eq!(lex.canonical("next to"), "beside");
        assert_eq!(lex.canonical("zebra"), "zebra");
        assert!(lex.canonical_items(Role::Object).len() >= 4);
        assert!(lex.knows("next") && lex.knows("a") && !lex.knows("zebra"));
    }

    #[test]
    fn validation_errors() {
        let none: Vec<Vec<&str>> = vec![];
        assert!(matches!(
            Lexicon::new(&["cat"], &["cat"], &["on"], &none),
            Err(LexiconError::RoleOverlap(_))
        ));
        assert!(matches!(
            Lexicon::new(&["cat"], &["red"], &["on"], &[vec!["cat", "dog"]]),
            Err(LexiconError::UnknownSynonym(_))
        ));
        assert!(matches!(
            Lexicon::new(
                &["cat", "dog", "pup"],
                &["red"],
                &["on"],
                &[vec!["cat", "dog"], vec!["dog", "pup"]]
            ),
            Err(LexiconError::SynonymOverlap(_))
        ));
    }

    #[test]
    fn json_round_trip() {
        let lex = Lexicon::builtin();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lex.json");
        fs::write(&path, lex.to_json()).unwrap();
        assert_eq!(Lexicon::load(&path).unwrap(), lex);
    }
}
