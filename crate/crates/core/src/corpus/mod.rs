//! Tokens, captions, reference corpora and the synthetic captioning world.

mod lexicon;
mod world;

use std::borrow::Borrow;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use lexicon::{Lexicon, LexiconError, Role, FUNCTION_WORDS};
pub use world::{load_scenes, save_scenes, synthesize_world, World, WorldError};

pub const BOS: &str = "<bos>";
pub const EOS: &str = "<eos>";
pub const UNK: &str = "<unk>";

/// A single lowercase word. Never empty and never contains whitespace.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Token(String);

impl Token {
    pub fn new(text: impl Into<String>) -> Result<Self, CorpusError> {
        let text = text.into();
        if text.is_empty() || text.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidToken(text));
        }
        Ok(Token(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_reserved(&self) -> bool {
        matches!(self.0.as_str(), BOS | EOS | UNK)
    }
}

impl TryFrom<String> for Token {
    type Error = CorpusError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        Token::new(value)
    }
}

impl From<Token> for String {
    fn from(token: Token) -> Self {
        token.0
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercases, splits on whitespace runs and strips `.,!?` from token edges.
/// Tokens that are pure punctuation disappear.
pub fn tokenize(line: &str) -> Vec<Token> {
    line.split_whitespace()
        .filter_map(|word| {
            let trimmed = word.trim_matches(|c| matches!(c, '.' | ',' | '!' | '?'));
            if trimmed.is_empty() {
                None
            } else {
                Some(Token(trimmed.to_lowercase()))
            }
        })
        .collect()
}

/// A token sequence, without `<bos>`/`<eos>`, optionally carrying the
/// natural-log score the decoder assigned to it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Caption {
    pub tokens: Vec<Token>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub logprob: Option<f64>,
}

impl Caption {
    pub fn new(tokens: Vec<Token>) -> Self {
        Caption {
            tokens,
            logprob: None,
        }
    }

    pub fn with_logprob(tokens: Vec<Token>, logprob: f64) -> Self {
        Caption {
            tokens,
            logprob: Some(logprob),
        }
    }

    pub fn parse(line: &str) -> Self {
        Caption::new(tokenize(line))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn text(&self) -> String {
        join(&self.tokens)
    }
}

pub(crate) fn join(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(t.as_str());
    }
    out
}

/// Contiguous n-grams of `tokens` with multiplicity, keyed by the
/// space-joined n-gram text.
pub fn ngrams(tokens: &[Token], n: usize) -> Result<HashMap<String, usize>, CorpusError> {
    if n == 0 {
        return Err(CorpusError::ZeroOrder);
    }
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(join(window)).or_insert(0) += 1;
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ContextRefs {
    pub train_refs: Vec<Caption>,
    pub eval_refs: Vec<Caption>,
}

/// Reference captions grouped by context id.
///
/// Contexts are kept in id order so every traversal (and every file written
/// from a corpus) is canonical.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    contexts: BTreeMap<String, ContextRefs>,
    all_train: Vec<Caption>,
}

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    context_id: String,
    split: Split,
    captions: Vec<String>,
}

#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Split {
    Train,
    Eval,
}

impl Corpus {
    pub fn new(contexts: BTreeMap<String, ContextRefs>) -> Result<Self, CorpusError> {
        if contexts.is_empty() {
            return Err(CorpusError::NoContexts);
        }
        for (id, refs) in &contexts {
            if refs.train_refs.is_empty() || refs.eval_refs.is_empty() {
                return Err(CorpusError::EmptySplit(id.clone()));
            }
            if refs
                .train_refs
                .iter()
                .chain(&refs.eval_refs)
                .any(Caption::is_empty)
            {
                return Err(CorpusError::EmptyReference(id.clone()));
            }
        }
        let all_train = contexts
            .values()
            .flat_map(|r| r.train_refs.iter().cloned())
            .collect();
        Ok(Corpus {
            contexts,
            all_train,
        })
    }

    pub fn contexts(&self) -> &BTreeMap<String, ContextRefs> {
        &self.contexts
    }

    pub fn context(&self, id: &str) -> Option<&ContextRefs> {
        self.contexts.get(id)
    }

    pub fn context_ids(&self) -> impl Iterator<Item = &str> {
        self.contexts.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.contexts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contexts.is_empty()
    }

    pub fn all_train(&self) -> &[Caption] {
        &self.all_train
    }

    /// Replaces every reference word outside `lexicon` (and outside the
    /// articles/conjunctions the template grammar uses) with `<unk>`.
    pub fn map_unknown(&self, lexicon: &Lexicon) -> Corpus {
        let map = |c: &Caption| {
            Caption::new(
                c.tokens
                    .iter()
                    .map(|t| {
                        if lexicon.knows(t.as_str()) {
                            t.clone()
                        } else {
                            Token(UNK.to_string())
                        }
                    })
                    .collect(),
            )
        };
        let contexts = self
            .contexts
            .iter()
            .map(|(id, refs)| {
                (
                    id.clone(),
                    ContextRefs {
                        train_refs: refs.train_refs.iter().map(map).collect(),
                        eval_refs: refs.eval_refs.iter().map(map).collect(),
                    },
                )
            })
            .collect();
        Corpus::new(contexts).expect("mapping preserves corpus shape")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CorpusError> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
        let mut contexts: BTreeMap<String, ContextRefs> = BTreeMap::new();
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| CorpusError::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: CorpusLine =
                serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
                    line: lineno,
                    message: e.to_string(),
                })?;
            let captions = record
                .captions
                .iter()
                .map(|s| Caption::parse(s))
                .collect::<Vec<_>>();
            if captions.iter().any(Caption::is_empty) {
                return Err(CorpusError::Malformed {
                    line: lineno,
                    message: "empty caption".into(),
                });
            }
            let entry = contexts.entry(record.context_id).or_default();
            match record.split {
                Split::Train => entry.train_refs.extend(captions),
                Split::Eval => entry.eval_refs.extend(captions),
            }
        }
        Corpus::new(contexts)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CorpusError> {
        let path = path.as_ref();
        let mut out = Vec::new();
        for (id, refs) in &self.contexts {
            for (split, caps) in [
                (Split::Train, &refs.train_refs),
                (Split::Eval, &refs.eval_refs),
            ] {
                let line = CorpusLine {
                    context_id: id.clone(),
                    split,
                    captions: caps.iter().map(Caption::text).collect(),
                };
                serde_json::to_writer(&mut out, &line).expect("corpus line serializes");
                out.push(b'\n');
            }
        }
        let mut file = fs::File::create(path).map_err(|e| CorpusError::io(path, e))?;
        file.write_all(&out).map_err(|e| CorpusError::io(path, e))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("invalid token {0:?}")]
    InvalidToken(String),
    #[error("n-gram order must be at least 1")]
    ZeroOrder,
    #[error("no contexts")]
    NoContexts,
    #[error("context {0:?} needs at least one train and one eval reference")]
    EmptySplit(String),
    #[error("context {0:?} has an empty reference caption")]
    EmptyReference(String),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(words: &[&str]) -> Vec<Token> {
        words.iter().map(|w| Token::new(*w).unwrap()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("A man riding."), toks(&["a", "man", "riding"]));
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("Two  Dogs RUN"), toks(&["two", "dogs", "run"]));
        assert_eq!(tokenize(" ... , "), Vec::<Token>::new());
    }

    #[test]
    fn ngram_examples() {
        let counts = ngrams(&toks(&["a", "b", "a", "b"]), 2).unwrap();
        assert_eq!(counts.len(), 2);
        assert_eq!(counts["a b"], 2);
        assert_eq!(counts["b a"], 1);
        assert!(ngrams(&toks(&["a"]), 2).unwrap().is_empty());
        let uni = ngrams(&toks(&["a", "b", "c"]), 1).unwrap();
        assert_eq!(uni.len(), 3);
        assert!(uni.values().all(|&c| c == 1));
        assert!(matches!(
            ngrams(&toks(&["a"]), 0),
            Err(CorpusError::ZeroOrder)
        ));
    }

    #[test]
    fn token_rejects_whitespace() {
        assert!(Token::new("").is_err());
        assert!(Token::new("a b").is_err());
        assert!(Token::new(EOS).unwrap().is_reserved());
    }

    fn small_corpus() -> Corpus {
        let mut contexts = BTreeMap::new();
        contexts.insert(
            "img1".to_string(),
            ContextRefs {
                train_refs: vec![Caption::parse("a cat on a mat")],
                eval_refs: vec![Caption::parse("a kitten on a rug")],
            },
        );
        contexts.insert(
            "img0".to_string(),
            ContextRefs {
                train_refs: vec![Caption::parse("a dog"), Caption::parse("a big dog")],
                eval_refs: vec![Caption::parse("a puppy")],
            },
        );
        Corpus::new(contexts).unwrap()
    }

    #[test]
    fn save_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let corpus = small_corpus();
        corpus.save(&path).unwrap();
        assert_eq!(Corpus::load(&path).unwrap(), corpus);
        assert_eq!(corpus.all_train().len(), 3);
    }

    #[test]
    fn load_reports_line_of_missing_field() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(
            &path,
            "{\"context_id\":\"a\",\"split\":\"train\",\"captions\":[\"x\"]}\n{\"context_id\":\"a\",\"split\":\"eval\"}\n",
        )
        .unwrap();
        let err = Corpus::load(&path).unwrap_err().to_string();
        assert!(err.starts_with("line 2: missing field"), "{err}");
    }

    #[test]
    fn load_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "").unwrap();
        assert_eq!(Corpus::load(&path).unwrap_err().to_string(), "no contexts");
    }

    #[test]
    fn context_without_eval_refs_is_rejected() {
        let mut contexts = BTreeMap::new();
        contexts.insert(
            "x".to_string(),
            ContextRefs {
                train_refs: vec![Caption::parse("a b")],
                eval_refs: vec![],
            },
        );
        assert!(matches!(
            Corpus::new(contexts),
            Err(CorpusError::EmptySplit(_))
        ));
    }

    proptest! {
        #[test]
        fn tokenize_idempotent(line in "[A-Za-z.,!? ]{0,40}") {
            let once = tokenize(&line);
            let twice = tokenize(&join(&once));
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn ngram_mass(words in proptest::collection::vec("[a-c]", 0..12), n in 1usize..5) {
            let tokens: Vec<Token> = words.iter().map(|w| Token::new(w.clone()).unwrap()).collect();
            let total: usize = ngrams(&tokens, n).unwrap().values().sum();
            prop_assert_eq!(total, (tokens.len() + 1).saturating_sub(n));
        }
    }
}
