use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs;
use std::marker::PhantomData;
use std::path::Path;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::Deserialize;

use super::{ModelError, ScoringModel, Vocab};
use crate::corpus::{Token, BOS, EOS};
use crate::rng::Rng;

/// Exact logit table keyed by `(context, "<bos> w1 w2 ...")`.
///
/// Lookups are strict: a prefix absent from the table is an error, never a
/// fallback distribution.
#[derive(Clone, Debug)]
pub struct TableModel {
    vocab: Vocab,
    rows: HashMap<String, HashMap<String, Vec<f64>>>,
}

#[derive(Deserialize)]
struct TableFile {
    vocab: Vec<String>,
    contexts: UniqueMap<UniqueMap<Vec<f64>>>,
}

/// JSON object that rejects repeated keys instead of keeping the last one.
struct UniqueMap<V>(Vec<(String, V)>);

impl<'de, V: Deserialize<'de>> Deserialize<'de> for UniqueMap<V> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct UniqueVisitor<V>(PhantomData<V>);

        impl<'de, V: Deserialize<'de>> Visitor<'de> for UniqueVisitor<V> {
            type Value = UniqueMap<V>;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object with unique keys")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Self::Value, A::Error> {
                let mut entries: Vec<(String, V)> = Vec::new();
                let mut seen = std::collections::HashSet::new();
                while let Some((key, value)) = map.next_entry::<String, V>()? {
                    if !seen.insert(key.clone()) {
                        return Err(serde::de::Error::custom(format!("duplicate key {key:?}")));
                    }
                    entries.push((key, value));
                }
                Ok(UniqueMap(entries))
            }
        }

        deserializer.deserialize_map(UniqueVisitor(PhantomData))
    }
}

impl TableModel {
    /// Builds a table from in-memory rows. Prefix keys are space-joined and
    /// start with `<bos>`.
    pub fn new(
        vocab: Vocab,
        rows: HashMap<String, HashMap<String, Vec<f64>>>,
    ) -> Result<Self, ModelError> {
        for (ctx, prefixes) in &rows {
            for (prefix, scores) in prefixes {
                if prefix.split(' ').next() != Some(BOS) {
                    return Err(ModelError::InvalidTable(format!(
                        "context {ctx:?}: prefix {prefix:?} must start with {BOS}"
                    )));
                }
                if scores.len() != vocab.len() {
                    return Err(ModelError::InvalidTable(format!(
                        "context {ctx:?}, prefix {prefix:?}: {} scores for {} vocabulary entries",
                        scores.len(),
                        vocab.len()
                    )));
                }
                if scores.iter().any(|s| !s.is_finite()) {
                    return Err(ModelError::InvalidTable(format!(
                        "context {ctx:?}, prefix {prefix:?}: non-finite score"
                    )));
                }
            }
        }
        Ok(TableModel { vocab, rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ModelError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: TableFile =
            serde_json::from_str(text).map_err(|e| ModelError::InvalidTable(e.to_string()))?;
        let tokens = file
            .vocab
            .into_iter()
            .map(Token::new)
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| ModelError::InvalidVocab(e.to_string()))?;
        let vocab = Vocab::new(tokens)?;
        let rows = file
            .contexts
            .0
            .into_iter()
            .map(|(ctx, prefixes)| (ctx, prefixes.0.into_iter().collect()))
            .collect();
        TableModel::new(vocab, rows)
    }

    pub fn prefix_key(&self, prefix: &[usize]) -> String {
        let mut key = String::from(BOS);
        for &id in prefix {
            key.push(' ');
            key.push_str(self.vocab.token(id).as_str());
        }
        key
    }
}

impl TableModel {
    /// Random strict table over `w0 .. w{n-2}, <eos>` covering every
    /// `<eos>`-free prefix shorter than `max_len`, with logits uniform in
    /// `[-spread, spread]`. Used to build oracle instances for the decoders.
    pub fn random(
        n_vocab: usize,
        max_len: usize,
        context_ids: &[&str],
        spread: f64,
        seed: u64,
    ) -> Result<Self, ModelError> {
        if n_vocab < 1 {
            return Err(ModelError::InvalidVocab(
                "vocabulary must contain <eos>".into(),
            ));
        }
        let mut words: Vec<Token> = (0..n_vocab - 1)
            .map(|i| Token::new(format!("w{i}")).expect("valid token"))
            .collect();
        words.push(Token::new(EOS).expect("valid token"));
        let vocab = Vocab::new(words)?;
        let mut rng = Rng::new(seed);
        let mut rows = HashMap::new();
        for ctx in context_ids {
            let mut prefixes: Vec<Vec<usize>> = vec![Vec::new()];
            let mut table = HashMap::new();
            while let Some(prefix) = prefixes.pop() {
                let mut key = String::from(BOS);
                for &id in &prefix {
                    key.push(' ');
                    key.push_str(vocab.token(id).as_str());
                }
                let scores: Vec<f64> = (0..n_vocab)
                    .map(|_| spread * (2.0 * rng.uniform() - 1.0))
                    .collect();
                table.insert(key, scores);
                if prefix.len() + 1 < max_len {
                    for w in (0..n_vocab).filter(|&w| w != vocab.eos()) {
                        let mut next = prefix.clone();
                        next.push(w);
                        prefixes.push(next);
                    }
                }
            }
            rows.insert(ctx.to_string(), table);
        }
        TableModel::new(vocab, rows)
    }

    /// Serializes to the table JSON format with keys in sorted order.
    pub fn to_json(&self) -> String {
        let contexts: BTreeMap<&String, BTreeMap<&String, &Vec<f64>>> = self
            .rows
            .iter()
            .map(|(ctx, rows)| (ctx, rows.iter().collect()))
            .collect();
        serde_json::json!({
            "vocab": self.vocab.tokens().iter().map(Token::as_str).collect::<Vec<_>>(),
            "contexts": contexts,
        })
        .to_string()
    }
}

impl ScoringModel for TableModel {
    fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    fn next_scores(&self, context_id: &str, prefix: &[usize]) -> Result<Vec<f64>, ModelError> {
        let rows = self
            .rows
            .get(context_id)
            .ok_or_else(|| ModelError::UnknownContext(context_id.to_string()))?;
        let key = self.prefix_key(prefix);
        rows.get(&key).cloned().ok_or(ModelError::PrefixNotCovered {
            context: context_id.to_string(),
            prefix: key,
        })
    }
}
