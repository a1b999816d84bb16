//! Sweep configuration (TOML).
//!
//! ```toml
//! seed = 0                  # run seed; each context derives its own
//! output_dir = "sweep-out"
//! n_samples = [5]           # caption-set sizes for the sampling methods
//! max_len = 20
//!
//! # Either a corpus file (plus an optional lexicon file) ...
//! # corpus = "corpus.jsonl"
//! # lexicon = "lexicon.json"
//! # ... or a synthetic world, used when `corpus` is absent.
//! [world]
//! contexts = 200
//! refs_per_context = 10
//! seed = 42
//!
//! [model]
//! kind = "ngram"            # or "table" with `path = "table.json"`
//! order = 3
//! add_k = 0.1
//! beta = 0.7
//!
//! [[methods]]               # one entry per method template
//! method = "sp"             # sp | topk | topp | bs | dbs
//! T = [0.5, 1.0]            # every field is a value list; T defaults to [1.0]
//! # K = [...] (topk), p = [...] (topp), m = [...] (bs, dbs),
//! # G = [...] and lambda = [...] (dbs)
//! ```
//!
//! A template expands to the cartesian product of its lists, then of
//! `n_samples` for sampling methods. Search methods produce `m` captions and
//! ignore `n_samples`. Relative paths are resolved against the config file.

use std::fs;
use std::path::{Path, PathBuf};

use divdecode_core::decoders::{DecodeError, DecodeParams, Method};
use divdecode_core::models::NGramModelParams;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "default_n_samples")]
    pub n_samples: Vec<usize>,
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    #[serde(default)]
    pub world: WorldSpec,
    #[serde(default)]
    pub model: ModelSpec,
    pub methods: Vec<MethodGrid>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sweep-out")
}

fn default_n_samples() -> Vec<usize> {
    vec![5]
}

fn default_max_len() -> usize {
    DecodeParams::DEFAULT_MAX_LEN
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldSpec {
    pub contexts: usize,
    pub refs_per_context: usize,
    pub seed: u64,
}

impl Default for WorldSpec {
    fn default() -> Self {
        WorldSpec {
            contexts: 200,
            refs_per_context: 10,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Ngram(NGramSpec),
    Table { path: PathBuf },
}

/// Mirror of [`NGramModelParams`] so the TOML table can reject unknown keys.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NGramSpec {
    #[serde(default = "ngram_default_order")]
    pub order: usize,
    #[serde(default = "ngram_default_add_k")]
    pub add_k: f64,
    #[serde(default = "ngram_default_beta")]
    pub beta: f64,
}

fn ngram_default_order() -> usize {
    NGramModelParams::default().order
}

fn ngram_default_add_k() -> f64 {
    NGramModelParams::default().add_k
}

fn ngram_default_beta() -> f64 {
    NGramModelParams::default().beta
}

impl From<NGramSpec> for NGramModelParams {
    fn from(s: NGramSpec) -> Self {
        NGramModelParams {
            order: s.order,
            add_k: s.add_k,
            beta: s.beta,
        }
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        let p = NGramModelParams::default();
        ModelSpec::Ngram(NGramSpec {
            order: p.order,
            add_k: p.add_k,
            beta: p.beta,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodGrid {
    pub method: Method,
    #[serde(rename = "T", default = "default_temperatures")]
    pub temperature: Vec<f64>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub top_k: Option<Vec<usize>>,
    #[serde(rename = "p", default, skip_serializing_if = "Option::is_none")]
    pub top_p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<usize>>,
    #[serde(rename = "G", default, skip_serializing_if = "Option::is_none")]
    pub groups: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<Vec<f64>>,
}

fn default_temperatures() -> Vec<f64> {
    vec![1.0]
}

impl MethodGrid {
    pub fn new(method: Method, temperature: &[f64]) -> Self {
        MethodGrid {
            method,
            temperature: temperature.to_vec(),
            top_k: None,
            top_p: None,
            m: None,
            groups: None,
            lambda: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid sweep grid: {0}")]
    Invalid(String),
}

impl ConfigError {
    /// Grid and parameter problems are usage errors; unreadable or
    /// unparsable files are runtime errors.
    pub fn is_usage(&self) -> bool {
        matches!(self, ConfigError::Invalid(_))
    }
}

/// Present lists must be non-empty; absent ones expand to a single `None`.
fn axis<T: Copy>(name: &str, values: &Option<Vec<T>>) -> Result<Vec<Option<T>>, ConfigError> {
    match values {
        None => Ok(vec![None]),
        Some(v) if v.is_empty() => Err(ConfigError::Invalid(format!("{name} grid is empty"))),
        Some(v) => Ok(v.iter().copied().map(Some).collect()),
    }
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut config: SweepConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        if let Some(p) = self.corpus.as_mut() {
            fix(p);
        }
        if let Some(p) = self.lexicon.as_mut() {
            fix(p);
        }
        if let ModelSpec::Table { path } = &mut self.model {
            fix(path);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Every grid point in canonical order: templates in file order, then
    /// `n_samples`, `T`, `K`, `p`, `m`, `G`, `lambda` from outer to inner.
    pub fn expand(&self) -> Result<Vec<DecodeParams>, ConfigError> {
        if self.methods.is_empty() {
            return Err(ConfigError::Invalid("no method templates".into()));
        }
        if self.n_samples.is_empty() {
            return Err(ConfigError::Invalid("n_samples grid is empty".into()));
        }
        let mut points = Vec::new();
        for grid in &self.methods {
            if grid.temperature.is_empty() {
                return Err(ConfigError::Invalid(format!(
                    "{} template: T grid is empty",
                    grid.method
                )));
            }
            let sizes: Vec<Option<usize>> = if grid.method.is_sampling() {
                self.n_samples.iter().copied().map(Some).collect()
            } else {
                vec![None]
            };
            let ks = axis("K", &grid.top_k)?;
            let ps = axis("p", &grid.top_p)?;
            let ms = axis("m", &grid.m)?;
            let gs = axis("G", &grid.groups)?;
            let ls = axis("lambda", &grid.lambda)?;
            for &n in &sizes {
                for &t in &grid.temperature {
                    for &k in &ks {
                        for &p in &ps {
                            for &m in &ms {
                                for &g in &gs {
                                    for &l in &ls {
                                        let params = DecodeParams {
                                            method: grid.method,
                                            temperature: t,
                                            top_k: k,
                                            top_p: p,
                                            m,
                                            groups: g,
                                            lambda: l,
                                            n_samples: n.or(m).unwrap_or(1),
                                            max_len: self.max_len,
                                            seed: self.seed,
                                        };
                                        params.validate().map_err(|e| match e {
                                            DecodeError::InvalidParams(msg) => {
                                                ConfigError::Invalid(format!(
                                                    "{} template: {msg}",
                                                    grid.method
                                                ))
                                            }
                                            other => ConfigError::Invalid(other.to_string()),
                                        })?;
                                        points.push(params);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    /// The temperature / truncation / beam grid used for the tradeoff plots:
    /// five captions per context on the default synthetic world.
    pub fn default_preset() -> Self {
        let topk = MethodGrid {
            top_k: Some(vec![1, 3, 5, 10]),
            ..MethodGrid::new(Method::Topk, &[1.0])
        };
        let topp = MethodGrid {
            top_p: Some(vec![0.5, 0.8, 0.9, 1.0]),
            ..MethodGrid::new(Method::Topp, &[1.0])
        };
        let bs = MethodGrid {
            m: Some(vec![5]),
            ..MethodGrid::new(Method::Bs, &[1.0])
        };
        let dbs = MethodGrid {
            m: Some(vec![5]),
            groups: Some(vec![5]),
            lambda: Some(vec![0.0, 0.3, 1.0, 3.0]),
            ..MethodGrid::new(Method::Dbs, &[1.0])
        };
        SweepConfig {
            seed: 0,
            output_dir: default_output_dir(),
            n_samples: default_n_samples(),
            max_len: default_max_len(),
            corpus: None,
            lexicon: None,
            world: WorldSpec::default(),
            model: ModelSpec::default(),
            methods: vec![
                MethodGrid::new(Method::Sp, &[0.2, 0.33, 0.5, 0.6, 0.7, 0.75, 0.8, 0.9, 1.0]),
                topk,
                topp,
                bs,
                dbs,
            ],
        }
    }

    /// Naive sampling at two temperatures over growing caption sets.
    pub fn sample_size_preset() -> Self {
        SweepConfig {
            n_samples: vec![5, 20, 100],
            output_dir: PathBuf::from("sample-size-out"),
            methods: vec![MethodGrid::new(Method::Sp, &[0.5, 1.0])],
            ..Self::default_preset()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "default" => Some(Self::default_preset()),
            "sample-size" => Some(Self::sample_size_preset()),
            _ => None,
        }
    }
}
