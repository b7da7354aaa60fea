use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::corpus::{ScoreScaling, SplitSpec};
use crate::error::{Error, Result};
use crate::seqmodel::{Architecture, Peephole, ScorerHyper};
use crate::sswe::SsweHyper;

/// A value that can appear on the right of `key = value`.
pub trait ConfigValue: Sized {
    fn parse_value(s: &str) -> std::result::Result<Self, String>;
    fn render(&self) -> String;
}

macro_rules! from_str_value {
    ($($t:ty),*) => {$(
        impl ConfigValue for $t {
            fn parse_value(s: &str) -> std::result::Result<Self, String> {
                s.parse().map_err(|e| format!("{e}"))
            }
            fn render(&self) -> String {
                format!("{self:?}")
            }
        }
    )*};
}
from_str_value!(usize, u64, bool);

impl ConfigValue for f64 {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err("must be finite".into())
        }
    }
    fn render(&self) -> String {
        format!("{self:?}")
    }
}

impl ConfigValue for String {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        Ok(s.to_string())
    }
    fn render(&self) -> String {
        self.clone()
    }
}

impl ConfigValue for Peephole {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "full" => Ok(Peephole::Full),
            "diagonal" => Ok(Peephole::Diagonal),
            "off" => Ok(Peephole::Off),
            _ => Err("expected full, diagonal or off".into()),
        }
    }
    fn render(&self) -> String {
        match self {
            Peephole::Full => "full",
            Peephole::Diagonal => "diagonal",
            Peephole::Off => "off",
        }
        .into()
    }
}

impl ConfigValue for ScoreScaling {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        match s {
            "normalized" => Ok(ScoreScaling::Normalized),
            "raw" => Ok(ScoreScaling::Raw),
            _ => Err("expected normalized or raw".into()),
        }
    }
    fn render(&self) -> String {
        match self {
            ScoreScaling::Normalized => "normalized",
            ScoreScaling::Raw => "raw",
        }
        .into()
    }
}

/// Inclusive `lo..hi` interval of a search dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: ConfigValue + PartialOrd + Copy> ConfigValue for Interval<T> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s.split_once("..").ok_or("expected `lo..hi`")?;
        let lo = T::parse_value(a.trim())?;
        let hi = T::parse_value(b.trim())?;
        if lo > hi {
            return Err("empty interval".into());
        }
        Ok(Interval { lo, hi })
    }
    fn render(&self) -> String {
        format!("{}..{}", self.lo.render(), self.hi.render())
    }
}

/// Comma-separated list; empty means none.
impl ConfigValue for Vec<f64> {
    fn parse_value(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(f64::parse_value)
            .collect()
    }
    fn render(&self) -> String {
        self.iter().map(|v| v.render()).collect::<Vec<_>>().join(",")
    }
}

macro_rules! config {
    ($( $(#[doc = $doc:literal])* $key:ident : $ty:ty = $default:expr; )*) => {
        /// Every pipeline setting. Keys, file syntax and command-line flags
        /// share the same names.
        #[derive(Debug, Clone, PartialEq)]
        pub struct Config {
            $( $(#[doc = $doc])* pub $key: $ty, )*
        }

        impl Default for Config {
            fn default() -> Self {
                Config { $( $key: $default, )* }
            }
        }

        impl Config {
            /// `(key, help)` for every setting, in canonical order.
            pub const KEYS: &'static [(&'static str, &'static str)] = &[
                $( (stringify!($key), concat!($($doc, )* "")), )*
            ];

            pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
                match key {
                    $( stringify!($key) => {
                        self.$key = <$ty as ConfigValue>::parse_value(value).map_err(|e| {
                            Error::Config(format!("invalid value `{value}` for `{key}`: {e}"))
                        })?;
                    } )*
                    _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
                }
                Ok(())
            }

            pub fn entries(&self) -> Vec<(&'static str, String)> {
                vec![ $( (stringify!($key), self.$key.render()), )* ]
            }
        }
    };
}

config! {
    /// ASAP-format TSV with essay_id, essay_set, essay and domain1_score columns.
    data: String = "data/essays.tsv".into();
    /// Optional `set<TAB>min<TAB>max` table; observed extremes otherwise.
    score_ranges: String = String::new();
    /// Split manifests and the tokenised corpus cache.
    splits_dir: String = "work/splits".into();
    /// Embedding and scorer files.
    models_dir: String = "work/models".into();
    /// Histories, metrics and search results.
    reports_dir: String = "work/reports".into();
    /// HTML quality maps.
    heatmaps_dir: String = "work/heatmaps".into();
    /// Master seed for splitting, initialisation and shuffling.
    seed: u64 = 0;
    /// Keep at most this many essays (seeded subsample); 0 keeps all.
    max_essays: usize = 0;
    /// Report malformed rows and continue instead of failing.
    skip_bad_rows: bool = false;
    /// normalized (per-set min/max into [0,1]) or raw.
    scaling: ScoreScaling = ScoreScaling::Normalized;
    train_ratio: f64 = 0.64;
    validation_ratio: f64 = 0.16;
    test_ratio: f64 = 0.20;
    /// Words seen fewer times in the training split map to <unk>.
    min_count: usize = 2;
    /// Word embedding width D.
    dim: usize = 200;
    /// Embedding network hidden width H.
    hidden: usize = 100;
    /// Context window n (odd).
    window: usize = 9;
    /// Corrupted windows per true window E.
    corruptions: usize = 200;
    /// Weight of the context loss; 1 - alpha weighs the score loss.
    alpha: f64 = 0.1;
    /// Embedding SGD learning rate.
    learning_rate: f64 = 1e-7;
    embedding_epochs: usize = 10;
    /// Path of pretrained embeddings, `learned` for random jointly trained
    /// ones, or `auto` for the embedding file under models_dir.
    embeddings: String = "auto".into();
    /// LSTM width per direction.
    units: usize = 10;
    /// 1 or 2 stacked LSTM layers.
    layers: usize = 1;
    bidirectional: bool = false;
    /// full, diagonal or off.
    peephole: Peephole = Peephole::Full;
    /// Dropout on each LSTM layer's outputs.
    dropout: f64 = 0.5;
    batch_size: usize = 32;
    epochs: usize = 50;
    /// Epochs without validation improvement before stopping; 0 disables.
    patience: usize = 25;
    /// Keep the best-validation snapshot rather than the last model.
    keep_best: bool = true;
    /// RMSprop learning rate of the scorer.
    scorer_learning_rate: f64 = 1e-3;
    rms_decay: f64 = 0.9;
    rms_epsilon: f64 = 1e-8;
    /// Batch gradient norm limit; 0 disables clipping.
    clip_norm: f64 = 0.0;
    /// Random-search trials.
    search_trials: usize = 10;
    /// Scorer epochs per search trial.
    search_epochs: usize = 20;
    search_dim: Interval<usize> = Interval { lo: 50, hi: 300 };
    search_hidden: Interval<usize> = Interval { lo: 50, hi: 200 };
    search_window: Interval<usize> = Interval { lo: 3, hi: 11 };
    search_corruptions: Interval<usize> = Interval { lo: 10, hi: 200 };
    search_alpha: Interval<f64> = Interval { lo: 0.0, hi: 1.0 };
    /// Sampled log-uniformly.
    search_learning_rate: Interval<f64> = Interval { lo: 1e-8, hi: 1e-2 };
    search_units: Interval<usize> = Interval { lo: 5, hi: 50 };
    search_dropout: Interval<f64> = Interval { lo: 0.0, hi: 0.6 };
    /// Evaluate every sampled configuration once per listed alpha.
    search_alphas: Vec<f64> = Vec::new();
}

pub const CONFIG_ENV: &str = "ATS_CONFIG";

impl Config {
    /// Applies `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("{origin}:{}: expected `key = value`", i + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| Error::Config(format!("{origin}:{}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Config::default();
        cfg.apply_text(&text, &path.display().to_string())?;
        Ok(cfg)
    }

    /// Canonical `key = value` text; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_text().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn metadata(&self) -> Vec<(String, String)> {
        vec![("config_hash".into(), self.hash())]
    }

    pub fn validate(&self) -> Result<()> {
        self.split_spec().validate()?;
        self.sswe_hyper().validate()?;
        self.architecture().validate()?;
        self.scorer_hyper().validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if !(self.scorer_learning_rate > 0.0) {
            return Err(Error::Config("scorer_learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.rms_decay) || !(self.rms_epsilon > 0.0) {
            return Err(Error::Config("rms_decay must be in [0, 1) and rms_epsilon positive".into()));
        }
        if self.clip_norm < 0.0 {
            return Err(Error::Config("clip_norm must be >= 0".into()));
        }
        if self.min_count == 0 {
            return Err(Error::Config("min_count must be >= 1".into()));
        }
        self.search_space().validate()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train: self.train_ratio,
            validation: self.validation_ratio,
            test: self.test_ratio,
            seed: self.seed,
        }
    }

    pub fn sswe_hyper(&self) -> SsweHyper {
        SsweHyper {
            dim: self.dim,
            hidden: self.hidden,
            window: self.window,
            corruptions: self.corruptions,
            alpha: self.alpha,
            learning_rate: self.learning_rate,
            epochs: self.embedding_epochs,
            seed: self.seed,
        }
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            dim: self.dim,
            units: self.units,
            layers: self.layers,
            bidirectional: self.bidirectional,
            peephole: self.peephole,
        }
    }

    pub fn scorer_hyper(&self) -> ScorerHyper {
        ScorerHyper {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.scorer_learning_rate,
            rms_decay: self.rms_decay,
            rms_epsilon: self.rms_epsilon,
            patience: (self.patience > 0).then_some(self.patience),
            keep_best: self.keep_best,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            seed: self.seed,
        }
    }

    pub fn search_space(&self) -> super::search::SearchSpace {
        super::search::SearchSpace {
            dim: self.search_dim,
            hidden: self.search_hidden,
            window: self.search_window,
            corruptions: self.search_corruptions,
            alpha: self.search_alpha,
            learning_rate: self.search_learning_rate,
            units: self.search_units,
            dropout: self.search_dropout,
            trials: self.search_trials,
            forced_alphas: self.search_alphas.clone(),
            seed: self.seed,
        }
    }

    pub fn manifest_path(&self, split: &str) -> PathBuf {
        Path::new(&self.splits_dir).join(format!("{split}.ids"))
    }

    pub fn cache_path(&self) -> PathBuf {
        Path::new(&self.splits_dir).join("corpus.cache")
    }

    pub fn default_embeddings_path(&self) -> PathBuf {
        Path::new(&self.models_dir).join("embeddings.sswe")
    }

    pub fn model_path(&self) -> PathBuf {
        Path::new(&self.models_dir).join("scorer.sats")
    }
}
