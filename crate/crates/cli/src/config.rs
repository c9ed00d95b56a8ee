//! `key = value` run configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use hetspec::augment::{MaterializeMode, ObjectiveKind};
use hetspec::encoder::{EncoderError, MaskBias};
use hetspec::evalsuite::EvalConfig;
use hetspec::spectral::SpectrumNorm;
use hetspec::synthgen::{SynthConfig, SynthError};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected key = value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("bad value {value:?} for {key}: expected {expected}")]
    BadValue {
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("{key}: path {} does not exist", path.display())]
    MissingPath { key: &'static str, path: PathBuf },
    #[error("{0}")]
    Invalid(String),
}

type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// graph directory; a synthetic graph is generated when absent
    pub graph: Option<PathBuf>,
    pub out: PathBuf,
    pub eval: EvalConfig,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            graph: None,
            out: PathBuf::from("out"),
            eval: EvalConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str, expected: &'static str) -> Result<T> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        expected,
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => parse::<bool>(key, value, "a boolean"),
    }
}

fn objective_name(k: ObjectiveKind) -> String {
    k.to_string()
}

impl RunConfig {
    /// Every key with its current value, `out` excluded.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.eval.train;
        let a = &t.aug;
        let s = &self.synth;
        let show = |v: &dyn Display| v.to_string();
        vec![
            ("seed", show(&self.seed)),
            ("graph", self.graph.as_ref().map_or("none".into(), |p| p.display().to_string())),
            ("lr", show(&t.lr)),
            ("dim", show(&t.dim)),
            ("tau", show(&t.tau)),
            ("lambda", show(&t.lambda)),
            ("p_tau", show(&t.p_tau)),
            ("p_e", show(&t.p_e)),
            ("epochs", show(&t.epochs)),
            ("patience", show(&t.patience)),
            ("t_pos", show(&t.t_pos)),
            ("mask_bias", "uniform".into()),
            ("aug_lr", show(&a.lr)),
            ("aug_iters", show(&a.iterations)),
            ("objective", objective_name(a.objective)),
            ("norm", if a.norm == SpectrumNorm::L1 { "l1" } else { "l2" }.into()),
            ("budget_fraction", a.budget_fraction.map_or("none".into(), |b| b.to_string())),
            (
                "mode",
                if a.mode == MaterializeMode::Bernoulli { "bernoulli" } else { "deterministic" }.into(),
            ),
            ("literal_eq7", show(&a.literal_eq7)),
            (
                "split_sizes",
                self.eval.split_sizes.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","),
            ),
            ("runs", show(&self.eval.runs)),
            ("n_val", show(&self.eval.n_val)),
            ("n_test", show(&self.eval.n_test)),
            ("synth_n_target", show(&s.n_target)),
            ("synth_k_classes", show(&s.k_classes)),
            ("synth_aux_types", show(&s.aux_types)),
            ("synth_aux_size", show(&s.aux_size)),
            ("synth_p_in", show(&s.p_in)),
            ("synth_p_out", show(&s.p_out)),
            ("synth_feature_dim", show(&s.feature_dim)),
            ("synth_feature_noise", show(&s.feature_noise)),
        ]
    }

    fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), Option<ConfigError>> {
        let t = &mut self.eval.train;
        let s = &mut self.synth;
        let r = match key {
            "seed" => parse(key, value, "an unsigned integer").map(|v| self.seed = v),
            "graph" => {
                self.graph = (value != "none").then(|| PathBuf::from(value));
                Ok(())
            }
            "out" => {
                self.out = PathBuf::from(value);
                Ok(())
            }
            "lr" => parse(key, value, "a number").map(|v| t.lr = v),
            "dim" => parse(key, value, "a positive integer").map(|v| t.dim = v),
            "tau" => parse(key, value, "a number").map(|v| t.tau = v),
            "lambda" => parse(key, value, "a number").map(|v| t.lambda = v),
            "p_tau" => parse(key, value, "a number").map(|v| t.p_tau = v),
            "p_e" => parse(key, value, "a number").map(|v| t.p_e = v),
            "epochs" => parse(key, value, "an unsigned integer").map(|v| t.epochs = v),
            "patience" => parse(key, value, "an unsigned integer").map(|v| t.patience = v),
            "t_pos" => parse(key, value, "an unsigned integer").map(|v| t.t_pos = v),
            "mask_bias" => match value {
                "uniform" => {
                    t.mask_bias = MaskBias::Uniform;
                    Ok(())
                }
                _ => Err(ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    expected: "uniform",
                }),
            },
            "aug_lr" => parse(key, value, "a number").map(|v| t.aug.lr = v),
            "aug_iters" => parse(key, value, "an unsigned integer").map(|v| t.aug.iterations = v),
            "objective" => parse(key, value, "single, single_max, single_min, double, double_max or j_pair")
                .map(|v| t.aug.objective = v),
            "norm" => match value {
                "l2" => Ok(t.aug.norm = SpectrumNorm::L2),
                "l1" => Ok(t.aug.norm = SpectrumNorm::L1),
                _ => Err(ConfigError::BadValue {
                    key: key.into(),
                    value: value.into(),
                    expected: "l1 or l2",
                }),
            },
            "budget_fraction" => match value {
                "none" => Ok(t.aug.budget_fraction = None),
                _ => parse(key, value, "a number or none").map(|v| t.aug.budget_fraction = Some(v)),
            },
            "mode" => parse(key, value, "deterministic or bernoulli").map(|v| t.aug.mode = v),
            "literal_eq7" => parse_bool(key, value).map(|v| t.aug.literal_eq7 = v),
            "split_sizes" => value
                .split(',')
                .map(|v| parse(key, v.trim(), "comma-separated integers"))
                .collect::<Result<Vec<usize>>>()
                .map(|v| self.eval.split_sizes = v),
            "runs" => parse(key, value, "a positive integer").map(|v| self.eval.runs = v),
            "n_val" => parse(key, value, "an unsigned integer").map(|v| self.eval.n_val = v),
            "n_test" => parse(key, value, "an unsigned integer").map(|v| self.eval.n_test = v),
            "synth_n_target" => parse(key, value, "a positive integer").map(|v| s.n_target = v),
            "synth_k_classes" => parse(key, value, "a positive integer").map(|v| s.k_classes = v),
            "synth_aux_types" => parse(key, value, "a positive integer").map(|v| s.aux_types = v),
            "synth_aux_size" => parse(key, value, "a positive integer").map(|v| s.aux_size = v),
            "synth_p_in" => parse(key, value, "a probability").map(|v| s.p_in = v),
            "synth_p_out" => parse(key, value, "a probability").map(|v| s.p_out = v),
            "synth_feature_dim" => parse(key, value, "a positive integer").map(|v| s.feature_dim = v),
            "synth_feature_noise" => parse(key, value, "a number").map(|v| s.feature_noise = v),
            _ => return Err(None),
        };
        r.map_err(Some)
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = Vec::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|s| s == key) {
                return Err(ConfigError::DuplicateKey { line, key: key.into() });
            }
            cfg.set(key, value).map_err(|e| {
                e.unwrap_or_else(|| ConfigError::UnknownKey { line, key: key.into() })
            })?;
            seen.push(key.to_string());
        }
        cfg.finish()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        RunConfig::parse_str(&text)
    }

    /// Propagates the seed and checks bounds and referenced paths.
    pub fn finish(mut self) -> Result<Self> {
        self.eval.train.seed = self.seed;
        self.eval.train.aug.seed = self.seed;
        self.synth.seed = self.seed;
        self.eval.train.validate().map_err(|e| match e {
            EncoderError::Config(m) => ConfigError::Invalid(m),
            other => ConfigError::Invalid(other.to_string()),
        })?;
        self.synth.validate().map_err(|e| match e {
            SynthError::Config(m) => ConfigError::Invalid(m),
            other => ConfigError::Invalid(other.to_string()),
        })?;
        let a = &self.eval.train.aug;
        if !(a.lr > 0.0) {
            return Err(ConfigError::Invalid("aug_lr must be positive".into()));
        }
        if a.budget_fraction.is_some_and(|b| !(b > 0.0)) {
            return Err(ConfigError::Invalid("budget_fraction must be positive".into()));
        }
        if self.eval.runs == 0 || self.eval.split_sizes.is_empty() || self.eval.split_sizes.contains(&0) {
            return Err(ConfigError::Invalid("runs and split sizes must be positive".into()));
        }
        if let Some(p) = &self.graph {
            if !p.exists() {
                return Err(ConfigError::MissingPath { key: "graph", path: p.clone() });
            }
        }
        Ok(self)
    }

    /// First 16 hex digits of the SHA-256 of the canonical `key=value` dump.
    pub fn hash(&self) -> String {
        let mut entries = self.entries();
        entries.sort();
        let mut h = Sha256::new();
        for (k, v) in entries {
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// Header line carried by every output file.
    pub fn header(&self) -> String {
        format!("hetspec config={} seed={}", self.hash(), self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let c = RunConfig::parse_str("").unwrap();
        let t = &c.eval.train;
        assert_eq!((t.lr, t.dim, t.tau, t.lambda, t.p_tau, t.p_e), (0.001, 64, 0.5, 0.5, 0.7, 0.7));
        assert_eq!(t.aug.lr, 0.1);
        assert_eq!(c.eval.split_sizes, vec![20, 40, 60]);
        assert_eq!(c, RunConfig::default().finish().unwrap());
    }

    #[test]
    fn values_comments_and_errors() {
        let c = RunConfig::parse_str("# acm\naug_lr = 0.07   # tuned\n\nseed=4\nsplit_sizes = 5, 7\n").unwrap();
        assert_eq!(c.eval.train.aug.lr, 0.07);
        assert_eq!((c.seed, c.eval.train.seed, c.synth.seed), (4, 4, 4));
        assert_eq!(c.eval.split_sizes, vec![5, 7]);

        let e = RunConfig::parse_str("tau = -1").unwrap_err();
        assert_eq!(e.to_string(), "tau must be positive");
        assert!(matches!(RunConfig::parse_str("tua = 1"), Err(ConfigError::UnknownKey { line: 1, .. })));
        assert!(matches!(RunConfig::parse_str("dim = x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(RunConfig::parse_str("dim"), Err(ConfigError::Syntax { .. })));
        assert!(matches!(RunConfig::parse_str("dim=1\ndim=2"), Err(ConfigError::DuplicateKey { .. })));
        assert!(matches!(
            RunConfig::parse_str("graph = /no/such/dir"),
            Err(ConfigError::MissingPath { .. })
        ));
    }

    #[test]
    fn hash_tracks_settings_but_not_output_dir() {
        let a = RunConfig::parse_str("out = x").unwrap();
        let b = RunConfig::parse_str("out = y").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), RunConfig::parse_str("epochs = 3").unwrap().hash());
        assert_eq!(a.hash().len(), 16);
        let dump: String = a.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect();
        assert_eq!(RunConfig::parse_str(&dump).unwrap().hash(), a.hash());
    }
}
