use std::fs;
use std::path::{Path, PathBuf};

use itermem::neural::{DecodeConfig, ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::UserError;

/// One extractor output in the source list; list position is its rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    pub path: PathBuf,
    /// False when the file's confidences are meaningless and file order should be used.
    #[serde(default = "yes")]
    pub confidence: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    /// Rank of the extraction within its source.
    Rank,
    /// Confidence of a trained checkpoint.
    Model,
    /// Scores from a TSV file.
    External,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub sentences: Option<PathBuf>,
    pub gold: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub sources: Vec<SourceSpec>,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub scorer: ScorerKind,
    pub paths: Paths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sources: Vec::new(),
            seed: 42,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            decode: DecodeConfig::default(),
            scorer: ScorerKind::Rank,
            paths: Paths::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, UserError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UserError(format!("config {}: {e}", path.display())))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| UserError(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every problem found, one per line, each naming its field.
    pub fn validate(&self) -> Result<(), UserError> {
        let mut errs = Vec::new();
        let mut must_exist = |field: String, p: &Path| {
            if !p.exists() {
                errs.push(format!("{field}: {} does not exist", p.display()));
            }
        };
        for (i, s) in self.sources.iter().enumerate() {
            must_exist(format!("sources[{i}].path"), &s.path);
        }
        for (field, p) in [
            ("paths.sentences", &self.paths.sentences),
            ("paths.gold", &self.paths.gold),
            ("paths.scores", &self.paths.scores),
        ] {
            if let Some(p) = p {
                must_exist(field.to_string(), p);
            }
        }
        for (i, s) in self.sources.iter().enumerate() {
            if s.name.trim().is_empty() || s.name.contains(char::is_whitespace) {
                errs.push(format!("sources[{i}].name: must be a non-empty word"));
            }
            if self.sources[..i].iter().any(|o| o.name == s.name) {
                errs.push(format!("sources[{i}].name: duplicate {:?}", s.name));
            }
        }
        let positive = [
            ("model.embed_dim", self.model.embed_dim),
            ("model.hidden_dim", self.model.hidden_dim),
            ("model.attn_dim", self.model.attn_dim),
            ("model.vocab_min_freq", self.model.vocab_min_freq),
            ("train.batch_size", self.train.batch_size),
            ("decode.max_iters", self.decode.max_iters),
            ("decode.max_len", self.decode.max_len),
            ("decode.max_input_len", self.decode.max_input_len),
        ];
        for (field, v) in positive {
            if v == 0 {
                errs.push(format!("{field}: must be positive"));
            }
        }
        for (field, v) in [
            ("train.learning_rate", self.train.learning_rate),
            ("train.clip_norm", self.train.clip_norm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                errs.push(format!("{field}: must be a positive number"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(UserError(format!("invalid configuration:\n  {}", errs.join("\n  "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn field_level_messages() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{"sources": [{"name": "a", "path": "/no/such/file"}], "train": {"learning_rate": 0}}"#,
        )
        .unwrap();
        let msg = cfg.validate().unwrap_err().0;
        assert!(msg.contains("sources[0].path"));
        assert!(msg.contains("train.learning_rate"));
    }

    #[test]
    fn unknown_fields_rejected() {
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"sed": 1}"#).is_err());
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"seed": 1.5}"#).is_err());
    }
}
