//! Flat TOML run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use deid_audit::attacks::Aggregation;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

/// Which tagger heads to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CrfMode {
    On,
    Off,
    Both,
}

impl CrfMode {
    /// Heads to train, no-CRF first.
    pub fn heads(self) -> Vec<bool> {
        match self {
            CrfMode::On => vec![true],
            CrfMode::Off => vec![false],
            CrfMode::Both => vec![false, true],
        }
    }
}

/// Every knob of a pipeline run. Unknown keys are rejected so typos fail
/// loudly instead of silently falling back to defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,

    /// CoNLL corpus to ingest; a synthetic corpus is generated when absent.
    pub corpus_path: Option<PathBuf>,
    /// One name per line. All three must be given together.
    pub surnames_path: Option<PathBuf>,
    pub male_path: Option<PathBuf>,
    pub female_path: Option<PathBuf>,
    /// `word v1 ... vd` text vectors; seeded random vectors when absent.
    pub embeddings_path: Option<PathBuf>,

    pub synth_reports: usize,
    pub synth_names_per_report: usize,
    pub synth_repetition_quota: usize,
    pub synth_templates: usize,
    pub dict_surnames: usize,
    pub dict_male: usize,
    pub dict_female: usize,

    pub embedding_dim: usize,
    pub char_dim: usize,
    pub char_hidden: usize,
    pub char_bidirectional: bool,
    pub token_hidden: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub clip_norm: f64,
    pub epochs_crf: usize,
    pub epochs_no_crf: usize,
    pub crf: CrfMode,
    /// Keep only the first N train reports.
    pub overfit_dial: Option<usize>,

    pub num_shadow: usize,
    /// Head used by the shadow models and the MIA target.
    pub mia_crf: bool,
    /// Shadow epoch budget; defaults to the head's training budget.
    pub shadow_epochs: Option<usize>,
    /// Epoch budget of the MIA target alone (0 leaves it untrained).
    pub mia_target_epochs: Option<usize>,
    pub brute_dict_size: usize,
    pub repetition_min: usize,
    pub repetition_reports: usize,
    pub aggregation: Aggregation,
    pub attack_hidden: usize,
    pub attack_epochs: usize,
    pub attack_learning_rate: f64,

    pub hist_bins: usize,
    pub kde_grid: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: PathBuf::from("out"),
            corpus_path: None,
            surnames_path: None,
            male_path: None,
            female_path: None,
            embeddings_path: None,
            synth_reports: 60,
            synth_names_per_report: 4,
            synth_repetition_quota: 3,
            synth_templates: 40,
            dict_surnames: 3000,
            dict_male: 1000,
            dict_female: 1000,
            embedding_dim: 100,
            char_dim: 25,
            char_hidden: 25,
            char_bidirectional: true,
            token_hidden: 100,
            learning_rate: 0.01,
            dropout: 0.5,
            clip_norm: 5.0,
            epochs_crf: 95,
            epochs_no_crf: 88,
            crf: CrfMode::Both,
            overfit_dial: None,
            num_shadow: 12,
            mia_crf: false,
            shadow_epochs: None,
            mia_target_epochs: None,
            brute_dict_size: 1000,
            repetition_min: 6,
            repetition_reports: 3,
            aggregation: Aggregation::Mean,
            attack_hidden: 64,
            attack_epochs: 100,
            attack_learning_rate: 0.01,
            hist_bins: 20,
            kde_grid: 200,
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| config_err(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Input paths in a config file are relative to the file's directory.
    fn resolve_relative(&mut self, base: &Path) {
        for p in [
            &mut self.corpus_path,
            &mut self.surnames_path,
            &mut self.male_path,
            &mut self.female_path,
            &mut self.embeddings_path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }

    pub fn epochs(&self, crf: bool) -> usize {
        if crf {
            self.epochs_crf
        } else {
            self.epochs_no_crf
        }
    }

    /// Checks every referenced input and numeric range; nothing is computed
    /// before this passes.
    pub fn validate(&self) -> Result<(), CliError> {
        let inputs = [
            ("corpus_path", &self.corpus_path),
            ("surnames_path", &self.surnames_path),
            ("male_path", &self.male_path),
            ("female_path", &self.female_path),
            ("embeddings_path", &self.embeddings_path),
        ];
        for (key, path) in inputs {
            if let Some(p) = path {
                if !p.is_file() {
                    return Err(config_err(format!("{key}: {} does not exist", p.display())));
                }
            }
        }
        let given = [&self.surnames_path, &self.male_path, &self.female_path]
            .iter()
            .filter(|p| p.is_some())
            .count();
        if given != 0 && given != 3 {
            return Err(config_err("surnames_path, male_path and female_path must be given together"));
        }
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("char_dim", self.char_dim),
            ("char_hidden", self.char_hidden),
            ("token_hidden", self.token_hidden),
            ("brute_dict_size", self.brute_dict_size),
            ("repetition_reports", self.repetition_reports),
            ("attack_hidden", self.attack_hidden),
            ("hist_bins", self.hist_bins),
        ];
        for (key, v) in positive {
            if v == 0 {
                return Err(config_err(format!("{key} must be positive")));
            }
        }
        if self.corpus_path.is_none() && self.synth_reports == 0 {
            return Err(config_err("synth_reports must be positive"));
        }
        if self.kde_grid < 2 {
            return Err(config_err("kde_grid must be at least 2"));
        }
        if self.num_shadow < deid_audit::attacks::ShadowPlan::MIN_SHADOWS {
            return Err(config_err(format!(
                "num_shadow must be at least {}",
                deid_audit::attacks::ShadowPlan::MIN_SHADOWS
            )));
        }
        if self.overfit_dial == Some(0) {
            return Err(config_err("overfit_dial must keep at least one report"));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite())
            || !(self.attack_learning_rate >= 0.0 && self.attack_learning_rate.is_finite())
        {
            return Err(config_err("learning rates must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(config_err("dropout must lie in [0, 1)"));
        }
        if !(self.clip_norm >= 0.0) {
            return Err(config_err("clip_norm must be non-negative"));
        }
        Ok(())
    }

    /// Canonical TOML rendering; the hash below is taken over it.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical rendering with `out_dir` blanked, so moving
    /// the output directory does not invalidate checkpoints.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        hex::encode(Sha256::digest(c.to_toml().as_bytes()))
    }
}
