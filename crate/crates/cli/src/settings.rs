//! Run settings from flags and an optional JSON config file. Config keys
//! are the flag names; flags win on conflict.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use lveg::corpus::UnknownMode;
use lveg::PruneRule;
use serde::Deserialize;

#[derive(Args, Clone, Debug, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    /// JSON file with defaults for any of these flags.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
    /// Training data: Penn trees for `train`, CoNLL-U or word<TAB>tag for `train-tagger`.
    #[arg(long)]
    pub train: Option<PathBuf>,
    /// Development data used to keep the best epoch.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// Input to parse or tag.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Model file to write (training) or read.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Per-sentence k-best trees, groups separated by blank lines; replaces the PCFG mask.
    #[arg(long)]
    pub kbest: Option<PathBuf>,
    /// Write per-epoch JSON-lines metrics here instead of standard output.
    #[arg(long)]
    pub metrics: Option<PathBuf>,
    /// Subtype vector dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Gaussian components per rule weight.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<usize>,
    /// Spherical instead of diagonal covariances.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub spherical: Option<bool>,
    /// Initial weight scale on baseline probabilities.
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Component pruning floor; defaults to 40 when training and 20 otherwise.
    #[arg(long)]
    pub k_min: Option<usize>,
    #[arg(long)]
    pub k_max: Option<usize>,
    #[arg(long)]
    pub theta: Option<f64>,
    /// Keep at most this many components instead of the adaptive rule.
    #[arg(long)]
    pub k_hard: Option<usize>,
    /// Disable component pruning.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub no_prune: Option<bool>,
    /// Baseline posterior threshold for constituent pruning; 0 disables it.
    #[arg(long)]
    pub p_min: Option<f64>,
    /// Words seen at most this often become unknown-word classes.
    #[arg(long)]
    pub unk_threshold: Option<usize>,
    /// Unknown-word classes: berkeley60 or simple.
    #[arg(long)]
    pub unk_mode: Option<UnknownMode>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
}

macro_rules! prefer_flags {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        Settings { config: None, $($field: $flags.$field.or($file.$field)),* }
    };
}

impl Settings {
    /// Fills unset flags from the config file, if one is given.
    pub fn resolve(self) -> anyhow::Result<Settings> {
        let Some(path) = &self.config else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let file: Settings = serde_json::from_str(&text)
            .map_err(|e| lveg::Error::Config(format!("{}: {e}", path.display())))?;
        Ok(prefer_flags!(
            self, file, train, dev, test, model, kbest, metrics, d, k, spherical, alpha, seed, epochs, batch_size, lr,
            k_min, k_max, theta, k_hard, no_prune, p_min, unk_threshold, unk_mode, jobs
        ))
    }

    pub fn prune(&self, training: bool) -> anyhow::Result<PruneRule> {
        if self.no_prune == Some(true) {
            return Ok(PruneRule::Off);
        }
        if let Some(k_hard) = self.k_hard {
            if k_hard == 0 {
                return Err(lveg::Error::Config("--k-hard must be at least 1".into()).into());
            }
            return Ok(PruneRule::Hard { k_hard });
        }
        let default_k_min = if training { 40 } else { 20 };
        let k_min = self.k_min.unwrap_or(default_k_min);
        let k_max = self.k_max.unwrap_or(50);
        let theta = self.theta.unwrap_or(0.35);
        if k_min == 0 || k_max < k_min || !(0.0..=1.0).contains(&theta) {
            return Err(lveg::Error::Config(format!(
                "need 1 <= k-min <= k-max and theta in [0, 1], got {k_min}, {k_max}, {theta}"
            ))
            .into());
        }
        Ok(PruneRule::Adaptive { k_min, k_max, theta })
    }

    pub fn p_min(&self) -> anyhow::Result<f64> {
        let p = self.p_min.unwrap_or(1e-5);
        if !(0.0..=1.0).contains(&p) {
            return Err(lveg::Error::Config(format!("p-min must be in [0, 1], got {p}")).into());
        }
        Ok(p)
    }

    pub fn unk_mode(&self) -> UnknownMode {
        self.unk_mode.unwrap_or(UnknownMode::Berkeley60)
    }

    pub fn require<'a>(&self, path: &'a Option<PathBuf>, flag: &str) -> anyhow::Result<&'a Path> {
        match path {
            Some(p) => Ok(p),
            None => bail!(lveg::Error::Config(format!("--{flag} is required"))),
        }
    }
}
