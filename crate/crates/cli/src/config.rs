//! One flat JSON configuration with flag overrides.
//!
//! Precedence, lowest to highest: built-in defaults, the `--config` file,
//! the `RECG_CACHE_DIR` environment variable (cache directory only), then
//! command-line flags. The resolved configuration is validated once and
//! handed to the subcommands in typed form.

use crate::{CliError, Overrides};
use recg_core::model::FusionKind;
use recg_core::preprocess::{ClassScheme, PreprocessConfig};
use recg_core::train::TrainConfig;
use serde::Deserialize;
use std::path::PathBuf;

/// Environment override for the cache directory — the only variable read.
pub const CACHE_DIR_ENV: &str = "RECG_CACHE_DIR";

/// The configuration file schema. Every field is optional in the file and
/// falls back to the documented default; unknown keys are rejected.
#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    /// Directory of WFDB records (`.hea`/`.dat`/`.atr` triples). Default `data`.
    pub data_dir: PathBuf,
    /// Dataset cache directory. Default `cache`.
    pub cache_dir: PathBuf,
    /// Artifact directory for checkpoints, reports, and dumps. Default `out`.
    pub output_dir: PathBuf,
    /// Labeling scheme: `mitbih10` or `aami`. Default `mitbih10`.
    pub scheme: String,
    /// Fusion layer: `concat`, `cca`, or `sacc`. Default `sacc`.
    pub fusion: String,
    /// Beat half-window in samples. Default 128.
    pub delta_n: usize,
    /// Hann smoothing window length N (N+1 taps). Default 14.
    pub smoothing_window: usize,
    /// Which signal of each record to use. Default 0.
    pub channel: usize,
    /// Fraction of beats in the training split. Default 0.9.
    pub train_fraction: f64,
    /// Mini-batch size. Default 32.
    pub batch_size: usize,
    /// Training epochs. Default 40.
    pub epochs: usize,
    /// Peak learning rate. Default 0.01.
    pub base_lr: f64,
    /// Warmup epochs (must stay below `epochs`). Default 5.
    pub warmup_steps: usize,
    /// Cosine cycles over the post-warmup span. Default 0.5.
    pub num_cycles: f64,
    /// Seed for initialization, shuffling, dropout, and the split. Default 257.
    pub seed: u64,
    /// Adam first-moment decay. Default 0.9.
    pub beta1: f64,
    /// Adam second-moment decay. Default 0.999.
    pub beta2: f64,
    /// Adam denominator floor. Default 1e-8.
    pub epsilon: f64,
    /// Dropout rate inside the trunk (training only). Default 0.25.
    pub trunk_dropout: f64,
    /// Dropout rate before the final dense layer. Default 0.1.
    pub head_dropout: f64,
}

impl Default for CliConfig {
    fn default() -> CliConfig {
        let t = TrainConfig::default();
        CliConfig {
            data_dir: "data".into(),
            cache_dir: "cache".into(),
            output_dir: "out".into(),
            scheme: t.scheme.name().to_string(),
            fusion: t.fusion.name().to_string(),
            delta_n: 128,
            smoothing_window: 14,
            channel: 0,
            train_fraction: 0.9,
            batch_size: t.batch_size,
            epochs: t.epochs,
            base_lr: t.base_lr,
            warmup_steps: t.warmup_steps,
            num_cycles: t.num_cycles,
            seed: t.seed,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            trunk_dropout: t.trunk_dropout,
            head_dropout: t.head_dropout,
        }
    }
}

/// Fully validated configuration in the types the library crates expect.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub data_dir: PathBuf,
    pub cache_dir: PathBuf,
    pub output_dir: PathBuf,
    pub scheme: ClassScheme,
    pub fusion: FusionKind,
    pub train_fraction: f64,
    pub preprocess: PreprocessConfig,
    pub train: TrainConfig,
}

impl Resolved {
    pub fn checkpoint_path(&self) -> PathBuf {
        self.output_dir.join("model.ckpt")
    }

    pub fn history_path(&self) -> PathBuf {
        self.output_dir.join("history.csv")
    }

    pub fn report_path(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }
}

/// Applies the precedence chain and validates the result.
pub fn resolve(overrides: &Overrides) -> Result<Resolved, CliError> {
    let mut config = match &overrides.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                CliError::Config(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str::<CliConfig>(&text)
                .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?
        }
        None => CliConfig::default(),
    };

    if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
        config.cache_dir = dir.into();
    }

    if let Some(dir) = &overrides.data_dir {
        config.data_dir = dir.clone();
    }
    if let Some(scheme) = &overrides.scheme {
        config.scheme = scheme.clone();
    }
    if let Some(fusion) = &overrides.fusion {
        config.fusion = fusion.clone();
    }
    if let Some(epochs) = overrides.epochs {
        config.epochs = epochs;
    }
    if let Some(seed) = overrides.seed {
        config.seed = seed;
    }
    if let Some(dir) = &overrides.out {
        config.output_dir = dir.clone();
    }

    let scheme = ClassScheme::parse(&config.scheme).ok_or_else(|| {
        CliError::Config(format!(
            "unknown scheme {:?} (expected mitbih10 or aami)",
            config.scheme
        ))
    })?;
    let fusion = FusionKind::parse(&config.fusion).ok_or_else(|| {
        CliError::Config(format!(
            "unknown fusion {:?} (expected concat, cca, or sacc)",
            config.fusion
        ))
    })?;
    if !(config.train_fraction > 0.0 && config.train_fraction <= 1.0) {
        return Err(CliError::Config(format!(
            "train_fraction {} outside (0, 1]",
            config.train_fraction
        )));
    }

    Ok(Resolved {
        data_dir: config.data_dir,
        cache_dir: config.cache_dir,
        output_dir: config.output_dir,
        scheme,
        fusion,
        train_fraction: config.train_fraction,
        preprocess: PreprocessConfig {
            scheme,
            delta_n: config.delta_n,
            smoothing_window: config.smoothing_window,
            channel: config.channel,
        },
        train: TrainConfig {
            scheme,
            fusion,
            batch_size: config.batch_size,
            epochs: config.epochs,
            base_lr: config.base_lr,
            warmup_steps: config.warmup_steps,
            num_cycles: config.num_cycles,
            seed: config.seed,
            beta1: config.beta1,
            beta2: config.beta2,
            epsilon: config.epsilon,
            trunk_dropout: config.trunk_dropout,
            head_dropout: config.head_dropout,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn no_overrides() -> Overrides {
        Overrides {
            config: None,
            data_dir: None,
            scheme: None,
            fusion: None,
            epochs: None,
            seed: None,
            out: None,
        }
    }

    #[test]
    fn defaults_resolve_and_match_the_training_defaults() {
        let r = resolve(&no_overrides()).unwrap();
        assert_eq!(r.train, TrainConfig::default());
        assert_eq!(r.preprocess, PreprocessConfig::default());
        assert_eq!(r.train_fraction, 0.9);
        assert_eq!(r.data_dir, PathBuf::from("data"));
        assert_eq!(r.checkpoint_path(), PathBuf::from("out/model.ckpt"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<CliConfig>(r#"{"learning_rate": 0.1}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
        // Known keys with the rest defaulted are fine.
        let ok = serde_json::from_str::<CliConfig>(r#"{"epochs": 3}"#).unwrap();
        assert_eq!(ok.epochs, 3);
        assert_eq!(ok.batch_size, 32);
    }

    #[test]
    fn flags_override_the_file_values() {
        let mut o = no_overrides();
        o.scheme = Some("aami".into());
        o.epochs = Some(7);
        o.seed = Some(11);
        o.out = Some("elsewhere".into());
        let r = resolve(&o).unwrap();
        assert_eq!(r.scheme, ClassScheme::Aami);
        assert_eq!(r.train.epochs, 7);
        assert_eq!(r.train.seed, 11);
        assert_eq!(r.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn bad_enums_and_fractions_are_config_errors() {
        let mut o = no_overrides();
        o.scheme = Some("mitbih".into());
        assert!(matches!(resolve(&o), Err(CliError::Config(_))));

        let mut o = no_overrides();
        o.fusion = Some("attention".into());
        assert!(matches!(resolve(&o), Err(CliError::Config(_))));
    }
}
