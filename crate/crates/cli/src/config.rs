//! Run configuration: TOML file values overridden by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Keys accepted in a configuration file. Relative paths are resolved
/// against the file's directory.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub embedding: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub whiten: Option<bool>,
    pub pca_standardize: Option<bool>,
    pub scale_c: Option<f64>,
    pub endpoint: Option<String>,
    pub seed: Option<u64>,
    pub top_n: Option<usize>,
    pub max_rows: Option<usize>,
    pub max_in_flight: Option<usize>,
    pub retries: Option<u32>,
    pub first_token_only: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: FileConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.embedding, &mut cfg.lexicon, &mut cfg.survey, &mut cfg.words, &mut cfg.output_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

/// Flags shared by every subcommand. Each one overrides the matching
/// configuration key.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// Embedding matrix (binary container or word2vec text).
    #[arg(long, value_name = "FILE")]
    pub embedding: Option<PathBuf>,
    /// Feature lexicon (JSON).
    #[arg(long, value_name = "FILE")]
    pub lexicon: Option<PathBuf>,
    /// Human ratings CSV with columns word,scale,mean_rating.
    #[arg(long, value_name = "FILE")]
    pub survey: Option<PathBuf>,
    /// Word list, one per line.
    #[arg(long, value_name = "FILE")]
    pub words: Option<PathBuf>,
    /// Output directory.
    #[arg(long = "out", value_name = "DIR")]
    pub output_dir: Option<PathBuf>,
    /// Work in the whitened embedding space.
    #[arg(long, overrides_with = "no_whiten")]
    pub whiten: bool,
    #[arg(long, hide = true)]
    pub no_whiten: bool,
    /// Run PCA on the covariance instead of the correlation matrix.
    #[arg(long)]
    pub no_standardize: bool,
    /// Steering magnitude as a fraction of the token norm.
    #[arg(long = "scale", value_name = "C")]
    pub scale_c: Option<f64>,
    /// Base URL of a scoring service.
    #[arg(long, value_name = "URL")]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Extreme words listed per principal component pole.
    #[arg(long)]
    pub top_n: Option<usize>,
    /// Largest number of vocabulary rows analysed when no word list is given.
    #[arg(long)]
    pub max_rows: Option<usize>,
    /// Concurrent requests to the scoring service.
    #[arg(long)]
    pub max_in_flight: Option<usize>,
    #[arg(long)]
    pub retries: Option<u32>,
    /// Score only the first token of each candidate.
    #[arg(long)]
    pub first_token_only: bool,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub embedding: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub survey: Option<PathBuf>,
    pub words: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub whiten: bool,
    pub pca_standardize: bool,
    pub scale_c: f64,
    pub endpoint: Option<String>,
    pub seed: u64,
    pub top_n: usize,
    pub max_rows: usize,
    pub max_in_flight: usize,
    pub retries: u32,
    pub first_token_only: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            embedding: None,
            lexicon: None,
            survey: None,
            words: None,
            output_dir: None,
            whiten: false,
            pca_standardize: true,
            scale_c: semaxes_core::axes::DEFAULT_SCALE,
            endpoint: None,
            seed: 0,
            top_n: 10,
            max_rows: 50_000,
            max_in_flight: 4,
            retries: 3,
            first_token_only: false,
        }
    }
}

impl RunConfig {
    /// Precedence: flags, then file, then defaults.
    pub fn resolve(file: Option<FileConfig>, flags: &Overrides) -> Self {
        let f = file.unwrap_or_default();
        let d = RunConfig::default();
        let whiten = if flags.whiten {
            true
        } else if flags.no_whiten {
            false
        } else {
            f.whiten.unwrap_or(d.whiten)
        };
        RunConfig {
            embedding: flags.embedding.clone().or(f.embedding),
            lexicon: flags.lexicon.clone().or(f.lexicon),
            survey: flags.survey.clone().or(f.survey),
            words: flags.words.clone().or(f.words),
            output_dir: flags.output_dir.clone().or(f.output_dir),
            whiten,
            pca_standardize: if flags.no_standardize { false } else { f.pca_standardize.unwrap_or(d.pca_standardize) },
            scale_c: flags.scale_c.or(f.scale_c).unwrap_or(d.scale_c),
            endpoint: flags.endpoint.clone().or(f.endpoint),
            seed: flags.seed.or(f.seed).unwrap_or(d.seed),
            top_n: flags.top_n.or(f.top_n).unwrap_or(d.top_n),
            max_rows: flags.max_rows.or(f.max_rows).unwrap_or(d.max_rows),
            max_in_flight: flags.max_in_flight.or(f.max_in_flight).unwrap_or(d.max_in_flight),
            retries: flags.retries.or(f.retries).unwrap_or(d.retries),
            first_token_only: flags.first_token_only || f.first_token_only.unwrap_or(d.first_token_only),
        }
    }

    pub fn require_file(&self, value: &Option<PathBuf>, key: &str) -> CliResult<PathBuf> {
        let p = value.clone().ok_or_else(|| CliError::Config(format!("`{key}` is required")))?;
        if !p.is_file() {
            return Err(CliError::Config(format!("`{key}` path {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn optional_file(&self, value: &Option<PathBuf>, key: &str) -> CliResult<Option<PathBuf>> {
        match value {
            None => Ok(None),
            Some(_) => self.require_file(value, key).map(Some),
        }
    }

    pub fn output_dir(&self) -> CliResult<PathBuf> {
        self.output_dir.clone().ok_or_else(|| CliError::Config("`output_dir` (--out) is required".into()))
    }

    pub fn check_scale(&self) -> CliResult<()> {
        if !(self.scale_c > 0.0 && self.scale_c.is_finite()) {
            return Err(CliError::Config(format!("scale_c must be a positive number, got {}", self.scale_c)));
        }
        Ok(())
    }

    pub fn endpoint(&self) -> CliResult<String> {
        self.endpoint.clone().ok_or_else(|| CliError::Config("`endpoint` is required".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file: FileConfig = toml::from_str("scale_c = 0.5\nseed = 9\nwhiten = true\ntop_n = 3").unwrap();
        let flags = Overrides { seed: Some(1), no_whiten: true, ..Overrides::default() };
        let cfg = RunConfig::resolve(Some(file), &flags);
        assert_eq!(cfg.scale_c, 0.5);
        assert_eq!(cfg.seed, 1);
        assert!(!cfg.whiten);
        assert_eq!(cfg.top_n, 3);
        assert_eq!(cfg.max_in_flight, 4);
        assert!(cfg.pca_standardize);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("embeding = \"x\"").is_err());
    }

    #[test]
    fn scale_must_be_positive() {
        let cfg = RunConfig { scale_c: 0.0, ..RunConfig::default() };
        assert!(cfg.check_scale().is_err());
    }
}
