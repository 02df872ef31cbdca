//! Campaign configuration: defaults, config files, `MTICA_SEED` and flags.
//!
//! Precedence is flags, then the config file, then defaults. The seed falls
//! back to `MTICA_SEED` only when neither a flag nor the file sets it.

use std::fs;
use std::path::Path;

use mtica::sim::campaign::CampaignConfig;
use mtica::sim::report::{config_from_trials_csv, CONFIG_COMMENT_PREFIX};
use serde_json::Value;

use crate::args::ExperimentArgs;
use crate::Failure;

pub const SEED_ENV: &str = "MTICA_SEED";

/// A config file after parsing, with a note of which keys it set.
#[derive(Debug, Clone, Default)]
pub struct FileConfig {
    pub config: CampaignConfig,
    pub sets_seed: bool,
    pub sets_algorithms: bool,
}

/// Reads a TOML file, a JSON object, or the config echo of a `trials.csv`.
pub fn load_file(path: &Path) -> Result<FileConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let bad = |msg: String| Failure::Usage(format!("config file {}: {msg}", path.display()));

    if text.starts_with(CONFIG_COMMENT_PREFIX) {
        let config = config_from_trials_csv(&text).ok_or_else(|| bad("unreadable config echo".into()))?;
        return Ok(FileConfig {
            config,
            sets_seed: true,
            sets_algorithms: true,
        });
    }
    let value: Value = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?
    } else {
        let table: toml::Table = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
        serde_json::to_value(table).map_err(|e| bad(e.to_string()))?
    };
    let Value::Object(map) = &value else {
        return Err(bad("expected a table of key/value pairs".into()));
    };
    let sets_seed = map.contains_key("seed");
    let sets_algorithms = map.contains_key("algorithms");
    let config = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
    Ok(FileConfig {
        config,
        sets_seed,
        sets_algorithms,
    })
}

pub fn load_optional(path: Option<&Path>) -> Result<FileConfig, Failure> {
    match path {
        Some(p) => load_file(p),
        None => Ok(FileConfig::default()),
    }
}

/// `MTICA_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

/// Resolves the seed: flag, then file, then environment, then the default.
pub fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, Failure> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if file.sets_seed {
        return Ok(file.config.seed);
    }
    Ok(env_seed()?.unwrap_or(file.config.seed))
}

/// Builds and validates the campaign configuration for `experiment`.
pub fn campaign_config(args: &ExperimentArgs) -> Result<CampaignConfig, Failure> {
    let file = load_optional(args.config.as_deref())?;
    let mut cfg = file.config.clone();
    cfg.seed = resolve_seed(args.seed, &file)?;

    if let Some(e) = args.experiment {
        cfg.experiment = e;
    }
    if !args.algo.is_empty() {
        cfg.algorithms = dedup(&args.algo);
    }
    macro_rules! set {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    set!(n, p, m, tau, trials, outlier_magnitude);
    if !args.snr_db.is_empty() {
        cfg.snr_grid_db = args.snr_db.clone();
    }
    if !args.outliers.is_empty() {
        cfg.outlier_grid = args.outliers.clone();
    }
    if !args.sources.is_empty() {
        cfg.sources = Some(args.sources.clone());
    }
    if !args.families.is_empty() {
        cfg.families = dedup(&args.families);
    }
    cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(cfg)
}

fn dedup<T: PartialEq + Copy>(items: &[T]) -> Vec<T> {
    let mut out = Vec::new();
    for &x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}
