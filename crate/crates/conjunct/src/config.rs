//! Run defaults read from a `key = value` text file.
//!
//! ```text
//! # comment
//! quad_floor = 64
//! mc_trials = 1000000
//! seed = 42
//! precision = 9
//! ```

use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Environment variable naming a config file when `--config` is absent.
pub const CONFIG_ENV: &str = "CONJUNCT_CONFIG";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    /// Smallest automatic trapezoid point count.
    pub quad_floor: usize,
    /// Default Monte Carlo trial count.
    pub mc_trials: u64,
    pub seed: Option<u64>,
    /// Significant digits in CSV output.
    pub precision: usize,
}

impl Default for Config {
    fn default() -> Self {
        Self { quad_floor: conjunct_core::probability::QUADRATURE_FLOOR, mc_trials: 1_000_000, seed: None, precision: 9 }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut config = Config::default();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let err = |message: String| CliError::Config { path: path.to_path_buf(), line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| err(format!("expected `key = value`, found `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = |_| err(format!("invalid value `{value}` for {key}"));
            match key {
                "quad_floor" => config.quad_floor = value.parse().map_err(bad)?,
                "mc_trials" => config.mc_trials = value.parse().map_err(bad)?,
                "seed" => config.seed = Some(value.parse().map_err(bad)?),
                "precision" => config.precision = value.parse().map_err(bad)?,
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }
        if !(1..=17).contains(&config.precision) {
            return Err(CliError::Config { path: path.to_path_buf(), line: 0, message: "precision must be 1..=17".into() });
        }
        if config.mc_trials == 0 {
            return Err(CliError::Config { path: path.to_path_buf(), line: 0, message: "mc_trials must be positive".into() });
        }
        Ok(config)
    }

    /// Reads `explicit`, else the file named by [`CONFIG_ENV`], else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self, CliError> {
        let path: Option<PathBuf> = explicit
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        match path {
            None => Ok(Config::default()),
            Some(path) => {
                let text = std::fs::read_to_string(&path).map_err(|source| CliError::Io { path: path.clone(), source })?;
                Config::parse(&text, &path)
            }
        }
    }
}
