//! Flat key-value config files mirroring the CLI flags.
//!
//! Format: one `key = value` pair per line, `#` starts a comment, blank
//! lines ignored. Keys are the long flag names with `-` replaced by `_`
//! (e.g. `strict_orthant = true`, `setups = sparse,for_plus_or`).
//! Values given on the command line take precedence over file values.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config io: {0}")]
    Io(#[from] std::io::Error),
    #[error("config line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("config key `{key}`: cannot parse `{value}`: {message}")]
    BadValue { key: String, value: String, message: String },
}

/// Parsed key-value pairs of one config file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FileConfig {
    pairs: BTreeMap<String, String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut pairs = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(at) => &raw[..at],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: i + 1, text: raw.to_string() });
            };
            pairs.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { pairs })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.pairs.get(key).map(String::as_str)
    }

    /// Typed lookup; `None` when the key is absent.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        match self.pairs.get(key) {
            None => Ok(None),
            Some(value) => value.parse().map(Some).map_err(|e: T::Err| ConfigError::BadValue {
                key: key.to_string(),
                value: value.clone(),
                message: e.to_string(),
            }),
        }
    }

    /// CLI-over-file precedence: the explicit CLI value wins, then the
    /// file, then the default.
    pub fn resolve<T: FromStr + Clone>(
        &self,
        cli: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = cli {
            return Ok(v);
        }
        Ok(self.get(key)?.unwrap_or(default))
    }
}

/// Parses a comma-separated seed list (`0,1,2`) or inclusive-exclusive
/// range (`0..15`).
pub fn parse_seed_list(text: &str) -> Result<Vec<u64>, String> {
    let text = text.trim();
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|e| format!("range start: {e}"))?;
        let hi: u64 = hi.trim().parse().map_err(|e| format!("range end: {e}"))?;
        if hi <= lo {
            return Err(format!("empty seed range {lo}..{hi}"));
        }
        return Ok((lo..hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|e| format!("seed `{s}`: {e}")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_pairs_comments_and_blanks() {
        let cfg = FileConfig::parse(
            "# experiment defaults\nsteps = 4096\nsetups = sparse,for_plus_or\n\njobs=2 # workers\n",
        )
        .unwrap();
        assert_eq!(cfg.get::<u64>("steps").unwrap(), Some(4096));
        assert_eq!(cfg.raw("setups"), Some("sparse,for_plus_or"));
        assert_eq!(cfg.get::<usize>("jobs").unwrap(), Some(2));
        assert_eq!(cfg.get::<u64>("missing").unwrap(), None);
    }

    #[test]
    fn malformed_lines_and_values_are_errors() {
        assert!(FileConfig::parse("just some words\n").is_err());
        let cfg = FileConfig::parse("steps = soon\n").unwrap();
        assert!(cfg.get::<u64>("steps").is_err());
    }

    #[test]
    fn cli_overrides_file_overrides_default() {
        let cfg = FileConfig::parse("steps = 100\n").unwrap();
        assert_eq!(cfg.resolve(Some(5u64), "steps", 1).unwrap(), 5);
        assert_eq!(cfg.resolve(None::<u64>, "steps", 1).unwrap(), 100);
        assert_eq!(cfg.resolve(None::<u64>, "other", 1).unwrap(), 1);
    }

    #[test]
    fn seed_lists_and_ranges() {
        assert_eq!(parse_seed_list("0,1,2").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_seed_list("3..6").unwrap(), vec![3, 4, 5]);
        assert!(parse_seed_list("5..5").is_err());
        assert!(parse_seed_list("a,b").is_err());
    }
}
