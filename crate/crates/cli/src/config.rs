//! Flat key=value configuration.
//!
//! Commands take `key=value` tokens on the command line, optionally layered
//! over a config file (`config=PATH`, same syntax, one pair per line, `#`
//! comments). Command-line pairs override file pairs. Every lookup error
//! names the offending key so a bad invocation dies with one useful line.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;

/// A parsed configuration: the subcommand name plus its key=value pairs.
#[derive(Debug, Clone, Default)]
pub struct Config {
    pairs: BTreeMap<String, String>,
    consumed: std::cell::RefCell<Vec<String>>,
}

/// Configuration or usage failure; maps to exit code 2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl Config {
    /// Parse command-line tokens, loading `config=PATH` first so explicit
    /// flags override the file.
    pub fn from_args(args: &[String]) -> Result<Config, ConfigError> {
        let mut cli_pairs = BTreeMap::new();
        for raw in args {
            let token = raw.strip_prefix("--").unwrap_or(raw);
            let (key, value) = token
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("expected key=value, got '{raw}'")))?;
            if key.is_empty() {
                return Err(ConfigError(format!("empty key in '{raw}'")));
            }
            if cli_pairs.insert(key.to_string(), value.to_string()).is_some() {
                return Err(ConfigError(format!("key '{key}' given twice")));
            }
        }

        let mut pairs = BTreeMap::new();
        if let Some(path) = cli_pairs.get("config") {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError(format!("config: cannot read '{path}': {e}")))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    ConfigError(format!("config: line {} is not key=value", lineno + 1))
                })?;
                pairs.insert(key.trim().to_string(), value.trim().to_string());
            }
        }
        pairs.extend(cli_pairs);
        pairs.remove("config");
        Ok(Config { pairs, consumed: Default::default() })
    }

    fn mark(&self, key: &str) {
        self.consumed.borrow_mut().push(key.to_string());
    }

    /// Fail on keys nobody asked for: typos should not pass silently.
    pub fn reject_unknown(&self) -> Result<(), ConfigError> {
        let seen = self.consumed.borrow();
        for key in self.pairs.keys() {
            if !seen.iter().any(|s| s == key) {
                return Err(ConfigError(format!("unknown key '{key}'")));
            }
        }
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.mark(key);
        self.pairs.get(key).map(|s| s.as_str())
    }

    pub fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.raw(key).ok_or_else(|| ConfigError(format!("missing required key '{key}'")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.require(key)?;
        raw.parse().map_err(|e| ConfigError(format!("bad value for key '{key}': {e}")))
    }

    pub fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(default),
            Some(raw) => {
                raw.parse().map_err(|e| ConfigError(format!("bad value for key '{key}': {e}")))
            }
        }
    }

    pub fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|e| ConfigError(format!("bad value for key '{key}': {e}"))),
        }
    }
}
