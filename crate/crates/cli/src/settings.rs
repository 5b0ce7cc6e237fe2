//! `key = value` config files merged with command-line flags.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

/// Values from the config file, consumed key by key as the command resolves
/// its parameters. Flags win over the file.
#[derive(Debug, Default)]
pub struct Settings {
    file: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

fn normalise(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else { return Ok(Self::default()) };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut file = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let key = normalise(key);
            if key.is_empty() {
                return Err(CliError::Config(format!("line {}: empty key", lineno + 1)));
            }
            if file.insert(key.clone(), value.trim().to_string()).is_some() {
                return Err(CliError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
        }
        Ok(Self { file, used: BTreeSet::new() })
    }

    fn file_value<T: FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let key = normalise(key);
        let Some(raw) = self.file.get(&key) else { return Ok(None) };
        self.used.insert(key.clone());
        raw.parse()
            .map(Some)
            .map_err(|e| CliError::Config(format!("`{key} = {raw}`: {e}")))
    }

    pub fn opt<T: FromStr>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        let file = self.file_value(key)?;
        Ok(flag.or(file))
    }

    pub fn get<T: FromStr>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.opt(key, flag)?.unwrap_or(default))
    }

    /// A switch is on when given as a flag or set to `true` in the file.
    pub fn switch(&mut self, key: &str, flag: bool) -> Result<bool, CliError> {
        Ok(flag || self.file_value::<bool>(key)?.unwrap_or(false))
    }

    /// Comma-separated list; empty when neither flag nor file gives one.
    pub fn list_opt(&mut self, key: &str, flag: Vec<f64>) -> Result<Vec<f64>, CliError> {
        let key = normalise(key);
        let Some(raw) = self.file.get(&key).cloned() else { return Ok(flag) };
        self.used.insert(key.clone());
        let file = raw
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| CliError::Config(format!("`{key} = {raw}`: {e}")))?;
        Ok(if flag.is_empty() { file } else { flag })
    }

    pub fn list(&mut self, key: &str, flag: Vec<f64>, default: &[f64]) -> Result<Vec<f64>, CliError> {
        let mut values = self.list_opt(key, flag)?;
        if values.is_empty() {
            values = default.to_vec();
        }
        if values.is_empty() {
            return Err(CliError::Config(format!("`{key}` must not be empty")));
        }
        Ok(values)
    }

    /// Fails on config keys the command did not read.
    pub fn finish(self) -> Result<(), CliError> {
        let unused: Vec<&str> = self.file.keys().filter(|k| !self.used.contains(*k)).map(String::as_str).collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!("unknown config keys for this command: {}", unused.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_file() {
        let mut s = Settings::parse("dtau = 0.01\n# comment\nn-sigma = 81  # trailing\n").unwrap();
        assert_eq!(s.get("dtau", Some(0.5), 1.0).unwrap(), 0.5);
        assert_eq!(s.get::<usize>("n_sigma", None, 3).unwrap(), 81);
        assert_eq!(s.get("tau_end", None, -1.0).unwrap(), -1.0);
        s.finish().unwrap();
    }

    #[test]
    fn malformed_and_unknown_keys_are_config_errors() {
        assert!(Settings::parse("dtau 0.01").is_err());
        assert!(Settings::parse("a = 1\na = 2").is_err());
        let mut s = Settings::parse("dtau = fast").unwrap();
        assert!(s.get("dtau", None, 1.0).is_err());
        let s = Settings::parse("colour = red").unwrap();
        assert!(s.finish().is_err());
    }

    #[test]
    fn lists_and_switches() {
        let mut s = Settings::parse("tau_ladder = 100, 200\nidentities = true").unwrap();
        assert_eq!(s.list("tau_ladder", vec![], &[1.0]).unwrap(), vec![100.0, 200.0]);
        assert!(s.switch("identities", false).unwrap());
        assert_eq!(s.list("a", vec![], &[30.0]).unwrap(), vec![30.0]);
    }
}
