//! Layered option lookup: command-line flags, then a `key = value` file, then defaults.

use clap::ArgMatches;
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) | CliError::Runtime(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Separator used when a repeated flag or a list-valued key holds several items.
pub const LIST_SEP: char = ';';

fn normalize(key: &str) -> String {
    key.trim().replace('_', "-")
}

#[derive(Clone, Debug, Default)]
pub struct Settings {
    flags: BTreeMap<String, String>,
    file: BTreeMap<String, String>,
}

impl Settings {
    /// Collects every flag the user actually passed, then the file named by `--config`.
    pub fn from_matches(m: &ArgMatches) -> Result<Self, CliError> {
        let mut flags = BTreeMap::new();
        for id in m.ids() {
            let key = id.as_str();
            if let Ok(Some(vals)) = m.try_get_many::<String>(key) {
                let vals: Vec<&str> = vals.map(String::as_str).collect();
                flags.insert(normalize(key), vals.join(&LIST_SEP.to_string()));
            }
        }
        let file = match flags.get("config") {
            Some(path) => parse_config_file(Path::new(path))?,
            None => BTreeMap::new(),
        };
        Ok(Self { flags, file })
    }

    #[cfg(test)]
    pub fn from_maps(flags: &[(&str, &str)], file: &[(&str, &str)]) -> Self {
        let conv = |v: &[(&str, &str)]| v.iter().map(|(k, v)| (normalize(k), v.to_string())).collect();
        Self {
            flags: conv(flags),
            file: conv(file),
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.flags.get(key).or_else(|| self.file.get(key)).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.raw(key)
            .map(|v| v.trim().parse::<T>().map_err(|e| CliError::Config(format!("--{key} '{v}': {e}"))))
            .transpose()
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get(key)?.ok_or_else(|| CliError::Config(format!("--{key} is required")))
    }

    /// Items separated by `sep` or by [`LIST_SEP`]; empty when the key is absent.
    pub fn list<T: FromStr>(&self, key: &str, sep: char) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        let Some(v) = self.raw(key) else { return Ok(Vec::new()) };
        v.split([sep, LIST_SEP])
            .map(str::trim)
            .filter(|x| !x.is_empty())
            .map(|x| x.parse::<T>().map_err(|e| CliError::Config(format!("--{key} item '{x}': {e}"))))
            .collect()
    }

    /// `on|off|true|false|yes|no|1|0`.
    pub fn switch(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.raw(key).map(|v| v.trim().to_ascii_lowercase()) {
            None => Ok(default),
            Some(v) => match v.as_str() {
                "on" | "true" | "yes" | "1" => Ok(true),
                "off" | "false" | "no" | "0" => Ok(false),
                _ => Err(CliError::Config(format!("--{key} expects on or off, got '{v}'"))),
            },
        }
    }
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| CliError::Config(format!("config file {}: {e}", path.display())))
}

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: expected key = value", k + 1))?;
        out.insert(normalize(key), value.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_file() {
        let s = Settings::from_maps(&[("m", "40")], &[("m", "10"), ("stride", "5")]);
        assert_eq!(s.get::<usize>("m").unwrap(), Some(40));
        assert_eq!(s.get::<usize>("stride").unwrap(), Some(5));
        assert_eq!(s.get_or("seed", 7u64).unwrap(), 7);
    }

    #[test]
    fn config_text() {
        let kv = parse_config("# comment\nn_quad = 500\n\nrules=gauss,radau # trailing\n").unwrap();
        assert_eq!(kv["n-quad"], "500");
        assert_eq!(kv["rules"], "gauss,radau");
        assert!(parse_config("oops").is_err());
    }

    #[test]
    fn lists_and_switches() {
        let s = Settings::from_maps(&[("shifts", "1e-2, 1e-2i;0.5")], &[("reference", "off")]);
        assert_eq!(s.list::<String>("shifts", ',').unwrap(), vec!["1e-2", "1e-2i", "0.5"]);
        assert!(!s.switch("reference", true).unwrap());
        assert!(s.switch("timing", true).unwrap());
        assert_eq!(s.get::<usize>("m").unwrap(), None);
        let bad = Settings::from_maps(&[("m", "ten")], &[]);
        assert_eq!(bad.get::<usize>("m").unwrap_err().exit_code(), 2);
    }
}
