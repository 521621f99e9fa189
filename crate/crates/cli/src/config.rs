//! Key-value configuration files and flag resolution.
//!
//! A configuration file holds one `key = value` pair per line; `#` starts a
//! comment. Keys are long flag names without the leading dashes. Values are
//! resolved as: command-line flag, else configuration file, else default.
//! Every resolved value is recorded, in resolution order, for the manifest.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Default)]
pub struct Resolver {
    file: BTreeMap<String, String>,
    used: Vec<(String, String)>,
}

impl Resolver {
    pub fn from_file(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))?;
        Ok(Self {
            file: parse(&text).map_err(|e| CliError::Config(format!("--config {}: {e}", path.display())))?,
            used: Vec::new(),
        })
    }

    /// Resolves `key` from `flag`, the file, or `default`, and records it.
    pub fn get<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => v,
            None => match self.file.get(key) {
                Some(text) => text
                    .parse()
                    .map_err(|e| CliError::Config(format!("--{key}: cannot parse `{text}`: {e}")))?,
                None => default,
            },
        };
        self.record(key, value.to_string());
        Ok(value)
    }

    /// Like [`Resolver::get`] for a comma-separated list of numbers.
    pub fn get_list(&mut self, key: &str, flag: Option<&str>, default: &str) -> Result<Vec<f64>, CliError> {
        let text = flag
            .map(str::to_string)
            .or_else(|| self.file.get(key).cloned())
            .unwrap_or_else(|| default.to_string());
        let values = parse_list(&text).map_err(|e| CliError::Config(format!("--{key}: {e}")))?;
        self.record(key, text.split(',').map(str::trim).collect::<Vec<_>>().join(","));
        Ok(values)
    }

    /// Resolves an optional value that has no default.
    pub fn get_opt<T>(&mut self, key: &str, flag: Option<T>) -> Result<Option<T>, CliError>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        let value = match flag {
            Some(v) => Some(v),
            None => match self.file.get(key) {
                Some(text) => Some(
                    text.parse()
                        .map_err(|e| CliError::Config(format!("--{key}: cannot parse `{text}`: {e}")))?,
                ),
                None => None,
            },
        };
        if let Some(v) = &value {
            self.record(key, v.to_string());
        }
        Ok(value)
    }

    pub fn record(&mut self, key: &str, value: String) {
        self.used.retain(|(k, _)| k != key);
        self.used.push((key.to_string(), value));
    }

    /// Fails on configuration keys that the command never asked for.
    pub fn check_unused(&self, allowed_extra: &[&str]) -> Result<(), CliError> {
        for key in self.file.keys() {
            let known = self.used.iter().any(|(k, _)| k == key) || allowed_extra.contains(&key.as_str());
            if !known {
                return Err(CliError::Config(format!("--config: unknown key `{key}` for this command")));
            }
        }
        Ok(())
    }

    /// `key = value` lines of every resolved setting.
    pub fn manifest(&self, command: &str) -> String {
        let mut out = format!("# resolved configuration; rerun with --config <this file> {command}\n");
        out.push_str(&format!("command = {command}\n"));
        for (k, v) in &self.used {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }
}

pub fn parse(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected `key = value`", i + 1))?;
        let key = key.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(format!("line {}: empty key", i + 1));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(format!("line {}: duplicate key `{key}`", i + 1));
        }
    }
    Ok(map)
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| format!("`{s}` is not a number"))
        })
        .collect()
}
