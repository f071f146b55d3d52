//! INI-style experiment configuration.
//!
//! Sections are flattened to `section.key`; keys before the first section stay bare.
//! Every experiment reads its keys through the typed getters, then calls
//! [`Config::finish`], which rejects whatever was never read. Nothing is computed before
//! that point.

use crate::error::{config_err, LabError, Result};
use ini::Ini;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

#[derive(Debug, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
    used: RefCell<BTreeSet<String>>,
    /// Keys injected from the command line; exempt from the unknown-key check.
    overrides: BTreeSet<String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| LabError::Config(e.to_string()))?;
        let mut values = BTreeMap::new();
        for (section, props) in ini.iter() {
            for (k, v) in props.iter() {
                let key = match section {
                    Some(s) => format!("{}.{}", s.trim(), k.trim()),
                    None => k.trim().to_string(),
                };
                if values.insert(key.clone(), v.trim().to_string()).is_some() {
                    return config_err(format!("duplicate key `{key}`"));
                }
            }
        }
        Ok(Config { values, ..Default::default() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Sets `key` regardless of the file contents.
    pub fn set_override(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
        self.overrides.insert(key.to_string());
    }

    pub fn entries(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key).map(|s| s.as_str())
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|_| LabError::Config(format!("`{key}`: cannot parse `{s}`"))),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    /// Real number; accepts multiples and fractions of `pi` such as `2pi`, `pi/6`, `0.5*pi`.
    pub fn real(&self, key: &str, default: f64) -> Result<f64> {
        match self.raw(key) {
            None => Ok(default),
            Some(s) => parse_real(s).ok_or_else(|| LabError::Config(format!("`{key}`: not a number: `{s}`"))),
        }
    }

    pub fn string(&self, key: &str, default: &str) -> Result<String> {
        Ok(self.raw(key).unwrap_or(default).to_string())
    }

    /// One of `allowed`.
    pub fn choice(&self, key: &str, default: &str, allowed: &[&str]) -> Result<String> {
        let v = self.string(key, default)?;
        if allowed.contains(&v.as_str()) {
            Ok(v)
        } else {
            config_err(format!("`{key}` must be one of {allowed:?}, got `{v}`"))
        }
    }

    /// Comma-separated list of reals.
    pub fn reals(&self, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|t| parse_real(t).ok_or_else(|| LabError::Config(format!("`{key}`: not a number: `{}`", t.trim()))))
                .collect(),
        }
    }

    pub fn list<T: FromStr>(&self, key: &str, default: &[T]) -> Result<Vec<T>>
    where
        T: Clone,
    {
        match self.raw(key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|t| t.trim().parse().map_err(|_| LabError::Config(format!("`{key}`: cannot parse `{}`", t.trim()))))
                .collect(),
        }
    }

    /// Rejects keys that no getter asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !used.contains(*k) && !self.overrides.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            config_err(format!("unknown keys: {}", unknown.iter().map(|k| format!("`{k}`")).collect::<Vec<_>>().join(", ")))
        }
    }
}

pub fn parse_real(s: &str) -> Option<f64> {
    let s = s.trim().to_ascii_lowercase();
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = match s.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim().parse::<f64>().ok()?),
        None => (s.as_str(), 1.0),
    };
    let pre = num.strip_suffix("pi")?.trim().trim_end_matches('*').trim();
    let coef = match pre {
        "" => 1.0,
        "-" => -1.0,
        p => p.parse::<f64>().ok()?,
    };
    Some(coef * std::f64::consts::PI / den)
}
