//! Keyed plain-text configuration files.
//!
//! One `key = value` pair per line; `#` starts a comment. Keys are usually
//! dotted (`train.epochs`). Lists are comma-separated.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyedConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyedConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(
                    line,
                    format!("line {} is not of the form `key = value`", i + 1),
                )
            })?;
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(Error::config(
                    "",
                    format!("line {} has an empty key", i + 1),
                ));
            }
            if entries
                .insert(key.clone(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::config(key, "given more than once"));
            }
        }
        Ok(KeyedConfig { entries })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sets or replaces a key, e.g. from a command-line override.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), (0, value.to_string()));
    }

    /// Removes and parses `key`, if present.
    pub fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((_, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| Error::config(key, format!("cannot parse `{v}`: {e}"))),
        }
    }

    pub fn take_or<T: FromStr>(&mut self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.take(key)?.unwrap_or(default))
    }

    pub fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.remove(key) {
            None => Ok(None),
            Some((_, v)) => v
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    item.parse().map_err(|e| {
                        Error::config(key, format!("cannot parse list item `{item}`: {e}"))
                    })
                })
                .collect::<Result<Vec<T>>>()
                .map(Some),
        }
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::config(key, format!("unknown key (line {line})"))),
        }
    }
}

/// Checks a numeric value, naming the key on failure.
pub fn require_positive(key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(Error::config(key, format!("must be > 0, got {value}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_values_lists_and_comments() {
        let mut c = KeyedConfig::parse(
            "# header\ntrain.epochs = 5  # inline\n\nterrains = grass, gravel\n",
        )
        .unwrap();
        assert_eq!(c.take::<usize>("train.epochs").unwrap(), Some(5));
        assert_eq!(
            c.take_list::<String>("terrains").unwrap().unwrap(),
            vec!["grass".to_string(), "gravel".to_string()]
        );
        assert_eq!(c.take_or("missing", 2.5).unwrap(), 2.5);
        c.finish().unwrap();
    }

    #[test]
    fn errors_name_the_key() {
        let err = KeyedConfig::parse("a = 1\nbogus = 3").unwrap();
        let mut c = err;
        c.take::<u32>("a").unwrap();
        match c.finish() {
            Err(Error::Config { key, .. }) => assert_eq!(key, "bogus"),
            other => panic!("{other:?}"),
        }
        let mut c = KeyedConfig::parse("n = x").unwrap();
        assert!(matches!(c.take::<u32>("n"), Err(Error::Config { key, .. }) if key == "n"));
        assert!(KeyedConfig::parse("a = 1\na = 2").is_err());
        assert!(KeyedConfig::parse("novalue").is_err());
        assert!(
            matches!(require_positive("collect.duration", 0.0), Err(Error::Config { key, .. }) if key == "collect.duration")
        );
    }
}
