//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, arrays are written `[a, b, c]`.
//! Keys are consumed by the reader; any left over are reported as unknown.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Scalar(String),
    Array(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, Value)>,
}

impl RawConfig {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {line_no}: expected `key = value`")))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(Error::Config(format!("line {line_no}: bad key `{key}`")));
            }
            let value = parse_value(value.trim(), line_no)?;
            if entries.insert(key.to_string(), (line_no, value)).is_some() {
                return Err(Error::Config(format!("line {line_no}: duplicate key `{key}`")));
            }
        }
        Ok(RawConfig { entries })
    }

    /// Set or replace a key, as command-line overrides do.
    pub fn set(&mut self, key: &str, value: Value) {
        self.entries.insert(key.to_string(), (0, value));
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn take(&mut self, key: &str) -> Option<(usize, Value)> {
        self.entries.remove(key)
    }

    pub fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.take(key) {
            None => Ok(None),
            Some((_, Value::Scalar(s))) => Ok(Some(s)),
            Some((line, Value::Array(_))) => Err(Error::Config(format!("line {line}: `{key}` must be a scalar"))),
        }
    }

    pub fn scalar<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        let line = self.entries.get(key).map(|e| e.0).unwrap_or(0);
        match self.string(key)? {
            None => Ok(None),
            Some(s) => s
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("line {line}: cannot parse `{key} = {s}`"))),
        }
    }

    pub fn required<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.scalar(key)?.ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    /// An array, or a scalar read as a one-element array.
    pub fn array<T: FromStr>(&mut self, key: &str) -> Result<Option<Vec<T>>> {
        let (line, items) = match self.take(key) {
            None => return Ok(None),
            Some((line, Value::Array(v))) => (line, v),
            Some((line, Value::Scalar(s))) => (line, vec![s]),
        };
        items
            .iter()
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::Config(format!("line {line}: cannot parse `{s}` in `{key}`")))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    pub fn flag(&mut self, key: &str) -> Result<bool> {
        Ok(self.scalar::<bool>(key)?.unwrap_or(false))
    }

    /// Fail on any key nobody asked for.
    pub fn finish(self) -> Result<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Config(format!("line {line}: unknown key `{key}`"))),
        }
    }
}

fn parse_value(v: &str, line: usize) -> Result<Value> {
    if let Some(inner) = v.strip_prefix('[') {
        let inner = inner
            .strip_suffix(']')
            .ok_or_else(|| Error::Config(format!("line {line}: unterminated array")))?
            .trim();
        if inner.is_empty() {
            return Ok(Value::Array(Vec::new()));
        }
        return Ok(Value::Array(inner.split(',').map(|s| unquote(s.trim()).to_string()).collect()));
    }
    if v.is_empty() {
        return Err(Error::Config(format!("line {line}: empty value")));
    }
    Ok(Value::Scalar(unquote(v).to_string()))
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|t| t.strip_suffix('"')).unwrap_or(s)
}

impl FromStr for Value {
    type Err = Error;

    /// Command-line overrides: `[a,b]` becomes an array, anything else a scalar.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            Some(inner) => Ok(Value::Array(inner.split(',').map(|x| x.trim().to_string()).filter(|x| !x.is_empty()).collect())),
            None => Ok(Value::Scalar(s.to_string())),
        }
    }
}

/// Parse a comma-separated seed list such as `1,2,3` or a range `0..20`.
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("bad seed list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}
