//! Flat `key = value` configuration files with typed accessors.
//!
//! Lines starting with `#` are comments; blank lines are ignored. No nesting.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KvFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::ConfigParse {
                    line: idx + 1,
                    field: line.to_string(),
                    message: "expected `key = value`".to_string(),
                });
            };
            entries.insert(
                key.trim().to_string(),
                (idx + 1, value.trim().to_string()),
            );
        }
        Ok(Self { entries })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(|s| s.as_str())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => value.parse::<T>().map(Some).map_err(|_| Error::ConfigParse {
                line: *line,
                field: key.to_string(),
                message: format!("cannot parse `{value}`"),
            }),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| Error::ConfigParse {
            line: 0,
            field: key.to_string(),
            message: "missing required field".to_string(),
        })
    }

    /// Comma-separated list of values.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => {
                if value.trim().is_empty() {
                    return Ok(Some(Vec::new()));
                }
                value
                    .split(',')
                    .map(|tok| {
                        tok.trim().parse::<T>().map_err(|_| Error::ConfigParse {
                            line: *line,
                            field: key.to_string(),
                            message: format!("cannot parse list item `{}`", tok.trim()),
                        })
                    })
                    .collect::<Result<Vec<T>>>()
                    .map(Some)
            }
        }
    }

    /// Semicolon-separated rows of comma-separated numbers (a dense matrix).
    pub fn get_matrix(&self, key: &str) -> Result<Option<Vec<Vec<f64>>>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, value)) => {
                let mut rows = Vec::new();
                for row in value.split(';') {
                    let parsed: Vec<f64> = row
                        .split(',')
                        .map(|tok| {
                            tok.trim().parse::<f64>().map_err(|_| Error::ConfigParse {
                                line: *line,
                                field: key.to_string(),
                                message: format!("cannot parse matrix entry `{}`", tok.trim()),
                            })
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    rows.push(parsed);
                }
                Ok(Some(rows))
            }
        }
    }
}
