//! Flat key=value run configuration files.
//!
//! Lines are `key = value` (the `=` may be unspaced); `#` starts a comment.
//! Unknown keys are rejected. Command-line flags override file values; a
//! dumped configuration reloads to an identical run.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

/// Keys understood by configuration files, in dump order.
pub const KNOWN_KEYS: [&str; 22] = [
    "alpha",
    "delta0",
    "delta1",
    "r",
    "mu_r_hist",
    "q",
    "sigma",
    "sd_e",
    "sd_r",
    "sd_p",
    "n_e",
    "n_r",
    "n_p",
    "method",
    "effect_ep",
    "effect_rp",
    "v_list",
    "weights",
    "target_power",
    "reps",
    "seed",
    "output_format",
];

/// A parsed configuration: raw string values per known key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!("config line {}: expected key = value", lineno + 1));
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(format!("config line {}: unknown key '{key}'", lineno + 1));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(format!("config line {}: duplicate key '{key}'", lineno + 1));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: String) {
        debug_assert!(KNOWN_KEYS.contains(&key));
        self.values.insert(key.to_string(), value);
    }

    /// Serializes in fixed key order; parsing the output reproduces `self`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for key in KNOWN_KEYS {
            if let Some(v) = self.values.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }

    /// Typed accessors: `None` when absent, `Err` on malformed values.
    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, String> {
        self.get(key)
            .map(|v| v.parse::<f64>().map_err(|_| format!("config key '{key}': expected a number, got '{v}'")))
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, String> {
        self.get(key)
            .map(|v| v.parse::<usize>().map_err(|_| format!("config key '{key}': expected an integer, got '{v}'")))
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, String> {
        self.get(key)
            .map(|v| v.parse::<u64>().map_err(|_| format!("config key '{key}': expected an integer, got '{v}'")))
            .transpose()
    }

    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>, String> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|tok| {
                    tok.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("config key '{key}': expected comma-separated numbers, got '{v}'"))
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
        }
    }
}
