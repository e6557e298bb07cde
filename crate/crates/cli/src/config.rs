//! Flat `key = value` configuration files. Keys are long flag names without
//! the leading dashes; flags given on the command line win.

use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: &Path, known: &[&str]) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text, known)
    }

    pub fn parse(text: &str, known: &[&str]) -> Result<Self, String> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", no + 1))?;
            let key = k.trim().trim_start_matches("--").to_string();
            if !known.contains(&key.as_str()) {
                return Err(format!("config line {}: unknown key {key:?}", no + 1));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    /// `cli` if given, else the parsed config value.
    pub fn pick<T: std::str::FromStr>(&self, cli: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.values.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| format!("config key {key}: cannot parse {v:?}: {e}")),
        }
    }

    pub fn flag(&self, cli: bool, key: &str) -> Result<bool, String> {
        Ok(cli || self.pick::<bool>(None, key)?.unwrap_or(false))
    }
}
