//! Plain-text run configuration: one `key = value` per line, `#` starts a
//! comment. Every command declares its keys and defaults; anything else is
//! an error.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use sha2::{Digest, Sha256};

/// A documented key with its default value. An empty default means the key
/// must be supplied.
#[derive(Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

pub const fn key(name: &'static str, default: &'static str, doc: &'static str) -> Key {
    Key { name, default, doc }
}

/// Fully resolved configuration of one command.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Config {
    command: String,
    values: BTreeMap<String, String>,
}

pub type Pairs = Vec<(String, String)>;

/// Parses `key = value` lines. A `command` entry, as written into
/// manifests, is returned separately.
pub fn parse_text(text: &str) -> Result<(Option<String>, Pairs)> {
    let mut command = None;
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("line {}: expected key = value, got {raw:?}", i + 1))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            bail!("line {}: empty key", i + 1);
        }
        if k == "command" {
            command = Some(v.to_string());
        } else {
            pairs.push((k.to_string(), v.to_string()));
        }
    }
    Ok((command, pairs))
}

pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| anyhow!("--set expects key=value, got {s:?}"))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

impl Config {
    /// Defaults, then the config file, then `overrides` in order.
    pub fn resolve(command: &str, keys: &[Key], file: Option<&Path>, overrides: &[(String, String)]) -> Result<Config> {
        let mut values: BTreeMap<String, String> = keys
            .iter()
            .map(|k| (k.name.to_string(), k.default.to_string()))
            .collect();
        let mut apply = |pairs: &[(String, String)], origin: &str| -> Result<()> {
            for (k, v) in pairs {
                match values.get_mut(k) {
                    Some(slot) => *slot = v.clone(),
                    None => bail!("{origin}: unknown key {k:?} for command {command}"),
                }
            }
            Ok(())
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let (cmd, pairs) = parse_text(&text).with_context(|| format!("parsing {}", path.display()))?;
            if let Some(cmd) = cmd {
                if cmd != command {
                    bail!("{} is a manifest for {cmd:?}, not {command:?}", path.display());
                }
            }
            apply(&pairs, &path.display().to_string())?;
        }
        apply(overrides, "command line")?;
        for k in keys {
            if values[k.name].is_empty() {
                bail!("missing required key {:?} ({})", k.name, k.doc);
            }
        }
        Ok(Config {
            command: command.to_string(),
            values,
        })
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("key {key:?} not declared for {}", self.command))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| anyhow!("invalid value {raw:?} for {key}: {e}"))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| anyhow!("invalid entry {s:?} in {key}: {e}")))
            .collect()
    }

    /// Canonical text: `command = ...` then sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        let mut out = format!("command = {}\n", self.command);
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// SHA-256 of [`Config::canonical`], hex encoded.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}
