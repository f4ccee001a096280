//! Experiment configuration: built-in defaults, an optional `key = value`
//! file and command-line flags, in increasing precedence.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use anyhow::Context;

pub const DEFAULT_EXTENT: u32 = 40;
pub const DEFAULT_TRIALS: u64 = 20_000;
pub const DEFAULT_SEED: u64 = 42;
/// Step of a float range written without one.
pub const DEFAULT_P_STEP: f64 = 0.05;

/// Bad input from the user; reported with exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Parsed `key = value` file. `#` starts a comment line.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ConfigFile {
    entries: BTreeMap<String, String>,
}

impl ConfigFile {
    pub const KEYS: &'static [&'static str] = &[
        "kind",
        "L",
        "mode",
        "d",
        "k",
        "separation",
        "p",
        "trials",
        "seed",
        "threads",
        "output",
        "format",
        "streams",
    ];

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("config line {}: expected key = value", n + 1)))?;
            let key = key.trim();
            if !Self::KEYS.contains(&key) {
                return Err(usage(format!("config line {}: unknown key {key:?}", n + 1)));
            }
            entries.insert(key.to_owned(), value.trim().to_owned());
        }
        Ok(ConfigFile { entries })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Flag value, else file value, else `None`.
    pub fn layer<T: FromStr>(&self, key: &str, flag: Option<T>) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| usage(format!("config {key} = {v:?}: {e}")))
            })
            .transpose()
    }

    /// Like [`ConfigFile::layer`] for range-valued keys.
    pub fn layer_with<T>(
        &self,
        key: &str,
        flag: Option<&str>,
        parse: impl Fn(&str) -> anyhow::Result<T>,
    ) -> anyhow::Result<Option<T>> {
        match flag.or(self.get(key)) {
            Some(v) => parse(v).map(Some).with_context(|| format!("{key} = {v:?}")),
            None => Ok(None),
        }
    }
}

fn number<T: FromStr>(s: &str) -> anyhow::Result<T>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| usage(format!("{s:?}: {e}")))
}

/// `x`, `x,y,...` or `a..b[:step]` (inclusive, default step 0.05).
pub fn parse_f64_values(s: &str) -> anyhow::Result<Vec<f64>> {
    let values = if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (b, number::<f64>(step)?),
            None => (rest, DEFAULT_P_STEP),
        };
        let (a, b) = (number::<f64>(a)?, number::<f64>(b)?);
        if step.is_nan() || step <= 0.0 || b < a {
            return Err(usage(format!("empty range {s:?}")));
        }
        let n = ((b - a) / step + 1e-9).floor() as u64;
        // grid points are snapped to 12 decimals so that 0.1 + 2 * 0.05 prints as 0.2
        (0..=n)
            .map(|i| (1e12 * (a + i as f64 * step)).round() / 1e12)
            .collect()
    } else {
        s.split(',')
            .map(number::<f64>)
            .collect::<anyhow::Result<Vec<_>>>()?
    };
    if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
        return Err(usage(format!("no usable values in {s:?}")));
    }
    Ok(values)
}

/// `n`, `n,m,...` or `a..b[:step]` (inclusive, default step 1).
pub fn parse_u32_values(s: &str) -> anyhow::Result<Vec<u32>> {
    let values: Vec<u32> = if let Some((a, rest)) = s.split_once("..") {
        let (b, step) = match rest.split_once(':') {
            Some((b, step)) => (b, number::<u32>(step)?),
            None => (rest, 1),
        };
        let (a, b) = (number::<u32>(a)?, number::<u32>(b)?);
        if step == 0 || b < a {
            return Err(usage(format!("empty range {s:?}")));
        }
        (a..=b).step_by(step as usize).collect()
    } else {
        s.split(',')
            .map(number::<u32>)
            .collect::<anyhow::Result<_>>()?
    };
    if values.is_empty() {
        return Err(usage(format!("no values in {s:?}")));
    }
    Ok(values)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(format!("unknown format {s:?} (csv|json)")),
        }
    }
}
