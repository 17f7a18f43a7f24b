//! Experiment configuration: a JSON or flat `key = value` file, with CLI
//! flags layered on top.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use quench_core::states::StateFamily;
use quench_core::{ChainSpec, QuenchError, Tolerances};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(ConfigError(format!("unknown output format {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<QuenchError> for ConfigError {
    fn from(e: QuenchError) -> Self {
        ConfigError(e.to_string())
    }
}

/// Unset fields fall back to the defaults of the experiment being run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Option<String>,
    pub p: Option<usize>,
    pub q: Option<usize>,
    pub gamma: Option<f64>,
    pub n: Option<usize>,
    pub block: Option<usize>,
    pub dt: Option<f64>,
    pub t_max: Option<f64>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            family: None,
            p: None,
            q: None,
            gamma: None,
            n: None,
            block: None,
            dt: None,
            t_max: None,
            tolerances: Tolerances::default(),
            out: PathBuf::from("out"),
            format: OutputFormat::Csv,
        }
    }
}

const STRING_KEYS: [&str; 3] = ["family", "out", "format"];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Parses `key = value` lines; `#` starts a comment and
    /// `tolerances.<field>` sets one tolerance.
    pub fn from_key_value(text: &str) -> Result<Self, ConfigError> {
        let mut root = Map::new();
        let mut tols = Map::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ConfigError(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            if let Some(field) = key.strip_prefix("tolerances.") {
                tols.insert(field.to_string(), parse_scalar(value, false, lineno)?);
            } else {
                let key = key.replace('-', "_");
                let as_string = STRING_KEYS.contains(&key.as_str());
                root.insert(key, parse_scalar(value, as_string, lineno)?);
            }
        }
        if !tols.is_empty() {
            root.insert("tolerances".into(), Value::Object(tols));
        }
        serde_json::from_value(Value::Object(root)).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn to_key_value(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = String::new();
        if let Value::Object(map) = value {
            for (k, v) in &map {
                match v {
                    Value::Null => {}
                    Value::Object(inner) => {
                        for (ik, iv) in inner {
                            let _ = writeln!(out, "{k}.{ik} = {}", scalar_text(iv));
                        }
                    }
                    other => {
                        let _ = writeln!(out, "{k} = {}", scalar_text(other));
                    }
                }
            }
        }
        out
    }

    /// Reads a config file; JSON when the first non-blank character is `{`.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            Self::from_json(&text)
        } else {
            Self::from_key_value(&text)
        }
    }

    /// The configured family, if any.
    pub fn state_family(&self) -> Result<Option<StateFamily>, ConfigError> {
        match &self.family {
            None => Ok(None),
            Some(name) => Ok(Some(StateFamily::parse(name, self.p, self.q, self.gamma)?)),
        }
    }

    /// Range and divisibility checks that need no heavy computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let Some(n) = self.n {
            ChainSpec::new(n)?;
        }
        if let Some(dt) = self.dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(ConfigError(format!("dt must be positive, got {dt}")));
            }
        }
        if let Some(t) = self.t_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(ConfigError(format!("t_max must be positive, got {t}")));
            }
        }
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g < 1.0) {
                return Err(ConfigError(format!("gamma must lie in (0, 1), got {g}")));
            }
        }
        if let (Some(b), Some(n)) = (self.block, self.n) {
            if b == 0 || b >= n {
                return Err(ConfigError(format!("block length {b} must lie in 1..{n}")));
            }
        }
        if let Some(fam) = self.state_family()? {
            if let Some(n) = self.n {
                validate_family(fam, n)?;
            }
        }
        Ok(())
    }
}

/// Divisibility and parameter checks for one family at chain length `n`.
pub fn validate_family(fam: StateFamily, n: usize) -> Result<(), ConfigError> {
    let spec = ChainSpec::new(n)?;
    match fam {
        StateFamily::Wigner { p } => {
            if p == 0 || n % p != 0 {
                return Err(ConfigError(format!("wigner-{p} needs N divisible by {p}, got {n}")));
            }
        }
        StateFamily::Island { p, gamma } => {
            quench_core::states::IslandSpec::new(p, gamma)?;
            if n % 2 != 0 {
                return Err(ConfigError(format!("island needs even N, got {n}")));
            }
        }
        _ => {
            fam.pattern(spec)?;
        }
    }
    Ok(())
}

fn parse_scalar(value: &str, as_string: bool, lineno: usize) -> Result<Value, ConfigError> {
    let unquoted = value.trim_matches('"');
    if as_string {
        return Ok(Value::String(unquoted.to_string()));
    }
    if let Ok(i) = value.parse::<u64>() {
        return Ok(Value::from(i));
    }
    if let Ok(f) = value.parse::<f64>() {
        return Ok(Value::from(f));
    }
    match value {
        "true" => Ok(Value::Bool(true)),
        "false" => Ok(Value::Bool(false)),
        _ => Err(ConfigError(format!("line {}: cannot parse value {value}", lineno + 1))),
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Number(n) => match n.as_f64() {
            // Debug formatting is the shortest representation that round-trips.
            Some(f) if n.is_f64() => format!("{f:?}"),
            _ => n.to_string(),
        },
        other => other.to_string(),
    }
}
