//! Line-based scenario configuration.
//!
//! ```text
//! # comment
//! m = 1.0
//! omega0 = 1.0
//! bath = 1.0, 0.8, 0.1     # one line per mode: mass, frequency, coupling
//! ```
//!
//! Overrides given as `key=value` on the command line use the same grammar.

use std::path::{Path, PathBuf};

use crate::error::RunError;

/// Impulse-response assembly for the causality scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyKind {
    Retarded,
    Advanced,
}

/// All scenario parameters with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub m: f64,
    pub omega0: f64,
    pub nu: f64,
    pub d0: f64,
    pub d2: f64,
    pub g: f64,
    pub t_i: f64,
    pub t_f: f64,
    /// Number of time steps; the grid has `n + 1` nodes.
    pub n: usize,
    pub eps: f64,
    pub x0: f64,
    pub v0: f64,
    pub order: usize,
    /// Impulse or pulse centre; defaults to the middle of the interval.
    pub t0: Option<f64>,
    pub j0: f64,
    pub assembly: AssemblyKind,
    pub tau_e: i32,
    pub bath: Vec<[f64; 3]>,
    pub output: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m: 1.0,
            omega0: 1.0,
            nu: 0.1,
            d0: 0.0,
            d2: 0.0,
            g: 0.0,
            t_i: 0.0,
            t_f: 10.0,
            n: 1000,
            eps: 0.5,
            x0: 1.0,
            v0: 0.0,
            order: 2,
            t0: None,
            j0: 1.0,
            assembly: AssemblyKind::Retarded,
            tau_e: 1,
            bath: Vec::new(),
            output: PathBuf::from("ctp-out"),
        }
    }
}

/// Scalar keys accepted by sweeps.
pub const SCALAR_KEYS: [&str; 16] = [
    "m", "omega0", "nu", "d0", "d2", "g", "t_i", "t_f", "n", "eps", "x0", "v0", "order", "t0", "j0", "tau_e",
];

fn parse_f64(key: &str, value: &str) -> Result<f64, String> {
    let v: f64 = value
        .parse()
        .map_err(|_| format!("value `{value}` for `{key}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("value for `{key}` must be finite"));
    }
    Ok(v)
}

fn parse_usize(key: &str, value: &str) -> Result<usize, String> {
    value
        .parse()
        .map_err(|_| format!("value `{value}` for `{key}` is not a non-negative integer"))
}

impl ScenarioConfig {
    /// Parse a configuration file.
    pub fn from_file(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::Input(format!("cannot read config `{}`: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parse configuration text; errors name the offending line.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut cfg = Self::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            cfg.apply_line(line)
                .map_err(|msg| RunError::Input(format!("line {}: {msg}", k + 1)))?;
        }
        Ok(cfg)
    }

    /// Apply a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), RunError> {
        self.apply_line(assignment)
            .map_err(|msg| RunError::Input(format!("--set {assignment}: {msg}")))
    }

    fn apply_line(&mut self, line: &str) -> Result<(), String> {
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("expected `key = value`, found `{line}`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() || value.is_empty() {
            return Err(format!("expected `key = value`, found `{line}`"));
        }
        self.set(key, value)
    }

    /// Set one parameter from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "m" => self.m = parse_f64(key, value)?,
            "omega0" => self.omega0 = parse_f64(key, value)?,
            "nu" => self.nu = parse_f64(key, value)?,
            "d0" => self.d0 = parse_f64(key, value)?,
            "d2" => self.d2 = parse_f64(key, value)?,
            "g" => self.g = parse_f64(key, value)?,
            "t_i" => self.t_i = parse_f64(key, value)?,
            "t_f" => self.t_f = parse_f64(key, value)?,
            "n" => self.n = parse_usize(key, value)?,
            "eps" => self.eps = parse_f64(key, value)?,
            "x0" => self.x0 = parse_f64(key, value)?,
            "v0" => self.v0 = parse_f64(key, value)?,
            "order" => self.order = parse_usize(key, value)?,
            "t0" => self.t0 = Some(parse_f64(key, value)?),
            "j0" => self.j0 = parse_f64(key, value)?,
            "tau_e" => {
                self.tau_e = match value {
                    "1" | "+1" => 1,
                    "-1" => -1,
                    _ => return Err(format!("`tau_e` must be +1 or -1, found `{value}`")),
                }
            }
            "assembly" => {
                self.assembly = match value {
                    "retarded" => AssemblyKind::Retarded,
                    "advanced" => AssemblyKind::Advanced,
                    _ => return Err(format!("`assembly` must be `retarded` or `advanced`, found `{value}`")),
                }
            }
            "bath" => {
                let parts: Vec<&str> = value.split(',').map(str::trim).collect();
                if parts.len() != 3 {
                    return Err(format!("`bath` expects `mass, omega, coupling`, found `{value}`"));
                }
                let mut mode = [0.0; 3];
                for (slot, (name, text)) in mode.iter_mut().zip(["mass", "omega", "coupling"].iter().zip(&parts)) {
                    *slot = parse_f64(&format!("bath {name}"), text)?;
                }
                self.bath.push(mode);
            }
            "output" => self.output = PathBuf::from(value),
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Impulse or pulse centre.
    pub fn centre(&self) -> f64 {
        self.t0.unwrap_or(0.5 * (self.t_i + self.t_f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input_message(r: Result<ScenarioConfig, RunError>) -> String {
        match r {
            Err(RunError::Input(msg)) => msg,
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn parses_keys_comments_and_bath_lines() {
        let cfg = ScenarioConfig::parse(
            "# header\n m = 2.5 \nomega0=0.5 # trailing\n\nbath = 1, 0.8, 0.1\nbath = 2,1.2,0.05\nassembly = advanced\ntau_e = -1\nn = 64\n",
        )
        .unwrap();
        assert_eq!(cfg.m, 2.5);
        assert_eq!(cfg.omega0, 0.5);
        assert_eq!(cfg.bath, vec![[1.0, 0.8, 0.1], [2.0, 1.2, 0.05]]);
        assert_eq!(cfg.assembly, AssemblyKind::Advanced);
        assert_eq!(cfg.tau_e, -1);
        assert_eq!(cfg.n, 64);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let msg = input_message(ScenarioConfig::parse("m = 1\n\nthis is wrong\n"));
        assert!(msg.starts_with("line 3:"), "{msg}");
    }

    #[test]
    fn unknown_key_is_listed() {
        let msg = input_message(ScenarioConfig::parse("mass = 1\n"));
        assert!(msg.contains("unknown key `mass`"), "{msg}");
    }

    #[test]
    fn bad_values_are_rejected() {
        for text in ["m = abc", "n = -3", "bath = 1,2", "tau_e = 0", "assembly = sideways", "eps = inf"] {
            assert!(ScenarioConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn override_uses_same_grammar() {
        let mut cfg = ScenarioConfig::default();
        cfg.apply_override("eps=0.25").unwrap();
        assert_eq!(cfg.eps, 0.25);
        assert!(cfg.apply_override("eps").is_err());
    }

    #[test]
    fn every_scalar_key_is_settable() {
        let mut cfg = ScenarioConfig::default();
        for key in SCALAR_KEYS {
            cfg.set(key, "1").unwrap();
        }
    }
}
