//! Flat `key = value` run configuration; command-line flags override file entries.

use phasespace::modspace::Exponent;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("referenced file does not exist: {0}")]
    MissingFile(PathBuf),
    #[error("no command given")]
    NoCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Transform,
    Wigner,
    WeylMatrix,
    PhaseMatrix,
    Spectrum,
    TransferCheck,
    IntertwineCheck,
    Modnorm,
    SjostrandNorm,
    Capacity,
    CertifyConcentration,
    Acceptance,
}

impl Command {
    pub const ALL: [Command; 12] = [
        Command::Transform,
        Command::Wigner,
        Command::WeylMatrix,
        Command::PhaseMatrix,
        Command::Spectrum,
        Command::TransferCheck,
        Command::IntertwineCheck,
        Command::Modnorm,
        Command::SjostrandNorm,
        Command::Capacity,
        Command::CertifyConcentration,
        Command::Acceptance,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Transform => "transform",
            Command::Wigner => "wigner",
            Command::WeylMatrix => "weyl-matrix",
            Command::PhaseMatrix => "phase-matrix",
            Command::Spectrum => "spectrum",
            Command::TransferCheck => "transfer-check",
            Command::IntertwineCheck => "intertwine-check",
            Command::Modnorm => "modnorm",
            Command::SjostrandNorm => "sjostrand-norm",
            Command::Capacity => "capacity",
            Command::CertifyConcentration => "certify-concentration",
            Command::Acceptance => "acceptance",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Command::ALL.iter().copied().find(|c| c.name() == s).ok_or_else(|| format!("unknown command; expected one of {}", Command::ALL.map(Command::name).join(", ")))
    }
}

/// Source of `Omega`.
#[derive(Debug, Clone, PartialEq)]
pub enum OmegaSpec {
    /// `c J` for `n = 1`.
    Scaled(f64),
    /// `[[Theta, I], [-I, N]]` for `n = 2` with `theta_12` and `eta_12`.
    Blocks { theta: f64, eta: f64 },
    /// Antisymmetric matrix in CSV form.
    File(PathBuf),
}

impl OmegaSpec {
    fn parse(v: &str) -> Result<Self, String> {
        if let Some(rest) = v.strip_prefix("blocks:") {
            let parts: Vec<&str> = rest.split(',').collect();
            if parts.len() != 2 {
                return Err("expected blocks:THETA,ETA".into());
            }
            let theta = parts[0].trim().parse::<f64>().map_err(|e| e.to_string())?;
            let eta = parts[1].trim().parse::<f64>().map_err(|e| e.to_string())?;
            return Ok(Self::Blocks { theta, eta });
        }
        if let Some(c) = v.strip_suffix('J') {
            let c = if c.is_empty() { 1.0 } else { c.trim().parse::<f64>().map_err(|e| e.to_string())? };
            if c == 0.0 || !c.is_finite() {
                return Err("scale must be finite and nonzero".into());
            }
            return Ok(Self::Scaled(c));
        }
        Ok(Self::File(PathBuf::from(v)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolName {
    Harmonic,
    Gaussian,
    Constant,
    LinearX,
    LinearXi,
    /// Samples on the phase-space grid in the binary array format.
    File(PathBuf),
}

impl SymbolName {
    fn parse(v: &str) -> Self {
        match v {
            "harmonic" => Self::Harmonic,
            "gaussian" => Self::Gaussian,
            "constant" => Self::Constant,
            "linear-x" => Self::LinearX,
            "linear-xi" => Self::LinearXi,
            other => Self::File(PathBuf::from(other)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    /// Points per axis; `None` picks a per-command default.
    pub points: Option<usize>,
    /// Box half-width; `None` picks the self-dual (or adapted) value.
    pub halfwidth: Option<f64>,
    pub omega: OmegaSpec,
    pub symbol: SymbolName,
    /// Hermite index of the window.
    pub window_index: usize,
    pub window_width: f64,
    /// Hermite index of the input field where a command needs one.
    pub index: usize,
    pub output_dir: PathBuf,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    pub only: Option<String>,
    pub count: usize,
    pub s: f64,
    pub q: Exponent,
    /// Row-major entries of the ellipsoid matrix `M`.
    pub ellipsoid: Vec<f64>,
    /// `c` in the test field `e^{-c |z|^2} / pi`.
    pub concentration: f64,
    /// Gaussian taper `e^{-|z|^2 / taper}` applied to the symbol by `intertwine-check`; 0 disables it.
    pub taper: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: Command::Acceptance,
            points: None,
            halfwidth: None,
            omega: OmegaSpec::Scaled(1.0),
            symbol: SymbolName::Harmonic,
            window_index: 0,
            window_width: 1.0,
            index: 0,
            output_dir: PathBuf::from("psw-out"),
            tolerances: BTreeMap::new(),
            seed: 0,
            only: None,
            count: 3,
            s: 0.0,
            q: Exponent::Finite(2.0),
            ellipsoid: vec![1.0, 0.0, 0.0, 1.0],
            concentration: 1.0,
            taper: 8.0,
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::Syntax { line: i + 1 })?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(ConfigError::Syntax { line: i + 1 });
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn invalid(key: &str, value: &str, reason: impl ToString) -> ConfigError {
    ConfigError::InvalidValue { key: key.into(), value: value.into(), reason: reason.to_string() }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| invalid(key, value, e))
}

fn positive(key: &str, value: &str) -> Result<f64, ConfigError> {
    let v: f64 = num(key, value)?;
    if !(v > 0.0) || !v.is_finite() {
        return Err(invalid(key, value, "must be positive"));
    }
    Ok(v)
}

impl RunConfig {
    /// Applies one entry; later entries win.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "command" => self.command = value.parse().map_err(|e: String| invalid(key, value, e))?,
            "points" => self.points = Some(num(key, value)?),
            "halfwidth" => self.halfwidth = Some(positive(key, value)?),
            "omega" => self.omega = OmegaSpec::parse(value).map_err(|e| invalid(key, value, e))?,
            "symbol" => self.symbol = SymbolName::parse(value),
            "window" => self.window_index = num(key, value)?,
            "window_width" => self.window_width = positive(key, value)?,
            "index" => self.index = num(key, value)?,
            "out" => self.output_dir = PathBuf::from(value),
            "seed" => self.seed = num(key, value)?,
            "only" => self.only = Some(value.to_string()),
            "count" => self.count = num(key, value)?,
            "s" => {
                self.s = num(key, value)?;
                if !(self.s >= 0.0) {
                    return Err(invalid(key, value, "must be >= 0"));
                }
            }
            "q" => {
                self.q = if value == "inf" {
                    Exponent::Infinity
                } else {
                    let q: f64 = num(key, value)?;
                    if !(q >= 1.0) {
                        return Err(invalid(key, value, "must be >= 1 or inf"));
                    }
                    Exponent::Finite(q)
                }
            }
            "ellipsoid" => {
                self.ellipsoid = value.split(',').map(|t| num::<f64>(key, t.trim())).collect::<Result<_, _>>()?;
                let n = (self.ellipsoid.len() as f64).sqrt() as usize;
                if n * n != self.ellipsoid.len() || n % 2 != 0 || n == 0 {
                    return Err(invalid(key, value, "expected the entries of a square matrix of even size"));
                }
            }
            "concentration" => self.concentration = positive(key, value)?,
            "taper" => {
                self.taper = num(key, value)?;
                if !(self.taper >= 0.0) {
                    return Err(invalid(key, value, "must be >= 0"));
                }
            }
            _ => match key.strip_prefix("tol.") {
                Some(name) if !name.is_empty() => {
                    self.tolerances.insert(name.to_string(), positive(key, value)?);
                }
                _ => return Err(ConfigError::UnknownKey(key.to_string())),
            },
        }
        Ok(())
    }

    /// Builds a configuration from an optional file and flag overrides, then validates it.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut has_command = false;
        let mut entries = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
            entries = parse_pairs(&text)?;
        }
        entries.extend(overrides.iter().cloned());
        for (k, v) in &entries {
            has_command |= k == "command";
            cfg.set(k, v)?;
        }
        if !has_command {
            return Err(ConfigError::NoCommand);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that referenced files exist.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if let OmegaSpec::File(p) = &self.omega {
            if !p.is_file() {
                return Err(ConfigError::MissingFile(p.clone()));
            }
        }
        if let SymbolName::File(p) = &self.symbol {
            if !p.is_file() {
                return Err(ConfigError::MissingFile(p.clone()));
            }
        }
        Ok(())
    }

    pub fn tolerance(&self, key: &str, default: f64) -> f64 {
        self.tolerances.get(key).copied().unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_forms() {
        assert_eq!(OmegaSpec::parse("J").unwrap(), OmegaSpec::Scaled(1.0));
        assert_eq!(OmegaSpec::parse("4J").unwrap(), OmegaSpec::Scaled(4.0));
        assert_eq!(OmegaSpec::parse("blocks:0.5,0.3").unwrap(), OmegaSpec::Blocks { theta: 0.5, eta: 0.3 });
        assert!(OmegaSpec::parse("0J").is_err());
    }

    #[test]
    fn pairs_skip_comments() {
        let p = parse_pairs("# note\ncommand = capacity  # trailing\n\nseed=3\n").unwrap();
        assert_eq!(p, vec![("command".into(), "capacity".into()), ("seed".into(), "3".into())]);
        assert!(matches!(parse_pairs("nonsense"), Err(ConfigError::Syntax { line: 1 })));
    }

    #[test]
    fn tolerance_overrides_must_be_positive() {
        let mut c = RunConfig::default();
        assert!(c.set("tol.moyal", "1e-3").is_ok());
        assert_eq!(c.tolerance("moyal", 1.0), 1e-3);
        assert!(c.set("tol.moyal", "-1").is_err());
        assert!(matches!(c.set("bogus", "1"), Err(ConfigError::UnknownKey(_))));
    }
}
