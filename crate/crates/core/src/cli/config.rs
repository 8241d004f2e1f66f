//! Experiment configuration: flags layered over an optional `key=value` file.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};

use crate::mesh::Domain;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Eig,
    Poisson,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

/// Command-line flags. Every setting is optional so that a config file can
/// supply it; unset values fall back to the defaults of [`ExperimentConfig`].
#[derive(Parser, Debug, Default)]
#[command(
    name = "wgeig",
    version,
    about = "Weak Galerkin eigenvalue and Poisson refinement studies"
)]
pub struct CliArgs {
    /// Plain `key=value` file; flags given on the command line take precedence.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub mode: Option<Mode>,

    /// `square` or `lshape`.
    #[arg(long)]
    pub domain: Option<String>,

    /// Polynomial degree, 1 to 4.
    #[arg(long)]
    pub k: Option<usize>,

    /// Stabilization exponent in [0, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub eps: Option<f64>,

    /// Grid subdivisions per unit length, each twice the previous.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub levels: Option<Vec<String>>,

    /// Number of eigenpairs, 1 to 12.
    #[arg(long)]
    pub nev: Option<usize>,

    /// Cell quadrature degree for non-polynomial integrands.
    #[arg(long)]
    pub quad_degree: Option<usize>,

    /// Relative eigenpair residual tolerance.
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,

    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub reason: String,
}

impl ConfigError {
    fn new(field: &str, reason: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid `{}`: {}", self.field, self.reason)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub domain: Domain,
    pub k: usize,
    pub eps: f64,
    pub levels: Vec<usize>,
    pub nev: usize,
    pub quad_degree: usize,
    pub tol: f64,
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Eig,
            domain: Domain::UnitSquare,
            k: 1,
            eps: 0.0,
            levels: vec![4, 8, 16, 32],
            nev: 6,
            quad_degree: 12,
            tol: 1e-9,
            out: None,
            format: Format::Csv,
        }
    }
}

/// Partially specified settings, merged file first and flags second.
#[derive(Default)]
struct Layer {
    mode: Option<Mode>,
    domain: Option<Domain>,
    k: Option<usize>,
    eps: Option<f64>,
    levels: Option<Vec<usize>>,
    nev: Option<usize>,
    quad_degree: Option<usize>,
    tol: Option<f64>,
    out: Option<PathBuf>,
    format: Option<Format>,
}

impl Layer {
    fn over(self, base: Layer) -> Layer {
        Layer {
            mode: self.mode.or(base.mode),
            domain: self.domain.or(base.domain),
            k: self.k.or(base.k),
            eps: self.eps.or(base.eps),
            levels: self.levels.or(base.levels),
            nev: self.nev.or(base.nev),
            quad_degree: self.quad_degree.or(base.quad_degree),
            tol: self.tol.or(base.tol),
            out: self.out.or(base.out),
            format: self.format.or(base.format),
        }
    }
}

fn parse_num<T: std::str::FromStr>(field: &str, v: &str) -> Result<T, ConfigError> {
    v.trim()
        .parse()
        .map_err(|_| ConfigError::new(field, format!("cannot parse `{}`", v.trim())))
}

fn parse_levels<S: AsRef<str>>(items: &[S]) -> Result<Vec<usize>, ConfigError> {
    items
        .iter()
        .map(|s| s.as_ref().trim())
        .filter(|s| !s.is_empty())
        .map(|s| parse_num("levels", s))
        .collect()
}

fn parse_enum<T: ValueEnum>(field: &str, v: &str) -> Result<T, ConfigError> {
    T::from_str(v.trim(), true)
        .map_err(|_| ConfigError::new(field, format!("unknown value `{}`", v.trim())))
}

fn parse_file(text: &str) -> Result<Layer, ConfigError> {
    let mut layer = Layer::default();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            ConfigError::new("config", format!("line {}: expected key=value", lineno + 1))
        })?;
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        match key.as_str() {
            "mode" => layer.mode = Some(parse_enum("mode", value)?),
            "domain" => {
                layer.domain = Some(
                    value
                        .parse()
                        .map_err(|e: String| ConfigError::new("domain", e))?,
                )
            }
            "k" => layer.k = Some(parse_num("k", value)?),
            "eps" => layer.eps = Some(parse_num("eps", value)?),
            "levels" => {
                let parts: Vec<&str> = value.split(',').collect();
                layer.levels = Some(parse_levels(&parts)?);
            }
            "nev" => layer.nev = Some(parse_num("nev", value)?),
            "quad_degree" => layer.quad_degree = Some(parse_num("quad_degree", value)?),
            "tol" => layer.tol = Some(parse_num("tol", value)?),
            "out" => layer.out = Some(PathBuf::from(value)),
            "format" => layer.format = Some(parse_enum("format", value)?),
            other => {
                return Err(ConfigError::new(
                    "config",
                    format!("line {}: unknown key `{other}`", lineno + 1),
                ))
            }
        }
    }
    Ok(layer)
}

fn flags_layer(args: &CliArgs) -> Result<Layer, ConfigError> {
    Ok(Layer {
        mode: args.mode,
        domain: args
            .domain
            .as_deref()
            .map(|d| d.parse().map_err(|e: String| ConfigError::new("domain", e)))
            .transpose()?,
        k: args.k,
        eps: args.eps,
        levels: args.levels.as_deref().map(parse_levels).transpose()?,
        nev: args.nev,
        quad_degree: args.quad_degree,
        tol: args.tol,
        out: args.out.clone(),
        format: args.format,
    })
}

impl ExperimentConfig {
    pub fn from_args(args: &CliArgs) -> Result<Self, ConfigError> {
        let file = match &args.config {
            Some(path) => Self::read_file(path)?,
            None => Layer::default(),
        };
        let merged = flags_layer(args)?.over(file);
        let defaults = Self::default();
        let mode = merged.mode.unwrap_or(defaults.mode);
        let default_levels = match mode {
            Mode::Verify => vec![1, 2, 4],
            _ => defaults.levels,
        };
        let cfg = Self {
            mode,
            domain: merged.domain.unwrap_or(defaults.domain),
            k: merged.k.unwrap_or(defaults.k),
            eps: merged.eps.unwrap_or(defaults.eps),
            levels: merged.levels.unwrap_or(default_levels),
            nev: merged.nev.unwrap_or(defaults.nev),
            quad_degree: merged.quad_degree.unwrap_or(defaults.quad_degree),
            tol: merged.tol.unwrap_or(defaults.tol),
            out: merged.out,
            format: merged.format.unwrap_or(defaults.format),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn read_file(path: &Path) -> Result<Layer, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("config", format!("{}: {e}", path.display())))?;
        parse_file(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(1..=4).contains(&self.k) {
            return Err(ConfigError::new(
                "k",
                format!("{} is outside 1..=4", self.k),
            ));
        }
        if !(0.0..1.0).contains(&self.eps) {
            return Err(ConfigError::new(
                "eps",
                format!("{} is outside [0, 1)", self.eps),
            ));
        }
        if !(1..=12).contains(&self.nev) {
            return Err(ConfigError::new(
                "nev",
                format!("{} is outside 1..=12", self.nev),
            ));
        }
        if self.levels.is_empty() {
            return Err(ConfigError::new("levels", "at least one level is required"));
        }
        if self.levels[0] == 0 {
            return Err(ConfigError::new("levels", "subdivisions must be positive"));
        }
        if let Some(w) = self.levels.windows(2).find(|w| w[1] != 2 * w[0]) {
            return Err(ConfigError::new(
                "levels",
                format!("{} does not double {}; orders need h halving", w[1], w[0]),
            ));
        }
        if self.quad_degree == 0 || self.quad_degree > 40 {
            return Err(ConfigError::new(
                "quad_degree",
                format!("{} is outside 1..=40", self.quad_degree),
            ));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(ConfigError::new(
                "tol",
                format!("{} is outside (0, 1)", self.tol),
            ));
        }
        Ok(())
    }
}
