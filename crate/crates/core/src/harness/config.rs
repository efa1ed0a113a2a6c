//! Flat `key = value` experiment files.
//!
//! ```text
//! # Table cell: n = 50, p = 5
//! kind = coverage
//! n = 50
//! p = 5
//! reps = 7000
//! boot = 1000
//! levels = [0.95, 0.9, 0.8]
//! x_dist = chisq1c
//! scheme = bernmix(b=0.276)
//! seed = 1
//! ```
//!
//! Blank lines and `#` comments are ignored. Distribution and scheme values
//! use the same text forms as their `FromStr` implementations.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::regression::BootstrapMode;
use crate::weights::WeightScheme;

/// Default upper bound on `R * B * n * p` before `--force` is required.
pub const DEFAULT_MAX_WORK: f64 = 5e11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Coverage,
    Cdf,
    Regression,
    WeightsCheck,
    MomentFit,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Coverage => "coverage",
            Kind::Cdf => "cdf",
            Kind::Regression => "regression",
            Kind::WeightsCheck => "weights-check",
            Kind::MomentFit => "moment-fit",
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coverage" => Kind::Coverage,
            "cdf" => Kind::Cdf,
            "regression" => Kind::Regression,
            "weights-check" => Kind::WeightsCheck,
            "moment-fit" => Kind::MomentFit,
            other => return Err(Error::Config(format!("unknown kind `{other}`"))),
        })
    }
}

/// How the approximating law of the CDF experiment is built.
#[derive(Debug, Clone, PartialEq)]
pub enum YModel {
    /// Gaussian plus shifted-scaled Pareto with the given shape, matched to
    /// the target through the third moment.
    Pareto { shape: f64 },
    /// Largest feasible Gaussian part plus an atomic residual, matched to
    /// the target through the fourth moment.
    MaxGaussian,
    /// Explicit law.
    Explicit(DistributionSpec),
}

impl fmt::Display for YModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            YModel::Pareto { shape } => write!(f, "pareto-split(shape={shape})"),
            YModel::MaxGaussian => f.write_str("max-gaussian"),
            YModel::Explicit(spec) => write!(f, "{spec}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    Gaussian,
    Fourier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// A fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: Kind,
    pub n: usize,
    pub p: usize,
    pub reps: usize,
    pub boot: usize,
    /// Upper-tail probabilities, one per confidence level, in the order the
    /// levels were given.
    pub alphas: Vec<f64>,
    pub x_dist: DistributionSpec,
    pub scheme: WeightScheme,
    pub y_model: YModel,
    /// Number of realizations in the CDF experiment.
    pub samples: usize,
    pub design: DesignKind,
    /// `None` means the zero vector.
    pub theta: Option<Vec<f64>>,
    pub mode: BootstrapMode,
    /// Moment order of the moment-fit report.
    pub order: usize,
    pub pareto_shape: f64,
    pub tol: Option<f64>,
    pub seed: u64,
    /// `0` uses every available core.
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    pub max_work: f64,
    pub force: bool,
}

impl ExperimentConfig {
    /// Defaults for `kind`: n = 50, p = 5, R = 7000, B = 1000, N = 15000.
    pub fn new(kind: Kind) -> Self {
        Self {
            kind,
            n: 50,
            p: 5,
            reps: 7000,
            boot: crate::bootstrap::DEFAULT_BOOT,
            alphas: vec![0.05],
            x_dist: DistributionSpec::CenteredChiSq1,
            scheme: WeightScheme::PureGaussian,
            y_model: YModel::Pareto { shape: 4.1 },
            samples: 15_000,
            design: DesignKind::Gaussian,
            theta: None,
            mode: BootstrapMode::OracleErrors,
            order: 4,
            pareto_shape: 4.1,
            tol: None,
            seed: 1,
            threads: 0,
            out: None,
            format: OutputFormat::Csv,
            max_work: DEFAULT_MAX_WORK,
            force: false,
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text, None)
    }

    /// Parses a config. When `kind` is given it must agree with any `kind`
    /// line in the text.
    pub fn parse(text: &str, kind: Option<Kind>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            pairs.push((lineno + 1, k.trim().to_string(), v.trim().to_string()));
        }
        let declared = pairs
            .iter()
            .find(|(_, k, _)| k == "kind")
            .map(|(_, _, v)| v.parse::<Kind>())
            .transpose()?;
        let kind = match (kind, declared) {
            (Some(a), Some(b)) if a != b => {
                return Err(Error::Config(format!("config declares kind `{b}` but `{a}` was requested")))
            }
            (Some(a), _) | (None, Some(a)) => a,
            (None, None) => return Err(Error::Config("missing `kind`".into())),
        };
        let mut cfg = Self::new(kind);
        let mut seen = Vec::new();
        for (lineno, key, value) in pairs {
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {lineno}: duplicate key `{key}`")));
            }
            cfg.set(&key, &value)
                .map_err(|e| Error::Config(format!("line {lineno}: `{key}`: {e}")))?;
            seen.push(key);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "kind" => {}
            "n" => self.n = parse_num(value)?,
            "p" => self.p = parse_num(value)?,
            "reps" | "R" => self.reps = parse_num(value)?,
            "boot" | "B" => self.boot = parse_num(value)?,
            "samples" | "N" => self.samples = parse_num(value)?,
            "levels" => self.alphas = parse_list(value)?.into_iter().map(level_to_alpha).collect(),
            "alphas" => self.alphas = parse_list(value)?,
            "x_dist" => self.x_dist = value.parse()?,
            "scheme" => self.scheme = value.parse()?,
            "y_dist" => {
                self.y_model = match value {
                    "auto" | "pareto" => YModel::Pareto {
                        shape: self.pareto_shape,
                    },
                    "max-gaussian" => YModel::MaxGaussian,
                    other => YModel::Explicit(other.parse()?),
                }
            }
            "pareto_shape" => {
                self.pareto_shape = parse_num(value)?;
                if let YModel::Pareto { shape } = &mut self.y_model {
                    *shape = self.pareto_shape;
                }
            }
            "design" => {
                self.design = match value {
                    "gaussian" => DesignKind::Gaussian,
                    "fourier" => DesignKind::Fourier,
                    other => return Err(Error::Config(format!("unknown design `{other}`"))),
                }
            }
            "theta" => self.theta = Some(parse_list(value)?),
            "residuals" => {
                self.mode = if parse_bool(value)? {
                    BootstrapMode::Residuals
                } else {
                    BootstrapMode::OracleErrors
                }
            }
            "order" => self.order = parse_num(value)?,
            "tol" => self.tol = Some(parse_num(value)?),
            "seed" => self.seed = parse_num(value)?,
            "threads" => {
                self.threads = if value == "auto" { 0 } else { parse_num(value)? };
            }
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => {
                self.format = match value {
                    "csv" => OutputFormat::Csv,
                    "json" => OutputFormat::Json,
                    other => return Err(Error::Config(format!("unknown format `{other}`"))),
                }
            }
            "max_work" => self.max_work = parse_num(value)?,
            "force" => self.force = parse_bool(value)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n == 0 || self.p == 0 {
            return fail(format!("n and p must be positive, got n={}, p={}", self.n, self.p));
        }
        if self.reps == 0 || self.boot == 0 || self.samples == 0 {
            return fail("reps, boot and samples must be positive".into());
        }
        if self.alphas.is_empty() {
            return fail("at least one level is required".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return fail(format!("alpha {a} is outside (0, 1)"));
        }
        if self.order < 3 {
            return fail(format!("order must be at least 3, got {}", self.order));
        }
        if let Some(theta) = &self.theta {
            if theta.len() != self.p {
                return fail(format!("theta has length {}, expected p = {}", theta.len(), self.p));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return fail(format!("tol must be positive, got {t}"));
            }
        }
        self.x_dist.validate()?;
        self.scheme.validate()?;
        if let YModel::Explicit(spec) = &self.y_model {
            spec.validate()?;
        }
        Ok(())
    }

    /// Levels `1 - alpha`, rounded to 12 decimals.
    pub fn levels(&self) -> Vec<f64> {
        self.alphas.iter().map(|a| level_to_alpha(*a)).collect()
    }

    /// Identifies the Monte Carlo cell. The weight scheme is left out, so
    /// two schemes run on one cell see the same data draws.
    pub fn experiment_id(&self) -> u64 {
        let tag = match self.kind {
            Kind::Regression => format!(
                "{}|{}|{}|{}|{:?}|{:?}",
                self.kind, self.n, self.p, self.x_dist, self.design, self.theta
            ),
            Kind::Cdf => format!("{}|{}|{}|{}|{}", self.kind, self.n, self.p, self.x_dist, self.y_model),
            _ => format!("{}|{}|{}|{}", self.kind, self.n, self.p, self.x_dist),
        };
        fnv1a(tag.as_bytes())
    }

    /// `R * B * n * p` for coverage-type runs, `N * n * p` for CDF runs.
    pub fn work(&self) -> f64 {
        let (n, p) = (self.n as f64, self.p as f64);
        match self.kind {
            Kind::Coverage | Kind::Regression => self.reps as f64 * self.boot as f64 * n * p,
            Kind::Cdf => self.samples as f64 * n * p,
            Kind::WeightsCheck | Kind::MomentFit => 0.0,
        }
    }

    pub fn check_budget(&self) -> Result<()> {
        let work = self.work();
        if work > self.max_work && !self.force {
            return Err(Error::Budget {
                work,
                limit: self.max_work,
            });
        }
        Ok(())
    }
}

/// `1 - x` rounded to 12 decimals, so that `0.9` maps to exactly `0.1`.
pub fn level_to_alpha(x: f64) -> f64 {
    ((1.0 - x) * 1e12).round() / 1e12
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn parse_num<T: FromStr>(s: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    let cleaned = s.replace('_', "");
    cleaned
        .parse::<T>()
        .or_else(|e| {
            // allow `7e3` style integers
            match cleaned.parse::<f64>() {
                Ok(x) if x.fract() == 0.0 => x.to_string().parse::<T>().map_err(|_| e),
                _ => Err(e),
            }
        })
        .map_err(|e| Error::Config(format!("cannot parse `{s}`: {e}")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let inner = s
        .trim()
        .strip_prefix('[')
        .and_then(|r| r.strip_suffix(']'))
        .ok_or_else(|| Error::Config(format!("expected a `[..]` list, got `{s}`")))?;
    inner
        .split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(parse_num)
        .collect()
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("expected a boolean, got `{other}`"))),
    }
}
