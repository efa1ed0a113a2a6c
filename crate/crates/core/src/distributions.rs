//! Scalar sampling laws with closed-form raw moments.
//!
//! Every law used by the experiments is described by a [`DistributionSpec`].
//! A spec can be sampled (through a prepared [`Sampler`]), asked for its exact
//! raw moments, and written to or parsed from a compact text form such as
//! `pareto(xm=0.5,a=4.1,shift=0.66129,scale=4.33319)`.

use std::fmt;
use std::ops::Index;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::text::{fmt_list, Term};

const PROB_SUM_TOL: f64 = 1e-12;

/// Law of a scalar random variable.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    /// `(L - E L) / sd(L)` for `L ~ lnN(0, sigma^2)`.
    StdLognormal { sigma: f64 },
    /// `L - E L` for `L ~ lnN(0, sigma^2)`, not rescaled.
    CenteredLognormal { sigma: f64 },
    /// `lnN(0, sigma^2)` itself.
    Lognormal { sigma: f64 },
    /// `chi^2_1 - 1`.
    CenteredChiSq1,
    /// `chi^2_1`.
    ChiSq1,
    /// `(P - shift) * scale` for `P ~ Pareto(x_m, a)` with density
    /// `a x_m^a / x^(a+1)` on `[x_m, inf)`.
    ShiftedScaledPareto {
        x_m: f64,
        a: f64,
        shift: f64,
        scale: f64,
    },
    Gaussian { mean: f64, var: f64 },
    /// `Z + U` with `Z ~ N(0, var_z)` independent of `U ~ atom`.
    GaussianConvolution {
        var_z: f64,
        atom: Box<DistributionSpec>,
    },
    FiniteAtomic { nodes: Vec<f64>, probs: Vec<f64> },
}

/// Raw moments `m_0..=m_K` of a scalar law, with `m_0 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentVector {
    moments: Vec<f64>,
}

impl MomentVector {
    pub fn new(moments: Vec<f64>) -> Result<Self> {
        if moments.len() < 3 {
            return Err(Error::InvalidMoments(format!(
                "order must be at least 2, got {}",
                moments.len() as isize - 1
            )));
        }
        if (moments[0] - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::InvalidMoments(format!(
                "m_0 must be 1, got {}",
                moments[0]
            )));
        }
        if let Some(k) = moments.iter().position(|m| !m.is_finite()) {
            return Err(Error::InvalidMoments(format!("m_{k} is not finite")));
        }
        Ok(Self { moments })
    }

    /// The highest order K.
    pub fn order(&self) -> usize {
        self.moments.len() - 1
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.moments
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.moments
    }

    pub fn mean(&self) -> f64 {
        self.moments[1]
    }

    pub fn variance(&self) -> f64 {
        self.moments[2] - self.moments[1] * self.moments[1]
    }

    /// Leading moments up to order `k`.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k > self.order() {
            return Err(Error::InvalidMoments(format!(
                "cannot truncate order {} to {k}",
                self.order()
            )));
        }
        Self::new(self.moments[..=k].to_vec())
    }

    /// Central moments `E(X - m_1)^k` for `k = 0..=K`.
    pub fn central(&self) -> Vec<f64> {
        shift_scale(&self.moments, self.mean(), 1.0)
    }
}

impl Index<usize> for MomentVector {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.moments[k]
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// `(2l - 1)!!`, with `(-1)!! = 1`.
pub(crate) fn odd_double_factorial(l: usize) -> f64 {
    (1..=l).fold(1.0, |acc, i| acc * (2 * i - 1) as f64)
}

/// Raw moments of `(X - shift) * scale` from raw moments of `X`.
pub(crate) fn shift_scale(raw: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    (0..raw.len())
        .map(|k| {
            let s: f64 = (0..=k)
                .map(|j| binomial(k, j) * raw[j] * (-shift).powi((k - j) as i32))
                .sum();
            s * scale.powi(k as i32)
        })
        .collect()
}

/// Raw moments of `Z + U` where `Z ~ N(0, var_z)` and `U` has raw moments `u`.
pub(crate) fn convolve_gaussian(u: &[f64], var_z: f64) -> Vec<f64> {
    (0..u.len())
        .map(|k| {
            (0..=k / 2)
                .map(|l| {
                    binomial(k, 2 * l) * odd_double_factorial(l) * var_z.powi(l as i32) * u[k - 2 * l]
                })
                .sum()
        })
        .collect()
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be finite, got {x}")))
    }
}

fn check_nonnegative(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be nonnegative and finite, got {x}")))
    }
}

impl DistributionSpec {
    pub fn std_lognormal(sigma: f64) -> Result<Self> {
        let s = Self::StdLognormal { sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn centered_lognormal(sigma: f64) -> Result<Self> {
        let s = Self::CenteredLognormal { sigma };
        s.validate()?;
        Ok(s)
    }

    pub fn pareto(x_m: f64, a: f64, shift: f64, scale: f64) -> Result<Self> {
        let s = Self::ShiftedScaledPareto { x_m, a, shift, scale };
        s.validate()?;
        Ok(s)
    }

    pub fn gaussian(mean: f64, var: f64) -> Result<Self> {
        let s = Self::Gaussian { mean, var };
        s.validate()?;
        Ok(s)
    }

    pub fn convolution(var_z: f64, atom: DistributionSpec) -> Result<Self> {
        let s = Self::GaussianConvolution {
            var_z,
            atom: Box::new(atom),
        };
        s.validate()?;
        Ok(s)
    }

    pub fn atomic(nodes: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        let s = Self::FiniteAtomic { nodes, probs };
        s.validate()?;
        Ok(s)
    }

    /// Point mass at `c`.
    pub fn point(c: f64) -> Self {
        Self::FiniteAtomic {
            nodes: vec![c],
            probs: vec![1.0],
        }
    }

    /// Checks parameter ranges, including finiteness of the fourth moment.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::StdLognormal { sigma } => check_positive("sigma", *sigma),
            Self::CenteredLognormal { sigma } | Self::Lognormal { sigma } => {
                check_positive("sigma", *sigma)
            }
            Self::CenteredChiSq1 | Self::ChiSq1 => Ok(()),
            Self::ShiftedScaledPareto { x_m, a, shift, scale } => {
                check_positive("x_m", *x_m)?;
                check_finite("shift", *shift)?;
                check_finite("scale", *scale)?;
                if !(a.is_finite() && *a > 4.0) {
                    return Err(Error::InvalidSpec(format!(
                        "Pareto shape must exceed 4 for a finite fourth moment, got {a}"
                    )));
                }
                Ok(())
            }
            Self::Gaussian { mean, var } => {
                check_finite("mean", *mean)?;
                check_nonnegative("var", *var)
            }
            Self::GaussianConvolution { var_z, atom } => {
                check_nonnegative("var_z", *var_z)?;
                atom.validate()
            }
            Self::FiniteAtomic { nodes, probs } => {
                if nodes.is_empty() {
                    return Err(Error::InvalidSpec("atomic law needs at least one node".into()));
                }
                if nodes.len() != probs.len() {
                    return Err(Error::InvalidSpec(format!(
                        "{} nodes but {} probabilities",
                        nodes.len(),
                        probs.len()
                    )));
                }
                for (&x, &q) in nodes.iter().zip(probs) {
                    check_finite("node", x)?;
                    check_nonnegative("probability", q)?;
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidSpec(format!(
                        "probabilities sum to {total}, not 1"
                    )));
                }
                let mut sorted = nodes.clone();
                sorted.sort_by(f64::total_cmp);
                if sorted.windows(2).any(|w| w[0] == w[1]) {
                    return Err(Error::InvalidSpec("atomic nodes must be distinct".into()));
                }
                Ok(())
            }
        }
    }

    /// Exact raw moments `m_0..=m_order`.
    pub fn raw_moments(&self, order: usize) -> Result<MomentVector> {
        MomentVector::new(self.raw_moment_list(order)?)
    }

    fn raw_moment_list(&self, order: usize) -> Result<Vec<f64>> {
        let ks = 0..=order;
        Ok(match self {
            Self::Lognormal { sigma } => ks.map(|j| lognormal_raw(*sigma, j)).collect(),
            Self::CenteredLognormal { sigma } => {
                let raw: Vec<f64> = ks.map(|j| lognormal_raw(*sigma, j)).collect();
                shift_scale(&raw, raw[1], 1.0)
            }
            Self::StdLognormal { sigma } => {
                let raw: Vec<f64> = ks.map(|j| lognormal_raw(*sigma, j)).collect();
                let (shift, scale) = lognormal_standardization(*sigma);
                shift_scale(&raw, shift, scale)
            }
            Self::ChiSq1 => ks.map(odd_double_factorial).collect(),
            Self::CenteredChiSq1 => {
                let raw: Vec<f64> = ks.map(odd_double_factorial).collect();
                shift_scale(&raw, 1.0, 1.0)
            }
            Self::ShiftedScaledPareto { x_m, a, shift, scale } => {
                if order as f64 >= *a {
                    return Err(Error::MomentNotFinite { order, shape: *a });
                }
                let raw: Vec<f64> = ks
                    .map(|j| a * x_m.powi(j as i32) / (a - j as f64))
                    .collect();
                shift_scale(&raw, *shift, *scale)
            }
            Self::Gaussian { mean, var } => {
                let central: Vec<f64> = ks
                    .map(|k| {
                        if k % 2 == 1 {
                            0.0
                        } else {
                            odd_double_factorial(k / 2) * var.powi((k / 2) as i32)
                        }
                    })
                    .collect();
                shift_scale(&central, -mean, 1.0)
            }
            Self::GaussianConvolution { var_z, atom } => {
                convolve_gaussian(&atom.raw_moment_list(order)?, *var_z)
            }
            Self::FiniteAtomic { nodes, probs } => ks
                .map(|k| {
                    nodes
                        .iter()
                        .zip(probs)
                        .map(|(x, q)| q * x.powi(k as i32))
                        .sum()
                })
                .collect(),
        })
    }

    pub fn mean(&self) -> Result<f64> {
        Ok(self.raw_moments(2)?.mean())
    }

    pub fn variance(&self) -> Result<f64> {
        Ok(self.raw_moments(2)?.variance())
    }

    /// `(mean, 1/sd)`: the shift and scale that make `(X - shift) * scale`
    /// have mean 0 and variance 1.
    pub fn standardize(&self) -> Result<(f64, f64)> {
        let m = self.raw_moments(2)?;
        let var = m.variance();
        if !(var > 1e-14 * (1.0 + m[2].abs())) {
            return Err(Error::ZeroVariance);
        }
        Ok((m.mean(), 1.0 / var.sqrt()))
    }

    /// Prepares a sampler with all derived constants computed once.
    pub fn sampler(&self) -> Sampler {
        let kind = match self {
            Self::StdLognormal { sigma } => {
                let (shift, scale) = lognormal_standardization(*sigma);
                SamplerKind::Lognormal {
                    sigma: *sigma,
                    shift,
                    scale,
                }
            }
            Self::CenteredLognormal { sigma } => SamplerKind::Lognormal {
                sigma: *sigma,
                shift: (0.5 * sigma * sigma).exp(),
                scale: 1.0,
            },
            Self::Lognormal { sigma } => SamplerKind::Lognormal {
                sigma: *sigma,
                shift: 0.0,
                scale: 1.0,
            },
            Self::CenteredChiSq1 => SamplerKind::ChiSq1 { shift: 1.0 },
            Self::ChiSq1 => SamplerKind::ChiSq1 { shift: 0.0 },
            Self::ShiftedScaledPareto { x_m, a, shift, scale } => SamplerKind::Pareto {
                x_m: *x_m,
                inv_a: 1.0 / a,
                shift: *shift,
                scale: *scale,
            },
            Self::Gaussian { mean, var } => SamplerKind::Gaussian {
                mean: *mean,
                sd: var.sqrt(),
            },
            Self::GaussianConvolution { var_z, atom } => SamplerKind::Convolution {
                sd_z: var_z.sqrt(),
                atom: Box::new(atom.sampler()),
            },
            Self::FiniteAtomic { nodes, probs } => {
                let mut acc = 0.0;
                let cumulative = probs
                    .iter()
                    .map(|q| {
                        acc += q;
                        acc
                    })
                    .collect();
                SamplerKind::Atomic {
                    nodes: nodes.clone(),
                    cumulative,
                }
            }
        };
        Sampler { kind }
    }

    /// One draw. Prefer [`DistributionSpec::sampler`] in loops.
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler().sample(rng)
    }

    /// `p` independent draws forming one vector with i.i.d. coordinates.
    pub fn sample_vector<R: Rng + ?Sized>(&self, p: usize, rng: &mut R) -> Vec<f64> {
        let sampler = self.sampler();
        (0..p).map(|_| sampler.sample(rng)).collect()
    }

    fn from_term(t: &Term) -> Result<Self> {
        let spec = match t.name.as_str() {
            "lognormal" => {
                t.check_keys(&["sigma", "var", "std", "centered"])?;
                let sigma = match (t.number("sigma")?, t.number("var")?) {
                    (Some(s), None) => s,
                    (None, Some(v)) => v.sqrt(),
                    _ => return Err(t.err("exactly one of `sigma` or `var` is required")),
                };
                let flags: Vec<&str> = t.flags().collect();
                match flags.as_slice() {
                    [] => Self::Lognormal { sigma },
                    ["std"] => Self::StdLognormal { sigma },
                    ["centered"] => Self::CenteredLognormal { sigma },
                    _ => return Err(t.err("use at most one of `std`, `centered`")),
                }
            }
            "chisq1c" => {
                t.check_keys(&[])?;
                Self::CenteredChiSq1
            }
            "chisq1" => {
                t.check_keys(&[])?;
                Self::ChiSq1
            }
            "pareto" => {
                t.check_keys(&["xm", "a", "shift", "scale"])?;
                Self::ShiftedScaledPareto {
                    x_m: t.require_number("xm")?,
                    a: t.require_number("a")?,
                    shift: t.number("shift")?.unwrap_or(0.0),
                    scale: t.number("scale")?.unwrap_or(1.0),
                }
            }
            "gauss" => {
                t.check_keys(&["mean", "var"])?;
                Self::Gaussian {
                    mean: t.number("mean")?.unwrap_or(0.0),
                    var: t.number("var")?.unwrap_or(1.0),
                }
            }
            "conv" => {
                t.check_keys(&["var_z", "atom"])?;
                Self::GaussianConvolution {
                    var_z: t.require_number("var_z")?,
                    atom: Box::new(Self::from_term(t.term("atom")?)?),
                }
            }
            "atomic" => {
                t.check_keys(&["nodes", "probs"])?;
                Self::FiniteAtomic {
                    nodes: t.list("nodes")?,
                    probs: t.list("probs")?,
                }
            }
            other => return Err(Error::InvalidSpec(format!("unknown distribution `{other}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub(crate) fn parse_term(t: &Term) -> Result<Self> {
        Self::from_term(t)
    }
}

fn lognormal_raw(sigma: f64, j: usize) -> f64 {
    let j = j as f64;
    (0.5 * j * j * sigma * sigma).exp()
}

/// Mean and inverse standard deviation of `lnN(0, sigma^2)`.
fn lognormal_standardization(sigma: f64) -> (f64, f64) {
    let s2 = sigma * sigma;
    let mean = (0.5 * s2).exp();
    let var = s2.exp_m1() * s2.exp();
    (mean, 1.0 / var.sqrt())
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::StdLognormal { sigma } => write!(f, "lognormal(sigma={sigma},std)"),
            Self::CenteredLognormal { sigma } => write!(f, "lognormal(sigma={sigma},centered)"),
            Self::Lognormal { sigma } => write!(f, "lognormal(sigma={sigma})"),
            Self::CenteredChiSq1 => write!(f, "chisq1c"),
            Self::ChiSq1 => write!(f, "chisq1"),
            Self::ShiftedScaledPareto { x_m, a, shift, scale } => {
                write!(f, "pareto(xm={x_m},a={a},shift={shift},scale={scale})")
            }
            Self::Gaussian { mean, var } => write!(f, "gauss(mean={mean},var={var})"),
            Self::GaussianConvolution { var_z, atom } => {
                write!(f, "conv(var_z={var_z},atom={atom})")
            }
            Self::FiniteAtomic { nodes, probs } => {
                write!(f, "atomic(nodes={},probs={})", fmt_list(nodes), fmt_list(probs))
            }
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_term(&Term::parse(s)?)
    }
}

/// A spec with its sampling constants precomputed.
#[derive(Debug, Clone)]
pub struct Sampler {
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    Lognormal { sigma: f64, shift: f64, scale: f64 },
    ChiSq1 { shift: f64 },
    Pareto { x_m: f64, inv_a: f64, shift: f64, scale: f64 },
    Gaussian { mean: f64, sd: f64 },
    Convolution { sd_z: f64, atom: Box<Sampler> },
    Atomic { nodes: Vec<f64>, cumulative: Vec<f64> },
}

impl Sampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            SamplerKind::Lognormal { sigma, shift, scale } => {
                let z: f64 = rng.sample(StandardNormal);
                ((sigma * z).exp() - shift) * scale
            }
            SamplerKind::ChiSq1 { shift } => {
                let z: f64 = rng.sample(StandardNormal);
                z * z - shift
            }
            SamplerKind::Pareto { x_m, inv_a, shift, scale } => {
                // inverse CDF on (0, 1]
                let u = 1.0 - rng.random::<f64>();
                (x_m * u.powf(-inv_a) - shift) * scale
            }
            SamplerKind::Gaussian { mean, sd } => {
                if *sd == 0.0 {
                    return *mean;
                }
                let z: f64 = rng.sample(StandardNormal);
                mean + sd * z
            }
            SamplerKind::Convolution { sd_z, atom } => {
                let z: f64 = rng.sample(StandardNormal);
                sd_z * z + atom.sample(rng)
            }
            SamplerKind::Atomic { nodes, cumulative } => {
                if nodes.len() == 1 {
                    return nodes[0];
                }
                let u: f64 = rng.random();
                let i = cumulative.partition_point(|&c| c <= u);
                nodes[i.min(nodes.len() - 1)]
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for x in out {
            *x = self.sample(rng);
        }
    }
}
