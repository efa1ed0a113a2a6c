//! Bootstrap multiplier laws.
//!
//! A multiplier `eps` is moment matched when `E eps = 0`, `E eps^2 = 1` and
//! `E eps^3 = 1`. Every scheme here is a Gaussian plus an independent
//! zero-mean residual, so its first four moments are available in closed form.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::distributions::{convolve_gaussian, DistributionSpec, Sampler};
use crate::error::{Error, Result};
use crate::text::Term;

/// Gaussian-plus-Bernoulli multiplier `z + sigma_u (B(b) - b)` with
/// `z ~ N(0, var_z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliMix {
    b: f64,
    sigma_u: f64,
    var_z: f64,
}

impl BernoulliMix {
    pub fn new(b: f64) -> Result<Self> {
        let (sigma_u, var_z) = solve_bernoulli_mix(b)?;
        Ok(Self { b, sigma_u, var_z })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn sigma_u(&self) -> f64 {
        self.sigma_u
    }

    pub fn var_z(&self) -> f64 {
        self.var_z
    }
}

/// Law of the bootstrap multipliers.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightScheme {
    /// `sqrt(1 - 2^(-2/3)) z + 2^(-1/3) (e - 1)`, `e ~ Exp(1)`.
    ExpMix,
    /// `z / sqrt(2) + (c - 1) / 2`, `c ~ chi^2_1`.
    ChiSqMix,
    BernoulliMix(BernoulliMix),
    /// Standard normal multipliers; third moment 0.
    PureGaussian,
    /// `z + u` with `z ~ N(0, var_z)` and `u ~ atom`.
    Custom { var_z: f64, atom: DistributionSpec },
}

/// Feasibility edge of the Bernoulli mixture, `b (1 - b) = 1/5`.
pub fn bernoulli_mix_boundary() -> f64 {
    0.5 * (1.0 - 1.0 / 5f64.sqrt())
}

/// Solves `E (sigma_u (B - b))^3 = 1` and `var_z + b (1 - b) sigma_u^2 = 1`.
///
/// Returns `(sigma_u, var_z)`. Feasible exactly for `b <= (1 - 1/sqrt 5) / 2`.
pub fn solve_bernoulli_mix(b: f64) -> Result<(f64, f64)> {
    if !(b > 0.0 && b < 0.5) {
        return Err(Error::InvalidScheme(format!(
            "Bernoulli parameter must lie in (0, 1/2), got {b}"
        )));
    }
    let q = b * (1.0 - b);
    let sigma_u = (q * (1.0 - 2.0 * b)).powf(-1.0 / 3.0);
    let var_z = 1.0 - q * sigma_u * sigma_u;
    if var_z < -1e-12 {
        return Err(Error::InfeasibleMixture { b, var_z });
    }
    Ok((sigma_u, var_z.max(0.0)))
}

/// Two-point law with moments `(0, 1, 1)`: the Bernoulli mixture at its
/// feasibility edge, where the Gaussian part vanishes. Nodes are
/// `-1/phi` and `phi` for the golden ratio `phi`.
pub fn two_point_surrogate() -> DistributionSpec {
    let b = bernoulli_mix_boundary();
    let sigma = 5f64.sqrt();
    DistributionSpec::FiniteAtomic {
        nodes: vec![-sigma * b, sigma * (1.0 - b)],
        probs: vec![1.0 - b, b],
    }
}

/// Analytic moments and the pass/fail flags of the multiplier conditions.
#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub scheme: String,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    pub tol: f64,
    pub mean_ok: bool,
    pub var_ok: bool,
    pub third_ok: bool,
    pub fourth_finite: bool,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.mean_ok && self.var_ok && self.third_ok && self.fourth_finite
    }
}

impl WeightScheme {
    pub fn bernoulli_mix(b: f64) -> Result<Self> {
        Ok(Self::BernoulliMix(BernoulliMix::new(b)?))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Custom { var_z, atom } => {
                if !(var_z.is_finite() && *var_z >= 0.0) {
                    return Err(Error::InvalidScheme(format!("var_z must be nonnegative, got {var_z}")));
                }
                atom.validate()
            }
            _ => Ok(()),
        }
    }

    /// Gaussian variance and raw moments of the independent residual.
    fn decomposition(&self) -> Result<(f64, Vec<f64>)> {
        Ok(match self {
            Self::ExpMix => {
                let c = 2f64.powf(-1.0 / 3.0);
                // central moments of Exp(1): 1, 2, 9
                let u = vec![1.0, 0.0, c * c, 2.0 * c.powi(3), 9.0 * c.powi(4)];
                (1.0 - c * c, u)
            }
            Self::ChiSqMix => {
                // central moments of chi^2_1: 2, 8, 60
                let u = vec![1.0, 0.0, 2.0 / 4.0, 8.0 / 8.0, 60.0 / 16.0];
                (0.5, u)
            }
            Self::BernoulliMix(m) => {
                let (b, s) = (m.b, m.sigma_u);
                let q = b * (1.0 - b);
                let u = vec![
                    1.0,
                    0.0,
                    s * s * q,
                    s.powi(3) * q * (1.0 - 2.0 * b),
                    s.powi(4) * q * (1.0 - 3.0 * b + 3.0 * b * b),
                ];
                (m.var_z, u)
            }
            Self::PureGaussian => (1.0, vec![1.0, 0.0, 0.0, 0.0, 0.0]),
            Self::Custom { var_z, atom } => (*var_z, atom.raw_moments(4)?.into_vec()),
        })
    }

    /// Exact raw moments `(m1, m2, m3, m4)`.
    pub fn moments(&self) -> Result<[f64; 4]> {
        let (var_z, u) = self.decomposition()?;
        let m = convolve_gaussian(&u, var_z);
        Ok([m[1], m[2], m[3], m[4]])
    }

    pub fn validate_moments(&self, tol: f64) -> Result<ValidationReport> {
        let [m1, m2, m3, m4] = self.moments()?;
        Ok(ValidationReport {
            scheme: self.to_string(),
            m1,
            m2,
            m3,
            m4,
            tol,
            mean_ok: m1.abs() <= tol,
            var_ok: (m2 - 1.0).abs() <= tol,
            third_ok: (m3 - 1.0).abs() <= tol,
            fourth_finite: m4.is_finite(),
        })
    }

    pub fn sampler(&self) -> WeightSampler {
        let kind = match self {
            Self::ExpMix => {
                let c = 2f64.powf(-1.0 / 3.0);
                WeightKind::ExpMix {
                    sd_z: (1.0 - c * c).sqrt(),
                    c,
                }
            }
            Self::ChiSqMix => WeightKind::ChiSqMix {
                sd_z: 0.5f64.sqrt(),
            },
            Self::BernoulliMix(m) => WeightKind::Bernoulli {
                sd_z: m.var_z.sqrt(),
                b: m.b,
                sigma_u: m.sigma_u,
            },
            Self::PureGaussian => WeightKind::Gaussian,
            Self::Custom { var_z, atom } => WeightKind::Custom {
                sd_z: var_z.sqrt(),
                atom: atom.sampler(),
            },
        };
        WeightSampler { kind }
    }

    /// `n` i.i.d. multipliers.
    pub fn draw_weights<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; n];
        self.sampler().fill(rng, &mut out);
        out
    }

    fn from_term(t: &Term) -> Result<Self> {
        let scheme = match t.name.as_str() {
            "expmix" => {
                t.check_keys(&[])?;
                Self::ExpMix
            }
            "chisqmix" => {
                t.check_keys(&[])?;
                Self::ChiSqMix
            }
            "gauss" => {
                t.check_keys(&[])?;
                Self::PureGaussian
            }
            "bernmix" => {
                t.check_keys(&["b"])?;
                Self::bernoulli_mix(t.require_number("b")?)?
            }
            "custom" => {
                t.check_keys(&["var_z", "atom"])?;
                Self::Custom {
                    var_z: t.require_number("var_z")?,
                    atom: DistributionSpec::parse_term(t.term("atom")?)?,
                }
            }
            other => return Err(Error::InvalidScheme(format!("unknown weight scheme `{other}`"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }
}

/// Free-function form of [`WeightScheme::validate_moments`].
pub fn validate_scheme(scheme: &WeightScheme, tol: f64) -> Result<ValidationReport> {
    scheme.validate_moments(tol)
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ExpMix => write!(f, "expmix"),
            Self::ChiSqMix => write!(f, "chisqmix"),
            Self::BernoulliMix(m) => write!(f, "bernmix(b={})", m.b),
            Self::PureGaussian => write!(f, "gauss"),
            Self::Custom { var_z, atom } => write!(f, "custom(var_z={var_z},atom={atom})"),
        }
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::from_term(&Term::parse(s)?)
    }
}

#[derive(Debug, Clone)]
pub struct WeightSampler {
    kind: WeightKind,
}

#[derive(Debug, Clone)]
enum WeightKind {
    ExpMix { sd_z: f64, c: f64 },
    ChiSqMix { sd_z: f64 },
    Bernoulli { sd_z: f64, b: f64, sigma_u: f64 },
    Gaussian,
    Custom { sd_z: f64, atom: Sampler },
}

impl WeightSampler {
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.kind {
            WeightKind::ExpMix { sd_z, c } => {
                let z: f64 = rng.sample(StandardNormal);
                let e: f64 = rng.sample(Exp1);
                sd_z * z + c * (e - 1.0)
            }
            WeightKind::ChiSqMix { sd_z } => {
                let z: f64 = rng.sample(StandardNormal);
                let c: f64 = rng.sample(StandardNormal);
                sd_z * z + 0.5 * (c * c - 1.0)
            }
            WeightKind::Bernoulli { sd_z, b, sigma_u } => {
                let z: f64 = rng.sample(StandardNormal);
                let hit = if rng.random::<f64>() < *b { 1.0 } else { 0.0 };
                sd_z * z + sigma_u * (hit - b)
            }
            WeightKind::Gaussian => rng.sample(StandardNormal),
            WeightKind::Custom { sd_z, atom } => {
                let z = if *sd_z > 0.0 {
                    sd_z * rng.sample::<f64, _>(StandardNormal)
                } else {
                    0.0
                };
                z + atom.sample(rng)
            }
        }
    }

    pub fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for w in out {
            *w = self.sample(rng);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    fn sample_moment(scheme: &WeightScheme, k: i32, n: usize, seed: u64) -> f64 {
        let w = scheme.draw_weights(n, &mut RngStream::new(seed));
        w.iter().map(|x| x.powi(k)).sum::<f64>() / n as f64
    }

    #[test]
    fn all_zero_custom_weights() {
        let s = WeightScheme::Custom {
            var_z: 0.0,
            atom: DistributionSpec::point(0.0),
        };
        assert!(s.draw_weights(10, &mut RngStream::new(0)).iter().all(|&w| w == 0.0));
    }

    #[test]
    fn expmix_moments_closed_form() {
        // polynomial expansion of s z + c (e - 1): 3 s^4 + 6 s^2 c^2 + 9 c^4
        let s2 = 1.0 - 2f64.powf(-2.0 / 3.0);
        let c2 = 2f64.powf(-2.0 / 3.0);
        let m4 = 3.0 * s2 * s2 + 6.0 * s2 * c2 + 9.0 * c2 * c2;
        let m = WeightScheme::ExpMix.moments().unwrap();
        assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[1], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[3], m4, epsilon = 1e-13);
    }

    #[test]
    fn chisqmix_moments_closed_form() {
        // 3/4 + 6 (1/2)(1/4)(2) + 60/16 = 6
        let m = WeightScheme::ChiSqMix.moments().unwrap();
        assert_eq!(m, [0.0, 1.0, 1.0, 6.0]);
    }

    #[test]
    fn gaussian_moments() {
        assert_eq!(WeightScheme::PureGaussian.moments().unwrap(), [0.0, 1.0, 0.0, 3.0]);
    }

    #[test]
    fn expmix_third_moment_by_simulation() {
        let m3 = sample_moment(&WeightScheme::ExpMix, 3, 1_000_000, 1);
        assert!((m3 - 1.0).abs() < 0.05, "{m3}");
        let m4 = sample_moment(&WeightScheme::ExpMix, 4, 1_000_000, 2);
        let exact = WeightScheme::ExpMix.moments().unwrap()[3];
        assert!((m4 - exact).abs() < 0.2, "{m4} vs {exact}");
    }

    #[test]
    fn gaussian_third_moment_by_simulation() {
        let m3 = sample_moment(&WeightScheme::PureGaussian, 3, 1_000_000, 3);
        assert!(m3.abs() < 0.02, "{m3}");
    }

    #[test]
    fn chisqmix_and_bernmix_by_simulation() {
        for (seed, scheme) in [
            (4, WeightScheme::ChiSqMix),
            (5, WeightScheme::bernoulli_mix(0.276).unwrap()),
        ] {
            let exact = scheme.moments().unwrap();
            for k in 1..=3 {
                let est = sample_moment(&scheme, k, 1_000_000, seed);
                assert!((est - exact[k as usize - 1]).abs() < 0.05, "{scheme} m{k}: {est}");
            }
        }
    }

    #[test]
    fn bernoulli_solution_at_table_parameter() {
        let (sigma_u, var_z) = solve_bernoulli_mix(0.276).unwrap();
        assert_abs_diff_eq!(sigma_u, 2.2354, epsilon = 1e-4);
        assert_abs_diff_eq!(sigma_u, 2.235, epsilon = 5e-4);
        assert_abs_diff_eq!(var_z, 0.0014637, epsilon = 1e-6);
    }

    #[test]
    fn bernoulli_infeasible_beyond_boundary() {
        match solve_bernoulli_mix(0.4) {
            Err(Error::InfeasibleMixture { var_z, .. }) => {
                assert_abs_diff_eq!(var_z, -0.81712, epsilon = 1e-5)
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        assert!(solve_bernoulli_mix(0.0).is_err());
        assert!(solve_bernoulli_mix(0.5).is_err());
    }

    #[test]
    fn bernoulli_boundary_has_no_gaussian_part() {
        let b = bernoulli_mix_boundary();
        let (sigma_u, var_z) = solve_bernoulli_mix(b).unwrap();
        assert_abs_diff_eq!(b * (1.0 - b) * sigma_u * sigma_u, 1.0, epsilon = 1e-12);
        assert_eq!(var_z, 0.0);
        assert!(solve_bernoulli_mix(b + 1e-6).is_err());
    }

    #[test]
    fn bernoulli_solutions_satisfy_moment_equations() {
        for i in 1..=100 {
            let b = bernoulli_mix_boundary() * i as f64 / 100.0;
            let m = WeightScheme::bernoulli_mix(b).unwrap().moments().unwrap();
            assert_abs_diff_eq!(m[0], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m[1], 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(m[2], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn validation_flags() {
        assert!(validate_scheme(&WeightScheme::ExpMix, 1e-12).unwrap().passed());
        assert!(validate_scheme(&WeightScheme::ChiSqMix, 1e-12).unwrap().passed());
        assert!(validate_scheme(&WeightScheme::bernoulli_mix(0.276).unwrap(), 1e-12)
            .unwrap()
            .passed());
        let g = validate_scheme(&WeightScheme::PureGaussian, 1e-12).unwrap();
        assert!(g.mean_ok && g.var_ok && g.fourth_finite);
        assert!(!g.third_ok);
        assert_eq!(g.m3, 0.0);
    }

    #[test]
    fn surrogate_is_moment_matched() {
        let spec = two_point_surrogate();
        spec.validate().unwrap();
        let m = spec.raw_moments(3).unwrap();
        assert_abs_diff_eq!(m[1], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[2], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m[3], 1.0, epsilon = 1e-14);
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        if let DistributionSpec::FiniteAtomic { nodes, .. } = spec {
            assert_abs_diff_eq!(nodes[0], -1.0 / phi, epsilon = 1e-15);
            assert_abs_diff_eq!(nodes[1], phi, epsilon = 1e-15);
        }
    }

    #[test]
    fn text_forms() {
        for text in ["expmix", "chisqmix", "bernmix(b=0.276)", "gauss", "custom(var_z=0.5,atom=atomic(nodes=[-1,1],probs=[0.5,0.5]))"] {
            let s: WeightScheme = text.parse().unwrap();
            assert_eq!(s.to_string(), text);
        }
        assert!("bernmix(b=0.4)".parse::<WeightScheme>().is_err());
        assert!("mammen".parse::<WeightScheme>().is_err());
    }
}
