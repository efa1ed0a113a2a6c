//! Gaussian-plus-residual decompositions of moment sequences.
//!
//! A target law `X` is matched by `Y = Z + U`, `Z ~ N(0, var_z)` independent
//! of a residual `U`, when the raw moments of `X` and `Y` agree up to a
//! given order. This module deconvolves the Gaussian part out of a moment
//! sequence, decides whether the remainder is the moment sequence of some
//! measure, builds atomic and Pareto residuals, and evaluates polynomial
//! expectations of normalized sums exactly for finitely supported laws.

mod hankel;
mod pareto;
mod poly;
mod quadrature;

pub use hankel::{hankel_matrix, hankel_solvable, PSD_TOL};
pub use pareto::{
    fit_pareto_fixed_shape, fit_shifted_pareto, pareto_central_moments, pareto_skewness, PARETO_X_M,
};
pub use poly::{exact_poly_expectation, AtomicVectorLaw, Monomial, Polynomial, ENUMERATION_LIMIT};
pub use quadrature::{atomic_from_moments, AtomicMeasure};

use crate::distributions::{
    binomial, convolve_gaussian, odd_double_factorial, DistributionSpec, MomentVector,
};
use crate::error::{Error, Result};

/// Residual moments `u` with `m = moments(N(0, var_z) * u)`, by forward
/// substitution in the triangular convolution system.
pub fn deconvolve_moments(m: &MomentVector, var_z: f64) -> MomentVector {
    let m = m.as_slice();
    let mut u = Vec::with_capacity(m.len());
    for k in 0..m.len() {
        let gauss: f64 = (1..=k / 2)
            .map(|l| binomial(k, 2 * l) * odd_double_factorial(l) * var_z.powi(l as i32) * u[k - 2 * l])
            .sum();
        u.push(m[k] - gauss);
    }
    MomentVector::new(u).expect("deconvolution keeps u_0 = 1")
}

/// Inverse of [`deconvolve_moments`].
pub fn convolve_moments(u: &MomentVector, var_z: f64) -> MomentVector {
    MomentVector::new(convolve_gaussian(u.as_slice(), var_z)).expect("convolution keeps u_0 = 1")
}

/// Largest `var_z` in `[0, Var m]` whose deconvolved residual is solvable,
/// to within `tol`. The returned value always passes the check.
pub fn max_gaussian_variance(m: &MomentVector, tol: f64) -> Result<f64> {
    if !(tol > 0.0) {
        return Err(Error::InvalidMoments(format!("tolerance must be positive, got {tol}")));
    }
    if !hankel_solvable(m) {
        return Err(Error::TargetNotSolvable);
    }
    let feasible = |v: f64| hankel_solvable(&deconvolve_moments(m, v));
    let mut hi = m.variance().max(0.0);
    if feasible(hi) {
        return Ok(hi);
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// `Y = Z + U` given by `var_z` and the raw moments of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionModel {
    var_z: f64,
    residual_moments: MomentVector,
}

impl ConvolutionModel {
    pub fn new(var_z: f64, residual_moments: MomentVector) -> Result<Self> {
        if !(var_z >= 0.0 && var_z.is_finite()) {
            return Err(Error::InvalidMoments(format!("var_z must be nonnegative, got {var_z}")));
        }
        if !hankel_solvable(&residual_moments) {
            return Err(Error::TargetNotSolvable);
        }
        Ok(Self {
            var_z,
            residual_moments,
        })
    }

    /// Split `m` with the largest feasible Gaussian part.
    pub fn max_gaussian(m: &MomentVector, tol: f64) -> Result<Self> {
        let var_z = max_gaussian_variance(m, tol)?;
        Self::new(var_z, deconvolve_moments(m, var_z))
    }

    pub fn var_z(&self) -> f64 {
        self.var_z
    }

    pub fn residual_moments(&self) -> &MomentVector {
        &self.residual_moments
    }

    /// Raw moments of `Y` up to the residual's order.
    pub fn moments(&self) -> MomentVector {
        convolve_moments(&self.residual_moments, self.var_z)
    }

    /// `Z + U` with `U` an atomic law carrying the residual moments.
    pub fn atomic_spec(&self) -> Result<DistributionSpec> {
        let atom = atomic_from_moments(&self.residual_moments)?;
        DistributionSpec::convolution(self.var_z, atom.to_spec())
    }
}

/// Anything with computable raw moments.
pub trait MomentSource {
    fn moments_to(&self, order: usize) -> Result<MomentVector>;
}

impl MomentSource for DistributionSpec {
    fn moments_to(&self, order: usize) -> Result<MomentVector> {
        self.raw_moments(order)
    }
}

impl MomentSource for ConvolutionModel {
    fn moments_to(&self, order: usize) -> Result<MomentVector> {
        if order > self.residual_moments.order() {
            return Err(Error::InvalidMoments(format!(
                "model carries moments to order {}, asked for {order}",
                self.residual_moments.order()
            )));
        }
        self.moments().truncate(order)
    }
}

impl MomentSource for MomentVector {
    fn moments_to(&self, order: usize) -> Result<MomentVector> {
        self.truncate(order)
    }
}

impl MomentSource for AtomicMeasure {
    fn moments_to(&self, order: usize) -> Result<MomentVector> {
        self.raw_moments(order)
    }
}

/// `max_{k <= order} |m_k(x) - m_k(y)|`.
pub fn verify_match<A, B>(x: &A, y: &B, order: usize) -> Result<f64>
where
    A: MomentSource + ?Sized,
    B: MomentSource + ?Sized,
{
    let mx = x.moments_to(order)?;
    let my = y.moments_to(order)?;
    Ok(mx
        .as_slice()
        .iter()
        .zip(my.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Gaussian plus shifted-scaled Pareto law matching a target through its
/// third moment, with the Pareto shape held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct ParetoSplit {
    pub var_z: f64,
    pub residual: DistributionSpec,
}

impl ParetoSplit {
    /// Match mean, variance and third central moment of `target`. The
    /// Pareto scale is set by the third moment; the Gaussian takes the
    /// variance that is left.
    pub fn fixed_shape(target: &MomentVector, shape: f64) -> Result<Self> {
        let c = target.central();
        if c.len() < 4 {
            return Err(Error::InvalidMoments("need moments to order 3".into()));
        }
        let residual = fit_pareto_fixed_shape(c[3], shape, target.mean())?;
        let var_z = c[2] - residual.variance()?;
        if var_z < 0.0 {
            return Err(Error::InvalidMoments(format!(
                "Pareto residual with shape {shape} has more variance than the target"
            )));
        }
        Ok(Self { var_z, residual })
    }

    /// Like [`ParetoSplit::fixed_shape`] but with the Gaussian variance
    /// given; the shape is then fitted from the residual skewness.
    pub fn with_gaussian(target: &MomentVector, var_z: f64, a_min: f64) -> Result<Self> {
        let c = target.central();
        if c.len() < 4 {
            return Err(Error::InvalidMoments("need moments to order 3".into()));
        }
        let centered = fit_shifted_pareto(c[2] - var_z, c[3], a_min)?;
        let residual = match centered {
            DistributionSpec::ShiftedScaledPareto {
                x_m, a, shift, scale,
            } => DistributionSpec::pareto(x_m, a, shift - target.mean() / scale, scale)?,
            _ => unreachable!("fit_shifted_pareto returns a Pareto spec"),
        };
        Ok(Self { var_z, residual })
    }

    pub fn spec(&self) -> Result<DistributionSpec> {
        DistributionSpec::convolution(self.var_z, self.residual.clone())
    }
}
