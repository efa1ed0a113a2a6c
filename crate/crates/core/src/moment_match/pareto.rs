//! Shifted and scaled Pareto residuals with prescribed variance and skewness.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};

/// Pareto location parameter used by all fits. The family is location-scale,
/// so `x_m` only fixes the parametrization.
pub const PARETO_X_M: f64 = 0.5;

/// Mean, variance and third central moment of `Pareto(x_m, a)`, `a > 3`.
pub fn pareto_central_moments(x_m: f64, a: f64) -> (f64, f64, f64) {
    let raw = |k: i32| a * x_m.powi(k) / (a - k as f64);
    let (m1, m2, m3) = (raw(1), raw(2), raw(3));
    let var = m2 - m1 * m1;
    let mu3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
    (m1, var, mu3)
}

/// Skewness `2 (1 + a) / (a - 3) * sqrt((a - 2) / a)`; decreasing in `a`
/// with limit 2.
pub fn pareto_skewness(a: f64) -> f64 {
    2.0 * (1.0 + a) / (a - 3.0) * ((a - 2.0) / a).sqrt()
}

/// `(P - shift) * scale`, `P ~ Pareto(0.5, a)`, with mean zero, variance `u2`
/// and third central moment `u3`. The shape is found by bisection on the
/// skewness over `(a_min, inf)`.
pub fn fit_shifted_pareto(u2: f64, u3: f64, a_min: f64) -> Result<DistributionSpec> {
    if !(u2 > 0.0) || !u3.is_finite() {
        return Err(Error::InvalidMoments(format!("need u2 > 0 and finite u3, got {u2}, {u3}")));
    }
    if !(a_min >= 4.0) {
        return Err(Error::InvalidMoments(format!("a_min must be at least 4, got {a_min}")));
    }
    let skewness = u3 / u2.powf(1.5);
    let infeasible = Error::SkewnessInfeasible { skewness, a_min };
    if !(skewness > 2.0) || skewness >= pareto_skewness(a_min) {
        return Err(infeasible);
    }
    let mut lo = a_min;
    let mut width = 1.0;
    while pareto_skewness(a_min + width) > skewness {
        width *= 2.0;
        if width > 1e15 {
            return Err(infeasible);
        }
    }
    let mut hi = a_min + width;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if pareto_skewness(mid) > skewness {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    let (mean, var, _) = pareto_central_moments(PARETO_X_M, a);
    DistributionSpec::pareto(PARETO_X_M, a, mean, (u2 / var).sqrt())
}

/// `(P - shift) * scale` with `P ~ Pareto(0.5, a)` for a fixed shape: the
/// scale matches the third central moment `u3`, the shift puts the mean
/// at `mean`.
pub fn fit_pareto_fixed_shape(u3: f64, a: f64, mean: f64) -> Result<DistributionSpec> {
    if !(u3 > 0.0) {
        return Err(Error::SkewnessInfeasible {
            skewness: u3,
            a_min: a,
        });
    }
    if !(a > 4.0) {
        return Err(Error::MomentNotFinite { order: 4, shape: a });
    }
    let (pm, _, mu3) = pareto_central_moments(PARETO_X_M, a);
    let scale = (u3 / mu3).cbrt();
    DistributionSpec::pareto(PARETO_X_M, a, pm - mean / scale, scale)
}
