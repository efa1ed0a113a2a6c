//! Linear model `y_i = Psi_i^T theta* + e_i` and the wild bootstrap for the
//! normalized loss `T = |(Psi Psi^T)^{1/2} (theta_hat - theta*)|`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::bootstrap::{weighted_norms, ReplicateSet, Sample};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::harness::{monte_carlo_hits, RunOptions};
use crate::weights::{WeightSampler, WeightScheme};

/// Default bound on the condition number of `Psi Psi^T`.
pub const DEFAULT_COND_BOUND: f64 = 1e8;

/// `p x n` regressor matrix with a cached eigendecomposition of its Gram
/// matrix `G = Psi Psi^T`.
#[derive(Debug, Clone)]
pub struct DesignMatrix {
    psi: DMatrix<f64>,
    inv: DMatrix<f64>,
    inv_sqrt: DMatrix<f64>,
    sqrt: DMatrix<f64>,
    /// `(Psi Psi^T)^{-1/2} Psi`.
    whitener: DMatrix<f64>,
    cond: f64,
}

impl DesignMatrix {
    /// `columns[i]` is the regressor `Psi_i` of observation `i`.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        Self::from_columns_with_bound(columns, DEFAULT_COND_BOUND)
    }

    pub fn from_columns_with_bound(columns: &[Vec<f64>], cond_bound: f64) -> Result<Self> {
        let n = columns.len();
        if n == 0 || columns[0].is_empty() {
            return Err(Error::EmptyInput);
        }
        let p = columns[0].len();
        if let Some(c) = columns.iter().find(|c| c.len() != p) {
            return Err(Error::LengthMismatch {
                expected: p,
                found: c.len(),
            });
        }
        let psi = DMatrix::from_fn(p, n, |j, i| columns[i][j]);
        Self::from_matrix(psi, cond_bound)
    }

    fn from_matrix(psi: DMatrix<f64>, cond_bound: f64) -> Result<Self> {
        if psi.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("design entries must be finite".into()));
        }
        let gram = &psi * psi.transpose();
        let eig = SymmetricEigen::new(gram);
        let (lo, hi) = eig
            .eigenvalues
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
        let cond = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if !(cond <= cond_bound) {
            return Err(Error::IllConditioned { cond });
        }
        let v = &eig.eigenvectors;
        let spectral = |f: &dyn Fn(f64) -> f64| {
            let d = DMatrix::from_diagonal(&eig.eigenvalues.map(f));
            v * d * v.transpose()
        };
        let inv_sqrt = spectral(&|l| 1.0 / l.sqrt());
        Ok(Self {
            inv: spectral(&|l| 1.0 / l),
            sqrt: spectral(&f64::sqrt),
            whitener: &inv_sqrt * &psi,
            inv_sqrt,
            psi,
            cond,
        })
    }

    /// I.i.d. standard normal entries, drawn once.
    pub fn gaussian<R: Rng + ?Sized>(p: usize, n: usize, rng: &mut R) -> Result<Self> {
        let psi = DMatrix::from_fn(p, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::from_matrix(psi, DEFAULT_COND_BOUND)
    }

    /// Deterministic trigonometric design: a constant row followed by
    /// `sqrt(2) cos(2 pi k i / n)`, `sqrt(2) sin(2 pi k i / n)` pairs. Rows
    /// are orthogonal with squared norm `n` when `p < n`.
    pub fn fourier(p: usize, n: usize) -> Result<Self> {
        if p == 0 || p >= n {
            return Err(Error::InvalidSpec(format!("fourier design needs 0 < p < n, got p={p}, n={n}")));
        }
        let psi = DMatrix::from_fn(p, n, |j, i| {
            if j == 0 {
                return 1.0;
            }
            let k = (j + 1) / 2;
            let t = 2.0 * std::f64::consts::PI * (k * i) as f64 / n as f64;
            std::f64::consts::SQRT_2 * if j % 2 == 1 { t.cos() } else { t.sin() }
        });
        Self::from_matrix(psi, DEFAULT_COND_BOUND)
    }

    pub fn p(&self) -> usize {
        self.psi.nrows()
    }

    pub fn n(&self) -> usize {
        self.psi.ncols()
    }

    pub fn condition_number(&self) -> f64 {
        self.cond
    }

    pub fn column(&self, i: usize) -> Vec<f64> {
        self.psi.column(i).iter().copied().collect()
    }

    /// `(Psi Psi^T)^{-1/2} Psi_i e_i` for every `i`, as the rows of a sample.
    pub fn whitened(&self, errors: &[f64]) -> Result<Sample> {
        self.check_len(errors)?;
        let w = &self.whitener;
        let (p, n) = (self.p(), self.n());
        let mut data = Vec::with_capacity(n * p);
        for (i, e) in errors.iter().enumerate() {
            data.extend(w.column(i).iter().map(|x| x * e));
        }
        Sample::from_flat(n, p, data)
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::LengthMismatch {
                expected: self.n(),
                found: v.len(),
            });
        }
        Ok(())
    }
}

/// True parameter and error law.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    theta_star: Vec<f64>,
    error_spec: DistributionSpec,
}

impl RegressionModel {
    pub fn new(theta_star: Vec<f64>, error_spec: DistributionSpec) -> Result<Self> {
        let m = error_spec.raw_moments(4)?;
        if m.mean().abs() > 1e-12 * (1.0 + m.variance().sqrt()) {
            return Err(Error::InvalidSpec(format!(
                "error law must have mean zero, has {}",
                m.mean()
            )));
        }
        if theta_star.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("theta* must be finite".into()));
        }
        Ok(Self {
            theta_star,
            error_spec,
        })
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn error_spec(&self) -> &DistributionSpec {
        &self.error_spec
    }
}

/// Which per-observation terms the wild bootstrap multiplies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BootstrapMode {
    /// The simulated errors `e_i`.
    #[default]
    OracleErrors,
    /// Residuals `y_i - Psi_i^T theta_hat`.
    Residuals,
}

/// Responses and the errors that produced them.
pub fn simulate_response<R: Rng + ?Sized>(
    design: &DesignMatrix,
    model: &RegressionModel,
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if model.theta_star.len() != design.p() {
        return Err(Error::LengthMismatch {
            expected: design.p(),
            found: model.theta_star.len(),
        });
    }
    let mut errors = vec![0.0; design.n()];
    model.error_spec.sampler().fill(rng, &mut errors);
    let mean = design.psi.tr_mul(&DVector::from_column_slice(&model.theta_star));
    let y = mean.iter().zip(&errors).map(|(m, e)| m + e).collect();
    Ok((y, errors))
}

/// `(Psi Psi^T)^{-1} Psi y`.
pub fn least_squares(design: &DesignMatrix, y: &[f64]) -> Result<Vec<f64>> {
    design.check_len(y)?;
    let rhs = &design.psi * DVector::from_column_slice(y);
    Ok((&design.inv * rhs).iter().copied().collect())
}

/// `|(Psi Psi^T)^{1/2} (theta_hat - theta*)|`.
pub fn t_statistic(design: &DesignMatrix, theta_hat: &[f64], theta_star: &[f64]) -> Result<f64> {
    for v in [theta_hat, theta_star] {
        if v.len() != design.p() {
            return Err(Error::LengthMismatch {
                expected: design.p(),
                found: v.len(),
            });
        }
    }
    let d = DVector::from_iterator(design.p(), theta_hat.iter().zip(theta_star).map(|(a, b)| a - b));
    Ok((&design.sqrt * d).norm())
}

/// `T` evaluated as `|(Psi Psi^T)^{-1/2} Psi (y - Psi^T theta*)|`, which
/// equals [`t_statistic`] at the least-squares fit without the cancellation
/// in `theta_hat - theta*`.
pub fn t_statistic_from_response(design: &DesignMatrix, y: &[f64], theta_star: &[f64]) -> Result<f64> {
    design.check_len(y)?;
    if theta_star.len() != design.p() {
        return Err(Error::LengthMismatch {
            expected: design.p(),
            found: theta_star.len(),
        });
    }
    let centered = DVector::from_column_slice(y) - design.psi.tr_mul(&DVector::from_column_slice(theta_star));
    Ok((&design.inv_sqrt * (&design.psi * centered)).norm())
}

/// `|(Psi Psi^T)^{-1/2} sum_i Psi_i e_i w_i|` for one weight vector `w`.
pub fn wild_bootstrap_t(design: &DesignMatrix, terms: &[f64], weights: &[f64]) -> Result<f64> {
    design.check_len(weights)?;
    let sample = design.whitened(terms)?;
    Ok(weighted_norms(&sample, weights, 1, 1.0)[0])
}

/// Residuals `y_i - Psi_i^T theta_hat`.
pub fn residuals(design: &DesignMatrix, y: &[f64], theta_hat: &[f64]) -> Result<Vec<f64>> {
    design.check_len(y)?;
    let fit = design.psi.tr_mul(&DVector::from_column_slice(theta_hat));
    Ok(y.iter().zip(fit.iter()).map(|(a, b)| a - b).collect())
}

/// One Monte Carlo repetition: draws the errors, then a `boot x n` weight
/// matrix, and reports `T <= Q^b_T(alpha)` for each level.
pub fn regression_rep<R: Rng + ?Sized>(
    design: &DesignMatrix,
    model: &RegressionModel,
    weights: &WeightSampler,
    boot: usize,
    alphas: &[f64],
    mode: BootstrapMode,
    rng: &mut R,
) -> Result<Vec<bool>> {
    let (y, errors) = simulate_response(design, model, rng)?;
    let t = t_statistic_from_response(design, &y, &model.theta_star)?;
    let terms = match mode {
        BootstrapMode::OracleErrors => errors,
        BootstrapMode::Residuals => residuals(design, &y, &least_squares(design, &y)?)?,
    };
    let sample = design.whitened(&terms)?;
    let mut w = vec![0.0; boot * design.n()];
    weights.fill(rng, &mut w);
    let set = ReplicateSet::new(weighted_norms(&sample, &w, boot, 1.0))?;
    alphas
        .iter()
        .map(|&a| Ok(t <= set.upper_quantile(a)?.value))
        .collect()
}

/// Coverage frequencies of `{T <= Q^b_T(alpha)}` over `opts.reps`
/// repetitions, one per alpha.
pub fn regression_coverage(
    design: &DesignMatrix,
    model: &RegressionModel,
    scheme: &WeightScheme,
    boot: usize,
    alphas: &[f64],
    mode: BootstrapMode,
    opts: &RunOptions,
) -> Result<Vec<f64>> {
    if boot == 0 {
        return Err(Error::EmptyInput);
    }
    let sampler = scheme.sampler();
    let hits = monte_carlo_hits(opts, alphas.len(), |rng| {
        regression_rep(design, model, &sampler, boot, alphas, mode, rng)
    })?;
    Ok(hits.iter().map(|h| *h as f64 / opts.reps as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::bootstrap_replicate_norm;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_obs() -> DesignMatrix {
        DesignMatrix::from_columns(&[vec![1.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn hand_computed_two_observation_model() {
        let d = two_obs();
        let y = [2.5, 1.5];
        let theta = least_squares(&d, &y).unwrap();
        assert_abs_diff_eq!(theta[0], 2.0, epsilon = 1e-15);
        // T = |e1 + e2| / sqrt(2)
        let t = t_statistic(&d, &[2.3], &[2.0]).unwrap();
        assert_abs_diff_eq!(t, 0.6 / 2f64.sqrt(), epsilon = 1e-14);
        let tb = wild_bootstrap_t(&d, &[3.0, 4.0], &[1.0, -1.0]).unwrap();
        assert_abs_diff_eq!(tb, 0.707_106_781_186_547_6, epsilon = 1e-15);
        assert_eq!(wild_bootstrap_t(&d, &[3.0, 4.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_abs_diff_eq!(wild_bootstrap_t(&d, &[3.0, 4.0], &[1.0, 1.0]).unwrap(), 7.0 / 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn simulate_with_point_mass_errors() {
        let d = two_obs();
        let m = RegressionModel::new(vec![2.0], DistributionSpec::point(0.0)).unwrap();
        let (y, e) = simulate_response(&d, &m, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(y, vec![2.0, 2.0]);
        assert_eq!(e, vec![0.0, 0.0]);
        let zero = RegressionModel::new(vec![0.0], DistributionSpec::CenteredChiSq1).unwrap();
        let (y, e) = simulate_response(&d, &zero, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(y, e);
    }

    #[test]
    fn noiseless_fit_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = DesignMatrix::gaussian(4, 30, &mut rng).unwrap();
        let theta = vec![1.0, -2.0, 0.5, 3.0];
        let m = RegressionModel::new(theta.clone(), DistributionSpec::point(0.0)).unwrap();
        let (y, _) = simulate_response(&d, &m, &mut rng).unwrap();
        let hat = least_squares(&d, &y).unwrap();
        for (a, b) in hat.iter().zip(&theta) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
        assert!(t_statistic(&d, &theta, &theta).unwrap() == 0.0);
    }

    #[test]
    fn fourier_rows_are_orthogonal() {
        let d = DesignMatrix::fourier(5, 40).unwrap();
        assert!(d.condition_number() < 1.0 + 1e-10);
        // rows scaled to unit norm give theta_hat = Psi y / n
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let hat = least_squares(&d, &y).unwrap();
        for (j, h) in hat.iter().enumerate() {
            let direct: f64 = (0..40).map(|i| d.column(i)[j] * y[i]).sum::<f64>() / 40.0;
            assert_abs_diff_eq!(*h, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn ill_conditioned_design_is_rejected() {
        let cols = vec![vec![1.0, 1.0], vec![2.0, 2.0 + 1e-9], vec![3.0, 3.0]];
        assert!(matches!(DesignMatrix::from_columns(&cols), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn residual_orthogonality_and_t_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = DesignMatrix::gaussian(3, 25, &mut rng).unwrap();
            let m = RegressionModel::new(vec![0.3, -1.0, 2.0], DistributionSpec::CenteredChiSq1).unwrap();
            let (y, e) = simulate_response(&d, &m, &mut rng).unwrap();
            let hat = least_squares(&d, &y).unwrap();
            let r = residuals(&d, &y, &hat).unwrap();
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            for j in 0..3 {
                let dot: f64 = (0..25).map(|i| d.column(i)[j] * r[i]).sum();
                assert!(dot.abs() <= 1e-8 * ynorm);
            }
            let t = t_statistic(&d, &hat, m.theta_star()).unwrap();
            let direct = wild_bootstrap_t(&d, &e, &vec![1.0; 25]).unwrap();
            assert!((t - direct).abs() <= 1e-8 * direct);
            let centered = t_statistic_from_response(&d, &y, m.theta_star()).unwrap();
            assert!((t - centered).abs() <= 1e-8 * direct);
        }
    }

    #[test]
    fn translation_leaves_statistics_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DesignMatrix::gaussian(3, 20, &mut rng).unwrap();
        let theta = vec![0.5, 0.1, -0.7];
        let shift = vec![10.0, -4.0, 2.5];
        let m = RegressionModel::new(theta.clone(), DistributionSpec::CenteredChiSq1).unwrap();
        let (y, e) = simulate_response(&d, &m, &mut rng).unwrap();
        let moved: Vec<f64> = (0..20)
            .map(|i| y[i] + d.column(i).iter().zip(&shift).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let theta2: Vec<f64> = theta.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let t1 = t_statistic(&d, &least_squares(&d, &y).unwrap(), &theta).unwrap();
        let t2 = t_statistic(&d, &least_squares(&d, &moved).unwrap(), &theta2).unwrap();
        assert_abs_diff_eq!(t1, t2, epsilon = 1e-10);
        let w: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { -1.0 } else { 0.7 }).collect();
        let r1 = residuals(&d, &y, &least_squares(&d, &y).unwrap()).unwrap();
        let r2 = residuals(&d, &moved, &least_squares(&d, &moved).unwrap()).unwrap();
        assert_abs_diff_eq!(
            wild_bootstrap_t(&d, &r1, &w).unwrap(),
            wild_bootstrap_t(&d, &r2, &w).unwrap(),
            epsilon = 1e-10
        );
        assert!(wild_bootstrap_t(&d, &e, &w).unwrap().is_finite());
    }

    #[test]
    fn scaled_identity_design_reduces_to_plain_bootstrap() {
        let (n, c) = (6, 2.5);
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { c } else { 0.0 }).collect())
            .collect();
        let d = DesignMatrix::from_columns(&cols).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let e: Vec<f64> = (0..n).map(|_| DistributionSpec::CenteredChiSq1.sample_scalar(&mut rng)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { e[i] } else { 0.0 }).collect())
            .collect();
        let sample = Sample::from_rows(&rows).unwrap();
        for _ in 0..10 {
            let w = WeightScheme::PureGaussian.draw_weights(n, &mut rng);
            let reg = wild_bootstrap_t(&d, &e, &w).unwrap();
            let plain = bootstrap_replicate_norm(&sample, &w).unwrap() * (n as f64).sqrt();
            assert_abs_diff_eq!(reg, plain, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_noise_covers_everywhere() {
        let d = DesignMatrix::fourier(3, 20).unwrap();
        let m = RegressionModel::new(vec![1.0, 2.0, 3.0], DistributionSpec::point(0.0)).unwrap();
        let opts = RunOptions::new(50, 9, 1);
        let f = regression_coverage(&d, &m, &WeightScheme::PureGaussian, 100, &[0.05, 0.5], BootstrapMode::OracleErrors, &opts)
            .unwrap();
        assert_eq!(f, vec![1.0, 1.0]);
    }

    #[test]
    fn gaussian_errors_are_pivotal_at_the_median() {
        let mut rng = RngStream::new(4);
        let d = DesignMatrix::gaussian(3, 40, &mut rng).unwrap();
        let m = RegressionModel::new(vec![0.0; 3], DistributionSpec::gaussian(0.0, 1.0).unwrap()).unwrap();
        let opts = RunOptions::new(2000, 21, 1);
        let f = regression_coverage(&d, &m, &WeightScheme::PureGaussian, 1000, &[0.5], BootstrapMode::OracleErrors, &opts)
            .unwrap();
        assert!((f[0] - 0.5).abs() <= 0.05, "{}", f[0]);
    }

    #[test]
    fn residual_mode_runs() {
        let d = DesignMatrix::fourier(3, 30).unwrap();
        let m = RegressionModel::new(vec![0.0; 3], DistributionSpec::CenteredChiSq1).unwrap();
        let opts = RunOptions::new(40, 2, 1);
        let f = regression_coverage(&d, &m, &WeightScheme::bernoulli_mix(0.276).unwrap(), 200, &[0.1], BootstrapMode::Residuals, &opts)
            .unwrap();
        assert!((0.0..=1.0).contains(&f[0]));
    }

    #[test]
    fn non_centered_errors_are_rejected() {
        assert!(RegressionModel::new(vec![0.0], DistributionSpec::ChiSq1).is_err());
    }
}
