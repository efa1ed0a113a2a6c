//! Scaled sums, bootstrap replicates and the empirical upper quantile.

use rand::Rng;

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::weights::{WeightSampler, WeightScheme};

/// Default number of bootstrap replicates.
pub const DEFAULT_BOOT: usize = 1000;

/// `n` observations of dimension `p`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl Sample {
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        let p = rows[0].len();
        let mut data = Vec::with_capacity(n * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::LengthMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_flat(n, p, data)
    }

    pub fn from_flat(n: usize, p: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::EmptyInput);
        }
        if data.len() != n * p {
            return Err(Error::LengthMismatch {
                expected: n * p,
                found: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidSpec("sample entries must be finite".into()));
        }
        Ok(Self { n, p, data })
    }

    /// `n` vectors with i.i.d. coordinates drawn from `spec`, row by row.
    pub fn draw<R: Rng + ?Sized>(spec: &DistributionSpec, n: usize, p: usize, rng: &mut R) -> Self {
        let mut data = vec![0.0; n * p];
        spec.sampler().fill(rng, &mut data);
        Self { n, p, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `n^(-1/2) sum_i X_i`.
pub fn scaled_sum(sample: &Sample) -> Vec<f64> {
    let mut s = vec![0.0; sample.p];
    for i in 0..sample.n {
        for (acc, x) in s.iter_mut().zip(sample.row(i)) {
            *acc += x;
        }
    }
    let c = 1.0 / (sample.n as f64).sqrt();
    s.iter_mut().for_each(|x| *x *= c);
    s
}

/// `|| n^(-1/2) sum_i X_i eps_i ||`.
pub fn bootstrap_replicate_norm(sample: &Sample, eps: &[f64]) -> Result<f64> {
    if eps.len() != sample.n {
        return Err(Error::LengthMismatch {
            expected: sample.n,
            found: eps.len(),
        });
    }
    let mut s = vec![0.0; sample.p];
    for (i, &w) in eps.iter().enumerate() {
        for (acc, x) in s.iter_mut().zip(sample.row(i)) {
            *acc += w * x;
        }
    }
    Ok(norm(&s) / (sample.n as f64).sqrt())
}

/// Norms of the rows of `W X`, times `scale`, where `W` is `boot x n`
/// row-major and `X` is the sample.
pub fn weighted_norms(sample: &Sample, weights: &[f64], boot: usize, scale: f64) -> Vec<f64> {
    let (n, p) = (sample.n, sample.p);
    assert_eq!(weights.len(), boot * n, "weight matrix has the wrong size");
    let mut prod = vec![0.0; boot * p];
    // SAFETY: all three buffers are dense row-major with the declared shapes.
    unsafe {
        matrixmultiply::dgemm(
            boot,
            n,
            p,
            1.0,
            weights.as_ptr(),
            n as isize,
            1,
            sample.data.as_ptr(),
            p as isize,
            1,
            0.0,
            prod.as_mut_ptr(),
            p as isize,
            1,
        );
    }
    prod.chunks_exact(p).map(|r| norm(r) * scale).collect()
}

/// Empirical upper quantile of a replicate set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileEstimate {
    pub alpha: f64,
    pub value: f64,
    pub boot: usize,
    /// 1-based ascending rank `m = B - floor(alpha B)` of `value`.
    pub rank: usize,
}

/// Largest `k` with `k / B <= alpha`, evaluated in the same floating-point
/// form as the defining inequality.
pub(crate) fn exceedance_budget(alpha: f64, boot: usize) -> usize {
    let b = boot as f64;
    let mut k = ((alpha * b).floor().max(0.0) as usize).min(boot);
    while k < boot && ((k + 1) as f64) / b <= alpha {
        k += 1;
    }
    while k > 0 && (k as f64) / b > alpha {
        k -= 1;
    }
    k
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidAlpha(alpha))
    }
}

/// A sorted set of bootstrap replicates, queried at any number of levels.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSet {
    sorted: Vec<f64>,
}

impl ReplicateSet {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidSpec("replicate values must not be NaN".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// `inf { t : #{v_j > t} / B <= alpha }`.
    pub fn upper_quantile(&self, alpha: f64) -> Result<QuantileEstimate> {
        check_alpha(alpha)?;
        let boot = self.sorted.len();
        let rank = boot - exceedance_budget(alpha, boot);
        Ok(QuantileEstimate {
            alpha,
            value: self.sorted[rank - 1],
            boot,
            rank,
        })
    }
}

pub fn empirical_upper_quantile(values: &[f64], alpha: f64) -> Result<QuantileEstimate> {
    check_alpha(alpha)?;
    ReplicateSet::new(values.to_vec())?.upper_quantile(alpha)
}

/// Reusable buffers for drawing replicate sets.
#[derive(Debug, Default)]
pub struct ReplicateWorkspace {
    weights: Vec<f64>,
}

impl ReplicateWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Draws a `boot x n` weight matrix (replicate by replicate) and returns
    /// the replicate norms scaled by `scale`.
    pub fn replicate_norms<R: Rng + ?Sized>(
        &mut self,
        sample: &Sample,
        weights: &WeightSampler,
        boot: usize,
        scale: f64,
        rng: &mut R,
    ) -> Vec<f64> {
        self.weights.resize(boot * sample.n, 0.0);
        weights.fill(rng, &mut self.weights);
        weighted_norms(sample, &self.weights, boot, scale)
    }
}

/// Draws `boot` weight vectors, computes the replicate norms once and
/// evaluates every level on that single set.
pub fn bootstrap_quantile<R: Rng + ?Sized>(
    sample: &Sample,
    scheme: &WeightScheme,
    boot: usize,
    alphas: &[f64],
    rng: &mut R,
) -> Result<Vec<QuantileEstimate>> {
    if boot == 0 {
        return Err(Error::EmptyInput);
    }
    alphas.iter().try_for_each(|&a| check_alpha(a))?;
    let scale = 1.0 / (sample.n as f64).sqrt();
    let norms = ReplicateWorkspace::new().replicate_norms(sample, &scheme.sampler(), boot, scale, rng);
    let set = ReplicateSet::new(norms)?;
    alphas.iter().map(|&a| set.upper_quantile(a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::weights::two_point_surrogate;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    /// Smallest distinct value `t` with `#{v > t} / B <= alpha`, by scanning.
    fn inf_by_enumeration(values: &[f64], alpha: f64) -> f64 {
        let b = values.len() as f64;
        let mut candidates = values.to_vec();
        candidates.sort_by(f64::total_cmp);
        candidates.dedup();
        *candidates
            .iter()
            .find(|&&t| (values.iter().filter(|&&v| v > t).count() as f64) / b <= alpha)
            .unwrap()
    }

    #[test]
    fn scaled_sum_examples() {
        let s = Sample::from_rows(&[vec![1.5, -2.0]]).unwrap();
        assert_eq!(scaled_sum(&s), vec![1.5, -2.0]);
        let s = Sample::from_rows(&vec![vec![1.0, 3.0]; 4]).unwrap();
        assert_eq!(scaled_sum(&s), vec![2.0, 6.0]);
        let s = Sample::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]])
            .unwrap();
        assert_eq!(scaled_sum(&s), vec![0.0, 0.0]);
    }

    #[test]
    fn replicate_norm_examples() {
        let s = Sample::from_rows(&[vec![1.0, 2.0], vec![-3.0, 0.5], vec![0.0, 4.0]]).unwrap();
        assert_eq!(bootstrap_replicate_norm(&s, &[0.0; 3]).unwrap(), 0.0);
        let ones = bootstrap_replicate_norm(&s, &[1.0; 3]).unwrap();
        assert_abs_diff_eq!(ones, norm(&scaled_sum(&s)), epsilon = 1e-15);
        let s = Sample::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        assert_abs_diff_eq!(
            bootstrap_replicate_norm(&s, &[1.0, -1.0]).unwrap(),
            0.7071067811865476,
            epsilon = 1e-15
        );
        assert!(matches!(
            bootstrap_replicate_norm(&s, &[1.0]),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn gemm_path_matches_direct_replicates() {
        let mut rng = RngStream::new(4);
        let s = Sample::draw(&DistributionSpec::CenteredChiSq1, 13, 5, &mut rng);
        let w = WeightScheme::ExpMix.draw_weights(7 * 13, &mut rng);
        let fast = weighted_norms(&s, &w, 7, 1.0 / 13f64.sqrt());
        for (j, v) in fast.iter().enumerate() {
            let direct = bootstrap_replicate_norm(&s, &w[j * 13..(j + 1) * 13]).unwrap();
            assert_abs_diff_eq!(*v, direct, epsilon = 1e-12);
        }
    }

    #[test]
    fn upper_quantile_examples() {
        let q = empirical_upper_quantile(&[2.0, 4.0, 4.0, 7.0, 9.0], 0.25).unwrap();
        assert_eq!((q.rank, q.value), (4, 7.0));
        let tens: Vec<f64> = (1..=10).map(f64::from).collect();
        let q = empirical_upper_quantile(&tens, 0.2).unwrap();
        assert_eq!((q.rank, q.value), (8, 8.0));
        for alpha in [0.01, 0.5, 0.99] {
            assert_eq!(empirical_upper_quantile(&[3.0; 17], alpha).unwrap().value, 3.0);
        }
        assert!(matches!(empirical_upper_quantile(&[], 0.5), Err(Error::EmptyInput)));
        assert!(matches!(empirical_upper_quantile(&[1.0], 1.0), Err(Error::InvalidAlpha(_))));
        assert!(matches!(empirical_upper_quantile(&[1.0], 0.0), Err(Error::InvalidAlpha(_))));
    }

    #[test]
    fn exceedance_budget_is_exact_on_decimal_levels() {
        // 0.29 * 100 rounds below 29 in floating point
        assert_eq!(exceedance_budget(0.29, 100), 29);
        assert_eq!(exceedance_budget(0.1, 1000), 100);
        assert_eq!(exceedance_budget(0.05, 1000), 50);
        assert_eq!(exceedance_budget(0.999, 10), 9);
        assert_eq!(exceedance_budget(0.001, 10), 0);
    }

    #[test]
    fn single_replicate_and_degenerate_weights() {
        let mut rng = RngStream::new(2);
        let s = Sample::draw(&DistributionSpec::CenteredChiSq1, 10, 3, &mut rng);
        let qs = bootstrap_quantile(&s, &WeightScheme::ExpMix, 1, &[0.1, 0.5, 0.9], &mut rng).unwrap();
        assert!(qs.iter().all(|q| q.value == qs[0].value && q.rank == 1));
        let zero = WeightScheme::Custom {
            var_z: 0.0,
            atom: DistributionSpec::point(0.0),
        };
        let qs = bootstrap_quantile(&s, &zero, 50, &[0.05, 0.5], &mut rng).unwrap();
        assert!(qs.iter().all(|q| q.value == 0.0));
    }

    #[test]
    fn shared_replicates_equal_per_level_recomputation() {
        let s = Sample::draw(&DistributionSpec::CenteredChiSq1, 20, 4, &mut RngStream::new(8));
        let alphas = [0.025, 0.1, 0.3, 0.5];
        let shared =
            bootstrap_quantile(&s, &WeightScheme::ChiSqMix, 400, &alphas, &mut RngStream::new(9)).unwrap();
        for (a, q) in alphas.iter().zip(&shared) {
            let single =
                bootstrap_quantile(&s, &WeightScheme::ChiSqMix, 400, &[*a], &mut RngStream::new(9)).unwrap();
            assert_eq!(single[0], *q);
        }
    }

    #[test]
    fn full_enumeration_matches_exact_conditional_quantile() {
        // conditional law of the replicate norm over all 2^3 surrogate outcomes
        let s = Sample::from_rows(&[vec![1.0, -0.5], vec![0.3, 2.0], vec![-1.2, 0.7]]).unwrap();
        let (nodes, probs) = match two_point_surrogate() {
            DistributionSpec::FiniteAtomic { nodes, probs } => (nodes, probs),
            _ => unreachable!(),
        };
        let mut outcomes = Vec::new();
        for code in 0..8usize {
            let mut eps = [0.0; 3];
            let mut prob = 1.0;
            for (i, e) in eps.iter_mut().enumerate() {
                let bit = (code >> i) & 1;
                *e = nodes[bit];
                prob *= probs[bit];
            }
            outcomes.push((bootstrap_replicate_norm(&s, &eps).unwrap(), prob));
        }
        for alpha in [0.05, 0.2, 0.5, 0.8] {
            // exact inf over the conditional law
            let exact = outcomes
                .iter()
                .map(|o| o.0)
                .filter(|&t| outcomes.iter().filter(|o| o.0 > t).map(|o| o.1).sum::<f64>() <= alpha)
                .fold(f64::INFINITY, f64::min);
            // replicate set holding each outcome in proportion to its probability
            let reps: usize = 1_000_000;
            let mut values = Vec::with_capacity(reps);
            for (v, p) in &outcomes {
                values.extend(std::iter::repeat_n(*v, (p * reps as f64).round() as usize));
            }
            let q = empirical_upper_quantile(&values, alpha).unwrap();
            assert_eq!(q.value, exact, "alpha {alpha}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn quantile_realizes_the_inf_definition(
            values in prop::collection::vec(-5i32..5, 1..40),
            alpha in 0.001f64..0.999,
        ) {
            let values: Vec<f64> = values.into_iter().map(|v| v as f64 * 0.5).collect();
            let q = empirical_upper_quantile(&values, alpha).unwrap();
            prop_assert_eq!(q.value, inf_by_enumeration(&values, alpha));
        }

        #[test]
        fn quantiles_are_monotone_in_alpha(
            values in prop::collection::vec(-100.0f64..100.0, 1..60),
            a in 0.001f64..0.999,
            b in 0.001f64..0.999,
        ) {
            let set = ReplicateSet::new(values).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(set.upper_quantile(lo).unwrap().value >= set.upper_quantile(hi).unwrap().value);
        }
    }
}
