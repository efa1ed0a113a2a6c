//! Monte Carlo experiments: coverage tables, CDF datasets, regression
//! coverage, scheme checks and moment fits.
//!
//! Repetition `r` of an experiment draws from its own stream
//! `RngStream::derive(seed, experiment_id, r)`. Within a repetition the data
//! are drawn first (row by row), then the `B x n` weight matrix (replicate
//! by replicate). Repetitions run on a rayon pool and are reduced in index
//! order, so results do not depend on the thread count.

mod config;
mod output;

pub use config::{
    level_to_alpha, DesignKind, ExperimentConfig, Kind, OutputFormat, YModel, DEFAULT_MAX_WORK,
};
pub use output::{CdfDataset, CdfSummary, CoverageRow, CoverageTable, MomentFitReport, Reference};

use rayon::prelude::*;

use crate::analysis::{chi_squared_cdf, ks_to_reference, ks_two_sample, normal_cdf, EmpiricalCdf};
use crate::bootstrap::{scaled_sum, ReplicateSet, ReplicateWorkspace, Sample};
use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};
use crate::moment_match::{verify_match, ConvolutionModel, ParetoSplit};
use crate::regression::{regression_rep, DesignMatrix, RegressionModel};
use crate::rng::RngStream;
use crate::weights::{validate_scheme, ValidationReport};

/// Repetition count, seeding and parallelism of a Monte Carlo loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub reps: usize,
    pub seed: u64,
    pub experiment_id: u64,
    /// `0` uses every available core.
    pub threads: usize,
}

impl RunOptions {
    pub fn new(reps: usize, seed: u64, threads: usize) -> Self {
        Self {
            reps,
            seed,
            experiment_id: 0,
            threads,
        }
    }

    pub fn with_experiment(mut self, id: u64) -> Self {
        self.experiment_id = id;
        self
    }

    fn stream(&self, r: usize) -> RngStream {
        RngStream::derive(self.seed, self.experiment_id, r as u64)
    }
}

fn with_pool<T: Send>(threads: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start thread pool: {e}")))?;
    Ok(pool.install(job))
}

/// Runs `rep` once per repetition and returns `f(r)` in repetition order.
pub fn monte_carlo_map<T, F>(opts: &RunOptions, rep: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut RngStream) -> Result<T> + Sync,
{
    with_pool(opts.threads, || {
        (0..opts.reps)
            .into_par_iter()
            .map(|r| rep(&mut opts.stream(r)))
            .collect::<Result<Vec<T>>>()
    })?
}

/// Per-level hit counts of a repetition that reports one indicator per level.
pub fn monte_carlo_hits<F>(opts: &RunOptions, levels: usize, rep: F) -> Result<Vec<u64>>
where
    F: Fn(&mut RngStream) -> Result<Vec<bool>> + Sync,
{
    let outcomes = monte_carlo_map(opts, rep)?;
    let mut hits = vec![0u64; levels];
    for o in outcomes {
        if o.len() != levels {
            return Err(Error::LengthMismatch {
                expected: levels,
                found: o.len(),
            });
        }
        for (h, hit) in hits.iter_mut().zip(o) {
            *h += u64::from(hit);
        }
    }
    Ok(hits)
}

fn run_options(cfg: &ExperimentConfig, reps: usize) -> RunOptions {
    RunOptions::new(reps, cfg.seed, cfg.threads).with_experiment(cfg.experiment_id())
}

fn expect_kind(cfg: &ExperimentConfig, kind: Kind) -> Result<()> {
    if cfg.kind != kind {
        return Err(Error::Config(format!("expected a `{kind}` config, got `{}`", cfg.kind)));
    }
    Ok(())
}

fn table_from_hits(cfg: &ExperimentConfig, hits: &[u64]) -> CoverageTable {
    let rows = cfg
        .alphas
        .iter()
        .zip(hits)
        .map(|(alpha, h)| CoverageRow::new(cfg, level_to_alpha(*alpha), *h as f64 / cfg.reps as f64))
        .collect();
    CoverageTable { rows }
}

/// Frequencies of `{|S_n| <= Q^b(alpha)}` over `R` repetitions; every level
/// is read off the same replicate set.
pub fn run_coverage(cfg: &ExperimentConfig) -> Result<CoverageTable> {
    expect_kind(cfg, Kind::Coverage)?;
    cfg.validate()?;
    cfg.check_budget()?;
    let (n, p, boot) = (cfg.n, cfg.p, cfg.boot);
    let weights = cfg.scheme.sampler();
    let scale = 1.0 / (n as f64).sqrt();
    let hits = monte_carlo_hits(&run_options(cfg, cfg.reps), cfg.alphas.len(), |rng| {
        let sample = Sample::draw(&cfg.x_dist, n, p, rng);
        let stat = norm(&scaled_sum(&sample));
        let norms = ReplicateWorkspace::new().replicate_norms(&sample, &weights, boot, scale, rng);
        let set = ReplicateSet::new(norms)?;
        cfg.alphas
            .iter()
            .map(|&a| Ok(stat <= set.upper_quantile(a)?.value))
            .collect()
    })?;
    Ok(table_from_hits(cfg, &hits))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// The approximating law `Y` of a CDF experiment.
pub fn y_spec(cfg: &ExperimentConfig) -> Result<DistributionSpec> {
    match &cfg.y_model {
        YModel::Explicit(spec) => Ok(spec.clone()),
        YModel::Pareto { shape } => ParetoSplit::fixed_shape(&cfg.x_dist.raw_moments(3)?, *shape)?.spec(),
        YModel::MaxGaussian => {
            let tol = cfg.tol.unwrap_or(1e-10);
            ConvolutionModel::max_gaussian(&cfg.x_dist.raw_moments(cfg.order)?, tol)?.atomic_spec()
        }
    }
}

/// `N` realizations each of the statistic for `X` and for `Y`: the signed
/// scaled sum when `p = 1`, its squared norm otherwise.
pub fn run_cdf_experiment(cfg: &ExperimentConfig) -> Result<CdfDataset> {
    expect_kind(cfg, Kind::Cdf)?;
    cfg.validate()?;
    cfg.check_budget()?;
    let y = y_spec(cfg)?;
    let (n, p) = (cfg.n, cfg.p);
    let stat = |s: Vec<f64>| if p == 1 { s[0] } else { s.iter().map(|x| x * x).sum() };
    let pairs = monte_carlo_map(&run_options(cfg, cfg.samples), |rng| {
        let sx = stat(scaled_sum(&Sample::draw(&cfg.x_dist, n, p, rng)));
        let sy = stat(scaled_sum(&Sample::draw(&y, n, p, rng)));
        Ok((sx, sy))
    })?;
    let (sn, syn): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let (fx, fy) = (EmpiricalCdf::new(sn)?, EmpiricalCdf::new(syn)?);
    let reference = if p == 1 {
        Reference::Normal
    } else {
        Reference::ChiSquared { df: p }
    };
    let cdf = |t: f64| match reference {
        Reference::Normal => normal_cdf(t),
        Reference::ChiSquared { df } => chi_squared_cdf(df, t.max(0.0)),
    };
    let summary = CdfSummary {
        n,
        p,
        samples: cfg.samples,
        seed: cfg.seed,
        x_dist: cfg.x_dist.to_string(),
        y_dist: y.to_string(),
        reference,
        ks_sn_syn: ks_two_sample(&fx, &fy),
        ks_sn_ref: ks_to_reference(&fx, cdf),
        ks_syn_ref: ks_to_reference(&fy, cdf),
    };
    Ok(CdfDataset {
        sn: fx.values().to_vec(),
        syn: fy.values().to_vec(),
        summary,
    })
}

/// Frozen design of a regression config. The Gaussian design is drawn from
/// stream `u64::MAX` of the experiment, which no repetition uses.
pub fn regression_design(cfg: &ExperimentConfig) -> Result<DesignMatrix> {
    match cfg.design {
        DesignKind::Fourier => DesignMatrix::fourier(cfg.p, cfg.n),
        DesignKind::Gaussian => {
            let mut rng = RngStream::derive(cfg.seed, cfg.experiment_id(), u64::MAX);
            DesignMatrix::gaussian(cfg.p, cfg.n, &mut rng)
        }
    }
}

/// Coverage of `{T <= Q^b_T(alpha)}` with `x_dist` as the error law.
pub fn run_regression_coverage(cfg: &ExperimentConfig) -> Result<CoverageTable> {
    expect_kind(cfg, Kind::Regression)?;
    cfg.validate()?;
    cfg.check_budget()?;
    let design = regression_design(cfg)?;
    let theta = cfg.theta.clone().unwrap_or_else(|| vec![0.0; cfg.p]);
    let model = RegressionModel::new(theta, cfg.x_dist.clone())?;
    let weights = cfg.scheme.sampler();
    let hits = monte_carlo_hits(&run_options(cfg, cfg.reps), cfg.alphas.len(), |rng| {
        regression_rep(&design, &model, &weights, cfg.boot, &cfg.alphas, cfg.mode, rng)
    })?;
    Ok(table_from_hits(cfg, &hits))
}

/// Exact moments of the configured scheme against the multiplier conditions.
pub fn run_weights_check(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    expect_kind(cfg, Kind::WeightsCheck)?;
    validate_scheme(&cfg.scheme, cfg.tol.unwrap_or(1e-9))
}

/// Gaussian-plus-residual decompositions of `x_dist`.
pub fn run_moment_fit(cfg: &ExperimentConfig) -> Result<MomentFitReport> {
    expect_kind(cfg, Kind::MomentFit)?;
    let target = cfg.x_dist.raw_moments(cfg.order)?;
    let model = ConvolutionModel::max_gaussian(&target, cfg.tol.unwrap_or(1e-10))?;
    let atomic = model.atomic_spec()?;
    let pareto = ParetoSplit::fixed_shape(&target, cfg.pareto_shape).ok();
    let pareto_gap = match &pareto {
        Some(split) => Some(verify_match(&target, &split.spec()?, 3)?),
        None => None,
    };
    Ok(MomentFitReport {
        target: cfg.x_dist.to_string(),
        order: cfg.order,
        target_moments: target.as_slice().to_vec(),
        max_var_z: model.var_z(),
        residual_moments: model.residual_moments().as_slice().to_vec(),
        atomic_model: atomic.to_string(),
        atomic_gap: verify_match(&target, &atomic, cfg.order)?,
        pareto_shape: cfg.pareto_shape,
        pareto_model: pareto.as_ref().map(|s| s.spec().map(|x| x.to_string())).transpose()?,
        pareto_var_z: pareto.map(|s| s.var_z),
        pareto_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text, None).unwrap()
    }

    #[test]
    fn point_mass_always_covers() {
        let c = cfg("kind = coverage\nn = 10\np = 2\nreps = 30\nboot = 50\nlevels = [0.95, 0.5]\nx_dist = atomic(nodes=[0], probs=[1])");
        let t = run_coverage(&c).unwrap();
        assert!(t.rows.iter().all(|r| r.frequency == 1.0 && r.mc_se == 0.0));
    }

    #[test]
    fn coverage_is_monotone_in_level_and_se_matches() {
        let c = cfg("kind = coverage\nn = 20\np = 3\nreps = 300\nboot = 200\nlevels = [0.975, 0.95, 0.9, 0.7, 0.5]\nx_dist = chisq1c\nscheme = bernmix(b=0.276)");
        let t = run_coverage(&c).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[0].frequency >= w[1].frequency);
        }
        for r in &t.rows {
            let se = (r.frequency * (1.0 - r.frequency) / r.reps as f64).sqrt();
            assert!((r.mc_se - se).abs() <= 1e-12);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let base = "kind = coverage\nn = 15\np = 2\nreps = 64\nboot = 40\nlevels = [0.9, 0.6]\nx_dist = chisq1c\nscheme = bernmix(b=0.276)";
        let runs: Vec<CoverageTable> = [1, 2, 8]
            .iter()
            .map(|t| run_coverage(&cfg(&format!("{base}\nthreads = {t}"))).unwrap())
            .collect();
        assert_eq!(runs[0], runs[1]);
        assert_eq!(runs[0], runs[2]);
    }

    #[test]
    fn gaussian_against_gaussian_is_sampling_noise() {
        let c = cfg("kind = cdf\nn = 5\np = 1\nsamples = 4000\nx_dist = gauss(mean=0, var=1)\ny_dist = gauss(mean=0, var=1)");
        let d = run_cdf_experiment(&c).unwrap();
        // DKW at 99%: sqrt(ln(2 / 0.01) / (2 N))
        let dkw = ((2.0f64 / 0.01).ln() / (2.0 * 4000.0)).sqrt();
        assert!(d.summary.ks_sn_ref < dkw && d.summary.ks_syn_ref < dkw);
        assert!(d.summary.ks_sn_syn < 2.0 * dkw);
        assert_eq!(d.sn.len(), 4000);
        assert!(d.sn.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn moment_fit_report_for_the_lognormal() {
        let c = cfg("kind = moment-fit\nx_dist = lognormal(sigma=1, std)\norder = 4");
        let r = run_moment_fit(&c).unwrap();
        assert!(r.max_var_z > 0.0458);
        assert!(r.pareto_gap.unwrap() < 1e-9);
        assert!((r.pareto_var_z.unwrap() - 0.045878).abs() < 1e-6);
    }

    #[test]
    fn weights_check_flags() {
        let ok = run_weights_check(&cfg("kind = weights-check\nscheme = bernmix(b=0.276)")).unwrap();
        assert!(ok.passed());
        let gauss = run_weights_check(&cfg("kind = weights-check\nscheme = gauss")).unwrap();
        assert!(!gauss.passed() && !gauss.third_ok);
    }

    #[test]
    fn budget_guard_blocks_large_runs() {
        let c = cfg("kind = coverage\nn = 400\np = 40\nreps = 7000\nboot = 1000\nmax_work = 1e10");
        assert!(matches!(run_coverage(&c), Err(Error::Budget { .. })));
    }

    #[test]
    fn wrong_kind_is_a_config_error() {
        let c = cfg("kind = coverage");
        assert!(matches!(run_cdf_experiment(&c), Err(Error::Config(_))));
    }
}
