//! Empirical distribution functions, Kolmogorov distances, chi-square and
//! normal CDFs, and Gaussian shell probabilities.

use crate::error::{Error, Result};

/// Right-continuous empirical CDF of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    sorted: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidSpec("sample contains NaN".into()));
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

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    fn count_le(&self, t: f64) -> usize {
        self.sorted.partition_point(|x| *x <= t)
    }

    /// `#{x <= t} / N`.
    pub fn eval(&self, t: f64) -> f64 {
        self.count_le(t) as f64 / self.len() as f64
    }
}

/// `sup_t |F_a(t) - F_b(t)|`, evaluated at every jump of either CDF.
pub fn ks_two_sample(a: &EmpiricalCdf, b: &EmpiricalCdf) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (xa, xb) = (a.values(), b.values());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < xa.len() || j < xb.len() {
        let t = match (xa.get(i), xb.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => unreachable!(),
        };
        while i < xa.len() && xa[i] <= t {
            i += 1;
        }
        while j < xb.len() && xb[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// `sup_t |F_a(t) - F(t)|` for a continuous CDF `F`, using both one-sided
/// limits of `F_a` at each sample point.
pub fn ks_to_reference<F: Fn(f64) -> f64>(a: &EmpiricalCdf, cdf: F) -> f64 {
    let n = a.len() as f64;
    let xs = a.values();
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let below = i;
        while i < xs.len() && xs[i] == x {
            i += 1;
        }
        let f = cdf(x);
        d = d.max((i as f64 / n - f).abs()).max((below as f64 / n - f).abs());
    }
    d
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + LANCZOS_G + 0.5;
    let series = LANCZOS[1..]
        .iter()
        .enumerate()
        .fold(LANCZOS[0], |acc, (i, c)| acc + c / (x + (i + 1) as f64));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + series.ln()
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;

fn gamma_prefactor(s: f64, x: f64) -> f64 {
    (s * x.ln() - x - ln_gamma(s)).exp()
}

fn lower_series(s: f64, x: f64) -> f64 {
    let mut term = 1.0 / s;
    let mut sum = term;
    let mut a = s;
    for _ in 0..GAMMA_MAX_ITER {
        a += 1.0;
        term *= x / a;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    sum * gamma_prefactor(s, x)
}

fn upper_fraction(s: f64, x: f64) -> f64 {
    // modified Lentz on the continued fraction for Q(s, x)
    let tiny = 1e-300;
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    h * gamma_prefactor(s, x)
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn gamma_p(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x < s + 1.0 {
        lower_series(s, x)
    } else {
        1.0 - upper_fraction(s, x)
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = 1 - P(s, x)`.
pub fn gamma_q(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x < s + 1.0 {
        1.0 - lower_series(s, x)
    } else {
        upper_fraction(s, x)
    }
}

/// `P(chi^2_p <= x)`.
pub fn chi_squared_cdf(p: usize, x: f64) -> f64 {
    gamma_p(p as f64 / 2.0, x / 2.0)
}

/// `P(chi^2_p > x)`.
pub fn chi_squared_sf(p: usize, x: f64) -> f64 {
    gamma_q(p as f64 / 2.0, x / 2.0)
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    let q = 0.5 * gamma_q(0.5, 0.5 * x * x);
    if x < 0.0 {
        q
    } else {
        1.0 - q
    }
}

/// `P(r <= |Z| <= r + eps)` for `Z ~ N(0, I_p)`.
pub fn gaussian_shell_prob(p: usize, r: f64, eps: f64) -> f64 {
    let (lo, hi) = (r * r, (r + eps) * (r + eps));
    if lo > p as f64 {
        (chi_squared_sf(p, lo) - chi_squared_sf(p, hi)).max(0.0)
    } else {
        (chi_squared_cdf(p, hi) - chi_squared_cdf(p, lo)).max(0.0)
    }
}

/// `max_r P(r <= |Z| <= r + eps) / eps` over `r in [0, sqrt(p) + 10]`: a
/// grid scan at spacing `resolution`, refined by golden-section search
/// around the best grid point.
pub fn anti_concentration_sup(p: usize, eps: f64, resolution: f64) -> Result<f64> {
    if p == 0 || !(eps > 0.0) {
        return Err(Error::InvalidSpec(format!("need p >= 1 and eps > 0, got {p}, {eps}")));
    }
    if !(resolution > 0.0 && resolution <= eps / 10.0) {
        return Err(Error::InvalidSpec(format!(
            "grid resolution {resolution} must lie in (0, eps / 10]"
        )));
    }
    let f = |r: f64| gaussian_shell_prob(p, r, eps) / eps;
    let upper = (p as f64).sqrt() + 10.0;
    let steps = (upper / resolution).ceil() as usize;
    let (mut best_r, mut best) = (0.0, f(0.0));
    for i in 1..=steps {
        let r = (i as f64 * resolution).min(upper);
        let v = f(r);
        if v > best {
            best = v;
            best_r = r;
        }
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = ((best_r - resolution).max(0.0), (best_r + resolution).min(upper));
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    Ok(best.max(fc).max(fd))
}
