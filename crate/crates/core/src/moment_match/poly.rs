//! Exact expectations of polynomials of normalized sums of finitely
//! supported independent vectors.

use crate::distributions::DistributionSpec;
use crate::error::{Error, Result};

/// Largest number of joint outcomes enumerated by [`exact_poly_expectation`].
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Sparse polynomial on `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(c, vec![0; dim]).expect("dimension matches");
        p
    }

    /// The single monomial `x^powers`.
    pub fn monomial(powers: Vec<u32>) -> Self {
        let mut p = Self::zero(powers.len());
        p.add_term(1.0, powers).expect("dimension matches");
        p
    }

    pub fn add_term(&mut self, coef: f64, powers: Vec<u32>) -> Result<()> {
        if powers.len() != self.dim {
            return Err(Error::LengthMismatch {
                expected: self.dim,
                found: powers.len(),
            });
        }
        self.terms.push(Monomial { coef, powers });
        Ok(())
    }

    /// `(a . x)^k`, expanded by the multinomial theorem.
    pub fn linear_form_power(a: &[f64], k: u32) -> Self {
        let mut p = Self::zero(a.len());
        let mut powers = vec![0u32; a.len()];
        expand(a, k, 0, &mut powers, &mut p);
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .iter()
            .map(|t| t.powers.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef
                    * x.iter()
                        .zip(&t.powers)
                        .map(|(xi, e)| xi.powi(*e as i32))
                        .product::<f64>()
            })
            .sum()
    }
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

fn expand(a: &[f64], left: u32, j: usize, powers: &mut Vec<u32>, out: &mut Polynomial) {
    if j + 1 == a.len() {
        powers[j] = left;
        let total: u32 = powers.iter().sum();
        let coef = factorial(total)
            * powers
                .iter()
                .zip(a)
                .map(|(e, aj)| aj.powi(*e as i32) / factorial(*e))
                .product::<f64>();
        out.terms.push(Monomial {
            coef,
            powers: powers.clone(),
        });
        return;
    }
    for e in 0..=left {
        powers[j] = e;
        expand(a, left - e, j + 1, powers, out);
    }
}

/// Finitely supported law on `R^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicVectorLaw {
    points: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

impl AtomicVectorLaw {
    pub fn new(points: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyInput);
        }
        if points.len() != probs.len() {
            return Err(Error::LengthMismatch {
                expected: points.len(),
                found: probs.len(),
            });
        }
        let p = points[0].len();
        if p == 0 || points.iter().any(|x| x.len() != p || x.iter().any(|v| !v.is_finite())) {
            return Err(Error::InvalidSpec("points must share a positive dimension and be finite".into()));
        }
        if probs.iter().any(|q| !(*q >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidSpec("probabilities must be nonnegative and sum to 1".into()));
        }
        Ok(Self { points, probs })
    }

    /// Scalar atomic law as a law on `R^1`.
    pub fn from_scalar(spec: &DistributionSpec) -> Result<Self> {
        match spec {
            DistributionSpec::FiniteAtomic { nodes, probs } => {
                Self::new(nodes.iter().map(|x| vec![*x]).collect(), probs.clone())
            }
            other => Err(Error::InvalidSpec(format!("{other} is not finitely supported"))),
        }
    }

    /// Law with independent coordinates drawn from the given scalar laws.
    pub fn product(coords: &[DistributionSpec]) -> Result<Self> {
        let mut law = Self {
            points: vec![Vec::new()],
            probs: vec![1.0],
        };
        for c in coords {
            let DistributionSpec::FiniteAtomic { nodes, probs } = c else {
                return Err(Error::InvalidSpec(format!("{c} is not finitely supported")));
            };
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (x, p) in law.points.iter().zip(&law.probs) {
                for (y, q) in nodes.iter().zip(probs) {
                    let mut z = x.clone();
                    z.push(*y);
                    points.push(z);
                    weights.push(p * q);
                }
            }
            law = Self {
                points,
                probs: weights,
            };
        }
        Self::new(law.points, law.probs)
    }

    /// Law of `X * e` for independent `X ~ self` and scalar `e ~ weight`.
    pub fn times_scalar(&self, weight: &DistributionSpec) -> Result<Self> {
        let DistributionSpec::FiniteAtomic { nodes, probs } = weight else {
            return Err(Error::InvalidSpec(format!("{weight} is not finitely supported")));
        };
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (x, p) in self.points.iter().zip(&self.probs) {
            for (e, q) in nodes.iter().zip(probs) {
                points.push(x.iter().map(|v| v * e).collect());
                weights.push(p * q);
            }
        }
        Self::new(points, weights)
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        for (x, p) in self.points.iter().zip(&self.probs) {
            for (mi, xi) in m.iter_mut().zip(x) {
                *mi += p * xi;
            }
        }
        m
    }
}

/// `E f(S_n)` with `S_n = n^{-1/2} sum_i X_i` for independent `X_i ~ laws[i]`,
/// by enumerating every joint outcome.
pub fn exact_poly_expectation(laws: &[AtomicVectorLaw], f: &Polynomial) -> Result<f64> {
    if laws.is_empty() {
        return Err(Error::EmptyInput);
    }
    let p = f.dim();
    if let Some(bad) = laws.iter().find(|l| l.dim() != p) {
        return Err(Error::LengthMismatch {
            expected: p,
            found: bad.dim(),
        });
    }
    let size = laws
        .iter()
        .try_fold(1u128, |acc, l| acc.checked_mul(l.points.len() as u128))
        .unwrap_or(u128::MAX);
    if size > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBudget {
            size,
            limit: ENUMERATION_LIMIT,
        });
    }
    let scale = (laws.len() as f64).sqrt().recip();
    let mut idx = vec![0usize; laws.len()];
    let mut s = vec![0.0; p];
    let mut total = 0.0;
    loop {
        s.iter_mut().for_each(|v| *v = 0.0);
        let mut prob = 1.0;
        for (law, &i) in laws.iter().zip(&idx) {
            prob *= law.probs[i];
            for (sj, xj) in s.iter_mut().zip(&law.points[i]) {
                *sj += xj;
            }
        }
        s.iter_mut().for_each(|v| *v *= scale);
        total += prob * f.eval(&s);
        // odometer
        let mut pos = 0;
        loop {
            if pos == idx.len() {
                return Ok(total);
            }
            idx[pos] += 1;
            if idx[pos] < laws[pos].points.len() {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}
