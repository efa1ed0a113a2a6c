//! Atomic representing measures from moment sequences.

use crate::distributions::{DistributionSpec, MomentVector};
use crate::error::{Error, Result};

use super::hankel::{gauss_rule, hankel_solvable, recurrence};

/// Finite measure with strictly increasing nodes and positive weights
/// summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomicMeasure {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl AtomicMeasure {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::InvalidMoments("atomic measure needs matching nodes and weights".into()));
        }
        if nodes.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidMoments("nodes must be strictly increasing".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidMoments("weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMoments(format!("weights sum to {total}")));
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn raw_moments(&self, order: usize) -> Result<MomentVector> {
        MomentVector::new(
            (0..=order)
                .map(|k| {
                    self.nodes
                        .iter()
                        .zip(&self.weights)
                        .map(|(x, w)| w * x.powi(k as i32))
                        .sum()
                })
                .collect(),
        )
    }

    pub fn to_spec(&self) -> DistributionSpec {
        DistributionSpec::FiniteAtomic {
            nodes: self.nodes.clone(),
            probs: self.weights.clone(),
        }
    }
}

/// A finite measure reproducing every moment of `u`.
///
/// For a positive definite Hankel matrix of order `2d` this is a `d + 1`
/// node Gauss rule of the Jacobi matrix extended by one step (with
/// `alpha_d = alpha_{d-1}` for even order, and `alpha_d` taken from `u` for
/// odd order). When the Hankel matrix has rank `r`, the unique `r`-atom
/// measure is returned.
pub fn atomic_from_moments(u: &MomentVector) -> Result<AtomicMeasure> {
    if !hankel_solvable(u) {
        return Err(Error::TargetNotSolvable);
    }
    let m = u.as_slice();
    let rec = recurrence(m);
    let (alpha, beta) = match rec.rank {
        Some(r) => (rec.alpha[..r].to_vec(), rec.beta[..r].to_vec()),
        None => {
            let d = rec.norms.len() - 1;
            let mut alpha = rec.alpha.clone();
            if alpha.len() == d {
                alpha.push(alpha[d - 1]);
            }
            (alpha, rec.beta.clone())
        }
    };
    let (nodes, mut weights) = gauss_rule(&alpha, &beta, m[0]);
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    AtomicMeasure::new(nodes, weights)
}
