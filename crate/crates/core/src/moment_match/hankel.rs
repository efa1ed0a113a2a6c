//! Truncated Hamburger moment problem on the real line.
//!
//! A sequence `u_0..=u_K` has a representing measure iff its Hankel matrix
//! `H = [u_{i+j}]` of size `floor(K/2) + 1` is positive semidefinite and the
//! sequence is rank consistent: once `H` becomes singular at some size `r`,
//! the measure is supported on the `r` roots of the degree-`r` orthogonal
//! polynomial, and every remaining moment must be the moment of that
//! `r`-atom measure.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::distributions::MomentVector;

/// Minimum-eigenvalue slack, relative to `1 + trace(H)`.
pub const PSD_TOL: f64 = 1e-10;
/// Threshold below which an orthogonal-polynomial norm counts as zero,
/// relative to the magnitude of the terms it was summed from.
pub(crate) const RANK_TOL: f64 = 1e-10;
/// Relative tolerance for moments implied by a rank-deficient recurrence.
pub(crate) const CONSISTENCY_TOL: f64 = 1e-8;

/// `(floor(K/2) + 1)`-square Hankel matrix of `u`.
pub fn hankel_matrix(u: &[f64]) -> DMatrix<f64> {
    let d = (u.len() - 1) / 2;
    DMatrix::from_fn(d + 1, d + 1, |i, j| u[i + j])
}

pub(crate) fn is_psd(h: &DMatrix<f64>) -> bool {
    let trace: f64 = h.diagonal().iter().sum();
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    min >= -PSD_TOL * (1.0 + trace.abs())
}

/// Three-term recurrence `pi_{k+1} = (x - alpha_k) pi_k - beta_k pi_{k-1}`
/// of the monic orthogonal polynomials of a moment functional.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Recurrence {
    pub alpha: Vec<f64>,
    /// `beta[k] = h_k / h_{k-1}` for `k >= 1`; `beta[0] = h_0`.
    pub beta: Vec<f64>,
    /// Squared norms `h_k = L[pi_k^2]`.
    pub norms: Vec<f64>,
    /// First `r` with `h_r` numerically zero, if any.
    pub rank: Option<usize>,
    /// Some `h_k` is clearly negative.
    pub indefinite: bool,
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `L[p]` and the sum of absolute terms, for roundoff scaling.
fn functional(p: &[f64], u: &[f64]) -> (f64, f64) {
    p.iter().zip(u).fold((0.0, 0.0), |(s, a), (c, m)| (s + c * m, a + (c * m).abs()))
}

/// Stieltjes procedure on the moment functional `L[x^j] = u_j`, run as far
/// as the available moments allow or until a norm vanishes.
pub(crate) fn recurrence(u: &[f64]) -> Recurrence {
    let order = u.len() - 1;
    let mut rec = Recurrence {
        alpha: Vec::new(),
        beta: Vec::new(),
        norms: Vec::new(),
        rank: None,
        indefinite: false,
    };
    let mut prev: Vec<f64> = Vec::new();
    let mut cur = vec![1.0];
    let mut k = 0;
    while 2 * k <= order {
        let sq = poly_mul(&cur, &cur);
        let (h, scale) = functional(&sq, u);
        if h <= RANK_TOL * scale {
            if h < -RANK_TOL * scale {
                rec.indefinite = true;
            }
            rec.rank = Some(k);
            return rec;
        }
        rec.beta.push(if k == 0 { h } else { h / rec.norms[k - 1] });
        rec.norms.push(h);
        if 2 * k + 1 > order {
            break;
        }
        let mut xsq = vec![0.0];
        xsq.extend_from_slice(&sq);
        let alpha = functional(&xsq, u).0 / h;
        rec.alpha.push(alpha);
        // next monic polynomial
        let mut next = vec![0.0; cur.len() + 1];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
            next[i] -= alpha * c;
        }
        if k > 0 {
            for (i, c) in prev.iter().enumerate() {
                next[i] -= rec.beta[k] * c;
            }
        }
        prev = std::mem::replace(&mut cur, next);
        k += 1;
    }
    rec
}

/// Nodes and weights of the Gauss rule with `alpha.len()` nodes built from
/// the Jacobi matrix (Golub-Welsch), sorted by node.
pub(crate) fn gauss_rule(alpha: &[f64], beta: &[f64], mass: f64) -> (Vec<f64>, Vec<f64>) {
    let d = alpha.len();
    let jacobi = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[j].sqrt()
        } else if j + 1 == i {
            beta[i].sqrt()
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..d)
        .map(|i| (eig.eigenvalues[i], mass * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

fn atomic_moments(nodes: &[f64], weights: &[f64], order: usize) -> Vec<f64> {
    (0..=order)
        .map(|k| {
            nodes
                .iter()
                .zip(weights)
                .map(|(x, w)| w * x.powi(k as i32))
                .sum()
        })
        .collect()
}

/// Whether every moment of `u` equals that of the `rank`-atom measure
/// fixed by the leading part of the recurrence.
pub(crate) fn rank_consistent(u: &[f64], rec: &Recurrence, rank: usize) -> bool {
    let (nodes, weights) = gauss_rule(&rec.alpha[..rank], &rec.beta[..rank], u[0]);
    let implied = atomic_moments(&nodes, &weights, u.len() - 1);
    implied
        .iter()
        .zip(u)
        .all(|(g, m)| (g - m).abs() <= CONSISTENCY_TOL * (1.0 + m.abs()))
}

/// Whether `u` admits a representing measure on the real line.
pub fn hankel_solvable(u: &MomentVector) -> bool {
    let m = u.as_slice();
    if !is_psd(&hankel_matrix(m)) {
        return false;
    }
    let rec = recurrence(m);
    if rec.indefinite {
        return false;
    }
    match rec.rank {
        None => true,
        Some(0) => false,
        Some(r) => rank_consistent(m, &rec, r),
    }
}
