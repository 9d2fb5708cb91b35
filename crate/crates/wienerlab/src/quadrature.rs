//! Gauss-Hermite quadrature rules and Gaussian expectation operators.
//!
//! The nodes are the roots of the physicists' Hermite polynomial `H_n` and the
//! rule integrates `f(x) exp(-x^2)` exactly for polynomials of degree `2n - 1`.
//! All Gaussian expectations in the crate go through [`expect_gaussian`] with
//! the change of variables `x = mean + sqrt(2 var) t` and weight normalization
//! `1/sqrt(pi)`.

use crate::error::{Error, Result};

/// Largest supported rule order. High enough to replicate literature setups
/// that integrate with 10000 nodes; the solver below is O(n^2) so this stays
/// affordable.
pub const MAX_ORDER: usize = 10_000;

/// Default order for marginal-likelihood evaluation.
pub const DEFAULT_LIKELIHOOD_ORDER: usize = 100;

/// Default order for moment and kurtosis cross-checks.
pub const DEFAULT_MOMENT_ORDER: usize = 40;

/// An n-point Gauss-Hermite rule: ascending nodes `x_i` and positive weights
/// `w_i` with `sum w_i = sqrt(pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    order: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Quadrature sum `sum w_i g(x_i)`, approximating `integral g(x) e^{-x^2} dx`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * g(x))
            .sum()
    }
}

/// Build the n-point Gauss-Hermite rule.
///
/// Uses the Golub-Welsch construction: the nodes are the eigenvalues of the
/// symmetric tridiagonal Jacobi matrix (zero diagonal, off-diagonal
/// `sqrt(k/2)`), and the weights are `sqrt(pi)` times the squared first
/// components of the normalized eigenvectors. The implicit-QL sweep below
/// rotates only that first component along with the matrix, so the whole
/// construction is O(n^2) and the weights never go through the factorial
/// formula that overflows past n ~ 150.
///
/// The extreme weights decay like `exp(-x_i^2)` and fall below the smallest
/// positive `f64` once the order exceeds roughly 380; those weights come out
/// as exact zeros. They are also below any representable integrand
/// contribution, so quadrature results are unaffected.
pub fn hermite_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::InvalidArgument("quadrature order must be >= 1".into()));
    }
    if order > MAX_ORDER {
        return Err(Error::InvalidArgument(format!(
            "quadrature order {order} exceeds maximum {MAX_ORDER}"
        )));
    }

    let n = order;
    let mut diag = vec![0.0f64; n];
    let mut off = vec![0.0f64; n]; // off[k] couples k and k+1; off[n-1] unused
    for (k, o) in off.iter_mut().enumerate().take(n - 1) {
        *o = ((k + 1) as f64 / 2.0).sqrt();
    }
    // First components of the eigenvectors, accumulated through the rotations.
    let mut first = vec![0.0f64; n];
    first[0] = 1.0;

    tridiagonal_ql(&mut diag, &mut off, &mut first)?;

    let mut order_idx: Vec<usize> = (0..n).collect();
    order_idx.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));

    let mu0 = std::f64::consts::PI.sqrt();
    let mut nodes: Vec<f64> = order_idx.iter().map(|&i| diag[i]).collect();
    let mut weights: Vec<f64> = order_idx.iter().map(|&i| mu0 * first[i] * first[i]).collect();

    // The Jacobi matrix is persymmetric, so the exact spectrum is symmetric
    // about zero. Symmetrize to remove the last few ulps of QL asymmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }

    Ok(QuadratureRule { order, nodes, weights })
}

/// Implicit QL with Wilkinson shifts for a symmetric tridiagonal matrix,
/// rotating the auxiliary vector `first` (the first row of the accumulated
/// eigenvector matrix) alongside.
fn tridiagonal_ql(diag: &mut [f64], off: &mut [f64], first: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if n == 1 {
        return Ok(());
    }
    off[n - 1] = 0.0;
    let max_sweeps = 50;
    for l in 0..n {
        let mut iter = 0;
        loop {
            // Find the first decoupled block boundary at or after l.
            let mut m = l;
            while m < n - 1 {
                let dd = diag[m].abs() + diag[m + 1].abs();
                if off[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > max_sweeps {
                return Err(Error::Overflow(
                    "tridiagonal QL failed to converge".into(),
                ));
            }
            // Wilkinson shift from the leading 2x2 of the active block.
            let mut g = (diag[l + 1] - diag[l]) / (2.0 * off[l]);
            let mut r = g.hypot(1.0);
            g = diag[m] - diag[l] + off[l] / (g + r.copysign(g));
            let mut s = 1.0;
            let mut c = 1.0;
            let mut p = 0.0;
            let mut deflated_early = false;
            for i in (l..m).rev() {
                let mut f = s * off[i];
                let b = c * off[i];
                r = f.hypot(g);
                off[i + 1] = r;
                if r == 0.0 {
                    diag[i + 1] -= p;
                    off[m] = 0.0;
                    deflated_early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = diag[i + 1] - p;
                r = (diag[i] - g) * s + 2.0 * c * b;
                p = s * r;
                diag[i + 1] = g + p;
                g = c * r - b;
                // Rotate the tracked first components.
                f = first[i + 1];
                first[i + 1] = s * first[i] + c * f;
                first[i] = c * first[i] - s * f;
            }
            if deflated_early {
                continue;
            }
            diag[l] -= p;
            off[l] = g;
            off[m] = 0.0;
        }
    }
    Ok(())
}

/// `E[f(X)]` for `X ~ Normal(mean, variance)` by Gauss-Hermite quadrature.
///
/// Exact for polynomial `f` of degree `2n - 1`. A zero variance collapses to
/// `f(mean)`.
pub fn expect_gaussian<F: Fn(f64) -> f64>(
    f: F,
    mean: f64,
    variance: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if variance < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variance must be nonnegative, got {variance}"
        )));
    }
    if variance == 0.0 {
        return Ok(f(mean));
    }
    let scale = (2.0 * variance).sqrt();
    let sum = rule.integrate(|x| f(mean + scale * x));
    Ok(sum / std::f64::consts::PI.sqrt())
}

/// `E[f(V, E)]` for independent `V ~ Normal(mean1, var1)`, `E ~ Normal(mean2, var2)`
/// via the tensor product of the rule with itself.
pub fn expect_gaussian2<F: Fn(f64, f64) -> f64>(
    f: F,
    mean1: f64,
    var1: f64,
    mean2: f64,
    var2: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if var1 < 0.0 || var2 < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "variances must be nonnegative, got ({var1}, {var2})"
        )));
    }
    if var1 == 0.0 {
        return expect_gaussian(|e| f(mean1, e), mean2, var2, rule);
    }
    if var2 == 0.0 {
        return expect_gaussian(|v| f(v, mean2), mean1, var1, rule);
    }
    let s1 = (2.0 * var1).sqrt();
    let s2 = (2.0 * var2).sqrt();
    let mut sum = 0.0;
    for (&xi, &wi) in rule.nodes().iter().zip(rule.weights()) {
        let v = mean1 + s1 * xi;
        let inner = rule.integrate(|xj| f(v, mean2 + s2 * xj));
        sum += wi * inner;
    }
    Ok(sum / std::f64::consts::PI)
}
