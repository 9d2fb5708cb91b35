//! Dense polynomial helpers used by the sensor and moment computations.
//!
//! Polynomials are coefficient vectors in ascending order, `p(x) = sum c[j] x^j`.
//! Degrees stay small (sensor degree <= 8, fourth moments need degree <= 32), so
//! plain convolution and Horner evaluation are exact enough and fast.

/// Evaluate `p(x)` by Horner's scheme.
pub(crate) fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Coefficients of the derivative `p'`.
pub(crate) fn derivative(coeffs: &[f64]) -> Vec<f64> {
    if coeffs.len() <= 1 {
        return vec![0.0];
    }
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, &c)| j as f64 * c)
        .collect()
}

/// Product of two polynomials.
pub(crate) fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &ai) in a.iter().enumerate() {
        for (j, &bj) in b.iter().enumerate() {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Taylor shift: coefficients of `q(v) = p(a + v)`.
///
/// Done by repeated synthetic division, which is numerically stable for the
/// small degrees used here.
pub(crate) fn shift(coeffs: &[f64], a: f64) -> Vec<f64> {
    let mut work = coeffs.to_vec();
    let n = work.len();
    let mut out = vec![0.0; n];
    for item in out.iter_mut().take(n) {
        // One synthetic division by (x - a): remainder is the next coefficient.
        let mut rem = 0.0;
        for c in work.iter_mut().rev() {
            rem = rem * a + *c;
            *c = rem;
        }
        *item = work.remove(0);
    }
    out
}

/// Raw moments `E[v^k]` of `v ~ Normal(0, var)` for `k = 0..=max_order`.
///
/// Odd moments vanish; even moments are `(k-1)!! var^(k/2)`. The double
/// factorials are accumulated in `u128` (exact) before the single rounding
/// to `f64`.
pub(crate) fn gaussian_moments(var: f64, max_order: usize) -> Vec<f64> {
    let mut m = vec![0.0; max_order + 1];
    m[0] = 1.0;
    let mut dfact: u128 = 1;
    for k in (2..=max_order).step_by(2) {
        dfact *= (k - 1) as u128;
        m[k] = dfact as f64 * var.powi(k as i32 / 2);
    }
    m
}

/// Expectation `E[p(v)]` for `v ~ Normal(0, var)`.
pub(crate) fn gaussian_expectation(coeffs: &[f64], var: f64) -> f64 {
    let moments = gaussian_moments(var, coeffs.len().saturating_sub(1));
    coeffs
        .iter()
        .zip(moments.iter())
        .map(|(&c, &m)| c * m)
        .sum()
}

/// Coefficients in `z` of the averaged polynomial `e(z) = E_v[p(z + v)]`,
/// `v ~ Normal(0, var)`.
///
/// Expanding `(z + v)^j` binomially and taking the expectation over `v`
/// termwise leaves a polynomial in `z` of the same degree.
pub(crate) fn gaussian_average_poly(coeffs: &[f64], var: f64) -> Vec<f64> {
    let d = coeffs.len() - 1;
    let moments = gaussian_moments(var, d);
    let binom = binomial_table(d);
    let mut out = vec![0.0; coeffs.len()];
    for (j, &cj) in coeffs.iter().enumerate() {
        if cj == 0.0 {
            continue;
        }
        for i in 0..=j {
            out[i] += cj * binom[j][i] * moments[j - i];
        }
    }
    out
}

/// Pascal's triangle up to row `n`, as exact `f64` values.
fn binomial_table(n: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    for j in 0..=n {
        let mut row = vec![1.0; j + 1];
        for i in 1..j {
            row[i] = rows[j - 1][i - 1] + rows[j - 1][i];
        }
        rows.push(row);
    }
    rows
}
