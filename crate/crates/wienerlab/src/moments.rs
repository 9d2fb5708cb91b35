//! Conditional mean/variance of the Wiener output, the fourth central moment
//! `D = E{[(y - mean)^2 - C]^2}`, and the kurtosis factor `kappa = D / (2 C^2)`.
//!
//! For polynomial sensors everything is available in closed form: `h(z + v)`
//! expands into a polynomial in `v` whose Gaussian expectations reduce to
//! double-factorial moments. The quadrature variants recompute the same
//! quantities through Gauss-Hermite sums and serve as an independent path.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::poly;
use crate::quadrature::{expect_gaussian, expect_gaussian2, QuadratureRule};
use crate::sensor::PolynomialSensor;
use crate::system::WienerModel;

/// Output moments of `y = h(z + v) + e` at a fixed linear output `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentReport {
    /// Conditional mean `E{h(z + v)}`.
    pub mean: f64,
    /// Prediction-error variance `Var{h(z + v) + e}`.
    pub variance: f64,
    /// Fourth central moment `D = E{[(y - mean)^2 - variance]^2}`.
    pub fourth: f64,
    /// Kurtosis factor `D / (2 variance^2)`; 1 for Gaussian residuals.
    pub kappa: f64,
}

/// Mean and centered-variance polynomials in `z` of the sensor output under
/// process noise: `mean(z) = E_v[h(z+v)]` and
/// `var(z) = E_v[h(z+v)^2] - mean(z)^2`.
///
/// The leading coefficients of the two terms of `var` cancel exactly in
/// coefficient space, so the returned polynomial is well conditioned even for
/// small noise.
pub(crate) fn conditional_polys(sensor: &PolynomialSensor, var_v: f64) -> (Vec<f64>, Vec<f64>) {
    let h = sensor.coefficients();
    let mean = poly::gaussian_average_poly(h, var_v);
    let raw2 = poly::gaussian_average_poly(&poly::mul(h, h), var_v);
    let mean_sq = poly::mul(&mean, &mean);
    let mut var = vec![0.0; raw2.len().max(mean_sq.len())];
    for (i, slot) in var.iter_mut().enumerate() {
        let a = raw2.get(i).copied().unwrap_or(0.0);
        let b = mean_sq.get(i).copied().unwrap_or(0.0);
        *slot = a - b;
    }
    (mean, var)
}

/// Conditional mean predictor `E_v{h(z + v)}` in closed form.
pub fn predictor_mean(model: &WienerModel, z: f64) -> f64 {
    let (mean, _) = conditional_polys(&model.sensor, model.var_v);
    poly::eval(&mean, z)
}

/// Prediction-error variance `E_v{h(z+v)^2} - mean^2 + var_e` in closed form.
pub fn predictor_variance(model: &WienerModel, z: f64) -> f64 {
    let (_, var) = conditional_polys(&model.sensor, model.var_v);
    poly::eval(&var, z) + model.var_e
}

/// Quadrature path for [`predictor_mean`].
pub fn predictor_mean_quadrature(
    model: &WienerModel,
    z: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let h = model.sensor.coefficients().to_vec();
    expect_gaussian(|v| poly::eval(&h, z + v), 0.0, model.var_v, rule)
}

/// Quadrature path for [`predictor_variance`].
pub fn predictor_variance_quadrature(
    model: &WienerModel,
    z: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let h = model.sensor.coefficients().to_vec();
    let mean = expect_gaussian(|v| poly::eval(&h, z + v), 0.0, model.var_v, rule)?;
    let raw2 = expect_gaussian(
        |v| {
            let hv = poly::eval(&h, z + v);
            hv * hv
        },
        0.0,
        model.var_v,
        rule,
    )?;
    Ok(raw2 - mean * mean + model.var_e)
}

/// Fourth central moment `E{[(y - mu)^2 - c]^2}` about an arbitrary model
/// mean `mu` and variance `c`, in closed form.
///
/// With `w(v) = h(z+v) - mu` and `eps = w + e`, independence of `e` gives
/// `E[eps^2] = E[w^2] + var_e` and
/// `E[eps^4] = E[w^4] + 6 E[w^2] var_e + 3 var_e^2`, so
/// `D = E[eps^4] - 2 c E[eps^2] + c^2`. Sensor degree up to 8 needs Gaussian
/// moments of `v` up to order 32.
pub fn fourth_central_about(model: &WienerModel, z: f64, mu: f64, c: f64) -> f64 {
    let mut w = poly::shift(model.sensor.coefficients(), z);
    w[0] -= mu;
    let w2 = poly::mul(&w, &w);
    let w4 = poly::mul(&w2, &w2);
    let e_w2 = poly::gaussian_expectation(&w2, model.var_v);
    let e_w4 = poly::gaussian_expectation(&w4, model.var_v);
    let e2 = e_w2 + model.var_e;
    let e4 = e_w4 + 6.0 * e_w2 * model.var_e + 3.0 * model.var_e * model.var_e;
    e4 - 2.0 * c * e2 + c * c
}

/// Quadrature path for [`fourth_central_about`], integrating over the
/// independent pair `(v, e)`.
pub fn fourth_central_about_quadrature(
    model: &WienerModel,
    z: f64,
    mu: f64,
    c: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let h = model.sensor.coefficients().to_vec();
    expect_gaussian2(
        |v, e| {
            let eps = poly::eval(&h, z + v) + e - mu;
            let d = eps * eps - c;
            d * d
        },
        0.0,
        model.var_v,
        0.0,
        model.var_e,
        rule,
    )
}

/// Mean, variance, fourth moment, and kappa of the output at `z`.
pub fn fourth_and_kappa(model: &WienerModel, z: f64) -> Result<MomentReport> {
    let mean = predictor_mean(model, z);
    let variance = predictor_variance(model, z);
    if variance <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "output variance {variance} at z = {z}"
        )));
    }
    let fourth = fourth_central_about(model, z, mean, variance);
    Ok(MomentReport {
        mean,
        variance,
        fourth,
        kappa: fourth / (2.0 * variance * variance),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::hermite_rule;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model(sensor: PolynomialSensor, var_v: f64, var_e: f64) -> WienerModel {
        WienerModel::scalar(1.0, sensor, var_v, var_e).unwrap()
    }

    #[test]
    fn quadratic_mean() {
        let m = model(PolynomialSensor::quadratic(), 1.0, 0.0);
        assert_relative_eq!(predictor_mean(&m, 1.0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn cubic_mean() {
        let m = model(PolynomialSensor::cubic(), 1.0, 0.0);
        assert_relative_eq!(predictor_mean(&m, 1.0), 4.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn zero_process_noise_mean_is_h() {
        let m = model(PolynomialSensor::new(vec![0.2, -1.0, 0.0, 0.5]).unwrap(), 0.0, 0.3);
        assert_relative_eq!(predictor_mean(&m, 0.7), m.sensor.eval(0.7, 0).unwrap());
    }

    #[test]
    fn quadratic_variance() {
        let m = model(PolynomialSensor::quadratic(), 0.5, 0.5);
        assert_relative_eq!(predictor_variance(&m, 1.0), 1.125, max_relative = 1e-14);
    }

    #[test]
    fn cubic_variance() {
        // m^4 s + 4 m^2 s^2 + 5/3 s^3 + var_e at m = 1, s = 1.
        let m = model(PolynomialSensor::cubic(), 1.0, 1.0);
        assert_relative_eq!(predictor_variance(&m, 1.0), 23.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn linear_variance() {
        let m = model(PolynomialSensor::linear(2.0), 0.3, 0.1);
        for &z in &[-2.0, 0.0, 1.5] {
            assert_relative_eq!(
                predictor_variance(&m, z),
                4.0 * 0.3 + 0.1,
                max_relative = 1e-14
            );
        }
    }

    #[test]
    fn linear_residual_is_gaussian() {
        let m = model(PolynomialSensor::linear(1.4), 0.6, 0.2);
        let rep = fourth_and_kappa(&m, 0.4).unwrap();
        assert_relative_eq!(rep.kappa, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn chi_squared_kurtosis() {
        // h(x) = x^2 at z = 0 with no measurement noise: y = v^2 is
        // chi-squared with kurtosis 15, i.e. kappa = 7.
        let m = model(PolynomialSensor::new(vec![0.0, 0.0, 1.0]).unwrap(), 1.0, 0.0);
        let rep = fourth_and_kappa(&m, 0.0).unwrap();
        assert_relative_eq!(rep.kappa, 7.0, max_relative = 1e-12);
    }

    #[test]
    fn quadratic_kappa_endpoint() {
        let m = model(PolynomialSensor::quadratic(), 1.0, 1.0);
        let rep = fourth_and_kappa(&m, 1.0).unwrap();
        assert_relative_eq!(rep.kappa, 2.2, max_relative = 1e-12);
    }

    #[test]
    fn quadratic_kappa_half() {
        // Frozen from the expansion eps = v + (v^2 - s)/2 + e with
        // double-factorial moments: D = E[eps^4] - C^2 gives kappa = 5/3.
        let m = model(PolynomialSensor::quadratic(), 0.5, 0.5);
        let rep = fourth_and_kappa(&m, 1.0).unwrap();
        assert_relative_eq!(rep.kappa, 5.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_distribution_rejected() {
        let m = model(PolynomialSensor::quadratic(), 0.0, 0.0);
        assert!(matches!(
            fourth_and_kappa(&m, 1.0),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn kappa_tends_to_one_with_vanishing_process_noise() {
        let m = model(PolynomialSensor::cubic(), 1e-8, 0.5);
        let rep = fourth_and_kappa(&m, 1.0).unwrap();
        assert!((rep.kappa - 1.0).abs() < 1e-4, "kappa = {}", rep.kappa);
    }

    #[test]
    fn closed_form_matches_quadrature_on_random_grid() {
        let rule = hermite_rule(40).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let deg = rng.gen_range(1..=4usize);
            let coeffs: Vec<f64> = (0..=deg).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let sensor = match PolynomialSensor::new(coeffs) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let var_v = rng.gen_range(0.01..2.0);
            let var_e = rng.gen_range(0.01..2.0);
            let z = rng.gen_range(-2.0..2.0);
            let m = WienerModel::scalar(1.0, sensor, var_v, var_e).unwrap();

            let mean = predictor_mean(&m, z);
            let mean_q = predictor_mean_quadrature(&m, z, &rule).unwrap();
            assert_relative_eq!(mean, mean_q, max_relative = 1e-10, epsilon = 1e-10);

            let var = predictor_variance(&m, z);
            let var_q = predictor_variance_quadrature(&m, z, &rule).unwrap();
            assert_relative_eq!(var, var_q, max_relative = 1e-8, epsilon = 1e-10);

            let rep = fourth_and_kappa(&m, z).unwrap();
            let d_q =
                fourth_central_about_quadrature(&m, z, rep.mean, rep.variance, &rule).unwrap();
            assert_relative_eq!(rep.fourth, d_q, max_relative = 1e-8, epsilon = 1e-10);

            assert!(rep.fourth >= 0.0);
            assert!(rep.variance > 0.0);
        }
    }
}
