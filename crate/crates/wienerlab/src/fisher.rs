//! Fisher information, score covariance, and sandwich asymptotic covariance
//! for the Gaussian joint mean/variance criterion, plus the closed-form
//! scalar results for the constant-input special case.
//!
//! For `y_t ~ N(mu_t(theta), C_t(theta))` the per-sample-averaged information
//! is
//!
//! ```text
//! I = (1/N) sum_t [ (1/C_t) dmu dmu' + (1/(2 C_t^2)) dC dC' ],
//! ```
//!
//! and under the true (generally non-Gaussian) output distribution the score
//! covariance replaces the `1/2` by `kappa_t/2`, giving the sandwich
//! `AsCov = I^{-1} J I^{-1}` for the normalized estimate.

use nalgebra::DMatrix;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::likelihood::{meanvar, MeanVarKind, MeanVarSequence};
use crate::moments;
use crate::poly;
use crate::sensor::PolynomialSensor;
use crate::system::{fir_outputs, WienerModel};

const MAX_CONDITION: f64 = 1e12;

/// Where the kurtosis factor comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KappaSource {
    /// From the exact residual `h(z+v) + e - mu` (default).
    #[default]
    True,
    /// From the second-order model residual `h'v + h''(v^2 - var_v)/2 + e`.
    Model,
    /// Forced to one (Gaussian assumption), so `AsCov = CRLB`.
    One,
}

/// Fisher analysis summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FisherReport {
    /// Per-sample-averaged information matrix of the model family.
    #[serde(serialize_with = "ser_matrix")]
    pub fim: DMatrix<f64>,
    /// Score covariance `J` under the true output distribution.
    #[serde(serialize_with = "ser_matrix")]
    pub score_cov: DMatrix<f64>,
    /// `fim^{-1}`.
    #[serde(serialize_with = "ser_matrix")]
    pub crlb: DMatrix<f64>,
    /// Sandwich `fim^{-1} J fim^{-1}`.
    #[serde(serialize_with = "ser_matrix")]
    pub ascov: DMatrix<f64>,
    /// `J / fim` in the scalar case.
    pub gamma: Option<f64>,
    /// Smallest and largest per-sample kurtosis factor.
    pub kappa_range: (f64, f64),
    /// Whether `crlb` is a genuine Cramer-Rao bound: true only when the model
    /// family is exact (linear sensor, or quadratic sensor under the
    /// second-order/conditional-mean parametrizations). Otherwise `fim` is
    /// approximation-model information, not a bound.
    pub crlb_is_bound: bool,
}

impl FisherReport {
    /// `sqrt(ascov / n)` for scalar models: the asymptotic normalized
    /// standard deviation at sample size `n`.
    pub fn normalized_std(&self, n: usize) -> Option<f64> {
        if self.ascov.nrows() == 1 {
            Some((self.ascov[(0, 0)] / n as f64).sqrt())
        } else {
            None
        }
    }
}

fn ser_matrix<S: Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = s.serialize_seq(Some(m.nrows()))?;
    for i in 0..m.nrows() {
        let row: Vec<f64> = (0..m.ncols()).map(|j| m[(i, j)]).collect();
        seq.serialize_element(&row)?;
    }
    seq.end()
}

/// Gaussian-criterion information matrix, averaged per sample.
pub fn fim_gaussian(seq: &MeanVarSequence) -> Result<DMatrix<f64>> {
    weighted_information(seq, |_| 1.0)
}

/// Score covariance under the true distribution: the variance term carries
/// the per-sample kurtosis factor. Equals [`fim_gaussian`] when all
/// `kappa_t = 1`.
pub fn score_cov(seq: &MeanVarSequence, kappas: &[f64]) -> Result<DMatrix<f64>> {
    if kappas.len() != seq.means.len() {
        return Err(Error::InvalidArgument(format!(
            "{} kappas for {} samples",
            kappas.len(),
            seq.means.len()
        )));
    }
    if kappas.iter().any(|&k| !(k >= 0.0)) {
        return Err(Error::InvalidArgument("kappas must be nonnegative".into()));
    }
    weighted_information(seq, |t| kappas[t])
}

fn weighted_information<F: Fn(usize) -> f64>(
    seq: &MeanVarSequence,
    kappa: F,
) -> Result<DMatrix<f64>> {
    let grads = seq
        .gradients
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("sequence carries no gradients".into()))?;
    let n = seq.means.len();
    let dim = grads.dmean.first().map_or(0, Vec::len);
    let mut acc = DMatrix::zeros(dim, dim);
    for t in 0..n {
        let c = seq.variances[t];
        if c <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "nonpositive model variance {c} at sample {}",
                t + 1
            )));
        }
        let w_var = kappa(t) / (2.0 * c * c);
        let dmu = &grads.dmean[t];
        let dc = &grads.dvar[t];
        for i in 0..dim {
            for j in 0..dim {
                acc[(i, j)] += dmu[i] * dmu[j] / c + w_var * dc[i] * dc[j];
            }
        }
    }
    Ok(acc / n as f64)
}

/// Inverse of a symmetric positive-definite matrix with a condition check.
fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = m.clone().symmetric_eigen();
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(min > 0.0) || max / min > MAX_CONDITION {
        return Err(Error::SingularInformation(format!(
            "eigenvalue range [{min}, {max}]"
        )));
    }
    nalgebra::Cholesky::new(m.clone())
        .map(|ch| ch.inverse())
        .ok_or_else(|| Error::SingularInformation("Cholesky factorization failed".into()))
}

/// Sandwich covariance `fim^{-1} score_cov fim^{-1}`, symmetrized.
pub fn sandwich(fim: &DMatrix<f64>, score_cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let inv = spd_inverse(fim)?;
    let raw = &inv * score_cov * &inv;
    Ok(0.5 * (&raw + raw.transpose()))
}

/// Information of the first-order Gauss approximation:
/// `h'^2 / C + 2 [var_v h' h'' / C]^2` with `C = var_e + h'^2 var_v`.
pub fn fim_result1(
    sensor: &PolynomialSensor,
    m0: f64,
    var_v: f64,
    var_e: f64,
) -> Result<f64> {
    let h1 = sensor.eval(m0, 1)?;
    let h2 = sensor.eval(m0, 2)?;
    let c = var_e + h1 * h1 * var_v;
    if c <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "first-order variance {c}"
        )));
    }
    let ratio = var_v * h1 * h2 / c;
    Ok(h1 * h1 / c + 2.0 * ratio * ratio)
}

/// Information of the inverse-sensor first-order approximation:
/// `1 / (var_v + var_e / h'^2) + 2 [var_e h'' / (h' C)]^2`.
pub fn fim_result2(
    sensor: &PolynomialSensor,
    m0: f64,
    var_v: f64,
    var_e: f64,
) -> Result<f64> {
    let h1 = sensor.eval(m0, 1)?;
    let h2 = sensor.eval(m0, 2)?;
    if h1 == 0.0 {
        return Err(Error::DegenerateDistribution(
            "zero sensor gain at the operating point".into(),
        ));
    }
    let c = var_e + h1 * h1 * var_v;
    if c <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "first-order variance {c}"
        )));
    }
    let ratio = var_e * h2 / (h1 * c);
    Ok(1.0 / (var_v + var_e / (h1 * h1)) + 2.0 * ratio * ratio)
}

/// Information of the second-order Gauss approximation:
/// numerators `[h' + h''' var_v/2]^2` and `2 [h'' var_v (h' + h''' var_v/2)]^2`
/// over `C = var_e + h'^2 var_v + h''^2 var_v^2 / 2`.
pub fn fim_result3(
    sensor: &PolynomialSensor,
    m0: f64,
    var_v: f64,
    var_e: f64,
) -> Result<f64> {
    let h1 = sensor.eval(m0, 1)?;
    let h2 = sensor.eval(m0, 2)?;
    let h3 = sensor.eval(m0, 3)?;
    let c = var_e + h1 * h1 * var_v + 0.5 * h2 * h2 * var_v * var_v;
    if c <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "second-order variance {c}"
        )));
    }
    let mu1 = h1 + 0.5 * h3 * var_v;
    let ratio = h2 * var_v * mu1 / c;
    Ok(mu1 * mu1 / c + 2.0 * ratio * ratio)
}

/// Scalar sandwich analysis of the conditional-mean-predictor model at `m0`.
///
/// The model is `y ~ (mu(m), C(m))` with the exact conditional mean and
/// variance (for quadratic sensors these coincide with the second-order
/// model, so the information equals [`fim_result3`]). The score covariance
/// carries the kurtosis factor from the chosen [`KappaSource`], and
/// `AsCov = J / FIM^2 = gamma / FIM`.
///
/// With `eq45_variant`, the variance term of both `FIM` and `J` is divided by
/// `var_v`, reproducing a published closed form for the quadratic sensor that
/// carries `4 var_v` where the general expression yields `4 var_v^2`. The two
/// coincide at `var_v = 1`.
pub fn fim_result4(
    sensor: &PolynomialSensor,
    m0: f64,
    var_v: f64,
    var_e: f64,
    kappa_source: KappaSource,
    eq45_variant: bool,
) -> Result<FisherReport> {
    let model = WienerModel::scalar(m0, sensor.clone(), var_v, var_e)?;
    let (mean_poly, var_poly) = moments::conditional_polys(sensor, var_v);
    let c = poly::eval(&var_poly, m0) + var_e;
    if c <= 0.0 {
        return Err(Error::DegenerateDistribution(format!(
            "predictor variance {c}"
        )));
    }
    let mu1 = poly::eval(&poly::derivative(&mean_poly), m0);
    let c1 = poly::eval(&poly::derivative(&var_poly), m0);
    let mean_term = mu1 * mu1 / c;
    let mut var_term = c1 * c1 / (2.0 * c * c);
    if eq45_variant {
        var_term = if var_v > 0.0 { var_term / var_v } else { 0.0 };
    }

    let kappa = kappa_at(&model, m0, kappa_source)?;
    let fim = mean_term + var_term;
    let j = mean_term + kappa * var_term;
    if fim <= 0.0 {
        return Err(Error::SingularInformation(format!("scalar information {fim}")));
    }
    Ok(FisherReport {
        fim: DMatrix::from_element(1, 1, fim),
        score_cov: DMatrix::from_element(1, 1, j),
        crlb: DMatrix::from_element(1, 1, 1.0 / fim),
        ascov: DMatrix::from_element(1, 1, j / (fim * fim)),
        gamma: Some(j / fim),
        kappa_range: (kappa, kappa),
        crlb_is_bound: sensor.degree() <= 2,
    })
}

/// Kurtosis factor at linear output `z` for the chosen source, paired with
/// the matching model variance.
fn kappa_at(model: &WienerModel, z: f64, source: KappaSource) -> Result<f64> {
    match source {
        KappaSource::One => Ok(1.0),
        KappaSource::True => Ok(moments::fourth_and_kappa(model, z)?.kappa),
        KappaSource::Model => {
            let h1 = model.sensor.eval(z, 1)?;
            let h2 = model.sensor.eval(z, 2)?;
            let s = model.var_v;
            // w(v) = h1 v + (h2/2)(v^2 - s)
            let w = vec![-0.5 * h2 * s, h1, 0.5 * h2];
            let c2 = model.var_e + h1 * h1 * s + 0.5 * h2 * h2 * s * s;
            if c2 <= 0.0 {
                return Err(Error::DegenerateDistribution(format!(
                    "second-order variance {c2}"
                )));
            }
            let w2 = poly::mul(&w, &w);
            let w4 = poly::mul(&w2, &w2);
            let e_w2 = poly::gaussian_expectation(&w2, s);
            let e_w4 = poly::gaussian_expectation(&w4, s);
            let e2 = e_w2 + model.var_e;
            let e4 = e_w4 + 6.0 * e_w2 * model.var_e + 3.0 * model.var_e * model.var_e;
            let d = e4 - 2.0 * c2 * e2 + c2 * c2;
            Ok(d / (2.0 * c2 * c2))
        }
    }
}

/// Assemble the full Fisher analysis of a FIR Wiener model at `theta0` for
/// the chosen mean/variance parametrization.
///
/// Gradients come from the analytic chain rule through `z_t`; per-sample
/// kurtosis factors pair the chosen source's fourth moment with the
/// parametrization's own mean and variance.
pub fn fisher_report(
    model: &WienerModel,
    theta0: &[f64],
    u: &[f64],
    kind: MeanVarKind,
    kappa_source: KappaSource,
) -> Result<FisherReport> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("empty input signal".into()));
    }
    let seq = meanvar(model, kind, theta0, u);
    let z = fir_outputs(theta0, u);
    let mut kappas = Vec::with_capacity(u.len());
    for (t, &zt) in z.iter().enumerate() {
        let k = match kappa_source {
            KappaSource::One => 1.0,
            KappaSource::Model => kappa_at(model, zt, KappaSource::Model)?,
            KappaSource::True => {
                let mu = seq.means[t];
                let c = seq.variances[t];
                if c <= 0.0 {
                    return Err(Error::DegenerateDistribution(format!(
                        "model variance {c} at sample {}",
                        t + 1
                    )));
                }
                let d = moments::fourth_central_about(model, zt, mu, c);
                d / (2.0 * c * c)
            }
        };
        kappas.push(k);
    }

    let fim = fim_gaussian(&seq)?;
    let j = score_cov(&seq, &kappas)?;
    let crlb = spd_inverse(&fim)?;
    let ascov = sandwich(&fim, &j)?;
    let gamma = if fim.nrows() == 1 {
        Some(j[(0, 0)] / fim[(0, 0)])
    } else {
        None
    };
    let (mut k_min, mut k_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &k in &kappas {
        k_min = k_min.min(k);
        k_max = k_max.max(k);
    }
    let exact_family = model.sensor.degree() <= 1
        || (model.sensor.degree() == 2
            && matches!(kind, MeanVarKind::Gauss2 | MeanVarKind::Cmp));
    Ok(FisherReport {
        fim,
        score_cov: j,
        crlb,
        ascov,
        gamma,
        kappa_range: (k_min, k_max),
        crlb_is_bound: exact_family,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::MeanVarGradients;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_seq(dmean: f64, dvar: f64, c: f64, n: usize) -> MeanVarSequence {
        MeanVarSequence {
            means: vec![0.0; n],
            variances: vec![c; n],
            gradients: Some(MeanVarGradients {
                dmean: vec![vec![dmean]; n],
                dvar: vec![vec![dvar]; n],
            }),
        }
    }

    #[test]
    fn fim_classical_gaussian_mean() {
        let seq = scalar_seq(1.0, 0.0, 0.25, 10);
        let fim = fim_gaussian(&seq).unwrap();
        assert_relative_eq!(fim[(0, 0)], 4.0, max_relative = 1e-14);
    }

    #[test]
    fn fim_variance_only_information() {
        let c = 0.8;
        let dc = 0.3;
        let seq = scalar_seq(0.0, dc, c, 7);
        let fim = fim_gaussian(&seq).unwrap();
        assert_relative_eq!(fim[(0, 0)], dc * dc / (2.0 * c * c), max_relative = 1e-14);
    }

    #[test]
    fn fim_gauss1_quadratic_example() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), 0.1, 0.1).unwrap();
        let seq = meanvar(&model, MeanVarKind::Gauss1, &[1.0], &[1.0; 5]);
        let fim = fim_gaussian(&seq).unwrap();
        assert_relative_eq!(fim[(0, 0)], 5.5, max_relative = 1e-12);
    }

    #[test]
    fn score_cov_kappa_one_equals_fim() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::cubic(), 0.5, 0.5).unwrap();
        let seq = meanvar(&model, MeanVarKind::Cmp, &[1.0], &[1.0; 4]);
        let fim = fim_gaussian(&seq).unwrap();
        let j = score_cov(&seq, &[1.0; 4]).unwrap();
        assert_relative_eq!(fim[(0, 0)], j[(0, 0)], max_relative = 1e-14);
    }

    #[test]
    fn score_cov_kappa_zero_keeps_mean_term() {
        let seq = scalar_seq(2.0, 0.7, 0.5, 3);
        let j = score_cov(&seq, &[0.0; 3]).unwrap();
        assert_relative_eq!(j[(0, 0)], 4.0 / 0.5, max_relative = 1e-14);
    }

    #[test]
    fn sandwich_scalar_cases() {
        let two = DMatrix::from_element(1, 1, 2.0);
        let s = sandwich(&two, &two).unwrap();
        assert_relative_eq!(s[(0, 0)], 0.5, max_relative = 1e-14);

        let fim = DMatrix::from_element(1, 1, 0.72);
        let j = DMatrix::from_element(1, 1, 1.104);
        let s = sandwich(&fim, &j).unwrap();
        assert_relative_eq!(s[(0, 0)], 1.104 / (0.72 * 0.72), max_relative = 1e-12);

        let eye = DMatrix::<f64>::identity(3, 3);
        let s = sandwich(&eye, &eye).unwrap();
        assert_relative_eq!((s - eye).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn sandwich_rejects_singular_information() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(
            sandwich(&m, &m),
            Err(Error::SingularInformation(_))
        ));
    }

    #[test]
    fn result1_examples() {
        let lin = PolynomialSensor::linear(1.0);
        assert_relative_eq!(fim_result1(&lin, 1.0, 1.0, 1.0).unwrap(), 0.5);
        let quad = PolynomialSensor::quadratic();
        assert_relative_eq!(
            fim_result1(&quad, 1.0, 0.1, 0.1).unwrap(),
            5.5,
            max_relative = 1e-12
        );
        // No curvature: reduces to the linear information.
        let lin3 = PolynomialSensor::linear(3.0);
        assert_relative_eq!(
            fim_result1(&lin3, 0.7, 0.4, 0.2).unwrap(),
            9.0 / (0.2 + 9.0 * 0.4),
            max_relative = 1e-14
        );
    }

    #[test]
    fn result2_examples() {
        let lin = PolynomialSensor::linear(1.0);
        assert_relative_eq!(fim_result2(&lin, 1.0, 1.0, 1.0).unwrap(), 0.5);
        // var_e -> 0 recovers the inverse-sensor bound 1/var_v.
        let cub = PolynomialSensor::cubic();
        assert_relative_eq!(
            fim_result2(&cub, 1.0, 0.3, 0.0).unwrap(),
            1.0 / 0.3,
            max_relative = 1e-12
        );
        let quad = PolynomialSensor::quadratic();
        assert!(matches!(
            fim_result2(&quad, 0.0, 0.5, 0.5),
            Err(Error::DegenerateDistribution(_))
        ));
    }

    #[test]
    fn results_agree_when_noise_contributions_match() {
        // FIM2 = FIM1 exactly when var_e = h'(m0)^2 var_v.
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        for _ in 0..50 {
            let coeffs: Vec<f64> = (0..=rng.gen_range(1..=4usize))
                .map(|_| rng.gen_range(-1.5..1.5))
                .collect();
            let sensor = match PolynomialSensor::new(coeffs) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let m0 = rng.gen_range(-1.5..1.5);
            let h1: f64 = sensor.eval(m0, 1).unwrap();
            if h1.abs() < 1e-3 {
                continue;
            }
            let var_v = rng.gen_range(0.05..1.0);
            let var_e = h1 * h1 * var_v;
            let f1 = fim_result1(&sensor, m0, var_v, var_e).unwrap();
            let f2 = fim_result2(&sensor, m0, var_v, var_e).unwrap();
            assert_relative_eq!(f1, f2, max_relative = 1e-10);
        }
    }

    #[test]
    fn result3_reductions_and_values() {
        let lin = PolynomialSensor::linear(2.0);
        assert_relative_eq!(
            fim_result3(&lin, 0.5, 0.3, 0.1).unwrap(),
            fim_result1(&lin, 0.5, 0.3, 0.1).unwrap(),
            max_relative = 1e-14
        );
        let quad = PolynomialSensor::quadratic();
        assert_relative_eq!(
            fim_result3(&quad, 1.0, 1.0, 1.0).unwrap(),
            0.72,
            max_relative = 1e-12
        );
    }

    #[test]
    fn result3_matches_gauss2_assembly_on_random_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        for _ in 0..100 {
            let coeffs: Vec<f64> = (0..=rng.gen_range(1..=5usize))
                .map(|_| rng.gen_range(-1.2..1.2))
                .collect();
            let sensor = match PolynomialSensor::new(coeffs) {
                Ok(s) => s,
                Err(_) => continue,
            };
            let m0 = rng.gen_range(-1.5..1.5);
            let var_v = rng.gen_range(0.05..1.5);
            let var_e = rng.gen_range(0.05..1.5);
            let model = WienerModel::scalar(m0, sensor.clone(), var_v, var_e).unwrap();
            let formula = fim_result3(&sensor, m0, var_v, var_e).unwrap();
            let seq = meanvar(&model, MeanVarKind::Gauss2, &[m0], &[1.0; 3]);
            let assembled = fim_gaussian(&seq).unwrap()[(0, 0)];
            assert_relative_eq!(formula, assembled, max_relative = 1e-10);
        }
    }

    #[test]
    fn result4_linear_sensor_has_unit_gamma() {
        let rep = fim_result4(
            &PolynomialSensor::linear(1.3),
            0.8,
            0.4,
            0.2,
            KappaSource::True,
            false,
        )
        .unwrap();
        assert_relative_eq!(rep.gamma.unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(rep.ascov[(0, 0)], rep.crlb[(0, 0)], max_relative = 1e-10);
    }

    #[test]
    fn result4_quadratic_chain_at_unit_noise() {
        let rep = fim_result4(
            &PolynomialSensor::quadratic(),
            1.0,
            1.0,
            1.0,
            KappaSource::True,
            false,
        )
        .unwrap();
        assert_relative_eq!(rep.fim[(0, 0)], 0.72, max_relative = 1e-12);
        assert_relative_eq!(rep.kappa_range.0, 2.2, max_relative = 1e-12);
        assert_relative_eq!(rep.score_cov[(0, 0)], 1.104, max_relative = 1e-12);
        assert_relative_eq!(rep.ascov[(0, 0)], 1.104 / 0.5184, max_relative = 1e-12);
        let std = rep.normalized_std(1000).unwrap();
        assert!((std - 0.0461).abs() < 0.0461 * 0.01, "std = {std}");
    }

    #[test]
    fn result4_cubic_normalized_std_small_noise() {
        let rep = fim_result4(
            &PolynomialSensor::cubic(),
            1.0,
            0.1,
            0.1,
            KappaSource::True,
            false,
        )
        .unwrap();
        let std = rep.normalized_std(1000).unwrap();
        assert!((std - 0.0133).abs() < 0.0133 * 0.03, "std = {std}");
    }

    #[test]
    fn result4_cubic_gamma_order_of_magnitude() {
        let rep = fim_result4(
            &PolynomialSensor::cubic(),
            1.0,
            1.0,
            1.0,
            KappaSource::True,
            false,
        )
        .unwrap();
        let gamma = rep.gamma.unwrap();
        assert!((gamma - 7.9).abs() < 0.1, "gamma = {gamma}");
        assert!(gamma >= 1.0 && gamma <= 8.0);
    }

    #[test]
    fn fisher_report_cmp_matches_result4_for_quadratic() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), 0.5, 0.5).unwrap();
        let rep = fisher_report(&model, &[1.0], &[1.0; 8], MeanVarKind::Cmp, KappaSource::True)
            .unwrap();
        let want = fim_result4(
            &PolynomialSensor::quadratic(),
            1.0,
            0.5,
            0.5,
            KappaSource::True,
            false,
        )
        .unwrap();
        assert_relative_eq!(rep.fim[(0, 0)], want.fim[(0, 0)], max_relative = 1e-12);
        assert_relative_eq!(
            rep.ascov[(0, 0)],
            want.ascov[(0, 0)],
            max_relative = 1e-12
        );
        assert!(rep.crlb_is_bound);
    }

    #[test]
    fn fisher_report_fir_linear_matches_input_covariance() {
        // Linear sensor: FIM = R_u / (var_e + var_v) with R_u the empirical
        // input covariance over the FIR regressor.
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let n = 20_000;
        let u: Vec<f64> = (0..n)
            .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
            .collect();
        let theta = [1.0, 0.5];
        let model =
            WienerModel::new(theta.to_vec(), PolynomialSensor::linear(1.0), 1.0, 1.0).unwrap();
        let rep = fisher_report(&model, &theta, &u, MeanVarKind::Gauss1, KappaSource::True)
            .unwrap();
        // Unit-power white input: R_u ~ identity.
        assert_relative_eq!(rep.fim[(0, 0)], 0.5, max_relative = 0.02);
        assert_relative_eq!(rep.fim[(1, 1)], 0.5, max_relative = 0.02);
        assert!(rep.fim[(0, 1)].abs() < 0.02);
        assert_relative_eq!(rep.gamma.unwrap_or(1.0), 1.0, max_relative = 1e-9);
    }

    #[test]
    fn fisher_report_kappa_one_gives_crlb() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::cubic(), 0.5, 0.5).unwrap();
        let rep = fisher_report(&model, &[1.0], &[1.0; 5], MeanVarKind::Cmp, KappaSource::One)
            .unwrap();
        assert_relative_eq!(
            rep.ascov[(0, 0)],
            rep.crlb[(0, 0)],
            max_relative = 1e-12
        );
        assert!(!rep.crlb_is_bound);
    }

    #[test]
    fn information_never_below_mean_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(81);
        for _ in 0..60 {
            let sensor = match rng.gen_range(0..3) {
                0 => PolynomialSensor::linear(rng.gen_range(0.3..2.0)),
                1 => PolynomialSensor::quadratic(),
                _ => PolynomialSensor::cubic(),
            };
            let m0 = rng.gen_range(0.3..1.5);
            let var_v = rng.gen_range(0.05..1.0);
            let var_e = rng.gen_range(0.05..1.0);
            let h1: f64 = sensor.eval(m0, 1).unwrap();
            let c1 = var_e + h1 * h1 * var_v;
            let mean_term_1 = h1 * h1 / c1;
            assert!(fim_result1(&sensor, m0, var_v, var_e).unwrap() >= mean_term_1 - 1e-12);
            let mean_term_2 = 1.0 / (var_v + var_e / (h1 * h1));
            assert!(fim_result2(&sensor, m0, var_v, var_e).unwrap() >= mean_term_2 - 1e-12);
        }
    }

    #[test]
    fn gamma_is_one_iff_kappa_is_one() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), 0.5, 0.5).unwrap();
        let rep = fisher_report(&model, &[1.0], &[1.0; 5], MeanVarKind::Cmp, KappaSource::True)
            .unwrap();
        assert!(rep.kappa_range.0 > 1.0 + 1e-9);
        assert!(rep.gamma.unwrap() > 1.0 + 1e-9);

        let lin = WienerModel::scalar(1.0, PolynomialSensor::linear(1.0), 0.5, 0.5).unwrap();
        let rep = fisher_report(&lin, &[1.0], &[1.0; 5], MeanVarKind::Cmp, KappaSource::True)
            .unwrap();
        assert!((rep.kappa_range.1 - 1.0).abs() < 1e-9);
        assert!((rep.gamma.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        // Criterion-style gradient cross-check over random FIR/sensor configs.
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..100 {
            let nb = rng.gen_range(1..=3usize);
            let theta: Vec<f64> = (0..nb).map(|_| rng.gen_range(-1.0..1.5)).collect();
            let sensor = match rng.gen_range(0..4) {
                0 => PolynomialSensor::linear(rng.gen_range(0.5..2.0)),
                1 => PolynomialSensor::quadratic(),
                2 => PolynomialSensor::cubic(),
                _ => PolynomialSensor::new(vec![
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(0.5..1.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.3..0.3),
                ])
                .unwrap(),
            };
            let model = WienerModel::new(
                theta.clone(),
                sensor,
                rng.gen_range(0.05..1.0),
                rng.gen_range(0.05..1.0),
            )
            .unwrap();
            let n = 12;
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let kind = match rng.gen_range(0..3) {
                0 => MeanVarKind::Gauss1,
                1 => MeanVarKind::Gauss2,
                _ => MeanVarKind::Cmp,
            };
            let seq = meanvar(&model, kind, &theta, &u);
            let grads = seq.gradients.as_ref().unwrap();
            for j in 0..nb {
                let h = 1e-6 * theta[j].abs().max(1.0);
                let mut tp = theta.clone();
                tp[j] += h;
                let mut tm = theta.clone();
                tm[j] -= h;
                let sp = meanvar(&model, kind, &tp, &u);
                let sm = meanvar(&model, kind, &tm, &u);
                for t in 0..n {
                    let dmu_num = (sp.means[t] - sm.means[t]) / (2.0 * h);
                    let dc_num = (sp.variances[t] - sm.variances[t]) / (2.0 * h);
                    assert_relative_eq!(
                        grads.dmean[t][j],
                        dmu_num,
                        max_relative = 1e-5,
                        epsilon = 1e-7
                    );
                    assert_relative_eq!(
                        grads.dvar[t][j],
                        dc_num,
                        max_relative = 1e-5,
                        epsilon = 1e-7
                    );
                }
            }
        }
    }

    #[test]
    fn report_serializes_matrices_as_rows() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), 0.5, 0.5).unwrap();
        let rep = fisher_report(&model, &[1.0], &[1.0; 3], MeanVarKind::Cmp, KappaSource::True)
            .unwrap();
        let json: serde_json::Value = serde_json::to_value(&rep).unwrap();
        assert!(json["fim"][0][0].is_f64());
        assert!(json["gamma"].is_f64());
    }

    #[test]
    fn result4_model_kappa_matches_true_for_quadratic() {
        // The second-order model is exact for quadratic sensors, so both
        // kappa sources agree there.
        let a = fim_result4(
            &PolynomialSensor::quadratic(),
            1.0,
            0.5,
            0.5,
            KappaSource::True,
            false,
        )
        .unwrap();
        let b = fim_result4(
            &PolynomialSensor::quadratic(),
            1.0,
            0.5,
            0.5,
            KappaSource::Model,
            false,
        )
        .unwrap();
        assert_relative_eq!(a.kappa_range.0, b.kappa_range.0, max_relative = 1e-12);
    }

    #[test]
    fn result4_eq45_variant_coincides_at_unit_variance() {
        let a = fim_result4(
            &PolynomialSensor::quadratic(),
            1.0,
            1.0,
            1.0,
            KappaSource::True,
            false,
        )
        .unwrap();
        let b = fim_result4(
            &PolynomialSensor::quadratic(),
            1.0,
            1.0,
            1.0,
            KappaSource::True,
            true,
        )
        .unwrap();
        assert_relative_eq!(a.ascov[(0, 0)], b.ascov[(0, 0)], max_relative = 1e-12);
    }
}
