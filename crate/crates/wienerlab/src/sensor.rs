//! Static polynomial sensor nonlinearities.
//!
//! The sensor `h` is a polynomial of degree at most 8, which keeps all
//! Gaussian output moments in closed form and provides the analytic
//! derivatives `h'`, `h''`, `h'''` that the information-matrix results need.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::poly;

/// Highest admissible polynomial degree.
pub const MAX_DEGREE: usize = 8;

/// Highest derivative order evaluable through [`PolynomialSensor::eval`].
pub const MAX_DERIVATIVE: usize = 3;

const INVERSE_GRID: usize = 1024;

/// A polynomial sensor `h(x) = sum c_j x^j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSensor {
    coefficients: Vec<f64>,
    label: Option<String>,
}

impl PolynomialSensor {
    /// Build a sensor from ascending coefficients `c_0..c_d`.
    ///
    /// Trailing zero coefficients are trimmed so the stored degree matches
    /// the leading nonzero term; the all-zero input is the zero polynomial.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::InvalidArgument(
                "sensor needs at least one coefficient".into(),
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(
                "sensor coefficients must be finite".into(),
            ));
        }
        let mut coefficients = coefficients;
        while coefficients.len() > 1 && *coefficients.last().unwrap() == 0.0 {
            coefficients.pop();
        }
        if coefficients.len() - 1 > MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "sensor degree {} exceeds maximum {MAX_DEGREE}",
                coefficients.len() - 1
            )));
        }
        Ok(Self { coefficients, label: None })
    }

    /// `h(x) = gain * x`.
    pub fn linear(gain: f64) -> Self {
        Self {
            coefficients: if gain == 0.0 { vec![0.0] } else { vec![0.0, gain] },
            label: Some("linear".into()),
        }
    }

    /// `h(x) = x^2 / 2`.
    pub fn quadratic() -> Self {
        Self {
            coefficients: vec![0.0, 0.0, 0.5],
            label: Some("quadratic".into()),
        }
    }

    /// `h(x) = x^3 / 3`.
    pub fn cubic() -> Self {
        Self {
            coefficients: vec![0.0, 0.0, 0.0, 1.0 / 3.0],
            label: Some("cubic".into()),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Evaluate the sensor or one of its first three derivatives at `x`.
    ///
    /// Derivative orders above the degree return exactly zero.
    pub fn eval(&self, x: f64, derivative_order: usize) -> Result<f64> {
        if derivative_order > MAX_DERIVATIVE {
            return Err(Error::InvalidArgument(format!(
                "derivative order must be in 0..={MAX_DERIVATIVE}, got {derivative_order}"
            )));
        }
        if derivative_order > self.degree() {
            return Ok(0.0);
        }
        let mut coeffs = self.coefficients.clone();
        for _ in 0..derivative_order {
            coeffs = poly::derivative(&coeffs);
        }
        Ok(poly::eval(&coeffs, x))
    }

    /// Direction of strict monotonicity on `[lo, hi]`: `1.0` for increasing,
    /// `-1.0` for decreasing.
    ///
    /// The derivative sign is sampled on a 1024-point grid; isolated zeros of
    /// `h'` (like the cubic's `h'(0) = 0`) keep `h` strictly monotone and are
    /// accepted, while a sign change rejects. For derivative degree <= 2 the
    /// real crossings of `h'` are additionally checked against the interior
    /// of the bracket, so an even-sensor dip cannot hide between grid points.
    pub fn monotone_direction(&self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!(
                "bracket must satisfy lo < hi, got [{lo}, {hi}]"
            )));
        }
        let deriv = poly::derivative(&self.coefficients);
        let mut sign = 0.0f64;
        for i in 0..INVERSE_GRID {
            let x = lo + (hi - lo) * i as f64 / (INVERSE_GRID - 1) as f64;
            let d = poly::eval(&deriv, x);
            if d == 0.0 {
                continue;
            }
            let s = d.signum();
            if sign == 0.0 {
                sign = s;
            } else if s != sign {
                return Err(Error::NonInvertible(format!(
                    "derivative changes sign inside [{lo}, {hi}]"
                )));
            }
        }
        if sign == 0.0 {
            return Err(Error::NonInvertible(format!(
                "sensor is constant on [{lo}, {hi}]"
            )));
        }
        for root in derivative_sign_crossings(&deriv) {
            if root > lo && root < hi {
                return Err(Error::NonInvertible(format!(
                    "derivative changes sign at x = {root}"
                )));
            }
        }
        Ok(sign)
    }

    /// Solve `h(x) = y` on the bracket by bisection refined with Newton
    /// steps, to `|h(x) - y| <= 1e-12 max(1, |y|)`.
    pub fn inverse(&self, y: f64, bracket: (f64, f64)) -> Result<f64> {
        let (lo, hi) = bracket;
        let dir = self.monotone_direction(lo, hi)?;
        let f_lo = poly::eval(&self.coefficients, lo);
        let f_hi = poly::eval(&self.coefficients, hi);
        let (y_min, y_max) = if dir > 0.0 { (f_lo, f_hi) } else { (f_hi, f_lo) };
        if y < y_min || y > y_max {
            return Err(Error::OutOfRange(format!(
                "target {y} outside sensor image [{y_min}, {y_max}] of bracket [{lo}, {hi}]"
            )));
        }

        let x = self.solve_monotone(y, lo, hi, dir);
        let tol = 1e-12 * y.abs().max(1.0);
        let r = poly::eval(&self.coefficients, x) - y;
        if r.abs() <= tol {
            Ok(x)
        } else {
            Err(Error::Evaluation(format!(
                "inverse iteration did not reach tolerance for target {y}"
            )))
        }
    }

    /// Root of `h(x) = y` on `[lo, hi]`, assuming the target lies in the
    /// image and `h` is monotone with direction `dir`. Newton steps refine a
    /// maintained sign-change interval; a step that leaves the interval or
    /// fails to shrink it falls back to bisection, and iteration runs to
    /// interval convergence so the abscissa stays accurate even where the
    /// derivative is small.
    pub(crate) fn solve_monotone(&self, y: f64, lo: f64, hi: f64, dir: f64) -> f64 {
        let deriv = poly::derivative(&self.coefficients);
        let (mut a, mut b) = if dir > 0.0 { (lo, hi) } else { (hi, lo) };
        let mut x = 0.5 * (a + b);
        let mut width = (b - a).abs();
        let mut result = x;
        for _ in 0..300 {
            let r = poly::eval(&self.coefficients, x) - y;
            if r == 0.0 {
                return x;
            }
            if r * dir > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let new_width = (b - a).abs();
            if new_width <= 2.0 * f64::EPSILON * a.abs().max(b.abs()).max(1.0) {
                result = 0.5 * (a + b);
                break;
            }
            let d = poly::eval(&deriv, x);
            let newton = x - r / d;
            let (left, right) = (a.min(b), a.max(b));
            x = if d != 0.0 && newton > left && newton < right && new_width < 0.75 * width {
                newton
            } else {
                0.5 * (a + b)
            };
            width = new_width;
            result = x;
        }
        result
    }
}

/// Points where a polynomial of degree <= 2 crosses zero with a sign change.
/// A double root (nonnegative or nonpositive parabola) is not a crossing.
fn derivative_sign_crossings(coeffs: &[f64]) -> Vec<f64> {
    let c = coeffs;
    match c.len() {
        0 | 1 => Vec::new(),
        2 => {
            if c[1] != 0.0 {
                vec![-c[0] / c[1]]
            } else {
                Vec::new()
            }
        }
        3 => {
            let (a, b, c0) = (c[2], c[1], c[0]);
            if a == 0.0 {
                return derivative_sign_crossings(&c[..2]);
            }
            let disc = b * b - 4.0 * a * c0;
            if disc <= 0.0 {
                Vec::new()
            } else {
                let q = -0.5 * (b + disc.sqrt().copysign(b));
                vec![q / a, c0 / q]
            }
        }
        _ => Vec::new(),
    }
}

/// Wire form of a sensor: the generic polynomial plus sugar aliases for the
/// named instances.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SensorSpec {
    Poly {
        coefficients: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    Linear {
        gain: f64,
    },
    Quadratic,
    Cubic,
}

impl Serialize for PolynomialSensor {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SensorSpec::Poly {
            coefficients: self.coefficients.clone(),
            label: self.label.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PolynomialSensor {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let spec = SensorSpec::deserialize(deserializer)?;
        let sensor = match spec {
            SensorSpec::Poly { coefficients, label } => {
                let mut s = PolynomialSensor::new(coefficients).map_err(D::Error::custom)?;
                s.label = label;
                s
            }
            SensorSpec::Linear { gain } => PolynomialSensor::linear(gain),
            SensorSpec::Quadratic => PolynomialSensor::quadratic(),
            SensorSpec::Cubic => PolynomialSensor::cubic(),
        };
        Ok(sensor)
    }
}
