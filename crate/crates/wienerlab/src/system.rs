//! The stochastic Wiener model, seeded simulation, and dataset I/O.
//!
//! The model is `z_t = sum_k g_k u_{t-k} + v_t`, `y_t = h(z_t) + e_t` with
//! white Gaussian `v_t ~ N(0, var_v)` and `e_t ~ N(0, var_e)`. The linear
//! block is FIR with zero initial conditions (`u_j = 0` for `j <= 0`).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensor::PolynomialSensor;

/// A stochastic Wiener model: FIR impulse response, sensor, and noise powers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WienerModel {
    /// FIR impulse response `g_0..g_{nb-1}` of the linear block.
    pub theta: Vec<f64>,
    pub sensor: PolynomialSensor,
    /// Process-noise variance `sigma_v^2`.
    pub var_v: f64,
    /// Measurement-noise variance `sigma_e^2`.
    pub var_e: f64,
}

impl WienerModel {
    pub fn new(
        theta: Vec<f64>,
        sensor: PolynomialSensor,
        var_v: f64,
        var_e: f64,
    ) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidArgument(
                "model needs at least one FIR coefficient".into(),
            ));
        }
        if !(var_v >= 0.0) || !(var_e >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "noise variances must be nonnegative, got var_v = {var_v}, var_e = {var_e}"
            )));
        }
        Ok(Self { theta, sensor, var_v, var_e })
    }

    /// Constant-input scalar special case `G(q, theta) = m`.
    pub fn scalar(m: f64, sensor: PolynomialSensor, var_v: f64, var_e: f64) -> Result<Self> {
        Self::new(vec![m], sensor, var_v, var_e)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Io(format!("model JSON: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_json(&text)
    }
}

impl<'de> Deserialize<'de> for WienerModel {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            theta: Vec<f64>,
            sensor: PolynomialSensor,
            var_v: f64,
            var_e: f64,
        }
        let raw = Raw::deserialize(deserializer)?;
        WienerModel::new(raw.theta, raw.sensor, raw.var_v, raw.var_e)
            .map_err(serde::de::Error::custom)
    }
}

/// An input/output record, with the generation seed when simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(u: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if u.is_empty() || u.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "u and y must have equal nonzero length, got {} and {}",
                u.len(),
                y.len()
            )));
        }
        Ok(Self { u, y, seed: None })
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Write as CSV with header `t,u,y`; values use the shortest
    /// representation that round-trips the exact double.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,u,y")?;
        for (i, (u, y)) in self.u.iter().zip(self.y.iter()).enumerate() {
            writeln!(w, "{},{u},{y}", i + 1)?;
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = fs::File::create(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        self.write_csv(file)
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Io("empty dataset file".into()))??;
        if header.trim() != "t,u,y" {
            return Err(Error::Io(format!(
                "expected dataset header 't,u,y', got '{header}'"
            )));
        }
        let mut u = Vec::new();
        let mut y = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(Error::Io(format!(
                    "line {}: expected 3 columns, got {}",
                    lineno + 2,
                    fields.len()
                )));
            }
            let parse = |s: &str, name: &str| {
                s.trim().parse::<f64>().map_err(|e| {
                    Error::Io(format!("line {}: bad {name} value '{s}': {e}", lineno + 2))
                })
            };
            u.push(parse(fields[1], "u")?);
            y.push(parse(fields[2], "y")?);
        }
        Dataset::new(u, y)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let file = fs::File::open(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::read_csv(BufReader::new(file))
    }
}

/// Noise-free FIR responses `z_t = sum_k g_k u_{t-k}` for `t = 1..=N`,
/// with zero initial conditions.
pub fn fir_outputs(theta: &[f64], u: &[f64]) -> Vec<f64> {
    let mut z = vec![0.0; u.len()];
    for (t, zt) in z.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (k, &g) in theta.iter().enumerate() {
            if k > t {
                break;
            }
            acc += g * u[t - k];
        }
        *zt = acc;
    }
    z
}

/// The noise-free linear output `z_t` at the 1-based sample index `t`.
pub fn linear_output(model: &WienerModel, u: &[f64], t: usize) -> Result<f64> {
    if t == 0 || t > u.len() {
        return Err(Error::InvalidArgument(format!(
            "sample index {t} outside 1..={}",
            u.len()
        )));
    }
    let mut acc = 0.0;
    for (k, &g) in model.theta.iter().enumerate() {
        if k >= t {
            break;
        }
        acc += g * u[t - 1 - k];
    }
    Ok(acc)
}

/// Standard-normal stream: ChaCha8 keyed by the seed, shaped by the
/// Box-Muller transform. Each pair of uniforms yields two normals; the
/// second is cached so consumption order is deterministic.
pub struct NormalStream {
    rng: ChaCha8Rng,
    cache: Option<f64>,
}

impl NormalStream {
    pub fn new(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), cache: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.cache.take() {
            return z;
        }
        // u1 in (0, 1] avoids ln(0).
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2: f64 = self.rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.cache = Some(r * angle.sin());
        r * angle.cos()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

/// Simulate `y_t = h(z_t + v_t) + e_t` for the given input.
///
/// For each sample, `v_t` is drawn first and `e_t` second from the seeded
/// [`NormalStream`], so a (seed, model, u) triple reproduces the dataset
/// bit-exactly within one build.
pub fn simulate(model: &WienerModel, u: &[f64], seed: u64) -> Dataset {
    let z = fir_outputs(&model.theta, u);
    let sd_v = model.var_v.sqrt();
    let sd_e = model.var_e.sqrt();
    let mut stream = NormalStream::new(seed);
    let mut y = Vec::with_capacity(u.len());
    for &zt in &z {
        let v = sd_v * stream.next_normal();
        let e = sd_e * stream.next_normal();
        let h = crate::poly::eval(model.sensor.coefficients(), zt + v);
        y.push(h + e);
    }
    Dataset { u: u.to_vec(), y, seed: Some(seed) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments;

    fn constant_input(n: usize) -> Vec<f64> {
        vec![1.0; n]
    }

    #[test]
    fn constant_model_outputs_m() {
        let model = WienerModel::scalar(0.7, PolynomialSensor::linear(1.0), 0.0, 0.0).unwrap();
        let u = constant_input(5);
        for t in 1..=5 {
            assert_eq!(linear_output(&model, &u, t).unwrap(), 0.7);
        }
    }

    #[test]
    fn impulse_response_readout() {
        let model =
            WienerModel::new(vec![1.0, 2.0], PolynomialSensor::linear(1.0), 0.0, 0.0).unwrap();
        let u = [1.0, 0.0, 0.0];
        assert_eq!(linear_output(&model, &u, 1).unwrap(), 1.0);
        assert_eq!(linear_output(&model, &u, 2).unwrap(), 2.0);
        assert_eq!(linear_output(&model, &u, 3).unwrap(), 0.0);
    }

    #[test]
    fn scaling_single_tap() {
        let model = WienerModel::scalar(0.5, PolynomialSensor::linear(1.0), 0.0, 0.0).unwrap();
        assert_eq!(linear_output(&model, &[4.0], 1).unwrap(), 2.0);
    }

    #[test]
    fn index_out_of_range_rejected() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::linear(1.0), 0.0, 0.0).unwrap();
        assert!(linear_output(&model, &[1.0], 0).is_err());
        assert!(linear_output(&model, &[1.0], 2).is_err());
    }

    #[test]
    fn noiseless_linear_simulation() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::linear(1.0), 0.0, 0.0).unwrap();
        let data = simulate(&model, &constant_input(8), 1);
        assert!(data.y.iter().all(|&y| y == 1.0));
    }

    #[test]
    fn noiseless_quadratic_simulation() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), 0.0, 0.0).unwrap();
        let data = simulate(&model, &constant_input(8), 1);
        assert!(data.y.iter().all(|&y| y == 0.5));
    }

    #[test]
    fn process_noise_mean_through_quadratic() {
        // z = 0, y = v^2/2: E{y} = var_v/2 = 0.5.
        let model = WienerModel::scalar(0.0, PolynomialSensor::quadratic(), 1.0, 0.0).unwrap();
        let n = 1_000_000;
        let data = simulate(&model, &vec![0.0; n], 42);
        let mean = data.y.iter().sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean = {mean}");
    }

    #[test]
    fn simulated_moments_match_predictor() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::cubic(), 0.5, 0.25).unwrap();
        let n = 1_000_000;
        let data = simulate(&model, &constant_input(n), 3);
        let mean = data.y.iter().sum::<f64>() / n as f64;
        let var = data.y.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (n - 1) as f64;

        let want_mean = moments::predictor_mean(&model, 1.0);
        let want_var = moments::predictor_variance(&model, 1.0);
        let report = moments::fourth_and_kappa(&model, 1.0).unwrap();

        // Three standard errors of each empirical statistic.
        let se_mean = (want_var / n as f64).sqrt();
        assert!((mean - want_mean).abs() < 3.0 * se_mean);
        let se_var = (report.fourth / n as f64).sqrt();
        assert!((var - want_var).abs() < 3.0 * se_var);
    }

    #[test]
    fn seeding_is_deterministic() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), 0.5, 0.5).unwrap();
        let u = constant_input(100);
        let a = simulate(&model, &u, 9);
        let b = simulate(&model, &u, 9);
        assert_eq!(a, b);
        let c = simulate(&model, &u, 10);
        assert_ne!(a.y, c.y);
    }

    #[test]
    fn csv_round_trip() {
        let model = WienerModel::scalar(1.0, PolynomialSensor::cubic(), 0.3, 0.2).unwrap();
        let data = simulate(&model, &constant_input(17), 5);
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let back = Dataset::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.u, data.u);
        assert_eq!(back.y, data.y);
    }

    #[test]
    fn model_json_round_trip() {
        let model = WienerModel::new(
            vec![1.0, -0.5],
            PolynomialSensor::quadratic(),
            0.25,
            0.75,
        )
        .unwrap();
        let text = serde_json::to_string(&model).unwrap();
        let back = WienerModel::from_json(&text).unwrap();
        assert_eq!(back, model);

        assert!(WienerModel::from_json(
            r#"{"theta":[],"sensor":{"kind":"cubic"},"var_v":1.0,"var_e":1.0}"#
        )
        .is_err());
        assert!(WienerModel::from_json(
            r#"{"theta":[1.0],"sensor":{"kind":"cubic"},"var_v":-1.0,"var_e":1.0}"#
        )
        .is_err());
    }
}
