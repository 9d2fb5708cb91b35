//! Monte Carlo harness and benchmark-table reproduction.
//!
//! Realizations are embarrassingly parallel: realization `r` simulates with
//! `seed = base_seed XOR splitmix64(r)`, fits, and the results aggregate in
//! realization order, so serial and parallel runs produce identical reports.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimate::{fit, FitOptions, Method};
use crate::fisher::{fim_result4, fisher_report, FisherReport, KappaSource};
use crate::likelihood::MeanVarKind;
use crate::sensor::PolynomialSensor;
use crate::system::{simulate, WienerModel};

/// Environment variable capping harness parallelism (`0` or unset = auto).
pub const THREADS_ENV: &str = "WIENERLAB_THREADS";

/// One Monte Carlo sweep: fit `realizations` simulated datasets of length
/// `samples_per_run` drawn from `model`.
#[derive(Debug, Clone)]
pub struct MonteCarloConfig {
    pub model: WienerModel,
    pub method: Method,
    pub samples_per_run: usize,
    pub realizations: usize,
    pub base_seed: u64,
    pub gh_order: usize,
    pub positivity: bool,
    /// Input signal; `None` means the constant-one input of the scalar
    /// benchmark case.
    pub input: Option<Vec<f64>>,
    /// Worker threads; `None` reads [`THREADS_ENV`], 0 or absent = auto.
    pub threads: Option<usize>,
}

impl MonteCarloConfig {
    pub fn new(model: WienerModel, method: Method, samples_per_run: usize, realizations: usize) -> Self {
        Self {
            model,
            method,
            samples_per_run,
            realizations,
            base_seed: 1,
            gh_order: crate::quadrature::DEFAULT_LIKELIHOOD_ORDER,
            positivity: false,
            input: None,
            threads: None,
        }
    }
}

/// Aggregated sweep results. Failed fits are excluded from the estimate list
/// and statistics but counted in `failed`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloReport {
    pub estimates: Vec<Vec<f64>>,
    pub sample_mean: Vec<f64>,
    pub sample_std: Vec<f64>,
    pub bias: Vec<f64>,
    /// `sqrt(AsCov/N)` of the conditional-mean-predictor sandwich, reported
    /// for scalar constant-input configurations.
    pub theory_std: Option<f64>,
    pub failed: usize,
    pub runtime_seconds: f64,
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Simulation seed of realization `r`.
pub fn realization_seed(base_seed: u64, r: u64) -> u64 {
    base_seed ^ splitmix64(r)
}

fn build_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let n = match threads {
        Some(n) => n,
        None => std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0),
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if n > 0 {
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Harness(format!("thread pool: {e}")))
}

/// Run the sweep. Errors if more than 5% of the fits fail, since silently
/// dropping them would bias the spread estimate.
pub fn monte_carlo(config: &MonteCarloConfig) -> Result<MonteCarloReport> {
    if config.samples_per_run == 0 || config.realizations == 0 {
        return Err(Error::InvalidArgument(
            "samples_per_run and realizations must be >= 1".into(),
        ));
    }
    let start = std::time::Instant::now();
    let u = config
        .input
        .clone()
        .unwrap_or_else(|| vec![1.0; config.samples_per_run]);
    if u.len() != config.samples_per_run {
        return Err(Error::InvalidArgument(format!(
            "input length {} != samples_per_run {}",
            u.len(),
            config.samples_per_run
        )));
    }
    let mut options = FitOptions::default();
    options.positive = config.positivity;
    options.gh_order = config.gh_order;

    let pool = build_pool(config.threads)?;
    let outcomes: Vec<Result<crate::estimate::EstimateResult>> = pool.install(|| {
        (0..config.realizations as u64)
            .into_par_iter()
            .map(|r| {
                let seed = realization_seed(config.base_seed, r);
                let data = simulate(&config.model, &u, seed);
                fit(&config.model, &u, &data.y, config.method, &options)
            })
            .collect()
    });

    let dim = config.model.theta.len();
    let mut estimates: Vec<Vec<f64>> = Vec::with_capacity(config.realizations);
    let mut failed = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(res) if res.converged => estimates.push(res.theta_hat),
            _ => failed += 1,
        }
    }
    let budget = config.realizations / 20;
    if failed > budget {
        return Err(Error::Harness(format!(
            "{failed} of {} fits failed (budget {budget})",
            config.realizations
        )));
    }

    let count = estimates.len() as f64;
    let mut sample_mean = vec![0.0; dim];
    for est in &estimates {
        for (m, &e) in sample_mean.iter_mut().zip(est) {
            *m += e / count;
        }
    }
    let mut sample_std = vec![0.0; dim];
    if estimates.len() > 1 {
        for est in &estimates {
            for (s, (&e, &m)) in sample_std.iter_mut().zip(est.iter().zip(&sample_mean)) {
                *s += (e - m) * (e - m);
            }
        }
        for s in &mut sample_std {
            *s = (*s / (count - 1.0)).sqrt();
        }
    }
    let bias: Vec<f64> = sample_mean
        .iter()
        .zip(&config.model.theta)
        .map(|(&m, &t)| m - t)
        .collect();

    let constant_input = config.input.is_none();
    let theory_std = if dim == 1 && constant_input {
        fim_result4(
            &config.model.sensor,
            config.model.theta[0],
            config.model.var_v,
            config.model.var_e,
            KappaSource::True,
            false,
        )
        .ok()
        .and_then(|rep| rep.normalized_std(config.samples_per_run))
    } else {
        None
    };

    Ok(MonteCarloReport {
        estimates,
        sample_mean,
        sample_std,
        bias,
        theory_std,
        failed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Benchmark-table rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TableRow {
    /// Analytic `sqrt(2 var_v / N)` for the unit-gain linear sensor.
    Linear,
    /// Asymptotic normalized std of the quadratic sensor (sandwich).
    Quadratic,
    /// Monte Carlo exact-ML std for the quadratic sensor.
    Ml2,
    /// Asymptotic normalized std of the cubic sensor (sandwich).
    Cubic,
    /// Monte Carlo exact-ML std for the cubic sensor.
    Ml3,
}

impl TableRow {
    pub fn all() -> Vec<TableRow> {
        vec![
            TableRow::Linear,
            TableRow::Quadratic,
            TableRow::Ml2,
            TableRow::Cubic,
            TableRow::Ml3,
        ]
    }

    pub fn parse(name: &str) -> Result<TableRow> {
        match name.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(TableRow::Linear),
            "quadratic" => Ok(TableRow::Quadratic),
            "ml2" => Ok(TableRow::Ml2),
            "cubic" => Ok(TableRow::Cubic),
            "ml3" => Ok(TableRow::Ml3),
            other => Err(Error::InvalidArgument(format!("unknown table row '{other}'"))),
        }
    }
}

/// Settings for [`table1`]; defaults follow the benchmark protocol
/// (`N = 1000`, `R = 250`, noise grid `var_v = var_e^2... = {0.1..1}`,
/// `m_o = 1`).
#[derive(Debug, Clone)]
pub struct Table1Options {
    pub rows: Vec<TableRow>,
    pub samples: usize,
    pub realizations: usize,
    pub gh_order: usize,
    pub base_seed: u64,
    /// Also emit the published-variant asymptotic rows (see
    /// [`fim_result4`]'s `eq45_variant`).
    pub eq45_variant: bool,
    pub threads: Option<usize>,
}

impl Default for Table1Options {
    fn default() -> Self {
        Self {
            rows: TableRow::all(),
            samples: 1000,
            realizations: 250,
            gh_order: crate::quadrature::DEFAULT_LIKELIHOOD_ORDER,
            base_seed: 1,
            eq45_variant: false,
            threads: None,
        }
    }
}

/// The reproduced table: one labeled row of five cells per entry, over
/// `var_v in {0.1, 0.25, 0.5, 0.75, 1}` with `var_e = var_v` and `m_o = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table1 {
    pub var_v_grid: Vec<f64>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl Table1 {
    pub fn row(&self, name: &str) -> Option<&[f64]> {
        self.rows
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, cells)| cells.as_slice())
    }

    /// CSV mirroring the table layout: header of `var_v` values, one labeled
    /// row per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for v in &self.var_v_grid {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
        for (name, cells) in &self.rows {
            out.push_str(name);
            for c in cells {
                out.push_str(&format!(",{c:.4}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Reproduce the benchmark table.
pub fn table1(options: &Table1Options) -> Result<Table1> {
    let grid = vec![0.1, 0.25, 0.5, 0.75, 1.0];
    let n = options.samples;
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();

    for &row in &options.rows {
        match row {
            TableRow::Linear => {
                let cells = grid.iter().map(|&s| (2.0 * s / n as f64).sqrt()).collect();
                rows.push(("linear".into(), cells));
            }
            TableRow::Quadratic | TableRow::Cubic => {
                let (name, sensor) = if row == TableRow::Quadratic {
                    ("quadratic", PolynomialSensor::quadratic())
                } else {
                    ("cubic", PolynomialSensor::cubic())
                };
                let asymptotic = |variant: bool| -> Result<Vec<f64>> {
                    grid.iter()
                        .map(|&s| {
                            fim_result4(&sensor, 1.0, s, s, KappaSource::True, variant)?
                                .normalized_std(n)
                                .ok_or_else(|| Error::Harness("non-scalar report".into()))
                        })
                        .collect()
                };
                rows.push((name.into(), asymptotic(false)?));
                if options.eq45_variant {
                    rows.push((format!("{name}-eq45"), asymptotic(true)?));
                }
            }
            TableRow::Ml2 | TableRow::Ml3 => {
                let (name, sensor, positivity) = if row == TableRow::Ml2 {
                    ("ml2", PolynomialSensor::quadratic(), true)
                } else {
                    ("ml3", PolynomialSensor::cubic(), false)
                };
                let mut cells = Vec::with_capacity(grid.len());
                for &s in &grid {
                    let model = WienerModel::scalar(1.0, sensor.clone(), s, s)?;
                    let mut config = MonteCarloConfig::new(
                        model,
                        Method::ExactMl,
                        n,
                        options.realizations,
                    );
                    config.base_seed = options.base_seed;
                    config.gh_order = options.gh_order;
                    config.positivity = positivity;
                    config.threads = options.threads;
                    cells.push(monte_carlo(&config)?.sample_std[0]);
                }
                rows.push((name.into(), cells));
            }
        }
    }
    Ok(Table1 { var_v_grid: grid, rows })
}

/// Empirical-vs-asymptotic comparison of the sandwich formula.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    /// `sqrt(N) * sample_std / sqrt(ascov)`.
    pub ratio: f64,
    pub sample_std: f64,
    pub asymptotic_normalized_std: f64,
    pub fisher: FisherReport,
    pub monte_carlo: MonteCarloReport,
}

/// Compare `sqrt(N) * sample_std` of a Gaussian-criterion estimator against
/// the sandwich prediction of the matching mean/variance kind.
///
/// `kappa_source` feeds the theory side; forcing it to one demonstrates how
/// much the non-Gaussian correction matters.
pub fn consistency_check(
    model: &WienerModel,
    method: Method,
    samples: usize,
    realizations: usize,
    base_seed: u64,
    kappa_source: KappaSource,
) -> Result<ConsistencyReport> {
    if model.theta.len() != 1 {
        return Err(Error::InvalidArgument(
            "consistency check is defined for scalar models".into(),
        ));
    }
    let kind = match method {
        Method::Gauss1 => MeanVarKind::Gauss1,
        Method::Gauss2 => MeanVarKind::Gauss2,
        Method::Cmp => MeanVarKind::Cmp,
        Method::ExactMl => {
            return Err(Error::InvalidArgument(
                "exact ML has no matching mean/variance kind; use a Gaussian-criterion method"
                    .into(),
            ))
        }
    };
    let u = vec![1.0; samples];
    let theory = fisher_report(model, &model.theta, &u, kind, kappa_source)?;
    let asym = theory
        .normalized_std(samples)
        .ok_or_else(|| Error::Harness("non-scalar report".into()))?;

    let mut config = MonteCarloConfig::new(model.clone(), method, samples, realizations);
    config.base_seed = base_seed;
    config.positivity = model.sensor.degree() % 2 == 0;
    let mc = monte_carlo(&config)?;
    let ratio = mc.sample_std[0] / asym;
    Ok(ConsistencyReport {
        ratio,
        sample_std: mc.sample_std[0],
        asymptotic_normalized_std: asym,
        fisher: theory,
        monte_carlo: mc,
    })
}
