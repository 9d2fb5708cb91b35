//! Derivative-free optimizers and the estimator front-ends.
//!
//! The scalar minimizer is golden-section search accelerated by successive
//! parabolic interpolation; the vector case is Nelder-Mead with the standard
//! coefficients. [`fit`] wires them to the cost functions: the exact marginal
//! likelihood or one of the Gaussian joint mean/variance criteria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{exact_nll, gaussian_nll, meanvar, MeanVarKind};
use crate::quadrature::{hermite_rule, DEFAULT_LIKELIHOOD_ORDER};
use crate::system::WienerModel;

/// Estimator selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    ExactMl,
    Gauss1,
    Gauss2,
    Cmp,
}

impl Method {
    fn meanvar_kind(self) -> Option<MeanVarKind> {
        match self {
            Method::ExactMl => None,
            Method::Gauss1 => Some(MeanVarKind::Gauss1),
            Method::Gauss2 => Some(MeanVarKind::Gauss2),
            Method::Cmp => Some(MeanVarKind::Cmp),
        }
    }
}

/// Knobs for [`fit`]. The defaults match the benchmark protocol: positivity
/// off, quadrature order 100, scalar tolerance 1e-8, simplex cost-spread
/// tolerance 1e-10 with `2000 * m` iterations.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Constrain a scalar parameter to `m > 0` by restricting the bracket to
    /// `[1e-6, upper]`.
    pub positive: bool,
    /// Gauss-Hermite order for the exact marginal likelihood.
    pub gh_order: usize,
    /// Explicit scalar search bracket; overrides the built-in heuristic.
    pub bracket: Option<(f64, f64)>,
    /// Explicit initial point; overrides the seeding pipeline.
    pub initial: Option<Vec<f64>>,
    pub scalar_tol: f64,
    pub simplex_tol: f64,
    pub simplex_scale: f64,
    pub max_iter: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            positive: false,
            gh_order: DEFAULT_LIKELIHOOD_ORDER,
            bracket: None,
            initial: None,
            scalar_tol: 1e-8,
            simplex_tol: 1e-10,
            simplex_scale: 0.25,
            max_iter: None,
        }
    }
}

/// Search-space record of a finished fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagnostic {
    Bracket { lower: f64, upper: f64 },
    Simplex { scale: f64, spread: f64 },
}

/// A finished fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateResult {
    pub theta_hat: Vec<f64>,
    pub cost: f64,
    pub method: Method,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostic: Diagnostic,
}

/// Golden-section search refined by successive parabolic interpolation on
/// `[lower, upper]`. Never evaluates outside the interval; for unimodal `f`
/// the argmin is located to within `tol`. Cost ties keep the incumbent, so a
/// constant function settles on the interval midpoint.
pub fn minimize_scalar<F: FnMut(f64) -> Result<f64>>(
    mut f: F,
    lower: f64,
    upper: f64,
    tol: f64,
) -> Result<(f64, f64, usize)> {
    if !(lower < upper) {
        return Err(Error::InvalidArgument(format!(
            "bracket must satisfy lower < upper, got [{lower}, {upper}]"
        )));
    }
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let mut a = lower;
    let mut b = upper;
    let mut x = 0.5 * (a + b);
    let mut fx = eval_finite(&mut f, x)?;
    let (mut w, mut v) = (x, x);
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut iterations = 0;

    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let tol1 = tol * x.abs() + 1e-300;
        let tol2 = 2.0 * tol1;
        if (x - mid).abs() <= tol2 - 0.5 * (b - a) {
            return Ok((x, fx, iterations));
        }
        iterations += 1;
        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabola through (x, fx), (w, fw), (v, fv).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let e_old = e;
            e = d;
            if p.abs() < (0.5 * q * e_old).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = tol1.copysign(mid - x);
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x >= mid { a - x } else { b - x };
            d = golden * e;
        }
        let u = if d.abs() >= tol1 { x + d } else { x + tol1.copysign(d) };
        let fu = eval_finite(&mut f, u)?;
        if fu < fx {
            if u >= x {
                a = x;
            } else {
                b = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu < fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu < fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok((x, fx, iterations))
}

fn eval_finite<F: FnMut(f64) -> Result<f64>>(f: &mut F, x: f64) -> Result<f64> {
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("non-finite cost {v} at {x}")))
    }
}

/// Nelder-Mead with reflection 1, expansion 2, contraction 1/2, shrink 1/2.
/// Stops when the simplex cost spread drops below `tol` (and its vertex
/// spread below `sqrt(tol)`, so an exact cost tie across a contour cannot
/// fake convergence) or after `max_iter` iterations.
pub fn minimize_simplex<F: FnMut(&[f64]) -> Result<f64>>(
    mut f: F,
    x0: &[f64],
    scale: f64,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize, bool)> {
    let m = x0.len();
    if m == 0 {
        return Err(Error::InvalidArgument("empty initial point".into()));
    }
    let diameter_tol = tol.sqrt().max(1e-12);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    points.push(x0.to_vec());
    for i in 0..m {
        let mut p = x0.to_vec();
        p[i] += scale;
        points.push(p);
    }
    let mut costs = Vec::with_capacity(m + 1);
    for p in &points {
        costs.push(eval_vec(&mut f, p)?);
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut order: Vec<usize> = (0..=m).collect();
        order.sort_by(|&i, &j| costs[i].total_cmp(&costs[j]));
        let best = order[0];
        let worst = order[m];
        let second_worst = order[m - 1];
        let diameter = points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&points[best])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        if costs[worst] - costs[best] < tol && diameter < diameter_tol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; m];
        for &i in order.iter().take(m) {
            for (c, &xi) in centroid.iter_mut().zip(&points[i]) {
                *c += xi / m as f64;
            }
        }
        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&points[worst])
            .map(|(&c, &w)| c + (c - w))
            .collect();
        let f_reflect = eval_vec(&mut f, &reflect)?;

        if f_reflect < costs[best] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&points[worst])
                .map(|(&c, &w)| c + 2.0 * (c - w))
                .collect();
            let f_expand = eval_vec(&mut f, &expand)?;
            if f_expand < f_reflect {
                points[worst] = expand;
                costs[worst] = f_expand;
            } else {
                points[worst] = reflect;
                costs[worst] = f_reflect;
            }
        } else if f_reflect < costs[second_worst] {
            points[worst] = reflect;
            costs[worst] = f_reflect;
        } else {
            let (toward, f_toward) = if f_reflect < costs[worst] {
                (reflect.clone(), f_reflect)
            } else {
                (points[worst].clone(), costs[worst])
            };
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&toward)
                .map(|(&c, &t)| c + 0.5 * (t - c))
                .collect();
            let f_contract = eval_vec(&mut f, &contract)?;
            if f_contract < f_toward {
                points[worst] = contract;
                costs[worst] = f_contract;
            } else {
                // Shrink everything toward the best vertex.
                let anchor = points[best].clone();
                for i in 0..=m {
                    if i == best {
                        continue;
                    }
                    for (p, &a) in points[i].iter_mut().zip(&anchor) {
                        *p = a + 0.5 * (*p - a);
                    }
                    costs[i] = eval_vec(&mut f, &points[i])?;
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=m {
        if costs[i] < costs[best] {
            best = i;
        }
    }
    Ok((points.swap_remove(best), costs[best], iterations, converged))
}

fn eval_vec<F: FnMut(&[f64]) -> Result<f64>>(f: &mut F, x: &[f64]) -> Result<f64> {
    let v = f(x)?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Evaluation(format!("non-finite cost {v} at {x:?}")))
    }
}

/// Fit the FIR parameters of `template` to `(u, y)` with the chosen method.
///
/// Sensor and noise variances stay fixed at the template's values; only
/// `theta` is searched. Scalar models use the bracketed golden/parabolic
/// search, vector models the simplex. Seeding: the conditional-mean fit
/// starts from `h^{-1}(mean(y))` when that inverse exists on the bracket,
/// and the exact-ML fit starts from the conditional-mean estimate.
pub fn fit(
    template: &WienerModel,
    u: &[f64],
    y: &[f64],
    method: Method,
    options: &FitOptions,
) -> Result<EstimateResult> {
    if u.len() != y.len() || u.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "input/output lengths {} and {} must match and be nonzero",
            u.len(),
            y.len()
        )));
    }
    let dim = template.theta.len();
    if dim == 1 {
        fit_scalar(template, u, y, method, options)
    } else {
        fit_vector(template, u, y, method, options)
    }
}

fn scalar_cost<'a>(
    template: &'a WienerModel,
    u: &'a [f64],
    y: &'a [f64],
    method: Method,
    rule: Option<&'a crate::quadrature::QuadratureRule>,
) -> impl FnMut(f64) -> Result<f64> + 'a {
    move |m: f64| match method.meanvar_kind() {
        None => {
            let mut candidate = template.clone();
            candidate.theta = vec![m];
            exact_nll(&candidate, u, y, rule.expect("rule built for exact ML"))
        }
        Some(kind) => gaussian_nll(&meanvar(template, kind, &[m], u), y),
    }
}

fn fit_scalar(
    template: &WienerModel,
    u: &[f64],
    y: &[f64],
    method: Method,
    options: &FitOptions,
) -> Result<EstimateResult> {
    let rule = if method == Method::ExactMl {
        Some(hermite_rule(options.gh_order)?)
    } else {
        None
    };

    let initial = match (&options.initial, method) {
        (Some(init), _) => init[0],
        (None, Method::ExactMl) => {
            let mut seed_options = options.clone();
            seed_options.initial = None;
            let cmp_fit = fit(template, u, y, Method::Cmp, &seed_options)?;
            cmp_fit.theta_hat[0]
        }
        (None, _) => inverse_mean_heuristic(template, u, y, options),
    };

    let (lower, upper) = match options.bracket {
        Some(b) => b,
        None if options.positive => (1e-6, 4.0 * initial.abs().max(1.0)),
        None => {
            let w = 4.0 * initial.abs().max(1.0);
            (initial - w, initial + w)
        }
    };
    let initial = initial.clamp(lower, upper);

    let mut cost = scalar_cost(template, u, y, method, rule.as_ref());
    let f_init = cost(initial)?;
    let (m_hat, f_hat, iterations) = minimize_scalar(&mut cost, lower, upper, options.scalar_tol)?;
    let (m_hat, f_hat) = if f_hat <= f_init { (m_hat, f_hat) } else { (initial, f_init) };
    Ok(EstimateResult {
        theta_hat: vec![m_hat],
        cost: f_hat,
        method,
        iterations,
        converged: true,
        diagnostic: Diagnostic::Bracket { lower, upper },
    })
}

/// `h^{-1}(mean(y))` when the sensor is invertible around the search region,
/// else the midpoint of the positivity bracket or zero.
fn inverse_mean_heuristic(
    template: &WienerModel,
    _u: &[f64],
    y: &[f64],
    options: &FitOptions,
) -> f64 {
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let probe = if options.positive { (1e-6, 64.0) } else { (-64.0, 64.0) };
    match template.sensor.inverse(mean_y, probe) {
        Ok(m0) => m0,
        Err(_) => match options.bracket {
            Some((lo, hi)) => 0.5 * (lo + hi),
            None if options.positive => 1.0,
            None => 0.0,
        },
    }
}

fn fit_vector(
    template: &WienerModel,
    u: &[f64],
    y: &[f64],
    method: Method,
    options: &FitOptions,
) -> Result<EstimateResult> {
    let rule = if method == Method::ExactMl {
        Some(hermite_rule(options.gh_order)?)
    } else {
        None
    };
    let dim = template.theta.len();
    let x0 = options.initial.clone().unwrap_or_else(|| template.theta.clone());
    if x0.len() != dim {
        return Err(Error::InvalidArgument(format!(
            "initial point has {} entries for {dim} parameters",
            x0.len()
        )));
    }
    let max_iter = options.max_iter.unwrap_or(2000 * dim);

    let mut cost = |theta: &[f64]| match method.meanvar_kind() {
        None => {
            let mut candidate = template.clone();
            candidate.theta = theta.to_vec();
            exact_nll(&candidate, u, y, rule.as_ref().expect("rule built for exact ML"))
        }
        Some(kind) => gaussian_nll(&meanvar(template, kind, theta, u), y),
    };
    let f_init = cost(&x0)?;
    let (theta_hat, f_hat, iterations, converged) =
        minimize_simplex(&mut cost, &x0, options.simplex_scale, options.simplex_tol, max_iter)?;
    let (theta_hat, f_hat) = if f_hat <= f_init {
        (theta_hat, f_hat)
    } else {
        (x0, f_init)
    };
    Ok(EstimateResult {
        theta_hat,
        cost: f_hat,
        method,
        iterations,
        converged,
        diagnostic: Diagnostic::Simplex {
            scale: options.simplex_scale,
            spread: options.simplex_tol,
        },
    })
}
