//! Identification of stochastic Wiener systems and the statistical
//! performance of their estimators.
//!
//! A stochastic Wiener system is a linear FIR block driven by a known input
//! and white Gaussian process noise, observed through a known static
//! polynomial sensor with additive Gaussian measurement noise:
//!
//! ```text
//! z_t = sum_k g_k u_{t-k} + v_t,      y_t = h(z_t) + e_t.
//! ```
//!
//! The crate provides:
//!
//! - [`quadrature`]: Gauss-Hermite rules and Gaussian expectation operators;
//! - [`sensor`]: polynomial sensors with analytic derivatives and inverses;
//! - [`system`]: the model type, seeded simulation, and dataset I/O;
//! - [`moments`]: conditional output moments and the kurtosis factor kappa;
//! - [`likelihood`]: exact marginal, invertible-form, and Gaussian
//!   approximation negative log-likelihoods;
//! - [`fisher`]: Fisher information, score covariance, CRLB and sandwich
//!   asymptotic covariances, including the closed-form scalar results;
//! - [`estimate`]: derivative-free optimizers and the estimator front-ends;
//! - [`experiments`]: a seeded Monte Carlo harness and benchmark-table
//!   reproduction.

pub mod error;
pub mod estimate;
pub mod experiments;
pub mod fisher;
pub mod likelihood;
pub mod moments;
pub(crate) mod poly;
pub mod quadrature;
pub mod sensor;
pub mod system;

pub use error::{Error, Result};
