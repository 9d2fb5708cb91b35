use wienerlab::estimate::{fit, FitOptions, Method};
use wienerlab::experiments::realization_seed;
use wienerlab::likelihood::exact_nll;
use wienerlab::quadrature::hermite_rule;
use wienerlab::sensor::PolynomialSensor;
use wienerlab::system::{simulate, WienerModel};

fn main() {
    let s = 0.1;
    let model = WienerModel::scalar(1.0, PolynomialSensor::quadratic(), s, s).unwrap();
    let u = vec![1.0; 1000];
    let rule = hermite_rule(400).unwrap();
    let mut options = FitOptions::default();
    options.positive = true;
    options.gh_order = 400;
    let mut n_equal_seed = 0;
    let mut max_grid_gap: f64 = 0.0;
    for r in 0..20u64 {
        let data = simulate(&model, &u, realization_seed(1, r));
        let ml = fit(&model, &u, &data.y, Method::ExactMl, &options).unwrap();
        let cmp = fit(&model, &u, &data.y, Method::Cmp, &options).unwrap();
        if (ml.theta_hat[0] - cmp.theta_hat[0]).abs() < 1e-12 {
            n_equal_seed += 1;
        }
        // brute grid argmin of the exact cost around 1
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..3000 {
            let m = 0.85 + i as f64 * 0.0001;
            let cand = WienerModel::scalar(m, PolynomialSensor::quadratic(), s, s).unwrap();
            let c = exact_nll(&cand, &u, &data.y, &rule).unwrap();
            if c < best.0 { best = (c, m); }
        }
        max_grid_gap = max_grid_gap.max((ml.theta_hat[0] - best.1).abs());
        if r < 6 {
            println!("r={r}: ml={:.5} cmp={:.5} grid={:.5}", ml.theta_hat[0], cmp.theta_hat[0], best.1);
        }
    }
    println!("fits equal to CMP seed: {n_equal_seed}/20, max |ml - grid argmin| = {max_grid_gap:.2e}");
}
