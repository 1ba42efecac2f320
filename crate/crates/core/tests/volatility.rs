mod common;

use hacvar::volatility::{
    aparch_filter, aparch_filter_from, fit, loglik, simulate, FitOptions, SkewedT,
};
use hacvar::{ArmaAparchParams, ArmaAparchSpec};

fn sp500_like() -> ArmaAparchParams {
    ArmaAparchParams {
        mu: 0.011,
        ar: vec![0.9],
        ma: vec![-0.95, 0.03],
        omega: 0.009,
        alpha: vec![0.11],
        gamma: vec![0.91],
        beta: vec![0.85],
        delta: 0.92,
        skew: 1.09,
        shape: 6.4,
    }
}

fn garch_like(gamma: f64, delta: f64) -> ArmaAparchParams {
    ArmaAparchParams {
        mu: 0.05,
        ar: vec![],
        ma: vec![],
        omega: 0.05,
        alpha: vec![0.08],
        gamma: vec![gamma],
        beta: vec![0.9],
        delta,
        skew: 1.0,
        shape: 8.0,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

#[test]
fn filter_reproduces_simulated_path() {
    let p = sp500_like();
    let path = simulate(&p, 5000, 3).unwrap();
    let out = aparch_filter_from(&p, &path.returns, path.initial_state.clone()).unwrap();
    for t in 0..path.returns.len() {
        assert!(rel(out.sigma[t], path.sigma[t]) < 1e-8, "t={t}");
        assert!(
            (out.residuals[t] - path.innovations[t]).abs() < 1e-8,
            "t={t}"
        );
    }
    assert_eq!(out.state.returns.len(), 1);
}

#[test]
fn presample_start_is_forgotten() {
    // a short-memory volatility process loses its initial condition fast
    let mut p = garch_like(0.3, 1.5);
    p.beta = vec![0.3];
    p.alpha = vec![0.2];
    let path = simulate(&p, 600, 5).unwrap();
    let out = aparch_filter(&p, &path.returns).unwrap();
    for t in 200..600 {
        assert!(rel(out.sigma[t], path.sigma[t]) < 1e-8, "t={t}");
    }
}

/// σ path from textbook recursions started like the library's filter:
/// σ₀^δ = mean |r − r̄|^δ, ε₀ = 0, constant mean μ.
fn reference_sigma(
    r: &[f64],
    mu: f64,
    omega: f64,
    alpha: f64,
    beta: f64,
    arch: impl Fn(f64) -> f64,
    delta: f64,
) -> Vec<f64> {
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    let mut s_pow = r.iter().map(|x| (x - mean).abs().powf(delta)).sum::<f64>() / r.len() as f64;
    let mut eps = 0.0;
    let mut out = Vec::with_capacity(r.len());
    for &x in r {
        s_pow = omega + alpha * arch(eps) + beta * s_pow;
        out.push(s_pow.powf(1.0 / delta));
        eps = x - mu;
    }
    out
}

#[test]
fn special_cases_match_textbook_recursions() {
    let r = simulate(&garch_like(0.4, 1.3), 3000, 9).unwrap().returns;

    // GARCH(1,1): σ² = ω + α ε² + β σ²
    let p = garch_like(0.0, 2.0);
    let lib = aparch_filter(&p, &r).unwrap().sigma;
    let refp = reference_sigma(&r, p.mu, p.omega, 0.08, 0.9, |e| e * e, 2.0);
    assert!(
        lib.iter().zip(&refp).all(|(a, b)| rel(*a, *b) < 1e-10),
        "GARCH"
    );

    // GJR form: σ² = ω + α(|ε| − γε)² + β σ², i.e. α(1+γ)² ε² on bad news
    let p = garch_like(0.3, 2.0);
    let lib = aparch_filter(&p, &r).unwrap().sigma;
    let refp = reference_sigma(
        &r,
        p.mu,
        p.omega,
        0.08,
        0.9,
        |e| {
            if e < 0.0 {
                1.3f64.powi(2) * e * e
            } else {
                0.7f64.powi(2) * e * e
            }
        },
        2.0,
    );
    assert!(
        lib.iter().zip(&refp).all(|(a, b)| rel(*a, *b) < 1e-10),
        "GJR"
    );

    // threshold GARCH on σ itself: σ = ω + α(|ε| − γε) + β σ
    let p = garch_like(-0.2, 1.0);
    let lib = aparch_filter(&p, &r).unwrap().sigma;
    let refp = reference_sigma(
        &r,
        p.mu,
        p.omega,
        0.08,
        0.9,
        |e| if e < 0.0 { 0.8 * -e } else { 1.2 * e },
        1.0,
    );
    assert!(
        lib.iter().zip(&refp).all(|(a, b)| rel(*a, *b) < 1e-10),
        "T-GARCH"
    );
}

#[test]
fn loglik_is_the_sum_of_conditional_densities() {
    let p = garch_like(0.3, 2.0);
    let r = simulate(&p, 1500, 4).unwrap().returns;
    let sigma = reference_sigma(
        &r,
        p.mu,
        p.omega,
        0.08,
        0.9,
        |e| {
            if e < 0.0 {
                1.3f64.powi(2) * e * e
            } else {
                0.7f64.powi(2) * e * e
            }
        },
        2.0,
    );
    let law = SkewedT::new(p.skew, p.shape).unwrap();
    let direct: f64 = r
        .iter()
        .zip(&sigma)
        .map(|(x, s)| (law.density((x - p.mu) / s) / s).ln())
        .sum();
    assert!(rel(loglik(&p, &r), direct) < 1e-10);
}

#[test]
fn fit_recovers_parameters_and_is_stationary() {
    // leverage well inside (−1, 1) so the Wald intervals are meaningful
    let truth = common::market_params()[0].clone();
    let path = simulate(&truth, 6000, 21).unwrap();
    let f = fit(
        &ArmaAparchSpec::default(),
        &path.returns,
        &FitOptions::default(),
    )
    .unwrap();
    assert!(f.converged);
    let est = f.params.to_vec();
    for (i, (name, v)) in truth.named().into_iter().enumerate() {
        let z = (est[i] - v) / f.std_errors[i];
        assert!(
            z.abs() < 4.0,
            "{name}: {} vs {v} (se {})",
            est[i],
            f.std_errors[i]
        );
    }
    assert!(f.params.stationarity_margin().unwrap() > 0.0);
    assert!(f.loglik >= loglik(&truth, &path.returns) - 1e-6);

    // the optimum is stationary: a Newton step would move each parameter by
    // a negligible fraction of its standard error
    let base = f.params.to_vec();
    let spec = f.spec;
    for i in 0..base.len() {
        let h = 1e-5 * base[i].abs().max(1e-3);
        let mut up = base.clone();
        let mut down = base.clone();
        up[i] += h;
        down[i] -= h;
        let g = (loglik(
            &ArmaAparchParams::from_vec(&spec, &up).unwrap(),
            &path.returns,
        ) - loglik(
            &ArmaAparchParams::from_vec(&spec, &down).unwrap(),
            &path.returns,
        )) / (2.0 * h);
        let se = f.std_errors[i];
        assert!(
            (g * se * se).abs() < 0.05 * se,
            "parameter {i}: score {g}, se {se}"
        );
    }
}

#[test]
fn rejects_short_and_constant_series() {
    let spec = ArmaAparchSpec::default();
    assert!(fit(&spec, &[0.1; 8], &FitOptions::default()).is_err());
    assert!(matches!(
        fit(&spec, &vec![0.5; 500], &FitOptions::default()),
        Err(hacvar::Error::DegenerateColumn(0))
    ));
}
