//! Fixtures shared by the criterion benchmarks in `benches/`.

use hacvar::hac::{parse_structure, sample_hac};
use hacvar::volatility::simulate;
use hacvar::{ArmaAparchParams, GeneratorFamily, HacModel, ScenarioMatrix};

/// Five-index Gumbel tree with the parameters estimated from the index data.
pub fn index_tree() -> HacModel {
    parse_structure(
        "((((1 2)@3.31 4)@1.0373 3)@1.006 5)@1.0002",
        GeneratorFamily::Gumbel,
    )
    .unwrap()
}

pub fn equity_params() -> ArmaAparchParams {
    ArmaAparchParams {
        mu: 0.03,
        ar: vec![0.2],
        ma: vec![-0.1, 0.03],
        omega: 0.02,
        alpha: vec![0.08],
        gamma: vec![0.6],
        beta: vec![0.88],
        delta: 1.2,
        skew: 0.95,
        shape: 7.0,
    }
}

/// `d` independent return columns of length `t`.
pub fn return_columns(t: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..d)
        .map(|j| {
            simulate(&equity_params(), t, seed + j as u64)
                .unwrap()
                .returns
        })
        .collect()
}

/// `n` scenarios of five dependent assets with scaled uniforms as returns.
pub fn scenarios(n: usize, seed: u64) -> ScenarioMatrix {
    let u = sample_hac(&index_tree(), n, seed).unwrap();
    let scale = [1.0, 1.2, 0.9, 1.1, 0.5];
    let mut values = Vec::with_capacity(n * 5);
    for i in 0..n {
        for (j, s) in scale.iter().enumerate() {
            values.push(s * (u.get(i, j) - 0.5) * 4.0 + 0.01 * j as f64);
        }
    }
    ScenarioMatrix::new(n, 5, values).unwrap()
}
