#![allow(dead_code)]

use hacvar::hac::{parse_structure, sample_hac};
use hacvar::volatility::{forecast_from_state, simulate_with_innovations, SkewedT, BURN_IN};
use hacvar::{ArmaAparchParams, FilterState, GeneratorFamily, HacModel};
use rayon::prelude::*;

/// Pairwise Kendall taus of the five indices, ordered SP, NA, CAC, DAX, BRVM.
pub const INDEX_TAUS: [[f64; 5]; 5] = [
    [1.0, 0.6978, -0.0012, 0.0350, 0.0014],
    [0.6978, 1.0, 0.0048, 0.0369, -0.0010],
    [-0.0012, 0.0048, 1.0, 0.0144, 0.0032],
    [0.0350, 0.0369, 0.0144, 1.0, -0.0027],
    [0.0014, -0.0010, 0.0032, -0.0027, 1.0],
];

/// Node taus printed with the tree, root first: τ₁, τ₂, τ₃, τ₄.
pub const INDEX_NODE_TAUS: [f64; 4] = [0.00024, 0.00603, 0.036, 0.6978];

/// Printed θ₁…θ₄ per family.
pub const INDEX_THETAS: [(GeneratorFamily, [f64; 4]); 4] = [
    (GeneratorFamily::Frank, [0.0022, 0.0543, 0.3243, 11.3157]),
    (GeneratorFamily::Joe, [1.0004, 1.0105, 1.0647, 5.4178]),
    (GeneratorFamily::Gumbel, [1.0002, 1.0060, 1.0373, 3.3100]),
    (GeneratorFamily::Clayton, [0.00049, 0.0121, 0.0747, 4.6201]),
];

pub fn index_taus() -> Vec<Vec<f64>> {
    INDEX_TAUS.iter().map(|r| r.to_vec()).collect()
}

/// The tree ((((SP NA) DAX) CAC) BRVM) with θ₁…θ₄ from the root down.
pub fn index_tree_model(family: GeneratorFamily, theta: [f64; 4]) -> HacModel {
    let text = format!(
        "((((1 2)@{} 4)@{} 3)@{} 5)@{}",
        theta[3], theta[2], theta[1], theta[0]
    );
    parse_structure(&text, family).unwrap()
}

pub fn gumbel_index_tree() -> HacModel {
    index_tree_model(GeneratorFamily::Gumbel, INDEX_THETAS[2].1)
}

/// One-sample KS distance from U(0,1) and its asymptotic p-value.
pub fn ks_uniform(u: &[f64]) -> (f64, f64) {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let d = s
        .iter()
        .enumerate()
        .map(|(i, v)| ((i as f64 + 1.0) / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max);
    (d, kolmogorov_sf((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d))
}

/// Two-sample KS distance between empirical samples.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            i += 1;
        } else {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

/// P(K > x) for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Skewed-t, ARMA(1,2)-APARCH(1,1) parameters for five synthetic assets.
pub fn market_params() -> Vec<ArmaAparchParams> {
    let base = |mu: f64,
                ar: f64,
                omega: f64,
                alpha: f64,
                gamma: f64,
                beta: f64,
                delta: f64,
                skew: f64,
                shape: f64| {
        ArmaAparchParams {
            mu,
            ar: vec![ar],
            ma: vec![-0.1, 0.03],
            omega,
            alpha: vec![alpha],
            gamma: vec![gamma],
            beta: vec![beta],
            delta,
            skew,
            shape,
        }
    };
    vec![
        base(0.03, 0.2, 0.02, 0.08, 0.6, 0.88, 1.2, 0.95, 7.0),
        base(0.04, 0.15, 0.03, 0.09, 0.5, 0.87, 1.3, 0.92, 6.0),
        base(0.02, 0.1, 0.03, 0.07, 0.7, 0.89, 1.1, 0.97, 8.0),
        base(0.03, 0.05, 0.025, 0.08, 0.6, 0.88, 1.4, 0.95, 7.5),
        base(0.01, 0.25, 0.05, 0.12, 0.1, 0.80, 1.6, 1.05, 5.0),
    ]
}

/// Simulated returns with HAC-dependent innovations, and the generating truth.
pub struct Market {
    pub params: Vec<ArmaAparchParams>,
    pub copula: HacModel,
    /// One column per asset.
    pub returns: Vec<Vec<f64>>,
    /// Filter state after the last observation of each column.
    pub final_states: Vec<FilterState>,
}

/// Innovations with margins `params[j]` joined by `copula`.
pub fn dependent_innovations(
    params: &[ArmaAparchParams],
    copula: &HacModel,
    n: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let u = sample_hac(copula, n, seed).unwrap();
    params
        .par_iter()
        .enumerate()
        .map(|(j, p)| {
            let law = SkewedT::new(p.skew, p.shape).unwrap();
            (0..n).map(|i| law.quantile(u.get(i, j)).unwrap()).collect()
        })
        .collect()
}

pub fn market(t: usize, seed: u64) -> Market {
    let params = market_params();
    let copula = gumbel_index_tree();
    let z = dependent_innovations(&params, &copula, BURN_IN + t, seed);
    let paths: Vec<_> = params
        .iter()
        .zip(&z)
        .map(|(p, z)| simulate_with_innovations(p, &z[..BURN_IN], &z[BURN_IN..]).unwrap())
        .collect();
    Market {
        final_states: paths.iter().map(|p| p.final_state.clone()).collect(),
        returns: paths.into_iter().map(|p| p.returns).collect(),
        params,
        copula,
    }
}

impl Market {
    /// Ground-truth one-step portfolio losses −w·r̂ for `n` draws.
    pub fn true_losses(&self, w: &[f64], n: usize, seed: u64) -> Vec<f64> {
        let z = dependent_innovations(&self.params, &self.copula, n, seed);
        let fc: Vec<(f64, f64)> = self
            .params
            .iter()
            .zip(&self.final_states)
            .map(|(p, s)| forecast_from_state(p, s))
            .collect();
        (0..n)
            .map(|i| {
                -(0..w.len())
                    .map(|j| w[j] * (fc[j].0 + fc[j].1 * z[j][i]))
                    .sum::<f64>()
            })
            .collect()
    }
}
