//! Unconditional and conditional coverage tests for VaR exceedances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Upper tail of the χ²(k) law.
pub fn chi_square_sf(x: f64, k: u32) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    match k {
        1 => erfc((x / 2.0).sqrt()),
        2 => (-x / 2.0).exp(),
        _ => ChiSquared::new(k as f64).map_or(f64::NAN, |c| c.sf(x)),
    }
}

/// a·ln b with 0·ln 0 = 0.
fn xlny(a: f64, b: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else {
        a * b.ln()
    }
}

/// Kupiec's proportion-of-failures likelihood ratio and its χ²(1) p-value.
pub fn kupiec_uc(x: usize, n: usize, p: f64) -> Result<(f64, f64)> {
    if x > n || n == 0 {
        return Err(Error::domain(format!("{x} exceedances out of {n}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("coverage level {p} outside (0, 1)")));
    }
    let (xf, nf) = (x as f64, n as f64);
    let phat = xf / nf;
    let null = xlny(nf - xf, 1.0 - p) + xlny(xf, p);
    let alt = xlny(nf - xf, 1.0 - phat) + xlny(xf, phat);
    let stat = (-2.0 * (null - alt)).max(0.0);
    Ok((stat, chi_square_sf(stat, 1)))
}

/// Transition counts n₀₀, n₀₁, n₁₀, n₁₁ of a hit sequence.
pub fn transition_counts(hits: &[bool]) -> [usize; 4] {
    let mut c = [0usize; 4];
    for w in hits.windows(2) {
        c[(w[0] as usize) * 2 + w[1] as usize] += 1;
    }
    c
}

/// Markov independence test and the joint conditional-coverage test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChristoffersenTests {
    pub ind_stat: f64,
    pub ind_pvalue: f64,
    pub cc_stat: f64,
    pub cc_pvalue: f64,
}

/// First-order Markov independence LR (χ²(1)) and CC = UC + IND (χ²(2)).
pub fn christoffersen_tests(hits: &[bool], p: f64) -> Result<ChristoffersenTests> {
    if hits.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} hits, at least 2 needed",
            hits.len()
        )));
    }
    let [n00, n01, n10, n11] = transition_counts(hits).map(|v| v as f64);
    let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
    let pi01 = if n00 + n01 > 0.0 {
        n01 / (n00 + n01)
    } else {
        0.0
    };
    let pi11 = if n10 + n11 > 0.0 {
        n11 / (n10 + n11)
    } else {
        0.0
    };
    let restricted = xlny(n00 + n10, 1.0 - pi) + xlny(n01 + n11, pi);
    let markov = xlny(n00, 1.0 - pi01) + xlny(n01, pi01) + xlny(n10, 1.0 - pi11) + xlny(n11, pi11);
    let ind_stat = (-2.0 * (restricted - markov)).max(0.0);
    let x = hits.iter().filter(|h| **h).count();
    let (uc_stat, _) = kupiec_uc(x, hits.len(), p)?;
    let cc_stat = uc_stat + ind_stat;
    Ok(ChristoffersenTests {
        ind_stat,
        ind_pvalue: chi_square_sf(ind_stat, 1),
        cc_stat,
        cc_pvalue: chi_square_sf(cc_stat, 2),
    })
}

/// Coverage statistics of a VaR back-test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestResult {
    pub alpha: f64,
    pub n: usize,
    pub x: usize,
    pub exceedance_rate: f64,
    pub uc_stat: f64,
    pub uc_pvalue: f64,
    pub ind_stat: f64,
    pub ind_pvalue: f64,
    pub cc_stat: f64,
    pub cc_pvalue: f64,
    pub hits: Vec<bool>,
    /// Indices of evaluation days skipped because a stage failed.
    pub skipped: Vec<usize>,
}

/// Runs the UC, IND and CC tests on a hit sequence for VaR at level `alpha`.
pub fn coverage_tests(hits: &[bool], alpha: f64) -> Result<BacktestResult> {
    let p = 1.0 - alpha;
    let n = hits.len();
    let x = hits.iter().filter(|h| **h).count();
    let (uc_stat, uc_pvalue) = kupiec_uc(x, n, p)?;
    let c = christoffersen_tests(hits, p)?;
    Ok(BacktestResult {
        alpha,
        n,
        x,
        exceedance_rate: x as f64 / n as f64,
        uc_stat,
        uc_pvalue,
        ind_stat: c.ind_stat,
        ind_pvalue: c.ind_pvalue,
        cc_stat: c.cc_stat,
        cc_pvalue: c.cc_pvalue,
        hits: hits.to_vec(),
        skipped: Vec::new(),
    })
}
