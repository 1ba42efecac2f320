//! Empirical VaR and CVaR of loss samples.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Losses and the tail statistics computed from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub var: f64,
    /// Mean of the losses strictly above `var`.
    pub cvar: f64,
    /// `cvar - var`, the mean excess over VaR.
    pub mean_excess: f64,
    /// True when no loss exceeds VaR, in which case `cvar == var`.
    pub no_exceedance: bool,
}

fn check(losses: &[f64], alpha: f64) -> Result<()> {
    if losses.is_empty() {
        return Err(Error::InsufficientData("empty loss sample".into()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain(format!(
            "confidence level {alpha} outside (0, 1)"
        )));
    }
    if let Some(i) = losses.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!("non-finite loss at index {i}")));
    }
    Ok(())
}

/// Rank ⌈αN⌉ (1-based), guarded against α·N landing a hair above an integer.
fn var_rank(n: usize, alpha: f64) -> usize {
    let x = alpha * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 * x.max(1.0) {
        r
    } else {
        x.ceil()
    };
    (k as usize).clamp(1, n)
}

/// Left-continuous α-quantile: the order statistic of rank ⌈αN⌉.
pub fn var_empirical(losses: &[f64], alpha: f64) -> Result<f64> {
    check(losses, alpha)?;
    let mut sorted = losses.to_vec();
    let k = var_rank(sorted.len(), alpha) - 1;
    let (_, v, _) = sorted.select_nth_unstable_by(k, f64::total_cmp);
    Ok(*v)
}

/// VaR, the tail mean beyond it, and the mean excess.
pub fn tail_estimate(losses: &[f64], alpha: f64) -> Result<TailEstimate> {
    let var = var_empirical(losses, alpha)?;
    let (sum, count) = losses
        .iter()
        .filter(|l| **l > var)
        .fold((0.0, 0usize), |(s, c), l| (s + l, c + 1));
    if count == 0 {
        log::debug!("no loss exceeds VaR {var}; CVaR set to VaR");
        return Ok(TailEstimate {
            var,
            cvar: var,
            mean_excess: 0.0,
            no_exceedance: true,
        });
    }
    let cvar = sum / count as f64;
    Ok(TailEstimate {
        var,
        cvar,
        mean_excess: cvar - var,
        no_exceedance: false,
    })
}

/// Mean of the losses strictly greater than VaR (VaR itself if there are none).
pub fn cvar_empirical(losses: &[f64], alpha: f64) -> Result<f64> {
    Ok(tail_estimate(losses, alpha)?.cvar)
}

/// E[L − VaR | L > VaR].
pub fn mean_excess(losses: &[f64], alpha: f64) -> Result<f64> {
    Ok(tail_estimate(losses, alpha)?.mean_excess)
}

/// Rockafellar–Uryasev CVaR: min over ζ of ζ + E[(L − ζ)⁺]/(1 − α). This is
/// the objective the portfolio optimizer minimizes; it splits the atom at VaR
/// when αN is not an integer.
pub fn cvar_rockafellar_uryasev(losses: &[f64], alpha: f64) -> Result<f64> {
    check(losses, alpha)?;
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let tail = (1.0 - alpha) * sorted.len() as f64;
    let mut acc = 0.0;
    let mut taken = 0.0;
    for l in sorted {
        let w = (tail - taken).min(1.0);
        if w <= 0.0 {
            break;
        }
        acc += w * l;
        taken += w;
    }
    Ok(acc / tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ranks_on_one_to_hundred() {
        let l: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(var_empirical(&l, 0.95).unwrap(), 95.0);
        let t = tail_estimate(&l, 0.95).unwrap();
        assert_eq!(t.cvar, 98.0);
        assert_eq!(t.mean_excess, 3.0);
        assert!(!t.no_exceedance);
        assert!((cvar_rockafellar_uryasev(&l, 0.95).unwrap() - 98.0).abs() < 1e-12);
    }

    #[test]
    fn constant_losses() {
        let l = vec![2.5; 40];
        let t = tail_estimate(&l, 0.95).unwrap();
        assert_eq!((t.var, t.cvar, t.mean_excess), (2.5, 2.5, 0.0));
        assert!(t.no_exceedance);
    }

    #[test]
    fn errors() {
        assert!(var_empirical(&[], 0.95).is_err());
        assert!(var_empirical(&[1.0], 1.0).is_err());
        assert!(var_empirical(&[f64::NAN], 0.5).is_err());
    }

    #[test]
    fn ru_splits_the_atom() {
        // N = 10, α = 0.85: tail mass 1.5 = top loss + half of the second
        let l: Vec<f64> = (1..=10).map(f64::from).collect();
        let v = cvar_rockafellar_uryasev(&l, 0.85).unwrap();
        assert!((v - (10.0 + 0.5 * 9.0) / 1.5).abs() < 1e-12);
        // the defining minimization, by brute force over ζ
        let brute = (0..=1000)
            .map(|i| {
                let z = i as f64 / 100.0;
                z + l.iter().map(|x| (x - z).max(0.0)).sum::<f64>() / (0.15 * 10.0)
            })
            .fold(f64::INFINITY, f64::min);
        assert!((v - brute).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn dominance_and_translation(
            l in prop::collection::vec(-50.0f64..50.0, 20..200),
            alpha in 0.5f64..0.99,
            c in -10.0f64..10.0,
        ) {
            let t = tail_estimate(&l, alpha).unwrap();
            prop_assert!(t.cvar >= t.var);
            let shifted: Vec<f64> = l.iter().map(|x| x + c).collect();
            let s = tail_estimate(&shifted, alpha).unwrap();
            prop_assert!((s.var - (t.var + c)).abs() < 1e-9);
            prop_assert!((s.cvar - (t.cvar + c)).abs() < 1e-9);
        }
    }
}
