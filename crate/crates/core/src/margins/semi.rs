//! Piecewise margin: GPD below u^L and above u^R, kernel-smoothed empirical
//! CDF in between.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::gpd::{fit_gpd, GpdTail};
use crate::error::{Error, Result};

/// Fewest residuals accepted by [`fit_margin`].
pub const MIN_RESIDUALS: usize = 300;
/// Points in the interior CDF grid.
pub const GRID_POINTS: usize = 512;
/// Probabilities returned by the CDF are kept inside (ε, 1 − ε).
pub const CDF_CLAMP: f64 = 1e-12;

/// Fitted semi-parametric margin. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MarginJson", try_from = "MarginJson")]
pub struct SemiParametricMargin {
    lower: GpdTail,
    upper: GpdTail,
    grid_x: Vec<f64>,
    grid_cdf: Vec<f64>,
    tail_fraction: f64,
}

#[derive(Serialize, Deserialize)]
struct MarginJson {
    xi_l: f64,
    beta_l: f64,
    u_l: f64,
    n_l: usize,
    fallback_l: bool,
    xi_r: f64,
    beta_r: f64,
    u_r: f64,
    n_r: usize,
    fallback_r: bool,
    n: usize,
    tail_fraction: f64,
    interior_grid: Vec<[f64; 2]>,
}

impl From<SemiParametricMargin> for MarginJson {
    fn from(m: SemiParametricMargin) -> Self {
        MarginJson {
            xi_l: m.lower.xi,
            beta_l: m.lower.beta,
            u_l: m.lower.threshold,
            n_l: m.lower.n_exceed,
            fallback_l: m.lower.fallback,
            xi_r: m.upper.xi,
            beta_r: m.upper.beta,
            u_r: m.upper.threshold,
            n_r: m.upper.n_exceed,
            fallback_r: m.upper.fallback,
            n: m.lower.n_total,
            tail_fraction: m.tail_fraction,
            interior_grid: m
                .grid_x
                .iter()
                .zip(&m.grid_cdf)
                .map(|(x, f)| [*x, *f])
                .collect(),
        }
    }
}

impl TryFrom<MarginJson> for SemiParametricMargin {
    type Error = Error;
    fn try_from(j: MarginJson) -> Result<Self> {
        let tail = |xi: f64, beta: f64, u: f64, k: usize, fallback: bool| -> Result<GpdTail> {
            if !(beta > 0.0) || !xi.is_finite() || !u.is_finite() || k == 0 || k >= j.n {
                return Err(Error::param("invalid GPD tail"));
            }
            Ok(GpdTail {
                xi,
                beta,
                threshold: u,
                n_exceed: k,
                n_total: j.n,
                fallback,
            })
        };
        let lower = tail(j.xi_l, j.beta_l, j.u_l, j.n_l, j.fallback_l)?;
        let upper = tail(j.xi_r, j.beta_r, j.u_r, j.n_r, j.fallback_r)?;
        let (grid_x, grid_cdf): (Vec<f64>, Vec<f64>) =
            j.interior_grid.iter().map(|p| (p[0], p[1])).unzip();
        let m = SemiParametricMargin {
            lower,
            upper,
            grid_x,
            grid_cdf,
            tail_fraction: j.tail_fraction,
        };
        m.validate()?;
        Ok(m)
    }
}

impl SemiParametricMargin {
    pub fn lower(&self) -> &GpdTail {
        &self.lower
    }

    pub fn upper(&self) -> &GpdTail {
        &self.upper
    }

    pub fn tail_fraction(&self) -> f64 {
        self.tail_fraction
    }

    /// Interior grid as (z, F(z)) pairs.
    pub fn interior(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid_x
            .iter()
            .copied()
            .zip(self.grid_cdf.iter().copied())
    }

    fn f_lower(&self) -> f64 {
        self.lower.mass()
    }

    fn f_upper(&self) -> f64 {
        1.0 - self.upper.mass()
    }

    fn validate(&self) -> Result<()> {
        let (x, f) = (&self.grid_x, &self.grid_cdf);
        if x.len() < 2 || x.len() != f.len() {
            return Err(Error::param("interior grid needs at least two points"));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || f.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::param("interior grid must be strictly increasing"));
        }
        if x[0] != self.lower.threshold || x[x.len() - 1] != self.upper.threshold {
            return Err(Error::param("interior grid must span [u_l, u_r]"));
        }
        if (f[0] - self.f_lower()).abs() > 1e-12 || (f[f.len() - 1] - self.f_upper()).abs() > 1e-12
        {
            return Err(Error::param("interior grid must meet the tail masses"));
        }
        Ok(())
    }

    /// Margin CDF, continuous at both thresholds.
    pub fn cdf(&self, z: f64) -> f64 {
        let (ul, ur) = (self.lower.threshold, self.upper.threshold);
        let p = if z.is_nan() {
            return f64::NAN;
        } else if z < ul {
            self.f_lower() * self.lower.survival(ul - z)
        } else if z > ur {
            1.0 - self.upper.mass() * self.upper.survival(z - ur)
        } else {
            let x = &self.grid_x;
            let i = x.partition_point(|v| *v <= z).clamp(1, x.len() - 1);
            let w = (z - x[i - 1]) / (x[i] - x[i - 1]);
            self.grid_cdf[i - 1] + w * (self.grid_cdf[i] - self.grid_cdf[i - 1])
        };
        p.clamp(CDF_CLAMP, 1.0 - CDF_CLAMP)
    }

    /// Inverse of [`Self::cdf`].
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::domain(format!("quantile level {u} outside (0, 1)")));
        }
        let (fl, fr) = (self.f_lower(), self.f_upper());
        if u < fl {
            return Ok(self.lower.threshold - self.lower.inverse_survival(u / fl));
        }
        if u > fr {
            return Ok(
                self.upper.threshold + self.upper.inverse_survival((1.0 - u) / self.upper.mass())
            );
        }
        let f = &self.grid_cdf;
        let i = f.partition_point(|v| *v <= u).clamp(1, f.len() - 1);
        let w = (u - f[i - 1]) / (f[i] - f[i - 1]);
        Ok(self.grid_x[i - 1] + w * (self.grid_x[i] - self.grid_x[i - 1]))
    }

    /// Probability-integral transform of a residual series.
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| self.cdf(*v)).collect()
    }
}

/// Fits GPD tails beyond the empirical `tail_fraction` quantiles and a
/// Gaussian-kernel CDF on the interior, rescaled to meet the tail masses.
pub fn fit_margin(residuals: &[f64], tail_fraction: f64) -> Result<SemiParametricMargin> {
    let n = residuals.len();
    if n < MIN_RESIDUALS {
        return Err(Error::InsufficientData(format!(
            "{n} residuals, at least {MIN_RESIDUALS} needed"
        )));
    }
    if !(tail_fraction > 0.0 && tail_fraction < 0.5) {
        return Err(Error::param(format!(
            "tail fraction {tail_fraction} outside (0, 0.5)"
        )));
    }
    if let Some(i) = residuals.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data {
            line: i + 1,
            msg: "non-finite residual".into(),
        });
    }
    let mut z = residuals.to_vec();
    z.sort_by(f64::total_cmp);
    let k = (tail_fraction * n as f64).floor() as usize;
    let (ul, ur) = (z[k], z[n - 1 - k]);
    if !(ur > ul) {
        return Err(Error::DegenerateColumn(0));
    }

    let below = z.partition_point(|v| *v < ul);
    let above = n - z.partition_point(|v| *v <= ur);
    let lower_y: Vec<f64> = z[..below].iter().map(|v| ul - v).collect();
    let upper_y: Vec<f64> = z[n - above..].iter().map(|v| v - ur).collect();
    let lo = fit_gpd(&lower_y)?;
    let hi = fit_gpd(&upper_y)?;
    let lower = GpdTail {
        xi: lo.xi,
        beta: lo.beta,
        threshold: ul,
        n_exceed: below,
        n_total: n,
        fallback: !lo.converged,
    };
    let upper = GpdTail {
        xi: hi.xi,
        beta: hi.beta,
        threshold: ur,
        n_exceed: above,
        n_total: n,
        fallback: !hi.converged,
    };

    let h = silverman_bandwidth(&z);
    let grid_x: Vec<f64> = (0..GRID_POINTS)
        .map(|j| {
            if j == GRID_POINTS - 1 {
                ur
            } else {
                ul + (ur - ul) * j as f64 / (GRID_POINTS - 1) as f64
            }
        })
        .collect();
    let raw: Vec<f64> = grid_x.iter().map(|x| kernel_cdf(&z, h, *x)).collect();
    let (fl, fr) = (lower.mass(), 1.0 - upper.mass());
    let (k0, k1) = (raw[0], raw[GRID_POINTS - 1]);
    // a small linear blend keeps the grid strictly increasing across data gaps
    const BLEND: f64 = 1e-9;
    let grid_cdf: Vec<f64> = raw
        .iter()
        .zip(&grid_x)
        .enumerate()
        .map(|(j, (kv, x))| {
            if j == 0 {
                return fl;
            }
            if j == GRID_POINTS - 1 {
                return fr;
            }
            let s = if k1 > k0 { (kv - k0) / (k1 - k0) } else { 0.0 };
            let s = (1.0 - BLEND) * s + BLEND * (x - ul) / (ur - ul);
            fl + s * (fr - fl)
        })
        .collect();

    let margin = SemiParametricMargin {
        lower,
        upper,
        grid_x,
        grid_cdf,
        tail_fraction,
    };
    margin.validate()?;
    Ok(margin)
}

/// Evaluates a fitted margin's CDF.
pub fn margin_cdf(margin: &SemiParametricMargin, z: f64) -> f64 {
    margin.cdf(z)
}

/// Evaluates a fitted margin's quantile function.
pub fn margin_quantile(margin: &SemiParametricMargin, u: f64) -> Result<f64> {
    margin.quantile(u)
}

fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let sd = (sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = sample_quantile(sorted, 0.75) - sample_quantile(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Linear-interpolation sample quantile of sorted data.
fn sample_quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Mean of Φ((x − z_i)/h) over sorted data. Points further than 12h away
/// contribute exactly 0 or 1 at double precision.
fn kernel_cdf(sorted: &[f64], h: f64, x: f64) -> f64 {
    let lo = sorted.partition_point(|v| *v < x - 12.0 * h);
    let hi = sorted.partition_point(|v| *v <= x + 12.0 * h);
    let inner: f64 = sorted[lo..hi]
        .iter()
        .map(|v| 0.5 * erfc(-(x - v) / (h * std::f64::consts::SQRT_2)))
        .sum();
    (lo as f64 + inner) / sorted.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal, StudentT};

    fn student(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = substream(seed, 0);
        let t = StudentT::new(5.0).unwrap();
        (0..n).map(|_| t.sample(&mut rng)).collect()
    }

    #[test]
    fn threshold_counts() {
        let z = student(3343, 1);
        let m = fit_margin(&z, 0.10).unwrap();
        assert_eq!(m.lower().n_exceed, 334);
        assert_eq!(m.upper().n_exceed, 334);
        assert_eq!(m.lower().n_total, 3343);
    }

    #[test]
    fn boundary_values_and_continuity() {
        let z = student(5000, 2);
        let m = fit_margin(&z, 0.10).unwrap();
        let (ul, ur) = (m.lower().threshold, m.upper().threshold);
        assert!((m.cdf(ul) - 0.10).abs() < 1e-12);
        assert!((m.cdf(ur) - 0.90).abs() < 1e-12);
        for &u in &[ul, ur] {
            let left = m.cdf(u - 1e-13);
            let right = m.cdf(u + 1e-13);
            assert!((left - right).abs() < 1e-12, "{left} {right}");
        }
        assert!((m.quantile(0.10).unwrap() - ul).abs() < 1e-12);
        assert!((m.quantile(0.90).unwrap() - ur).abs() < 1e-12);
    }

    #[test]
    fn lower_tail_quantile_by_hand() {
        let z = student(4000, 3);
        let m = fit_margin(&z, 0.10).unwrap();
        let t = m.lower();
        let s = 0.001 / t.mass();
        let hand = t.threshold - t.beta / t.xi * (s.powf(-t.xi) - 1.0);
        assert!((m.quantile(0.001).unwrap() - hand).abs() < 1e-10);
    }

    #[test]
    fn round_trip_and_monotone() {
        let z = student(3000, 4);
        let m = fit_margin(&z, 0.10).unwrap();
        let mut rng = substream(9, 1);
        for _ in 0..1000 {
            let u = 1e-6 + (1.0 - 2e-6) * rng.random::<f64>();
            let back = m.cdf(m.quantile(u).unwrap());
            assert!((back - u).abs() < 1e-9, "{u} {back}");
        }
        let (lo, hi) = (
            z.iter().cloned().fold(f64::INFINITY, f64::min) - 3.0,
            z.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 3.0,
        );
        let mut prev = 0.0;
        for i in 0..10_000 {
            let x = lo + (hi - lo) * i as f64 / 9999.0;
            let c = m.cdf(x);
            assert!(c > prev, "not increasing at {x}");
            prev = c;
        }
    }

    #[test]
    fn normal_tails_are_light() {
        // Normal exceedances approach ξ = 0 only slowly: beyond the 90% point
        // the best GPD has ξ ≈ −0.14.
        let mut rng = substream(5, 0);
        let z: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let m = fit_margin(&z, 0.10).unwrap();
        for t in [m.lower(), m.upper()] {
            assert!(t.xi < 0.0 && t.xi > -0.2, "{t:?}");
        }
    }

    #[test]
    fn json_round_trip() {
        let m = fit_margin(&student(1000, 6), 0.1).unwrap();
        let text = serde_json::to_string(&m).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "xi_l",
            "beta_l",
            "u_l",
            "xi_r",
            "beta_r",
            "u_r",
            "tail_fraction",
            "interior_grid",
        ] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let back: SemiParametricMargin = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            fit_margin(&student(299, 1), 0.1),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            fit_margin(&vec![1.0; 500], 0.1),
            Err(Error::DegenerateColumn(_))
        ));
        let m = fit_margin(&student(400, 1), 0.1).unwrap();
        assert!(m.quantile(0.0).is_err() && m.quantile(1.0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn quantile_inverts_cdf(seed in 0u64..1000, u in 1e-6f64..(1.0 - 1e-6)) {
            let m = fit_margin(&student(600, seed), 0.1).unwrap();
            let back = m.cdf(m.quantile(u).unwrap());
            prop_assert!((back - u).abs() < 1e-9);
        }
    }
}
