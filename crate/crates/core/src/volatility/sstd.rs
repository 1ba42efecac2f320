//! Standardized skewed Student-t (Fernández–Steel skewing of a unit-variance
//! t, then shifted and scaled to mean 0 and variance 1).

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::numerics::roots::newton_bisect;

/// Degrees of freedom above which the t law is replaced by its normal limit.
const NORMAL_LIMIT: f64 = 1e7;

/// lnΓ(x + ½) − lnΓ(x) without cancellation at large x.
fn ln_gamma_half_ratio(x: f64) -> f64 {
    if x < 20.0 {
        return ln_gamma(x + 0.5) - ln_gamma(x);
    }
    let r = 1.0 / x;
    let r2 = r * r;
    0.5 * x.ln() - r / 8.0 + r * r2 / 192.0 - r * r2 * r2 / 640.0
        + 17.0 * r * r2 * r2 * r2 / 14336.0
}

/// Skewed-t innovation law with its standardization constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "SkewTParams", try_from = "SkewTParams")]
pub struct SkewedT {
    xi: f64,
    nu: f64,
    mean_shift: f64,
    scale: f64,
    ln_t_const: f64,
    ln_g: f64,
}

#[derive(Serialize, Deserialize)]
struct SkewTParams {
    skew: f64,
    shape: f64,
}

impl From<SkewedT> for SkewTParams {
    fn from(d: SkewedT) -> Self {
        SkewTParams {
            skew: d.xi,
            shape: d.nu,
        }
    }
}

impl TryFrom<SkewTParams> for SkewedT {
    type Error = Error;
    fn try_from(p: SkewTParams) -> Result<Self> {
        SkewedT::new(p.skew, p.shape)
    }
}

impl SkewedT {
    pub fn new(skew: f64, shape: f64) -> Result<Self> {
        if !(skew > 0.0 && skew.is_finite()) {
            return Err(Error::param(format!("skew ξ = {skew} must be positive")));
        }
        if !(shape > 2.0) || shape.is_nan() {
            return Err(Error::param(format!("shape ν = {shape} must exceed 2")));
        }
        let (xi, nu) = (skew, shape);
        // E|T| of the unit-variance t; Γ ratios taken in log space
        let m1 = if nu > NORMAL_LIMIT {
            (2.0 / PI).sqrt()
        } else {
            let ln_ratio = ln_gamma_half_ratio(nu / 2.0);
            2.0 * (nu - 2.0).sqrt() / ((nu - 1.0) * PI.sqrt()) * ln_ratio.exp()
        };
        let mean_shift = m1 * (xi - 1.0 / xi);
        let scale = ((1.0 - m1 * m1) * (xi * xi + 1.0 / (xi * xi)) + 2.0 * m1 * m1 - 1.0).sqrt();
        let ln_t_const = if nu > NORMAL_LIMIT {
            -0.5 * (2.0 * PI).ln()
        } else {
            ln_gamma_half_ratio(nu / 2.0) - 0.5 * (PI * (nu - 2.0)).ln()
        };
        let ln_g = (2.0 / (xi + 1.0 / xi)).ln();
        Ok(Self {
            xi,
            nu,
            mean_shift,
            scale,
            ln_t_const,
            ln_g,
        })
    }

    pub fn skew(&self) -> f64 {
        self.xi
    }

    pub fn shape(&self) -> f64 {
        self.nu
    }

    /// ln density of the unit-variance t.
    fn ln_t(&self, x: f64) -> f64 {
        if self.nu > NORMAL_LIMIT {
            self.ln_t_const - 0.5 * x * x
        } else {
            self.ln_t_const - 0.5 * (self.nu + 1.0) * (x * x / (self.nu - 2.0)).ln_1p()
        }
    }

    /// Distribution function of the unit-variance t.
    fn t_cdf(&self, x: f64) -> f64 {
        if self.nu > NORMAL_LIMIT {
            return 0.5 * erfc(-x / std::f64::consts::SQRT_2);
        }
        let nu = self.nu;
        let q = x * (nu / (nu - 2.0)).sqrt();
        let tail = 0.5 * beta_reg(0.5 * nu, 0.5, nu / (nu + q * q));
        if q < 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    /// Quantile of the unit-variance t.
    fn t_quantile(&self, p: f64) -> f64 {
        let start = if self.nu > NORMAL_LIMIT {
            Normal::standard().inverse_cdf(p)
        } else {
            let t = StudentsT::new(0.0, 1.0, self.nu).expect("ν > 2");
            t.inverse_cdf(p) * ((self.nu - 2.0) / self.nu).sqrt()
        };
        let start = if start.is_finite() { start } else { 0.0 };
        let f = |x: f64| (self.t_cdf(x) - p, self.ln_t(x).exp());
        let mut width = 1.0 + start.abs() * 0.1;
        loop {
            let (lo, hi) = (start - width, start + width);
            if f(lo).0 <= 0.0 && f(hi).0 >= 0.0 {
                return newton_bisect(f, lo, hi, 1e-15).unwrap_or(start);
            }
            width *= 4.0;
            if width > 1e300 {
                return start;
            }
        }
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        let z = x * self.scale + self.mean_shift;
        let arg = if z >= 0.0 { z / self.xi } else { z * self.xi };
        self.ln_g + self.ln_t(arg) + self.scale.ln()
    }

    pub fn density(&self, x: f64) -> f64 {
        self.ln_density(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let z = x * self.scale + self.mean_shift;
        let g = self.ln_g.exp();
        if z >= 0.0 {
            1.0 - g * self.xi * self.t_cdf(-z / self.xi)
        } else {
            g / self.xi * self.t_cdf(z * self.xi)
        }
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::domain(format!("probability {p} not in (0, 1)")));
        }
        let g = self.ln_g.exp();
        let split = 1.0 / (1.0 + self.xi * self.xi);
        let z = if p < split {
            self.t_quantile(p * self.xi / g) / self.xi
        } else {
            -self.xi * self.t_quantile((1.0 - p) / (g * self.xi))
        };
        Ok((z - self.mean_shift) / self.scale)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let t = if self.nu > NORMAL_LIMIT {
            rand_distr::StandardNormal.sample(rng)
        } else {
            let d = StudentT::new(self.nu).expect("ν > 2");
            d.sample(rng) * ((self.nu - 2.0) / self.nu).sqrt()
        };
        let positive = rng.random::<f64>() < self.xi * self.xi / (1.0 + self.xi * self.xi);
        let z = if positive {
            t.abs() * self.xi
        } else {
            -t.abs() / self.xi
        };
        (z - self.mean_shift) / self.scale
    }

    /// E[Z^δ; Z < 0] in absolute value and E[Z^δ; Z > 0].
    pub(crate) fn half_abs_moments(&self, delta: f64) -> (f64, f64) {
        let lower = crate::numerics::integrate(
            |z| (-z).powf(delta) * self.density(z),
            f64::NEG_INFINITY,
            0.0,
            1e-12,
        );
        let upper = crate::numerics::integrate(
            |z| z.powf(delta) * self.density(z),
            0.0,
            f64::INFINITY,
            1e-12,
        );
        (lower.value, upper.value)
    }
}

pub fn sstd_density(z: f64, skew: f64, shape: f64) -> Result<f64> {
    Ok(SkewedT::new(skew, shape)?.density(z))
}

pub fn sstd_cdf(z: f64, skew: f64, shape: f64) -> Result<f64> {
    Ok(SkewedT::new(skew, shape)?.cdf(z))
}

pub fn sstd_quantile(u: f64, skew: f64, shape: f64) -> Result<f64> {
    SkewedT::new(skew, shape)?.quantile(u)
}
