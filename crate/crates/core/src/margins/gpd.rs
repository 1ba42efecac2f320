//! Generalized Pareto tails fitted by maximum likelihood to threshold
//! exceedances, with a probability-weighted-moment fallback.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fewest exceedances accepted by [`fit_gpd`].
pub const MIN_EXCEEDANCES: usize = 30;

/// Lower end of the admissible tail-index box.
pub const XI_MIN: f64 = -0.5;
/// Upper end of the admissible tail-index box.
pub const XI_MAX: f64 = 1.0;

/// One GPD tail beyond a threshold. Exceedances are measured away from the
/// body, so for a lower tail `y = threshold - z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpdTail {
    pub xi: f64,
    pub beta: f64,
    pub threshold: f64,
    pub n_exceed: usize,
    pub n_total: usize,
    /// Set when the likelihood fit failed and PWM estimates are used.
    pub fallback: bool,
}

impl GpdTail {
    /// Tail probability mass N_u / N.
    pub fn mass(&self) -> f64 {
        self.n_exceed as f64 / self.n_total as f64
    }

    /// P(Y > y) for an exceedance y ≥ 0.
    pub fn survival(&self, y: f64) -> f64 {
        gpd_survival(self.xi, self.beta, y)
    }

    /// Exceedance with survival probability `s` ∈ (0, 1].
    pub fn inverse_survival(&self, s: f64) -> f64 {
        gpd_inverse_survival(self.xi, self.beta, s)
    }

    /// Right endpoint of the exceedance law, infinite unless ξ < 0.
    pub fn endpoint(&self) -> f64 {
        if self.xi < 0.0 {
            self.beta / -self.xi
        } else {
            f64::INFINITY
        }
    }
}

/// GPD survival function; the ξ → 0 limit is the exponential law.
pub fn gpd_survival(xi: f64, beta: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return 1.0;
    }
    let x = xi * y / beta;
    if x <= -1.0 {
        return 0.0;
    }
    (-y / beta * ln1p_ratio(x)).exp()
}

/// Inverse of [`gpd_survival`].
pub fn gpd_inverse_survival(xi: f64, beta: f64, s: f64) -> f64 {
    if s >= 1.0 {
        return 0.0;
    }
    let ls = s.ln();
    if xi.abs() < 1e-12 {
        return -beta * ls;
    }
    beta / xi * (-xi * ls).exp_m1()
}

/// ln(1 + x) / x, continuous through x = 0.
fn ln1p_ratio(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x / 2.0 + x * x / 3.0
    } else {
        x.ln_1p() / x
    }
}

/// (ln(1 + x) − x / (1 + x)) / x², continuous through x = 0.
fn score_kernel(x: f64) -> f64 {
    if x.abs() < 0.05 {
        // alternating series Σ_{k≥2} (−1)^k (k−1)/k x^{k−2}
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 2..40 {
            let kf = k as f64;
            let term = (kf - 1.0) / kf * pow;
            sum += if k % 2 == 0 { term } else { -term };
            pow *= x;
            if pow.abs() < 1e-18 {
                break;
            }
        }
        sum
    } else {
        (x.ln_1p() - x / (1.0 + x)) / (x * x)
    }
}

/// GPD log-likelihood of exceedances `y`; −∞ outside the support.
pub fn gpd_loglik(xi: f64, beta: f64, y: &[f64]) -> f64 {
    if !(beta > 0.0) || !xi.is_finite() {
        return f64::NEG_INFINITY;
    }
    let mut acc = 0.0;
    for &yi in y {
        let z = yi / beta;
        let x = xi * z;
        if x <= -1.0 {
            return f64::NEG_INFINITY;
        }
        // (1 + 1/ξ) ln(1 + ξz) = ln(1 + x) + z·ln(1 + x)/x
        acc += x.ln_1p() + z * ln1p_ratio(x);
    }
    -(y.len() as f64) * beta.ln() - acc
}

/// Score of the log-likelihood with respect to (ξ, ln β).
fn score_log_scale(xi: f64, beta: f64, y: &[f64]) -> [f64; 2] {
    let mut g_xi = 0.0;
    let mut s2 = 0.0;
    for &yi in y {
        let z = yi / beta;
        let x = xi * z;
        let a = 1.0 + x;
        g_xi += z * z * score_kernel(x) - z / a;
        s2 += z / a;
    }
    [g_xi, -(y.len() as f64) + (1.0 + xi) * s2]
}

/// Score with respect to (ξ, β).
pub fn gpd_score(xi: f64, beta: f64, y: &[f64]) -> [f64; 2] {
    let [g_xi, g_b] = score_log_scale(xi, beta, y);
    [g_xi, g_b / beta]
}

/// Fitted GPD parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdEstimate {
    pub xi: f64,
    pub beta: f64,
    pub loglik: f64,
    /// False when Newton failed and the PWM estimate is returned instead.
    pub converged: bool,
    pub iterations: usize,
}

/// Probability-weighted-moment estimates (Hosking & Wallis).
pub fn gpd_pwm(y: &[f64]) -> Result<(f64, f64)> {
    let n = y.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("{n} exceedances")));
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n as f64;
    let a0 = sorted.iter().sum::<f64>() / nf;
    let a1 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (nf - 1.0 - i as f64) / (nf - 1.0) * v)
        .sum::<f64>()
        / nf;
    let denom = a0 - 2.0 * a1;
    if !(denom > 0.0) || !(a0 > 0.0) {
        return Err(Error::Numerical("degenerate exceedances for PWM".into()));
    }
    Ok((2.0 - a0 / denom, 2.0 * a0 * a1 / denom))
}

/// Maximum-likelihood GPD fit: damped Newton on (ξ, ln β) inside the box
/// ξ ∈ (−0.5, 1), started from PWM. Falls back to PWM when Newton does not
/// reach a stationary point inside the box.
pub fn fit_gpd(y: &[f64]) -> Result<GpdEstimate> {
    let n = y.len();
    if n < MIN_EXCEEDANCES {
        return Err(Error::InsufficientData(format!(
            "{n} exceedances, at least {MIN_EXCEEDANCES} needed"
        )));
    }
    if y.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::domain("exceedances must be finite and non-negative"));
    }
    let (xi_pwm, beta_pwm) = gpd_pwm(y)?;
    let pwm = GpdEstimate {
        xi: xi_pwm,
        beta: beta_pwm,
        loglik: gpd_loglik(xi_pwm, beta_pwm, y),
        converged: false,
        iterations: 0,
    };

    let inside = |xi: f64| xi > XI_MIN && xi < XI_MAX;
    let mut xi = xi_pwm.clamp(XI_MIN + 0.05, XI_MAX - 0.05);
    let mut b = beta_pwm.ln();
    let mut ll = gpd_loglik(xi, b.exp(), y);
    if !ll.is_finite() {
        // the PWM start can put sample points outside a short-tailed support
        xi = xi.max(0.0);
        ll = gpd_loglik(xi, b.exp(), y);
    }
    if !ll.is_finite() {
        return Ok(pwm);
    }
    let tol = 1e-10 * n as f64;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..200 {
        iterations = it + 1;
        let g = score_log_scale(xi, b.exp(), y);
        let gnorm = g[0].hypot(g[1]);
        if gnorm <= tol {
            converged = true;
            break;
        }
        let h = hessian(xi, b, y);
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let dir = if h[0][0] < 0.0 && det > 0.0 {
            [
                -(h[1][1] * g[0] - h[0][1] * g[1]) / det,
                -(-h[1][0] * g[0] + h[0][0] * g[1]) / det,
            ]
        } else {
            [g[0] / n as f64, g[1] / n as f64]
        };
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let (xn, bn) = (xi + t * dir[0], b + t * dir[1]);
            if inside(xn) {
                let ln = gpd_loglik(xn, bn.exp(), y);
                if ln.is_finite() && ln >= ll - 1e-13 * ll.abs() {
                    let step = (xn - xi).abs() + (bn - b).abs();
                    xi = xn;
                    b = bn;
                    ll = ln;
                    moved = step > 1e-15;
                    break;
                }
            }
            t *= 0.5;
        }
        if !moved {
            let g = score_log_scale(xi, b.exp(), y);
            converged = g[0].hypot(g[1]) <= 1e-7 * n as f64;
            break;
        }
    }
    if !converged || !inside(xi) {
        log::warn!("GPD likelihood fit failed, using PWM estimates");
        return Ok(pwm);
    }
    Ok(GpdEstimate {
        xi,
        beta: b.exp(),
        loglik: ll,
        converged: true,
        iterations,
    })
}

fn hessian(xi: f64, b: f64, y: &[f64]) -> [[f64; 2]; 2] {
    let p = [xi, b];
    let mut h = [[0.0; 2]; 2];
    for j in 0..2 {
        let step = 1e-5 * (1.0 + p[j].abs());
        let mut up = p;
        let mut down = p;
        up[j] += step;
        down[j] -= step;
        let gu = score_log_scale(up[0], up[1].exp(), y);
        let gd = score_log_scale(down[0], down[1].exp(), y);
        for i in 0..2 {
            h[i][j] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    let off = 0.5 * (h[0][1] + h[1][0]);
    h[0][1] = off;
    h[1][0] = off;
    h
}
