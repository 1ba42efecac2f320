use serde::{Deserialize, Serialize};

use super::params::ArmaAparchParams;
use crate::error::{Error, Result};
use crate::rng::substream;

/// Steps discarded before a simulated path is recorded.
pub const BURN_IN: usize = 500;

/// Lagged quantities the recursions need, most recent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterState {
    /// r_{t-1}, …, r_{t-p}
    pub returns: Vec<f64>,
    /// ε_{t-1}, …, ε_{t-max(q,m)}
    pub eps: Vec<f64>,
    /// σ^δ_{t-1}, …, σ^δ_{t-n}
    pub sigma_pow: Vec<f64>,
}

fn push_front(v: &mut [f64], x: f64) {
    if !v.is_empty() {
        v.rotate_right(1);
        v[0] = x;
    }
}

impl FilterState {
    /// Presample values: past returns at the sample mean, past shocks at
    /// zero and past σ^δ at the sample mean of |r − r̄|^δ.
    pub fn presample(params: &ArmaAparchParams, returns: &[f64]) -> Result<Self> {
        if returns.is_empty() {
            return Err(Error::InsufficientData("empty return series".into()));
        }
        let mean = returns.iter().sum::<f64>() / returns.len() as f64;
        let s = params.spec();
        let sp = returns
            .iter()
            .map(|r| (r - mean).abs().powf(params.delta))
            .sum::<f64>()
            / returns.len() as f64;
        Ok(Self {
            returns: vec![mean; s.p],
            eps: vec![0.0; s.q.max(s.m)],
            sigma_pow: vec![sp; s.n],
        })
    }

    /// Long-run values: unconditional mean return, zero shocks and the
    /// unconditional E σ^δ.
    pub fn unconditional(params: &ArmaAparchParams) -> Result<Self> {
        let margin = params.stationarity_margin()?;
        if margin <= 0.0 {
            return Err(Error::NonStationary(format!(
                "stationarity margin {margin:.4} ≤ 0"
            )));
        }
        let s = params.spec();
        let ar_sum: f64 = params.ar.iter().sum();
        let mean = if ar_sum < 1.0 {
            params.mu / (1.0 - ar_sum)
        } else {
            params.mu
        };
        Ok(Self {
            returns: vec![mean; s.p],
            eps: vec![0.0; s.q.max(s.m)],
            sigma_pow: vec![params.omega / margin; s.n],
        })
    }

    fn check(&self, params: &ArmaAparchParams) -> Result<()> {
        let s = params.spec();
        if self.returns.len() != s.p
            || self.eps.len() != s.q.max(s.m)
            || self.sigma_pow.len() != s.n
        {
            return Err(Error::param("filter state does not match the model orders"));
        }
        Ok(())
    }

    fn push(&mut self, r: f64, eps: f64, sigma_pow: f64) {
        push_front(&mut self.returns, r);
        push_front(&mut self.eps, eps);
        push_front(&mut self.sigma_pow, sigma_pow);
    }
}

/// Conditional mean and σ^δ of the next observation.
fn next_moments(p: &ArmaAparchParams, st: &FilterState) -> (f64, f64) {
    let mut mean = p.mu;
    for (a, r) in p.ar.iter().zip(&st.returns) {
        mean += a * r;
    }
    for (b, e) in p.ma.iter().zip(&st.eps) {
        mean += b * e;
    }
    let mut sp = p.omega;
    for ((a, g), e) in p.alpha.iter().zip(&p.gamma).zip(&st.eps) {
        let x = e.abs() - g * e;
        if x > 0.0 {
            sp += a * x.powf(p.delta);
        }
    }
    for (b, s) in p.beta.iter().zip(&st.sigma_pow) {
        sp += b * s;
    }
    (mean, sp)
}

/// Output of [`aparch_filter`].
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub sigma: Vec<f64>,
    /// Standardized residuals z_t = ε_t / σ_t.
    pub residuals: Vec<f64>,
    pub eps: Vec<f64>,
    pub cond_mean: Vec<f64>,
    /// State after the last observation, ready for forecasting.
    pub state: FilterState,
}

/// Runs the ARMA and APARCH recursions over `returns` from the presample state.
pub fn aparch_filter(params: &ArmaAparchParams, returns: &[f64]) -> Result<FilterOutput> {
    params.validate()?;
    let state = FilterState::presample(params, returns)?;
    aparch_filter_from(params, returns, state)
}

/// Runs the recursions from an explicit starting state.
pub fn aparch_filter_from(
    params: &ArmaAparchParams,
    returns: &[f64],
    mut state: FilterState,
) -> Result<FilterOutput> {
    params.validate()?;
    state.check(params)?;
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::Numerical(format!("non-finite return at index {i}")));
    }
    let n = returns.len();
    let mut out = FilterOutput {
        sigma: Vec::with_capacity(n),
        residuals: Vec::with_capacity(n),
        eps: Vec::with_capacity(n),
        cond_mean: Vec::with_capacity(n),
        state: state.clone(),
    };
    for &r in returns {
        let (mean, sp) = next_moments(params, &state);
        let sigma = sp.powf(1.0 / params.delta);
        let e = r - mean;
        out.sigma.push(sigma);
        out.residuals.push(e / sigma);
        out.eps.push(e);
        out.cond_mean.push(mean);
        state.push(r, e, sp);
    }
    out.state = state;
    Ok(out)
}

/// Advances a state by one observed return.
pub fn update_state(params: &ArmaAparchParams, state: &mut FilterState, r: f64) {
    let (mean, sp) = next_moments(params, state);
    state.push(r, r - mean, sp);
}

/// Σ_t [ln f(z_t) − ln σ_t], or −∞ when the parameters are infeasible or
/// non-stationary.
pub fn loglik(params: &ArmaAparchParams, returns: &[f64]) -> f64 {
    if params.validate().is_err() || returns.is_empty() {
        return f64::NEG_INFINITY;
    }
    match params.stationarity_margin() {
        Ok(m) if m > 0.0 => {}
        _ => return f64::NEG_INFINITY,
    }
    let Ok(mut state) = FilterState::presample(params, returns) else {
        return f64::NEG_INFINITY;
    };
    loglik_from(params, returns, &mut state)
}

pub(crate) fn loglik_from(
    params: &ArmaAparchParams,
    returns: &[f64],
    state: &mut FilterState,
) -> f64 {
    let Ok(dist) = params.innovation() else {
        return f64::NEG_INFINITY;
    };
    let inv_delta = 1.0 / params.delta;
    let mut total = 0.0;
    for &r in returns {
        let (mean, sp) = next_moments(params, state);
        if !(sp > 0.0) {
            return f64::NEG_INFINITY;
        }
        let ln_sigma = sp.ln() * inv_delta;
        let e = r - mean;
        total += dist.ln_density(e * (-ln_sigma).exp()) - ln_sigma;
        state.push(r, e, sp);
    }
    if total.is_finite() {
        total
    } else {
        f64::NEG_INFINITY
    }
}

/// Conditional mean and σ of the next observation after `state`.
pub fn forecast_from_state(params: &ArmaAparchParams, state: &FilterState) -> (f64, f64) {
    let (mean, sp) = next_moments(params, state);
    (mean, sp.powf(1.0 / params.delta))
}

/// A simulated path with the innovations and states that produced it.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    pub returns: Vec<f64>,
    pub sigma: Vec<f64>,
    pub innovations: Vec<f64>,
    /// State just before the first recorded return.
    pub initial_state: FilterState,
    /// State after the last recorded return.
    pub final_state: FilterState,
}

/// Simulates `t` returns after a burn-in of [`BURN_IN`] steps.
pub fn simulate(params: &ArmaAparchParams, t: usize, seed: u64) -> Result<SimulatedPath> {
    let dist = params.innovation()?;
    let mut rng = substream(seed, 0);
    let z: Vec<f64> = (0..BURN_IN + t).map(|_| dist.sample(&mut rng)).collect();
    simulate_with_innovations(params, &z[..BURN_IN], &z[BURN_IN..])
}

/// Runs the model forward on given standardized innovations: the first slice
/// is burn-in, the second is recorded.
pub fn simulate_with_innovations(
    params: &ArmaAparchParams,
    burn: &[f64],
    z: &[f64],
) -> Result<SimulatedPath> {
    let mut state = FilterState::unconditional(params)?;
    let step = |state: &mut FilterState, z: f64| {
        let (mean, sp) = next_moments(params, state);
        let sigma = sp.powf(1.0 / params.delta);
        let e = sigma * z;
        state.push(mean + e, e, sp);
        (mean + e, sigma)
    };
    for &zt in burn {
        step(&mut state, zt);
    }
    let initial_state = state.clone();
    let mut returns = Vec::with_capacity(z.len());
    let mut sigma = Vec::with_capacity(z.len());
    for &zt in z {
        let (r, s) = step(&mut state, zt);
        returns.push(r);
        sigma.push(s);
    }
    Ok(SimulatedPath {
        returns,
        sigma,
        innovations: z.to_vec(),
        initial_state,
        final_state: state,
    })
}
