use log::{debug, warn};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::filter::{aparch_filter, forecast_from_state, loglik, FilterState};
use super::params::{ArmaAparchParams, ArmaAparchSpec};
use crate::error::{Error, Result};
use crate::numerics::optim::{bfgs, nelder_mead, BfgsOptions, NelderMeadOptions};
use crate::rng::substream;

const SHAPE_FLOOR: f64 = 2.01;
const SHAPE_CAP: f64 = 300.0;
const BFGS: BfgsOptions = BfgsOptions {
    max_iter: 300,
    g_tol: 1e-6,
    f_tol: 1e-14,
    grad_step: 1e-5,
};

/// Fitting controls.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Number of simplex starts (the moment start plus jittered copies).
    pub starts: usize,
    pub seed: u64,
    pub max_evals_per_start: usize,
    /// Replaces the moment start, e.g. with the previous fit in a back-test.
    pub warm_start: Option<ArmaAparchParams>,
    pub std_errors: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            seed: 0,
            max_evals_per_start: 2000,
            warm_start: None,
            std_errors: true,
        }
    }
}

/// A fitted model with its filtered paths.
#[derive(Debug, Clone)]
pub struct ArmaAparchFit {
    pub spec: ArmaAparchSpec,
    pub params: ArmaAparchParams,
    /// Standard errors in parameter-vector order; NaN where the observed
    /// information is not invertible.
    pub std_errors: Vec<f64>,
    pub sigma_path: Vec<f64>,
    pub residuals: Vec<f64>,
    pub loglik: f64,
    pub aic_total: f64,
    pub aic_per_obs: f64,
    pub converged: bool,
    pub evaluations: usize,
    /// State after the last observation.
    pub state: FilterState,
}

/// Serializable digest of a fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitSummary {
    pub spec: ArmaAparchSpec,
    pub params: ArmaAparchParams,
    pub std_errors: serde_json::Map<String, serde_json::Value>,
    pub loglik: f64,
    pub aic_total: f64,
    pub aic_per_obs: f64,
    pub converged: bool,
    pub n_obs: usize,
}

impl ArmaAparchFit {
    pub fn summary(&self) -> FitSummary {
        let std_errors = self
            .spec
            .names()
            .into_iter()
            .zip(&self.std_errors)
            .map(|(k, &v)| {
                (
                    k,
                    serde_json::Number::from_f64(v).map_or(serde_json::Value::Null, Into::into),
                )
            })
            .collect();
        FitSummary {
            spec: self.spec,
            params: self.params.clone(),
            std_errors,
            loglik: self.loglik,
            aic_total: self.aic_total,
            aic_per_obs: self.aic_per_obs,
            converged: self.converged,
            n_obs: self.residuals.len(),
        }
    }

    /// Conditional mean and σ for the day after the sample.
    pub fn forecast_one_step(&self) -> (f64, f64) {
        forecast_from_state(&self.params, &self.state)
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// 1 − Σ ar, kept away from zero so the mean can be reparametrized.
fn ar_gap(ar: &[f64]) -> f64 {
    let g = 1.0 - ar.iter().sum::<f64>();
    if g.abs() < 1e-6 {
        1e-6f64.copysign(g)
    } else {
        g
    }
}

/// Maps parameters to the unconstrained optimizer coordinates. The intercept
/// is carried as the long-run mean μ / (1 − Σ ar), which decouples it from
/// the AR coefficients.
fn to_free(p: &ArmaAparchParams) -> Vec<f64> {
    let mut v = vec![p.mu / ar_gap(&p.ar)];
    v.extend(&p.ar);
    v.extend(&p.ma);
    v.push(p.omega.ln());
    v.extend(p.alpha.iter().map(|a| a.max(1e-8).ln()));
    v.extend(p.gamma.iter().map(|g| g.clamp(-0.999, 0.999).atanh()));
    v.extend(p.beta.iter().map(|b| b.max(1e-8).ln()));
    let d = ((p.delta - 0.1) / 3.9).clamp(1e-6, 1.0 - 1e-6);
    v.push((d / (1.0 - d)).ln());
    v.push(p.skew.ln());
    v.push((p.shape.min(SHAPE_CAP) - SHAPE_FLOOR).max(1e-6).ln());
    v
}

fn from_free(spec: &ArmaAparchSpec, x: &[f64]) -> ArmaAparchParams {
    let mut it = x.iter().copied();
    let mut take = |k: usize| -> Vec<f64> { (&mut it).take(k).collect() };
    let long_run = take(1)[0];
    let ar = take(spec.p);
    let mu = long_run * ar_gap(&ar);
    let ma = take(spec.q);
    let omega = take(1)[0].exp();
    let alpha = take(spec.m).into_iter().map(f64::exp).collect();
    let gamma = take(spec.m).into_iter().map(f64::tanh).collect();
    let beta = take(spec.n).into_iter().map(f64::exp).collect();
    let rest = take(3);
    ArmaAparchParams {
        mu,
        ar,
        ma,
        omega,
        alpha,
        gamma,
        beta,
        delta: 0.1 + 3.9 * logistic(rest[0]),
        skew: rest[1].exp(),
        shape: SHAPE_FLOOR + rest[2].min((SHAPE_CAP - SHAPE_FLOOR).ln()).exp(),
    }
}

/// Moment-based starting values.
fn moment_start(spec: &ArmaAparchSpec, returns: &[f64]) -> ArmaAparchParams {
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let delta = 1.5;
    let abs_pow = returns
        .iter()
        .map(|r| (r - mean).abs().powf(delta))
        .sum::<f64>()
        / returns.len() as f64;
    let (alpha, beta) = if spec.n > 0 {
        (0.05, 0.85)
    } else {
        (0.05, 0.0)
    };
    ArmaAparchParams {
        mu: mean,
        ar: vec![0.0; spec.p],
        ma: vec![0.0; spec.q],
        omega: (abs_pow * if spec.n > 0 { 0.1 } else { 0.9 }).max(1e-8),
        alpha: vec![alpha / spec.m.max(1) as f64; spec.m],
        gamma: vec![0.05; spec.m],
        beta: vec![beta / spec.n.max(1) as f64; spec.n],
        delta,
        skew: 1.0,
        shape: 8.0,
    }
}

/// Maximum-likelihood fit of an ARMA-APARCH model with skewed-t innovations.
pub fn fit(spec: &ArmaAparchSpec, returns: &[f64], options: &FitOptions) -> Result<ArmaAparchFit> {
    let spec = ArmaAparchSpec::new(spec.p, spec.q, spec.m, spec.n)?;
    let k = spec.n_params();
    if returns.len() <= spec.max_lag() + k {
        return Err(Error::InsufficientData(format!(
            "{} observations cannot identify {k} parameters",
            returns.len()
        )));
    }
    if let Some(i) = returns.iter().position(|r| !r.is_finite()) {
        return Err(Error::Data {
            line: i + 1,
            msg: "non-finite return".into(),
        });
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    if returns.iter().all(|&r| r == returns[0]) {
        return Err(Error::DegenerateColumn(0));
    }
    let t = returns.len() as f64;
    let objective = |x: &[f64]| {
        let ll = loglik(&from_free(&spec, x), returns);
        if ll.is_finite() {
            -ll / t
        } else {
            f64::INFINITY
        }
    };

    let base = match &options.warm_start {
        Some(w) if w.spec() == spec && loglik(w, returns).is_finite() => w.clone(),
        _ => moment_start(&spec, returns),
    };
    let x0 = to_free(&base);
    let mut step = vec![0.3; k];
    let scale = returns.iter().map(|r| (r - mean).abs()).sum::<f64>() / t;
    step[0] = 0.1 * scale.max(1e-8);
    for s in &mut step[1..=spec.p + spec.q] {
        *s = 0.2;
    }

    let mut rng = substream(options.seed, 0x5eed);
    let nm = NelderMeadOptions {
        max_evals: options.max_evals_per_start,
        f_tol: 1e-10,
        x_tol: 1e-8,
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut evaluations = 0;
    for s in 0..options.starts.max(1) {
        let mut start = x0.clone();
        if s > 0 {
            for (i, x) in start.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *x += 0.5 * step[i] * z * 2.0;
            }
        }
        if !objective(&start).is_finite() {
            debug!("start {s} infeasible, skipped");
            continue;
        }
        let m = nelder_mead(objective, &start, &step, nm);
        evaluations += m.evaluations;
        debug!(
            "start {s}: -loglik/T = {:.6} after {} evaluations",
            m.value, m.evaluations
        );
        if best.as_ref().is_none_or(|b| m.value < b.1) {
            best = Some((m.x, m.value));
        }
    }
    let (x_best, _) = best.ok_or_else(|| Error::Numerical("no feasible starting point".into()))?;
    // Quasi-Newton polish; when it stalls on a curved ridge, a fresh simplex
    // from the stalled point usually finds the way along it.
    let mut polish = bfgs(objective, &x_best, BFGS);
    evaluations += polish.evaluations;
    for _ in 0..3 {
        if polish.converged {
            break;
        }
        let small: Vec<f64> = step.iter().map(|s| 0.3 * s).collect();
        let nm_again = nelder_mead(objective, &polish.x, &small, nm);
        let next = bfgs(objective, &nm_again.x, BFGS);
        evaluations += nm_again.evaluations + next.evaluations;
        if next.value <= polish.value {
            polish = next;
        } else {
            break;
        }
    }
    let converged = polish.converged;
    if !converged {
        warn!(
            "APARCH fit did not meet the gradient tolerance (value {:.6})",
            polish.value
        );
    }
    let params = from_free(&spec, &polish.x);
    let ll = loglik(&params, returns);
    if !ll.is_finite() {
        return Err(Error::Numerical(
            "optimizer ended at an infeasible point".into(),
        ));
    }
    let filtered = aparch_filter(&params, returns)?;
    let std_errors = if options.std_errors {
        std_errors(&params, returns)
    } else {
        vec![f64::NAN; k]
    };
    let aic_total = -2.0 * ll + 2.0 * k as f64;
    Ok(ArmaAparchFit {
        spec,
        std_errors,
        sigma_path: filtered.sigma,
        residuals: filtered.residuals,
        loglik: ll,
        aic_total,
        aic_per_obs: aic_total / t,
        converged,
        evaluations,
        state: filtered.state,
        params,
    })
}

/// Central-difference Hessian with per-coordinate steps sized so each one
/// moves `f` by about 0.005: well above rounding noise and well inside the
/// quadratic region.
fn numerical_hessian<F: Fn(&[f64]) -> f64>(f: F, x: &[f64]) -> Option<DMatrix<f64>> {
    let k = x.len();
    let f0 = f(x);
    let at = |shifts: &[(usize, f64)]| {
        let mut v = x.to_vec();
        for &(i, s) in shifts {
            v[i] += s;
        }
        f(&v)
    };
    let mut h: Vec<f64> = x.iter().map(|v| 1e-4 * v.abs().max(1e-2)).collect();
    for i in 0..k {
        for _ in 0..30 {
            let up = at(&[(i, h[i])]);
            let down = at(&[(i, -h[i])]);
            if !(up.is_finite() && down.is_finite()) {
                h[i] *= 0.5;
                continue;
            }
            let curvature = (up - 2.0 * f0 + down) / (h[i] * h[i]);
            let target = (1e-2 / curvature.abs().max(1e-300)).sqrt();
            if (target / h[i] - 1.0).abs() < 0.5 {
                break;
            }
            h[i] = if target > h[i] {
                (h[i] * 8.0).min(target)
            } else {
                target
            };
        }
    }
    let mut hess = DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        hess[(i, i)] = (at(&[(i, h[i])]) - 2.0 * f0 + at(&[(i, -h[i])])) / (h[i] * h[i]);
        for j in 0..i {
            let v = (at(&[(i, h[i]), (j, h[j])])
                - at(&[(i, h[i]), (j, -h[j])])
                - at(&[(i, -h[i]), (j, h[j])])
                + at(&[(i, -h[i]), (j, -h[j])]))
                / (4.0 * h[i] * h[j]);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess.iter().all(|v| v.is_finite()).then_some(hess)
}

/// Standard errors of the natural parameters: the inverse numerical Hessian
/// of −loglik in the optimizer coordinates, mapped back by the delta method.
pub fn std_errors(params: &ArmaAparchParams, returns: &[f64]) -> Vec<f64> {
    let spec = params.spec();
    let k = spec.n_params();
    let nan = vec![f64::NAN; k];
    let x = to_free(params);
    let f = |v: &[f64]| {
        let ll = loglik(&from_free(&spec, v), returns);
        if ll.is_finite() {
            -ll
        } else {
            f64::INFINITY
        }
    };
    let Some(hess) = numerical_hessian(&f, &x) else {
        return nan;
    };
    // Near-cancelling AR and MA roots leave a ridge whose curvature is far
    // below the coordinate-wise finite-difference error. Re-measure the
    // curvature along each eigenvector with a step sized for that direction.
    let eig = hess.symmetric_eigen();
    let f0 = f(&x);
    let mut inv_curv = Vec::with_capacity(k);
    for i in 0..k {
        let v = eig.eigenvectors.column(i);
        let along = |t: f64| {
            let p: Vec<f64> = x.iter().enumerate().map(|(j, xj)| xj + t * v[j]).collect();
            f(&p)
        };
        let mut h = (1e-2 / eig.eigenvalues[i].abs().max(1e-12)).sqrt().min(1.0);
        let mut curvature = f64::NAN;
        for _ in 0..30 {
            let (up, down) = (along(h), along(-h));
            if !(up.is_finite() && down.is_finite()) {
                h *= 0.5;
                continue;
            }
            curvature = (up - 2.0 * f0 + down) / (h * h);
            let target = (1e-2 / curvature.abs().max(1e-12)).sqrt().min(1.0);
            if (target / h - 1.0).abs() < 0.5 {
                break;
            }
            h = target;
        }
        if !(curvature > 0.0) {
            return nan;
        }
        inv_curv.push(1.0 / curvature);
    }
    let cov = &eig.eigenvectors
        * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(inv_curv))
        * eig.eigenvectors.transpose();
    let mut jac = DMatrix::<f64>::zeros(k, k);
    for j in 0..k {
        let h = 1e-6 * x[j].abs().max(1.0);
        let mut up = x.clone();
        let mut down = x.clone();
        up[j] += h;
        down[j] -= h;
        let (a, b) = (
            from_free(&spec, &up).to_vec(),
            from_free(&spec, &down).to_vec(),
        );
        for i in 0..k {
            jac[(i, j)] = (a[i] - b[i]) / (2.0 * h);
        }
    }
    let cov = &jac * cov * jac.transpose();
    (0..k)
        .map(|i| {
            if cov[(i, i)] > 0.0 {
                cov[(i, i)].sqrt()
            } else {
                f64::NAN
            }
        })
        .collect()
}
