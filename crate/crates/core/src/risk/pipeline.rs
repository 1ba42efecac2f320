//! The forecast pipeline: per-asset ARMA-APARCH filters, semi-parametric
//! margins, a (hierarchical) Archimedean copula, simulated one-step
//! scenarios, min-CVaR weights and portfolio VaR/CVaR. Also the rolling
//! back-test built on it.

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coverage::{coverage_tests, BacktestResult};
use super::measures::tail_estimate;
use super::optimize::{min_cvar_weights, PortfolioConstraints, PortfolioWeights, ScenarioMatrix};
use crate::copula::{
    empirical_kendall_matrix, theta_from_tau, ArchimedeanGenerator, GeneratorFamily,
};
use crate::error::{Error, Result};
use crate::hac::{estimate_structure_with_taus, sample_hac, HacModel, TAU_FLOOR};
use crate::margins::{fit_margin, SemiParametricMargin};
use crate::rng::{derive_seed, open01, substream};
use crate::volatility::{
    fit, forecast_from_state, update_state, ArmaAparchParams, ArmaAparchSpec, FilterState,
    FitOptions,
};

/// Fewest aligned observations [`pipeline_forecast`] accepts.
pub const MIN_OBSERVATIONS: usize = 500;

/// Dependence model for the standardized residuals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaMode {
    /// One exchangeable Archimedean copula.
    Ac,
    /// Hierarchical copula with an estimated tree.
    Hac,
}

impl std::str::FromStr for CopulaMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ac" => Ok(CopulaMode::Ac),
            "hac" => Ok(CopulaMode::Hac),
            _ => Err(Error::param(format!(
                "unknown copula mode '{s}' (expected ac or hac)"
            ))),
        }
    }
}

impl std::fmt::Display for CopulaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CopulaMode::Ac => "ac",
            CopulaMode::Hac => "hac",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub family: GeneratorFamily,
    pub mode: CopulaMode,
    pub n_scenarios: usize,
    pub alpha: f64,
    pub tail_fraction: f64,
    pub spec: ArmaAparchSpec,
    pub seed: u64,
    pub fit_starts: usize,
    pub constraints: PortfolioConstraints,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            family: GeneratorFamily::Gumbel,
            mode: CopulaMode::Hac,
            n_scenarios: 10_000,
            alpha: 0.95,
            tail_fraction: 0.10,
            spec: ArmaAparchSpec::default(),
            seed: 0,
            fit_starts: 5,
            constraints: PortfolioConstraints::default(),
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.n_scenarios < 1000 {
            return Err(Error::param(format!(
                "{} scenarios, at least 1000 needed",
                self.n_scenarios
            )));
        }
        if (self.n_scenarios as f64) * (1.0 - self.alpha) < 1.0 {
            return Err(Error::param("too few scenarios for the confidence level"));
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction < 0.5) {
            return Err(Error::param(format!(
                "tail fraction {} outside (0, 0.5)",
                self.tail_fraction
            )));
        }
        Ok(())
    }
}

/// Everything fitted for one asset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetModel {
    pub params: ArmaAparchParams,
    /// Filter state after the last observation used.
    pub state: FilterState,
    pub margin: SemiParametricMargin,
    pub converged: bool,
}

/// Fitted margins and dependence, ready to generate scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub assets: Vec<AssetModel>,
    pub mode: CopulaMode,
    /// Absent for a single asset.
    pub copula: Option<HacModel>,
    /// Mean Kendall tau at each copula node, in merge order.
    pub node_taus: Vec<f64>,
}

impl RiskModel {
    pub fn dim(&self) -> usize {
        self.assets.len()
    }

    /// Conditional means and σ for the next day.
    pub fn forecasts(&self) -> Vec<(f64, f64)> {
        self.assets
            .iter()
            .map(|a| forecast_from_state(&a.params, &a.state))
            .collect()
    }

    /// Rolls every filter forward by one observed return vector.
    pub fn advance(&mut self, returns: &[f64]) -> Result<()> {
        if returns.len() != self.dim() {
            return Err(Error::param(format!(
                "{} returns for {} assets",
                returns.len(),
                self.dim()
            )));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::Numerical("non-finite return".into()));
        }
        for (a, r) in self.assets.iter_mut().zip(returns) {
            update_state(&a.params, &mut a.state, *r);
        }
        Ok(())
    }

    /// Copula uniforms: N rows of d values in (0, 1).
    pub fn sample_uniforms(&self, n: usize, seed: u64) -> Result<Vec<f64>> {
        match &self.copula {
            Some(m) => Ok(sample_hac(m, n, seed)?.values),
            None => {
                let mut rng = substream(seed, 0);
                Ok((0..n * self.dim()).map(|_| open01(&mut rng)).collect())
            }
        }
    }

    /// One-step scenario returns r̂ = mean + σ·F⁻¹(u).
    pub fn scenarios(&self, n: usize, seed: u64) -> Result<ScenarioMatrix> {
        let d = self.dim();
        let u = self
            .sample_uniforms(n, derive_seed(seed, 1))
            .map_err(|e| e.at_stage("sampling"))?;
        let fc = self.forecasts();
        let values = u
            .par_chunks(d)
            .map(|row| {
                row.iter()
                    .zip(&self.assets)
                    .zip(&fc)
                    .map(|((u, a), (mean, sigma))| Ok(mean + sigma * a.margin.quantile(*u)?))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<Vec<f64>>>>()
            .map_err(|e| e.at_stage("inversion"))?
            .concat();
        let mut s = ScenarioMatrix::new(n, d, values).map_err(|e| e.at_stage("scenarios"))?;
        s.seed = seed;
        s.model = self.describe();
        Ok(s)
    }

    fn describe(&self) -> String {
        match &self.copula {
            Some(m) => format!("{}:{}", m.family(), m.structure_string()),
            None => "univariate".into(),
        }
    }
}

/// Portfolio tail risk from one scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub alpha: f64,
    pub var: f64,
    pub cvar: f64,
    pub cvar_mean_excess: f64,
    /// True when no scenario loss exceeds VaR.
    pub no_exceedance: bool,
    pub weights: PortfolioWeights,
    pub mode: CopulaMode,
    pub family: GeneratorFamily,
    pub structure: Option<String>,
    pub n_scenarios: usize,
    pub seed: u64,
    pub forecast_mean: Vec<f64>,
    pub forecast_sigma: Vec<f64>,
}

fn check_columns(returns: &[Vec<f64>], min_len: usize) -> Result<usize> {
    let Some(first) = returns.first() else {
        return Err(Error::InsufficientData("no return series".into()));
    };
    let t = first.len();
    if returns.iter().any(|c| c.len() != t) {
        return Err(Error::param("return columns have different lengths"));
    }
    if t < min_len {
        return Err(Error::InsufficientData(format!(
            "{t} observations, at least {min_len} needed"
        )));
    }
    Ok(t)
}

/// Steps 1–3: volatility filters, margins and the copula.
pub fn fit_risk_model(
    returns: &[Vec<f64>],
    config: &PipelineConfig,
    warm: Option<&RiskModel>,
) -> Result<RiskModel> {
    config.validate()?;
    let d = returns.len();
    if let Some(w) = warm {
        if w.dim() != d {
            return Err(Error::param("warm-start model has a different dimension"));
        }
    }
    let fits = returns
        .par_iter()
        .enumerate()
        .map(|(j, r)| {
            let options = FitOptions {
                starts: config.fit_starts,
                seed: derive_seed(config.seed, j as u64),
                std_errors: false,
                warm_start: warm.map(|w| w.assets[j].params.clone()),
                ..FitOptions::default()
            };
            fit(&config.spec, r, &options).map_err(|e| match e {
                Error::DegenerateColumn(_) => Error::DegenerateColumn(j),
                e => e,
            })
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("volatility"))?;

    let margins = fits
        .par_iter()
        .map(|f| fit_margin(&f.residuals, config.tail_fraction))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.at_stage("margins"))?;

    let (copula, node_taus) = if d == 1 {
        (None, Vec::new())
    } else {
        let uniforms: Vec<Vec<f64>> = margins
            .iter()
            .zip(&fits)
            .map(|(m, f)| m.transform(&f.residuals))
            .collect();
        fit_copula(&uniforms, config).map_err(|e| e.at_stage("copula"))?
    };

    let assets = fits
        .into_iter()
        .zip(margins)
        .map(|(f, margin)| AssetModel {
            converged: f.converged,
            state: f.state,
            params: f.params,
            margin,
        })
        .collect();
    Ok(RiskModel {
        assets,
        mode: config.mode,
        copula,
        node_taus,
    })
}

fn fit_copula(
    uniforms: &[Vec<f64>],
    config: &PipelineConfig,
) -> Result<(Option<HacModel>, Vec<f64>)> {
    let tau = empirical_kendall_matrix(uniforms)?;
    match config.mode {
        CopulaMode::Hac => {
            let est = estimate_structure_with_taus(&tau, config.family)?;
            info!("estimated structure {}", est.model.structure_string());
            Ok((Some(est.model), est.node_taus))
        }
        CopulaMode::Ac => {
            let d = tau.len();
            let mut sum = 0.0;
            for i in 0..d {
                for j in 0..i {
                    sum += tau[i][j];
                }
            }
            let mean = sum / (d * (d - 1) / 2) as f64;
            let used = mean.max(TAU_FLOOR);
            let g = ArchimedeanGenerator::new(config.family, theta_from_tau(config.family, used)?)?;
            Ok((Some(HacModel::exchangeable(g, d)?), vec![mean]))
        }
    }
}

/// Steps 7–9: min-CVaR weights and the portfolio's VaR and CVaR.
pub fn risk_report(
    model: &RiskModel,
    scenarios: &ScenarioMatrix,
    config: &PipelineConfig,
) -> Result<RiskReport> {
    let weights = min_cvar_weights(scenarios, config.alpha, &config.constraints)
        .map_err(|e| e.at_stage("optimization"))?;
    let losses = scenarios.losses(weights.as_slice());
    let tail = tail_estimate(&losses, config.alpha).map_err(|e| e.at_stage("risk"))?;
    let (forecast_mean, forecast_sigma) = model.forecasts().into_iter().unzip();
    Ok(RiskReport {
        alpha: config.alpha,
        var: tail.var,
        cvar: tail.cvar,
        cvar_mean_excess: tail.mean_excess,
        no_exceedance: tail.no_exceedance,
        weights,
        mode: config.mode,
        family: config.family,
        structure: model.copula.as_ref().map(|m| m.structure_string()),
        n_scenarios: scenarios.n,
        seed: scenarios.seed,
        forecast_mean,
        forecast_sigma,
    })
}

/// Runs the whole pipeline on aligned return columns (one `Vec` per asset)
/// and reports VaR/CVaR for the day after the sample.
pub fn pipeline_forecast(returns: &[Vec<f64>], config: &PipelineConfig) -> Result<RiskReport> {
    check_columns(returns, MIN_OBSERVATIONS)?;
    let model = fit_risk_model(returns, config, None)?;
    let scenarios = model.scenarios(config.n_scenarios, config.seed)?;
    risk_report(&model, &scenarios, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub pipeline: PipelineConfig,
    /// Trailing observations each refit uses.
    pub window: usize,
    /// Days between refits; filters are rolled forward in between.
    pub refit_every: usize,
    /// Simplex starts for refits after the first, which are warm-started.
    pub refit_starts: usize,
    /// Evaluate only the last this many days; all days after the first
    /// window when absent.
    pub eval_days: Option<usize>,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            pipeline: PipelineConfig::default(),
            window: 1000,
            refit_every: 10,
            refit_starts: 1,
            eval_days: None,
        }
    }
}

/// One evaluated day of a back-test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestDay {
    /// Row index of the day in the return table.
    pub index: usize,
    pub forecast_var: f64,
    pub forecast_cvar: f64,
    pub realized_return: f64,
    pub hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestRun {
    pub result: BacktestResult,
    pub days: Vec<BacktestDay>,
}

/// Rolling out-of-sample VaR back-test of the pipeline.
pub fn rolling_backtest(returns: &[Vec<f64>], config: &BacktestConfig) -> Result<BacktestRun> {
    if config.window < MIN_OBSERVATIONS || config.refit_every == 0 {
        return Err(Error::param(
            "window must be at least 500 and refit cadence positive",
        ));
    }
    let t = check_columns(returns, config.window + 100)?;
    config.pipeline.validate()?;
    let d = returns.len();
    let start = match config.eval_days {
        Some(k) if k < t - config.window => t - k,
        _ => config.window,
    };
    let row = |i: usize| -> Vec<f64> { returns.iter().map(|c| c[i]).collect() };

    let mut model: Option<RiskModel> = None;
    let mut days = Vec::with_capacity(t - start);
    let mut skipped = Vec::new();
    for (k, day) in (start..t).enumerate() {
        if k % config.refit_every == 0 {
            let window: Vec<Vec<f64>> = returns
                .iter()
                .map(|c| c[day - config.window..day].to_vec())
                .collect();
            let mut cfg = config.pipeline.clone();
            cfg.seed = derive_seed(config.pipeline.seed, day as u64);
            if model.is_some() {
                cfg.fit_starts = config.refit_starts;
            }
            match fit_risk_model(&window, &cfg, model.as_ref()) {
                Ok(m) => model = Some(m),
                Err(e) => {
                    warn!("day {day}: refit failed ({e}); keeping the previous model");
                    if let Some(m) = model.as_mut() {
                        if let Err(e) = m.advance(&row(day - 1)) {
                            warn!("day {day}: {e}");
                            model = None;
                        }
                    }
                }
            }
        } else if let Some(m) = model.as_mut() {
            if let Err(e) = m.advance(&row(day - 1)) {
                warn!("day {day}: {e}");
                model = None;
            }
        }
        let Some(m) = model.as_ref() else {
            skipped.push(day);
            continue;
        };
        let seed = derive_seed(config.pipeline.seed ^ 0xbac7, day as u64);
        let report = m
            .scenarios(config.pipeline.n_scenarios, seed)
            .and_then(|s| risk_report(m, &s, &config.pipeline));
        let report = match report {
            Ok(r) => r,
            Err(e) => {
                warn!("day {day}: {e}; day skipped");
                skipped.push(day);
                continue;
            }
        };
        let realized: f64 = row(day)
            .iter()
            .zip(report.weights.as_slice())
            .map(|(r, w)| r * w)
            .sum();
        days.push(BacktestDay {
            index: day,
            forecast_var: report.var,
            forecast_cvar: report.cvar,
            realized_return: realized,
            hit: -realized > report.var,
        });
    }
    let hits: Vec<bool> = days.iter().map(|d| d.hit).collect();
    if hits.len() < 2 {
        return Err(Error::Numerical(format!(
            "only {} of {} days could be evaluated",
            hits.len(),
            t - start
        )));
    }
    let mut result = coverage_tests(&hits, config.pipeline.alpha)?;
    result.skipped = skipped;
    info!(
        "back-test over {} days of {d} assets: {} exceedances",
        result.n, result.x
    );
    Ok(BacktestRun { result, days })
}
