//! Scenario risk measures, portfolio optimization, the forecast pipeline and
//! coverage back-tests.

mod coverage;
mod measures;
mod optimize;
mod pipeline;

pub use coverage::{
    chi_square_sf, christoffersen_tests, coverage_tests, kupiec_uc, transition_counts,
    BacktestResult, ChristoffersenTests,
};
pub use measures::{
    cvar_empirical, cvar_rockafellar_uryasev, mean_excess, tail_estimate, var_empirical,
    TailEstimate,
};
pub use optimize::{min_cvar_weights, PortfolioConstraints, PortfolioWeights, ScenarioMatrix};
pub use pipeline::{
    fit_risk_model, pipeline_forecast, risk_report, rolling_backtest, AssetModel, BacktestConfig,
    BacktestDay, BacktestRun, CopulaMode, PipelineConfig, RiskModel, RiskReport, MIN_OBSERVATIONS,
};
