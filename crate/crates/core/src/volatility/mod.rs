//! ARMA(p, q)-APARCH(m, n) models with standardized skewed-t innovations.

mod filter;
mod fit;
mod params;
mod sstd;

pub use filter::{
    aparch_filter, aparch_filter_from, forecast_from_state, loglik, simulate,
    simulate_with_innovations, update_state, FilterOutput, FilterState, SimulatedPath, BURN_IN,
};
pub use fit::{fit, std_errors, ArmaAparchFit, FitOptions, FitSummary};
pub use params::{ArmaAparchParams, ArmaAparchSpec};
pub use sstd::{sstd_cdf, sstd_density, sstd_quantile, SkewedT};
