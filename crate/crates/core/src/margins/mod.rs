//! Semi-parametric marginal laws for standardized residuals.

mod gpd;
mod semi;

pub use gpd::{
    fit_gpd, gpd_inverse_survival, gpd_loglik, gpd_pwm, gpd_score, gpd_survival, GpdEstimate,
    GpdTail, MIN_EXCEEDANCES, XI_MAX, XI_MIN,
};
pub use semi::{
    fit_margin, margin_cdf, margin_quantile, SemiParametricMargin, CDF_CLAMP, GRID_POINTS,
    MIN_RESIDUALS,
};
