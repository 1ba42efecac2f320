//! Exchangeable Archimedean copulas: the four one-parameter families,
//! Kendall-tau calibration, Marshall–Olkin sampling and empirical Kendall
//! matrices.

mod frailty;
mod generator;
mod kendall;
mod sample;

pub(crate) use sample::clamp_open;

pub use frailty::{
    inner_frailty, log_series, positive_stable, root_frailty, sibuya, tilted_stable,
};
pub use generator::{theta_from_tau, ArchimedeanGenerator, GeneratorFamily};
pub use kendall::{empirical_kendall_matrix, kendall_tau_b};
pub use sample::{sample_ac, tau_monte_carlo, UniformSample};
