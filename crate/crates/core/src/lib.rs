pub mod copula;
pub mod data;
pub mod error;
pub mod hac;
pub mod margins;
pub mod numerics;
pub mod risk;
pub mod rng;
pub mod volatility;

pub use copula::{ArchimedeanGenerator, GeneratorFamily, UniformSample};
pub use data::{PriceTable, ReturnTable, SeriesStats};
pub use error::{Error, Result};
pub use hac::{HacModel, HacNode};
pub use margins::{GpdTail, SemiParametricMargin};
pub use risk::{
    BacktestConfig, BacktestResult, CopulaMode, PipelineConfig, PortfolioConstraints,
    PortfolioWeights, RiskModel, RiskReport, ScenarioMatrix,
};
pub use volatility::{ArmaAparchFit, ArmaAparchParams, ArmaAparchSpec, FilterState};
