//! Hierarchical Archimedean copulas over a single generator family.
//!
//! Leaves are 0-based asset indices in memory and 1-based in every text or
//! JSON representation.

mod estimate;
mod model;
mod parse;
mod sample;

pub use estimate::{
    estimate_structure, estimate_structure_with_taus, StructureEstimate, TAU_FLOOR,
};
pub use model::{check_nesting, hac_cdf, HacModel, HacNode};
pub use parse::{format_structure, parse_structure};
pub use sample::sample_hac;
