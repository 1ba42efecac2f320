//! Small self-contained numerical kernels shared by the model modules.

pub mod optim;
pub mod quad;
pub mod roots;

pub use quad::{integrate, Integral};
