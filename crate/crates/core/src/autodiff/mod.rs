//! Minimal dense-tensor engine with reverse-mode differentiation.

mod adam;
mod gradcheck;
mod graph;
mod store;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{finite_difference_gradient, relative_error};
pub use graph::{Activation, Graph, Var};
pub use store::{GradientMap, ParamStore};
pub use tensor::Tensor;

#[cfg(test)]
mod tests;
