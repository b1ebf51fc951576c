//! Minimal neural-network building blocks: an autodiff tape, layers and
//! the Adam optimizer.

pub mod graph;
pub mod layers;
pub mod weights;

pub use graph::{gradient_check, softmax_rows, Gradients, Graph, ParamId, ParamStore, Var};
pub use layers::{Adam, Linear, Lstm};
