//! Sparse MLP core: connectivity, parameters, feedforward and backpropagation
//! restricted to existing connections.

mod layer;
mod matrix;
mod model;
mod srelu;
mod topology;

pub use layer::{densify, init_weights, SparseLayer};
pub use matrix::Activations;
pub use model::{ForwardPass, Gradients, LayerGradients, Mode, Model, TrainConfig};
pub use srelu::{srelu, SreluParams};
pub use topology::{init_topology, inclusion_probability, Edge, LayerTopology, Topology};

pub(crate) use layer::weight_distribution;
pub(crate) use matrix::{dot as matrix_dot, dot_2x2 as matrix_dot_2x2};
pub(crate) use topology::check_range as check_edge_range;
