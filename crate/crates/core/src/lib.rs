//! Sparse multilayer perceptrons whose connectivity evolves between epochs.
//!
//! The crate implements magnitude-based rewiring (SET) and five rewiring
//! policies driven by the absolute cosine similarity between the recorded
//! activations of the two neurons a connection joins. Everything here is
//! pure computation over in-memory data and builds without `std`; file
//! formats, the command line and wall-clock timing live in the `sparse-evo`
//! companion crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod activation_log;
pub mod analysis;
pub mod data;
pub mod error;
pub mod evolution;
pub mod rng;
pub mod sparse_net;
pub mod trainer;

pub use activation_log::{
    addition_distribution, cosine_edges, cosine_full, ActivationRecord, CosineBackend,
    CosineMatrix, EdgeSimilarities, EpochRecords, SequentialCosine,
};
pub use analysis::{
    ablation_curve, degree_histogram, input_degrees, snapshot_curves, AblationCurve,
    AblationOrder, DegreeHistogram, DegreeProfile,
};
pub use data::{gen_madelon_like, Dataset, FeatureMetadata, FeatureRole, Normalization};
pub use error::{Error, Result};
pub use evolution::{
    evolve_epoch, AdditionRule, EvolutionPolicy, LayerRewire, RemovalRule, RewireReport,
};
pub use sparse_net::{
    densify, init_topology, init_weights, srelu, Activations, Edge, ForwardPass, LayerTopology,
    Mode, Model, SparseLayer, SreluParams, Topology, TrainConfig,
};
pub use trainer::{accuracy, EpochStats, Trainer};
