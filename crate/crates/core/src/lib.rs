//! Community detection by reconstructing a network's modularity matrix with
//! graph autoencoders.
//!
//! The crate is organised bottom-up:
//!
//! * [`graph`] and [`metrics`]: the graph model, file ingestion, the
//!   modularity matrix and partition-quality scores (Q, NMI, accuracy).
//! * [`nn`]: the dense numeric kernel (tanh GCN layers, inner-product
//!   decoder, Frobenius reconstruction loss, hand-written gradients, Adam,
//!   finite-difference checking) and [`checkpoint`] persistence.
//! * [`onestage`], [`twostage`] and [`gae`]: the full-batch GCN model, the
//!   sampled neighborhood-sharing/membership-encoding model and the adjacency
//!   autoencoder baseline.
//! * [`apam`]: incremental inference for nodes that arrive after training.
//! * [`clustering`]: K-means with seeded restarts and K sweeps.
//! * [`synth`] and [`experiment`]: planted-partition generators and the
//!   experiment/benchmark harness behind the command-line tool.

pub mod apam;
pub mod checkpoint;
pub mod clustering;
pub mod error;
pub mod experiment;
pub mod gae;
pub mod graph;
pub mod metrics;
pub mod nn;
pub mod onestage;
pub mod rng;
pub mod synth;
pub mod twostage;

pub use error::{Error, Result};
pub use graph::{CommunityAssignment, Graph, ModularityMatrix, NormalizedAdjacency};
pub use nn::{DecoderNonlinearity, LayerWeights, TrainingConfig};

/// Dense row-major matrix used throughout the crate.
pub type Matrix = ndarray::Array2<f64>;
