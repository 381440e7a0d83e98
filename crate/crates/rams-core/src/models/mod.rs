//! MLP and DeepONet architectures: parameter layout, initialization,
//! forward passes over plain reals or jets, and the batched training engine.

pub mod batch;
pub mod checkpoint;
pub mod network;

pub use batch::{BatchTriple, MlpJetEngine, MlpPlainEngine};
pub use network::{
    deeponet_forward, init_network, mlp_forward, mlp_forward_vec, DeepOnetSpec, MlpSpec, Network,
    NetworkSpec,
};
