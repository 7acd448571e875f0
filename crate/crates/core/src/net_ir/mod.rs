//! Computation-graph representation of ReLU networks.
//!
//! A [`Network`] is a DAG of [`Layer`]s of four kinds (Input, Linear, ReLU,
//! Sum) with one input layer and one output layer. Sequential networks
//! (alternating Linear/ReLU) have a compact form, [`SequentialNet`].

mod editor;
mod graph;
mod sequential;

pub(crate) use editor::GraphEditor;
pub use graph::{
    forward, topo_order, validate, DenseMatrix, DenseVector, Issue, Layer, LayerId, LayerKind,
    Network, NetworkBuilder, ValidationReport,
};
pub use sequential::{Affine, SequentialNet};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid network: {0}")]
    Invalid(ValidationReport),
    #[error("cycle detected through arc {from}->{to}")]
    Cycle { from: LayerId, to: LayerId },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unknown layer {0}")]
    UnknownLayer(LayerId),
    #[error("network has no input layer")]
    NoInput,
    #[error("network is not sequential: {0}")]
    NotSequential(String),
    #[error("affine map {index} expects input width {found}, chain provides {expected}")]
    ChainShape {
        index: usize,
        expected: usize,
        found: usize,
    },
}
