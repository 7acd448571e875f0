//! Stable-ReLU network reduction.
//!
//! Pipeline: [`onnx_bridge`] imports a model into the [`net_ir`] graph,
//! [`simplifier`] rewrites it into an alternating Linear/ReLU chain,
//! [`bound_engine`] bounds every pre-activation over an input box, and
//! [`reducer`] removes deactivated neurons and merges activated ones into
//! an equivalent, smaller network. [`equivalence`] and [`verify_harness`]
//! check and exercise the result; [`spec_io`] reads properties and
//! [`generator`] plants stable neurons in random networks.

pub mod bound_engine;
pub mod equivalence;
pub mod fixtures;
pub mod generator;
pub mod net_ir;
pub mod onnx_bridge;
pub mod reducer;
pub mod simplifier;
pub mod spec_io;
pub mod verify_harness;
