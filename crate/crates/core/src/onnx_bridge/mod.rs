//! ONNX interchange.
//!
//! Import lowers each supported operator to Linear/ReLU/Sum structure:
//! Gemm and MatMul become a Linear layer, Conv and BatchNormalization a
//! Linear layer with an explicitly unrolled dense matrix, Add/Sub/Concat a
//! Sum over per-operand Linear layers, MaxPool a tree of
//! `max(x, y) = ReLU(x - y) + y` gadgets. Reshape, Flatten, Squeeze,
//! Unsqueeze, Identity and Dropout only relabel shapes. Split becomes one
//! selector Linear per output (experimental). Tensors are flattened in
//! row-major order.
//!
//! Export writes a sequential chain as Gemm/Relu nodes with float32 tensors.

mod conv;
mod export;
mod import;
mod pool;
pub mod proto;
mod reference;
mod tensor;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::net_ir::NetError;

pub use conv::{conv_to_matrix, ConvParams};
pub use export::{export_onnx, sequential_to_model, EXPORT_INPUT, EXPORT_OUTPUT};
pub use import::{import_onnx, shape_input, SUPPORTED_OPS};
pub use pool::{lower_maxpool, max_gadget, pool_windows, PoolParams};
pub use reference::reference_eval;
pub use tensor::{
    attr_float, attr_int, attr_ints, attr_string, decode_model, encode_model, float_tensor,
    int64_tensor, OnnxModelBuilder,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnsupportedNode {
    pub node: String,
    pub op_type: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportReport {
    /// Distinct operator types that were imported.
    pub supported_ops: Vec<String>,
    pub unsupported_ops: Vec<UnsupportedNode>,
    pub input_shape: Vec<usize>,
    pub output_shape: Vec<usize>,
    pub flattening_order: String,
}

impl fmt::Display for ImportReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "input shape {:?}, output shape {:?}, {} flattening",
            self.input_shape, self.output_shape, self.flattening_order
        )?;
        writeln!(f, "imported operators: {}", self.supported_ops.join(", "))?;
        for u in &self.unsupported_ops {
            writeln!(f, "unsupported: node '{}' ({}): {}", u.node, u.op_type, u.reason)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OnnxError {
    #[error("malformed model: {0}")]
    Malformed(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("model uses unsupported operators:\n{0}")]
    Unsupported(ImportReport),
    #[error("export needs a sequential Linear/ReLU network: {0}")]
    NotSequential(String),
    #[error(transparent)]
    Net(#[from] NetError),
}
