//! Sequential network → fully-connected ONNX (Gemm and Relu nodes only).

use super::proto::ModelProto;
use super::tensor::{attr_int, encode_model, OnnxModelBuilder};
use super::OnnxError;
use crate::net_ir::{Network, SequentialNet};

pub const EXPORT_INPUT: &str = "input";
pub const EXPORT_OUTPUT: &str = "output";

/// Builds the ONNX model of a sequential chain. Affine map `i` becomes Gemm
/// node `red_linear_{i}` (`transB = 1`, weights stored `[out, in]`), the ReLU
/// after it `red_relu_{i}`. Tensors are float32.
pub fn sequential_to_model(net: &SequentialNet) -> ModelProto {
    let mut b = OnnxModelBuilder::new("rednet", EXPORT_INPUT, &[1, net.input_width()]);
    let mut cur = EXPORT_INPUT.to_string();
    let last = net.layers().len() - 1;
    for (i, affine) in net.layers().iter().enumerate() {
        let (w, bias) = (format!("red_linear_{i}.weight"), format!("red_linear_{i}.bias"));
        let shape = [affine.out_width(), affine.in_width()];
        b.float_initializer(&w, &shape, &affine.weight.iter().copied().collect::<Vec<_>>());
        b.float_initializer(&bias, &[affine.out_width()], &affine.bias.to_vec());
        let out = if i == last {
            EXPORT_OUTPUT.to_string()
        } else {
            format!("red_linear_{i}_out")
        };
        b.node(
            &format!("red_linear_{i}"),
            "Gemm",
            &[&cur, &w, &bias],
            &[&out],
            vec![attr_int("transB", 1)],
        );
        cur = out;
        if i != last {
            let r = format!("red_relu_{i}_out");
            b.node(&format!("red_relu_{i}"), "Relu", &[&cur], &[&r], Vec::new());
            cur = r;
        }
    }
    b.finish(EXPORT_OUTPUT, &[1, net.output_width()])
}

/// Serializes a sequential network. Fails with
/// [`OnnxError::NotSequential`] for any other graph.
pub fn export_onnx(net: &Network) -> Result<Vec<u8>, OnnxError> {
    let seq = SequentialNet::from_network(net).map_err(|e| OnnxError::NotSequential(e.to_string()))?;
    Ok(encode_model(&sequential_to_model(&seq)))
}
