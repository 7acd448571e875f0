//! Tensor/attribute conversion helpers and a small model builder.

use ndarray::{ArrayD, IxDyn};
use prost::Message;

use super::proto::{
    data_type, AttributeProto, AttributeType, Dimension, DimensionValue, GraphProto, ModelProto,
    NodeProto, OperatorSetIdProto, TensorProto, TensorShapeProto, TypeProto, TypeProtoTensor,
    ValueInfoProto,
};
use super::OnnxError;

pub(crate) fn tensor_to_array(t: &TensorProto) -> Result<ArrayD<f64>, OnnxError> {
    if t.data_location == 1 || !t.external_data.is_empty() {
        return Err(OnnxError::Malformed(format!(
            "tensor '{}' uses external data, which is not supported",
            t.name
        )));
    }
    let shape: Vec<usize> = t
        .dims
        .iter()
        .map(|&d| usize::try_from(d))
        .collect::<Result<_, _>>()
        .map_err(|_| OnnxError::Malformed(format!("tensor '{}' has a negative dim", t.name)))?;
    let count: usize = shape.iter().product();
    let raw = &t.raw_data;
    let data: Vec<f64> = match t.data_type {
        data_type::FLOAT => {
            if !raw.is_empty() {
                raw.chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
                    .collect()
            } else {
                t.float_data.iter().map(|&v| v as f64).collect()
            }
        }
        data_type::DOUBLE => {
            if !raw.is_empty() {
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect()
            } else {
                t.double_data.clone()
            }
        }
        data_type::INT64 => {
            if !raw.is_empty() {
                raw.chunks_exact(8)
                    .map(|c| i64::from_le_bytes(c.try_into().expect("8 bytes")) as f64)
                    .collect()
            } else {
                t.int64_data.iter().map(|&v| v as f64).collect()
            }
        }
        data_type::INT32 => {
            if !raw.is_empty() {
                raw.chunks_exact(4)
                    .map(|c| i32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
                    .collect()
            } else {
                t.int32_data.iter().map(|&v| v as f64).collect()
            }
        }
        other => {
            return Err(OnnxError::Malformed(format!(
                "tensor '{}' has unsupported element type {other}",
                t.name
            )))
        }
    };
    if data.len() != count {
        return Err(OnnxError::Malformed(format!(
            "tensor '{}' holds {} values for shape {:?}",
            t.name,
            data.len(),
            shape
        )));
    }
    ArrayD::from_shape_vec(IxDyn(&shape), data)
        .map_err(|e| OnnxError::Malformed(format!("tensor '{}': {e}", t.name)))
}

/// Float32 tensor with little-endian raw data.
pub fn float_tensor(name: &str, shape: &[usize], data: impl IntoIterator<Item = f64>) -> TensorProto {
    let raw: Vec<u8> = data
        .into_iter()
        .flat_map(|v| (v as f32).to_le_bytes())
        .collect();
    TensorProto {
        name: name.to_string(),
        dims: shape.iter().map(|&d| d as i64).collect(),
        data_type: data_type::FLOAT,
        raw_data: raw,
        ..Default::default()
    }
}

pub fn int64_tensor(name: &str, shape: &[usize], data: &[i64]) -> TensorProto {
    TensorProto {
        name: name.to_string(),
        dims: shape.iter().map(|&d| d as i64).collect(),
        data_type: data_type::INT64,
        int64_data: data.to_vec(),
        ..Default::default()
    }
}

pub fn attr_int(name: &str, v: i64) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        i: v,
        r#type: AttributeType::Int as i32,
        ..Default::default()
    }
}

pub fn attr_ints(name: &str, v: &[i64]) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        ints: v.to_vec(),
        r#type: AttributeType::Ints as i32,
        ..Default::default()
    }
}

pub fn attr_float(name: &str, v: f32) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        f: v,
        r#type: AttributeType::Float as i32,
        ..Default::default()
    }
}

pub fn attr_string(name: &str, v: &str) -> AttributeProto {
    AttributeProto {
        name: name.into(),
        s: v.as_bytes().to_vec(),
        r#type: AttributeType::String as i32,
        ..Default::default()
    }
}

pub(crate) fn find_attr<'a>(node: &'a NodeProto, name: &str) -> Option<&'a AttributeProto> {
    node.attribute.iter().find(|a| a.name == name)
}

pub(crate) fn get_int(node: &NodeProto, name: &str, default: i64) -> i64 {
    find_attr(node, name).map_or(default, |a| a.i)
}

pub(crate) fn get_float(node: &NodeProto, name: &str, default: f32) -> f32 {
    find_attr(node, name).map_or(default, |a| a.f)
}

pub(crate) fn get_ints(node: &NodeProto, name: &str) -> Option<Vec<i64>> {
    find_attr(node, name).map(|a| a.ints.clone())
}

pub(crate) fn get_string(node: &NodeProto, name: &str) -> Option<String> {
    find_attr(node, name).map(|a| String::from_utf8_lossy(&a.s).into_owned())
}

fn value_info(name: &str, shape: &[usize]) -> ValueInfoProto {
    ValueInfoProto {
        name: name.to_string(),
        r#type: Some(TypeProto {
            tensor_type: Some(TypeProtoTensor {
                elem_type: data_type::FLOAT,
                shape: Some(TensorShapeProto {
                    dim: shape
                        .iter()
                        .map(|&d| Dimension {
                            value: Some(DimensionValue::DimValue(d as i64)),
                            denotation: String::new(),
                        })
                        .collect(),
                }),
            }),
            denotation: String::new(),
        }),
        doc_string: String::new(),
    }
}

pub(crate) fn value_info_shape(v: &ValueInfoProto) -> Result<Vec<usize>, OnnxError> {
    let dims = v
        .r#type
        .as_ref()
        .and_then(|t| t.tensor_type.as_ref())
        .and_then(|t| t.shape.as_ref())
        .map(|s| s.dim.as_slice())
        .ok_or_else(|| OnnxError::Malformed(format!("value '{}' has no tensor shape", v.name)))?;
    dims.iter()
        .enumerate()
        .map(|(i, d)| match &d.value {
            Some(DimensionValue::DimValue(n)) if *n > 0 => Ok(*n as usize),
            // A symbolic leading dimension is the batch axis.
            Some(DimensionValue::DimParam(_)) | None if i == 0 => Ok(1),
            _ => Err(OnnxError::Malformed(format!(
                "value '{}' has a dynamic or non-positive dimension {i}",
                v.name
            ))),
        })
        .collect()
}

/// Builds ONNX models node by node. Used by the exporter, the generator and
/// tests that need hand-made models.
#[derive(Debug, Clone)]
pub struct OnnxModelBuilder {
    graph: GraphProto,
    opset: i64,
}

impl OnnxModelBuilder {
    pub fn new(graph_name: &str, input_name: &str, input_shape: &[usize]) -> Self {
        OnnxModelBuilder {
            graph: GraphProto {
                name: graph_name.to_string(),
                input: vec![value_info(input_name, input_shape)],
                ..Default::default()
            },
            opset: 13,
        }
    }

    pub fn initializer(&mut self, tensor: TensorProto) -> &mut Self {
        self.graph.initializer.push(tensor);
        self
    }

    pub fn float_initializer(&mut self, name: &str, shape: &[usize], data: &[f64]) -> &mut Self {
        self.initializer(float_tensor(name, shape, data.iter().copied()))
    }

    pub fn node(
        &mut self,
        name: &str,
        op_type: &str,
        inputs: &[&str],
        outputs: &[&str],
        attributes: Vec<AttributeProto>,
    ) -> &mut Self {
        self.graph.node.push(NodeProto {
            name: name.to_string(),
            op_type: op_type.to_string(),
            input: inputs.iter().map(|s| s.to_string()).collect(),
            output: outputs.iter().map(|s| s.to_string()).collect(),
            attribute: attributes,
            ..Default::default()
        });
        self
    }

    pub fn finish(mut self, output_name: &str, output_shape: &[usize]) -> ModelProto {
        self.graph.output = vec![value_info(output_name, output_shape)];
        ModelProto {
            ir_version: 8,
            producer_name: "redkit".into(),
            producer_version: env!("CARGO_PKG_VERSION").into(),
            graph: Some(self.graph),
            opset_import: vec![OperatorSetIdProto {
                domain: String::new(),
                version: self.opset,
            }],
            ..Default::default()
        }
    }
}

pub fn encode_model(model: &ModelProto) -> Vec<u8> {
    model.encode_to_vec()
}

pub fn decode_model(bytes: &[u8]) -> Result<ModelProto, OnnxError> {
    ModelProto::decode(bytes).map_err(|e| OnnxError::Malformed(format!("protobuf decode: {e}")))
}
