//! ONNX → layer graph. Every supported node becomes Linear/ReLU/Sum
//! structure; shape-only nodes are aliases of their input layer because
//! row-major reshapes never move data.

use std::collections::{BTreeSet, HashMap};

use ndarray::{Array4, ArrayD, IxDyn};

use super::conv::{conv_to_matrix, ConvParams};
use super::pool::{append_max_gadgets, pool_windows, PoolParams};
use super::proto::NodeProto;
use super::reference::{
    eval_node, flatten_shape, reshape_target, split_sizes, squeeze_shape, unsqueeze_shape,
    window_attrs,
};
use super::tensor::{decode_model, get_float, get_int, get_ints, tensor_to_array, value_info_shape};
use super::{ImportReport, OnnxError, UnsupportedNode};
use crate::net_ir::{DenseMatrix, DenseVector, GraphEditor, LayerId, Network, NetworkBuilder};

pub const SUPPORTED_OPS: &[&str] = &[
    "Gemm",
    "MatMul",
    "Conv",
    "BatchNormalization",
    "Add",
    "Sub",
    "Mul",
    "Div",
    "Concat",
    "Split",
    "Reshape",
    "Flatten",
    "Squeeze",
    "Unsqueeze",
    "Identity",
    "Dropout",
    "Relu",
    "MaxPool",
    "Constant",
];

#[derive(Debug, Clone)]
enum Val {
    Dyn { id: LayerId, shape: Vec<usize> },
    Const(ArrayD<f64>),
    /// Produced by a node that could not be imported.
    Poisoned,
}

/// Why a node with dynamic inputs cannot be lowered.
struct Reject(String);

type Lowered = Result<Vec<Val>, Reject>;

fn reject<T>(msg: impl Into<String>) -> Result<T, Reject> {
    Err(Reject(msg.into()))
}

fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

/// Broadcasts a constant onto a dynamic tensor's shape, refusing when the
/// result would be larger than the dynamic tensor.
fn const_on(c: &ArrayD<f64>, shape: &[usize]) -> Result<DenseVector, Reject> {
    if c.ndim() > shape.len() {
        return reject(format!("constant of shape {:?} enlarges tensor {shape:?}", c.shape()));
    }
    match c.broadcast(IxDyn(shape)) {
        Some(v) => Ok(v.iter().copied().collect()),
        None => reject(format!("constant of shape {:?} does not broadcast to {shape:?}", c.shape())),
    }
}

struct Importer {
    b: NetworkBuilder,
    ops_used: BTreeSet<String>,
}

impl Importer {
    fn linear(&mut self, pred: LayerId, w: DenseMatrix, bias: DenseVector) -> LayerId {
        self.b.linear(pred, w, bias)
    }

    fn lower(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let dyn_arg = |i: usize| match args.get(i) {
            Some(Some(Val::Dyn { id, shape })) => Some((*id, shape.clone())),
            _ => None,
        };
        let const_arg = |i: usize| match args.get(i) {
            Some(Some(Val::Const(c))) => Some(c.clone()),
            _ => None,
        };
        let alias = |id: LayerId, shape: Vec<usize>| Ok(vec![Val::Dyn { id, shape }]);
        match node.op_type.as_str() {
            "Identity" | "Dropout" => {
                let (id, shape) = dyn_arg(0).ok_or(Reject("data input must be dynamic".into()))?;
                alias(id, shape)
            }
            "Reshape" => {
                let (id, shape) = dyn_arg(0).ok_or(Reject("data input must be dynamic".into()))?;
                let spec = const_arg(1).ok_or(Reject("target shape must be constant".into()))?;
                let spec: Vec<i64> = spec.iter().map(|&v| v as i64).collect();
                let out = reshape_target(node, &shape, &spec).map_err(|e| Reject(e.to_string()))?;
                alias(id, out)
            }
            "Flatten" => {
                let (id, shape) = dyn_arg(0).ok_or(Reject("data input must be dynamic".into()))?;
                alias(id, flatten_shape(node, &shape).map_err(|e| Reject(e.to_string()))?)
            }
            "Squeeze" | "Unsqueeze" => {
                let (id, shape) = dyn_arg(0).ok_or(Reject("data input must be dynamic".into()))?;
                let axes = const_arg(1);
                if args.get(1).is_some_and(|a| a.is_some()) && axes.is_none() {
                    return reject("axes must be constant");
                }
                let out = if node.op_type == "Squeeze" {
                    squeeze_shape(node, &shape, axes.as_ref())
                } else {
                    unsqueeze_shape(node, &shape, axes.as_ref())
                }
                .map_err(|e| Reject(e.to_string()))?;
                alias(id, out)
            }
            "Relu" => {
                let (id, shape) = dyn_arg(0).ok_or(Reject("input must be dynamic".into()))?;
                let r = self.b.relu(id);
                alias(r, shape)
            }
            "Gemm" => self.gemm(node, args),
            "MatMul" => self.matmul(args),
            "Conv" => self.conv(node, args),
            "BatchNormalization" => self.batchnorm(node, args),
            "Add" | "Sub" => self.add_sub(node, args),
            "Mul" | "Div" => self.mul_div(node, args),
            "Concat" => self.concat(node, args),
            "Split" => self.split(node, args),
            "MaxPool" => self.maxpool(node, args),
            other => reject(format!("operator {other} is not supported")),
        }
    }

    fn gemm(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let Some(Some(Val::Dyn { id, shape })) = args.first() else {
            return reject("Gemm input A must be dynamic");
        };
        let Some(Some(Val::Const(bm))) = args.get(1) else {
            return reject("Gemm weight B must be constant");
        };
        if shape.len() != 2 || bm.ndim() != 2 {
            return reject("Gemm operands must be matrices");
        }
        let (trans_a, trans_b) = (get_int(node, "transA", 0) != 0, get_int(node, "transB", 0) != 0);
        let (m, k) = if trans_a { (shape[1], shape[0]) } else { (shape[0], shape[1]) };
        if m != 1 {
            return reject(format!("Gemm batch dimension {m} is not 1"));
        }
        let bm = bm.view().into_dimensionality::<ndarray::Ix2>().expect("rank 2");
        // W has shape [N, K].
        let w = if trans_b { bm.to_owned() } else { bm.t().to_owned() };
        if w.ncols() != k {
            return reject(format!("Gemm inner dimensions {k} and {} differ", w.ncols()));
        }
        let alpha = get_float(node, "alpha", 1.0) as f64;
        let beta = get_float(node, "beta", 1.0) as f64;
        let n = w.nrows();
        let bias = match args.get(2) {
            Some(Some(Val::Const(c))) => const_on(c, &[1, n])? * beta,
            Some(Some(_)) => return reject("Gemm bias C must be constant"),
            _ => DenseVector::zeros(n),
        };
        let l = self.linear(*id, w * alpha, bias);
        Ok(vec![Val::Dyn { id: l, shape: vec![1, n] }])
    }

    fn matmul(&mut self, args: &[Option<Val>]) -> Lowered {
        match (args.first(), args.get(1)) {
            (Some(Some(Val::Dyn { id, shape })), Some(Some(Val::Const(b)))) => {
                if b.ndim() != 2 || shape.is_empty() {
                    return reject("MatMul weight must be a matrix");
                }
                let (k, n) = (b.shape()[0], b.shape()[1]);
                if shape[shape.len() - 1] != k {
                    return reject("MatMul inner dimensions differ");
                }
                let rows = numel(shape) / k;
                let mut w = DenseMatrix::zeros((rows * n, rows * k));
                for r in 0..rows {
                    for j in 0..n {
                        for i in 0..k {
                            w[[r * n + j, r * k + i]] = b[[i, j]];
                        }
                    }
                }
                let mut out = shape.clone();
                *out.last_mut().expect("non-empty") = n;
                let l = self.linear(*id, w, DenseVector::zeros(rows * n));
                Ok(vec![Val::Dyn { id: l, shape: out }])
            }
            (Some(Some(Val::Const(a))), Some(Some(Val::Dyn { id, shape }))) => {
                if a.ndim() != 2 || shape.len() != 2 || a.shape()[1] != shape[0] {
                    return reject("MatMul with a constant left operand needs matching matrices");
                }
                let (m, k, n) = (a.shape()[0], a.shape()[1], shape[1]);
                let mut w = DenseMatrix::zeros((m * n, k * n));
                for i in 0..m {
                    for j in 0..n {
                        for t in 0..k {
                            w[[i * n + j, t * n + j]] = a[[i, t]];
                        }
                    }
                }
                let l = self.linear(*id, w, DenseVector::zeros(m * n));
                Ok(vec![Val::Dyn { id: l, shape: vec![m, n] }])
            }
            _ => reject("MatMul of two dynamic tensors is not linear"),
        }
    }

    fn conv(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let Some(Some(Val::Dyn { id, shape })) = args.first() else {
            return reject("Conv input must be dynamic");
        };
        let Some(Some(Val::Const(kernel))) = args.get(1) else {
            return reject("Conv kernel must be constant");
        };
        if shape.len() != 4 || shape[0] != 1 || kernel.ndim() != 4 {
            return reject("only batch-1 2-D convolutions are supported");
        }
        let bias = match args.get(2) {
            Some(Some(Val::Const(c))) => Some(c.iter().copied().collect::<DenseVector>()),
            Some(Some(_)) => return reject("Conv bias must be constant"),
            _ => None,
        };
        let kernel: Array4<f64> = kernel
            .clone()
            .into_dimensionality()
            .expect("rank checked");
        let ks = [kernel.dim().2, kernel.dim().3];
        if let Some(k) = get_ints(node, "kernel_shape") {
            if k.len() != 2 || k[0] as usize != ks[0] || k[1] as usize != ks[1] {
                return reject("kernel_shape disagrees with the kernel tensor");
            }
        }
        let (strides, pads, dilations) =
            window_attrs(node, [shape[2], shape[3]], ks).map_err(|e| Reject(e.to_string()))?;
        let params = ConvParams {
            strides,
            pads,
            dilations,
            group: get_int(node, "group", 1).max(1) as usize,
        };
        let (w, bias, out) = conv_to_matrix(&kernel, bias.as_ref(), &params, [shape[1], shape[2], shape[3]])
            .map_err(|e| Reject(e.to_string()))?;
        let l = self.linear(*id, w, bias);
        Ok(vec![Val::Dyn { id: l, shape: vec![1, out[0], out[1], out[2]] }])
    }

    fn batchnorm(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let Some(Some(Val::Dyn { id, shape })) = args.first() else {
            return reject("BatchNormalization input must be dynamic");
        };
        let mut p = Vec::with_capacity(4);
        for i in 1..5 {
            match args.get(i) {
                Some(Some(Val::Const(c))) => p.push(c.iter().copied().collect::<DenseVector>()),
                _ => return reject("BatchNormalization parameters must be constant"),
            }
        }
        if get_int(node, "training_mode", 0) != 0 {
            return reject("training-mode BatchNormalization is not supported");
        }
        if shape.len() < 2 || shape[0] != 1 {
            return reject("BatchNormalization needs a batch-1 input of rank ≥ 2");
        }
        let c = shape[1];
        if p.iter().any(|v| v.len() != c) {
            return reject("BatchNormalization parameter length differs from channel count");
        }
        let eps = get_float(node, "epsilon", 1e-5) as f64;
        let spatial = numel(&shape[2..]);
        let n = c * spatial;
        let mut w = DenseMatrix::zeros((n, n));
        let mut bias = DenseVector::zeros(n);
        for ch in 0..c {
            let s = p[0][ch] / (p[3][ch] + eps).sqrt();
            for j in 0..spatial {
                let r = ch * spatial + j;
                w[[r, r]] = s;
                bias[r] = p[1][ch] - p[2][ch] * s;
            }
        }
        let l = self.linear(*id, w, bias);
        Ok(vec![Val::Dyn { id: l, shape: shape.clone() }])
    }

    fn add_sub(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let sign = if node.op_type == "Sub" { -1.0 } else { 1.0 };
        match (args.first(), args.get(1)) {
            (Some(Some(Val::Dyn { id: a, shape: sa })), Some(Some(Val::Dyn { id: b, shape: sb }))) => {
                if sa != sb {
                    return reject(format!("{} of dynamic tensors with shapes {sa:?} and {sb:?}", node.op_type));
                }
                let n = numel(sa);
                let la = self.linear(*a, DenseMatrix::eye(n), DenseVector::zeros(n));
                let lb = self.linear(*b, DenseMatrix::eye(n) * sign, DenseVector::zeros(n));
                let s = self.b.sum(vec![la, lb]);
                Ok(vec![Val::Dyn { id: s, shape: sa.clone() }])
            }
            (Some(Some(Val::Dyn { id, shape })), Some(Some(Val::Const(c)))) => {
                let n = numel(shape);
                let bias = const_on(c, shape)? * sign;
                let l = self.linear(*id, DenseMatrix::eye(n), bias);
                Ok(vec![Val::Dyn { id: l, shape: shape.clone() }])
            }
            (Some(Some(Val::Const(c))), Some(Some(Val::Dyn { id, shape }))) => {
                let n = numel(shape);
                let bias = const_on(c, shape)?;
                let l = self.linear(*id, DenseMatrix::eye(n) * sign, bias);
                Ok(vec![Val::Dyn { id: l, shape: shape.clone() }])
            }
            _ => reject("malformed operands"),
        }
    }

    fn mul_div(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let div = node.op_type == "Div";
        let (id, shape, c) = match (args.first(), args.get(1)) {
            (Some(Some(Val::Dyn { id, shape })), Some(Some(Val::Const(c)))) => (*id, shape.clone(), c),
            (Some(Some(Val::Const(c))), Some(Some(Val::Dyn { id, shape }))) if !div => {
                (*id, shape.clone(), c)
            }
            (Some(Some(Val::Dyn { .. })), Some(Some(Val::Dyn { .. }))) => {
                return reject(format!("{} of two tensors is not linear", node.op_type))
            }
            _ => return reject(format!("{} needs a constant divisor", node.op_type)),
        };
        let mut d = const_on(c, &shape)?;
        if div {
            if d.iter().any(|&v| v == 0.0) {
                return reject("division by zero");
            }
            d.mapv_inplace(|v| 1.0 / v);
        }
        let n = d.len();
        let l = self.linear(id, DenseMatrix::from_diag(&d), DenseVector::zeros(n));
        Ok(vec![Val::Dyn { id: l, shape }])
    }

    fn concat(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let parts: Vec<&Val> = args.iter().flatten().collect();
        let shapes: Vec<Vec<usize>> = parts
            .iter()
            .map(|v| match v {
                Val::Dyn { shape, .. } => shape.clone(),
                Val::Const(c) => c.shape().to_vec(),
                Val::Poisoned => unreachable!("poisoned inputs are filtered"),
            })
            .collect();
        let rank = shapes[0].len();
        let axis = get_int(node, "axis", 0);
        let axis = if axis < 0 { axis + rank as i64 } else { axis };
        if axis < 0 || axis as usize >= rank {
            return reject("concat axis out of range");
        }
        let axis = axis as usize;
        for s in &shapes {
            if s.len() != rank || (0..rank).any(|d| d != axis && s[d] != shapes[0][d]) {
                return reject(format!("concat shapes {shapes:?} are incompatible"));
            }
        }
        let mut out_shape = shapes[0].clone();
        out_shape[axis] = shapes.iter().map(|s| s[axis]).sum();
        let outer: usize = numel(&out_shape[..axis]);
        let inner: usize = numel(&out_shape[axis + 1..]);
        let total = numel(&out_shape);
        let mut bias = DenseVector::zeros(total);
        let mut branches = Vec::new();
        let mut offset = 0;
        for (v, s) in parts.iter().zip(&shapes) {
            let len = s[axis];
            let n = numel(s);
            let mut sel = DenseMatrix::zeros((total, n));
            let consts: Option<Vec<f64>> = match v {
                Val::Const(c) => Some(c.iter().copied().collect()),
                _ => None,
            };
            for o in 0..outer {
                for a in 0..len {
                    for i in 0..inner {
                        let src = (o * len + a) * inner + i;
                        let dst = (o * out_shape[axis] + offset + a) * inner + i;
                        match &consts {
                            Some(c) => bias[dst] = c[src],
                            None => sel[[dst, src]] = 1.0,
                        }
                    }
                }
            }
            if let Val::Dyn { id, .. } = v {
                branches.push((*id, sel));
            }
            offset += len;
        }
        let mut linears = Vec::with_capacity(branches.len());
        for (i, (id, sel)) in branches.into_iter().enumerate() {
            let b = if i == 0 { bias.clone() } else { DenseVector::zeros(total) };
            linears.push(self.linear(id, sel, b));
        }
        let out = if linears.len() == 1 { linears[0] } else { self.b.sum(linears) };
        Ok(vec![Val::Dyn { id: out, shape: out_shape }])
    }

    fn split(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let Some(Some(Val::Dyn { id, shape })) = args.first() else {
            return reject("Split input must be dynamic");
        };
        let split_input = match args.get(1) {
            Some(Some(Val::Const(c))) => Some(c.clone()),
            Some(Some(_)) => return reject("split sizes must be constant"),
            _ => None,
        };
        let rank = shape.len();
        let axis = get_int(node, "axis", 0);
        let axis = if axis < 0 { axis + rank as i64 } else { axis };
        if axis < 0 || axis as usize >= rank {
            return reject("split axis out of range");
        }
        let axis = axis as usize;
        let sizes = split_sizes(node, shape[axis], split_input.as_ref()).map_err(|e| Reject(e.to_string()))?;
        let outer = numel(&shape[..axis]);
        let inner = numel(&shape[axis + 1..]);
        let mut outs = Vec::with_capacity(sizes.len());
        let mut offset = 0;
        for len in sizes {
            let mut s = shape.clone();
            s[axis] = len;
            let n = numel(&s);
            let mut sel = DenseMatrix::zeros((n, numel(shape)));
            for o in 0..outer {
                for a in 0..len {
                    for i in 0..inner {
                        sel[[(o * len + a) * inner + i, (o * shape[axis] + offset + a) * inner + i]] = 1.0;
                    }
                }
            }
            let l = self.linear(*id, sel, DenseVector::zeros(n));
            outs.push(Val::Dyn { id: l, shape: s });
            offset += len;
        }
        Ok(outs)
    }

    fn maxpool(&mut self, node: &NodeProto, args: &[Option<Val>]) -> Lowered {
        let Some(Some(Val::Dyn { id, shape })) = args.first() else {
            return reject("MaxPool input must be dynamic");
        };
        if shape.len() != 4 || shape[0] != 1 {
            return reject("only batch-1 2-D max pooling is supported");
        }
        if get_int(node, "ceil_mode", 0) != 0 {
            return reject("ceil_mode is not supported");
        }
        if node.output.len() > 1 && !node.output[1].is_empty() {
            return reject("MaxPool indices output is not supported");
        }
        let Some(k) = get_ints(node, "kernel_shape").filter(|k| k.len() == 2) else {
            return reject("MaxPool needs a 2-D kernel_shape");
        };
        let kernel = [k[0] as usize, k[1] as usize];
        let (strides, pads, dilations) =
            window_attrs(node, [shape[2], shape[3]], kernel).map_err(|e| Reject(e.to_string()))?;
        let params = PoolParams {
            kernel,
            strides,
            pads,
            dilations,
        };
        let (windows, out) =
            pool_windows([shape[1], shape[2], shape[3]], &params).map_err(|e| Reject(e.to_string()))?;
        let (l, _) = append_max_gadgets(&mut self.b, *id, &windows);
        Ok(vec![Val::Dyn { id: l, shape: vec![1, out[0], out[1], out[2]] }])
    }
}

/// Imports a serialized ONNX model.
pub fn import_onnx(bytes: &[u8]) -> Result<(Network, ImportReport), OnnxError> {
    let model = decode_model(bytes)?;
    let graph = model
        .graph
        .as_ref()
        .ok_or_else(|| OnnxError::Malformed("model has no graph".into()))?;

    let mut values: HashMap<String, Val> = HashMap::new();
    for t in &graph.initializer {
        values.insert(t.name.clone(), Val::Const(tensor_to_array(t)?));
    }
    let data_inputs: Vec<_> = graph
        .input
        .iter()
        .filter(|v| !values.contains_key(&v.name))
        .collect();
    if data_inputs.len() != 1 || graph.output.len() != 1 {
        return Err(OnnxError::Malformed(format!(
            "expected one graph input and one graph output, found {} and {}",
            data_inputs.len(),
            graph.output.len()
        )));
    }
    let input_shape = value_info_shape(data_inputs[0])?;

    let mut imp = Importer {
        b: NetworkBuilder::new(),
        ops_used: BTreeSet::new(),
    };
    let input = imp.b.input(numel(&input_shape));
    values.insert(
        data_inputs[0].name.clone(),
        Val::Dyn {
            id: input,
            shape: input_shape.clone(),
        },
    );

    let mut unsupported = Vec::new();
    for (idx, node) in graph.node.iter().enumerate() {
        let name = if node.name.is_empty() {
            format!("#{idx}")
        } else {
            node.name.clone()
        };
        let mut args: Vec<Option<Val>> = Vec::with_capacity(node.input.len());
        for n in &node.input {
            if n.is_empty() {
                args.push(None);
            } else {
                match values.get(n) {
                    Some(v) => args.push(Some(v.clone())),
                    None => {
                        return Err(OnnxError::Malformed(format!(
                            "node '{name}' reads undefined tensor '{n}'"
                        )))
                    }
                }
            }
        }
        let outputs: Vec<&String> = node.output.iter().filter(|o| !o.is_empty()).collect();
        let poison = |values: &mut HashMap<String, Val>| {
            for o in &outputs {
                values.insert((*o).clone(), Val::Poisoned);
            }
        };
        if !SUPPORTED_OPS.contains(&node.op_type.as_str()) || !node.domain.is_empty() && node.domain != "ai.onnx" {
            unsupported.push(UnsupportedNode {
                node: name,
                op_type: node.op_type.clone(),
                reason: "operator is not supported".into(),
            });
            poison(&mut values);
            continue;
        }
        if args.iter().flatten().any(|v| matches!(v, Val::Poisoned)) {
            poison(&mut values);
            continue;
        }
        let all_const = args.iter().flatten().all(|v| matches!(v, Val::Const(_)));
        let result = if all_const {
            let consts: Vec<Option<&ArrayD<f64>>> = args
                .iter()
                .map(|a| match a {
                    Some(Val::Const(c)) => Some(c),
                    _ => None,
                })
                .collect();
            eval_node(node, &consts)
                .map(|vs| vs.into_iter().map(Val::Const).collect())
                .map_err(|e| Reject(e.to_string()))
        } else {
            imp.lower(node, &args)
        };
        match result {
            Ok(vals) => {
                imp.ops_used.insert(node.op_type.clone());
                for (o, v) in node.output.iter().zip(vals) {
                    if !o.is_empty() {
                        values.insert(o.clone(), v);
                    }
                }
            }
            Err(Reject(reason)) => {
                unsupported.push(UnsupportedNode {
                    node: name,
                    op_type: node.op_type.clone(),
                    reason,
                });
                poison(&mut values);
            }
        }
    }

    let mut report = ImportReport {
        supported_ops: imp.ops_used.iter().cloned().collect(),
        unsupported_ops: unsupported,
        input_shape,
        output_shape: Vec::new(),
        flattening_order: "row-major".into(),
    };
    if !report.unsupported_ops.is_empty() {
        return Err(OnnxError::Unsupported(report));
    }
    let out_name = &graph.output[0].name;
    let (out, out_shape) = match values.get(out_name) {
        Some(Val::Dyn { id, shape }) => (*id, shape.clone()),
        Some(_) => {
            return Err(OnnxError::Malformed(format!(
                "output '{out_name}' does not depend on the input"
            )))
        }
        None => return Err(OnnxError::Malformed(format!("output '{out_name}' is never produced"))),
    };
    report.output_shape = out_shape;

    let raw = imp.b.finish_unchecked(out);
    let mut ed = GraphEditor::from_network(&raw);
    ed.prune_dead();
    let net = Network::new(ed.to_network().layers().to_vec(), input, out).map_err(OnnxError::Net)?;
    Ok((net, report))
}

/// Reshapes a flat input vector into the model's declared input shape.
pub fn shape_input(v: &DenseVector, shape: &[usize]) -> Result<ArrayD<f64>, OnnxError> {
    v.clone()
        .into_shape_with_order(IxDyn(shape))
        .map_err(|e| OnnxError::Shape(e.to_string()))
}
