//! Direct per-node evaluator for the supported ONNX operator subset.
//!
//! Works on n-dimensional tensors with the operators' own semantics
//! (sliding-window convolution, window max, broadcasting arithmetic) and
//! never goes through the Linear/ReLU/Sum lowering, so it can serve as an
//! independent oracle for the importer. The importer also uses it to fold
//! nodes whose inputs are all constant.

use std::collections::HashMap;

use ndarray::{concatenate, Array4, ArrayD, Axis, IxDyn};

use super::proto::{ModelProto, NodeProto};
use super::tensor::{find_attr, get_float, get_int, get_ints, get_string, tensor_to_array};
use super::OnnxError;

/// Strides, pads (`[top, left, bottom, right]`) and dilations of a 2-D
/// windowed op, resolving `auto_pad`.
pub(crate) fn window_attrs(
    node: &NodeProto,
    in_hw: [usize; 2],
    kernel: [usize; 2],
) -> Result<([usize; 2], [usize; 4], [usize; 2]), OnnxError> {
    let pair = |name: &str| -> Result<[usize; 2], OnnxError> {
        match get_ints(node, name) {
            None => Ok([1, 1]),
            Some(v) if v.len() == 2 && v.iter().all(|&x| x > 0) => Ok([v[0] as usize, v[1] as usize]),
            Some(v) => Err(OnnxError::Malformed(format!(
                "node '{}': attribute {name} = {v:?} is not a positive pair",
                node.name
            ))),
        }
    };
    let strides = pair("strides")?;
    let dilations = pair("dilations")?;
    let auto_pad = get_string(node, "auto_pad").unwrap_or_else(|| "NOTSET".into());
    let pads = match auto_pad.as_str() {
        "NOTSET" | "" => match get_ints(node, "pads") {
            None => [0; 4],
            Some(p) if p.len() == 4 && p.iter().all(|&x| x >= 0) => {
                // ONNX order is [x1_begin, x2_begin, x1_end, x2_end].
                [p[0] as usize, p[1] as usize, p[2] as usize, p[3] as usize]
            }
            Some(p) => {
                return Err(OnnxError::Malformed(format!(
                    "node '{}': pads {p:?} are not four non-negative values",
                    node.name
                )))
            }
        },
        "VALID" => [0; 4],
        "SAME_UPPER" | "SAME_LOWER" => {
            let mut pads = [0; 4];
            for d in 0..2 {
                let out = in_hw[d].div_ceil(strides[d]);
                let span = (kernel[d] - 1) * dilations[d] + 1;
                let total = ((out - 1) * strides[d] + span).saturating_sub(in_hw[d]);
                let small = total / 2;
                let (begin, end) = if auto_pad == "SAME_UPPER" {
                    (small, total - small)
                } else {
                    (total - small, small)
                };
                pads[d] = begin;
                pads[d + 2] = end;
            }
            pads
        }
        other => {
            return Err(OnnxError::Malformed(format!(
                "node '{}': unknown auto_pad '{other}'",
                node.name
            )))
        }
    };
    Ok((strides, pads, dilations))
}

fn norm_axis(axis: i64, rank: usize, node: &NodeProto) -> Result<usize, OnnxError> {
    let a = if axis < 0 { axis + rank as i64 } else { axis };
    if a < 0 || a as usize >= rank {
        return Err(OnnxError::Malformed(format!(
            "node '{}': axis {axis} out of range for rank {rank}",
            node.name
        )));
    }
    Ok(a as usize)
}

pub(crate) fn reshape_target(
    node: &NodeProto,
    shape: &[usize],
    spec: &[i64],
) -> Result<Vec<usize>, OnnxError> {
    let total: usize = shape.iter().product();
    let allow_zero = get_int(node, "allowzero", 0) != 0;
    let mut out = Vec::with_capacity(spec.len());
    let mut infer = None;
    for (i, &d) in spec.iter().enumerate() {
        match d {
            0 if !allow_zero => out.push(*shape.get(i).ok_or_else(|| {
                OnnxError::Malformed(format!("node '{}': reshape copies missing dim {i}", node.name))
            })?),
            -1 if infer.is_none() => {
                infer = Some(i);
                out.push(1);
            }
            d if d >= 0 => out.push(d as usize),
            _ => {
                return Err(OnnxError::Malformed(format!(
                    "node '{}': invalid reshape target {spec:?}",
                    node.name
                )))
            }
        }
    }
    let known: usize = out.iter().product();
    if let Some(i) = infer {
        if known == 0 || total % known != 0 {
            return Err(OnnxError::Shape(format!(
                "node '{}': cannot reshape {shape:?} to {spec:?}",
                node.name
            )));
        }
        out[i] = total / known;
    }
    if out.iter().product::<usize>() != total {
        return Err(OnnxError::Shape(format!(
            "node '{}': cannot reshape {shape:?} to {spec:?}",
            node.name
        )));
    }
    Ok(out)
}

pub(crate) fn flatten_shape(node: &NodeProto, shape: &[usize]) -> Result<Vec<usize>, OnnxError> {
    let rank = shape.len();
    let axis = get_int(node, "axis", 1);
    let a = if axis < 0 { axis + rank as i64 } else { axis };
    if a < 0 || a as usize > rank {
        return Err(OnnxError::Malformed(format!(
            "node '{}': flatten axis {axis} out of range",
            node.name
        )));
    }
    let a = a as usize;
    Ok(vec![shape[..a].iter().product(), shape[a..].iter().product()])
}

/// Axes for Squeeze/Unsqueeze from the attribute (opset < 13) or the
/// second input (opset ≥ 13).
fn axes_of(node: &NodeProto, second: Option<&ArrayD<f64>>) -> Option<Vec<i64>> {
    get_ints(node, "axes").or_else(|| second.map(|a| a.iter().map(|&v| v as i64).collect()))
}

pub(crate) fn squeeze_shape(
    node: &NodeProto,
    shape: &[usize],
    axes: Option<&ArrayD<f64>>,
) -> Result<Vec<usize>, OnnxError> {
    match axes_of(node, axes) {
        None => Ok(shape.iter().copied().filter(|&d| d != 1).collect()),
        Some(axes) => {
            let mut drop = Vec::new();
            for a in axes {
                let a = norm_axis(a, shape.len(), node)?;
                if shape[a] != 1 {
                    return Err(OnnxError::Shape(format!(
                        "node '{}': cannot squeeze axis {a} of size {}",
                        node.name, shape[a]
                    )));
                }
                drop.push(a);
            }
            Ok(shape
                .iter()
                .enumerate()
                .filter(|(i, _)| !drop.contains(i))
                .map(|(_, &d)| d)
                .collect())
        }
    }
}

pub(crate) fn unsqueeze_shape(
    node: &NodeProto,
    shape: &[usize],
    axes: Option<&ArrayD<f64>>,
) -> Result<Vec<usize>, OnnxError> {
    let axes = axes_of(node, axes).ok_or_else(|| {
        OnnxError::Malformed(format!("node '{}': Unsqueeze without axes", node.name))
    })?;
    let rank = shape.len() + axes.len();
    let mut pos: Vec<usize> = axes
        .iter()
        .map(|&a| norm_axis(a, rank, node))
        .collect::<Result<_, _>>()?;
    pos.sort_unstable();
    let mut out = Vec::with_capacity(rank);
    let mut rest = shape.iter();
    for i in 0..rank {
        if pos.contains(&i) {
            out.push(1);
        } else {
            out.push(*rest.next().ok_or_else(|| {
                OnnxError::Malformed(format!("node '{}': duplicate unsqueeze axes", node.name))
            })?);
        }
    }
    Ok(out)
}

/// Sizes of the Split outputs along `axis`.
pub(crate) fn split_sizes(
    node: &NodeProto,
    dim: usize,
    split_input: Option<&ArrayD<f64>>,
) -> Result<Vec<usize>, OnnxError> {
    let explicit = get_ints(node, "split")
        .or_else(|| split_input.map(|a| a.iter().map(|&v| v as i64).collect()));
    let sizes: Vec<usize> = match explicit {
        Some(v) => v.iter().map(|&x| x.max(0) as usize).collect(),
        None => {
            let n = node.output.len().max(1);
            if dim % n != 0 {
                return Err(OnnxError::Shape(format!(
                    "node '{}': cannot split {dim} evenly into {n}",
                    node.name
                )));
            }
            vec![dim / n; n]
        }
    };
    if sizes.iter().sum::<usize>() != dim || sizes.len() != node.output.len() {
        return Err(OnnxError::Shape(format!(
            "node '{}': split sizes {sizes:?} do not cover {dim}",
            node.name
        )));
    }
    Ok(sizes)
}

fn as2(a: &ArrayD<f64>, node: &NodeProto) -> Result<ndarray::Array2<f64>, OnnxError> {
    a.clone()
        .into_dimensionality::<ndarray::Ix2>()
        .map_err(|_| OnnxError::Shape(format!("node '{}': expected a matrix, got {:?}", node.name, a.shape())))
}

fn broadcast_binary(
    a: &ArrayD<f64>,
    b: &ArrayD<f64>,
    node: &NodeProto,
    f: impl Fn(f64, f64) -> f64,
) -> Result<ArrayD<f64>, OnnxError> {
    let rank = a.ndim().max(b.ndim());
    let pad = |s: &[usize]| {
        let mut v = vec![1; rank - s.len()];
        v.extend_from_slice(s);
        v
    };
    let (sa, sb) = (pad(a.shape()), pad(b.shape()));
    let mut out_shape = Vec::with_capacity(rank);
    for (x, y) in sa.iter().zip(&sb) {
        out_shape.push(match (*x, *y) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(OnnxError::Shape(format!(
                    "node '{}': shapes {:?} and {:?} do not broadcast",
                    node.name,
                    a.shape(),
                    b.shape()
                )))
            }
        });
    }
    let av = a.broadcast(IxDyn(&out_shape)).expect("checked shape");
    let bv = b.broadcast(IxDyn(&out_shape)).expect("checked shape");
    Ok(ndarray::Zip::from(&av).and(&bv).map_collect(|&x, &y| f(x, y)))
}

fn conv_direct(
    node: &NodeProto,
    x: &ArrayD<f64>,
    w: &ArrayD<f64>,
    b: Option<&ArrayD<f64>>,
) -> Result<ArrayD<f64>, OnnxError> {
    if x.ndim() != 4 || w.ndim() != 4 {
        return Err(OnnxError::Shape(format!("node '{}': only 2-D convolution is supported", node.name)));
    }
    let (n, c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (m, cg, kh, kw) = (w.shape()[0], w.shape()[1], w.shape()[2], w.shape()[3]);
    let group = get_int(node, "group", 1).max(1) as usize;
    if cg * group != c || m % group != 0 {
        return Err(OnnxError::Shape(format!("node '{}': conv channels do not match", node.name)));
    }
    let (st, pads, dil) = window_attrs(node, [h, wd], [kh, kw])?;
    let oh = (h + pads[0] + pads[2]).checked_sub(dil[0] * (kh - 1) + 1).map(|v| v / st[0] + 1);
    let ow = (wd + pads[1] + pads[3]).checked_sub(dil[1] * (kw - 1) + 1).map(|v| v / st[1] + 1);
    let (Some(oh), Some(ow)) = (oh, ow) else {
        return Err(OnnxError::Shape(format!("node '{}': empty conv output", node.name)));
    };
    let mpg = m / group;
    let mut out = Array4::<f64>::zeros((n, m, oh, ow));
    for bi in 0..n {
        for mo in 0..m {
            let g = mo / mpg;
            for y in 0..oh {
                for xo in 0..ow {
                    let mut acc = b.map_or(0.0, |b| b[[mo]]);
                    for ci in 0..cg {
                        for ky in 0..kh {
                            let iy = (y * st[0] + ky * dil[0]) as isize - pads[0] as isize;
                            if iy < 0 || iy as usize >= h {
                                continue;
                            }
                            for kx in 0..kw {
                                let ix = (xo * st[1] + kx * dil[1]) as isize - pads[1] as isize;
                                if ix < 0 || ix as usize >= wd {
                                    continue;
                                }
                                acc += w[[mo, ci, ky, kx]]
                                    * x[[bi, g * cg + ci, iy as usize, ix as usize]];
                            }
                        }
                    }
                    out[[bi, mo, y, xo]] = acc;
                }
            }
        }
    }
    Ok(out.into_dyn())
}

fn maxpool_direct(node: &NodeProto, x: &ArrayD<f64>) -> Result<ArrayD<f64>, OnnxError> {
    if x.ndim() != 4 {
        return Err(OnnxError::Shape(format!("node '{}': only 2-D max pooling is supported", node.name)));
    }
    if get_int(node, "ceil_mode", 0) != 0 {
        return Err(OnnxError::Malformed(format!("node '{}': ceil_mode is not supported", node.name)));
    }
    let k = get_ints(node, "kernel_shape")
        .filter(|k| k.len() == 2)
        .ok_or_else(|| OnnxError::Malformed(format!("node '{}': MaxPool needs a 2-D kernel_shape", node.name)))?;
    let k = [k[0] as usize, k[1] as usize];
    let (n, c, h, w) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (st, pads, dil) = window_attrs(node, [h, w], k)?;
    let oh = (h + pads[0] + pads[2]).checked_sub(dil[0] * (k[0] - 1) + 1).map(|v| v / st[0] + 1);
    let ow = (w + pads[1] + pads[3]).checked_sub(dil[1] * (k[1] - 1) + 1).map(|v| v / st[1] + 1);
    let (Some(oh), Some(ow)) = (oh, ow) else {
        return Err(OnnxError::Shape(format!("node '{}': empty pool output", node.name)));
    };
    let mut out = Array4::<f64>::from_elem((n, c, oh, ow), f64::NEG_INFINITY);
    for bi in 0..n {
        for ch in 0..c {
            for y in 0..oh {
                for xo in 0..ow {
                    for ky in 0..k[0] {
                        for kx in 0..k[1] {
                            let iy = (y * st[0] + ky * dil[0]) as isize - pads[0] as isize;
                            let ix = (xo * st[1] + kx * dil[1]) as isize - pads[1] as isize;
                            if iy >= 0 && ix >= 0 && (iy as usize) < h && (ix as usize) < w {
                                let v = x[[bi, ch, iy as usize, ix as usize]];
                                if v > out[[bi, ch, y, xo]] {
                                    out[[bi, ch, y, xo]] = v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out.into_dyn())
}

/// Evaluates one node. `inputs` are positional; absent optional inputs are
/// `None`.
pub(crate) fn eval_node(
    node: &NodeProto,
    inputs: &[Option<&ArrayD<f64>>],
) -> Result<Vec<ArrayD<f64>>, OnnxError> {
    let arg = |i: usize| -> Result<&ArrayD<f64>, OnnxError> {
        inputs.get(i).copied().flatten().ok_or_else(|| {
            OnnxError::Malformed(format!("node '{}' is missing input {i}", node.name))
        })
    };
    let opt = |i: usize| inputs.get(i).copied().flatten();
    let one = |a: ArrayD<f64>| Ok(vec![a]);
    match node.op_type.as_str() {
        "Gemm" => {
            let mut a = as2(arg(0)?, node)?;
            let mut b = as2(arg(1)?, node)?;
            if get_int(node, "transA", 0) != 0 {
                a = a.reversed_axes();
            }
            if get_int(node, "transB", 0) != 0 {
                b = b.reversed_axes();
            }
            let alpha = get_float(node, "alpha", 1.0) as f64;
            let beta = get_float(node, "beta", 1.0) as f64;
            let y = (a.dot(&b) * alpha).into_dyn();
            match opt(2) {
                Some(c) => broadcast_binary(&y, c, node, |p, q| p + beta * q).map(|v| vec![v]),
                None => one(y),
            }
        }
        "MatMul" => {
            let (a, b) = (arg(0)?, arg(1)?);
            match (a.ndim(), b.ndim()) {
                (1, 2) => one(a.view().into_dimensionality::<ndarray::Ix1>().unwrap().dot(&as2(b, node)?).into_dyn()),
                (2, 1) => one(as2(a, node)?.dot(&b.view().into_dimensionality::<ndarray::Ix1>().unwrap()).into_dyn()),
                (r, 2) if r >= 2 => {
                    let k = a.shape()[r - 1];
                    let rows = a.len() / k.max(1);
                    let a2 = a
                        .to_shape((rows, k))
                        .map_err(|e| OnnxError::Shape(e.to_string()))?
                        .to_owned();
                    let y = a2.dot(&as2(b, node)?);
                    let mut shape = a.shape().to_vec();
                    shape[r - 1] = y.ncols();
                    one(y.into_shape_with_order(IxDyn(&shape)).map_err(|e| OnnxError::Shape(e.to_string()))?)
                }
                _ => Err(OnnxError::Shape(format!(
                    "node '{}': MatMul of ranks {} and {} is not supported",
                    node.name,
                    a.ndim(),
                    b.ndim()
                ))),
            }
        }
        "Conv" => one(conv_direct(node, arg(0)?, arg(1)?, opt(2))?),
        "BatchNormalization" => {
            let x = arg(0)?;
            let (scale, bias, mean, var) = (arg(1)?, arg(2)?, arg(3)?, arg(4)?);
            let eps = get_float(node, "epsilon", 1e-5) as f64;
            if x.ndim() < 2 {
                return Err(OnnxError::Shape(format!("node '{}': BatchNormalization needs rank ≥ 2", node.name)));
            }
            let mut y = x.clone();
            for (c, mut lane) in y.axis_iter_mut(Axis(1)).enumerate() {
                let s = scale[[c]] / (var[[c]] + eps).sqrt();
                lane.mapv_inplace(|v| (v - mean[[c]]) * s + bias[[c]]);
            }
            one(y)
        }
        "Add" => one(broadcast_binary(arg(0)?, arg(1)?, node, |a, b| a + b)?),
        "Sub" => one(broadcast_binary(arg(0)?, arg(1)?, node, |a, b| a - b)?),
        "Mul" => one(broadcast_binary(arg(0)?, arg(1)?, node, |a, b| a * b)?),
        "Div" => one(broadcast_binary(arg(0)?, arg(1)?, node, |a, b| a / b)?),
        "Relu" => one(arg(0)?.mapv(|v| v.max(0.0))),
        "Identity" | "Dropout" => one(arg(0)?.clone()),
        "Concat" => {
            let parts: Vec<&ArrayD<f64>> = inputs.iter().flatten().copied().collect();
            let rank = parts.first().map_or(0, |p| p.ndim());
            let axis = norm_axis(get_int(node, "axis", 0), rank, node)?;
            let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
            one(concatenate(Axis(axis), &views).map_err(|e| OnnxError::Shape(format!("node '{}': {e}", node.name)))?)
        }
        "Split" => {
            let x = arg(0)?;
            let axis = norm_axis(get_int(node, "axis", 0), x.ndim(), node)?;
            let sizes = split_sizes(node, x.shape()[axis], opt(1))?;
            let mut start = 0;
            let mut outs = Vec::new();
            for sz in sizes {
                outs.push(x.slice_axis(Axis(axis), ndarray::Slice::from(start..start + sz)).to_owned());
                start += sz;
            }
            Ok(outs)
        }
        "Reshape" => {
            let x = arg(0)?;
            let spec: Vec<i64> = arg(1)?.iter().map(|&v| v as i64).collect();
            let shape = reshape_target(node, x.shape(), &spec)?;
            one(x.to_shape(IxDyn(&shape)).map_err(|e| OnnxError::Shape(e.to_string()))?.to_owned())
        }
        "Flatten" => {
            let x = arg(0)?;
            let shape = flatten_shape(node, x.shape())?;
            one(x.to_shape(IxDyn(&shape)).map_err(|e| OnnxError::Shape(e.to_string()))?.to_owned())
        }
        "Squeeze" => {
            let x = arg(0)?;
            let shape = squeeze_shape(node, x.shape(), opt(1))?;
            one(x.to_shape(IxDyn(&shape)).map_err(|e| OnnxError::Shape(e.to_string()))?.to_owned())
        }
        "Unsqueeze" => {
            let x = arg(0)?;
            let shape = unsqueeze_shape(node, x.shape(), opt(1))?;
            one(x.to_shape(IxDyn(&shape)).map_err(|e| OnnxError::Shape(e.to_string()))?.to_owned())
        }
        "MaxPool" => one(maxpool_direct(node, arg(0)?)?),
        "Constant" => {
            let t = find_attr(node, "value")
                .and_then(|a| a.t.as_ref())
                .ok_or_else(|| OnnxError::Malformed(format!("node '{}': Constant without a tensor value", node.name)))?;
            one(tensor_to_array(t)?)
        }
        other => Err(OnnxError::Malformed(format!(
            "node '{}': operator {other} has no reference semantics",
            node.name
        ))),
    }
}

/// Evaluates a whole model on one input tensor (already shaped like the
/// graph input).
pub fn reference_eval(model: &ModelProto, input: &ArrayD<f64>) -> Result<ArrayD<f64>, OnnxError> {
    let graph = model
        .graph
        .as_ref()
        .ok_or_else(|| OnnxError::Malformed("model has no graph".into()))?;
    let mut values: HashMap<&str, ArrayD<f64>> = HashMap::new();
    for t in &graph.initializer {
        values.insert(t.name.as_str(), tensor_to_array(t)?);
    }
    let data_input = graph
        .input
        .iter()
        .find(|v| !values.contains_key(v.name.as_str()))
        .ok_or_else(|| OnnxError::Malformed("model has no data input".into()))?;
    values.insert(data_input.name.as_str(), input.clone());
    for node in &graph.node {
        let args: Vec<Option<&ArrayD<f64>>> = node
            .input
            .iter()
            .map(|n| if n.is_empty() { None } else { values.get(n.as_str()) })
            .collect();
        if args.iter().zip(&node.input).any(|(a, n)| a.is_none() && !n.is_empty()) {
            return Err(OnnxError::Malformed(format!(
                "node '{}' reads an undefined tensor",
                node.name
            )));
        }
        let outs = eval_node(node, &args)?;
        for (name, v) in node.output.iter().zip(outs) {
            values.insert(name.as_str(), v);
        }
    }
    let out = graph
        .output
        .first()
        .ok_or_else(|| OnnxError::Malformed("model has no output".into()))?;
    values
        .remove(out.name.as_str())
        .ok_or_else(|| OnnxError::Malformed(format!("output '{}' is never produced", out.name)))
}
