//! Unrolling of 2-D convolutions into dense matrices over row-major
//! `(channel, height, width)` flattened feature maps.

use ndarray::Array4;

use super::OnnxError;
use crate::net_ir::{DenseMatrix, DenseVector};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvParams {
    pub strides: [usize; 2],
    /// `[top, left, bottom, right]`, ONNX order.
    pub pads: [usize; 4],
    pub dilations: [usize; 2],
    pub group: usize,
}

impl Default for ConvParams {
    fn default() -> Self {
        ConvParams {
            strides: [1, 1],
            pads: [0; 4],
            dilations: [1, 1],
            group: 1,
        }
    }
}

/// Output spatial size of a sliding window, or `None` when it is not
/// positive.
pub(crate) fn window_out(
    input: usize,
    kernel: usize,
    stride: usize,
    pad_begin: usize,
    pad_end: usize,
    dilation: usize,
) -> Option<usize> {
    let span = dilation * (kernel.checked_sub(1)?) + 1;
    let padded = input + pad_begin + pad_end;
    if stride == 0 || padded < span {
        return None;
    }
    Some((padded - span) / stride + 1)
}

/// Returns `(M, B, out_shape)` with `conv(x) = M · flatten(x) + B` for every
/// input `x` of shape `input_shape = [C, H, W]`. `kernel` has ONNX layout
/// `[M, C / group, kH, kW]`; the bias repeats the per-channel bias across
/// all output positions.
pub fn conv_to_matrix(
    kernel: &Array4<f64>,
    bias: Option<&DenseVector>,
    params: &ConvParams,
    input_shape: [usize; 3],
) -> Result<(DenseMatrix, DenseVector, [usize; 3]), OnnxError> {
    let [c_in, h, w] = input_shape;
    let (m_out, c_per_group, kh, kw) = kernel.dim();
    let group = params.group.max(1);
    if c_in != c_per_group * group || m_out % group != 0 {
        return Err(OnnxError::Shape(format!(
            "conv kernel {:?} with group {group} does not fit input channels {c_in}",
            kernel.dim()
        )));
    }
    if let Some(b) = bias {
        if b.len() != m_out {
            return Err(OnnxError::Shape(format!(
                "conv bias length {} does not match {m_out} output channels",
                b.len()
            )));
        }
    }
    let [sh, sw] = params.strides;
    let [pt, pl, pb, pr] = params.pads;
    let [dh, dw] = params.dilations;
    let oh = window_out(h, kh, sh, pt, pb, dh);
    let ow = window_out(w, kw, sw, pl, pr, dw);
    let (oh, ow) = match (oh, ow) {
        (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
        _ => {
            return Err(OnnxError::Shape(format!(
                "conv output spatial size is not positive for input {input_shape:?}"
            )))
        }
    };

    let m_per_group = m_out / group;
    let mut mat = DenseMatrix::zeros((m_out * oh * ow, c_in * h * w));
    let mut out_bias = DenseVector::zeros(m_out * oh * ow);
    for m in 0..m_out {
        let g = m / m_per_group;
        for y in 0..oh {
            for x in 0..ow {
                let row = (m * oh + y) * ow + x;
                if let Some(b) = bias {
                    out_bias[row] = b[m];
                }
                for ci in 0..c_per_group {
                    let c = g * c_per_group + ci;
                    for ky in 0..kh {
                        let iy = (y * sh + ky * dh) as isize - pt as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (x * sw + kx * dw) as isize - pl as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let col = (c * h + iy as usize) * w + ix as usize;
                            mat[[row, col]] += kernel[[m, ci, ky, kx]];
                        }
                    }
                }
            }
        }
    }
    Ok((mat, out_bias, [m_out, oh, ow]))
}
