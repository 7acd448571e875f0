//! Max pooling expressed with Linear, ReLU and Sum layers through the
//! identity `max(x, y) = ReLU(x - y) + y`.
//!
//! Candidates within a window are paired left to right; every round of
//! pairings becomes one `Linear (x - y) → ReLU` branch plus a selector
//! Linear for `y` (and for unpaired leftovers), joined by a Sum. A window
//! of `k` elements costs `k - 1` gadgets over `⌈log₂ k⌉` rounds.

use super::conv::window_out;
use super::OnnxError;
use crate::net_ir::{DenseMatrix, DenseVector, LayerId, Network, NetworkBuilder};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolParams {
    pub kernel: [usize; 2],
    pub strides: [usize; 2],
    /// `[top, left, bottom, right]`, ONNX order. Padded cells never win.
    pub pads: [usize; 4],
    pub dilations: [usize; 2],
}

impl PoolParams {
    pub fn square(k: usize) -> Self {
        PoolParams {
            kernel: [k, k],
            strides: [k, k],
            pads: [0; 4],
            dilations: [1, 1],
        }
    }
}

/// For every output cell in row-major `(c, oh, ow)` order, the flat input
/// indices inside its window.
pub fn pool_windows(
    input_shape: [usize; 3],
    p: &PoolParams,
) -> Result<(Vec<Vec<usize>>, [usize; 3]), OnnxError> {
    let [c, h, w] = input_shape;
    let oh = window_out(h, p.kernel[0], p.strides[0], p.pads[0], p.pads[2], p.dilations[0]);
    let ow = window_out(w, p.kernel[1], p.strides[1], p.pads[1], p.pads[3], p.dilations[1]);
    let (oh, ow) = match (oh, ow) {
        (Some(a), Some(b)) if a > 0 && b > 0 => (a, b),
        _ => {
            return Err(OnnxError::Shape(format!(
                "max pool output size is not positive for input {input_shape:?}"
            )))
        }
    };
    let mut windows = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for y in 0..oh {
            for x in 0..ow {
                let mut cells = Vec::new();
                for ky in 0..p.kernel[0] {
                    let iy = (y * p.strides[0] + ky * p.dilations[0]) as isize - p.pads[0] as isize;
                    if iy < 0 || iy >= h as isize {
                        continue;
                    }
                    for kx in 0..p.kernel[1] {
                        let ix =
                            (x * p.strides[1] + kx * p.dilations[1]) as isize - p.pads[1] as isize;
                        if ix < 0 || ix >= w as isize {
                            continue;
                        }
                        cells.push((ch * h + iy as usize) * w + ix as usize);
                    }
                }
                if cells.is_empty() {
                    return Err(OnnxError::Shape(
                        "max pool window covers only padding".into(),
                    ));
                }
                windows.push(cells);
            }
        }
    }
    Ok((windows, [c, oh, ow]))
}

/// Appends the gadget layers computing `out[i] = max(x[windows[i]])` after
/// `pred`. Returns the layer holding the pooled values and the number of
/// pairwise gadgets used.
pub(crate) fn append_max_gadgets(
    b: &mut NetworkBuilder,
    pred: LayerId,
    windows: &[Vec<usize>],
) -> (LayerId, usize) {
    let mut cur = pred;
    let mut cur_width = b.width_of(pred);
    let mut cands: Vec<Vec<usize>> = windows.to_vec();
    let mut gadgets = 0;
    loop {
        let n_pairs: usize = cands.iter().map(|c| c.len() / 2).sum();
        if n_pairs == 0 {
            break;
        }
        let n_slots: usize = cands.iter().map(|c| c.len().div_ceil(2)).sum();
        let mut diff = DenseMatrix::zeros((n_pairs, cur_width));
        let mut from_relu = DenseMatrix::zeros((n_slots, n_pairs));
        let mut from_cur = DenseMatrix::zeros((n_slots, cur_width));
        let mut next = Vec::with_capacity(cands.len());
        let (mut pair, mut slot) = (0, 0);
        for c in &cands {
            let mut slots = Vec::with_capacity(c.len().div_ceil(2));
            for chunk in c.chunks(2) {
                match *chunk {
                    [x, y] => {
                        diff[[pair, x]] += 1.0;
                        diff[[pair, y]] -= 1.0;
                        from_relu[[slot, pair]] = 1.0;
                        from_cur[[slot, y]] = 1.0;
                        pair += 1;
                    }
                    [x] => from_cur[[slot, x]] = 1.0,
                    _ => unreachable!("chunks of two"),
                }
                slots.push(slot);
                slot += 1;
            }
            next.push(slots);
        }
        gadgets += n_pairs;
        let d = b.linear(cur, diff, DenseVector::zeros(n_pairs));
        let r = b.relu(d);
        let via_relu = b.linear(r, from_relu, DenseVector::zeros(n_slots));
        let via_cur = b.linear(cur, from_cur, DenseVector::zeros(n_slots));
        cur = b.sum(vec![via_relu, via_cur]);
        cur_width = n_slots;
        cands = next;
    }
    let identity = cands.len() == cur_width && cands.iter().enumerate().all(|(i, c)| c == &[i]);
    if !identity {
        let mut sel = DenseMatrix::zeros((cands.len(), cur_width));
        for (i, c) in cands.iter().enumerate() {
            sel[[i, c[0]]] = 1.0;
        }
        cur = b.linear(cur, sel, DenseVector::zeros(cands.len()));
    }
    (cur, gadgets)
}

/// A standalone network computing a 2-D max pool over an input of shape
/// `[C, H, W]` with the gadget construction. Also returns the output shape
/// and the number of pairwise gadgets.
pub fn lower_maxpool(
    input_shape: [usize; 3],
    params: &PoolParams,
) -> Result<(Network, [usize; 3], usize), OnnxError> {
    let (windows, out_shape) = pool_windows(input_shape, params)?;
    let mut b = NetworkBuilder::new();
    let x = b.input(input_shape.iter().product());
    let (out, gadgets) = append_max_gadgets(&mut b, x, &windows);
    let net = b.finish(out).map_err(OnnxError::Net)?;
    Ok((net, out_shape, gadgets))
}

/// `max(x, y)` as a single gadget network over a 2-vector input.
pub fn max_gadget() -> Network {
    let mut b = NetworkBuilder::new();
    let x = b.input(2);
    let (out, _) = append_max_gadgets(&mut b, x, &[vec![0, 1]]);
    b.finish(out).expect("gadget network is well formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_gadget_values() {
        let g = max_gadget();
        assert_eq!(g.forward(&array![3.0, 5.0]).unwrap(), array![5.0]);
        assert_eq!(g.forward(&array![5.0, 3.0]).unwrap(), array![5.0]);
    }

    #[test]
    fn two_by_two_window_uses_three_gadgets() {
        let (net, shape, gadgets) = lower_maxpool([1, 2, 2], &PoolParams::square(2)).unwrap();
        assert_eq!(shape, [1, 1, 1]);
        assert_eq!(gadgets, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let v = DenseVector::from_shape_fn(4, |_| rng.random_range(-10.0..10.0));
            let direct = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let got = net.forward(&v).unwrap()[0];
            assert!((got - direct).abs() <= 1e-12);
        }
    }

    #[test]
    fn strided_padded_multichannel_pool_matches_direct_max() {
        let params = PoolParams {
            kernel: [3, 3],
            strides: [2, 2],
            pads: [1, 1, 1, 1],
            dilations: [1, 1],
        };
        let (windows, shape) = pool_windows([2, 5, 5], &params).unwrap();
        assert_eq!(shape, [2, 3, 3]);
        let (net, _, _) = lower_maxpool([2, 5, 5], &params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let v = DenseVector::from_shape_fn(50, |_| rng.random_range(-3.0..3.0));
            let got = net.forward(&v).unwrap();
            for (i, w) in windows.iter().enumerate() {
                let direct = w.iter().map(|&j| v[j]).fold(f64::NEG_INFINITY, f64::max);
                assert!((got[i] - direct).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unit_window_is_a_selector() {
        let (net, shape, gadgets) = lower_maxpool([1, 2, 2], &PoolParams::square(1)).unwrap();
        assert_eq!((shape, gadgets), ([1, 2, 2], 0));
        assert_eq!(net.forward(&array![1.0, -2.0, 3.0, 4.0]).unwrap(), array![1.0, -2.0, 3.0, 4.0]);
    }
}
