//! Sound pre-activation bounds for sequential Linear/ReLU networks over a
//! box of inputs.
//!
//! Two propagators are provided:
//!
//! - [`interval_forward`]: plain interval arithmetic,
//!   `l' = W⁺·l + W⁻·u + b`, `u' = W⁺·u + W⁻·l + b`, clamped at the ReLUs.
//! - [`crown_backward`]: backward linear bound propagation. Each unstable
//!   neuron with bounds `l < 0 < u` is enclosed between the line
//!   `α·x` (`α ∈ {0, 1}`) and the chord `u/(u-l) · (x - l)`; the bounding
//!   functional is substituted back to the input layer and concretized on
//!   the box. Layers are processed progressively, so layer `k` uses the
//!   relaxations built from the bounds of layers `0..k`.
//!
//! Bounds are stored for the affine outputs only. The ReLU output bounds are
//! the clamped pre-activation bounds and are never stored.

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net_ir::{Affine, DenseMatrix, DenseVector, SequentialNet};

#[derive(Debug, Error, PartialEq)]
pub enum BoundError {
    #[error("box has {lower} lower and {upper} upper bounds")]
    LengthMismatch { lower: usize, upper: usize },
    #[error("box lower bound exceeds upper bound at coordinate {0}")]
    Inverted(usize),
    #[error("box bound at coordinate {0} is not finite")]
    NonFinite(usize),
    #[error("box width {found} does not match network input width {expected}")]
    WidthMismatch { expected: usize, found: usize },
    #[error("margin vector has length {found}, network output width is {expected}")]
    MarginLength { expected: usize, found: usize },
}

/// Per-coordinate input interval `∏ᵢ [lowerᵢ, upperᵢ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputBox {
    lower: DenseVector,
    upper: DenseVector,
}

impl InputBox {
    pub fn new(lower: DenseVector, upper: DenseVector) -> Result<Self, BoundError> {
        if lower.len() != upper.len() {
            return Err(BoundError::LengthMismatch {
                lower: lower.len(),
                upper: upper.len(),
            });
        }
        for (i, (l, u)) in lower.iter().zip(upper.iter()).enumerate() {
            if !l.is_finite() || !u.is_finite() {
                return Err(BoundError::NonFinite(i));
            }
            if l > u {
                return Err(BoundError::Inverted(i));
            }
        }
        Ok(InputBox { lower, upper })
    }

    pub fn lower(&self) -> &DenseVector {
        &self.lower
    }

    pub fn upper(&self) -> &DenseVector {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, a: &DenseVector) -> bool {
        a.len() == self.dim()
            && a
                .iter()
                .zip(self.lower.iter().zip(self.upper.iter()))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }

    pub(crate) fn check_width(&self, expected: usize) -> Result<(), BoundError> {
        if self.dim() != expected {
            return Err(BoundError::WidthMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Lower and upper bound of one affine layer's outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerBounds {
    pub lower: DenseVector,
    pub upper: DenseVector,
}

impl LayerBounds {
    /// Bounds of `ReLU(x)` given these bounds on `x`.
    pub fn clamped(&self) -> LayerBounds {
        LayerBounds {
            lower: self.lower.mapv(|v| v.max(0.0)),
            upper: self.upper.mapv(|v| v.max(0.0)),
        }
    }

    pub fn width(&self) -> usize {
        self.lower.len()
    }

    fn intersect(&self, other: &LayerBounds) -> LayerBounds {
        LayerBounds {
            lower: Zip::from(&self.lower)
                .and(&other.lower)
                .map_collect(|a, b| a.max(*b)),
            upper: Zip::from(&self.upper)
                .and(&other.upper)
                .map_collect(|a, b| a.min(*b)),
        }
    }
}

/// Bounds for every affine layer of a [`SequentialNet`], in chain order.
/// Entry `k < len-1` bounds the pre-activations of ReLU layer `k`; the last
/// entry bounds the network output.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsTable {
    pub layers: Vec<LayerBounds>,
}

impl BoundsTable {
    pub fn output(&self) -> &LayerBounds {
        self.layers.last().expect("bounds table is never empty")
    }

    /// Pre-activation bounds of the ReLU layers only.
    pub fn relu_layers(&self) -> &[LayerBounds] {
        &self.layers[..self.layers.len() - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AlphaRule {
    /// `α = 1` when `u ≥ |l|`, else `0`.
    #[default]
    Adaptive,
    Zero,
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundMethod {
    Interval,
    Crown(AlphaRule),
}

impl BoundMethod {
    pub fn name(&self) -> &'static str {
        match self {
            BoundMethod::Interval => "interval",
            BoundMethod::Crown(_) => "crown",
        }
    }
}

/// Linear enclosure of `ReLU` on `[l, u]`:
/// `lower_slope·x ≤ ReLU(x) ≤ upper_slope·x + upper_intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRelaxation {
    pub upper_slope: f64,
    pub upper_intercept: f64,
    pub lower_slope: f64,
}

impl LinearRelaxation {
    pub fn new(l: f64, u: f64, alpha: AlphaRule) -> Self {
        if u <= 0.0 {
            // Includes the degenerate l == u == 0 case.
            LinearRelaxation {
                upper_slope: 0.0,
                upper_intercept: 0.0,
                lower_slope: 0.0,
            }
        } else if l >= 0.0 {
            LinearRelaxation {
                upper_slope: 1.0,
                upper_intercept: 0.0,
                lower_slope: 1.0,
            }
        } else {
            let slope = u / (u - l);
            let lower_slope = match alpha {
                AlphaRule::Adaptive => {
                    if u >= -l {
                        1.0
                    } else {
                        0.0
                    }
                }
                AlphaRule::Zero => 0.0,
                AlphaRule::One => 1.0,
            };
            LinearRelaxation {
                upper_slope: slope,
                upper_intercept: -slope * l,
                lower_slope,
            }
        }
    }

    pub fn lower_at(&self, x: f64) -> f64 {
        self.lower_slope * x
    }

    pub fn upper_at(&self, x: f64) -> f64 {
        self.upper_slope * x + self.upper_intercept
    }
}

/// Interval image of `W·x + b` for `x ∈ [lo, hi]`.
pub fn affine_interval(
    weight: &DenseMatrix,
    bias: &DenseVector,
    lo: &DenseVector,
    hi: &DenseVector,
) -> LayerBounds {
    let pos = weight.mapv(|v| v.max(0.0));
    let neg = weight.mapv(|v| v.min(0.0));
    let lower = pos.dot(lo) + neg.dot(hi) + bias;
    let upper = pos.dot(hi) + neg.dot(lo) + bias;
    LayerBounds { lower, upper }
}

/// Lower interval bound of `W·x` (no bias) for `x ∈ [lo, hi]`. Adding a
/// bias vector to this gives exactly the lower bound of [`affine_interval`].
pub(crate) fn interval_lower_no_bias(
    weight: &DenseMatrix,
    lo: &DenseVector,
    hi: &DenseVector,
) -> DenseVector {
    let pos = weight.mapv(|v| v.max(0.0));
    let neg = weight.mapv(|v| v.min(0.0));
    pos.dot(lo) + neg.dot(hi)
}

pub fn interval_forward(net: &SequentialNet, bx: &InputBox) -> Result<BoundsTable, BoundError> {
    bx.check_width(net.input_width())?;
    let mut layers: Vec<LayerBounds> = Vec::with_capacity(net.layers().len());
    for (k, layer) in net.layers().iter().enumerate() {
        let b = if k == 0 {
            affine_interval(&layer.weight, &layer.bias, bx.lower(), bx.upper())
        } else {
            let prev = layers[k - 1].clamped();
            affine_interval(&layer.weight, &layer.bias, &prev.lower, &prev.upper)
        };
        layers.push(b);
    }
    Ok(BoundsTable { layers })
}

/// Backward linear bound propagation.
///
/// Intermediate layers keep the intersection of their CROWN bounds with the
/// interval image of the previous (already intersected) layer; the output
/// layer reports the pure CROWN bounds.
pub fn crown_backward(
    net: &SequentialNet,
    bx: &InputBox,
    alpha: AlphaRule,
) -> Result<BoundsTable, BoundError> {
    bx.check_width(net.input_width())?;
    let n = net.layers().len();
    let mut layers: Vec<LayerBounds> = Vec::with_capacity(n);
    for k in 0..n {
        let layer = &net.layers()[k];
        if k == 0 {
            layers.push(affine_interval(
                &layer.weight,
                &layer.bias,
                bx.lower(),
                bx.upper(),
            ));
            continue;
        }
        let crown = backsubstitute(net, k, &layer.weight, &layer.bias, &layers, bx, alpha);
        let b = if k + 1 < n {
            let prev = layers[k - 1].clamped();
            let ibp = affine_interval(&layer.weight, &layer.bias, &prev.lower, &prev.upper);
            crown.intersect(&ibp)
        } else {
            crown
        };
        layers.push(b);
    }
    Ok(BoundsTable { layers })
}

/// Bounds the functional `coeff · ReLU(A_{k-1}(…)) + bias`, where `coeff`
/// acts on the ReLU outputs that feed affine layer `k`, using the bounds of
/// layers `0..k`.
fn backsubstitute(
    net: &SequentialNet,
    k: usize,
    coeff: &DenseMatrix,
    bias: &DenseVector,
    bounds: &[LayerBounds],
    bx: &InputBox,
    alpha: AlphaRule,
) -> LayerBounds {
    let (lower, upper) = rayon::join(
        || backsubstitute_side(net, k, coeff, bias, bounds, bx, alpha, Side::Lower),
        || backsubstitute_side(net, k, coeff, bias, bounds, bx, alpha, Side::Upper),
    );
    LayerBounds { lower, upper }
}

#[derive(Clone, Copy)]
enum Side {
    Lower,
    Upper,
}

#[allow(clippy::too_many_arguments)]
fn backsubstitute_side(
    net: &SequentialNet,
    k: usize,
    coeff: &DenseMatrix,
    bias: &DenseVector,
    bounds: &[LayerBounds],
    bx: &InputBox,
    alpha: AlphaRule,
    side: Side,
) -> DenseVector {
    let mut lambda: Array2<f64> = coeff.clone();
    let mut acc: DenseVector = bias.clone();
    // Walk back over ReLU layer j (pre-activations = affine j), then affine j.
    for j in (0..k).rev() {
        let b = &bounds[j];
        let relax: Vec<LinearRelaxation> = b
            .lower
            .iter()
            .zip(b.upper.iter())
            .map(|(&l, &u)| LinearRelaxation::new(l, u, alpha))
            .collect();
        let mut next = Array2::<f64>::zeros(lambda.raw_dim());
        for (r, row) in lambda.rows().into_iter().enumerate() {
            let mut extra = 0.0;
            for (c, &v) in row.iter().enumerate() {
                let rl = &relax[c];
                // Lower side: positive coefficients take the lower line.
                let use_upper = match side {
                    Side::Lower => v < 0.0,
                    Side::Upper => v > 0.0,
                };
                if use_upper {
                    next[[r, c]] = v * rl.upper_slope;
                    extra += v * rl.upper_intercept;
                } else {
                    next[[r, c]] = v * rl.lower_slope;
                }
            }
            acc[r] += extra;
        }
        let affine: &Affine = &net.layers()[j];
        acc += &next.dot(&affine.bias);
        lambda = next.dot(&affine.weight);
    }
    let pos = lambda.mapv(|v| v.max(0.0));
    let neg = lambda.mapv(|v| v.min(0.0));
    match side {
        Side::Lower => pos.dot(bx.lower()) + neg.dot(bx.upper()) + acc,
        Side::Upper => pos.dot(bx.upper()) + neg.dot(bx.lower()) + acc,
    }
}

pub fn compute_bounds(
    net: &SequentialNet,
    bx: &InputBox,
    method: BoundMethod,
) -> Result<BoundsTable, BoundError> {
    match method {
        BoundMethod::Interval => interval_forward(net, bx),
        BoundMethod::Crown(alpha) => crown_backward(net, bx, alpha),
    }
}

/// Sound lower bound on `min_{a ∈ box} c·F(a)`, obtained by folding `c`
/// into the last affine layer and bounding the resulting scalar output.
pub fn margin_lower_bound(
    net: &SequentialNet,
    bx: &InputBox,
    c: &DenseVector,
    method: BoundMethod,
) -> Result<f64, BoundError> {
    margin_lower_bound_with_offset(net, bx, c, 0.0, method)
}

/// As [`margin_lower_bound`] for the functional `c·F(a) + offset`.
pub fn margin_lower_bound_with_offset(
    net: &SequentialNet,
    bx: &InputBox,
    c: &DenseVector,
    offset: f64,
    method: BoundMethod,
) -> Result<f64, BoundError> {
    if c.len() != net.output_width() {
        return Err(BoundError::MarginLength {
            expected: net.output_width(),
            found: c.len(),
        });
    }
    let last = net.layers().last().expect("chains have at least one map");
    let row = c.view().insert_axis(ndarray::Axis(0)).to_owned();
    let folded = Affine::new(
        row.dot(&last.weight),
        DenseVector::from_elem(1, c.dot(&last.bias) + offset),
    );
    let mut layers = net.layers().to_vec();
    *layers.last_mut().expect("non-empty") = folded;
    let scalar = SequentialNet::new(net.input_width(), layers)
        .expect("folding a row keeps the chain shape");
    let table = compute_bounds(&scalar, bx, method)?;
    Ok(table.output().lower[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example() -> SequentialNet {
        SequentialNet::from_network(&fixtures::worked_example()).unwrap()
    }

    #[test]
    fn interval_reproduces_worked_example_bounds() {
        let t = interval_forward(&example(), &fixtures::unit_box_2d()).unwrap();
        let h = &t.layers[0];
        assert_eq!(h.lower, array![-4.0, 1.0, 0.0, 0.0, -2.0]);
        assert_eq!(h.upper, array![0.0, 5.0, 4.0, 4.0, 2.0]);
        // y1 ∈ [0-5+0+0-2, 0-1+4+4-0]
        assert_eq!(t.output().lower[0], -7.0);
        assert_eq!(t.output().upper[0], 7.0);
    }

    #[test]
    fn zero_weight_layer_gives_bias() {
        let net = SequentialNet::new(
            2,
            vec![Affine::new(DenseMatrix::zeros((3, 2)), array![1.0, -2.0, 0.5])],
        )
        .unwrap();
        let t = interval_forward(&net, &fixtures::unit_box_2d()).unwrap();
        assert_eq!(t.output().lower, array![1.0, -2.0, 0.5]);
        assert_eq!(t.output().upper, array![1.0, -2.0, 0.5]);
    }

    #[test]
    fn crown_first_layer_equals_interval() {
        let t = crown_backward(&example(), &fixtures::unit_box_2d(), AlphaRule::Adaptive).unwrap();
        assert_eq!(t.layers[0].lower[1], 1.0);
        assert_eq!(t.layers[0].upper[1], 5.0);
    }

    #[test]
    fn crown_output_contains_exact_range_inside_interval() {
        // y1 = x1 - x2 + 1 - ReLU(x2 - x1) on the box: exact range [-3, 3].
        let bx = fixtures::unit_box_2d();
        for alpha in [AlphaRule::Adaptive, AlphaRule::Zero, AlphaRule::One] {
            let c = crown_backward(&example(), &bx, alpha).unwrap();
            let (l, u) = (c.output().lower[0], c.output().upper[0]);
            assert!(l <= -3.0 && u >= 3.0, "{alpha:?}: [{l}, {u}]");
            assert!(l >= -7.0 && u <= 7.0, "{alpha:?}: [{l}, {u}]");
        }
    }

    #[test]
    fn crown_exact_on_fully_active_network() {
        let net = SequentialNet::new(
            2,
            vec![
                Affine::new(array![[1.0, 0.5], [-1.0, 2.0]], array![5.0, 6.0]),
                Affine::new(array![[1.0, -3.0]], array![0.0]),
            ],
        )
        .unwrap();
        let bx = fixtures::unit_box_2d();
        // Affine on the box: x1 + 0.5x2 + 5 - 3(-x1 + 2x2 + 6) = 4x1 - 5.5x2 - 13.
        let t = crown_backward(&net, &bx, AlphaRule::Adaptive).unwrap();
        assert_eq!(t.output().lower[0], -22.5);
        assert_eq!(t.output().upper[0], -3.5);
    }

    #[test]
    fn margins_on_worked_example() {
        let net = example();
        let bx = fixtures::unit_box_2d();
        let m = margin_lower_bound(&net, &bx, &array![-1.0, 1.0], BoundMethod::Interval).unwrap();
        assert_eq!(m, 2.0);
        let zero = margin_lower_bound(&net, &bx, &array![0.0, 0.0], BoundMethod::Interval).unwrap();
        assert_eq!(zero, 0.0);
        for method in [BoundMethod::Interval, BoundMethod::Crown(AlphaRule::Adaptive)] {
            let m = margin_lower_bound(&net, &bx, &array![1.0, -1.0], method).unwrap();
            assert!(m <= -2.0, "{method:?}: {m}");
        }
        assert!(matches!(
            margin_lower_bound(&net, &bx, &array![1.0], BoundMethod::Interval),
            Err(BoundError::MarginLength { .. })
        ));
    }

    #[test]
    fn box_validation() {
        assert_eq!(
            InputBox::new(array![1.0], array![0.0]).unwrap_err(),
            BoundError::Inverted(0)
        );
        assert!(InputBox::new(array![0.0], array![f64::NAN]).is_err());
        let err = interval_forward(&example(), &InputBox::new(array![0.0], array![1.0]).unwrap());
        assert!(matches!(err, Err(BoundError::WidthMismatch { expected: 2, found: 1 })));
    }

    fn random_chain(seed: u64, dims: &[usize]) -> SequentialNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = dims
            .windows(2)
            .map(|w| {
                Affine::new(
                    DenseMatrix::from_shape_fn((w[1], w[0]), |_| rng.random_range(-1.0..1.0)),
                    DenseVector::from_shape_fn(w[1], |_| rng.random_range(-0.5..0.5)),
                )
            })
            .collect();
        SequentialNet::new(dims[0], layers).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn relaxation_encloses_relu(l in -10.0f64..0.0, u in 0.0f64..10.0, t in 0.0f64..1.0) {
            prop_assume!(u > l);
            let x = l + t * (u - l);
            for alpha in [AlphaRule::Adaptive, AlphaRule::Zero, AlphaRule::One] {
                let r = LinearRelaxation::new(l, u, alpha);
                let relu = x.max(0.0);
                prop_assert!(r.lower_at(x) <= relu + 1e-12);
                prop_assert!(relu <= r.upper_at(x) + 1e-12);
            }
        }

        #[test]
        fn both_methods_sound_on_samples(seed in 0u64..1000) {
            let net = random_chain(seed, &[3, 6, 5, 2]);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
            let center = DenseVector::from_shape_fn(3, |_| rng.random_range(-1.0..1.0));
            let bx = InputBox::new(&center - 0.3, &center + 0.3).unwrap();
            let ibp = interval_forward(&net, &bx).unwrap();
            let crown = crown_backward(&net, &bx, AlphaRule::Adaptive).unwrap();
            for _ in 0..200 {
                let a = DenseVector::from_shape_fn(3, |i| {
                    rng.random_range(bx.lower()[i]..=bx.upper()[i])
                });
                for (k, v) in net.forward_trace(&a).iter().enumerate() {
                    for t in [&ibp, &crown] {
                        let b = &t.layers[k];
                        for i in 0..v.len() {
                            let tol = 1e-9 * (1.0 + v[i].abs());
                            prop_assert!(b.lower[i] - tol <= v[i] && v[i] <= b.upper[i] + tol);
                        }
                    }
                }
            }
        }

        #[test]
        fn shrinking_box_never_widens_interval_bounds(seed in 0u64..1000, shrink in 0.0f64..1.0) {
            let net = random_chain(seed, &[2, 4, 3]);
            let wide = fixtures::unit_box_2d();
            let narrow = InputBox::new(wide.lower() * shrink, wide.upper() * shrink).unwrap();
            let tw = interval_forward(&net, &wide).unwrap();
            let tn = interval_forward(&net, &narrow).unwrap();
            for (w, n) in tw.layers.iter().zip(tn.layers.iter()) {
                for i in 0..w.width() {
                    prop_assert!(n.lower[i] >= w.lower[i] - 1e-12);
                    prop_assert!(n.upper[i] <= w.upper[i] + 1e-12);
                }
            }
        }
    }
}
