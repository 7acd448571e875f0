//! Alternating Linear/ReLU chains, the shape consumed by the bound engine,
//! the reducer, the verifier and the ONNX exporter.

use ndarray::Axis;

use super::graph::{DenseMatrix, DenseVector, LayerKind, Network, NetworkBuilder};
use super::NetError;

/// One affine map `x -> weight · x + bias`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine {
    pub weight: DenseMatrix,
    pub bias: DenseVector,
}

impl Affine {
    pub fn new(weight: DenseMatrix, bias: DenseVector) -> Self {
        debug_assert_eq!(weight.nrows(), bias.len());
        Affine { weight, bias }
    }

    pub fn identity(width: usize) -> Self {
        Affine {
            weight: DenseMatrix::eye(width),
            bias: DenseVector::zeros(width),
        }
    }

    pub fn in_width(&self) -> usize {
        self.weight.ncols()
    }

    pub fn out_width(&self) -> usize {
        self.weight.nrows()
    }

    pub fn apply(&self, x: &DenseVector) -> DenseVector {
        self.weight.dot(x) + &self.bias
    }

    /// `self ∘ inner`: `W = W₂·W₁`, `b = W₂·b₁ + b₂`.
    pub fn compose(&self, inner: &Affine) -> Affine {
        Affine {
            weight: self.weight.dot(&inner.weight),
            bias: self.weight.dot(&inner.bias) + &self.bias,
        }
    }

    /// Keeps only the listed rows.
    pub fn select_rows(&self, rows: &[usize]) -> Affine {
        Affine {
            weight: self.weight.select(Axis(0), rows),
            bias: self.bias.select(Axis(0), rows),
        }
    }
}

/// `A_k ∘ ReLU ∘ … ∘ ReLU ∘ A_0`: a ReLU sits between every pair of
/// consecutive affine maps and nowhere else.
#[derive(Debug, Clone, PartialEq)]
pub struct SequentialNet {
    input_width: usize,
    layers: Vec<Affine>,
}

impl SequentialNet {
    pub fn new(input_width: usize, layers: Vec<Affine>) -> Result<Self, NetError> {
        let mut width = input_width;
        for (i, a) in layers.iter().enumerate() {
            if a.in_width() != width || a.bias.len() != a.out_width() {
                return Err(NetError::ChainShape {
                    index: i,
                    expected: width,
                    found: a.in_width(),
                });
            }
            width = a.out_width();
        }
        Ok(SequentialNet {
            input_width,
            layers,
        })
    }

    pub fn input_width(&self) -> usize {
        self.input_width
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(self.input_width, Affine::out_width)
    }

    pub fn layers(&self) -> &[Affine] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Affine> {
        self.layers
    }

    /// Widths of the ReLU layers, i.e. of every affine output except the last.
    pub fn relu_widths(&self) -> Vec<usize> {
        let n = self.layers.len().saturating_sub(1);
        self.layers[..n].iter().map(Affine::out_width).collect()
    }

    pub fn relu_count(&self) -> usize {
        self.relu_widths().iter().sum()
    }

    pub fn forward(&self, a: &DenseVector) -> Result<DenseVector, NetError> {
        if a.len() != self.input_width {
            return Err(NetError::DimensionMismatch {
                expected: self.input_width,
                found: a.len(),
            });
        }
        Ok(self.forward_unchecked(a))
    }

    /// Forward pass, also returning every affine output (the ReLU
    /// pre-activations followed by the network output).
    pub fn forward_trace(&self, a: &DenseVector) -> Vec<DenseVector> {
        let mut out = Vec::with_capacity(self.layers.len());
        let mut x = a.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                x.mapv_inplace(|v| v.max(0.0));
            }
            x = layer.apply(&x);
            out.push(x.clone());
        }
        out
    }

    pub(crate) fn forward_unchecked(&self, a: &DenseVector) -> DenseVector {
        let mut x = a.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                x.mapv_inplace(|v| v.max(0.0));
            }
            x = layer.apply(&x);
        }
        x
    }

    /// Reads an `Input → Linear (→ ReLU → Linear)*` network. A bare input
    /// layer becomes a single identity map.
    pub fn from_network(net: &Network) -> Result<Self, NetError> {
        if !net.is_sequential() {
            return Err(NetError::NotSequential("a layer fans in or out".into()));
        }
        let succ = net.successors();
        let mut cur = net.input();
        let input_width = net.input_width();
        let mut layers = Vec::new();
        let mut expect_linear = true;
        loop {
            let next = match succ[&cur].first() {
                Some(&n) => n,
                None => break,
            };
            let layer = net.layer(next).ok_or(NetError::UnknownLayer(next))?;
            match (&layer.kind, expect_linear) {
                (LayerKind::Linear { weight, bias }, true) => {
                    layers.push(Affine::new(weight.clone(), bias.clone()));
                    expect_linear = false;
                }
                (LayerKind::Relu, false) => expect_linear = true,
                (kind, _) => {
                    return Err(NetError::NotSequential(format!(
                        "unexpected {} layer {} in Linear/ReLU alternation",
                        kind.name(),
                        layer.id
                    )))
                }
            }
            cur = next;
        }
        if expect_linear && !layers.is_empty() {
            return Err(NetError::NotSequential("network ends with a ReLU layer".into()));
        }
        if layers.is_empty() {
            layers.push(Affine::identity(input_width));
        }
        SequentialNet::new(input_width, layers)
    }

    pub fn to_network(&self) -> Network {
        let mut b = NetworkBuilder::new();
        let mut cur = b.input(self.input_width);
        for (i, layer) in self.layers.iter().enumerate() {
            if i > 0 {
                cur = b.relu(cur);
            }
            cur = b.linear(cur, layer.weight.clone(), layer.bias.clone());
        }
        b.finish(cur)
            .expect("a shape-checked chain always forms a valid network")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;

    #[test]
    fn chain_round_trip_matches_forward() {
        let net = fixtures::worked_example();
        let chain = SequentialNet::from_network(&net).unwrap();
        assert_eq!(chain.relu_widths(), vec![5]);
        let back = chain.to_network();
        for a in [array![0.0, 0.0], array![-1.0, 1.0], array![0.3, -0.7]] {
            assert_eq!(net.forward(&a).unwrap(), back.forward(&a).unwrap());
            assert_eq!(chain.forward(&a).unwrap(), net.forward(&a).unwrap());
        }
    }

    #[test]
    fn compose_is_affine_composition() {
        let w1 = Affine::new(array![[2.0]], array![1.0]);
        let w2 = Affine::new(array![[3.0]], array![0.0]);
        let c = w2.compose(&w1);
        assert_eq!(c.weight, array![[6.0]]);
        assert_eq!(c.bias, array![3.0]);
    }

    #[test]
    fn rejects_fan_out() {
        let fx = fixtures::residual_block(1, 3);
        assert!(matches!(
            SequentialNet::from_network(&fx.network),
            Err(NetError::NotSequential(_))
        ));
    }

    #[test]
    fn rejects_shape_mismatch() {
        let err = SequentialNet::new(2, vec![Affine::identity(3)]).unwrap_err();
        assert!(matches!(err, NetError::ChainShape { index: 0, expected: 2, found: 3 }));
    }
}
