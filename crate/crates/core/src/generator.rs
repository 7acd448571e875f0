//! Random fully-connected networks with planted stable neurons.
//!
//! Weights are `N(0, 1/fan_in)`. Layer by layer, the interval image of each
//! neuron without bias, `[l₀, u₀]`, is computed over the box; a planted
//! activated neuron gets bias `margin - l₀`, a planted deactivated one
//! `-u₀ - margin`, and every other neuron `-(l₀ + u₀)/2`, which straddles 0.
//! All weights and biases are float32 values, rounded away from the planted
//! side's boundary, so the network survives ONNX export unchanged.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bound_engine::{affine_interval, InputBox};
use crate::net_ir::{Affine, DenseMatrix, DenseVector, SequentialNet};

/// Largest planted bias magnitude before generation gives up.
pub const MAX_BIAS: f64 = 1e3;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("stable fraction must lie in [0, 1], got {0}")]
    Fraction(f64),
    #[error("margin must be positive and finite, got {0}")]
    Margin(f64),
    #[error("epsilon must be positive and finite, got {0}")]
    Eps(f64),
    #[error("layers, width, input and output dimensions must be positive")]
    Shape,
    #[error(
        "planting layer {layer} neuron {neuron} needs bias {bias:.3e}, above {MAX_BIAS:e}; \
         use a smaller margin or epsilon, or fewer layers"
    )]
    Infeasible { layer: usize, neuron: usize, bias: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Number of hidden ReLU layers.
    pub layers: usize,
    pub width: usize,
    pub input_dim: usize,
    pub output_dim: usize,
    pub stable_fraction: f64,
    pub margin: f64,
    /// Radius of the box around a centre drawn uniformly from `[0, 1]^d`.
    pub eps: f64,
    pub seed: u64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            layers: 4,
            width: 64,
            input_dim: 16,
            output_dim: 10,
            stable_fraction: 0.5,
            margin: 0.5,
            eps: 0.001,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planted {
    Activated,
    Deactivated,
    Free,
}

/// Ground truth written next to a generated model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub params: GenParams,
    pub center: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// One entry per hidden layer and neuron.
    pub planted: Vec<Vec<Planted>>,
}

impl Sidecar {
    pub fn input_box(&self) -> InputBox {
        InputBox::new(self.lower.clone().into(), self.upper.clone().into()).expect("generated box is valid")
    }

    pub fn planted_count(&self) -> usize {
        self.planted.iter().flatten().filter(|p| **p != Planted::Free).count()
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub network: SequentialNet,
    pub sidecar: Sidecar,
}

fn f32_down(v: f64) -> f64 {
    let r = v as f32;
    if (r as f64) > v { r.next_down() as f64 } else { r as f64 }
}

fn f32_up(v: f64) -> f64 {
    let r = v as f32;
    if (r as f64) < v { r.next_up() as f64 } else { r as f64 }
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    let normal = Normal::new(0.0, 1.0 / (cols as f64).sqrt()).expect("positive deviation");
    DenseMatrix::from_shape_fn((rows, cols), |_| normal.sample(rng) as f32 as f64)
}

pub fn generate(p: &GenParams) -> Result<Generated, GenError> {
    if !(0.0..=1.0).contains(&p.stable_fraction) {
        return Err(GenError::Fraction(p.stable_fraction));
    }
    if !(p.margin > 0.0 && p.margin.is_finite()) {
        return Err(GenError::Margin(p.margin));
    }
    if !(p.eps > 0.0 && p.eps.is_finite()) {
        return Err(GenError::Eps(p.eps));
    }
    if p.layers == 0 || p.width == 0 || p.input_dim == 0 || p.output_dim == 0 {
        return Err(GenError::Shape);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let center: Vec<f64> = (0..p.input_dim).map(|_| rng.random::<f32>() as f64).collect();
    let lower: Vec<f64> = center.iter().map(|c| f32_down(c - p.eps)).collect();
    let upper: Vec<f64> = center.iter().map(|c| f32_up(c + p.eps)).collect();
    let (mut lo, mut hi) = (DenseVector::from(lower.clone()), DenseVector::from(upper.clone()));

    let mut maps = Vec::with_capacity(p.layers + 1);
    let mut planted = Vec::with_capacity(p.layers);
    let n_stable = (p.stable_fraction * p.width as f64).round() as usize;
    for layer in 0..p.layers {
        let w = gaussian_matrix(&mut rng, p.width, lo.len());
        let raw = affine_interval(&w, &DenseVector::zeros(p.width), &lo, &hi);
        let mut order: Vec<usize> = (0..p.width).collect();
        order.shuffle(&mut rng);
        let mut classes = vec![Planted::Free; p.width];
        for &i in &order[..n_stable] {
            classes[i] = if rng.random_bool(0.5) {
                Planted::Activated
            } else {
                Planted::Deactivated
            };
        }
        let mut bias = DenseVector::zeros(p.width);
        for i in 0..p.width {
            let (l0, u0) = (raw.lower[i], raw.upper[i]);
            bias[i] = match classes[i] {
                Planted::Activated => f32_up(p.margin - l0),
                Planted::Deactivated => f32_down(-u0 - p.margin),
                Planted::Free => (-(l0 + u0) / 2.0) as f32 as f64,
            };
            if bias[i].abs() > MAX_BIAS {
                return Err(GenError::Infeasible {
                    layer,
                    neuron: i,
                    bias: bias[i],
                });
            }
        }
        let b = affine_interval(&w, &bias, &lo, &hi).clamped();
        lo = b.lower;
        hi = b.upper;
        maps.push(Affine::new(w, bias));
        planted.push(classes);
    }
    let w = gaussian_matrix(&mut rng, p.output_dim, p.width);
    maps.push(Affine::new(w, DenseVector::zeros(p.output_dim)));
    let network = SequentialNet::new(p.input_dim, maps).expect("generated shapes chain");
    Ok(Generated {
        network,
        sidecar: Sidecar {
            params: *p,
            center,
            lower,
            upper,
            planted,
        },
    })
}
