//! Sampling-based equivalence checks between two networks on a box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::bound_engine::InputBox;
use crate::net_ir::{topo_order, DenseVector, LayerId, LayerKind, NetError, Network};

/// Box corners are appended to the random samples up to this input width.
pub const MAX_CORNER_DIM: usize = 12;
/// Largest input width accepted by [`grid_equivalence`].
pub const MAX_GRID_DIM: usize = 4;

#[derive(Debug, Error)]
pub enum EquivError {
    #[error("networks differ in {what} width: {a} vs {b}")]
    WidthMismatch { what: &'static str, a: usize, b: usize },
    #[error("box has dimension {found}, networks take {expected} inputs")]
    BoxWidth { expected: usize, found: usize },
    #[error("grid check supports at most {MAX_GRID_DIM} input dimensions, got {0}; use sampling")]
    GridTooLarge(usize),
    #[error("grid needs at least 2 points per dimension")]
    GridTooSparse,
    #[error(transparent)]
    Net(#[from] NetError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivReport {
    pub samples: usize,
    pub max_abs_diff: f64,
    pub argmax_mismatches: usize,
    /// Input attaining `max_abs_diff` (earliest such sample).
    pub worst_input: DenseVector,
}

impl EquivReport {
    pub fn within(&self, tol: f64) -> bool {
        self.max_abs_diff <= tol
    }
}

/// A network with its evaluation order precomputed.
struct Evaluator<'a> {
    net: &'a Network,
    order: Vec<LayerId>,
}

impl<'a> Evaluator<'a> {
    fn new(net: &'a Network) -> Result<Self, NetError> {
        Ok(Evaluator {
            net,
            order: topo_order(net)?,
        })
    }

    fn eval(&self, a: &DenseVector) -> DenseVector {
        let mut vals: std::collections::HashMap<LayerId, DenseVector> = Default::default();
        for &id in &self.order {
            let layer = self.net.layer(id).expect("ordered layers exist");
            let v = match &layer.kind {
                LayerKind::Input => a.clone(),
                LayerKind::Linear { weight, bias } => weight.dot(&vals[&layer.inputs[0]]) + bias,
                LayerKind::Relu => vals[&layer.inputs[0]].mapv(|t| t.max(0.0)),
                LayerKind::Sum => {
                    let mut acc = vals[&layer.inputs[0]].clone();
                    for p in &layer.inputs[1..] {
                        acc += &vals[p];
                    }
                    acc
                }
            };
            vals.insert(id, v);
        }
        vals.remove(&self.net.output()).expect("output is evaluated")
    }
}

fn argmax(v: &DenseVector) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn check(a: &Network, b: &Network, bx: &InputBox) -> Result<(), EquivError> {
    if a.input_width() != b.input_width() {
        return Err(EquivError::WidthMismatch {
            what: "input",
            a: a.input_width(),
            b: b.input_width(),
        });
    }
    if a.output_width() != b.output_width() {
        return Err(EquivError::WidthMismatch {
            what: "output",
            a: a.output_width(),
            b: b.output_width(),
        });
    }
    if bx.dim() != a.input_width() {
        return Err(EquivError::BoxWidth {
            expected: a.input_width(),
            found: bx.dim(),
        });
    }
    Ok(())
}

/// Evaluates both networks on every point in parallel. The maximum and its
/// position are chosen by (difference, then lowest index), so the result
/// does not depend on scheduling.
fn compare(a: &Network, b: &Network, points: &[DenseVector]) -> Result<EquivReport, EquivError> {
    let (ea, eb) = (Evaluator::new(a)?, Evaluator::new(b)?);
    let (diff, idx, mismatches) = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let (ya, yb) = (ea.eval(p), eb.eval(p));
            let d = ya
                .iter()
                .zip(yb.iter())
                .map(|(x, y)| if x == y { 0.0 } else { (x - y).abs() })
                .fold(0.0, f64::max);
            (d, i, usize::from(argmax(&ya) != argmax(&yb)))
        })
        .reduce(
            || (0.0, usize::MAX, 0),
            |l, r| {
                let pick = if r.0 > l.0 || (r.0 == l.0 && r.1 < l.1) { r } else { l };
                (pick.0, pick.1, l.2 + r.2)
            },
        );
    Ok(EquivReport {
        samples: points.len(),
        max_abs_diff: diff,
        argmax_mismatches: mismatches,
        worst_input: points.get(idx).cloned().unwrap_or_default(),
    })
}

/// Every vertex of the box, in binary counting order.
pub fn box_corners(bx: &InputBox) -> Vec<DenseVector> {
    let d = bx.dim();
    (0..1usize << d)
        .map(|mask| {
            DenseVector::from_iter((0..d).map(|i| {
                if mask >> i & 1 == 1 {
                    bx.upper()[i]
                } else {
                    bx.lower()[i]
                }
            }))
        })
        .collect()
}

/// `n` points drawn uniformly from the box with a seeded ChaCha8 stream.
pub fn uniform_samples(bx: &InputBox, n: usize, seed: u64) -> Vec<DenseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            DenseVector::from_iter(bx.lower().iter().zip(bx.upper().iter()).map(|(&l, &u)| {
                if l == u {
                    l
                } else {
                    rng.random_range(l..=u)
                }
            }))
        })
        .collect()
}

/// Compares `a` and `b` on `n` uniform samples plus, for inputs of width at
/// most [`MAX_CORNER_DIM`], every box corner.
pub fn sample_equivalence(
    a: &Network,
    b: &Network,
    bx: &InputBox,
    n: usize,
    seed: u64,
) -> Result<EquivReport, EquivError> {
    check(a, b, bx)?;
    let mut points = uniform_samples(bx, n, seed);
    if bx.dim() <= MAX_CORNER_DIM {
        points.extend(box_corners(bx));
    }
    compare(a, b, &points)
}

/// Compares `a` and `b` on the full grid with `points_per_dim` evenly spaced
/// values per coordinate, endpoints included.
pub fn grid_equivalence(
    a: &Network,
    b: &Network,
    bx: &InputBox,
    points_per_dim: usize,
) -> Result<EquivReport, EquivError> {
    check(a, b, bx)?;
    if bx.dim() > MAX_GRID_DIM {
        return Err(EquivError::GridTooLarge(bx.dim()));
    }
    if points_per_dim < 2 {
        return Err(EquivError::GridTooSparse);
    }
    let d = bx.dim();
    let total = points_per_dim.pow(d as u32);
    let step = |i: usize, k: usize| {
        let (l, u) = (bx.lower()[i], bx.upper()[i]);
        if k == points_per_dim - 1 {
            u
        } else {
            l + (u - l) * k as f64 / (points_per_dim - 1) as f64
        }
    };
    let points: Vec<DenseVector> = (0..total)
        .map(|mut idx| {
            DenseVector::from_iter((0..d).map(|i| {
                let k = idx % points_per_dim;
                idx /= points_per_dim;
                step(i, k)
            }))
        })
        .collect();
    compare(a, b, &points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{worked_example, worked_example_reduced, unit_box_2d};
    use ndarray::array;

    #[test]
    fn grid_counts_and_corners() {
        let bx = unit_box_2d();
        let r = grid_equivalence(&worked_example(), &worked_example(), &bx, 21).unwrap();
        assert_eq!(r.samples, 441);
        assert_eq!(box_corners(&bx).len(), 4);
        assert!(box_corners(&bx).contains(&array![1.0, -1.0]));
    }

    #[test]
    fn deterministic_in_seed() {
        let bx = unit_box_2d();
        let r1 = sample_equivalence(&worked_example(), &worked_example_reduced(), &bx, 500, 7).unwrap();
        let r2 = sample_equivalence(&worked_example(), &worked_example_reduced(), &bx, 500, 7).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(r1.samples, 504);
    }

    #[test]
    fn grid_guard() {
        let bx = InputBox::new(DenseVector::zeros(5), DenseVector::ones(5)).unwrap();
        let mut b = crate::net_ir::NetworkBuilder::new();
        let x = b.input(5);
        let l = b.linear(x, ndarray::Array2::eye(5), DenseVector::zeros(5));
        let net = b.finish(l).unwrap();
        assert!(matches!(grid_equivalence(&net, &net, &bx, 2), Err(EquivError::GridTooLarge(5))));
    }
}
