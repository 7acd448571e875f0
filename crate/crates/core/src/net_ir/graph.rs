//! Layer graph: construction, structural validation, traversal and exact
//! forward evaluation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::NetError;

/// Dense real matrix carrying weights and bound coefficients.
pub type DenseMatrix = Array2<f64>;
/// Dense real vector carrying biases, activations and bounds.
pub type DenseVector = Array1<f64>;

/// Identifier of a layer, unique within one [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LayerId(pub u32);

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Input,
    /// `x -> weight · x + bias`
    Linear {
        weight: DenseMatrix,
        bias: DenseVector,
    },
    Relu,
    /// Elementwise sum over all predecessors.
    Sum,
}

impl LayerKind {
    pub fn name(&self) -> &'static str {
        match self {
            LayerKind::Input => "Input",
            LayerKind::Linear { .. } => "Linear",
            LayerKind::Relu => "ReLU",
            LayerKind::Sum => "Sum",
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, LayerKind::Linear { .. })
    }
}

/// One node of the layer graph. `inputs` is the ordered predecessor list;
/// the arcs of the graph are exactly `(p, id)` for every `p` in `inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub id: LayerId,
    pub kind: LayerKind,
    pub width: usize,
    pub inputs: Vec<LayerId>,
}

impl Layer {
    pub fn linear_parts(&self) -> Option<(&DenseMatrix, &DenseVector)> {
        match &self.kind {
            LayerKind::Linear { weight, bias } => Some((weight, bias)),
            _ => None,
        }
    }
}

/// A neural network as a directed acyclic graph of layers with a single
/// input layer and a single output layer.
///
/// Networks are immutable values; every transformation in this crate
/// returns a new `Network`.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<Layer>,
    index: HashMap<LayerId, usize>,
    input: LayerId,
    output: LayerId,
}

impl Network {
    /// Assembles a network without checking any structural invariant.
    /// Use [`Network::new`] for the checked variant.
    pub fn from_parts_unchecked(mut layers: Vec<Layer>, input: LayerId, output: LayerId) -> Self {
        layers.sort_by_key(|l| l.id);
        let index = layers.iter().enumerate().map(|(i, l)| (l.id, i)).collect();
        Network {
            layers,
            index,
            input,
            output,
        }
    }

    /// Assembles a network and rejects it if [`validate`] reports any issue.
    pub fn new(layers: Vec<Layer>, input: LayerId, output: LayerId) -> Result<Self, NetError> {
        let net = Self::from_parts_unchecked(layers, input, output);
        let report = validate(&net);
        if report.is_valid() {
            Ok(net)
        } else {
            Err(NetError::Invalid(report))
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, id: LayerId) -> Option<&Layer> {
        self.index.get(&id).map(|&i| &self.layers[i])
    }

    pub fn input(&self) -> LayerId {
        self.input
    }

    pub fn output(&self) -> LayerId {
        self.output
    }

    pub fn input_width(&self) -> usize {
        self.layer(self.input).map_or(0, |l| l.width)
    }

    pub fn output_width(&self) -> usize {
        self.layer(self.output).map_or(0, |l| l.width)
    }

    /// Successor lists in ascending id order.
    pub fn successors(&self) -> BTreeMap<LayerId, Vec<LayerId>> {
        let mut succ: BTreeMap<LayerId, Vec<LayerId>> =
            self.layers.iter().map(|l| (l.id, Vec::new())).collect();
        for layer in &self.layers {
            for p in &layer.inputs {
                if let Some(s) = succ.get_mut(p) {
                    s.push(layer.id);
                }
            }
        }
        succ
    }

    /// All arcs `(from, to)` in ascending order.
    pub fn arcs(&self) -> BTreeSet<(LayerId, LayerId)> {
        self.layers
            .iter()
            .flat_map(|l| l.inputs.iter().map(move |&p| (p, l.id)))
            .collect()
    }

    /// Number of ReLU neurons in the network.
    pub fn relu_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| matches!(l.kind, LayerKind::Relu))
            .map(|l| l.width)
            .sum()
    }

    /// True when every non-terminal layer has exactly one predecessor and one
    /// successor.
    pub fn is_sequential(&self) -> bool {
        let succ = self.successors();
        self.layers.iter().all(|l| {
            let n_in = l.inputs.len();
            let n_out = succ[&l.id].len();
            let in_ok = l.id == self.input || n_in == 1;
            let out_ok = l.id == self.output || n_out == 1;
            in_ok && out_ok
        })
    }

    pub fn forward(&self, a: &DenseVector) -> Result<DenseVector, NetError> {
        forward(self, a)
    }
}

/// One violated structural invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Issue {
    MissingInputLayer(LayerId),
    MissingOutputLayer(LayerId),
    InputHasPredecessors(LayerId),
    NotInputKind(LayerId),
    ExtraSource(LayerId),
    OutputHasSuccessors(LayerId),
    DanglingArc { from: LayerId, to: LayerId },
    DuplicateArc { from: LayerId, to: LayerId },
    PredecessorCount { layer: LayerId, kind: &'static str, found: usize },
    ZeroWidth(LayerId),
    WidthMismatch { layer: LayerId, expected: usize, found: usize, what: &'static str },
    NonFinite(LayerId),
    Cycle { from: LayerId, to: LayerId },
    Unreachable(LayerId),
    DeadEnd(LayerId),
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::MissingInputLayer(id) => write!(f, "input layer {id} does not exist"),
            Issue::MissingOutputLayer(id) => write!(f, "output layer {id} does not exist"),
            Issue::InputHasPredecessors(id) => write!(f, "input layer {id} has predecessors"),
            Issue::NotInputKind(id) => write!(f, "designated input {id} is not an Input layer"),
            Issue::ExtraSource(id) => {
                write!(f, "layer {id} has no predecessors but is not the input layer")
            }
            Issue::OutputHasSuccessors(id) => {
                write!(f, "output layer {id} has successors; it must be the unique sink")
            }
            Issue::DanglingArc { from, to } => write!(f, "arc {from}->{to} names a missing layer"),
            Issue::DuplicateArc { from, to } => write!(f, "arc {from}->{to} appears twice"),
            Issue::PredecessorCount { layer, kind, found } => {
                write!(f, "{kind} layer {layer} has {found} predecessors")
            }
            Issue::ZeroWidth(id) => write!(f, "layer {id} has zero width"),
            Issue::WidthMismatch {
                layer,
                expected,
                found,
                what,
            } => write!(f, "layer {layer}: {what} is {found}, expected {expected}"),
            Issue::NonFinite(id) => write!(f, "layer {id} stores NaN or infinite parameters"),
            Issue::Cycle { from, to } => write!(f, "cycle through arc {from}->{to}"),
            Issue::Unreachable(id) => write!(f, "layer {id} is not reachable from the input"),
            Issue::DeadEnd(id) => write!(f, "layer {id} does not reach the output"),
        }
    }
}

/// Every invariant violation found in a network. Empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }

    /// Layers named by at least one issue.
    pub fn layers_mentioned(&self) -> BTreeSet<LayerId> {
        let mut out = BTreeSet::new();
        for issue in &self.issues {
            match *issue {
                Issue::MissingInputLayer(id)
                | Issue::MissingOutputLayer(id)
                | Issue::InputHasPredecessors(id)
                | Issue::NotInputKind(id)
                | Issue::ExtraSource(id)
                | Issue::OutputHasSuccessors(id)
                | Issue::ZeroWidth(id)
                | Issue::NonFinite(id)
                | Issue::Unreachable(id)
                | Issue::DeadEnd(id) => {
                    out.insert(id);
                }
                Issue::PredecessorCount { layer, .. } | Issue::WidthMismatch { layer, .. } => {
                    out.insert(layer);
                }
                Issue::DanglingArc { from, to }
                | Issue::DuplicateArc { from, to }
                | Issue::Cycle { from, to } => {
                    out.insert(from);
                    out.insert(to);
                }
            }
        }
        out
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.issues.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{issue}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a network. Violations are returned
/// as data; this never fails.
pub fn validate(net: &Network) -> ValidationReport {
    let mut issues = Vec::new();

    match net.layer(net.input) {
        None => issues.push(Issue::MissingInputLayer(net.input)),
        Some(l) => {
            if !matches!(l.kind, LayerKind::Input) {
                issues.push(Issue::NotInputKind(l.id));
            }
            if !l.inputs.is_empty() {
                issues.push(Issue::InputHasPredecessors(l.id));
            }
        }
    }
    if net.layer(net.output).is_none() {
        issues.push(Issue::MissingOutputLayer(net.output));
    }

    let succ = net.successors();
    if let Some(s) = succ.get(&net.output) {
        if !s.is_empty() {
            issues.push(Issue::OutputHasSuccessors(net.output));
        }
    }

    for layer in net.layers() {
        if layer.width == 0 {
            issues.push(Issue::ZeroWidth(layer.id));
        }
        let mut seen = BTreeSet::new();
        for &p in &layer.inputs {
            if net.layer(p).is_none() {
                issues.push(Issue::DanglingArc { from: p, to: layer.id });
            } else if !seen.insert(p) {
                issues.push(Issue::DuplicateArc { from: p, to: layer.id });
            }
        }
        let pred_width = |p: LayerId| net.layer(p).map(|l| l.width);
        match &layer.kind {
            LayerKind::Input => {
                if layer.id != net.input {
                    issues.push(Issue::ExtraSource(layer.id));
                }
            }
            LayerKind::Linear { weight, bias } => {
                if layer.inputs.len() != 1 {
                    issues.push(Issue::PredecessorCount {
                        layer: layer.id,
                        kind: "Linear",
                        found: layer.inputs.len(),
                    });
                }
                if weight.nrows() != layer.width {
                    issues.push(Issue::WidthMismatch {
                        layer: layer.id,
                        expected: layer.width,
                        found: weight.nrows(),
                        what: "weight row count",
                    });
                }
                if bias.len() != layer.width {
                    issues.push(Issue::WidthMismatch {
                        layer: layer.id,
                        expected: layer.width,
                        found: bias.len(),
                        what: "bias length",
                    });
                }
                if let Some(w) = layer.inputs.first().and_then(|&p| pred_width(p)) {
                    if weight.ncols() != w {
                        issues.push(Issue::WidthMismatch {
                            layer: layer.id,
                            expected: w,
                            found: weight.ncols(),
                            what: "weight column count",
                        });
                    }
                }
                if weight.iter().chain(bias.iter()).any(|v| !v.is_finite()) {
                    issues.push(Issue::NonFinite(layer.id));
                }
            }
            LayerKind::Relu | LayerKind::Sum => {
                let is_relu = matches!(layer.kind, LayerKind::Relu);
                if (is_relu && layer.inputs.len() != 1) || layer.inputs.is_empty() {
                    issues.push(Issue::PredecessorCount {
                        layer: layer.id,
                        kind: layer.kind.name(),
                        found: layer.inputs.len(),
                    });
                }
                for &p in &layer.inputs {
                    if let Some(w) = pred_width(p) {
                        if w != layer.width {
                            issues.push(Issue::WidthMismatch {
                                layer: layer.id,
                                expected: layer.width,
                                found: w,
                                what: "predecessor width",
                            });
                        }
                    }
                }
            }
        }
        if layer.inputs.is_empty()
            && layer.id != net.input
            && !matches!(layer.kind, LayerKind::Input)
        {
            issues.push(Issue::ExtraSource(layer.id));
        }
    }

    if let Err(NetError::Cycle { from, to }) = topo_order(net) {
        issues.push(Issue::Cycle { from, to });
    }

    if net.layer(net.input).is_some() {
        let fwd = reach(net.input, |id| succ.get(&id).cloned().unwrap_or_default());
        for l in net.layers() {
            if !fwd.contains(&l.id) {
                issues.push(Issue::Unreachable(l.id));
            }
        }
    }
    if net.layer(net.output).is_some() {
        let bwd = reach(net.output, |id| {
            net.layer(id).map(|l| l.inputs.clone()).unwrap_or_default()
        });
        for l in net.layers() {
            if !bwd.contains(&l.id) {
                issues.push(Issue::DeadEnd(l.id));
            }
        }
    }

    ValidationReport { issues }
}

fn reach(start: LayerId, next: impl Fn(LayerId) -> Vec<LayerId>) -> BTreeSet<LayerId> {
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(id) = stack.pop() {
        for n in next(id) {
            if seen.insert(n) {
                stack.push(n);
            }
        }
    }
    seen
}

/// Topological order with ties broken by ascending [`LayerId`].
pub fn topo_order(net: &Network) -> Result<Vec<LayerId>, NetError> {
    let succ = net.successors();
    let mut indeg: BTreeMap<LayerId, usize> = net
        .layers()
        .iter()
        .map(|l| (l.id, l.inputs.iter().filter(|p| net.layer(**p).is_some()).count()))
        .collect();
    let mut ready: BTreeSet<LayerId> = indeg
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut order = Vec::with_capacity(net.layers().len());
    while let Some(id) = ready.pop_first() {
        order.push(id);
        for s in &succ[&id] {
            let d = indeg.get_mut(s).expect("successor is a known layer");
            *d -= 1;
            if *d == 0 {
                ready.insert(*s);
            }
        }
    }
    if order.len() == net.layers().len() {
        return Ok(order);
    }
    // Every remaining layer lies on or behind a cycle; walk predecessors
    // among the remaining layers until one repeats.
    let remaining: BTreeSet<LayerId> = indeg
        .iter()
        .filter(|(_, &d)| d > 0)
        .map(|(&id, _)| id)
        .collect();
    let mut path: Vec<LayerId> = Vec::new();
    let mut cur = *remaining.first().expect("non-empty remainder");
    loop {
        if path.contains(&cur) {
            // cur was picked as a predecessor of the last path entry, so
            // this arc closes the loop.
            let prev = path[path.len() - 1];
            return Err(NetError::Cycle { from: cur, to: prev });
        }
        path.push(cur);
        let layer = net.layer(cur).expect("remaining layer exists");
        cur = *layer
            .inputs
            .iter()
            .find(|p| remaining.contains(p))
            .expect("a layer on a cycle has a predecessor on it");
    }
}

/// Exact layer-by-layer evaluation of `F(a)`.
pub fn forward(net: &Network, a: &DenseVector) -> Result<DenseVector, NetError> {
    if a.len() != net.input_width() {
        return Err(NetError::DimensionMismatch {
            expected: net.input_width(),
            found: a.len(),
        });
    }
    let order = topo_order(net)?;
    let mut values: HashMap<LayerId, DenseVector> = HashMap::with_capacity(order.len());
    for id in order {
        let layer = net.layer(id).expect("topo order lists known layers");
        let get = |p: &LayerId| -> Result<&DenseVector, NetError> {
            values.get(p).ok_or(NetError::UnknownLayer(*p))
        };
        let value = match &layer.kind {
            LayerKind::Input => a.clone(),
            LayerKind::Linear { weight, bias } => {
                let x = get(&layer.inputs[0])?;
                if x.len() != weight.ncols() {
                    return Err(NetError::DimensionMismatch {
                        expected: weight.ncols(),
                        found: x.len(),
                    });
                }
                weight.dot(x) + bias
            }
            LayerKind::Relu => get(&layer.inputs[0])?.mapv(|v| v.max(0.0)),
            LayerKind::Sum => {
                let mut acc = DenseVector::zeros(layer.width);
                for p in &layer.inputs {
                    let x = get(p)?;
                    if x.len() != layer.width {
                        return Err(NetError::DimensionMismatch {
                            expected: layer.width,
                            found: x.len(),
                        });
                    }
                    acc += x;
                }
                acc
            }
        };
        values.insert(id, value);
    }
    values
        .remove(&net.output)
        .ok_or(NetError::UnknownLayer(net.output))
}

/// Incremental constructor handing out fresh ids in creation order.
#[derive(Debug, Default, Clone)]
pub struct NetworkBuilder {
    layers: Vec<Layer>,
    next: u32,
    input: Option<LayerId>,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, kind: LayerKind, width: usize, inputs: Vec<LayerId>) -> LayerId {
        let id = LayerId(self.next);
        self.next += 1;
        self.layers.push(Layer {
            id,
            kind,
            width,
            inputs,
        });
        id
    }

    pub fn width_of(&self, id: LayerId) -> usize {
        self.layers
            .iter()
            .find(|l| l.id == id)
            .map_or(0, |l| l.width)
    }

    pub fn input(&mut self, width: usize) -> LayerId {
        let id = self.push(LayerKind::Input, width, Vec::new());
        self.input.get_or_insert(id);
        id
    }

    pub fn linear(&mut self, pred: LayerId, weight: DenseMatrix, bias: DenseVector) -> LayerId {
        let width = weight.nrows();
        self.push(LayerKind::Linear { weight, bias }, width, vec![pred])
    }

    pub fn relu(&mut self, pred: LayerId) -> LayerId {
        let width = self.width_of(pred);
        self.push(LayerKind::Relu, width, vec![pred])
    }

    pub fn sum(&mut self, preds: Vec<LayerId>) -> LayerId {
        let width = preds.first().map_or(0, |&p| self.width_of(p));
        self.push(LayerKind::Sum, width, preds)
    }

    /// Adds a raw layer; used to build deliberately malformed graphs.
    pub fn raw(&mut self, kind: LayerKind, width: usize, inputs: Vec<LayerId>) -> LayerId {
        self.push(kind, width, inputs)
    }

    pub fn finish(self, output: LayerId) -> Result<Network, NetError> {
        let input = self.input.ok_or(NetError::NoInput)?;
        Network::new(self.layers, input, output)
    }

    pub fn finish_unchecked(self, output: LayerId) -> Network {
        let input = self.input.unwrap_or(LayerId(0));
        Network::from_parts_unchecked(self.layers, input, output)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;

    #[test]
    fn worked_example_is_valid() {
        let net = fixtures::worked_example();
        let report = validate(&net);
        assert!(report.is_valid(), "{report}");
        let widths: Vec<usize> = net.layers().iter().map(|l| l.width).collect();
        assert_eq!(widths, vec![2, 5, 5, 2]);
    }

    #[test]
    fn relu_with_two_predecessors_is_reported() {
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let l1 = b.linear(x, DenseMatrix::eye(2), DenseVector::zeros(2));
        let l2 = b.linear(x, DenseMatrix::eye(2), DenseVector::zeros(2));
        let r = b.raw(LayerKind::Relu, 2, vec![l1, l2]);
        let net = b.finish_unchecked(r);
        let report = validate(&net);
        assert!(report.issues.iter().any(|i| matches!(
            i,
            Issue::PredecessorCount { layer, kind: "ReLU", found: 2 } if *layer == r
        )));
        assert!(report.layers_mentioned().contains(&r));
    }

    #[test]
    fn output_with_successor_is_reported() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let l = b.linear(x, array![[1.0]], array![0.0]);
        let r = b.relu(l);
        let net = b.finish_unchecked(l);
        let report = validate(&net);
        assert!(report.issues.contains(&Issue::OutputHasSuccessors(l)));
        assert!(report.issues.contains(&Issue::DeadEnd(r)));
    }

    #[test]
    fn sum_width_mismatch_is_rejected() {
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let a = b.linear(x, DenseMatrix::eye(2), DenseVector::zeros(2));
        let c = b.linear(x, DenseMatrix::ones((3, 2)), DenseVector::zeros(3));
        let s = b.raw(LayerKind::Sum, 2, vec![a, c]);
        let err = b.finish(s).unwrap_err();
        assert!(matches!(err, NetError::Invalid(r) if r.issues.iter().any(|i| matches!(
            i, Issue::WidthMismatch { what: "predecessor width", .. }
        ))));
    }

    #[test]
    fn cycle_is_named() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let s = b.raw(LayerKind::Sum, 1, vec![x, LayerId(3)]);
        let l = b.linear(s, array![[1.0]], array![0.0]);
        let r = b.relu(l);
        let _ = r;
        let net = b.finish_unchecked(l);
        let err = topo_order(&net).unwrap_err();
        match err {
            NetError::Cycle { from, to } => {
                let on_cycle = [s, l, LayerId(3)];
                assert!(on_cycle.contains(&from) && on_cycle.contains(&to));
                assert!(net.arcs().contains(&(from, to)) || net.arcs().contains(&(to, from)));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(validate(&net)
            .issues
            .iter()
            .any(|i| matches!(i, Issue::Cycle { .. })));
    }

    #[test]
    fn topo_order_of_chain_and_singleton() {
        let net = fixtures::worked_example();
        let order = topo_order(&net).unwrap();
        let kinds: Vec<&str> = order
            .iter()
            .map(|id| net.layer(*id).unwrap().kind.name())
            .collect();
        assert_eq!(kinds, vec!["Input", "Linear", "ReLU", "Linear"]);

        let mut b = NetworkBuilder::new();
        let x = b.input(3);
        let net = b.finish(x).unwrap();
        assert_eq!(topo_order(&net).unwrap(), vec![x]);
        assert_eq!(forward(&net, &array![1.0, 2.0, 3.0]).unwrap(), array![1.0, 2.0, 3.0]);
    }

    #[test]
    fn topo_order_residual_block() {
        let fx = fixtures::residual_block(2, 7);
        let order = topo_order(&fx.network).unwrap();
        let pos = |id: LayerId| order.iter().position(|&x| x == id).unwrap();
        assert!(pos(fx.conv3) > pos(fx.relu1));
        assert!(pos(fx.conv3) < pos(fx.add));
        assert!(pos(fx.conv2) < pos(fx.add));
    }

    #[test]
    fn forward_worked_examples_at_origin() {
        let a = array![0.0, 0.0];
        assert_eq!(fixtures::worked_example().forward(&a).unwrap(), array![1.0, 7.0]);
        assert_eq!(fixtures::worked_example_reduced().forward(&a).unwrap(), array![1.0, 7.0]);
    }

    #[test]
    fn identity_linear_forward() {
        let mut b = NetworkBuilder::new();
        let x = b.input(3);
        let l = b.linear(x, DenseMatrix::eye(3), DenseVector::zeros(3));
        let net = b.finish(l).unwrap();
        let a = array![0.5, -2.0, 7.25];
        assert_eq!(net.forward(&a).unwrap(), a);
    }

    #[test]
    fn forward_rejects_wrong_length() {
        let net = fixtures::worked_example();
        assert!(matches!(
            net.forward(&array![1.0]),
            Err(NetError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn sum_adds_all_predecessors() {
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let a = b.linear(x, DenseMatrix::eye(2), array![1.0, 0.0]);
        let c = b.linear(x, array![[0.0, 1.0], [1.0, 0.0]], array![0.0, 2.0]);
        let s = b.sum(vec![a, c]);
        let net = b.finish(s).unwrap();
        assert_eq!(net.forward(&array![3.0, 4.0]).unwrap(), array![8.0, 9.0]);
    }
}
