//! Rewrites an arbitrary Linear/ReLU/Sum DAG into an alternating
//! Linear/ReLU chain.
//!
//! A *SumLinear block* is a Sum layer fed exclusively by Linear layers whose
//! only successor is that Sum. After [`initialization`] every Linear layer
//! belongs to a block. The main loop repeatedly takes the last block (the
//! one with no path to another block), normalizes it, and then either
//! linearizes it (one predecessor) or replaces it together with the ReLU
//! layers it blocks by `L^s → L^r → L^l` (several predecessors), where
//! `L^s` concatenates the blocked ReLUs' pre-activations with the
//! passthrough layers, `L^r` is a ReLU over the concatenation and `L^l`
//! applies the block's weights side by side. Passthrough neurons are kept
//! in the ReLU's identity region by a bias shift `B` that `L^l` subtracts
//! again as `M^l·B`.

use std::collections::BTreeSet;

use ndarray::{concatenate, s, Axis};
use thiserror::Error;

use crate::bound_engine::InputBox;
use crate::net_ir::{
    validate, Affine, DenseMatrix, DenseVector, GraphEditor, LayerId, LayerKind, NetError,
    Network,
};

#[derive(Debug, Error)]
pub enum SimplifyError {
    #[error(
        "the input layer {0} must pass through a ReLU layer; supply an input box so it can be \
         shifted into the ReLU's identity region"
    )]
    NeedsInputBox(LayerId),
    #[error("input box has width {found}, network input width is {expected}")]
    BoxWidth { expected: usize, found: usize },
    #[error("layer {0} is not a SumLinear block")]
    NotABlock(LayerId),
    #[error("expected exactly one last SumLinear block, found {0:?}")]
    AmbiguousLastBlock(Vec<LayerId>),
    #[error("block {0} is not normalized")]
    NotNormalized(LayerId),
    #[error("block {0} has a single predecessor; linearize it instead")]
    SinglePredecessor(LayerId),
    #[error("block {block} has predecessor {pred} of kind {kind}, expected ReLU or Input")]
    UnexpectedPredecessor {
        block: LayerId,
        pred: LayerId,
        kind: &'static str,
    },
    #[error("no predecessor of block {0} is a blocked ReLU layer")]
    NoBlockedRelu(LayerId),
    #[error("construction step ran {count} times, more than the {limit} layers of the network")]
    TooManyConstructions { count: usize, limit: usize },
    #[error("rewritten graph is invalid: {0}")]
    Net(#[from] NetError),
}

/// A Sum layer and the Linear layers feeding it, in the Sum's input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SumLinearBlockView {
    pub sum: LayerId,
    pub linears: Vec<LayerId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionPlan {
    /// `R_L`, ascending id.
    pub blocked_relus: Vec<LayerId>,
    /// `P_L`, ascending id.
    pub passthrough: Vec<LayerId>,
    /// The layers concatenated by `L^s`: the predecessor of each blocked
    /// ReLU, then each passthrough layer.
    pub sources: Vec<LayerId>,
    /// `M^l`: block weights side by side in source order.
    pub new_linear_weight: DenseMatrix,
    /// `B^l`: sum of the block biases minus `M^l·B`.
    pub new_linear_bias: DenseVector,
    /// `B` over the whole concatenation (zero on blocked segments).
    pub passthrough_shift: DenseVector,
}

#[derive(Debug, Clone)]
pub struct Simplified {
    pub network: Network,
    /// Number of Linear-layer construction steps executed.
    pub constructions: usize,
    pub linearizations: usize,
}

fn block_of(ed: &GraphEditor, sum: LayerId) -> Option<SumLinearBlockView> {
    if !matches!(ed.kind(sum), LayerKind::Sum) {
        return None;
    }
    let linears = ed.layer(sum).inputs.clone();
    let ok = linears
        .iter()
        .all(|&l| ed.kind(l).is_linear() && ed.successors(l) == [sum]);
    ok.then_some(SumLinearBlockView { sum, linears })
}

fn sums(ed: &GraphEditor) -> Vec<LayerId> {
    ed.ids()
        .into_iter()
        .filter(|&id| matches!(ed.kind(id), LayerKind::Sum))
        .collect()
}

fn check_block(ed: &GraphEditor, view: &SumLinearBlockView) -> Result<(), SimplifyError> {
    match block_of(ed, view.sum) {
        Some(v) if v == *view => Ok(()),
        _ => Err(SimplifyError::NotABlock(view.sum)),
    }
}

fn pred(ed: &GraphEditor, id: LayerId) -> LayerId {
    ed.layer(id).inputs[0]
}

fn init_editor(ed: &mut GraphEditor) {
    for id in ed.ids() {
        if !ed.kind(id).is_linear() {
            continue;
        }
        let succ = ed.successors(id);
        let in_block = succ.len() == 1 && matches!(ed.kind(succ[0]), LayerKind::Sum);
        if !in_block {
            let w = ed.width(id);
            let s = ed.add(LayerKind::Sum, w, vec![id]);
            ed.redirect_successors(id, s);
        }
    }
    for s in sums(ed) {
        let inputs = ed.layer(s).inputs.clone();
        let mut fixed = Vec::with_capacity(inputs.len());
        for p in inputs {
            let member = ed.kind(p).is_linear() && ed.successors(p) == [s];
            if member {
                fixed.push(p);
            } else {
                let w = ed.width(p);
                fixed.push(ed.add_linear(p, DenseMatrix::eye(w), DenseVector::zeros(w)));
            }
        }
        ed.layer_mut(s).inputs = fixed;
    }
}

/// Encodes every Linear layer as part of a SumLinear block: lone Linear
/// layers get a one-input Sum appended, and every non-Linear predecessor of
/// a Sum is routed through an identity Linear layer.
pub fn initialization(net: &Network) -> Network {
    let mut ed = GraphEditor::from_network(net);
    init_editor(&mut ed);
    ed.to_network()
}

/// All SumLinear blocks, ascending by Sum id.
pub fn blocks(net: &Network) -> Vec<SumLinearBlockView> {
    let ed = GraphEditor::from_network(net);
    sums(&ed).into_iter().filter_map(|s| block_of(&ed, s)).collect()
}

fn last_block_ed(ed: &GraphEditor) -> Result<Option<LayerId>, SimplifyError> {
    let all = sums(ed);
    if all.is_empty() {
        return Ok(None);
    }
    let last: Vec<LayerId> = all
        .iter()
        .copied()
        .filter(|&s| !all.iter().any(|&t| t != s && ed.reaches(s, t)))
        .collect();
    if last.len() != 1 {
        return Err(SimplifyError::AmbiguousLastBlock(last));
    }
    Ok(Some(last[0]))
}

/// The block with no path to another block, if any block exists.
pub fn last_block(net: &Network) -> Result<Option<SumLinearBlockView>, SimplifyError> {
    let ed = GraphEditor::from_network(net);
    match last_block_ed(&ed)? {
        None => Ok(None),
        Some(s) => block_of(&ed, s).map(Some).ok_or(SimplifyError::NotABlock(s)),
    }
}

fn normalize_ed(ed: &mut GraphEditor, sum: LayerId) {
    // Substitute Linear members whose predecessor is another block.
    loop {
        let members = ed.layer(sum).inputs.clone();
        let target = members.iter().enumerate().find(|(_, &l)| {
            let p = pred(ed, l);
            matches!(ed.kind(p), LayerKind::Sum)
        });
        let Some((pos, &lj)) = target else { break };
        let inner = pred(ed, lj);
        let (mj, bj) = {
            let (m, b) = ed.linear(lj);
            (m.clone(), b.clone())
        };
        let inner_members = ed.layer(inner).inputs.clone();
        let mut replacement = Vec::with_capacity(inner_members.len());
        for (i, &li) in inner_members.iter().enumerate() {
            let (mi, bi) = ed.linear(li);
            let weight = mj.dot(mi);
            let mut bias = mj.dot(bi);
            if i == 0 {
                bias += &bj;
            }
            let p = pred(ed, li);
            replacement.push(ed.add_linear(p, weight, bias));
        }
        ed.layer_mut(sum).inputs.splice(pos..=pos, replacement);
        ed.remove(lj);
        if ed.successors(inner).is_empty() && ed.output != inner {
            for l in inner_members {
                ed.remove(l);
            }
            ed.remove(inner);
        }
    }
    // Merge members sharing a predecessor, keeping first-occurrence order.
    let members = ed.layer(sum).inputs.clone();
    let mut kept: Vec<LayerId> = Vec::with_capacity(members.len());
    for l in members {
        let p = pred(ed, l);
        match kept.iter().position(|&k| pred(ed, k) == p) {
            None => kept.push(l),
            Some(i) => {
                let (w, b) = {
                    let (w, b) = ed.linear(l);
                    (w.clone(), b.clone())
                };
                if let LayerKind::Linear { weight, bias } = &mut ed.layer_mut(kept[i]).kind {
                    *weight += &w;
                    *bias += &b;
                }
                ed.remove(l);
            }
        }
    }
    ed.layer_mut(sum).inputs = kept;
}

/// Normalizes `block`: Linear members fed by another block are replaced by
/// one composed Linear per member of that block (removing the inner block
/// once unused), then members with a common predecessor are summed.
pub fn normalize_block(net: &Network, block: &SumLinearBlockView) -> Result<Network, SimplifyError> {
    let mut ed = GraphEditor::from_network(net);
    check_block(&ed, block)?;
    normalize_ed(&mut ed, block.sum);
    Ok(ed.to_network())
}

fn is_normalized(ed: &GraphEditor, sum: LayerId) -> bool {
    let preds: Vec<LayerId> = ed.layer(sum).inputs.iter().map(|&l| pred(ed, l)).collect();
    let distinct: BTreeSet<_> = preds.iter().collect();
    distinct.len() == preds.len() && preds.iter().all(|&p| !matches!(ed.kind(p), LayerKind::Sum))
}

fn plan_ed(
    ed: &GraphEditor,
    sum: LayerId,
    input_box: Option<&InputBox>,
) -> Result<ConstructionPlan, SimplifyError> {
    if !is_normalized(ed, sum) {
        return Err(SimplifyError::NotNormalized(sum));
    }
    let members = ed.layer(sum).inputs.clone();
    if members.len() < 2 {
        return Err(SimplifyError::SinglePredecessor(sum));
    }
    let mut blocked = Vec::new();
    let mut passthrough = Vec::new();
    for &l in &members {
        let p = pred(ed, l);
        match ed.kind(p) {
            LayerKind::Relu if ed.successors(p) == [l] => blocked.push((p, l)),
            LayerKind::Relu | LayerKind::Input => passthrough.push((p, l)),
            other => {
                return Err(SimplifyError::UnexpectedPredecessor {
                    block: sum,
                    pred: p,
                    kind: other.name(),
                })
            }
        }
    }
    if blocked.is_empty() {
        return Err(SimplifyError::NoBlockedRelu(sum));
    }
    blocked.sort_by_key(|&(p, _)| p);
    passthrough.sort_by_key(|&(p, _)| p);

    let mut sources = Vec::new();
    let mut shifts = Vec::new();
    let mut weights = Vec::new();
    let mut bias_sum = DenseVector::zeros(ed.width(sum));
    for &(r, l) in &blocked {
        let src = pred(ed, r);
        sources.push(src);
        shifts.push(DenseVector::zeros(ed.width(src)));
        let (w, b) = ed.linear(l);
        weights.push(w.clone());
        bias_sum += b;
    }
    for &(p, l) in &passthrough {
        sources.push(p);
        let shift = match ed.kind(p) {
            LayerKind::Input => {
                let bx = input_box.ok_or(SimplifyError::NeedsInputBox(p))?;
                if bx.dim() != ed.width(p) {
                    return Err(SimplifyError::BoxWidth {
                        expected: ed.width(p),
                        found: bx.dim(),
                    });
                }
                bx.lower().mapv(|v| (-v).max(0.0))
            }
            _ => DenseVector::zeros(ed.width(p)),
        };
        shifts.push(shift);
        let (w, b) = ed.linear(l);
        weights.push(w.clone());
        bias_sum += b;
    }
    let views: Vec<_> = weights.iter().map(|w| w.view()).collect();
    let m_l = concatenate(Axis(1), &views).expect("block members share the output width");
    let sviews: Vec<_> = shifts.iter().map(|s| s.view()).collect();
    let shift = concatenate(Axis(0), &sviews).expect("vectors concatenate");
    let b_l = bias_sum - m_l.dot(&shift);
    Ok(ConstructionPlan {
        blocked_relus: blocked.iter().map(|&(r, _)| r).collect(),
        passthrough: passthrough.iter().map(|&(p, _)| p).collect(),
        sources,
        new_linear_weight: m_l,
        new_linear_bias: b_l,
        passthrough_shift: shift,
    })
}

/// Computes `R_L`, `P_L`, `M^l`, `B^l` and `B` for a normalized block with
/// several predecessors.
pub fn plan_construction(
    net: &Network,
    block: &SumLinearBlockView,
    input_box: Option<&InputBox>,
) -> Result<ConstructionPlan, SimplifyError> {
    let ed = GraphEditor::from_network(net);
    check_block(&ed, block)?;
    plan_ed(&ed, block.sum, input_box)
}

fn construct_ed(
    ed: &mut GraphEditor,
    sum: LayerId,
    input_box: Option<&InputBox>,
) -> Result<ConstructionPlan, SimplifyError> {
    let plan = plan_ed(ed, sum, input_box)?;
    let total = plan.passthrough_shift.len();
    let mut selectors = Vec::with_capacity(plan.sources.len());
    let mut offset = 0;
    for &src in &plan.sources {
        let w = ed.width(src);
        let mut sel = DenseMatrix::zeros((total, w));
        sel.slice_mut(s![offset..offset + w, ..]).assign(&DenseMatrix::eye(w));
        let mut bias = DenseVector::zeros(total);
        bias.slice_mut(s![offset..offset + w])
            .assign(&plan.passthrough_shift.slice(s![offset..offset + w]));
        selectors.push(ed.add_linear(src, sel, bias));
        offset += w;
    }
    let ls = ed.add(LayerKind::Sum, total, selectors);
    let lr = ed.add(LayerKind::Relu, total, vec![ls]);
    let ll = ed.add_linear(lr, plan.new_linear_weight.clone(), plan.new_linear_bias.clone());
    ed.redirect_successors(sum, ll);
    for l in ed.layer(sum).inputs.clone() {
        ed.remove(l);
    }
    ed.remove(sum);
    for &r in &plan.blocked_relus {
        ed.remove(r);
    }
    Ok(plan)
}

/// Replaces a normalized block with several predecessors, and the ReLU
/// layers it blocks, by `L^s → L^r → L^l`.
pub fn linear_layer_construction(
    net: &Network,
    block: &SumLinearBlockView,
    input_box: Option<&InputBox>,
) -> Result<Network, SimplifyError> {
    let mut ed = GraphEditor::from_network(net);
    check_block(&ed, block)?;
    construct_ed(&mut ed, block.sum, input_box)?;
    Ok(ed.to_network())
}

fn linearize_ed(ed: &mut GraphEditor, sum: LayerId) -> Result<(), SimplifyError> {
    let members = ed.layer(sum).inputs.clone();
    if members.len() != 1 {
        return Err(SimplifyError::NotNormalized(sum));
    }
    ed.redirect_successors(sum, members[0]);
    ed.remove(sum);
    Ok(())
}

/// Replaces a block with a single member by that Linear layer.
pub fn linearize(net: &Network, block: &SumLinearBlockView) -> Result<Network, SimplifyError> {
    let mut ed = GraphEditor::from_network(net);
    check_block(&ed, block)?;
    linearize_ed(&mut ed, block.sum)?;
    Ok(ed.to_network())
}

/// Turns a block-free chain of Input/Linear/ReLU layers into the strict
/// alternation `Input → Linear (→ ReLU → Linear)*`.
fn to_alternating(net: &Network) -> Result<Vec<Affine>, SimplifyError> {
    let succ = net.successors();
    let mut cur = net.input();
    let width = net.input_width();
    let mut maps: Vec<Affine> = Vec::new();
    // Pending affine map since the last ReLU; `None` means identity.
    let mut pending: Option<Affine> = None;
    let mut after_relu = false;
    loop {
        let next = succ.get(&cur).map(Vec::as_slice).unwrap_or(&[]);
        match next {
            [] => break,
            [n] => cur = *n,
            _ => return Err(NetError::NotSequential(format!("layer {cur} fans out")).into()),
        }
        let layer = net.layer(cur).expect("successor exists");
        match &layer.kind {
            LayerKind::Linear { weight, bias } => {
                let a = Affine::new(weight.clone(), bias.clone());
                pending = Some(match pending {
                    Some(p) => a.compose(&p),
                    None => a,
                });
                after_relu = false;
            }
            LayerKind::Relu => {
                if after_relu && pending.is_none() {
                    // ReLU of a ReLU output is the identity.
                    continue;
                }
                let w = layer.width;
                maps.push(pending.take().unwrap_or_else(|| Affine::identity(w)));
                after_relu = true;
            }
            other => {
                return Err(NetError::NotSequential(format!(
                    "{} layer {cur} left after simplification",
                    other.name()
                ))
                .into())
            }
        }
    }
    let out_w = if maps.is_empty() && pending.is_none() {
        width
    } else {
        net.output_width()
    };
    maps.push(pending.unwrap_or_else(|| Affine::identity(out_w)));
    Ok(maps)
}

/// Simplifies `net` into an equivalent alternating Linear/ReLU chain.
/// `input_box` is needed only when the input layer has to pass through a
/// ReLU layer.
pub fn simplify(net: &Network, input_box: Option<&InputBox>) -> Result<Simplified, SimplifyError> {
    let report = validate(net);
    if !report.is_valid() {
        return Err(NetError::Invalid(report).into());
    }
    if let Some(bx) = input_box {
        if bx.dim() != net.input_width() {
            return Err(SimplifyError::BoxWidth {
                expected: net.input_width(),
                found: bx.dim(),
            });
        }
    }
    let limit = net.layers().len();
    let mut ed = GraphEditor::from_network(net);
    init_editor(&mut ed);
    let (mut constructions, mut linearizations) = (0, 0);
    while let Some(sum) = last_block_ed(&ed)? {
        normalize_ed(&mut ed, sum);
        if ed.layer(sum).inputs.len() > 1 {
            construct_ed(&mut ed, sum, input_box)?;
            constructions += 1;
            if constructions > limit {
                return Err(SimplifyError::TooManyConstructions {
                    count: constructions,
                    limit,
                });
            }
        } else {
            linearize_ed(&mut ed, sum)?;
            linearizations += 1;
        }
    }
    let chain = ed.to_network();
    let maps = to_alternating(&chain)?;
    let seq = crate::net_ir::SequentialNet::new(net.input_width(), maps)?;
    Ok(Simplified {
        network: seq.to_network(),
        constructions,
        linearizations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::net_ir::{NetworkBuilder, SequentialNet};
    use ndarray::array;

    #[test]
    fn sequential_network_is_a_fixed_point() {
        let net = fixtures::worked_example();
        let out = simplify(&net, None).unwrap();
        let widths: Vec<usize> = out.network.layers().iter().map(|l| l.width).collect();
        assert_eq!(widths, vec![2, 5, 5, 2]);
        assert_eq!(out.constructions, 0);
        let a = array![0.3, -0.7];
        assert_eq!(out.network.forward(&a).unwrap(), net.forward(&a).unwrap());
    }

    #[test]
    fn lone_linear_gets_a_sum() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let l = b.linear(x, array![[2.0]], array![1.0]);
        let net = b.finish(l).unwrap();
        let init = initialization(&net);
        assert_eq!(init.layers().len(), 3);
        assert!(matches!(init.layer(init.output()).unwrap().kind, LayerKind::Sum));
        assert_eq!(blocks(&init).len(), 1);
    }

    #[test]
    fn relu_chain_is_left_alone_by_initialization() {
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let r = b.relu(x);
        let net = b.finish(r).unwrap();
        assert_eq!(initialization(&net).layers().len(), 2);
    }

    #[test]
    fn normalization_composes_scalar_blocks() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let inner_l = b.linear(x, array![[3.0]], array![4.0]);
        let inner = b.sum(vec![inner_l]);
        let outer_l = b.linear(inner, array![[2.0]], array![1.0]);
        let outer = b.sum(vec![outer_l]);
        let net = b.finish(outer).unwrap();
        let view = SumLinearBlockView {
            sum: outer,
            linears: vec![outer_l],
        };
        let n = normalize_block(&net, &view).unwrap();
        assert!(n.layer(inner).is_none(), "inner block is removed");
        let member = n.layer(outer).unwrap().inputs[0];
        let (w, bias) = n.layer(member).unwrap().linear_parts().unwrap();
        assert_eq!(w, &array![[6.0]]);
        assert_eq!(bias, &array![9.0]);
    }

    #[test]
    fn normalization_merges_shared_predecessors() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let la = b.linear(x, array![[1.0]], array![2.0]);
        let lb = b.linear(x, array![[3.0]], array![4.0]);
        let s = b.sum(vec![la, lb]);
        let net = b.finish(s).unwrap();
        let view = SumLinearBlockView {
            sum: s,
            linears: vec![la, lb],
        };
        let n = normalize_block(&net, &view).unwrap();
        let members = &n.layer(s).unwrap().inputs;
        assert_eq!(members.len(), 1);
        let (w, bias) = n.layer(members[0]).unwrap().linear_parts().unwrap();
        assert_eq!(w, &array![[4.0]]);
        assert_eq!(bias, &array![6.0]);
    }

    /// `y = W_a·ReLU(x) + W_b·x + c`: the input passes through a ReLU.
    fn skip_from_input() -> (Network, LayerId) {
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let r = b.relu(x);
        let la = b.linear(r, array![[1.0, 2.0]], array![0.5]);
        let lb = b.linear(x, array![[-1.0, 3.0]], array![0.25]);
        let s = b.sum(vec![la, lb]);
        (b.finish(s).unwrap(), s)
    }

    #[test]
    fn input_passthrough_needs_a_box() {
        let (net, _) = skip_from_input();
        assert!(matches!(simplify(&net, None), Err(SimplifyError::NeedsInputBox(_))));
    }

    #[test]
    fn input_passthrough_shift_comes_from_the_box() {
        let (net, s) = skip_from_input();
        let bx = fixtures::unit_box_2d();
        let view = blocks(&net).into_iter().find(|v| v.sum == s).unwrap();
        let plan = plan_construction(&net, &view, Some(&bx)).unwrap();
        assert_eq!(plan.sources.len(), 2);
        // The blocked ReLU's segment is unshifted, the input segment moves by 1.
        assert_eq!(plan.passthrough_shift, array![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(plan.new_linear_weight, array![[1.0, 2.0, -1.0, 3.0]]);
        assert_eq!(plan.new_linear_bias, array![0.75 - 2.0]);
    }

    #[test]
    fn relu_passthrough_has_zero_shift() {
        // ReLU r1 feeds both the block and another ReLU path.
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let r1 = b.relu(x);
        let l1 = b.linear(r1, array![[1.0]], array![-1.0]);
        let r2 = b.relu(l1);
        let la = b.linear(r2, array![[2.0]], array![0.0]);
        let lb = b.linear(r1, array![[3.0]], array![0.0]);
        let s = b.sum(vec![la, lb]);
        let net = b.finish(s).unwrap();
        let init = initialization(&net);
        let last = last_block(&init).unwrap().unwrap();
        let normalized = normalize_block(&init, &last).unwrap();
        let view = blocks(&normalized).into_iter().find(|v| v.sum == last.sum).unwrap();
        let plan = plan_construction(&normalized, &view, None).unwrap();
        assert_eq!(plan.blocked_relus, vec![r2]);
        assert_eq!(plan.passthrough, vec![r1]);
        assert_eq!(plan.passthrough_shift, array![0.0, 0.0]);
    }

    #[test]
    fn residual_block_becomes_three_maps_after_the_stem() {
        let rb = fixtures::residual_block(3, 7);
        let out = simplify(&rb.network, None).unwrap();
        let seq = SequentialNet::from_network(&out.network).unwrap();
        let w = 48;
        let shapes: Vec<(usize, usize)> =
            seq.layers().iter().map(|a| (a.out_width(), a.in_width())).collect();
        assert_eq!(shapes, vec![(w, w), (2 * w, w), (w, 2 * w)]);
        assert!(out.constructions >= 1 && out.constructions <= rb.network.layers().len());
    }

    #[test]
    fn chain_of_single_member_blocks_linearizes() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let l1 = b.linear(x, array![[2.0]], array![1.0]);
        let s1 = b.sum(vec![l1]);
        let l2 = b.linear(s1, array![[3.0]], array![0.0]);
        let s2 = b.sum(vec![l2]);
        let net = b.finish(s2).unwrap();
        let out = simplify(&net, None).unwrap();
        let seq = SequentialNet::from_network(&out.network).unwrap();
        assert_eq!(seq.layers().len(), 1);
        assert_eq!(seq.layers()[0].weight, array![[6.0]]);
        assert_eq!(seq.layers()[0].bias, array![3.0]);
    }

    #[test]
    fn linearize_single_block() {
        let mut b = NetworkBuilder::new();
        let x = b.input(1);
        let l = b.linear(x, array![[2.0]], array![1.0]);
        let s = b.sum(vec![l]);
        let net = b.finish(s).unwrap();
        let view = blocks(&net).remove(0);
        let lin = linearize(&net, &view).unwrap();
        assert_eq!(lin.layers().len(), 2);
        assert_eq!(lin.output(), l);
    }

    #[test]
    fn relu_directly_on_input_gets_identity_map() {
        let mut b = NetworkBuilder::new();
        let x = b.input(2);
        let r = b.relu(x);
        let net = b.finish(r).unwrap();
        let out = simplify(&net, None).unwrap();
        let seq = SequentialNet::from_network(&out.network).unwrap();
        assert_eq!(seq.relu_widths(), vec![2]);
        let a = array![-1.0, 2.0];
        assert_eq!(out.network.forward(&a).unwrap(), array![0.0, 2.0]);
    }
}
