//! Stable-neuron reduction.
//!
//! For a ReLU layer `Y` between affine maps `X = (M₁, B₁)` and
//! `Z = (M₂, B₂)` with partition `D ∪ A ∪ U`:
//!
//! - deactivated rows are dropped (their ReLU output is always 0);
//! - activated rows are merged into `n = |Z|` neurons with weights
//!   `M₂[:,A]·M₁[A,:]` and bias `B' + s`, `B' = M₂[:,A]·B₁[A]`, where the
//!   shift `s ≥ 0` lifts each merged pre-activation above 0 over the range
//!   of `V` (the layer feeding `X`);
//! - `Z'` reads the merged neurons through an identity block with bias
//!   `B₂ - s` and the unstable ones through `M₂[:,U]`.
//!
//! Layers are processed from the last hidden layer to the first, with
//! bounds computed once on the input network. A layer without unstable
//! neurons is affine on the box and is folded into its neighbours.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use ndarray::{concatenate, Axis};
use serde::Serialize;
use thiserror::Error;

use crate::bound_engine::{
    compute_bounds, interval_lower_no_bias, AlphaRule, BoundError, BoundMethod, BoundsTable,
    InputBox, LayerBounds,
};
use crate::net_ir::{
    Affine, DenseMatrix, DenseVector, GraphEditor, LayerKind, NetError, Network, SequentialNet,
};

#[derive(Debug, Error)]
pub enum ReduceError {
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("partition for layer {layer} covers {found} neurons, layer has {expected}")]
    PartitionWidth {
        layer: usize,
        expected: usize,
        found: usize,
    },
    #[error("expected {expected} layer partitions, got {found}")]
    PartitionCount { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stability {
    Deactivated,
    Activated,
    Unstable,
}

/// Split of one ReLU layer's neurons into deactivated, activated and
/// unstable index sets, each ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LayerPartition {
    pub deactivated: Vec<usize>,
    pub activated: Vec<usize>,
    pub unstable: Vec<usize>,
}

impl LayerPartition {
    /// `u ≤ 0` is deactivated (this includes `l = u = 0`), otherwise
    /// `l ≥ 0` is activated, otherwise unstable.
    pub fn from_bounds(b: &LayerBounds) -> Self {
        let mut p = LayerPartition::default();
        for (i, (&l, &u)) in b.lower.iter().zip(b.upper.iter()).enumerate() {
            if u <= 0.0 {
                p.deactivated.push(i);
            } else if l >= 0.0 {
                p.activated.push(i);
            } else {
                p.unstable.push(i);
            }
        }
        p
    }

    pub fn all_unstable(width: usize) -> Self {
        LayerPartition {
            unstable: (0..width).collect(),
            ..Default::default()
        }
    }

    pub fn width(&self) -> usize {
        self.deactivated.len() + self.activated.len() + self.unstable.len()
    }

    pub fn of(&self, i: usize) -> Option<Stability> {
        if self.deactivated.contains(&i) {
            Some(Stability::Deactivated)
        } else if self.activated.contains(&i) {
            Some(Stability::Activated)
        } else if self.unstable.contains(&i) {
            Some(Stability::Unstable)
        } else {
            None
        }
    }

    /// Moves neuron `i` into the given class.
    pub fn force(&mut self, i: usize, class: Stability) {
        self.deactivated.retain(|&j| j != i);
        self.activated.retain(|&j| j != i);
        self.unstable.retain(|&j| j != i);
        let set = match class {
            Stability::Deactivated => &mut self.deactivated,
            Stability::Activated => &mut self.activated,
            Stability::Unstable => &mut self.unstable,
        };
        let pos = set.partition_point(|&j| j < i);
        set.insert(pos, i);
    }

    /// True if every class is consistent with the given bounds.
    pub fn is_sound_for(&self, b: &LayerBounds) -> bool {
        self.deactivated.iter().all(|&i| b.upper[i] <= 0.0)
            && self.activated.iter().all(|&i| b.lower[i] >= 0.0)
    }
}

/// Partitions every ReLU layer of the table.
pub fn classify(bounds: &BoundsTable) -> Vec<LayerPartition> {
    bounds.relu_layers().iter().map(LayerPartition::from_bounds).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum MergePolicy {
    /// Merge only when it shrinks the layer (`|A| > n`).
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ShiftMethod {
    /// Interval image of the merged map over the range of `V`.
    #[default]
    Interval,
    /// Additionally backward-propagates the merged map to the input box and
    /// keeps the tighter lower bound.
    Crown(AlphaRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReductionConfig {
    pub method: BoundMethod,
    pub shift: ShiftMethod,
    pub merge: MergePolicy,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            method: BoundMethod::Crown(AlphaRule::Adaptive),
            shift: ShiftMethod::Interval,
            merge: MergePolicy::Auto,
        }
    }
}

/// Everything needed to rebuild one `X → Y → Z` segment.
#[derive(Debug, Clone, PartialEq)]
pub struct ReductionPlan {
    /// Whether the activated neurons are merged.
    pub merged: bool,
    /// The layer has no unstable neuron left and is folded away.
    pub collapsed: bool,
    /// `M₂[:,A]·M₁[A,:]`, `n × q`.
    pub merge_weight: DenseMatrix,
    /// `B' = M₂[:,A]·B₁[A]`.
    pub merge_offset: DenseVector,
    /// `s ≥ 0`.
    pub shift: DenseVector,
    /// `B' + s`.
    pub merge_bias: DenseVector,
    /// Rows of `X` kept as ReLU neurons: `U`, plus `A` when not merged.
    pub kept_rows: Vec<usize>,
    pub kept_weight: DenseMatrix,
    pub kept_bias: DenseVector,
    pub out_weight_kept: DenseMatrix,
    /// `B₂ - s` when merged, else `B₂`.
    pub out_bias: DenseVector,
    pub q: usize,
    pub m: usize,
    pub k: usize,
    pub n: usize,
}

impl ReductionPlan {
    pub fn width_after(&self) -> usize {
        if self.collapsed {
            0
        } else {
            self.kept_rows.len() + if self.merged { self.n } else { 0 }
        }
    }

    /// `[I | M₂[:,kept]]` when merged, else `M₂[:,kept]`.
    pub fn out_weight(&self) -> DenseMatrix {
        if self.merged {
            concatenate(
                Axis(1),
                &[DenseMatrix::eye(self.n).view(), self.out_weight_kept.view()],
            )
            .expect("rows agree")
        } else {
            self.out_weight_kept.clone()
        }
    }
}

/// The rebuilt segment.
#[derive(Debug, Clone, PartialEq)]
pub enum SegmentReduction {
    /// `X' → ReLU → Z'`.
    Kept { x: Affine, z: Affine },
    /// The whole segment is the single affine map `V → Z`.
    Collapsed(Affine),
}

/// Lower bound on `weight·v + offset` for `v ∈ [lo, hi]`, and the smallest
/// shift `s ≥ 0` with `lower + s ≥ 0` as evaluated in floating point by the
/// bound engine's interval formula.
fn interval_shift(
    weight: &DenseMatrix,
    offset: &DenseVector,
    lo: &DenseVector,
    hi: &DenseVector,
    tighter: Option<&DenseVector>,
) -> DenseVector {
    let raw = interval_lower_no_bias(weight, lo, hi);
    let mut shift = DenseVector::zeros(offset.len());
    for i in 0..offset.len() {
        let mut lower = raw[i] + offset[i];
        if let Some(t) = tighter {
            lower = lower.max(t[i]);
        }
        let mut s = (-lower).max(0.0);
        if tighter.is_none() && s > 0.0 {
            while raw[i] + (offset[i] + s) < 0.0 {
                s = s.next_up();
            }
        }
        shift[i] = s;
    }
    shift
}

fn check_segment(x: &Affine, z: &Affine, part: &LayerPartition) -> Result<(), ReduceError> {
    if z.in_width() != x.out_width() {
        return Err(NetError::DimensionMismatch {
            expected: x.out_width(),
            found: z.in_width(),
        }
        .into());
    }
    let mut all: Vec<usize> = part
        .deactivated
        .iter()
        .chain(&part.activated)
        .chain(&part.unstable)
        .copied()
        .collect();
    all.sort_unstable();
    if all != (0..x.out_width()).collect::<Vec<_>>() {
        return Err(ReduceError::PartitionWidth {
            layer: 0,
            expected: x.out_width(),
            found: all.len(),
        });
    }
    Ok(())
}

fn plan_with(
    v_lo: &DenseVector,
    v_hi: &DenseVector,
    x: &Affine,
    z: &Affine,
    part: &LayerPartition,
    merge: MergePolicy,
    tighter_lower: Option<&dyn Fn(&Affine) -> DenseVector>,
) -> ReductionPlan {
    let (q, m, n) = (x.in_width(), x.out_width(), z.out_width());
    let k = part.activated.len();
    let a = &part.activated;
    let m2a = z.weight.select(Axis(1), a);
    let merge_weight = m2a.dot(&x.weight.select(Axis(0), a));
    let merge_offset = m2a.dot(&x.bias.select(Axis(0), a));
    let collapsed = part.unstable.is_empty();
    let merged = !collapsed
        && k > 0
        && match merge {
            MergePolicy::Always => true,
            MergePolicy::Never => false,
            MergePolicy::Auto => k > n,
        };
    let shift = if merged {
        let tighter = tighter_lower.map(|f| f(&Affine::new(merge_weight.clone(), merge_offset.clone())));
        interval_shift(&merge_weight, &merge_offset, v_lo, v_hi, tighter.as_ref())
    } else {
        DenseVector::zeros(n)
    };
    let kept_rows: Vec<usize> = if merged || collapsed {
        part.unstable.clone()
    } else {
        let mut r: Vec<usize> = part.unstable.iter().chain(a).copied().collect();
        r.sort_unstable();
        r
    };
    let out_bias = if collapsed {
        &z.bias + &merge_offset
    } else {
        &z.bias - &shift
    };
    ReductionPlan {
        merged,
        collapsed,
        merge_bias: &merge_offset + &shift,
        merge_weight,
        merge_offset,
        shift,
        kept_weight: x.weight.select(Axis(0), &kept_rows),
        kept_bias: x.bias.select(Axis(0), &kept_rows),
        out_weight_kept: z.weight.select(Axis(1), &kept_rows),
        kept_rows,
        out_bias,
        q,
        m,
        k,
        n,
    }
}

fn build(plan: &ReductionPlan) -> SegmentReduction {
    if plan.collapsed {
        return SegmentReduction::Collapsed(Affine::new(plan.merge_weight.clone(), plan.out_bias.clone()));
    }
    let x = if plan.merged {
        Affine::new(
            concatenate(Axis(0), &[plan.merge_weight.view(), plan.kept_weight.view()])
                .expect("columns agree"),
            concatenate(Axis(0), &[plan.merge_bias.view(), plan.kept_bias.view()])
                .expect("vectors concatenate"),
        )
    } else {
        Affine::new(plan.kept_weight.clone(), plan.kept_bias.clone())
    };
    SegmentReduction::Kept {
        x,
        z: Affine::new(plan.out_weight(), plan.out_bias.clone()),
    }
}

/// Plans the reduction of one segment. `v_range` bounds the outputs of the
/// layer feeding `x` (the input box, or clamped pre-activation bounds).
pub fn plan_layer(
    v_range: &LayerBounds,
    x: &Affine,
    z: &Affine,
    part: &LayerPartition,
    merge: MergePolicy,
) -> Result<ReductionPlan, ReduceError> {
    check_segment(x, z, part)?;
    Ok(plan_with(&v_range.lower, &v_range.upper, x, z, part, merge, None))
}

/// Rebuilds the segment `x → ReLU → z` according to `part`. The result
/// computes the same function of `v` for every `v` in `v_range` provided
/// the partition is sound there.
pub fn reduce_layer(
    v_range: &LayerBounds,
    x: &Affine,
    z: &Affine,
    part: &LayerPartition,
    merge: MergePolicy,
) -> Result<(ReductionPlan, SegmentReduction), ReduceError> {
    let plan = plan_layer(v_range, x, z, part, merge)?;
    let seg = build(&plan);
    Ok((plan, seg))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerReport {
    pub layer: usize,
    pub width_before: usize,
    pub n_deactivated: usize,
    pub n_activated: usize,
    pub n_unstable: usize,
    pub width_after: usize,
    /// Activated neurons were left in place because merging them would not
    /// shrink the layer.
    pub merge_skipped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub method: String,
    pub layers: Vec<LayerReport>,
    pub relu_before: usize,
    pub relu_after: usize,
    /// Bound computation plus rebuilding.
    pub elapsed: Duration,
}

impl ReductionReport {
    /// ReLU count before over after; infinite when everything is removed.
    pub fn ratio(&self) -> f64 {
        if self.relu_after == 0 {
            if self.relu_before == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.relu_before as f64 / self.relu_after as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,width_before,n_deactivated,n_activated,n_unstable,width_after\n");
        let (mut d, mut a, mut u) = (0, 0, 0);
        for l in &self.layers {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                l.layer, l.width_before, l.n_deactivated, l.n_activated, l.n_unstable, l.width_after
            );
            d += l.n_deactivated;
            a += l.n_activated;
            u += l.n_unstable;
        }
        let _ = writeln!(
            out,
            "total,{},{},{},{},{}",
            self.relu_before, d, a, u, self.relu_after
        );
        let skipped: Vec<String> = self
            .layers
            .iter()
            .filter(|l| l.merge_skipped)
            .map(|l| l.layer.to_string())
            .collect();
        let _ = writeln!(
            out,
            "# method={} reduction_time_s={:.6} ratio={:.4} merge_skipped_layers=[{}]",
            self.method,
            self.elapsed.as_secs_f64(),
            self.ratio(),
            skipped.join(" ")
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct Reduction {
    pub sequential: SequentialNet,
    pub report: ReductionReport,
    /// Bounds of the input network used for the reduction.
    pub bounds: BoundsTable,
}

impl Reduction {
    pub fn network(&self) -> Network {
        self.sequential.to_network()
    }
}

/// Per-layer merge policies and partitions for [`reduce_with_partitions`].
#[derive(Debug, Clone)]
pub struct LayerDirective {
    pub partition: LayerPartition,
    pub merge: MergePolicy,
}

/// Reduces `net` with caller-supplied partitions. `bounds` must be bounds of
/// `net` over `bx`; they provide the range of each layer's input.
pub fn reduce_with_partitions(
    net: &SequentialNet,
    bx: &InputBox,
    bounds: &BoundsTable,
    directives: &[LayerDirective],
    shift: ShiftMethod,
) -> Result<(SequentialNet, Vec<LayerReport>), ReduceError> {
    let relus = net.relu_widths();
    if directives.len() != relus.len() || bounds.relu_layers().len() != relus.len() {
        return Err(ReduceError::PartitionCount {
            expected: relus.len(),
            found: directives.len(),
        });
    }
    for (layer, (d, &w)) in directives.iter().zip(&relus).enumerate() {
        if d.partition.width() != w {
            return Err(ReduceError::PartitionWidth {
                layer,
                expected: w,
                found: d.partition.width(),
            });
        }
    }
    let mut maps: Vec<Affine> = net.layers().to_vec();
    let mut reports = Vec::with_capacity(relus.len());
    for k in (0..relus.len()).rev() {
        let (lo, hi) = if k == 0 {
            (bx.lower().clone(), bx.upper().clone())
        } else {
            let c = bounds.layers[k - 1].clamped();
            (c.lower, c.upper)
        };
        let d = &directives[k];
        let crown = |merge: &Affine| -> DenseVector {
            let ShiftMethod::Crown(alpha) = shift else {
                unreachable!("only called for CROWN shifts")
            };
            let mut prefix: Vec<Affine> = net.layers()[..k].to_vec();
            prefix.push(merge.clone());
            let sub = SequentialNet::new(net.input_width(), prefix).expect("prefix of a chain");
            compute_bounds(&sub, bx, BoundMethod::Crown(alpha))
                .expect("box fits the network")
                .output()
                .lower
                .clone()
        };
        let tighter: Option<&dyn Fn(&Affine) -> DenseVector> = match shift {
            ShiftMethod::Crown(_) if k > 0 => Some(&crown),
            _ => None,
        };
        check_segment(&maps[k], &maps[k + 1], &d.partition).map_err(|e| match e {
            ReduceError::PartitionWidth { expected, found, .. } => ReduceError::PartitionWidth {
                layer: k,
                expected,
                found,
            },
            e => e,
        })?;
        let plan = plan_with(&lo, &hi, &maps[k], &maps[k + 1], &d.partition, d.merge, tighter);
        reports.push(LayerReport {
            layer: k,
            width_before: plan.m,
            n_deactivated: d.partition.deactivated.len(),
            n_activated: plan.k,
            n_unstable: d.partition.unstable.len(),
            width_after: plan.width_after(),
            merge_skipped: !plan.merged && !plan.collapsed && plan.k > 0,
        });
        match build(&plan) {
            SegmentReduction::Kept { x, z } => {
                maps[k] = x;
                maps[k + 1] = z;
            }
            SegmentReduction::Collapsed(a) => {
                maps[k] = a;
                maps.remove(k + 1);
            }
        }
    }
    reports.reverse();
    Ok((SequentialNet::new(net.input_width(), maps)?, reports))
}

/// Bounds `net` over `bx` once, classifies every ReLU neuron and rebuilds
/// the network from the last hidden layer to the first.
pub fn reduce_sequential(
    net: &SequentialNet,
    bx: &InputBox,
    cfg: &ReductionConfig,
) -> Result<Reduction, ReduceError> {
    let start = Instant::now();
    let bounds = compute_bounds(net, bx, cfg.method)?;
    let directives: Vec<LayerDirective> = classify(&bounds)
        .into_iter()
        .map(|partition| LayerDirective {
            partition,
            merge: cfg.merge,
        })
        .collect();
    let (sequential, layers) = reduce_with_partitions(net, bx, &bounds, &directives, cfg.shift)?;
    let elapsed = start.elapsed();
    Ok(Reduction {
        report: ReductionReport {
            method: cfg.method.name().to_string(),
            layers,
            relu_before: net.relu_count(),
            relu_after: sequential.relu_count(),
            elapsed,
        },
        sequential,
        bounds,
    })
}

/// [`reduce_sequential`] for a sequential [`Network`].
pub fn reduce_network(
    net: &Network,
    bx: &InputBox,
    cfg: &ReductionConfig,
) -> Result<Reduction, ReduceError> {
    let seq = SequentialNet::from_network(net)?;
    reduce_sequential(&seq, bx, cfg)
}

/// Composes every Linear layer into a Linear successor that is its only
/// consumer (`W = W₂·W₁`, `b = W₂·b₁ + b₂`), until no such pair is left.
pub fn collapse_adjacent_linear(net: &Network) -> Network {
    let mut ed = GraphEditor::from_network(net);
    loop {
        let pair = ed.ids().into_iter().find_map(|id| {
            if !ed.kind(id).is_linear() {
                return None;
            }
            let p = ed.layer(id).inputs[0];
            (ed.kind(p).is_linear() && ed.successors(p) == [id]).then_some((p, id))
        });
        let Some((inner, outer)) = pair else { break };
        let (w1, b1) = ed.linear(inner);
        let a1 = Affine::new(w1.clone(), b1.clone());
        let (w2, b2) = ed.linear(outer);
        let composed = Affine::new(w2.clone(), b2.clone()).compose(&a1);
        let pred = ed.layer(inner).inputs[0];
        let layer = ed.layer_mut(outer);
        layer.kind = LayerKind::Linear {
            weight: composed.weight,
            bias: composed.bias,
        };
        layer.inputs = vec![pred];
        ed.remove(inner);
    }
    ed.to_network()
}
