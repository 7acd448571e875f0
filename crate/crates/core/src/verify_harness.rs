//! A small robustness verifier: an incomplete margin check and a
//! depth-first ReLU-splitting branch and bound on top of it, plus a harness
//! timing the same calls on an original and a reduced network.
//!
//! A property counts as verified when every margin lower bound is `≥ 0`.

use std::fmt;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::bound_engine::{compute_bounds, margin_lower_bound_with_offset, BoundError, BoundMethod, BoundsTable};
use crate::equivalence::{sample_equivalence, uniform_samples, EquivError};
use crate::net_ir::SequentialNet;
use crate::reducer::{classify, reduce_with_partitions, LayerDirective, MergePolicy, ReduceError, ShiftMethod, Stability};
use crate::spec_io::PropertySpec;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("property has {spec} inputs and {spec_out} outputs, network has {net} and {net_out}")]
    Width {
        spec: usize,
        spec_out: usize,
        net: usize,
        net_out: usize,
    },
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Equiv(#[from] EquivError),
    #[error("networks disagree on the property box (max difference {0:e})")]
    NotEquivalent(f64),
    #[error("{variant} network reported verified but violates the property at {input}")]
    Unsound { variant: &'static str, input: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Status {
    Verified,
    Unknown,
    TimedOut,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Verified => "verified",
            Status::Unknown => "unknown",
            Status::TimedOut => "timeout",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub status: Status,
    pub splits_used: usize,
    pub wall_time_s: f64,
    /// Smallest margin lower bound over all constraints; over all leaves
    /// when verified, of the failing subproblem otherwise.
    pub bound_achieved: f64,
}

fn check_widths(net: &SequentialNet, spec: &PropertySpec) -> Result<(), VerifyError> {
    if net.input_width() != spec.input_width() || net.output_width() != spec.output_width {
        return Err(VerifyError::Width {
            spec: spec.input_width(),
            spec_out: spec.output_width,
            net: net.input_width(),
            net_out: net.output_width(),
        });
    }
    Ok(())
}

fn min_margin(net: &SequentialNet, spec: &PropertySpec, method: BoundMethod) -> Result<f64, VerifyError> {
    let mut worst = f64::INFINITY;
    for c in &spec.constraints {
        let lb = margin_lower_bound_with_offset(net, &spec.input_box, &c.c, c.d, method)?;
        worst = worst.min(lb);
    }
    Ok(worst)
}

/// Verified iff every margin lower bound is non-negative; a spec without
/// constraints is verified vacuously.
pub fn verify_incomplete(net: &SequentialNet, spec: &PropertySpec, method: BoundMethod) -> Result<Verdict, VerifyError> {
    check_widths(net, spec)?;
    let start = Instant::now();
    let bound = min_margin(net, spec, method)?;
    Ok(Verdict {
        status: if bound >= 0.0 { Status::Verified } else { Status::Unknown },
        splits_used: 0,
        wall_time_s: start.elapsed().as_secs_f64(),
        bound_achieved: bound,
    })
}

/// The unstable neuron with the widest pre-activation interval, ties to
/// the lowest (layer, index).
pub fn branching_neuron(bounds: &BoundsTable) -> Option<(usize, usize)> {
    let mut best: Option<((usize, usize), f64)> = None;
    for (k, (lb, part)) in bounds.relu_layers().iter().zip(classify(bounds)).enumerate() {
        for i in part.unstable {
            let w = lb.upper[i] - lb.lower[i];
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some(((k, i), w));
            }
        }
    }
    best.map(|(n, _)| n)
}

/// The two subproblems of splitting neuron `(layer, index)`: the network
/// rebuilt with that neuron forced inactive, then forced active. Each child
/// equals `net` on the part of the box where the forced sign holds.
pub fn split_children(
    net: &SequentialNet,
    spec: &PropertySpec,
    bounds: &BoundsTable,
    (layer, index): (usize, usize),
) -> Result<[SequentialNet; 2], VerifyError> {
    let parts = classify(bounds);
    let child = |class: Stability| -> Result<SequentialNet, VerifyError> {
        let directives: Vec<LayerDirective> = parts
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mut partition = p.clone();
                let merge = if k == layer {
                    partition.force(index, class);
                    MergePolicy::Always
                } else {
                    MergePolicy::Auto
                };
                LayerDirective { partition, merge }
            })
            .collect();
        let (seq, _) = reduce_with_partitions(net, &spec.input_box, bounds, &directives, ShiftMethod::Interval)?;
        Ok(seq)
    };
    Ok([child(Stability::Deactivated)?, child(Stability::Activated)?])
}

/// Depth-first branch and bound over ReLU splits, inactive branch first.
/// Stops with `Unknown` when a subproblem fails and either `max_splits`
/// splits have been made or no unstable neuron is left, and with
/// `TimedOut` once `timeout` has elapsed.
pub fn bab_verify(
    net: &SequentialNet,
    spec: &PropertySpec,
    method: BoundMethod,
    timeout: Duration,
    max_splits: usize,
) -> Result<Verdict, VerifyError> {
    check_widths(net, spec)?;
    let start = Instant::now();
    let mut splits = 0;
    let mut verified_bound = f64::INFINITY;
    let mut stack = vec![net.clone()];
    let done = |status, splits, bound| Verdict {
        status,
        splits_used: splits,
        wall_time_s: start.elapsed().as_secs_f64(),
        bound_achieved: bound,
    };
    while let Some(node) = stack.pop() {
        if start.elapsed() > timeout {
            return Ok(done(Status::TimedOut, splits, f64::NEG_INFINITY));
        }
        let bound = min_margin(&node, spec, method)?;
        if bound >= 0.0 {
            verified_bound = verified_bound.min(bound);
            continue;
        }
        if splits >= max_splits {
            return Ok(done(Status::Unknown, splits, bound));
        }
        let table = compute_bounds(&node, &spec.input_box, method)?;
        let Some(neuron) = branching_neuron(&table) else {
            return Ok(done(Status::Unknown, splits, bound));
        };
        let [inactive, active] = split_children(&node, spec, &table, neuron)?;
        splits += 1;
        stack.push(active);
        stack.push(inactive);
    }
    Ok(done(Status::Verified, splits, verified_bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum VerifyMode {
    Incomplete,
    BranchAndBound { timeout_s: f64, max_splits: usize },
}

pub fn run_verify(net: &SequentialNet, spec: &PropertySpec, method: BoundMethod, mode: VerifyMode) -> Result<Verdict, VerifyError> {
    match mode {
        VerifyMode::Incomplete => verify_incomplete(net, spec, method),
        VerifyMode::BranchAndBound { timeout_s, max_splits } => {
            bab_verify(net, spec, method, Duration::from_secs_f64(timeout_s), max_splits)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchResult {
    pub original: Verdict,
    pub reduced: Verdict,
    pub original_median_s: f64,
    pub reduced_median_s: f64,
    /// Original median time over reduced median time.
    pub speedup: f64,
    pub verdicts_agree: bool,
}

/// Samples used to confirm that the pair is equivalent on the box.
pub const BENCH_EQUIV_SAMPLES: usize = 1000;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Runs the same verification `repeats` times on both networks and reports
/// median wall times. The pair is first checked for equivalence on the
/// box; a verified network violating the property at any sampled point
/// aborts the run.
pub fn bench_pair(
    original: &SequentialNet,
    reduced: &SequentialNet,
    spec: &PropertySpec,
    method: BoundMethod,
    mode: VerifyMode,
    repeats: usize,
) -> Result<BenchResult, VerifyError> {
    let eq = sample_equivalence(&original.to_network(), &reduced.to_network(), &spec.input_box, BENCH_EQUIV_SAMPLES, 0)?;
    if !eq.within(1e-6) {
        return Err(VerifyError::NotEquivalent(eq.max_abs_diff));
    }
    let repeats = repeats.max(1);
    let run = |net: &SequentialNet| -> Result<(Verdict, f64), VerifyError> {
        let mut times = Vec::with_capacity(repeats);
        let mut verdict = None;
        for _ in 0..repeats {
            let v = run_verify(net, spec, method, mode)?;
            times.push(v.wall_time_s);
            verdict = Some(v);
        }
        Ok((verdict.expect("at least one repeat"), median(times)))
    };
    let (ov, ot) = run(original)?;
    let (rv, rt) = run(reduced)?;
    for (variant, net, v) in [("original", original, &ov), ("reduced", reduced, &rv)] {
        if v.status == Status::Verified {
            for p in uniform_samples(&spec.input_box, BENCH_EQUIV_SAMPLES, 1) {
                if !spec.holds(&net.forward(&p).expect("widths checked")) {
                    return Err(VerifyError::Unsound {
                        variant,
                        input: p.to_string(),
                    });
                }
            }
        }
    }
    Ok(BenchResult {
        verdicts_agree: ov.status == rv.status,
        speedup: if rt > 0.0 { ot / rt } else { f64::INFINITY },
        original: ov,
        reduced: rv,
        original_median_s: ot,
        reduced_median_s: rt,
    })
}
