use std::time::Duration;

use ndarray::array;
use redkit::bound_engine::{AlphaRule, BoundMethod, InputBox};
use redkit::equivalence::{grid_equivalence, sample_equivalence};
use redkit::fixtures::{worked_example, worked_example_reduced, unit_box_2d};
use redkit::net_ir::{DenseVector, LayerKind, Network, NetworkBuilder, SequentialNet};
use redkit::spec_io::{epsilon_ball, parse_vnnlib, OutputConstraint, PropertySpec};
use redkit::verify_harness::{bab_verify, bench_pair, verify_incomplete, Status, VerifyMode};

const CROWN: BoundMethod = BoundMethod::Crown(AlphaRule::Adaptive);

fn example() -> SequentialNet {
    SequentialNet::from_network(&worked_example()).unwrap()
}

fn grid(bx: &InputBox, per_dim: usize) -> Vec<DenseVector> {
    let (l, u) = (bx.lower(), bx.upper());
    let at = |i: usize, k: usize| l[i] + (u[i] - l[i]) * k as f64 / (per_dim - 1) as f64;
    (0..per_dim * per_dim)
        .map(|j| array![at(0, j / per_dim), at(1, j % per_dim)])
        .collect()
}

fn single(c: DenseVector, d: f64) -> PropertySpec {
    PropertySpec {
        input_box: unit_box_2d(),
        output_width: 2,
        constraints: vec![OutputConstraint { c, d }],
    }
}

#[test]
fn example_pair_is_equivalent() {
    let r = sample_equivalence(&worked_example(), &worked_example_reduced(), &unit_box_2d(), 10_000, 0).unwrap();
    assert_eq!(r.samples, 10_004);
    assert!(r.max_abs_diff <= 1e-9);
    assert_eq!(r.argmax_mismatches, 0);
    let g = grid_equivalence(&worked_example(), &worked_example_reduced(), &unit_box_2d(), 21).unwrap();
    assert_eq!(g.samples, 441);
    assert!(g.max_abs_diff <= 1e-9);
}

#[test]
fn equivalence_is_reflexive_and_sees_offsets() {
    let net = worked_example();
    let same = sample_equivalence(&net, &net, &unit_box_2d(), 500, 3).unwrap();
    assert_eq!(same.max_abs_diff, 0.0);

    let mut shifted = example().into_layers();
    shifted[1].bias[1] += 1.0;
    let shifted = SequentialNet::new(2, shifted).unwrap().to_network();
    let r = sample_equivalence(&net, &shifted, &unit_box_2d(), 500, 3).unwrap();
    assert!((r.max_abs_diff - 1.0).abs() < 1e-12);
}

fn relu_1d() -> Network {
    let mut b = NetworkBuilder::new();
    let x = b.input(1);
    let h = b.linear(x, array![[1.0]], array![0.0]);
    let r = b.relu(h);
    let y = b.linear(r, array![[1.0]], array![0.0]);
    b.finish(y).unwrap()
}

fn identity_1d() -> Network {
    SequentialNet::new(1, vec![redkit::net_ir::Affine::identity(1)]).unwrap().to_network()
}

#[test]
fn equivalence_is_restricted_to_the_box() {
    let pos = InputBox::new(array![0.0], array![2.0]).unwrap();
    let r = grid_equivalence(&relu_1d(), &identity_1d(), &pos, 2).unwrap();
    assert_eq!(r.max_abs_diff, 0.0);
    let r = grid_equivalence(&relu_1d(), &identity_1d(), &pos, 50).unwrap();
    assert_eq!(r.max_abs_diff, 0.0);
    let wide = InputBox::new(array![-1.0], array![2.0]).unwrap();
    let r = grid_equivalence(&relu_1d(), &identity_1d(), &wide, 4).unwrap();
    assert_eq!(r.max_abs_diff, 1.0);
    assert!(identity_1d().layers().iter().all(|l| !matches!(l.kind, LayerKind::Relu)));
}

#[test]
fn negated_counterexample_matches_enumeration() {
    let text = "\
(declare-const X_0 Real)
(declare-const X_1 Real)
(declare-const Y_0 Real)
(declare-const Y_1 Real)
(assert (>= X_0 -1))
(assert (<= X_0 1))
(assert (>= X_1 -1))
(assert (<= X_1 1))
(assert (or (and (>= Y_1 Y_0))))
";
    let spec = parse_vnnlib(text).unwrap();
    assert_eq!(spec.input_box, unit_box_2d());
    assert_eq!(spec.constraints.len(), 1);
    assert_eq!(spec.constraints[0].c, array![1.0, -1.0]);
    let net = example();
    let mut violated = 0;
    for x in grid(&spec.input_box, 101) {
        let y = net.forward(&x).unwrap();
        let counterexample = y[1] > y[0];
        assert_eq!(!spec.holds(&y), counterexample, "at {x}");
        violated += usize::from(counterexample);
    }
    assert!(violated > 0);
}

#[test]
fn epsilon_balls() {
    assert_eq!(epsilon_ball(&array![0.0, 0.0], 1.0, None).unwrap(), unit_box_2d());
    let b = epsilon_ball(&array![0.5], 0.7, Some((0.0, 1.0))).unwrap();
    assert_eq!((b.lower()[0], b.upper()[0]), (0.0, 1.0));
    let c = DenseVector::from_shape_fn(784, |i| (i % 255) as f64 / 255.0);
    let b = epsilon_ball(&c, 0.02, None).unwrap();
    assert!((b.upper() - b.lower()).iter().all(|w| (w - 0.04).abs() < 1e-12));
}

#[test]
fn incomplete_verdicts_on_the_example() {
    let v = verify_incomplete(&example(), &single(array![-1.0, 1.0], 0.0), BoundMethod::Interval).unwrap();
    assert_eq!(v.status, Status::Verified);
    assert!((v.bound_achieved - 2.0).abs() < 1e-12);
    let v = verify_incomplete(&example(), &single(array![1.0, -1.0], 0.0), BoundMethod::Interval).unwrap();
    assert_eq!(v.status, Status::Unknown);
    assert!(v.bound_achieved <= -2.0);
    let empty = PropertySpec {
        input_box: unit_box_2d(),
        output_width: 2,
        constraints: vec![],
    };
    assert_eq!(verify_incomplete(&example(), &empty, CROWN).unwrap().status, Status::Verified);
}

#[test]
fn verified_verdicts_hold_on_a_grid() {
    let props = [
        (array![-1.0, 1.0], 0.0),
        (array![1.0, 0.0], 3.0),
        (array![1.0, 0.0], 2.9),
        (array![0.0, 1.0], 0.0),
        (array![1.0, -1.0], 0.0),
        (array![1.0, 1.0], 4.0),
    ];
    let net = example();
    for (c, d) in props {
        let spec = single(c.clone(), d);
        for m in [BoundMethod::Interval, CROWN] {
            let v = bab_verify(&net, &spec, m, Duration::from_secs(10), 100).unwrap();
            if v.status == Status::Verified {
                for x in grid(&spec.input_box, 100) {
                    let y = net.forward(&x).unwrap();
                    assert!(spec.holds(&y), "{c} + {d} verified by {} but fails at {x}", m.name());
                }
            }
        }
    }
}

#[test]
fn lower_output_bound_needs_one_split_under_intervals() {
    let spec = single(array![1.0, 0.0], 3.0);
    let inc = verify_incomplete(&example(), &spec, BoundMethod::Interval).unwrap();
    assert_eq!(inc.status, Status::Unknown);
    let v = bab_verify(&example(), &spec, BoundMethod::Interval, Duration::from_secs(10), 100).unwrap();
    assert_eq!(v.status, Status::Verified);
    assert_eq!(v.splits_used, 1);
    let none = bab_verify(&example(), &spec, BoundMethod::Interval, Duration::from_secs(10), 0).unwrap();
    assert_eq!((none.status, none.splits_used), (Status::Unknown, 0));
}

#[test]
fn bench_on_the_example_pair() {
    let reduced = SequentialNet::from_network(&worked_example_reduced()).unwrap();
    let spec = single(array![-1.0, 1.0], 0.0);
    let r = bench_pair(&example(), &reduced, &spec, BoundMethod::Interval, VerifyMode::Incomplete, 3).unwrap();
    assert_eq!(r.original.status, Status::Verified);
    assert_eq!(r.reduced.status, Status::Verified);
    assert!(r.verdicts_agree);
}
