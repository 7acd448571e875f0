use redkit::bound_engine::{compute_bounds, AlphaRule, BoundMethod};
use redkit::equivalence::uniform_samples;
use redkit::fixtures::{worked_example, unit_box_2d};
use redkit::generator::{generate, GenParams};
use redkit::net_ir::SequentialNet;

const SLACK: f64 = 1e-9;

fn check_sound(net: &SequentialNet, bx: &redkit::bound_engine::InputBox, method: BoundMethod, n: usize, seed: u64) {
    let table = compute_bounds(net, bx, method).unwrap();
    for x in uniform_samples(bx, n, seed) {
        let mut a = x;
        for (k, (m, b)) in net.layers().iter().zip(&table.layers).enumerate() {
            if k > 0 {
                a.mapv_inplace(|v| v.max(0.0));
            }
            a = m.apply(&a);
            for i in 0..a.len() {
                assert!(
                    b.lower[i] - SLACK <= a[i] && a[i] <= b.upper[i] + SLACK,
                    "{} layer {k} neuron {i}: {} not in [{}, {}]",
                    method.name(),
                    a[i],
                    b.lower[i],
                    b.upper[i]
                );
            }
        }
    }
}

#[test]
fn bounds_enclose_sampled_activations() {
    let example = SequentialNet::from_network(&worked_example()).unwrap();
    for m in [BoundMethod::Interval, BoundMethod::Crown(AlphaRule::Adaptive)] {
        check_sound(&example, &unit_box_2d(), m, 10_000, 1);
    }
    for seed in 0..4 {
        let g = generate(&GenParams {
            layers: 3,
            width: 24,
            input_dim: 6,
            output_dim: 4,
            stable_fraction: 0.3,
            eps: 0.2,
            seed,
            ..Default::default()
        })
        .unwrap();
        let bx = g.sidecar.input_box();
        for m in [
            BoundMethod::Interval,
            BoundMethod::Crown(AlphaRule::Adaptive),
            BoundMethod::Crown(AlphaRule::Zero),
            BoundMethod::Crown(AlphaRule::One),
        ] {
            check_sound(&g.network, &bx, m, 10_000, seed);
        }
    }
}

#[test]
fn crown_is_never_looser_than_interval_on_the_output() {
    let example = SequentialNet::from_network(&worked_example()).unwrap();
    let i = compute_bounds(&example, &unit_box_2d(), BoundMethod::Interval).unwrap();
    let c = compute_bounds(&example, &unit_box_2d(), BoundMethod::Crown(AlphaRule::Adaptive)).unwrap();
    for k in 0..2 {
        assert!(c.output().lower[k] >= i.output().lower[k] - SLACK);
        assert!(c.output().upper[k] <= i.output().upper[k] + SLACK);
    }
}
