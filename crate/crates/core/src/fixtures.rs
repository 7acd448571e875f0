//! Small reference networks used throughout the tests, the acceptance suite
//! and the CLI smoke tests.

use ndarray::array;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::bound_engine::InputBox;
use crate::net_ir::{DenseMatrix, DenseVector, LayerId, Network, NetworkBuilder};
use crate::onnx_bridge::{conv_to_matrix, ConvParams};

/// Two inputs, five hidden ReLU neurons, two outputs.
///
/// Hidden pre-activations: `x3 = -x1-x2-2`, `x4 = x1+x2+3`, `x5 = x1-x2+2`,
/// `x6 = x1+x2+2`, `x7 = -x1+x2`; outputs `y1 = x8-x9+x10+x11-x12` and
/// `y2 = x8+x9+x10+x11+x12` over the ReLU outputs `x8..x12`.
pub fn worked_example() -> Network {
    let mut b = NetworkBuilder::new();
    let x = b.input(2);
    let h = b.linear(
        x,
        array![
            [-1.0, -1.0],
            [1.0, 1.0],
            [1.0, -1.0],
            [1.0, 1.0],
            [-1.0, 1.0]
        ],
        array![-2.0, 3.0, 2.0, 2.0, 0.0],
    );
    let r = b.relu(h);
    let y = b.linear(
        r,
        array![[1.0, -1.0, 1.0, 1.0, -1.0], [1.0, 1.0, 1.0, 1.0, 1.0]],
        array![0.0, 0.0],
    );
    b.finish(y).expect("worked example is well formed")
}

/// The reduced form of [`worked_example`]: merged neurons
/// `m1 = x1-x2+2`, `m2 = 3x1+x2+7` next to the unstable `x7 = -x1+x2`, and
/// outputs `y1 = m3 - x12 - 1`, `y2 = m4 + x12`.
pub fn worked_example_reduced() -> Network {
    let mut b = NetworkBuilder::new();
    let x = b.input(2);
    let h = b.linear(
        x,
        array![[1.0, -1.0], [3.0, 1.0], [-1.0, 1.0]],
        array![2.0, 7.0, 0.0],
    );
    let r = b.relu(h);
    let y = b.linear(
        r,
        array![[1.0, 0.0, -1.0], [0.0, 1.0, 1.0]],
        array![-1.0, 0.0],
    );
    b.finish(y).expect("reduced worked example is well formed")
}

/// The input space `[-1, 1]²` used with the two networks above.
pub fn unit_box_2d() -> InputBox {
    InputBox::new(array![-1.0, -1.0], array![1.0, 1.0]).expect("valid box")
}

/// A residual block: `n1 = ReLU(stem)`, `n4 = conv2(ReLU(conv1(n1)))`,
/// `n5 = conv3(n1)`, `n6 = n4 + n5`, with every convolution a random
/// 3×3/pad 1 kernel over `channels × 4 × 4` feature maps.
pub struct ResidualBlock {
    pub network: Network,
    pub stem: LayerId,
    pub relu1: LayerId,
    pub conv1: LayerId,
    pub relu2: LayerId,
    pub conv2: LayerId,
    pub conv3: LayerId,
    pub add: LayerId,
}

pub fn residual_block(channels: usize, seed: u64) -> ResidualBlock {
    const SIDE: usize = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = channels * SIDE * SIDE;
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let scale = 1.0 / ((channels * 9) as f64).sqrt();

    let conv = |rng: &mut ChaCha8Rng| {
        let kernel = ndarray::Array4::from_shape_fn((channels, channels, 3, 3), |_| {
            normal.sample(rng) * scale
        });
        let bias = DenseVector::from_shape_fn(channels, |_| normal.sample(rng) * 0.1);
        let params = ConvParams {
            strides: [1, 1],
            pads: [1, 1, 1, 1],
            dilations: [1, 1],
            group: 1,
        };
        let (m, b, _) = conv_to_matrix(&kernel, Some(&bias), &params, [channels, SIDE, SIDE])
            .expect("consistent conv shapes");
        (m, b)
    };

    let mut b = NetworkBuilder::new();
    let x = b.input(width);
    let stem_w = DenseMatrix::from_shape_fn((width, width), |_| {
        normal.sample(&mut rng) / (width as f64).sqrt()
    });
    let stem_b = DenseVector::from_shape_fn(width, |_| normal.sample(&mut rng) * 0.1);
    let stem = b.linear(x, stem_w, stem_b);
    let relu1 = b.relu(stem);
    let (w1, b1) = conv(&mut rng);
    let conv1 = b.linear(relu1, w1, b1);
    let relu2 = b.relu(conv1);
    let (w2, b2) = conv(&mut rng);
    let conv2 = b.linear(relu2, w2, b2);
    let (w3, b3) = conv(&mut rng);
    let conv3 = b.linear(relu1, w3, b3);
    let add = b.sum(vec![conv2, conv3]);
    let network = b.finish(add).expect("residual block is well formed");
    ResidualBlock {
        network,
        stem,
        relu1,
        conv1,
        relu2,
        conv2,
        conv3,
        add,
    }
}
