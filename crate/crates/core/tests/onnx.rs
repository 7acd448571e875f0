use ndarray::{array, ArrayD, IxDyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use redkit::equivalence::uniform_samples;
use redkit::fixtures::{worked_example_reduced, unit_box_2d};
use redkit::net_ir::{forward, DenseVector, LayerKind, Network, SequentialNet};
use redkit::onnx_bridge::{
    attr_int, attr_ints, decode_model, encode_model, export_onnx, import_onnx, reference_eval, OnnxError,
    OnnxModelBuilder,
};

fn linears_into_sum(net: &Network) -> Vec<(ndarray::Array2<f64>, DenseVector)> {
    let sum = net
        .layers()
        .iter()
        .find(|l| matches!(l.kind, LayerKind::Sum))
        .expect("a Sum layer");
    sum.inputs
        .iter()
        .map(|&id| {
            let (w, b) = net.layer(id).unwrap().linear_parts().expect("Sum input is Linear");
            (w.clone(), b.clone())
        })
        .collect()
}

#[test]
fn gemm_becomes_one_linear() {
    let mut b = OnnxModelBuilder::new("g", "x", &[1, 3]);
    b.float_initializer("W", &[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        .float_initializer("B", &[2], &[0.5, -0.5])
        .node("fc", "Gemm", &["x", "W", "B"], &["y"], vec![attr_int("transB", 1)]);
    let (net, report) = import_onnx(&encode_model(&b.finish("y", &[1, 2]))).unwrap();
    let linears: Vec<_> = net.layers().iter().filter_map(|l| l.linear_parts()).collect();
    assert_eq!(linears.len(), 1);
    assert_eq!(linears[0].0, &array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]);
    assert_eq!(linears[0].1, &array![0.5, -0.5]);
    assert_eq!(report.supported_ops, vec!["Gemm".to_string()]);
    assert!(report.unsupported_ops.is_empty());
}

#[test]
fn concat_of_two_scalars_uses_selector_linears() {
    let mut b = OnnxModelBuilder::new("c", "x", &[1, 2]);
    b.float_initializer("Wa", &[1, 2], &[1.0, 1.0])
        .float_initializer("Wb", &[1, 2], &[1.0, -1.0])
        .node("a", "Gemm", &["x", "Wa"], &["ya"], vec![attr_int("transB", 1)])
        .node("ra", "Relu", &["ya"], &["za"], vec![])
        .node("b", "Gemm", &["x", "Wb"], &["yb"], vec![attr_int("transB", 1)])
        .node("rb", "Relu", &["yb"], &["zb"], vec![])
        .node("cat", "Concat", &["za", "zb"], &["y"], vec![attr_int("axis", 1)]);
    let (net, _) = import_onnx(&encode_model(&b.finish("y", &[1, 2]))).unwrap();
    let parts = linears_into_sum(&net);
    assert_eq!(parts.len(), 2);
    assert_eq!(parts[0].0, array![[1.0], [0.0]]);
    assert_eq!(parts[1].0, array![[0.0], [1.0]]);
    let stacked = ndarray::concatenate![ndarray::Axis(1), parts[0].0, parts[1].0];
    assert_eq!(stacked, ndarray::Array2::<f64>::eye(2));
    let y = forward(&net, &array![2.0, 1.0]).unwrap();
    assert_eq!(y, array![3.0, 1.0]);
}

#[test]
fn add_of_two_vectors_uses_identity_linears() {
    let mut b = OnnxModelBuilder::new("a", "x", &[1, 2]);
    b.float_initializer("W", &[2, 2], &[1.0, 2.0, 3.0, 4.0])
        .node("fc", "Gemm", &["x", "W"], &["h"], vec![attr_int("transB", 1)])
        .node("r", "Relu", &["h"], &["z"], vec![])
        .node("add", "Add", &["z", "x"], &["y"], vec![]);
    let (net, _) = import_onnx(&encode_model(&b.finish("y", &[1, 2]))).unwrap();
    let parts = linears_into_sum(&net);
    assert_eq!(parts.len(), 2);
    for (w, bias) in &parts {
        assert_eq!(w, &ndarray::Array2::<f64>::eye(2));
        assert_eq!(bias, &array![0.0, 0.0]);
    }
    let y = forward(&net, &array![1.0, -1.0]).unwrap();
    assert_eq!(y, array![1.0, -1.0]);
}

#[test]
fn sigmoid_is_reported() {
    let mut b = OnnxModelBuilder::new("s", "x", &[1, 2]);
    b.float_initializer("W", &[2, 2], &[1.0, 0.0, 0.0, 1.0])
        .node("fc", "Gemm", &["x", "W"], &["h"], vec![attr_int("transB", 1)])
        .node("squash", "Sigmoid", &["h"], &["y"], vec![]);
    match import_onnx(&encode_model(&b.finish("y", &[1, 2]))) {
        Err(OnnxError::Unsupported(r)) => {
            assert_eq!(r.unsupported_ops.len(), 1);
            assert_eq!(r.unsupported_ops[0].node, "squash");
            assert_eq!(r.unsupported_ops[0].op_type, "Sigmoid");
        }
        other => panic!("expected Unsupported, got {other:?}"),
    }
}

#[test]
fn product_of_two_tensors_is_reported() {
    let mut b = OnnxModelBuilder::new("m", "x", &[1, 2]);
    b.float_initializer("W", &[2, 2], &[1.0, 0.0, 0.0, 1.0])
        .node("fc", "Gemm", &["x", "W"], &["h"], vec![attr_int("transB", 1)])
        .node("prod", "Mul", &["h", "x"], &["y"], vec![]);
    match import_onnx(&encode_model(&b.finish("y", &[1, 2]))) {
        Err(OnnxError::Unsupported(r)) => {
            let names: Vec<_> = r.unsupported_ops.iter().map(|u| u.node.as_str()).collect();
            assert_eq!(names, ["prod"]);
        }
        other => panic!("expected Unsupported, got {other:?}"),
    }
}

#[test]
fn scaling_by_a_constant_is_supported() {
    let mut b = OnnxModelBuilder::new("m", "x", &[1, 2]);
    b.float_initializer("k", &[2], &[2.0, -3.0])
        .node("scale", "Mul", &["x", "k"], &["y"], vec![]);
    let (net, _) = import_onnx(&encode_model(&b.finish("y", &[1, 2]))).unwrap();
    assert_eq!(forward(&net, &array![1.0, 1.0]).unwrap(), array![2.0, -3.0]);
}

fn small_cnn(rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut data = |n: usize, s: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(-s..s)).collect() };
    let (k1, b1, k2, bn_s, bn_b, bn_m, bn_v, w, fb) = (
        data(4 * 2 * 3 * 3, 0.5),
        data(4, 0.1),
        data(3 * 4 * 2 * 2, 0.5),
        data(3, 1.0),
        data(3, 0.2),
        data(3, 0.2),
        data(3, 0.5),
        data(5 * 12, 0.4),
        data(5, 0.1),
    );
    let bn_v: Vec<f64> = bn_v.iter().map(|v| v.abs() + 0.5).collect();
    let mut b = OnnxModelBuilder::new("cnn", "img", &[1, 2, 6, 6]);
    b.float_initializer("k1", &[4, 2, 3, 3], &k1)
        .float_initializer("b1", &[4], &b1)
        .float_initializer("k2", &[3, 4, 2, 2], &k2)
        .float_initializer("s", &[3], &bn_s)
        .float_initializer("bb", &[3], &bn_b)
        .float_initializer("m", &[3], &bn_m)
        .float_initializer("v", &[3], &bn_v)
        .float_initializer("W", &[12, 5], &w)
        .float_initializer("fb", &[5], &fb)
        .node("conv1", "Conv", &["img", "k1", "b1"], &["c1"], vec![attr_ints("pads", &[1, 1, 1, 1])])
        .node("relu1", "Relu", &["c1"], &["r1"], vec![])
        .node(
            "pool",
            "MaxPool",
            &["r1"],
            &["p1"],
            vec![attr_ints("kernel_shape", &[2, 2]), attr_ints("strides", &[2, 2])],
        )
        .node("conv2", "Conv", &["p1", "k2"], &["c2"], vec![])
        .node("bn", "BatchNormalization", &["c2", "s", "bb", "m", "v"], &["n2"], vec![])
        .node("relu2", "Relu", &["n2"], &["r2"], vec![])
        .node("flat", "Flatten", &["r2"], &["f"], vec![])
        .node("fc", "MatMul", &["f", "W"], &["h"], vec![])
        .node("bias", "Add", &["h", "fb"], &["out"], vec![]);
    encode_model(&b.finish("out", &[1, 5]))
}

#[test]
fn cnn_import_matches_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let bytes = small_cnn(&mut rng);
    let model = decode_model(&bytes).unwrap();
    let (net, report) = import_onnx(&bytes).unwrap();
    assert_eq!(report.input_shape, vec![1, 2, 6, 6]);
    assert_eq!(net.input_width(), 72);
    assert_eq!(net.output_width(), 5);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..72).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direct = reference_eval(&model, &ArrayD::from_shape_vec(IxDyn(&[1, 2, 6, 6]), x.clone()).unwrap()).unwrap();
        let lowered = forward(&net, &DenseVector::from(x)).unwrap();
        for (a, b) in direct.iter().zip(lowered.iter()) {
            worst = worst.max((a - b).abs());
        }
    }
    assert!(worst <= 1e-4, "max deviation {worst}");
}

#[test]
fn reduced_example_exports_as_gemm_relu_gemm() {
    let bytes = export_onnx(&worked_example_reduced()).unwrap();
    let graph = decode_model(&bytes).unwrap().graph.unwrap();
    let ops: Vec<_> = graph.node.iter().map(|n| n.op_type.as_str()).collect();
    assert_eq!(ops, ["Gemm", "Relu", "Gemm"]);
    assert_eq!(graph.input.len(), 1);
    assert_eq!(graph.output.len(), 1);
    assert!(graph.initializer.iter().all(|t| t.data_type == 1));
}

#[test]
fn export_rejects_dag() {
    let net = redkit::fixtures::residual_block(1, 0).network;
    assert!(matches!(export_onnx(&net), Err(OnnxError::NotSequential(_))));
}

#[test]
fn round_trip_keeps_widths_and_values() {
    let net = worked_example_reduced();
    let (back, _) = import_onnx(&export_onnx(&net).unwrap()).unwrap();
    let a = SequentialNet::from_network(&net).unwrap();
    let b = SequentialNet::from_network(&back).unwrap();
    assert_eq!(a.relu_widths(), b.relu_widths());
    assert_eq!(a.output_width(), b.output_width());
    for x in uniform_samples(&unit_box_2d(), 100, 3) {
        let d = (&a.forward(&x).unwrap() - &b.forward(&x).unwrap()).mapv(f64::abs);
        assert!(d.iter().all(|&v| v <= 1e-6));
    }
}
