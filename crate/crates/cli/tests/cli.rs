use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use redkit::fixtures::worked_example;
use redkit::net_ir::{NetworkBuilder, SequentialNet};
use redkit::onnx_bridge::{attr_int, encode_model, export_onnx, import_onnx, OnnxModelBuilder};
use tempfile::TempDir;

fn redkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_redkit"))
        .args(args)
        .env_remove("REDKIT_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Example {
    dir: TempDir,
    model: PathBuf,
    center: PathBuf,
}

fn example() -> Example {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("example.onnx");
    fs::write(&model, export_onnx(&worked_example()).unwrap()).unwrap();
    let center = dir.path().join("center.csv");
    fs::write(&center, "0\n0\n").unwrap();
    Example { dir, model, center }
}

fn vnnlib(dir: &Path, name: &str, out_assert: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(
        &path,
        format!(
            "(declare-const X_0 Real)\n(declare-const X_1 Real)\n(declare-const Y_0 Real)\n(declare-const Y_1 Real)\n\
             (assert (>= X_0 -1))\n(assert (<= X_0 1))\n(assert (>= X_1 -1))\n(assert (<= X_1 1))\n{out_assert}\n"
        ),
    )
    .unwrap();
    path
}

#[test]
fn reduce_worked_example() {
    let f = example();
    let out = f.dir.path().join("red");
    let o = redkit(&["reduce", "--model", p(&f.model), "--center", p(&f.center), "--eps", "1", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("5,3,1.6667,"));
    let report = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(report.contains("\n0,5,1,3,1,3\n"));
    let (net, _) = import_onnx(&fs::read(out.join("reduced.onnx")).unwrap()).unwrap();
    assert_eq!(net.relu_count(), 3);

    let o = redkit(&[
        "equiv", "--model", p(&f.model), "--other", p(&out.join("reduced.onnx")),
        "--center", p(&f.center), "--eps", "1", "--grid", "21",
    ]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("441,"));
}

#[test]
fn bounds_table() {
    let f = example();
    let o = redkit(&["bounds", "--model", p(&f.model), "--center", p(&f.center), "--eps", "1", "--method", "interval"]);
    assert_eq!(code(&o), 0);
    let s = stdout(&o);
    assert!(s.starts_with("layer_index,neuron_index,lower,upper,method\n"));
    for row in ["0,0,-4,0,interval", "0,1,1,5,interval", "0,2,0,4,interval", "0,3,0,4,interval", "0,4,-2,2,interval"] {
        assert!(s.contains(row), "{row} missing from\n{s}");
    }
}

#[test]
fn equiv_detects_offset() {
    let f = example();
    let mut seq = SequentialNet::from_network(&worked_example()).unwrap().into_layers();
    seq[1].bias[1] += 1.0;
    let shifted = f.dir.path().join("shifted.onnx");
    fs::write(&shifted, export_onnx(&SequentialNet::new(2, seq).unwrap().to_network()).unwrap()).unwrap();
    let o = redkit(&["equiv", "--model", p(&f.model), "--other", p(&shifted), "--center", p(&f.center), "--eps", "1"]);
    assert_eq!(code(&o), 1);
    let d: f64 = stdout(&o).lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((d - 1.0).abs() < 1e-12, "{d}");
}

#[test]
fn verify_exit_codes() {
    let f = example();
    let holds = vnnlib(f.dir.path(), "holds.vnnlib", "(assert (>= Y_0 Y_1))");
    let fails = vnnlib(f.dir.path(), "fails.vnnlib", "(assert (<= Y_0 Y_1))");
    let o = redkit(&["verify", "--model", p(&f.model), "--vnnlib", p(&holds), "--method", "interval"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verified,0,"));
    let o = redkit(&["verify", "--model", p(&f.model), "--vnnlib", p(&fails)]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("unknown"));

    let lower = vnnlib(f.dir.path(), "lower.vnnlib", "(assert (<= Y_0 -3.0000001))");
    let o = redkit(&["verify", "--model", p(&f.model), "--vnnlib", p(&lower), "--method", "interval", "--bab"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("verified,1,"));
}

#[test]
fn usage_errors_exit_2() {
    let f = example();
    assert_eq!(code(&redkit(&["reduce", "--model", p(&f.model)])), 2);
    let v = vnnlib(f.dir.path(), "p.vnnlib", "(assert (>= Y_0 Y_1))");
    let both = redkit(&[
        "bounds", "--model", p(&f.model), "--vnnlib", p(&v), "--center", p(&f.center), "--eps", "1",
    ]);
    assert_eq!(code(&both), 2);
    let missing = redkit(&["stats", "--model", p(&f.dir.path().join("nope.onnx"))]);
    assert_eq!(code(&missing), 2);
    let bad = vnnlib(f.dir.path(), "bad.vnnlib", "(assert (< Y_0 Y_1))");
    let o = redkit(&["verify", "--model", p(&f.model), "--vnnlib", p(&bad)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 9"));
}

#[test]
fn unsupported_model_exit_3() {
    let dir = TempDir::new().unwrap();
    let mut b = OnnxModelBuilder::new("g", "x", &[1, 2]);
    b.node("s", "Sigmoid", &["x"], &["y"], vec![]);
    let path = dir.path().join("sig.onnx");
    fs::write(&path, encode_model(&b.finish("y", &[1, 2]))).unwrap();
    let o = redkit(&["stats", "--model", p(&path)]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("Sigmoid"));
}

#[test]
fn gen_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a.onnx"), dir.path().join("b.onnx"));
    for out in [&a, &b] {
        let o = redkit(&["gen", "--layers", "3", "--width", "32", "--seed", "9", "--out", p(out)]);
        assert_eq!(code(&o), 0);
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    for ext in ["json", "center.csv", "vnnlib"] {
        assert!(a.with_extension(ext).exists(), "{ext}");
    }
}

fn gen_and_reduce(dir: &Path, args: &[&str]) -> (usize, usize) {
    let model = dir.join("g.onnx");
    let mut gen = vec!["gen", "--out", p(&model)];
    gen.extend_from_slice(args);
    assert_eq!(code(&redkit(&gen)), 0);
    let out = dir.join("red");
    let o = redkit(&["reduce", "--model", p(&model), "--vnnlib", p(&model.with_extension("vnnlib")), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let line = stdout(&o).lines().nth(1).unwrap().to_string();
    let f: Vec<usize> = line.split(',').take(2).map(|v| v.parse().unwrap()).collect();
    (f[0], f[1])
}

#[test]
fn planted_half_reduces() {
    let dir = TempDir::new().unwrap();
    let (before, after) = gen_and_reduce(
        dir.path(),
        &["--layers", "4", "--width", "64", "--stable-fraction", "0.5", "--seed", "3"],
    );
    assert_eq!(before, 256);
    assert!(before as f64 / after as f64 >= 1.3, "{before} -> {after}");
}

#[test]
fn fully_stable_collapses() {
    let dir = TempDir::new().unwrap();
    let (_, after) = gen_and_reduce(dir.path(), &["--layers", "3", "--width", "32", "--stable-fraction", "1"]);
    assert_eq!(after, 0);
}

#[test]
fn all_unstable_ratio_one() {
    let dir = TempDir::new().unwrap();
    let mut b = NetworkBuilder::new();
    let x = b.input(2);
    let h = b.linear(x, ndarray::array![[1.0, 0.0], [0.0, 1.0]], ndarray::array![0.0, 0.0]);
    let r = b.relu(h);
    let y = b.linear(r, ndarray::array![[1.0, -1.0]], ndarray::array![0.0]);
    let model = dir.path().join("u.onnx");
    fs::write(&model, export_onnx(&b.finish(y).unwrap()).unwrap()).unwrap();
    let center = dir.path().join("c.csv");
    fs::write(&center, "0,0").unwrap();
    let o = redkit(&["reduce", "--model", p(&model), "--center", p(&center), "--eps", "1", "--out", p(&dir.path().join("r"))]);
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("2,2,1.0000,"));
}

#[test]
fn bench_csv() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("g.onnx");
    assert_eq!(
        code(&redkit(&["gen", "--layers", "3", "--width", "48", "--stable-fraction", "0.7", "--out", p(&model)])),
        0
    );
    let o = redkit(&["bench", "--model", p(&model), "--vnnlib", p(&model.with_extension("vnnlib")), "--repeats", "3"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = stdout(&o);
    let lines: Vec<&str> = s.lines().collect();
    assert_eq!(lines[0], "property,net_variant,verdict,time_s,splits");
    assert!(lines[1].starts_with("g,original,"));
    assert!(lines[2].starts_with("g,reduced,"));
    assert!(lines[3].starts_with("# speedup="));
}

#[test]
fn thread_cap() {
    let f = example();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_redkit"))
            .args(["equiv", "--model", p(&f.model), "--other", p(&f.model), "--center", p(&f.center), "--eps", "1"])
            .env("REDKIT_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("2")), 0);
    assert_eq!(code(&run("lots")), 2);
}

/// `y = W₂·ReLU(W₁·x) + x`.
fn residual_onnx() -> Vec<u8> {
    let mut b = OnnxModelBuilder::new("res", "x", &[1, 2]);
    b.float_initializer("w1", &[2, 2], &[1.0, -1.0, 0.5, 2.0]);
    b.float_initializer("b1", &[2], &[0.0, -0.5]);
    b.float_initializer("w2", &[2, 2], &[1.0, 2.0, -1.0, 1.0]);
    b.float_initializer("b2", &[2], &[0.25, 0.0]);
    b.node("g1", "Gemm", &["x", "w1", "b1"], &["h"], vec![attr_int("transB", 1)]);
    b.node("r", "Relu", &["h"], &["hr"], vec![]);
    b.node("g2", "Gemm", &["hr", "w2", "b2"], &["z"], vec![attr_int("transB", 1)]);
    b.node("add", "Add", &["z", "x"], &["y"], vec![]);
    encode_model(&b.finish("y", &[1, 2]))
}

#[test]
fn simplify_residual() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("res.onnx");
    fs::write(&model, residual_onnx()).unwrap();
    let out = dir.path().join("seq.onnx");
    assert_eq!(code(&redkit(&["simplify", "--model", p(&model), "--out", p(&out)])), 2);
    let center = dir.path().join("c.csv");
    fs::write(&center, "0.5\n-0.25\n").unwrap();
    let o = redkit(&["simplify", "--model", p(&model), "--center", p(&center), "--eps", "0.5", "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (net, _) = import_onnx(&fs::read(&out).unwrap()).unwrap();
    assert!(net.is_sequential());
    let o = redkit(&[
        "equiv", "--model", p(&model), "--other", p(&out), "--center", p(&center), "--eps", "0.5", "--grid", "21",
    ]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
}
