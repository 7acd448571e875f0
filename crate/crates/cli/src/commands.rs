use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use redkit::bound_engine::compute_bounds;
use redkit::equivalence::{grid_equivalence, sample_equivalence};
use redkit::generator::{generate, GenParams};
use redkit::net_ir::{LayerKind, SequentialNet};
use redkit::onnx_bridge::export_onnx;
use redkit::reducer::{reduce_sequential, ReductionConfig};
use redkit::spec_io::{emit_vnnlib, PropertySpec};
use redkit::verify_harness::{bench_pair, run_verify, Status, VerifyError, VerifyMode};
use tracing::info;

use crate::error::{CliError, EXIT_NEGATIVE};
use crate::inputs::{self, input_box, load_model, property, require_box, sequential};
use crate::{
    BenchArgs, BoundsArgs, EquivArgs, GenArgs, ReduceArgs, SearchArgs, SimplifyArgs, StatsArgs, VerifyArgs,
};

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => inputs::write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn negative() -> ExitCode {
    ExitCode::from(EXIT_NEGATIVE)
}

pub fn reduce(a: &ReduceArgs) -> Result<ExitCode, CliError> {
    let net = load_model(&a.model)?;
    let bx = require_box(&a.property)?;
    let (seq, _) = sequential(&net, Some(&bx))?;
    let cfg = ReductionConfig {
        method: a.bounds.method(),
        shift: a.shift(),
        merge: a.merge(),
    };
    let red = reduce_sequential(&seq, &bx, &cfg).map_err(CliError::internal)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Usage(format!("cannot create {}: {e}", a.out.display())))?;
    inputs::write(&a.out.join("reduced.onnx"), export_onnx(&red.network())?)?;
    inputs::write(&a.out.join("report.csv"), red.report.to_csv())?;
    let r = &red.report;
    println!("relu_before,relu_after,ratio,reduction_time_s");
    println!("{},{},{:.4},{:.6}", r.relu_before, r.relu_after, r.ratio(), r.elapsed.as_secs_f64());
    Ok(ExitCode::SUCCESS)
}

pub fn simplify(a: &SimplifyArgs) -> Result<ExitCode, CliError> {
    let net = load_model(&a.model)?;
    let bx = input_box(&a.property)?;
    let (seq, constructions) = sequential(&net, bx.as_ref())?;
    inputs::write(&a.out, export_onnx(&seq.to_network())?)?;
    let widths: Vec<String> = seq.layers().iter().map(|m| format!("{}x{}", m.out_width(), m.in_width())).collect();
    println!("affine_maps,relu_neurons,constructions,shapes");
    println!("{},{},{},{}", seq.layers().len(), seq.relu_count(), constructions, widths.join(" "));
    Ok(ExitCode::SUCCESS)
}

pub fn gen(a: &GenArgs) -> Result<ExitCode, CliError> {
    let p = GenParams {
        layers: a.layers,
        width: a.width,
        input_dim: a.input_dim,
        output_dim: a.outputs,
        stable_fraction: a.stable_fraction,
        margin: a.margin,
        eps: a.eps,
        seed: a.seed,
    };
    let g = generate(&p).map_err(CliError::usage)?;
    let y = g.network.forward(&g.sidecar.center.clone().into()).map_err(CliError::internal)?;
    let label = y
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > y[best] { i } else { best });
    let spec = PropertySpec::robustness(g.sidecar.input_box(), label, p.output_dim).map_err(CliError::internal)?;
    inputs::write(&a.out, export_onnx(&g.network.to_network())?)?;
    let json = serde_json::to_string_pretty(&g.sidecar).map_err(CliError::internal)?;
    inputs::write(&a.out.with_extension("json"), json + "\n")?;
    let center: String = g.sidecar.center.iter().map(|c| format!("{c}\n")).collect();
    inputs::write(&a.out.with_extension("center.csv"), center)?;
    inputs::write(&a.out.with_extension("vnnlib"), emit_vnnlib(&spec).map_err(CliError::internal)?)?;
    println!("relu_neurons,planted_stable,label");
    println!("{},{},{}", g.network.relu_count(), g.sidecar.planted_count(), label);
    Ok(ExitCode::SUCCESS)
}

pub fn stats(a: &StatsArgs) -> Result<ExitCode, CliError> {
    let net = load_model(&a.model)?;
    let count = |f: fn(&LayerKind) -> bool| net.layers().iter().filter(|l| f(&l.kind)).count();
    let mut out = String::from("key,value\n");
    let _ = writeln!(out, "input_width,{}", net.input_width());
    let _ = writeln!(out, "output_width,{}", net.output_width());
    let _ = writeln!(out, "linear_layers,{}", count(|k| matches!(k, LayerKind::Linear { .. })));
    let _ = writeln!(out, "relu_layers,{}", count(|k| matches!(k, LayerKind::Relu)));
    let _ = writeln!(out, "sum_layers,{}", count(|k| matches!(k, LayerKind::Sum)));
    let _ = writeln!(out, "relu_neurons,{}", net.relu_count());
    let _ = writeln!(out, "sequential,{}", net.is_sequential());
    if let Ok(seq) = SequentialNet::from_network(&net) {
        let w: Vec<String> = seq.relu_widths().iter().map(usize::to_string).collect();
        let _ = writeln!(out, "relu_widths,{}", w.join(" "));
    }
    print!("{out}");
    Ok(ExitCode::SUCCESS)
}

pub fn bounds(a: &BoundsArgs) -> Result<ExitCode, CliError> {
    let net = load_model(&a.model)?;
    let bx = require_box(&a.property)?;
    let (seq, _) = sequential(&net, Some(&bx))?;
    let method = a.bounds.method();
    let table = compute_bounds(&seq, &bx, method).map_err(CliError::usage)?;
    let mut out = String::from("layer_index,neuron_index,lower,upper,method\n");
    for (k, b) in table.layers.iter().enumerate() {
        for (i, (l, u)) in b.lower.iter().zip(b.upper.iter()).enumerate() {
            let _ = writeln!(out, "{k},{i},{l},{u},{}", method.name());
        }
    }
    emit(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}

pub fn equiv(a: &EquivArgs) -> Result<ExitCode, CliError> {
    let (x, y) = (load_model(&a.model)?, load_model(&a.other)?);
    let bx = require_box(&a.property)?;
    let r = match a.grid {
        Some(k) => grid_equivalence(&x, &y, &bx, k),
        None => sample_equivalence(&x, &y, &bx, a.samples, a.seed),
    }
    .map_err(CliError::usage)?;
    println!("samples,max_abs_diff,argmax_mismatches,equivalent");
    println!("{},{:e},{},{}", r.samples, r.max_abs_diff, r.argmax_mismatches, r.within(a.tolerance));
    if !r.within(a.tolerance) {
        eprintln!("largest difference at {}", r.worst_input);
        return Ok(negative());
    }
    Ok(ExitCode::SUCCESS)
}

fn mode(s: &SearchArgs) -> Result<VerifyMode, CliError> {
    if !(s.timeout > 0.0 && s.timeout.is_finite()) {
        return Err(CliError::Usage(format!("--timeout must be positive, got {}", s.timeout)));
    }
    Ok(if s.bab {
        VerifyMode::BranchAndBound {
            timeout_s: s.timeout,
            max_splits: s.max_splits,
        }
    } else {
        VerifyMode::Incomplete
    })
}

fn verify_error(e: VerifyError) -> CliError {
    match e {
        VerifyError::Width { .. } => CliError::usage(e),
        VerifyError::NotEquivalent(_) => CliError::Usage(format!("{e}; the reduced model does not match")),
        _ => CliError::internal(e),
    }
}

pub fn verify(a: &VerifyArgs) -> Result<ExitCode, CliError> {
    let net = load_model(&a.model)?;
    let bx = input_box(&a.property)?;
    let (seq, _) = sequential(&net, bx.as_ref())?;
    let spec = property(&a.property, &seq)?;
    let v = run_verify(&seq, &spec, a.bounds.method(), mode(&a.search)?).map_err(verify_error)?;
    println!("verdict,splits,time_s,bound");
    println!("{},{},{:.6},{}", v.status, v.splits_used, v.wall_time_s, v.bound_achieved);
    Ok(if v.status == Status::Verified { ExitCode::SUCCESS } else { negative() })
}

pub fn bench(a: &BenchArgs) -> Result<ExitCode, CliError> {
    let net = load_model(&a.model)?;
    let bx = input_box(&a.property)?;
    let (seq, _) = sequential(&net, bx.as_ref())?;
    let spec = property(&a.property, &seq)?;
    let method = a.bounds.method();
    let reduced = match &a.reduced {
        Some(p) => sequential(&load_model(p)?, Some(&spec.input_box))?.0,
        None => {
            let start = Instant::now();
            let cfg = ReductionConfig {
                method,
                ..Default::default()
            };
            let red = reduce_sequential(&seq, &spec.input_box, &cfg).map_err(CliError::internal)?;
            info!(elapsed = ?start.elapsed(), after = red.report.relu_after, "reduced");
            red.sequential
        }
    };
    let r = bench_pair(&seq, &reduced, &spec, method, mode(&a.search)?, a.repeats).map_err(verify_error)?;
    let name = a
        .property
        .vnnlib
        .as_ref()
        .and_then(|p| p.file_stem())
        .map_or_else(|| "eps_ball".to_string(), |s| s.to_string_lossy().into_owned());
    let mut out = String::from("property,net_variant,verdict,time_s,splits\n");
    for (variant, v, t) in [("original", &r.original, r.original_median_s), ("reduced", &r.reduced, r.reduced_median_s)] {
        let _ = writeln!(out, "{name},{variant},{},{t:.6},{}", v.status, v.splits_used);
    }
    let _ = writeln!(out, "# speedup={:.3} verdicts_agree={}", r.speedup, r.verdicts_agree);
    emit(a.out.as_deref(), &out)?;
    Ok(ExitCode::SUCCESS)
}
