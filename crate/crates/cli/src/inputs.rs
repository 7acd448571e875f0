use std::fs;
use std::path::Path;

use redkit::bound_engine::InputBox;
use redkit::net_ir::{Network, SequentialNet};
use redkit::onnx_bridge::import_onnx;
use redkit::simplifier::{simplify, SimplifyError};
use redkit::spec_io::{epsilon_ball, parse_center, parse_vnnlib, PropertySpec};
use tracing::info;

use crate::error::CliError;
use crate::PropertyArgs;

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<Network, CliError> {
    let (net, report) = import_onnx(&read(path)?)?;
    info!(model = %path.display(), ops = ?report.supported_ops, "imported");
    Ok(net)
}

/// The model as a Linear/ReLU chain, simplifying it first if needed.
/// Returns the number of construction steps the simplifier ran.
pub fn sequential(net: &Network, bx: Option<&InputBox>) -> Result<(SequentialNet, usize), CliError> {
    if let Ok(seq) = SequentialNet::from_network(net) {
        return Ok((seq, 0));
    }
    let s = simplify(net, bx).map_err(|e| match e {
        SimplifyError::NeedsInputBox(_) | SimplifyError::BoxWidth { .. } => {
            CliError::Usage(format!("{e}; pass --vnnlib or --center with --eps"))
        }
        SimplifyError::TooManyConstructions { .. } | SimplifyError::Net(_) => CliError::internal(e),
        _ => CliError::Unsupported(format!("cannot simplify model: {e}")),
    })?;
    info!(constructions = s.constructions, linearizations = s.linearizations, "simplified");
    let seq = SequentialNet::from_network(&s.network).map_err(CliError::internal)?;
    Ok((seq, s.constructions))
}

fn center_box(p: &PropertyArgs) -> Result<Option<(Vec<f64>, InputBox)>, CliError> {
    let (Some(path), Some(eps)) = (&p.center, p.eps) else {
        return Ok(None);
    };
    let c = parse_center(&read_text(path)?).map_err(CliError::usage)?;
    let bx = epsilon_ball(&c, eps, p.clip).map_err(CliError::usage)?;
    Ok(Some((c.to_vec(), bx)))
}

/// The input box named by the property flags, if any.
pub fn input_box(p: &PropertyArgs) -> Result<Option<InputBox>, CliError> {
    if let Some(path) = &p.vnnlib {
        let spec = parse_vnnlib(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        return Ok(Some(spec.input_box));
    }
    Ok(center_box(p)?.map(|(_, b)| b))
}

pub fn require_box(p: &PropertyArgs) -> Result<InputBox, CliError> {
    input_box(p)?.ok_or_else(|| CliError::Usage("an input region is required: --vnnlib, or --center with --eps".into()))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The property to check on `net`. For an ε-ball, robustness of `--label`,
/// or of the class `net` predicts at the centre.
pub fn property(p: &PropertyArgs, net: &SequentialNet) -> Result<PropertySpec, CliError> {
    let spec = if let Some(path) = &p.vnnlib {
        parse_vnnlib(&read_text(path)?).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
    } else {
        let Some((c, bx)) = center_box(p)? else {
            return Err(CliError::Usage("a property is required: --vnnlib, or --center with --eps".into()));
        };
        if c.len() != net.input_width() {
            return Err(CliError::Usage(format!(
                "centre has {} values, model takes {} inputs",
                c.len(),
                net.input_width()
            )));
        }
        let label = match p.label {
            Some(l) => l,
            None => argmax(net.forward(&c.into()).map_err(CliError::internal)?.as_slice().expect("contiguous")),
        };
        PropertySpec::robustness(bx, label, net.output_width()).map_err(CliError::usage)?
    };
    if spec.input_width() != net.input_width() || spec.output_width != net.output_width() {
        return Err(CliError::Usage(format!(
            "property has {} inputs and {} outputs, model has {} and {}",
            spec.input_width(),
            spec.output_width,
            net.input_width(),
            net.output_width()
        )));
    }
    Ok(spec)
}
