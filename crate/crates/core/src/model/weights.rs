//! Weights directory: a `manifest.txt` describing every layer plus one
//! `TEN1` blob per weight and bias tensor.
//!
//! ```text
//! odisal-weights 1
//! norm_mean 127.5 127.5 127.5
//! layer conv1 conv 3 96 7 1 3 relu
//! ...
//! ```

use std::fs;
use std::path::Path;

use super::network::SalNet;
use crate::error::{Error, Result};
use crate::nn::{decode_tensor, encode_tensor, Activation, LayerKind, LayerSpec};

pub const MANIFEST_FILE: &str = "manifest.txt";
const HEADER: &str = "odisal-weights 1";

fn activation_str(a: Activation) -> &'static str {
    match a {
        Activation::Relu => "relu",
        Activation::None => "none",
    }
}

fn spec_line(s: &LayerSpec) -> String {
    format!(
        "layer {} {} {} {} {} {} {} {}",
        s.name,
        s.kind.as_str(),
        s.in_depth,
        s.out_depth,
        s.kernel,
        s.stride,
        s.padding,
        activation_str(s.activation)
    )
}

fn parse_spec(line: &str) -> Option<LayerSpec> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 9 || f[0] != "layer" {
        return None;
    }
    let n = |i: usize| f[i].parse::<usize>().ok();
    Some(LayerSpec {
        name: f[1].to_owned(),
        kind: LayerKind::parse(f[2])?,
        in_depth: n(3)?,
        out_depth: n(4)?,
        kernel: n(5)?,
        stride: n(6)?,
        padding: n(7)?,
        activation: match f[8] {
            "relu" => Activation::Relu,
            "none" => Activation::None,
            _ => return None,
        },
    })
}

/// Writes `net` into `dir`, creating it if needed. Values are stored as
/// `f32`; saving a loaded network reproduces the files byte for byte.
pub fn save_weights(net: &SalNet, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest = format!("{HEADER}\nnorm_mean");
    for m in &net.norm_mean {
        manifest.push_str(&format!(" {m:e}"));
    }
    manifest.push('\n');
    for s in net.architecture().all_layers() {
        manifest.push_str(&spec_line(s));
        manifest.push('\n');
    }
    for stack in [net.base(), net.refine()] {
        for l in stack.layers() {
            if let (Some(w), Some(b)) = (&l.weight, &l.bias) {
                fs::write(dir.join(format!("{}.weight.ten", l.spec.name)), encode_tensor(w))?;
                fs::write(dir.join(format!("{}.bias.ten", l.spec.name)), encode_tensor(b))?;
            }
        }
    }
    fs::write(dir.join(MANIFEST_FILE), manifest)?;
    Ok(())
}

pub fn load_weights(dir: impl AsRef<Path>) -> Result<SalNet> {
    let dir = dir.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path)?;
    let corrupt = |reason: String| Error::CorruptFile {
        path: manifest_path.clone(),
        reason,
    };
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next() != Some(HEADER) {
        return Err(corrupt("missing header".into()));
    }
    let mean_line = lines.next().ok_or_else(|| corrupt("missing norm_mean".into()))?;
    let mut mf = mean_line.split_whitespace();
    if mf.next() != Some("norm_mean") {
        return Err(corrupt("missing norm_mean".into()));
    }
    let norm_mean = mf
        .map(|v| v.parse::<f64>().map_err(|_| corrupt(format!("bad mean value {v:?}"))))
        .collect::<Result<Vec<_>>>()?;
    if !(norm_mean.len() == 1 || norm_mean.len() == 3) {
        return Err(corrupt("norm_mean needs one or three values".into()));
    }
    let specs = lines
        .map(|l| parse_spec(l).ok_or_else(|| corrupt(format!("bad layer line {l:?}"))))
        .collect::<Result<Vec<_>>>()?;

    let mut net = SalNet::zeroed();
    net.norm_mean = norm_mean;
    let expected: Vec<LayerSpec> = net.architecture().all_layers().cloned().collect();
    if specs.len() != expected.len() {
        return Err(Error::ArchitectureMismatch(format!(
            "manifest lists {} layers, expected {}",
            specs.len(),
            expected.len()
        )));
    }
    for (got, want) in specs.iter().zip(&expected) {
        if got != want {
            return Err(Error::ArchitectureMismatch(format!(
                "manifest has `{}`, expected `{}`",
                spec_line(got),
                spec_line(want)
            )));
        }
    }
    for refine in [false, true] {
        let stack = if refine { net.refine_mut() } else { net.base_mut() };
        let names: Vec<String> = stack.layers().iter().map(|l| l.spec.name.clone()).collect();
        for name in names {
            let layer = stack.layer_mut(&name).expect("layer exists");
            for (slot, what) in [(&mut layer.weight, "weight"), (&mut layer.bias, "bias")] {
                let Some(cur) = slot.as_mut() else { continue };
                let path = dir.join(format!("{name}.{what}.ten"));
                let t = decode_tensor(&fs::read(&path)?, &path)?;
                if t.shape() != cur.shape() {
                    return Err(Error::ArchitectureMismatch(format!(
                        "{name} {what} has shape {:?}, expected {:?}",
                        t.shape(),
                        cur.shape()
                    )));
                }
                *cur = t;
            }
        }
    }
    Ok(net)
}
