//! Checkpoints: `model.json` describes the architecture and parameter
//! shapes, `model.bin` holds the named tensors.

use std::fs;
use std::path::Path;

use pigano_core::autodiff::Tensor;
use pigano_core::models::{parse_pool, pool_name, Architecture, ModelState};
use serde::{Deserialize, Serialize};

use crate::codec::{self, Kind, Writer, FORMAT_VERSION};
use crate::error::{format_err, io_err, Error, Result};

pub const DESCRIPTOR: &str = "model.json";
pub const PARAMS: &str = "model.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchDescriptor {
    pub kind: String,
    pub problem: String,
    pub width: usize,
    pub operator_layers: usize,
    pub encoder_layers: usize,
    pub fusion: String,
    pub pooling: String,
    pub geo_input: String,
    pub branch_rows: usize,
    pub coord_scale: f64,
}

impl From<&Architecture> for ArchDescriptor {
    fn from(a: &Architecture) -> Self {
        Self {
            kind: a.kind.name().into(),
            problem: a.problem.name().into(),
            width: a.width,
            operator_layers: a.operator_layers,
            encoder_layers: a.encoder_layers,
            fusion: a.fusion.name().into(),
            pooling: pool_name(a.pooling).into(),
            geo_input: a.geo_input.name().into(),
            branch_rows: a.branch_rows,
            coord_scale: a.coord_scale,
        }
    }
}

impl ArchDescriptor {
    pub fn architecture(&self) -> Result<Architecture> {
        let a = Architecture {
            kind: self.kind.parse()?,
            problem: self.problem.parse()?,
            width: self.width,
            operator_layers: self.operator_layers,
            encoder_layers: self.encoder_layers,
            fusion: self.fusion.parse()?,
            pooling: parse_pool(&self.pooling)?,
            geo_input: self.geo_input.parse()?,
            branch_rows: self.branch_rows,
            coord_scale: self.coord_scale,
        };
        a.validate()?;
        Ok(a)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub format_version: u32,
    pub arch: ArchDescriptor,
    pub params: Vec<ParamEntry>,
}

pub fn save_checkpoint(dir: &Path, state: &ModelState) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let desc = Descriptor {
        format_version: FORMAT_VERSION,
        arch: state.arch().into(),
        params: state
            .named()
            .map(|(n, t)| ParamEntry {
                name: n.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let mut w = Writer::new(Kind::Params);
    w.u64(state.params().len() as u64);
    for (name, t) in state.named() {
        w.str(name);
        w.u64(t.rows() as u64);
        w.u64(t.cols() as u64);
        w.f64s(t.data());
    }
    codec::write_atomic(&dir.join(PARAMS), &w.finish())?;
    let json = serde_json::to_string_pretty(&desc).map_err(|e| format_err(dir.join(DESCRIPTOR), e.to_string()))?;
    codec::write_atomic(&dir.join(DESCRIPTOR), json.as_bytes())
}

pub fn read_descriptor(dir: &Path) -> Result<Descriptor> {
    let path = dir.join(DESCRIPTOR);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let d: Descriptor = serde_json::from_str(&text).map_err(|e| format_err(&path, e.to_string()))?;
    if d.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            path,
            found: d.format_version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(d)
}

fn read_params(dir: &Path) -> Result<Vec<(String, Tensor)>> {
    let path = dir.join(PARAMS);
    let bytes = codec::read_file(&path)?;
    let mut r = codec::open(&bytes, &path, Kind::Params, || format_err(&path, "checksum mismatch"))?;
    let n = r.count()?;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let name = r.str()?;
        let rows = r.count()?;
        let cols = r.count()?;
        let t = Tensor::matrix(rows, cols, r.f64s()?)?;
        out.push((name, t));
    }
    r.finish()?;
    Ok(out)
}

/// Loads a checkpoint with the architecture it records.
pub fn load_checkpoint(dir: &Path) -> Result<ModelState> {
    let desc = read_descriptor(dir)?;
    let arch = desc.arch.architecture()?;
    load_with(dir, &desc, arch)
}

/// Loads a checkpoint into `arch`; any name or shape disagreement is an error.
pub fn load_checkpoint_as(dir: &Path, arch: &Architecture) -> Result<ModelState> {
    let desc = read_descriptor(dir)?;
    load_with(dir, &desc, arch.clone())
}

fn load_with(dir: &Path, desc: &Descriptor, arch: Architecture) -> Result<ModelState> {
    let named = read_params(dir)?;
    let listed: Vec<(&str, &[usize])> = desc.params.iter().map(|p| (p.name.as_str(), p.shape.as_slice())).collect();
    let stored: Vec<(&str, &[usize])> = named.iter().map(|(n, t)| (n.as_str(), t.shape())).collect();
    if listed != stored {
        return Err(format_err(dir.join(DESCRIPTOR), "descriptor does not match the stored tensors"));
    }
    Ok(ModelState::from_named(arch, named)?)
}
