//! Parameter files: `<base>.bin` holds every tensor as little-endian `f64`
//! in row-major order; `<base>.manifest.json` lists names, shapes and
//! offsets (in floats) plus free-form metadata.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::numkit::{DenseNet, ParamSet, Tensor2};

const FORMAT: &str = "f64-le-row-major";

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Entry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    format: String,
    meta: serde_json::Value,
    tensors: Vec<Entry>,
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    let s = base.as_os_str().to_owned();
    let mut bin = s.clone();
    bin.push(".bin");
    let mut man = s;
    man.push(".manifest.json");
    (bin.into(), man.into())
}

pub fn save_params(base: &Path, params: &ParamSet, meta: &serde_json::Value) -> Result<()> {
    let (bin, man) = paths(base);
    let mut bytes = Vec::with_capacity(8 * params.param_count());
    let mut tensors = Vec::with_capacity(params.len());
    let mut offset = 0;
    for (name, t) in params.iter() {
        tensors.push(Entry {
            name: name.to_string(),
            rows: t.rows(),
            cols: t.cols(),
            offset,
        });
        offset += t.len();
        for x in t.as_slice() {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
    }
    let manifest = Manifest {
        format: FORMAT.into(),
        meta: meta.clone(),
        tensors,
    };
    if let Some(dir) = bin.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(&bin, bytes).map_err(|e| Error::io(&bin, e))?;
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&man, text).map_err(|e| Error::io(&man, e))
}

pub fn load_params(base: &Path) -> Result<(ParamSet, serde_json::Value)> {
    let (bin, man) = paths(base);
    let text = fs::read_to_string(&man).map_err(|e| Error::io(&man, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", man.display())))?;
    contract!(
        manifest.format == FORMAT,
        "unsupported checkpoint format `{}`",
        manifest.format
    );
    let bytes = fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    contract!(bytes.len() % 8 == 0, "{} is not a whole number of f64", bin.display());
    let floats: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut params = ParamSet::new();
    for e in manifest.tensors {
        let end = e.offset + e.rows * e.cols;
        contract!(end <= floats.len(), "tensor `{}` runs past the end of the data", e.name);
        params.push(
            e.name,
            Tensor2::from_vec(e.rows, e.cols, floats[e.offset..end].to_vec())?,
        );
    }
    Ok((params, manifest.meta))
}

/// Named networks bundled into one parameter file.
#[derive(Clone, Debug)]
pub struct Checkpoint {
    pub params: ParamSet,
    pub meta: serde_json::Value,
}

impl Checkpoint {
    /// Tensors are stored as `<net>.<tensor>`.
    pub fn from_nets(names: &[&str], nets: &[&DenseNet], meta: serde_json::Value) -> Self {
        let mut params = ParamSet::new();
        for (n, net) in names.iter().zip(nets) {
            for (t, x) in net.params().iter() {
                params.push(format!("{n}.{t}"), x.clone());
            }
        }
        Self { params, meta }
    }

    pub fn save(&self, base: &Path) -> Result<()> {
        save_params(base, &self.params, &self.meta)
    }

    pub fn load(base: &Path) -> Result<Self> {
        let (params, meta) = load_params(base)?;
        Ok(Self { params, meta })
    }

    /// Copies stored tensors into `nets`. Missing tensors or shape
    /// mismatches are contract violations.
    pub fn restore(&self, names: &[&str], nets: Vec<&mut DenseNet>) -> Result<()> {
        contract!(names.len() == nets.len(), "names and nets differ in number");
        for (n, net) in names.iter().zip(nets) {
            let own: Vec<String> = net.params().names().to_vec();
            for (i, t) in own.iter().enumerate() {
                let key = format!("{n}.{t}");
                let src = self
                    .params
                    .get(&key)
                    .ok_or_else(|| Error::Contract(format!("checkpoint lacks `{key}`")))?;
                let dst = net.params_mut().tensor_mut(i);
                contract!(
                    src.shape() == dst.shape(),
                    "`{key}` is {:?} in the checkpoint but {:?} in the model",
                    src.shape(),
                    dst.shape()
                );
                *dst = src.clone();
            }
        }
        Ok(())
    }
}
