//! Checkpoint directories: a TOML `manifest` and a little-endian f32
//! `params.bin`.

use std::fs;
use std::path::Path;

use kanformer_core::ParamStore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::settings::{ResolvedConfig, RunConfig};

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest";
pub const BLOB: &str = "params.bin";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    /// Byte offset into the blob.
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub fingerprint: String,
    /// The resolved configuration the parameters belong to.
    pub config: String,
    pub tensor: Vec<TensorEntry>,
}

impl Manifest {
    fn blob_len(&self) -> u64 {
        self.tensor.iter().map(|t| 4 * t.shape.iter().product::<usize>() as u64).sum()
    }
}

pub fn encode_params(store: &ParamStore<f32>) -> (Vec<TensorEntry>, Vec<u8>) {
    let mut blob = Vec::with_capacity(4 * store.num_scalars());
    let mut index = Vec::with_capacity(store.len());
    for e in store.entries() {
        index.push(TensorEntry {
            name: e.name.clone(),
            shape: e.tensor.shape().to_vec(),
            dtype: "f32".into(),
            offset: blob.len() as u64,
        });
        for v in e.tensor.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    (index, blob)
}

pub fn save(dir: &Path, config: &ResolvedConfig, store: &ParamStore<f32>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (tensor, blob) = encode_params(store);
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        fingerprint: config.fingerprint(),
        config: config.to_toml_values(),
        tensor,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Runtime(format!("serializing manifest: {e}")))?;
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| Error::io(path, e))?;
    let path = dir.join(BLOB);
    fs::write(&path, blob).map_err(|e| Error::io(path, e))
}

pub struct Loaded {
    pub run: RunConfig,
    pub store: ParamStore<f32>,
    pub encoder: kanformer_core::transformer::Encoder,
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    if !dir.is_dir() || !path.is_file() {
        return Err(Error::MissingCheckpoint(dir.to_path_buf()));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let version = text
        .parse::<toml::Table>()
        .ok()
        .and_then(|t| t.get("format_version").and_then(|v| v.as_integer()));
    match version {
        Some(v) if v == FORMAT_VERSION as i64 => {}
        Some(v) => {
            return Err(Error::VersionMismatch {
                found: v as u32,
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(Error::Inconsistent(format!("{}: no format_version", path.display()))),
    }
    toml::from_str(&text).map_err(|e| Error::Inconsistent(format!("{}: {e}", path.display())))
}

/// Rebuild the model described by the manifest and fill it from the blob.
pub fn load(dir: &Path) -> Result<Loaded> {
    let manifest = read_manifest(dir)?;
    let mut resolved = ResolvedConfig::default();
    resolved.apply_toml(&manifest.config)?;
    if resolved.fingerprint() != manifest.fingerprint {
        return Err(Error::Inconsistent("configuration does not match its fingerprint".into()));
    }
    let run = resolved.build()?;
    let mut store = ParamStore::new();
    let encoder = kanformer_core::transformer::Encoder::new(&run.model, &mut store, &mut kanformer_core::Rng::new(0))?;

    let path = dir.join(BLOB);
    let blob = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    if blob.len() as u64 != manifest.blob_len() {
        return Err(Error::Truncated {
            expected: manifest.blob_len(),
            actual: blob.len() as u64,
        });
    }
    if manifest.tensor.len() != store.len() {
        return Err(Error::Inconsistent(format!(
            "manifest lists {} tensors, the model has {}",
            manifest.tensor.len(),
            store.len()
        )));
    }
    let ids: Vec<_> = store.ids().collect();
    for (entry, id) in manifest.tensor.iter().zip(ids) {
        if entry.name != store.entry(id).name {
            return Err(Error::Inconsistent(format!(
                "tensor {} where the model has {}",
                entry.name,
                store.entry(id).name
            )));
        }
        let param = store.get_mut(id);
        let len = param.len();
        if entry.dtype != "f32" || entry.shape != param.shape() {
            return Err(Error::Inconsistent(format!(
                "tensor {} is {} {:?}, the model expects f32 {:?}",
                entry.name,
                entry.dtype,
                entry.shape,
                param.shape()
            )));
        }
        let start = entry.offset as usize;
        let bytes = blob
            .get(start..start + 4 * len)
            .ok_or_else(|| Error::Inconsistent(format!("tensor {} lies outside the blob", entry.name)))?;
        for (dst, chunk) in param.data_mut().iter_mut().zip(bytes.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok(Loaded { run, store, encoder })
}
