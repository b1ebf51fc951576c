//! On-disk parameter format: `<stem>.json` lists every tensor with its
//! shape and offset into `<stem>.bin`, a flat little-endian `f64` blob.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::graph::ParamStore;
use crate::error::{Error, Result};

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset in scalars, not bytes.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightsManifest {
    pub format_version: u32,
    pub dtype: String,
    pub blob: String,
    pub blob_sha256: String,
    pub tensors: Vec<TensorEntry>,
}

pub fn manifest_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.json"))
}

pub fn blob_path(dir: &Path, stem: &str) -> PathBuf {
    dir.join(format!("{stem}.bin"))
}

pub fn save_params(store: &ParamStore, dir: &Path, stem: &str) -> Result<WeightsManifest> {
    save_params_prefixed(store, dir, stem, "")
}

/// Saves only the parameters whose name starts with `prefix`, with the
/// prefix stripped from the stored names.
pub fn save_params_prefixed(store: &ParamStore, dir: &Path, stem: &str, prefix: &str) -> Result<WeightsManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut bytes = Vec::new();
    let mut tensors = Vec::new();
    let mut offset = 0;
    for (_, name, value) in store.iter() {
        let Some(name) = name.strip_prefix(prefix) else { continue };
        let (rows, cols) = value.dim();
        tensors.push(TensorEntry {
            name: name.to_string(),
            rows,
            cols,
            offset,
        });
        for v in value.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        offset += rows * cols;
    }
    let manifest = WeightsManifest {
        format_version: WEIGHTS_FORMAT_VERSION,
        dtype: "f64-le".into(),
        blob: format!("{stem}.bin"),
        blob_sha256: hex::encode(Sha256::digest(&bytes)),
        tensors,
    };
    let bpath = blob_path(dir, stem);
    fs::write(&bpath, &bytes).map_err(|e| Error::io(&bpath, e))?;
    let mpath = manifest_path(dir, stem);
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(&mpath, json).map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

fn read_manifest(dir: &Path, stem: &str) -> Result<(WeightsManifest, Vec<u8>)> {
    let mpath = manifest_path(dir, stem);
    let text = fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: WeightsManifest = serde_json::from_str(&text)?;
    if manifest.format_version != WEIGHTS_FORMAT_VERSION {
        return Err(Error::Weights(format!(
            "{} has format_version {}, this build reads {}",
            mpath.display(),
            manifest.format_version,
            WEIGHTS_FORMAT_VERSION
        )));
    }
    if manifest.dtype != "f64-le" {
        return Err(Error::Weights(format!("unsupported dtype {}", manifest.dtype)));
    }
    let bpath = dir.join(&manifest.blob);
    let bytes = fs::read(&bpath).map_err(|e| Error::io(&bpath, e))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    if digest != manifest.blob_sha256 {
        return Err(Error::Weights(format!("{} does not match its recorded sha256", bpath.display())));
    }
    Ok((manifest, bytes))
}

fn tensor(entry: &TensorEntry, bytes: &[u8]) -> Result<Array2<f64>> {
    let n = entry.rows * entry.cols;
    let start = entry.offset * 8;
    let end = start + n * 8;
    if end > bytes.len() {
        return Err(Error::Weights(format!("tensor {} runs past the end of the blob", entry.name)));
    }
    let data: Vec<f64> = bytes[start..end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Array2::from_shape_vec((entry.rows, entry.cols), data).expect("length checked"))
}

/// Loads every tensor into a fresh store, in manifest order.
pub fn load_params(dir: &Path, stem: &str) -> Result<ParamStore> {
    let (manifest, bytes) = read_manifest(dir, stem)?;
    let mut store = ParamStore::new();
    for entry in &manifest.tensors {
        if store.id(&entry.name).is_some() {
            return Err(Error::Weights(format!("tensor {} listed twice", entry.name)));
        }
        store.add(entry.name.clone(), tensor(entry, &bytes)?);
    }
    Ok(store)
}

/// Overwrites the parameters of an already-built store by name. Every
/// parameter must be present with a matching shape; extra tensors in the
/// file are an error too, so a stale file cannot load silently.
pub fn load_into(store: &mut ParamStore, dir: &Path, stem: &str) -> Result<()> {
    load_into_prefixed(store, dir, stem, "")
}

/// [`load_into`] restricted to parameters under `prefix`; names in the
/// file are relative to the prefix.
pub fn load_into_prefixed(store: &mut ParamStore, dir: &Path, stem: &str, prefix: &str) -> Result<()> {
    let (manifest, bytes) = read_manifest(dir, stem)?;
    let mut seen = vec![false; store.len()];
    for entry in &manifest.tensors {
        let full = format!("{prefix}{}", entry.name);
        let id = store
            .id(&full)
            .ok_or_else(|| Error::Weights(format!("unexpected tensor {} in {stem}.json", entry.name)))?;
        store.set(id, tensor(entry, &bytes)?)?;
        seen[id.index()] = true;
    }
    let missing: Vec<&str> = store
        .ids()
        .filter(|id| !seen[id.index()] && store.name(*id).starts_with(prefix))
        .map(|id| store.name(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Weights(format!("{stem}.json lacks tensors: {}", missing.join(", "))));
    }
    Ok(())
}
