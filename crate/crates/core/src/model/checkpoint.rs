//! Self-describing checkpoint container.
//!
//! Layout: an 8-byte magic, a little-endian u64 header length, a JSON
//! header (format version, dims, named tensor shapes, declared
//! endianness, vocabulary content hashes), then the tensor payloads as
//! row-major little-endian f64 in header order. Round-trips are
//! bit-exact.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dims, ModelError, ModelParams};

const MAGIC: &[u8; 8] = b"DAEGENM1";
const FORMAT_VERSION: u32 = 1;

/// Provenance carried alongside the tensors: content hashes of the
/// vocabulary (and related) files the model was trained with, keyed by
/// role (for example `src_vocab`, `tgt_vocab`, `bpe`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub vocab_hashes: BTreeMap<String, String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    endianness: String,
    dims: Dims,
    tensors: Vec<TensorInfo>,
    #[serde(default)]
    meta: CheckpointMeta,
}

#[derive(Serialize, Deserialize)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

/// Writes the checkpoint atomically (temp file in the target directory,
/// then rename).
pub fn save_checkpoint(
    params: &ModelParams,
    meta: &CheckpointMeta,
    path: &Path,
) -> Result<(), ModelError> {
    let views = params.named_views();
    let header = Header {
        format_version: FORMAT_VERSION,
        endianness: "little".to_owned(),
        dims: params.dims.clone(),
        tensors: views
            .iter()
            .map(|(name, view)| TensorInfo { name: name.clone(), shape: view.shape() })
            .collect(),
        meta: meta.clone(),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| ModelError::Checkpoint(format!("header serialization: {e}")))?;

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir)?;
    {
        let file = &mut tmp.file;
        file.write_all(MAGIC)?;
        file.write_all(&(header_json.len() as u64).to_le_bytes())?;
        file.write_all(&header_json)?;
        let mut buf = Vec::new();
        for (_, view) in &views {
            buf.clear();
            buf.reserve(view.as_slice().len() * 8);
            for v in view.as_slice() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            file.write_all(&buf)?;
        }
        file.flush()?;
    }
    fs::rename(&tmp.path, path)?;
    tmp.keep();
    Ok(())
}

/// Loads a checkpoint, validating magic, version and shapes.
pub fn load_checkpoint(path: &Path) -> Result<(ModelParams, CheckpointMeta), ModelError> {
    let mut file = fs::File::open(path)?;
    let mut magic = [0u8; 8];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic bytes".into()));
    }
    let mut len_bytes = [0u8; 8];
    file.read_exact(&mut len_bytes)?;
    let header_len = u64::from_le_bytes(len_bytes) as usize;
    let mut header_json = vec![0u8; header_len];
    file.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| ModelError::Checkpoint(format!("header parse: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported format version {}",
            header.format_version
        )));
    }
    if header.endianness != "little" {
        return Err(ModelError::Checkpoint(format!(
            "unsupported endianness {}",
            header.endianness
        )));
    }
    header.dims.validate()?;

    let mut params = ModelParams::zeros(&header.dims);
    let expected: Vec<(String, Vec<usize>)> = params
        .named_views()
        .iter()
        .map(|(name, view)| (name.clone(), view.shape()))
        .collect();
    if expected.len() != header.tensors.len() {
        return Err(ModelError::Checkpoint(format!(
            "tensor count mismatch: header lists {}, dims imply {}",
            header.tensors.len(),
            expected.len()
        )));
    }
    for (info, (name, shape)) in header.tensors.iter().zip(&expected) {
        if &info.name != name || &info.shape != shape {
            return Err(ModelError::Checkpoint(format!(
                "tensor mismatch: header has {} {:?}, dims imply {} {:?}",
                info.name, info.shape, name, shape
            )));
        }
    }
    for mut view in params.views_mut() {
        let slice = view.as_slice_mut();
        let mut buf = vec![0u8; slice.len() * 8];
        file.read_exact(&mut buf)?;
        for (v, chunk) in slice.iter_mut().zip(buf.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        }
    }
    let mut rest = Vec::new();
    file.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(ModelError::Checkpoint(format!(
            "{} trailing bytes after tensor payload",
            rest.len()
        )));
    }
    Ok((params, header.meta))
}

struct TempFile {
    path: std::path::PathBuf,
    file: fs::File,
    kept: bool,
}

impl TempFile {
    fn keep(mut self) {
        self.kept = true;
    }
}

impl Drop for TempFile {
    fn drop(&mut self) {
        if !self.kept {
            let _ = fs::remove_file(&self.path);
        }
    }
}

fn tempfile_in(dir: &Path) -> Result<TempFile, ModelError> {
    for attempt in 0..1000u32 {
        let path = dir.join(format!(".checkpoint-tmp-{}-{attempt}", std::process::id()));
        match fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(file) => return Ok(TempFile { path, file, kept: false }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    Err(ModelError::Checkpoint("could not create a temporary file".into()))
}
