//! Binary checkpoint archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  b"MGCK"
//! u32    format version (currently 1)
//! u64    manifest length | manifest JSON: [{name, shape, dtype, offset}, ..]
//! u64    meta length     | caller-supplied JSON section
//! u64    blob length     | raw little-endian IEEE-754 f32 data
//! ```
//!
//! Save followed by load is a bitwise identity on the tensor data.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::tensor_impl::{Tensor, TensorError};

const MAGIC: &[u8; 4] = b"MGCK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    tensors: Vec<ManifestEntry>,
}

fn ck_err(msg: impl Into<String>) -> TensorError {
    TensorError::Checkpoint(msg.into())
}

pub fn save_checkpoint(
    path: &Path,
    entries: &[(String, Tensor)],
    meta: &serde_json::Value,
) -> Result<(), TensorError> {
    let mut manifest = Manifest {
        tensors: Vec::with_capacity(entries.len()),
    };
    let mut blob: Vec<u8> = Vec::new();
    for (name, t) in entries {
        manifest.tensors.push(ManifestEntry {
            name: name.clone(),
            shape: t.shape().to_vec(),
            dtype: "f32".into(),
            offset: blob.len() as u64,
        });
        for v in t.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest_json =
        serde_json::to_vec(&manifest).map_err(|e| ck_err(format!("manifest encode: {e}")))?;
    let meta_json = serde_json::to_vec(meta).map_err(|e| ck_err(format!("meta encode: {e}")))?;

    let mut out: Vec<u8> = Vec::with_capacity(blob.len() + manifest_json.len() + 64);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(manifest_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest_json);
    out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta_json);
    out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
    out.extend_from_slice(&blob);

    let mut f = fs::File::create(path).map_err(|e| ck_err(format!("create {path:?}: {e}")))?;
    f.write_all(&out)
        .map_err(|e| ck_err(format!("write {path:?}: {e}")))?;
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
) -> Result<(Vec<(String, Tensor)>, serde_json::Value), TensorError> {
    let bytes = fs::read(path).map_err(|e| ck_err(format!("read {path:?}: {e}")))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8], TensorError> {
        if *pos + n > bytes.len() {
            return Err(ck_err(format!(
                "truncated archive: wanted {} bytes at offset {}, file has {}",
                n,
                *pos,
                bytes.len()
            )));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    };
    let magic = take(&mut pos, 4)?;
    if magic != MAGIC {
        return Err(ck_err("bad magic: not a checkpoint archive"));
    }
    let version = u32::from_le_bytes(take(&mut pos, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(ck_err(format!(
            "unsupported checkpoint version {version}, expected {VERSION}"
        )));
    }
    let manifest_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let manifest: Manifest = serde_json::from_slice(take(&mut pos, manifest_len)?)
        .map_err(|e| ck_err(format!("manifest decode: {e}")))?;
    let meta_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let meta: serde_json::Value = serde_json::from_slice(take(&mut pos, meta_len)?)
        .map_err(|e| ck_err(format!("meta decode: {e}")))?;
    let blob_len = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let blob = take(&mut pos, blob_len)?;

    let mut entries = Vec::with_capacity(manifest.tensors.len());
    for e in &manifest.tensors {
        if e.dtype != "f32" {
            return Err(ck_err(format!("tensor {}: unsupported dtype {}", e.name, e.dtype)));
        }
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + n * 4;
        if end > blob.len() {
            return Err(ck_err(format!(
                "tensor {} extends past the data blob ({} > {})",
                e.name,
                end,
                blob.len()
            )));
        }
        let data: Vec<f32> = blob[start..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        entries.push((e.name.clone(), Tensor::new(e.shape.clone(), data)?));
    }
    Ok((entries, meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_entries(seed: u64) -> Vec<(String, Tensor)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        vec![
            (
                "a.w".into(),
                Tensor::new(vec![3, 4], (0..12).map(|_| rng.gen::<f32>() - 0.5).collect()).unwrap(),
            ),
            (
                "a.b".into(),
                Tensor::new(vec![4], (0..4).map(|_| rng.gen::<f32>() * 10.0).collect()).unwrap(),
            ),
        ]
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let entries = random_entries(7);
        let meta = serde_json::json!({"kind": "test", "scale": 1.25});
        save_checkpoint(&path, &entries, &meta).unwrap();
        let (loaded, meta2) = load_checkpoint(&path).unwrap();
        assert_eq!(meta, meta2);
        assert_eq!(loaded.len(), entries.len());
        for ((n1, t1), (n2, t2)) in entries.iter().zip(&loaded) {
            assert_eq!(n1, n2);
            assert_eq!(t1.shape(), t2.shape());
            for (a, b) in t1.data().iter().zip(t2.data()) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_blob_is_an_error_not_a_crash() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &random_entries(8), &serde_json::json!({})).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let cut = &bytes[..bytes.len() - 9];
        std::fs::write(&path, cut).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "got: {err}");
    }

    #[test]
    fn manifest_tensor_missing_from_blob_names_the_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        // hand-build an archive whose manifest claims more data than the blob has
        let manifest = serde_json::json!({
            "tensors": [{"name": "ghost.w", "shape": [8, 8], "dtype": "f32", "offset": 0}]
        });
        let manifest_bytes = serde_json::to_vec(&manifest).unwrap();
        let meta_bytes = b"{}".to_vec();
        let blob = vec![0u8; 16];
        let mut out = Vec::new();
        out.extend_from_slice(b"MGCK");
        out.extend_from_slice(&1u32.to_le_bytes());
        out.extend_from_slice(&(manifest_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&manifest_bytes);
        out.extend_from_slice(&(meta_bytes.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta_bytes);
        out.extend_from_slice(&(blob.len() as u64).to_le_bytes());
        out.extend_from_slice(&blob);
        std::fs::write(&path, out).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("ghost.w"), "got: {err}");
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&path, &random_entries(9), &serde_json::json!({})).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[4] = 99; // bump the version field
        std::fs::write(&path, bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "got: {err}");
    }
}
