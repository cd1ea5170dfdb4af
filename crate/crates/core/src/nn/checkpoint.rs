//! Model checkpoints: a JSON wrapper around base64-encoded little-endian
//! numeric payloads. Saving at [`Dtype::F64`] and loading reproduces every
//! parameter bitwise; [`Dtype::F32`] halves the file size by narrowing.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::graph::Model;
use super::models::{build_model, ModelSpec};
use super::NnError;
use crate::preprocess::Dtype;

pub const CHECKPOINT_FORMAT: &str = "vrfatigue.checkpoint.v1";

#[derive(Serialize, Deserialize)]
struct ParamRecord {
    name: String,
    shape: Vec<usize>,
    data: String,
}

#[derive(Serialize, Deserialize)]
struct BnRecord {
    running_mean: String,
    running_var: String,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    dtype: Dtype,
    spec: ModelSpec,
    /// Hash of the run configuration that produced the checkpoint, echoed
    /// into evaluation results so grids can detect stale artifacts.
    config_hash: String,
    params: Vec<ParamRecord>,
    bn_states: Vec<BnRecord>,
}

fn encode(values: &[f64], dtype: Dtype) -> String {
    let mut bytes = Vec::with_capacity(values.len() * dtype.size());
    match dtype {
        Dtype::F64 => {
            for v in values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        Dtype::F32 => {
            for v in values {
                bytes.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
    }
    B64.encode(bytes)
}

fn decode(data: &str, dtype: Dtype, expect: usize, what: &str) -> Result<Vec<f64>, NnError> {
    let bytes = B64
        .decode(data)
        .map_err(|e| NnError::Checkpoint(format!("{what}: invalid base64: {e}")))?;
    if bytes.len() != expect * dtype.size() {
        return Err(NnError::Checkpoint(format!(
            "{what}: expected {} values ({} bytes), got {} bytes",
            expect,
            expect * dtype.size(),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(expect);
    match dtype {
        Dtype::F64 => {
            for chunk in bytes.chunks_exact(8) {
                out.push(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
            }
        }
        Dtype::F32 => {
            for chunk in bytes.chunks_exact(4) {
                out.push(f32::from_le_bytes(chunk.try_into().expect("4-byte chunk")) as f64);
            }
        }
    }
    Ok(out)
}

/// Serializes a model (parameters plus batch-norm running statistics) to
/// `path`. The write goes through a sibling temp file and an atomic rename so
/// interrupted runs never leave a truncated checkpoint behind.
pub fn save_checkpoint(
    model: &Model,
    path: &Path,
    config_hash: &str,
    dtype: Dtype,
) -> Result<(), NnError> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        dtype,
        spec: model.spec.clone(),
        config_hash: config_hash.to_string(),
        params: model
            .params
            .iter()
            .map(|p| ParamRecord {
                name: p.name.clone(),
                shape: p.value.shape(),
                data: encode(p.value.as_slice(), dtype),
            })
            .collect(),
        bn_states: model
            .bn_states
            .iter()
            .map(|s| BnRecord {
                running_mean: encode(s.running_mean.as_slice().expect("contiguous"), dtype),
                running_var: encode(s.running_var.as_slice().expect("contiguous"), dtype),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&file)?;
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty());
    let tmp = path.with_extension("tmp");
    if let Some(dir) = dir {
        fs::create_dir_all(dir)?;
    }
    fs::write(&tmp, &json)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Rebuilds the architecture named in the checkpoint's spec and overwrites
/// its parameters and running statistics with the stored values. Returns the
/// model (in `Train` mode, like a fresh build) and the stored config hash.
pub fn load_checkpoint(path: &Path) -> Result<(Model, String), NnError> {
    let bytes = fs::read(path)?;
    let file: CheckpointFile = serde_json::from_slice(&bytes)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(NnError::Checkpoint(format!(
            "unsupported format `{}` (expected `{CHECKPOINT_FORMAT}`)",
            file.format
        )));
    }
    let mut model = build_model(&file.spec)?;
    if file.params.len() != model.params.len() {
        return Err(NnError::Checkpoint(format!(
            "parameter count mismatch: checkpoint has {}, architecture has {}",
            file.params.len(),
            model.params.len()
        )));
    }
    for (record, param) in file.params.iter().zip(model.params.iter_mut()) {
        if record.name != param.name {
            return Err(NnError::Checkpoint(format!(
                "parameter order mismatch: checkpoint has `{}`, architecture expects `{}`",
                record.name, param.name
            )));
        }
        if record.shape != param.value.shape() {
            return Err(NnError::Checkpoint(format!(
                "`{}`: shape {:?} does not match architecture shape {:?}",
                record.name,
                record.shape,
                param.value.shape()
            )));
        }
        let values = decode(&record.data, file.dtype, param.value.count(), &record.name)?;
        param.value.as_slice_mut().copy_from_slice(&values);
    }
    if file.bn_states.len() != model.bn_states.len() {
        return Err(NnError::Checkpoint(format!(
            "batch-norm state count mismatch: checkpoint has {}, architecture has {}",
            file.bn_states.len(),
            model.bn_states.len()
        )));
    }
    for (i, (record, state)) in file.bn_states.iter().zip(model.bn_states.iter_mut()).enumerate() {
        let n = state.running_mean.len();
        let mean = decode(&record.running_mean, file.dtype, n, &format!("bn_states[{i}].mean"))?;
        let var = decode(&record.running_var, file.dtype, n, &format!("bn_states[{i}].var"))?;
        state
            .running_mean
            .as_slice_mut()
            .expect("contiguous")
            .copy_from_slice(&mean);
        state
            .running_var
            .as_slice_mut()
            .expect("contiguous")
            .copy_from_slice(&var);
    }
    Ok((model, file.config_hash))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::graph::Mode;
    use crate::nn::models::ModelKind;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_ish_model(kind: ModelKind) -> Model {
        // nudge a model away from its initialization so round-trips are
        // tested on non-trivial values, including updated running stats
        let mut model = build_model(&ModelSpec::new(kind, 16, 123)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let x = Array3::from_shape_fn((4, 4, 16), |_| rng.gen::<f64>() * 2.0 - 1.0);
        let _ = model.backward(&x, &[true, false, true, false]).unwrap();
        model
    }

    #[test]
    fn f64_round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        for kind in [ModelKind::EKYT, ModelKind::FCN, ModelKind::MCDCNN] {
            let model = trained_ish_model(kind);
            let path = dir.path().join(format!("{kind}.ckpt.json"));
            save_checkpoint(&model, &path, "deadbeef", Dtype::F64).unwrap();
            let (loaded, hash) = load_checkpoint(&path).unwrap();
            assert_eq!(hash, "deadbeef");
            assert_eq!(loaded.spec, model.spec);
            for (a, b) in model.params.iter().zip(&loaded.params) {
                assert_eq!(a.name, b.name);
                let bits_a: Vec<u64> = a.value.as_slice().iter().map(|v| v.to_bits()).collect();
                let bits_b: Vec<u64> = b.value.as_slice().iter().map(|v| v.to_bits()).collect();
                assert_eq!(bits_a, bits_b, "{kind}: {}", a.name);
            }
            for (a, b) in model.bn_states.iter().zip(&loaded.bn_states) {
                assert_eq!(a.running_mean, b.running_mean);
                assert_eq!(a.running_var, b.running_var);
            }
        }
    }

    #[test]
    fn f32_round_trip_is_close_and_smaller() {
        let dir = tempfile::tempdir().unwrap();
        let model = trained_ish_model(ModelKind::FCN);
        let p64 = dir.path().join("w64.json");
        let p32 = dir.path().join("w32.json");
        save_checkpoint(&model, &p64, "", Dtype::F64).unwrap();
        save_checkpoint(&model, &p32, "", Dtype::F32).unwrap();
        let size64 = std::fs::metadata(&p64).unwrap().len();
        let size32 = std::fs::metadata(&p32).unwrap().len();
        assert!(size32 < size64, "{size32} !< {size64}");
        let (loaded, _) = load_checkpoint(&p32).unwrap();
        for (a, b) in model.params.iter().zip(&loaded.params) {
            for (va, vb) in a.value.as_slice().iter().zip(b.value.as_slice()) {
                assert!((va - vb).abs() <= va.abs() * 1e-6 + 1e-9, "{va} vs {vb}");
            }
        }
    }

    #[test]
    fn loaded_model_reproduces_eval_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let mut model = trained_ish_model(ModelKind::EKYT);
        model.set_mode(Mode::Eval);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Array3::from_shape_fn((2, 4, 16), |_| rng.gen::<f64>() - 0.5);
        let before = model.forward(&x).unwrap();
        let path = dir.path().join("m.json");
        save_checkpoint(&model, &path, "h", Dtype::F64).unwrap();
        let (mut loaded, _) = load_checkpoint(&path).unwrap();
        loaded.set_mode(Mode::Eval);
        let after = loaded.forward(&x).unwrap();
        assert_eq!(before, after);
    }

    #[test]
    fn corrupt_checkpoints_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let model = trained_ish_model(ModelKind::TCN);
        let path = dir.path().join("m.json");
        save_checkpoint(&model, &path, "h", Dtype::F64).unwrap();

        let text = std::fs::read_to_string(&path).unwrap();
        let bad_format = text.replace(CHECKPOINT_FORMAT, "other.format.v9");
        let p1 = dir.path().join("bad_format.json");
        std::fs::write(&p1, bad_format).unwrap();
        assert!(matches!(load_checkpoint(&p1), Err(NnError::Checkpoint(_))));

        let renamed = text.replace("conv1.weight", "conv9.weight");
        let p2 = dir.path().join("bad_name.json");
        std::fs::write(&p2, renamed).unwrap();
        assert!(matches!(load_checkpoint(&p2), Err(NnError::Checkpoint(_))));

        let p3 = dir.path().join("not_json.json");
        std::fs::write(&p3, b"{ not json").unwrap();
        assert!(matches!(load_checkpoint(&p3), Err(NnError::Json(_))));
    }
}
