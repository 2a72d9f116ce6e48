//! Model persistence.
//!
//! Binary layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 5     | magic `TSEM1` |
//! | 2     | format version (u16) |
//! | 2     | number of entries in `layer_sizes` (u16) |
//! | 4 each | `layer_sizes` (u32) |
//! | 1     | hidden activation tag (0 linear, 1 tanh) |
//! | 32    | input map `x_scale`, `x_offset`, `t_scale`, `t_offset` (f64) |
//! | 8 each | per layer: weights row-major (`out x in`), then biases (f64) |

use std::path::Path;

use super::activation::Activation;
use super::mlp::{param_count, InputNormalization, MlpParams};
use crate::codec::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 5] = b"TSEM1";
pub const MODEL_VERSION: u16 = 1;

pub fn write_model(params: &MlpParams) -> Vec<u8> {
    let mut w = ByteWriter::new();
    w.bytes(MODEL_MAGIC);
    w.u16(MODEL_VERSION);
    w.u16(params.layer_sizes().len() as u16);
    for &s in params.layer_sizes() {
        w.u32(s as u32);
    }
    w.u8(params.activation().tag());
    for v in params.normalization().to_array() {
        w.f64(v);
    }
    w.f64s(params.values());
    w.finish()
}

pub fn read_model(bytes: &[u8]) -> Result<MlpParams> {
    let mut r = ByteReader::new(bytes, "model");
    let magic = r.take(5, "magic")?;
    if magic != MODEL_MAGIC {
        return Err(r.error(format!(
            "bad magic {:?}, expected \"TSEM1\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u16("version")?;
    if version != MODEL_VERSION {
        return Err(r.error(format!("unsupported version {version}")));
    }
    let count = r.u16("layer count")? as usize;
    let mut sizes = Vec::with_capacity(count);
    for k in 0..count {
        sizes.push(r.u32(&format!("layer size {k}"))? as usize);
    }
    let tag = r.u8("activation")?;
    let activation = Activation::from_tag(tag).ok_or_else(|| r.error(format!("unknown activation tag {tag}")))?;
    let mut norm = [0.0; 4];
    for (slot, name) in norm.iter_mut().zip(["x_scale", "x_offset", "t_scale", "t_offset"]) {
        *slot = r.f64(name)?;
    }
    let normalization = InputNormalization::from_array(norm).map_err(|e| r.error(e.to_string()))?;
    super::mlp::validate_layer_sizes(&sizes).map_err(|e| r.error(e.to_string()))?;
    let values = r.f64s(param_count(&sizes), "parameters")?;
    r.expect_end()?;
    MlpParams::from_values(&sizes, activation, normalization, values).map_err(|e| r.error(e.to_string()))
}

pub fn write_model_file(params: &MlpParams, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(params)).map_err(|e| Error::io(path, e))
}

pub fn read_model_file(path: &Path) -> Result<MlpParams> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
