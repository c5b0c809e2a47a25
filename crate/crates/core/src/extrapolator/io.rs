//! Model file: `"AFRX"`, version `u16`, hidden size `u16`, then every
//! parameter tensor as little-endian `f32` in the order lstm1 W, U, b;
//! lstm2 W, U, b; dense W, b (row-major), and finally the CRC32 of all
//! preceding bytes as `u32`.

use std::fs;
use std::path::Path;

use super::{ExtrapolatorModel, Scalar};
use crate::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"AFRX";
pub const MODEL_VERSION: u16 = 1;
const HEADER_LEN: usize = 8;

pub fn encode_model<T: Scalar>(model: &ExtrapolatorModel<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 * model.num_params() + 4);
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.hidden_size() as u16).to_le_bytes());
    for tensor in model.params() {
        for v in tensor {
            out.extend_from_slice(&v.to_f32().unwrap_or(f32::NAN).to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Decode a model file image; `origin` names the source in error messages.
pub fn decode_model(bytes: &[u8], origin: &Path) -> Result<ExtrapolatorModel<f32>> {
    let bad = |msg: String| Error::format(origin, msg);
    if bytes.len() < HEADER_LEN + 4 {
        return Err(bad(format!("truncated model file ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MODEL_MAGIC {
        return Err(bad("bad magic, not a model file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(bad(format!("unsupported model version {version}")));
    }
    let hidden = u16::from_le_bytes([bytes[6], bytes[7]]) as usize;
    if hidden == 0 {
        return Err(bad("hidden size 0".into()));
    }
    let mut model = ExtrapolatorModel::<f32>::zeros(hidden);
    let expected = HEADER_LEN + 4 * model.num_params() + 4;
    if bytes.len() != expected {
        return Err(bad(format!(
            "expected {expected} bytes for hidden size {hidden}, found {}",
            bytes.len()
        )));
    }
    let (body, tail) = bytes.split_at(expected - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4-byte checksum"));
    if crc32fast::hash(body) != stored {
        return Err(bad("checksum mismatch".into()));
    }
    let mut words = body[HEADER_LEN..]
        .chunks_exact(4)
        .map(|w| f32::from_le_bytes(w.try_into().expect("4-byte word")));
    for tensor in model.params_mut() {
        for (dst, src) in tensor.iter_mut().zip(&mut words) {
            *dst = src;
        }
    }
    if !model.is_finite() {
        return Err(bad("non-finite weights".into()));
    }
    Ok(model)
}

pub fn save_model<T: Scalar>(model: &ExtrapolatorModel<T>, path: &Path) -> Result<()> {
    if model.hidden_size() > u16::MAX as usize {
        return Err(Error::Config(format!("hidden size {} does not fit the model format", model.hidden_size())));
    }
    fs::write(path, encode_model(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<ExtrapolatorModel<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_model(&bytes, path)
}
