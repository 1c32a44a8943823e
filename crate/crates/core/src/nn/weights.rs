//! Versioned binary weight files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic      8 bytes   "HARWGT\0\0"
//! version    u32       1
//! spec hash 32 bytes   SHA-256 of the canonical ModelSpec JSON
//! n_tensors  u32
//! per tensor:
//!   rank     u32
//!   dims     rank × u64
//!   payload  product(dims) × f64
//! ```
//!
//! Tensors appear in layer order, then in each layer's declared order.

use crate::codec::Reader;
use crate::nn::{ModelSpec, ParameterBundle};
use crate::{Error, Result, Tensor};

pub const WEIGHTS_MAGIC: &[u8; 8] = b"HARWGT\0\0";
pub const WEIGHTS_VERSION: u32 = 1;

pub fn save_weights(spec: &ModelSpec, params: &ParameterBundle) -> Result<Vec<u8>> {
    params.check_matches(spec)?;
    let mut out = Vec::with_capacity(64 + params.scalar_count() * 8);
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&WEIGHTS_VERSION.to_le_bytes());
    out.extend_from_slice(&spec.fingerprint());
    let tensors: Vec<&Tensor> = params.tensors().collect();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for t in tensors {
        out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes a weight file and validates it against `spec`.
pub fn load_weights(bytes: &[u8], spec: &ModelSpec) -> Result<ParameterBundle> {
    let mut r = Reader::new(bytes, "weights");
    if r.take(8)? != WEIGHTS_MAGIC {
        return Err(Error::CorruptStream("weights: bad magic".into()));
    }
    let version = r.u32()?;
    if version != WEIGHTS_VERSION {
        return Err(Error::CorruptStream(format!("weights: unsupported version {version}")));
    }
    let fingerprint = r.take(32)?;
    let mut params = ParameterBundle::zeros(spec)?;
    let n = r.u32()? as usize;
    let mut decoded = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = r.u32()? as usize;
        if rank == 0 || rank > 3 {
            return Err(Error::CorruptStream(format!("weights: tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u64()? as usize);
        }
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d));
        let len = len
            .filter(|&l| l <= bytes.len() / 8)
            .ok_or_else(|| Error::CorruptStream(format!("weights: implausible tensor shape {shape:?}")))?;
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(r.f64()?);
        }
        decoded.push(Tensor::new(shape, data)?);
    }
    r.finish()?;

    let expected = params.tensors().count();
    if decoded.len() != expected {
        return Err(Error::ParamMismatch(format!(
            "{}: file holds {} tensors, spec needs {expected}",
            spec.name,
            decoded.len()
        )));
    }
    for (slot, t) in params.tensors_mut().zip(decoded) {
        if slot.shape() != t.shape() {
            return Err(Error::ParamMismatch(format!(
                "{}: tensor shape {:?} where spec needs {:?}",
                spec.name,
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    if fingerprint != spec.fingerprint() {
        return Err(Error::ParamMismatch(format!(
            "{}: weight file was written for a different model spec",
            spec.name
        )));
    }
    Ok(params)
}
