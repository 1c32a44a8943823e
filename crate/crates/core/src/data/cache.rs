//! Binary dataset cache.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic       8 bytes  "HARDSET\0"
//! version     u32      1
//! meta_len    u64
//! meta        meta_len bytes of JSON: {"provenance": …, "segments": […]}
//! n_windows   u64
//! window_len  u32
//! per window:
//!   subject   u16
//!   class     u8       0 standing, 1 walking, 2 ascending, 3 descending
//!   segment   u32      index into meta.segments
//!   offset    u32      first sample within the segment
//!   samples   window_len × 6 × f64, row-major
//! ```

use serde::{Deserialize, Serialize};

use crate::codec::Reader;
use crate::data::raw::{SubjectId, CHANNELS};
use crate::data::segment::Activity;
use crate::data::window::{Provenance, SegmentInfo, Window, WindowedDataset};
use crate::{Error, Result, Tensor};

pub const CACHE_MAGIC: &[u8; 8] = b"HARDSET\0";
pub const CACHE_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Meta {
    provenance: Provenance,
    segments: Vec<SegmentInfo>,
}

pub fn write_cache(ds: &WindowedDataset) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&Meta {
        provenance: ds.provenance.clone(),
        segments: ds.segments.clone(),
    })?;
    let window_len = ds.provenance.window_len;
    let mut out = Vec::with_capacity(32 + meta.len() + ds.windows.len() * (11 + window_len * CHANNELS * 8));
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(ds.windows.len() as u64).to_le_bytes());
    out.extend_from_slice(&(window_len as u32).to_le_bytes());
    for w in &ds.windows {
        if w.samples.shape() != [window_len, CHANNELS] {
            return Err(Error::shape(
                "cache",
                format!("[{window_len}, {CHANNELS}]"),
                format!("{:?}", w.samples.shape()),
            ));
        }
        out.extend_from_slice(&w.subject.0.to_le_bytes());
        out.push(w.activity.class_index() as u8);
        out.extend_from_slice(&(w.segment as u32).to_le_bytes());
        out.extend_from_slice(&(w.offset as u32).to_le_bytes());
        for &v in w.samples.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn read_cache(bytes: &[u8]) -> Result<WindowedDataset> {
    let mut r = Reader::new(bytes, "dataset cache");
    if r.take(8)? != CACHE_MAGIC {
        return Err(Error::CorruptStream("dataset cache: bad magic".into()));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::CorruptStream(format!(
            "dataset cache: version {version}, this build reads {CACHE_VERSION}"
        )));
    }
    let meta_len = r.u64()? as usize;
    let meta: Meta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| Error::CorruptStream(format!("dataset cache: metadata: {e}")))?;
    let n = r.u64()? as usize;
    let window_len = r.u32()? as usize;
    if window_len != meta.provenance.window_len {
        return Err(Error::CorruptStream(
            "dataset cache: window length disagrees with metadata".into(),
        ));
    }
    let per_window = window_len * CHANNELS;
    let mut windows = Vec::with_capacity(n.min(bytes.len() / (per_window * 8).max(1)));
    for _ in 0..n {
        let subject = SubjectId(r.u16()?);
        let activity =
            Activity::from_class(r.u8()? as usize).map_err(|e| Error::CorruptStream(format!("dataset cache: {e}")))?;
        let segment = r.u32()? as usize;
        let offset = r.u32()? as usize;
        let raw = r.take(per_window * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        windows.push(Window {
            samples: Tensor::new(vec![window_len, CHANNELS], data)?,
            activity,
            subject,
            segment,
            offset,
        });
    }
    r.finish()?;
    let ds = WindowedDataset {
        windows,
        segments: meta.segments,
        provenance: meta.provenance,
    };
    ds.check_provenance()?;
    Ok(ds)
}
