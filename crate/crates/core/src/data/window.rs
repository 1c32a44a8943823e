use serde::{Deserialize, Serialize};

use crate::data::raw::{SubjectId, CHANNELS};
use crate::data::segment::{Activity, ActivitySegment};
use crate::train::Sample;
use crate::{Result, Tensor};

pub const WINDOW_LEN: usize = 200;
pub const WINDOW_STRIDE: usize = 60;

/// A fixed-length slice of one segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    /// `[len, 6]`.
    pub samples: Tensor,
    pub activity: Activity,
    pub subject: SubjectId,
    /// Index into [`WindowedDataset::segments`].
    pub segment: usize,
    /// First sample of the window within its segment.
    pub offset: usize,
}

impl Window {
    pub fn label(&self) -> [f64; 4] {
        let mut y = [0.0; 4];
        y[self.activity.class_index()] = 1.0;
        y
    }
}

impl Sample for Window {
    fn input(&self) -> &Tensor {
        &self.samples
    }
    fn class(&self) -> usize {
        self.activity.class_index()
    }
}

/// `⌊(L − length)/stride⌋ + 1` for `L ≥ length`, else 0.
pub fn window_count(segment_len: usize, length: usize, stride: usize) -> usize {
    if segment_len < length {
        0
    } else {
        (segment_len - length) / stride + 1
    }
}

/// Cuts windows at offsets `0, stride, 2·stride, …` while they fit.
/// `segment_index` is recorded in each window for provenance.
pub fn build_windows(segment: &ActivitySegment, segment_index: usize, length: usize, stride: usize) -> Vec<Window> {
    assert!(length >= 1 && stride >= 1, "window length and stride must be positive");
    let n = window_count(segment.len(), length, stride);
    (0..n)
        .map(|k| {
            let offset = k * stride;
            let data: Vec<f64> = segment.samples[offset..offset + length]
                .iter()
                .flatten()
                .copied()
                .collect();
            Window {
                samples: Tensor::new(vec![length, CHANNELS], data).expect("window shape"),
                activity: segment.activity,
                subject: segment.subject,
                segment: segment_index,
                offset,
            }
        })
        .collect()
}

/// Where a segment came from; windows refer back to these by index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentInfo {
    pub subject: SubjectId,
    pub activity: Activity,
    pub len: usize,
    pub start_timestamp: f64,
    pub start_record: usize,
    /// Index into [`Provenance::sources`].
    pub source: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub sources: Vec<String>,
    pub window_len: usize,
    pub stride: usize,
    pub max_gap: usize,
    /// Channel order and units of the stored (un-normalised) samples.
    pub channel_units: String,
    pub config_hash: String,
    /// Set for generated datasets, e.g. `synthetic`.
    pub generator: Option<String>,
}

pub const CHANNEL_UNITS: &str = "ankle acc16 x,y,z [m/s^2]; ankle gyro x,y,z [rad/s]";

/// Labelled, subject-tagged windows plus the segments they were cut from.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    pub windows: Vec<Window>,
    pub segments: Vec<SegmentInfo>,
    pub provenance: Provenance,
}

impl WindowedDataset {
    /// Windows every segment; segments are indexed in the order given.
    pub fn from_segments(segments: &[(ActivitySegment, usize)], provenance: Provenance) -> Self {
        let mut windows = Vec::new();
        let mut infos = Vec::with_capacity(segments.len());
        for (i, (seg, source)) in segments.iter().enumerate() {
            windows.extend(build_windows(seg, i, provenance.window_len, provenance.stride));
            infos.push(SegmentInfo {
                subject: seg.subject,
                activity: seg.activity,
                len: seg.len(),
                start_timestamp: seg.start_timestamp,
                start_record: seg.start_record,
                source: *source,
            });
        }
        Self {
            windows,
            segments: infos,
            provenance,
        }
    }

    /// Sorted distinct subjects.
    pub fn subjects(&self) -> Vec<SubjectId> {
        let mut s: Vec<SubjectId> = self.windows.iter().map(|w| w.subject).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    /// Window counts per (subject, activity), sorted.
    pub fn counts(&self) -> Vec<(SubjectId, Activity, usize)> {
        let mut map = std::collections::BTreeMap::new();
        for w in &self.windows {
            *map.entry((w.subject, w.activity)).or_insert(0usize) += 1;
        }
        map.into_iter().map(|((s, a), n)| (s, a, n)).collect()
    }

    /// Checks that every window lies inside its segment and carries the
    /// segment's subject and activity.
    pub fn check_provenance(&self) -> Result<()> {
        for (i, w) in self.windows.iter().enumerate() {
            let seg = self.segments.get(w.segment).ok_or_else(|| {
                crate::Error::CorruptStream(format!("window {i} refers to missing segment {}", w.segment))
            })?;
            let len = w.samples.shape()[0];
            if w.offset + len > seg.len || seg.subject != w.subject || seg.activity != w.activity {
                return Err(crate::Error::CorruptStream(format!(
                    "window {i} does not fit segment {}",
                    w.segment
                )));
            }
        }
        Ok(())
    }
}
