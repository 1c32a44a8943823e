//! Raw directory → windowed dataset.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::sha256_hex;
use crate::data::raw::{check_plausible, interpolate_gaps, parse_dat, SubjectId};
use crate::data::segment::{segment_by_activity, ActivitySegment};
use crate::data::window::{Provenance, WindowedDataset, CHANNEL_UNITS, WINDOW_LEN, WINDOW_STRIDE};
use crate::{Error, Result};

/// Default interpolation limit in samples (100 ms).
pub const DEFAULT_MAX_GAP: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub window_len: usize,
    pub stride: usize,
    pub max_gap: usize,
    /// Subjects to keep; files for other subjects are skipped.
    pub subjects: Vec<u16>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            window_len: WINDOW_LEN,
            stride: WINDOW_STRIDE,
            max_gap: DEFAULT_MAX_GAP,
            subjects: (101..=108).collect(),
        }
    }
}

/// `subjectNNN.dat` files in `dir`, sorted by subject.
pub fn discover_subject_files(dir: &Path) -> Result<Vec<(SubjectId, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut found = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        let id = name
            .strip_prefix("subject")
            .and_then(|rest| rest.strip_suffix(".dat"))
            .and_then(|digits| digits.parse::<u16>().ok());
        if let Some(id) = id {
            found.push((SubjectId(id), path));
        }
    }
    found.sort();
    Ok(found)
}

struct Parsed {
    source: String,
    segments: Vec<ActivitySegment>,
}

fn load_file(subject: SubjectId, path: &Path, config: &IngestConfig) -> Result<Parsed> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let records = parse_dat(&bytes).map_err(|e| e.in_file(path))?;
    check_plausible(&records).map_err(|e| e.in_file(path))?;
    let records = interpolate_gaps(&records, config.max_gap);
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    Ok(Parsed {
        source: format!("{name} sha256:{}", sha256_hex(&bytes)),
        segments: segment_by_activity(&records, subject),
    })
}

/// Parses, cleans, segments and windows every selected subject file in `dir`.
/// Files are processed in parallel; the result is ordered by subject.
pub fn ingest_dir(dir: &Path, config: &IngestConfig) -> Result<WindowedDataset> {
    if config.window_len == 0 || config.stride == 0 {
        return Err(Error::InvalidConfig("window length and stride must be positive".into()));
    }
    let files: Vec<_> = discover_subject_files(dir)?
        .into_iter()
        .filter(|(s, _)| config.subjects.contains(&s.0))
        .collect();
    if files.is_empty() {
        return Err(Error::NoSubjectFiles(dir.to_path_buf()));
    }
    let parsed: Vec<Parsed> = files
        .par_iter()
        .map(|(s, p)| load_file(*s, p, config))
        .collect::<Result<_>>()?;
    let sources: Vec<String> = parsed.iter().map(|p| p.source.clone()).collect();
    let segments: Vec<(ActivitySegment, usize)> = parsed
        .into_iter()
        .enumerate()
        .flat_map(|(i, p)| p.segments.into_iter().map(move |s| (s, i)))
        .collect();
    let config_hash = sha256_hex(&serde_json::to_vec(&(config, &sources))?);
    let provenance = Provenance {
        sources,
        window_len: config.window_len,
        stride: config.stride,
        max_gap: config.max_gap,
        channel_units: CHANNEL_UNITS.into(),
        config_hash,
        generator: None,
    };
    Ok(WindowedDataset::from_segments(&segments, provenance))
}
