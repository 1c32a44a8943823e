use serde::{Deserialize, Serialize};

use crate::data::raw::{RawRecord, SubjectId, CHANNELS, SAMPLE_PERIOD};
use crate::{Error, Result};

/// The four target activities, in class-index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activity {
    Standing,
    Walking,
    Ascending,
    Descending,
}

impl Activity {
    pub const ALL: [Activity; 4] = [
        Activity::Standing,
        Activity::Walking,
        Activity::Ascending,
        Activity::Descending,
    ];

    /// Maps a PAMAP2 activity code; `None` for the codes we do not use.
    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            3 => Some(Activity::Standing),
            4 => Some(Activity::Walking),
            12 => Some(Activity::Ascending),
            13 => Some(Activity::Descending),
            _ => None,
        }
    }

    pub fn code(self) -> u16 {
        match self {
            Activity::Standing => 3,
            Activity::Walking => 4,
            Activity::Ascending => 12,
            Activity::Descending => 13,
        }
    }

    pub fn class_index(self) -> usize {
        self as usize
    }

    pub fn from_class(index: usize) -> Result<Self> {
        Self::ALL.get(index).copied().ok_or(Error::ClassOutOfRange {
            index,
            classes: Self::ALL.len(),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Activity::Standing => "standing",
            Activity::Walking => "walking",
            Activity::Ascending => "ascending",
            Activity::Descending => "descending",
        }
    }
}

/// A gap-free run of one activity for one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivitySegment {
    pub subject: SubjectId,
    pub activity: Activity,
    pub start_timestamp: f64,
    /// Index of the first record in the source file.
    pub start_record: usize,
    pub samples: Vec<[f64; CHANNELS]>,
}

impl ActivitySegment {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Timestamps further apart than this break a segment.
pub const MAX_TICK: f64 = 1.5 * SAMPLE_PERIOD;

/// Splits records into maximal runs of one target activity. A run also ends
/// at any sample with a missing channel and at any timestamp jump larger than
/// [`MAX_TICK`].
pub fn segment_by_activity(records: &[RawRecord], subject: SubjectId) -> Vec<ActivitySegment> {
    let mut out: Vec<ActivitySegment> = Vec::new();
    let mut current: Option<ActivitySegment> = None;
    let mut prev_ts = f64::NAN;
    for (i, r) in records.iter().enumerate() {
        let activity = Activity::from_code(r.activity_id);
        let values: Option<Vec<f64>> = r.channels.iter().copied().collect();
        let continues = match (&current, activity) {
            (Some(seg), Some(a)) => values.is_some() && seg.activity == a && r.timestamp - prev_ts <= MAX_TICK,
            _ => false,
        };
        prev_ts = r.timestamp;
        if !continues {
            out.extend(current.take());
        }
        let (Some(a), Some(v)) = (activity, values) else {
            continue;
        };
        let sample: [f64; CHANNELS] = v.try_into().expect("six channels");
        current
            .get_or_insert_with(|| ActivitySegment {
                subject,
                activity: a,
                start_timestamp: r.timestamp,
                start_record: i,
                samples: Vec::new(),
            })
            .samples
            .push(sample);
    }
    out.extend(current);
    out
}
