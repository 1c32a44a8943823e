//! PAMAP2 `.dat` parsing and short-gap interpolation.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Columns per line in a PAMAP2 protocol file.
pub const COLUMNS: usize = 54;
/// Ankle IMU ±16g acceleration x/y/z.
pub const ANKLE_ACC16: [usize; 3] = [38, 39, 40];
/// Ankle IMU gyroscope x/y/z.
pub const ANKLE_GYRO: [usize; 3] = [44, 45, 46];
pub const CHANNELS: usize = 6;
/// Nominal sampling period in seconds (100 Hz).
pub const SAMPLE_PERIOD: f64 = 0.01;

/// Upper bound on |acceleration| (m/s²) accepted by [`check_plausible`]:
/// a little above the ±16g sensor range.
pub const MAX_ABS_ACC: f64 = 200.0;
/// Upper bound on |angular velocity| (rad/s), about 2000 deg/s.
pub const MAX_ABS_GYRO: f64 = 35.0;

/// Subject identifier as used in the dataset file names (101 to 109).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub u16);

impl std::fmt::Display for SubjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One 10 ms tick: timestamp, activity code, and the six ankle channels
/// (`None` where the file has `NaN`).
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: f64,
    pub activity_id: u16,
    pub channels: [Option<f64>; CHANNELS],
}

impl RawRecord {
    pub fn is_complete(&self) -> bool {
        self.channels.iter().all(Option::is_some)
    }
}

fn number(tok: &str, line: usize, col: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("column {col}: cannot read `{tok}` as a number"),
    })
}

/// Parses a space-separated PAMAP2 file. Blank lines are skipped; line numbers
/// in errors are 1-based.
pub fn parse_dat(bytes: &[u8]) -> Result<Vec<RawRecord>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
        message: "invalid UTF-8".into(),
    })?;
    let mut out = Vec::new();
    let mut last_ts = f64::NEG_INFINITY;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != COLUMNS {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {COLUMNS} columns, found {}", toks.len()),
            });
        }
        let timestamp = number(toks[0], lineno, 0)?;
        if !timestamp.is_finite() {
            return Err(Error::Parse {
                line: lineno,
                message: "timestamp is not finite".into(),
            });
        }
        if timestamp < last_ts {
            return Err(Error::Parse {
                line: lineno,
                message: format!("timestamp {timestamp} decreases (previous {last_ts})"),
            });
        }
        last_ts = timestamp;
        let act = number(toks[1], lineno, 1)?;
        if !(act.fract() == 0.0 && (0.0..=u16::MAX as f64).contains(&act)) {
            return Err(Error::Parse {
                line: lineno,
                message: format!("column 1: activity id `{}` is not a small integer", toks[1]),
            });
        }
        let mut channels = [None; CHANNELS];
        for (slot, &col) in channels.iter_mut().zip(ANKLE_ACC16.iter().chain(&ANKLE_GYRO)) {
            let v = number(toks[col], lineno, col)?;
            *slot = if v.is_nan() {
                None
            } else if v.is_finite() {
                Some(v)
            } else {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("column {col}: infinite value"),
                });
            };
        }
        out.push(RawRecord {
            timestamp,
            activity_id: act as u16,
            channels,
        });
    }
    Ok(out)
}

/// Rejects values outside the physical sensor ranges. `index` in the error is
/// the record position (1-based, blank lines not counted).
pub fn check_plausible(records: &[RawRecord]) -> Result<()> {
    for (i, r) in records.iter().enumerate() {
        for (c, v) in r.channels.iter().enumerate() {
            let limit = if c < 3 { MAX_ABS_ACC } else { MAX_ABS_GYRO };
            if let Some(v) = v {
                if v.abs() > limit {
                    return Err(Error::Parse {
                        line: i + 1,
                        message: format!("channel {c} value {v} outside ±{limit}"),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Fills runs of at most `max_gap` consecutive missing samples per channel by
/// linear interpolation over sample index. Runs touching either end of the
/// record list, or longer than `max_gap`, stay missing.
pub fn interpolate_gaps(records: &[RawRecord], max_gap: usize) -> Vec<RawRecord> {
    let mut out = records.to_vec();
    for c in 0..CHANNELS {
        let mut i = 0;
        while i < out.len() {
            if out[i].channels[c].is_some() {
                i += 1;
                continue;
            }
            let start = i;
            while i < out.len() && out[i].channels[c].is_none() {
                i += 1;
            }
            let run = i - start;
            if start == 0 || i == out.len() || run > max_gap {
                continue;
            }
            let (a, b) = (out[start - 1].channels[c].unwrap(), out[i].channels[c].unwrap());
            let span = (run + 1) as f64;
            for (k, rec) in out[start..i].iter_mut().enumerate() {
                let w = (k + 1) as f64 / span;
                rec.channels[c] = Some(a + (b - a) * w);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(v: Option<f64>) -> RawRecord {
        RawRecord {
            timestamp: 0.0,
            activity_id: 4,
            channels: [v; CHANNELS],
        }
    }

    #[test]
    fn midpoint() {
        let rs = vec![rec(Some(1.0)), rec(None), rec(Some(3.0))];
        let out = interpolate_gaps(&rs, 10);
        assert_eq!(out[1].channels[0], Some(2.0));
    }

    #[test]
    fn long_run_stays_missing() {
        let mut rs = vec![rec(Some(0.0))];
        rs.extend((0..11).map(|_| rec(None)));
        rs.push(rec(Some(1.0)));
        let out = interpolate_gaps(&rs, 10);
        assert!(out[1..12].iter().all(|r| r.channels[0].is_none()));
        rs.remove(1);
        let out = interpolate_gaps(&rs, 10);
        assert!(out.iter().all(RawRecord::is_complete));
        assert!((out[5].channels[2].unwrap() - 5.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn edges_stay_missing() {
        let rs = vec![rec(None), rec(Some(1.0)), rec(None)];
        let out = interpolate_gaps(&rs, 10);
        assert_eq!(out, rs);
    }

    #[test]
    fn wrong_column_count_names_line() {
        let good = vec!["1"; COLUMNS].join(" ");
        let bad = vec!["1"; COLUMNS - 1].join(" ");
        let text = format!("{good}\n{bad}\n");
        match parse_dat(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unreadable_number_names_line() {
        let mut toks = vec!["0"; COLUMNS];
        toks[39] = "abc";
        match parse_dat(toks.join(" ").as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 1);
                assert!(message.contains("39"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn implausible_values_rejected() {
        let mut r = rec(Some(1.0));
        r.channels[4] = Some(100.0);
        assert!(check_plausible(&[rec(Some(1.0)), r]).is_err());
        assert!(check_plausible(&[rec(Some(40.0))]).is_err());
        assert!(check_plausible(&[rec(Some(-34.0))]).is_ok());
    }
}
