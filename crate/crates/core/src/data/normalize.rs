use serde::{Deserialize, Serialize};

use crate::data::raw::CHANNELS;
use crate::data::window::Window;
use crate::{Error, Result, Tensor};

/// Floor on the per-channel standard deviation.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-channel z-score statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: [f64; CHANNELS],
    /// Population standard deviation, floored at [`STD_FLOOR`].
    pub std: [f64; CHANNELS],
    /// Free-form description of the fitting set, e.g. the training subjects.
    pub fitted_on: String,
}

impl Normalizer {
    /// Fits on every sample of every window. The mean gets one correction
    /// pass so a constant channel maps to exact zeros.
    pub fn fit<'a>(
        windows: impl IntoIterator<Item = &'a Tensor> + Clone,
        fitted_on: impl Into<String>,
    ) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = [0.0; CHANNELS];
        for w in windows.clone() {
            check_channels(w)?;
            for row in w.data().chunks_exact(CHANNELS) {
                for c in 0..CHANNELS {
                    sum[c] += row[c];
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(Error::Empty("normalizer fitting set".into()));
        }
        let nf = n as f64;
        let mut mean = sum.map(|s| s / nf);
        let mut resid = [0.0; CHANNELS];
        for w in windows.clone() {
            for row in w.data().chunks_exact(CHANNELS) {
                for c in 0..CHANNELS {
                    resid[c] += row[c] - mean[c];
                }
            }
        }
        for c in 0..CHANNELS {
            mean[c] += resid[c] / nf;
        }
        let mut sq = [0.0; CHANNELS];
        for w in windows {
            for row in w.data().chunks_exact(CHANNELS) {
                for c in 0..CHANNELS {
                    let d = row[c] - mean[c];
                    sq[c] += d * d;
                }
            }
        }
        let std = sq.map(|s| (s / nf).sqrt().max(STD_FLOOR));
        Ok(Self {
            mean,
            std,
            fitted_on: fitted_on.into(),
        })
    }

    /// `(x − μ_c) / σ_c` in place.
    pub fn apply(&self, x: &mut Tensor) -> Result<()> {
        check_channels(x)?;
        for row in x.data_mut().chunks_exact_mut(CHANNELS) {
            for ((v, mean), std) in row.iter_mut().zip(&self.mean).zip(&self.std) {
                *v = (*v - mean) / std;
            }
        }
        Ok(())
    }

    /// Normalised copies of `windows`.
    pub fn apply_windows<'a>(&self, windows: impl IntoIterator<Item = &'a Window>) -> Result<Vec<Window>> {
        windows
            .into_iter()
            .map(|w| {
                let mut w = w.clone();
                self.apply(&mut w.samples)?;
                Ok(w)
            })
            .collect()
    }
}

fn check_channels(x: &Tensor) -> Result<()> {
    if x.rank() != 2 || x.shape()[1] != CHANNELS {
        return Err(Error::shape(
            "normalizer",
            format!("[_, {CHANNELS}]"),
            format!("{:?}", x.shape()),
        ));
    }
    Ok(())
}
