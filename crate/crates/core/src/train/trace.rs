use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Result;

/// Metrics recorded at the end of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Validation loss of the freshly initialised model.
    pub initial_val_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainTrace {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// Writes `epoch,train_loss,val_loss,val_acc` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.epochs {
            w.serialize(r)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_rows() {
        let t = TrainTrace {
            initial_val_loss: 1.4,
            epochs: vec![
                EpochRecord {
                    epoch: 1,
                    train_loss: 1.2,
                    val_loss: 1.1,
                    val_acc: 0.5,
                },
                EpochRecord {
                    epoch: 2,
                    train_loss: 0.8,
                    val_loss: 0.9,
                    val_acc: 0.75,
                },
            ],
            epochs_run: 2,
            best_epoch: 2,
            stopped_early: false,
        };
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "epoch,train_loss,val_loss,val_acc\n1,1.2,1.1,0.5\n2,0.8,0.9,0.75\n"
        );
        assert_eq!(t.best().unwrap().val_loss, 0.9);
    }
}
