use crate::nn::ParameterBundle;

/// Patience-based early stopping on validation loss.
///
/// Only a strict decrease counts as an improvement.
#[derive(Debug, Clone)]
pub struct EarlyStopState {
    patience: usize,
    best_loss: f64,
    best_epoch: usize,
    best_params: Option<ParameterBundle>,
    since_improvement: usize,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        Self {
            patience,
            best_loss: f64::INFINITY,
            best_epoch: 0,
            best_params: None,
            since_improvement: 0,
        }
    }

    /// Records the validation loss of `epoch` (1-based). Returns `true` when
    /// training should stop.
    pub fn update(&mut self, epoch: usize, val_loss: f64, params: &ParameterBundle) -> bool {
        if val_loss < self.best_loss {
            self.best_loss = val_loss;
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
            self.since_improvement = 0;
        } else {
            self.since_improvement += 1;
        }
        self.since_improvement >= self.patience
    }

    pub fn best_loss(&self) -> f64 {
        self.best_loss
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn epochs_since_improvement(&self) -> usize {
        self.since_improvement
    }

    pub fn into_best_params(self) -> Option<ParameterBundle> {
        self.best_params
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty() -> ParameterBundle {
        ParameterBundle { layers: Vec::new() }
    }

    #[test]
    fn patience_two() {
        let mut es = EarlyStopState::new(2);
        let losses = [1.0, 0.9, 0.95, 0.96];
        let stops: Vec<bool> = losses
            .iter()
            .enumerate()
            .map(|(i, &l)| es.update(i + 1, l, &empty()))
            .collect();
        assert_eq!(stops, [false, false, false, true]);
        assert_eq!(es.best_epoch(), 2);
        assert_eq!(es.best_loss(), 0.9);
    }

    #[test]
    fn equal_loss_is_not_an_improvement() {
        let mut es = EarlyStopState::new(1);
        assert!(!es.update(1, 0.5, &empty()));
        assert!(es.update(2, 0.5, &empty()));
        assert_eq!(es.best_epoch(), 1);
    }

    #[test]
    fn nan_never_improves() {
        let mut es = EarlyStopState::new(3);
        es.update(1, 0.5, &empty());
        es.update(2, f64::NAN, &empty());
        assert_eq!(es.best_loss(), 0.5);
        assert_eq!(es.epochs_since_improvement(), 1);
    }
}
