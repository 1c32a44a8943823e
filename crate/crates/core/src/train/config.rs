use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Optimiser and loop settings. No published values exist; these defaults are
/// ours and every report records the values actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without a strict validation-loss improvement before stopping.
    pub patience: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Fraction of training windows held out (per class) for early stopping.
    pub validation_fraction: f64,
    pub master_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 1000,
            patience: 20,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            validation_fraction: 0.1,
            master_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive");
        }
        if self.patience == 0 {
            return bad("patience must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad("epsilon must be positive");
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        for cfg in [
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                validation_fraction: 1.0,
                ..Default::default()
            },
            TrainConfig {
                validation_fraction: 0.0,
                ..Default::default()
            },
            TrainConfig {
                beta2: 1.0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: f64::NAN,
                ..Default::default()
            },
        ] {
            assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn partial_json_fills_defaults() {
        let cfg: TrainConfig = serde_json::from_str(r#"{"batch_size": 16}"#).unwrap();
        assert_eq!(cfg.batch_size, 16);
        assert_eq!(cfg.patience, 20);
    }
}
