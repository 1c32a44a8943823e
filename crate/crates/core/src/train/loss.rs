use crate::nn::model::check_one_hot;
use crate::{Error, Result};

/// Probabilities are floored here before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

/// `−Σ y_i ln max(p_i, 1e-12)` for a one-hot `y`.
pub fn categorical_crossentropy(p: &[f64], y: &[f64]) -> Result<f64> {
    if p.len() != y.len() {
        return Err(Error::NotOneHot { classes: p.len() });
    }
    let class = check_one_hot(y, p.len())?;
    Ok(-p[class].max(PROB_FLOOR).ln())
}

/// Mean cross-entropy over a batch of `(p, y)` pairs.
pub fn batch_crossentropy<'a>(pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>) -> Result<f64> {
    let mut total = 0.0;
    let mut n = 0usize;
    for (p, y) in pairs {
        total += categorical_crossentropy(p, y)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Empty("batch".into()));
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_prediction_has_zero_loss() {
        let y = [0.0, 0.0, 1.0, 0.0];
        assert_eq!(categorical_crossentropy(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn uniform_prediction_costs_ln4() {
        let p = [0.25; 4];
        let y = [0.0, 1.0, 0.0, 0.0];
        let l = categorical_crossentropy(&p, &y).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-15);
        assert!((l - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn batch_mean_of_the_two() {
        let y = [0.0, 1.0, 0.0, 0.0];
        let p = [0.25; 4];
        let l = batch_crossentropy([(&y[..], &y[..]), (&p[..], &y[..])]).unwrap();
        assert!((l - 4f64.ln() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn floor_prevents_infinity() {
        let l = categorical_crossentropy(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!((l - 1e-12f64.ln().abs()).abs() < 1e-9);
    }

    #[test]
    fn rejects_soft_labels() {
        assert!(categorical_crossentropy(&[0.5, 0.5], &[0.5, 0.5]).is_err());
    }
}
