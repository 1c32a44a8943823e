use rand::Rng;

use crate::{Error, Result, Tensor};

/// Inverted dropout. In training mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; in eval mode (or at
/// `rate == 0`) the input is returned unchanged.
pub fn dropout_apply<R: Rng + ?Sized>(x: &Tensor, rate: f64, rng: &mut R, training: bool) -> Result<Tensor> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(x.clone());
    }
    let mut out = x.clone();
    let mask = dropout_mask(x.len(), rate, rng);
    for (v, m) in out.data_mut().iter_mut().zip(&mask) {
        *v *= m;
    }
    Ok(out)
}

pub(crate) fn check_rate(rate: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidSpec(format!(
            "dropout rate must be in [0, 1), got {rate}"
        )));
    }
    Ok(())
}

/// Per-element multipliers: `0` for dropped, `1 / (1 - rate)` for kept.
pub(crate) fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn eval_mode_is_identity() {
        let x = Tensor::vector(vec![1.0, -2.0, 3.5]);
        let mut r = rng::stream(1);
        assert_eq!(dropout_apply(&x, 0.3, &mut r, false).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.0, &mut r, true).unwrap(), x);
        assert_eq!(dropout_apply(&x, 0.0, &mut r, false).unwrap(), x);
    }

    #[test]
    fn rejects_rate_of_one() {
        let x = Tensor::vector(vec![1.0]);
        let mut r = rng::stream(1);
        assert!(dropout_apply(&x, 1.0, &mut r, true).is_err());
        assert!(dropout_apply(&x, -0.1, &mut r, true).is_err());
    }

    #[test]
    fn monte_carlo_keeps_expectation() {
        let n = 1_000_000;
        let x = Tensor::vector(vec![1.0; n]);
        let mut r = rng::stream(2024);
        let y = dropout_apply(&x, 0.3, &mut r, true).unwrap();
        let mean = y.data().iter().sum::<f64>() / n as f64;
        let zeros = y.data().iter().filter(|&&v| v == 0.0).count() as f64 / n as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
        assert!((zeros - 0.3).abs() < 0.01, "zero fraction {zeros}");
    }
}
