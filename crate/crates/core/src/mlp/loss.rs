use crate::error::{Error, Result};

/// Predictions are clamped to `[PREDICTION_CLAMP, 1 - PREDICTION_CLAMP]`
/// before taking logarithms.
pub const PREDICTION_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy over the batch.
pub fn bce_loss(predictions: &[f64], labels: &[f64]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", predictions.len()),
            found: format!("{} labels", labels.len()),
        });
    }
    if predictions.is_empty() {
        return Err(Error::InsufficientData("loss of an empty batch".into()));
    }
    let total: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(PREDICTION_CLAMP, 1.0 - PREDICTION_CLAMP);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / predictions.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coin_flip_costs_ln2() {
        let ln2 = std::f64::consts::LN_2;
        assert!((bce_loss(&[0.5], &[1.0]).unwrap() - ln2).abs() < 1e-15);
        assert!((bce_loss(&[0.5], &[0.0]).unwrap() - ln2).abs() < 1e-15);
    }

    #[test]
    fn perfect_prediction_limit() {
        assert!(bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap() <= 1e-11);
        assert!(bce_loss(&[1.0 - 1e-12], &[1.0]).unwrap() <= 1e-11);
    }

    #[test]
    fn two_sample_batch() {
        let expected = (-(0.9f64.ln()) - 0.8f64.ln()) / 2.0;
        let got = bce_loss(&[0.9, 0.2], &[1.0, 0.0]).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.164252).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        assert!(bce_loss(&[], &[]).is_err());
        assert!(bce_loss(&[0.5], &[1.0, 0.0]).is_err());
    }
}
