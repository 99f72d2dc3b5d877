use super::loss::bce_loss;
use super::model::{MlpModel, HIDDEN, INPUTS};
use crate::error::{Error, Result};

/// Loss of the batch and its gradient with respect to every parameter,
/// averaged over the batch.
///
/// The output delta uses the unclamped identity `dL/dz = y_hat - y`. The
/// ReLU derivative at exactly zero is taken as 0.
#[allow(clippy::needless_range_loop)]
pub fn loss_and_gradient(
    model: &MlpModel,
    features: &[[f64; INPUTS]],
    labels: &[f64],
) -> Result<(f64, MlpModel)> {
    if features.is_empty() {
        return Err(Error::InsufficientData("gradient of an empty batch".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} labels", features.len()),
            found: format!("{} labels", labels.len()),
        });
    }
    let inv_n = 1.0 / features.len() as f64;
    let mut grad = MlpModel::zeros();
    let mut predictions = Vec::with_capacity(features.len());

    for (x, &y) in features.iter().zip(labels) {
        let act = model.activations(x);
        predictions.push(act.output);

        let dz3 = (act.output - y) * inv_n;
        grad.b3 += dz3;
        let mut dz2 = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            grad.w3[j] += dz3 * act.h2[j];
            dz2[j] = if act.z2[j] > 0.0 {
                dz3 * model.w3[j]
            } else {
                0.0
            };
        }

        let mut dh1 = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            grad.b2[j] += dz2[j];
            for k in 0..HIDDEN {
                grad.w2[j][k] += dz2[j] * act.h1[k];
                dh1[k] += dz2[j] * model.w2[j][k];
            }
        }

        for k in 0..HIDDEN {
            let dz1 = if act.z1[k] > 0.0 { dh1[k] } else { 0.0 };
            grad.b1[k] += dz1;
            for i in 0..INPUTS {
                grad.w1[k][i] += dz1 * x[i];
            }
        }
    }

    if !grad.is_finite() {
        return Err(Error::NonFinite("gradient".into()));
    }
    let loss = bce_loss(&predictions, labels)?;
    Ok((loss, grad))
}

/// Gradient of the mean binary cross-entropy of `model` over the batch.
pub fn backward(model: &MlpModel, features: &[[f64; INPUTS]], labels: &[f64]) -> Result<MlpModel> {
    loss_and_gradient(model, features, labels).map(|(_, g)| g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mirrored_labels_cancel_output_bias() {
        let x = [[0.3, 0.1, 0.7, 0.2]; 2];
        let g = backward(&MlpModel::zeros(), &x, &[1.0, 0.0]).unwrap();
        assert_eq!(g.b3, 0.0);
    }

    #[test]
    fn batch_gradient_is_mean_of_singles() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let model = MlpModel::init(&mut rng);
        let xs: Vec<[f64; 4]> = (0..2)
            .map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)))
            .collect();
        let ys = [1.0, 0.0];
        let both = backward(&model, &xs, &ys).unwrap().to_flat();
        let a = backward(&model, &xs[..1], &ys[..1]).unwrap().to_flat();
        let b = backward(&model, &xs[1..], &ys[1..]).unwrap().to_flat();
        for ((g, ga), gb) in both.iter().zip(&a).zip(&b) {
            assert!((g - (ga + gb) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_batch_is_an_error() {
        assert!(backward(&MlpModel::zeros(), &[], &[]).is_err());
    }
}
