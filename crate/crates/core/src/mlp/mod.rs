//! The recognition network: a 4-8-8-1 perceptron trained with binary
//! cross-entropy and Adam, plus stratified k-fold evaluation and a text
//! model format.

mod adam;
mod backprop;
mod cv;
mod loss;
mod model;
mod persist;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamState};
pub use backprop::{backward, loss_and_gradient};
pub use cv::{kfold_cv, kfold_cv_with, median, stratified_folds, CvReport, FoldSplit};
pub use loss::{bce_loss, PREDICTION_CLAMP};
pub use model::{Classifier, MlpModel, Standardizer, HIDDEN, INPUTS, PARAM_COUNT};
pub use persist::{load_model, save_model, LoadedModel, FORMAT_NAME, FORMAT_VERSION};

use crate::error::{Error, Result};
use crate::features::FeatureVector;
use crate::keypoint_io::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub folds: usize,
    /// Decision threshold on the network output for accuracy.
    pub threshold: f64,
    /// Fit a per-feature standardization on the training data.
    pub standardize: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            folds: 5,
            threshold: 0.5,
            standardize: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be positive");
        }
        if !(self.beta1 > 0.0 && self.beta1 < 1.0 && self.beta2 > 0.0 && self.beta2 < 1.0) {
            return fail("beta1 and beta2 must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return fail("epsilon must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return fail("epochs and batch_size must be positive");
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail("threshold must lie in (0, 1)");
        }
        Ok(())
    }
}

/// Labeled feature rows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub features: Vec<[f64; INPUTS]>,
    pub labels: Vec<Label>,
}

impl Dataset {
    pub fn new(features: Vec<[f64; INPUTS]>, labels: Vec<Label>) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} labels", features.len()),
                found: format!("{} labels", labels.len()),
            });
        }
        Ok(Dataset { features, labels })
    }

    /// Collects labeled vectors; unlabeled vectors are an error.
    pub fn from_vectors(vectors: &[FeatureVector]) -> Result<Self> {
        let labels = vectors
            .iter()
            .map(|v| {
                v.label.ok_or_else(|| {
                    Error::InsufficientData(format!("window {} has no label", v.window_index))
                })
            })
            .collect::<Result<_>>()?;
        Ok(Dataset {
            features: vectors.iter().map(FeatureVector::values).collect(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// `(low, high)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let high = self.labels.iter().filter(|&&l| l == Label::High).count();
        (self.len() - high, high)
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: indices.iter().map(|&i| self.features[i]).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    fn targets(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.as_f64()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub classifier: Classifier,
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
    pub single_class: bool,
}

/// Trains a freshly initialized network. Initialization and shuffling are
/// drawn from `config.seed`, so equal inputs give bit-identical weights.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::InsufficientData("empty training set".into()));
    }
    let (low, high) = dataset.class_counts();
    let single_class = low == 0 || high == 0;
    if single_class {
        log::warn!("training set contains a single class ({low} low, {high} high)");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let network = MlpModel::init(&mut rng);
    let scaler = if config.standardize {
        Standardizer::fit(&dataset.features)
    } else {
        Standardizer::identity()
    };
    let inputs: Vec<[f64; INPUTS]> = dataset.features.iter().map(|x| scaler.apply(x)).collect();
    if inputs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("training features".into()));
    }
    let targets = dataset.targets();

    let batch = config.batch_size.min(dataset.len());
    let mut params = network.to_flat();
    let mut state = AdamState::new(PARAM_COUNT);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut xb = Vec::with_capacity(batch);
    let mut yb = Vec::with_capacity(batch);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            xb.clear();
            yb.clear();
            xb.extend(chunk.iter().map(|&i| inputs[i]));
            yb.extend(chunk.iter().map(|&i| targets[i]));
            let model = MlpModel::from_flat(&params)?;
            let (loss, grad) = loss_and_gradient(&model, &xb, &yb)?;
            epoch_loss += loss * chunk.len() as f64;
            adam_step(&mut params, &grad.to_flat(), &mut state, config)?;
            if params.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite(format!("parameters after epoch {epoch}")));
            }
        }
        loss_history.push(epoch_loss / dataset.len() as f64);
    }

    Ok(TrainOutcome {
        classifier: Classifier {
            network: MlpModel::from_flat(&params)?,
            scaler,
        },
        loss_history,
        single_class,
    })
}

/// Fraction of rows whose thresholded prediction matches the label.
pub fn accuracy(classifier: &Classifier, dataset: &Dataset, threshold: f64) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::InsufficientData("accuracy of an empty set".into()));
    }
    let mut correct = 0usize;
    for (x, &label) in dataset.features.iter().zip(&dataset.labels) {
        let predicted = if classifier.predict(x)? >= threshold {
            Label::High
        } else {
            Label::Low
        };
        correct += usize::from(predicted == label);
    }
    Ok(correct as f64 / dataset.len() as f64)
}

/// Recognition levels, one per feature window.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RecognitionSeries {
    pub values: Vec<f64>,
    pub t_seconds: Vec<f64>,
}

pub fn predict_series(
    classifier: &Classifier,
    features: &[FeatureVector],
) -> Result<RecognitionSeries> {
    let values = features
        .iter()
        .map(|f| classifier.predict(&f.values()))
        .collect::<Result<_>>()?;
    Ok(RecognitionSeries {
        values,
        t_seconds: features.iter().map(|f| f.t_seconds).collect(),
    })
}
