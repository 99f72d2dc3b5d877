use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const INPUTS: usize = 4;
pub const HIDDEN: usize = 8;
pub const PARAM_COUNT: usize = HIDDEN * INPUTS + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1;

/// Largest double below 1 and smallest positive normal double; the sigmoid
/// output is kept inside these so it never reaches 0 or 1 exactly.
const OUTPUT_MAX: f64 = 1.0 - f64::EPSILON / 2.0;
const OUTPUT_MIN: f64 = f64::MIN_POSITIVE;

/// Parameters of the 4-8-8-1 network. Hidden layers use ReLU, the output
/// unit uses a sigmoid. Gradients share this type.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub w1: [[f64; INPUTS]; HIDDEN],
    pub b1: [f64; HIDDEN],
    pub w2: [[f64; HIDDEN]; HIDDEN],
    pub b2: [f64; HIDDEN],
    pub w3: [f64; HIDDEN],
    pub b3: f64,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Activations {
    pub z1: [f64; HIDDEN],
    pub h1: [f64; HIDDEN],
    pub z2: [f64; HIDDEN],
    pub h2: [f64; HIDDEN],
    pub output: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(OUTPUT_MIN, OUTPUT_MAX)
}

impl MlpModel {
    pub fn zeros() -> Self {
        MlpModel {
            w1: [[0.0; INPUTS]; HIDDEN],
            b1: [0.0; HIDDEN],
            w2: [[0.0; HIDDEN]; HIDDEN],
            b2: [0.0; HIDDEN],
            w3: [0.0; HIDDEN],
            b3: 0.0,
        }
    }

    /// He-uniform weights for the ReLU layers, Glorot-uniform for the
    /// sigmoid output, zero biases.
    pub fn init<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut m = MlpModel::zeros();
        let he1 = (6.0 / INPUTS as f64).sqrt();
        let he2 = (6.0 / HIDDEN as f64).sqrt();
        let glorot = (6.0 / (HIDDEN + 1) as f64).sqrt();
        for w in m.w1.iter_mut().flatten() {
            *w = rng.random_range(-he1..he1);
        }
        for w in m.w2.iter_mut().flatten() {
            *w = rng.random_range(-he2..he2);
        }
        for w in m.w3.iter_mut() {
            *w = rng.random_range(-glorot..glorot);
        }
        m
    }

    pub(crate) fn activations(&self, x: &[f64; INPUTS]) -> Activations {
        let mut z1 = self.b1;
        for (z, row) in z1.iter_mut().zip(&self.w1) {
            *z += row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
        let h1 = z1.map(|z| z.max(0.0));

        let mut z2 = self.b2;
        for (z, row) in z2.iter_mut().zip(&self.w2) {
            *z += row.iter().zip(&h1).map(|(w, v)| w * v).sum::<f64>();
        }
        let h2 = z2.map(|z| z.max(0.0));

        let z3 = self.b3 + self.w3.iter().zip(&h2).map(|(w, v)| w * v).sum::<f64>();
        Activations {
            z1,
            h1,
            z2,
            h2,
            output: sigmoid(z3),
        }
    }

    /// Network output in (0, 1).
    pub fn forward(&self, x: &[f64; INPUTS]) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network input".into()));
        }
        let out = self.activations(x).output;
        if out.is_nan() {
            return Err(Error::NonFinite("network output".into()));
        }
        Ok(out)
    }

    /// Parameters in a fixed order: w1 (row-major), b1, w2, b2, w3, b3.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(PARAM_COUNT);
        out.extend(self.w1.iter().flatten());
        out.extend(&self.b1);
        out.extend(self.w2.iter().flatten());
        out.extend(&self.b2);
        out.extend(&self.w3);
        out.push(self.b3);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() != PARAM_COUNT {
            return Err(Error::ShapeMismatch {
                expected: format!("{PARAM_COUNT} parameters"),
                found: format!("{} parameters", flat.len()),
            });
        }
        let mut it = flat.iter().copied();
        let mut m = MlpModel::zeros();
        for w in m.w1.iter_mut().flatten() {
            *w = it.next().unwrap();
        }
        for b in m.b1.iter_mut() {
            *b = it.next().unwrap();
        }
        for w in m.w2.iter_mut().flatten() {
            *w = it.next().unwrap();
        }
        for b in m.b2.iter_mut() {
            *b = it.next().unwrap();
        }
        for w in m.w3.iter_mut() {
            *w = it.next().unwrap();
        }
        m.b3 = it.next().unwrap();
        Ok(m)
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Per-feature affine map applied before the network: `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: [f64; INPUTS],
    pub scale: [f64; INPUTS],
}

impl Standardizer {
    pub fn identity() -> Self {
        Standardizer {
            mean: [0.0; INPUTS],
            scale: [1.0; INPUTS],
        }
    }

    /// Fits mean and population standard deviation per feature. Constant
    /// features keep unit scale.
    pub fn fit(rows: &[[f64; INPUTS]]) -> Self {
        if rows.is_empty() {
            return Standardizer::identity();
        }
        let n = rows.len() as f64;
        let mut mean = [0.0; INPUTS];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut scale = [0.0; INPUTS];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in scale.iter_mut() {
            *s = (*s / n).sqrt();
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[f64; INPUTS]) -> [f64; INPUTS] {
        std::array::from_fn(|i| (x[i] - self.mean[i]) / self.scale[i])
    }
}

/// A trained network together with its input standardization.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub network: MlpModel,
    pub scaler: Standardizer,
}

impl Classifier {
    /// Probability of the high-concentration class for raw features.
    pub fn predict(&self, features: &[f64; INPUTS]) -> Result<f64> {
        self.network.forward(&self.scaler.apply(features))
    }
}
