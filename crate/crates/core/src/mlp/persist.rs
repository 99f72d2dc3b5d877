//! JSON model files.
//!
//! A file records the format name and version, the architecture, the input
//! standardization, every parameter, and the training configuration it was
//! produced with. Reals are written in shortest round-trip form, so loading
//! restores every parameter bit for bit.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::model::{Classifier, MlpModel, Standardizer, HIDDEN, INPUTS};
use super::TrainConfig;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "concentration-mlp";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Architecture {
    layers: Vec<usize>,
    activations: Vec<String>,
}

impl Architecture {
    fn expected() -> Self {
        Architecture {
            layers: vec![INPUTS, HIDDEN, HIDDEN, 1],
            activations: vec!["relu".into(), "relu".into(), "sigmoid".into()],
        }
    }
}

#[derive(Serialize, Deserialize)]
struct Parameters {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    w3: Vec<Vec<f64>>,
    b3: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    architecture: Architecture,
    scaler: Standardizer,
    parameters: Parameters,
    train_config: TrainConfig,
    seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedModel {
    pub classifier: Classifier,
    pub train_config: TrainConfig,
}

pub fn save_model<W: Write>(
    classifier: &Classifier,
    config: &TrainConfig,
    mut sink: W,
) -> Result<()> {
    let m = &classifier.network;
    let file = ModelFile {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        architecture: Architecture::expected(),
        scaler: classifier.scaler.clone(),
        parameters: Parameters {
            w1: m.w1.iter().map(|r| r.to_vec()).collect(),
            b1: m.b1.to_vec(),
            w2: m.w2.iter().map(|r| r.to_vec()).collect(),
            b2: m.b2.to_vec(),
            w3: vec![m.w3.to_vec()],
            b3: vec![m.b3],
        },
        train_config: config.clone(),
        seed: config.seed,
    };
    serde_json::to_writer_pretty(&mut sink, &file).map_err(std::io::Error::from)?;
    sink.write_all(b"\n")?;
    sink.flush()?;
    Ok(())
}

fn matrix<const R: usize, const C: usize>(name: &str, rows: &[Vec<f64>]) -> Result<[[f64; C]; R]> {
    let mismatch = || Error::ShapeMismatch {
        expected: format!("{name}: {R}x{C}"),
        found: format!(
            "{name}: {}x{}",
            rows.len(),
            rows.first().map_or(0, |r| r.len())
        ),
    };
    if rows.len() != R {
        return Err(mismatch());
    }
    let mut out = [[0.0; C]; R];
    for (dst, src) in out.iter_mut().zip(rows) {
        *dst = src.as_slice().try_into().map_err(|_| mismatch())?;
    }
    Ok(out)
}

fn vector<const N: usize>(name: &str, v: &[f64]) -> Result<[f64; N]> {
    v.try_into().map_err(|_| Error::ShapeMismatch {
        expected: format!("{name}: {N}"),
        found: format!("{name}: {}", v.len()),
    })
}

pub fn load_model<R: Read>(source: R) -> Result<LoadedModel> {
    let file: ModelFile =
        serde_json::from_reader(source).map_err(|e| Error::Corrupt(e.to_string()))?;
    if file.format != FORMAT_NAME {
        return Err(Error::Corrupt(format!("unknown format {:?}", file.format)));
    }
    if file.version != FORMAT_VERSION {
        return Err(Error::Version {
            expected: FORMAT_VERSION,
            found: file.version,
        });
    }
    let expected = Architecture::expected();
    if file.architecture != expected {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?} {:?}", expected.layers, expected.activations),
            found: format!(
                "{:?} {:?}",
                file.architecture.layers, file.architecture.activations
            ),
        });
    }
    let p = &file.parameters;
    let network = MlpModel {
        w1: matrix::<HIDDEN, INPUTS>("w1", &p.w1)?,
        b1: vector("b1", &p.b1)?,
        w2: matrix::<HIDDEN, HIDDEN>("w2", &p.w2)?,
        b2: vector("b2", &p.b2)?,
        w3: matrix::<1, HIDDEN>("w3", &p.w3)?[0],
        b3: vector::<1>("b3", &p.b3)?[0],
    };
    if !network.is_finite() {
        return Err(Error::Corrupt("non-finite parameter".into()));
    }
    Ok(LoadedModel {
        classifier: Classifier {
            network,
            scaler: file.scaler,
        },
        train_config: file.train_config,
    })
}
