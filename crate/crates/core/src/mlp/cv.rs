use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{accuracy, train, Dataset, TrainConfig};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::keypoint_io::Label;

/// Held-out index sets, one per fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldSplit {
    pub folds: Vec<Vec<usize>>,
    /// False when some class had fewer members than folds and the split
    /// fell back to plain shuffling.
    pub stratified: bool,
}

impl FoldSplit {
    /// Indices outside fold `k`, in ascending order.
    pub fn train_indices(&self, k: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .folds
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != k)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        out.sort_unstable();
        out
    }
}

/// Splits indices into `k` disjoint, exhaustive folds. Each class is
/// shuffled and dealt round-robin, continuing where the previous class
/// stopped, so per-class and total fold sizes differ by at most one.
pub fn stratified_folds(labels: &[Label], k: usize, seed: u64) -> Result<FoldSplit> {
    if k < 2 {
        return Err(Error::Config(format!(
            "k-fold needs at least 2 folds, got {k}"
        )));
    }
    if k > labels.len() {
        return Err(Error::InsufficientData(format!(
            "{k} folds requested for {} samples",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_F01D);
    let mut classes: Vec<Vec<usize>> = [Label::Low, Label::High]
        .iter()
        .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();

    let stratified = classes.iter().all(|c| c.is_empty() || c.len() >= k);
    if !stratified {
        log::warn!("a class has fewer members than {k} folds; using unstratified folds");
        classes = vec![(0..labels.len()).collect()];
    }

    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for members in classes.iter_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(FoldSplit { folds, stratified })
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub median: f64,
    pub split: FoldSplit,
}

pub fn kfold_cv(dataset: &Dataset, config: &TrainConfig) -> Result<CvReport> {
    kfold_cv_with(dataset, config, Execution::default())
}

/// Trains one model per fold on the remaining folds and scores it on the
/// held-out fold. Fold `k` trains with seed `config.seed + k`, so parallel
/// and sequential runs agree exactly.
pub fn kfold_cv_with(dataset: &Dataset, config: &TrainConfig, exec: Execution) -> Result<CvReport> {
    config.validate()?;
    let split = stratified_folds(&dataset.labels, config.folds, config.seed)?;
    let results = exec.map_range(split.folds.len(), |k| -> Result<f64> {
        let fold_cfg = TrainConfig {
            seed: config.seed.wrapping_add(k as u64),
            ..config.clone()
        };
        let outcome = train(&dataset.subset(&split.train_indices(k)), &fold_cfg)?;
        accuracy(
            &outcome.classifier,
            &dataset.subset(&split.folds[k]),
            config.threshold,
        )
    });
    let fold_accuracies = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(CvReport {
        median: median(&fold_accuracies),
        fold_accuracies,
        split,
    })
}
