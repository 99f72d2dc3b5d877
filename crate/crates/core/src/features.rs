//! Windowed standard-deviation features.
//!
//! A trace is cut into non-overlapping windows of `window_frames` frames.
//! For every window and each body part (top = points 0..5, mid = points
//! 5..10) the x and y coordinates are reduced to a standard deviation,
//! giving four features per window.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::keypoint_io::{KeypointFrame, Label, LabeledTrace, MID_PART, TOP_PART};

/// How the coordinates of a body part are reduced to one spread value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpreadMode {
    /// Standard deviation of every valid sample of every point of the part
    /// across the window.
    #[default]
    Pooled,
    /// Mean of the per-point standard deviations across the window. Ignores
    /// the static layout of the points and measures movement only.
    PerPointMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureWindowConfig {
    pub window_frames: usize,
    pub min_valid_samples: usize,
    /// Samples with confidence below this are dropped.
    pub confidence_threshold: f64,
    pub spread: SpreadMode,
}

impl Default for FeatureWindowConfig {
    fn default() -> Self {
        FeatureWindowConfig {
            window_frames: 50,
            min_valid_samples: 2,
            confidence_threshold: 0.1,
            spread: SpreadMode::Pooled,
        }
    }
}

impl FeatureWindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_frames < 2 {
            return Err(Error::Config("window_frames must be at least 2".into()));
        }
        if self.min_valid_samples < 2 {
            return Err(Error::Config("min_valid_samples must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&self.confidence_threshold) {
            return Err(Error::Config(
                "confidence_threshold must lie in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

/// The four spread features of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub window_index: usize,
    /// Time at the end of the window.
    pub t_seconds: f64,
    pub sigma_top_x: f64,
    pub sigma_top_y: f64,
    pub sigma_mid_x: f64,
    pub sigma_mid_y: f64,
    pub label: Option<Label>,
}

impl FeatureVector {
    pub fn values(&self) -> [f64; 4] {
        [
            self.sigma_top_x,
            self.sigma_top_y,
            self.sigma_mid_x,
            self.sigma_mid_y,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub vectors: Vec<FeatureVector>,
    /// Windows excluded because a pool had too few valid samples.
    pub dropped_windows: usize,
}

/// Population standard deviation (divisor n), computed in a single pass
/// with Welford's update.
pub fn population_std(values: &[f64]) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "standard deviation needs at least 2 values, got {}",
            values.len()
        )));
    }
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
    }
    Ok((m2 / values.len() as f64).sqrt())
}

pub fn extract_features(trace: &LabeledTrace, config: &FeatureWindowConfig) -> Result<FeatureSet> {
    extract_features_with(trace, config, Execution::default())
}

pub fn extract_features_with(
    trace: &LabeledTrace,
    config: &FeatureWindowConfig,
    exec: Execution,
) -> Result<FeatureSet> {
    config.validate()?;
    let n_windows = trace.len() / config.window_frames;
    let windows = exec.map_range(n_windows, |w| {
        let start = w * config.window_frames;
        window_features(&trace.frames()[start..start + config.window_frames], config)
    });

    let mut vectors = Vec::with_capacity(n_windows);
    let mut dropped_windows = 0;
    for (window_index, sigmas) in windows.into_iter().enumerate() {
        match sigmas {
            Some([top_x, top_y, mid_x, mid_y]) => vectors.push(FeatureVector {
                window_index,
                t_seconds: (config.window_frames * (window_index + 1)) as f64 / trace.fps(),
                sigma_top_x: top_x,
                sigma_top_y: top_y,
                sigma_mid_x: mid_x,
                sigma_mid_y: mid_y,
                label: trace.label(),
            }),
            None => dropped_windows += 1,
        }
    }
    if dropped_windows > 0 {
        log::warn!("{dropped_windows} of {n_windows} windows dropped for too few valid samples");
    }
    Ok(FeatureSet {
        vectors,
        dropped_windows,
    })
}

fn window_features(frames: &[KeypointFrame], config: &FeatureWindowConfig) -> Option<[f64; 4]> {
    let mut out = [0.0; 4];
    for (slot, (part, axis)) in [
        (TOP_PART, Axis::X),
        (TOP_PART, Axis::Y),
        (MID_PART, Axis::X),
        (MID_PART, Axis::Y),
    ]
    .into_iter()
    .enumerate()
    {
        out[slot] = match config.spread {
            SpreadMode::Pooled => {
                let pool: Vec<f64> = frames
                    .iter()
                    .flat_map(|f| f.points()[part.clone()].iter())
                    .filter(|p| p.confidence >= config.confidence_threshold)
                    .map(|p| axis.of(p))
                    .collect();
                if pool.len() < config.min_valid_samples {
                    return None;
                }
                population_std(&pool).ok()?
            }
            SpreadMode::PerPointMean => {
                let per_point: Vec<f64> = part
                    .clone()
                    .filter_map(|idx| {
                        let series: Vec<f64> = frames
                            .iter()
                            .map(|f| &f.points()[idx])
                            .filter(|p| p.confidence >= config.confidence_threshold)
                            .map(|p| axis.of(p))
                            .collect();
                        if series.len() < config.min_valid_samples {
                            None
                        } else {
                            population_std(&series).ok()
                        }
                    })
                    .collect();
                if per_point.is_empty() {
                    return None;
                }
                per_point.iter().sum::<f64>() / per_point.len() as f64
            }
        };
    }
    Some(out)
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

impl Axis {
    fn of(self, p: &crate::keypoint_io::Point) -> f64 {
        match self {
            Axis::X => p.x,
            Axis::Y => p.y,
        }
    }
}

/// Square grid of sample counts over [0, 1]², indexed `[row = y][col = x]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram2D {
    bins: usize,
    counts: Vec<u64>,
}

impl Histogram2D {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn count(&self, x_bin: usize, y_bin: usize) -> u64 {
        self.counts[y_bin * self.bins + x_bin]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u64]> {
        self.counts.chunks(self.bins)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn occupied_cells(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

pub(crate) fn unit_bin(v: f64, bins: usize) -> usize {
    ((v * bins as f64) as usize).min(bins - 1)
}

/// Counts every point sample with confidence at or above `threshold`.
pub fn emit_2d_histogram(trace: &LabeledTrace, bins: usize, threshold: f64) -> Result<Histogram2D> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    let mut counts = vec![0u64; bins * bins];
    for p in trace.frames().iter().flat_map(|f| f.points().iter()) {
        if p.confidence >= threshold {
            counts[unit_bin(p.y, bins) * bins + unit_bin(p.x, bins)] += 1;
        }
    }
    Ok(Histogram2D { bins, counts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keypoint_io::Point;

    fn trace_from(points: impl Fn(usize) -> [Point; 10], frames: usize) -> LabeledTrace {
        let frames = (0..frames)
            .map(|i| KeypointFrame::new(i as u64, &points(i)).unwrap())
            .collect();
        LabeledTrace::new(frames, Some(Label::High), 20.0).unwrap()
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(population_std(&[0.3; 50]).unwrap(), 0.0);
    }

    #[test]
    fn std_of_two_point_split() {
        let mut v = vec![0.0; 25];
        v.extend([1.0; 25]);
        assert_eq!(population_std(&v).unwrap(), 0.5);
    }

    #[test]
    fn std_needs_two_values() {
        assert!(population_std(&[0.1]).is_err());
        assert!(population_std(&[]).is_err());
    }

    #[test]
    fn frozen_trace_gives_zero_sigmas() {
        let t = trace_from(|_| [Point::new(0.4, 0.6, 1.0); 10], 100);
        let fs = extract_features(&t, &FeatureWindowConfig::default()).unwrap();
        assert_eq!(fs.vectors.len(), 2);
        assert!(fs.vectors.iter().all(|v| v.values() == [0.0; 4]));
        assert_eq!(fs.vectors[1].t_seconds, 5.0);
    }

    #[test]
    fn short_trace_has_no_windows() {
        let t = trace_from(|_| [Point::new(0.4, 0.6, 1.0); 10], 49);
        let fs = extract_features(&t, &FeatureWindowConfig::default()).unwrap();
        assert!(fs.vectors.is_empty());
        assert_eq!(fs.dropped_windows, 0);
    }

    #[test]
    fn alternating_top_x() {
        let t = trace_from(
            |i| {
                let mut p = [Point::new(0.5, 0.5, 1.0); 10];
                let x = if i % 2 == 0 { 0.4 } else { 0.6 };
                for q in &mut p[0..5] {
                    q.x = x;
                }
                p
            },
            50,
        );
        let v = &extract_features(&t, &FeatureWindowConfig::default())
            .unwrap()
            .vectors[0];
        assert!((v.sigma_top_x - 0.1).abs() < 1e-12);
        assert_eq!([v.sigma_top_y, v.sigma_mid_x, v.sigma_mid_y], [0.0; 3]);
    }

    #[test]
    fn low_confidence_window_is_dropped() {
        let t = trace_from(
            |i| {
                let mut p = [Point::new(0.5, 0.5, 1.0); 10];
                if i >= 50 {
                    for q in &mut p[5..10] {
                        *q = Point::MISSING;
                    }
                }
                p
            },
            100,
        );
        let fs = extract_features(&t, &FeatureWindowConfig::default()).unwrap();
        assert_eq!(fs.vectors.len(), 1);
        assert_eq!(fs.dropped_windows, 1);
        assert_eq!(fs.vectors[0].window_index, 0);
    }

    #[test]
    fn per_point_mode_ignores_layout() {
        let t = trace_from(
            |_| std::array::from_fn(|k| Point::new(0.2 + 0.05 * k as f64, 0.3, 1.0)),
            50,
        );
        let pooled = extract_features(&t, &FeatureWindowConfig::default()).unwrap();
        assert!(pooled.vectors[0].sigma_top_x > 0.0);
        let cfg = FeatureWindowConfig {
            spread: SpreadMode::PerPointMean,
            ..Default::default()
        };
        let per_point = extract_features(&t, &cfg).unwrap();
        assert_eq!(per_point.vectors[0].values(), [0.0; 4]);
    }

    #[test]
    fn histogram_single_cell() {
        let t = trace_from(|_| [Point::new(0.5, 0.5, 1.0); 10], 1);
        let h = emit_2d_histogram(&t, 2, 0.1).unwrap();
        assert_eq!(h.count(1, 1), 10);
        assert_eq!(h.total(), 10);
        assert_eq!(h.occupied_cells(), 1);
    }

    #[test]
    fn histogram_skips_missing_and_rejects_empty() {
        let t = trace_from(
            |_| {
                let mut p = [Point::new(1.0, 0.0, 1.0); 10];
                p[0] = Point::MISSING;
                p
            },
            3,
        );
        let h = emit_2d_histogram(&t, 4, 0.1).unwrap();
        assert_eq!(h.total(), 27);
        assert_eq!(h.count(3, 0), 27);
        let empty = LabeledTrace::new(vec![], None, 20.0).unwrap();
        assert!(emit_2d_histogram(&empty, 4, 0.1).is_err());
        assert!(emit_2d_histogram(&t, 0, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        let bad = FeatureWindowConfig {
            window_frames: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = FeatureWindowConfig {
            min_valid_samples: 1,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
