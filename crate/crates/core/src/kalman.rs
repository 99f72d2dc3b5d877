//! Scalar Kalman filter turning recognition levels into estimation levels.
//!
//! Each recognition level is treated as a noisy measurement of the hidden
//! concentration state. The state starts at `x0` with covariance `p0` and
//! is predicted, then corrected, once per measurement.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::RecognitionSeries;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KalmanParams {
    /// State transition weight.
    pub a: f64,
    /// Process noise.
    pub q: f64,
    /// Measurement scale.
    pub h: f64,
    /// Measurement noise.
    pub r: f64,
    pub x0: f64,
    pub p0: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            a: 1.0,
            q: 0.0,
            h: 1.0,
            r: 0.1,
            x0: 0.5,
            p0: 0.9,
        }
    }
}

impl KalmanParams {
    pub fn validate(&self) -> Result<()> {
        let all = [self.a, self.q, self.h, self.r, self.x0, self.p0];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("Kalman parameters must be finite".into()));
        }
        if self.r <= 0.0 {
            return Err(Error::Config(format!("R must be positive, got {}", self.r)));
        }
        if self.p0 <= 0.0 {
            return Err(Error::Config(format!(
                "P0 must be positive, got {}",
                self.p0
            )));
        }
        if self.q < 0.0 {
            return Err(Error::Config(format!(
                "Q must be non-negative, got {}",
                self.q
            )));
        }
        Ok(())
    }

    pub fn initial_state(&self) -> KalmanState {
        KalmanState {
            x_est: self.x0,
            p: self.p0,
            t: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanState {
    pub x_est: f64,
    /// Error covariance.
    pub p: f64,
    pub t: u64,
}

/// One predict/update cycle, returning the new state and the gain used.
pub fn kf_step_with_gain(
    state: KalmanState,
    m: f64,
    params: &KalmanParams,
) -> Result<(KalmanState, f64)> {
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("measurement at step {}", state.t)));
    }
    let KalmanParams { a, q, h, r, .. } = *params;

    let x_pre = a * state.x_est;
    let p_pre = a * state.p * a + q;

    let k = p_pre * h / (h * p_pre * h + r);

    let x_est = x_pre + k * (m - h * x_pre);
    let p = p_pre - k * h * p_pre;
    Ok((
        KalmanState {
            x_est,
            p,
            t: state.t + 1,
        },
        k,
    ))
}

pub fn kf_step(state: KalmanState, m: f64, params: &KalmanParams) -> Result<KalmanState> {
    kf_step_with_gain(state, m, params).map(|(s, _)| s)
}

/// Filtered estimates aligned with the input measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationSeries {
    pub values: Vec<f64>,
    pub t_seconds: Vec<f64>,
}

/// Runs the filter from `(x0, p0)` over `measurements`, returning the
/// post-update estimate after each one.
pub fn filter_values(measurements: &[f64], params: &KalmanParams) -> Result<Vec<f64>> {
    params.validate()?;
    let mut state = params.initial_state();
    measurements
        .iter()
        .map(|&m| {
            state = kf_step(state, m, params)?;
            Ok(state.x_est)
        })
        .collect()
}

/// Filters a recognition series; timestamps pass through unchanged.
pub fn run_filter(series: &RecognitionSeries, params: &KalmanParams) -> Result<EstimationSeries> {
    Ok(EstimationSeries {
        values: filter_values(&series.values, params)?,
        t_seconds: series.t_seconds.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_with_defaults() {
        let p = KalmanParams::default();
        let (s, k) = kf_step_with_gain(p.initial_state(), 1.0, &p).unwrap();
        assert!((k - 0.9).abs() <= 1e-15);
        assert!((s.x_est - 0.95).abs() <= 1e-15);
        assert!((s.p - 0.09).abs() <= 1e-15);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn zero_innovation_keeps_prediction() {
        let p = KalmanParams {
            a: 0.8,
            q: 0.05,
            ..Default::default()
        };
        let start = KalmanState {
            x_est: 0.4,
            p: 0.3,
            t: 7,
        };
        let x_pre = p.a * start.x_est;
        let s = kf_step(start, x_pre, &p).unwrap();
        assert_eq!(s.x_est, x_pre);
    }

    #[test]
    fn huge_measurement_noise_ignores_measurement() {
        let p = KalmanParams {
            r: 1e9,
            ..Default::default()
        };
        let s = kf_step(p.initial_state(), 0.0, &p).unwrap();
        assert!((s.x_est - 0.5).abs() < 1e-8);
    }

    #[test]
    fn rejects_non_finite_and_bad_params() {
        let p = KalmanParams::default();
        assert!(kf_step(p.initial_state(), f64::NAN, &p).is_err());
        for bad in [
            KalmanParams { r: 0.0, ..p },
            KalmanParams { p0: -1.0, ..p },
            KalmanParams { q: -0.1, ..p },
        ] {
            assert!(filter_values(&[0.5], &bad).is_err());
        }
    }

    #[test]
    fn empty_series() {
        let out = run_filter(&RecognitionSeries::default(), &KalmanParams::default()).unwrap();
        assert!(out.values.is_empty());
    }

    #[test]
    fn constant_series_converges_monotonically() {
        let c = 0.2;
        let m = vec![c; 50];
        let t: Vec<f64> = (0..50).map(|i| 2.5 * (i + 1) as f64).collect();
        let series = RecognitionSeries {
            values: m,
            t_seconds: t.clone(),
        };
        let out = run_filter(&series, &KalmanParams::default()).unwrap();
        let gaps: Vec<f64> = out.values.iter().map(|x| (x - c).abs()).collect();
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert_eq!(out.t_seconds, t);
    }
}
