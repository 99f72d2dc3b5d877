//! Two-Gaussian curve fit of the estimation-level histogram.
//!
//! The model is
//!
//! ```text
//! f(x) = a1·exp(-(x-mu1)²/(2·s1²)) + a2·exp(-(x-mu2)²/(2·s2²))
//! ```
//!
//! fitted to (bin center, count) pairs by unweighted least squares with a
//! Levenberg-Marquardt style damped Gauss-Newton iteration. Widths and
//! amplitudes are held above small positive bounds and the centers inside
//! [0, 1]. Results are reported with `mu1 <= mu2`.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::unit_bin;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram1D {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram1D {
    /// Histogram with uniform bins over [0, 1] and the given counts.
    pub fn from_counts(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        let n = counts.len();
        Ok(Histogram1D {
            edges: (0..=n).map(|i| i as f64 / n as f64).collect(),
            counts,
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins() as f64
    }

    pub fn centers(&self) -> Vec<f64> {
        let n = self.bins() as f64;
        (0..self.bins()).map(|i| (i as f64 + 0.5) / n).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn nonzero_bins(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Uniform histogram over [0, 1]; a value of exactly 1.0 falls in the last
/// bin.
pub fn build_histogram(values: &[f64], bins: usize) -> Result<Histogram1D> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if values.is_empty() {
        return Err(Error::InsufficientData("histogram of no values".into()));
    }
    let mut counts = vec![0u64; bins];
    for (i, &v) in values.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InsufficientData(format!(
                "value {v} at position {i} is outside [0, 1]"
            )));
        }
        counts[unit_bin(v, bins)] += 1;
    }
    Histogram1D::from_counts(counts)
}

/// Parameters of the two-component Gaussian curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bimodal {
    pub a1: f64,
    pub mu1: f64,
    pub s1: f64,
    pub a2: f64,
    pub mu2: f64,
    pub s2: f64,
}

impl Bimodal {
    fn to_vector(self) -> SVector<f64, 6> {
        SVector::from([self.a1, self.mu1, self.s1, self.a2, self.mu2, self.s2])
    }

    fn from_vector(v: &SVector<f64, 6>) -> Self {
        Bimodal {
            a1: v[0],
            mu1: v[1],
            s1: v[2],
            a2: v[3],
            mu2: v[4],
            s2: v[5],
        }
    }

    /// Same curve with the components ordered so that `mu1 <= mu2`.
    pub fn canonical(self) -> Self {
        if self.mu1 <= self.mu2 {
            self
        } else {
            Bimodal {
                a1: self.a2,
                mu1: self.mu2,
                s1: self.s2,
                a2: self.a1,
                mu2: self.mu1,
                s2: self.s1,
            }
        }
    }

    fn value(&self, x: f64) -> f64 {
        gaussian(self.a1, self.mu1, self.s1, x) + gaussian(self.a2, self.mu2, self.s2, x)
    }
}

fn gaussian(a: f64, mu: f64, s: f64, x: f64) -> f64 {
    let d = x - mu;
    a * (-d * d / (2.0 * s * s)).exp()
}

pub fn eval_bimodal(params: &Bimodal, x: f64) -> Result<f64> {
    if !(params.s1 > 0.0 && params.s2 > 0.0) {
        return Err(Error::Config(format!(
            "widths must be positive, got {} and {}",
            params.s1, params.s2
        )));
    }
    Ok(params.value(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BimodalFit {
    pub params: Bimodal,
    pub residual_sse: f64,
    pub converged: bool,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitOptions {
    pub bins: usize,
    pub max_iterations: usize,
    /// Stop when an accepted step improves SSE by less than this fraction.
    pub sse_tolerance: f64,
    /// Stop when the largest parameter change falls below this.
    pub step_tolerance: f64,
    pub min_width: f64,
    /// Points of the emitted fit curve.
    pub curve_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            bins: 40,
            max_iterations: 500,
            sse_tolerance: 1e-10,
            step_tolerance: 1e-10,
            min_width: 1e-4,
            curve_points: 200,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.bins < 4 {
            return Err(Error::Config("fit needs at least 4 bins".into()));
        }
        if self.max_iterations == 0 || !(self.min_width > 0.0) || self.curve_points < 2 {
            return Err(Error::Config(
                "max_iterations, min_width and curve_points must be positive (curve_points >= 2)"
                    .into(),
            ));
        }
        Ok(())
    }
}

const MIN_AMPLITUDE: f64 = 1e-12;

/// Seeds for the fit, taken from the two highest local maxima of the
/// 3-bin moving average of the counts. With fewer than two maxima the
/// seeds sit at the sample mean plus and minus one standard deviation.
pub fn initial_guess(hist: &Histogram1D) -> Result<Bimodal> {
    let total = hist.total();
    if total == 0 {
        return Err(Error::InsufficientData("histogram has no samples".into()));
    }
    let counts: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    let n = counts.len();
    let smooth: Vec<f64> = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            counts[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    let mut maxima: Vec<usize> = (0..n)
        .filter(|&i| {
            let left = if i == 0 {
                f64::NEG_INFINITY
            } else {
                smooth[i - 1]
            };
            let right = if i + 1 == n {
                f64::NEG_INFINITY
            } else {
                smooth[i + 1]
            };
            smooth[i] > left && smooth[i] >= right && smooth[i] > 0.0
        })
        .collect();
    maxima.sort_by(|&a, &b| smooth[b].total_cmp(&smooth[a]).then(a.cmp(&b)));

    let centers = hist.centers();
    let width = 2.0 * hist.bin_width();
    let peak = smooth.iter().cloned().fold(0.0, f64::max);

    let guess = if maxima.len() >= 2 {
        let (i, j) = (maxima[0], maxima[1]);
        Bimodal {
            a1: smooth[i],
            mu1: centers[i],
            s1: width,
            a2: smooth[j],
            mu2: centers[j],
            s2: width,
        }
    } else {
        let t = total as f64;
        let mean = centers.iter().zip(&counts).map(|(x, c)| x * c).sum::<f64>() / t;
        let var = centers
            .iter()
            .zip(&counts)
            .map(|(x, c)| c * (x - mean) * (x - mean))
            .sum::<f64>()
            / t;
        let sd = var.sqrt().max(hist.bin_width());
        let (lo, hi) = ((mean - sd).clamp(0.0, 1.0), (mean + sd).clamp(0.0, 1.0));
        let amp = |x: f64| smooth[unit_bin(x, n)].max(0.5 * peak);
        Bimodal {
            a1: amp(lo),
            mu1: lo,
            s1: width,
            a2: amp(hi),
            mu2: hi,
            s2: width,
        }
    };
    Ok(guess.canonical())
}

/// Fits the histogram counts against bin centers.
pub fn fit_bimodal(
    hist: &Histogram1D,
    init: Option<Bimodal>,
    options: &FitOptions,
) -> Result<BimodalFit> {
    if hist.nonzero_bins() < 6 {
        return Err(Error::InsufficientData(format!(
            "bimodal fit needs at least 6 nonzero bins, found {}",
            hist.nonzero_bins()
        )));
    }
    let init = match init {
        Some(p) => p,
        None => initial_guess(hist)?,
    };
    let ys: Vec<f64> = hist.counts().iter().map(|&c| c as f64).collect();
    fit_points(&hist.centers(), &ys, init, options)
}

fn project(v: &mut SVector<f64, 6>, min_width: f64) {
    for k in [0, 3] {
        v[k] = v[k].max(MIN_AMPLITUDE);
        v[k + 1] = v[k + 1].clamp(0.0, 1.0);
        v[k + 2] = v[k + 2].max(min_width);
    }
}

fn sse(p: &Bimodal, xs: &[f64], ys: &[f64]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| {
            let r = p.value(x) - y;
            r * r
        })
        .sum()
}

/// Least-squares fit of the curve to arbitrary `(x, y)` samples.
///
/// Every accepted iteration lowers the SSE; rejected trial steps only
/// raise the damping. When `max_iterations` runs out the best parameters
/// so far are returned with `converged = false`.
pub fn fit_points(
    xs: &[f64],
    ys: &[f64],
    init: Bimodal,
    options: &FitOptions,
) -> Result<BimodalFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} values", xs.len()),
            found: format!("{} values", ys.len()),
        });
    }
    if xs.len() < 6 {
        return Err(Error::InsufficientData("need at least 6 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("fit data".into()));
    }
    let init_vec = init.to_vector();
    if init_vec.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial guess".into()));
    }

    let mut p = init_vec;
    project(&mut p, options.min_width);
    let mut current = sse(&Bimodal::from_vector(&p), xs, ys);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iterations && !converged {
        iterations += 1;
        let params = Bimodal::from_vector(&p);

        let mut jtj = SMatrix::<f64, 6, 6>::zeros();
        let mut jtr = SVector::<f64, 6>::zeros();
        for (&x, &y) in xs.iter().zip(ys) {
            let row = jacobian_row(&params, x);
            let r = params.value(x) - y;
            jtj += row * row.transpose();
            jtr += row * r;
        }
        let diag_floor = 1e-12 * jtj.diagonal().max().max(1e-300);

        loop {
            let mut damped = jtj;
            for k in 0..6 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(diag_floor);
            }
            let Some(delta) = damped.lu().solve(&(-jtr)) else {
                lambda *= 10.0;
                if lambda > 1e20 {
                    converged = true;
                    break;
                }
                continue;
            };
            let mut trial = p + delta;
            project(&mut trial, options.min_width);
            let step = (trial - p).amax();
            if step < options.step_tolerance {
                converged = true;
                break;
            }
            let trial_sse = sse(&Bimodal::from_vector(&trial), xs, ys);
            if trial_sse < current {
                let improvement = (current - trial_sse) / current;
                p = trial;
                current = trial_sse;
                lambda = (lambda / 10.0).max(1e-15);
                if improvement < options.sse_tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e20 {
                converged = true;
                break;
            }
        }
        if current == 0.0 {
            converged = true;
        }
    }

    Ok(BimodalFit {
        params: Bimodal::from_vector(&p).canonical(),
        residual_sse: current,
        converged,
        iterations,
    })
}

fn jacobian_row(p: &Bimodal, x: f64) -> SVector<f64, 6> {
    let part = |a: f64, mu: f64, s: f64| {
        let d = x - mu;
        let e = (-d * d / (2.0 * s * s)).exp();
        [e, a * e * d / (s * s), a * e * d * d / (s * s * s)]
    };
    let [g0, g1, g2] = part(p.a1, p.mu1, p.s1);
    let [g3, g4, g5] = part(p.a2, p.mu2, p.s2);
    SVector::from([g0, g1, g2, g3, g4, g5])
}

/// `points` evenly spaced `(x, f(x))` pairs over [0, 1].
pub fn curve(params: &Bimodal, points: usize) -> Result<Vec<(f64, f64)>> {
    if points < 2 {
        return Err(Error::Config("curve needs at least 2 points".into()));
    }
    (0..points)
        .map(|i| {
            let x = i as f64 / (points - 1) as f64;
            eval_bimodal(params, x).map(|y| (x, y))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    const PAPER_LIKE: Bimodal = Bimodal {
        a1: 100.0,
        mu1: 0.09,
        s1: 0.02,
        a2: 60.0,
        mu2: 0.16,
        s2: 0.03,
    };

    #[test]
    fn histogram_basics() {
        let h = build_histogram(&[0.5; 10], 10).unwrap();
        assert_eq!(h.counts()[5], 10);
        assert_eq!(h.total(), 10);
        let h = build_histogram(&[0.0, 1.0, 0.999], 4).unwrap();
        assert_eq!(h.counts(), &[1, 0, 0, 2]);
        assert_eq!(h.edges().len(), 5);
        assert!(build_histogram(&[], 4).is_err());
        assert!(build_histogram(&[1.5], 4).is_err());
        assert!(build_histogram(&[f64::NAN], 4).is_err());
    }

    #[test]
    fn peak_value_and_symmetry() {
        let p = Bimodal {
            a2: 0.0,
            ..PAPER_LIKE
        };
        assert_eq!(eval_bimodal(&p, p.mu1).unwrap(), p.a1);
        let sym = Bimodal {
            a1: 5.0,
            mu1: 0.3,
            s1: 0.1,
            a2: 5.0,
            mu2: 0.6,
            s2: 0.1,
        };
        for d in [0.0, 0.05, 0.2] {
            let l = eval_bimodal(&sym, sym.mu1 + d).unwrap();
            let r = eval_bimodal(&sym, sym.mu2 - d).unwrap();
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_evaluated_point() {
        // 100·exp(-0.03²/(2·0.02²)) + 60·exp(-0.04²/(2·0.03²))
        // = 100·exp(-1.125) + 60·exp(-8/9)
        let expected = 100.0 * (-1.125f64).exp() + 60.0 * (-8.0f64 / 9.0).exp();
        let got = eval_bimodal(&PAPER_LIKE, 0.12).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 57.131_984).abs() < 1e-5);
    }

    #[test]
    fn rejects_non_positive_width() {
        let p = Bimodal {
            s2: 0.0,
            ..PAPER_LIKE
        };
        assert!(eval_bimodal(&p, 0.1).is_err());
    }

    #[test]
    fn canonical_ordering() {
        let swapped = Bimodal {
            a1: 60.0,
            mu1: 0.16,
            s1: 0.03,
            a2: 100.0,
            mu2: 0.09,
            s2: 0.02,
        };
        assert_eq!(swapped.canonical(), PAPER_LIKE);
    }

    #[test]
    fn seeds_near_separated_peaks() {
        let mut counts = vec![0u64; 40];
        counts[7..=9].copy_from_slice(&[20, 50, 20]);
        counts[27..=29].copy_from_slice(&[10, 30, 10]);
        let g = initial_guess(&Histogram1D::from_counts(counts).unwrap()).unwrap();
        assert!((g.mu1 - 8.5 / 40.0).abs() <= 1.0 / 40.0);
        assert!((g.mu2 - 28.5 / 40.0).abs() <= 1.0 / 40.0);
        assert!((g.s1 - 0.05).abs() < 1e-15);
    }

    #[test]
    fn single_peak_straddled() {
        let mut counts = vec![0u64; 20];
        counts[8..=12].copy_from_slice(&[5, 20, 40, 20, 5]);
        let g = initial_guess(&Histogram1D::from_counts(counts).unwrap()).unwrap();
        assert!(g.mu1 < 10.5 / 20.0 && 10.5 / 20.0 < g.mu2);
        assert!(g.a1 > 0.0 && g.a2 > 0.0);
    }

    #[test]
    fn flat_histogram_falls_back() {
        let h = Histogram1D::from_counts(vec![10; 20]).unwrap();
        let g = initial_guess(&h).unwrap();
        let sd = (1.0f64 / 12.0 - 1.0 / 4800.0).sqrt();
        assert!((g.mu1 - (0.5 - sd)).abs() < 1e-12);
        assert!((g.mu2 - (0.5 + sd)).abs() < 1e-12);
        let fit = fit_bimodal(&h, None, &FitOptions::default()).unwrap();
        assert!(fit.params.mu1 <= fit.params.mu2);
        assert!(fit.residual_sse.is_finite());
    }

    #[test]
    fn empty_and_sparse_histograms() {
        assert!(initial_guess(&Histogram1D::from_counts(vec![0; 10]).unwrap()).is_err());
        let mut counts = vec![0u64; 40];
        counts[3] = 7;
        counts[4] = 2;
        let h = Histogram1D::from_counts(counts).unwrap();
        assert!(matches!(
            fit_bimodal(&h, None, &FitOptions::default()),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn fit_never_worse_than_seed() {
        let counts: Vec<u64> = (0..40).map(|i| ((i * 7919) % 13) as u64 + 1).collect();
        let h = Histogram1D::from_counts(counts).unwrap();
        let seed = initial_guess(&h).unwrap();
        let ys: Vec<f64> = h.counts().iter().map(|&c| c as f64).collect();
        let before = sse(&seed, &h.centers(), &ys);
        let fit = fit_bimodal(&h, Some(seed), &FitOptions::default()).unwrap();
        assert!(fit.residual_sse <= before);
    }

    #[test]
    fn curve_endpoints() {
        let c = curve(&PAPER_LIKE, 200).unwrap();
        assert_eq!(c.len(), 200);
        assert_eq!(c[0].0, 0.0);
        assert_eq!(c[199].0, 1.0);
    }
}
