//! Univariate Gaussian mixtures: EM fitting, density, sampling, and the top-`t`
//! threshold taken from mixture draws.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::input_err;
use crate::{seed, Real, Result};

pub const VARIANCE_FLOOR: f64 = 1e-6;

/// `sum_k weights[k] * N(s | means[k], variances[k])`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<T> {
    weights: Vec<T>,
    means: Vec<T>,
    variances: Vec<T>,
}

/// Outcome of an EM fit. The trace holds the mean per-observation log-likelihood
/// after initialisation and after every EM iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub iterations: usize,
    pub log_likelihood: f64,
    pub trace: Vec<f64>,
    pub converged: bool,
}

impl FitReport {
    /// True when no step lowers the log-likelihood by more than `slack`.
    pub fn is_monotone(&self, slack: f64) -> bool {
        self.trace.windows(2).all(|w| w[1] >= w[0] - slack)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmSettings {
    pub components: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for EmSettings {
    fn default() -> Self {
        Self { components: 7, max_iters: 200, tol: 1e-6 }
    }
}

fn normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

fn normal_log_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -(x - mean).powi(2) / (2.0 * var) - 0.5 * (2.0 * PI * var).ln()
}

impl<T: Real> GaussianMixture<T> {
    pub fn new(weights: Vec<T>, means: Vec<T>, variances: Vec<T>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || variances.len() != k {
            return input_err("mixture needs matching, non-empty weight/mean/variance vectors");
        }
        if weights.iter().any(|&w| w < T::zero() || !w.is_finite()) {
            return input_err("mixture weights must be finite and non-negative");
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return input_err(format!("mixture weights sum to {total}, not 1"));
        }
        if variances.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) || means.iter().any(|m| !m.is_finite()) {
            return input_err("mixture means must be finite and variances positive");
        }
        Ok(Self { weights, means, variances })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn mean(&self) -> T {
        self.weights.iter().zip(&self.means).map(|(&w, &m)| w * m).sum()
    }

    /// Mixture density at `s`.
    pub fn density(&self, s: T) -> T {
        let s = s.as_f64();
        let total: f64 = (0..self.components())
            .map(|k| self.weights[k].as_f64() * normal_pdf(s, self.means[k].as_f64(), self.variances[k].as_f64()))
            .sum();
        T::lit(total)
    }

    /// `weights[k] * N(s | component k)` for every component.
    pub fn weighted_component_densities(&self, s: T) -> Vec<T> {
        let s = s.as_f64();
        (0..self.components())
            .map(|k| T::lit(self.weights[k].as_f64() * normal_pdf(s, self.means[k].as_f64(), self.variances[k].as_f64())))
            .collect()
    }

    /// Mean per-observation log-likelihood.
    pub fn mean_log_likelihood(&self, observations: &[T]) -> f64 {
        let mut buf = vec![0.0; self.components()];
        let total: f64 = observations.iter().map(|&x| self.log_joint(x.as_f64(), &mut buf)).sum();
        total / observations.len() as f64
    }

    /// Fills `buf[k] = ln(pi_k N(x | k))` and returns `ln p(x)`.
    fn log_joint(&self, x: f64, buf: &mut [f64]) -> f64 {
        for (k, b) in buf.iter_mut().enumerate() {
            let w = self.weights[k].as_f64();
            *b = if w > 0.0 {
                w.ln() + normal_log_pdf(x, self.means[k].as_f64(), self.variances[k].as_f64())
            } else {
                f64::NEG_INFINITY
            };
        }
        let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        max + buf.iter().map(|&b| (b - max).exp()).sum::<f64>().ln()
    }

    /// Draws `count` values: a component from the categorical weights, then a normal draw.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<T> {
        let mut rng = seed::stream(seed, "gmm-sample", 0);
        let weights: Vec<f64> = self.weights.iter().map(|w| w.as_f64()).collect();
        (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut k = weights.len() - 1;
                for (j, &w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        k = j;
                        break;
                    }
                }
                // never land on a zero-weight tail component through rounding
                while weights[k] == 0.0 && k > 0 {
                    k -= 1;
                }
                let z: f64 = rng.sample(StandardNormal);
                T::lit(self.means[k].as_f64() + self.variances[k].as_f64().sqrt() * z)
            })
            .collect()
    }

    /// Maximum-likelihood fit by expectation-maximisation.
    ///
    /// Means start from a k-means++ style draw over the observations, variances from the
    /// pooled variance, weights uniform. Every M-step clamps variances at
    /// [`VARIANCE_FLOOR`]. Iteration stops once the mean log-likelihood gains less than
    /// `tol`, or after `max_iters` iterations.
    pub fn fit_em(observations: &[T], settings: EmSettings, seed: u64) -> Result<(Self, FitReport)> {
        let k = settings.components;
        let n = observations.len();
        if k == 0 {
            return input_err("mixture needs at least one component");
        }
        if k > n {
            return input_err(format!("{k} components for {n} observations"));
        }
        if observations.iter().any(|v| !v.is_finite()) {
            return input_err("observations must be finite");
        }
        let xs: Vec<f64> = observations.iter().map(|v| v.as_f64()).collect();
        let floor = VARIANCE_FLOOR;
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if lo == hi {
            let gm = Self { weights: vec![T::one()], means: vec![T::lit(lo)], variances: vec![T::lit(floor)] };
            let ll = gm.mean_log_likelihood(observations);
            return Ok((gm, FitReport { iterations: 0, log_likelihood: ll, trace: vec![ll], converged: true }));
        }

        let mean_all = xs.iter().sum::<f64>() / n as f64;
        let var_all = (xs.iter().map(|x| (x - mean_all).powi(2)).sum::<f64>() / n as f64).max(floor);
        let mut rng = seed::stream(seed, "gmm-init", 0);
        let mut means = kmeanspp_1d(&xs, k, &mut rng);
        let mut vars = vec![var_all; k];
        let mut weights = vec![1.0 / k as f64; k];

        let mut resp = vec![0.0; n * k];
        let mut gm = Self::from_f64(&weights, &means, &vars);
        let mut trace = vec![gm.mean_log_likelihood(observations)];
        let mut converged = false;
        let mut iterations = 0;
        let mut buf = vec![0.0; k];
        while iterations < settings.max_iters {
            iterations += 1;
            // E-step
            for (i, &x) in xs.iter().enumerate() {
                let lse = gm.log_joint(x, &mut buf);
                for c in 0..k {
                    resp[i * k + c] = (buf[c] - lse).exp();
                }
            }
            // M-step
            for c in 0..k {
                let nk: f64 = (0..n).map(|i| resp[i * k + c]).sum();
                weights[c] = nk / n as f64;
                if nk <= 1e-300 {
                    // an empty component keeps its location and contributes no mass
                    continue;
                }
                let mu = (0..n).map(|i| resp[i * k + c] * xs[i]).sum::<f64>() / nk;
                let var = (0..n).map(|i| resp[i * k + c] * (xs[i] - mu).powi(2)).sum::<f64>() / nk;
                means[c] = mu;
                vars[c] = var.max(floor);
            }
            let total: f64 = weights.iter().sum();
            weights.iter_mut().for_each(|w| *w /= total);
            gm = Self::from_f64(&weights, &means, &vars);
            let ll = gm.mean_log_likelihood(observations);
            let gain = ll - trace.last().copied().unwrap_or(f64::NEG_INFINITY);
            trace.push(ll);
            if gain < settings.tol {
                converged = true;
                break;
            }
        }
        let log_likelihood = *trace.last().unwrap();
        Ok((gm, FitReport { iterations, log_likelihood, trace, converged }))
    }

    fn from_f64(weights: &[f64], means: &[f64], vars: &[f64]) -> Self {
        Self {
            weights: weights.iter().map(|&v| T::lit(v)).collect(),
            means: means.iter().map(|&v| T::lit(v)).collect(),
            variances: vars.iter().map(|&v| T::lit(v)).collect(),
        }
    }
}

/// First center uniform, later centers drawn proportionally to squared distance from
/// the nearest chosen center.
fn kmeanspp_1d(xs: &[f64], k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut centers = vec![xs[rng.random_range(0..xs.len())]];
    let mut d2: Vec<f64> = xs.iter().map(|x| (x - centers[0]).powi(2)).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = xs.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            xs[pick]
        } else {
            xs[rng.random_range(0..xs.len())]
        };
        centers.push(next);
        for (d, x) in d2.iter_mut().zip(xs) {
            *d = d.min((x - next).powi(2));
        }
    }
    centers
}

/// Number of items in the top `fraction` of `n`: `ceil(fraction * n)`, with products that
/// are integers up to rounding error treated as exact.
pub fn top_count(fraction: f64, n: usize) -> usize {
    let x = fraction * n as f64;
    let r = x.round();
    let k = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    (k as usize).clamp(1, n.max(1))
}

/// The `ceil(t * len)`-th largest value of `samples`.
pub fn threshold_top_t<T: Real>(samples: &[T], t: f64) -> Result<T> {
    if samples.is_empty() {
        return input_err("threshold of an empty sample");
    }
    if !(t > 0.0 && t <= 1.0) {
        return input_err(format!("top fraction {t} outside (0, 1]"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    Ok(sorted[top_count(t, samples.len()) - 1])
}
