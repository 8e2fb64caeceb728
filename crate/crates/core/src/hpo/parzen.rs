//! Univariate Parzen estimators used for the good/bad densities.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::space::{Dimension, Domain, ParamValue};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + libm::erf(z / SQRT_2))
}

/// Mixture of Gaussians truncated to `[low, high]`, one kernel per
/// observation plus a broad prior kernel centred on the interval.
#[derive(Debug, Clone)]
pub struct NumericParzen {
    mus: Vec<f64>,
    sigmas: Vec<f64>,
    weights: Vec<f64>,
    log_norms: Vec<f64>,
    low: f64,
    high: f64,
}

impl NumericParzen {
    /// Adaptive bandwidths: each kernel's width is the larger gap to its
    /// neighbours once the observations and the prior mean are sorted, with
    /// the interval ends as outer neighbours. Widths are clamped to
    /// `[range / min(100, n + 1), range]`; the prior kernel spans the range.
    pub fn fit(observations: &[f64], low: f64, high: f64, prior_weight: f64) -> Self {
        let range = high - low;
        let n = observations.len();
        let prior_mu = low + range / 2.0;
        let with_prior = prior_weight > 0.0 || n == 0;

        let mut entries: Vec<(f64, bool)> = observations.iter().map(|&x| (x, false)).collect();
        if with_prior {
            entries.push((prior_mu, true));
        }
        entries.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let floor = range / (n as f64 + 1.0).min(100.0);

        let mut mus = Vec::with_capacity(entries.len());
        let mut sigmas = Vec::with_capacity(entries.len());
        let mut weights = Vec::with_capacity(entries.len());
        for (i, &(mu, is_prior)) in entries.iter().enumerate() {
            let left = if i == 0 { low } else { entries[i - 1].0 };
            let right = if i + 1 == entries.len() { high } else { entries[i + 1].0 };
            mus.push(mu);
            if is_prior {
                sigmas.push(range);
                weights.push(if n == 0 { 1.0 } else { prior_weight });
            } else {
                sigmas.push((mu - left).max(right - mu).clamp(floor, range));
                weights.push(1.0);
            }
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        let log_norms = mus
            .iter()
            .zip(&sigmas)
            .map(|(&mu, &s)| {
                let mass = std_normal_cdf((high - mu) / s) - std_normal_cdf((low - mu) / s);
                mass.max(f64::MIN_POSITIVE).ln()
            })
            .collect();
        Self {
            mus,
            sigmas,
            weights,
            log_norms,
            low,
            high,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = pick_weighted(&self.weights, rng);
        let normal = Normal::new(self.mus[k], self.sigmas[k]).expect("positive bandwidth");
        for _ in 0..100 {
            let x = normal.sample(rng);
            if x >= self.low && x <= self.high {
                return x;
            }
        }
        rng.random_range(self.low..=self.high)
    }

    pub fn log_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = (0..self.mus.len())
            .map(|k| {
                let z = (x - self.mus[k]) / self.sigmas[k];
                self.weights[k].ln() - 0.5 * z * z - LN_SQRT_2PI - self.sigmas[k].ln() - self.log_norms[k]
            })
            .collect();
        log_sum_exp(&terms)
    }
}

/// Smoothed frequency table over a categorical domain.
#[derive(Debug, Clone)]
pub struct CategoricalParzen {
    probs: Vec<f64>,
}

impl CategoricalParzen {
    pub fn fit(observations: &[usize], choices: usize, prior_weight: f64) -> Self {
        let mut counts = vec![prior_weight / choices as f64; choices];
        for &c in observations {
            counts[c] += 1.0;
        }
        let total: f64 = counts.iter().sum();
        let probs = if total > 0.0 {
            counts.iter().map(|c| c / total).collect()
        } else {
            vec![1.0 / choices as f64; choices]
        };
        Self { probs }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        pick_weighted(&self.probs, rng)
    }

    pub fn log_pdf(&self, choice: usize) -> f64 {
        self.probs[choice].ln()
    }
}

fn pick_weighted<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Numeric dimensions are modelled in an internal coordinate: log scale
/// for log-uniform, and a half-unit widened interval for integers.
pub(crate) fn internal_bounds(dim: &Dimension) -> Option<(f64, f64)> {
    match dim.domain {
        Domain::Uniform { low, high } => Some((low, high)),
        Domain::LogUniform { low, high } => Some((low.ln(), high.ln())),
        Domain::IntUniform { low, high } => Some((low as f64 - 0.5, high as f64 + 0.5)),
        Domain::Categorical { .. } => None,
    }
}

pub(crate) fn to_internal(dim: &Dimension, value: &ParamValue) -> Option<f64> {
    let x = value.as_f64()?;
    match dim.domain {
        Domain::LogUniform { .. } => Some(x.ln()),
        Domain::Categorical { .. } => None,
        _ => Some(x),
    }
}

pub(crate) fn from_internal(dim: &Dimension, x: f64) -> ParamValue {
    match dim.domain {
        Domain::Uniform { low, high } => ParamValue::Float(x.clamp(low, high)),
        Domain::LogUniform { low, high } => ParamValue::Float(x.exp().clamp(low, high)),
        Domain::IntUniform { low, high } => ParamValue::Int((x.round() as i64).clamp(low, high)),
        Domain::Categorical { .. } => unreachable!("categorical dimensions have no internal coordinate"),
    }
}
