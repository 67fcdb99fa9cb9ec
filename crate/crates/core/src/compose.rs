//! Log-space product-of-experts composition.
//!
//! For an unconditional distribution `u` and conditionals `c_1..c_n` with
//! weights `w_1..w_n` the composed log-probabilities are
//!
//! ```text
//! log p = log u + sum_i w_i (log c_i - log u)
//! ```
//!
//! renormalized over the categories. The per-condition evidence terms cancel
//! under normalization, so every input only needs to be known up to an
//! additive constant in log space.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default floor applied to input log-probabilities before composing.
pub const DEFAULT_LOGP_FLOOR: f64 = -30.0;
/// Sampling temperature used for generation unless configured otherwise.
pub const DEFAULT_TEMPERATURE: f64 = 0.9;

/// `log(sum(exp(xs)))` with the usual max shift. Empty or all `-inf` input
/// yields `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| libm::exp(x - max)).sum();
    max + libm::log(sum)
}

/// Normalized log-probabilities over `K >= 1` categories.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbVector {
    logp: Vec<f64>,
}

impl LogProbVector {
    /// Normalizes raw logits. See [`normalize`].
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        normalize(logits)
    }

    /// Builds from non-negative weights (not necessarily summing to one).
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.iter().any(|p| p.is_nan() || *p < 0.0) {
            return Err(Error::AllMassZero);
        }
        let logits: Vec<f64> = probs.iter().map(|&p| libm::log(p)).collect();
        normalize(&logits)
    }

    pub fn uniform(k: usize) -> Result<Self> {
        normalize(&alloc::vec![0.0; k])
    }

    pub fn len(&self) -> usize {
        self.logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.logp
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.logp
    }

    pub fn probs(&self) -> Vec<f64> {
        self.logp.iter().map(|&l| libm::exp(l)).collect()
    }

    /// Index of the most probable category, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &l) in self.logp.iter().enumerate() {
            if l > self.logp[best] {
                best = i;
            }
        }
        best
    }

    pub fn max_prob(&self) -> f64 {
        libm::exp(self.logp[self.argmax()])
    }
}

impl AsRef<[f64]> for LogProbVector {
    fn as_ref(&self) -> &[f64] {
        &self.logp
    }
}

/// Returns `logits - logsumexp(logits)`.
///
/// Fails with [`Error::AllMassZero`] if the input is empty, contains NaN or
/// `+inf`, or has no finite entry.
pub fn normalize(logits: &[f64]) -> Result<LogProbVector> {
    if logits.is_empty() || logits.iter().any(|x| x.is_nan() || *x == f64::INFINITY) {
        return Err(Error::AllMassZero);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(Error::AllMassZero);
    }
    // subtract the max first so large equal logits cancel exactly
    let shifted: Vec<f64> = logits.iter().map(|&x| x - max).collect();
    let lse = libm::log(shifted.iter().map(|&x| libm::exp(x)).sum::<f64>());
    Ok(LogProbVector {
        logp: shifted.iter().map(|&x| x - lse).collect(),
    })
}

/// One real weight per condition. Negative weights negate a condition and a
/// zero weight drops it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some(&bad) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidWeight(bad));
        }
        Ok(Self(weights))
    }

    /// `n` copies of `w`.
    pub fn splat(w: f64, n: usize) -> Result<Self> {
        Self::new(alloc::vec![w; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(alloc::vec![1.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComposeConfig {
    /// Inputs are clamped to at least this many nats after normalization.
    pub logp_floor: f64,
    /// Applied by the sampler to the composed distribution, never inside
    /// [`compose`].
    pub temperature: f64,
}

impl Default for ComposeConfig {
    fn default() -> Self {
        Self {
            logp_floor: DEFAULT_LOGP_FLOOR,
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

impl ComposeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.logp_floor < 0.0) || self.logp_floor.is_infinite() {
            return Err(Error::InvalidConfig(format!(
                "logp_floor must be finite and negative, got {}",
                self.logp_floor
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::NonPositiveTemperature(self.temperature));
        }
        Ok(())
    }
}

fn prepare(v: &[f64], floor: f64) -> Result<Vec<f64>> {
    let mut out = normalize(v)?.into_inner();
    for x in &mut out {
        if *x < floor {
            *x = floor;
        }
    }
    Ok(out)
}

/// Weighted product of experts over `K` categories.
///
/// Each input is renormalized and clamped at `cfg.logp_floor` first, so the
/// inputs may be unnormalized log-vectors. With no conditions the result is
/// the (clamped, renormalized) unconditional distribution.
pub fn compose<U, C>(uncond: &U, conds: &[C], w: &WeightVector, cfg: &ComposeConfig) -> Result<LogProbVector>
where
    U: AsRef<[f64]> + ?Sized,
    C: AsRef<[f64]>,
{
    cfg.validate()?;
    let uncond = uncond.as_ref();
    let k = uncond.len();
    if conds.len() != w.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} conditional distributions but {} weights",
            conds.len(),
            w.len()
        )));
    }
    if let Some((i, c)) = conds.iter().enumerate().find(|(_, c)| c.as_ref().len() != k) {
        return Err(Error::ShapeMismatch(format!(
            "conditional {} has {} categories, unconditional has {}",
            i,
            c.as_ref().len(),
            k
        )));
    }

    let base = prepare(uncond, cfg.logp_floor)?;
    let mut acc = base.clone();
    for (cond, &weight) in conds.iter().zip(w.as_slice()) {
        let cond = prepare(cond.as_ref(), cfg.logp_floor)?;
        for ((a, c), u) in acc.iter_mut().zip(&cond).zip(&base) {
            *a += weight * (c - u);
        }
    }
    normalize(&acc)
}

/// `normalize(d / temperature)`.
pub fn apply_temperature(d: &LogProbVector, temperature: f64) -> Result<LogProbVector> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::NonPositiveTemperature(temperature));
    }
    if temperature == 1.0 {
        return Ok(d.clone());
    }
    let scaled: Vec<f64> = d.logp.iter().map(|&l| l / temperature).collect();
    normalize(&scaled)
}
