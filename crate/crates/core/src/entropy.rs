//! Entropic mirror-map calculus on the probability simplex.
//!
//! The mirror map is the negative Shannon entropy `Φ(z) = Σ z_i log z_i`,
//! whose Fenchel dual is log-sum-exp. A mirror step is then a
//! multiplicative-weights update carried out in log space.
//!
//! Total variation follows the half-ℓ1 convention, `TV(δ) = ½ Σ |δ_i|`,
//! under which Pinsker reads `KL ≥ 2·TV²`.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Absolute tolerance on `Σ z_i = 1` for a [`SimplexVector`].
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A probability vector over `d ≥ 1` pure strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexVector(Vec<f64>);

impl SimplexVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::arg("simplex vector must have at least one entry"));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::arg(format!(
                "simplex entry {i} is {} (must be finite and nonnegative)",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::arg(format!(
                "simplex entries sum to {total}, expected 1"
            )));
        }
        Ok(Self(weights))
    }

    /// Rescale nonnegative weights so they sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::arg("weights must have a positive finite sum"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(d: usize) -> Self {
        assert!(d >= 1, "uniform simplex vector needs d >= 1");
        Self(vec![1.0 / d as f64; d])
    }

    /// The pure strategy `e_i`.
    pub fn vertex(d: usize, i: usize) -> Self {
        assert!(i < d, "vertex index {i} out of range for d = {d}");
        let mut w = vec![0.0; d];
        w[i] = 1.0;
        Self(w)
    }

    pub(crate) fn from_raw(weights: Vec<f64>) -> Self {
        debug_assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        Self(weights)
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

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// True when every entry is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.0.iter().all(|&w| w > 0.0)
    }

    pub fn to_log_weights(&self) -> Result<LogWeights> {
        if !self.is_interior() {
            return Err(Error::domain(
                "mirror iterates must be strictly positive (interior of the simplex)",
            ));
        }
        Ok(LogWeights(self.0.iter().map(|w| w.ln()).collect()))
    }
}

impl std::ops::Index<usize> for SimplexVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Unnormalized log-masses; the represented distribution is `softmax(logw)`.
///
/// Solvers carry their iterates in this form so repeated multiplicative
/// updates never underflow.
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights(Vec<f64>);

impl LogWeights {
    pub fn new(logw: Vec<f64>) -> Result<Self> {
        if logw.is_empty() {
            return Err(Error::arg("log-weights must be nonempty"));
        }
        if logw.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("log-weights must be finite"));
        }
        Ok(Self(logw))
    }

    pub fn uniform(d: usize) -> Self {
        Self(vec![-(d as f64).ln(); d])
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

    /// Shift so that the entries are log-probabilities.
    pub fn normalize(&mut self) {
        let lse = lse_unchecked(&self.0);
        self.0.iter_mut().for_each(|v| *v -= lse);
    }

    /// In-place mirror step `logw ← logw − η b`, renormalized.
    pub fn md_step(&mut self, b: &[f64], eta: f64) {
        debug_assert_eq!(b.len(), self.0.len());
        for (l, bi) in self.0.iter_mut().zip(b) {
            *l -= eta * bi;
        }
        self.normalize();
    }

    /// Write `softmax(logw)` into `out`.
    pub fn probabilities_into(&self, out: &mut [f64]) {
        softmax_into(&self.0, out);
    }

    pub fn to_simplex(&self) -> SimplexVector {
        SimplexVector::from_raw(softmax(&self.0))
    }
}

pub(crate) fn lse_unchecked(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: f64 = v.iter().map(|x| (x - max).exp()).sum();
    max + s.ln()
}

/// `log Σ exp(v_i)`, evaluated with a max shift so large entries do not overflow.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::arg("log_sum_exp of an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("log_sum_exp requires finite entries"));
    }
    Ok(lse_unchecked(v))
}

pub(crate) fn softmax_into(v: &[f64], out: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

/// `∇Φ*(v)`, the Gibbs distribution of `v`.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out);
    out
}

/// One entropic mirror-descent step, `z'_i ∝ z_i · exp(−η b_i)`.
pub fn md_update(z: &SimplexVector, b: &[f64], eta: f64) -> Result<SimplexVector> {
    check_dim("md_update gradient", z.len(), b.len())?;
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::arg(format!("step size must be finite and >= 0, got {eta}")));
    }
    if b.iter().any(|x| !x.is_finite()) {
        return Err(Error::arg("md_update gradient must be finite"));
    }
    let mut logw = z.to_log_weights()?;
    logw.md_step(b, eta);
    Ok(logw.to_simplex())
}

/// `Σ z_i log z_i` with `0 log 0 = 0`.
pub fn entropy(z: &SimplexVector) -> f64 {
    z.as_slice()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.ln())
        .sum()
}

/// Relative entropy `Σ z_i log(z_i / z'_i)`.
pub fn kl_divergence(z: &SimplexVector, z_ref: &SimplexVector) -> Result<f64> {
    check_dim("kl_divergence", z.len(), z_ref.len())?;
    let mut total = 0.0;
    for (i, (&a, &b)) in z.as_slice().iter().zip(z_ref.as_slice()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::domain(format!(
                    "kl_divergence: reference has no mass at index {i} where the first argument does"
                )));
            }
            total += a * (a / b).ln();
        }
    }
    // Rounding can leave a tiny negative value when z ≈ z'.
    Ok(total.max(0.0))
}

/// Half-ℓ1 total variation of a signed vector.
pub fn tv_norm(delta: &[f64]) -> f64 {
    0.5 * delta.iter().map(|x| x.abs()).sum::<f64>()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
