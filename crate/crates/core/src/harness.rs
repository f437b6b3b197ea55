//! Empirical rate fits, theoretical bound checks and sampler diagnostics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::prox::{BoundConstants, TraceRecord};
use crate::sgld::{sgld_step, LangevinState};

/// Gaps at or below this are treated as exact zeros and left out of fits.
pub const GAP_FLOOR: f64 = 1e-14;
pub const MIN_FIT_POINTS: usize = 8;
pub const DETERMINISTIC_SLACK: f64 = 1.05;
pub const STOCHASTIC_SLACK: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RateFit {
    Fitted { slope: f64, intercept: f64, points: usize },
    Indeterminate { points: usize },
}

impl RateFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            RateFit::Fitted { slope, .. } => Some(*slope),
            RateFit::Indeterminate { .. } => None,
        }
    }
}

/// Least squares of `log gap` on `log t` over records with `t` in `t_range`
/// (inclusive) and `gap > GAP_FLOOR`.
pub fn fit_rate(records: &[TraceRecord], t_range: Option<(usize, usize)>) -> RateFit {
    let (lo, hi) = t_range.unwrap_or((1, usize::MAX));
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.t >= lo && r.t <= hi && r.gap_ergodic > GAP_FLOOR && r.gap_ergodic.is_finite())
        .map(|r| ((r.t as f64).ln(), r.gap_ergodic.ln()))
        .collect();
    let n = pts.len();
    if n < MIN_FIT_POINTS {
        return RateFit::Indeterminate { points: n };
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return RateFit::Indeterminate { points: n };
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    RateFit::Fitted {
        slope,
        intercept: my - slope * mx,
        points: n,
    }
}

/// Which gap bound applies to a trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// `D/(ηt) + ηM²/4`
    MdDeterministic,
    /// `D/(ηt)`
    MpDeterministic,
    /// `D/(ηt) + ηM'²/4`
    MdStochastic,
    /// `D/(ηt) + 3ησ²/2`
    MpStochastic,
}

impl BoundKind {
    pub fn new(mirror_prox: bool, stochastic: bool) -> Self {
        match (mirror_prox, stochastic) {
            (false, false) => BoundKind::MdDeterministic,
            (true, false) => BoundKind::MpDeterministic,
            (false, true) => BoundKind::MdStochastic,
            (true, true) => BoundKind::MpStochastic,
        }
    }

    pub fn default_slack(self) -> f64 {
        match self {
            BoundKind::MdDeterministic | BoundKind::MpDeterministic => DETERMINISTIC_SLACK,
            _ => STOCHASTIC_SLACK,
        }
    }
}

/// Which distance constant enters the bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Radius {
    /// `log m + log n`, the step-size surrogate.
    Surrogate,
    /// `−log min p₁ − log min q₁`, which dominates the divergence from the
    /// start to any comparator.
    Comparator,
}

impl Radius {
    pub fn value(self, c: &BoundConstants) -> f64 {
        match self {
            Radius::Surrogate => c.d0_bar,
            Radius::Comparator => c.d0_init,
        }
    }
}

/// The bound at iteration `t`.
pub fn gap_bound(kind: BoundKind, c: &BoundConstants, radius: f64, eta: f64, t: usize) -> Result<f64> {
    let base = radius / (eta * t as f64);
    let missing = |what: &str| Error::arg(format!("bound {kind:?} needs {what}, which the trace does not record"));
    Ok(match kind {
        BoundKind::MdDeterministic => base + eta * c.grad_bound.powi(2) / 4.0,
        BoundKind::MpDeterministic => base,
        BoundKind::MdStochastic => {
            let mp = c.grad_bound_stochastic.ok_or_else(|| missing("M'"))?;
            base + eta * mp * mp / 4.0
        }
        BoundKind::MpStochastic => {
            let s2 = c.sigma2.ok_or_else(|| missing("sigma2"))?;
            base + 1.5 * eta * s2
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCheck {
    pub kind: BoundKind,
    pub radius: f64,
    pub slack: f64,
    pub satisfied: Vec<bool>,
    pub all_satisfied: bool,
    /// Largest `gap / bound` over the records.
    pub worst_ratio: f64,
}

/// Compare each record's ergodic gap to `slack × bound` at that record's `t`
/// and `η`.
pub fn check_bounds(
    records: &[TraceRecord],
    c: &BoundConstants,
    kind: BoundKind,
    radius: Radius,
    slack: f64,
) -> Result<BoundCheck> {
    let d = radius.value(c);
    let mut satisfied = Vec::with_capacity(records.len());
    let mut worst = f64::NEG_INFINITY;
    for r in records {
        let b = gap_bound(kind, c, d, r.eta, r.t)?;
        worst = worst.max(r.gap_ergodic / b);
        satisfied.push(r.gap_ergodic <= slack * b);
    }
    Ok(BoundCheck {
        kind,
        radius: d,
        slack,
        all_satisfied: satisfied.iter().all(|&s| s),
        satisfied,
        worst_ratio: worst,
    })
}

/// Pointwise mean of several traces recorded at the same iterations.
pub fn average_records(runs: &[Vec<TraceRecord>]) -> Result<Vec<TraceRecord>> {
    let first = runs.first().ok_or_else(|| Error::arg("no traces to average"))?;
    if runs.iter().any(|r| r.len() != first.len() || r.iter().zip(first).any(|(a, b)| a.t != b.t)) {
        return Err(Error::arg("traces were recorded at different iterations"));
    }
    let k = runs.len() as f64;
    Ok(first
        .iter()
        .enumerate()
        .map(|(i, r0)| TraceRecord {
            t: r0.t,
            gap_ergodic: runs.iter().map(|r| r[i].gap_ergodic).sum::<f64>() / k,
            gap_last: runs.iter().map(|r| r[i].gap_last).sum::<f64>() / k,
            eta: r0.eta,
        })
        .collect())
}

/// Constants echoed into reports under their conventional names.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReportConstants {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "M_prime")]
    pub m_prime: Option<f64>,
    pub sigma2: Option<f64>,
    #[serde(rename = "D0_bar")]
    pub d0_bar: f64,
    #[serde(rename = "D0_init")]
    pub d0_init: f64,
}

impl From<&BoundConstants> for ReportConstants {
    fn from(c: &BoundConstants) -> Self {
        Self {
            m: c.grad_bound,
            l: c.lipschitz,
            m_prime: c.grad_bound_stochastic,
            sigma2: c.sigma2,
            d0_bar: c.d0_bar,
            d0_init: c.d0_init,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    pub final_gap: f64,
    pub eta: f64,
    pub fit: RateFit,
    pub bound: BoundCheck,
    pub constants: ReportConstants,
}

pub fn rate_report(
    records: &[TraceRecord],
    c: &BoundConstants,
    kind: BoundKind,
    radius: Radius,
    fit_range: Option<(usize, usize)>,
) -> Result<RateReport> {
    let last = records.last().ok_or_else(|| Error::arg("empty trace"))?;
    Ok(RateReport {
        final_gap: last.gap_ergodic,
        eta: last.eta,
        fit: fit_rate(records, fit_range),
        bound: check_bounds(records, c, kind, radius, kind.default_slack())?,
        constants: c.into(),
    })
}

/// One-sample Kolmogorov–Smirnov statistic against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value `√(−ln(α/2)/2) / √n`.
pub fn ks_critical_value(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgldCheckConfig {
    pub gamma: f64,
    pub steps: usize,
    pub burn_in: usize,
    pub thinned: usize,
    pub alpha: f64,
    pub seed: u64,
}

impl Default for SgldCheckConfig {
    fn default() -> Self {
        Self {
            gamma: 1e-3,
            steps: 1_000_000,
            burn_in: 10_000,
            thinned: 10_000,
            alpha: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SgldCheckReport {
    pub mean: f64,
    pub variance: f64,
    pub ks: f64,
    pub ks_critical: f64,
    pub mean_ok: bool,
    pub variance_ok: bool,
    pub ks_ok: bool,
}

impl SgldCheckReport {
    pub fn pass(&self) -> bool {
        self.mean_ok && self.variance_ok && self.ks_ok
    }
}

pub const SGLD_MEAN_TOL: f64 = 0.02;
pub const SGLD_VARIANCE_TOL: f64 = 0.05;

/// Run one chain on `h(z) = z²/2` with unit noise from `z = 0`. Mean and
/// variance use every post-burn-in state; the KS test uses `thinned`
/// equally spaced states.
pub fn sgld_gaussian_check(cfg: &SgldCheckConfig) -> Result<SgldCheckReport> {
    if cfg.burn_in >= cfg.steps || cfg.thinned == 0 || cfg.thinned > cfg.steps - cfg.burn_in {
        return Err(Error::arg("need burn_in < steps and 0 < thinned <= steps - burn_in"));
    }
    let mut st = LangevinState::new(vec![0.0], cfg.seed, 0)?;
    for _ in 0..cfg.burn_in {
        let g = st.position()[0];
        sgld_step(&mut st, &[g], cfg.gamma, 1.0)?;
    }
    let kept = cfg.steps - cfg.burn_in;
    let stride = kept / cfg.thinned;
    let (mut s, mut s2) = (0.0, 0.0);
    let mut thin = Vec::with_capacity(cfg.thinned);
    for k in 1..=kept {
        let g = st.position()[0];
        sgld_step(&mut st, &[g], cfg.gamma, 1.0)?;
        let z = st.position()[0];
        s += z;
        s2 += z * z;
        if k % stride == 0 && thin.len() < cfg.thinned {
            thin.push(z);
        }
    }
    let n = kept as f64;
    let mean = s / n;
    let variance = s2 / n - mean * mean;
    let normal = Normal::standard();
    let ks = ks_statistic(&thin, |x| normal.cdf(x));
    let ks_critical = ks_critical_value(thin.len(), cfg.alpha);
    Ok(SgldCheckReport {
        mean,
        variance,
        ks,
        ks_critical,
        mean_ok: mean.abs() <= SGLD_MEAN_TOL,
        variance_ok: (variance - 1.0).abs() <= SGLD_VARIANCE_TOL,
        ks_ok: ks < ks_critical,
    })
}
