//! Randomized numerical checks of the entropic mirror-map identities and
//! inequalities at the level of densities and functions on a grid.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::{md_step_density, GridDensity, GridDomain};
use crate::entropy::lse_unchecked;
use crate::error::{Error, Result};
use crate::rng::{self, tag, StreamRng};

pub const IDENTITY_TOL: f64 = 1e-9;
pub const INEQUALITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Identity,
    Inequality,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItemReport {
    pub kind: CheckKind,
    /// Identities: largest `|lhs − rhs|`. Inequalities: largest `lhs − rhs`
    /// (negative means satisfied with margin).
    pub worst_residual: f64,
    /// For identities that come with an accompanying inequality.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst_violation: Option<f64>,
    pub pass: bool,
    /// Reported for reference only; excluded from [`FoundationsReport::all_pass`].
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub informational: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoundationsReport {
    pub points: usize,
    pub trials: usize,
    pub seed: u64,
    pub items: BTreeMap<String, ItemReport>,
}

impl FoundationsReport {
    pub fn all_pass(&self) -> bool {
        self.items.values().all(|i| i.pass || i.informational)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.items
            .iter()
            .filter(|(_, i)| !i.pass && !i.informational)
            .map(|(k, _)| k.as_str())
            .collect()
    }
}

#[derive(Default)]
struct Tally {
    identity: Option<f64>,
    violation: Option<f64>,
}

impl Tally {
    fn identity(&mut self, lhs: f64, rhs: f64) {
        let r = (lhs - rhs).abs();
        self.identity = Some(self.identity.map_or(r, |w| w.max(r)));
    }

    fn inequality(&mut self, lhs: f64, rhs: f64) {
        let r = lhs - rhs;
        self.violation = Some(self.violation.map_or(r, |w| w.max(r)));
    }

    fn report(&self, informational: bool) -> ItemReport {
        let ok_violation = self.violation.is_none_or(|v| v <= INEQUALITY_SLACK);
        match self.identity {
            Some(r) => ItemReport {
                kind: CheckKind::Identity,
                worst_residual: r,
                worst_violation: self.violation,
                pass: r <= IDENTITY_TOL && ok_violation,
                informational,
            },
            None => ItemReport {
                kind: CheckKind::Inequality,
                worst_residual: self.violation.unwrap_or(f64::NEG_INFINITY),
                worst_violation: None,
                pass: ok_violation,
                informational,
            },
        }
    }
}

/// Functions and log-densities on one grid, with the mirror-map calculus.
struct Calc {
    vol: f64,
    log_vol: f64,
}

impl Calc {
    /// `⟨μ, h⟩` for `μ` given by its log-density.
    fn ip(&self, l: &[f64], h: &[f64]) -> f64 {
        l.iter().zip(h).map(|(a, b)| a.exp() * b).sum::<f64>() * self.vol
    }

    /// `Φ(μ) = ∫ ρ log ρ`.
    fn phi(&self, l: &[f64]) -> f64 {
        self.ip(l, l)
    }

    /// `Φ*(h) = log ∫ e^h`.
    fn phi_star(&self, h: &[f64]) -> f64 {
        lse_unchecked(h) + self.log_vol
    }

    /// Log-density of `dΦ*(h) = e^h / ∫ e^h`.
    fn d_phi_star(&self, h: &[f64]) -> Vec<f64> {
        let z = self.phi_star(h);
        h.iter().map(|x| x - z).collect()
    }

    /// `dΦ(μ) = 1 + log ρ`.
    fn d_phi(&self, l: &[f64]) -> Vec<f64> {
        l.iter().map(|x| 1.0 + x).collect()
    }

    fn kl(&self, l: &[f64], l_ref: &[f64]) -> f64 {
        l.iter()
            .zip(l_ref)
            .map(|(a, b)| a.exp() * (a - b))
            .sum::<f64>()
            * self.vol
    }

    fn tv(&self, l: &[f64], l2: &[f64]) -> f64 {
        0.5 * l
            .iter()
            .zip(l2)
            .map(|(a, b)| (a.exp() - b.exp()).abs())
            .sum::<f64>()
            * self.vol
    }

    /// `D_{Φ*}(h, h') = Φ*(h) − Φ*(h') − ⟨dΦ*(h'), h − h'⟩`.
    fn bregman_star(&self, h: &[f64], h2: &[f64]) -> f64 {
        let diff: Vec<f64> = h.iter().zip(h2).map(|(a, b)| a - b).collect();
        self.phi_star(h) - self.phi_star(h2) - self.ip(&self.d_phi_star(h2), &diff)
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn log_uniform(rng: &mut StreamRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo.ln()..hi.ln()).exp()
}

/// `N(0,1)` entries scaled by a temperature drawn log-uniform on `[0.1, 10]`.
fn random_function(rng: &mut StreamRng, n: usize) -> Vec<f64> {
    let t = log_uniform(rng, 0.1, 10.0);
    (0..n).map(|_| t * rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_log_density(rng: &mut StreamRng, calc: &Calc, n: usize) -> Vec<f64> {
    calc.d_phi_star(&random_function(rng, n))
}

const ITEMS: [&str; 11] = [
    "a_gibbs",
    "b_fenchel",
    "c_bregman_is_kl",
    "d_strong_convexity",
    "e_duality",
    "f_smoothness",
    "g_dual_bregman",
    "h_three_point",
    "i_md_characterization",
    "j_master_lemma",
    "j_master_lemma_corrected",
];

/// Run every check on `trials` random draws over `domain`.
///
/// Item `j` is evaluated with the constants as commonly stated
/// (`η²/(2α)` with `α = 4`), which is not valid in general; the
/// `j_master_lemma_corrected` entry uses `η²/2`, which follows from the
/// sharp Hölder step and the ½ smoothness constant.
pub fn foundations_suite(domain: &GridDomain, trials: usize, seed: u64) -> Result<FoundationsReport> {
    if trials == 0 {
        return Err(Error::arg("foundations suite needs at least one trial"));
    }
    let n = domain.len();
    let calc = Calc {
        vol: domain.cell_volume(),
        log_vol: domain.cell_volume().ln(),
    };
    let mut tallies: Vec<Tally> = ITEMS.iter().map(|_| Tally::default()).collect();

    for trial in 0..trials {
        let mut rng = rng::stream(seed, &[tag::TRIAL, trial as u64]);
        let mu = random_log_density(&mut rng, &calc, n);
        let mu2 = random_log_density(&mut rng, &calc, n);
        let mu3 = random_log_density(&mut rng, &calc, n);
        let h = random_function(&mut rng, n);
        let h2 = random_function(&mut rng, n);
        let eta = log_uniform(&mut rng, 0.1, 10.0);
        let lambda: f64 = rng.random_range(0.0..1.0);
        let shift = 10.0 * rng.sample::<f64, _>(StandardNormal);

        // (a) Gibbs variational principle against reference μ2.
        let tilted: Vec<f64> = h.iter().zip(&mu2).map(|(a, b)| a + b).collect();
        let lhs = calc.phi_star(&tilted);
        let gibbs = calc.d_phi_star(&tilted);
        tallies[0].identity(lhs, calc.ip(&gibbs, &h) - calc.kl(&gibbs, &mu2));
        tallies[0].inequality(calc.ip(&mu, &h) - calc.kl(&mu, &mu2), lhs);

        // (b) Fenchel pair, with equality at the conjugate points.
        let mu_h = calc.d_phi_star(&h);
        tallies[1].identity(calc.phi_star(&h), calc.ip(&mu_h, &h) - calc.phi(&mu_h));
        let h_mu = calc.d_phi(&mu);
        tallies[1].identity(calc.phi(&mu), calc.ip(&mu, &h_mu) - calc.phi_star(&h_mu));
        tallies[1].inequality(calc.ip(&mu, &h) - calc.phi(&mu), calc.phi_star(&h));

        // (c) Bregman divergence of Φ is KL.
        let diff: Vec<f64> = mu.iter().zip(&mu2).map(|(a, b)| a.exp() - b.exp()).collect();
        let lin = diff
            .iter()
            .zip(calc.d_phi(&mu2))
            .map(|(d, g)| d * g)
            .sum::<f64>()
            * calc.vol;
        tallies[2].identity(calc.phi(&mu) - calc.phi(&mu2) - lin, calc.kl(&mu, &mu2));

        // (d) 4-strong convexity in TV.
        let mix: Vec<f64> = mu
            .iter()
            .zip(&mu2)
            .map(|(a, b)| (lambda * a.exp() + (1.0 - lambda) * b.exp()).ln())
            .collect();
        let tv = calc.tv(&mu, &mu2);
        tallies[3].inequality(
            calc.phi(&mix),
            lambda * calc.phi(&mu) + (1.0 - lambda) * calc.phi(&mu2)
                - 2.0 * lambda * (1.0 - lambda) * tv * tv,
        );

        // (e) D_Φ(μ, μ') = D_Φ*(dΦ(μ') + C, dΦ(μ)).
        let shifted: Vec<f64> = calc.d_phi(&mu2).iter().map(|x| x + shift).collect();
        tallies[4].identity(calc.kl(&mu, &mu2), calc.bregman_star(&shifted, &calc.d_phi(&mu)));

        // (f) ¼-smoothness of Φ* in gradient and function form.
        let dh = sup_diff(&h, &h2);
        tallies[5].inequality(calc.tv(&calc.d_phi_star(&h), &calc.d_phi_star(&h2)), 0.25 * dh);
        tallies[5].inequality(calc.bregman_star(&h, &h2), 0.125 * dh * dh);

        // (g) D_Φ*(h, h') = D_Φ(dΦ*(h'), dΦ*(h)).
        tallies[6].identity(
            calc.bregman_star(&h, &h2),
            calc.kl(&calc.d_phi_star(&h2), &calc.d_phi_star(&h)),
        );

        // (h) three-point identity with (μ, μ', μ'') = (mu, mu2, mu3).
        let grad_diff: Vec<f64> = mu2.iter().zip(&mu).map(|(a, b)| a - b).collect();
        let lhs = calc.ip(&mu3, &grad_diff) - calc.ip(&mu, &grad_diff);
        tallies[7].identity(
            lhs,
            calc.kl(&mu, &mu2) + calc.kl(&mu3, &mu) - calc.kl(&mu3, &mu2),
        );

        // (i) dΦ(μ₊) − dΦ(μ) + ηh is constant.
        let base = GridDensity::new(*domain, mu.clone())?;
        let plus = md_step_density(&base, &h, eta)?;
        let r: Vec<f64> = plus
            .log_density()
            .iter()
            .zip(&mu)
            .zip(&h)
            .map(|((p, m), hi)| p - m + eta * hi)
            .collect();
        let (lo, hi) = r
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        tallies[8].identity(hi - lo, 0.0);

        // (j) master lemma: μ = MD(μ̃, h), μ̃₊ = MD(μ̃, h'), comparator μ*.
        let (base_tilde, star) = (&mu, &mu3);
        let step = |g: &[f64]| {
            let t: Vec<f64> = base_tilde.iter().zip(g).map(|(l, x)| l - eta * x).collect();
            calc.d_phi_star(&t)
        };
        let lead = step(&h);
        let next = step(&h2);
        let lhs = eta * (calc.ip(&lead, &h2) - calc.ip(star, &h2));
        let common = calc.kl(star, base_tilde) - calc.kl(star, &next);
        let tv_lead = calc.tv(&lead, base_tilde);
        let alpha = 4.0;
        tallies[9].inequality(
            lhs,
            common + eta * eta / (2.0 * alpha) * dh * dh - 0.5 * alpha * tv_lead * tv_lead,
        );
        tallies[10].inequality(
            lhs,
            common + 0.5 * eta * eta * dh * dh - 0.5 * alpha * tv_lead * tv_lead,
        );
    }

    let items = ITEMS
        .iter()
        .zip(&tallies)
        .map(|(name, t)| (name.to_string(), t.report(*name == "j_master_lemma_corrected")))
        .collect();
    Ok(FoundationsReport {
        points: n,
        trials,
        seed,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_function_gibbs() {
        let d = GridDomain::torus(16).unwrap();
        let calc = Calc {
            vol: d.cell_volume(),
            log_vol: d.cell_volume().ln(),
        };
        let mut rng = rng::stream(3, &[]);
        let mu2 = random_log_density(&mut rng, &calc, 16);
        let c = 1.7;
        let tilted: Vec<f64> = mu2.iter().map(|b| c + b).collect();
        assert!((calc.phi_star(&tilted) - c).abs() < 1e-12);
        let gibbs = calc.d_phi_star(&tilted);
        assert!((calc.ip(&gibbs, &[c; 16]) - calc.kl(&gibbs, &mu2) - c).abs() < 1e-12);
    }

    #[test]
    fn bregman_vanishes_on_the_diagonal() {
        let d = GridDomain::torus(16).unwrap();
        let calc = Calc {
            vol: d.cell_volume(),
            log_vol: d.cell_volume().ln(),
        };
        let mut rng = rng::stream(4, &[]);
        let mu = random_log_density(&mut rng, &calc, 16);
        assert_eq!(calc.kl(&mu, &mu), 0.0);
    }

    #[test]
    fn report_is_deterministic() {
        let d = GridDomain::torus(16).unwrap();
        let a = foundations_suite(&d, 20, 9).unwrap();
        let b = foundations_suite(&d, 20, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.items.len(), ITEMS.len());
    }

    /// `μ̃ = (½, ½)`, `h = (1, −1)`, `h' = −h`, `η = 1`, `μ* = μ̃₊`: the left
    /// side is about 1.523 while the literal right side is about 0.538.
    #[test]
    fn master_lemma_counterexample() {
        let calc = Calc { vol: 1.0, log_vol: 0.0 };
        let base = [0.5f64.ln(); 2];
        let h = [1.0, -1.0];
        let h2 = [-1.0, 1.0];
        let step = |g: &[f64]| {
            let t: Vec<f64> = base.iter().zip(g).map(|(l, x)| l - x).collect();
            calc.d_phi_star(&t)
        };
        let lead = step(&h);
        let next = step(&h2);
        let star = next.clone();
        let lhs = calc.ip(&lead, &h2) - calc.ip(&star, &h2);
        let tv = calc.tv(&lead, &base);
        let common = calc.kl(&star, &base) - calc.kl(&star, &next);
        let literal = common + 0.125 * 4.0 - 2.0 * tv * tv;
        let corrected = common + 0.5 * 4.0 - 2.0 * tv * tv;
        assert!((lhs - 1.5232).abs() < 1e-3);
        assert!(lhs > literal);
        assert!(lhs <= corrected);
    }
}
