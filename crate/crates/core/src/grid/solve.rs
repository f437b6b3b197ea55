use super::{normalize_log, GridDensity, KernelGame};
use crate::entropy::dot;
use crate::error::{check_dim, Error, Result};
use crate::prox::{comparator_radius, record_schedule, BoundConstants, SolveOptions, StepSizeRule, TraceRecord};

/// `(Gν)(w_i) = Σ_j K(w_i, θ_j) ρ_ν(θ_j) · vol(Θ)` on raw densities.
fn g_into(game: &KernelGame, nu: &[f64], out: &mut [f64]) {
    let nt = nu.len();
    let vol = game.theta_domain().cell_volume();
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(&game.table()[i * nt..(i + 1) * nt], nu) * vol;
    }
}

/// `(G†μ)(θ_j) = Σ_i K(w_i, θ_j) ρ_μ(w_i) · vol(W)` on raw densities.
fn gdag_into(game: &KernelGame, mu: &[f64], out: &mut [f64]) {
    let nt = out.len();
    let vol = game.w_domain().cell_volume();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &m) in mu.iter().enumerate() {
        let row = &game.table()[i * nt..(i + 1) * nt];
        let c = m * vol;
        for (o, k) in out.iter_mut().zip(row) {
            *o += c * k;
        }
    }
}

pub fn apply_g(game: &KernelGame, nu: &GridDensity) -> Result<Vec<f64>> {
    nu.domain().check_same(game.theta_domain(), "apply_g")?;
    let mut out = vec![0.0; game.w_domain().len()];
    g_into(game, &nu.density(), &mut out);
    Ok(out)
}

pub fn apply_gdag(game: &KernelGame, mu: &GridDensity) -> Result<Vec<f64>> {
    mu.domain().check_same(game.w_domain(), "apply_gdag")?;
    let mut out = vec![0.0; game.theta_domain().len()];
    gdag_into(game, &mu.density(), &mut out);
    Ok(out)
}

fn md_step_log(logd: &mut [f64], h: &[f64], eta: f64, cell_volume: f64) {
    for (l, hi) in logd.iter_mut().zip(h) {
        *l -= eta * hi;
    }
    normalize_log(logd, cell_volume);
}

/// `dμ₊ ∝ e^{−ηh} dμ`.
pub fn md_step_density(mu: &GridDensity, h: &[f64], eta: f64) -> Result<GridDensity> {
    check_dim("md_step_density", mu.domain().len(), h.len())?;
    if h.iter().any(|x| !x.is_finite()) || !eta.is_finite() {
        return Err(Error::arg("md_step_density needs finite h and eta"));
    }
    let mut logd = mu.log_density().to_vec();
    md_step_log(&mut logd, h, eta, mu.domain().cell_volume());
    Ok(GridDensity {
        domain: *mu.domain(),
        log_density: logd,
    })
}

fn gap_raw(game: &KernelGame, mu: &[f64], nu: &[f64]) -> f64 {
    let mut gnu = vec![0.0; mu.len()];
    g_into(game, nu, &mut gnu);
    let best_w = game
        .offset_values()
        .iter()
        .zip(&gnu)
        .map(|(g, x)| g - x)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut gdag = vec![0.0; nu.len()];
    gdag_into(game, mu, &mut gdag);
    let best_theta = gdag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    best_w + best_theta - dot(mu, game.offset_values()) * game.w_domain().cell_volume()
}

/// `max_w (g − Gν) + max_θ G†μ − ⟨μ, g⟩`; the suprema over measures sit at grid points.
pub fn grid_duality_gap(game: &KernelGame, mu: &GridDensity, nu: &GridDensity) -> Result<f64> {
    mu.domain().check_same(game.w_domain(), "grid_duality_gap mu")?;
    nu.domain().check_same(game.theta_domain(), "grid_duality_gap nu")?;
    Ok(gap_raw(game, &mu.density(), &nu.density()))
}

/// Duality gap of cell-mass vectors that may contain empty cells
/// (histograms of particle ensembles).
pub fn gap_from_masses(game: &KernelGame, mu_masses: &[f64], nu_masses: &[f64]) -> Result<f64> {
    check_dim("mu masses", game.w_domain().len(), mu_masses.len())?;
    check_dim("nu masses", game.theta_domain().len(), nu_masses.len())?;
    if mu_masses.iter().chain(nu_masses).any(|m| !(*m >= 0.0 && m.is_finite())) {
        return Err(Error::arg("cell masses must be finite and nonnegative"));
    }
    let (vw, vt) = (game.w_domain().cell_volume(), game.theta_domain().cell_volume());
    let mu: Vec<f64> = mu_masses.iter().map(|m| m / vw).collect();
    let nu: Vec<f64> = nu_masses.iter().map(|m| m / vt).collect();
    Ok(gap_raw(game, &mu, &nu))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridTrace {
    pub records: Vec<TraceRecord>,
    pub eta: f64,
    pub constants: BoundConstants,
    pub mu_bar: GridDensity,
    pub nu_bar: GridDensity,
    /// Densities `(ρ_μ, ρ_ν)` of every averaged iterate, when requested.
    pub iterates: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl GridTrace {
    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.gap_ergodic)
    }
}

/// Constants of a deterministic grid run: `D̄₀ = log|W| + log|Θ|`.
pub fn grid_constants(game: &KernelGame, mu1: &GridDensity, nu1: &GridDensity) -> BoundConstants {
    BoundConstants {
        grad_bound: game.gradient_bound(),
        lipschitz: game.lipschitz(),
        grad_bound_stochastic: None,
        sigma2: None,
        d0_bar: (game.w_domain().len() as f64).ln() + (game.theta_domain().len() as f64).ln(),
        d0_init: comparator_radius(&mu1.masses()) + comparator_radius(&nu1.masses()),
    }
}

struct Pair {
    mu: Vec<f64>,
    nu: Vec<f64>,
}

struct Run<'a> {
    game: &'a KernelGame,
    schedule: Vec<usize>,
    cursor: usize,
    bar: Pair,
    grad_mu: Vec<f64>,
    grad_nu: Vec<f64>,
    records: Vec<TraceRecord>,
    iterates: Option<Vec<(Vec<f64>, Vec<f64>)>>,
    eta: f64,
}

impl<'a> Run<'a> {
    fn new(game: &'a KernelGame, horizon: usize, eta: f64, opts: SolveOptions) -> Self {
        let (nw, nt) = (game.w_domain().len(), game.theta_domain().len());
        Self {
            game,
            schedule: record_schedule(horizon, opts.stride),
            cursor: 0,
            bar: Pair {
                mu: vec![0.0; nw],
                nu: vec![0.0; nt],
            },
            grad_mu: vec![0.0; nw],
            grad_nu: vec![0.0; nt],
            records: Vec::new(),
            iterates: opts.keep_iterates.then(|| Vec::with_capacity(horizon)),
            eta,
        }
    }

    /// Fold `(μ_t, ν_t)` into the ergodic mean and record if scheduled.
    fn visit(&mut self, t: usize, cur: &Pair) {
        let w = 1.0 / t as f64;
        for (b, x) in self.bar.mu.iter_mut().zip(&cur.mu) {
            *b += (x - *b) * w;
        }
        for (b, x) in self.bar.nu.iter_mut().zip(&cur.nu) {
            *b += (x - *b) * w;
        }
        if let Some(it) = self.iterates.as_mut() {
            it.push((cur.mu.clone(), cur.nu.clone()));
        }
        if self.schedule.get(self.cursor) == Some(&t) {
            self.cursor += 1;
            self.records.push(TraceRecord {
                t,
                gap_ergodic: gap_raw(self.game, &self.bar.mu, &self.bar.nu),
                gap_last: gap_raw(self.game, &cur.mu, &cur.nu),
                eta: self.eta,
            });
        }
    }

    /// Descent directions at `(μ, ν)`: `−g + Gν` for μ and `−G†μ` for ν.
    fn gradients(&mut self, at: &Pair, t: usize) -> Result<()> {
        g_into(self.game, &at.nu, &mut self.grad_mu);
        for (o, g) in self.grad_mu.iter_mut().zip(self.game.offset_values()) {
            *o -= g;
        }
        gdag_into(self.game, &at.mu, &mut self.grad_nu);
        self.grad_nu.iter_mut().for_each(|o| *o = -*o);
        if self.grad_mu.iter().chain(&self.grad_nu).any(|x| !x.is_finite()) {
            return Err(Error::numerical(format!("iteration {t}"), "non-finite gradient"));
        }
        Ok(())
    }

    fn finish(self, constants: BoundConstants) -> Result<GridTrace> {
        let g = self.game;
        let to_density = |d: &super::GridDomain, v: &[f64]| {
            GridDensity::from_log_unnormalized(*d, v.iter().map(|x| x.ln()).collect())
        };
        Ok(GridTrace {
            mu_bar: to_density(g.w_domain(), &self.bar.mu)?,
            nu_bar: to_density(g.theta_domain(), &self.bar.nu)?,
            records: self.records,
            eta: self.eta,
            constants,
            iterates: self.iterates,
        })
    }
}

fn exp_into(logd: &[f64], out: &mut Vec<f64>) {
    out.clear();
    out.extend(logd.iter().map(|l| l.exp()));
}

fn check_init(game: &KernelGame, mu1: &GridDensity, nu1: &GridDensity, horizon: usize) -> Result<()> {
    if horizon == 0 {
        return Err(Error::arg("iteration count must be at least 1"));
    }
    mu1.domain().check_same(game.w_domain(), "initial mu")?;
    nu1.domain().check_same(game.theta_domain(), "initial nu")
}

/// Entropic mirror descent on densities:
/// `ν_{t+1} = MD(ν_t, −G†μ_t)`, `μ_{t+1} = MD(μ_t, −g + Gν_t)`.
pub fn solve_inf_md(
    game: &KernelGame,
    horizon: usize,
    rule: &StepSizeRule,
    mu1: &GridDensity,
    nu1: &GridDensity,
    opts: SolveOptions,
) -> Result<GridTrace> {
    check_init(game, mu1, nu1, horizon)?;
    let eta = rule.resolve()?;
    let (vw, vt) = (game.w_domain().cell_volume(), game.theta_domain().cell_volume());
    let mut log_mu = mu1.log_density().to_vec();
    let mut log_nu = nu1.log_density().to_vec();
    let mut run = Run::new(game, horizon, eta, opts);
    let mut cur = Pair {
        mu: Vec::new(),
        nu: Vec::new(),
    };
    for t in 1..=horizon {
        exp_into(&log_mu, &mut cur.mu);
        exp_into(&log_nu, &mut cur.nu);
        run.visit(t, &cur);
        run.gradients(&cur, t)?;
        md_step_log(&mut log_mu, &run.grad_mu, eta, vw);
        md_step_log(&mut log_nu, &run.grad_nu, eta, vt);
    }
    run.finish(grid_constants(game, mu1, nu1))
}

/// Entropic mirror-prox on densities; the ergodic mean runs over leader iterates.
pub fn solve_inf_mp(
    game: &KernelGame,
    horizon: usize,
    rule: &StepSizeRule,
    mu1: &GridDensity,
    nu1: &GridDensity,
    opts: SolveOptions,
) -> Result<GridTrace> {
    check_init(game, mu1, nu1, horizon)?;
    let eta = rule.resolve()?;
    let (vw, vt) = (game.w_domain().cell_volume(), game.theta_domain().cell_volume());
    let mut tilde_mu = mu1.log_density().to_vec();
    let mut tilde_nu = nu1.log_density().to_vec();
    let mut run = Run::new(game, horizon, eta, opts);
    let mut cur = Pair {
        mu: Vec::new(),
        nu: Vec::new(),
    };
    for t in 1..=horizon {
        exp_into(&tilde_mu, &mut cur.mu);
        exp_into(&tilde_nu, &mut cur.nu);
        run.gradients(&cur, t)?;
        let mut lead_mu = tilde_mu.clone();
        let mut lead_nu = tilde_nu.clone();
        md_step_log(&mut lead_mu, &run.grad_mu, eta, vw);
        md_step_log(&mut lead_nu, &run.grad_nu, eta, vt);

        exp_into(&lead_mu, &mut cur.mu);
        exp_into(&lead_nu, &mut cur.nu);
        run.visit(t, &cur);
        run.gradients(&cur, t)?;
        md_step_log(&mut tilde_mu, &run.grad_mu, eta, vw);
        md_step_log(&mut tilde_nu, &run.grad_nu, eta, vt);
    }
    run.finish(grid_constants(game, mu1, nu1))
}
