//! Particle approximations of the measure-space solvers.
//!
//! A mixed strategy is represented by samples drawn with Langevin chains
//! whose potentials are empirical estimates of the mirror-descent log-density.
//! [`approx_inf_md`]/[`approx_inf_mp`] keep the full sample history;
//! [`mirror_gan`]/[`mirror_prox_gan`] summarize each measure by one
//! exponentially damped parameter.

mod approx;
mod heuristic;

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{wrap, GridDensity, Kernel, KernelGame, Offset};
use crate::sgld::{preconditioned_sgld_step, sgld_step, LangevinState, RmsPreconditioner, SgldSchedule};
use crate::rng::StreamRng;

pub use approx::{approx_inf_md, approx_inf_mp, ensemble_trace, ApproxRun};
pub use heuristic::{ema_update, mirror_gan, mirror_prox_gan, ParamTrace, TraceRow};

/// Samples `x_1..x_n'` of one measure, stored flat (`n' × dim`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    dim: usize,
    generation: usize,
    particles: Vec<f64>,
}

impl ParticleEnsemble {
    /// Coordinates are wrapped into `[0, period)` when a period is given.
    pub fn new(dim: usize, generation: usize, mut particles: Vec<f64>, period: Option<f64>) -> Result<Self> {
        if dim == 0 || particles.is_empty() || !particles.len().is_multiple_of(dim) {
            return Err(Error::arg("ensemble needs at least one particle of positive dimension"));
        }
        if particles.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("ensemble particles must be finite"));
        }
        if let Some(p) = period {
            particles.iter_mut().for_each(|x| *x = wrap(*x, p));
        }
        Ok(Self {
            dim,
            generation,
            particles,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn generation(&self) -> usize {
        self.generation
    }

    pub fn len(&self) -> usize {
        self.particles.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.particles[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.particles
    }

    pub fn iter(&self) -> std::slice::Chunks<'_, f64> {
        self.particles.chunks(self.dim)
    }

    /// Coordinate-wise mean; circular on periodic domains.
    pub fn mean(&self, period: Option<f64>) -> Vec<f64> {
        (0..self.dim)
            .map(|d| {
                let xs = self.iter().map(|x| x[d]);
                match period {
                    None => xs.sum::<f64>() / self.len() as f64,
                    Some(p) => {
                        let s = std::f64::consts::TAU / p;
                        let (sn, cs) = xs.fold((0.0, 0.0), |(a, b), x| (a + (s * x).sin(), b + (s * x).cos()));
                        wrap(sn.atan2(cs) / s, p)
                    }
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let cols: Vec<String> = (0..self.dim).map(|d| format!("x{d}")).collect();
        out.push_str(&cols.join(","));
        out.push('\n');
        for x in self.iter() {
            let row: Vec<String> = x.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", row.join(",")).expect("writing to a String cannot fail");
        }
        out
    }
}

/// Scalar Dirac-GAN: discriminator `f_w(x) = w·x`, generator `δ_θ`, real data
/// `δ_{x₀}` (or `N(x₀, s²)`), both players confined by `λ|·|²/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiracGan {
    pub x0: f64,
    pub real_std: f64,
    pub confinement: f64,
}

impl DiracGan {
    pub fn new(x0: f64, real_std: f64, confinement: f64) -> Result<Self> {
        if !x0.is_finite() || !(real_std >= 0.0 && real_std.is_finite()) {
            return Err(Error::arg("x0 must be finite and real_std nonnegative"));
        }
        if !(confinement > 0.0 && confinement.is_finite()) {
            return Err(Error::arg(format!("confinement must be positive, got {confinement}")));
        }
        Ok(Self {
            x0,
            real_std,
            confinement,
        })
    }

    /// Stationary point `(w*, θ*)` of `w(x₀ − θ) − λw²/2 + λθ²/2`.
    pub fn saddle(&self) -> (f64, f64) {
        let l = self.confinement;
        let theta = self.x0 / (1.0 + l * l);
        (l * theta, theta)
    }
}

/// Games the particle solvers can run on.
#[derive(Debug, Clone, PartialEq)]
pub enum ToyGame {
    /// Payoff `K(w, θ)` and real term `g(w)` on a torus; `P_θ = δ_θ`.
    KernelTorus(KernelGame),
    DiracGan(DiracGan),
}

impl ToyGame {
    pub fn kernel_torus(game: KernelGame) -> Result<Self> {
        if matches!(game.kernel(), Kernel::Lookup { .. }) || matches!(game.offset(), Offset::Lookup { .. }) {
            return Err(Error::arg("particle solvers need an analytic kernel and offset"));
        }
        Ok(ToyGame::KernelTorus(game))
    }

    pub fn dirac_gan(x0: f64, real_std: f64, confinement: f64) -> Result<Self> {
        Ok(ToyGame::DiracGan(DiracGan::new(x0, real_std, confinement)?))
    }

    pub fn dim(&self) -> usize {
        match self {
            ToyGame::KernelTorus(g) => g.dims(),
            ToyGame::DiracGan(_) => 1,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self {
            ToyGame::KernelTorus(g) => Some(g.w_domain().extent()),
            ToyGame::DiracGan(_) => None,
        }
    }

    pub fn confinement(&self) -> f64 {
        match self {
            ToyGame::KernelTorus(_) => 0.0,
            ToyGame::DiracGan(d) => d.confinement,
        }
    }

    /// `f_w(x)`.
    pub fn payoff(&self, w: &[f64], x: &[f64]) -> f64 {
        match self {
            ToyGame::KernelTorus(g) => g.kernel_at(w, x),
            ToyGame::DiracGan(_) => w[0] * x[0],
        }
    }

    /// Mean of a real-data batch; a point mass is returned exactly without
    /// consuming draws. The kernel game's real term is analytic.
    fn real_mean(&self, batch: usize, rng: &mut StreamRng) -> f64 {
        match self {
            ToyGame::KernelTorus(_) => 0.0,
            ToyGame::DiracGan(d) if d.real_std == 0.0 => d.x0,
            ToyGame::DiracGan(d) => {
                let s: f64 = (0..batch).map(|_| rng.sample::<f64, _>(StandardNormal)).sum();
                d.x0 + d.real_std * s / batch as f64
            }
        }
    }

    /// `(1/n) Σ_i f_w(X_i^real)`.
    pub fn estimate_real(&self, w: &[f64], batch: usize, rng: &mut StreamRng) -> f64 {
        match self {
            ToyGame::KernelTorus(g) => g.offset_at(w),
            ToyGame::DiracGan(_) => w[0] * self.real_mean(batch, rng),
        }
    }

    /// `(1/n) Σ_i ∇_w f_w(X_i^real)`.
    fn real_grad_w(&self, w: &[f64], batch: usize, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        match self {
            ToyGame::KernelTorus(g) => g.offset_grad(w, out),
            ToyGame::DiracGan(_) => {
                out[0] = self.real_mean(batch, rng);
                Ok(())
            }
        }
    }

    /// `∇_w f_w(θ)`, the fake-sample gradient for the point-mass generator.
    fn fake_grad_w(&self, w: &[f64], theta: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ToyGame::KernelTorus(g) => g.kernel_grad_w(w, theta, out),
            ToyGame::DiracGan(_) => {
                out[0] = theta[0];
                Ok(())
            }
        }
    }

    /// `∇_θ f_w(X)` at `X = θ`.
    fn fake_grad_theta(&self, w: &[f64], theta: &[f64], out: &mut [f64]) -> Result<()> {
        match self {
            ToyGame::KernelTorus(g) => g.kernel_grad_theta(w, theta, out),
            ToyGame::DiracGan(_) => {
                out[0] = w[0];
                Ok(())
            }
        }
    }
}

/// Empirical derivative estimates against fixed opponent pools.
///
/// Pools are flat particle arrays; sums over them are normalized by
/// `per_measure` rather than by the pool size, so a pool holding `t`
/// generations contributes `t` measures' worth of drift. Generators are
/// point masses, so the `n` fake samples per particle coincide and the fake
/// sums need no sampling.
#[derive(Debug, Clone, Copy)]
pub struct Estimator<'a> {
    pub game: &'a ToyGame,
    pub w_pool: &'a [f64],
    pub theta_pool: &'a [f64],
    pub per_measure: usize,
    pub batch: usize,
}

impl<'a> Estimator<'a> {
    pub fn new(
        game: &'a ToyGame,
        w_pool: &'a [f64],
        theta_pool: &'a [f64],
        per_measure: usize,
        batch: usize,
    ) -> Result<Self> {
        let d = game.dim();
        if w_pool.is_empty() || theta_pool.is_empty() || !w_pool.len().is_multiple_of(d) || !theta_pool.len().is_multiple_of(d) {
            return Err(Error::arg("estimator pools must be nonempty whole particles"));
        }
        if per_measure == 0 || batch == 0 {
            return Err(Error::arg("batch sizes must be at least 1"));
        }
        Ok(Self {
            game,
            w_pool,
            theta_pool,
            per_measure,
            batch,
        })
    }

    fn norm(&self) -> f64 {
        1.0 / self.per_measure as f64
    }

    /// `ĝ(w)`.
    pub fn real(&self, w: &[f64], rng: &mut StreamRng) -> f64 {
        self.game.estimate_real(w, self.batch, rng)
    }

    /// `(Ĝν)(w) = (1/n') Σ_{θ ∈ pool} f_w(θ)`.
    pub fn g_nu(&self, w: &[f64]) -> f64 {
        let d = self.game.dim();
        self.theta_pool.chunks(d).map(|th| self.game.payoff(w, th)).sum::<f64>() * self.norm()
    }

    /// `(Ĝ†μ)(θ) = (1/n') Σ_{w ∈ pool} f_w(θ)`.
    pub fn gdag_mu(&self, theta: &[f64]) -> f64 {
        let d = self.game.dim();
        self.w_pool.chunks(d).map(|w| self.game.payoff(w, theta)).sum::<f64>() * self.norm()
    }

    /// `factor · ∇ĝ(w)`, drawing a fresh real batch.
    pub fn real_drift(&self, w: &[f64], factor: f64, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        self.game.real_grad_w(w, self.batch, rng, out)?;
        out.iter_mut().for_each(|o| *o *= factor);
        Ok(())
    }

    /// Ascent direction of the `w` chain: `factor·∇ĝ(w) − ∇(Ĝν)(w)`.
    pub fn w_drift(&self, w: &[f64], factor: f64, rng: &mut StreamRng, out: &mut [f64]) -> Result<()> {
        let d = self.game.dim();
        self.real_drift(w, factor, rng, out)?;
        let mut buf = [0.0; 2];
        let norm = self.norm();
        for th in self.theta_pool.chunks(d) {
            self.game.fake_grad_w(w, th, &mut buf)?;
            for k in 0..d {
                out[k] -= norm * buf[k];
            }
        }
        Ok(())
    }

    /// Ascent direction of the `θ` chain: `∇(Ĝ†μ)(θ)`.
    pub fn theta_drift(&self, theta: &[f64], out: &mut [f64]) -> Result<()> {
        let d = self.game.dim();
        out[..d].iter_mut().for_each(|o| *o = 0.0);
        let mut buf = [0.0; 2];
        let norm = self.norm();
        for w in self.w_pool.chunks(d) {
            self.game.fake_grad_theta(w, theta, &mut buf)?;
            for k in 0..d {
                out[k] += norm * buf[k];
            }
        }
        Ok(())
    }
}

/// Draw `n` grid points (cell centers) with probabilities equal to the cell masses.
pub fn sample_from_grid(density: &GridDensity, n: usize, rng: &mut StreamRng) -> Result<ParticleEnsemble> {
    let masses = density.masses();
    let pick = WeightedIndex::new(&masses).map_err(|e| Error::arg(e.to_string()))?;
    let dom = density.domain();
    let dims = dom.dims();
    let mut flat = Vec::with_capacity(n * dims);
    for _ in 0..n {
        flat.extend_from_slice(&dom.point(pick.sample(rng))[..dims]);
    }
    ParticleEnsemble::new(dims, 1, flat, None)
}

/// Which Langevin update the chains use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    #[default]
    Plain,
    Preconditioned,
}

/// How the first ensembles (or parameters) are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParticleInit {
    /// Uniform on the torus; periodic games only.
    Uniform,
    /// Independent normals, wrapped on periodic games.
    Normal { w_mean: f64, theta_mean: f64, std: f64 },
}

impl ParticleInit {
    pub fn default_for(game: &ToyGame) -> Self {
        match game {
            ToyGame::KernelTorus(_) => ParticleInit::Uniform,
            ToyGame::DiracGan(_) => ParticleInit::Normal {
                w_mean: 0.0,
                theta_mean: 0.0,
                std: 0.1,
            },
        }
    }

    /// `count` points of dimension `dim`, for the `w` player when `is_w`.
    fn draw(&self, game: &ToyGame, count: usize, is_w: bool, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let dim = game.dim();
        match (*self, game.period()) {
            (ParticleInit::Uniform, Some(p)) => Ok((0..count * dim).map(|_| rng.random::<f64>() * p).collect()),
            (ParticleInit::Uniform, None) => Err(Error::arg("uniform initialization needs a periodic game")),
            (ParticleInit::Normal { w_mean, theta_mean, std }, period) => {
                let m = if is_w { w_mean } else { theta_mean };
                Ok((0..count * dim)
                    .map(|_| {
                        let x = m + std * rng.sample::<f64, _>(StandardNormal);
                        period.map_or(x, |p| wrap(x, p))
                    })
                    .collect())
            }
        }
    }
}

/// Shared settings of the particle solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleConfig {
    pub horizon: usize,
    pub schedule: SgldSchedule,
    /// Data batch size `n`.
    pub batch: usize,
    /// Samples per measure `n'` (history-keeping solvers only).
    pub per_measure: usize,
    /// EMA damping (parameter-summary solvers only).
    pub beta: f64,
    pub sampler: SamplerKind,
    pub init: ParticleInit,
    pub seed: u64,
}

impl ParticleConfig {
    pub const DEFAULT_BETA: f64 = 0.9;

    pub fn new(game: &ToyGame, horizon: usize, schedule: SgldSchedule, seed: u64) -> Self {
        Self {
            horizon,
            schedule,
            batch: 1,
            per_measure: 1,
            beta: Self::DEFAULT_BETA,
            sampler: SamplerKind::Plain,
            init: ParticleInit::default_for(game),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::arg("T must be at least 1"));
        }
        if self.batch == 0 || self.per_measure == 0 {
            return Err(Error::arg("n and n' must be at least 1"));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::arg(format!("beta must lie in (0, 1], got {}", self.beta)));
        }
        Ok(())
    }
}

/// Storage accounting: how many strategy vectors a run held at its peak.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MemoryStats {
    pub stored_points: usize,
}

/// A Langevin chain with an optional preconditioner borrowed from its player.
struct Chain<'a> {
    state: LangevinState,
    precond: Option<&'a mut RmsPreconditioner>,
    grad: [f64; 2],
}

impl<'a> Chain<'a> {
    fn start(
        game: &ToyGame,
        x: &[f64],
        seed: u64,
        chain: u64,
        precond: Option<&'a mut RmsPreconditioner>,
    ) -> Result<Self> {
        let mut state = LangevinState::new(x.to_vec(), seed, chain)?.with_confinement(game.confinement());
        if let Some(p) = game.period() {
            state = state.with_period(p);
        }
        Ok(Self {
            state,
            precond,
            grad: [0.0; 2],
        })
    }

    fn position(&self) -> &[f64] {
        self.state.position()
    }

    /// Step along the ascent direction `drift` (the potential is `−drift`).
    fn ascend(&mut self, drift: &[f64], gamma: f64, eps: f64) -> Result<()> {
        let d = self.state.dim();
        for k in 0..d {
            self.grad[k] = -drift[k];
        }
        match self.precond.as_deref_mut() {
            None => sgld_step(&mut self.state, &self.grad[..d], gamma, eps),
            Some(acc) => preconditioned_sgld_step(&mut self.state, &self.grad[..d], gamma, eps, acc),
        }
    }
}

fn at_step(e: Error, t: usize, k: usize) -> Error {
    match e {
        Error::Numerical { message, .. } => Error::numerical(format!("outer step {t}, inner step {k}"), message),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::apply_g;
    use crate::rng::{self, tag};

    #[test]
    fn point_mass_real_term_is_exact() {
        let g = ToyGame::dirac_gan(0.5, 0.0, 0.1).unwrap();
        let mut r = rng::stream(1, &[tag::DATA_BATCH]);
        for w in [-1.0, 0.3, 2.0] {
            assert_eq!(g.estimate_real(&[w], 16, &mut r), w * 0.5);
        }
    }

    #[test]
    fn single_particle_pool_gives_kernel() {
        let kg = KernelGame::cosine_torus(32).unwrap();
        let g = ToyGame::kernel_torus(kg.clone()).unwrap();
        let theta0 = [1.3];
        let est = Estimator::new(&g, &[0.0], &theta0, 1, 1).unwrap();
        for w in [0.0, 0.7, 4.0] {
            assert_eq!(est.g_nu(&[w]), kg.kernel_at(&[w], &theta0));
        }
    }

    #[test]
    fn g_nu_is_unbiased_against_quadrature() {
        let kg = KernelGame::cosine_torus(32).unwrap();
        let nu = GridDensity::von_mises(*kg.theta_domain(), &[2.0], 1.5).unwrap();
        let exact = apply_g(&kg, &nu).unwrap();
        let g = ToyGame::kernel_torus(kg.clone()).unwrap();
        let mut r = rng::stream(3, &[tag::REFERENCE]);
        let resamples = 10_000;
        let idx = [0usize, 9, 20];
        let mut sums = [0.0; 3];
        for _ in 0..resamples {
            let ens = sample_from_grid(&nu, 4, &mut r).unwrap();
            let est = Estimator::new(&g, &[0.0], ens.as_flat(), 4, 1).unwrap();
            for (s, &i) in sums.iter_mut().zip(&idx) {
                *s += est.g_nu(&kg.w_domain().coords(i));
            }
        }
        let tol = 4.0 / (resamples as f64).sqrt() * kg.sup_kernel();
        for (s, &i) in sums.iter().zip(&idx) {
            assert!((s / resamples as f64 - exact[i]).abs() < tol, "cell {i}");
        }
    }

    #[test]
    fn drift_normalization_counts_measures() {
        let g = ToyGame::dirac_gan(0.5, 0.0, 0.1).unwrap();
        let pool = [1.0, 2.0, 3.0, 4.0];
        let est = Estimator::new(&g, &pool, &pool, 2, 1).unwrap();
        let mut out = [0.0];
        est.theta_drift(&[0.0], &mut out).unwrap();
        assert_eq!(out[0], 5.0);
        let mut r = rng::stream(0, &[tag::DATA_BATCH]);
        est.w_drift(&[0.0], 2.0, &mut r, &mut out).unwrap();
        assert_eq!(out[0], 2.0 * 0.5 - 5.0);
    }

    #[test]
    fn real_drift_is_linear_in_generation_factor() {
        let g = ToyGame::dirac_gan(0.5, 0.3, 0.1).unwrap();
        let est = Estimator::new(&g, &[0.0], &[0.2, -0.4], 1, 32).unwrap();
        let batch = rng::stream(9, &[tag::DATA_BATCH]);
        for t in [1.0, 3.0, 17.0] {
            let (mut a, mut b) = ([0.0], [0.0]);
            est.real_drift(&[0.7], t, &mut batch.clone(), &mut a).unwrap();
            est.real_drift(&[0.7], 2.0 * t, &mut batch.clone(), &mut b).unwrap();
            assert_eq!(b[0], 2.0 * a[0]);
            // The fake part of the full drift does not scale with the factor.
            let (mut fa, mut fb) = ([0.0], [0.0]);
            est.w_drift(&[0.7], t, &mut batch.clone(), &mut fa).unwrap();
            est.w_drift(&[0.7], 2.0 * t, &mut batch.clone(), &mut fb).unwrap();
            assert!((fb[0] - fa[0] - a[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn ensemble_validation_and_wrap() {
        assert!(ParticleEnsemble::new(1, 1, vec![], None).is_err());
        assert!(ParticleEnsemble::new(1, 1, vec![f64::NAN], None).is_err());
        let e = ParticleEnsemble::new(1, 1, vec![-0.5, 7.0], Some(std::f64::consts::TAU)).unwrap();
        assert!(e.as_flat().iter().all(|x| (0.0..std::f64::consts::TAU).contains(x)));
    }

    #[test]
    fn circular_mean_straddles_origin() {
        let p = std::f64::consts::TAU;
        let e = ParticleEnsemble::new(1, 1, vec![0.1, p - 0.1], Some(p)).unwrap();
        let m = e.mean(Some(p))[0];
        assert!(m < 1e-12 || (p - m) < 1e-12);
    }

    #[test]
    fn dirac_saddle_is_stationary() {
        let d = DiracGan::new(0.5, 0.0, 0.1).unwrap();
        let (w, th) = d.saddle();
        assert!((d.x0 - th - d.confinement * w).abs() < 1e-15);
        assert!((w - d.confinement * th).abs() < 1e-15);
    }
}
