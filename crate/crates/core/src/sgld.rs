//! Stochastic gradient Langevin dynamics.
//!
//! A step `z' = z − γ∇h(z) + √(2γ)·ε·ξ` targets the Gibbs density
//! `∝ exp(−h/ε²)`. Periodic domains wrap positions after each step;
//! unbounded problems can add a quadratic confinement `λ|z|²/2` to `h`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::grid::wrap;
use crate::rng::{self, tag, StreamRng};

/// Exponential schedules for the inner-loop length, step size and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgldSchedule {
    pub gamma0: f64,
    pub eps0: f64,
    pub k_growth: f64,
    pub gamma_decay: f64,
    pub eps_decay: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValue {
    pub steps: usize,
    pub gamma: f64,
    pub eps: f64,
}

impl SgldSchedule {
    pub const K_GROWTH: f64 = 1.0 + 1e-5;
    pub const GAMMA_DECAY: f64 = 1.0 - 1e-5;
    pub const EPS_DECAY: f64 = 1.0 - 5e-5;

    pub fn new(gamma0: f64, eps0: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::arg(format!("gamma0 must be positive, got {gamma0}")));
        }
        if !(eps0 >= 0.0 && eps0.is_finite()) {
            return Err(Error::arg(format!("eps0 must be nonnegative, got {eps0}")));
        }
        Ok(Self {
            gamma0,
            eps0,
            k_growth: Self::K_GROWTH,
            gamma_decay: Self::GAMMA_DECAY,
            eps_decay: Self::EPS_DECAY,
        })
    }

    /// `(⌊k_growth^t⌋, γ₀·γ_decay^t, ε₀·ε_decay^t)`; `t = 0` is read as `t = 1`.
    pub fn at(&self, t: u64) -> ScheduleValue {
        let t = t.max(1) as f64;
        let pow = |base: f64| (t * base.ln()).exp();
        ScheduleValue {
            steps: (pow(self.k_growth).floor() as usize).max(1),
            gamma: self.gamma0 * pow(self.gamma_decay),
            eps: self.eps0 * pow(self.eps_decay),
        }
    }
}

pub fn schedule_at(schedule: &SgldSchedule, t: u64) -> ScheduleValue {
    schedule.at(t)
}

/// One Langevin chain: its position, step counter and private noise stream.
#[derive(Debug, Clone)]
pub struct LangevinState {
    position: Vec<f64>,
    steps: u64,
    rng: StreamRng,
    period: Option<f64>,
    confinement: f64,
}

impl LangevinState {
    /// Noise is drawn from the stream keyed by `(seed, chain)`.
    pub fn new(position: Vec<f64>, seed: u64, chain: u64) -> Result<Self> {
        if position.is_empty() || position.iter().any(|x| !x.is_finite()) {
            return Err(Error::arg("chain position must be nonempty and finite"));
        }
        Ok(Self {
            position,
            steps: 0,
            rng: rng::stream(seed, &[tag::LANGEVIN, chain]),
            period: None,
            confinement: 0.0,
        })
    }

    /// Wrap coordinates into `[0, period)` after every step.
    pub fn with_period(mut self, period: f64) -> Self {
        for x in &mut self.position {
            *x = wrap(*x, period);
        }
        self.period = Some(period);
        self
    }

    /// Add `λ|z|²/2` to the potential.
    pub fn with_confinement(mut self, lambda: f64) -> Self {
        self.confinement = lambda;
        self
    }

    pub fn position(&self) -> &[f64] {
        &self.position
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn dim(&self) -> usize {
        self.position.len()
    }

    /// Move to `x` without consuming noise (chain restarts).
    pub fn set_position(&mut self, x: &[f64]) {
        self.position.copy_from_slice(x);
        if let Some(p) = self.period {
            self.position.iter_mut().for_each(|v| *v = wrap(*v, p));
        }
    }

    fn drift_gradient(&self, grad: &[f64], d: usize) -> f64 {
        grad[d] + self.confinement * self.position[d]
    }

    fn finish(&mut self) -> Result<()> {
        if let Some(p) = self.period {
            self.position.iter_mut().for_each(|v| *v = wrap(*v, p));
        }
        self.steps += 1;
        if self.position.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical(
                format!("langevin step {}", self.steps),
                format!("position diverged to {:?}", self.position),
            ));
        }
        Ok(())
    }
}

fn check_step(state: &LangevinState, grad: &[f64], gamma: f64, eps: f64) -> Result<()> {
    check_dim("langevin gradient", state.dim(), grad.len())?;
    if !(gamma > 0.0 && gamma.is_finite()) || !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::arg(format!("need gamma > 0 and eps >= 0, got {gamma}, {eps}")));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::numerical(
            format!("langevin step {} at {:?}", state.steps + 1, state.position),
            "non-finite gradient",
        ));
    }
    Ok(())
}

/// `z ← z − γ·∇h + √(2γ)·ε·ξ`, with `∇h` supplied by the caller.
pub fn sgld_step(state: &mut LangevinState, grad: &[f64], gamma: f64, eps: f64) -> Result<()> {
    check_step(state, grad, gamma, eps)?;
    let scale = (2.0 * gamma).sqrt() * eps;
    for d in 0..state.dim() {
        let g = state.drift_gradient(grad, d);
        let xi: f64 = state.rng.sample(StandardNormal);
        state.position[d] += -gamma * g + scale * xi;
    }
    state.finish()
}

/// Diagonal RMSProp preconditioner state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmsPreconditioner {
    pub decay: f64,
    pub floor: f64,
    mean_square: Vec<f64>,
}

impl RmsPreconditioner {
    pub const DECAY: f64 = 0.99;
    pub const FLOOR: f64 = 1e-8;

    pub fn new(dim: usize) -> Self {
        Self::with_constants(dim, Self::DECAY, Self::FLOOR)
    }

    pub fn with_constants(dim: usize, decay: f64, floor: f64) -> Self {
        Self {
            decay,
            floor,
            mean_square: vec![0.0; dim],
        }
    }

    pub fn mean_square(&self) -> &[f64] {
        &self.mean_square
    }

    /// Fold `g²` into the running mean and return `1/(√v + floor)` for coordinate `d`.
    fn update(&mut self, d: usize, g: f64) -> f64 {
        let v = &mut self.mean_square[d];
        *v = self.decay * *v + (1.0 - self.decay) * g * g;
        1.0 / (v.sqrt() + self.floor)
    }
}

/// `z ← z − γ·P·∇h + √(2γ)·ε·√P·ξ` with `P` from the updated accumulator.
/// With a zero gradient `P = 1/floor`, so the step degenerates to a very
/// large isotropic diffusion; callers should not start chains at stationary
/// points with zero noise history.
pub fn preconditioned_sgld_step(
    state: &mut LangevinState,
    grad: &[f64],
    gamma: f64,
    eps: f64,
    acc: &mut RmsPreconditioner,
) -> Result<()> {
    check_step(state, grad, gamma, eps)?;
    check_dim("preconditioner", state.dim(), acc.mean_square.len())?;
    for d in 0..state.dim() {
        let g = state.drift_gradient(grad, d);
        let p = acc.update(d, g);
        let xi: f64 = state.rng.sample(StandardNormal);
        state.position[d] += -gamma * p * g + (2.0 * gamma * p).sqrt() * eps * xi;
    }
    state.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_examples() {
        let s = SgldSchedule::new(1e-2, 1e-2).unwrap();
        let v = s.at(1);
        assert_eq!(v.steps, 1);
        assert!((v.gamma - 1e-2 * (1.0 - 1e-5)).abs() < 1e-18);
        assert!((v.eps - 1e-2 * (1.0 - 5e-5)).abs() < 1e-18);
        assert_eq!(s.at(100_000).steps, 2);
        assert_eq!(s.at(0), s.at(1));
    }

    #[test]
    fn schedule_monotone() {
        let s = SgldSchedule::new(0.1, 1.0).unwrap();
        let mut prev = s.at(1);
        for t in (1000..300_000).step_by(1000) {
            let v = s.at(t);
            assert!(v.steps >= prev.steps);
            assert!(v.gamma < prev.gamma && v.eps < prev.eps);
            prev = v;
        }
    }

    #[test]
    fn zero_noise_is_gradient_descent() {
        let mut st = LangevinState::new(vec![2.0], 1, 0).unwrap();
        let z0 = st.position()[0];
        sgld_step(&mut st, &[z0], 0.1, 0.0).unwrap();
        assert!((st.position()[0] - 0.9 * z0).abs() < 1e-15);
    }

    #[test]
    fn brownian_increments_have_variance_two_gamma() {
        let gamma = 1e-2;
        let mut st = LangevinState::new(vec![0.0], 5, 0).unwrap();
        let n = 200_000;
        let mut prev = 0.0;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            sgld_step(&mut st, &[0.0], gamma, 1.0).unwrap();
            let dx = st.position()[0] - prev;
            prev = st.position()[0];
            s += dx;
            s2 += dx * dx;
        }
        let var = s2 / n as f64 - (s / n as f64).powi(2);
        // Sample variance of 2e5 Gaussians: relative sd ≈ √(2/n) ≈ 0.3%.
        assert!((var / (2.0 * gamma) - 1.0).abs() < 0.015, "{var}");
    }

    #[test]
    fn periodic_wrap() {
        let mut st = LangevinState::new(vec![6.2], 1, 0).unwrap().with_period(std::f64::consts::TAU);
        sgld_step(&mut st, &[-1.0], 0.5, 0.0).unwrap();
        assert!((st.position()[0] - (6.7 - std::f64::consts::TAU)).abs() < 1e-12);
    }

    #[test]
    fn confinement_adds_restoring_drift() {
        let mut st = LangevinState::new(vec![1.0], 1, 0).unwrap().with_confinement(0.5);
        sgld_step(&mut st, &[0.0], 0.1, 0.0).unwrap();
        assert!((st.position()[0] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_reported() {
        let mut st = LangevinState::new(vec![0.3], 1, 0).unwrap();
        let err = sgld_step(&mut st, &[f64::NAN], 0.1, 1.0).unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
        assert!(err.to_string().contains("0.3"));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let run = || {
            let mut st = LangevinState::new(vec![0.5, -0.5], 77, 3).unwrap();
            for _ in 0..100 {
                let g = st.position().to_vec();
                sgld_step(&mut st, &g, 1e-2, 1.0).unwrap();
            }
            st.position().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn preconditioner_equalizes_drift() {
        let mut st = LangevinState::new(vec![0.0, 0.0], 1, 0).unwrap();
        let mut acc = RmsPreconditioner::new(2);
        let g = [0.01, 10.0];
        for _ in 0..2000 {
            preconditioned_sgld_step(&mut st, &g, 1e-3, 0.0, &mut acc).unwrap();
        }
        let before = st.position().to_vec();
        preconditioned_sgld_step(&mut st, &g, 1e-3, 0.0, &mut acc).unwrap();
        let d0 = (st.position()[0] - before[0]).abs();
        let d1 = (st.position()[1] - before[1]).abs();
        assert!((d0 / d1 - 1.0).abs() < 1e-4, "{d0} {d1}");
        assert!((acc.mean_square()[1].sqrt() - 10.0).abs() < 1e-3);
    }
}
