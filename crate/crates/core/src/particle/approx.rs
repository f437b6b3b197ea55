use rand::Rng;
use serde::Serialize;

use super::{at_step, Chain, Estimator, MemoryStats, ParamTrace, ParticleConfig, ParticleEnsemble, SamplerKind, ToyGame};
use crate::error::{Error, Result};
use crate::grid::{gap_from_masses, histogram};
use crate::rng::{self, tag, StreamRng};
use crate::sgld::RmsPreconditioner;

/// Sample history of a history-keeping particle run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxRun {
    /// `W[1..T]`: the output generations (leaders for mirror-prox).
    pub w: Vec<ParticleEnsemble>,
    pub theta: Vec<ParticleEnsemble>,
    /// `W̃[1..T+1]` for mirror-prox; empty for mirror descent.
    pub w_tilde: Vec<ParticleEnsemble>,
    pub theta_tilde: Vec<ParticleEnsemble>,
    /// 1-based generation returned as the run's answer.
    pub idx: usize,
    pub memory: MemoryStats,
}

impl ApproxRun {
    pub fn output(&self) -> (&ParticleEnsemble, &ParticleEnsemble) {
        (&self.w[self.idx - 1], &self.theta[self.idx - 1])
    }

    /// All output generations concatenated: the generation average.
    pub fn pooled(&self) -> (Vec<f64>, Vec<f64>) {
        let cat = |v: &[ParticleEnsemble]| v.iter().flat_map(|e| e.as_flat().iter().copied()).collect();
        (cat(&self.w), cat(&self.theta))
    }
}

const ROLE_W: u64 = 0;
const ROLE_THETA: u64 = 1;
const ROLE_W_TILDE: u64 = 2;
const ROLE_THETA_TILDE: u64 = 3;

fn chain_id(t: usize, role: u64) -> u64 {
    ((t as u64) << 2) | role
}

struct Streams {
    data: StreamRng,
    index: StreamRng,
}

struct Preconds {
    w: Option<RmsPreconditioner>,
    theta: Option<RmsPreconditioner>,
}

impl Preconds {
    fn new(kind: SamplerKind, dim: usize) -> Self {
        let make = || (kind == SamplerKind::Preconditioned).then(|| RmsPreconditioner::new(dim));
        Self {
            w: make(),
            theta: make(),
        }
    }
}

/// One sampling block: `K_t` burn-in then `n'` harvested steps of two
/// independent chains, started at uniform picks from `starts`.
#[allow(clippy::too_many_arguments)]
fn sample_block(
    game: &ToyGame,
    cfg: &ParticleConfig,
    t: usize,
    w_pool: &[f64],
    theta_pool: &[f64],
    starts: (&ParticleEnsemble, &ParticleEnsemble),
    roles: (u64, u64),
    streams: &mut Streams,
    pre: &mut Preconds,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = game.dim();
    let sched = cfg.schedule.at(t as u64);
    let est = Estimator::new(game, w_pool, theta_pool, cfg.per_measure, cfg.batch)?;
    let w0 = starts.0.get(streams.index.random_range(0..starts.0.len())).to_vec();
    let th0 = starts.1.get(streams.index.random_range(0..starts.1.len())).to_vec();
    let mut wc = Chain::start(game, &w0, cfg.seed, chain_id(t, roles.0), pre.w.as_mut())?;
    let mut tc = Chain::start(game, &th0, cfg.seed, chain_id(t, roles.1), pre.theta.as_mut())?;
    let mut w_out = Vec::with_capacity(cfg.per_measure * d);
    let mut th_out = Vec::with_capacity(cfg.per_measure * d);
    let mut drift = [0.0; 2];
    let factor = t as f64;
    for k in 1..=sched.steps + cfg.per_measure {
        est.theta_drift(tc.position(), &mut drift)?;
        tc.ascend(&drift[..d], sched.gamma, sched.eps).map_err(|e| at_step(e, t, k))?;
        est.w_drift(wc.position(), factor, &mut streams.data, &mut drift)?;
        wc.ascend(&drift[..d], sched.gamma, sched.eps).map_err(|e| at_step(e, t, k))?;
        if k > sched.steps {
            w_out.extend_from_slice(wc.position());
            th_out.extend_from_slice(tc.position());
        }
    }
    Ok((w_out, th_out))
}

fn setup(game: &ToyGame, cfg: &ParticleConfig) -> Result<(ParticleEnsemble, ParticleEnsemble, Streams)> {
    cfg.validate()?;
    let mut init = rng::stream(cfg.seed, &[tag::INIT]);
    let d = game.dim();
    let w = ParticleEnsemble::new(d, 1, cfg.init.draw(game, cfg.per_measure, true, &mut init)?, game.period())?;
    let th = ParticleEnsemble::new(d, 1, cfg.init.draw(game, cfg.per_measure, false, &mut init)?, game.period())?;
    let streams = Streams {
        data: rng::stream(cfg.seed, &[tag::DATA_BATCH]),
        index: rng::stream(cfg.seed, &[tag::INDEX]),
    };
    Ok((w, th, streams))
}

fn pick_output(cfg: &ParticleConfig, streams: &mut Streams) -> usize {
    streams.index.random_range(1..=cfg.horizon)
}

/// Particle mirror descent. Block `t = 1..T−1` samples `W[t+1]`, `Θ[t+1]`
/// against the unions `W[1..t]`, `Θ[1..t]`, with the real-data drift scaled
/// by `t`; `T = 1` performs no block and returns the initial ensembles.
pub fn approx_inf_md(game: &ToyGame, cfg: &ParticleConfig) -> Result<ApproxRun> {
    let (w1, th1, mut streams) = setup(game, cfg)?;
    let d = game.dim();
    let mut pre = Preconds::new(cfg.sampler, d);
    let mut pool_w = w1.as_flat().to_vec();
    let mut pool_th = th1.as_flat().to_vec();
    let mut w = vec![w1];
    let mut theta = vec![th1];
    for t in 1..cfg.horizon {
        let (nw, nt) = sample_block(
            game,
            cfg,
            t,
            &pool_w,
            &pool_th,
            (&w[t - 1], &theta[t - 1]),
            (ROLE_W, ROLE_THETA),
            &mut streams,
            &mut pre,
        )?;
        pool_w.extend_from_slice(&nw);
        pool_th.extend_from_slice(&nt);
        w.push(ParticleEnsemble::new(d, t + 1, nw, game.period())?);
        theta.push(ParticleEnsemble::new(d, t + 1, nt, game.period())?);
    }
    let idx = pick_output(cfg, &mut streams);
    let memory = MemoryStats {
        stored_points: (pool_w.len() + pool_th.len()) / d,
    };
    Ok(ApproxRun {
        w,
        theta,
        w_tilde: Vec::new(),
        theta_tilde: Vec::new(),
        idx,
        memory,
    })
}

/// Particle mirror-prox. For `t = 1..T` a leader block samples `W[t]`
/// against `W̃[t] ∪ W[1..t−1]`, then an extrapolation block samples
/// `W̃[t+1]` against `W[1..t]`; both start from `W̃[t]`.
pub fn approx_inf_mp(game: &ToyGame, cfg: &ParticleConfig) -> Result<ApproxRun> {
    let (w1, th1, mut streams) = setup(game, cfg)?;
    let d = game.dim();
    let mut pre = Preconds::new(cfg.sampler, d);
    let mut lead_w: Vec<f64> = Vec::new();
    let mut lead_th: Vec<f64> = Vec::new();
    let mut w = Vec::with_capacity(cfg.horizon);
    let mut theta = Vec::with_capacity(cfg.horizon);
    let mut w_tilde = vec![w1];
    let mut theta_tilde = vec![th1];
    for t in 1..=cfg.horizon {
        let cur_w: Vec<f64> = lead_w.iter().chain(w_tilde[t - 1].as_flat()).copied().collect();
        let cur_th: Vec<f64> = lead_th.iter().chain(theta_tilde[t - 1].as_flat()).copied().collect();
        let starts = (&w_tilde[t - 1], &theta_tilde[t - 1]);
        let (nw, nt) = sample_block(game, cfg, t, &cur_w, &cur_th, starts, (ROLE_W, ROLE_THETA), &mut streams, &mut pre)?;
        lead_w.extend_from_slice(&nw);
        lead_th.extend_from_slice(&nt);
        w.push(ParticleEnsemble::new(d, t, nw, game.period())?);
        theta.push(ParticleEnsemble::new(d, t, nt, game.period())?);

        let starts = (&w_tilde[t - 1], &theta_tilde[t - 1]);
        let roles = (ROLE_W_TILDE, ROLE_THETA_TILDE);
        let (xw, xt) = sample_block(game, cfg, t, &lead_w, &lead_th, starts, roles, &mut streams, &mut pre)?;
        w_tilde.push(ParticleEnsemble::new(d, t + 1, xw, game.period())?);
        theta_tilde.push(ParticleEnsemble::new(d, t + 1, xt, game.period())?);
    }
    let idx = pick_output(cfg, &mut streams);
    let tilde_points: usize = w_tilde.iter().chain(&theta_tilde).map(|e| e.len()).sum();
    let memory = MemoryStats {
        stored_points: (lead_w.len() + lead_th.len()) / d + tilde_points,
    };
    Ok(ApproxRun {
        w,
        theta,
        w_tilde,
        theta_tilde,
        idx,
        memory,
    })
}

/// Per-generation ensemble means plus a diagnostic: on kernel games the grid
/// duality gap of the histograms of generations `1..t` (binned at the game's
/// grid resolution), on the Dirac-GAN the distance of the means to the saddle.
pub fn ensemble_trace(game: &ToyGame, run: &ApproxRun) -> Result<ParamTrace> {
    let period = game.period();
    let mut trace = ParamTrace::new(game.dim());
    let mut pool_w = Vec::new();
    let mut pool_th = Vec::new();
    for (t, (w, th)) in run.w.iter().zip(&run.theta).enumerate() {
        pool_w.extend_from_slice(w.as_flat());
        pool_th.extend_from_slice(th.as_flat());
        let wm = w.mean(period);
        let tm = th.mean(period);
        let diag = match game {
            ToyGame::KernelTorus(g) => {
                let hw = histogram(g.w_domain(), g.w_domain().points_per_dim(), &pool_w)?;
                let ht = histogram(g.theta_domain(), g.theta_domain().points_per_dim(), &pool_th)?;
                gap_from_masses(g, &hw, &ht)?
            }
            ToyGame::DiracGan(dg) => {
                let (ws, ts) = dg.saddle();
                (wm[0] - ws).hypot(tm[0] - ts)
            }
        };
        if !diag.is_finite() {
            return Err(Error::numerical(format!("generation {}", t + 1), "diagnostic is not finite"));
        }
        trace.push(t + 1, &wm, &tm, diag);
    }
    Ok(trace)
}
