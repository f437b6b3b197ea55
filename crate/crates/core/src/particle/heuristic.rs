use std::fmt::Write as _;

use serde::Serialize;

use super::{at_step, Chain, Estimator, MemoryStats, ParticleConfig, SamplerKind, ToyGame};
use crate::error::{Error, Result};
use crate::rng::{self, tag, StreamRng};
use crate::sgld::RmsPreconditioner;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub w: Vec<f64>,
    pub theta: Vec<f64>,
    pub diagnostic: f64,
}

/// Per-step parameters (or ensemble means) of a particle run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamTrace {
    pub dim: usize,
    pub rows: Vec<TraceRow>,
    pub memory: MemoryStats,
}

impl ParamTrace {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            memory: MemoryStats::default(),
        }
    }

    pub fn push(&mut self, t: usize, w: &[f64], theta: &[f64], diagnostic: f64) {
        self.rows.push(TraceRow {
            t,
            w: w.to_vec(),
            theta: theta.to_vec(),
            diagnostic,
        });
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn csv_header(&self) -> String {
        let mut cols = vec!["t".to_string()];
        cols.extend((0..self.dim).map(|d| format!("w{d}")));
        cols.extend((0..self.dim).map(|d| format!("theta{d}")));
        cols.push("diagnostic".into());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header();
        out.push('\n');
        for r in &self.rows {
            let mut fields = vec![r.t.to_string()];
            fields.extend(r.w.iter().chain(&r.theta).map(|v| format!("{v:?}")));
            fields.push(format!("{:?}", r.diagnostic));
            writeln!(out, "{}", fields.join(",")).expect("writing to a String cannot fail");
        }
        out
    }
}

/// `bar ← (1−β)·bar + β·x`.
pub fn ema_update(bar: &mut [f64], x: &[f64], beta: f64) {
    for (b, v) in bar.iter_mut().zip(x) {
        *b = (1.0 - beta) * *b + beta * v;
    }
}

fn diagnostic(game: &ToyGame, w: &[f64], theta: &[f64]) -> f64 {
    match game {
        // Exploitability of the pure pair over the game's grid.
        ToyGame::KernelTorus(g) => {
            let best_w = (0..g.w_domain().len())
                .map(|i| {
                    let x = g.w_domain().coords(i);
                    g.offset_at(&x) - g.kernel_at(&x, theta)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let best_theta = (0..g.theta_domain().len())
                .map(|j| g.kernel_at(w, &g.theta_domain().coords(j)))
                .fold(f64::NEG_INFINITY, f64::max);
            best_w + best_theta - g.offset_at(w)
        }
        ToyGame::DiracGan(d) => {
            let (ws, ts) = d.saddle();
            (w[0] - ws).hypot(theta[0] - ts)
        }
    }
}

struct Players {
    w: Option<RmsPreconditioner>,
    theta: Option<RmsPreconditioner>,
    data: StreamRng,
}

fn setup(game: &ToyGame, cfg: &ParticleConfig) -> Result<(Vec<f64>, Vec<f64>, Players)> {
    cfg.validate()?;
    let mut init = rng::stream(cfg.seed, &[tag::INIT]);
    let w = cfg.init.draw(game, 1, true, &mut init)?;
    let theta = cfg.init.draw(game, 1, false, &mut init)?;
    let make = || (cfg.sampler == SamplerKind::Preconditioned).then(|| RmsPreconditioner::new(game.dim()));
    let players = Players {
        w: make(),
        theta: make(),
        data: rng::stream(cfg.seed, &[tag::DATA_BATCH]),
    };
    Ok((w, theta, players))
}

/// One inner block of `K_t` steps from `start` against the opponent summary
/// `(w_ref, θ_ref)`; returns the damped chain averages `(w̄, θ̄)`.
#[allow(clippy::too_many_arguments)]
fn inner_block(
    game: &ToyGame,
    cfg: &ParticleConfig,
    t: usize,
    chain: u64,
    start: (&[f64], &[f64]),
    reference: (&[f64], &[f64]),
    players: &mut Players,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = game.dim();
    let sched = cfg.schedule.at(t as u64);
    // Single parameters: pools of one point, each counted as a whole measure.
    let est = Estimator::new(game, reference.0, reference.1, 1, cfg.batch)?;
    let mut wc = Chain::start(game, start.0, cfg.seed, chain << 1, players.w.as_mut())?;
    let mut tc = Chain::start(game, start.1, cfg.seed, (chain << 1) | 1, players.theta.as_mut())?;
    let mut w_bar = start.0.to_vec();
    let mut th_bar = start.1.to_vec();
    let mut drift = [0.0; 2];
    for k in 1..=sched.steps {
        est.theta_drift(tc.position(), &mut drift)?;
        tc.ascend(&drift[..d], sched.gamma, sched.eps).map_err(|e| at_step(e, t, k))?;
        est.w_drift(wc.position(), 1.0, &mut players.data, &mut drift)?;
        wc.ascend(&drift[..d], sched.gamma, sched.eps).map_err(|e| at_step(e, t, k))?;
        ema_update(&mut w_bar, wc.position(), cfg.beta);
        ema_update(&mut th_bar, tc.position(), cfg.beta);
    }
    Ok((w_bar, th_bar))
}

fn check_finite(t: usize, w: &[f64], theta: &[f64]) -> Result<()> {
    if w.iter().chain(theta).all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::numerical(format!("outer step {t}"), "parameters diverged"))
    }
}

fn wrap_params(game: &ToyGame, x: &mut [f64]) {
    if let Some(p) = game.period() {
        x.iter_mut().for_each(|v| *v = crate::grid::wrap(*v, p));
    }
}

/// Mirror descent with each measure summarized by one damped parameter.
/// Outer steps `t = 1..T−1` move `(w_t, θ_t)` to `(w_{t+1}, θ_{t+1})`; the
/// trace holds `t = 1..T` and its last row is the returned pair.
pub fn mirror_gan(game: &ToyGame, cfg: &ParticleConfig) -> Result<ParamTrace> {
    let (mut w, mut theta, mut players) = setup(game, cfg)?;
    let mut trace = ParamTrace::new(game.dim());
    trace.push(1, &w, &theta, diagnostic(game, &w, &theta));
    for t in 1..cfg.horizon {
        let (w_bar, th_bar) = inner_block(game, cfg, t, t as u64, (&w, &theta), (&w, &theta), &mut players)?;
        ema_update(&mut w, &w_bar, cfg.beta);
        ema_update(&mut theta, &th_bar, cfg.beta);
        wrap_params(game, &mut w);
        wrap_params(game, &mut theta);
        check_finite(t, &w, &theta)?;
        trace.push(t + 1, &w, &theta, diagnostic(game, &w, &theta));
    }
    // w, θ, their two averages and the two chain states.
    trace.memory.stored_points = 6;
    Ok(trace)
}

/// Mirror-prox with damped parameter summaries. Each outer step runs a
/// leader block from `(w̃_t, θ̃_t)` against `(w̃_t, θ̃_t)` giving
/// `w_t = (1−β)w_{t−1} + β·w̄_t`, then an extrapolation block from the same
/// start against `(w_t, θ_t)` giving `w̃_{t+1} = (1−β)w̃_t + β·w̄_{t+1}`;
/// `w_0 = w̃_1`. The trace holds the leaders `t = 1..T`.
pub fn mirror_prox_gan(game: &ToyGame, cfg: &ParticleConfig) -> Result<ParamTrace> {
    let (mut w_tilde, mut th_tilde, mut players) = setup(game, cfg)?;
    let mut w = w_tilde.clone();
    let mut theta = th_tilde.clone();
    let mut trace = ParamTrace::new(game.dim());
    for t in 1..=cfg.horizon {
        let id = 2 * t as u64;
        let (w_bar, th_bar) = inner_block(game, cfg, t, id, (&w_tilde, &th_tilde), (&w_tilde, &th_tilde), &mut players)?;
        ema_update(&mut w, &w_bar, cfg.beta);
        ema_update(&mut theta, &th_bar, cfg.beta);
        wrap_params(game, &mut w);
        wrap_params(game, &mut theta);

        let (w_bar, th_bar) = inner_block(game, cfg, t, id + 1, (&w_tilde, &th_tilde), (&w, &theta), &mut players)?;
        ema_update(&mut w_tilde, &w_bar, cfg.beta);
        ema_update(&mut th_tilde, &th_bar, cfg.beta);
        wrap_params(game, &mut w_tilde);
        wrap_params(game, &mut th_tilde);
        check_finite(t, &w, &theta)?;
        check_finite(t, &w_tilde, &th_tilde)?;
        trace.push(t, &w, &theta, diagnostic(game, &w, &theta));
    }
    // Leader and tilde pairs, two averages and two chain states.
    trace.memory.stored_points = 8;
    Ok(trace)
}
