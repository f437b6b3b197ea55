//! Entropic mirror descent and mirror-prox on finite matrix games.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::entropy::SimplexVector;
use crate::error::{check_dim, Error, Result};
use crate::game::{MatrixGame, StochasticOracleConfig};

/// How the step size `η` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSizeRule {
    /// `(2/M)·√(D̄₀/T)`
    MdDeterministic { grad_bound: f64, d0: f64, horizon: usize },
    /// `(2/M')·√(D̄₀/T)`
    MdStochastic { grad_bound: f64, d0: f64, horizon: usize },
    /// `4/L`
    MpDeterministic { lipschitz: f64 },
    /// `min(4/(√3·L), √(2D̄₀/(3Tσ²)))`
    MpStochastic {
        lipschitz: f64,
        d0: f64,
        horizon: usize,
        sigma2: f64,
    },
    Fixed { eta: f64 },
}

impl StepSizeRule {
    pub fn resolve(&self) -> Result<f64> {
        let eta = match *self {
            StepSizeRule::MdDeterministic { grad_bound, d0, horizon }
            | StepSizeRule::MdStochastic { grad_bound, d0, horizon } => {
                2.0 / grad_bound * (d0 / horizon as f64).sqrt()
            }
            StepSizeRule::MpDeterministic { lipschitz } => 4.0 / lipschitz,
            StepSizeRule::MpStochastic {
                lipschitz,
                d0,
                horizon,
                sigma2,
            } => {
                let a = 4.0 / (3f64.sqrt() * lipschitz);
                let b = (2.0 * d0 / (3.0 * horizon as f64 * sigma2)).sqrt();
                a.min(b)
            }
            StepSizeRule::Fixed { eta } => eta,
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::arg(format!(
                "step-size rule {self:?} resolves to {eta}; need a finite positive value"
            )));
        }
        Ok(eta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Oracle {
    Deterministic,
    Stochastic(StochasticOracleConfig),
}

/// Problem constants recorded alongside a trace so bound checks are self-contained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// `M`
    pub grad_bound: f64,
    /// `L`
    pub lipschitz: f64,
    /// `M' = M + noise_bound`, stochastic runs only.
    pub grad_bound_stochastic: Option<f64>,
    /// Per-coordinate noise variance, stochastic runs only.
    pub sigma2: Option<f64>,
    /// `D̄₀ = log m + log n`, the distance surrogate used in the step size.
    pub d0_bar: f64,
    /// `sup_comparators KL(p‖p₁) + KL(q‖q₁) = −log min p₁ − log min q₁`.
    /// Coincides with `d0_bar` for uniform starts.
    pub d0_init: f64,
}

/// Largest KL divergence from any point of the simplex to `z`.
pub fn comparator_radius(z: &[f64]) -> f64 {
    -z.iter().copied().fold(f64::INFINITY, f64::min).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub gap_ergodic: f64,
    pub gap_last: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxTrace {
    pub records: Vec<TraceRecord>,
    pub eta: f64,
    pub constants: BoundConstants,
    pub p_bar: SimplexVector,
    pub q_bar: SimplexVector,
    /// Every averaged iterate `(p_t, q_t)`, when requested.
    pub iterates: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

impl ProxTrace {
    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.gap_ergodic)
    }

    pub fn to_csv(&self) -> String {
        records_to_csv(&self.records)
    }
}

pub const TRACE_CSV_HEADER: &str = "t,gap_ergodic,gap_last,eta";

pub fn records_to_csv(records: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{:?},{:?},{:?}", r.t, r.gap_ergodic, r.gap_last, r.eta);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveOptions {
    /// Record every `stride` iterations; `None` means `⌈T/200⌉`.
    pub stride: Option<usize>,
    pub keep_iterates: bool,
}

/// Recorded iterations: multiples of the stride, powers of ten, ten
/// log-spaced points per decade, and `T` itself.
pub fn record_schedule(horizon: usize, stride: Option<usize>) -> Vec<usize> {
    let stride = stride.unwrap_or_else(|| horizon.div_ceil(200)).max(1);
    let mut ts: Vec<usize> = (1..=horizon / stride).map(|k| k * stride).collect();
    let mut k = 0;
    loop {
        let t = 10f64.powf(k as f64 / 10.0).round() as usize;
        if t > horizon {
            break;
        }
        ts.push(t);
        k += 1;
    }
    ts.push(horizon);
    ts.sort_unstable();
    ts.dedup();
    ts
}

fn check_init(game: &MatrixGame, p: &SimplexVector, q: &SimplexVector) -> Result<()> {
    check_dim("initial p", game.cols(), p.len())?;
    check_dim("initial q", game.rows(), q.len())?;
    if !p.is_interior() || !q.is_interior() {
        return Err(Error::domain("initial strategies must be strictly positive"));
    }
    Ok(())
}

pub fn constants_for(
    game: &MatrixGame,
    oracle: &Oracle,
    p1: &SimplexVector,
    q1: &SimplexVector,
) -> BoundConstants {
    let m = game.gradient_bound();
    let (mp, s2) = match oracle {
        Oracle::Deterministic => (None, None),
        Oracle::Stochastic(cfg) => (Some(m + cfg.noise_bound), Some(cfg.variance())),
    };
    BoundConstants {
        grad_bound: m,
        lipschitz: game.lipschitz(),
        grad_bound_stochastic: mp,
        sigma2: s2,
        d0_bar: (game.rows() as f64).ln() + (game.cols() as f64).ln(),
        d0_init: comparator_radius(p1.as_slice()) + comparator_radius(q1.as_slice()),
    }
}

/// The theoretical step size for MD or MP given the recorded constants.
pub fn theoretical_rule(mirror_prox: bool, c: &BoundConstants, horizon: usize) -> StepSizeRule {
    match (mirror_prox, c.grad_bound_stochastic, c.sigma2) {
        (false, None, _) => StepSizeRule::MdDeterministic {
            grad_bound: c.grad_bound,
            d0: c.d0_bar,
            horizon,
        },
        (false, Some(mp), _) => StepSizeRule::MdStochastic {
            grad_bound: mp,
            d0: c.d0_bar,
            horizon,
        },
        (true, _, None) => StepSizeRule::MpDeterministic {
            lipschitz: c.lipschitz,
        },
        (true, _, Some(sigma2)) => StepSizeRule::MpStochastic {
            lipschitz: c.lipschitz,
            d0: c.d0_bar,
            horizon,
            sigma2,
        },
    }
}

struct Workspace {
    p: Vec<f64>,
    q: Vec<f64>,
    gp: Vec<f64>,
    gq: Vec<f64>,
    p_bar: Vec<f64>,
    q_bar: Vec<f64>,
}

impl Workspace {
    fn new(game: &MatrixGame) -> Self {
        let (m, n) = (game.rows(), game.cols());
        Self {
            p: vec![0.0; n],
            q: vec![0.0; m],
            gp: vec![0.0; n],
            gq: vec![0.0; m],
            p_bar: vec![0.0; n],
            q_bar: vec![0.0; m],
        }
    }

    fn oracle(&mut self, game: &MatrixGame, oracle: &Oracle, call: u64) {
        game.grad_p_into(&self.q, &mut self.gp);
        game.grad_q_into(&self.p, &mut self.gq);
        if let Oracle::Stochastic(cfg) = oracle {
            cfg.perturb(call, &mut self.gp, &mut self.gq);
        }
    }

    fn accumulate(&mut self, t: usize) {
        let w = 1.0 / t as f64;
        for (b, x) in self.p_bar.iter_mut().zip(&self.p) {
            *b += (x - *b) * w;
        }
        for (b, x) in self.q_bar.iter_mut().zip(&self.q) {
            *b += (x - *b) * w;
        }
    }
}

fn finish(
    ws: Workspace,
    records: Vec<TraceRecord>,
    eta: f64,
    constants: BoundConstants,
    iterates: Option<Vec<(Vec<f64>, Vec<f64>)>>,
) -> Result<ProxTrace> {
    Ok(ProxTrace {
        records,
        eta,
        constants,
        p_bar: SimplexVector::normalized(ws.p_bar)?,
        q_bar: SimplexVector::normalized(ws.q_bar)?,
        iterates,
    })
}

fn guard(ws: &Workspace, t: usize) -> Result<()> {
    if ws.gp.iter().chain(&ws.gq).any(|x| !x.is_finite()) {
        return Err(Error::numerical(format!("iteration {t}"), "non-finite gradient"));
    }
    Ok(())
}

/// Simultaneous entropic mirror descent for `T` steps.
pub fn solve_md(
    game: &MatrixGame,
    horizon: usize,
    rule: &StepSizeRule,
    oracle: &Oracle,
    init: (&SimplexVector, &SimplexVector),
    opts: SolveOptions,
) -> Result<ProxTrace> {
    if horizon == 0 {
        return Err(Error::arg("iteration count must be at least 1"));
    }
    let (p1, q1) = init;
    check_init(game, p1, q1)?;
    let eta = rule.resolve()?;
    let constants = constants_for(game, oracle, p1, q1);
    let schedule = record_schedule(horizon, opts.stride);
    let mut next = schedule.iter().peekable();

    let mut lp = p1.to_log_weights()?;
    let mut lq = q1.to_log_weights()?;
    let mut ws = Workspace::new(game);
    let mut records = Vec::with_capacity(schedule.len());
    let mut iterates = opts.keep_iterates.then(|| Vec::with_capacity(horizon));

    for t in 1..=horizon {
        lp.probabilities_into(&mut ws.p);
        lq.probabilities_into(&mut ws.q);
        ws.accumulate(t);
        if let Some(it) = iterates.as_mut() {
            it.push((ws.p.clone(), ws.q.clone()));
        }
        if next.peek() == Some(&&t) {
            next.next();
            records.push(TraceRecord {
                t,
                gap_ergodic: game.gap_raw(&ws.p_bar, &ws.q_bar),
                gap_last: game.gap_raw(&ws.p, &ws.q),
                eta,
            });
        }
        ws.oracle(game, oracle, t as u64);
        guard(&ws, t)?;
        lp.md_step(&ws.gp, eta);
        lq.md_step(&ws.gq, eta);
    }
    finish(ws, records, eta, constants, iterates)
}

/// Entropic mirror-prox: a leader step from the extrapolation point, then an
/// extrapolation update using gradients at the leader. The ergodic average
/// runs over leader points.
pub fn solve_mp(
    game: &MatrixGame,
    horizon: usize,
    rule: &StepSizeRule,
    oracle: &Oracle,
    init: (&SimplexVector, &SimplexVector),
    opts: SolveOptions,
) -> Result<ProxTrace> {
    if horizon == 0 {
        return Err(Error::arg("iteration count must be at least 1"));
    }
    let (p1, q1) = init;
    check_init(game, p1, q1)?;
    let eta = rule.resolve()?;
    let constants = constants_for(game, oracle, p1, q1);
    let schedule = record_schedule(horizon, opts.stride);
    let mut next = schedule.iter().peekable();

    let mut lp_tilde = p1.to_log_weights()?;
    let mut lq_tilde = q1.to_log_weights()?;
    let mut ws = Workspace::new(game);
    let mut records = Vec::with_capacity(schedule.len());
    let mut iterates = opts.keep_iterates.then(|| Vec::with_capacity(horizon));

    for t in 1..=horizon {
        let call = 2 * t as u64;
        lp_tilde.probabilities_into(&mut ws.p);
        lq_tilde.probabilities_into(&mut ws.q);
        ws.oracle(game, oracle, call - 1);
        guard(&ws, t)?;
        let mut lp = lp_tilde.clone();
        let mut lq = lq_tilde.clone();
        lp.md_step(&ws.gp, eta);
        lq.md_step(&ws.gq, eta);

        lp.probabilities_into(&mut ws.p);
        lq.probabilities_into(&mut ws.q);
        ws.accumulate(t);
        if let Some(it) = iterates.as_mut() {
            it.push((ws.p.clone(), ws.q.clone()));
        }
        if next.peek() == Some(&&t) {
            next.next();
            records.push(TraceRecord {
                t,
                gap_ergodic: game.gap_raw(&ws.p_bar, &ws.q_bar),
                gap_last: game.gap_raw(&ws.p, &ws.q),
                eta,
            });
        }
        ws.oracle(game, oracle, call);
        guard(&ws, t)?;
        lp_tilde.md_step(&ws.gp, eta);
        lq_tilde.md_step(&ws.gq, eta);
    }
    finish(ws, records, eta, constants, iterates)
}

/// Convenience: uniform start, step size from the recorded constants.
pub fn solve_default(
    game: &MatrixGame,
    horizon: usize,
    mirror_prox: bool,
    oracle: &Oracle,
) -> Result<ProxTrace> {
    let p = SimplexVector::uniform(game.cols());
    let q = SimplexVector::uniform(game.rows());
    let rule = theoretical_rule(mirror_prox, &constants_for(game, oracle, &p, &q), horizon);
    let solve = if mirror_prox { solve_mp } else { solve_md };
    solve(game, horizon, &rule, oracle, (&p, &q), SolveOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_shape() {
        let s = record_schedule(100_000, None);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(s[0], 1);
        assert_eq!(*s.last().unwrap(), 100_000);
        for p in [1, 10, 100, 1000, 10_000, 100_000] {
            assert!(s.contains(&p));
        }
        assert!(s.contains(&500));
        let in_range = s.iter().filter(|&&t| (100..=100_000).contains(&t)).count();
        assert!(in_range >= 30);
        assert_eq!(record_schedule(1, None), vec![1]);
    }

    #[test]
    fn step_rules() {
        let r = StepSizeRule::MdDeterministic { grad_bound: 2.0, d0: 4.0, horizon: 100 };
        assert!((r.resolve().unwrap() - 0.2).abs() < 1e-15);
        let r = StepSizeRule::MpDeterministic { lipschitz: 2.0 };
        assert_eq!(r.resolve().unwrap(), 2.0);
        let r = StepSizeRule::MpStochastic { lipschitz: 2.0, d0: 1.5, horizon: 100, sigma2: 1.0 };
        assert!((r.resolve().unwrap() - 0.1).abs() < 1e-15);
        assert!(StepSizeRule::MpDeterministic { lipschitz: 0.0 }.resolve().is_err());
        assert!(StepSizeRule::Fixed { eta: -1.0 }.resolve().is_err());
    }

    #[test]
    fn uniform_start_on_pennies_stays_at_equilibrium() {
        let g = MatrixGame::matching_pennies();
        for mp in [false, true] {
            let tr = solve_default(&g, 1000, mp, &Oracle::Deterministic).unwrap();
            assert!(tr.records.iter().all(|r| r.gap_ergodic == 0.0));
        }
    }

    #[test]
    fn single_step_records_init_gap() {
        let g = MatrixGame::matching_pennies();
        let p = SimplexVector::new(vec![0.9, 0.1]).unwrap();
        let tr = solve_md(
            &g,
            1,
            &StepSizeRule::Fixed { eta: 0.5 },
            &Oracle::Deterministic,
            (&p, &p),
            SolveOptions::default(),
        )
        .unwrap();
        assert_eq!(tr.records.len(), 1);
        let expected = g.duality_gap(&p, &p).unwrap();
        assert!((tr.records[0].gap_ergodic - expected).abs() < 1e-14);
        assert!((tr.p_bar[0] - 0.9).abs() < 1e-14);
    }

    #[test]
    fn zero_game_mp_is_stationary() {
        let g = MatrixGame::new(2, 3, vec![0.0; 6], vec![0.0; 2]).unwrap();
        let p = SimplexVector::new(vec![0.2, 0.3, 0.5]).unwrap();
        let q = SimplexVector::new(vec![0.6, 0.4]).unwrap();
        let tr = solve_mp(
            &g,
            50,
            &StepSizeRule::Fixed { eta: 1.0 },
            &Oracle::Deterministic,
            (&p, &q),
            SolveOptions { keep_iterates: true, ..Default::default() },
        )
        .unwrap();
        assert!(tr.records.iter().all(|r| r.gap_ergodic == 0.0));
        for (pi, qi) in tr.iterates.unwrap() {
            assert!(pi.iter().zip(p.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));
            assert!(qi.iter().zip(q.as_slice()).all(|(a, b)| (a - b).abs() < 1e-15));
        }
    }

    #[test]
    fn boundary_init_is_rejected() {
        let g = MatrixGame::matching_pennies();
        let p = SimplexVector::vertex(2, 0);
        let u = SimplexVector::uniform(2);
        let err = solve_md(
            &g,
            10,
            &StepSizeRule::Fixed { eta: 0.1 },
            &Oracle::Deterministic,
            (&p, &u),
            SolveOptions::default(),
        );
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn stochastic_runs_are_reproducible() {
        let g = MatrixGame::random_uniform(4, 4, 3).unwrap();
        let oracle = Oracle::Stochastic(StochasticOracleConfig::new(0.5, 17).unwrap());
        let a = solve_default(&g, 500, true, &oracle).unwrap();
        let b = solve_default(&g, 500, true, &oracle).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn csv_layout() {
        let g = MatrixGame::matching_pennies();
        let csv = solve_default(&g, 20, false, &Oracle::Deterministic).unwrap().to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(TRACE_CSV_HEADER));
        assert_eq!(lines.next().unwrap().split(',').count(), 4);
    }
}
