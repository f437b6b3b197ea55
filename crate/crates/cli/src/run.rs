//! Executes a resolved configuration and writes its artifacts.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use mixnash::grid::{foundations_suite, solve_inf_md, solve_inf_mp};
use mixnash::harness::{average_records, check_bounds, fit_rate, sgld_gaussian_check, RateReport};
use mixnash::particle::{ensemble_trace, ParamTrace, ParticleInit};
use mixnash::prox::{constants_for, records_to_csv, theoretical_rule};
use mixnash::{
    approx_inf_md, approx_inf_mp, mirror_gan, mirror_prox_gan, solve_md, solve_mp, BoundConstants, BoundKind,
    GridDensity, GridDomain, Kernel, KernelGame, MatrixGame, Offset, Oracle, ParticleConfig, Radius,
    SimplexVector, SolveOptions, StepSizeRule, ToyGame, TraceRecord,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ConfigError, ExperimentConfig, GameSpec, InitSpec, RadiusKind, SolverKind, StepKind};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Numerical(String),
    Io(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<mixnash::Error> for RunError {
    fn from(e: mixnash::Error) -> Self {
        match e {
            mixnash::Error::Numerical { .. } => RunError::Numerical(e.to_string()),
            other => RunError::Config(ConfigError::general(other.to_string())),
        }
    }
}

fn in_key(key: &'static str) -> impl Fn(mixnash::Error) -> RunError {
    move |e| match e {
        mixnash::Error::Numerical { .. } => RunError::Numerical(e.to_string()),
        other => RunError::Config(ConfigError::key(key, other.to_string())),
    }
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> RunError + '_ {
    move |e| RunError::Io(format!("{}: {e}", path.display()))
}

/// Whether a run's checks held; the details live in `summary.json`.
#[derive(Debug)]
pub struct Outcome {
    pub pass: bool,
}

/// Output of one seed. Its files were already written by the worker that ran it.
struct SeedRun {
    seed: u64,
    detail: Value,
    records: Option<Vec<TraceRecord>>,
    constants: Option<BoundConstants>,
    pass: bool,
}

pub fn execute(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome, RunError> {
    fs::create_dir_all(out).map_err(io(out))?;
    let runs = fan_out(cfg, out)?;
    let pass_all = runs.iter().all(|r| r.pass);

    let mut aggregate = Value::Null;
    let mut pass = pass_all;
    if cfg.solver.has_rate() && runs.len() > 1 {
        let traces: Vec<Vec<TraceRecord>> = runs.iter().filter_map(|r| r.records.clone()).collect();
        let mean = average_records(&traces)?;
        let path = out.join("trace_mean.csv");
        fs::write(&path, records_to_csv(&mean)).map_err(io(&path))?;
        let c = runs[0].constants.expect("rate runs record constants");
        let report = report(cfg, &mean, &c)?;
        // Stochastic bounds hold in expectation, so the seed mean decides.
        pass = report.bound.all_satisfied;
        aggregate = json!({ "trace": "trace_mean.csv", "report": report });
    }

    let summary = json!({
        "config": cfg,
        "runs": runs.iter().map(|r| {
            let mut d = r.detail.clone();
            d["seed"] = json!(r.seed);
            d
        }).collect::<Vec<_>>(),
        "aggregate": aggregate,
        "pass": pass,
    });
    let path = out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&path, text + "\n").map_err(io(&path))?;
    Ok(Outcome { pass })
}

/// Run every seed, `cfg.threads` at a time, and return results in seed order.
fn fan_out(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<SeedRun>, RunError> {
    let workers = cfg.threads.min(cfg.seeds.len()).max(1);
    let mut slots: Vec<Option<Result<SeedRun, RunError>>> = (0..cfg.seeds.len()).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                s.spawn(move || {
                    (w..cfg.seeds.len())
                        .step_by(workers)
                        .map(|i| (i, run_seed(cfg, cfg.seeds[i], out)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("worker panicked") {
                slots[i] = Some(r);
            }
        }
    });
    slots.into_iter().map(|r| r.expect("every seed ran")).collect()
}

fn run_seed(cfg: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedRun, RunError> {
    let trace_file = format!("trace_seed{seed}.csv");
    let write = |name: &str, text: String| {
        let path = out.join(name);
        fs::write(&path, text).map_err(io(&path))
    };
    let opts = SolveOptions {
        stride: cfg.trace_stride,
        keep_iterates: false,
    };
    match cfg.solver {
        SolverKind::Md | SolverKind::Mp => {
            let game = matrix_game(&cfg.game)?;
            let (p, q) = finite_init(cfg, &game)?;
            let oracle = if cfg.noise_bound > 0.0 {
                Oracle::Stochastic(mixnash::StochasticOracleConfig::new(cfg.noise_bound, seed).map_err(in_key("oracle.noise_bound"))?)
            } else {
                Oracle::Deterministic
            };
            let c = constants_for(&game, &oracle, &p, &q);
            let rule = step_rule(cfg, &c);
            let solve = if cfg.solver.mirror_prox() { solve_mp } else { solve_md };
            let trace = solve(&game, cfg.horizon, &rule, &oracle, (&p, &q), opts)?;
            write(&trace_file, trace.to_csv())?;
            rate_run(cfg, seed, trace_file, trace.records, trace.constants)
        }
        SolverKind::InfMd | SolverKind::InfMp => {
            let game = kernel_game(&cfg.game)?;
            let (mu, nu) = grid_init(cfg, &game)?;
            let c = mixnash::grid::grid_constants(&game, &mu, &nu);
            let rule = step_rule(cfg, &c);
            let solve = if cfg.solver.mirror_prox() { solve_inf_mp } else { solve_inf_md };
            let trace = solve(&game, cfg.horizon, &rule, &mu, &nu, opts)?;
            write(&trace_file, records_to_csv(&trace.records))?;
            write(&format!("density_seed{seed}.csv"), density_csv(&trace.mu_bar, &trace.nu_bar))?;
            rate_run(cfg, seed, trace_file, trace.records, trace.constants)
        }
        SolverKind::ApproxMd | SolverKind::ApproxMp => {
            let game = toy_game(&cfg.game)?;
            let pc = particle_config(cfg, &game, seed)?;
            let run = if cfg.solver.mirror_prox() {
                approx_inf_mp(&game, &pc)?
            } else {
                approx_inf_md(&game, &pc)?
            };
            let trace = ensemble_trace(&game, &run)?;
            write(&trace_file, trace.to_csv())?;
            let (w, theta) = run.output();
            write(&format!("w_seed{seed}.csv"), w.to_csv())?;
            write(&format!("theta_seed{seed}.csv"), theta.to_csv())?;
            Ok(param_run(seed, trace_file, &trace, json!({ "output_generation": run.idx, "memory": run.memory })))
        }
        SolverKind::MirrorGan | SolverKind::MirrorProxGan => {
            let game = toy_game(&cfg.game)?;
            let pc = particle_config(cfg, &game, seed)?;
            let trace = if cfg.solver.mirror_prox() {
                mirror_prox_gan(&game, &pc)?
            } else {
                mirror_gan(&game, &pc)?
            };
            write(&trace_file, trace.to_csv())?;
            let mut extra = json!({ "memory": trace.memory });
            if let ToyGame::DiracGan(d) = &game {
                let (w, theta) = d.saddle();
                extra["saddle"] = json!({ "w": w, "theta": theta });
            }
            Ok(param_run(seed, trace_file, &trace, extra))
        }
        SolverKind::Foundations => {
            let domain = GridDomain::torus(cfg.foundations.points).map_err(in_key("foundations.points"))?;
            let report = foundations_suite(&domain, cfg.foundations.trials, seed)?;
            let pass = report.all_pass();
            Ok(SeedRun {
                seed,
                detail: json!({ "report": report, "failing": report.failing(), "pass": pass }),
                records: None,
                constants: None,
                pass,
            })
        }
        SolverKind::SgldCheck => {
            let mut sc = cfg.sgld;
            sc.seed = seed;
            let report = sgld_gaussian_check(&sc)?;
            Ok(SeedRun {
                seed,
                detail: json!({ "report": report, "pass": report.pass() }),
                records: None,
                constants: None,
                pass: report.pass(),
            })
        }
    }
}

fn rate_run(
    cfg: &ExperimentConfig,
    seed: u64,
    trace_file: String,
    records: Vec<TraceRecord>,
    c: BoundConstants,
) -> Result<SeedRun, RunError> {
    let report = report(cfg, &records, &c)?;
    let pass = report.bound.all_satisfied;
    Ok(SeedRun {
        seed,
        detail: json!({ "trace": trace_file, "report": report }),
        records: Some(records),
        constants: Some(c),
        pass,
    })
}

#[derive(Serialize)]
struct ParamSummary<'a> {
    trace: String,
    rows: usize,
    last: Option<&'a mixnash::particle::TraceRow>,
}

fn param_run(seed: u64, trace: String, t: &ParamTrace, extra: Value) -> SeedRun {
    let mut detail = serde_json::to_value(ParamSummary {
        trace,
        rows: t.rows.len(),
        last: t.last(),
    })
    .expect("summary serializes");
    if let (Value::Object(d), Value::Object(e)) = (&mut detail, extra) {
        d.extend(e);
    }
    SeedRun {
        seed,
        detail,
        records: None,
        constants: None,
        pass: true,
    }
}

fn report(cfg: &ExperimentConfig, records: &[TraceRecord], c: &BoundConstants) -> Result<RateReport, RunError> {
    let kind = BoundKind::new(cfg.solver.mirror_prox(), cfg.noise_bound > 0.0);
    let radius = match cfg.rates.radius {
        RadiusKind::Surrogate => Radius::Surrogate,
        RadiusKind::Comparator => Radius::Comparator,
    };
    let range = match (cfg.rates.fit_min, cfg.rates.fit_max) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(1), hi.unwrap_or(cfg.horizon))),
    };
    let last = records.last().ok_or(RunError::Numerical("empty trace".into()))?;
    let slack = cfg.rates.slack.unwrap_or(kind.default_slack());
    Ok(RateReport {
        final_gap: last.gap_ergodic,
        eta: last.eta,
        fit: fit_rate(records, range),
        bound: check_bounds(records, c, kind, radius, slack)?,
        constants: c.into(),
    })
}

fn step_rule(cfg: &ExperimentConfig, c: &BoundConstants) -> StepSizeRule {
    match (cfg.step.rule, cfg.step.eta) {
        (StepKind::Fixed, Some(eta)) => StepSizeRule::Fixed { eta },
        _ => theoretical_rule(cfg.solver.mirror_prox(), c, cfg.horizon),
    }
}

pub fn matrix_game(spec: &GameSpec) -> Result<MatrixGame, RunError> {
    Ok(match spec {
        GameSpec::Pennies => MatrixGame::matching_pennies(),
        GameSpec::Random { rows, cols, seed } => MatrixGame::random_uniform(*rows, *cols, *seed).map_err(in_key("game.rows"))?,
        GameSpec::File { path } => {
            let text = fs::read_to_string(path)
                .map_err(|e| ConfigError::key("game.path", format!("{}: {e}", path.display())))?;
            MatrixGame::parse(&text).map_err(in_key("game.path"))?
        }
        GameSpec::Inline { matrix, offset } => MatrixGame::from_rows(matrix, offset.clone()).map_err(in_key("game.matrix"))?,
        _ => return Err(ConfigError::key("game.kind", "not a matrix game").into()),
    })
}

fn finite_init(cfg: &ExperimentConfig, game: &MatrixGame) -> Result<(SimplexVector, SimplexVector), RunError> {
    match &cfg.init {
        InitSpec::Explicit { p, q } => {
            let check = |key: &'static str, v: &[f64], n: usize| -> Result<SimplexVector, RunError> {
                if v.len() != n {
                    return Err(ConfigError::key(key, format!("expected {n} entries, found {}", v.len())).into());
                }
                SimplexVector::new(v.to_vec()).map_err(in_key(key))
            };
            Ok((check("init.p", p, game.cols())?, check("init.q", q, game.rows())?))
        }
        _ => Ok((SimplexVector::uniform(game.cols()), SimplexVector::uniform(game.rows()))),
    }
}

pub fn kernel_game(spec: &GameSpec) -> Result<KernelGame, RunError> {
    match spec {
        GameSpec::CosineTorus {
            points,
            dims,
            amplitude,
            frequency,
            offset_amplitude,
            offset_phase,
        } => {
            let domain = GridDomain::periodic(*dims, *points, TAU).map_err(in_key("game.points"))?;
            let offset = if *offset_amplitude == 0.0 {
                Offset::Zero
            } else {
                Offset::Cosine {
                    amplitude: *offset_amplitude,
                    frequency: *frequency,
                    phase: *offset_phase,
                }
            };
            let kernel = Kernel::Cosine {
                amplitude: *amplitude,
                frequency: *frequency,
            };
            Ok(KernelGame::new(kernel, offset, domain, domain).map_err(in_key("game.amplitude"))?)
        }
        GameSpec::DiracGan { .. } => Err(ConfigError::key("game.kind", "dirac_gan has no grid form").into()),
        matrix => Ok(KernelGame::from_matrix_game(&matrix_game(matrix)?)?),
    }
}

fn grid_init(cfg: &ExperimentConfig, game: &KernelGame) -> Result<(GridDensity, GridDensity), RunError> {
    let (wd, td) = (*game.w_domain(), *game.theta_domain());
    match &cfg.init {
        InitSpec::Bump {
            mu_center,
            nu_center,
            kappa,
        } => {
            let mu = GridDensity::von_mises(wd, &vec![*mu_center; wd.dims()], *kappa).map_err(in_key("init.mu_center"))?;
            let nu = GridDensity::von_mises(td, &vec![*nu_center; td.dims()], *kappa).map_err(in_key("init.nu_center"))?;
            Ok((mu, nu))
        }
        InitSpec::Explicit { p, q } => {
            let mu = GridDensity::from_masses(wd, q).map_err(in_key("init.q"))?;
            let nu = GridDensity::from_masses(td, p).map_err(in_key("init.p"))?;
            Ok((mu, nu))
        }
        _ => Ok((GridDensity::uniform(wd), GridDensity::uniform(td))),
    }
}

fn toy_game(spec: &GameSpec) -> Result<ToyGame, RunError> {
    match spec {
        GameSpec::DiracGan {
            x0,
            real_std,
            confinement,
        } => Ok(ToyGame::dirac_gan(*x0, *real_std, *confinement).map_err(in_key("game.x0"))?),
        other => Ok(ToyGame::kernel_torus(kernel_game(other)?).map_err(in_key("game.kind"))?),
    }
}

fn particle_config(cfg: &ExperimentConfig, game: &ToyGame, seed: u64) -> Result<ParticleConfig, RunError> {
    let p = &cfg.particles;
    let mut pc = ParticleConfig::new(game, cfg.horizon, p.schedule(), seed);
    pc.batch = p.batch;
    pc.per_measure = p.per_measure;
    pc.beta = p.beta;
    pc.sampler = p.sampler;
    pc.init = match cfg.init {
        InitSpec::Normal {
            w_mean,
            theta_mean,
            std,
        } => ParticleInit::Normal {
            w_mean,
            theta_mean,
            std,
        },
        _ => {
            if game.period().is_none() {
                return Err(ConfigError::key("init.kind", "uniform init needs a periodic game").into());
            }
            ParticleInit::Uniform
        }
    };
    Ok(pc)
}

fn density_csv(mu: &GridDensity, nu: &GridDensity) -> String {
    let mut out = String::from("cell,mu,nu\n");
    for (i, (a, b)) in mu.density().iter().zip(nu.density()).enumerate() {
        out.push_str(&format!("{i},{a:?},{b:?}\n"));
    }
    out
}
