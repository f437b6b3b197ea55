//! Experiment configuration: flat `key = value` lines grouped under
//! `[section]` headers. Keys are addressed as `section.key`; keys before the
//! first header live in the root section and are addressed bare.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mixnash::harness::SgldCheckConfig;
use mixnash::particle::SamplerKind;
use mixnash::{ParticleConfig, SgldSchedule};
use serde::Serialize;

/// A configuration problem tied to the key that caused it, when there is one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn key(key: &str, message: impl Into<String>) -> Self {
        Self {
            key: Some(key.to_string()),
            line: None,
            message: message.into(),
        }
    }

    pub fn general(message: impl Into<String>) -> Self {
        Self {
            key: None,
            line: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.key, self.line) {
            (Some(k), Some(l)) => write!(f, "{k} (line {l}): {}", self.message),
            (Some(k), None) => write!(f, "{k}: {}", self.message),
            (None, Some(l)) => write!(f, "line {l}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

type Res<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Md,
    Mp,
    InfMd,
    InfMp,
    ApproxMd,
    ApproxMp,
    MirrorGan,
    MirrorProxGan,
    Foundations,
    SgldCheck,
}

impl SolverKind {
    pub fn mirror_prox(self) -> bool {
        matches!(self, Self::Mp | Self::InfMp | Self::ApproxMp | Self::MirrorProxGan)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Self::Md | Self::Mp)
    }

    pub fn is_grid(self) -> bool {
        matches!(self, Self::InfMd | Self::InfMp)
    }

    pub fn is_particle(self) -> bool {
        matches!(self, Self::ApproxMd | Self::ApproxMp | Self::MirrorGan | Self::MirrorProxGan)
    }

    /// Solvers whose traces carry a duality gap with a theoretical bound.
    pub fn has_rate(self) -> bool {
        self.is_finite() || self.is_grid()
    }
}

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "md" => Self::Md,
            "mp" => Self::Mp,
            "inf_md" => Self::InfMd,
            "inf_mp" => Self::InfMp,
            "approx_md" => Self::ApproxMd,
            "approx_mp" => Self::ApproxMp,
            "mirror_gan" => Self::MirrorGan,
            "mirror_prox_gan" => Self::MirrorProxGan,
            "foundations" => Self::Foundations,
            "sgld_check" => Self::SgldCheck,
            _ => return Err(format!("unknown solver {s:?}")),
        })
    }
}

/// The problem a solver runs on.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GameSpec {
    Pennies,
    /// Entries uniform in `[−1, 1]`, zero offset.
    Random { rows: usize, cols: usize, seed: u64 },
    /// Game file in the `m n` / rows / offset text format.
    File { path: PathBuf },
    /// `matrix` rows separated by `;`.
    Inline { matrix: Vec<Vec<f64>>, offset: Vec<f64> },
    /// Cosine kernel on a torus pair with an optional cosine offset.
    CosineTorus {
        points: usize,
        dims: usize,
        amplitude: f64,
        frequency: f64,
        offset_amplitude: f64,
        offset_phase: f64,
    },
    DiracGan { x0: f64, real_std: f64, confinement: f64 },
}

/// Initial strategies. Which fields matter depends on the solver family.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Uniform,
    /// Finite games: explicit mixed strategies.
    Explicit { p: Vec<f64>, q: Vec<f64> },
    /// Grid games: von Mises bumps around the given centers.
    Bump { mu_center: f64, nu_center: f64, kappa: f64 },
    /// Particle games: independent normals.
    Normal { w_mean: f64, theta_mean: f64, std: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Theoretical,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepSpec {
    pub rule: StepKind,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParticleSpec {
    pub gamma0: f64,
    pub eps0: f64,
    pub beta: f64,
    pub batch: usize,
    pub per_measure: usize,
    pub sampler: SamplerKind,
    pub k_growth: f64,
    pub gamma_decay: f64,
    pub eps_decay: f64,
}

impl ParticleSpec {
    pub fn schedule(&self) -> SgldSchedule {
        SgldSchedule {
            gamma0: self.gamma0,
            eps0: self.eps0,
            k_growth: self.k_growth,
            gamma_decay: self.gamma_decay,
            eps_decay: self.eps_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoundationsSpec {
    pub points: usize,
    pub trials: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusKind {
    Surrogate,
    Comparator,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatesSpec {
    pub radius: RadiusKind,
    pub fit_min: Option<usize>,
    pub fit_max: Option<usize>,
    pub slack: Option<f64>,
}

/// Fully resolved configuration; echoed verbatim into every report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub solver: SolverKind,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub trace_stride: Option<usize>,
    pub threads: usize,
    pub game: GameSpec,
    pub init: InitSpec,
    pub step: StepSpec,
    pub noise_bound: f64,
    pub particles: ParticleSpec,
    pub foundations: FoundationsSpec,
    pub sgld: SgldCheckConfig,
    pub rates: RatesSpec,
}

/// Raw `section.key → (value, line)` pairs.
#[derive(Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, usize)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Res<Self> {
        let mut raw = RawConfig::default();
        let mut section = String::new();
        for (i, line) in text.lines().enumerate() {
            let ln = i + 1;
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError {
                    key: None,
                    line: Some(ln),
                    message: format!("unterminated section header {line:?}"),
                })?;
                section = name.trim().to_string();
                if section.is_empty() || section.contains(char::is_whitespace) {
                    return Err(ConfigError {
                        key: None,
                        line: Some(ln),
                        message: format!("bad section name {name:?}"),
                    });
                }
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError {
                key: None,
                line: Some(ln),
                message: format!("expected `key = value`, found {line:?}"),
            })?;
            let k = k.trim();
            if k.is_empty() {
                return Err(ConfigError {
                    key: None,
                    line: Some(ln),
                    message: "empty key".into(),
                });
            }
            let full = if section.is_empty() {
                k.to_string()
            } else {
                format!("{section}.{k}")
            };
            if raw.entries.contains_key(&full) {
                return Err(ConfigError {
                    key: Some(full),
                    line: Some(ln),
                    message: "duplicate key".into(),
                });
            }
            raw.entries.insert(full, (v.trim().to_string(), ln));
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.entries.insert(key.to_string(), (value, 0));
    }

    fn take_str(&mut self, key: &str) -> Option<(String, usize)> {
        self.entries.remove(key)
    }

    fn take<T: FromStr>(&mut self, key: &str, default: T) -> Res<T>
    where
        T::Err: fmt::Display,
    {
        self.take_opt(key).map(|v| v.unwrap_or(default))
    }

    fn take_opt<T: FromStr>(&mut self, key: &str) -> Res<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.take_str(key) {
            None => Ok(None),
            Some((v, ln)) => v.parse::<T>().map(Some).map_err(|e| ConfigError {
                key: Some(key.to_string()),
                line: (ln > 0).then_some(ln),
                message: format!("cannot parse {v:?}: {e}"),
            }),
        }
    }

    fn take_list(&mut self, key: &str) -> Res<Option<Vec<f64>>> {
        match self.take_str(key) {
            None => Ok(None),
            Some((v, ln)) => parse_list(&v).map(Some).map_err(|m| ConfigError {
                key: Some(key.to_string()),
                line: (ln > 0).then_some(ln),
                message: m,
            }),
        }
    }

    fn peek(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    fn finish(self) -> Res<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, (_, ln))) => Err(ConfigError {
                key: Some(k),
                line: (ln > 0).then_some(ln),
                message: "unknown key".into(),
            }),
        }
    }
}

fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}")))
        .collect()
}

fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    // `a..b` is half-open; otherwise a comma or space separated list.
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|e| format!("bad range start: {e}"))?;
        let b: u64 = b.trim().parse().map_err(|e| format!("bad range end: {e}"))?;
        if b <= a {
            return Err("empty seed range".into());
        }
        return Ok((a..b).collect());
    }
    let seeds: Vec<u64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(seeds)
}

fn positive(key: &str, v: f64) -> Res<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::key(key, format!("must be finite and positive, got {v}")))
    }
}

fn at_least_one(key: &str, v: usize) -> Res<usize> {
    if v >= 1 {
        Ok(v)
    } else {
        Err(ConfigError::key(key, "must be at least 1"))
    }
}

fn unit_interval(key: &str, v: f64, include_zero: bool) -> Res<f64> {
    let lo_ok = if include_zero { v >= 0.0 } else { v > 0.0 };
    if lo_ok && v <= 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::key(key, format!("must lie in the unit interval, got {v}")))
    }
}

fn default_game(solver: SolverKind) -> &'static str {
    match solver {
        SolverKind::Md | SolverKind::Mp => "pennies",
        SolverKind::InfMd | SolverKind::InfMp | SolverKind::ApproxMd | SolverKind::ApproxMp => "cosine_torus",
        SolverKind::MirrorGan | SolverKind::MirrorProxGan => "dirac_gan",
        SolverKind::Foundations | SolverKind::SgldCheck => "none",
    }
}

impl ExperimentConfig {
    /// Resolve raw entries, filling defaults. `base` anchors relative paths.
    pub fn resolve(mut raw: RawConfig, base: &Path) -> Res<Self> {
        let solver: SolverKind = raw.take("solver", SolverKind::Md)?;
        let seeds = match raw.take_str("seeds") {
            None => vec![0],
            Some((v, ln)) => parse_seeds(&v).map_err(|m| ConfigError {
                key: Some("seeds".into()),
                line: (ln > 0).then_some(ln),
                message: m,
            })?,
        };
        let horizon = at_least_one("horizon", raw.take("horizon", 10_000usize)?)?;
        let trace_stride = raw.take_opt::<usize>("trace_stride")?;
        if trace_stride == Some(0) {
            return Err(ConfigError::key("trace_stride", "must be at least 1"));
        }
        let threads = at_least_one("threads", raw.take("threads", 1usize)?)?;

        let game = Self::resolve_game(&mut raw, solver, base)?;
        let init = Self::resolve_init(&mut raw, solver, &game)?;

        let rule: String = raw.take("step.rule", "theoretical".to_string())?;
        let rule = match rule.as_str() {
            "theoretical" => StepKind::Theoretical,
            "fixed" => StepKind::Fixed,
            other => return Err(ConfigError::key("step.rule", format!("unknown rule {other:?}"))),
        };
        let eta = raw.take_opt::<f64>("step.eta")?.map(|e| positive("step.eta", e)).transpose()?;
        if rule == StepKind::Fixed && eta.is_none() {
            return Err(ConfigError::key("step.eta", "required when step.rule = fixed"));
        }
        if rule == StepKind::Theoretical && eta.is_some() {
            return Err(ConfigError::key("step.eta", "only valid with step.rule = fixed"));
        }

        let noise_bound: f64 = raw.take("oracle.noise_bound", 0.0)?;
        if !(noise_bound >= 0.0 && noise_bound.is_finite()) {
            return Err(ConfigError::key("oracle.noise_bound", "must be finite and nonnegative"));
        }
        if noise_bound > 0.0 && !solver.is_finite() {
            return Err(ConfigError::key("oracle.noise_bound", "stochastic oracles are only available for md and mp"));
        }

        let particles = ParticleSpec {
            gamma0: positive("particles.gamma0", raw.take("particles.gamma0", 1e-2)?)?,
            eps0: {
                let e: f64 = raw.take("particles.eps0", 1e-2)?;
                if !(e >= 0.0 && e.is_finite()) {
                    return Err(ConfigError::key("particles.eps0", "must be finite and nonnegative"));
                }
                e
            },
            beta: unit_interval("particles.beta", raw.take("particles.beta", ParticleConfig::DEFAULT_BETA)?, false)?,
            batch: at_least_one("particles.batch", raw.take("particles.batch", 1024usize)?)?,
            per_measure: at_least_one("particles.per_measure", raw.take("particles.per_measure", 64usize)?)?,
            sampler: match raw.take("particles.sampler", "plain".to_string())?.as_str() {
                "plain" => SamplerKind::Plain,
                "preconditioned" => SamplerKind::Preconditioned,
                other => return Err(ConfigError::key("particles.sampler", format!("unknown sampler {other:?}"))),
            },
            k_growth: positive("particles.k_growth", raw.take("particles.k_growth", SgldSchedule::K_GROWTH)?)?,
            gamma_decay: unit_interval("particles.gamma_decay", raw.take("particles.gamma_decay", SgldSchedule::GAMMA_DECAY)?, false)?,
            eps_decay: unit_interval("particles.eps_decay", raw.take("particles.eps_decay", SgldSchedule::EPS_DECAY)?, false)?,
        };
        if particles.k_growth < 1.0 {
            return Err(ConfigError::key("particles.k_growth", "must be at least 1"));
        }

        let foundations = FoundationsSpec {
            points: at_least_one("foundations.points", raw.take("foundations.points", 64usize)?)?,
            trials: at_least_one("foundations.trials", raw.take("foundations.trials", 500usize)?)?,
        };

        let d = SgldCheckConfig::default();
        let sgld = SgldCheckConfig {
            gamma: positive("sgld.gamma", raw.take("sgld.gamma", d.gamma)?)?,
            steps: at_least_one("sgld.steps", raw.take("sgld.steps", d.steps)?)?,
            burn_in: raw.take("sgld.burn_in", d.burn_in)?,
            thinned: at_least_one("sgld.thinned", raw.take("sgld.thinned", d.thinned)?)?,
            alpha: unit_interval("sgld.alpha", raw.take("sgld.alpha", d.alpha)?, false)?,
            seed: seeds[0],
        };
        if sgld.burn_in >= sgld.steps {
            return Err(ConfigError::key("sgld.burn_in", "must be smaller than sgld.steps"));
        }
        if sgld.thinned > sgld.steps - sgld.burn_in {
            return Err(ConfigError::key("sgld.thinned", "exceeds the number of post-burn-in steps"));
        }

        let radius = match raw.take("rates.radius", "comparator".to_string())?.as_str() {
            "surrogate" => RadiusKind::Surrogate,
            "comparator" => RadiusKind::Comparator,
            other => return Err(ConfigError::key("rates.radius", format!("unknown radius {other:?}"))),
        };
        let rates = RatesSpec {
            radius,
            fit_min: raw.take_opt("rates.fit_min")?,
            fit_max: raw.take_opt("rates.fit_max")?,
            slack: raw.take_opt::<f64>("rates.slack")?.map(|s| positive("rates.slack", s)).transpose()?,
        };
        if let (Some(a), Some(b)) = (rates.fit_min, rates.fit_max) {
            if a >= b {
                return Err(ConfigError::key("rates.fit_max", "must exceed rates.fit_min"));
            }
        }

        raw.finish()?;
        Ok(Self {
            solver,
            seeds,
            horizon,
            trace_stride,
            threads,
            game,
            init,
            step: StepSpec { rule, eta },
            noise_bound,
            particles,
            foundations,
            sgld,
            rates,
        })
    }

    fn resolve_game(raw: &mut RawConfig, solver: SolverKind, base: &Path) -> Res<GameSpec> {
        let kind: String = raw.take("game.kind", default_game(solver).to_string())?;
        let game = match kind.as_str() {
            "none" => {
                if !matches!(solver, SolverKind::Foundations | SolverKind::SgldCheck) {
                    return Err(ConfigError::key("game.kind", "this solver needs a game"));
                }
                return Ok(GameSpec::Pennies);
            }
            "pennies" => GameSpec::Pennies,
            "random" => GameSpec::Random {
                rows: at_least_one("game.rows", raw.take("game.rows", 10usize)?)?,
                cols: at_least_one("game.cols", raw.take("game.cols", 10usize)?)?,
                seed: raw.take("game.seed", 1u64)?,
            },
            "file" => {
                let (p, _) = raw
                    .take_str("game.path")
                    .ok_or_else(|| ConfigError::key("game.path", "required when game.kind = file"))?;
                GameSpec::File { path: base.join(p) }
            }
            "inline" => {
                let (m, ln) = raw
                    .take_str("game.matrix")
                    .ok_or_else(|| ConfigError::key("game.matrix", "required when game.kind = inline"))?;
                let matrix: Vec<Vec<f64>> = m
                    .split(';')
                    .map(parse_list)
                    .collect::<Result<_, _>>()
                    .map_err(|msg| ConfigError {
                        key: Some("game.matrix".into()),
                        line: (ln > 0).then_some(ln),
                        message: msg,
                    })?;
                let offset = raw.take_list("game.offset")?.unwrap_or_else(|| vec![0.0; matrix.len()]);
                GameSpec::Inline { matrix, offset }
            }
            "cosine_torus" => GameSpec::CosineTorus {
                points: at_least_one("game.points", raw.take("game.points", 128usize)?)?,
                dims: at_least_one("game.dims", raw.take("game.dims", 1usize)?)?,
                amplitude: raw.take("game.amplitude", 1.0)?,
                frequency: raw.take("game.frequency", 1.0)?,
                offset_amplitude: raw.take("game.offset_amplitude", 0.0)?,
                offset_phase: raw.take("game.offset_phase", 0.0)?,
            },
            "dirac_gan" => GameSpec::DiracGan {
                x0: raw.take("game.x0", 0.5)?,
                real_std: raw.take("game.real_std", 0.0)?,
                confinement: positive("game.confinement", raw.take("game.confinement", 0.1)?)?,
            },
            other => return Err(ConfigError::key("game.kind", format!("unknown game {other:?}"))),
        };
        let matrix_like = matches!(
            game,
            GameSpec::Pennies | GameSpec::Random { .. } | GameSpec::File { .. } | GameSpec::Inline { .. }
        );
        let ok = if solver.is_finite() {
            matrix_like
        } else if solver.is_grid() {
            matrix_like || matches!(game, GameSpec::CosineTorus { .. })
        } else if solver.is_particle() {
            matches!(game, GameSpec::CosineTorus { .. } | GameSpec::DiracGan { .. })
        } else {
            true
        };
        if !ok {
            return Err(ConfigError::key("game.kind", format!("game {kind:?} is not available for this solver")));
        }
        Ok(game)
    }

    fn resolve_init(raw: &mut RawConfig, solver: SolverKind, game: &GameSpec) -> Res<InitSpec> {
        let grid_torus = solver.is_grid() && matches!(game, GameSpec::CosineTorus { .. });
        let default = if solver.is_finite() || (solver.is_grid() && !grid_torus) {
            if raw.peek("init.p") || raw.peek("init.q") {
                "explicit"
            } else {
                "uniform"
            }
        } else if grid_torus {
            "uniform"
        } else if matches!(game, GameSpec::DiracGan { .. }) {
            "normal"
        } else {
            "uniform"
        };
        let raw_had_kind = raw.peek("init.kind");
        let kind: String = raw.take("init.kind", default.to_string())?;
        Ok(match kind.as_str() {
            // Uniform is already the equilibrium of matching pennies.
            "uniform" if default == "uniform" && *game == GameSpec::Pennies && !solver.is_particle() && !raw_had_kind => {
                InitSpec::Explicit {
                    p: vec![0.9, 0.1],
                    q: vec![0.9, 0.1],
                }
            }
            "uniform" => InitSpec::Uniform,
            "explicit" => {
                if !(solver.is_finite() || solver.is_grid()) || grid_torus {
                    return Err(ConfigError::key("init.kind", "explicit strategies need a matrix game"));
                }
                let p = raw.take_list("init.p")?.ok_or_else(|| ConfigError::key("init.p", "required for explicit init"))?;
                let q = raw.take_list("init.q")?.ok_or_else(|| ConfigError::key("init.q", "required for explicit init"))?;
                InitSpec::Explicit { p, q }
            }
            "bump" => {
                if !grid_torus {
                    return Err(ConfigError::key("init.kind", "bump init needs a grid solver on a torus"));
                }
                InitSpec::Bump {
                    mu_center: raw.take("init.mu_center", 1.0)?,
                    nu_center: raw.take("init.nu_center", 2.5)?,
                    kappa: positive("init.kappa", raw.take("init.kappa", 1.0)?)?,
                }
            }
            "normal" => {
                if !solver.is_particle() {
                    return Err(ConfigError::key("init.kind", "normal init is for particle solvers"));
                }
                InitSpec::Normal {
                    w_mean: raw.take("init.w_mean", 0.0)?,
                    theta_mean: raw.take("init.theta_mean", 0.0)?,
                    std: positive("init.std", raw.take("init.std", 0.1)?)?,
                }
            }
            other => return Err(ConfigError::key("init.kind", format!("unknown init {other:?}"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(text: &str) -> Res<ExperimentConfig> {
        ExperimentConfig::resolve(RawConfig::parse(text)?, Path::new("."))
    }

    #[test]
    fn defaults_fill_everything() {
        let c = resolve("").unwrap();
        assert_eq!(c.solver, SolverKind::Md);
        assert_eq!(c.game, GameSpec::Pennies);
        assert_eq!(c.particles.beta, 0.9);
        assert_eq!(c.particles.gamma_decay, 1.0 - 1e-5);
        assert_eq!(c.seeds, vec![0]);
    }

    #[test]
    fn sections_and_comments() {
        let c = resolve("solver = mp # trailing\nseeds = 3..6\n[game]\nkind = random\nrows = 4\n[init]\np = 0.5 0.5\n")
            .unwrap_err();
        // explicit p without q: names the missing key
        assert_eq!(c.key.as_deref(), Some("init.q"));
        let c = resolve("solver = mp\nseeds = 3..6\n[game]\nkind = random\nrows = 4\n").unwrap();
        assert_eq!(c.seeds, vec![3, 4, 5]);
        assert_eq!(c.game, GameSpec::Random { rows: 4, cols: 10, seed: 1 });
    }

    #[test]
    fn errors_name_the_key() {
        let e = resolve("[particles]\nbeta = 1.5\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("particles.beta"));
        let e = resolve("[particles]\nbeta = x\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("particles.beta"));
        assert_eq!(e.line, Some(2));
        let e = resolve("[game]\nbogus = 1\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("game.bogus"));
        let e = resolve("solver = nope\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("solver"));
        let e = resolve("horizon = 1\nhorizon = 2\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("horizon"));
    }

    #[test]
    fn inline_matrix() {
        let c = resolve("[game]\nkind = inline\nmatrix = 1 -1; -1 1\n").unwrap();
        assert_eq!(
            c.game,
            GameSpec::Inline {
                matrix: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
                offset: vec![0.0, 0.0]
            }
        );
    }

    #[test]
    fn incompatible_game_rejected() {
        let e = resolve("solver = mirror_gan\n[game]\nkind = pennies\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("game.kind"));
        let e = resolve("solver = inf_md\n[oracle]\nnoise_bound = 0.5\n").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("oracle.noise_bound"));
    }
}
