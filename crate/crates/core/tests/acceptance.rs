//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line
//! (written straight to stderr so it survives output capture) and then
//! asserts the same verdict.

use std::io::Write;
use std::time::{Duration, Instant};

use mixnash::grid::{coarsen, histogram, solve_inf_md, solve_inf_mp, GridDensity, KernelGame};
use mixnash::harness::{
    average_records, check_bounds, fit_rate, sgld_gaussian_check, BoundKind, Radius, SgldCheckConfig,
    DETERMINISTIC_SLACK, STOCHASTIC_SLACK,
};
use mixnash::particle::{approx_inf_md, mirror_gan, mirror_prox_gan, ParticleConfig, SamplerKind, ToyGame};
use mixnash::prox::{constants_for, theoretical_rule, ProxTrace};
use mixnash::{
    solve_md, solve_mp, tv_norm, MatrixGame, Oracle, SgldSchedule, SimplexVector, SolveOptions,
    StepSizeRule, StochasticOracleConfig,
};

fn report(criterion: u32, pass: bool, detail: &str, elapsed: Duration) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("{verdict} criterion {criterion}: {detail} [{:.2}s]\n", elapsed.as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn info(criterion: u32, detail: &str) {
    let _ = std::io::stderr().write_all(format!("INFO criterion {criterion}: {detail}\n").as_bytes());
}

/// Matching pennies from `(0.9, 0.1)` and five random 10×10 games from uniform starts.
fn finite_suite() -> Vec<(String, MatrixGame, SimplexVector, SimplexVector)> {
    let skewed = SimplexVector::new(vec![0.9, 0.1]).unwrap();
    let mut games = vec![(
        "matching pennies".to_string(),
        MatrixGame::matching_pennies(),
        skewed.clone(),
        skewed,
    )];
    for seed in 1..=5 {
        let g = MatrixGame::random_uniform(10, 10, seed).unwrap();
        games.push((
            format!("random 10x10 #{seed}"),
            g,
            SimplexVector::uniform(10),
            SimplexVector::uniform(10),
        ));
    }
    games
}

const FINITE_HORIZON: usize = 100_000;
const FIT_RANGE: (usize, usize) = (100, 100_000);

fn finite_rate_criterion(criterion: u32, mirror_prox: bool, max_slope: f64) {
    let mut all_ok = true;
    let mut details = Vec::new();
    let start = Instant::now();
    for (name, game, p1, q1) in finite_suite() {
        let t0 = Instant::now();
        let c = constants_for(&game, &Oracle::Deterministic, &p1, &q1);
        let rule = theoretical_rule(mirror_prox, &c, FINITE_HORIZON);
        let solve = if mirror_prox { solve_mp } else { solve_md };
        let tr: ProxTrace = solve(&game, FINITE_HORIZON, &rule, &Oracle::Deterministic, (&p1, &q1), SolveOptions::default()).unwrap();
        let runtime = t0.elapsed();
        let kind = BoundKind::new(mirror_prox, false);
        let bound = check_bounds(&tr.records, &c, kind, Radius::Comparator, DETERMINISTIC_SLACK).unwrap();
        let surrogate = check_bounds(&tr.records, &c, kind, Radius::Surrogate, DETERMINISTIC_SLACK).unwrap();
        let slope = fit_rate(&tr.records, Some(FIT_RANGE)).slope();
        let ok = bound.all_satisfied
            && slope.is_some_and(|s| s <= max_slope)
            && runtime < Duration::from_secs(10);
        all_ok &= ok;
        details.push(format!(
            "{name}: gap(T)={:.3e} worst gap/bound={:.3} slope={:?} {:.2}s",
            tr.final_gap(),
            bound.worst_ratio,
            slope,
            runtime.as_secs_f64()
        ));
        info(
            criterion,
            &format!(
                "{name}: worst gap/bound with D0 = log m + log n is {:.3} (within slack: {})",
                surrogate.worst_ratio, surrogate.all_satisfied
            ),
        );
    }
    report(criterion, all_ok, &details.join("; "), start.elapsed());
    assert!(all_ok);
}

#[test]
fn criterion_01_finite_md_rate() {
    finite_rate_criterion(1, false, -0.35);
}

#[test]
fn criterion_02_finite_mp_rate() {
    finite_rate_criterion(2, true, -0.85);
}

fn stochastic_criterion(mirror_prox: bool) -> (bool, String) {
    let horizon = 10_000;
    let seeds = 20u64;
    let games = [
        ("matching pennies", MatrixGame::matching_pennies()),
        ("random 10x10 #1", MatrixGame::random_uniform(10, 10, 1).unwrap()),
    ];
    let mut ok = true;
    let mut details = Vec::new();
    for (name, game) in games {
        let p1 = SimplexVector::uniform(game.cols());
        let q1 = SimplexVector::uniform(game.rows());
        let mut runs = Vec::new();
        let mut constants = None;
        for seed in 0..seeds {
            let oracle = Oracle::Stochastic(StochasticOracleConfig::new(0.5, seed).unwrap());
            let c = constants_for(&game, &oracle, &p1, &q1);
            let rule = theoretical_rule(mirror_prox, &c, horizon);
            let solve = if mirror_prox { solve_mp } else { solve_md };
            let tr = solve(&game, horizon, &rule, &oracle, (&p1, &q1), SolveOptions::default()).unwrap();
            runs.push(tr.records);
            constants = Some(c);
        }
        let c = constants.unwrap();
        let mean = average_records(&runs).unwrap();
        let last = std::slice::from_ref(mean.last().unwrap());
        let kind = BoundKind::new(mirror_prox, true);
        let check = check_bounds(last, &c, kind, Radius::Surrogate, STOCHASTIC_SLACK).unwrap();
        ok &= check.all_satisfied;
        details.push(format!(
            "{name}: mean gap(T)={:.3e} gap/bound={:.3} (M'={:?}, sigma2={:?})",
            last[0].gap_ergodic, check.worst_ratio, c.grad_bound_stochastic, c.sigma2
        ));
    }
    (ok, details.join("; "))
}

#[test]
fn criterion_03_stochastic_variants() {
    let start = Instant::now();
    let (md_ok, md) = stochastic_criterion(false);
    let md_time = start.elapsed();
    let mid = Instant::now();
    let (mp_ok, mp) = stochastic_criterion(true);
    let mp_time = mid.elapsed();
    let ok = md_ok && mp_ok && md_time < Duration::from_secs(60) && mp_time < Duration::from_secs(60);
    report(
        3,
        ok,
        &format!("MD [{:.2}s] {md}; MP [{:.2}s] {mp}", md_time.as_secs_f64(), mp_time.as_secs_f64()),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn criterion_04_finite_grid_consistency() {
    let start = Instant::now();
    let game = MatrixGame::matching_pennies();
    let kg = KernelGame::from_matrix_game(&game).unwrap();
    let p1 = SimplexVector::new(vec![0.9, 0.1]).unwrap();
    let q1 = SimplexVector::new(vec![0.3, 0.7]).unwrap();
    let horizon = 1000;
    let c = constants_for(&game, &Oracle::Deterministic, &p1, &q1);
    let rule = theoretical_rule(false, &c, horizon);
    let opts = SolveOptions {
        stride: None,
        keep_iterates: true,
    };
    let fin = solve_md(&game, horizon, &rule, &Oracle::Deterministic, (&p1, &q1), opts).unwrap();
    let mu1 = GridDensity::from_masses(*kg.w_domain(), q1.as_slice()).unwrap();
    let nu1 = GridDensity::from_masses(*kg.theta_domain(), p1.as_slice()).unwrap();
    let grid = solve_inf_md(&kg, horizon, &rule, &mu1, &nu1, opts).unwrap();
    let fi = fin.iterates.unwrap();
    let gi = grid.iterates.unwrap();
    let mut worst: f64 = 0.0;
    for ((p, q), (mu, nu)) in fi.iter().zip(&gi) {
        for (a, b) in p.iter().zip(nu).chain(q.iter().zip(mu)) {
            worst = worst.max((a - b).abs());
        }
    }
    let ok = fi.len() == horizon && gi.len() == horizon && worst <= 1e-12;
    report(4, ok, &format!("{horizon} iterates, max deviation {worst:.3e}"), start.elapsed());
    assert!(ok);
}

#[test]
fn criterion_05_grid_rates() {
    let kg = KernelGame::cosine_torus(128).unwrap();
    let mu1 = GridDensity::von_mises(*kg.w_domain(), &[1.0], 1.0).unwrap();
    let nu1 = GridDensity::von_mises(*kg.theta_domain(), &[2.5], 1.0).unwrap();
    let horizon = 10_000;
    let d0 = 2.0 * 128f64.ln();
    let mut ok = true;
    let mut details = Vec::new();
    let start = Instant::now();
    for (mirror_prox, max_slope) in [(false, -0.35), (true, -0.85)] {
        let t0 = Instant::now();
        let c = mixnash::grid::grid_constants(&kg, &mu1, &nu1);
        assert!((c.d0_bar - d0).abs() < 1e-12);
        let rule = theoretical_rule(mirror_prox, &c, horizon);
        let solve = if mirror_prox { solve_inf_mp } else { solve_inf_md };
        let tr = solve(&kg, horizon, &rule, &mu1, &nu1, SolveOptions::default()).unwrap();
        let runtime = t0.elapsed();
        let kind = BoundKind::new(mirror_prox, false);
        let bound = check_bounds(&tr.records, &c, kind, Radius::Surrogate, DETERMINISTIC_SLACK).unwrap();
        let slope = fit_rate(&tr.records, Some((100, horizon))).slope();
        let run_ok = bound.all_satisfied && slope.is_some_and(|s| s <= max_slope) && runtime < Duration::from_secs(30);
        ok &= run_ok;
        details.push(format!(
            "{}: gap(T)={:.3e} worst gap/bound={:.3} slope={:?} {:.2}s",
            if mirror_prox { "MP" } else { "MD" },
            tr.final_gap(),
            bound.worst_ratio,
            slope,
            runtime.as_secs_f64()
        ));
    }
    report(5, ok, &details.join("; "), start.elapsed());
    assert!(ok);
}

#[test]
fn criterion_06_foundations_suite() {
    let start = Instant::now();
    let domain = mixnash::GridDomain::torus(64).unwrap();
    let rep = mixnash::grid::foundations_suite(&domain, 500, 2024).unwrap();
    let elapsed = start.elapsed();
    let mut worst = Vec::new();
    for (k, item) in &rep.items {
        worst.push(format!("{k}={:.2e}{}", item.worst_residual, if item.pass { "" } else { "(x)" }));
    }
    let ok = rep.all_pass() && elapsed < Duration::from_secs(10);
    report(6, ok, &format!("failing {:?}; {}", rep.failing(), worst.join(" ")), elapsed);
    assert!(ok);
}

#[test]
fn criterion_07_sgld_gaussian() {
    let start = Instant::now();
    let rep = sgld_gaussian_check(&SgldCheckConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let ok = rep.pass() && elapsed < Duration::from_secs(20);
    report(
        7,
        ok,
        &format!(
            "mean={:.4} var={:.4} KS={:.4} (critical {:.4})",
            rep.mean, rep.variance, rep.ks, rep.ks_critical
        ),
        elapsed,
    );
    assert!(ok);
}

#[test]
fn criterion_08_particle_vs_grid() {
    let start = Instant::now();
    let kg = KernelGame::cosine_torus(128).unwrap();
    let game = ToyGame::kernel_torus(kg.clone()).unwrap();
    let (gamma0, eps0) = (1e-2, 1e-2);
    let horizon = 50;
    let bins = 32;
    // The chains target exp(−(accumulated payoff)/ε²), i.e. η = 1/ε².
    let rule = StepSizeRule::Fixed { eta: 1.0 / (eps0 * eps0) };
    let u = GridDensity::uniform(*kg.w_domain());
    let oracle = solve_inf_md(&kg, horizon, &rule, &u, &u, SolveOptions::default()).unwrap();
    let ref_mu = coarsen(&oracle.mu_bar, bins).unwrap();
    let ref_nu = coarsen(&oracle.nu_bar, bins).unwrap();
    let mut passes = 0;
    let mut details = Vec::new();
    let mut slow = false;
    for seed in 0..5 {
        let t0 = Instant::now();
        let mut cfg = ParticleConfig::new(&game, horizon, SgldSchedule::new(gamma0, eps0).unwrap(), seed);
        cfg.per_measure = 64;
        cfg.batch = 32;
        let run = approx_inf_md(&game, &cfg).unwrap();
        slow |= t0.elapsed() >= Duration::from_secs(60);
        let (pw, pt) = run.pooled();
        let hw = histogram(kg.w_domain(), bins, &pw).unwrap();
        let ht = histogram(kg.theta_domain(), bins, &pt).unwrap();
        let diff = |a: &[f64], b: &[f64]| tv_norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
        let (tw, tt) = (diff(&hw, &ref_mu), diff(&ht, &ref_nu));
        if tw.max(tt) <= 0.15 {
            passes += 1;
        }
        details.push(format!("seed {seed}: TV_w={tw:.3} TV_theta={tt:.3}"));
    }
    let ok = passes >= 4 && !slow;
    report(8, ok, &format!("{passes}/5 seeds within 0.15; {}", details.join(", ")), start.elapsed());
    assert!(ok);
}

fn dirac_criterion(sampler: SamplerKind, prox: bool) -> (usize, bool, Vec<String>) {
    let game = ToyGame::dirac_gan(0.5, 0.0, 0.1).unwrap();
    let mut hits = 0;
    let mut slow = false;
    let mut finals = Vec::new();
    for seed in 0..12 {
        let t0 = Instant::now();
        let mut cfg = ParticleConfig::new(&game, 2000, SgldSchedule::new(1e-2, 1e-2).unwrap(), seed);
        cfg.beta = 0.9;
        cfg.sampler = sampler;
        let tr = if prox { mirror_prox_gan(&game, &cfg) } else { mirror_gan(&game, &cfg) }.unwrap();
        slow |= t0.elapsed() >= Duration::from_secs(30);
        let last = tr.last().unwrap();
        let (w, th) = (last.w[0], last.theta[0]);
        if (th - 0.5).abs() <= 0.05 && w.abs() <= 0.05 {
            hits += 1;
        }
        finals.push(format!("({w:.3},{th:.3})"));
    }
    (hits, slow, finals)
}

#[test]
fn criterion_09_mirror_gan_dirac() {
    let start = Instant::now();
    let (plain, slow_a, fa) = dirac_criterion(SamplerKind::Plain, false);
    let (pre, slow_b, fb) = dirac_criterion(SamplerKind::Preconditioned, false);
    for (name, sampler) in [("plain", SamplerKind::Plain), ("preconditioned", SamplerKind::Preconditioned)] {
        let (hits, _, f) = dirac_criterion(sampler, true);
        info(9, &format!("mirror-prox variant, {name}: {hits}/12 within envelope; final (w,theta) {}", f.join(" ")));
    }
    let ok = plain >= 10 && pre >= 10 && !slow_a && !slow_b;
    report(
        9,
        ok,
        &format!(
            "plain {plain}/12, preconditioned {pre}/12; plain finals {}; preconditioned finals {}",
            fa.join(" "),
            fb.join(" ")
        ),
        start.elapsed(),
    );
    assert!(ok);
}

#[test]
fn criterion_10_declared_out_of_scope() {
    let start = Instant::now();
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap_or_default();
    let ok = readme.contains("## Not reproduced") && readme.contains("image");
    report(
        10,
        ok,
        "image-generation quality experiments declared non-reproducible in README; criteria 8-9 substitute",
        start.elapsed(),
    );
    assert!(ok);
}
