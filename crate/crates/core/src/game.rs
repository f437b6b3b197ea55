//! Finite two-player zero-sum games.
//!
//! The objective is `F(p, q) = ⟨q, a⟩ − ⟨q, A p⟩` where the row player `q`
//! maximizes and the column player `p` minimizes. Both players are driven by
//! the same descent-form mirror step, so the row player receives the negated
//! payoff gradient `−a + A p`.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::entropy::{dot, SimplexVector};
use crate::error::{check_dim, Error, Result};
use crate::rng::{self, tag};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixGame {
    rows: usize,
    cols: usize,
    /// Row-major `rows × cols`.
    payoff: Vec<f64>,
    offset: Vec<f64>,
}

impl MatrixGame {
    pub fn new(rows: usize, cols: usize, payoff: Vec<f64>, offset: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::arg("game dimensions must be at least 1x1"));
        }
        check_dim("payoff matrix entries", rows * cols, payoff.len())?;
        check_dim("offset vector", rows, offset.len())?;
        if payoff.iter().chain(&offset).any(|x| !x.is_finite()) {
            return Err(Error::arg("game entries must be finite"));
        }
        Ok(Self {
            rows,
            cols,
            payoff,
            offset,
        })
    }

    pub fn from_rows(matrix: &[Vec<f64>], offset: Vec<f64>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        if let Some(r) = matrix.iter().position(|r| r.len() != cols) {
            return Err(Error::arg(format!("payoff row {r} has inconsistent length")));
        }
        Self::new(rows, cols, matrix.concat(), offset)
    }

    /// `[[1, −1], [−1, 1]]` with `a = 0`; unique equilibrium at the uniform pair.
    pub fn matching_pennies() -> Self {
        Self::new(2, 2, vec![1.0, -1.0, -1.0, 1.0], vec![0.0, 0.0]).unwrap()
    }

    /// Entries i.i.d. uniform on `[−1, 1]`, `a = 0`.
    pub fn random_uniform(rows: usize, cols: usize, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, &[tag::GAME, rows as u64, cols as u64]);
        let payoff = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        Self::new(rows, cols, payoff, vec![0.0; rows])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols + j]
    }

    pub fn payoff(&self) -> &[f64] {
        &self.payoff
    }

    pub fn offset(&self) -> &[f64] {
        &self.offset
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.payoff.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Sup-norm bound on both gradients over the simplex, `‖a‖∞ + max|A_ij|`.
    pub fn gradient_bound(&self) -> f64 {
        self.offset.iter().fold(0.0f64, |m, x| m.max(x.abs())) + self.max_abs_entry()
    }

    /// Lipschitz constant of the gradient field with TV on the input side.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.max_abs_entry()
    }

    pub fn objective(&self, p: &SimplexVector, q: &SimplexVector) -> Result<f64> {
        check_dim("objective p", self.cols, p.len())?;
        check_dim("objective q", self.rows, q.len())?;
        let mut ap = vec![0.0; self.rows];
        self.mul_into(p.as_slice(), &mut ap);
        Ok(dot(q.as_slice(), &self.offset) - dot(q.as_slice(), &ap))
    }

    fn mul_into(&self, p: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.payoff[i * self.cols..(i + 1) * self.cols];
            *o = dot(row, p);
        }
    }

    fn mul_t_into(&self, q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &qi) in q.iter().enumerate() {
            let row = &self.payoff[i * self.cols..(i + 1) * self.cols];
            for (o, aij) in out.iter_mut().zip(row) {
                *o += qi * aij;
            }
        }
    }

    /// `−Aᵀq` on raw slices; `out` has length `cols`.
    pub(crate) fn grad_p_into(&self, q: &[f64], out: &mut [f64]) {
        self.mul_t_into(q, out);
        out.iter_mut().for_each(|o| *o = -*o);
    }

    /// `−a + A p` on raw slices; `out` has length `rows`.
    pub(crate) fn grad_q_into(&self, p: &[f64], out: &mut [f64]) {
        self.mul_into(p, out);
        for (o, a) in out.iter_mut().zip(&self.offset) {
            *o -= a;
        }
    }

    pub fn grad_p(&self, q: &SimplexVector) -> Result<Vec<f64>> {
        check_dim("grad_p", self.rows, q.len())?;
        let mut out = vec![0.0; self.cols];
        self.grad_p_into(q.as_slice(), &mut out);
        Ok(out)
    }

    pub fn grad_q(&self, p: &SimplexVector) -> Result<Vec<f64>> {
        check_dim("grad_q", self.cols, p.len())?;
        let mut out = vec![0.0; self.rows];
        self.grad_q_into(p.as_slice(), &mut out);
        Ok(out)
    }

    pub(crate) fn gap_raw(&self, p: &[f64], q: &[f64]) -> f64 {
        let mut ap = vec![0.0; self.rows];
        self.mul_into(p, &mut ap);
        let best_row = self
            .offset
            .iter()
            .zip(&ap)
            .map(|(a, x)| a - x)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut atq = vec![0.0; self.cols];
        self.mul_t_into(q, &mut atq);
        let best_col = atq.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        best_row + best_col - dot(q, &self.offset)
    }

    /// `max_q' F(p, q') − min_p' F(p', q)`, evaluated exactly at vertices.
    pub fn duality_gap(&self, p: &SimplexVector, q: &SimplexVector) -> Result<f64> {
        check_dim("duality_gap p", self.cols, p.len())?;
        check_dim("duality_gap q", self.rows, q.len())?;
        Ok(self.gap_raw(p.as_slice(), q.as_slice()))
    }

    /// Parse the text format: `m n`, then `m` rows of `A`, then `a`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_row = |line: usize, s: &str| -> Result<Vec<f64>> {
            s.split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        line,
                        message: format!("bad number {tok:?}: {e}"),
                    })
                })
                .collect()
        };
        let (hl, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty game file".into(),
        })?;
        let dims: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse {
                line: hl,
                message: format!("header must be `m n`: {e}"),
            })?;
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: hl,
                message: "header must be `m n`".into(),
            });
        }
        let (m, n) = (dims[0], dims[1]);
        let mut matrix = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, l) = lines.next().ok_or(Error::Parse {
                line: hl,
                message: format!("expected {m} matrix rows"),
            })?;
            let row = parse_row(ln, l)?;
            if row.len() != n {
                return Err(Error::Parse {
                    line: ln,
                    message: format!("expected {n} entries, found {}", row.len()),
                });
            }
            matrix.push(row);
        }
        let (ln, l) = lines.next().ok_or(Error::Parse {
            line: hl,
            message: "missing offset vector".into(),
        })?;
        let offset = parse_row(ln, l)?;
        if offset.len() != m {
            return Err(Error::Parse {
                line: ln,
                message: format!("offset vector needs {m} entries, found {}", offset.len()),
            });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(Error::Parse {
                line: ln,
                message: "trailing content after offset vector".into(),
            });
        }
        Self::from_rows(&matrix, offset)
    }

    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let _ = writeln!(out, "{}", join(&self.payoff[i * self.cols..(i + 1) * self.cols]));
        }
        let _ = writeln!(out, "{}", join(&self.offset));
        out
    }
}

/// Additive i.i.d. uniform noise on every gradient coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticOracleConfig {
    pub noise_bound: f64,
    pub seed: u64,
}

impl StochasticOracleConfig {
    pub fn new(noise_bound: f64, seed: u64) -> Result<Self> {
        if !(noise_bound >= 0.0 && noise_bound.is_finite()) {
            return Err(Error::arg(format!(
                "noise_bound must be finite and >= 0, got {noise_bound}"
            )));
        }
        Ok(Self { noise_bound, seed })
    }

    /// Per-coordinate variance of the noise.
    pub fn variance(&self) -> f64 {
        self.noise_bound * self.noise_bound / 3.0
    }

    /// Perturb both gradients in place with the noise of oracle call `t`.
    pub(crate) fn perturb(&self, t: u64, gp: &mut [f64], gq: &mut [f64]) {
        if self.noise_bound == 0.0 {
            return;
        }
        let mut rng = rng::stream(self.seed, &[tag::ORACLE_NOISE, t]);
        let b = self.noise_bound;
        for g in gp.iter_mut().chain(gq.iter_mut()) {
            *g += b * (2.0 * rng.random::<f64>() - 1.0);
        }
    }
}

/// Unbiased noisy gradients `(grad_p + ξ_p, grad_q + ξ_q)` for oracle call `t`.
pub fn stochastic_grads(
    game: &MatrixGame,
    p: &SimplexVector,
    q: &SimplexVector,
    cfg: &StochasticOracleConfig,
    t: u64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut gp = game.grad_p(q)?;
    let mut gq = game.grad_q(p)?;
    cfg.perturb(t, &mut gp, &mut gq);
    Ok((gp, gq))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub p: SimplexVector,
    pub q: SimplexVector,
    pub value: f64,
}

/// Largest side accepted by [`brute_force_ne`].
pub const BRUTE_FORCE_MAX_DIM: usize = 5;

const PIVOT_TOL: f64 = 1e-12;
const FEAS_TOL: f64 = 1e-9;

/// Exact equilibrium by support enumeration over equal-size support pairs.
///
/// For each pair `(S_q, S_p)` the column strategy makes every row in `S_q`
/// equally good for the row player, and the row strategy makes every column
/// in `S_p` equally good for the column player. A candidate is accepted when
/// both are nonnegative and no pure strategy outside the supports does
/// better.
pub fn brute_force_ne(game: &MatrixGame) -> Result<Equilibrium> {
    let (m, n) = (game.rows, game.cols);
    if m > BRUTE_FORCE_MAX_DIM || n > BRUTE_FORCE_MAX_DIM {
        return Err(Error::Unsupported(format!(
            "support enumeration limited to {BRUTE_FORCE_MAX_DIM}x{BRUTE_FORCE_MAX_DIM}, got {m}x{n}"
        )));
    }
    for k in 1..=m.min(n) {
        for sq in subsets(m, k) {
            for sp in subsets(n, k) {
                if let Some(eq) = try_support(game, &sq, &sp) {
                    return Ok(eq);
                }
            }
        }
    }
    Err(Error::numerical(
        "brute_force_ne",
        "no equal-support equilibrium found (degenerate game)",
    ))
}

fn try_support(game: &MatrixGame, sq: &[usize], sp: &[usize]) -> Option<Equilibrium> {
    let k = sq.len();
    // Column player: (a − A p)_i = v for i ∈ S_q, Σ p = 1. Unknowns p_S, v.
    let mut sys = vec![vec![0.0; k + 2]; k + 1];
    for (r, &i) in sq.iter().enumerate() {
        for (c, &j) in sp.iter().enumerate() {
            sys[r][c] = game.entry(i, j);
        }
        sys[r][k] = 1.0;
        sys[r][k + 1] = game.offset[i];
    }
    sys[k][..k].iter_mut().for_each(|x| *x = 1.0);
    sys[k][k + 1] = 1.0;
    let sol_p = solve_dense(sys)?;

    // Row player: (Aᵀ q)_j = u for j ∈ S_p, Σ q = 1. Unknowns q_S, u.
    let mut sys = vec![vec![0.0; k + 2]; k + 1];
    for (r, &j) in sp.iter().enumerate() {
        for (c, &i) in sq.iter().enumerate() {
            sys[r][c] = game.entry(i, j);
        }
        sys[r][k] = -1.0;
    }
    sys[k][..k].iter_mut().for_each(|x| *x = 1.0);
    sys[k][k + 1] = 1.0;
    let sol_q = solve_dense(sys)?;

    if sol_p[..k].iter().chain(&sol_q[..k]).any(|&x| x < -FEAS_TOL) {
        return None;
    }
    let mut p = vec![0.0; game.cols];
    for (c, &j) in sp.iter().enumerate() {
        p[j] = sol_p[c].max(0.0);
    }
    let mut q = vec![0.0; game.rows];
    for (c, &i) in sq.iter().enumerate() {
        q[i] = sol_q[c].max(0.0);
    }
    let p = SimplexVector::normalized(p).ok()?;
    let q = SimplexVector::normalized(q).ok()?;
    if game.gap_raw(p.as_slice(), q.as_slice()) > FEAS_TOL {
        return None;
    }
    let value = game.objective(&p, &q).ok()?;
    Some(Equilibrium { p, q, value })
}

/// Gaussian elimination with partial pivoting on an augmented square system.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        if a[piv][col].abs() < PIVOT_TOL {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    (0u32..1 << n)
        .filter(|mask| mask.count_ones() as usize == k)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sv(v: &[f64]) -> SimplexVector {
        SimplexVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn gradient_examples() {
        let id = MatrixGame::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        assert_eq!(id.grad_p(&sv(&[1.0, 0.0])).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(id.grad_q(&sv(&[0.0, 1.0])).unwrap(), vec![0.0, 1.0]);

        let mp = MatrixGame::matching_pennies();
        assert_eq!(mp.grad_p(&SimplexVector::uniform(2)).unwrap(), vec![0.0, 0.0]);
        assert_eq!(mp.grad_q(&sv(&[1.0, 0.0])).unwrap(), vec![1.0, -1.0]);

        let zero = MatrixGame::new(2, 3, vec![0.0; 6], vec![0.5, -2.0]).unwrap();
        assert_eq!(zero.grad_q(&SimplexVector::uniform(3)).unwrap(), vec![-0.5, 2.0]);
    }

    #[test]
    fn grad_p_at_uniform_is_negated_column_means() {
        let g = MatrixGame::random_uniform(4, 3, 11).unwrap();
        let got = g.grad_p(&SimplexVector::uniform(4)).unwrap();
        for (j, gj) in got.iter().enumerate() {
            let mean = (0..4).map(|i| g.entry(i, j)).sum::<f64>() / 4.0;
            assert!((gj + mean).abs() < 1e-15);
        }
    }

    #[test]
    fn gap_examples() {
        let mp = MatrixGame::matching_pennies();
        let u = SimplexVector::uniform(2);
        assert_eq!(mp.duality_gap(&u, &u).unwrap(), 0.0);
        let e = sv(&[1.0, 0.0]);
        assert_eq!(mp.duality_gap(&e, &e).unwrap(), 2.0);
        let zero = MatrixGame::new(2, 2, vec![0.0; 4], vec![0.0; 2]).unwrap();
        assert_eq!(zero.duality_gap(&sv(&[0.3, 0.7]), &e).unwrap(), 0.0);
        assert!(mp.duality_gap(&sv(&[1.0, 0.0, 0.0]), &u).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let eq = brute_force_ne(&MatrixGame::matching_pennies()).unwrap();
        assert!((eq.p[0] - 0.5).abs() < 1e-12 && (eq.q[0] - 0.5).abs() < 1e-12);
        assert!(eq.value.abs() < 1e-12);

        let g = MatrixGame::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]).unwrap();
        let eq = brute_force_ne(&g).unwrap();
        assert!((eq.p[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((eq.q[0] - 1.0 / 3.0).abs() < 1e-12);
        assert!((eq.value + 2.0 / 3.0).abs() < 1e-12);

        let g = MatrixGame::new(2, 2, vec![0.0; 4], vec![1.0, 0.0]).unwrap();
        let eq = brute_force_ne(&g).unwrap();
        assert_eq!(eq.q.as_slice(), &[1.0, 0.0]);
        assert!((eq.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn brute_force_rejects_large_games() {
        let g = MatrixGame::random_uniform(6, 2, 0).unwrap();
        assert!(matches!(brute_force_ne(&g), Err(Error::Unsupported(_))));
    }

    #[test]
    fn noise_free_oracle_is_exact() {
        let g = MatrixGame::random_uniform(3, 4, 5).unwrap();
        let (p, q) = (SimplexVector::uniform(4), SimplexVector::uniform(3));
        let cfg = StochasticOracleConfig::new(0.0, 9).unwrap();
        let (gp, gq) = stochastic_grads(&g, &p, &q, &cfg, 3).unwrap();
        assert_eq!(gp, g.grad_p(&q).unwrap());
        assert_eq!(gq, g.grad_q(&p).unwrap());
    }

    #[test]
    fn oracle_is_reproducible() {
        let g = MatrixGame::random_uniform(3, 4, 5).unwrap();
        let (p, q) = (SimplexVector::uniform(4), SimplexVector::uniform(3));
        let cfg = StochasticOracleConfig::new(0.5, 42).unwrap();
        let a = stochastic_grads(&g, &p, &q, &cfg, 7).unwrap();
        let b = stochastic_grads(&g, &p, &q, &cfg, 7).unwrap();
        assert_eq!(a, b);
        let c = stochastic_grads(&g, &p, &q, &cfg, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn text_round_trip() {
        let g = MatrixGame::random_uniform(3, 2, 1).unwrap();
        assert_eq!(MatrixGame::parse(&g.to_text()).unwrap(), g);
        let err = MatrixGame::parse("2 2\n1 0\n0 x\n0 0\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
        assert!(MatrixGame::parse("2 2\n1 0\n0 1\n").is_err());
    }
}
