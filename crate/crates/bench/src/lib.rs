//! Fixtures shared by the benchmarks.

use mixnash::{GridDensity, KernelGame, MatrixGame, SimplexVector};

/// A random `n × n` game with the uniform starting pair.
pub fn square_game(n: usize) -> (MatrixGame, SimplexVector, SimplexVector) {
    let g = MatrixGame::random_uniform(n, n, 7).expect("valid size");
    (g, SimplexVector::uniform(n), SimplexVector::uniform(n))
}

/// Cosine game on a `points`-cell circle pair with bump starting densities.
pub fn torus_game(points: usize) -> (KernelGame, GridDensity, GridDensity) {
    let g = KernelGame::cosine_torus(points).expect("valid size");
    let mu = GridDensity::von_mises(*g.w_domain(), &[1.0], 1.0).expect("valid bump");
    let nu = GridDensity::von_mises(*g.theta_domain(), &[2.5], 1.0).expect("valid bump");
    (g, mu, nu)
}
