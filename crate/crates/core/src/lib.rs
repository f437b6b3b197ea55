//! Mixed-strategy equilibria of two-player zero-sum games via entropic
//! mirror descent and mirror-prox.
//!
//! Three fidelities share one calculus:
//! - [`prox`]: exact finite games ([`MatrixGame`]);
//! - [`grid`]: continuous strategy spaces discretized on periodic grids;
//! - [`particle`]: Langevin-sampled particle approximations.
//!
//! [`harness`] fits empirical rates and checks the theoretical gap bounds.

pub mod entropy;
pub mod error;
pub mod game;
pub mod grid;
pub mod harness;
pub mod particle;
pub mod prox;
pub mod rng;
pub mod sgld;

pub use entropy::{
    entropy, kl_divergence, log_sum_exp, md_update, softmax, tv_norm, LogWeights, SimplexVector,
};
pub use error::{Error, Result};
pub use game::{brute_force_ne, stochastic_grads, Equilibrium, MatrixGame, StochasticOracleConfig};
pub use grid::{GridDensity, GridDomain, Kernel, KernelGame, Offset};
pub use harness::{check_bounds, fit_rate, BoundKind, Radius, RateFit, RateReport};
pub use particle::{
    approx_inf_md, approx_inf_mp, mirror_gan, mirror_prox_gan, ParticleConfig, ParticleEnsemble,
    ToyGame,
};
pub use prox::{
    solve_md, solve_mp, BoundConstants, Oracle, ProxTrace, SolveOptions, StepSizeRule,
    TraceRecord,
};
pub use sgld::{preconditioned_sgld_step, sgld_step, LangevinState, SgldSchedule};
