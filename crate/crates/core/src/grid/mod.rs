//! Continuous strategy spaces discretized on uniform periodic grids.
//!
//! Measures are stored as log-densities against Lebesgue measure and
//! integrated with the midpoint rule: point `i` sits at the center of cell
//! `i` and carries weight equal to the cell volume.

mod foundations;
mod kernel;
mod solve;

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::entropy::lse_unchecked;
use crate::error::{check_dim, Error, Result};

pub use foundations::{foundations_suite, FoundationsReport, ItemReport};
pub use kernel::{Kernel, KernelGame, Offset};
pub use solve::{
    apply_g, apply_gdag, gap_from_masses, grid_constants, grid_duality_gap, md_step_density,
    solve_inf_md, solve_inf_mp, GridTrace,
};

/// Tolerance on `∫ρ = 1` for a [`GridDensity`].
pub const NORMALIZATION_TOL: f64 = 1e-10;

pub const MIN_POINTS_PER_DIM: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridDomain {
    dims: usize,
    points_per_dim: usize,
    extent: f64,
    /// Index-addressed cells of unit volume, used to embed a finite game.
    lookup: bool,
}

impl GridDomain {
    pub fn periodic(dims: usize, points_per_dim: usize, extent: f64) -> Result<Self> {
        if !(1..=2).contains(&dims) {
            return Err(Error::arg(format!("grid dims must be 1 or 2, got {dims}")));
        }
        if points_per_dim < MIN_POINTS_PER_DIM {
            return Err(Error::arg(format!(
                "grid needs at least {MIN_POINTS_PER_DIM} points per dim, got {points_per_dim}"
            )));
        }
        if !(extent > 0.0 && extent.is_finite()) {
            return Err(Error::arg(format!("grid extent must be positive, got {extent}")));
        }
        Ok(Self {
            dims,
            points_per_dim,
            extent,
            lookup: false,
        })
    }

    /// The circle `[0, 2π)` with `points` cells.
    pub fn torus(points: usize) -> Result<Self> {
        Self::periodic(1, points, TAU)
    }

    /// `size` unit-volume cells addressed by index. Coordinates are the
    /// indices themselves; any size ≥ 1 is allowed.
    pub fn lookup(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::arg("lookup domain needs at least one cell"));
        }
        Ok(Self {
            dims: 1,
            points_per_dim: size,
            extent: size as f64,
            lookup: true,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn points_per_dim(&self) -> usize {
        self.points_per_dim
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn is_lookup(&self) -> bool {
        self.lookup
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.points_per_dim as f64
    }

    pub fn cell_volume(&self) -> f64 {
        if self.lookup {
            1.0
        } else {
            self.spacing().powi(self.dims as i32)
        }
    }

    pub fn total_volume(&self) -> f64 {
        self.cell_volume() * self.len() as f64
    }

    /// Coordinates of point `i` (row-major in 2-D).
    pub fn point(&self, i: usize) -> [f64; 2] {
        if self.lookup {
            return [i as f64, 0.0];
        }
        let n = self.points_per_dim;
        let h = self.spacing();
        let c = |k: usize| (k as f64 + 0.5) * h;
        match self.dims {
            1 => [c(i), 0.0],
            _ => [c(i / n), c(i % n)],
        }
    }

    pub fn coords(&self, i: usize) -> Vec<f64> {
        self.point(i)[..self.dims].to_vec()
    }

    /// Cell containing `x`, after wrapping into the domain.
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let n = self.points_per_dim;
        let h = self.spacing();
        let idx = |v: f64| (wrap(v, self.extent) / h).floor() as usize % n;
        match self.dims {
            1 => idx(x[0]),
            _ => idx(x[0]) * n + idx(x[1]),
        }
    }

    pub(crate) fn check_same(&self, other: &GridDomain, what: &str) -> Result<()> {
        if self != other {
            return Err(Error::arg(format!("{what}: grid domains differ")));
        }
        Ok(())
    }
}

/// Reduce `x` into `[0, period)`.
pub fn wrap(x: f64, period: f64) -> f64 {
    let r = x.rem_euclid(period);
    // rem_euclid can return `period` itself for tiny negative inputs.
    if r >= period {
        0.0
    } else {
        r
    }
}

/// A positive probability density on a grid, stored as its logarithm.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    domain: GridDomain,
    log_density: Vec<f64>,
}

impl GridDensity {
    pub fn new(domain: GridDomain, log_density: Vec<f64>) -> Result<Self> {
        check_dim("grid density", domain.len(), log_density.len())?;
        if log_density.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid density must be positive and finite everywhere"));
        }
        let mass = (lse_unchecked(&log_density) + domain.cell_volume().ln()).exp();
        if (mass - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::arg(format!("grid density integrates to {mass}, expected 1")));
        }
        Ok(Self {
            domain,
            log_density,
        })
    }

    /// Normalize an arbitrary finite log-weight vector.
    pub fn from_log_unnormalized(domain: GridDomain, mut logw: Vec<f64>) -> Result<Self> {
        check_dim("grid density", domain.len(), logw.len())?;
        if logw.iter().any(|v| !v.is_finite()) {
            return Err(Error::arg("log-weights must be finite"));
        }
        normalize_log(&mut logw, domain.cell_volume());
        Ok(Self {
            domain,
            log_density: logw,
        })
    }

    pub fn uniform(domain: GridDomain) -> Self {
        let v = -domain.total_volume().ln();
        Self {
            domain,
            log_density: vec![v; domain.len()],
        }
    }

    /// Density `∝ exp(κ Σ_d cos(x_d − c_d))`, a von Mises bump per axis.
    pub fn von_mises(domain: GridDomain, center: &[f64], kappa: f64) -> Result<Self> {
        check_dim("von Mises center", domain.dims(), center.len())?;
        let scale = std::f64::consts::TAU / domain.extent();
        let logw = (0..domain.len())
            .map(|i| {
                let x = domain.point(i);
                (0..domain.dims())
                    .map(|d| kappa * (scale * (x[d] - center[d])).cos())
                    .sum()
            })
            .collect();
        Self::from_log_unnormalized(domain, logw)
    }

    /// Density from nonnegative cell masses summing to one.
    pub fn from_masses(domain: GridDomain, masses: &[f64]) -> Result<Self> {
        check_dim("grid masses", domain.len(), masses.len())?;
        let lv = domain.cell_volume().ln();
        Self::from_log_unnormalized(domain, masses.iter().map(|m| m.ln() - lv).collect())
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn density(&self) -> Vec<f64> {
        self.log_density.iter().map(|l| l.exp()).collect()
    }

    /// Cell probabilities `ρ_i · vol`.
    pub fn masses(&self) -> Vec<f64> {
        let v = self.domain.cell_volume();
        self.log_density.iter().map(|l| l.exp() * v).collect()
    }

    /// `∫ f dμ` by the midpoint rule.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        let v = self.domain.cell_volume();
        self.log_density
            .iter()
            .zip(f)
            .map(|(l, fi)| l.exp() * fi)
            .sum::<f64>()
            * v
    }

    pub fn total_mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = match self.domain.dims() {
            1 => String::from("x,density\n"),
            _ => String::from("x0,x1,density\n"),
        };
        for (i, l) in self.log_density.iter().enumerate() {
            let x = self.domain.point(i);
            match self.domain.dims() {
                1 => writeln!(out, "{:?},{:?}", x[0], l.exp()),
                _ => writeln!(out, "{:?},{:?},{:?}", x[0], x[1], l.exp()),
            }
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Shift log-densities so that `Σ exp(l_i) · vol = 1`.
pub(crate) fn normalize_log(logw: &mut [f64], cell_volume: f64) {
    let z = lse_unchecked(logw) + cell_volume.ln();
    logw.iter_mut().for_each(|l| *l -= z);
}

/// Cell masses of a particle sample binned into `bins` equal cells per axis.
pub fn histogram(domain: &GridDomain, bins: usize, particles: &[f64]) -> Result<Vec<f64>> {
    let dims = domain.dims();
    if bins == 0 || domain.is_lookup() {
        return Err(Error::arg("histogram needs a periodic domain and at least one bin"));
    }
    if particles.is_empty() || !particles.len().is_multiple_of(dims) {
        return Err(Error::arg("particle array is empty or ragged"));
    }
    let binned = GridDomain {
        points_per_dim: bins,
        ..*domain
    };
    let mut h = vec![0.0; binned.len()];
    let count = particles.len() / dims;
    for x in particles.chunks(dims) {
        h[binned.cell_of(x)] += 1.0 / count as f64;
    }
    Ok(h)
}

/// Cell masses of a grid density aggregated to `bins` cells per axis.
/// `bins` must divide the grid resolution.
pub fn coarsen(density: &GridDensity, bins: usize) -> Result<Vec<f64>> {
    let d = density.domain();
    let n = d.points_per_dim();
    if bins == 0 || !n.is_multiple_of(bins) {
        return Err(Error::arg(format!("{bins} bins do not divide {n} grid points")));
    }
    let f = n / bins;
    let masses = density.masses();
    let mut out = vec![0.0; bins.pow(d.dims() as u32)];
    for (i, m) in masses.iter().enumerate() {
        let j = match d.dims() {
            1 => i / f,
            _ => (i / n / f) * bins + (i % n) / f,
        };
        out[j] += m;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_weights_sum_to_volume() {
        let d = GridDomain::periodic(2, 16, 3.0).unwrap();
        assert!((d.cell_volume() * d.len() as f64 - 9.0).abs() < 1e-12);
        let u = GridDensity::uniform(d);
        assert!((u.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn domain_validation() {
        assert!(GridDomain::periodic(3, 16, 1.0).is_err());
        assert!(GridDomain::periodic(1, 7, 1.0).is_err());
        assert!(GridDomain::lookup(2).is_ok());
    }

    #[test]
    fn cells_round_trip() {
        let d = GridDomain::periodic(2, 8, TAU).unwrap();
        for i in 0..d.len() {
            assert_eq!(d.cell_of(&d.coords(i)), i);
        }
        assert_eq!(d.cell_of(&[-0.01, TAU + 0.01]), 7 * 8);
    }

    #[test]
    fn density_validation() {
        let d = GridDomain::torus(8).unwrap();
        assert!(GridDensity::new(d, vec![0.0; 8]).is_err());
        assert!(GridDensity::new(d, vec![f64::NEG_INFINITY; 8]).is_err());
        let u = GridDensity::uniform(d);
        assert!(GridDensity::new(d, u.log_density().to_vec()).is_ok());
    }

    #[test]
    fn coarsen_and_histogram_agree_on_point_masses() {
        let d = GridDomain::torus(16).unwrap();
        let masses: Vec<f64> = (0..16).map(|i| if i == 5 { 1.0 - 15e-9 } else { 1e-9 }).collect();
        let rho = GridDensity::from_masses(d, &masses).unwrap();
        let c = coarsen(&rho, 4).unwrap();
        let h = histogram(&d, 4, &d.coords(5)).unwrap();
        for (a, b) in c.iter().zip(&h) {
            assert!((a - b).abs() < 1e-7);
        }
    }
}
