use serde::{Deserialize, Serialize};

use super::{GridDomain, wrap};
use crate::error::{check_dim, Error, Result};
use crate::game::MatrixGame;

/// Payoff kernel `K(w, θ)` in closed form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Kernel {
    /// `a · Σ_d cos(f·(w_d − θ_d))`
    Cosine { amplitude: f64, frequency: f64 },
    /// `a · exp(−|w − θ|² / (2s²))` with the periodic distance.
    GaussianBump { amplitude: f64, width: f64 },
    Constant { value: f64 },
    /// `K(i, j) = values[i·cols + j]` on lookup domains.
    Lookup {
        rows: usize,
        cols: usize,
        values: Vec<f64>,
    },
}

/// The real-data term `g(w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Offset {
    Zero,
    Constant { value: f64 },
    /// `a · Σ_d cos(f·(w_d − φ))`
    Cosine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    Lookup { values: Vec<f64> },
}

fn centered(d: f64, period: f64) -> f64 {
    let r = wrap(d, period);
    if r >= 0.5 * period {
        r - period
    } else {
        r
    }
}

impl Kernel {
    pub fn cosine() -> Self {
        Kernel::Cosine {
            amplitude: 1.0,
            frequency: 1.0,
        }
    }

    fn sup(&self, dims: usize) -> f64 {
        match self {
            Kernel::Cosine { amplitude, .. } => amplitude.abs() * dims as f64,
            Kernel::GaussianBump { amplitude, .. } => amplitude.abs(),
            Kernel::Constant { value } => value.abs(),
            Kernel::Lookup { values, .. } => values.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Kernel::Cosine { amplitude, frequency } => amplitude.is_finite() && frequency.is_finite(),
            Kernel::GaussianBump { amplitude, width } => amplitude.is_finite() && *width > 0.0,
            Kernel::Constant { value } => value.is_finite(),
            Kernel::Lookup { rows, cols, values } => {
                values.len() == rows * cols && values.iter().all(|v| v.is_finite())
            }
        };
        if !ok {
            return Err(Error::arg(format!("invalid kernel parameters: {self:?}")));
        }
        Ok(())
    }
}

impl Offset {
    fn sup(&self, dims: usize) -> f64 {
        match self {
            Offset::Zero => 0.0,
            Offset::Constant { value } => value.abs(),
            Offset::Cosine { amplitude, .. } => amplitude.abs() * dims as f64,
            Offset::Lookup { values } => values.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// A zero-sum game over two (discretized) continuous strategy spaces.
///
/// `w` ranges over the maximizing player's domain and `θ` over the
/// minimizing player's. The kernel is tabulated once on the grid pair.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelGame {
    kernel: Kernel,
    offset: Offset,
    w_domain: GridDomain,
    theta_domain: GridDomain,
    /// Row-major `|W| × |Θ|`.
    table: Vec<f64>,
    offset_values: Vec<f64>,
    sup_kernel: f64,
    sup_offset: f64,
}

impl KernelGame {
    pub fn new(
        kernel: Kernel,
        offset: Offset,
        w_domain: GridDomain,
        theta_domain: GridDomain,
    ) -> Result<Self> {
        kernel.validate()?;
        let lookup = matches!(kernel, Kernel::Lookup { .. });
        if lookup != (w_domain.is_lookup() && theta_domain.is_lookup()) {
            return Err(Error::arg(
                "lookup kernels need lookup domains and analytic kernels need periodic ones",
            ));
        }
        let offset_ok = match offset {
            Offset::Lookup { .. } => w_domain.is_lookup(),
            Offset::Cosine { .. } => !w_domain.is_lookup(),
            Offset::Zero | Offset::Constant { .. } => true,
        };
        if !offset_ok {
            return Err(Error::arg("offset form does not match the domain kind"));
        }
        if !lookup && w_domain.dims() != theta_domain.dims() {
            return Err(Error::arg("analytic kernels need domains of equal dimension"));
        }
        if !lookup && w_domain.extent() != theta_domain.extent() {
            return Err(Error::arg("analytic kernels need domains of equal extent"));
        }
        let (nw, nt) = (w_domain.len(), theta_domain.len());
        if let Kernel::Lookup { rows, cols, .. } = &kernel {
            check_dim("lookup kernel rows", nw, *rows)?;
            check_dim("lookup kernel cols", nt, *cols)?;
        }
        if let Offset::Lookup { values } = &offset {
            check_dim("lookup offset", nw, values.len())?;
        }
        let mut game = Self {
            sup_kernel: kernel.sup(w_domain.dims()),
            sup_offset: offset.sup(w_domain.dims()),
            kernel,
            offset,
            w_domain,
            theta_domain,
            table: Vec::new(),
            offset_values: Vec::new(),
        };
        game.table = match &game.kernel {
            Kernel::Lookup { values, .. } => values.clone(),
            _ => {
                let mut t = Vec::with_capacity(nw * nt);
                for i in 0..nw {
                    let w = w_domain.point(i);
                    for j in 0..nt {
                        t.push(game.kernel_at(&w, &theta_domain.point(j)));
                    }
                }
                t
            }
        };
        game.offset_values = match &game.offset {
            Offset::Lookup { values } => values.clone(),
            _ => (0..nw).map(|i| game.offset_at(&w_domain.point(i))).collect(),
        };
        Ok(game)
    }

    /// `K = cos(w − θ)`, `g = 0` on a pair of `points`-cell circles.
    pub fn cosine_torus(points: usize) -> Result<Self> {
        let d = GridDomain::torus(points)?;
        Self::new(Kernel::cosine(), Offset::Zero, d, d)
    }

    /// Embed a finite game: `K(i, j) = A_ij`, `g(i) = a_i` on unit-volume cells.
    pub fn from_matrix_game(game: &MatrixGame) -> Result<Self> {
        Self::new(
            Kernel::Lookup {
                rows: game.rows(),
                cols: game.cols(),
                values: game.payoff().to_vec(),
            },
            Offset::Lookup {
                values: game.offset().to_vec(),
            },
            GridDomain::lookup(game.rows())?,
            GridDomain::lookup(game.cols())?,
        )
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn offset(&self) -> &Offset {
        &self.offset
    }

    pub fn w_domain(&self) -> &GridDomain {
        &self.w_domain
    }

    pub fn theta_domain(&self) -> &GridDomain {
        &self.theta_domain
    }

    pub fn dims(&self) -> usize {
        self.w_domain.dims()
    }

    pub fn sup_kernel(&self) -> f64 {
        self.sup_kernel
    }

    pub fn sup_offset(&self) -> f64 {
        self.sup_offset
    }

    /// `M = sup|g| + sup|K|`.
    pub fn gradient_bound(&self) -> f64 {
        self.sup_offset + self.sup_kernel
    }

    /// `L = 2·sup|K|` under the half-ℓ1 TV convention.
    pub fn lipschitz(&self) -> f64 {
        2.0 * self.sup_kernel
    }

    pub(crate) fn table(&self) -> &[f64] {
        &self.table
    }

    pub(crate) fn offset_values(&self) -> &[f64] {
        &self.offset_values
    }

    fn period(&self) -> f64 {
        self.w_domain.extent()
    }

    /// `K(w, θ)` at arbitrary coordinates (not just grid points).
    pub fn kernel_at(&self, w: &[f64], theta: &[f64]) -> f64 {
        let dims = self.dims();
        match &self.kernel {
            Kernel::Cosine {
                amplitude,
                frequency,
            } => (0..dims)
                .map(|d| amplitude * (frequency * (w[d] - theta[d])).cos())
                .sum(),
            Kernel::GaussianBump { amplitude, width } => {
                let r2: f64 = (0..dims)
                    .map(|d| centered(w[d] - theta[d], self.period()).powi(2))
                    .sum();
                amplitude * (-r2 / (2.0 * width * width)).exp()
            }
            Kernel::Constant { value } => *value,
            Kernel::Lookup { cols, values, .. } => {
                values[w[0].round() as usize * cols + theta[0].round() as usize]
            }
        }
    }

    pub fn offset_at(&self, w: &[f64]) -> f64 {
        match &self.offset {
            Offset::Zero => 0.0,
            Offset::Constant { value } => *value,
            Offset::Cosine {
                amplitude,
                frequency,
                phase,
            } => (0..self.dims())
                .map(|d| amplitude * (frequency * (w[d] - phase)).cos())
                .sum(),
            Offset::Lookup { values } => values[w[0].round() as usize],
        }
    }

    /// `∇_w K(w, θ)` written into `out[..dims]`.
    pub fn kernel_grad_w(&self, w: &[f64], theta: &[f64], out: &mut [f64]) -> Result<()> {
        let dims = self.dims();
        match &self.kernel {
            Kernel::Cosine {
                amplitude,
                frequency,
            } => {
                for d in 0..dims {
                    out[d] = -amplitude * frequency * (frequency * (w[d] - theta[d])).sin();
                }
            }
            Kernel::GaussianBump { width, .. } => {
                let k = self.kernel_at(w, theta);
                for d in 0..dims {
                    out[d] = -k * centered(w[d] - theta[d], self.period()) / (width * width);
                }
            }
            Kernel::Constant { .. } => out[..dims].iter_mut().for_each(|o| *o = 0.0),
            Kernel::Lookup { .. } => {
                return Err(Error::Unsupported("lookup kernels have no gradient".into()))
            }
        }
        Ok(())
    }

    /// `∇_θ K(w, θ)`; every analytic kernel here depends on `w − θ` only.
    pub fn kernel_grad_theta(&self, w: &[f64], theta: &[f64], out: &mut [f64]) -> Result<()> {
        self.kernel_grad_w(w, theta, out)?;
        out[..self.dims()].iter_mut().for_each(|o| *o = -*o);
        Ok(())
    }

    pub fn offset_grad(&self, w: &[f64], out: &mut [f64]) -> Result<()> {
        let dims = self.dims();
        match &self.offset {
            Offset::Zero | Offset::Constant { .. } => {
                out[..dims].iter_mut().for_each(|o| *o = 0.0)
            }
            Offset::Cosine {
                amplitude,
                frequency,
                phase,
            } => {
                for d in 0..dims {
                    out[d] = -amplitude * frequency * (frequency * (w[d] - phase)).sin();
                }
            }
            Offset::Lookup { .. } => {
                return Err(Error::Unsupported("lookup offsets have no gradient".into()))
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-6;
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let d = GridDomain::torus(16).unwrap();
        let games = [
            KernelGame::new(
                Kernel::Cosine { amplitude: 0.7, frequency: 2.0 },
                Offset::Cosine { amplitude: 0.5, frequency: 1.0, phase: 0.3 },
                d,
                d,
            )
            .unwrap(),
            KernelGame::new(
                Kernel::GaussianBump { amplitude: 1.5, width: 0.6 },
                Offset::Zero,
                d,
                d,
            )
            .unwrap(),
        ];
        for g in &games {
            for &(w, th) in &[(0.4, 1.9), (5.9, 0.2), (3.0, 3.1)] {
                let mut out = [0.0];
                g.kernel_grad_w(&[w], &[th], &mut out).unwrap();
                let fd = numeric_grad(|x| g.kernel_at(&[x], &[th]), w);
                assert!((out[0] - fd).abs() < 1e-6, "{out:?} vs {fd}");
                g.kernel_grad_theta(&[w], &[th], &mut out).unwrap();
                let fd = numeric_grad(|x| g.kernel_at(&[w], &[x]), th);
                assert!((out[0] - fd).abs() < 1e-6);
                g.offset_grad(&[w], &mut out).unwrap();
                let fd = numeric_grad(|x| g.offset_at(&[x]), w);
                assert!((out[0] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn bump_uses_periodic_distance() {
        let d = GridDomain::torus(16).unwrap();
        let g = KernelGame::new(
            Kernel::GaussianBump { amplitude: 1.0, width: 0.5 },
            Offset::Zero,
            d,
            d,
        )
        .unwrap();
        let near = g.kernel_at(&[0.05], &[std::f64::consts::TAU - 0.05]);
        assert!((near - (-0.01f64 / 0.5).exp()).abs() < 1e-12);
    }

    #[test]
    fn sup_bounds_hold_on_grid() {
        let d = GridDomain::periodic(2, 8, std::f64::consts::TAU).unwrap();
        let g = KernelGame::new(Kernel::cosine(), Offset::Zero, d, d).unwrap();
        assert_eq!(g.sup_kernel(), 2.0);
        assert!(g.table().iter().all(|k| k.abs() <= g.sup_kernel() + 1e-12));
    }

    #[test]
    fn lookup_requires_lookup_domains() {
        let d = GridDomain::torus(8).unwrap();
        let k = Kernel::Lookup { rows: 8, cols: 8, values: vec![0.0; 64] };
        assert!(KernelGame::new(k, Offset::Zero, d, d).is_err());
        let mg = MatrixGame::matching_pennies();
        let g = KernelGame::from_matrix_game(&mg).unwrap();
        assert_eq!(g.kernel_at(&[1.0], &[0.0]), -1.0);
        assert_eq!(g.lipschitz(), mg.lipschitz());
        assert_eq!(g.gradient_bound(), mg.gradient_bound());
    }
}
