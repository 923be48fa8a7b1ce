//! Discrete Riesz potentials `I_alpha * f`.
//!
//! Two discretizations are provided:
//!
//! * [`KernelMode::TruncatedKernel`] samples `A_alpha |x|^(alpha - N)` on the
//!   box doubled per axis and convolves through zero padding, so the result is
//!   the free-space (non-circular) convolution of a field supported in the box.
//!   The singular origin cell carries the mean of the kernel over the ball of
//!   volume `h^N`.
//! * [`KernelMode::Spectral`] applies the symbol `|k|^(-alpha)` on the periodic
//!   box itself, with the zero mode removed. It is an exact Fourier multiplier,
//!   so `I_(alpha/2) * I_(alpha/2) = I_alpha` holds to rounding and the bracket
//!   `D(u)` is a sum of squares.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{Field, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    TruncatedKernel,
    Spectral,
}

/// `Gamma((N - alpha)/2) / (Gamma(alpha/2) pi^(N/2) 2^alpha)`.
pub fn riesz_constant(dim: usize, alpha: f64) -> f64 {
    let n = dim as f64;
    gamma(0.5 * (n - alpha)) / (gamma(0.5 * alpha) * PI.powf(0.5 * n) * 2f64.powf(alpha))
}

/// Volume of the unit ball in `dim` dimensions.
pub fn unit_ball_volume(dim: usize) -> f64 {
    let n = dim as f64;
    PI.powf(0.5 * n) / gamma(0.5 * n + 1.0)
}

#[derive(Clone, Debug)]
pub struct RieszKernel {
    grid: Grid,
    alpha: f64,
    mode: KernelMode,
    a_alpha: f64,
    /// Real symbol on the transform grid (padded box or the box itself).
    multiplier: Vec<f64>,
}

impl RieszKernel {
    pub fn build(grid: Grid, alpha: f64, mode: KernelMode) -> Result<Self> {
        let n = grid.dim() as f64;
        if !(alpha > 0.0 && alpha < n) {
            return Err(Error::InvalidParams(format!(
                "alpha = {alpha} must lie in (0, {})",
                grid.dim()
            )));
        }
        let a_alpha = riesz_constant(grid.dim(), alpha);
        let multiplier = match mode {
            KernelMode::Spectral => grid
                .k_squared()
                .into_iter()
                .map(|k2| {
                    if k2 == 0.0 {
                        0.0
                    } else {
                        k2.powf(-0.5 * alpha)
                    }
                })
                .collect(),
            KernelMode::TruncatedKernel => truncated_multiplier(&grid, alpha, a_alpha),
        };
        Ok(RieszKernel {
            grid,
            alpha,
            mode,
            a_alpha,
            multiplier,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn mode(&self) -> KernelMode {
        self.mode
    }

    pub fn a_alpha(&self) -> f64 {
        self.a_alpha
    }

    pub fn multiplier(&self) -> &[f64] {
        &self.multiplier
    }

    /// Kernel of order `alpha / 2` on the same grid and mode.
    pub fn half(&self) -> Result<Self> {
        Self::build(self.grid, 0.5 * self.alpha, self.mode)
    }

    fn transform_grid(&self) -> Grid {
        match self.mode {
            KernelMode::Spectral => self.grid,
            KernelMode::TruncatedKernel => self.grid.padded(),
        }
    }

    fn check(&self, f: &Field) -> Result<()> {
        if *f.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `I_alpha * f` restricted to the box.
    pub fn convolve(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let mut z = self.lift(f.values(), None);
        self.apply(&mut z);
        Ok(self.restrict(&z).0)
    }

    /// Two convolutions for the price of one complex transform.
    pub fn convolve_pair(&self, f: &Field, g: &Field) -> Result<(Field, Field)> {
        self.check(f)?;
        self.check(g)?;
        let mut z = self.lift(f.values(), Some(g.values()));
        self.apply(&mut z);
        Ok(self.restrict(&z))
    }

    /// `int (I_alpha * |u|^p) |w|^p` as a trapezoid sum.
    pub fn choquard_term(&self, p: f64, u: &Field, weight: &Field) -> Result<f64> {
        self.check(u)?;
        self.check(weight)?;
        let fu = u.map(|v| v.abs().powf(p));
        let fw = weight.map(|v| v.abs().powf(p));
        self.convolve(&fu)?.l2_inner(&fw)
    }

    fn lift(&self, re: &[f64], im: Option<&[f64]>) -> Vec<Complex64> {
        let tg = self.transform_grid();
        let value = |i: usize| Complex64::new(re[i], im.map_or(0.0, |v| v[i]));
        if tg == self.grid {
            return (0..re.len()).map(value).collect();
        }
        let mut z = vec![Complex64::default(); tg.len()];
        for i in 0..self.grid.len() {
            let idx = self.grid.multi_index(i);
            z[tg.flat_index(&idx)] = value(i);
        }
        z
    }

    fn apply(&self, z: &mut [Complex64]) {
        let tg = self.transform_grid();
        let plan = fft::plan(tg.dim(), tg.n());
        plan.forward(z);
        for (zk, m) in z.iter_mut().zip(&self.multiplier) {
            *zk *= *m;
        }
        plan.inverse(z);
    }

    fn restrict(&self, z: &[Complex64]) -> (Field, Field) {
        let tg = self.transform_grid();
        let g = self.grid;
        let pick = |i: usize| {
            if tg == g {
                z[i]
            } else {
                z[tg.flat_index(&g.multi_index(i))]
            }
        };
        let re = (0..g.len()).map(|i| pick(i).re).collect();
        let im = (0..g.len()).map(|i| pick(i).im).collect();
        (Field::from_raw(g, re), Field::from_raw(g, im))
    }
}

/// `h^N` times the DFT of the sampled kernel on the doubled box.
fn truncated_multiplier(grid: &Grid, alpha: f64, a_alpha: f64) -> Vec<f64> {
    let dim = grid.dim();
    let nd = dim as f64;
    let h = grid.spacing();
    let tg = grid.padded();
    let m = tg.n();
    // mean of A |x|^(alpha - N) over the ball of volume h^N
    let radius = h / unit_ball_volume(dim).powf(1.0 / nd);
    let origin = a_alpha * nd / alpha * radius.powf(alpha - nd);
    let mut z = vec![Complex64::default(); tg.len()];
    for (flat, zk) in z.iter_mut().enumerate() {
        let idx = tg.multi_index(flat);
        let r2: f64 = idx[..dim]
            .iter()
            .map(|&j| {
                let d = j.min(m - j) as f64 * h;
                d * d
            })
            .sum();
        let value = if r2 == 0.0 {
            origin
        } else {
            a_alpha * r2.powf(0.5 * (alpha - nd))
        };
        *zk = Complex64::new(value, 0.0);
    }
    fft::plan(dim, m).forward(&mut z);
    let cell = grid.cell_volume();
    z.iter().map(|c| c.re * cell).collect()
}
