//! Truncated periodic boxes, sampled fields and their spectral calculus.
//!
//! A [`Grid`] is the cube `[-L/2, L/2)^N` sampled at `n` points per axis, with
//! nodes `x_j = -L/2 + j h`. Because `n` is even the origin is the node
//! `j = n/2`. Fields are stored row-major with the last axis contiguous; the
//! last axis is the one along which oddness is imposed.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    dim: usize,
    n: usize,
    extent: f64,
}

impl Grid {
    pub fn new(dim: usize, n: usize, extent: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{n} points per axis is not a power of two >= 4"
            )));
        }
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {extent}")));
        }
        Ok(Grid { dim, n, extent })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn center_index(&self) -> usize {
        self.n / 2
    }

    /// Coordinate of node `j` along any axis.
    pub fn coord(&self, j: usize) -> f64 {
        -0.5 * self.extent + j as f64 * self.spacing()
    }

    /// Per-axis node indices of a flat index, first axis first.
    pub fn multi_index(&self, mut flat: usize) -> [usize; 3] {
        let mut out = [0; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = flat % self.n;
            flat /= self.n;
        }
        out
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx[..self.dim].iter().fold(0, |acc, &j| acc * self.n + j)
    }

    pub fn point(&self, flat: usize) -> [f64; 3] {
        let idx = self.multi_index(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coord(idx[axis]);
        }
        x
    }

    /// Flat index of the image of `flat` under `x_N -> -x_N`.
    pub fn reflect_last(&self, flat: usize) -> usize {
        let j = flat % self.n;
        flat - j + (self.n - j) % self.n
    }

    /// The box doubled per axis with the same spacing.
    pub fn padded(&self) -> Grid {
        Grid {
            dim: self.dim,
            n: 2 * self.n,
            extent: 2.0 * self.extent,
        }
    }

    pub(crate) fn k_squared(&self) -> Vec<f64> {
        fft::wavenumber_sq(self.dim, self.n, self.extent)
    }

    pub(crate) fn wavenumbers(&self) -> Vec<f64> {
        fft::wavenumbers(self.n, self.extent)
    }
}

/// Real samples on a grid.
#[derive(Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl std::fmt::Debug for Field {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Field")
            .field("grid", &self.grid)
            .field("max_abs", &self.max_abs())
            .finish_non_exhaustive()
    }
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Field {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} samples for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Field { grid, values })
    }

    /// Sample `f` at every node; `f` receives the coordinates of the node.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.point(i);
                f(&x[..dim])
            })
            .collect();
        Field { grid, values }
    }

    pub(crate) fn from_raw(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Field { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field::from_raw(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, t: f64) -> Field {
        self.map(|v| t * v)
    }

    /// `self + t * other`.
    pub fn axpy(&self, t: f64, other: &Field) -> Result<Field> {
        self.check_same_grid(other)?;
        Ok(Field::from_raw(
            self.grid,
            self.values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + t * b)
                .collect(),
        ))
    }

    pub fn add(&self, other: &Field) -> Result<Field> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.axpy(-1.0, other)
    }

    /// Trapezoid sum of `u v`.
    pub fn l2_inner(&self, other: &Field) -> Result<f64> {
        self.check_same_grid(other)?;
        Ok(self.grid.cell_volume() * dot(&self.values, &other.values))
    }

    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Circular shift by whole nodes: the sample at node `j` moves to `j + shift`.
    pub fn shift(&self, shift: &[isize]) -> Field {
        let g = self.grid;
        let n = g.n() as isize;
        let mut out = vec![0.0; g.len()];
        for (flat, &v) in self.values.iter().enumerate() {
            let mut idx = g.multi_index(flat);
            for axis in 0..g.dim() {
                idx[axis] = (idx[axis] as isize + shift[axis]).rem_euclid(n) as usize;
            }
            out[g.flat_index(&idx)] = v;
        }
        Field::from_raw(g, out)
    }

    /// `u(x', -x_N)` on the discrete periodic node set.
    pub fn reflect_last(&self) -> Field {
        let g = self.grid;
        Field::from_raw(
            g,
            (0..g.len())
                .map(|i| self.values[g.reflect_last(i)])
                .collect(),
        )
    }

    /// Continuous translation `u(x - a)` through a Fourier phase.
    pub fn translate(&self, displacement: &[f64]) -> Field {
        let g = self.grid;
        let k = g.wavenumbers();
        let plan = fft::plan(g.dim(), g.n());
        let mut z = fft::to_complex(&self.values);
        plan.forward(&mut z);
        for (flat, zk) in z.iter_mut().enumerate() {
            let idx = g.multi_index(flat);
            let phase: f64 = (0..g.dim()).map(|a| k[idx[a]] * displacement[a]).sum();
            *zk *= Complex64::from_polar(1.0, -phase);
        }
        plan.inverse(&mut z);
        Field::from_raw(g, z.iter().map(|c| c.re).collect())
    }

    /// Copy into a larger box with the same spacing, origin onto origin.
    pub fn embed(&self, target: Grid) -> Result<Field> {
        let g = self.grid;
        let same_spacing = (target.spacing() - g.spacing()).abs() <= 1e-12 * g.spacing();
        if target.dim() != g.dim() || target.n() < g.n() || !same_spacing {
            return Err(Error::InvalidGrid(
                "embedding needs a larger box with identical spacing".into(),
            ));
        }
        let offset = target.center_index() - g.center_index();
        let mut out = vec![0.0; target.len()];
        for (flat, &v) in self.values.iter().enumerate() {
            let mut idx = g.multi_index(flat);
            for j in idx.iter_mut().take(g.dim()) {
                *j += offset;
            }
            out[target.flat_index(&idx)] = v;
        }
        Ok(Field::from_raw(target, out))
    }

    /// Trigonometric interpolation onto `factor` times as many points per axis.
    /// The Nyquist mode of the coarse field is dropped.
    pub fn refine(&self, factor: usize) -> Result<Field> {
        let g = self.grid;
        let fine = Grid::new(g.dim(), g.n() * factor, g.extent())?;
        let plan = fft::plan(g.dim(), g.n());
        let mut z = fft::to_complex(&self.values);
        plan.forward(&mut z);
        let (n, m) = (g.n(), fine.n());
        let mut zf = vec![Complex64::default(); fine.len()];
        'modes: for (flat, zk) in z.iter().enumerate() {
            let idx = g.multi_index(flat);
            let mut fidx = [0usize; 3];
            for axis in 0..g.dim() {
                let j = idx[axis];
                if j == n / 2 {
                    continue 'modes;
                }
                fidx[axis] = if j < n / 2 { j } else { m - (n - j) };
            }
            zf[fine.flat_index(&fidx)] = *zk;
        }
        let gain = fine.len() as f64 / g.len() as f64;
        fft::plan(fine.dim(), m).inverse(&mut zf);
        Ok(Field::from_raw(
            fine,
            zf.iter().map(|c| c.re * gain).collect(),
        ))
    }

    /// Spectral partial derivatives, one field per axis.
    pub fn gradient(&self) -> Vec<Field> {
        let g = self.grid;
        let k = g.wavenumbers();
        let n = g.n();
        let plan = fft::plan(g.dim(), n);
        let mut base = fft::to_complex(&self.values);
        plan.forward(&mut base);
        (0..g.dim())
            .map(|axis| {
                let mut z = base.clone();
                for (flat, zk) in z.iter_mut().enumerate() {
                    let j = g.multi_index(flat)[axis];
                    let kj = if j == n / 2 { 0.0 } else { k[j] };
                    *zk *= Complex64::new(0.0, kj);
                }
                plan.inverse(&mut z);
                Field::from_raw(g, z.iter().map(|c| c.re).collect())
            })
            .collect()
    }

    /// Fraction of the local `H^1` energy density sitting in the boundary strip
    /// of width `h * ceil(0.05 n)`.
    pub fn tail_mass(&self) -> f64 {
        let g = self.grid;
        let width = (0.05 * g.n() as f64).ceil() as usize;
        let grads = self.gradient();
        let (mut total, mut tail) = (0.0, 0.0);
        for flat in 0..g.len() {
            let mut density = self.values[flat] * self.values[flat];
            for d in &grads {
                density += d.values[flat] * d.values[flat];
            }
            total += density;
            let idx = g.multi_index(flat);
            if idx[..g.dim()]
                .iter()
                .any(|&j| j < width || j >= g.n() - width)
            {
                tail += density;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Spectrum of a field together with the `1 + |k|^2` weights of its grid.
pub(crate) struct H1Spectrum {
    pub coeffs: Vec<Complex64>,
}

impl H1Spectrum {
    pub fn of(u: &Field) -> Self {
        let g = u.grid();
        let mut z = fft::to_complex(u.values());
        fft::plan(g.dim(), g.n()).forward(&mut z);
        H1Spectrum { coeffs: z }
    }
}

/// `sum_k (1 + |k|^2) Re(a_k conj(b_k))` scaled to the continuum inner product.
pub(crate) fn h1_pairing(grid: &Grid, weights: &[f64], a: &[Complex64], b: &[Complex64]) -> f64 {
    let sum: f64 = weights
        .iter()
        .zip(a.iter().zip(b))
        .map(|(w, (x, y))| w * (x.re * y.re + x.im * y.im))
        .sum();
    sum * grid.cell_volume() / grid.len() as f64
}

pub(crate) fn h1_weights(grid: &Grid) -> Vec<f64> {
    grid.k_squared().into_iter().map(|k2| 1.0 + k2).collect()
}

/// `int grad u . grad v + u v`, evaluated with the multiplier `1 + |k|^2`.
pub fn h1_inner(u: &Field, v: &Field) -> Result<f64> {
    u.check_same_grid(v)?;
    let g = u.grid();
    let w = h1_weights(g);
    let su = H1Spectrum::of(u);
    let sv = H1Spectrum::of(v);
    Ok(h1_pairing(g, &w, &su.coeffs, &sv.coeffs))
}

pub fn h1_norm_sq(u: &Field) -> f64 {
    let g = u.grid();
    let s = H1Spectrum::of(u);
    h1_pairing(g, &h1_weights(g), &s.coeffs, &s.coeffs)
}

/// `(max(u, 0), min(u, 0))`.
pub fn split_signs(u: &Field) -> (Field, Field) {
    (u.map(|v| v.max(0.0)), u.map(|v| v.min(0.0)))
}

/// Odd part with respect to the last coordinate.
pub fn antisymmetrize(u: &Field) -> Field {
    let g = *u.grid();
    let values = (0..g.len())
        .map(|i| 0.5 * (u.values[i] - u.values[g.reflect_last(i)]))
        .collect();
    Field::from_raw(g, values)
}

/// Sample that decides where a field is anchored.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Anchor {
    /// Largest `|u|` (groundstate runs).
    MaxAbs,
    /// Largest positive part (nodal and odd runs).
    MaxPositive,
}

/// Whole-node circular shift putting the anchor sample on the central node.
/// With `freeze_last` the last (oddness) axis is left untouched.
pub fn recenter(u: &Field, anchor: Anchor, freeze_last: bool) -> Result<Field> {
    let shift = recenter_shift(u, anchor, freeze_last)?;
    Ok(u.shift(&shift))
}

pub fn recenter_shift(u: &Field, anchor: Anchor, freeze_last: bool) -> Result<[isize; 3]> {
    let score = |v: f64| match anchor {
        Anchor::MaxAbs => v.abs(),
        Anchor::MaxPositive => v,
    };
    let (best, best_val) =
        u.values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if score(v) > bv {
                    (i, score(v))
                } else {
                    (bi, bv)
                }
            });
    if u.is_zero() || best_val <= 0.0 {
        return Err(Error::ZeroField);
    }
    let g = u.grid();
    let idx = g.multi_index(best);
    let mut shift = [0isize; 3];
    for axis in 0..g.dim() {
        if freeze_last && axis == g.dim() - 1 {
            continue;
        }
        shift[axis] = g.center_index() as isize - idx[axis] as isize;
    }
    Ok(shift)
}
