//! Reproducible self-checks against independent oracles: central
//! differences for the gradient, the closed-form Newtonian potential of a
//! Gaussian, the far-field two-bump expansion and the spectral semigroup
//! factorization.

use std::f64::consts::PI;
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::Result;
use crate::functional::Problem;
use crate::grid::{Field, Grid};
use crate::riesz::{KernelMode, RieszKernel};

/// Sum of `count` Gaussians with seeded centers in the middle 40% of the
/// box, widths in `[0.8, 2)` and amplitudes in `(-1.5, 1.5)`.
pub fn random_bumps(grid: Grid, seed: u64, count: usize) -> Field {
    bump_family(grid, seed, count, 0.2, -1.5..1.5)
}

/// Gaussians centred within `spread * L` of the origin, widths in `[0.8, 2)`.
pub fn bump_family(
    grid: Grid,
    seed: u64,
    count: usize,
    spread: f64,
    amplitude: Range<f64>,
) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = spread * grid.extent();
    let spec: Vec<(Vec<f64>, f64, f64)> = (0..count)
        .map(|_| {
            let c = (0..grid.dim())
                .map(|_| rng.random_range(-half..half))
                .collect();
            (
                c,
                rng.random_range(0.8..2.0),
                rng.random_range(amplitude.clone()),
            )
        })
        .collect();
    Field::from_fn(grid, |x| {
        spec.iter()
            .map(|(c, w, a)| {
                let r2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
                a * (-r2 / (w * w)).exp()
            })
            .sum()
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientCheck {
    pub eps: f64,
    /// Largest `|fd - <g, phi>| / |<g, phi>|` at `eps`.
    pub worst_error: f64,
    /// Log-log slope of the central-difference error over the sweep, per field.
    pub slopes: Vec<f64>,
    pub sweep: Vec<f64>,
}

impl GradientCheck {
    pub fn slope_range(&self) -> (f64, f64) {
        self.slopes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &s| {
                (lo.min(s), hi.max(s))
            })
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Central differences of the action along random directions at `fields`
/// random points, seeded from `seed`. Base points are positive bump clusters
/// and directions are `u (0.3 + tanh m)` for a mixed-sign bump field `m`,
/// so `u ± eps phi` keeps its sign over the sweep: a sign change would put
/// nodes on the kink of `|u|^(p-2) u` and cap the observed order at `p - 1`.
pub fn gradient_check(problem: &Problem, seed: u64, fields: usize) -> Result<GradientCheck> {
    let g = *problem.grid();
    let eps = 1e-5;
    let sweep = vec![1e-1, 5e-2, 2.5e-2, 1.25e-2];
    let mut worst_error = 0.0f64;
    let mut slopes = Vec::with_capacity(fields);
    for k in 0..fields as u64 {
        let u = bump_family(g, seed + 2 * k, 3, 0.1, 0.5..1.5);
        let m = bump_family(g, seed + 2 * k + 1, 2, 0.1, -1.5..1.5);
        let phi = Field::new(
            g,
            u.values()
                .iter()
                .zip(m.values())
                .map(|(a, b)| a * (0.3 + b.tanh()))
                .collect(),
        )?;
        let exact = problem.action_gradient(&u)?.l2_inner(&phi)?;
        let fd = |e: f64| -> Result<f64> {
            Ok(
                (problem.action(&u.axpy(e, &phi)?)? - problem.action(&u.axpy(-e, &phi)?)?)
                    / (2.0 * e),
            )
        };
        worst_error = worst_error.max((fd(eps)? - exact).abs() / exact.abs());
        let errs = sweep
            .iter()
            .map(|&e| Ok((fd(e)? - exact).abs().ln()))
            .collect::<Result<Vec<f64>>>()?;
        let logs: Vec<f64> = sweep.iter().map(|e: &f64| e.ln()).collect();
        slopes.push(fit_slope(&logs, &errs));
    }
    Ok(GradientCheck {
        eps,
        worst_error,
        slopes,
        sweep,
    })
}

/// Newtonian potential of `exp(-r^2/2)` in 3D: `(2 pi)^(3/2) erf(r/sqrt 2) / (4 pi r)`.
pub fn gaussian_potential(r: f64) -> f64 {
    if r < 1e-8 {
        return 1.0;
    }
    (2.0 * PI).powf(1.5) * erf(r / 2f64.sqrt()) / (4.0 * PI * r)
}

/// Relative max error of the truncated-kernel `I_2 * exp(-r^2/2)` in 3D on
/// the inner half-box.
pub fn newtonian_error(n: usize, extent: f64) -> Result<f64> {
    let g = Grid::new(3, n, extent)?;
    let k = RieszKernel::build(g, 2.0, KernelMode::TruncatedKernel)?;
    let f = Field::from_fn(g, |x| {
        (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 2.0).exp()
    });
    let v = k.convolve(&f)?;
    let (mut err, mut scale) = (0.0f64, 0.0f64);
    for i in 0..g.len() {
        let x = g.point(i);
        if x.iter().all(|c| c.abs() <= 0.25 * extent) {
            let exact = gaussian_potential((x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt());
            err = err.max((v.values()[i] - exact).abs());
            scale = scale.max(exact.abs());
        }
    }
    Ok(err / scale)
}

/// Max-norm gap between `I_{α/2} * I_{α/2} * f` and `I_α * f` in spectral
/// mode over `fields` random fields.
pub fn semigroup_defect(grid: Grid, alpha: f64, seed: u64, fields: usize) -> Result<f64> {
    let full = RieszKernel::build(grid, alpha, KernelMode::Spectral)?;
    let half = full.half()?;
    let mut worst = 0.0f64;
    for k in 0..fields as u64 {
        let f = random_bumps(grid, seed + k, 3);
        let twice = half.convolve(&half.convolve(&f)?)?;
        let once = full.convolve(&f)?;
        let d = twice.sub(&once)?.max_abs();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Ratio of the computed cross term `int (I_α * |u|^p) |w|^p` for two narrow
/// bumps at distance `d` along the first axis to its far-field value
/// `A_α d^(α-N) (int |u|^p)(int |w|^p)`.
pub fn far_field_ratio(grid: Grid, alpha: f64, p: f64, d: f64) -> Result<f64> {
    let k = RieszKernel::build(grid, alpha, KernelMode::TruncatedKernel)?;
    let bump = |c: f64, w: f64| {
        Field::from_fn(grid, move |x| {
            let r2: f64 = x
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == 0 { (v - c).powi(2) } else { v * v })
                .sum();
            (-r2 / (w * w)).exp()
        })
    };
    let u = bump(-0.5 * d, 0.6);
    let w = bump(0.5 * d, 0.8);
    let term = k.choquard_term(p, &u, &w)?;
    let mass = |f: &Field| f.map(|v| v.abs().powf(p)).integral();
    let n = grid.dim() as f64;
    Ok(term / (k.a_alpha() * d.powf(alpha - n) * mass(&u) * mass(&w)))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelSelfTest {
    pub semigroup_defect: f64,
    pub newtonian_error: f64,
    /// `(distance, ratio)` for the far-field two-bump check.
    pub far_field: Vec<(f64, f64)>,
}

impl KernelSelfTest {
    pub fn passed(&self) -> bool {
        self.semigroup_defect <= 1e-12
            && self.newtonian_error <= 5e-3
            && self
                .far_field
                .last()
                .is_some_and(|&(_, r)| (r - 1.0).abs() <= 0.05)
    }
}

/// The three kernel checks at their reference sizes, with random fields
/// drawn from `seed`.
pub fn kernel_self_test(seed: u64) -> Result<KernelSelfTest> {
    let plane = Grid::new(2, 64, 20.0)?;
    let wide = Grid::new(2, 256, 80.0)?;
    Ok(KernelSelfTest {
        semigroup_defect: semigroup_defect(plane, 1.0, seed, 10)?,
        newtonian_error: newtonian_error(64, 10.0)?,
        far_field: [10.0, 20.0, 30.0]
            .into_iter()
            .map(|d| Ok((d, far_field_ratio(wide, 1.0, 2.5, d)?)))
            .collect::<Result<_>>()?,
    })
}
