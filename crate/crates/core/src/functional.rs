//! The action functional, its gradient and the sign-part brackets.
//!
//! With `D(u) = int (I_alpha * |u|^p) |u|^p` (or `int |u|^(2p)` in local mode)
//! the action is `A(u) = ||u||^2 / 2 - D(u) / (2p)`, and its `L^2` gradient is
//! `(1 - Δ) u - R(u)` where the response `R(u)` satisfies `<R(u), u> = D(u)`
//! and `R(t u) = t^(2p-1) R(u)`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::{self, split_signs, Field, Grid};
use crate::params::{Mode, Params};
use crate::riesz::{KernelMode, RieszKernel};

/// `sign(v) |v|^e`, zero at zero.
pub(crate) fn signed_pow(v: f64, e: f64) -> f64 {
    if v == 0.0 {
        0.0
    } else {
        v.signum() * v.abs().powf(e)
    }
}

/// Quadratic and nonlocal brackets of the two sign parts of a field.
///
/// `q_cross` is the discrete `H^1` pairing of `u+` and `u-`. It vanishes for
/// disjointly supported functions in the continuum but not for the spectral
/// derivative, and it is carried so that the fiber algebra is exact on the
/// grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChoquardBrackets {
    pub q_plus: f64,
    pub q_minus: f64,
    pub q_cross: f64,
    pub d_pp: f64,
    pub d_mm: f64,
    pub d_pm: f64,
}

impl ChoquardBrackets {
    /// `||u||^2` of the whole field.
    pub fn norm_sq(&self) -> f64 {
        self.q_plus + 2.0 * self.q_cross + self.q_minus
    }

    /// `D(u)` of the whole field.
    pub fn nonlocal(&self) -> f64 {
        self.d_pp + 2.0 * self.d_pm + self.d_mm
    }

    /// Brackets of `s+ u+ + s- u-`.
    pub fn scaled(&self, p: f64, s_plus: f64, s_minus: f64) -> Self {
        let (a, b) = (s_plus.powf(p), s_minus.powf(p));
        ChoquardBrackets {
            q_plus: s_plus * s_plus * self.q_plus,
            q_minus: s_minus * s_minus * self.q_minus,
            q_cross: s_plus * s_minus * self.q_cross,
            d_pp: a * a * self.d_pp,
            d_mm: b * b * self.d_mm,
            d_pm: a * b * self.d_pm,
        }
    }

    /// `min(q+, q-) / max(q+, q-)`, zero for one-signed fields.
    pub fn balance(&self) -> f64 {
        let hi = self.q_plus.max(self.q_minus);
        if hi == 0.0 {
            0.0
        } else {
            self.q_plus.min(self.q_minus) / hi
        }
    }
}

/// Parameters paired with a kernel on a fixed grid.
#[derive(Clone, Debug)]
pub struct Problem {
    params: Params,
    kernel: RieszKernel,
    dealias: bool,
}

/// A field with its norm, nonlinear bracket and response.
#[derive(Clone, Debug)]
pub(crate) struct Evaluated {
    pub u: Field,
    pub q: f64,
    pub d: f64,
    pub response: Field,
}

/// Sign parts together with their potentials, enough to rebuild any
/// `s+ u+ + s- u-` without another convolution.
#[derive(Clone, Debug)]
pub(crate) struct SignedParts {
    pub plus: Field,
    pub minus: Field,
    pub brackets: ChoquardBrackets,
    potentials: Option<(Field, Field)>,
}

impl Problem {
    pub fn new(params: Params, grid: Grid, mode: KernelMode) -> Result<Self> {
        let kernel = RieszKernel::build(grid, params.alpha, mode)?;
        Self::from_kernel(params, kernel)
    }

    pub fn from_kernel(params: Params, kernel: RieszKernel) -> Result<Self> {
        params.validate()?;
        if kernel.grid().dim() != params.dim || kernel.alpha() != params.alpha {
            return Err(Error::InvalidParams(
                "kernel dimension or order differs from the parameters".into(),
            ));
        }
        Ok(Problem {
            params,
            kernel,
            dealias: false,
        })
    }

    /// Apply a 2/3-rule low-pass filter to `|u|^p` before convolving.
    pub fn with_dealiasing(mut self, on: bool) -> Self {
        self.dealias = on;
        self
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn kernel(&self) -> &RieszKernel {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        self.kernel.grid()
    }

    pub fn p(&self) -> f64 {
        self.params.p
    }

    fn check(&self, u: &Field) -> Result<()> {
        if u.grid() == self.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    fn filter(&self, f: Field) -> Field {
        if !self.dealias {
            return f;
        }
        let g = *f.grid();
        let k = g.wavenumbers();
        let cut = 2.0 / 3.0 * k.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let plan = fft::plan(g.dim(), g.n());
        let mut z = fft::to_complex(f.values());
        plan.forward(&mut z);
        for (flat, zk) in z.iter_mut().enumerate() {
            let idx = g.multi_index(flat);
            if (0..g.dim()).any(|a| k[idx[a]].abs() > cut) {
                *zk = Complex64::default();
            }
        }
        plan.inverse(&mut z);
        Field::from_raw(g, z.iter().map(|c| c.re).collect())
    }

    /// `(I_alpha * |u|^p)` with the optional filter applied on both sides.
    pub fn potential(&self, u: &Field) -> Result<Field> {
        let f = self.filter(u.map(|v| v.abs().powf(self.params.p)));
        Ok(self.filter(self.kernel.convolve(&f)?))
    }

    fn response_from(&self, u: &Field, potential: Option<&Field>) -> Field {
        let p = self.params.p;
        match (self.params.mode, potential) {
            (Mode::Choquard, Some(v)) => Field::from_raw(
                *u.grid(),
                u.values()
                    .iter()
                    .zip(v.values())
                    .map(|(&x, &w)| w * signed_pow(x, p - 1.0))
                    .collect(),
            ),
            _ => u.map(|x| signed_pow(x, 2.0 * p - 1.0)),
        }
    }

    pub(crate) fn evaluate(&self, u: Field) -> Result<Evaluated> {
        self.check(&u)?;
        let potential = match self.params.mode {
            Mode::Choquard => Some(self.potential(&u)?),
            Mode::LocalNls => None,
        };
        let response = self.response_from(&u, potential.as_ref());
        let d = response.l2_inner(&u)?;
        let q = grid::h1_norm_sq(&u);
        Ok(Evaluated { u, q, d, response })
    }

    /// `D(u)`.
    pub fn nonlocal_energy(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        match self.params.mode {
            Mode::Choquard => self
                .potential(u)?
                .l2_inner(&u.map(|v| v.abs().powf(self.params.p))),
            Mode::LocalNls => Ok(u.map(|v| v.abs().powf(2.0 * self.params.p)).integral()),
        }
    }

    pub fn action(&self, u: &Field) -> Result<f64> {
        self.check(u)?;
        let q = grid::h1_norm_sq(u);
        let d = self.nonlocal_energy(u)?;
        Ok(0.5 * q - d / (2.0 * self.params.p))
    }

    /// `L^2` representative of `A'(u)`: `-Δu + u - R(u)`.
    pub fn action_gradient(&self, u: &Field) -> Result<Field> {
        let ev = self.evaluate(u.clone())?;
        helmholtz(u).sub(&ev.response)
    }

    pub(crate) fn signed_parts(&self, u: &Field) -> Result<SignedParts> {
        self.check(u)?;
        let p = self.params.p;
        let (plus, minus) = split_signs(u);
        let g = *u.grid();
        let w = grid::h1_weights(&g);
        let (has_plus, has_minus) = (!plus.is_zero(), !minus.is_zero());
        // separate transforms throughout: a shared one leaks rounding of the
        // larger part into a nearly collapsed one
        let (q_plus, q_minus, q_cross) = if has_plus && has_minus {
            let plan = fft::plan(g.dim(), g.n());
            let mut sp = fft::to_complex(plus.values());
            let mut sm = fft::to_complex(minus.values());
            plan.forward(&mut sp);
            plan.forward(&mut sm);
            (
                grid::h1_pairing(&g, &w, &sp, &sp),
                grid::h1_pairing(&g, &w, &sm, &sm),
                grid::h1_pairing(&g, &w, &sp, &sm),
            )
        } else {
            (grid::h1_norm_sq(&plus), grid::h1_norm_sq(&minus), 0.0)
        };
        let (d_pp, d_mm, d_pm, potentials) = match self.params.mode {
            Mode::Choquard => {
                let (vp, vm) = (self.potential(&plus)?, self.potential(&minus)?);
                let fp = plus.map(|v| v.abs().powf(p));
                let fm = minus.map(|v| v.abs().powf(p));
                let d_pp = vp.l2_inner(&fp)?;
                let d_mm = vm.l2_inner(&fm)?;
                let d_pm = if has_plus && has_minus {
                    vp.l2_inner(&fm)?
                } else {
                    0.0
                };
                (d_pp, d_mm, d_pm, Some((vp, vm)))
            }
            Mode::LocalNls => (
                plus.map(|v| v.abs().powf(2.0 * p)).integral(),
                minus.map(|v| v.abs().powf(2.0 * p)).integral(),
                0.0,
                None,
            ),
        };
        Ok(SignedParts {
            plus,
            minus,
            brackets: ChoquardBrackets {
                q_plus,
                q_minus,
                q_cross,
                d_pp,
                d_mm,
                d_pm,
            },
            potentials,
        })
    }

    pub fn brackets(&self, u: &Field) -> Result<ChoquardBrackets> {
        Ok(self.signed_parts(u)?.brackets)
    }

    /// Evaluation of `s+ u+ + s- u-` assembled from the stored parts.
    pub(crate) fn recombine(
        &self,
        parts: &SignedParts,
        s_plus: f64,
        s_minus: f64,
    ) -> Result<Evaluated> {
        let p = self.params.p;
        let u = parts.plus.scaled(s_plus).axpy(s_minus, &parts.minus)?;
        let potential = match &parts.potentials {
            Some((vp, vm)) => Some(vp.scaled(s_plus.powf(p)).axpy(s_minus.powf(p), vm)?),
            None => None,
        };
        let response = self.response_from(&u, potential.as_ref());
        let b = parts.brackets.scaled(p, s_plus, s_minus);
        Ok(Evaluated {
            u,
            q: b.norm_sq(),
            d: b.nonlocal(),
            response,
        })
    }
}

impl Evaluated {
    pub fn action(&self, p: f64) -> f64 {
        0.5 * self.q - self.d / (2.0 * p)
    }

    /// Evaluation of `t u`.
    pub fn scaled(&self, p: f64, t: f64) -> Evaluated {
        Evaluated {
            u: self.u.scaled(t),
            q: t * t * self.q,
            d: t.powf(2.0 * p) * self.d,
            response: self.response.scaled(t.powf(2.0 * p - 1.0)),
        }
    }
}

fn apply_weights(u: &Field, invert: bool) -> Field {
    let grid = *u.grid();
    let w = grid::h1_weights(&grid);
    let plan = fft::plan(grid.dim(), grid.n());
    let mut z = fft::to_complex(u.values());
    plan.forward(&mut z);
    for (zk, wk) in z.iter_mut().zip(&w) {
        if invert {
            *zk /= *wk;
        } else {
            *zk *= *wk;
        }
    }
    plan.inverse(&mut z);
    Field::from_raw(grid, z.iter().map(|c| c.re).collect())
}

/// `(1 - Δ) u` through the multiplier `1 + |k|^2`.
pub fn helmholtz(u: &Field) -> Field {
    apply_weights(u, false)
}

/// `(1 - Δ)^{-1} g`: the `H^1` representative of an `L^2` gradient.
pub fn sobolev_precondition(g: &Field) -> Field {
    apply_weights(g, true)
}

/// Preconditioned gradient `d = u - (1 - Δ)^{-1} R(u)` with its spectrum and
/// the spectrum of `u`, so that `H^1` pairings need no further transforms.
pub(crate) struct Descent {
    pub direction: Field,
    pub norm_sq: f64,
    pub u_hat: Vec<Complex64>,
    pub d_hat: Vec<Complex64>,
}

pub(crate) fn descent(ev: &Evaluated) -> Descent {
    let g = *ev.u.grid();
    let w = grid::h1_weights(&g);
    let plan = fft::plan(g.dim(), g.n());
    let mut z = fft::pack(ev.u.values(), ev.response.values());
    plan.forward(&mut z);
    let (u_hat, r_hat) = fft::unpack(&z, g.dim(), g.n());
    let d_hat: Vec<Complex64> = u_hat
        .iter()
        .zip(&r_hat)
        .zip(&w)
        .map(|((a, b), wk)| a - b / *wk)
        .collect();
    let norm_sq = grid::h1_pairing(&g, &w, &d_hat, &d_hat);
    let mut back = d_hat.clone();
    plan.inverse(&mut back);
    Descent {
        direction: Field::from_raw(g, back.iter().map(|c| c.re).collect()),
        norm_sq,
        u_hat,
        d_hat,
    }
}
