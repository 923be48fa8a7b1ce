//! Problem data: space dimension, Riesz order and nonlinearity exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which nonlinearity the action carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Nonlocal term `(I_alpha * |u|^p) |u|^(p-2) u`.
    Choquard,
    /// Local term `|u|^(2p-2) u`, used as the contrast case.
    LocalNls,
}

/// Growth regime of the nonlinearity relative to the quadratic part.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Sublinear,
    Boundary,
    Superlinear,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub dim: usize,
    pub alpha: f64,
    pub p: f64,
    pub mode: Mode,
}

impl Params {
    pub fn new(dim: usize, alpha: f64, p: f64, mode: Mode) -> Result<Self> {
        let params = Params {
            dim,
            alpha,
            p,
            mode,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn choquard(dim: usize, alpha: f64, p: f64) -> Result<Self> {
        Self::new(dim, alpha, p, Mode::Choquard)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::InvalidParams(format!(
                "dimension {} not in 1..=3",
                self.dim
            )));
        }
        let n = self.dim as f64;
        if !(self.alpha.is_finite() && self.alpha > 0.0 && self.alpha < n) {
            return Err(Error::InvalidParams(format!(
                "alpha = {} must lie in (0, {})",
                self.alpha, self.dim
            )));
        }
        if !(self.p.is_finite() && self.p > 1.0) {
            return Err(Error::InvalidParams(format!(
                "p = {} must exceed 1",
                self.p
            )));
        }
        if self.mode == Mode::Choquard {
            let inv = 1.0 / self.p;
            let lower = (n - 2.0) / (n + self.alpha);
            let upper = n / (n + self.alpha);
            if !(lower < inv && inv < upper) {
                return Err(Error::InvalidParams(format!(
                    "p = {} violates {lower:.6} < 1/p < {upper:.6}",
                    self.p
                )));
            }
        }
        Ok(())
    }

    pub fn regime(&self) -> Regime {
        if self.p < 2.0 {
            Regime::Sublinear
        } else if self.p > 2.0 {
            Regime::Superlinear
        } else {
            Regime::Boundary
        }
    }

    /// `1/2 - 1/(2p)`: the action of a Nehari point is this times its squared norm.
    pub fn nehari_factor(&self) -> f64 {
        0.5 - 0.5 / self.p
    }

    /// Exponent `(p-2)/(p-1)` of the lower bound `c_nod >= 2^e c_0`.
    pub fn nodal_bound_exponent(&self) -> f64 {
        (self.p - 2.0) / (self.p - 1.0)
    }
}
