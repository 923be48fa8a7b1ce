//! Critical action levels of the Choquard equation
//! `-Δu + u = (I_α * |u|^p) |u|^(p-2) u` on truncated periodic boxes.
//!
//! The crate computes the groundstate level `c_0`, the odd level `c_odd` and
//! the nodal level `c_nod` by Nehari-constrained Sobolev gradient descent, and
//! provides the explicit test-function families used to probe the ordering
//! `c_0 < c_nod <= c_odd < 2 c_0` and its degeneration for `p < 2`.

pub mod checks;
pub mod constructions;
pub mod error;
mod fft;
pub mod functional;
pub mod grid;
pub mod io;
pub mod manifold;
pub mod params;
pub mod riesz;
pub mod solve;

pub use error::{Error, Result};
pub use functional::{ChoquardBrackets, Problem};
pub use grid::{Field, Grid};
pub use params::{Mode, Params, Regime};
pub use riesz::{KernelMode, RieszKernel};
