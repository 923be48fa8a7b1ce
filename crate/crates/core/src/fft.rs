//! Separable N-dimensional complex FFTs over row-major cubic arrays.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::rc::Rc;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct FftNd {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANS: RefCell<HashMap<(usize, usize), Rc<FftNd>>> = RefCell::new(HashMap::new());
}

/// Cached transform for a `dim`-dimensional cube with `n` points per axis.
pub(crate) fn plan(dim: usize, n: usize) -> Rc<FftNd> {
    PLANS.with(|plans| {
        plans
            .borrow_mut()
            .entry((dim, n))
            .or_insert_with(|| {
                let mut planner = FftPlanner::new();
                Rc::new(FftNd {
                    dim,
                    n,
                    forward: planner.plan_fft_forward(n),
                    inverse: planner.plan_fft_inverse(n),
                })
            })
            .clone()
    })
}

impl FftNd {
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(&self.forward, data);
    }

    /// Inverse transform including the `1/len` normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(&self.inverse, data);
        let scale = 1.0 / data.len() as f64;
        for z in data.iter_mut() {
            *z *= scale;
        }
    }

    fn run(&self, fft: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let n = self.n;
        assert_eq!(data.len(), self.len());
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        // contiguous last axis
        fft.process_with_scratch(data, &mut scratch);
        if self.dim == 1 {
            return;
        }
        let mut lines = Vec::new();
        for axis in (0..self.dim - 1).rev() {
            let stride = n.pow((self.dim - 1 - axis) as u32);
            let block = n * stride;
            lines.resize(block, Complex64::default());
            for chunk in data.chunks_exact_mut(block) {
                // gather the `stride` lines of this block, one per row of `lines`
                for j in 0..n {
                    for s in 0..stride {
                        lines[s * n + j] = chunk[j * stride + s];
                    }
                }
                fft.process_with_scratch(&mut lines, &mut scratch);
                for j in 0..n {
                    for s in 0..stride {
                        chunk[j * stride + s] = lines[s * n + j];
                    }
                }
            }
        }
    }
}

/// Angular wavenumbers of a periodic axis of length `extent` sampled at `n` points.
pub(crate) fn wavenumbers(n: usize, extent: f64) -> Vec<f64> {
    let base = 2.0 * PI / extent;
    (0..n)
        .map(|j| {
            let m = if j < n / 2 {
                j as f64
            } else {
                j as f64 - n as f64
            };
            base * m
        })
        .collect()
}

/// `|k|^2` at every mode of the cube, row-major.
pub(crate) fn wavenumber_sq(dim: usize, n: usize, extent: f64) -> Vec<f64> {
    let k = wavenumbers(n, extent);
    let k2: Vec<f64> = k.iter().map(|v| v * v).collect();
    let len = n.pow(dim as u32);
    let mut out = vec![0.0; len];
    for (idx, slot) in out.iter_mut().enumerate() {
        let mut rest = idx;
        let mut acc = 0.0;
        for _ in 0..dim {
            acc += k2[rest % n];
            rest /= n;
        }
        *slot = acc;
    }
    out
}

pub(crate) fn to_complex(values: &[f64]) -> Vec<Complex64> {
    values.iter().map(|&v| Complex64::new(v, 0.0)).collect()
}

pub(crate) fn pack(re: &[f64], im: &[f64]) -> Vec<Complex64> {
    re.iter()
        .zip(im)
        .map(|(&a, &b)| Complex64::new(a, b))
        .collect()
}

/// Index of the mode `-k` in a row-major cube.
pub(crate) fn negated_index(idx: usize, dim: usize, n: usize) -> usize {
    let mut rest = idx;
    let mut out = 0;
    let mut place = 1;
    for _ in 0..dim {
        let j = rest % n;
        out += ((n - j) % n) * place;
        place *= n;
        rest /= n;
    }
    out
}

/// Split the transform of `a + i b` (with `a`, `b` real) into the transforms of `a` and `b`.
pub(crate) fn unpack(z: &[Complex64], dim: usize, n: usize) -> (Vec<Complex64>, Vec<Complex64>) {
    let mut a = vec![Complex64::default(); z.len()];
    let mut b = vec![Complex64::default(); z.len()];
    for idx in 0..z.len() {
        let zk = z[idx];
        let zm = z[negated_index(idx, dim, n)].conj();
        a[idx] = (zk + zm) * 0.5;
        b[idx] = (zk - zm) * Complex64::new(0.0, -0.5);
    }
    (a, b)
}
