//! Position/momentum transforms on the discretized torus.
//!
//! With nodes `x_j = -π + 2π(j + α)/N` and `p_k = -π + 2π(k + β)/N`, the
//! unitary change of basis is
//!
//! ```text
//! φ_k = N^{-1/2} Σ_j ψ_j exp(-i p_k x_j / ħ)
//! ```
//!
//! and `p_k x_j / ħ = (2π/N)(k + β - N/2)(j + α - N/2)`. Expanding the product
//! splits the kernel into a plain DFT sandwiched between two diagonal phases,
//! so the transform costs one FFT.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::torus::TorusGrid;

/// `exp(-i 2π num / N)` with the argument reduced before the multiply.
pub(crate) fn root_of_unity(num: f64, n: usize) -> C64 {
    let nf = n as f64;
    C64::from_polar(1.0, -TAU * num.rem_euclid(nf) / nf)
}

/// Offset-aware unitary DFT between the position and momentum bases of one
/// torus grid.
#[derive(Clone)]
pub struct TorusTransform {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    pre: Vec<C64>,
    post: Vec<C64>,
}

impl std::fmt::Debug for TorusTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TorusTransform").field("n", &self.n).finish()
    }
}

impl TorusTransform {
    pub fn new(grid: &TorusGrid) -> Self {
        let n = grid.n_sites();
        let half = n as f64 / 2.0;
        let a = grid.x_offset() - half;
        let b = grid.p_offset() - half;
        let pre = (0..n).map(|j| root_of_unity(j as f64 * b, n)).collect();
        let constant = root_of_unity(a * b, n);
        let post = (0..n)
            .map(|k| root_of_unity(k as f64 * a, n) * constant)
            .collect();
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            pre,
            post,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Phases applied in position space before the FFT.
    pub fn pre_phases(&self) -> &[C64] {
        &self.pre
    }

    pub(crate) fn forward_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.forward
    }

    pub(crate) fn inverse_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.inverse
    }

    /// Position amplitudes to momentum amplitudes, in place.
    pub fn to_momentum(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.n);
        let scale = (self.n as f64).sqrt().recip();
        buf.iter_mut().zip(&self.pre).for_each(|(z, w)| *z *= w);
        self.forward.process(buf);
        buf.iter_mut()
            .zip(&self.post)
            .for_each(|(z, w)| *z *= w * scale);
    }

    /// Momentum amplitudes to position amplitudes, in place.
    pub fn to_position(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.n);
        let scale = (self.n as f64).sqrt().recip();
        buf.iter_mut()
            .zip(&self.post)
            .for_each(|(z, w)| *z *= w.conj());
        self.inverse.process(buf);
        buf.iter_mut()
            .zip(&self.pre)
            .for_each(|(z, w)| *z *= w.conj() * scale);
    }
}

/// Cache-blocked out-of-place transpose of a row-major `rows × cols` buffer.
pub(crate) fn transpose_into(src: &[C64], dst: &mut [C64], rows: usize, cols: usize) {
    const BLOCK: usize = 32;
    debug_assert_eq!(src.len(), rows * cols);
    debug_assert_eq!(dst.len(), rows * cols);
    for r0 in (0..rows).step_by(BLOCK) {
        for c0 in (0..cols).step_by(BLOCK) {
            for r in r0..(r0 + BLOCK).min(rows) {
                for c in c0..(c0 + BLOCK).min(cols) {
                    dst[c * rows + r] = src[r * cols + c];
                }
            }
        }
    }
}
