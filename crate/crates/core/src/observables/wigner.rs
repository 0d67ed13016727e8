//! Discrete Wigner function on the doubled `2N × 2N` torus lattice.
//!
//! For lattice indices `a, b ∈ 0..2N`
//!
//! ```text
//! W(a, b) = 1/(2N) Σ_{a' ≡ a (mod 2)} ρ[(a+a')/2, (a-a')/2] exp(-iπ b a'/N)
//! ```
//!
//! with matrix indices taken mod `N`. Row `a` sits at `x = x_0 + aπ/N`
//! (half-site steps) and column `b` at `p = bπ/N`. The grid sums to one and
//! `Σ_b W(2j, b) = ρ_jj`.
//!
//! Each structure appears together with ghost images: `W(a, b + N) =
//! (-1)^a W(a, b)`, and odd rows carry interference terms that sum to zero.
//! Ghosts are part of the convention and are kept.

use std::f64::consts::PI;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::density::ReducedDensity;
use super::distribution::{DistributionKind, PhaseSpaceDistribution};
use crate::error::{Error, Result};
use crate::torus::TorusGrid;

fn check_dims(rho: &ReducedDensity, grid: &TorusGrid) -> Result<usize> {
    let n = grid.n_sites();
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidGrid(format!("discrete Wigner needs even N, got {n}")));
    }
    if rho.dim != n {
        return Err(Error::Contract(format!("density of dimension {} on a grid of {n} sites", rho.dim)));
    }
    Ok(n)
}

/// Wigner grid with rows along `x` and columns rotated so `p` runs from `-π`.
pub fn wigner(rho: &ReducedDensity, grid: &TorusGrid) -> Result<PhaseSpaceDistribution> {
    let n = check_dims(rho, grid)?;
    let m = 2 * n;
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let scale = 1.0 / m as f64;
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut buf = vec![C64::new(0.0, 0.0); m];
            for ap in (a % 2..m).step_by(2) {
                let r = ((a + ap) / 2) % n;
                let c = ((a as isize - ap as isize) / 2).rem_euclid(n as isize) as usize;
                buf[ap] = rho.matrix[[r, c]];
            }
            fft.process(&mut buf);
            // column c holds b = c + N, i.e. p = -π + cπ/N
            (0..m).map(|c| buf[(c + n) % m].re * scale).collect()
        })
        .collect();
    let values = Array2::from_shape_fn((m, m), |(a, c)| rows[a][c]);
    Ok(PhaseSpaceDistribution {
        kind: DistributionKind::Wigner,
        values,
        x_min: grid.position(0),
        x_step: PI / n as f64,
        p_min: -PI,
        p_step: PI / n as f64,
    })
}

/// Recover `ρ` from its Wigner grid.
pub fn wigner_inverse(w: &PhaseSpaceDistribution, grid: &TorusGrid) -> Result<ReducedDensity> {
    let n = grid.n_sites();
    let m = 2 * n;
    if w.kind != DistributionKind::Wigner || w.shape() != (m, m) {
        return Err(Error::Contract(format!(
            "expected a {m}×{m} Wigner grid, got {:?} {:?}",
            w.kind,
            w.shape()
        )));
    }
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(m);
    // f_a(a') = Σ_b W(a, b) exp(iπ b a'/N)
    let rows: Vec<Vec<C64>> = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut buf: Vec<C64> = (0..m)
                .map(|b| C64::new(w.values[[a, (b + n) % m]], 0.0))
                .collect();
            ifft.process(&mut buf);
            buf
        })
        .collect();
    let matrix = Array2::from_shape_fn((n, n), |(r, c)| {
        let a = r + c;
        let ap = (r as isize - c as isize).rem_euclid(m as isize) as usize;
        rows[a][ap]
    });
    ReducedDensity::from_matrix(matrix)
}
