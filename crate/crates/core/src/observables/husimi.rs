use std::f64::consts::TAU;

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use super::density::ReducedDensity;
use super::distribution::{DistributionKind, PhaseSpaceDistribution};
use crate::error::{Error, Result};
use crate::torus::{TorusGrid, GAUSSIAN_WINDINGS};

pub const MIN_RESOLUTION: usize = 16;
// packet support in units of sigma; the envelope beyond is below e^-32
const SUPPORT_SIGMAS: f64 = 8.0;

/// Sites and amplitudes of the normalized packet centred at `(x0, p0)`,
/// restricted to the sites where it is not negligible. Over the full grid this
/// is the packet `make_gaussian` builds.
pub(crate) fn packet_support(grid: &TorusGrid, x0: f64, p0: f64, sigma: f64) -> (Vec<usize>, Vec<C64>) {
    let n = grid.n_sites();
    let dx = grid.spacing();
    let half = (SUPPORT_SIGMAS * sigma / dx).ceil() as usize;
    let sites: Vec<usize> = if 2 * half + 1 >= n {
        (0..n).collect()
    } else {
        let home = ((x0 - grid.position(0)) / dx).round() as isize;
        (-(half as isize)..=half as isize)
            .map(|o| (home + o).rem_euclid(n as isize) as usize)
            .collect()
    };
    let hbar = grid.hbar_eff();
    let two_sigma_sq = 2.0 * sigma * sigma;
    let mut amps: Vec<C64> = sites
        .iter()
        .map(|&j| {
            let x = grid.position(j);
            (-GAUSSIAN_WINDINGS..=GAUSSIAN_WINDINGS)
                .map(|w| {
                    let d = x - x0 + TAU * w as f64;
                    C64::from_polar((-d * d / two_sigma_sq).exp(), p0 * d / hbar)
                })
                .sum()
        })
        .collect();
    let norm = amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    amps.iter_mut().for_each(|z| *z /= norm);
    (sites, amps)
}

/// `⟨g|ρ|g⟩` for a packet given by [`packet_support`].
pub(crate) fn packet_expectation(rho: &ReducedDensity, sites: &[usize], amps: &[C64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (&r, &gr) in sites.iter().zip(amps) {
        let row = rho.matrix.row(r);
        let inner: C64 = sites.iter().zip(amps).map(|(&c, &gc)| row[c] * gc).sum();
        acc += gr.conj() * inner;
    }
    acc.re
}

/// Coherent-state overlaps `⟨g(x₀,p₀)|ρ|g(x₀,p₀)⟩` at the centres of a
/// `resolution × resolution` grid over `[-π, π)²`, normalized to sum 1.
pub fn husimi(
    rho: &ReducedDensity,
    grid: &TorusGrid,
    resolution: usize,
    sigma: f64,
) -> Result<PhaseSpaceDistribution> {
    if resolution < MIN_RESOLUTION {
        return Err(Error::Contract(format!(
            "Husimi resolution must be at least {MIN_RESOLUTION}, got {resolution}"
        )));
    }
    if rho.dim != grid.n_sites() {
        return Err(Error::Contract(format!(
            "density of dimension {} on a grid of {} sites",
            rho.dim,
            grid.n_sites()
        )));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidState(format!("sigma must be positive, got {sigma}")));
    }
    let mut out = PhaseSpaceDistribution::cell_centered(
        DistributionKind::Husimi,
        Array2::zeros((resolution, resolution)),
    );
    let rows: Vec<Vec<f64>> = (0..resolution)
        .into_par_iter()
        .map(|i| {
            let x0 = out.x_center(i);
            (0..resolution)
                .map(|k| {
                    let (sites, amps) = packet_support(grid, x0, out.p_center(k), sigma);
                    packet_expectation(rho, &sites, &amps)
                })
                .collect()
        })
        .collect();
    for (i, row) in rows.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            out.values[[i, k]] = *v;
        }
    }
    out.normalize();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{make_gaussian, GaussianSpec};

    #[test]
    fn full_support_matches_make_gaussian() {
        let g = TorusGrid::new(32).unwrap();
        let spec = GaussianSpec::coherent(&g, 0.7, -1.3);
        let (sites, amps) = packet_support(&g, spec.center_x, spec.center_p, spec.sigma);
        assert_eq!(sites.len(), 32);
        let s = make_gaussian(&g, &spec).unwrap();
        for (j, a) in sites.iter().zip(&amps) {
            assert!((s.amplitudes[*j] - a).norm() < 1e-14);
        }
    }

    #[test]
    fn truncated_support_matches_make_gaussian() {
        let g = TorusGrid::new(1024).unwrap();
        let spec = GaussianSpec::coherent(&g, 3.0, 2.0);
        let (sites, amps) = packet_support(&g, spec.center_x, spec.center_p, spec.sigma);
        assert!(sites.len() < 1024);
        let s = make_gaussian(&g, &spec).unwrap();
        let mut dense = vec![C64::new(0.0, 0.0); 1024];
        for (j, a) in sites.iter().zip(&amps) {
            dense[*j] = *a;
        }
        let err = dense
            .iter()
            .zip(s.amplitudes.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn coherent_state_peaks_at_its_centre() {
        let g = TorusGrid::new(128).unwrap();
        let spec = GaussianSpec::coherent(&g, 1.0, 2.0);
        let s = make_gaussian(&g, &spec).unwrap();
        let h = husimi(&ReducedDensity::pure(s.amplitudes.as_slice().unwrap()), &g, 64, spec.sigma).unwrap();
        let (i, k) = h
            .values
            .indexed_iter()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(ix, _)| ix)
            .unwrap();
        assert!((h.x_center(i) - 1.0).abs() <= h.x_step);
        assert!((h.p_center(k) - 2.0).abs() <= h.p_step);
    }

    #[test]
    fn maximally_mixed_is_uniform() {
        let g = TorusGrid::new(64).unwrap();
        let h = husimi(&ReducedDensity::maximally_mixed(64), &g, 16, g.coherent_sigma()).unwrap();
        let mean = 1.0 / 256.0;
        for v in h.values.iter() {
            assert!((v / mean - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn small_resolution_is_rejected() {
        let g = TorusGrid::new(16).unwrap();
        assert!(husimi(&ReducedDensity::maximally_mixed(16), &g, 8, 0.5).is_err());
    }
}
