//! Discretized one- and two-particle Hilbert spaces on the torus
//! `x, p ∈ (-π, π]`, and Gaussian wavepacket preparation.

use std::f64::consts::{PI, TAU};

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::TorusTransform;

/// Default Bloch offset of the momentum ladder (half-integer momenta).
pub const DEFAULT_P_OFFSET: f64 = 0.5;
/// Default offset of the coupling potential `sin(x1 - x2 - offset)`.
pub const DEFAULT_COUPLING_OFFSET: f64 = 0.33;
/// Periodic images summed on each side when wrapping a Gaussian.
pub const GAUSSIAN_WINDINGS: i32 = 3;

/// One-particle discretization of the torus with `N` sites and `ħ = 2π/N`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    n_sites: usize,
    hbar_eff: f64,
    x_offset: f64,
    p_offset: f64,
}

impl TorusGrid {
    /// Grid with the default offsets (`x_offset = 0`, `p_offset = 0.5`).
    pub fn new(n_sites: usize) -> Result<Self> {
        Self::with_offsets(n_sites, 0.0, DEFAULT_P_OFFSET)
    }

    pub fn with_offsets(n_sites: usize, x_offset: f64, p_offset: f64) -> Result<Self> {
        if n_sites < 2 || !n_sites.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!(
                "number of sites must be a positive even integer, got {n_sites}"
            )));
        }
        for (name, v) in [("x_offset", x_offset), ("p_offset", p_offset)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::InvalidGrid(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        Ok(Self {
            n_sites,
            hbar_eff: TAU / n_sites as f64,
            x_offset,
            p_offset,
        })
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn hbar_eff(&self) -> f64 {
        self.hbar_eff
    }

    pub fn x_offset(&self) -> f64 {
        self.x_offset
    }

    pub fn p_offset(&self) -> f64 {
        self.p_offset
    }

    /// Lattice spacing in both `x` and `p` (equal to `ħ`).
    pub fn spacing(&self) -> f64 {
        self.hbar_eff
    }

    pub fn position(&self, j: usize) -> f64 {
        -PI + TAU * (j as f64 + self.x_offset) / self.n_sites as f64
    }

    pub fn momentum(&self, k: usize) -> f64 {
        -PI + TAU * (k as f64 + self.p_offset) / self.n_sites as f64
    }

    pub fn positions(&self) -> Array1<f64> {
        (0..self.n_sites).map(|j| self.position(j)).collect()
    }

    pub fn momenta(&self) -> Array1<f64> {
        (0..self.n_sites).map(|k| self.momentum(k)).collect()
    }

    /// Coherent-state width `σ = √ħ`, giving equal `x` and `p` uncertainties.
    pub fn coherent_sigma(&self) -> f64 {
        self.hbar_eff.sqrt()
    }
}

/// Wrap an angle into `(-π, π]`.
pub fn wrap_angle(v: f64) -> f64 {
    let w = (v + PI).rem_euclid(TAU) - PI;
    if w <= -PI {
        w + TAU
    } else {
        w
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RotorParams {
    pub kick_strength: f64,
    pub period: f64,
}

impl RotorParams {
    pub fn new(kick_strength: f64) -> Self {
        Self {
            kick_strength,
            period: 1.0,
        }
    }
}

/// Interaction `ε sin(x1 - x2 - offset)` applied together with the kicks.
///
/// The interaction carries a factor ħ in the Hamiltonian, which cancels the
/// 1/ħ of the propagator: the per-kick phase is `exp[-i ε sin(..)]` for every
/// grid size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    pub strength: f64,
    pub phase_offset: f64,
}

impl CouplingParams {
    pub fn new(strength: f64) -> Self {
        Self {
            strength,
            phase_offset: DEFAULT_COUPLING_OFFSET,
        }
    }

    pub fn potential(&self, x1: f64, x2: f64) -> f64 {
        self.strength * (x1 - x2 - self.phase_offset).sin()
    }

    /// Per-kick interaction phase factor.
    pub fn phase(&self, x1: f64, x2: f64) -> C64 {
        C64::from_polar(1.0, -self.potential(x1, x2))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub center_x: f64,
    pub center_p: f64,
    pub sigma: f64,
}

impl GaussianSpec {
    pub fn new(center_x: f64, center_p: f64, sigma: f64) -> Self {
        Self {
            center_x,
            center_p,
            sigma,
        }
    }

    /// Minimum-uncertainty packet with `σ = √ħ` on the given grid.
    pub fn coherent(grid: &TorusGrid, center_x: f64, center_p: f64) -> Self {
        Self::new(center_x, center_p, grid.coherent_sigma())
    }
}

/// Single-particle state in the position basis.
#[derive(Clone, Debug)]
pub struct OneParticleState {
    pub grid: TorusGrid,
    pub amplitudes: Array1<C64>,
}

impl OneParticleState {
    pub fn from_amplitudes(grid: TorusGrid, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != grid.n_sites() {
            return Err(Error::InvalidState(format!(
                "expected {} amplitudes, got {}",
                grid.n_sites(),
                amplitudes.len()
            )));
        }
        Ok(Self { grid, amplitudes })
    }

    /// Momentum eigenstate `|p_k⟩` written in the position basis.
    pub fn momentum_eigenstate(grid: TorusGrid, k: usize) -> Self {
        let mut buf = vec![C64::default(); grid.n_sites()];
        buf[k] = C64::new(1.0, 0.0);
        TorusTransform::new(&grid).to_position(&mut buf);
        Self {
            grid,
            amplitudes: Array1::from(buf),
        }
    }

    pub fn position_eigenstate(grid: TorusGrid, j: usize) -> Self {
        let mut amplitudes = Array1::zeros(grid.n_sites());
        amplitudes[j] = C64::new(1.0, 0.0);
        Self { grid, amplitudes }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("state has zero or non-finite norm".into()));
        }
        self.amplitudes.mapv_inplace(|z| z / n);
        Ok(())
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Amplitudes in the momentum basis.
    pub fn momentum_amplitudes(&self) -> Array1<C64> {
        let mut buf = self.amplitudes.to_vec();
        TorusTransform::new(&self.grid).to_momentum(&mut buf);
        Array1::from(buf)
    }

    pub fn position_probabilities(&self) -> Array1<f64> {
        self.amplitudes.mapv(|z| z.norm_sqr())
    }

    pub fn momentum_probabilities(&self) -> Array1<f64> {
        self.momentum_amplitudes().mapv(|z| z.norm_sqr())
    }

    /// `Σ x_j |ψ_j|²` over the fundamental domain.
    pub fn mean_position(&self) -> f64 {
        self.amplitudes
            .iter()
            .enumerate()
            .map(|(j, z)| self.grid.position(j) * z.norm_sqr())
            .sum()
    }

    pub fn mean_momentum(&self) -> f64 {
        self.momentum_probabilities()
            .iter()
            .enumerate()
            .map(|(k, w)| self.grid.momentum(k) * w)
            .sum()
    }
}

/// Joint position-basis amplitudes `A[j1, j2]` of two particles.
#[derive(Clone, Debug)]
pub struct TwoParticleState {
    pub grid1: TorusGrid,
    pub grid2: TorusGrid,
    pub amplitudes: Array2<C64>,
}

impl TwoParticleState {
    pub fn product(a: &OneParticleState, b: &OneParticleState) -> Self {
        let n1 = a.grid.n_sites();
        let n2 = b.grid.n_sites();
        let amplitudes =
            Array2::from_shape_fn((n1, n2), |(j1, j2)| a.amplitudes[j1] * b.amplitudes[j2]);
        Self {
            grid1: a.grid,
            grid2: b.grid,
            amplitudes,
        }
    }

    pub fn from_amplitudes(grid1: TorusGrid, grid2: TorusGrid, amplitudes: Array2<C64>) -> Result<Self> {
        if amplitudes.dim() != (grid1.n_sites(), grid2.n_sites()) {
            return Err(Error::InvalidState(format!(
                "amplitude shape {:?} does not match grids ({}, {})",
                amplitudes.dim(),
                grid1.n_sites(),
                grid2.n_sites()
            )));
        }
        Ok(Self {
            grid1,
            grid2,
            amplitudes: amplitudes.as_standard_layout().into_owned(),
        })
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) -> Result<()> {
        let n = self.norm_sqr().sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidState("state has zero or non-finite norm".into()));
        }
        self.amplitudes.mapv_inplace(|z| z / n);
        Ok(())
    }

    /// Bytes held by the amplitude array.
    pub fn size_bytes(n1: usize, n2: usize) -> u64 {
        (n1 * n2 * std::mem::size_of::<C64>()) as u64
    }
}

/// Gaussian wavepacket `exp[i p0 (x - x0)/ħ - (x - x0)²/2σ²]`, summed over
/// `±3` periodic images and normalized.
pub fn make_gaussian(grid: &TorusGrid, spec: &GaussianSpec) -> Result<OneParticleState> {
    if !(spec.sigma > 0.0 && spec.sigma.is_finite()) {
        return Err(Error::InvalidState(format!("sigma must be positive, got {}", spec.sigma)));
    }
    for (name, c) in [("center_x", spec.center_x), ("center_p", spec.center_p)] {
        if !(c > -PI && c < PI) {
            return Err(Error::InvalidState(format!("{name} = {c} lies outside (-π, π)")));
        }
    }
    let hbar = grid.hbar_eff();
    let two_sigma_sq = 2.0 * spec.sigma * spec.sigma;
    let amplitudes: Array1<C64> = (0..grid.n_sites())
        .map(|j| {
            let x = grid.position(j);
            (-GAUSSIAN_WINDINGS..=GAUSSIAN_WINDINGS)
                .map(|w| {
                    let d = x - spec.center_x + TAU * w as f64;
                    C64::from_polar((-d * d / two_sigma_sq).exp(), spec.center_p * d / hbar)
                })
                .sum()
        })
        .collect();
    let mut state = OneParticleState {
        grid: *grid,
        amplitudes,
    };
    state.normalize().map_err(|_| {
        Error::InvalidState(format!(
            "Gaussian of width {} has zero norm on a grid of spacing {}",
            spec.sigma,
            grid.spacing()
        ))
    })?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_invariants() {
        for n in [2, 16, 512, 2048] {
            let g = TorusGrid::new(n).unwrap();
            assert!((g.hbar_eff() * n as f64 - TAU).abs() < 1e-12);
            for j in [0, n / 2, n - 1] {
                // node 0 sits on -π, the same torus point as π
                let x = g.position(j);
                assert!((-PI..PI).contains(&x));
                assert!((wrap_angle(x).abs() - x.abs()).abs() < 1e-12);
            }
        }
        assert!(TorusGrid::new(15).is_err());
        assert!(TorusGrid::new(0).is_err());
        assert!(TorusGrid::with_offsets(16, 1.0, 0.0).is_err());
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(PI / 2.0 + 2.0) - (PI / 2.0 + 2.0 - TAU)).abs() < 1e-15);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(7.0 * PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn gaussian_at_fig2_center() {
        let g = TorusGrid::new(512).unwrap();
        let psi = make_gaussian(&g, &GaussianSpec::coherent(&g, 1.0, 2.0)).unwrap();
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((psi.mean_position() - 1.0).abs() < 0.01);
        assert!((psi.mean_momentum() - 2.0).abs() < 0.01);
    }

    #[test]
    fn gaussian_variances() {
        let g = TorusGrid::new(512).unwrap();
        let sigma = 0.08;
        let psi = make_gaussian(&g, &GaussianSpec::new(0.3, -0.5, sigma)).unwrap();
        let px = psi.position_probabilities();
        let mx = psi.mean_position();
        let vx: f64 = px.iter().enumerate().map(|(j, w)| (g.position(j) - mx).powi(2) * w).sum();
        let pp = psi.momentum_probabilities();
        let mp = psi.mean_momentum();
        let vp: f64 = pp.iter().enumerate().map(|(k, w)| (g.momentum(k) - mp).powi(2) * w).sum();
        let hbar = g.hbar_eff();
        assert!((vx / (sigma * sigma / 2.0) - 1.0).abs() < 1e-3, "vx = {vx}");
        assert!((vp / (hbar * hbar / (2.0 * sigma * sigma)) - 1.0).abs() < 1e-3, "vp = {vp}");
    }

    #[test]
    fn centered_gaussian_is_reflection_symmetric() {
        // with x_offset = 0 the reflection x -> -x maps site j to N - j
        let g = TorusGrid::new(64).unwrap();
        let psi = make_gaussian(&g, &GaussianSpec::new(0.0, 0.0, 0.3)).unwrap();
        let n = g.n_sites();
        let ratio = psi.amplitudes[1] / psi.amplitudes[n - 1];
        for j in 1..n {
            let r = psi.amplitudes[j] / psi.amplitudes[n - j];
            assert!((r - ratio).norm() < 1e-12);
        }
        assert!((ratio.norm() - 1.0).abs() < 1e-12);
        assert!(psi.mean_momentum().abs() < 1e-12);
    }

    #[test]
    fn pathological_sigma_is_rejected() {
        let g = TorusGrid::new(16).unwrap();
        assert!(make_gaussian(&g, &GaussianSpec::new(0.1, 0.0, 1e-3)).is_err());
        assert!(make_gaussian(&g, &GaussianSpec::new(0.1, 0.0, 0.0)).is_err());
        assert!(make_gaussian(&g, &GaussianSpec::new(3.5, 0.0, 0.3)).is_err());
    }

    #[test]
    fn coupling_phase_is_hbar_free() {
        let c = CouplingParams::new(4.0);
        let coarse = TorusGrid::new(64).unwrap();
        let fine = TorusGrid::new(128).unwrap();
        // with x_offset = 0, coarse site j coincides with fine site 2j
        for j1 in (0..64).step_by(7) {
            for j2 in (0..64).step_by(5) {
                let a = c.phase(coarse.position(j1), coarse.position(j2));
                let b = c.phase(fine.position(2 * j1), fine.position(2 * j2));
                assert!((a - b).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn product_state_shape_and_norm() {
        let g1 = TorusGrid::new(16).unwrap();
        let g2 = TorusGrid::new(32).unwrap();
        let a = make_gaussian(&g1, &GaussianSpec::coherent(&g1, 1.0, 2.0)).unwrap();
        let b = make_gaussian(&g2, &GaussianSpec::coherent(&g2, -1.0, 0.5)).unwrap();
        let s = TwoParticleState::product(&a, &b);
        assert_eq!(s.amplitudes.dim(), (16, 32));
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}
