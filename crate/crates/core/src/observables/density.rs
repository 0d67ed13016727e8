use ndarray::{Array2, ArrayView2, Zip};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::torus::TwoParticleState;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Particle {
    First,
    Second,
}

/// One-particle density matrix in the position basis.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedDensity {
    pub dim: usize,
    pub matrix: Array2<C64>,
}

impl ReducedDensity {
    pub fn from_matrix(matrix: Array2<C64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c || r == 0 {
            return Err(Error::InvalidState(format!("density matrix must be square, got {r}×{c}")));
        }
        Ok(Self { dim: r, matrix })
    }

    /// `|ψ⟩⟨ψ|`.
    pub fn pure(amplitudes: &[C64]) -> Self {
        let n = amplitudes.len();
        let matrix = Array2::from_shape_fn((n, n), |(m, k)| amplitudes[m] * amplitudes[k].conj());
        Self { dim: n, matrix }
    }

    /// `1/N` times the identity.
    pub fn maximally_mixed(dim: usize) -> Self {
        let mut matrix = Array2::zeros((dim, dim));
        matrix.diag_mut().fill(C64::new(1.0 / dim as f64, 0.0));
        Self { dim, matrix }
    }

    /// Equal-weight average of densities of the same dimension.
    pub fn mixture(parts: &[ReducedDensity]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidState("empty mixture".into()))?;
        let mut matrix = Array2::<C64>::zeros((first.dim, first.dim));
        for part in parts {
            if part.dim != first.dim {
                return Err(Error::Contract(format!(
                    "mixture of dimensions {} and {}",
                    first.dim, part.dim
                )));
            }
            matrix += &part.matrix;
        }
        let w = 1.0 / parts.len() as f64;
        matrix.mapv_inplace(|z| z * w);
        Ok(Self { dim: first.dim, matrix })
    }

    pub fn trace(&self) -> C64 {
        self.matrix.diag().sum()
    }

    /// Largest `|ρ - ρ†|` entry.
    pub fn hermiticity_error(&self) -> f64 {
        let m = &self.matrix;
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for k in i..self.dim {
                worst = worst.max((m[[i, k]] - m[[k, i]].conj()).norm());
            }
        }
        worst
    }
}

/// `M M†` of a complex matrix, computed with real products:
/// for `M = X + iY`, `M M† = XXᵀ + YYᵀ + i(YXᵀ - XYᵀ)`.
fn gram(m: ArrayView2<C64>) -> Array2<C64> {
    let x = m.mapv(|z| z.re);
    let y = m.mapv(|z| z.im);
    let re = x.dot(&x.t()) + y.dot(&y.t());
    let im = y.dot(&x.t()) - x.dot(&y.t());
    let mut out = Array2::zeros(re.dim());
    Zip::from(&mut out)
        .and(&re)
        .and(&im)
        .for_each(|o, &r, &i| *o = C64::new(r, i));
    out
}

/// Partial trace over the other particle: `ρ₁ = A A†`, `ρ₂ = Aᵀ Ā`.
pub fn reduce(state: &TwoParticleState, which: Particle) -> ReducedDensity {
    let a = state.amplitudes.view();
    let matrix = match which {
        Particle::First => gram(a),
        Particle::Second => gram(a.t()),
    };
    ReducedDensity {
        dim: matrix.nrows(),
        matrix,
    }
}

/// `Tr ρ² = Σ |ρ_mn|²`.
pub fn purity(rho: &ReducedDensity) -> f64 {
    rho.matrix.iter().map(|z| z.norm_sqr()).sum()
}

/// Purity of either reduced state of a pure two-particle state, from the Gram
/// matrix of the smaller dimension.
pub fn state_purity(state: &TwoParticleState) -> f64 {
    let a = state.amplitudes.view();
    let g = if a.nrows() <= a.ncols() { gram(a) } else { gram(a.t()) };
    g.iter().map(|z| z.norm_sqr()).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PurityMetadata {
    pub n1: usize,
    pub n2: usize,
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
    pub seed: u64,
    pub n_initial_states: usize,
}

/// Purity against kick count, averaged over initial states.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PuritySeries {
    pub times: Vec<usize>,
    pub values: Vec<f64>,
    /// Standard error of the mean over initial states (zero for one state).
    pub stderr: Vec<f64>,
    pub metadata: PurityMetadata,
}

impl PuritySeries {
    /// Average per-state series sampled at `t = 0, 1, …`.
    pub fn from_runs(runs: &[Vec<f64>], metadata: PurityMetadata) -> Result<Self> {
        let len = runs
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidState("no purity runs".into()))?;
        if runs.iter().any(|r| r.len() != len) {
            return Err(Error::Contract("purity runs differ in length".into()));
        }
        let n = runs.len() as f64;
        let mut values = Vec::with_capacity(len);
        let mut stderr = Vec::with_capacity(len);
        for t in 0..len {
            let mean = runs.iter().map(|r| r[t]).sum::<f64>() / n;
            let se = if runs.len() > 1 {
                let var = runs.iter().map(|r| (r[t] - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            values.push(mean);
            stderr.push(se);
        }
        Ok(Self {
            times: (0..len).collect(),
            values,
            stderr,
            metadata,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Check `1/min(N₁,N₂) ≤ P ≤ 1` up to `tol`.
    pub fn check_bounds(&self, tol: f64) -> Result<()> {
        let lower = 1.0 / self.metadata.n1.min(self.metadata.n2) as f64;
        for (t, &p) in self.times.iter().zip(&self.values) {
            if !(p >= lower - tol && p <= 1.0 + tol) {
                return Err(Error::Contract(format!("purity {p} at t={t} outside [{lower}, 1]")));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{make_gaussian, GaussianSpec, TorusGrid};
    use ndarray::Array2;

    #[test]
    fn bell_state() {
        let g = TorusGrid::new(4).unwrap();
        let mut a = Array2::zeros((4, 4));
        a[[0, 0]] = C64::new(0.5f64.sqrt(), 0.0);
        a[[1, 1]] = C64::new(0.5f64.sqrt(), 0.0);
        let s = TwoParticleState::from_amplitudes(g, g, a).unwrap();
        let rho = reduce(&s, Particle::First);
        for i in 0..4 {
            for k in 0..4 {
                let expect = if i == k && i < 2 { 0.5 } else { 0.0 };
                assert!((rho.matrix[[i, k]] - C64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
        assert!((purity(&rho) - 0.5).abs() < 1e-15);
        assert!((state_purity(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn product_state_reduces_to_projector() {
        let g1 = TorusGrid::new(16).unwrap();
        let g2 = TorusGrid::new(32).unwrap();
        let a = make_gaussian(&g1, &GaussianSpec::coherent(&g1, 0.4, -1.0)).unwrap();
        let b = make_gaussian(&g2, &GaussianSpec::coherent(&g2, 2.0, 0.3)).unwrap();
        let s = TwoParticleState::product(&a, &b);
        let rho = reduce(&s, Particle::First);
        let proj = ReducedDensity::pure(a.amplitudes.as_slice().unwrap());
        let err = (&rho.matrix - &proj.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(err < 1e-12);
        assert!((state_purity(&s) - 1.0).abs() < 1e-12);
        assert_eq!(reduce(&s, Particle::Second).dim, 32);
    }

    #[test]
    fn maximally_mixed_purity() {
        for n in [2, 16, 64] {
            assert!((purity(&ReducedDensity::maximally_mixed(n)) - 1.0 / n as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn series_averaging() {
        let meta = PurityMetadata {
            n1: 4,
            n2: 4,
            k1: 1.0,
            k2: 1.0,
            eps: 0.0,
            seed: 0,
            n_initial_states: 2,
        };
        let s = PuritySeries::from_runs(&[vec![1.0, 0.5], vec![1.0, 0.7]], meta.clone()).unwrap();
        assert_eq!(s.times, vec![0, 1]);
        assert!((s.values[1] - 0.6).abs() < 1e-15);
        assert!((s.stderr[1] - 0.1).abs() < 1e-12);
        assert!(s.check_bounds(1e-9).is_ok());
        let bad = PuritySeries::from_runs(&[vec![1.0, 0.1]], meta).unwrap();
        assert!(bad.check_bounds(1e-9).is_err());
    }
}
