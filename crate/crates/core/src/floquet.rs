//! Split-operator Floquet evolution of the kicked rotators.
//!
//! One period is kick (with the interaction) followed by free rotation:
//!
//! ```text
//! U = exp[-i p²/(2ħ)] · exp[-i K cos x / ħ] · exp[-i ε sin(x1 - x2 - c)]
//! ```
//!
//! The kick is diagonal in position and the free part in momentum, so each
//! step is two diagonal multiplications joined by FFTs. The offset phases of
//! the torus transform (see [`crate::spectral`]) commute with the free phase,
//! which leaves `ψ' = pre* ⊙ IFFT(free ⊙ FFT(pre ⊙ kick ⊙ ψ)) / N`.
//!
//! [`dense_floquet_one`] and [`dense_floquet_two`] build the same unitary as an
//! explicit matrix from the momentum-basis kernel `exp(-i p x / ħ)`, for
//! checking the fast path on small grids.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rustfft::Fft;

use crate::error::{Error, Result};
use crate::spectral::{transpose_into, TorusTransform};
use crate::torus::{CouplingParams, OneParticleState, RotorParams, TorusGrid, TwoParticleState};

/// Largest one-particle dimension accepted by the dense oracle.
pub const DENSE_ONE_LIMIT: usize = 64;
/// Largest joint dimension `N1·N2` accepted by the dense oracle.
pub const DENSE_TWO_LIMIT: usize = 1024;

fn kick_phase(grid: &TorusGrid, params: &RotorParams, j: usize) -> C64 {
    C64::from_polar(
        1.0,
        -params.kick_strength * grid.position(j).cos() / grid.hbar_eff(),
    )
}

fn free_phase(grid: &TorusGrid, params: &RotorParams, k: usize) -> C64 {
    let p = grid.momentum(k);
    C64::from_polar(1.0, -p * p * params.period / (2.0 * grid.hbar_eff()))
}

/// Precomputed one-period propagator of a single kicked rotator.
#[derive(Clone, Debug)]
pub struct OneParticleFloquet {
    grid: TorusGrid,
    transform: TorusTransform,
    // pre ⊙ kick
    position_phase: Vec<C64>,
    free: Vec<C64>,
    // pre* / N
    restore: Vec<C64>,
}

impl OneParticleFloquet {
    pub fn new(grid: &TorusGrid, params: &RotorParams) -> Self {
        let n = grid.n_sites();
        let transform = TorusTransform::new(grid);
        let pre = transform.pre_phases();
        let position_phase = (0..n).map(|j| pre[j] * kick_phase(grid, params, j)).collect();
        let free = (0..n).map(|k| free_phase(grid, params, k)).collect();
        let restore = pre.iter().map(|w| w.conj() / n as f64).collect();
        Self {
            grid: *grid,
            transform,
            position_phase,
            free,
            restore,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// Advance `buf` (position amplitudes) by one period.
    pub fn step_in_place(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.grid.n_sites());
        mul_assign(buf, &self.position_phase);
        self.transform.forward_plan().process(buf);
        mul_assign(buf, &self.free);
        self.transform.inverse_plan().process(buf);
        mul_assign(buf, &self.restore);
    }

    /// Undo one period.
    pub fn step_back_in_place(&self, buf: &mut [C64]) {
        assert_eq!(buf.len(), self.grid.n_sites());
        let pre = self.transform.pre_phases();
        mul_assign(buf, pre);
        self.transform.forward_plan().process(buf);
        buf.iter_mut().zip(&self.free).for_each(|(z, f)| *z *= f.conj());
        self.transform.inverse_plan().process(buf);
        buf.iter_mut()
            .zip(&self.position_phase)
            .for_each(|(z, w)| *z *= w.conj());
        let scale = (self.grid.n_sites() as f64).recip();
        buf.iter_mut().for_each(|z| *z *= scale);
    }

    pub fn step(&self, state: &mut OneParticleState) {
        debug_assert_eq!(state.grid, self.grid);
        let buf = state
            .amplitudes
            .as_slice_mut()
            .expect("state amplitudes are contiguous");
        self.step_in_place(buf);
    }

    pub fn step_back(&self, state: &mut OneParticleState) {
        let buf = state
            .amplitudes
            .as_slice_mut()
            .expect("state amplitudes are contiguous");
        self.step_back_in_place(buf);
    }

    pub fn evolve(&self, state: &mut OneParticleState, n_steps: usize) {
        for _ in 0..n_steps {
            self.step(state);
        }
    }
}

/// One kick period applied to a single rotator.
pub fn floquet_step_one(state: &OneParticleState, params: &RotorParams) -> OneParticleState {
    let mut out = state.clone();
    OneParticleFloquet::new(&state.grid, params).step(&mut out);
    out
}

/// Precomputed one-period propagator of the coupled pair.
#[derive(Clone, Debug)]
pub struct TwoParticleFloquet {
    grid1: TorusGrid,
    grid2: TorusGrid,
    t1: TorusTransform,
    t2: TorusTransform,
    // pre1 ⊗ pre2 ⊙ kick1 ⊗ kick2 ⊙ coupling, row-major N1 × N2
    position_phase: Vec<C64>,
    free1: Vec<C64>,
    free2: Vec<C64>,
    restore1: Vec<C64>,
    restore2: Vec<C64>,
}

impl TwoParticleFloquet {
    pub fn new(
        grid1: &TorusGrid,
        grid2: &TorusGrid,
        p1: &RotorParams,
        p2: &RotorParams,
        coupling: &CouplingParams,
    ) -> Self {
        let (n1, n2) = (grid1.n_sites(), grid2.n_sites());
        let t1 = TorusTransform::new(grid1);
        let t2 = TorusTransform::new(grid2);
        let side1: Vec<C64> = (0..n1)
            .map(|j| t1.pre_phases()[j] * kick_phase(grid1, p1, j))
            .collect();
        let side2: Vec<C64> = (0..n2)
            .map(|j| t2.pre_phases()[j] * kick_phase(grid2, p2, j))
            .collect();
        let mut position_phase = Vec::with_capacity(n1 * n2);
        for (j1, s1) in side1.iter().enumerate() {
            let x1 = grid1.position(j1);
            for (j2, s2) in side2.iter().enumerate() {
                position_phase.push(s1 * s2 * coupling.phase(x1, grid2.position(j2)));
            }
        }
        let free1 = (0..n1).map(|k| free_phase(grid1, p1, k)).collect();
        let free2 = (0..n2).map(|k| free_phase(grid2, p2, k)).collect();
        let restore1 = t1.pre_phases().iter().map(|w| w.conj() / n1 as f64).collect();
        let restore2 = t2.pre_phases().iter().map(|w| w.conj() / n2 as f64).collect();
        Self {
            grid1: *grid1,
            grid2: *grid2,
            t1,
            t2,
            position_phase,
            free1,
            free2,
            restore1,
            restore2,
        }
    }

    pub fn grids(&self) -> (TorusGrid, TorusGrid) {
        (self.grid1, self.grid2)
    }

    /// Bytes of working memory used by one propagator and one step.
    pub fn working_bytes(n1: usize, n2: usize) -> u64 {
        // phase table + transpose scratch
        2 * TwoParticleState::size_bytes(n1, n2)
    }

    fn check(&self, state: &TwoParticleState) -> Result<()> {
        if state.grid1 != self.grid1 || state.grid2 != self.grid2 {
            return Err(Error::Contract(format!(
                "state grids ({}, {}) do not match propagator grids ({}, {})",
                state.grid1.n_sites(),
                state.grid2.n_sites(),
                self.grid1.n_sites(),
                self.grid2.n_sites()
            )));
        }
        Ok(())
    }

    /// Advance a row-major `N1 × N2` buffer by one period.
    pub fn step_in_place(&self, buf: &mut [C64]) {
        let (n1, n2) = (self.grid1.n_sites(), self.grid2.n_sites());
        assert_eq!(buf.len(), n1 * n2);
        mul_assign(buf, &self.position_phase);
        let mut scratch = vec![C64::default(); n1 * n2];
        self.momentum_sandwich(buf, &mut scratch, &self.free1, &self.free2, false);
        for (row, r1) in buf.chunks_exact_mut(n2).zip(&self.restore1) {
            row.iter_mut()
                .zip(&self.restore2)
                .for_each(|(z, r2)| *z *= r1 * r2);
        }
    }

    /// Undo one period.
    pub fn step_back_in_place(&self, buf: &mut [C64]) {
        let (n1, n2) = (self.grid1.n_sites(), self.grid2.n_sites());
        assert_eq!(buf.len(), n1 * n2);
        let (pre1, pre2) = (self.t1.pre_phases(), self.t2.pre_phases());
        for (row, a) in buf.chunks_exact_mut(n2).zip(pre1) {
            row.iter_mut().zip(pre2).for_each(|(z, b)| *z *= a * b);
        }
        let mut scratch = vec![C64::default(); n1 * n2];
        self.momentum_sandwich(buf, &mut scratch, &self.free1, &self.free2, true);
        let scale = ((n1 * n2) as f64).recip();
        buf.iter_mut()
            .zip(&self.position_phase)
            .for_each(|(z, w)| *z *= w.conj() * scale);
    }

    // FFT both axes, multiply by the separable free phase (conjugated if
    // `backward`), inverse FFT both axes; unnormalized
    fn momentum_sandwich(
        &self,
        buf: &mut [C64],
        scratch: &mut [C64],
        free1: &[C64],
        free2: &[C64],
        backward: bool,
    ) {
        let (n1, n2) = (self.grid1.n_sites(), self.grid2.n_sites());
        let fwd2: &Arc<dyn Fft<f64>> = self.t2.forward_plan();
        let inv2: &Arc<dyn Fft<f64>> = self.t2.inverse_plan();
        fwd2.process(buf);
        transpose_into(buf, scratch, n1, n2);
        self.t1.forward_plan().process(scratch);
        // scratch is now N2 × N1, indexed [k2][k1]
        for (row, f2) in scratch.chunks_exact_mut(n1).zip(free2) {
            let f2 = if backward { f2.conj() } else { *f2 };
            row.iter_mut().zip(free1).for_each(|(z, f1)| {
                let f1 = if backward { f1.conj() } else { *f1 };
                *z *= f1 * f2;
            });
        }
        self.t1.inverse_plan().process(scratch);
        transpose_into(scratch, buf, n2, n1);
        inv2.process(buf);
    }

    pub fn step(&self, state: &mut TwoParticleState) -> Result<()> {
        self.check(state)?;
        let buf = state
            .amplitudes
            .as_slice_mut()
            .expect("two-particle amplitudes are standard layout");
        self.step_in_place(buf);
        Ok(())
    }

    pub fn step_back(&self, state: &mut TwoParticleState) -> Result<()> {
        self.check(state)?;
        let buf = state
            .amplitudes
            .as_slice_mut()
            .expect("two-particle amplitudes are standard layout");
        self.step_back_in_place(buf);
        Ok(())
    }
}

/// One kick period applied to the coupled pair.
pub fn floquet_step_two(
    state: &TwoParticleState,
    p1: &RotorParams,
    p2: &RotorParams,
    coupling: &CouplingParams,
) -> Result<TwoParticleState> {
    let mut out = state.clone();
    TwoParticleFloquet::new(&state.grid1, &state.grid2, p1, p2, coupling).step(&mut out)?;
    Ok(out)
}

fn mul_assign(buf: &mut [C64], by: &[C64]) {
    buf.iter_mut().zip(by).for_each(|(z, w)| *z *= w);
}

// free rotation as a dense matrix: M† diag(free) M, with M_kj = exp(-i p_k x_j/ħ)/√N
fn dense_free(grid: &TorusGrid, params: &RotorParams) -> Array2<C64> {
    let n = grid.n_sites();
    let hbar = grid.hbar_eff();
    let norm = (n as f64).sqrt().recip();
    let m = Array2::from_shape_fn((n, n), |(k, j)| {
        C64::from_polar(norm, -grid.momentum(k) * grid.position(j) / hbar)
    });
    let free: Array1<C64> = (0..n).map(|k| free_phase(grid, params, k)).collect();
    Array2::from_shape_fn((n, n), |(a, b)| {
        (0..n).map(|k| m[[k, a]].conj() * free[k] * m[[k, b]]).sum()
    })
}

/// Dense `N × N` Floquet matrix of one kicked rotator, for `N ≤ 64`.
pub fn dense_floquet_one(grid: &TorusGrid, params: &RotorParams) -> Result<Array2<C64>> {
    let n = grid.n_sites();
    if n > DENSE_ONE_LIMIT {
        return Err(Error::OracleTooLarge {
            dim: n,
            limit: DENSE_ONE_LIMIT,
        });
    }
    let free = dense_free(grid, params);
    Ok(Array2::from_shape_fn((n, n), |(a, b)| {
        free[[a, b]] * kick_phase(grid, params, b)
    }))
}

/// Dense `(N1 N2) × (N1 N2)` Floquet matrix of the coupled pair, for
/// `N1·N2 ≤ 1024`. Basis index is `j1 * N2 + j2`.
pub fn dense_floquet_two(
    grid1: &TorusGrid,
    grid2: &TorusGrid,
    p1: &RotorParams,
    p2: &RotorParams,
    coupling: &CouplingParams,
) -> Result<Array2<C64>> {
    let (n1, n2) = (grid1.n_sites(), grid2.n_sites());
    let dim = n1 * n2;
    if dim > DENSE_TWO_LIMIT {
        return Err(Error::OracleTooLarge {
            dim,
            limit: DENSE_TWO_LIMIT,
        });
    }
    let f1 = dense_free(grid1, p1);
    let f2 = dense_free(grid2, p2);
    let kick: Array1<C64> = (0..dim)
        .map(|i| {
            let (j1, j2) = (i / n2, i % n2);
            kick_phase(grid1, p1, j1)
                * kick_phase(grid2, p2, j2)
                * coupling.phase(grid1.position(j1), grid2.position(j2))
        })
        .collect();
    Ok(Array2::from_shape_fn((dim, dim), |(a, b)| {
        f1[[a / n2, b / n2]] * f2[[a % n2, b % n2]] * kick[b]
    }))
}
