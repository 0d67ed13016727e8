//! Classical limit: the standard map, tangent-map Lyapunov exponents and
//! Liouville evolution of phase-space ensembles.
//!
//! The interaction carries a factor ħ and vanishes classically, so nothing in
//! this module takes a coupling strength; the classical pair factorizes.

use std::f64::consts::{PI, TAU};

use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{DistributionKind, PhaseSpaceDistribution};
use crate::rng::{self, Rng};
use crate::torus::{wrap_angle, GaussianSpec};

/// Steps of the finite-time exponent used to screen out island points.
pub const SCREEN_STEPS: usize = 50;
/// Finite-time exponent below which a point is treated as island-trapped.
pub const SCREEN_THRESHOLD: f64 = 0.1;
const MAX_SCREEN_ATTEMPTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub x: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(x: f64, p: f64) -> Self {
        Self {
            x: wrap_angle(x),
            p: wrap_angle(p),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    pub dx: f64,
    pub dp: f64,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.dx.hypot(self.dp)
    }
}

/// Kick then drift: `p' = p + K sin x`, `x' = x + p'`, both wrapped.
pub fn standard_map_step(pt: PhasePoint, kick: f64) -> PhasePoint {
    let p = wrap_angle(pt.p + kick * pt.x.sin());
    PhasePoint {
        x: wrap_angle(pt.x + p),
        p,
    }
}

/// Jacobian of [`standard_map_step`] at `x`, acting on `(dx, dp)`:
/// `[[1 + K cos x, 1], [K cos x, 1]]`.
pub fn jacobian(x: f64, kick: f64) -> [[f64; 2]; 2] {
    let c = kick * x.cos();
    [[1.0 + c, 1.0], [c, 1.0]]
}

/// Advance a point and a tangent vector together.
pub fn tangent_step(pt: PhasePoint, v: TangentVector, kick: f64) -> (PhasePoint, TangentVector) {
    let j = jacobian(pt.x, kick);
    let v = TangentVector {
        dx: j[0][0] * v.dx + j[0][1] * v.dp,
        dp: j[1][0] * v.dx + j[1][1] * v.dp,
    };
    (standard_map_step(pt, kick), v)
}

/// Finite-time exponent from `n_steps` renormalized tangent iterations.
pub fn finite_time_exponent(pt: PhasePoint, kick: f64, n_steps: usize) -> f64 {
    let mut pt = pt;
    let mut v = TangentVector { dx: 1.0, dp: 0.0 };
    let mut sum = 0.0;
    for _ in 0..n_steps {
        let (next, w) = tangent_step(pt, v, kick);
        let n = w.norm();
        sum += n.ln();
        v = TangentVector {
            dx: w.dx / n,
            dp: w.dp / n,
        };
        pt = next;
    }
    sum / n_steps as f64
}

/// Same exponent from the separation of two nearby trajectories, renormalized
/// to `d0` after every step.
pub fn separation_exponent(pt: PhasePoint, kick: f64, n_steps: usize, d0: f64) -> f64 {
    let mut a = pt;
    let mut b = PhasePoint::new(pt.x + d0, pt.p);
    let mut sum = 0.0;
    for _ in 0..n_steps {
        a = standard_map_step(a, kick);
        b = standard_map_step(b, kick);
        let dx = wrap_angle(b.x - a.x);
        let dp = wrap_angle(b.p - a.p);
        let d = dx.hypot(dp);
        sum += (d / d0).ln();
        b = PhasePoint::new(a.x + dx * d0 / d, a.p + dp * d0 / d);
    }
    sum / n_steps as f64
}

/// Point drawn uniformly from the torus.
pub fn uniform_point(rng: &mut Rng) -> PhasePoint {
    PhasePoint::new(rng.random_range(-PI..PI), rng.random_range(-PI..PI))
}

/// Whether the island-exclusion heuristic applies at this kick strength.
pub fn is_mixed_regime(kick: f64) -> bool {
    kick > 1.0 && kick < 7.0
}

/// Draw a point uniformly from the torus, re-drawing island candidates when
/// the dynamics is mixed.
///
/// Fails for `K ≤ 1`, where there is no chaotic sea to place points in.
pub fn sample_chaotic_point(kick: f64, rng: &mut Rng) -> Result<PhasePoint> {
    if kick <= 1.0 {
        return Err(Error::NoChaoticSea { kick, tried: 0 });
    }
    if !is_mixed_regime(kick) {
        return Ok(uniform_point(rng));
    }
    for _ in 0..MAX_SCREEN_ATTEMPTS {
        let pt = uniform_point(rng);
        if finite_time_exponent(pt, kick, SCREEN_STEPS) >= SCREEN_THRESHOLD {
            return Ok(pt);
        }
    }
    Err(Error::NoChaoticSea {
        kick,
        tried: MAX_SCREEN_ATTEMPTS,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    /// Exponent per kick.
    pub lambda: f64,
    pub std_error: f64,
    pub n_steps: usize,
    pub n_samples: usize,
    /// Island candidates that were re-drawn.
    pub n_rejected: usize,
}

impl LyapunovEstimate {
    fn from_samples(values: &[f64], n_steps: usize, n_rejected: usize) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            lambda: mean.max(0.0),
            std_error: (var / n).sqrt(),
            n_steps,
            n_samples: values.len(),
            n_rejected,
        }
    }
}

/// `ln(K/2)`, the large-K approximation of the exponent.
pub fn lyapunov_formula(kick: f64) -> f64 {
    (kick / 2.0).ln()
}

// initial points for the exponent estimators: one stream per sample, island
// candidates re-drawn from the same stream
fn lyapunov_points(kick: f64, n_samples: usize, seed: u64) -> Result<(Vec<PhasePoint>, usize)> {
    let key = rng::param_key(&[kick]);
    let draws: Vec<Option<(PhasePoint, usize)>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[key, 0x1A7, i as u64]);
            if !is_mixed_regime(kick) {
                return Some((uniform_point(&mut r), 0));
            }
            (0..MAX_SCREEN_ATTEMPTS).find_map(|tries| {
                let pt = uniform_point(&mut r);
                (finite_time_exponent(pt, kick, SCREEN_STEPS) >= SCREEN_THRESHOLD).then_some((pt, tries))
            })
        })
        .collect();
    let mut points = Vec::with_capacity(n_samples);
    let mut rejected = 0;
    for d in draws {
        let (pt, tries) = d.ok_or(Error::NoChaoticSea {
            kick,
            tried: MAX_SCREEN_ATTEMPTS,
        })?;
        points.push(pt);
        rejected += tries;
    }
    Ok((points, rejected))
}

/// Benettin estimate: mean over random initial points of the tangent-vector
/// growth rate with per-step renormalization.
pub fn lyapunov_exponent(
    kick: f64,
    n_samples: usize,
    n_steps: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n_samples == 0 {
        return Err(Error::Config("lyapunov estimate needs at least one sample".into()));
    }
    let (points, rejected) = lyapunov_points(kick, n_samples, seed)?;
    let values: Vec<f64> = points
        .par_iter()
        .map(|&pt| finite_time_exponent(pt, kick, n_steps))
        .collect();
    Ok(LyapunovEstimate::from_samples(&values, n_steps, rejected))
}

/// Two-trajectory estimate on the same initial points as
/// [`lyapunov_exponent`].
pub fn lyapunov_by_separation(
    kick: f64,
    n_samples: usize,
    n_steps: usize,
    seed: u64,
) -> Result<LyapunovEstimate> {
    if n_samples == 0 {
        return Err(Error::Config("lyapunov estimate needs at least one sample".into()));
    }
    let (points, rejected) = lyapunov_points(kick, n_samples, seed)?;
    let values: Vec<f64> = points
        .par_iter()
        .map(|&pt| separation_exponent(pt, kick, n_steps, 1e-9))
        .collect();
    Ok(LyapunovEstimate::from_samples(&values, n_steps, rejected))
}

/// Uniformly weighted cloud of phase points.
#[derive(Clone, Debug, PartialEq)]
pub struct ClassicalEnsemble {
    pub points: Vec<PhasePoint>,
}

impl ClassicalEnsemble {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `M` points from the bivariate Gaussian whose marginals match `|ψ|²` of the
/// quantum packet: `std(x) = σ/√2`, `std(p) = ħ/(√2 σ)`.
pub fn sample_gaussian_ensemble(spec: &GaussianSpec, hbar: f64, m: usize, seed: u64) -> ClassicalEnsemble {
    let sx = spec.sigma / 2f64.sqrt();
    let sp = hbar / (2f64.sqrt() * spec.sigma);
    let dx = Normal::new(spec.center_x, sx).expect("finite width");
    let dp = Normal::new(spec.center_p, sp).expect("finite width");
    let mut r = rng::stream(seed, &[0xE45E]);
    let points = (0..m)
        .map(|_| PhasePoint::new(dx.sample(&mut r), dp.sample(&mut r)))
        .collect();
    ClassicalEnsemble { points }
}

pub fn evolve_ensemble(ens: &ClassicalEnsemble, kick: f64, n_steps: usize) -> ClassicalEnsemble {
    let points = ens
        .points
        .par_iter()
        .map(|&pt| (0..n_steps).fold(pt, |q, _| standard_map_step(q, kick)))
        .collect();
    ClassicalEnsemble { points }
}

fn bin_index(v: f64, bins: usize) -> usize {
    let i = ((v + PI) / TAU * bins as f64).floor() as isize;
    i.rem_euclid(bins as isize) as usize
}

/// Normalized 2D histogram over `[-π, π)²`.
pub fn histogram(ens: &ClassicalEnsemble, bins_x: usize, bins_p: usize) -> PhaseSpaceDistribution {
    assert!(bins_x >= 2 && bins_p >= 2, "need at least two bins per axis");
    let mut values = Array2::<f64>::zeros((bins_x, bins_p));
    for pt in &ens.points {
        values[[bin_index(pt.x, bins_x), bin_index(pt.p, bins_p)]] += 1.0;
    }
    let mut d = PhaseSpaceDistribution::cell_centered(DistributionKind::Classical, values);
    d.normalize();
    d
}

// periodic Gaussian weights exp(-d²/2s²) of a point against cell centres,
// restricted to cells within 7 widths
fn kernel_row(v: f64, bins: usize, width: f64) -> Vec<(usize, f64)> {
    let step = TAU / bins as f64;
    let reach = ((7.0 * width / step).ceil() as isize).min(bins as isize / 2);
    let home = bin_index(v, bins) as isize;
    let mut out = Vec::with_capacity(2 * reach as usize + 1);
    for off in -reach..=reach {
        let i = (home + off).rem_euclid(bins as isize) as usize;
        let c = -PI + step * (i as f64 + 0.5);
        let d = wrap_angle(c - v);
        out.push((i, (-d * d / (2.0 * width * width)).exp()));
    }
    out
}

/// Kernel density estimate on the cell centres of a `bins_x × bins_p` grid,
/// using a periodic Gaussian kernel with standard deviations
/// `(width_x, width_p)`. Each point contributes unit mass, so the result is a
/// histogram smoothed by the kernel without binning error.
pub fn smoothed_density(
    ens: &ClassicalEnsemble,
    bins_x: usize,
    bins_p: usize,
    width_x: f64,
    width_p: f64,
) -> PhaseSpaceDistribution {
    const CHUNK: usize = 1 << 14;
    let partials: Vec<Array2<f64>> = ens
        .points
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = Array2::<f64>::zeros((bins_x, bins_p));
            for pt in chunk {
                let kx = kernel_row(pt.x, bins_x, width_x);
                let kp = kernel_row(pt.p, bins_p, width_p);
                let zx: f64 = kx.iter().map(|(_, w)| w).sum();
                let zp: f64 = kp.iter().map(|(_, w)| w).sum();
                for &(i, wx) in &kx {
                    let wx = wx / (zx * zp);
                    for &(k, wp) in &kp {
                        acc[[i, k]] += wx * wp;
                    }
                }
            }
            acc
        })
        .collect();
    // fixed-order reduction
    let mut values = Array2::<f64>::zeros((bins_x, bins_p));
    for part in &partials {
        values += part;
    }
    let mut d = PhaseSpaceDistribution::cell_centered(DistributionKind::Classical, values);
    d.normalize();
    d
}
