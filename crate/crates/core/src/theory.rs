//! Semiclassical predictions for purity decay and fits of measured series.
//!
//! The purity of a coupled pair started in a product of minimal packets is
//! predicted as
//!
//! ```text
//! P(t) = Σᵢ αᵢ Θ(t > τᵢ) e^{-λᵢ t} + e^{-2Γt} + Σᵢ Θ(t > τ_E,i) / Nᵢ
//! ```
//!
//! so the observed decay rate is `min(λ₁, λ₂, 2Γ)`: the coupling sets the rate
//! while it is weak, and the Lyapunov exponents cap it once it is strong.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{sample_chaotic_point, standard_map_step, uniform_point, PhasePoint};
use crate::error::{Error, Result};
use crate::observables::PuritySeries;
use crate::rng::{self, Rng};

/// Golden-rule rate per unit `ε²` used for regime classification.
pub const GAMMA_COEFF: f64 = 0.43;
/// Upper edge of the validity window of the golden-rule rate.
pub const B2: f64 = 4.0 * PI;
/// Correlator sums stop after this many kicks.
pub const CORRELATOR_T_MAX: usize = 20;
/// Correlator sums also stop once `|C(t)| < CORRELATOR_CUTOFF · C(0)`.
pub const CORRELATOR_CUTOFF: f64 = 1e-3;
/// Only points above this multiple of the saturation value enter a fit.
pub const FIT_SATURATION_MARGIN: f64 = 3.0;
pub const MIN_FIT_POINTS: usize = 4;
pub const MIN_SERIES_POINTS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiclassicalParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
    pub n1: usize,
    pub n2: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau_e1: f64,
    pub tau_e2: f64,
}

fn ehrenfest_time(lambda: f64, n: usize) -> f64 {
    if lambda > 0.0 {
        (n as f64).ln() / lambda
    } else {
        f64::INFINITY
    }
}

impl SemiclassicalParams {
    /// Unit prefactors, immediate onsets and `τ_E,i = ln Nᵢ / λᵢ`.
    pub fn new(lambda1: f64, lambda2: f64, gamma: f64, n1: usize, n2: usize) -> Self {
        Self {
            lambda1,
            lambda2,
            gamma,
            n1,
            n2,
            alpha1: 1.0,
            alpha2: 1.0,
            tau1: 0.0,
            tau2: 0.0,
            tau_e1: ehrenfest_time(lambda1, n1),
            tau_e2: ehrenfest_time(lambda2, n2),
        }
    }

    pub fn with_onsets(mut self, tau1: f64, tau2: f64) -> Self {
        self.tau1 = tau1;
        self.tau2 = tau2;
        self
    }

    pub fn with_prefactors(mut self, alpha1: f64, alpha2: f64) -> Self {
        self.alpha1 = alpha1;
        self.alpha2 = alpha2;
        self
    }

    /// `1/N₁ + 1/N₂`.
    pub fn saturation(&self) -> f64 {
        1.0 / self.n1 as f64 + 1.0 / self.n2 as f64
    }

    /// Time after which the dominant channel is active: zero when the
    /// coupling limits the rate, otherwise the earliest Lyapunov onset.
    pub fn fit_onset(&self) -> f64 {
        if 2.0 * self.gamma < self.lambda1.min(self.lambda2) {
            0.0
        } else {
            self.tau1.min(self.tau2).max(0.0)
        }
    }
}

fn step(t: f64, onset: f64) -> f64 {
    if t > onset {
        1.0
    } else {
        0.0
    }
}

pub fn predict_purity(params: &SemiclassicalParams, t: usize) -> f64 {
    let t = t as f64;
    let p = params.alpha1 * step(t, params.tau1) * (-params.lambda1 * t).exp()
        + params.alpha2 * step(t, params.tau2) * (-params.lambda2 * t).exp()
        + (-2.0 * params.gamma * t).exp()
        + step(t, params.tau_e1) / params.n1 as f64
        + step(t, params.tau_e2) / params.n2 as f64;
    p.min(1.0)
}

/// `min(λ₁, λ₂, 2Γ)`.
pub fn predict_rate(params: &SemiclassicalParams) -> f64 {
    params.lambda1.min(params.lambda2).min(2.0 * params.gamma)
}

/// Purity of particle 1 coupled to a fast, infinitely large environment: the
/// environment's own Lyapunov term and saturation drop out.
pub fn predict_purity_env(params: &SemiclassicalParams, t: usize) -> f64 {
    let t = t as f64;
    let p = params.alpha1 * step(t, params.tau1) * (-params.lambda1 * t).exp()
        + (-2.0 * params.gamma * t).exp()
        + step(t, params.tau_e1) / params.n1 as f64;
    p.min(1.0)
}

/// Monte Carlo estimate of a one-sided correlator sum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    /// `Σ_{t=0}^{T} C(t)` with `T` the truncation point.
    pub value: f64,
    pub std_error: f64,
    /// `C(t)` for `t = 0..=T`.
    pub correlator: Vec<f64>,
    pub n_traj: usize,
}

impl CorrelatorEstimate {
    pub fn terms(&self) -> usize {
        self.correlator.len()
    }
}

fn initial_point(kick: f64, rng: &mut Rng) -> PhasePoint {
    if kick > 1.0 {
        // only fails when every screening attempt lands in an island
        sample_chaotic_point(kick, rng).unwrap_or_else(|_| uniform_point(rng))
    } else {
        uniform_point(rng)
    }
}

// ⟨f(Δ(0)) f(Δ(t))⟩ over independent trajectory pairs, Δ = x₁ - x₂ - offset
#[allow(clippy::too_many_arguments)]
fn correlator_sum(
    k1: f64,
    k2: f64,
    offset: f64,
    n_traj: usize,
    t_max: usize,
    seed: u64,
    f: fn(f64) -> f64,
    tag: u64,
) -> Result<CorrelatorEstimate> {
    if n_traj < 2 {
        return Err(Error::Config("correlator needs at least two trajectory pairs".into()));
    }
    for k in [k1, k2] {
        if k <= 1.0 {
            log::warn!("kick strength {k} is not chaotic; the correlator may not decay");
        }
    }
    let key = rng::param_key(&[k1, k2, offset]);
    let products: Vec<Vec<f64>> = (0..n_traj)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, &[tag, key, i as u64]);
            let mut a = initial_point(k1, &mut r);
            let mut b = initial_point(k2, &mut r);
            let f0 = f(a.x - b.x - offset);
            let mut out = Vec::with_capacity(t_max + 1);
            out.push(f0 * f0);
            for _ in 0..t_max {
                a = standard_map_step(a, k1);
                b = standard_map_step(b, k2);
                out.push(f0 * f(a.x - b.x - offset));
            }
            out
        })
        .collect();
    let n = n_traj as f64;
    let mut mean = vec![0.0; t_max + 1];
    for p in &products {
        for (m, v) in mean.iter_mut().zip(p) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let c0 = mean[0];
    let cut = mean
        .iter()
        .skip(1)
        .position(|c| c.abs() < CORRELATOR_CUTOFF * c0.abs())
        .map_or(t_max + 1, |p| p + 1);
    let correlator = mean[..cut].to_vec();
    let value: f64 = correlator.iter().sum();
    let var = products
        .iter()
        .map(|p| (p[..cut].iter().sum::<f64>() - value).powi(2))
        .sum::<f64>()
        / (n - 1.0);
    Ok(CorrelatorEstimate {
        value,
        std_error: (var / n).sqrt(),
        correlator,
        n_traj,
    })
}

/// Golden-rule rate `Γ̂ = Σ_{t=0}^{T} ⟨ε² sin Δ(0) sin Δ(t)⟩` with
/// `Δ = x₁ - x₂ - offset` along independent classical trajectories started in
/// the chaotic sea.
pub fn gamma_from_correlator(
    k1: f64,
    k2: f64,
    eps: f64,
    offset: f64,
    n_traj: usize,
    t_max: usize,
    seed: u64,
) -> Result<CorrelatorEstimate> {
    let mut est = correlator_sum(k1, k2, offset, n_traj, t_max, seed, f64::sin, 0x6A33)?;
    scale(&mut est, eps * eps);
    Ok(est)
}

/// Force correlator `G = Σ_{t=0}^{T} ⟨ε² cos Δ(0) cos Δ(t)⟩`, the same sum for
/// the derivative of the coupling.
pub fn g_correlator(
    k1: f64,
    k2: f64,
    eps: f64,
    offset: f64,
    n_traj: usize,
    t_max: usize,
    seed: u64,
) -> Result<CorrelatorEstimate> {
    let mut est = correlator_sum(k1, k2, offset, n_traj, t_max, seed, f64::cos, 0x6C05)?;
    scale(&mut est, eps * eps);
    Ok(est)
}

fn scale(est: &mut CorrelatorEstimate, s: f64) {
    est.value *= s;
    est.std_error *= s;
    est.correlator.iter_mut().for_each(|c| *c *= s);
}

/// `τ = λ⁻¹ ln(λ / σ²G)`, clamped at zero. Infinite when `G = 0` (the
/// coupling gives no classical channel) or `λ = 0`.
pub fn onset_time(lambda: f64, sigma: f64, g: f64) -> f64 {
    if g <= 0.0 || lambda <= 0.0 {
        return f64::INFINITY;
    }
    let ratio = lambda / (sigma * sigma * g);
    if ratio <= 1.0 {
        0.0
    } else {
        ratio.ln() / lambda
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    BelowValidity,
    ValidGoldenRule,
    ValidLyapunovSaturated,
    AboveValidity,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub eps: f64,
    pub gamma: f64,
    pub delta2: f64,
    #[serde(rename = "B2")]
    pub b2: f64,
    pub lambda_max: f64,
    pub classification: Regime,
}

/// Place `Γ = 0.43 ε²` relative to the window `4π/(N₁N₂) ≤ Γ ≤ 4π`; inside
/// it, the rate is Lyapunov-limited when `2Γ > λ_max`.
pub fn classify_regime(eps: f64, n1: usize, n2: usize, lambda_max: f64) -> RegimeReport {
    let gamma = GAMMA_COEFF * eps * eps;
    let delta2 = B2 / (n1 as f64 * n2 as f64);
    let classification = if gamma < delta2 {
        Regime::BelowValidity
    } else if gamma > B2 {
        Regime::AboveValidity
    } else if 2.0 * gamma > lambda_max {
        Regime::ValidLyapunovSaturated
    } else {
        Regime::ValidGoldenRule
    };
    RegimeReport {
        eps,
        gamma,
        delta2,
        b2: B2,
        lambda_max,
        classification,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    pub rate_error: f64,
    /// First and last kick used.
    pub window: [usize; 2],
    pub saturation: f64,
    pub n_points: usize,
    /// Fitted `ln(P - P_sat)` at `t = 0`.
    pub intercept: f64,
}

/// Least-squares slope of `ln(P - P_sat)` with `P_sat = 1/N₁ + 1/N₂`, starting
/// one kick after the onset of the dominant channel.
pub fn fit_decay(series: &PuritySeries, params: &SemiclassicalParams) -> Result<DecayFit> {
    let sat = 1.0 / series.metadata.n1 as f64 + 1.0 / series.metadata.n2 as f64;
    fit_decay_with(series, params.fit_onset(), sat)
}

/// [`fit_decay`] with an explicit onset and saturation value.
pub fn fit_decay_with(series: &PuritySeries, onset: f64, saturation: f64) -> Result<DecayFit> {
    if series.len() < MIN_SERIES_POINTS {
        return Err(Error::InsufficientDecay { points: series.len() });
    }
    let start = if onset.is_finite() { onset.max(0.0).ceil() as usize + 1 } else { usize::MAX };
    let end = series
        .times
        .iter()
        .zip(&series.values)
        .filter(|(_, &p)| p > FIT_SATURATION_MARGIN * saturation)
        .map(|(&t, _)| t)
        .max();
    let pts: Vec<(f64, f64)> = match end {
        Some(end) if end >= start => series
            .times
            .iter()
            .zip(&series.values)
            .filter(|(&t, &p)| t >= start && t <= end && p > saturation)
            .map(|(&t, &p)| (t as f64, (p - saturation).ln()))
            .collect(),
        _ => Vec::new(),
    };
    if pts.len() < MIN_FIT_POINTS {
        return Err(Error::InsufficientDecay { points: pts.len() });
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let rate_error = (ssr / (n - 2.0) / sxx).sqrt();
    Ok(DecayFit {
        rate: (-slope).max(0.0),
        rate_error,
        window: [pts[0].0 as usize, pts[pts.len() - 1].0 as usize],
        saturation,
        n_points: pts.len(),
        intercept,
    })
}
