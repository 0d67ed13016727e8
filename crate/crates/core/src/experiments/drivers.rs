use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{ExperimentConfig, ExperimentKind, OnsetPolicy};
use super::output::{DistanceRow, Emitter, GridAxes, RunManifest};
use crate::classical::{
    evolve_ensemble, histogram, lyapunov_by_separation, lyapunov_exponent, lyapunov_formula, sample_chaotic_point,
    sample_gaussian_ensemble, smoothed_density, LyapunovEstimate, PhasePoint,
};
use crate::error::{Error, Result};
use crate::floquet::TwoParticleFloquet;
use crate::observables::{
    correspondence_distance, husimi, purity, reduce, state_purity, wigner, Particle, PurityMetadata, PuritySeries,
    ReducedDensity,
};
use crate::rng;
use crate::theory::{
    classify_regime, fit_decay, fit_decay_with, g_correlator, gamma_from_correlator, onset_time, predict_rate,
    CorrelatorEstimate, DecayFit, Regime, RegimeReport, SemiclassicalParams,
};
use crate::torus::{
    make_gaussian, CouplingParams, GaussianSpec, OneParticleState, RotorParams, TorusGrid, TwoParticleState,
};

// stream tags, one per kind of random draw
const TAG_CENTRES: u64 = 0xC3E7;
const TAG_PARTNER: u64 = 0x9A27;
const TAG_ENV: u64 = 0xE2F1;
const TAG_ENSEMBLE: u64 = 0xE25B;

/// Minimum phase-space separation of environment packets, in packet widths.
pub const ENV_MIN_SEPARATION: f64 = 6.0;
/// Largest allowed `|⟨φ_a|φ_b⟩|²` between environment packets.
pub const ENV_MAX_OVERLAP: f64 = 1e-6;
const ENV_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Kicks averaged for the late-time purity.
pub const LATE_WINDOW: usize = 5;

fn file_tag(v: f64) -> String {
    format!("{v}")
}

// keep packet centres off the seam, where the constructor refuses them
fn interior(v: f64) -> f64 {
    v.clamp(-PI + 1e-9, PI - 1e-9)
}

fn grid_of(cfg: &ExperimentConfig, n: usize) -> Result<TorusGrid> {
    TorusGrid::with_offsets(n, cfg.system.x_offset, cfg.system.p_offset)
}

/// Product packet on two grids, widths from the run's sigma policy.
pub fn product_packet(
    cfg: &ExperimentConfig,
    g1: &TorusGrid,
    g2: &TorusGrid,
    c1: PhasePoint,
    c2: PhasePoint,
) -> Result<TwoParticleState> {
    let a = packet(cfg, g1, c1)?;
    let b = packet(cfg, g2, c2)?;
    Ok(TwoParticleState::product(&a, &b))
}

fn packet(cfg: &ExperimentConfig, g: &TorusGrid, c: PhasePoint) -> Result<OneParticleState> {
    let sigma = cfg.run.sigma.sigma(g.hbar_eff());
    make_gaussian(g, &GaussianSpec::new(interior(c.x), interior(c.p), sigma))
}

/// Packet centres for replica `r` of a `(K₁, K₂)` cell. The draw depends only
/// on the root seed, the kick strengths and `r`.
pub fn initial_centres(k1: f64, k2: f64, seed: u64, replica: usize) -> Result<(PhasePoint, PhasePoint)> {
    let mut r = rng::stream(seed, &[TAG_CENTRES, rng::param_key(&[k1, k2]), replica as u64]);
    let a = sample_chaotic_point(k1, &mut r)?;
    let b = sample_chaotic_point(k2, &mut r)?;
    Ok((a, b))
}

/// `P(t)` for `t = 0..=n_kicks` of one pure-state trajectory.
pub fn purity_trajectory(f: &TwoParticleFloquet, mut state: TwoParticleState, n_kicks: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(n_kicks + 1);
    out.push(state_purity(&state));
    for _ in 0..n_kicks {
        f.step(&mut state)?;
        out.push(state_purity(&state));
    }
    Ok(out)
}

/// `P(t)` of particle 1 when particle 2 starts in the equal mixture of
/// `env` packets.
pub fn env_purity_trajectory(
    f: &TwoParticleFloquet,
    system: &OneParticleState,
    env: &[OneParticleState],
    n_kicks: usize,
) -> Result<Vec<f64>> {
    let mut states: Vec<TwoParticleState> = env.iter().map(|e| TwoParticleState::product(system, e)).collect();
    let mixed_purity = |states: &[TwoParticleState]| -> Result<f64> {
        let parts: Vec<ReducedDensity> = states.par_iter().map(|s| reduce(s, Particle::First)).collect();
        Ok(purity(&ReducedDensity::mixture(&parts)?))
    };
    let mut out = Vec::with_capacity(n_kicks + 1);
    out.push(mixed_purity(&states)?);
    for _ in 0..n_kicks {
        states.par_iter_mut().try_for_each(|s| f.step(s))?;
        out.push(mixed_purity(&states)?);
    }
    Ok(out)
}

/// Classical inputs shared by the cells of a run, computed once per kick
/// strength or pair.
struct ClassicalCache<'a> {
    cfg: &'a ExperimentConfig,
    lyapunov: BTreeMap<u64, LyapunovEstimate>,
    // per unit ε², keyed by (K₁, K₂)
    gamma: BTreeMap<(u64, u64), CorrelatorEstimate>,
    force: BTreeMap<(u64, u64), CorrelatorEstimate>,
}

impl<'a> ClassicalCache<'a> {
    fn new(cfg: &'a ExperimentConfig) -> Self {
        Self {
            cfg,
            lyapunov: BTreeMap::new(),
            gamma: BTreeMap::new(),
            force: BTreeMap::new(),
        }
    }

    fn lyapunov(&mut self, k: f64) -> Result<LyapunovEstimate> {
        if let Some(l) = self.lyapunov.get(&k.to_bits()) {
            return Ok(*l);
        }
        let c = &self.cfg.classical;
        let l = lyapunov_exponent(k, c.lyapunov_samples, c.lyapunov_steps, self.cfg.experiment.seed)?;
        self.lyapunov.insert(k.to_bits(), l);
        Ok(l)
    }

    fn correlators(&mut self, k1: f64, k2: f64, offset: f64) -> Result<(CorrelatorEstimate, CorrelatorEstimate)> {
        let key = (k1.to_bits(), k2.to_bits());
        if !self.gamma.contains_key(&key) {
            let c = &self.cfg.classical;
            let seed = self.cfg.experiment.seed;
            let g = gamma_from_correlator(k1, k2, 1.0, offset, c.correlator_trajectories, c.correlator_t_max, seed)?;
            let f = g_correlator(k1, k2, 1.0, offset, c.correlator_trajectories, c.correlator_t_max, seed)?;
            self.gamma.insert(key, g);
            self.force.insert(key, f);
        }
        Ok((self.gamma[&key].clone(), self.force[&key].clone()))
    }
}

/// Semiclassical description of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTheory {
    pub lambda1: LyapunovEstimate,
    pub lambda2: LyapunovEstimate,
    pub gamma: f64,
    pub gamma_over_eps2: f64,
    pub gamma_std_error: f64,
    pub force_correlator: f64,
    pub params: SemiclassicalParams,
    pub predicted_rate: f64,
    pub regime: RegimeReport,
}

fn cell_theory(
    cache: &mut ClassicalCache,
    k1: f64,
    k2: f64,
    eps: f64,
    n1: usize,
    n2: usize,
    sigma: f64,
) -> Result<CellTheory> {
    let l1 = cache.lyapunov(k1)?;
    let l2 = cache.lyapunov(k2)?;
    let (g, f) = cache.correlators(k1, k2, cache.cfg.system.coupling_offset)?;
    let eps2 = eps * eps;
    let gamma = g.value * eps2;
    let force = f.value * eps2;
    let params = SemiclassicalParams::new(l1.lambda, l2.lambda, gamma, n1, n2)
        .with_onsets(onset_time(l1.lambda, sigma, force), onset_time(l2.lambda, sigma, force));
    let regime = classify_regime(eps, n1, n2, l1.lambda.max(l2.lambda));
    Ok(CellTheory {
        lambda1: l1,
        lambda2: l2,
        gamma,
        gamma_over_eps2: g.value,
        gamma_std_error: g.std_error * eps2,
        force_correlator: force,
        predicted_rate: predict_rate(&params),
        params,
        regime,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
    pub file: String,
    pub theory: CellTheory,
    pub centres: Vec<[f64; 4]>,
    pub series: PuritySeries,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    /// Mean purity over the last few kicks.
    pub late_purity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedCell {
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub cells: Vec<CellResult>,
    pub failed: Vec<FailedCell>,
}

fn late_mean(values: &[f64]) -> f64 {
    let tail = &values[values.len().saturating_sub(LATE_WINDOW)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// One `(K₁, K₂, ε)` cell: average purity over the configured initial states.
pub fn run_cell(cfg: &ExperimentConfig, k1: f64, k2: f64, eps: f64) -> Result<CellResult> {
    let mut cache = ClassicalCache::new(cfg);
    run_cell_cached(cfg, &mut cache, k1, k2, eps)
}

fn run_cell_cached(cfg: &ExperimentConfig, cache: &mut ClassicalCache, k1: f64, k2: f64, eps: f64) -> Result<CellResult> {
    let s = &cfg.system;
    let g1 = grid_of(cfg, s.n1)?;
    let g2 = grid_of(cfg, s.n2)?;
    let sigma = cfg.run.sigma.sigma(g1.hbar_eff().max(g2.hbar_eff()));
    let centres: Vec<(PhasePoint, PhasePoint)> = (0..cfg.run.n_initial_states)
        .map(|r| initial_centres(k1, k2, cfg.experiment.seed, r))
        .collect::<Result<_>>()?;
    let theory = cell_theory(cache, k1, k2, eps, s.n1, s.n2, sigma)?;
    match theory.regime.classification {
        Regime::BelowValidity | Regime::AboveValidity => log::warn!(
            "K=({k1}, {k2}) eps={eps}: coupling outside the validity window ({:?})",
            theory.regime.classification
        ),
        _ => {}
    }
    log::info!(
        "cell K=({k1}, {k2}) eps={eps}: {} states × {} kicks at {}×{}",
        centres.len(),
        cfg.run.n_kicks,
        s.n1,
        s.n2
    );
    let f = TwoParticleFloquet::new(
        &g1,
        &g2,
        &RotorParams::new(k1),
        &RotorParams::new(k2),
        &CouplingParams {
            strength: eps,
            phase_offset: s.coupling_offset,
        },
    );
    let runs: Vec<Vec<f64>> = centres
        .par_iter()
        .map(|&(a, b)| purity_trajectory(&f, product_packet(cfg, &g1, &g2, a, b)?, cfg.run.n_kicks))
        .collect::<Result<_>>()?;
    let meta = PurityMetadata {
        n1: s.n1,
        n2: s.n2,
        k1,
        k2,
        eps,
        seed: cfg.experiment.seed,
        n_initial_states: centres.len(),
    };
    let series = PuritySeries::from_runs(&runs, meta)?;
    series.check_bounds(1e-9)?;
    let (fit, fit_error) = match fit_decay(&series, &theory.params) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Ok(CellResult {
        k1,
        k2,
        eps,
        file: format!("purity_K1-{}_K2-{}_eps-{}.csv", file_tag(k1), file_tag(k2), file_tag(eps)),
        late_purity: late_mean(&series.values),
        theory,
        centres: centres.iter().map(|(a, b)| [a.x, a.p, b.x, b.p]).collect(),
        series,
        fit,
        fit_error,
    })
}

fn sweep_cells(cfg: &ExperimentConfig, cache: &mut ClassicalCache, eps_list: &[f64]) -> Result<SweepReport> {
    let mut report = SweepReport {
        cells: Vec::new(),
        failed: Vec::new(),
    };
    for (k1, k2) in cfg.kick_pairs()? {
        for &eps in eps_list {
            match run_cell_cached(cfg, cache, k1, k2, eps) {
                Ok(c) => report.cells.push(c),
                Err(e @ Error::NoChaoticSea { .. }) => {
                    log::error!("cell K=({k1}, {k2}) eps={eps} aborted: {e}");
                    report.failed.push(FailedCell {
                        k1,
                        k2,
                        eps,
                        reason: e.to_string(),
                    });
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}

fn emit_cells(em: &mut Emitter, report: &SweepReport) -> Result<()> {
    for c in &report.cells {
        em.purity(&c.file, &c.series)?;
    }
    Ok(())
}

// the manifest keeps the derived numbers; the series live in the CSV files
fn cell_summary(c: &CellResult) -> serde_json::Value {
    json!({
        "k1": c.k1,
        "k2": c.k2,
        "eps": c.eps,
        "file": c.file,
        "theory": c.theory,
        "fit": c.fit,
        "fit_error": c.fit_error,
        "late_purity": c.late_purity,
        "initial_centres": c.centres,
    })
}

fn sampling_note() -> String {
    "initial packet centres drawn uniformly on the torus, re-drawn while the 50-kick finite-time exponent \
     is below 0.1 (only for 1 < K < 7)"
        .into()
}

pub fn run_purity_sweep(cfg: &ExperimentConfig, out: &Path) -> Result<(SweepReport, RunManifest)> {
    let mut cache = ClassicalCache::new(cfg);
    let report = sweep_cells(cfg, &mut cache, &cfg.system.eps)?;
    let mut em = Emitter::new(out)?;
    emit_cells(&mut em, &report)?;
    let results = json!({
        "cells": report.cells.iter().map(cell_summary).collect::<Vec<_>>(),
        "failed_cells": report.failed,
    });
    let manifest = em.finish(cfg, results, vec![sampling_note()])?;
    Ok((report, manifest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseCurve {
    pub k: f64,
    pub lambda: f64,
    pub tau: f64,
    /// `λ (t - τ)` per kick.
    pub rescaled: Vec<f64>,
    pub purity: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseStats {
    /// Largest spread of `ln P` across curves in any unit bin of rescaled time.
    pub spread: f64,
    pub master_slope: f64,
    pub master_slope_error: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub eps: f64,
    pub onset: OnsetPolicy,
    pub curves: Vec<CollapseCurve>,
    pub stats: CollapseStats,
    /// Mean over curves of the purity averaged over the last kicks.
    pub late_purity: f64,
    pub saturation: f64,
    pub sweep: SweepReport,
}

fn interpolate(xs: &[f64], ys: &[f64], x: f64) -> Option<f64> {
    let i = xs.windows(2).position(|w| w[0] <= x && x <= w[1])?;
    let (x0, x1) = (xs[i], xs[i + 1]);
    let w = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
    Some(ys[i] + w * (ys[i + 1] - ys[i]))
}

/// Collapse statistics over the decaying part of each curve: kicks after the
/// onset with `P > 3 P_sat`.
pub fn collapse_statistics(curves: &[CollapseCurve], saturation: f64) -> CollapseStats {
    let threshold = crate::theory::FIT_SATURATION_MARGIN * saturation;
    // (s, ln P, ln(P - P_sat)) of the decaying part of each curve
    let parts: Vec<Vec<(f64, f64, f64)>> = curves
        .iter()
        .map(|c| {
            c.rescaled
                .iter()
                .zip(&c.purity)
                .enumerate()
                .filter(|&(t, (&s, &p))| t > 0 && s > 0.0 && p > threshold)
                .map(|(_, (&s, &p))| (s, p.ln(), (p - saturation).ln()))
                .collect()
        })
        .collect();
    let s_max = parts.iter().flatten().map(|p| p.0).fold(0.0, f64::max);
    let mut spread = 0.0f64;
    let mut centre = 0.5;
    while centre <= s_max {
        let vals: Vec<f64> = parts
            .iter()
            .filter_map(|p| {
                let xs: Vec<f64> = p.iter().map(|q| q.0).collect();
                let ys: Vec<f64> = p.iter().map(|q| q.1).collect();
                interpolate(&xs, &ys, centre)
            })
            .collect();
        if vals.len() >= 2 {
            let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
            let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
            spread = spread.max(hi - lo);
        }
        centre += 1.0;
    }
    let pts: Vec<(f64, f64)> = parts.iter().flatten().map(|q| (q.0, q.2)).collect();
    let (slope, err) = least_squares_slope(&pts);
    CollapseStats {
        spread,
        master_slope: slope,
        master_slope_error: err,
        n_points: pts.len(),
    }
}

fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    if pts.len() < 3 {
        return (f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let b = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - b - slope * p.0).powi(2)).sum();
    (slope, (ssr / (n - 2.0) / sxx).sqrt())
}

pub fn run_lyapunov_collapse(cfg: &ExperimentConfig, out: &Path) -> Result<(CollapseReport, RunManifest)> {
    let s = &cfg.system;
    if s.eps.len() != 1 {
        return Err(Error::Config(format!(
            "the collapse runs at a single coupling; system.eps lists {} values",
            s.eps.len()
        )));
    }
    let eps = s.eps[0];
    let mut cache = ClassicalCache::new(cfg);
    // refuse before any quantum work if a curve would not be Lyapunov-limited
    for (k1, k2) in cfg.kick_pairs()? {
        let lmax = cache.lyapunov(k1)?.lambda.max(cache.lyapunov(k2)?.lambda);
        let report = classify_regime(eps, s.n1, s.n2, lmax);
        if report.classification != Regime::ValidLyapunovSaturated {
            return Err(Error::Regime(serde_json::to_string(&report)?));
        }
    }
    let sweep = sweep_cells(cfg, &mut cache, &[eps])?;
    let saturation = 1.0 / s.n1 as f64 + 1.0 / s.n2 as f64;
    let curves: Vec<CollapseCurve> = sweep
        .cells
        .iter()
        .map(|c| {
            let lambda = c.theory.lambda1.lambda.min(c.theory.lambda2.lambda);
            let tau = match (cfg.run.onset, &c.fit) {
                (OnsetPolicy::Fitted, Some(f)) if f.rate > 0.0 => f.intercept / f.rate,
                (OnsetPolicy::Fitted, _) => 0.0,
                (OnsetPolicy::Computed, _) => {
                    let t = c.theory.params.tau1.min(c.theory.params.tau2);
                    if t.is_finite() { t } else { 0.0 }
                }
            };
            CollapseCurve {
                k: c.k1,
                lambda,
                tau,
                rescaled: c.series.times.iter().map(|&t| lambda * (t as f64 - tau)).collect(),
                purity: c.series.values.clone(),
            }
        })
        .collect();
    let stats = collapse_statistics(&curves, saturation);
    let late_purity = if sweep.cells.is_empty() {
        f64::NAN
    } else {
        sweep.cells.iter().map(|c| c.late_purity).sum::<f64>() / sweep.cells.len() as f64
    };
    let report = CollapseReport {
        eps,
        onset: cfg.run.onset,
        curves,
        stats,
        late_purity,
        saturation,
        sweep,
    };

    let mut em = Emitter::new(out)?;
    emit_cells(&mut em, &report.sweep)?;
    let mut rows = Vec::new();
    for c in &report.curves {
        for (t, (sv, p)) in c.rescaled.iter().zip(&c.purity).enumerate() {
            rows.push(vec![
                c.k.to_string(),
                c.lambda.to_string(),
                c.tau.to_string(),
                t.to_string(),
                sv.to_string(),
                p.to_string(),
            ]);
        }
    }
    em.table("collapse.csv", &["K", "lambda", "tau", "t", "rescaled_t", "P"], &rows)?;
    let results = json!({
        "eps": eps,
        "onset": report.onset,
        "curves": report.curves.iter().map(|c| json!({"K": c.k, "lambda": c.lambda, "tau": c.tau})).collect::<Vec<_>>(),
        "collapse": report.stats,
        "late_purity": report.late_purity,
        "saturation": saturation,
        "cells": report.sweep.cells.iter().map(cell_summary).collect::<Vec<_>>(),
        "failed_cells": report.sweep.failed,
    });
    let manifest = em.finish(cfg, results, vec![sampling_note()])?;
    Ok((report, manifest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub distances: Vec<DistanceRow>,
    pub partner_centre: [f64; 2],
    pub kernel_sigma: f64,
}

/// Peak memory of one wigner-compare panel at size `N`.
pub fn compare_memory_bytes(n: usize) -> u64 {
    let state = TwoParticleState::size_bytes(n, n);
    // propagator tables and scratch, ρ₁ with its real-product temporaries,
    // and the doubled Wigner lattice
    state + TwoParticleFloquet::working_bytes(n, n) + 3 * state + 2 * state
}

pub fn run_wigner_compare(cfg: &ExperimentConfig, out: &Path) -> Result<(CompareReport, RunManifest)> {
    let ps = &cfg.phase_space;
    let budget = ps.memory_budget_mb * 1024 * 1024;
    let mut sizes = ps.sizes.clone();
    sizes.sort_unstable();
    let n_max = *sizes.last().expect("validated non-empty");
    let required = compare_memory_bytes(n_max);
    if required > budget {
        return Err(Error::Resource {
            required_bytes: required,
            budget_bytes: budget,
        });
    }
    let mut notes = vec![];
    if n_max < 2048 {
        notes.push(format!("finest panel runs at N={n_max} instead of 2048"));
    }
    let seed = cfg.experiment.seed;
    let mut r = rng::stream(seed, &[TAG_PARTNER, rng::param_key(&[ps.k2])]);
    let partner = sample_chaotic_point(ps.k2, &mut r)?;
    let finest = grid_of(cfg, n_max)?;
    let kernel_sigma = cfg.run.sigma.sigma(finest.hbar_eff());
    let start = PhasePoint::new(ps.x0, ps.p0);

    let mut em = Emitter::new(out)?;
    let mut distances = Vec::new();
    let mut axes = BTreeMap::new();
    for &n in &sizes {
        let g = grid_of(cfg, n)?;
        let hbar = g.hbar_eff();
        // Liouville reference, started from the packet's own phase-space density
        let spec = GaussianSpec::new(ps.x0, ps.p0, cfg.run.sigma.sigma(hbar));
        let ens = sample_gaussian_ensemble(&spec, hbar, ps.ensemble_size, rng::derive_seed(seed, &[TAG_ENSEMBLE, n as u64]));
        let ens = evolve_ensemble(&ens, ps.k1, ps.n_kicks);
        let wx = kernel_sigma / 2f64.sqrt();
        let wp = hbar / (2f64.sqrt() * kernel_sigma);
        let classical = smoothed_density(&ens, ps.resolution, ps.resolution, wx, wp);
        let raw = histogram(&ens, ps.resolution, ps.resolution);
        let name = format!("classical_N{n}.bin");
        em.grid(&name, &classical)?;
        axes.insert(name, GridAxes::from(&classical));
        let name = format!("classical_hist_N{n}.bin");
        em.grid(&name, &raw)?;
        axes.insert(name, GridAxes::from(&raw));
        distances.push(DistanceRow {
            label: "classical-vs-classical".into(),
            n,
            eps: 0.0,
            distance: correspondence_distance(&classical, &classical)?,
        });

        for &eps in &ps.eps {
            log::info!("wigner-compare N={n} eps={eps}");
            let f = TwoParticleFloquet::new(
                &g,
                &g,
                &RotorParams::new(ps.k1),
                &RotorParams::new(ps.k2),
                &CouplingParams {
                    strength: eps,
                    phase_offset: cfg.system.coupling_offset,
                },
            );
            let mut state = product_packet(cfg, &g, &g, start, partner)?;
            for _ in 0..ps.n_kicks {
                f.step(&mut state)?;
            }
            let rho = reduce(&state, Particle::First);
            drop(state);
            let h = husimi(&rho, &g, ps.resolution, kernel_sigma)?;
            let w = wigner(&rho, &g)?;
            let tag = file_tag(eps);
            let name = format!("husimi_N{n}_eps{tag}.bin");
            em.grid(&name, &h)?;
            axes.insert(name, GridAxes::from(&h));
            let name = format!("wigner_N{n}_eps{tag}.bin");
            em.grid(&name, &w)?;
            axes.insert(name, GridAxes::from(&w));
            distances.push(DistanceRow {
                label: "husimi-vs-classical".into(),
                n,
                eps,
                distance: correspondence_distance(&h, &classical)?,
            });
        }
    }
    em.distances("distances.csv", &distances)?;
    let report = CompareReport {
        distances,
        partner_centre: [partner.x, partner.p],
        kernel_sigma,
    };
    let results = json!({
        "distances": report.distances,
        "partner_centre": report.partner_centre,
        "kernel_sigma": kernel_sigma,
        "grid_axes": axes,
    });
    let manifest = em.finish(cfg, results, notes)?;
    Ok((report, manifest))
}

/// `|⟨a|b⟩|²`.
fn overlap(a: &OneParticleState, b: &OneParticleState) -> f64 {
    a.inner(b).norm_sqr()
}

/// Centres for the environment mixture: chaotic-sea points at least
/// [`ENV_MIN_SEPARATION`] packet widths apart in phase space. Returns fewer
/// than `n` centres if no more fit.
pub fn env_centres(k2: f64, grid: &TorusGrid, sigma: f64, n: usize, seed: u64) -> Result<Vec<PhasePoint>> {
    let hbar = grid.hbar_eff();
    let p_width = hbar / sigma;
    let mut r = rng::stream(seed, &[TAG_ENV, rng::param_key(&[k2]), n as u64]);
    let mut out: Vec<PhasePoint> = Vec::with_capacity(n);
    let far = |a: &PhasePoint, b: &PhasePoint| {
        let dx = crate::torus::wrap_angle(a.x - b.x) / sigma;
        let dp = crate::torus::wrap_angle(a.p - b.p) / p_width;
        dx.hypot(dp) >= ENV_MIN_SEPARATION
    };
    'outer: while out.len() < n {
        for _ in 0..ENV_PLACEMENT_ATTEMPTS {
            let c = sample_chaotic_point(k2, &mut r)?;
            if out.iter().all(|o| far(o, &c)) {
                out.push(c);
                continue 'outer;
            }
        }
        log::warn!("placed only {} of {n} nonoverlapping environment packets", out.len());
        break;
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvReport {
    pub series: PuritySeries,
    pub fit: Option<DecayFit>,
    pub fit_error: Option<String>,
    pub lambda1: LyapunovEstimate,
    pub lambda2: LyapunovEstimate,
    pub gamma: f64,
    pub onset: f64,
    pub n_env_states: usize,
    pub max_overlap: f64,
    pub late_purity: f64,
    pub system_centre: [f64; 2],
    pub env_centres: Vec<[f64; 2]>,
    pub regime: RegimeReport,
}

pub fn run_env_decoherence(cfg: &ExperimentConfig, out: &Path) -> Result<(EnvReport, RunManifest)> {
    let e = &cfg.environment;
    let seed = cfg.experiment.seed;
    if e.k2 <= e.k1 {
        log::warn!("environment kick K2={} is not stronger than K1={}", e.k2, e.k1);
    }
    let g1 = grid_of(cfg, e.n1)?;
    let g2 = grid_of(cfg, e.n2)?;
    let sigma1 = cfg.run.sigma.sigma(g1.hbar_eff());
    let sigma2 = cfg.run.sigma.sigma(g2.hbar_eff());
    let mut notes = vec![sampling_note()];

    let (c1, _) = initial_centres(e.k1, e.k2, seed, 0)?;
    let system = packet(cfg, &g1, c1)?;
    let mut centres = env_centres(e.k2, &g2, sigma2, e.n_env_states, seed)?;
    let mut env: Vec<OneParticleState> = centres.iter().map(|&c| packet(cfg, &g2, c)).collect::<Result<_>>()?;
    // drop packets until every pair is below the overlap bound
    loop {
        let worst = (0..env.len())
            .flat_map(|a| (a + 1..env.len()).map(move |b| (a, b)))
            .map(|(a, b)| (overlap(&env[a], &env[b]), b))
            .fold((0.0, usize::MAX), |m, x| if x.0 > m.0 { x } else { m });
        if worst.0 < ENV_MAX_OVERLAP {
            break;
        }
        env.remove(worst.1);
        centres.remove(worst.1);
    }
    if env.len() < e.n_env_states {
        let msg = format!("environment reduced to {} of {} packets", env.len(), e.n_env_states);
        log::warn!("{msg}");
        notes.push(msg);
    }
    let max_overlap = (0..env.len())
        .flat_map(|a| (a + 1..env.len()).map(move |b| (a, b)))
        .map(|(a, b)| overlap(&env[a], &env[b]))
        .fold(0.0, f64::max);

    let l1 = lyapunov_exponent(e.k1, cfg.classical.lyapunov_samples, cfg.classical.lyapunov_steps, seed)?;
    let l2 = lyapunov_exponent(e.k2, cfg.classical.lyapunov_samples, cfg.classical.lyapunov_steps, seed)?;
    let c = &cfg.classical;
    let g = gamma_from_correlator(e.k1, e.k2, e.eps, cfg.system.coupling_offset, c.correlator_trajectories, c.correlator_t_max, seed)?;
    let force = g_correlator(e.k1, e.k2, e.eps, cfg.system.coupling_offset, c.correlator_trajectories, c.correlator_t_max, seed)?;
    let onset = {
        let t = onset_time(l1.lambda, sigma1, force.value);
        if t.is_finite() { t } else { 0.0 }
    };
    let regime = classify_regime(e.eps, e.n1, e.n2, l1.lambda.max(l2.lambda));

    log::info!("env-decoherence: {} environment packets × {} kicks", env.len(), e.n_kicks);
    let f = TwoParticleFloquet::new(
        &g1,
        &g2,
        &RotorParams::new(e.k1),
        &RotorParams::new(e.k2),
        &CouplingParams {
            strength: e.eps,
            phase_offset: cfg.system.coupling_offset,
        },
    );
    let values = env_purity_trajectory(&f, &system, &env, e.n_kicks)?;
    let meta = PurityMetadata {
        n1: e.n1,
        n2: e.n2,
        k1: e.k1,
        k2: e.k2,
        eps: e.eps,
        seed,
        n_initial_states: env.len(),
    };
    let series = PuritySeries::from_runs(&[values], meta)?;
    let (fit, fit_error) = match fit_decay_with(&series, onset, 1.0 / e.n1 as f64) {
        Ok(f) => (Some(f), None),
        Err(err) => (None, Some(err.to_string())),
    };
    let report = EnvReport {
        late_purity: late_mean(&series.values),
        series,
        fit,
        fit_error,
        lambda1: l1,
        lambda2: l2,
        gamma: g.value,
        onset,
        n_env_states: env.len(),
        max_overlap,
        system_centre: [c1.x, c1.p],
        env_centres: centres.iter().map(|c| [c.x, c.p]).collect(),
        regime,
    };
    let mut em = Emitter::new(out)?;
    em.purity("purity_env.csv", &report.series)?;
    let results = json!({
        "fit": report.fit,
        "fit_error": report.fit_error,
        "lambda1": report.lambda1,
        "lambda2": report.lambda2,
        "gamma": report.gamma,
        "onset": report.onset,
        "n_env_states": report.n_env_states,
        "max_overlap": report.max_overlap,
        "late_purity": report.late_purity,
        "saturation": 1.0 / e.n1 as f64,
        "system_centre": report.system_centre,
        "env_centres": report.env_centres,
        "regime": report.regime,
    });
    let manifest = em.finish(cfg, results, notes)?;
    Ok((report, manifest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    pub k1: f64,
    pub k2: f64,
    pub eps: f64,
    pub gamma: f64,
    pub gamma_over_eps2: f64,
    pub std_error: f64,
    pub terms: usize,
}

pub fn run_gamma_estimate(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<GammaRow>, RunManifest)> {
    let c = &cfg.classical;
    let mut rows = Vec::new();
    for (k1, k2) in cfg.kick_pairs()? {
        let unit = gamma_from_correlator(k1, k2, 1.0, cfg.system.coupling_offset, c.correlator_trajectories, c.correlator_t_max, cfg.experiment.seed)?;
        for &eps in &cfg.system.eps {
            rows.push(GammaRow {
                k1,
                k2,
                eps,
                gamma: unit.value * eps * eps,
                gamma_over_eps2: unit.value,
                std_error: unit.std_error * eps * eps,
                terms: unit.terms(),
            });
        }
    }
    let mut em = Emitter::new(out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k1.to_string(),
                r.k2.to_string(),
                r.eps.to_string(),
                r.gamma.to_string(),
                r.gamma_over_eps2.to_string(),
                r.std_error.to_string(),
                r.terms.to_string(),
            ]
        })
        .collect();
    em.table("gamma.csv", &["K1", "K2", "eps", "gamma", "gamma_over_eps2", "std_error", "terms"], &table)?;
    let manifest = em.finish(cfg, json!({ "gamma": rows }), vec![])?;
    Ok((rows, manifest))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovRow {
    pub k: f64,
    pub tangent: LyapunovEstimate,
    pub separation: LyapunovEstimate,
    pub formula: f64,
}

pub fn run_lyapunov_estimate(cfg: &ExperimentConfig, out: &Path) -> Result<(Vec<LyapunovRow>, RunManifest)> {
    let c = &cfg.classical;
    let seed = cfg.experiment.seed;
    let rows: Vec<LyapunovRow> = cfg
        .system
        .k1
        .iter()
        .map(|&k| {
            Ok(LyapunovRow {
                k,
                tangent: lyapunov_exponent(k, c.lyapunov_samples, c.lyapunov_steps, seed)?,
                separation: lyapunov_by_separation(k, c.lyapunov_samples, c.lyapunov_steps, seed)?,
                formula: lyapunov_formula(k),
            })
        })
        .collect::<Result<_>>()?;
    let mut em = Emitter::new(out)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.k.to_string(),
                r.tangent.lambda.to_string(),
                r.tangent.std_error.to_string(),
                r.separation.lambda.to_string(),
                r.separation.std_error.to_string(),
                r.formula.to_string(),
                r.tangent.n_samples.to_string(),
                r.tangent.n_rejected.to_string(),
            ]
        })
        .collect();
    em.table(
        "lyapunov.csv",
        &["K", "lambda", "std_error", "lambda_separation", "std_error_separation", "formula", "n_samples", "n_rejected"],
        &table,
    )?;
    let manifest = em.finish(cfg, json!({ "lyapunov": rows }), vec![])?;
    Ok((rows, manifest))
}

/// Run whichever experiment the config names.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    Ok(match cfg.experiment.kind {
        ExperimentKind::PuritySweep => run_purity_sweep(cfg, out)?.1,
        ExperimentKind::LyapunovCollapse => run_lyapunov_collapse(cfg, out)?.1,
        ExperimentKind::WignerCompare => run_wigner_compare(cfg, out)?.1,
        ExperimentKind::EnvDecoherence => run_env_decoherence(cfg, out)?.1,
        ExperimentKind::GammaEstimate => run_gamma_estimate(cfg, out)?.1,
        ExperimentKind::LyapunovEstimate => run_lyapunov_estimate(cfg, out)?.1,
    })
}
