//! Acceptance report. Prints one PASS/FAIL line per criterion; the process
//! only fails if a criterion cannot be evaluated at all.

use std::time::Instant;

use kicked_rotors::classical::lyapunov_exponent;
use kicked_rotors::experiments::config::ExperimentKind;
use kicked_rotors::experiments::drivers::{
    run_cell, run_env_decoherence, run_lyapunov_collapse, run_wigner_compare, CollapseReport,
};
use kicked_rotors::experiments::ExperimentConfig;
use kicked_rotors::floquet::{dense_floquet_two, TwoParticleFloquet};
use kicked_rotors::observables::{husimi, state_purity, wigner, wigner_inverse, ReducedDensity};
use kicked_rotors::rng;
use kicked_rotors::theory::{fit_decay_with, gamma_from_correlator, CORRELATOR_T_MAX};
use kicked_rotors::torus::{make_gaussian, CouplingParams, GaussianSpec, RotorParams, TorusGrid, TwoParticleState};
use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand_distr::{Distribution, StandardNormal};

const SEED: u64 = 20_240_611;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, ok: bool, detail: String, start: Instant) {
        let tag = if ok { "PASS" } else { "FAIL" };
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{tag} {name}: {detail} [{:.1}s]", start.elapsed().as_secs_f64());
    }
}

fn packet_pair(g: &TorusGrid) -> TwoParticleState {
    let a = make_gaussian(g, &GaussianSpec::coherent(g, 0.7, -1.2)).unwrap();
    let b = make_gaussian(g, &GaussianSpec::coherent(g, -2.0, 0.4)).unwrap();
    TwoParticleState::product(&a, &b)
}

fn unitarity(r: &mut Report) {
    let t = Instant::now();
    let g = TorusGrid::new(512).unwrap();
    let p = RotorParams::new(5.09);
    let coupled = TwoParticleFloquet::new(&g, &g, &p, &p, &CouplingParams::new(4.0));
    let free = TwoParticleFloquet::new(&g, &g, &p, &p, &CouplingParams::new(0.0));
    let mut s = packet_pair(&g);
    let mut u = s.clone();
    let mut purity_dev = 0.0f64;
    for _ in 0..50 {
        coupled.step(&mut s).unwrap();
        free.step(&mut u).unwrap();
        purity_dev = purity_dev.max((state_purity(&u) - 1.0).abs());
    }
    let drift = (s.norm_sqr() - 1.0).abs();
    r.line(
        "unitarity-and-factorization",
        drift < 1e-10 && purity_dev < 1e-10,
        format!("norm drift {drift:.2e}, max |P-1| at eps=0 {purity_dev:.2e} (N=512, 50 kicks)"),
        t,
    );
}

fn oracle(r: &mut Report) {
    let t = Instant::now();
    let g = TorusGrid::new(16).unwrap();
    let (p, c) = (RotorParams::new(5.09), CouplingParams::new(4.0));
    let u = dense_floquet_two(&g, &g, &p, &p, &c).unwrap();
    let f = TwoParticleFloquet::new(&g, &g, &p, &p, &c);
    let mut s = packet_pair(&g);
    let mut v = Array1::from_iter(s.amplitudes.iter().cloned());
    let mut dev = 0.0f64;
    for _ in 0..10 {
        f.step(&mut s).unwrap();
        v = u.dot(&v);
        dev = dev.max(s.amplitudes.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max));
    }
    r.line("oracle-equivalence", dev < 1e-10, format!("max deviation {dev:.2e} over 10 steps (N=16)"), t);
}

fn gamma(r: &mut Report) {
    let t = Instant::now();
    let g = gamma_from_correlator(5.09, 5.09, 1.0, 0.33, 100_000, CORRELATOR_T_MAX, SEED).unwrap();
    r.line(
        "gamma-constant",
        (g.value - 0.43).abs() <= 0.065,
        format!(
            "Gamma/eps^2 = {:.4} ± {:.4} ({} terms, C(0) = {:.4}), target 0.43 ± 0.065",
            g.value,
            g.std_error,
            g.terms(),
            g.correlator[0]
        ),
        t,
    );
}

fn base_sweep(k: f64, eps: f64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(ExperimentKind::PuritySweep, SEED);
    c.system.k1 = vec![k];
    c.system.eps = vec![eps];
    c
}

fn weak_coupling(r: &mut Report) {
    let t = Instant::now();
    let cell = run_cell(&base_sweep(5.09, 0.8), 5.09, 5.09, 0.8).unwrap();
    let target = 0.85 * 0.64;
    match &cell.fit {
        Some(f) => r.line(
            "weak-coupling-rate",
            (f.rate - target).abs() <= 0.2 * target,
            format!(
                "fitted rate {:.4} ± {:.4} over kicks {:?}, target {target:.3} ± 20%, 2*Gamma_hat = {:.4}",
                f.rate,
                f.rate_error,
                f.window,
                2.0 * cell.theory.gamma
            ),
            t,
        ),
        None => r.line("weak-coupling-rate", false, format!("no fit: {:?}", cell.fit_error), t),
    }
}

fn collapse(r: &mut Report) -> CollapseReport {
    let t = Instant::now();
    let mut cfg = ExperimentConfig::new(ExperimentKind::LyapunovCollapse, SEED);
    cfg.system.k1 = vec![6.0, 8.0, 10.0, 12.0];
    cfg.system.eps = vec![4.0];
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = run_lyapunov_collapse(&cfg, dir.path()).unwrap();
    let s = &report.stats;
    r.line(
        "collapse-slope",
        (s.master_slope + 1.0).abs() <= 0.2,
        format!(
            "master slope {:.3} ± {:.3} over {} points, spread {:.3} (K = 6, 8, 10, 12; eps = 4)",
            s.master_slope, s.master_slope_error, s.n_points, s.spread
        ),
        t,
    );
    let t = Instant::now();
    let target = 2.0 / 512.0;
    let per_k: Vec<String> = report
        .sweep
        .cells
        .iter()
        .map(|c| format!("K={}: {:.5}", c.k1, c.late_purity))
        .collect();
    r.line(
        "saturation-value",
        (report.late_purity - target).abs() <= 0.3 * target,
        format!(
            "late purity {:.5}, target {target:.5} ± 30% ({})",
            report.late_purity,
            per_k.join(", ")
        ),
        t,
    );
    report
}

fn lyapunov_saturation(r: &mut Report, collapse: &CollapseReport) {
    let t = Instant::now();
    let at4 = collapse.sweep.cells.iter().find(|c| c.k1 == 10.0).unwrap().clone();
    let at3 = run_cell(&base_sweep(10.0, 3.0), 10.0, 10.0, 3.0).unwrap();
    let lambda = at4.theory.lambda1.lambda;
    match (&at3.fit, &at4.fit) {
        (Some(f3), Some(f4)) => {
            let mean = 0.5 * (f3.rate + f4.rate);
            let agree = (f3.rate - f4.rate).abs() <= 0.1 * mean;
            let near = [f3.rate, f4.rate].iter().all(|&v| (v - lambda).abs() <= 0.2 * lambda);
            r.line(
                "lyapunov-saturation",
                agree && near,
                format!(
                    "rates {:.4} (eps=3), {:.4} (eps=4), lambda(K=10) = {lambda:.4}",
                    f3.rate, f4.rate
                ),
                t,
            )
        }
        _ => {
            // diagnostic only: the same fit started right after the first kick
            let free = |c: &kicked_rotors::experiments::drivers::CellResult| {
                fit_decay_with(&c.series, 0.0, c.theory.params.saturation())
                    .map(|f| format!("{:.4}", f.rate))
                    .unwrap_or_else(|e| e.to_string())
            };
            r.line(
                "lyapunov-saturation",
                false,
                format!(
                    "no fit: {:?} / {:?}; rates from kick 1: {} (eps=3), {} (eps=4), lambda(K=10) = {lambda:.4}",
                    at3.fit_error,
                    at4.fit_error,
                    free(&at3),
                    free(&at4)
                ),
                t,
            )
        }
    }
}

fn correspondence(r: &mut Report) {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExperimentKind::WignerCompare, SEED);
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = run_wigner_compare(&cfg, dir.path()).unwrap();
    let d = |n: usize, eps: f64| {
        report
            .distances
            .iter()
            .find(|row| row.label == "husimi-vs-classical" && row.n == n && row.eps == eps)
            .unwrap()
            .distance
    };
    let (d0, d4, d4f) = (d(512, 0.0), d(512, 4.0), d(1024, 4.0));
    r.line(
        "correspondence-ordering",
        d4 < d0 && d4f < d4,
        format!("distance eps=0 N=512 {d0:.4}, eps=4 N=512 {d4:.4}, eps=4 N=1024 {d4f:.4}"),
        t,
    );
}

fn environment(r: &mut Report) {
    let t = Instant::now();
    let cfg = ExperimentConfig::new(ExperimentKind::EnvDecoherence, SEED);
    let dir = tempfile::tempdir().unwrap();
    let (report, _) = run_env_decoherence(&cfg, dir.path()).unwrap();
    let sat = 1.0 / 512.0;
    let lambda = report.lambda1.lambda;
    let sat_ok = (report.late_purity - sat).abs() <= 0.3 * sat;
    match &report.fit {
        Some(f) => r.line(
            "environment-variant",
            sat_ok && (f.rate - lambda).abs() <= 0.25 * lambda,
            format!(
                "late purity {:.5} (target {sat:.5} ± 30%), rate {:.4} vs lambda1 {lambda:.4} ± 25%, {} packets",
                report.late_purity, f.rate, report.n_env_states
            ),
            t,
        ),
        None => r.line("environment-variant", false, format!("no fit: {:?}", report.fit_error), t),
    }
}

fn random_density(n: usize, rank: usize, seed: u64) -> ReducedDensity {
    let mut rg = rng::stream(seed, &[n as u64, rank as u64]);
    let g = Array2::from_shape_simple_fn((n, rank), || {
        C64::new(StandardNormal.sample(&mut rg), StandardNormal.sample(&mut rg))
    });
    let mut m = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = m.diag().sum().re;
    m.mapv_inplace(|z| z / tr);
    ReducedDensity::from_matrix(m).unwrap()
}

fn wigner_checks(r: &mut Report) {
    let t = Instant::now();
    let n = 64;
    let g = TorusGrid::new(n).unwrap();
    let (mut roundtrip, mut marginal, mut husimi_min) = (0.0f64, 0.0f64, f64::INFINITY);
    for i in 0..100u64 {
        let rho = random_density(n, 1 + (i as usize % 8), SEED + i);
        let w = wigner(&rho, &g).unwrap();
        let back = wigner_inverse(&w, &g).unwrap();
        roundtrip = roundtrip.max((&back.matrix - &rho.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max));
        for j in 0..n {
            let even: f64 = w.values.row(2 * j).sum();
            let odd: f64 = w.values.row(2 * j + 1).sum();
            marginal = marginal.max((even - rho.matrix[[j, j]].re).abs()).max(odd.abs());
        }
        let h = husimi(&rho, &g, 64, g.coherent_sigma()).unwrap();
        husimi_min = husimi_min.min(h.min_value());
    }
    r.line(
        "wigner-correctness",
        roundtrip < 1e-10 && marginal < 1e-10 && husimi_min >= 0.0,
        format!("roundtrip {roundtrip:.2e}, marginal {marginal:.2e}, min Husimi {husimi_min:.2e} (N=64, 100 states)"),
        t,
    );
}

fn lyapunov(r: &mut Report) {
    let t = Instant::now();
    let l = lyapunov_exponent(10.0, 1000, 1000, SEED).unwrap();
    let target = 5f64.ln();
    r.line(
        "lyapunov-estimator",
        (l.lambda - target).abs() <= 0.1 * target,
        format!("lambda(K=10) = {:.4} ± {:.4}, target ln 5 = {target:.4} ± 10%", l.lambda, l.std_error),
        t,
    );
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        // nothing to list for the test harness
        return;
    }
    let mut r = Report { passed: 0, failed: 0 };
    unitarity(&mut r);
    oracle(&mut r);
    gamma(&mut r);
    lyapunov(&mut r);
    wigner_checks(&mut r);
    weak_coupling(&mut r);
    let c = collapse(&mut r);
    lyapunov_saturation(&mut r, &c);
    correspondence(&mut r);
    environment(&mut r);
    println!("acceptance: {} passed, {} failed", r.passed, r.failed);
}
