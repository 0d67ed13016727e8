use std::f64::consts::PI;

use kicked_rotors::classical::{sample_gaussian_ensemble, smoothed_density};
use kicked_rotors::floquet::TwoParticleFloquet;
use kicked_rotors::observables::{
    correspondence_distance, husimi, purity, reduce, state_purity, wigner, wigner_inverse, Particle,
    ReducedDensity,
};
use kicked_rotors::rng;
use kicked_rotors::torus::{make_gaussian, CouplingParams, GaussianSpec, RotorParams, TorusGrid, TwoParticleState};
use nalgebra::DMatrix;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn random_density(n: usize, rank: usize, seed: u64) -> ReducedDensity {
    let mut r = rng::stream(seed, &[n as u64, rank as u64]);
    let g = Array2::from_shape_simple_fn((n, rank), || {
        C64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r))
    });
    let mut m = g.dot(&g.t().mapv(|z| z.conj()));
    let tr = m.diag().sum().re;
    m.mapv_inplace(|z| z / tr);
    ReducedDensity::from_matrix(m).unwrap()
}

fn random_two_particle(n1: usize, n2: usize, seed: u64) -> TwoParticleState {
    let mut r = rng::stream(seed, &[]);
    let a = Array2::from_shape_simple_fn((n1, n2), || {
        C64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r))
    });
    let mut s = TwoParticleState::from_amplitudes(TorusGrid::new(n1).unwrap(), TorusGrid::new(n2).unwrap(), a).unwrap();
    s.normalize().unwrap();
    s
}

fn to_nalgebra(rho: &ReducedDensity) -> DMatrix<C64> {
    DMatrix::from_fn(rho.dim, rho.dim, |i, k| rho.matrix[[i, k]])
}

// the Wigner sum written out term by term, without transforms
fn brute_wigner(rho: &ReducedDensity) -> Array2<C64> {
    let n = rho.dim;
    let m = 2 * n;
    Array2::from_shape_fn((m, m), |(a, b)| {
        let mut acc = C64::new(0.0, 0.0);
        for ap in 0..m {
            if (ap + a) % 2 != 0 {
                continue;
            }
            let r = ((a + ap) / 2) % n;
            let c = ((a as isize - ap as isize) / 2).rem_euclid(n as isize) as usize;
            acc += rho.matrix[[r, c]] * C64::from_polar(1.0, -PI * (b * ap) as f64 / n as f64);
        }
        acc / m as f64
    })
}

#[test]
fn reduced_densities_are_valid_states() {
    for seed in 0..5 {
        let s = random_two_particle(16, 16, seed);
        for which in [Particle::First, Particle::Second] {
            let rho = reduce(&s, which);
            assert!((rho.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
            assert!(rho.hermiticity_error() < 1e-12);
            let eig = to_nalgebra(&rho).symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e >= -1e-10));
        }
    }
}

#[test]
fn purities_of_both_partners_agree() {
    for (n1, n2, seed) in [(16, 16, 1), (8, 24, 2), (32, 6, 3)] {
        let s = random_two_particle(n1, n2, seed);
        let p1 = purity(&reduce(&s, Particle::First));
        let p2 = purity(&reduce(&s, Particle::Second));
        assert!((p1 - p2).abs() < 1e-12);
        assert!((state_purity(&s) - p1).abs() < 1e-12);
        assert!(p1 >= 1.0 / n1.min(n2) as f64 - 1e-9 && p1 <= 1.0 + 1e-9);
    }
}

#[test]
fn purity_symmetry_along_coupled_evolution() {
    let g = TorusGrid::new(32).unwrap();
    let a = make_gaussian(&g, &GaussianSpec::coherent(&g, 1.0, 0.5)).unwrap();
    let b = make_gaussian(&g, &GaussianSpec::coherent(&g, -2.0, 1.5)).unwrap();
    let mut s = TwoParticleState::product(&a, &b);
    let f = TwoParticleFloquet::new(&g, &g, &RotorParams::new(5.09), &RotorParams::new(5.09), &CouplingParams::new(2.0));
    assert!((state_purity(&s) - 1.0).abs() < 1e-12);
    for _ in 0..20 {
        f.step(&mut s).unwrap();
        let p1 = purity(&reduce(&s, Particle::First));
        let p2 = purity(&reduce(&s, Particle::Second));
        assert!((p1 - p2).abs() < 1e-12);
        assert!((1.0 / 32.0 - 1e-9..=1.0 + 1e-9).contains(&p1));
    }
}

#[test]
fn wigner_matches_definition_and_is_real() {
    for (n, seed) in [(8, 1), (16, 2), (32, 3)] {
        let g = TorusGrid::new(n).unwrap();
        let rho = random_density(n, 3, seed);
        let brute = brute_wigner(&rho);
        let w = wigner(&rho, &g).unwrap();
        let m = 2 * n;
        for a in 0..m {
            for b in 0..m {
                assert!(brute[[a, b]].im.abs() < 1e-12);
                let c = (b + n) % m;
                assert!((w.values[[a, c]] - brute[[a, b]].re).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn wigner_ghost_relation() {
    let n = 32;
    let g = TorusGrid::new(n).unwrap();
    let w = wigner(&random_density(n, 2, 7), &g).unwrap();
    for a in 0..2 * n {
        let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
        for c in 0..n {
            assert!((w.values[[a, c + n]] - sign * w.values[[a, c]]).abs() < 1e-13);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn wigner_roundtrip_and_marginals(seed in any::<u64>(), rank in 1usize..6) {
        let n = 64;
        let g = TorusGrid::new(n).unwrap();
        let rho = random_density(n, rank, seed);
        let w = wigner(&rho, &g).unwrap();
        prop_assert!((w.total() - 1.0).abs() < 1e-10);
        let back = wigner_inverse(&w, &g).unwrap();
        let err = (&back.matrix - &rho.matrix).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(err < 1e-10);
        for j in 0..n {
            let even: f64 = w.values.row(2 * j).sum();
            let odd: f64 = w.values.row(2 * j + 1).sum();
            // each even row holds the diagonal twice over, once per ghost half
            let half: f64 = w.values.row(2 * j).iter().take(n).sum();
            prop_assert!((even - rho.matrix[[j, j]].re).abs() < 1e-10);
            prop_assert!((half - rho.matrix[[j, j]].re / 2.0).abs() < 1e-10);
            prop_assert!(odd.abs() < 1e-10);
        }
    }
}

#[test]
fn wigner_of_gaussian_has_expected_blob_moments() {
    let n = 512;
    let g = TorusGrid::new(n).unwrap();
    let spec = GaussianSpec::coherent(&g, 1.0, 2.0);
    let s = make_gaussian(&g, &spec).unwrap();
    let w = wigner(&ReducedDensity::pure(s.amplitudes.as_slice().unwrap()), &g).unwrap();
    let sx = spec.sigma / 2f64.sqrt();
    let sp = g.hbar_eff() / (2f64.sqrt() * spec.sigma);
    let (mut m0, mut mx, mut mp, mut mxx, mut mpp) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((a, c), &v) in w.values.indexed_iter() {
        let dx = w.x_center(a) - 1.0;
        let dp = w.p_center(c) - 2.0;
        if dx.abs() <= 5.0 * sx && dp.abs() <= 5.0 * sp {
            m0 += v;
            mx += v * dx;
            mp += v * dp;
            mxx += v * dx * dx;
            mpp += v * dp * dp;
        }
    }
    assert!(m0 > 0.0);
    let (mx, mp) = (mx / m0, mp / m0);
    let vx = mxx / m0 - mx * mx;
    let vp = mpp / m0 - mp * mp;
    assert!(mx.abs() < 0.01 && mp.abs() < 0.01, "centre offset ({mx}, {mp})");
    assert!((vx / (sx * sx) - 1.0).abs() < 0.05, "x variance ratio {}", vx / (sx * sx));
    assert!((vp / (sp * sp) - 1.0).abs() < 0.05, "p variance ratio {}", vp / (sp * sp));
    // the largest value sits on the blob or one of its π-shifted ghosts
    let max = w.values.iter().cloned().fold(f64::MIN, f64::max);
    let (ia, ic) = w.values.indexed_iter().find(|(_, &v)| v == max).unwrap().0;
    let near = |d: f64, s: f64| d.abs() < 2.0 * s || (d.abs() - PI).abs() < 2.0 * s;
    let on_blob = near(w.x_center(ia) - 1.0, sx) && near(w.p_center(ic) - 2.0, sp);
    assert!(on_blob, "maximum at ({}, {})", w.x_center(ia), w.p_center(ic));
}

#[test]
fn husimi_is_nonnegative_on_random_states() {
    let n = 64;
    let g = TorusGrid::new(n).unwrap();
    for seed in 0..1000 {
        let rho = random_density(n, 1 + (seed as usize % 4), seed);
        let h = husimi(&rho, &g, 16, g.coherent_sigma()).unwrap();
        assert!(h.min_value() >= -1e-12, "seed {seed}: {}", h.min_value());
        assert!((h.total() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn husimi_equals_wigner_smoothed_by_the_packet() {
    // ⟨g|ρ|g⟩ = N Σ W_ρ W_g on the doubled lattice
    for (n, seed) in [(16, 1), (32, 2), (64, 3)] {
        let g = TorusGrid::new(n).unwrap();
        let sigma = g.coherent_sigma();
        let rho = random_density(n, 2, seed);
        let h = husimi(&rho, &g, 16, sigma).unwrap();
        let wr = wigner(&rho, &g).unwrap();
        let mut smoothed = Array2::<f64>::zeros((16, 16));
        for i in 0..16 {
            for k in 0..16 {
                let spec = GaussianSpec::new(h.x_center(i), h.p_center(k), sigma);
                let packet = make_gaussian(&g, &spec).unwrap();
                let wg = wigner(&ReducedDensity::pure(packet.amplitudes.as_slice().unwrap()), &g).unwrap();
                smoothed[[i, k]] = n as f64 * (&wr.values * &wg.values).sum();
            }
        }
        let mut s = h.clone();
        s.values = smoothed;
        s.normalize();
        let tv = correspondence_distance(&h, &s).unwrap();
        assert!(tv < 1e-8, "N={n}: {tv}");
    }
}

#[test]
fn classical_ensemble_matches_initial_husimi() {
    let n = 512;
    let g = TorusGrid::new(n).unwrap();
    let spec = GaussianSpec::coherent(&g, 1.0, 2.0);
    let hbar = g.hbar_eff();
    let s = make_gaussian(&g, &spec).unwrap();
    let h = husimi(&ReducedDensity::pure(s.amplitudes.as_slice().unwrap()), &g, 128, spec.sigma).unwrap();
    let ens = sample_gaussian_ensemble(&spec, hbar, 1_000_000, 17);
    let cl = smoothed_density(&ens, 128, 128, spec.sigma / 2f64.sqrt(), hbar / (2f64.sqrt() * spec.sigma));
    let tv = correspondence_distance(&h, &cl).unwrap();
    assert!(tv < 0.05, "total variation {tv}");
}
