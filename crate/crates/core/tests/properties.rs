use std::f64::consts::PI;

use floquet_core::corpus::random_potential;
use floquet_core::lyapunov::{chebyshev_t, lyapunov_from_sample, lyapunov_values};
use floquet_core::monodromy::{characteristic_det, integrate_monodromy, symplectic_residual, traces, SolverConfig};
use floquet_core::oracle::{constant_potential_reference, fd_eigenvalues};
use floquet_core::potential::direct_sum;
use floquet_core::quasimomentum::{exponent_and_density, upper_plane};
use floquet_core::spectrum::{eigenvalues, EigenKind, SpectrumConfig};
use floquet_core::PeriodicMatrixPotential;
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn moderate_z() -> impl Strategy<Value = Complex64> {
    (-12.0..12.0f64, -3.0..3.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn monodromy_is_symplectic(seed in 0u64..1000, z in moderate_z()) {
        let p = random_potential(seed);
        let ms = integrate_monodromy(&p, z, &SolverConfig::default()).unwrap();
        let det = ms.balanced_m().determinant() * (2.0 * p.dim() as f64 * ms.log_scale).exp();
        prop_assert!((det - 1.0).norm() < 1e-9, "det {}", det);
        prop_assert!(symplectic_residual(&ms) < 1e-9);
    }

    #[test]
    fn characteristic_polynomial_is_reciprocal(seed in 0u64..1000, z in moderate_z(), r in 0.3..3.0f64, arg in -PI..PI) {
        let p = random_potential(seed);
        let ms = integrate_monodromy(&p, z, &SolverConfig::default()).unwrap();
        let tau = Complex64::from_polar(r, arg);
        let a = characteristic_det(&ms, tau);
        let b = tau.powi(2 * p.dim() as i32) * characteristic_det(&ms, tau.inv());
        prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(b.norm()).max(1e-300));
    }

    #[test]
    fn traces_are_chebyshev_sums(seed in 0u64..1000, z in moderate_z()) {
        let p = random_potential(seed);
        let cfg = SolverConfig::default();
        let ms = integrate_monodromy(&p, z, &cfg).unwrap();
        let set = lyapunov_from_sample(&ms, &cfg).unwrap();
        let tr = traces(&ms, 4);
        for k in 1..=4 {
            let lhs: Complex64 = set.deltas.iter().map(|&d| chebyshev_t(k, d)).sum();
            let rhs = tr[k - 1] * p.dim() as f64;
            prop_assert!((lhs - rhs).norm() <= 1e-7 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn real_axis_values_come_in_conjugate_pairs(seed in 0u64..1000, x in 0.0..15.0f64) {
        let p = random_potential(seed);
        for z in [Complex64::new(x, 0.0), Complex64::new(0.0, x)] {
            let set = lyapunov_values(&p, z, &SolverConfig::default()).unwrap();
            for d in &set.deltas {
                let partner = set.deltas.iter().map(|e| (e - d.conj()).norm()).fold(f64::INFINITY, f64::min);
                prop_assert!(partner <= 1e-9 * (1.0 + d.norm()));
            }
        }
    }

    #[test]
    fn constant_diagonal_matches_closed_form(c in prop::collection::vec(-3.0..3.0f64, 1..4), lambda in -4.0..60.0f64) {
        let p = PeriodicMatrixPotential::diagonal(&c);
        let z = Complex64::new(lambda, 0.0).sqrt();
        let set = lyapunov_values(&p, z, &SolverConfig::default()).unwrap();
        let mut want = constant_potential_reference(&c, lambda).deltas;
        want.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = set.deltas.iter().map(|d| d.re).collect();
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!((g - w).abs() <= 1e-9 * (1.0 + w.abs()), "{} vs {}", g, w);
        }
    }

    #[test]
    fn direct_sum_joins_lyapunov_values(s1 in 0u64..500, s2 in 0u64..500, z in moderate_z()) {
        let (p1, p2) = (random_potential(s1), random_potential(s2));
        let cfg = SolverConfig::default();
        let mut whole: Vec<Complex64> = lyapunov_values(&direct_sum(&p1, &p2), z, &cfg).unwrap().deltas;
        let mut parts = lyapunov_values(&p1, z, &cfg).unwrap().deltas;
        parts.extend(lyapunov_values(&p2, z, &cfg).unwrap().deltas);
        let key = |a: &Complex64, b: &Complex64| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im));
        whole.sort_by(key);
        parts.sort_by(key);
        for (a, b) in whole.iter().zip(&parts) {
            prop_assert!((a - b).norm() <= 1e-8 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn parseval_and_periodicity(seed in 0u64..10_000, k in 0u32..1 << 20) {
        let p = random_potential(seed);
        let points = 4096;
        let quad: f64 = (0..points).map(|j| { let v = p.evaluate(j as f64 / points as f64); (&v * &v).trace() }).sum::<f64>() / points as f64;
        prop_assert!((quad - p.hs_norm_sq()).abs() <= 1e-8 * p.hs_norm_sq());
        // Dyadic t so that t + 1 is exact.
        let t = k as f64 / (1u32 << 20) as f64;
        prop_assert_eq!(p.evaluate(t), p.evaluate(t + 1.0));
    }

    #[test]
    fn normalization_is_a_shifted_conjugation(seed in 0u64..10_000, shift in -3.0..3.0f64) {
        let p = random_potential(seed);
        let n = p.dim();
        let shifted = PeriodicMatrixPotential::new(
            p.mean() - DMatrix::identity(n, n) * shift,
            p.cos_coeffs().to_vec(),
            p.sin_coeffs().to_vec(),
        ).unwrap();
        let q = p.normalize(shift).unwrap();
        prop_assert!((q.hs_norm_sq() - shifted.hs_norm_sq()).abs() <= 1e-12 * (1.0 + shifted.hs_norm_sq()));
        prop_assert!(q.mean_is_diagonal());
    }

    #[test]
    fn multipliers_pair_under_inversion(seed in 0u64..1000, z in moderate_z()) {
        let p = random_potential(seed);
        let ms = integrate_monodromy(&p, z, &SolverConfig::default()).unwrap();
        let taus: Vec<Complex64> = ms.balanced_m().eigenvalues().map(|e| e.iter().copied().collect()).unwrap_or_else(|| {
            nalgebra::linalg::Schur::new(ms.balanced_m()).eigenvalues().unwrap().iter().copied().collect()
        });
        let scale = ms.log_scale.exp();
        for t in &taus {
            let t = t * scale;
            let inv = t.inv();
            let partner = taus.iter().map(|u| (u * scale - inv).norm() / (1.0 + inv.norm())).fold(f64::INFINITY, f64::min);
            prop_assert!(partner < 1e-6, "{} has no reciprocal partner", t);
        }
    }

    #[test]
    fn json_round_trip_preserves_potential(seed in 0u64..10_000) {
        let p = random_potential(seed);
        let q = PeriodicMatrixPotential::from_json_str(&p.to_json_string()).unwrap();
        for t in [0.0, 0.17, 0.5, 0.83] {
            prop_assert!((p.evaluate(t) - q.evaluate(t)).amax() < 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn eigenvalues_agree_with_finite_differences(seed in 0u64..1000) {
        let p = random_potential(seed);
        let (per, anti) = eigenvalues(&p, 2, &SpectrumConfig::default()).unwrap();
        for (list, kind) in [(per, EigenKind::Periodic), (anti, EigenKind::Antiperiodic)] {
            let fd = fd_eigenvalues(&p, kind, list.entries.len(), 256).unwrap();
            let mut got = list.lambdas();
            got.sort_by(f64::total_cmp);
            for (g, o) in got.iter().zip(&fd) {
                prop_assert!((g - o.lambda).abs() <= o.error_estimate.max(1e-6 * (1.0 + o.lambda.abs())), "{} vs {:?}", g, o);
            }
        }
    }

    #[test]
    fn band_branches_are_monotone(seed in 0u64..1000) {
        let p = random_potential(seed);
        let cfg = SolverConfig::default();
        let mut run: Vec<Vec<f64>> = Vec::new();
        let check = |run: &mut Vec<Vec<f64>>| -> Result<(), TestCaseError> {
            if run.len() >= 3 {
                for m in 0..run[0].len() {
                    let up = run.windows(2).all(|w| w[1][m] > w[0][m]);
                    let down = run.windows(2).all(|w| w[1][m] < w[0][m]);
                    prop_assert!(up || down, "branch {} is not monotone inside a band", m);
                }
            }
            run.clear();
            Ok(())
        };
        for k in 0..800 {
            let x = 0.2 + k as f64 * 0.015;
            let set = lyapunov_values(&p, Complex64::new(x, 0.0), &cfg).unwrap();
            let inside = set.deltas.iter().all(|d| d.im == 0.0 && d.re.abs() < 1.0) && set.min_gap() > 1e-2;
            if inside {
                run.push(set.deltas.iter().map(|d| d.re).collect());
            } else {
                check(&mut run)?;
            }
        }
        check(&mut run)?;
    }

    #[test]
    fn v_on_the_imaginary_axis_approaches_y(seed in 0u64..1000) {
        let p = random_potential(seed);
        let ys = [5.0, 20.0, 80.0];
        let row = upper_plane(&p, &[0.0], &ys, &SpectrumConfig::default()).unwrap();
        let mut prev = f64::INFINITY;
        for s in &row {
            let err = (s.w.im / s.y - 1.0).abs();
            prop_assert!(err < 2.0 / s.y, "y = {}: v/y = {}", s.y, s.w.im / s.y);
            prop_assert!(err <= prev);
            prev = err;
        }
    }

    #[test]
    fn quasimomentum_shape(seed in 0u64..1000) {
        let p = random_potential(seed);
        let lambda0 = floquet_core::spectrum::bottom_of_spectrum(&p, &SpectrumConfig::default()).unwrap();
        let q = p.normalize(lambda0).unwrap();
        let half: Vec<f64> = (1..=48).map(|k| k as f64 * 0.25).collect();
        let mut xs: Vec<f64> = half.iter().rev().map(|x| -x).chain(half.iter().copied()).collect();
        xs.insert(48, 0.0);
        let grid = exponent_and_density(&q, &xs, [1e-4, 5e-5], &SpectrumConfig::default()).unwrap();
        let s = &grid.real_axis;
        for (a, b) in s.iter().zip(s.iter().rev()) {
            prop_assert!(a.v >= 0.0);
            prop_assert!((a.v - b.v).abs() <= 1e-8 * (1.0 + a.v));
            prop_assert!((a.u + b.u).abs() <= 1e-6 * (1.0 + a.u.abs()));
        }
        for w in s.windows(2) {
            prop_assert!(w[1].u >= w[0].u - 1e-6, "u decreases between {} and {}", w[0].x, w[1].x);
        }
    }
}
