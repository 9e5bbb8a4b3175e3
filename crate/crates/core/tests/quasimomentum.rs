use std::f64::consts::PI;

use floquet_core::corpus::{corpus, coupling};
use floquet_core::lyapunov::discriminant;
use floquet_core::monodromy::SolverConfig;
use floquet_core::quasimomentum::{asymptotic_w_check, exponent_and_density, prepare, QuasimomentumConfig};
use floquet_core::roots::arg_change;
use floquet_core::spectrum::SpectrumConfig;
use num_complex::Complex64;

#[test]
fn discriminant_zero_count_near_pi_n() {
    let three_level = corpus().into_iter().find(|(name, _)| *name == "three-level").unwrap().1;
    for (p, expected) in [(coupling(), 2.0), (three_level, 6.0)] {
        let n = 12.0;
        let corners: Vec<Complex64> = (0..=64)
            .map(|k| Complex64::new(PI * n, 0.0) + Complex64::from_polar(PI / 2.0, 2.0 * PI * k as f64 / 64.0))
            .collect();
        let cfg = SolverConfig::default();
        let change = arg_change(|z| Ok(discriminant(&p, z, &cfg)?.rho), &corners, 4, 0.5).unwrap();
        assert!((change / (2.0 * PI) - expected).abs() < 1e-6, "winding {}", change / (2.0 * PI));
    }
}

#[test]
fn v_dominates_the_gap_model() {
    let cfg = QuasimomentumConfig { clusters: 4, ..Default::default() };
    let data = prepare(&coupling(), &cfg).unwrap();
    let mut checked = 0;
    for g in data.gaps() {
        let xs: Vec<f64> = (1..10).map(|k| g.x_lo + (g.x_hi - g.x_lo) * k as f64 / 10.0).collect();
        let grid = exponent_and_density(&data.potential, &xs, cfg.eps, &cfg.spectrum).unwrap();
        for s in &grid.real_axis {
            let model = ((s.x - g.x_lo) * (g.x_hi - s.x)).sqrt();
            assert!(s.v >= model * (1.0 - 1e-9), "x = {}: v = {} < {}", s.x, s.v, model);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn w_exceeds_z_on_the_imaginary_axis() {
    for (name, p) in corpus() {
        let rep = asymptotic_w_check(&p, &[1.0, 4.0, 16.0, 64.0], &SpectrumConfig::default()).unwrap();
        assert!(rep.sign_ok, "{name}");
        for s in &rep.samples {
            assert!(s.w_minus_z.im > 0.0, "{name} y = {}: {}", s.y, s.w_minus_z);
        }
    }
}

#[test]
fn eta_grows_like_two_c() {
    for c in [1e2, 1e4, 1e6] {
        let e = floquet_core::quasimomentum::eta(Complex64::new(c, 0.0));
        assert!((e.norm() / (2.0 * c) - 1.0).abs() < 2.0 / c.powi(2), "{c}: {e}");
    }
}
