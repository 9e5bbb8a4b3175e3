//! Frozen reference eigenvalues from a plane-wave Galerkin discretization,
//! which shares no code with the shooting solver or the finite-difference oracle.

use std::f64::consts::PI;

use floquet_core::corpus::coupling;
use floquet_core::spectrum::{eigenvalues, SpectrumConfig};
use floquet_core::PeriodicMatrixPotential;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Lowest eigenvalues of −y″ + Vy in the basis e^{2πi(k+s)t}, |k| ≤ kmax,
/// with s = 0 (periodic) or s = ½ (antiperiodic).
fn galerkin(p: &PeriodicMatrixPotential, shift: f64, kmax: i64) -> Vec<f64> {
    let n = p.dim();
    let ks: Vec<i64> = (-kmax..=kmax).collect();
    let size = ks.len() * n;
    let mut h = DMatrix::<Complex64>::zeros(size, size);
    let coeff = |d: i64| -> DMatrix<Complex64> {
        if d == 0 {
            return p.mean().map(|x| x.into());
        }
        let (c, s) = p.fourier(d.unsigned_abs() as usize);
        let sign = if d > 0 { -1.0 } else { 1.0 };
        c.zip_map(&s, |c, s| Complex64::new(c, sign * s))
    };
    for (a, &k) in ks.iter().enumerate() {
        for (b, &l) in ks.iter().enumerate() {
            let mut block = coeff(k - l);
            if k == l {
                let kinetic = (2.0 * PI * (k as f64 + shift)).powi(2);
                for i in 0..n {
                    block[(i, i)] += kinetic;
                }
            }
            h.view_mut((a * n, b * n), (n, n)).copy_from(&block);
        }
    }
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

const COUPLING_PERIODIC: [f64; 10] = [
    -4.733862176811e-03,
    9.952081716668e-01,
    3.932759451347e+01,
    3.963225963508e+01,
    4.038206572098e+01,
    4.057761841590e+01,
    1.579139373662e+02,
    1.579142239430e+02,
    1.589139422966e+02,
    1.589140689352e+02,
];

const COUPLING_ANTIPERIODIC: [f64; 8] = [
    9.785120844650e+00,
    9.785120844650e+00,
    1.095125794950e+01,
    1.095125794950e+01,
    8.882726195990e+01,
    8.882726195990e+01,
    8.982708772060e+01,
    8.982708772060e+01,
];

#[test]
fn galerkin_reproduces_frozen_values() {
    let p = coupling();
    let per = galerkin(&p, 0.0, 24);
    let anti = galerkin(&p, 0.5, 24);
    for (got, want) in per.iter().zip(COUPLING_PERIODIC) {
        assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
    for (got, want) in anti.iter().zip(COUPLING_ANTIPERIODIC) {
        assert!((got - want).abs() < 1e-9 * (1.0 + want.abs()), "{got} vs {want}");
    }
}

#[test]
fn shooting_eigenvalues_match_frozen_values() {
    let (per, anti) = eigenvalues(&coupling(), 2, &SpectrumConfig::default()).unwrap();
    let mut per = per.lambdas();
    let mut anti = anti.lambdas();
    per.sort_by(f64::total_cmp);
    anti.sort_by(f64::total_cmp);
    assert_eq!(per.len(), COUPLING_PERIODIC.len());
    // Antiperiodic clusters 1, 3 and 5; only the first two are frozen.
    assert_eq!(anti.len(), 12);
    for (got, want) in per.iter().zip(COUPLING_PERIODIC).chain(anti.iter().zip(COUPLING_ANTIPERIODIC)) {
        assert!((got - want).abs() < 1e-8 * (1.0 + want.abs()), "{got} vs {want}");
    }
}
