//! Independent reference values: a finite-difference eigenvalue solver for
//! the periodic and antiperiodic problems and closed forms for constant
//! diagonal potentials.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::potential::PeriodicMatrixPotential;
use crate::spectrum::EigenKind;

/// Central-difference discretization of −f″ + Vf on K equispaced nodes of
/// one period, with the wrap-around stencil entries multiplied by +1
/// (periodic) or −1 (antiperiodic).
#[derive(Clone, Debug)]
pub struct FdProblem {
    pub k: usize,
    pub kind: EigenKind,
    dim: usize,
    /// V at the nodes, shifted by 2/h².
    diag: Vec<DMatrix<f64>>,
    inv_h2: f64,
}

impl FdProblem {
    pub fn new(p: &PeriodicMatrixPotential, kind: EigenKind, k: usize) -> Result<Self> {
        if k < 64 {
            return Err(Error::InvalidArgument(format!("finite-difference grid needs K >= 64, got {k}")));
        }
        let h = 1.0 / k as f64;
        let inv_h2 = 1.0 / (h * h);
        let n = p.dim();
        let diag = (0..k)
            .map(|j| p.evaluate(j as f64 * h) + DMatrix::identity(n, n) * (2.0 * inv_h2))
            .collect();
        Ok(Self { k, kind, dim: n, diag, inv_h2 })
    }

    pub fn size(&self) -> usize {
        self.dim * self.k
    }

    fn wrap_sign(&self) -> f64 {
        match self.kind {
            EigenKind::Periodic => 1.0,
            EigenKind::Antiperiodic => -1.0,
        }
    }

    /// The assembled NK×NK matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let (n, k) = (self.dim, self.k);
        let mut a = DMatrix::zeros(n * k, n * k);
        for j in 0..k {
            a.view_mut((j * n, j * n), (n, n)).copy_from(&self.diag[j]);
            let (next, sign) = if j + 1 == k { (0, self.wrap_sign()) } else { (j + 1, 1.0) };
            for i in 0..n {
                a[(j * n + i, next * n + i)] -= sign * self.inv_h2;
                a[(next * n + i, j * n + i)] -= sign * self.inv_h2;
            }
        }
        a
    }

    /// Number of eigenvalues below `lambda`, from the inertia of a block
    /// LDLᵀ factorization with the wrap-around block eliminated last.
    pub fn count_below(&self, lambda: f64) -> usize {
        let (n, k) = (self.dim, self.k);
        let c = self.inv_h2;
        let shifted = |j: usize| &self.diag[j] - DMatrix::identity(n, n) * lambda;
        let mut negatives = 0;
        let mut last = shifted(k - 1);
        let mut d = shifted(0);
        let mut p = DMatrix::identity(n, n) * (-self.wrap_sign() * c);
        for j in 0..k - 1 {
            let eig = SymmetricEigen::new(d.clone());
            negatives += eig.eigenvalues.iter().filter(|&&e| e < 0.0).count();
            let inv_vals = eig.eigenvalues.map(|e| 1.0 / if e == 0.0 { f64::MIN_POSITIVE } else { e });
            let d_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv_vals) * eig.eigenvectors.transpose();
            last -= &p * &d_inv * p.transpose();
            if j + 1 < k - 1 {
                let mut next_p = &p * &d_inv * c;
                if j + 2 == k - 1 {
                    next_p -= DMatrix::identity(n, n) * c;
                }
                d = shifted(j + 1) - &d_inv * (c * c);
                p = next_p;
            }
        }
        let last = (&last + last.transpose()) * 0.5;
        negatives + last.symmetric_eigenvalues().iter().filter(|&&e| e < 0.0).count()
    }

    /// Lowest `count` eigenvalues by bisection on `count_below`.
    pub fn lowest(&self, count: usize, rel_tol: f64) -> Result<Vec<f64>> {
        if count == 0 {
            return Ok(Vec::new());
        }
        if count > self.size() / 4 {
            return Err(Error::InvalidArgument(format!(
                "at most NK/4 = {} eigenvalues are reliable on this grid",
                self.size() / 4
            )));
        }
        let lower = self
            .diag
            .iter()
            .map(|m| m.symmetric_eigenvalues().min() - 4.0 * self.inv_h2)
            .fold(f64::INFINITY, f64::min)
            - 1.0;
        let mut upper = lower.abs().max(1.0);
        while self.count_below(upper) < count {
            upper *= 2.0;
            if !upper.is_finite() {
                return Err(Error::no_convergence("finite-difference spectrum bracketing"));
            }
        }
        let mut out = vec![f64::NAN; count];
        self.bisect(lower, 0, upper, count, &mut out, rel_tol);
        Ok(out)
    }

    /// Fills out[i] for i in [n_lo, n_hi), knowing n_lo eigenvalues lie below
    /// `lo` and at least n_hi below `hi`.
    fn bisect(&self, lo: f64, n_lo: usize, hi: f64, n_hi: usize, out: &mut [f64], rel_tol: f64) {
        if n_hi <= n_lo || n_lo >= out.len() {
            return;
        }
        if hi - lo <= rel_tol * (1.0 + lo.abs().max(hi.abs())) {
            let mid = 0.5 * (lo + hi);
            for slot in out.iter_mut().take(n_hi).skip(n_lo) {
                *slot = mid;
            }
            return;
        }
        let mid = 0.5 * (lo + hi);
        let n_mid = self.count_below(mid).min(out.len());
        self.bisect(lo, n_lo, mid, n_mid, out, rel_tol);
        self.bisect(mid, n_mid, hi, n_hi.min(out.len()), out, rel_tol);
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FdEigenvalue {
    pub lambda: f64,
    /// |λ_R − λ_2K|, the size of the Richardson correction.
    pub error_estimate: f64,
    pub coarse: f64,
    pub fine: f64,
}

/// Lowest `count` eigenvalues of the K and 2K discretizations combined by
/// Richardson extrapolation (λ_R = (4λ_2K − λ_K)/3).
pub fn fd_eigenvalues(p: &PeriodicMatrixPotential, kind: EigenKind, count: usize, k: usize) -> Result<Vec<FdEigenvalue>> {
    let coarse = FdProblem::new(p, kind, k)?;
    if count > coarse.size() / 4 {
        return Err(Error::InvalidArgument(format!("count {count} exceeds NK/4 = {}", coarse.size() / 4)));
    }
    let fine = FdProblem::new(p, kind, 2 * k)?;
    let tol = 1e-14;
    let (a, b) = std::thread::scope(|s| {
        let h = s.spawn(|| coarse.lowest(count, tol));
        let b = fine.lowest(count, tol);
        (h.join().expect("oracle thread"), b)
    });
    let (a, b) = (a?, b?);
    Ok(a.iter()
        .zip(&b)
        .map(|(&c, &f)| {
            let r = (4.0 * f - c) / 3.0;
            FdEigenvalue { lambda: r, error_estimate: (r - f).abs(), coarse: c, fine: f }
        })
        .collect())
}

#[derive(Clone, Debug, Serialize)]
pub struct ConstantReference {
    pub deltas: Vec<f64>,
    pub rho: f64,
    pub v: f64,
}

/// Closed forms for V = diag(c₁, …, c_N): Δ_m = cos√(λ − c_m), continued by
/// cosh√(c_m − λ) below c_m, with ρ = Π_{i<j}(Δ_i − Δ_j)² and
/// v = (1/N) Σ arccosh|Δ_m| over |Δ_m| > 1.
pub fn constant_potential_reference(c_list: &[f64], lambda: f64) -> ConstantReference {
    let deltas: Vec<f64> = c_list
        .iter()
        .map(|&c| {
            let d = lambda - c;
            if d >= 0.0 {
                d.sqrt().cos()
            } else {
                (-d).sqrt().cosh()
            }
        })
        .collect();
    let mut rho = 1.0;
    for i in 0..deltas.len() {
        for j in i + 1..deltas.len() {
            rho *= (deltas[i] - deltas[j]).powi(2);
        }
    }
    let n = deltas.len().max(1) as f64;
    let v = deltas.iter().map(|d| if d.abs() > 1.0 { d.abs().acosh() } else { 0.0 }).sum::<f64>() / n;
    ConstantReference { deltas, rho, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn sturm_count_matches_dense_spectrum() {
        let p = crate::corpus::coupling();
        for kind in [EigenKind::Periodic, EigenKind::Antiperiodic] {
            let fd = FdProblem::new(&p, kind, 64).unwrap();
            let mut dense: Vec<f64> = fd.matrix().symmetric_eigenvalues().iter().copied().collect();
            dense.sort_by(f64::total_cmp);
            let lowest = fd.lowest(20, 1e-14).unwrap();
            for (a, b) in lowest.iter().zip(&dense) {
                assert!((a - b).abs() < 1e-9 * (1.0 + b.abs()), "{kind:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn free_periodic_eigenvalues() {
        let ev = fd_eigenvalues(&PeriodicMatrixPotential::zero(2), EigenKind::Periodic, 10, 256).unwrap();
        assert!(ev[0].lambda.abs() < 1e-9 && ev[1].lambda.abs() < 1e-9);
        let target = (2.0 * PI).powi(2);
        for e in &ev[2..6] {
            assert!((e.lambda - target).abs() <= e.error_estimate + 1e-9, "{e:?}");
            assert!((e.lambda - target).abs() < 1e-4);
        }
    }

    #[test]
    fn antiperiodic_constant_diagonal() {
        let c = 3.0;
        let ev = fd_eigenvalues(&PeriodicMatrixPotential::diagonal(&[0.0, c]), EigenKind::Antiperiodic, 4, 128).unwrap();
        let expected = [PI * PI, PI * PI, PI * PI + c, PI * PI + c];
        for (e, x) in ev.iter().zip(expected) {
            assert!((e.lambda - x).abs() < 1e-6, "{e:?} vs {x}");
        }
    }

    #[test]
    fn rejects_small_grids_and_large_counts() {
        let p = PeriodicMatrixPotential::zero(1);
        assert!(FdProblem::new(&p, EigenKind::Periodic, 32).is_err());
        assert!(fd_eigenvalues(&p, EigenKind::Periodic, 17, 64).is_err());
    }

    #[test]
    fn constant_reference_closed_forms() {
        let r = constant_potential_reference(&[0.0], 2.0);
        assert!((r.deltas[0] - 2f64.sqrt().cos()).abs() < 1e-15);
        assert_eq!(r.v, 0.0);
        let r = constant_potential_reference(&[0.0, 1.5], 1.5);
        assert_eq!(r.deltas[1], 1.0);
        let r = constant_potential_reference(&[0.0, 4.0], 3.0);
        assert!((r.deltas[1] - 1f64.cosh()).abs() < 1e-15);
        assert!((r.v - 0.5).abs() < 1e-12);
        assert!((r.rho - (3f64.sqrt().cos() - 1f64.cosh()).powi(2)).abs() < 1e-14);
    }
}
