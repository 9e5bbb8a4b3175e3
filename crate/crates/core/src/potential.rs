//! Band-limited 1-periodic real symmetric matrix potentials.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;

/// V(t) = V⁰ + 2 Σ_{n≥1} (Cₙ cos 2πnt + Sₙ sin 2πnt), with Cₙ = ∫V cos 2πnt and
/// Sₙ = ∫V sin 2πnt over one period.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMatrixPotential {
    dim: usize,
    mean: DMatrix<f64>,
    cos_coeffs: Vec<DMatrix<f64>>,
    sin_coeffs: Vec<DMatrix<f64>>,
    energy_shift: f64,
}

#[derive(Serialize, Deserialize)]
struct PotentialFile {
    dim: usize,
    mean: Vec<Vec<f64>>,
    #[serde(default)]
    cos: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    sin: BTreeMap<String, Vec<Vec<f64>>>,
    #[serde(default)]
    shift: f64,
}

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidPotential(format!("{what} is not square")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidPotential(format!("{what} has non-finite entries")));
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidPotential(format!(
            "{what} is not symmetric (asymmetry {asym:e})"
        )));
    }
    Ok((m + m.transpose()) * 0.5)
}

fn rows_to_matrix(rows: &[Vec<f64>], dim: usize, what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
        return Err(Error::InvalidPotential(format!("{what} must be {dim}x{dim}")));
    }
    Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl PeriodicMatrixPotential {
    /// Builds a potential from its mean and Fourier coefficient lists (index 0 holds n = 1).
    pub fn new(
        mean: DMatrix<f64>,
        cos_coeffs: Vec<DMatrix<f64>>,
        sin_coeffs: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let dim = mean.nrows();
        if dim == 0 {
            return Err(Error::InvalidPotential("dimension must be at least 1".into()));
        }
        let mean = check_symmetric(&mean, "mean")?;
        let n_max = cos_coeffs.len().max(sin_coeffs.len());
        let mut cos = Vec::with_capacity(n_max);
        let mut sin = Vec::with_capacity(n_max);
        for n in 0..n_max {
            let c = cos_coeffs.get(n).cloned().unwrap_or_else(|| DMatrix::zeros(dim, dim));
            let s = sin_coeffs.get(n).cloned().unwrap_or_else(|| DMatrix::zeros(dim, dim));
            if c.shape() != (dim, dim) || s.shape() != (dim, dim) {
                return Err(Error::InvalidPotential(format!(
                    "Fourier coefficient {} has the wrong shape",
                    n + 1
                )));
            }
            cos.push(check_symmetric(&c, &format!("cos coefficient {}", n + 1))?);
            sin.push(check_symmetric(&s, &format!("sin coefficient {}", n + 1))?);
        }
        while let (Some(c), Some(s)) = (cos.last(), sin.last()) {
            if c.amax() == 0.0 && s.amax() == 0.0 {
                cos.pop();
                sin.pop();
            } else {
                break;
            }
        }
        Ok(Self { dim, mean, cos_coeffs: cos, sin_coeffs: sin, energy_shift: 0.0 })
    }

    pub fn zero(dim: usize) -> Self {
        Self::constant(DMatrix::zeros(dim, dim)).expect("zero matrix is symmetric")
    }

    pub fn constant(mean: DMatrix<f64>) -> Result<Self> {
        Self::new(mean, Vec::new(), Vec::new())
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::constant(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values)))
            .expect("diagonal matrix is symmetric")
    }

    pub fn with_energy_shift(mut self, shift: f64) -> Self {
        self.energy_shift = shift;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    pub fn cos_coeffs(&self) -> &[DMatrix<f64>] {
        &self.cos_coeffs
    }

    pub fn sin_coeffs(&self) -> &[DMatrix<f64>] {
        &self.sin_coeffs
    }

    pub fn energy_shift(&self) -> f64 {
        self.energy_shift
    }

    /// Highest harmonic with a nonzero coefficient.
    pub fn max_harmonic(&self) -> usize {
        self.cos_coeffs.len()
    }

    /// (Cₙ, Sₙ) for n ≥ 1; zero beyond the stored harmonics.
    pub fn fourier(&self, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        assert!(n >= 1, "harmonic index starts at 1");
        match (self.cos_coeffs.get(n - 1), self.sin_coeffs.get(n - 1)) {
            (Some(c), Some(s)) => (c.clone(), s.clone()),
            _ => (DMatrix::zeros(self.dim, self.dim), DMatrix::zeros(self.dim, self.dim)),
        }
    }

    /// V̂⁽ⁿ⁾ = ∫V(t) e^{2πint} dt = Cₙ + iSₙ.
    pub fn complex_coeff(&self, n: usize) -> DMatrix<Complex64> {
        let (c, s) = self.fourier(n);
        DMatrix::from_fn(self.dim, self.dim, |i, j| Complex64::new(c[(i, j)], s[(i, j)]))
    }

    pub fn is_zero(&self) -> bool {
        self.mean.amax() == 0.0 && self.cos_coeffs.is_empty()
    }

    pub fn evaluate(&self, t: f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        self.evaluate_into(t, out.as_mut_slice());
        out
    }

    /// Column-major V(t) written into `out` (length N²).
    pub(crate) fn evaluate_into(&self, t: f64, out: &mut [f64]) {
        let t = t.rem_euclid(1.0);
        out.copy_from_slice(self.mean.as_slice());
        for (k, (c, s)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let arg = 2.0 * PI * (k + 1) as f64 * t;
            let (sn, cs) = arg.sin_cos();
            for ((o, a), b) in out.iter_mut().zip(c.as_slice()).zip(s.as_slice()) {
                *o += 2.0 * (a * cs + b * sn);
            }
        }
    }

    pub fn derivative(&self, t: f64) -> DMatrix<f64> {
        let t = t.rem_euclid(1.0);
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (k, (c, s)) in self.cos_coeffs.iter().zip(&self.sin_coeffs).enumerate() {
            let w = 2.0 * PI * (k + 1) as f64;
            let (sn, cs) = (w * t).sin_cos();
            out += (s * cs - c * sn) * (2.0 * w);
        }
        out
    }

    /// ‖V‖² = ∫₀¹ Tr V² dt by Parseval.
    pub fn hs_norm_sq(&self) -> f64 {
        let sq = |m: &DMatrix<f64>| m.iter().map(|x| x * x).sum::<f64>();
        sq(&self.mean)
            + 2.0
                * self
                    .cos_coeffs
                    .iter()
                    .zip(&self.sin_coeffs)
                    .map(|(c, s)| sq(c) + sq(s))
                    .sum::<f64>()
    }

    pub fn hs_norm(&self) -> f64 {
        self.hs_norm_sq().sqrt()
    }

    /// Upper bound for sup_t ‖V(t)‖ (Frobenius norms of the coefficients).
    pub fn sup_bound(&self) -> f64 {
        self.mean.norm()
            + 2.0
                * self
                    .cos_coeffs
                    .iter()
                    .zip(&self.sin_coeffs)
                    .map(|(c, s)| c.norm() + s.norm())
                    .sum::<f64>()
    }

    pub fn trace_mean(&self) -> f64 {
        self.mean.trace()
    }

    /// Bₙ = Tr((V⁰)ⁿ) / n!.
    pub fn b_n(&self, n: u32) -> f64 {
        let mut power = DMatrix::identity(self.dim, self.dim);
        let mut fact = 1.0;
        for k in 1..=n {
            power = &power * &self.mean;
            fact *= k as f64;
        }
        power.trace() / fact
    }

    /// Eigenvalues of V⁰ in ascending order.
    pub fn mean_eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(sorted_eigen(&self.mean)?.0)
    }

    pub fn mean_is_diagonal(&self) -> bool {
        let n = self.dim;
        (0..n).all(|i| (0..n).all(|j| i == j || self.mean[(i, j)] == 0.0))
    }

    /// Uᵀ(V − λ₀⁺)U where U diagonalizes V⁰ with ascending eigenvalues.
    pub fn normalize(&self, lambda0_plus: f64) -> Result<Self> {
        let (_, u) = sorted_eigen(&self.mean)?;
        let conj = |m: &DMatrix<f64>| {
            let r = u.transpose() * m * &u;
            (&r + r.transpose()) * 0.5
        };
        let mut mean = conj(&self.mean);
        for i in 0..self.dim {
            for j in 0..self.dim {
                if i != j {
                    mean[(i, j)] = 0.0;
                }
            }
            mean[(i, i)] -= lambda0_plus;
        }
        Ok(Self {
            dim: self.dim,
            mean,
            cos_coeffs: self.cos_coeffs.iter().map(conj).collect(),
            sin_coeffs: self.sin_coeffs.iter().map(conj).collect(),
            energy_shift: self.energy_shift + lambda0_plus,
        })
    }

    /// Same potential with every coefficient multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            mean: &self.mean * factor,
            cos_coeffs: self.cos_coeffs.iter().map(|m| m * factor).collect(),
            sin_coeffs: self.sin_coeffs.iter().map(|m| m * factor).collect(),
            energy_shift: self.energy_shift,
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PotentialFile = serde_json::from_str(s)?;
        let dim = file.dim;
        if dim == 0 {
            return Err(Error::InvalidPotential("dimension must be at least 1".into()));
        }
        let mean = rows_to_matrix(&file.mean, dim, "mean")?;
        let collect = |map: &BTreeMap<String, Vec<Vec<f64>>>, name: &str| -> Result<Vec<DMatrix<f64>>> {
            let mut out: Vec<DMatrix<f64>> = Vec::new();
            for (key, rows) in map {
                let n: usize = key.trim().parse().ok().filter(|&n| n >= 1).ok_or_else(|| {
                    Error::InvalidPotential(format!("{name} harmonic key {key:?} is not a positive integer"))
                })?;
                if out.len() < n {
                    out.resize(n, DMatrix::zeros(dim, dim));
                }
                out[n - 1] = rows_to_matrix(rows, dim, &format!("{name} coefficient {n}"))?;
            }
            Ok(out)
        };
        let cos = collect(&file.cos, "cos")?;
        let sin = collect(&file.sin, "sin")?;
        if !file.shift.is_finite() {
            return Err(Error::InvalidPotential("shift must be finite".into()));
        }
        Ok(Self::new(mean, cos, sin)?.with_energy_shift(file.shift))
    }

    pub fn to_json_string(&self) -> String {
        let harmonics = |list: &[DMatrix<f64>]| {
            list.iter()
                .enumerate()
                .filter(|(_, m)| m.amax() != 0.0)
                .map(|(k, m)| ((k + 1).to_string(), matrix_to_rows(m)))
                .collect::<BTreeMap<_, _>>()
        };
        let file = PotentialFile {
            dim: self.dim,
            mean: matrix_to_rows(&self.mean),
            cos: harmonics(&self.cos_coeffs),
            sin: harmonics(&self.sin_coeffs),
            shift: self.energy_shift,
        };
        serde_json::to_string_pretty(&file).expect("potential serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json_string() + "\n")?;
        Ok(())
    }
}

/// Block-diagonal potential diag(p1, p2).
pub fn direct_sum(p1: &PeriodicMatrixPotential, p2: &PeriodicMatrixPotential) -> PeriodicMatrixPotential {
    let (n1, n2) = (p1.dim, p2.dim);
    let block = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
        m.view_mut((0, 0), (n1, n1)).copy_from(a);
        m.view_mut((n1, n1), (n2, n2)).copy_from(b);
        m
    };
    let n_max = p1.max_harmonic().max(p2.max_harmonic());
    let mut cos = Vec::with_capacity(n_max);
    let mut sin = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let (c1, s1) = p1.fourier(n);
        let (c2, s2) = p2.fourier(n);
        cos.push(block(&c1, &c2));
        sin.push(block(&s1, &s2));
    }
    PeriodicMatrixPotential {
        dim: n1 + n2,
        mean: block(&p1.mean, &p2.mean),
        cos_coeffs: cos,
        sin_coeffs: sin,
        energy_shift: 0.0,
    }
}

/// Ascending eigenvalues and matching eigenvectors with a fixed sign convention
/// (largest component of each eigenvector positive).
pub(crate) fn sorted_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::no_convergence("symmetric eigendecomposition"))?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut u = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        let pivot = v.iamax();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        u.set_column(col, &(v * sign));
    }
    Ok((values, u))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupling(a: f64) -> PeriodicMatrixPotential {
        let c1 = DMatrix::from_row_slice(2, 2, &[0.0, a / 2.0, a / 2.0, 0.0]);
        PeriodicMatrixPotential::new(DMatrix::zeros(2, 2), vec![c1], vec![]).unwrap()
    }

    fn trapezoid_norm_sq(p: &PeriodicMatrixPotential, k: usize) -> f64 {
        (0..k)
            .map(|j| {
                let v = p.evaluate(j as f64 / k as f64);
                (&v * &v).trace()
            })
            .sum::<f64>()
            / k as f64
    }

    #[test]
    fn evaluation_examples() {
        assert_eq!(PeriodicMatrixPotential::zero(3).evaluate(0.3).amax(), 0.0);
        let d = PeriodicMatrixPotential::diagonal(&[0.0, 3.0]);
        assert_eq!(d.evaluate(0.7), DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 3.0]));
        let v = coupling(1.0).evaluate(0.0);
        assert!((v - DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).amax() < 1e-15);
    }

    #[test]
    fn norm_examples() {
        assert_eq!(PeriodicMatrixPotential::zero(2).hs_norm_sq(), 0.0);
        assert_eq!(PeriodicMatrixPotential::diagonal(&[0.0, 3.0]).hs_norm_sq(), 9.0);
        let p = coupling(1.0);
        assert!((p.hs_norm_sq() - 1.0).abs() < 1e-15);
        assert!((trapezoid_norm_sq(&p, 4096) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn periodic_in_t() {
        let p = coupling(0.7);
        assert_eq!(p.evaluate(0.25), p.evaluate(1.25));
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0 + 1e-9, 0.0]);
        assert!(PeriodicMatrixPotential::constant(m).is_err());
        let json = r#"{"dim":2,"mean":[[0,0],[0,0]],"cos":{"1":[[0,1],[0.5,0]]}}"#;
        assert!(PeriodicMatrixPotential::from_json_str(json).is_err());
    }

    #[test]
    fn json_round_trip() {
        let p = coupling(0.4).with_energy_shift(0.25);
        let q = PeriodicMatrixPotential::from_json_str(&p.to_json_string()).unwrap();
        assert_eq!(p, q);
        let json = r#"{"dim":1,"mean":[[2.0]],"sin":{"3":[[0.5]]},"shift":0.0}"#;
        let r = PeriodicMatrixPotential::from_json_str(json).unwrap();
        assert_eq!(r.max_harmonic(), 3);
        assert_eq!(r.fourier(3).1[(0, 0)], 0.5);
        assert_eq!(r.fourier(1).1[(0, 0)], 0.0);
    }

    #[test]
    fn normalize_examples() {
        let p = PeriodicMatrixPotential::diagonal(&[3.0, 1.0]).normalize(1.0).unwrap();
        assert_eq!(p.mean(), &DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 2.0]));
        assert_eq!(p.energy_shift(), 1.0);

        let mean = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let c1 = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.1, -0.2]);
        let p = PeriodicMatrixPotential::new(mean, vec![c1], vec![]).unwrap();
        let q = p.normalize(0.0).unwrap();
        assert!((q.mean()[(0, 0)]).abs() < 1e-14);
        assert!((q.mean()[(1, 1)] - 2.0).abs() < 1e-14);
        assert!((q.hs_norm_sq() - p.hs_norm_sq()).abs() < 1e-13);
        let tr = |m: &DMatrix<f64>| m.trace();
        assert!((tr(&q.cos_coeffs()[0]) - tr(&p.cos_coeffs()[0])).abs() < 1e-14);
    }

    #[test]
    fn direct_sum_blocks() {
        let z = direct_sum(&PeriodicMatrixPotential::zero(1), &PeriodicMatrixPotential::zero(1));
        assert_eq!(z, PeriodicMatrixPotential::zero(2));
        let q = PeriodicMatrixPotential::new(
            DMatrix::from_element(1, 1, 0.5),
            vec![DMatrix::from_element(1, 1, 0.2)],
            vec![],
        )
        .unwrap();
        let d = direct_sum(&q, &q);
        let v = d.evaluate(0.3);
        assert_eq!(v[(0, 1)], 0.0);
        assert_eq!(v[(0, 0)], v[(1, 1)]);
        assert!((d.hs_norm_sq() - 2.0 * q.hs_norm_sq()).abs() < 1e-15);
    }

    #[test]
    fn b_n_values() {
        let p = PeriodicMatrixPotential::diagonal(&[1.0, 2.0]);
        assert!((p.b_n(3) - 9.0 / 6.0).abs() < 1e-14);
        assert_eq!(p.b_n(1), 3.0);
        assert_eq!(p.b_n(0), 2.0);
    }
}
