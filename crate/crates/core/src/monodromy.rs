//! Fundamental solutions, monodromy matrices and their characteristic polynomials.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dense::{expm_into, ExpWork, Scalar, Sq};
use crate::error::{Error, Result};
use crate::potential::PeriodicMatrixPotential;
use crate::CMatrix;

const MAX_STEPS: usize = 50_000_000;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Minimum number of integration steps over one period.
    pub steps_per_unit: usize,
    /// Steps added per unit of |z| + ‖V‖.
    pub steps_per_oscillation: f64,
    /// Tolerance used by structural checks and pairing diagnostics.
    pub tol: f64,
    /// Rescale solutions by e^{-|Im z| t} when |Im z| exceeds 700.
    pub overflow_rescale: bool,
    /// Relative distance below which two Lyapunov values count as colliding.
    pub merge_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            steps_per_unit: 64,
            steps_per_oscillation: 12.0,
            tol: 1e-8,
            overflow_rescale: true,
            merge_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    /// A configuration with `factor` times the default step density.
    pub fn refined(factor: f64) -> Self {
        let d = Self::default();
        Self {
            steps_per_unit: (d.steps_per_unit as f64 * factor).ceil() as usize,
            steps_per_oscillation: d.steps_per_oscillation * factor,
            ..d
        }
    }

    pub fn step_count(&self, z_abs: f64, v_norm: f64) -> usize {
        let osc = (self.steps_per_oscillation * (z_abs + v_norm)).ceil();
        if !osc.is_finite() || osc > MAX_STEPS as f64 {
            return usize::MAX;
        }
        self.steps_per_unit.max(osc as usize).max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.steps_per_oscillation >= 0.0
            && self.steps_per_oscillation.is_finite()
            && self.tol > 0.0
            && self.merge_tol > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("solver tolerances must be positive".into()))
        }
    }
}

/// ϑ, φ and their derivatives at t = 1 together with the assembled monodromy matrix.
///
/// When overflow rescaling was active every stored matrix equals the true one
/// multiplied by e^{-log_scale}.
#[derive(Clone, Debug)]
pub struct MonodromySample {
    pub z: Complex64,
    pub theta: CMatrix,
    pub theta_prime: CMatrix,
    pub phi: CMatrix,
    pub phi_prime: CMatrix,
    pub m: CMatrix,
    pub log_scale: f64,
}

impl MonodromySample {
    fn from_blocks(
        z: Complex64,
        theta: CMatrix,
        theta_prime: CMatrix,
        phi: CMatrix,
        phi_prime: CMatrix,
        log_scale: f64,
    ) -> Self {
        let m = assemble(&theta, &phi, &theta_prime, &phi_prime, Complex64::new(1.0, 0.0));
        Self { z, theta, theta_prime, phi, phi_prime, m, log_scale }
    }

    /// Builds the sample from the monodromy of the system balanced by diag(I, sI).
    fn from_balanced(z: Complex64, y: CMatrix, s: f64, log_scale: f64) -> Self {
        let n = y.nrows() / 2;
        let theta = y.view((0, 0), (n, n)).into_owned();
        let phi = y.view((0, n), (n, n)).into_owned() / re(s);
        let theta_prime = y.view((n, 0), (n, n)).into_owned() * re(s);
        let phi_prime = y.view((n, n), (n, n)).into_owned();
        Self::from_blocks(z, theta, theta_prime, phi, phi_prime, log_scale)
    }

    pub fn dim(&self) -> usize {
        self.theta.nrows()
    }

    /// Balancing factor max(1, |z|).
    pub fn balance(&self) -> f64 {
        self.z.norm().max(1.0)
    }

    /// True when z² is real, so that M is real.
    pub fn on_real_axes(&self) -> bool {
        (self.z * self.z).im == 0.0
    }

    /// diag(I, sI)⁻¹ M diag(I, sI) with s = max(1, |z|); similar to M and symplectic.
    pub fn balanced_m(&self) -> CMatrix {
        let s = Complex64::new(self.balance(), 0.0);
        assemble(&self.theta, &self.phi, &self.theta_prime, &self.phi_prime, s)
    }

    /// ½(M + M⁻¹) in the balanced frame, via M⁻¹ = −J Mᵀ J.
    pub fn balanced_l(&self) -> CMatrix {
        l_from_blocks(self, Complex64::new(self.balance(), 0.0))
    }
}

fn assemble(theta: &CMatrix, phi: &CMatrix, theta_p: &CMatrix, phi_p: &CMatrix, s: Complex64) -> CMatrix {
    let n = theta.nrows();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(theta);
    m.view_mut((0, n), (n, n)).copy_from(&(phi * s));
    m.view_mut((n, 0), (n, n)).copy_from(&(theta_p / s));
    m.view_mut((n, n), (n, n)).copy_from(phi_p);
    m
}

fn l_from_blocks(ms: &MonodromySample, s: Complex64) -> CMatrix {
    let n = ms.dim();
    let half = Complex64::new(0.5, 0.0);
    let mut l = DMatrix::zeros(2 * n, 2 * n);
    l.view_mut((0, 0), (n, n))
        .copy_from(&((&ms.theta + ms.phi_prime.transpose()) * half));
    l.view_mut((0, n), (n, n))
        .copy_from(&((&ms.phi - ms.phi.transpose()) * (s * half)));
    l.view_mut((n, 0), (n, n))
        .copy_from(&((&ms.theta_prime - ms.theta_prime.transpose()) * (half / s)));
    l.view_mut((n, n), (n, n))
        .copy_from(&((ms.theta.transpose() + &ms.phi_prime) * half));
    l
}

/// J = [[0, I], [−I, 0]].
pub fn symplectic_j(n: usize) -> CMatrix {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = Complex64::new(1.0, 0.0);
        j[(n + i, i)] = Complex64::new(-1.0, 0.0);
    }
    j
}

/// −J Mᵀ J, which equals M⁻¹ for symplectic M.
pub fn symplectic_inverse(m: &CMatrix) -> CMatrix {
    let j = symplectic_j(m.nrows() / 2);
    -(&j * m.transpose() * &j)
}

fn propagate<T: Scalar>(
    p: &PeriodicMatrixPotential,
    w: T,
    s: f64,
    steps: usize,
    decay: f64,
) -> (Sq<T>, f64) {
    let n = p.dim();
    let nn = 2 * n;
    let h = 1.0 / steps as f64;
    let r15 = 15f64.sqrt();
    let nodes = [0.5 - r15 / 10.0, 0.5, 0.5 + r15 / 10.0];
    let mut vbuf = vec![0.0; n * n];
    let mut a: Vec<Sq<T>> = (0..3).map(|_| Sq::zeros(nn)).collect();
    for ai in a.iter_mut() {
        for r in 0..n {
            ai.set(r, n + r, T::from_f64(s));
        }
    }
    let (mut a1, mut a2, mut a3) = (Sq::zeros(nn), Sq::zeros(nn), Sq::zeros(nn));
    let (mut c1, mut c2, mut x, mut yv) = (Sq::zeros(nn), Sq::zeros(nn), Sq::zeros(nn), Sq::zeros(nn));
    let (mut comm, mut tmp, mut omega, mut e) = (Sq::zeros(nn), Sq::zeros(nn), Sq::zeros(nn), Sq::zeros(nn));
    let mut y = Sq::<T>::identity(nn);
    let mut ynew = Sq::<T>::zeros(nn);
    let mut work = ExpWork::new(nn);
    let inv_s = 1.0 / s;
    let shrink = (-decay * h).exp();
    let mut log_scale = 0.0;
    for k in 0..steps {
        let t0 = k as f64 * h;
        for (ai, c) in a.iter_mut().zip(nodes) {
            p.evaluate_into(t0 + c * h, &mut vbuf);
            for r in 0..n {
                for col in 0..n {
                    let mut v = T::from_f64(vbuf[col * n + r]);
                    if r == col {
                        v = v - w;
                    }
                    ai.set(n + r, col, v * inv_s);
                }
            }
        }
        a1.combine(&[(h, &a[1])]);
        a2.combine(&[(r15 * h / 3.0, &a[2]), (-r15 * h / 3.0, &a[0])]);
        a3.combine(&[(10.0 * h / 3.0, &a[2]), (-20.0 * h / 3.0, &a[1]), (10.0 * h / 3.0, &a[0])]);
        Sq::commutator_into(&a1, &a2, &mut c1, &mut tmp);
        x.combine(&[(2.0, &a3), (1.0, &c1)]);
        Sq::commutator_into(&a1, &x, &mut c2, &mut tmp);
        c2.scale(-1.0 / 60.0);
        x.combine(&[(-20.0, &a1), (-1.0, &a3), (1.0, &c1)]);
        yv.combine(&[(1.0, &a2), (1.0, &c2)]);
        Sq::commutator_into(&x, &yv, &mut comm, &mut tmp);
        omega.combine(&[(1.0, &a1), (1.0 / 12.0, &a3), (1.0 / 240.0, &comm)]);
        expm_into(&omega, &mut e, &mut work);
        e.mul_into(&y, &mut ynew);
        std::mem::swap(&mut y, &mut ynew);
        if decay > 0.0 {
            y.scale(shrink);
            log_scale += decay * h;
        }
    }
    (y, log_scale)
}

/// Propagates Y′ = A(t)Y, A = [[0, I], [V(t) − z², 0]], over one period with a
/// sixth-order Magnus scheme.
pub fn integrate_monodromy(
    p: &PeriodicMatrixPotential,
    z: Complex64,
    cfg: &SolverConfig,
) -> Result<MonodromySample> {
    if !z.is_finite() {
        return Err(Error::InvalidArgument(format!("spectral parameter {z} is not finite")));
    }
    let steps = cfg.step_count(z.norm(), p.hs_norm());
    if steps > MAX_STEPS {
        return Err(Error::StepUnderflow { z });
    }
    let w = z * z;
    let s = z.norm().max(1.0);
    let decay = if cfg.overflow_rescale && z.im.abs() > 700.0 { z.im.abs() } else { 0.0 };
    let (y, log_scale) = if w.im == 0.0 {
        let (y, ls) = propagate(p, w.re, s, steps, decay);
        if !y.all_finite() {
            return Err(Error::Overflow { z });
        }
        (y.to_complex(), ls)
    } else {
        let (y, ls) = propagate(p, w, s, steps, decay);
        if !y.all_finite() {
            return Err(Error::Overflow { z });
        }
        (y.to_complex(), ls)
    };
    Ok(MonodromySample::from_balanced(z, y, s, log_scale))
}

/// Partial sums of the Picard series together with the certified remainder bound
/// (κ^{n₀+1}/(n₀+1)!) e^{|Im z| + κ}, κ = ‖V‖ / max(1, |z|).
///
/// The bound applies to ϑ and φ′ directly, to φ after multiplication by
/// max(1, |z|) and to ϑ′ after division by it.
#[derive(Clone, Debug)]
pub struct SeriesMonodromy {
    pub sample: MonodromySample,
    pub bound: f64,
    pub n0: usize,
}

pub fn series_monodromy(p: &PeriodicMatrixPotential, z: Complex64, n0: usize) -> SeriesMonodromy {
    let n = p.dim();
    let zabs = z.norm();
    let k = (2 * (512.0f64.max(96.0 * (zabs + 1.0)) as usize / 2)).max(4);
    let h = 1.0 / k as f64;
    let cfun = |t: f64| (z * t).cos();
    let sfun = |t: f64| if zabs == 0.0 { Complex64::new(t, 0.0) } else { (z * t).sin() / z };
    let ts: Vec<f64> = (0..=k).map(|j| j as f64 * h).collect();
    let cs: Vec<Complex64> = ts.iter().map(|&t| cfun(t)).collect();
    let ss: Vec<Complex64> = ts.iter().map(|&t| sfun(t)).collect();
    let vs: Vec<CMatrix> = ts.iter().map(|&t| p.evaluate(t).map(|x| Complex64::new(x, 0.0))).collect();
    let eye = CMatrix::identity(n, n);

    // Current iterate on the grid as [ϑₙ | φₙ] (N × 2N) and derivatives.
    let mut y: Vec<CMatrix> = (0..=k)
        .map(|j| {
            let mut m = DMatrix::zeros(n, 2 * n);
            m.view_mut((0, 0), (n, n)).copy_from(&(&eye * cs[j]));
            m.view_mut((0, n), (n, n)).copy_from(&(&eye * ss[j]));
            m
        })
        .collect();
    let dy0 = {
        let mut m = DMatrix::zeros(n, 2 * n);
        m.view_mut((0, 0), (n, n)).copy_from(&(&eye * (-z * z * ss[k])));
        m.view_mut((0, n), (n, n)).copy_from(&(&eye * cs[k]));
        m
    };
    let mut sum = y[k].clone();
    let mut dsum = dy0;

    let cumulative = |g: &[CMatrix]| -> Vec<CMatrix> {
        let mut out = Vec::with_capacity(k + 1);
        let mut acc = DMatrix::zeros(n, 2 * n);
        out.push(acc.clone());
        let c = h / 24.0;
        for j in 0..k {
            let inc = if j == 0 {
                (&g[0] * re(9.0) + &g[1] * re(19.0) - &g[2] * re(5.0) + &g[3]) * re(c)
            } else if j == k - 1 {
                (&g[k - 3] - &g[k - 2] * re(5.0) + &g[k - 1] * re(19.0) + &g[k] * re(9.0)) * re(c)
            } else {
                ((&g[j] + &g[j + 1]) * re(13.0) - &g[j - 1] - &g[j + 2]) * re(c)
            };
            acc += inc;
            out.push(acc.clone());
        }
        out
    };

    for _ in 0..n0 {
        let gc: Vec<CMatrix> = (0..=k).map(|j| &vs[j] * &y[j] * cs[j]).collect();
        let gs: Vec<CMatrix> = (0..=k).map(|j| &vs[j] * &y[j] * ss[j]).collect();
        let ic = cumulative(&gc);
        let is = cumulative(&gs);
        y = (0..=k).map(|j| &ic[j] * ss[j] - &is[j] * cs[j]).collect();
        sum += &y[k];
        dsum += &ic[k] * cs[k] + &is[k] * (z * z * ss[k]);
    }

    let theta = sum.view((0, 0), (n, n)).into_owned();
    let phi = sum.view((0, n), (n, n)).into_owned();
    let theta_p = dsum.view((0, 0), (n, n)).into_owned();
    let phi_p = dsum.view((0, n), (n, n)).into_owned();
    let kappa = p.hs_norm() / zabs.max(1.0);
    let mut fact = 1.0;
    for j in 1..=(n0 + 1) {
        fact *= j as f64;
    }
    let bound = kappa.powi(n0 as i32 + 1) / fact * (z.im.abs() + kappa).exp();
    SeriesMonodromy {
        sample: MonodromySample::from_blocks(z, theta, theta_p, phi, phi_p, 0.0),
        bound,
        n0,
    }
}

/// T_m = Tr Mᵐ / 2N for m = 1..=m_max.
pub fn traces(ms: &MonodromySample, m_max: usize) -> Vec<Complex64> {
    let m = ms.balanced_m();
    let two_n = m.nrows() as f64;
    let mut out = Vec::with_capacity(m_max);
    let mut power = m.clone();
    for k in 1..=m_max {
        let scale = (k as f64 * ms.log_scale).exp();
        out.push(power.trace() * scale / two_n);
        if k < m_max {
            power = &power * &m;
        }
    }
    out
}

/// Complex sum with Neumaier compensation.
#[derive(Default)]
struct CompensatedSum {
    sum: Complex64,
    comp: Complex64,
}

impl CompensatedSum {
    fn add(&mut self, x: Complex64) {
        let two_sum = |a: f64, b: f64| {
            let s = a + b;
            let c = if a.abs() >= b.abs() { (a - s) + b } else { (b - s) + a };
            (s, c)
        };
        let (sr, cr) = two_sum(self.sum.re, x.re);
        let (si, ci) = two_sum(self.sum.im, x.im);
        self.sum = Complex64::new(sr, si);
        self.comp += Complex64::new(cr, ci);
    }

    fn value(&self) -> Complex64 {
        self.sum + self.comp
    }
}

/// Coefficients of D(τ) = det(M − τI) = Σ ξ_m τ^{2N−m} and of the reduced
/// polynomial Φ(ν) = D(τ)/(2τ)^N = Σ φ_j ν^{N−j}, ν = (τ + τ⁻¹)/2.
#[derive(Clone, Debug)]
pub struct CharPolyCoeffs {
    pub z: Complex64,
    pub xi: Vec<Complex64>,
    pub phi_coeffs: Vec<Complex64>,
}

/// c_{n,m} in (τⁿ + τ⁻ⁿ)/2^N = Σ_m c_{n,m} ν^{n−2m}.
pub fn chebyshev_coeff(n: usize, m: usize, big_n: usize) -> f64 {
    assert!(n >= 1 && 2 * m <= n);
    let fact = |k: usize| (1..=k).fold(1.0f64, |a, b| a * b as f64);
    let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
    sign * n as f64 * fact(n - m - 1) / (fact(n - 2 * m) * fact(m))
        * 2f64.powi(n as i32 - 2 * m as i32 - big_n as i32)
}

impl CharPolyCoeffs {
    pub fn from_traces(z: Complex64, traces: &[Complex64], big_n: usize) -> Self {
        let two_n = 2 * big_n;
        assert!(traces.len() >= two_n, "need traces up to order 2N");
        let mut xi = vec![Complex64::new(1.0, 0.0)];
        for m in 1..=two_n {
            let mut acc = CompensatedSum::default();
            for (j, &x) in xi.iter().enumerate() {
                acc.add(traces[m - j - 1] * x);
            }
            xi.push(-acc.value() * (two_n as f64 / m as f64));
        }
        let mut phi = vec![Complex64::new(0.0, 0.0); big_n + 1];
        for (k, &x) in xi.iter().enumerate().take(big_n) {
            let deg = big_n - k;
            for m in 0..=deg / 2 {
                phi[k + 2 * m] += x * chebyshev_coeff(deg, m, big_n);
            }
        }
        phi[big_n] += xi[big_n] * 2f64.powi(-(big_n as i32));
        Self { z, xi, phi_coeffs: phi }
    }

    pub fn dim(&self) -> usize {
        self.phi_coeffs.len() - 1
    }

    /// D(τ) from the ξ coefficients.
    pub fn d(&self, tau: Complex64) -> Complex64 {
        self.xi.iter().fold(Complex64::new(0.0, 0.0), |acc, &x| acc * tau + x)
    }

    /// Φ(ν) from the φ coefficients.
    pub fn phi(&self, nu: Complex64) -> Complex64 {
        self.phi_coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &x| acc * nu + x)
    }

    /// Σ |φ_j| |ν|^{N−j}, the natural scale for residuals of Φ(ν).
    pub fn phi_scale(&self, nu: Complex64) -> f64 {
        self.phi_coeffs.iter().fold(0.0, |acc, x| acc * nu.norm() + x.norm())
    }
}

pub fn char_poly(ms: &MonodromySample) -> CharPolyCoeffs {
    let n = ms.dim();
    CharPolyCoeffs::from_traces(ms.z, &traces(ms, 2 * n), n)
}

/// D(τ, z) = det(M(z) − τI) evaluated directly.
pub fn characteristic_det(ms: &MonodromySample, tau: Complex64) -> Complex64 {
    let mut m = ms.balanced_m() * re(ms.log_scale.exp());
    for i in 0..m.nrows() {
        m[(i, i)] -= tau;
    }
    m.determinant()
}

/// M̃ = [[ϑ, zφ], [ϑ′/z, φ′]].
pub fn modified_monodromy(ms: &MonodromySample) -> Result<CMatrix> {
    if ms.z == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidArgument("the modified monodromy needs z ≠ 0".into()));
    }
    Ok(assemble(&ms.theta, &ms.phi, &ms.theta_prime, &ms.phi_prime, ms.z))
}

/// L = (M̃ + M̃⁻¹)/2 from the block-transpose formula. At z = 0 the unscaled
/// (similar) matrix ½(M + M⁻¹) is returned instead.
pub fn l_matrix(ms: &MonodromySample) -> CMatrix {
    let s = if ms.z == Complex64::new(0.0, 0.0) { Complex64::new(1.0, 0.0) } else { ms.z };
    l_from_blocks(ms, s)
}

/// max |M (−J Mᵀ J) − I| in the balanced frame.
pub fn symplectic_residual(ms: &MonodromySample) -> f64 {
    let m = ms.balanced_m();
    let prod = &m * symplectic_inverse(&m);
    (prod - CMatrix::identity(m.nrows(), m.nrows())).camax()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ops::AddAssign;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coupling() -> PeriodicMatrixPotential {
        let c1 = DMatrix::from_row_slice(2, 2, &[0.2, 0.5, 0.5, -0.1]);
        let s2 = DMatrix::from_row_slice(2, 2, &[0.0, 0.15, 0.15, 0.3]);
        PeriodicMatrixPotential::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            vec![c1],
            vec![DMatrix::zeros(2, 2), s2],
        )
        .unwrap()
    }

    #[test]
    fn free_monodromy_is_exact() {
        let cfg = SolverConfig::default();
        for &z in &[c(0.0, 0.0), c(3.7, 0.0), c(0.0, 2.5), c(4.1, -1.3), c(15.0, 0.2)] {
            let ms = integrate_monodromy(&PeriodicMatrixPotential::zero(2), z, &cfg).unwrap();
            let sinc = if z.norm() == 0.0 { c(1.0, 0.0) } else { z.sin() / z };
            let scale = 1.0 + z.norm() * z.im.abs().exp();
            for i in 0..2 {
                assert!((ms.theta[(i, i)] - z.cos()).norm() < 1e-12 * scale);
                assert!((ms.phi[(i, i)] - sinc).norm() < 1e-12 * scale);
                assert!((ms.theta_prime[(i, i)] + z * z.sin()).norm() < 1e-12 * scale);
                assert!((ms.phi_prime[(i, i)] - z.cos()).norm() < 1e-12 * scale);
            }
            assert!(ms.theta[(0, 1)].norm() < 1e-14);
        }
    }

    #[test]
    fn constant_potential_closed_form() {
        let cvals = [0.0, 2.0, -1.5];
        let p = PeriodicMatrixPotential::diagonal(&cvals);
        let z = c(5.3, 0.4);
        let ms = integrate_monodromy(&p, z, &SolverConfig::default()).unwrap();
        for (i, &cv) in cvals.iter().enumerate() {
            let k = (z * z - cv).sqrt();
            assert!((ms.theta[(i, i)] - k.cos()).norm() < 1e-10);
            assert!((ms.phi[(i, i)] - k.sin() / k).norm() < 1e-10);
            assert!((ms.theta_prime[(i, i)] + k * k.sin()).norm() < 1e-9);
        }
    }

    #[test]
    fn sixth_order_convergence() {
        let p = coupling();
        let z = c(6.0, 0.5);
        let run = |steps: usize| {
            let cfg = SolverConfig { steps_per_unit: steps, steps_per_oscillation: 0.0, ..Default::default() };
            integrate_monodromy(&p, z, &cfg).unwrap().balanced_m()
        };
        let reference = run(4096);
        let e1 = (run(32) - &reference).camax();
        let e2 = (run(64) - &reference).camax();
        let order = (e1 / e2).log2();
        assert!(order > 5.5, "observed order {order}");
    }

    #[test]
    fn structural_identities() {
        let p = coupling();
        let cfg = SolverConfig::default();
        for &z in &[c(2.3, 0.7), c(9.1, -0.2), c(0.4, 3.0), c(12.0, 0.0)] {
            let ms = integrate_monodromy(&p, z, &cfg).unwrap();
            assert!((ms.balanced_m().determinant() - 1.0).norm() < 1e-9);
            assert!(symplectic_residual(&ms) < 1e-9);
            let neg = integrate_monodromy(&p, -z, &cfg).unwrap();
            assert!((neg.balanced_m() - ms.balanced_m()).camax() < 1e-9 * (1.0 + ms.balanced_m().camax()));
        }
        let ms = integrate_monodromy(&p, c(7.5, 0.0), &cfg).unwrap();
        assert!(ms.m.iter().all(|x| x.im == 0.0));
    }

    #[test]
    fn free_traces_and_char_poly() {
        let z = c(2.2, 0.3);
        for n in 1..=3 {
            let ms = integrate_monodromy(&PeriodicMatrixPotential::zero(n), z, &SolverConfig::default()).unwrap();
            let t = traces(&ms, 4);
            for (m, tm) in t.iter().enumerate() {
                assert!((tm - (z * (m + 1) as f64).cos()).norm() < 1e-11);
            }
            let cp = char_poly(&ms);
            for (m, phi) in cp.phi_coeffs.iter().enumerate() {
                let binom = (0..m).fold(1.0, |acc, k| acc * (n - k) as f64 / (k + 1) as f64);
                let expected = z.cos().powi(m as i32) * binom * if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!((phi - expected).norm() < 1e-10, "N={n} m={m}");
            }
        }
        let ms = integrate_monodromy(&PeriodicMatrixPotential::zero(1), z, &SolverConfig::default()).unwrap();
        let cp = char_poly(&ms);
        assert!((cp.xi[1] + z.cos() * 2.0).norm() < 1e-12);
        assert!((cp.xi[2] - 1.0).norm() < 1e-12);
    }

    #[test]
    fn char_poly_matches_determinant() {
        let p = coupling();
        let ms = integrate_monodromy(&p, c(4.4, 0.6), &SolverConfig::default()).unwrap();
        let cp = char_poly(&ms);
        for &tau in &[c(0.3, 0.8), c(-1.7, 0.2), c(2.5, -1.1)] {
            let d = characteristic_det(&ms, tau);
            assert!((cp.d(tau) - d).norm() < 1e-9 * (1.0 + d.norm()));
            let nu = (tau + 1.0 / tau) * 0.5;
            let via_phi = cp.phi(nu) * (tau * 2.0).powi(2);
            assert!((via_phi - d).norm() < 1e-9 * (1.0 + d.norm()));
            let mirrored = characteristic_det(&ms, 1.0 / tau) * tau.powi(4);
            assert!((mirrored - d).norm() < 1e-9 * (1.0 + d.norm()));
        }
        for m in 0..=4 {
            assert!((cp.xi[m] - cp.xi[4 - m]).norm() < 1e-9 * (1.0 + cp.xi[m].norm()));
        }
        assert!((cp.phi_coeffs[1] - cp.xi[1] * 0.5).norm() < 1e-12);
    }

    #[test]
    fn free_modified_monodromy_is_rotation() {
        let z = c(1.9, -0.4);
        let ms = integrate_monodromy(&PeriodicMatrixPotential::zero(2), z, &SolverConfig::default()).unwrap();
        let mt = modified_monodromy(&ms).unwrap();
        let j = symplectic_j(2);
        let expected = CMatrix::identity(4, 4) * z.cos() + j * z.sin();
        assert!((mt - expected).camax() < 1e-12);
        let l = l_matrix(&ms);
        assert!((l - CMatrix::identity(4, 4) * z.cos()).camax() < 1e-12);
        let ms0 = integrate_monodromy(&PeriodicMatrixPotential::zero(1), c(0.0, 0.0), &SolverConfig::default()).unwrap();
        assert!(modified_monodromy(&ms0).is_err());
    }

    #[test]
    fn series_free_terms_and_constant_first_iterate() {
        let z = c(3.0, 0.2);
        let free = series_monodromy(&PeriodicMatrixPotential::diagonal(&[0.7]), z, 0);
        assert!((free.sample.theta[(0, 0)] - z.cos()).norm() < 1e-14);
        assert!((free.sample.phi[(0, 0)] - z.sin() / z).norm() < 1e-14);

        // φ₁(1) = c (sin z − z cos z) / (2z³) for constant c.
        let cv = 0.7;
        let one = series_monodromy(&PeriodicMatrixPotential::diagonal(&[cv]), z, 1);
        let phi1 = one.sample.phi[(0, 0)] - z.sin() / z;
        let expected = (z.sin() - z * z.cos()) * cv / (z * z * z * 2.0);
        assert!((phi1 - expected).norm() < 1e-10, "{phi1} vs {expected}");
    }

    #[test]
    fn series_agrees_within_certified_bound() {
        let p = coupling();
        let scale = 1.0 / p.hs_norm();
        let p = p.scaled(scale);
        let z = c(10.0 * (0.6f64).cos(), 10.0 * (0.6f64).sin() * 0.05);
        let ms = integrate_monodromy(&p, z, &SolverConfig::refined(2.0)).unwrap();
        for n0 in [1, 2, 4] {
            let s = series_monodromy(&p, z, n0);
            let zs = z.norm().max(1.0);
            let op = |m: CMatrix| m.svd(false, false).singular_values[0];
            let errs = [
                op(&ms.theta - &s.sample.theta),
                op(&ms.phi - &s.sample.phi) * zs,
                op(&ms.theta_prime - &s.sample.theta_prime) / zs,
                op(&ms.phi_prime - &s.sample.phi_prime),
            ];
            for e in errs {
                assert!(e <= s.bound + 1e-9, "n0={n0}: {e} > {}", s.bound);
            }
        }
    }

    #[test]
    fn large_imaginary_z_is_rescaled() {
        let cfg = SolverConfig::default();
        let z = c(0.5, 800.0);
        let ms = integrate_monodromy(&PeriodicMatrixPotential::zero(1), z, &cfg).unwrap();
        assert!((ms.log_scale - 800.0).abs() < 1e-9);
        // cos z ≈ e^{800}/2 · e^{-0.5 i}
        let expected = c(0.0, -0.5).exp() * 0.5;
        assert!((ms.theta[(0, 0)] - expected).norm() < 1e-9);
        let no = SolverConfig { overflow_rescale: false, ..cfg };
        assert!(matches!(integrate_monodromy(&PeriodicMatrixPotential::zero(1), z, &no), Err(Error::Overflow { .. })));
    }

    #[test]
    fn free_periodic_determinants() {
        let z = c(2.7, 0.35);
        let ms = integrate_monodromy(&PeriodicMatrixPotential::zero(2), z, &SolverConfig::default()).unwrap();
        for sign in [1.0, -1.0] {
            let d = characteristic_det(&ms, c(sign, 0.0));
            let expected = (c(1.0, 0.0) - z.cos() * sign).powi(2) * 4.0;
            assert!((d - expected).norm() < 1e-11);
        }
    }

    #[test]
    fn first_trace_asymptotics() {
        let p = coupling();
        let b1 = p.b_n(1);
        for &x in &[40.3, 71.9] {
            let z = c(x, 0.0);
            let ms = integrate_monodromy(&p, z, &SolverConfig::default()).unwrap();
            let t1 = traces(&ms, 1)[0];
            let predicted = z.cos() + z.sin() / z * (b1 / 4.0);
            assert!((t1 - predicted).norm() < 3.0 / (x * x), "x={x}");
        }
    }

    #[test]
    fn direct_sum_traces_average() {
        let a = coupling();
        let b = PeriodicMatrixPotential::diagonal(&[0.4]);
        let sum = crate::potential::direct_sum(&a, &b);
        let z = c(3.3, 0.1);
        let cfg = SolverConfig::default();
        let ta = traces(&integrate_monodromy(&a, z, &cfg).unwrap(), 3);
        let tb = traces(&integrate_monodromy(&b, z, &cfg).unwrap(), 3);
        let ts = traces(&integrate_monodromy(&sum, z, &cfg).unwrap(), 3);
        for m in 0..3 {
            assert!((ts[m] - (ta[m] * 2.0 + tb[m]) / 3.0).norm() < 1e-10);
        }
    }

    #[test]
    fn l_matrix_asymptotics_on_imaginary_axis() {
        let p = coupling();
        let z = c(0.0, 30.0);
        let ms = integrate_monodromy(&p, z, &SolverConfig::default()).unwrap();
        let l = l_matrix(&ms);
        let v0 = p.mean().map(|x| c(x, 0.0));
        let mut predicted = CMatrix::identity(4, 4) * z.cos();
        let corr = &v0 * (z.sin() / (z * 2.0));
        predicted.view_mut((0, 0), (2, 2)).add_assign(&corr);
        predicted.view_mut((2, 2), (2, 2)).add_assign(&corr);
        let err = (l - predicted).camax();
        assert!(err < 2.0 * z.im.exp() / (z.norm() * z.norm()), "err {err}");
    }

    #[test]
    fn chebyshev_coefficients() {
        // (τ² + τ⁻²)/2^N = 2^{2−N}ν² − 2^{1−N}
        assert_eq!(chebyshev_coeff(2, 0, 2), 1.0);
        assert_eq!(chebyshev_coeff(2, 1, 2), -0.5);
        assert_eq!(chebyshev_coeff(1, 0, 1), 1.0);
    }
}
