//! Allocation-light square matrices for the inner integration loop.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

pub(crate) trait Scalar:
    Copy
    + Default
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + Mul<f64, Output = Self>
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn abs1(self) -> f64;
    fn to_c64(self) -> Complex64;
    fn is_finite(self) -> bool;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn abs1(self) -> f64 {
        self.abs()
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Scalar for Complex64 {
    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn abs1(self) -> f64 {
        self.re.abs() + self.im.abs()
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn is_finite(self) -> bool {
        Complex64::is_finite(self)
    }
}

/// Row-major n×n matrix.
#[derive(Clone, Debug)]
pub(crate) struct Sq<T> {
    pub n: usize,
    pub a: Vec<T>,
}

impl<T: Scalar> Sq<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, a: vec![T::default(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        m.set_identity();
        m
    }

    pub fn set_identity(&mut self) {
        self.a.iter_mut().for_each(|x| *x = T::default());
        for i in 0..self.n {
            self.a[i * self.n + i] = T::from_f64(1.0);
        }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> T {
        self.a[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.a[i * self.n + j] = v;
    }

    /// out = self · rhs
    pub fn mul_into(&self, rhs: &Self, out: &mut Self) {
        let n = self.n;
        for i in 0..n {
            let row = &self.a[i * n..(i + 1) * n];
            let o = &mut out.a[i * n..(i + 1) * n];
            o.iter_mut().for_each(|x| *x = T::default());
            for (k, &lik) in row.iter().enumerate() {
                if lik == T::default() {
                    continue;
                }
                let r = &rhs.a[k * n..(k + 1) * n];
                for (x, &y) in o.iter_mut().zip(r) {
                    *x += lik * y;
                }
            }
        }
    }

    /// out = [a, b] = ab − ba, using `tmp` as scratch.
    pub fn commutator_into(a: &Self, b: &Self, out: &mut Self, tmp: &mut Self) {
        a.mul_into(b, out);
        b.mul_into(a, tmp);
        for (x, &y) in out.a.iter_mut().zip(&tmp.a) {
            *x = *x - y;
        }
    }

    /// self = Σ cᵢ·mᵢ
    pub fn combine(&mut self, terms: &[(f64, &Self)]) {
        for (idx, x) in self.a.iter_mut().enumerate() {
            let mut acc = T::default();
            for (c, m) in terms {
                acc += m.a[idx] * *c;
            }
            *x = acc;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.a.iter_mut().for_each(|x| *x = *x * c);
    }

    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.a[i * self.n..(i + 1) * self.n].iter().map(|x| x.abs1()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn all_finite(&self) -> bool {
        self.a.iter().all(|x| x.is_finite())
    }

    pub fn to_complex(&self) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.at(i, j).to_c64())
    }
}

/// Scratch space for `expm`.
pub(crate) struct ExpWork<T> {
    x: Sq<T>,
    p: Sq<T>,
    t: Sq<T>,
}

impl<T: Scalar> ExpWork<T> {
    pub fn new(n: usize) -> Self {
        Self { x: Sq::zeros(n), p: Sq::zeros(n), t: Sq::zeros(n) }
    }
}

/// Matrix exponential by scaling and squaring with a Taylor kernel whose degree
/// is chosen from the scaled norm.
pub(crate) fn expm_into<T: Scalar>(m: &Sq<T>, out: &mut Sq<T>, w: &mut ExpWork<T>) {
    let n = m.n;
    let theta = m.norm_inf();
    let squarings = if theta > 0.25 { (theta / 0.25).log2().ceil() as i32 } else { 0 };
    let s = 0.5f64.powi(squarings);
    w.x.a.iter_mut().zip(&m.a).for_each(|(x, &y)| *x = y * s);
    let th = theta * s;
    let mut degree = 1usize;
    let mut term = th;
    while term > 1e-18 && degree < 30 {
        degree += 1;
        term *= th / degree as f64;
    }
    // Horner: P = I + X/d (I + X/(d-1) (...))
    w.p.set_identity();
    for k in (1..=degree).rev() {
        w.x.mul_into(&w.p, &mut w.t);
        let inv = 1.0 / k as f64;
        for (idx, v) in w.t.a.iter().enumerate() {
            w.p.a[idx] = *v * inv;
        }
        for i in 0..n {
            let d = w.p.a[i * n + i];
            w.p.a[i * n + i] = d + T::from_f64(1.0);
        }
    }
    for _ in 0..squarings {
        w.p.mul_into(&w.p, &mut w.t);
        std::mem::swap(&mut w.p, &mut w.t);
    }
    out.a.copy_from_slice(&w.p.a);
}
