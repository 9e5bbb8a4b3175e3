//! Scalar root finding, minimization and argument-principle winding.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Brent's method on a bracket with f(a)·f(b) ≤ 0.
pub fn brent<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64, max_iter: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::InvalidArgument(format!("no sign change on [{a}, {b}]")));
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::no_convergence("Brent root refinement"))
}

/// Golden-section search for a minimum of `f` on [a, b].
pub fn golden_min<F>(mut f: F, mut a: f64, mut b: f64, xtol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Total change of arg f along the polyline through `corners`, with each
/// straight piece subdivided until consecutive samples differ in argument by
/// at most `max_step` radians.
pub fn arg_change<F>(mut f: F, corners: &[Complex64], initial_per_side: usize, max_step: f64) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    const MAX_DEPTH: u32 = 14;
    let mut total = 0.0;
    for w in corners.windows(2) {
        let (p0, p1) = (w[0], w[1]);
        let n = initial_per_side.max(1);
        let mut prev_t = 0.0;
        let mut prev_v = f(p0)?;
        if prev_v == Complex64::new(0.0, 0.0) || !prev_v.is_finite() {
            return Err(Error::PhaseTracking(p0));
        }
        for k in 1..=n {
            let t = k as f64 / n as f64;
            let v = f(p0 + (p1 - p0) * t)?;
            total += refine_arg(&mut f, p0, p1, prev_t, prev_v, t, v, max_step, MAX_DEPTH)?;
            prev_t = t;
            prev_v = v;
        }
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn refine_arg<F>(
    f: &mut F,
    p0: Complex64,
    p1: Complex64,
    t0: f64,
    v0: Complex64,
    t1: f64,
    v1: Complex64,
    max_step: f64,
    depth: u32,
) -> Result<f64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    if v1 == Complex64::new(0.0, 0.0) || !v1.is_finite() {
        return Err(Error::PhaseTracking(p0 + (p1 - p0) * t1));
    }
    let d = (v1 / v0).arg();
    if d.abs() <= max_step {
        return Ok(d);
    }
    if depth == 0 {
        return Err(Error::PhaseTracking(p0 + (p1 - p0) * t1));
    }
    let tm = 0.5 * (t0 + t1);
    let vm = f(p0 + (p1 - p0) * tm)?;
    Ok(refine_arg(f, p0, p1, t0, v0, tm, vm, max_step, depth - 1)?
        + refine_arg(f, p0, p1, tm, vm, t1, v1, max_step, depth - 1)?)
}

/// Continuous phase along a real parameter: `f` returns a principal phase and
/// extra samples are inserted until neighbours differ by at most `max_step`
/// and lie at most `max_dt` apart.
pub fn unwrap_phase<F>(mut f: F, ts: &[f64], max_step: f64, max_dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64) -> Result<f64>,
{
    fn wrap(d: f64) -> f64 {
        let two_pi = 2.0 * std::f64::consts::PI;
        d - two_pi * (d / two_pi).round()
    }
    fn step<F: FnMut(f64) -> Result<f64>>(
        f: &mut F,
        t0: f64,
        p0: f64,
        t1: f64,
        p1: f64,
        max_step: f64,
        depth: u32,
    ) -> Result<f64> {
        let d = wrap(p1 - p0);
        if d.abs() <= max_step {
            return Ok(d);
        }
        if depth == 0 {
            return Err(Error::PhaseTracking(Complex64::new(t1, 0.0)));
        }
        let tm = 0.5 * (t0 + t1);
        let pm = f(tm)?;
        Ok(step(f, t0, p0, tm, pm, max_step, depth - 1)? + step(f, tm, pm, t1, p1, max_step, depth - 1)?)
    }
    let mut out = Vec::with_capacity(ts.len());
    let Some(&t0) = ts.first() else { return Ok(out) };
    let mut prev = (t0, f(t0)?);
    let mut acc = prev.1;
    out.push(acc);
    for &t in &ts[1..] {
        let pieces = ((t - prev.0).abs() / max_dt).ceil();
        if pieces > 1.0 && pieces.is_finite() {
            let t_start = prev.0;
            for k in 1..pieces as usize {
                let ti = t_start + (t - t_start) * k as f64 / pieces;
                let pi = f(ti)?;
                acc += step(&mut f, prev.0, prev.1, ti, pi, max_step, 24)?;
                prev = (ti, pi);
            }
        }
        let p = f(t)?;
        acc += step(&mut f, prev.0, prev.1, t, p, max_step, 24)?;
        out.push(acc);
        prev = (t, p);
    }
    Ok(out)
}

/// Number of zeros inside [a, b] of a function that is real on the real axis
/// and satisfies f(λ̄) = conj f(λ), from the argument change along the upper
/// half of a rectangle of height `height`.
pub fn count_real_symmetric_zeros<F>(f: F, a: f64, b: f64, height: f64) -> Result<i64>
where
    F: FnMut(Complex64) -> Result<Complex64>,
{
    let corners = [
        Complex64::new(b, 0.0),
        Complex64::new(b, height),
        Complex64::new(a, height),
        Complex64::new(a, 0.0),
    ];
    let theta = arg_change(f, &corners, 8, std::f64::consts::FRAC_PI_4)?;
    let count = theta / std::f64::consts::PI;
    let rounded = count.round();
    if (count - rounded).abs() > 0.25 {
        return Err(Error::PhaseTracking(Complex64::new(a, 0.0)));
    }
    Ok(rounded as i64)
}
