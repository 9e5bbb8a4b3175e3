//! C interface to floquet-core.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `_free` function. Every fallible call returns a
//! [`FloquetStatus`]; on failure the message is kept per thread and can be
//! read with [`floquet_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use floquet_core::lyapunov::lyapunov_values;
use floquet_core::monodromy::SolverConfig;
use floquet_core::quasimomentum::{exponent_and_density, trace_integrals, QuasimomentumConfig};
use floquet_core::spectrum::{eigenvalues, scan_bands, BandStructure, SpectrumConfig};
use floquet_core::{Error, PeriodicMatrixPotential};
use nalgebra::DMatrix;
use num_complex::Complex64;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloquetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidPotential = 3,
    Parse = 4,
    NoConvergence = 5,
    Numerical = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FloquetEigenKind {
    Periodic = 0,
    Antiperiodic = 1,
}

/// One periodic or antiperiodic eigenvalue; `n` is the cluster label (z ≈ πn).
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FloquetEigenvalue {
    pub n: u32,
    pub m: u32,
    pub lambda: f64,
    pub multiplicity: u32,
    pub residual: f64,
}

/// A band [lo, hi] with its multiplicity, or a gap with multiplicity 0.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FloquetBand {
    pub lo: f64,
    pub hi: f64,
    pub multiplicity: u32,
    /// False when hi is the end of the scanned range rather than an edge.
    pub closed: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct FloquetTraceSummary {
    pub q0: f64,
    pub q2: f64,
    pub q0_target: f64,
    pub q2_target: f64,
    pub tail_relative_q0: f64,
    pub tail_relative_q2: f64,
    pub insufficient_truncation: bool,
}

pub struct FloquetPotential(PeriodicMatrixPotential);

pub struct FloquetEigenvalues(Vec<FloquetEigenvalue>);

pub struct FloquetBands {
    bands: Vec<FloquetBand>,
    gaps: Vec<FloquetBand>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(e: &Error) -> FloquetStatus {
    match e {
        Error::InvalidPotential(_) => FloquetStatus::InvalidPotential,
        Error::InvalidArgument(_) => FloquetStatus::InvalidArgument,
        Error::Json(_) | Error::Io(_) => FloquetStatus::Parse,
        Error::NoConvergence { .. } | Error::RootCount { .. } => FloquetStatus::NoConvergence,
        _ => FloquetStatus::Numerical,
    }
}

struct Fail(FloquetStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(FloquetStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(FloquetStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FloquetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            FloquetStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FloquetStatus::Panic
        }
    }
}

unsafe fn potential<'a>(p: *const FloquetPotential) -> Result<&'a PeriodicMatrixPotential, Fail> {
    p.as_ref().map(|p| &p.0).ok_or_else(|| null("potential"))
}

unsafe fn slice<'a, T>(data: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn slice_mut<'a, T>(data: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if data.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(data, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL. Zero after a successful call.
#[no_mangle]
pub extern "C" fn floquet_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message as a NUL-terminated string into `buf`.
///
/// # Safety
/// `buf` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn floquet_last_error_message(buf: *mut c_char, len: usize) -> FloquetStatus {
    if buf.is_null() {
        return FloquetStatus::NullPointer;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if msg.len() + 1 > len {
            return FloquetStatus::BufferTooSmall;
        }
        ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), msg.len());
        *buf.add(msg.len()) = 0;
        FloquetStatus::Ok
    })
}

/// Builds V(t) = V⁰ + 2Σₙ (Cₙ cos 2πnt + Sₙ sin 2πnt).
///
/// `mean` holds dim² values row-major; `cos` and `sin` each hold
/// `harmonics`·dim² values, harmonic n = 1 first, and may be null when
/// `harmonics` is 0.
///
/// # Safety
/// Pointers must reference arrays of the stated sizes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_potential_new(
    dim: usize,
    mean: *const f64,
    harmonics: usize,
    cos: *const f64,
    sin: *const f64,
    out: *mut *mut FloquetPotential,
) -> FloquetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let block = dim * dim;
        let mean = slice(mean, block, "mean")?;
        let cos = slice(cos, harmonics * block, "cos")?;
        let sin = slice(sin, harmonics * block, "sin")?;
        let blocks = |data: &[f64]| {
            data.chunks(block)
                .map(|c| DMatrix::from_row_slice(dim, dim, c))
                .collect::<Vec<_>>()
        };
        let mean = blocks(mean).pop().expect("mean block");
        let p = PeriodicMatrixPotential::new(mean, blocks(cos), blocks(sin))?;
        write_out(out, Box::into_raw(Box::new(FloquetPotential(p))), "out")
    })
}

/// Parses a potential from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_potential_from_json(json: *const c_char, out: *mut *mut FloquetPotential) -> FloquetStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Fail(FloquetStatus::Parse, e.to_string()))?;
        let p = PeriodicMatrixPotential::from_json_str(text)?;
        write_out(out, Box::into_raw(Box::new(FloquetPotential(p))), "out")
    })
}

/// # Safety
/// `p` must come from a constructor above and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn floquet_potential_free(p: *mut FloquetPotential) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Matrix size N, or 0 for a null handle.
///
/// # Safety
/// `p` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn floquet_potential_dim(p: *const FloquetPotential) -> usize {
    p.as_ref().map_or(0, |p| p.0.dim())
}

/// Writes the N Lyapunov values Δ_m(z) into `re` and `im`, each of length `len` ≥ N.
///
/// # Safety
/// `p` must be a live handle and `re`/`im` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn floquet_lyapunov_values(
    p: *const FloquetPotential,
    z_re: f64,
    z_im: f64,
    re: *mut f64,
    im: *mut f64,
    len: usize,
) -> FloquetStatus {
    guard(|| {
        let p = potential(p)?;
        if len < p.dim() {
            return Err(Fail(FloquetStatus::BufferTooSmall, format!("need {} slots, got {len}", p.dim())));
        }
        let (re, im) = (slice_mut(re, len, "re")?, slice_mut(im, len, "im")?);
        let set = lyapunov_values(p, Complex64::new(z_re, z_im), &SolverConfig::default())?;
        for (i, d) in set.deltas.iter().enumerate() {
            re[i] = d.re;
            im[i] = d.im;
        }
        Ok(())
    })
}

/// D(τ, z) = det(M(z) − τI).
///
/// # Safety
/// `p` must be a live handle and `out_re`/`out_im` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_characteristic_value(
    p: *const FloquetPotential,
    z_re: f64,
    z_im: f64,
    tau_re: f64,
    tau_im: f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> FloquetStatus {
    guard(|| {
        let p = potential(p)?;
        if tau_re == 0.0 && tau_im == 0.0 {
            return Err(invalid("τ must be nonzero"));
        }
        let set = lyapunov_values(p, Complex64::new(z_re, z_im), &SolverConfig::default())?;
        let d = set.characteristic_value(Complex64::new(tau_re, tau_im));
        write_out(out_re, d.re, "out_re")?;
        write_out(out_im, d.im, "out_im")
    })
}

/// Periodic or antiperiodic eigenvalues of the clusters k = 0..=n_max.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_eigenvalues(
    p: *const FloquetPotential,
    kind: FloquetEigenKind,
    n_max: usize,
    out: *mut *mut FloquetEigenvalues,
) -> FloquetStatus {
    guard(|| {
        let p = potential(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let (per, anti) = eigenvalues(p, n_max, &SpectrumConfig::default())?;
        let list = match kind {
            FloquetEigenKind::Periodic => per,
            FloquetEigenKind::Antiperiodic => anti,
        };
        let entries = list
            .entries
            .iter()
            .map(|e| FloquetEigenvalue {
                n: e.n as u32,
                m: e.m as u32,
                lambda: e.lambda,
                multiplicity: e.multiplicity as u32,
                residual: e.residual,
            })
            .collect();
        write_out(out, Box::into_raw(Box::new(FloquetEigenvalues(entries))), "out")
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn floquet_eigenvalues_len(h: *const FloquetEigenvalues) -> usize {
    h.as_ref().map_or(0, |h| h.0.len())
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_eigenvalues_get(
    h: *const FloquetEigenvalues,
    index: usize,
    out: *mut FloquetEigenvalue,
) -> FloquetStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("eigenvalue list"))?;
        let e = h.0.get(index).ok_or_else(|| invalid(format!("index {index} out of range ({})", h.0.len())))?;
        write_out(out, *e, "out")
    })
}

/// # Safety
/// `h` must come from [`floquet_eigenvalues`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn floquet_eigenvalues_free(h: *mut FloquetEigenvalues) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

fn bands_of(bs: &BandStructure) -> FloquetBands {
    FloquetBands {
        bands: bs
            .bands
            .iter()
            .map(|b| FloquetBand { lo: b.lo, hi: b.hi, multiplicity: b.multiplicity as u32, closed: b.hi_class.is_some() })
            .collect(),
        gaps: bs
            .gaps
            .iter()
            .map(|g| FloquetBand { lo: g.lo, hi: g.hi, multiplicity: 0, closed: !g.truncated() })
            .collect(),
    }
}

/// Band structure on [λ₀⁺, lambda_max].
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_scan_bands(
    p: *const FloquetPotential,
    lambda_max: f64,
    out: *mut *mut FloquetBands,
) -> FloquetStatus {
    guard(|| {
        let p = potential(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let bs = scan_bands(p, lambda_max, &SpectrumConfig::default())?;
        write_out(out, Box::into_raw(Box::new(bands_of(&bs))), "out")
    })
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn floquet_bands_len(h: *const FloquetBands) -> usize {
    h.as_ref().map_or(0, |h| h.bands.len())
}

/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn floquet_gaps_len(h: *const FloquetBands) -> usize {
    h.as_ref().map_or(0, |h| h.gaps.len())
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_bands_get(h: *const FloquetBands, index: usize, out: *mut FloquetBand) -> FloquetStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("band handle"))?;
        let b = h.bands.get(index).ok_or_else(|| invalid(format!("band {index} out of range ({})", h.bands.len())))?;
        write_out(out, *b, "out")
    })
}

/// # Safety
/// `h` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_gaps_get(h: *const FloquetBands, index: usize, out: *mut FloquetBand) -> FloquetStatus {
    guard(|| {
        let h = h.as_ref().ok_or_else(|| null("band handle"))?;
        let g = h.gaps.get(index).ok_or_else(|| invalid(format!("gap {index} out of range ({})", h.gaps.len())))?;
        write_out(out, *g, "out")
    })
}

/// # Safety
/// `h` must come from [`floquet_scan_bands`] and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn floquet_bands_free(h: *mut FloquetBands) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// u(x) and v(x) of the quasimomentum on a sorted real grid.
///
/// # Safety
/// `p` must be a live handle; `xs`, `u` and `v` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn floquet_exponent_and_density(
    p: *const FloquetPotential,
    xs: *const f64,
    len: usize,
    u: *mut f64,
    v: *mut f64,
) -> FloquetStatus {
    guard(|| {
        let p = potential(p)?;
        let xs = slice(xs, len, "xs")?;
        let (u, v) = (slice_mut(u, len, "u")?, slice_mut(v, len, "v")?);
        let cfg = QuasimomentumConfig::default();
        let grid = exponent_and_density(p, xs, cfg.eps, &cfg.spectrum)?;
        for (i, s) in grid.real_axis.iter().enumerate() {
            u[i] = s.u;
            v[i] = s.v;
        }
        Ok(())
    })
}

/// Trace integrals Q₀ and Q₂ over `clusters` clusters with their targets.
///
/// # Safety
/// `p` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn floquet_trace_integrals(
    p: *const FloquetPotential,
    clusters: usize,
    out: *mut FloquetTraceSummary,
) -> FloquetStatus {
    guard(|| {
        let p = potential(p)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = QuasimomentumConfig { clusters, ..Default::default() };
        let t = trace_integrals(p, &cfg)?;
        write_out(
            out,
            FloquetTraceSummary {
                q0: t.q0,
                q2: t.q2,
                q0_target: t.q0_target,
                q2_target: t.q2_target,
                tail_relative_q0: t.truncation.tail_relative_q0,
                tail_relative_q2: t.truncation.tail_relative_q2,
                insufficient_truncation: t.truncation.insufficient_truncation,
            },
            "out",
        )
    })
}
