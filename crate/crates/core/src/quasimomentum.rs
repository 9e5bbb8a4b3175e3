//! Averaged quasimomentum w = u + iv, the trace integrals Qₙ and the gap
//! estimates built on them.

use std::f64::consts::PI;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{lyapunov_values, LyapunovBranchSet};
use crate::monodromy::SolverConfig;
use crate::potential::PeriodicMatrixPotential;
use crate::roots::unwrap_phase;
use crate::spectrum::{bottom_of_spectrum, scan_bands, BandStructure, SpectrumConfig};

/// η(c) = c + √(c² − 1) on the branch with |η| ≥ 1.
pub fn eta(c: Complex64) -> Complex64 {
    if c.norm() > 1e100 {
        return c * 2.0;
    }
    let r = (c * c - 1.0).sqrt();
    let (a, b) = (c + r, c - r);
    if a.norm() >= b.norm() {
        a
    } else {
        b
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DirichletGrid {
    pub x_max: f64,
    pub dx: f64,
    /// Rows below `y_split` are uniform with spacing `dy_fine`, above it geometric.
    pub y_split: f64,
    pub dy_fine: f64,
    pub y_ratio: f64,
    pub y_max: f64,
}

impl Default for DirichletGrid {
    fn default() -> Self {
        Self { x_max: 4.0 * PI, dx: 0.04, y_split: 0.5, dy_fine: 0.025, y_ratio: 1.15, y_max: 4.0 * PI }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuasimomentumConfig {
    pub spectrum: SpectrumConfig,
    /// Imaginary offsets for the phase of F; u is extrapolated to ε = 0.
    pub eps: [f64; 2],
    /// Gap clusters covered before the tail model takes over.
    pub clusters: usize,
    pub quad_points: usize,
    pub quad_tol: f64,
    /// Largest acceptable tail relative to the integral.
    pub tail_tol: f64,
    pub dirichlet: DirichletGrid,
}

impl Default for QuasimomentumConfig {
    fn default() -> Self {
        Self {
            spectrum: SpectrumConfig::default(),
            eps: [1e-4, 5e-5],
            clusters: 12,
            quad_points: 20,
            quad_tol: 1e-9,
            tail_tol: 5e-3,
            dirichlet: DirichletGrid::default(),
        }
    }
}

impl QuasimomentumConfig {
    pub fn validate(&self) -> Result<()> {
        self.spectrum.solver.validate()?;
        let [e1, e2] = self.eps;
        if !(e1 > 0.0 && e2 > 0.0 && e1 != e2) {
            return Err(Error::InvalidArgument("eps values must be positive and distinct".into()));
        }
        if self.quad_points < 2 || self.clusters == 0 {
            return Err(Error::InvalidArgument("quadrature order and cluster count must be positive".into()));
        }
        let d = &self.dirichlet;
        if !(d.x_max > 0.0 && d.dx > 0.0 && d.dy_fine > 0.0 && d.y_split > 0.0 && d.y_ratio > 1.0 && d.y_max > d.y_split) {
            return Err(Error::InvalidArgument("invalid Dirichlet grid".into()));
        }
        Ok(())
    }
}

/// Σ_m log η(Δ_m) with principal logarithms; w = (i/N)·S.
fn log_eta_sum(set: &LyapunovBranchSet) -> Complex64 {
    set.deltas.iter().map(|&d| eta(d).ln()).sum()
}

/// v on the real axis, with branches inside [−1, 1] contributing exactly zero.
fn v_from_real_set(set: &LyapunovBranchSet) -> f64 {
    let n = set.dim() as f64;
    set.deltas
        .iter()
        .map(|&d| {
            if d.im.abs() <= 1e-12 * d.norm().max(1.0) && d.re.abs() <= 1.0 {
                0.0
            } else {
                eta(d).norm().ln()
            }
        })
        .sum::<f64>()
        / n
}

struct Evaluator<'a> {
    p: &'a PeriodicMatrixPotential,
    solver: &'a SolverConfig,
    n: f64,
}

impl<'a> Evaluator<'a> {
    fn new(p: &'a PeriodicMatrixPotential, solver: &'a SolverConfig) -> Self {
        Self { p, solver, n: p.dim() as f64 }
    }

    /// Longest path step for phase tracking; the phase of F moves at about N
    /// per unit of x, so shorter steps keep a 2π slip from aliasing.
    fn max_dt(&self) -> f64 {
        0.5 / self.n
    }

    fn s(&self, z: Complex64) -> Result<Complex64> {
        Ok(log_eta_sum(&lyapunov_values(self.p, z, self.solver)?))
    }

    fn v(&self, x: f64) -> Result<f64> {
        Ok(v_from_real_set(&lyapunov_values(self.p, Complex64::new(x, 0.0), self.solver)?))
    }

    /// u along increasing |x| from 0, at height `eps`, anchored at u(iε) = 0.
    fn u_path(&self, xs: &[f64], eps: f64) -> Result<Vec<f64>> {
        let phases = unwrap_phase(|x| Ok(self.s(Complex64::new(x, eps))?.im), xs, PI / 2.0, self.max_dt())?;
        Ok(phases.iter().map(|ph| -(ph - phases[0]) / self.n).collect())
    }

    /// Richardson-extrapolated u on a path that starts at the anchor.
    fn u_extrapolated(&self, xs: &[f64], eps: [f64; 2]) -> Result<Vec<f64>> {
        let a = self.u_path(xs, eps[0])?;
        let b = self.u_path(xs, eps[1])?;
        Ok(a.iter().zip(&b).map(|(ua, ub)| (eps[0] * ub - eps[1] * ua) / (eps[0] - eps[1])).collect())
    }

    /// Centered-difference u′(x), extrapolated in ε.
    fn u_prime(&self, x: f64, h: f64, eps: [f64; 2]) -> Result<f64> {
        let mut d = [0.0; 2];
        for (k, &e) in eps.iter().enumerate() {
            let s1 = self.s(Complex64::new(x + h, e))?;
            let s0 = self.s(Complex64::new(x - h, e))?;
            let diff = (s1.im - s0.im) - 2.0 * PI * ((s1.im - s0.im) / (2.0 * PI)).round();
            d[k] = -diff / (2.0 * h * self.n);
        }
        Ok((eps[0] * d[1] - eps[1] * d[0]) / (eps[0] - eps[1]))
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RealAxisSample {
    pub x: f64,
    pub u: f64,
    pub v: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct UpperPlaneSample {
    pub x: f64,
    pub y: f64,
    pub w: Complex64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct QuasimomentumGrid {
    pub real_axis: Vec<RealAxisSample>,
    pub upper_plane: Vec<UpperPlaneSample>,
    pub traces: Option<TraceIntegrals>,
    pub dirichlet: Option<DirichletReport>,
}

/// Paths from the anchor x = 0 outward: ascending nonnegative and descending negative values.
fn split_paths(xs: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut pos: Vec<f64> = vec![0.0];
    let mut neg: Vec<f64> = vec![0.0];
    for &x in xs {
        if x >= 0.0 {
            pos.push(x);
        } else {
            neg.push(x);
        }
    }
    pos.sort_by(f64::total_cmp);
    neg.sort_by(|a, b| b.total_cmp(a));
    (pos, neg)
}

fn path_index(pos: &[f64], neg: &[f64], x: f64) -> (bool, usize) {
    if x >= 0.0 {
        (true, pos.partition_point(|&t| t < x))
    } else {
        (false, neg.partition_point(|&t| t > x))
    }
}

/// u and v on a real grid. v is evaluated on the axis; u is the extrapolated
/// boundary value of −(1/N)·arg F(x + iε), anchored at x = 0.
pub fn exponent_and_density(
    p: &PeriodicMatrixPotential,
    x_grid: &[f64],
    eps: [f64; 2],
    cfg: &SpectrumConfig,
) -> Result<QuasimomentumGrid> {
    cfg.solver.validate()?;
    if x_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("x grid must be sorted".into()));
    }
    if !(eps[0] > 0.0 && eps[1] > 0.0 && eps[0] != eps[1]) {
        return Err(Error::InvalidArgument("eps values must be positive and distinct".into()));
    }
    let ev = Evaluator::new(p, &cfg.solver);
    let (pos, neg) = split_paths(x_grid);
    let up = ev.u_extrapolated(&pos, eps)?;
    let un = ev.u_extrapolated(&neg, eps)?;
    let mut real_axis = Vec::with_capacity(x_grid.len());
    let lattice = PI / ev.n;
    for &x in x_grid {
        let mut u = match path_index(&pos, &neg, x) {
            (true, i) => up[i],
            (false, i) => un[i],
        };
        let set = lyapunov_values(p, Complex64::new(x, 0.0), &cfg.solver)?;
        // With no Δ_m in [−1, 1] the product F is real on the axis, so u is
        // exactly a multiple of π/N; the offset path only selects which one.
        if set.count_in_band(1e-12) == 0 {
            u = lattice * (u / lattice).round();
        }
        real_axis.push(RealAxisSample { x, u, v: v_from_real_set(&set) });
    }
    Ok(QuasimomentumGrid { real_axis, ..Default::default() })
}

/// w on rows y = const of the upper half plane, anchored by Re w(iy) = 0.
pub fn upper_plane(
    p: &PeriodicMatrixPotential,
    xs: &[f64],
    ys: &[f64],
    cfg: &SpectrumConfig,
) -> Result<Vec<UpperPlaneSample>> {
    cfg.solver.validate()?;
    if ys.iter().any(|&y| !(y > 0.0)) {
        return Err(Error::InvalidArgument("upper-plane rows need y > 0".into()));
    }
    let ev = Evaluator::new(p, &cfg.solver);
    let (pos, neg) = split_paths(xs);
    let mut out = Vec::new();
    for &y in ys {
        let row = |path: &[f64]| -> Result<Vec<Complex64>> {
            let mut logs = Vec::with_capacity(path.len());
            let phases = unwrap_phase(
                |x| {
                    let s = ev.s(Complex64::new(x, y))?;
                    Ok(s.im)
                },
                path,
                PI / 2.0,
                ev.max_dt(),
            )?;
            for (&x, ph) in path.iter().zip(&phases) {
                let s = ev.s(Complex64::new(x, y))?;
                logs.push(Complex64::new(-(ph - phases[0]) / ev.n, s.re / ev.n));
            }
            Ok(logs)
        };
        let wp = row(&pos)?;
        let wn = row(&neg)?;
        for &x in xs {
            let w = match path_index(&pos, &neg, x) {
                (true, i) => wp[i],
                (false, i) => wn[i],
            };
            out.push(UpperPlaneSample { x, y, w });
        }
    }
    Ok(out)
}

/// Regions of the positive real axis where v > 0.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct Piece {
    pub x_lo: f64,
    pub x_hi: f64,
    pub gap: bool,
    /// Both endpoints lie inside the scanned range.
    pub closed: bool,
}

/// Normalized potential with its band structure up to the truncation point.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub potential: PeriodicMatrixPotential,
    /// λ₀⁺ of the input potential, removed by normalization.
    pub lambda0_plus: f64,
    pub bands: BandStructure,
    pub pieces: Vec<Piece>,
    pub x_max: f64,
}

impl SpectralData {
    pub fn gaps(&self) -> impl Iterator<Item = &Piece> {
        self.pieces.iter().filter(|p| p.gap && p.closed)
    }

    /// Index of the longest closed gap in the z variable.
    pub fn largest_gap_index(&self) -> Option<usize> {
        self.gaps()
            .enumerate()
            .max_by(|a, b| (a.1.x_hi - a.1.x_lo).total_cmp(&(b.1.x_hi - b.1.x_lo)))
            .map(|(i, _)| i)
    }
}

/// Normalizes `p` and scans its bands over the configured number of clusters.
pub fn prepare(p: &PeriodicMatrixPotential, cfg: &QuasimomentumConfig) -> Result<SpectralData> {
    cfg.validate()?;
    let lambda0 = bottom_of_spectrum(p, &cfg.spectrum)?;
    let q = p.normalize(lambda0)?;
    let x_max = PI * (cfg.clusters as f64 + 0.5);
    let bands = scan_bands(&q, x_max * x_max, &cfg.spectrum)?;
    let full = 2 * q.dim();
    let xs = |l: f64| l.max(0.0).sqrt();
    let mut pieces: Vec<Piece> = bands
        .bands
        .iter()
        .filter(|b| b.multiplicity < full)
        .map(|b| Piece { x_lo: xs(b.lo), x_hi: xs(b.hi), gap: false, closed: b.hi_class.is_some() })
        .chain(bands.gaps.iter().map(|g| Piece { x_lo: xs(g.lo), x_hi: xs(g.hi), gap: true, closed: !g.truncated() }))
        .filter(|p| p.x_hi > p.x_lo)
        .collect();
    // Resonances inside a piece leave the multiplicity unchanged but put a
    // square-root point into v, so the quadrature pieces end there too.
    let cuts: Vec<f64> = bands.breakpoints.iter().map(|b| xs(b.lambda)).collect();
    pieces = pieces
        .into_iter()
        .flat_map(|p| {
            let mut ends: Vec<f64> = cuts.iter().copied().filter(|&c| c > p.x_lo && c < p.x_hi).collect();
            ends.sort_by(f64::total_cmp);
            ends.push(p.x_hi);
            let mut lo = p.x_lo;
            ends.into_iter()
                .map(|hi| {
                    let piece = Piece { x_lo: lo, x_hi: hi, gap: p.gap, closed: p.closed || hi < p.x_hi };
                    lo = hi;
                    piece
                })
                .collect::<Vec<_>>()
        })
        .collect();
    pieces.sort_by(|a, b| a.x_lo.total_cmp(&b.x_lo));
    Ok(SpectralData { potential: q, lambda0_plus: lambda0, bands, pieces, x_max })
}

/// Absolute error accepted per unit length of x, below the noise floor of v
/// on very short pieces.
const ABS_TOL: f64 = 1e-11;

struct SineQuad {
    nodes: Vec<(f64, f64)>,
    tol: f64,
}

impl SineQuad {
    fn new(points: usize, tol: f64) -> Self {
        let rule = GaussLegendre::new(std::num::NonZeroUsize::new(points.max(2)).unwrap());
        Self { nodes: rule.as_node_weight_pairs().to_vec(), tol }
    }

    /// ∫ₐᵇ f(x) dx with x = m + h·sin θ, adaptive in θ. A subinterval is
    /// accepted when each component meets the relative tolerance or the
    /// absolute `floor` scaled by its length.
    fn integrate<const K: usize>(
        &self,
        a: f64,
        b: f64,
        floor: [f64; K],
        f: &mut dyn FnMut(f64) -> Result<[f64; K]>,
    ) -> Result<[f64; K]> {
        let (m, h) = (0.5 * (a + b), 0.5 * (b - a));
        let mut rule = |t0: f64, t1: f64| -> Result<[f64; K]> {
            let mut acc = [0.0; K];
            let (c, r) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            for &(node, weight) in &self.nodes {
                let th = c + r * node;
                let jac = h * th.cos() * r * weight;
                let vals = f(m + h * th.sin())?;
                for k in 0..K {
                    acc[k] += jac * vals[k];
                }
            }
            Ok(acc)
        };
        let whole = rule(-PI / 2.0, PI / 2.0)?;
        let mut stack = vec![(-PI / 2.0, PI / 2.0, whole, 0u32)];
        let mut total = [0.0; K];
        while let Some((t0, t1, est, depth)) = stack.pop() {
            let tm = 0.5 * (t0 + t1);
            let l = rule(t0, tm)?;
            let r = rule(tm, t1)?;
            let len = h * (t1 - t0);
            let ok = depth >= 10
                || (0..K).all(|k| {
                    let refined = l[k] + r[k];
                    let err = (refined - est[k]).abs();
                    err <= self.tol * refined.abs() || err <= floor[k] * len
                });
            if ok {
                for k in 0..K {
                    total[k] += l[k] + r[k];
                }
            } else {
                stack.push((t0, tm, l, depth + 1));
                stack.push((tm, t1, r, depth + 1));
            }
        }
        Ok(total)
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClusterContribution {
    pub n: usize,
    pub q0: f64,
    pub q2: f64,
    pub q4: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TruncationReport {
    pub x_max: f64,
    pub clusters: usize,
    pub tail_q0: f64,
    pub tail_q2: f64,
    pub tail_q4: f64,
    pub tail_relative_q0: f64,
    pub tail_relative_q2: f64,
    pub insufficient_truncation: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceIntegrals {
    /// Qₙ = (1/π)∫ xⁿ v(x) dx including the tail estimate.
    pub q0: f64,
    pub q2: f64,
    pub q4: f64,
    /// Tr V⁰/(2N), ∫Tr V²/(8N), ∫Tr(V′² + 2V³)/(32N) for the normalized potential.
    pub q0_target: f64,
    pub q2_target: f64,
    pub q4_target: f64,
    pub truncation: TruncationReport,
    pub clusters: Vec<ClusterContribution>,
    pub sup_v: f64,
    pub argmax_v: f64,
    pub lambda0_plus: f64,
}

impl TraceIntegrals {
    pub fn q0_relative_error(&self) -> f64 {
        rel(self.q0, self.q0_target)
    }

    pub fn q2_relative_error(&self) -> f64 {
        rel(self.q2, self.q2_target)
    }

    pub fn q4_relative_error(&self) -> f64 {
        rel(self.q4, self.q4_target)
    }
}

/// Relative difference, with differences below 1e-12 treated as zero.
fn rel(a: f64, b: f64) -> f64 {
    if (a - b).abs() <= 1e-12 {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs())
    }
}

fn q4_target(p: &PeriodicMatrixPotential) -> f64 {
    let m = 8 * (p.max_harmonic() + 1) + 16;
    let mut acc = 0.0;
    for k in 0..m {
        let t = k as f64 / m as f64;
        let v = p.evaluate(t);
        let d = p.derivative(t);
        acc += (&d * &d).trace() + 2.0 * (&v * &v * &v).trace();
    }
    acc / m as f64 / (32.0 * p.dim() as f64)
}

fn geometric_tail(values: &[f64], n_max: usize) -> (f64, bool) {
    let nz: Vec<(usize, f64)> = values.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(i, v)| (i, *v)).collect();
    match nz.as_slice() {
        [] | [_] => (0.0, true),
        [.., (n1, c1), (n2, c2)] => {
            let r = (c2 / c1).powf(1.0 / (n2 - n1) as f64);
            if r < 0.95 {
                (c2 * r.powi((n_max + 1 - n2) as i32) / (1.0 - r), true)
            } else {
                (c2 * n_max as f64, false)
            }
        }
    }
}

/// Q₀, Q₂ (and Q₄) from v on the gaps and partial-multiplicity pieces.
pub fn trace_integrals(p: &PeriodicMatrixPotential, cfg: &QuasimomentumConfig) -> Result<TraceIntegrals> {
    trace_integrals_with(&prepare(p, cfg)?, cfg)
}

pub fn trace_integrals_with(data: &SpectralData, cfg: &QuasimomentumConfig) -> Result<TraceIntegrals> {
    let q = &data.potential;
    let ev = Evaluator::new(q, &cfg.spectrum.solver);
    let quad = SineQuad::new(cfg.quad_points, cfg.quad_tol);
    let n_max = cfg.clusters;
    let mut per_cluster = vec![[0.0f64; 3]; n_max + 2];
    let (mut sup_v, mut argmax_v) = (0.0f64, 0.0);
    for piece in &data.pieces {
        let mut f = |x: f64| -> Result<[f64; 3]> {
            let v = ev.v(x)?;
            if v > sup_v {
                sup_v = v;
                argmax_v = x;
            }
            let x2 = x * x;
            Ok([v, v * x2, v * x2 * x2])
        };
        let x2 = piece.x_hi * piece.x_hi;
        let floor = [ABS_TOL, ABS_TOL * x2, ABS_TOL * x2 * x2];
        let vals = quad.integrate(piece.x_lo, piece.x_hi, floor, &mut f)?;
        let n = ((0.5 * (piece.x_lo + piece.x_hi) / PI).round() as usize).min(n_max + 1);
        for k in 0..3 {
            per_cluster[n][k] += 2.0 / PI * vals[k];
        }
    }
    let sums: Vec<f64> = (0..3).map(|k| per_cluster.iter().map(|c| c[k]).sum()).collect();
    let mut tails = [0.0; 3];
    let mut decaying = true;
    for k in 0..3 {
        let series: Vec<f64> = per_cluster.iter().skip(1).take(n_max).map(|c| c[k]).collect();
        let (t, ok) = geometric_tail(&series, n_max);
        tails[k] = t;
        if k < 2 {
            decaying &= ok;
        }
    }
    let q0 = sums[0] + tails[0];
    let q2 = sums[1] + tails[1];
    let rel_tail = |t: f64, v: f64| if t == 0.0 { 0.0 } else { t / v.abs() };
    let truncation = TruncationReport {
        x_max: data.x_max,
        clusters: n_max,
        tail_q0: tails[0],
        tail_q2: tails[1],
        tail_q4: tails[2],
        tail_relative_q0: rel_tail(tails[0], q0),
        tail_relative_q2: rel_tail(tails[1], q2),
        insufficient_truncation: !decaying
            || rel_tail(tails[0], q0) > cfg.tail_tol
            || rel_tail(tails[1], q2) > cfg.tail_tol,
    };
    let n = q.dim() as f64;
    Ok(TraceIntegrals {
        q0,
        q2,
        q4: sums[2] + tails[2],
        q0_target: q.trace_mean() / (2.0 * n),
        q2_target: q.hs_norm_sq() / (8.0 * n),
        q4_target: q4_target(q),
        truncation,
        clusters: per_cluster
            .iter()
            .enumerate()
            .filter(|(_, c)| c[0] > 0.0)
            .map(|(n, c)| ClusterContribution { n, q0: c[0], q2: c[1], q4: c[2] })
            .collect(),
        sup_v,
        argmax_v,
        lambda0_plus: data.lambda0_plus,
    })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct WAsymptoticSample {
    pub y: f64,
    pub w_minus_z: Complex64,
    pub model: Complex64,
    pub residual: f64,
    pub residual_after_q0: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WAsymptoticReport {
    pub samples: Vec<WAsymptoticSample>,
    /// Least-squares slope of log(residual after the Q₀ term) against log y.
    pub decay_order: Option<f64>,
    /// Im(w(iy) − iy) > 0 at every sample.
    pub sign_ok: bool,
    pub q0_target: f64,
    pub q2_target: f64,
}

/// w(iy) − iy against −Q₀/z − Q₂/z³ at z = iy for the normalized potential.
pub fn asymptotic_w_check(p: &PeriodicMatrixPotential, y_list: &[f64], cfg: &SpectrumConfig) -> Result<WAsymptoticReport> {
    let lambda0 = bottom_of_spectrum(p, cfg)?;
    asymptotic_w_check_normalized(&p.normalize(lambda0)?, y_list, cfg)
}

pub fn asymptotic_w_check_normalized(
    q: &PeriodicMatrixPotential,
    y_list: &[f64],
    cfg: &SpectrumConfig,
) -> Result<WAsymptoticReport> {
    let ev = Evaluator::new(q, &cfg.solver);
    let n = q.dim() as f64;
    let q0 = q.trace_mean() / (2.0 * n);
    let q2 = q.hs_norm_sq() / (8.0 * n);
    let mut samples = Vec::new();
    for &y in y_list {
        if !(y > 0.0) {
            return Err(Error::InvalidArgument("y values must be positive".into()));
        }
        let z = Complex64::new(0.0, y);
        let w = Complex64::i() * ev.s(z)? / n;
        let d = w - z;
        let model = -q0 / z - q2 / (z * z * z);
        samples.push(WAsymptoticSample {
            y,
            w_minus_z: d,
            model,
            residual: (d - model).norm(),
            residual_after_q0: (d + q0 / z).norm(),
        });
    }
    let noise = |s: &WAsymptoticSample| 1e-12 * s.y.max(1.0);
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|s| s.residual_after_q0 > 1e3 * noise(s))
        .map(|s| (s.y.ln(), s.residual_after_q0.ln()))
        .collect();
    let decay_order = (pts.len() >= 2).then(|| slope(&pts));
    let sign_ok = samples.iter().all(|s| s.w_minus_z.im >= -noise(s));
    Ok(WAsymptoticReport { samples, decay_order, sign_ok, q0_target: q0, q2_target: q2 })
}

fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapIdentityPoint {
    pub x: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub relative_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapIdentityReport {
    pub gap_index: usize,
    pub z_lo: f64,
    pub z_hi: f64,
    pub points: Vec<GapIdentityPoint>,
    pub max_relative_residual: f64,
    /// Bound on the relative effect of v-mass beyond the truncation point.
    pub truncation_bound: f64,
    pub inconclusive: bool,
}

/// Both sides of v(x) = v⁰(x)(1 + (1/π)∫_{ℝ∖g} v(t)dt/(v⁰(t)|t − x|)) on one gap.
pub fn gap_identity_check(p: &PeriodicMatrixPotential, gap_index: usize, cfg: &QuasimomentumConfig) -> Result<GapIdentityReport> {
    let data = prepare(p, cfg)?;
    let traces = trace_integrals_with(&data, cfg)?;
    gap_identity_check_with(&data, &traces, gap_index, cfg)
}

pub fn gap_identity_check_with(
    data: &SpectralData,
    traces: &TraceIntegrals,
    gap_index: usize,
    cfg: &QuasimomentumConfig,
) -> Result<GapIdentityReport> {
    let gap = *data
        .gaps()
        .nth(gap_index)
        .ok_or_else(|| Error::InvalidArgument(format!("no closed gap with index {gap_index}")))?;
    let (a, b) = (gap.x_lo, gap.x_hi);
    let v0 = |t: f64| ((t - a) * (b - t)).abs().sqrt();
    let xs = [a + 0.25 * (b - a), 0.5 * (a + b), a + 0.75 * (b - a)];
    let ev = Evaluator::new(&data.potential, &cfg.spectrum.solver);
    let quad = SineQuad::new(cfg.quad_points, cfg.quad_tol.max(1e-8));
    let mut integral = [0.0; 3];
    let mut mass = 0.0;
    for piece in &data.pieces {
        if piece.x_lo == gap.x_lo && piece.x_hi == gap.x_hi {
            mass += 2.0 * quad.integrate(piece.x_lo, piece.x_hi, [ABS_TOL], &mut |t| Ok([ev.v(t)?]))?[0];
            continue;
        }
        let mut f = |t: f64| -> Result<[f64; 4]> {
            let v = ev.v(t)?;
            let (kp, km) = (v0(t), ((t + a) * (t + b)).sqrt());
            let mut out = [0.0; 4];
            for (k, &x) in xs.iter().enumerate() {
                out[k] = v / (kp * (t - x).abs()) + v / (km * (t + x));
            }
            out[3] = 2.0 * v;
            Ok(out)
        };
        let vals = quad.integrate(piece.x_lo, piece.x_hi, [ABS_TOL; 4], &mut f)?;
        for k in 0..3 {
            integral[k] += vals[k];
        }
        mass += vals[3];
    }
    let remaining = (PI * traces.q0_target - mass).max(0.0);
    let xm = data.x_max;
    let mut points = Vec::new();
    let mut truncation_bound: f64 = 0.0;
    for (k, &x) in xs.iter().enumerate() {
        let lhs = ev.v(x)?;
        let rhs = v0(x) * (1.0 + integral[k] / PI);
        if xm > b {
            let extra = v0(x) * remaining / PI / ((xm - b) * (xm - x));
            truncation_bound = truncation_bound.max(extra / lhs.max(1e-300));
        }
        points.push(GapIdentityPoint { x, lhs, rhs, relative_residual: (lhs - rhs).abs() / lhs.abs().max(1e-300) });
    }
    let max_relative_residual = points.iter().map(|p| p.relative_residual).fold(0.0, f64::max);
    Ok(GapIdentityReport {
        gap_index,
        z_lo: a,
        z_hi: b,
        points,
        max_relative_residual,
        truncation_bound,
        inconclusive: truncation_bound > max_relative_residual.max(1e-3),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    /// rhs − lhs; the estimate holds when the slack is nonnegative.
    pub slack: f64,
}

impl EstimateCheck {
    fn new(name: &'static str, lhs: f64, rhs: f64) -> Self {
        Self { name, lhs, rhs, slack: rhs - lhs }
    }

    pub fn holds(&self) -> bool {
        self.slack >= 0.0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub checks: Vec<EstimateCheck>,
    pub gap_count: usize,
    pub u_prime_samples: usize,
}

impl EstimateReport {
    pub fn all_hold(&self) -> bool {
        self.checks.iter().all(EstimateCheck::holds)
    }
}

/// Σ|gₙ|² ≤ 8Q₀, Σ|γₙ|² ≤ 8‖V‖²/N, sup v² ≤ 2Q₀ and u′ ≥ 1 on full-multiplicity bands.
pub fn estimate_suite(p: &PeriodicMatrixPotential, cfg: &QuasimomentumConfig) -> Result<EstimateReport> {
    let data = prepare(p, cfg)?;
    let traces = trace_integrals_with(&data, cfg)?;
    estimate_suite_with(&data, &traces, cfg)
}

pub fn estimate_suite_with(data: &SpectralData, traces: &TraceIntegrals, cfg: &QuasimomentumConfig) -> Result<EstimateReport> {
    let q = &data.potential;
    let n = q.dim() as f64;
    let gaps: Vec<&Piece> = data.gaps().collect();
    // Gaps on the negative axis mirror the positive ones.
    let sum_g: f64 = 2.0 * gaps.iter().map(|g| (g.x_hi - g.x_lo).powi(2)).sum::<f64>();
    let sum_gamma: f64 = gaps.iter().map(|g| (g.x_hi * g.x_hi - g.x_lo * g.x_lo).powi(2)).sum();
    let ev = Evaluator::new(q, &cfg.spectrum.solver);
    let mut sup_v = traces.sup_v;
    for g in &gaps {
        sup_v = sup_v.max(ev.v(0.5 * (g.x_lo + g.x_hi))?);
    }
    let full = 2 * q.dim();
    let mut min_u_prime = f64::INFINITY;
    let mut samples = 0;
    for band in data.bands.bands.iter().filter(|b| b.multiplicity == full) {
        let (xa, xb) = (band.lo.max(0.0).sqrt(), band.hi.max(0.0).sqrt().min(data.x_max));
        if xb - xa < 1e-2 {
            continue;
        }
        for frac in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let x = xa + frac * (xb - xa);
            let h = (1e-3f64).min(0.02 * (xb - xa));
            min_u_prime = min_u_prime.min(ev.u_prime(x, h, cfg.eps)?);
            samples += 1;
        }
    }
    let mut checks = vec![
        EstimateCheck::new("sum_gap_sq_le_8Q0", sum_g, 8.0 * traces.q0),
        EstimateCheck::new("sum_gamma_sq_le_8normsq_over_N", sum_gamma, 8.0 * q.hs_norm_sq() / n),
        EstimateCheck::new("sup_v_sq_le_2Q0", sup_v * sup_v, 2.0 * traces.q0),
    ];
    if samples > 0 {
        checks.push(EstimateCheck::new("u_prime_ge_1", 1.0 - 1e-6, min_u_prime));
    }
    Ok(EstimateReport { checks, gap_count: gaps.len(), u_prime_samples: samples })
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletReport {
    /// 𝒫ₙ = (1/π)∫ xⁿ v du by Stieltjes sums on the partial-multiplicity pieces.
    pub p0: f64,
    pub p2: f64,
    /// Iₙᴰ = (1/π)∬|wₙ′|² dx dy by midpoint sums, including the tail model.
    pub i0d: f64,
    pub i1d: f64,
    pub tail_i0d: f64,
    pub tail_i1d: f64,
    /// I₁ᴰ from its boundary form −(1/π)∫ x v d(x(u − x)), an independent
    /// check on the area sum.
    pub i1d_boundary: f64,
    pub q0: f64,
    pub q2: f64,
    /// |Q₀ − I₀ᴰ − 𝒫₀| / Q₀ (absolute when Q₀ = 0).
    pub residual0: f64,
    pub residual2: f64,
    pub grid_columns: usize,
    pub grid_rows: usize,
}

fn y_cells(g: &DirichletGrid) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    let fine = (g.y_split / g.dy_fine).ceil() as usize;
    for k in 1..=fine {
        edges.push(g.y_split * k as f64 / fine as f64);
    }
    let mut y = g.y_split;
    while y < g.y_max {
        y = (y * g.y_ratio).min(g.y_max);
        edges.push(y);
    }
    edges.windows(2).map(|w| (0.5 * (w[0] + w[1]), w[1] - w[0])).collect()
}

/// Coarse 𝒫₀, 𝒫₂, I₀ᴰ, I₁ᴰ and the identities Q₀ = I₀ᴰ + 𝒫₀, Q₂ = I₁ᴰ + 𝒫₂.
pub fn dirichlet_and_stieltjes(p: &PeriodicMatrixPotential, cfg: &QuasimomentumConfig) -> Result<DirichletReport> {
    let data = prepare(p, cfg)?;
    let traces = trace_integrals_with(&data, cfg)?;
    dirichlet_and_stieltjes_with(&data, &traces, cfg)
}

pub fn dirichlet_and_stieltjes_with(
    data: &SpectralData,
    traces: &TraceIntegrals,
    cfg: &QuasimomentumConfig,
) -> Result<DirichletReport> {
    let q = &data.potential;
    let ev = Evaluator::new(q, &cfg.spectrum.solver);
    let (mut p0, mut p2, mut b1) = (0.0, 0.0, 0.0);
    for piece in &data.pieces {
        let (m, h) = (0.5 * (piece.x_lo + piece.x_hi), 0.5 * (piece.x_hi - piece.x_lo));
        let count = 256;
        let xs: Vec<f64> = (0..=count).map(|k| m + h * (-PI / 2.0 + PI * k as f64 / count as f64).sin()).collect();
        let mut path = vec![0.0];
        path.extend(&xs);
        let us = ev.u_extrapolated(&path, cfg.eps)?;
        let vs: Vec<f64> = xs.iter().map(|&x| ev.v(x)).collect::<Result<_>>()?;
        for k in 0..count {
            let xm = 0.5 * (xs[k] + xs[k + 1]);
            let vm = 0.5 * (vs[k] + vs[k + 1]);
            let (u0, u1) = (us[k + 1], us[k + 2]);
            b1 -= xm * vm * (xs[k + 1] * (u1 - xs[k + 1]) - xs[k] * (u0 - xs[k]));
            if !piece.gap {
                p0 += vm * (u1 - u0);
                p2 += xm * xm * vm * (u1 - u0);
            }
        }
    }
    p0 *= 2.0 / PI;
    p2 *= 2.0 / PI;
    b1 *= 2.0 / PI;

    let g = &cfg.dirichlet;
    let nx = (g.x_max / g.dx).ceil() as usize;
    let dx = g.x_max / nx as f64;
    let xs: Vec<f64> = (0..=nx).map(|j| j as f64 * dx).collect();
    let rows = y_cells(g);
    let (mut i0, mut i1) = (0.0, 0.0);
    for &(y, dy) in &rows {
        let logs: Vec<Complex64> = xs.iter().map(|&x| ev.s(Complex64::new(x, y))).collect::<Result<_>>()?;
        let phases = unwrap_phase(
            |x| {
                let j = (x / dx).round() as usize;
                if (x - xs[j.min(nx)]).abs() < 1e-12 {
                    Ok(logs[j.min(nx)].im)
                } else {
                    Ok(ev.s(Complex64::new(x, y))?.im)
                }
            },
            &xs,
            PI / 2.0,
            ev.max_dt(),
        )?;
        let w: Vec<Complex64> = logs
            .iter()
            .zip(&phases)
            .map(|(s, ph)| Complex64::new(-(ph - phases[0]) / ev.n, s.re / ev.n))
            .collect();
        for j in 0..nx {
            let zc = Complex64::new(0.5 * (xs[j] + xs[j + 1]), y);
            let wp = (w[j + 1] - w[j]) / dx;
            let wz = 0.5 * (w[j] + w[j + 1]) - zc;
            let area = dx * dy;
            i0 += (wp - 1.0).norm_sqr() * area;
            i1 += (wz + zc * (wp - 1.0)).norm_sqr() * area;
        }
    }
    let r = g.x_max.min(g.y_max);
    let tail_i0d = traces.q0_target.powi(2) / (2.0 * r * r);
    let tail_i1d = traces.q2_target.powi(2) / r.powi(4);
    let i0d = 2.0 / PI * i0 + tail_i0d;
    let i1d = 2.0 / PI * i1 + tail_i1d;
    let resid = |q: f64, i: f64, p: f64| {
        let d = (q - i - p).abs();
        if q.abs() > 0.0 {
            d / q.abs()
        } else {
            d
        }
    };
    Ok(DirichletReport {
        p0,
        p2,
        i0d,
        i1d,
        tail_i0d,
        tail_i1d,
        i1d_boundary: b1,
        q0: traces.q0,
        q2: traces.q2,
        residual0: resid(traces.q0, i0d, p0),
        residual2: resid(traces.q2, i1d, p2),
        grid_columns: nx,
        grid_rows: rows.len(),
    })
}
