//! Periodic and anti-periodic eigenvalues, resonances and the band/gap structure
//! on the real λ axis.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lyapunov::{
    discriminant_from_set, distinct_representatives, lyapunov_from_sample, loop_permutation, track_branches_with,
    DegeneracyInfo, LyapunovBranchSet,
};
use crate::monodromy::{integrate_monodromy, MonodromySample, SolverConfig};
use crate::potential::{sorted_eigen, PeriodicMatrixPotential};
use crate::roots::{arg_change, brent, count_real_symmetric_zeros, golden_min};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrumConfig {
    pub solver: SolverConfig,
    /// Sample density per unit of ζ = sign(λ)√|λ| for band scans.
    pub grid_per_unit: f64,
    /// Sample density per unit of ζ for eigenvalue-only sweeps.
    pub eigen_grid_per_unit: f64,
    /// Verify eigenvalue counts with the argument principle.
    pub verify_counts: bool,
    pub max_refinements: usize,
    /// Integration density used on contours, where only the phase matters.
    pub contour_steps_per_oscillation: f64,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            grid_per_unit: 32.0,
            eigen_grid_per_unit: 8.0,
            verify_counts: true,
            max_refinements: 3,
            contour_steps_per_oscillation: 8.0,
        }
    }
}

impl SpectrumConfig {
    pub fn with_solver(solver: SolverConfig) -> Self {
        Self { solver, ..Default::default() }
    }

    fn contour_solver(&self) -> SolverConfig {
        SolverConfig {
            steps_per_oscillation: self.solver.steps_per_oscillation.min(self.contour_steps_per_oscillation),
            ..self.solver.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenKind {
    Periodic,
    Antiperiodic,
}

impl EigenKind {
    pub fn tau(self) -> f64 {
        match self {
            EigenKind::Periodic => 1.0,
            EigenKind::Antiperiodic => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            EigenKind::Periodic => "periodic",
            EigenKind::Antiperiodic => "antiperiodic",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "-")]
    Minus,
    #[serde(rename = "+")]
    Plus,
}

impl Side {
    pub fn symbol(self) -> &'static str {
        match self {
            Side::Minus => "-",
            Side::Plus => "+",
        }
    }
}

pub fn lambda_to_z(lambda: f64) -> Complex64 {
    if lambda >= 0.0 {
        Complex64::new(lambda.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-lambda).sqrt())
    }
}

fn zeta_of(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

fn lambda_of(zeta: f64) -> f64 {
    zeta * zeta.abs()
}

/// λ_m^{n,±}: eigenvalue number m with sign label of cluster n (z ≈ πn).
#[derive(Clone, Debug, Serialize)]
pub struct EigenvalueEntry {
    pub n: usize,
    pub m: usize,
    pub side: Side,
    pub lambda: f64,
    pub z: Complex64,
    /// Multiplicity of the underlying root; a double root appears as two entries.
    pub multiplicity: usize,
    /// Smallest singular value of M ∓ I in the balanced frame, relative to its norm.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowCount {
    pub lo: f64,
    pub hi: f64,
    pub contour: i64,
    pub found: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenvalueList {
    pub kind: EigenKind,
    pub entries: Vec<EigenvalueEntry>,
    pub windows: Vec<WindowCount>,
}

impl EigenvalueList {
    pub fn cluster(&self, n: usize) -> Vec<&EigenvalueEntry> {
        self.entries.iter().filter(|e| e.n == n).collect()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.lambda).collect()
    }

    pub fn cluster_indices(&self) -> Vec<usize> {
        let mut ns: Vec<usize> = self.entries.iter().map(|e| e.n).collect();
        ns.dedup();
        ns
    }
}

/// A real root of det(M ∓ I) with its periodic and anti-periodic multiplicities.
#[derive(Clone, Copy, Debug)]
struct RealRoot {
    lambda: f64,
    periodic: usize,
    antiperiodic: usize,
    residual_p: f64,
    residual_a: f64,
}

impl RealRoot {
    fn count(&self, kind: EigenKind) -> usize {
        match kind {
            EigenKind::Periodic => self.periodic,
            EigenKind::Antiperiodic => self.antiperiodic,
        }
    }
}

struct Probe {
    lambda: f64,
    a_eigs: Vec<f64>,
    n_neg: usize,
    lset: Option<LyapunovBranchSet>,
}

impl Probe {
    fn min_abs_rel(&self) -> f64 {
        let scale = self.a_eigs.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        self.a_eigs.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())) / scale
    }
}

/// JM + (JM)ᵀ in the balanced frame. Its kernel is ker(M − I) ⊕ ker(M + I).
fn symmetric_a(ms: &MonodromySample) -> DMatrix<f64> {
    let m = ms.balanced_m().map(|x| x.re);
    let n = ms.dim();
    let mut jm = DMatrix::zeros(2 * n, 2 * n);
    for c in 0..2 * n {
        for r in 0..n {
            jm[(r, c)] = m[(n + r, c)];
            jm[(n + r, c)] = -m[(r, c)];
        }
    }
    &jm + jm.transpose()
}

fn sorted_sym_eigs(a: DMatrix<f64>) -> Result<Vec<f64>> {
    let eig = SymmetricEigen::try_new(a, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::no_convergence("symmetric eigenproblem"))?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Lower bound for all periodic and anti-periodic eigenvalues.
pub fn spectral_lower_bound(p: &PeriodicMatrixPotential) -> Result<f64> {
    let mut lo = f64::INFINITY;
    for k in 0..256 {
        let v = p.evaluate(k as f64 / 256.0);
        let (ev, _) = sorted_eigen(&v)?;
        lo = lo.min(ev[0]);
    }
    let slack = p.sup_bound() / 8.0;
    Ok(lo - 1.0 - slack)
}

/// Closest-pair value, per-pair values and slopes, and which branches are
/// real, at one point of a resonance sweep.
#[derive(Clone)]
struct QNode {
    zeta: f64,
    q: f64,
    pairs: Vec<f64>,
    slopes: Vec<f64>,
    real: Vec<bool>,
}

struct Engine<'a> {
    p: &'a PeriodicMatrixPotential,
    cfg: &'a SpectrumConfig,
    info: DegeneracyInfo,
}

impl<'a> Engine<'a> {
    fn sample(&self, lambda: f64) -> Result<MonodromySample> {
        integrate_monodromy(self.p, lambda_to_z(lambda), &self.cfg.solver)
    }

    fn probe(&self, lambda: f64, with_l: bool) -> Result<Probe> {
        let ms = self.sample(lambda)?;
        let a_eigs = sorted_sym_eigs(symmetric_a(&ms))?;
        let n_neg = a_eigs.iter().filter(|&&x| x < 0.0).count();
        let lset = if with_l { Some(lyapunov_from_sample(&ms, &self.cfg.solver)?) } else { None };
        Ok(Probe { lambda, a_eigs, n_neg, lset })
    }

    fn probes(&self, a: f64, b: f64, density: f64, with_l: bool) -> Result<Vec<Probe>> {
        let (za, zb) = (zeta_of(a), zeta_of(b));
        let n = (((zb - za) * density).ceil() as usize).max(8);
        (0..=n)
            .map(|k| {
                let lambda = if k == n { b } else { lambda_of(za + (zb - za) * k as f64 / n as f64) };
                self.probe(lambda, with_l)
            })
            .collect()
    }

    fn classify_root(&self, lambda: f64, mult: usize) -> Result<RealRoot> {
        let ms = self.sample(lambda)?;
        let m = ms.balanced_m().map(|x| x.re);
        let scale = m.amax().max(1.0);
        let id = DMatrix::<f64>::identity(m.nrows(), m.nrows());
        let sv = |mat: DMatrix<f64>| -> Vec<f64> {
            let mut s: Vec<f64> = mat.singular_values().iter().copied().collect();
            s.sort_by(f64::total_cmp);
            s
        };
        let sp = sv(&m - &id);
        let sa = sv(&m + &id);
        let thr = 1e-6 * scale;
        let ps = sp.iter().filter(|&&x| x < thr).count();
        let as_ = sa.iter().filter(|&&x| x < thr).count();
        let (periodic, antiperiodic) = if ps > 0 && as_ == 0 {
            (mult, 0)
        } else if as_ > 0 && ps == 0 {
            (0, mult)
        } else if ps > 0 && as_ > 0 {
            let per = ps.min(mult);
            (per, mult - per)
        } else if sp[0] <= sa[0] {
            (mult, 0)
        } else {
            (0, mult)
        };
        Ok(RealRoot { lambda, periodic, antiperiodic, residual_p: sp[0] / scale, residual_a: sa[0] / scale })
    }

    fn isolate(&self, l: &Probe, r: &Probe, out: &mut Vec<RealRoot>) -> Result<()> {
        let dn = r.n_neg as i64 - l.n_neg as i64;
        if dn == 0 {
            return Ok(());
        }
        let width = r.lambda - l.lambda;
        let scale = 1.0 + l.lambda.abs().max(r.lambda.abs());
        if dn.abs() == 1 {
            let idx = l.n_neg.min(r.n_neg);
            let root = brent(
                |lam| {
                    let ms = self.sample(lam)?;
                    Ok(sorted_sym_eigs(symmetric_a(&ms))?[idx])
                },
                l.lambda,
                r.lambda,
                4.0 * f64::EPSILON * scale,
                200,
            )?;
            out.push(self.classify_root(root, 1)?);
            return Ok(());
        }
        if width < 1e-13 * scale {
            out.push(self.classify_root(0.5 * (l.lambda + r.lambda), dn.unsigned_abs() as usize)?);
            return Ok(());
        }
        let mid = self.probe(0.5 * (l.lambda + r.lambda), false)?;
        self.isolate(l, &mid, out)?;
        self.isolate(&mid, r, out)
    }

    /// Eigenvalue roots from sign changes of the eigenvalues of JM + (JM)ᵀ; with
    /// `touching` also from near-zero local minima that do not change the count.
    fn eigen_roots_from(&self, probes: &[Probe], touching: bool) -> Result<Vec<RealRoot>> {
        let mut out = Vec::new();
        for w in probes.windows(2) {
            self.isolate(&w[0], &w[1], &mut out)?;
        }
        if touching {
            for k in 1..probes.len().saturating_sub(1) {
                let (a, b, c) = (&probes[k - 1], &probes[k], &probes[k + 1]);
                let mb = b.min_abs_rel();
                if a.n_neg != b.n_neg || b.n_neg != c.n_neg || mb > 1e-2 || mb > a.min_abs_rel() || mb > c.min_abs_rel() {
                    continue;
                }
                let (za, zc) = (zeta_of(a.lambda), zeta_of(c.lambda));
                let (zmin, fmin) = golden_min(
                    |zeta| {
                        let ms = self.sample(lambda_of(zeta))?;
                        let e = sorted_sym_eigs(symmetric_a(&ms))?;
                        let scale = e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                        Ok(e.iter().fold(f64::INFINITY, |m, x| m.min(x.abs())) / scale)
                    },
                    za,
                    zc,
                    1e-14 * (1.0 + za.abs().max(zc.abs())),
                )?;
                if fmin < 1e-10 {
                    let lam = lambda_of(zmin);
                    let ms = self.sample(lam)?;
                    let e = sorted_sym_eigs(symmetric_a(&ms))?;
                    let scale = e.iter().fold(1.0f64, |m, x| m.max(x.abs()));
                    let mult = e.iter().filter(|x| x.abs() < 1e-7 * scale).count().max(1);
                    out.push(self.classify_root(lam, mult)?);
                }
            }
        }
        Ok(merge_roots(out))
    }

    fn closest_pair_q(&self, set: &LyapunovBranchSet) -> f64 {
        let reps = self.reps(set);
        // Magnitude from the closest pair, sign from the discriminant, so
        // switching between pairs never fakes a sign change.
        let mut best = f64::INFINITY;
        let mut rho = Complex64::new(1.0, 0.0);
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                let d = reps[i] - reps[j];
                best = best.min(d.norm_sqr());
                rho *= d * d / d.norm_sqr().max(f64::MIN_POSITIVE);
            }
        }
        if best == 0.0 {
            0.0
        } else {
            best.copysign(rho.re)
        }
    }

    fn q_at(&self, zeta: f64) -> Result<f64> {
        let ms = self.sample(lambda_of(zeta))?;
        Ok(self.closest_pair_q(&lyapunov_from_sample(&ms, &self.cfg.solver)?))
    }

    fn reps(&self, set: &LyapunovBranchSet) -> Vec<Complex64> {
        if self.info.is_degenerate() {
            distinct_representatives(&set.deltas, self.info.distinct)
        } else {
            set.deltas.clone()
        }
    }

    /// Re (Δ_i − Δ_j)² for every pair, in sorted-branch order: positive for
    /// two real branches, negative for a conjugate pair.
    fn pair_values(&self, set: &LyapunovBranchSet) -> Vec<f64> {
        let reps = self.reps(set);
        let mut out = Vec::new();
        for i in 0..reps.len() {
            for j in i + 1..reps.len() {
                let d = reps[i] - reps[j];
                out.push((d * d).re);
            }
        }
        out
    }

    fn pair_value_at(&self, zeta: f64, r: usize) -> Result<f64> {
        Ok(self.pair_values(&self.lset_at(zeta)?)[r])
    }

    fn lset_at(&self, zeta: f64) -> Result<LyapunovBranchSet> {
        lyapunov_from_sample(&self.sample(lambda_of(zeta))?, &self.cfg.solver)
    }

    fn q_node(&self, zeta: f64, set: &LyapunovBranchSet) -> Result<QNode> {
        let pairs = self.pair_values(set);
        let dz = 1e-5 * (1.0 + zeta.abs());
        let shifted = self.pair_values(&self.lset_at(zeta + dz)?);
        let slopes = shifted.iter().zip(&pairs).map(|(b, a)| (b - a) / dz).collect();
        let real = self.reps(set).iter().map(|d| d.im.abs() <= 1e-12 * (1.0 + d.re.abs())).collect();
        Ok(QNode { zeta, q: self.closest_pair_q(set), pairs, slopes, real })
    }

    /// Bisects toward every change of the real/complex pattern so that each
    /// final interval holds at most one such event.
    fn refine_nodes(&self, a: &QNode, b: QNode, depth: usize, out: &mut Vec<QNode>) -> Result<()> {
        let changed = a.real != b.real || a.q.signum() != b.q.signum();
        if depth == 0 || !changed || b.zeta - a.zeta < 1e-9 * (1.0 + b.zeta.abs()) {
            out.push(b);
            return Ok(());
        }
        let zm = 0.5 * (a.zeta + b.zeta);
        let mid = self.q_node(zm, &self.lset_at(zm)?)?;
        self.refine_nodes(a, mid.clone(), depth - 1, out)?;
        self.refine_nodes(&mid, b, depth - 1, out)
    }

    /// Real zeros of ρ (in λ) from a probe sweep that carries Lyapunov values.
    /// Besides sign changes of q, each pair whose endpoint slopes point to an
    /// interior extremum is searched for a hidden pair of roots.
    fn resonance_roots_from(&self, probes: &[Probe]) -> Result<Vec<ResonanceRoot>> {
        if self.info.distinct < 2 {
            return Ok(Vec::new());
        }
        let mut nodes: Vec<QNode> = Vec::new();
        for p in probes {
            let node = self.q_node(zeta_of(p.lambda), p.lset.as_ref().unwrap())?;
            match nodes.last().cloned() {
                Some(prev) => self.refine_nodes(&prev, node, 10, &mut nodes)?,
                None => nodes.push(node),
            }
        }
        let mut out: Vec<ResonanceRoot> = Vec::new();
        let xtol = |z: f64| 4.0 * f64::EPSILON * (1.0 + z.abs());
        for w in nodes.windows(2) {
            let (na, nb) = (&w[0], &w[1]);
            let (za, zb) = (na.zeta, nb.zeta);
            if na.q == 0.0 {
                out.push(ResonanceRoot { lambda: lambda_of(za), multiplicity: 1 });
                continue;
            }
            let mut pts = vec![(za, na.q), (zb, nb.q)];
            for r in 0..na.pairs.len() {
                let s = na.pairs[r].signum();
                if nb.pairs[r].signum() != s || !(s * na.slopes[r] < 0.0 && s * nb.slopes[r] > 0.0) {
                    continue;
                }
                let tol = 1e-13 * (1.0 + zb.abs());
                let (zext, m) = golden_min(|zeta| Ok(s * self.pair_value_at(zeta, r)?), za, zb, tol)?;
                if m >= 0.0 && m < 1e-10 {
                    out.push(ResonanceRoot { lambda: lambda_of(zext), multiplicity: 2 });
                } else if m < 0.0 {
                    pts.push((zext, self.q_at(zext)?));
                }
            }
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            for p in pts.windows(2) {
                let ((z0, q0), (z1, q1)) = (p[0], p[1]);
                if q1 != 0.0 && q0 != 0.0 && q0.signum() != q1.signum() {
                    let z = brent(|zeta| self.q_at(zeta), z0, z1, xtol(z0), 200)?;
                    out.push(ResonanceRoot { lambda: lambda_of(z), multiplicity: 1 });
                }
            }
        }
        out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        out.dedup_by(|b, a| (a.lambda - b.lambda).abs() < 1e-12 * (1.0 + a.lambda.abs()));
        Ok(out)
    }

    fn det_shift(&self, lambda: Complex64, tau: f64, solver: &SolverConfig) -> Result<Complex64> {
        let ms = integrate_monodromy(self.p, lambda.sqrt(), solver)?;
        let mut m = ms.balanced_m();
        for i in 0..m.nrows() {
            m[(i, i)] -= tau;
        }
        Ok(m.determinant())
    }

    fn contour_count(&self, kind: EigenKind, a: f64, b: f64) -> Result<i64> {
        let solver = self.cfg.contour_solver();
        let height = (0.25 * (b - a)).max(0.5);
        count_real_symmetric_zeros(|l| self.det_shift(l, kind.tau(), &solver), a, b, height)
    }
}

fn merge_roots(mut v: Vec<RealRoot>) -> Vec<RealRoot> {
    v.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    let mut out: Vec<RealRoot> = Vec::with_capacity(v.len());
    for r in v {
        if let Some(last) = out.last_mut() {
            if (r.lambda - last.lambda).abs() < 1e-12 * (1.0 + r.lambda.abs()) {
                last.periodic += r.periodic;
                last.antiperiodic += r.antiperiodic;
                last.residual_p = last.residual_p.min(r.residual_p);
                last.residual_a = last.residual_a.min(r.residual_a);
                continue;
            }
        }
        out.push(r);
    }
    out
}

#[derive(Clone, Copy, Debug)]
struct ResonanceRoot {
    lambda: f64,
    multiplicity: usize,
}

/// Window edges: `lo` followed by the values (kπ)² above it with k of the given parity.
fn window_edges(lo: f64, hi: f64, kind: EigenKind) -> Vec<f64> {
    // Periodic clusters sit at even multiples of π, so their windows end at odd ones.
    let first = match kind {
        EigenKind::Periodic => 1,
        EigenKind::Antiperiodic => 2,
    };
    let mut edges = vec![lo];
    let mut k = first;
    loop {
        let e = (k as f64 * PI).powi(2);
        if e > lo {
            if e >= hi {
                break;
            }
            edges.push(e);
        }
        k += 2;
    }
    edges.push(hi);
    edges
}

/// Incremental eigenvalue search with count verification.
struct EigenSearch<'a> {
    engine: &'a Engine<'a>,
    roots: Vec<RealRoot>,
    lo: f64,
    covered: f64,
    density: f64,
}

impl<'a> EigenSearch<'a> {
    fn new(engine: &'a Engine<'a>, lo: f64) -> Self {
        Self { engine, roots: Vec::new(), lo, covered: lo, density: engine.cfg.eigen_grid_per_unit }
    }

    fn count(&self, kind: EigenKind) -> usize {
        self.roots.iter().map(|r| r.count(kind)).sum()
    }

    fn extend_to(&mut self, hi: f64) -> Result<()> {
        while self.covered < hi {
            let z0 = zeta_of(self.covered);
            let top = lambda_of(z0 + 2.0 * PI).min(hi.max(self.covered + 1.0));
            let probes = self.engine.probes(self.covered, top, self.density, false)?;
            let found = self.engine.eigen_roots_from(&probes, false)?;
            self.roots.extend(found);
            self.roots = merge_roots(std::mem::take(&mut self.roots));
            self.covered = top;
        }
        Ok(())
    }

    fn resweep(&mut self, a: f64, b: f64, density: f64) -> Result<()> {
        let probes = self.engine.probes(a, b, density, false)?;
        let found = self.engine.eigen_roots_from(&probes, true)?;
        self.roots.retain(|r| r.lambda < a || r.lambda > b);
        self.roots.extend(found);
        self.roots = merge_roots(std::mem::take(&mut self.roots));
        Ok(())
    }

    fn nudge(&self, edge: f64, width: f64, kind: EigenKind) -> f64 {
        let delta = 1e-4 * width;
        match self
            .roots
            .iter()
            .filter(|r| r.count(kind) > 0)
            .map(|r| r.lambda)
            .find(|&r| (r - edge).abs() < delta)
        {
            Some(r) => {
                let dir = if edge >= r { 1.0 } else { -1.0 };
                r + dir * 2.0 * delta
            }
            None => edge,
        }
    }

    fn found_in(&self, kind: EigenKind, a: f64, b: f64) -> i64 {
        self.roots.iter().filter(|r| r.lambda > a && r.lambda < b).map(|r| r.count(kind) as i64).sum()
    }

    /// Verifies counts on all windows of `kind` up to `hi` (≤ covered).
    fn verify(&mut self, kind: EigenKind, hi: f64) -> Result<Vec<WindowCount>> {
        let edges = window_edges(self.lo, hi, kind);
        let mut out = Vec::new();
        for w in edges.windows(2) {
            let (mut a, mut b) = (w[0], w[1]);
            let mut density = self.density;
            let mut attempt = 0;
            loop {
                let width = b - a;
                if a > self.lo {
                    a = self.nudge(a, width, kind);
                }
                b = self.nudge(b, width, kind);
                let contour = self.engine.contour_count(kind, a, b)?;
                let found = self.found_in(kind, a, b);
                if contour == found {
                    out.push(WindowCount { lo: a, hi: b, contour, found });
                    break;
                }
                if attempt >= self.engine.cfg.max_refinements {
                    return Err(Error::RootCount { kind: kind.name(), lo: a, hi: b, expected: contour, found });
                }
                attempt += 1;
                density *= 4.0;
                self.resweep(a, b, density)?;
            }
        }
        Ok(out)
    }

    fn list(&self, kind: EigenKind, needed: usize, windows: Vec<WindowCount>) -> EigenvalueList {
        let n_dim = self.engine.p.dim();
        let mut flat: Vec<(f64, usize, f64)> = Vec::new();
        for r in &self.roots {
            let c = r.count(kind);
            let res = match kind {
                EigenKind::Periodic => r.residual_p,
                EigenKind::Antiperiodic => r.residual_a,
            };
            for _ in 0..c {
                flat.push((r.lambda, c, res));
            }
        }
        flat.truncate(needed);
        let entries = flat
            .into_iter()
            .enumerate()
            .map(|(i, (lambda, multiplicity, residual))| {
                let (n, m, side) = chain_label(kind, i, n_dim);
                EigenvalueEntry { n, m, side, lambda, z: lambda_to_z(lambda), multiplicity, residual }
            })
            .collect();
        EigenvalueList { kind, entries, windows }
    }
}

/// Position `i` in the sorted sequence of one kind mapped to (n, m, ±).
fn chain_label(kind: EigenKind, i: usize, n_dim: usize) -> (usize, usize, Side) {
    match kind {
        EigenKind::Periodic if i < n_dim => (0, i + 1, Side::Plus),
        EigenKind::Periodic => {
            let j = i - n_dim;
            let cluster = j / (2 * n_dim);
            let r = j % (2 * n_dim);
            (2 * (cluster + 1), r / 2 + 1, if r % 2 == 0 { Side::Minus } else { Side::Plus })
        }
        EigenKind::Antiperiodic => {
            let cluster = i / (2 * n_dim);
            let r = i % (2 * n_dim);
            (2 * cluster + 1, r / 2 + 1, if r % 2 == 0 { Side::Minus } else { Side::Plus })
        }
    }
}

fn needed_count(kind: EigenKind, n_max: usize, n_dim: usize) -> usize {
    match kind {
        EigenKind::Periodic => n_dim * (2 * n_max + 1),
        EigenKind::Antiperiodic => 2 * n_dim * (n_max + 1),
    }
}

fn make_engine<'a>(p: &'a PeriodicMatrixPotential, cfg: &'a SpectrumConfig, with_info: bool) -> Result<Engine<'a>> {
    cfg.solver.validate()?;
    let info = if with_info {
        DegeneracyInfo::detect(p, &cfg.solver)?
    } else {
        DegeneracyInfo { dim: p.dim(), distinct: p.dim() }
    };
    Ok(Engine { p, cfg, info })
}

/// Periodic and anti-periodic eigenvalues: clusters k = 0..=n_max of each kind,
/// i.e. the periodic clusters near (2πk)² and the anti-periodic ones near ((2k+1)π)².
pub fn eigenvalues(
    p: &PeriodicMatrixPotential,
    n_max: usize,
    cfg: &SpectrumConfig,
) -> Result<(EigenvalueList, EigenvalueList)> {
    let engine = make_engine(p, cfg, false)?;
    let lo = spectral_lower_bound(p)?;
    let mut search = EigenSearch::new(&engine, lo);
    let n = p.dim();
    let need_p = needed_count(EigenKind::Periodic, n_max, n);
    let need_a = needed_count(EigenKind::Antiperiodic, n_max, n);
    let mut hi = ((2 * n_max + 2) as f64 * PI).powi(2);
    loop {
        search.extend_to(hi)?;
        if search.count(EigenKind::Periodic) >= need_p && search.count(EigenKind::Antiperiodic) >= need_a {
            break;
        }
        hi = lambda_of(zeta_of(hi) + 2.0 * PI);
    }
    let (wp, wa) = if cfg.verify_counts {
        let top_p = window_top(&search, EigenKind::Periodic, need_p);
        let top_a = window_top(&search, EigenKind::Antiperiodic, need_a);
        search.extend_to(top_p.max(top_a))?;
        let wp = search.verify(EigenKind::Periodic, top_p)?;
        let wa = search.verify(EigenKind::Antiperiodic, top_a)?;
        (wp, wa)
    } else {
        (Vec::new(), Vec::new())
    };
    Ok((
        search.list(EigenKind::Periodic, need_p, wp),
        search.list(EigenKind::Antiperiodic, need_a, wa),
    ))
}

/// Upper edge of the verification window holding the `needed`-th root of `kind`.
fn window_top(search: &EigenSearch, kind: EigenKind, needed: usize) -> f64 {
    let mut acc = 0;
    let mut last = search.lo;
    for r in &search.roots {
        acc += r.count(kind);
        last = r.lambda;
        if acc >= needed {
            break;
        }
    }
    let parity = match kind {
        EigenKind::Periodic => 1,
        EigenKind::Antiperiodic => 0,
    };
    let mut k = parity;
    loop {
        let e = (k as f64 * PI).powi(2);
        if e > last {
            return e;
        }
        k += 2;
    }
}

pub fn periodic_eigenvalues(p: &PeriodicMatrixPotential, n_max: usize, cfg: &SpectrumConfig) -> Result<EigenvalueList> {
    Ok(eigenvalues(p, n_max, cfg)?.0)
}

pub fn antiperiodic_eigenvalues(p: &PeriodicMatrixPotential, n_max: usize, cfg: &SpectrumConfig) -> Result<EigenvalueList> {
    Ok(eigenvalues(p, n_max, cfg)?.1)
}

/// Sorted eigenvalues ζ of [[V⁰ + V̂^{cn}, V̂^{sn}], [V̂^{sn}, V⁰ − V̂^{cn}]].
pub fn asymptotic_eigenvalue_predictor(p: &PeriodicMatrixPotential, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("the predictor needs n ≥ 1".into()));
    }
    let d = p.dim();
    let (c, s) = p.fourier(n);
    let mut b = DMatrix::zeros(2 * d, 2 * d);
    b.view_mut((0, 0), (d, d)).copy_from(&(p.mean() + &c));
    b.view_mut((0, d), (d, d)).copy_from(&s);
    b.view_mut((d, 0), (d, d)).copy_from(&s);
    b.view_mut((d, d), (d, d)).copy_from(&(p.mean() - &c));
    Ok(sorted_eigen(&b)?.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResonanceSide {
    Lower,
    Upper,
    Double,
}

#[derive(Clone, Debug, Serialize)]
pub struct Resonance {
    pub n: usize,
    /// 1-based branch pair (j, j′) from the asymptotic predictor, when V⁰ is diagonal with distinct entries.
    pub pair: Option<(usize, usize)>,
    pub side: ResonanceSide,
    pub z: f64,
    pub lambda: f64,
    pub multiplicity: usize,
    /// The Lyapunov values at z contain a coincident pair.
    pub collision_confirmed: bool,
    /// A small loop around an open-gap endpoint swaps exactly two branch labels.
    pub square_root_confirmed: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceWindow {
    pub n: usize,
    pub contour: i64,
    pub found: i64,
    pub expected: i64,
    pub count_mismatch: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ResonanceReport {
    pub resonances: Vec<Resonance>,
    pub windows: Vec<ResonanceWindow>,
    pub degenerate: bool,
}

/// Real zeros of ρ in |z − πn| < π/2 for each n in the range.
pub fn resonances(
    p: &PeriodicMatrixPotential,
    n_range: std::ops::RangeInclusive<usize>,
    cfg: &SpectrumConfig,
) -> Result<ResonanceReport> {
    let engine = make_engine(p, cfg, true)?;
    let k = engine.info.distinct as i64;
    let expected = k * (k - 1);
    let mut report = ResonanceReport { resonances: Vec::new(), windows: Vec::new(), degenerate: engine.info.is_degenerate() };
    if k < 2 {
        return Ok(report);
    }
    let labels_ok = p.mean_is_diagonal() && {
        let d = p.mean().diagonal();
        (0..d.len()).all(|i| (i + 1..d.len()).all(|j| (d[i] - d[j]).abs() > 1e-9))
    };
    for n in n_range {
        if n == 0 {
            continue;
        }
        let zc = PI * n as f64;
        let (za, zb) = (zc - 0.5 * PI, zc + 0.5 * PI);
        let probes = engine.probes(za * za, zb * zb, cfg.grid_per_unit, true)?;
        let roots = engine.resonance_roots_from(&probes)?;
        let found: i64 = roots.iter().map(|r| r.multiplicity as i64).sum();
        let contour = rho_disc_count(&engine, zc, 0.5 * PI)?;
        report.windows.push(ResonanceWindow {
            n,
            contour,
            found,
            expected,
            count_mismatch: contour != found || found != expected,
        });
        let mut entries = label_resonances(p, n, &roots, labels_ok);
        for e in entries.iter_mut() {
            let set = lyapunov_from_sample(&engine.sample(e.lambda)?, &cfg.solver)?;
            let reps = distinct_representatives(&set.deltas, engine.info.distinct);
            let gap = min_gap(&reps);
            e.collision_confirmed = gap < 1e-4 * (1.0 + reps.iter().map(|d| d.norm()).fold(0.0, f64::max));
        }
        attach_loop_tests(&engine, &mut entries)?;
        report.resonances.extend(entries);
    }
    Ok(report)
}

fn min_gap(v: &[Complex64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            g = g.min((v[i] - v[j]).norm());
        }
    }
    g
}

fn rho_disc_count(engine: &Engine, center: f64, radius: f64) -> Result<i64> {
    let solver = engine.cfg.contour_solver();
    let segments = 24;
    let corners: Vec<Complex64> = (0..=segments)
        .map(|k| Complex64::new(center, 0.0) + Complex64::from_polar(radius, PI * k as f64 / segments as f64))
        .collect();
    let theta = arg_change(
        |z| {
            let ms = integrate_monodromy(engine.p, z, &solver)?;
            let set = lyapunov_from_sample(&ms, &solver)?;
            Ok(discriminant_from_set(&set, &engine.info).rho_distinct)
        },
        &corners,
        4,
        std::f64::consts::FRAC_PI_4,
    )?;
    Ok((theta / PI).round() as i64)
}

fn label_resonances(p: &PeriodicMatrixPotential, n: usize, roots: &[ResonanceRoot], labels_ok: bool) -> Vec<Resonance> {
    // Group into gaps: a double zero is its own group, simple zeros pair up in order.
    let mut groups: Vec<Vec<ResonanceRoot>> = Vec::new();
    let mut pending: Option<ResonanceRoot> = None;
    for &r in roots {
        if r.multiplicity >= 2 {
            groups.push(vec![r]);
        } else if let Some(first) = pending.take() {
            groups.push(vec![first, r]);
        } else {
            pending = Some(r);
        }
    }
    if let Some(r) = pending {
        groups.push(vec![r]);
    }
    let predictors: Vec<((usize, usize), f64)> = if labels_ok {
        let d = p.mean().diagonal();
        let mut v = Vec::new();
        for i in 0..d.len() {
            for j in i + 1..d.len() {
                v.push(((i + 1, j + 1), PI * n as f64 + (d[i] + d[j]) / (4.0 * PI * n as f64)));
            }
        }
        v
    } else {
        Vec::new()
    };
    let mut used = vec![false; predictors.len()];
    let mut out = Vec::new();
    for g in groups {
        let center = g.iter().map(|r| zeta_of(r.lambda)).sum::<f64>() / g.len() as f64;
        let pair = predictors
            .iter()
            .enumerate()
            .filter(|(i, _)| !used[*i])
            .min_by(|a, b| (a.1 .1 - center).abs().total_cmp(&(b.1 .1 - center).abs()))
            .map(|(i, (pair, _))| {
                used[i] = true;
                *pair
            });
        for (idx, r) in g.iter().enumerate() {
            let side = if r.multiplicity >= 2 {
                ResonanceSide::Double
            } else if g.len() == 2 && idx == 1 {
                ResonanceSide::Upper
            } else {
                ResonanceSide::Lower
            };
            out.push(Resonance {
                n,
                pair,
                side,
                z: zeta_of(r.lambda),
                lambda: r.lambda,
                multiplicity: r.multiplicity,
                collision_confirmed: false,
                square_root_confirmed: None,
            });
        }
    }
    out
}

fn attach_loop_tests(engine: &Engine, entries: &mut [Resonance]) -> Result<()> {
    let zs: Vec<f64> = entries.iter().map(|e| e.z).collect();
    for i in 0..entries.len() {
        if entries[i].side == ResonanceSide::Double {
            continue;
        }
        let nearest = zs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, &z)| (z - zs[i]).abs())
            .fold(f64::INFINITY, f64::min);
        if !nearest.is_finite() {
            continue;
        }
        let radius = nearest / 3.0;
        entries[i].square_root_confirmed = Some(loop_swaps_two(engine, zs[i], radius)?);
    }
    Ok(())
}

fn loop_swaps_two(engine: &Engine, center: f64, radius: f64) -> Result<bool> {
    let path: Vec<Complex64> = (0..=96)
        .map(|k| Complex64::new(center, 0.0) + Complex64::from_polar(radius, PI / 2.0 + 2.0 * PI * k as f64 / 96.0))
        .collect();
    let tracked = track_branches_with(engine.p, &path, &engine.cfg.solver, &engine.info)?;
    let perm = loop_permutation(&tracked).unwrap_or_default();
    let moved = perm.iter().enumerate().filter(|(i, &j)| *i != j).count();
    Ok(moved == 2)
}

/// Loop test around a point on the real z axis: true when exactly two labels swap.
pub fn loop_test(p: &PeriodicMatrixPotential, center: f64, radius: f64, cfg: &SpectrumConfig) -> Result<bool> {
    let engine = make_engine(p, cfg, true)?;
    loop_swaps_two(&engine, center, radius)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EndpointClass {
    Periodic,
    Antiperiodic,
    Resonance,
    Unclassified,
}

impl EndpointClass {
    pub fn name(self) -> &'static str {
        match self {
            EndpointClass::Periodic => "periodic",
            EndpointClass::Antiperiodic => "antiperiodic",
            EndpointClass::Resonance => "resonance",
            EndpointClass::Unclassified => "unclassified",
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    /// 2·#{m : Δ_m ∈ [−1, 1]}.
    pub multiplicity: usize,
    pub lo_class: Option<EndpointClass>,
    /// None when the band is cut off at λ_max.
    pub hi_class: Option<EndpointClass>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Gap {
    pub lo: f64,
    pub hi: f64,
    pub z_lo: f64,
    pub z_hi: f64,
    pub lo_class: EndpointClass,
    pub hi_class: Option<EndpointClass>,
}

impl Gap {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn z_length(&self) -> f64 {
        self.z_hi - self.z_lo
    }

    /// Gap with hi at λ_max may extend further.
    pub fn truncated(&self) -> bool {
        self.hi_class.is_none()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Breakpoint {
    pub lambda: f64,
    pub class: EndpointClass,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BandStructure {
    pub bands: Vec<Band>,
    pub gaps: Vec<Gap>,
    pub lambda0_plus: f64,
    pub lambda_max: f64,
    pub breakpoints: Vec<Breakpoint>,
    pub unclassified: usize,
    pub windows: Vec<(EigenKind, WindowCount)>,
}

impl BandStructure {
    /// 2·#{m : Δ_m(√λ) ∈ [−1, 1]} from the assembled bands.
    pub fn multiplicity_at(&self, lambda: f64) -> usize {
        self.bands.iter().find(|b| lambda > b.lo && lambda < b.hi).map_or(0, |b| b.multiplicity)
    }

    /// Gaps that end inside the scanned range.
    pub fn closed_gaps(&self) -> impl Iterator<Item = &Gap> {
        self.gaps.iter().filter(|g| !g.truncated())
    }
}

fn band_count(set: &LyapunovBranchSet) -> usize {
    set.count_in_band(1e-9)
}

fn classify_point(engine: &Engine, lambda: f64) -> Result<EndpointClass> {
    let set = lyapunov_from_sample(&engine.sample(lambda)?, &engine.cfg.solver)?;
    let near = |t: f64| set.deltas.iter().map(|d| (d - t).norm()).fold(f64::INFINITY, f64::min);
    if near(1.0) < 1e-6 {
        return Ok(EndpointClass::Periodic);
    }
    if near(-1.0) < 1e-6 {
        return Ok(EndpointClass::Antiperiodic);
    }
    let reps = distinct_representatives(&set.deltas, engine.info.distinct);
    if min_gap(&reps) < 1e-4 {
        return Ok(EndpointClass::Resonance);
    }
    Ok(EndpointClass::Unclassified)
}

fn verify_class(engine: &Engine, lambda: f64, class: EndpointClass) -> Result<bool> {
    let set = lyapunov_from_sample(&engine.sample(lambda)?, &engine.cfg.solver)?;
    let near = |t: f64| set.deltas.iter().map(|d| (d - t).norm()).fold(f64::INFINITY, f64::min);
    Ok(match class {
        EndpointClass::Periodic => near(1.0) < 1e-6,
        EndpointClass::Antiperiodic => near(-1.0) < 1e-6,
        EndpointClass::Resonance => min_gap(&distinct_representatives(&set.deltas, engine.info.distinct)) < 1e-4,
        EndpointClass::Unclassified => false,
    })
}

/// Sweeps λ ∈ [λ_lo, λ_max] and assembles bands and gaps with classified endpoints.
pub fn scan_bands(p: &PeriodicMatrixPotential, lambda_max: f64, cfg: &SpectrumConfig) -> Result<BandStructure> {
    let engine = make_engine(p, cfg, true)?;
    let lo = spectral_lower_bound(p)?;
    if !(lambda_max > lo) {
        return Err(Error::InvalidArgument(format!("lambda_max {lambda_max} is below the spectrum bound {lo}")));
    }
    let probes = engine.probes(lo, lambda_max, cfg.grid_per_unit, true)?;
    let mut search = EigenSearch::new(&engine, lo);
    search.density = cfg.grid_per_unit;
    search.roots = engine.eigen_roots_from(&probes, false)?;
    search.covered = lambda_max;
    let mut windows = Vec::new();
    if cfg.verify_counts {
        for kind in [EigenKind::Periodic, EigenKind::Antiperiodic] {
            windows.extend(search.verify(kind, lambda_max)?.into_iter().map(|w| (kind, w)));
        }
    }
    let res = engine.resonance_roots_from(&probes)?;

    let mut bps: Vec<Breakpoint> = Vec::new();
    for r in &search.roots {
        if r.periodic > 0 {
            bps.push(Breakpoint { lambda: r.lambda, class: EndpointClass::Periodic, multiplicity: r.periodic });
        }
        if r.antiperiodic > 0 {
            bps.push(Breakpoint { lambda: r.lambda, class: EndpointClass::Antiperiodic, multiplicity: r.antiperiodic });
        }
    }
    for r in &res {
        bps.push(Breakpoint { lambda: r.lambda, class: EndpointClass::Resonance, multiplicity: r.multiplicity });
    }
    bps.retain(|b| b.lambda > lo && b.lambda < lambda_max);
    bps.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));

    let grid: Vec<(f64, usize)> = probes.iter().map(|p| (p.lambda, band_count(p.lset.as_ref().unwrap()))).collect();
    let mut extra = 0;
    let segments = loop {
        let mut edges: Vec<f64> = vec![lo];
        for b in &bps {
            if b.lambda - edges.last().unwrap() > 1e-12 * (1.0 + b.lambda.abs()) {
                edges.push(b.lambda);
            }
        }
        edges.push(lambda_max);
        let mut segs: Vec<(f64, f64, usize)> = Vec::new();
        let mut missing: Option<(f64, usize, f64, usize)> = None;
        for w in edges.windows(2) {
            let (a, b) = (w[0], w[1]);
            let mid = 0.5 * (a + b);
            let k = band_count(&lyapunov_from_sample(&engine.sample(mid)?, &cfg.solver)?);
            let margin = 1e-7 * (1.0 + b.abs()) + 1e-6 * (b - a);
            if missing.is_none() {
                if let Some(&(lg, kg)) = grid.iter().find(|(l, kg)| *l > a + margin && *l < b - margin && *kg != k) {
                    missing = Some((lg, kg, mid, k));
                }
            }
            segs.push((a, b, k));
        }
        match missing {
            Some((l1, k1, l2, k2)) if extra < 64 => {
                let (mut x0, mut x1) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
                let (k0, _) = if l1 < l2 { (k1, k2) } else { (k2, k1) };
                while x1 - x0 > 1e-13 * (1.0 + x1.abs()) {
                    let xm = 0.5 * (x0 + x1);
                    let km = band_count(&lyapunov_from_sample(&engine.sample(xm)?, &cfg.solver)?);
                    if km == k0 {
                        x0 = xm;
                    } else {
                        x1 = xm;
                    }
                }
                let x = 0.5 * (x0 + x1);
                let class = classify_point(&engine, x)?;
                bps.push(Breakpoint { lambda: x, class, multiplicity: 1 });
                bps.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
                extra += 1;
            }
            _ => break segs,
        }
    };

    // Merge neighbouring segments of equal count.
    let mut runs: Vec<(f64, f64, usize)> = Vec::new();
    for s in segments {
        match runs.last_mut() {
            Some(last) if last.2 == s.2 => last.1 = s.1,
            _ => runs.push(s),
        }
    }
    let class_at = |lambda: f64| -> EndpointClass {
        let cands: Vec<&Breakpoint> =
            bps.iter().filter(|b| (b.lambda - lambda).abs() <= 1e-12 * (1.0 + lambda.abs())).collect();
        cands.first().map_or(EndpointClass::Unclassified, |b| b.class)
    };
    let mut verified: Vec<(f64, EndpointClass)> = Vec::new();
    let mut checked_class = |lambda: f64| -> Result<EndpointClass> {
        if let Some(&(_, c)) = verified.iter().find(|(l, _)| *l == lambda) {
            return Ok(c);
        }
        let cands: Vec<EndpointClass> = bps
            .iter()
            .filter(|b| (b.lambda - lambda).abs() <= 1e-12 * (1.0 + lambda.abs()))
            .map(|b| b.class)
            .collect();
        let mut class = EndpointClass::Unclassified;
        for c in cands.iter().copied().chain(std::iter::once(class_at(lambda))) {
            if c != EndpointClass::Unclassified && verify_class(&engine, lambda, c)? {
                class = c;
                break;
            }
        }
        verified.push((lambda, class));
        Ok(class)
    };

    let mut bands = Vec::new();
    let mut gaps = Vec::new();
    let first_band = runs.iter().position(|r| r.2 > 0);
    let lambda0_plus = first_band.map_or(f64::NAN, |i| runs[i].0);
    if let Some(start) = first_band {
        for (i, r) in runs.iter().enumerate().skip(start) {
            let lo_class = Some(checked_class(r.0)?);
            let hi_class = if i + 1 < runs.len() { Some(checked_class(r.1)?) } else { None };
            if r.2 > 0 {
                bands.push(Band { lo: r.0, hi: r.1, multiplicity: 2 * r.2, lo_class, hi_class });
            } else {
                gaps.push(Gap {
                    lo: r.0,
                    hi: r.1,
                    z_lo: zeta_of(r.0),
                    z_hi: zeta_of(r.1),
                    lo_class: lo_class.unwrap(),
                    hi_class,
                });
            }
        }
    }
    let unclassified = bands
        .iter()
        .flat_map(|b| [b.lo_class, b.hi_class])
        .chain(gaps.iter().flat_map(|g| [Some(g.lo_class), g.hi_class]))
        .filter(|c| *c == Some(EndpointClass::Unclassified))
        .count();
    Ok(BandStructure { bands, gaps, lambda0_plus, lambda_max, breakpoints: bps, unclassified, windows })
}

/// λ₀⁺, the lowest λ where some Δ_m(√λ) lies in [−1, 1].
pub fn bottom_of_spectrum(p: &PeriodicMatrixPotential, cfg: &SpectrumConfig) -> Result<f64> {
    let lo = spectral_lower_bound(p)?;
    let mut width = 16.0 + 2.0 * p.sup_bound();
    for _ in 0..8 {
        let bs = scan_bands(p, lo + width, cfg)?;
        if bs.lambda0_plus.is_finite() {
            return Ok(bs.lambda0_plus);
        }
        width *= 2.0;
    }
    Err(Error::no_convergence("bottom of the spectrum"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapVerdict {
    Finite,
    InfiniteCandidate,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapFinitenessReport {
    pub verdict: GapVerdict,
    /// V⁰ eigenvalues in ascending order.
    pub mean_eigenvalues: Vec<f64>,
    /// V_m⁰ + V_{N+1−m}⁰ for m = 1..N.
    pub symmetric_sums: Vec<f64>,
    pub diagonal: bool,
    /// (n, (|V̂⁽ⁿ⁾|² + 1/n) / min_m |V̂⁽ⁿ⁾_{m,N+1−m}|) for the harmonics present.
    pub antidiagonal_ratios: Vec<(usize, f64)>,
    pub reason: String,
}

/// Heuristic verdict on the number of spectral gaps from V⁰ and the Fourier data.
pub fn gap_finiteness_heuristic(p: &PeriodicMatrixPotential) -> Result<GapFinitenessReport> {
    let q = p.normalize(0.0)?;
    let n = q.dim();
    let d: Vec<f64> = q.mean().diagonal().iter().copied().collect();
    let sums: Vec<f64> = (0..n).map(|m| d[m] + d[n - 1 - m]).collect();
    let scale = 1.0 + q.sup_bound();
    let diagonal = (1..=q.max_harmonic()).all(|k| {
        let (c, s) = q.fourier(k);
        (0..n).all(|i| (0..n).all(|j| i == j || (c[(i, j)].abs() + s[(i, j)].abs()) <= 1e-12 * scale))
    });
    let mut ratios = Vec::new();
    for k in 1..=q.max_harmonic() {
        let v = q.complex_coeff(k);
        let op = v.clone().svd(false, false).singular_values[0];
        let anti = (0..n).map(|m| v[(m, n - 1 - m)].norm()).fold(f64::INFINITY, f64::min);
        if op > 0.0 {
            ratios.push((k, (op * op + 1.0 / k as f64) / anti));
        }
    }
    let mk = |verdict, reason: &str| GapFinitenessReport {
        verdict,
        mean_eigenvalues: d.clone(),
        symmetric_sums: sums.clone(),
        diagonal,
        antidiagonal_ratios: ratios.clone(),
        reason: reason.to_string(),
    };
    if q.is_zero() {
        return Ok(mk(GapVerdict::Inconclusive, "zero potential: all branches coincide"));
    }
    let distinct = d.windows(2).all(|w| w[1] - w[0] > 1e-9 * scale);
    if !distinct {
        return Ok(mk(GapVerdict::Inconclusive, "V⁰ has repeated eigenvalues"));
    }
    let identity = sums.iter().all(|s| (s - sums[0]).abs() <= 1e-9 * scale);
    if !identity {
        return Ok(mk(GapVerdict::Finite, "symmetric sums of V⁰ differ"));
    }
    if diagonal {
        return Ok(mk(GapVerdict::Finite, "diagonal potential with distinct mean entries"));
    }
    if ratios.last().is_some_and(|&(k, r)| k == q.max_harmonic() && r < 1.0) {
        Ok(mk(GapVerdict::InfiniteCandidate, "symmetric sums agree and anti-diagonal coupling dominates"))
    } else {
        Ok(mk(GapVerdict::Inconclusive, "symmetric sums agree but anti-diagonal coupling is not dominant"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coupling(a: f64, n: usize) -> PeriodicMatrixPotential {
        let mut cos = vec![DMatrix::zeros(2, 2); n];
        cos[n - 1] = DMatrix::from_row_slice(2, 2, &[0.0, a / 2.0, a / 2.0, 0.0]);
        PeriodicMatrixPotential::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), cos, vec![]).unwrap()
    }

    #[test]
    fn free_eigenvalues() {
        let cfg = SpectrumConfig::default();
        for dim in 1..=2 {
            let (per, ape) = eigenvalues(&PeriodicMatrixPotential::zero(dim), 3, &cfg).unwrap();
            assert_eq!(per.entries.len(), dim * 7);
            assert_eq!(ape.entries.len(), 2 * dim * 4);
            for e in &per.entries {
                assert!((e.lambda - (PI * e.n as f64).powi(2)).abs() < 1e-8, "{e:?}");
                assert_eq!(e.n % 2, 0);
            }
            for e in &ape.entries {
                assert!((e.lambda - (PI * e.n as f64).powi(2)).abs() < 1e-8, "{e:?}");
                assert_eq!(e.n % 2, 1);
                assert_eq!(e.multiplicity, 2 * dim);
            }
            assert!(per.windows.iter().all(|w| w.contour == w.found));
        }
    }

    #[test]
    fn constant_diagonal_eigenvalues() {
        let cfg = SpectrumConfig::default();
        let c = 3.0;
        let per = periodic_eigenvalues(&PeriodicMatrixPotential::diagonal(&[0.0, c]), 2, &cfg).unwrap();
        let mut expected = vec![0.0, c];
        for k in 1..=2 {
            let l = (2.0 * PI * k as f64).powi(2);
            expected.extend([l, l, l + c, l + c]);
        }
        expected.sort_by(f64::total_cmp);
        for (e, x) in per.entries.iter().zip(&expected) {
            assert!((e.lambda - x).abs() < 1e-9, "{} vs {x}", e.lambda);
        }
    }

    #[test]
    fn coupling_antiperiodic_first_cluster() {
        let a = 0.1;
        let p = PeriodicMatrixPotential::new(
            DMatrix::zeros(2, 2),
            vec![DMatrix::from_row_slice(2, 2, &[0.0, a / 2.0, a / 2.0, 0.0])],
            vec![],
        )
        .unwrap();
        let ape = antiperiodic_eigenvalues(&p, 0, &SpectrumConfig::default()).unwrap();
        let l: Vec<f64> = ape.lambdas();
        let pi2 = PI * PI;
        assert!((l[0] - (pi2 - a / 2.0)).abs() < 0.01 && (l[1] - (pi2 - a / 2.0)).abs() < 0.01);
        assert!((l[2] - (pi2 + a / 2.0)).abs() < 0.01 && (l[3] - (pi2 + a / 2.0)).abs() < 0.01);
    }

    #[test]
    fn predictor_examples() {
        let zero = asymptotic_eigenvalue_predictor(&PeriodicMatrixPotential::zero(2), 3).unwrap();
        assert!(zero.iter().all(|z| z.abs() < 1e-15));
        let diag = asymptotic_eigenvalue_predictor(&PeriodicMatrixPotential::diagonal(&[1.0, 4.0]), 2).unwrap();
        assert_eq!(diag, vec![1.0, 1.0, 4.0, 4.0]);
        let a = 0.6;
        let p = PeriodicMatrixPotential::new(
            DMatrix::zeros(2, 2),
            vec![DMatrix::from_row_slice(2, 2, &[0.0, a / 2.0, a / 2.0, 0.0])],
            vec![],
        )
        .unwrap();
        let z = asymptotic_eigenvalue_predictor(&p, 1).unwrap();
        for (x, e) in z.iter().zip([-a / 2.0, -a / 2.0, a / 2.0, a / 2.0]) {
            assert!((x - e).abs() < 1e-14);
        }
    }

    #[test]
    fn chain_labels() {
        assert_eq!(chain_label(EigenKind::Periodic, 1, 2), (0, 2, Side::Plus));
        assert_eq!(chain_label(EigenKind::Periodic, 2, 2), (2, 1, Side::Minus));
        assert_eq!(chain_label(EigenKind::Periodic, 5, 2), (2, 2, Side::Plus));
        assert_eq!(chain_label(EigenKind::Periodic, 6, 2), (4, 1, Side::Minus));
        assert_eq!(chain_label(EigenKind::Antiperiodic, 3, 2), (1, 2, Side::Plus));
        assert_eq!(chain_label(EigenKind::Antiperiodic, 4, 2), (3, 1, Side::Minus));
    }

    #[test]
    fn free_band_scan() {
        let bs = scan_bands(&PeriodicMatrixPotential::zero(2), 150.0, &SpectrumConfig::default()).unwrap();
        assert_eq!(bs.bands.len(), 1);
        assert_eq!(bs.bands[0].multiplicity, 4);
        assert!(bs.gaps.is_empty());
        assert!(bs.lambda0_plus.abs() < 1e-9);
    }

    #[test]
    fn constant_diagonal_band_scan() {
        let bs = scan_bands(&PeriodicMatrixPotential::diagonal(&[0.0, 3.0]), 120.0, &SpectrumConfig::default()).unwrap();
        assert_eq!(bs.bands.len(), 2, "{:?}", bs.bands);
        assert!((bs.bands[0].hi - 3.0).abs() < 1e-9);
        assert_eq!(bs.bands[0].multiplicity, 2);
        assert_eq!(bs.bands[1].multiplicity, 4);
        assert!(bs.gaps.is_empty());
        assert_eq!(bs.unclassified, 0);
    }

    #[test]
    fn resonance_gap_near_prediction() {
        let a = 0.5;
        let n = 8;
        let p = coupling(a, n);
        let rep = resonances(&p, n..=n, &SpectrumConfig::default()).unwrap();
        let open: Vec<&Resonance> = rep.resonances.iter().filter(|r| r.side != ResonanceSide::Double).collect();
        assert_eq!(open.len(), 2, "{:?}", rep.resonances);
        let center = (PI * n as f64).powi(2) + 0.5;
        assert!((open[0].lambda - (center - a / 2.0)).abs() < 3.0 * (a * a + 1.0 / n as f64));
        assert!((open[1].lambda - (center + a / 2.0)).abs() < 3.0 * (a * a + 1.0 / n as f64));
        assert!(open.iter().all(|r| r.square_root_confirmed == Some(true) && r.collision_confirmed));
        assert_eq!(open[0].pair, Some((1, 2)));
        assert!(!rep.windows[0].count_mismatch, "{:?}", rep.windows);
    }

    #[test]
    fn gap_heuristic_examples() {
        let v = gap_finiteness_heuristic(&PeriodicMatrixPotential::diagonal(&[0.0, 2.0])).unwrap();
        assert_eq!(v.verdict, GapVerdict::Finite);
        let z = gap_finiteness_heuristic(&PeriodicMatrixPotential::zero(2)).unwrap();
        assert_eq!(z.verdict, GapVerdict::Inconclusive);
        let anti = DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let p = PeriodicMatrixPotential::new(DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]), vec![anti; 6], vec![]).unwrap();
        assert_eq!(gap_finiteness_heuristic(&p).unwrap().verdict, GapVerdict::InfiniteCandidate);
        let three = PeriodicMatrixPotential::diagonal(&[0.0, 1.0, 3.0]);
        assert_eq!(gap_finiteness_heuristic(&three).unwrap().verdict, GapVerdict::Finite);
    }
}
