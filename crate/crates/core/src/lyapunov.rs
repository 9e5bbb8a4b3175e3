//! Lyapunov functions Δ_m(z), branch tracking and the discriminant ρ(z).

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::monodromy::{char_poly, integrate_monodromy, CharPolyCoeffs, MonodromySample, SolverConfig};
use crate::potential::PeriodicMatrixPotential;
use crate::CMatrix;

const SCHUR_MAX_ITER: usize = 10_000;
const PROBES: [Complex64; 2] = [Complex64::new(0.7311, 0.4137), Complex64::new(2.2197, 0.8513)];
const MAX_SUBDIVISION: usize = 10;

#[derive(Clone, Debug)]
pub struct LyapunovBranchSet {
    pub z: Complex64,
    /// Δ_1..Δ_N sorted by real then imaginary part, unless labels are attached.
    pub deltas: Vec<Complex64>,
    /// Branch labels from tracking: `deltas[i]` belongs to branch `labels[i]`.
    pub labels: Option<Vec<usize>>,
    /// Two branches that are not structurally identical lie within merge_tol.
    pub collision_flag: bool,
    /// False once tracking has passed a flagged collision.
    pub labels_trusted: bool,
    /// Largest distance between paired eigenvalues of L relative to max(1, ‖L‖).
    pub pairing_gap: f64,
    /// max_m |Φ(Δ_m)| relative to the natural scale of Φ.
    pub phi_residual: f64,
}

impl LyapunovBranchSet {
    pub fn dim(&self) -> usize {
        self.deltas.len()
    }

    pub fn min_gap(&self) -> f64 {
        min_pair_gap(&self.deltas)
    }

    /// Number of branches with Δ real and in [−1, 1] within `tol`.
    pub fn count_in_band(&self, tol: f64) -> usize {
        self.deltas
            .iter()
            .filter(|d| d.im.abs() <= tol && d.re.abs() <= 1.0 + tol)
            .count()
    }

    /// Δ for the given branch label.
    pub fn by_label(&self, label: usize) -> Option<Complex64> {
        let labels = self.labels.as_ref()?;
        labels.iter().position(|&l| l == label).map(|i| self.deltas[i])
    }

    /// D(τ) = (2τ)^N Π_m (ν − Δ_m) with ν = (τ + τ⁻¹)/2. Unlike a dense
    /// determinant of M − τI this stays accurate when M has exponentially
    /// large entries.
    pub fn characteristic_value(&self, tau: Complex64) -> Complex64 {
        let nu = (tau + tau.inv()) * 0.5;
        self.deltas.iter().fold((tau * 2.0).powi(self.dim() as i32), |acc, d| acc * (nu - d))
    }
}

fn min_pair_gap(v: &[Complex64]) -> f64 {
    let mut g = f64::INFINITY;
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            g = g.min((v[i] - v[j]).norm());
        }
    }
    g
}

/// 𝒯_n(x) = cos(n arccos x) by the three-term recurrence.
pub fn chebyshev_t(n: usize, x: Complex64) -> Complex64 {
    let (mut a, mut b) = (Complex64::new(1.0, 0.0), x);
    if n == 0 {
        return a;
    }
    for _ in 1..n {
        let c = x * b * 2.0 - a;
        a = b;
        b = c;
    }
    b
}

fn eigenvalues_of(l: &CMatrix, real: bool) -> Result<Vec<Complex64>> {
    // Francis iterations occasionally stall on the exactly doubled spectrum of
    // L; fall back to the complex iteration and then to looser deflation.
    for eps in [f64::EPSILON, 64.0 * f64::EPSILON, 4096.0 * f64::EPSILON] {
        if real {
            let lr: DMatrix<f64> = l.map(|x| x.re);
            if let Some(schur) = lr.try_schur(eps, SCHUR_MAX_ITER) {
                return Ok(schur.complex_eigenvalues().iter().copied().collect());
            }
        }
        if let Some(schur) = l.clone().try_schur(eps, SCHUR_MAX_ITER) {
            return Ok(schur.unpack().1.diagonal().iter().copied().collect());
        }
    }
    Err(Error::no_convergence("Schur decomposition of L"))
}

/// Greedy globally-closest pairing of 2N values; returns the pair means and the largest pair distance.
fn pair_up(eigs: &[Complex64]) -> (Vec<Complex64>, f64) {
    let n2 = eigs.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n2 * (n2 - 1) / 2);
    for i in 0..n2 {
        for j in i + 1..n2 {
            pairs.push(((eigs[i] - eigs[j]).norm(), i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut used = vec![false; n2];
    let mut out = Vec::with_capacity(n2 / 2);
    let mut worst: f64 = 0.0;
    for (d, i, j) in pairs {
        if used[i] || used[j] {
            continue;
        }
        used[i] = true;
        used[j] = true;
        worst = worst.max(d);
        out.push((eigs[i] + eigs[j]) * 0.5);
    }
    (out, worst)
}

/// Makes a multiset exactly closed under conjugation.
fn conj_symmetrize(v: &mut [Complex64]) {
    let n = v.len();
    let mut done = vec![false; n];
    for i in 0..n {
        if done[i] {
            continue;
        }
        done[i] = true;
        let target = v[i].conj();
        let best = (0..n)
            .filter(|&j| !done[j])
            .min_by(|&a, &b| (v[a] - target).norm().total_cmp(&(v[b] - target).norm()));
        match best {
            Some(j) if (v[j] - target).norm() < (v[i] - target).norm() => {
                let avg = (v[i] + v[j].conj()) * 0.5;
                v[i] = avg;
                v[j] = avg.conj();
                done[j] = true;
            }
            _ => v[i].im = 0.0,
        }
    }
}

fn sort_deltas(v: &mut [Complex64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Δ_1..Δ_N from an already integrated monodromy sample.
pub fn lyapunov_from_sample(ms: &MonodromySample, cfg: &SolverConfig) -> Result<LyapunovBranchSet> {
    let real = ms.on_real_axes();
    let l = ms.balanced_l();
    let eigs = eigenvalues_of(&l, real)?;
    let (mut deltas, worst) = pair_up(&eigs);
    let scale = l.camax().max(1.0);
    let gap = worst / scale;
    if !(gap <= 1e-5) {
        return Err(Error::Pairing { z: ms.z, gap });
    }
    if real {
        conj_symmetrize(&mut deltas);
    }
    let factor = ms.log_scale.exp();
    if factor != 1.0 {
        deltas.iter_mut().for_each(|d| *d *= factor);
    }
    sort_deltas(&mut deltas);
    let cp = char_poly(ms);
    let phi_residual = deltas
        .iter()
        .map(|&d| cp.phi(d).norm() / cp.phi_scale(d).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    let collision_flag = has_collision(&deltas, cfg.merge_tol);
    Ok(LyapunovBranchSet {
        z: ms.z,
        deltas,
        labels: None,
        collision_flag,
        labels_trusted: true,
        pairing_gap: gap,
        phi_residual,
    })
}

fn has_collision(deltas: &[Complex64], merge_tol: f64) -> bool {
    for i in 0..deltas.len() {
        for j in i + 1..deltas.len() {
            if (deltas[i] - deltas[j]).norm() < merge_tol * (1.0 + deltas[i].norm()) {
                return true;
            }
        }
    }
    false
}

pub fn lyapunov_values(p: &PeriodicMatrixPotential, z: Complex64, cfg: &SolverConfig) -> Result<LyapunovBranchSet> {
    let ms = integrate_monodromy(p, z, cfg)?;
    lyapunov_from_sample(&ms, cfg)
}

/// Number of structurally distinct Lyapunov branches.
///
/// Identical blocks make some Δ_m coincide identically in z ("permanently
/// degenerate" potentials). This is detected at fixed generic complex probes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DegeneracyInfo {
    pub dim: usize,
    pub distinct: usize,
}

impl DegeneracyInfo {
    pub fn detect(p: &PeriodicMatrixPotential, cfg: &SolverConfig) -> Result<Self> {
        let mut distinct = 0;
        for z in PROBES {
            let set = lyapunov_values(p, z, cfg)?;
            distinct = distinct.max(count_clusters(&set.deltas, 1e-8));
        }
        Ok(Self { dim: p.dim(), distinct })
    }

    pub fn is_degenerate(&self) -> bool {
        self.distinct < self.dim
    }
}

/// Number of clusters under single-linkage with relative threshold `tol`.
fn count_clusters(v: &[Complex64], tol: f64) -> usize {
    let n = v.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        p[i] = r;
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (v[i] - v[j]).norm() < tol * (1.0 + v[i].norm().max(v[j].norm())) {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                parent[a] = b;
            }
        }
    }
    (0..n).filter(|&i| find(&mut parent, i) == i).count()
}

/// Reduces a multiset to `k` representatives by repeatedly merging the two closest clusters.
pub fn distinct_representatives(v: &[Complex64], k: usize) -> Vec<Complex64> {
    let mut clusters: Vec<(Complex64, usize)> = v.iter().map(|&d| (d, 1)).collect();
    while clusters.len() > k.max(1) {
        let mut best = (f64::INFINITY, 0, 1);
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let d = (clusters[i].0 - clusters[j].0).norm();
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (_, i, j) = best;
        let (b, nb) = clusters.remove(j);
        let (a, na) = clusters[i];
        clusters[i] = ((a * na as f64 + b * nb as f64) / (na + nb) as f64, na + nb);
    }
    clusters.into_iter().map(|c| c.0).collect()
}

fn pair_product(v: &[Complex64]) -> Complex64 {
    let mut rho = Complex64::new(1.0, 0.0);
    for i in 0..v.len() {
        for j in i + 1..v.len() {
            let d = v[i] - v[j];
            rho *= d * d;
        }
    }
    rho
}

#[derive(Clone, Copy, Debug)]
pub struct DiscriminantValue {
    pub z: Complex64,
    /// Π_{i<j}(Δ_i − Δ_j)² over all N branches; identically zero for degenerate potentials.
    pub rho: Complex64,
    /// The same product over the structurally distinct branches only.
    pub rho_distinct: Complex64,
    pub degenerate: bool,
}

pub fn discriminant_from_set(set: &LyapunovBranchSet, info: &DegeneracyInfo) -> DiscriminantValue {
    let real_axes = (set.z * set.z).im == 0.0;
    let mut rho = pair_product(&set.deltas);
    let mut rho_distinct = if info.is_degenerate() {
        pair_product(&distinct_representatives(&set.deltas, info.distinct))
    } else {
        rho
    };
    if real_axes {
        rho.im = 0.0;
        rho_distinct.im = 0.0;
    }
    DiscriminantValue { z: set.z, rho, rho_distinct, degenerate: info.is_degenerate() }
}

pub fn discriminant_with(
    p: &PeriodicMatrixPotential,
    z: Complex64,
    cfg: &SolverConfig,
    info: &DegeneracyInfo,
) -> Result<DiscriminantValue> {
    Ok(discriminant_from_set(&lyapunov_values(p, z, cfg)?, info))
}

pub fn discriminant(p: &PeriodicMatrixPotential, z: Complex64, cfg: &SolverConfig) -> Result<DiscriminantValue> {
    let info = DegeneracyInfo::detect(p, cfg)?;
    discriminant_with(p, z, cfg, &info)
}

/// (−1)^{N(N−1)/2} Res(Φ, Φ′) from the Sylvester determinant. Φ is monic, so this
/// equals Π_{i<j}(Δ_i − Δ_j)².
pub fn discriminant_via_resultant(cp: &CharPolyCoeffs) -> Complex64 {
    let n = cp.dim();
    if n < 2 {
        return Complex64::new(1.0, 0.0);
    }
    let f = &cp.phi_coeffs;
    let df: Vec<Complex64> = (0..n).map(|j| f[j] * (n - j) as f64).collect();
    let size = 2 * n - 1;
    let mut s = CMatrix::zeros(size, size);
    for r in 0..n - 1 {
        for (k, &c) in f.iter().enumerate() {
            s[(r, r + k)] = c;
        }
    }
    for r in 0..n {
        for (k, &c) in df.iter().enumerate() {
            s[(n - 1 + r, r + k)] = c;
        }
    }
    let sign = if (n * (n - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    s.determinant() * sign / f[0]
}

/// cos z + (sin z / 2z)·μ_m with μ_1 ≤ … ≤ μ_N the eigenvalues of V⁰ (m is 1-based).
pub fn asymptotic_delta(p: &PeriodicMatrixPotential, z: Complex64, m: usize) -> Result<Complex64> {
    if m == 0 || m > p.dim() {
        return Err(Error::InvalidArgument(format!("branch index {m} outside 1..={}", p.dim())));
    }
    if z.norm() < 1.0 {
        return Err(Error::InvalidArgument("asymptotic_delta needs |z| ≥ 1".into()));
    }
    let mu = p.mean_eigenvalues()?[m - 1];
    Ok(z.cos() + z.sin() / (z * 2.0) * mu)
}

struct Matching {
    perm: Vec<usize>,
    displacement: f64,
}

/// Minimal-total-distance assignment prev[i] → cur[perm[i]].
fn best_matching(prev: &[Complex64], cur: &[Complex64]) -> Matching {
    let n = prev.len();
    let cost = |perm: &[usize]| -> f64 { (0..n).map(|i| (prev[i] - cur[perm[i]]).norm()).sum() };
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    if n <= 7 {
        let mut best_cost = cost(&perm);
        // Heap's algorithm
        let mut c = vec![0usize; n];
        let mut i = 0;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                let k = cost(&perm);
                if k < best_cost {
                    best_cost = k;
                    best.clone_from(&perm);
                }
                c[i] += 1;
                i = 0;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
    } else {
        let mut used = vec![false; n];
        for (i, slot) in best.iter_mut().enumerate() {
            let j = (0..n)
                .filter(|&j| !used[j])
                .min_by(|&a, &b| (prev[i] - cur[a]).norm().total_cmp(&(prev[i] - cur[b]).norm()))
                .unwrap();
            used[j] = true;
            *slot = j;
        }
    }
    let displacement = (0..n).map(|i| (prev[i] - cur[best[i]]).norm()).fold(0.0, f64::max);
    Matching { perm: best, displacement }
}

/// Smallest gap between values that are not structural duplicates.
fn separation(v: &[Complex64], info: &DegeneracyInfo) -> f64 {
    if info.is_degenerate() {
        min_pair_gap(&distinct_representatives(v, info.distinct))
    } else {
        min_pair_gap(v)
    }
}

fn collision_for(set: &LyapunovBranchSet, info: &DegeneracyInfo, merge_tol: f64) -> bool {
    if info.is_degenerate() {
        has_collision(&distinct_representatives(&set.deltas, info.distinct), merge_tol)
    } else {
        set.collision_flag
    }
}

/// Follows the branches from `prev` (already labelled, deltas in label order) to
/// `z_next`, subdividing the step while the matching is ambiguous.
fn advance(
    p: &PeriodicMatrixPotential,
    prev: &LyapunovBranchSet,
    z_next: Complex64,
    cfg: &SolverConfig,
    info: &DegeneracyInfo,
    depth: usize,
) -> Result<LyapunovBranchSet> {
    let mut next = lyapunov_values(p, z_next, cfg)?;
    next.collision_flag = collision_for(&next, info, cfg.merge_tol);
    let m = best_matching(&prev.deltas, &next.deltas);
    let sep = separation(&next.deltas, info).min(separation(&prev.deltas, info));
    let clear = m.displacement < sep / 3.0 || m.displacement == 0.0;
    if !clear && !next.collision_flag && !prev.collision_flag {
        if depth >= MAX_SUBDIVISION {
            return Err(Error::AmbiguousMatching { z: z_next });
        }
        let mid = advance(p, prev, (prev.z + z_next) * 0.5, cfg, info, depth + 1)?;
        return advance(p, &mid, z_next, cfg, info, depth + 1);
    }
    let deltas: Vec<Complex64> = m.perm.iter().map(|&j| next.deltas[j]).collect();
    next.deltas = deltas;
    next.labels = Some((0..prev.dim()).collect());
    next.labels_trusted = prev.labels_trusted && !next.collision_flag && !prev.collision_flag;
    Ok(next)
}

/// Lyapunov values along a path with labels carried by continuity. Within each
/// returned set the deltas are in label order: `deltas[i]` is branch `i`.
pub fn track_branches(
    p: &PeriodicMatrixPotential,
    path: &[Complex64],
    cfg: &SolverConfig,
) -> Result<Vec<LyapunovBranchSet>> {
    let info = DegeneracyInfo::detect(p, cfg)?;
    track_branches_with(p, path, cfg, &info)
}

pub fn track_branches_with(
    p: &PeriodicMatrixPotential,
    path: &[Complex64],
    cfg: &SolverConfig,
    info: &DegeneracyInfo,
) -> Result<Vec<LyapunovBranchSet>> {
    let mut out: Vec<LyapunovBranchSet> = Vec::with_capacity(path.len());
    for &z in path {
        let next = match out.last() {
            None => {
                let mut first = lyapunov_values(p, z, cfg)?;
                first.collision_flag = collision_for(&first, info, cfg.merge_tol);
                first.labels = Some((0..first.dim()).collect());
                first.labels_trusted = !first.collision_flag;
                first
            }
            Some(prev) => advance(p, prev, z, cfg, info, 0)?,
        };
        out.push(next);
    }
    Ok(out)
}

/// Permutation of labels after following a closed loop: `result[i]` is the label
/// whose value at the end of the loop continues branch `i` at its start.
pub fn loop_permutation(tracked: &[LyapunovBranchSet]) -> Option<Vec<usize>> {
    let first = tracked.first()?;
    let last = tracked.last()?;
    Some(best_matching(&first.deltas, &last.deltas).perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn coupling(a: f64) -> PeriodicMatrixPotential {
        PeriodicMatrixPotential::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]),
            vec![DMatrix::from_row_slice(2, 2, &[0.0, a / 2.0, a / 2.0, 0.0])],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn free_values_are_cos() {
        let cfg = SolverConfig::default();
        for n in 1..=3 {
            for &z in &[c(0.0, 0.0), c(4.3, 0.0), c(0.0, 3.1), c(7.7, -1.2)] {
                let set = lyapunov_values(&PeriodicMatrixPotential::zero(n), z, &cfg).unwrap();
                for d in &set.deltas {
                    assert!((d - z.cos()).norm() < 1e-10 * z.cos().norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn constant_diagonal_closed_form() {
        let cvals = [0.0, 2.5, 6.0];
        let p = PeriodicMatrixPotential::diagonal(&cvals);
        for &lambda in &[1.0f64, 4.0, 30.0, -2.0] {
            let z = if lambda >= 0.0 { c(lambda.sqrt(), 0.0) } else { c(0.0, (-lambda).sqrt()) };
            let set = lyapunov_values(&p, z, &SolverConfig::default()).unwrap();
            let mut expected: Vec<Complex64> = cvals
                .iter()
                .map(|&cv| {
                    let arg = lambda - cv;
                    c(if arg >= 0.0 { arg.sqrt().cos() } else { (-arg).sqrt().cosh() }, 0.0)
                })
                .collect();
            sort_deltas(&mut expected);
            for (d, e) in set.deltas.iter().zip(&expected) {
                assert!((d - e).norm() < 1e-10 * e.norm().max(1.0), "λ={lambda}: {d} vs {e}");
            }
            assert!(set.deltas.iter().all(|d| d.im == 0.0));
        }
    }

    #[test]
    fn characteristic_value_matches_dense_determinant() {
        let p = coupling(0.4);
        let cfg = SolverConfig::default();
        for z in [c(3.7, 0.0), c(2.0, 1.5), c(0.0, 2.5)] {
            let ms = integrate_monodromy(&p, z, &cfg).unwrap();
            let set = lyapunov_from_sample(&ms, &cfg).unwrap();
            for tau in [c(1.0, 0.0), c(-1.0, 0.0), c(0.3, 0.8)] {
                let dense = crate::monodromy::characteristic_det(&ms, tau);
                let reduced = set.characteristic_value(tau);
                assert!((dense - reduced).norm() < 1e-9 * (1.0 + dense.norm()), "{z} {tau}: {dense} vs {reduced}");
            }
        }
    }

    #[test]
    fn chebyshev_trace_identity() {
        let p = coupling(0.8);
        let cfg = SolverConfig::default();
        for &z in &[c(3.3, 0.4), c(9.9, 0.0), c(0.0, 2.0), c(6.1, -2.2)] {
            let ms = integrate_monodromy(&p, z, &cfg).unwrap();
            let set = lyapunov_from_sample(&ms, &cfg).unwrap();
            let t = crate::monodromy::traces(&ms, 4);
            for n in 1..=4 {
                let lhs: Complex64 = set.deltas.iter().map(|&d| chebyshev_t(n, d)).sum();
                let rhs = t[n - 1] * 2.0;
                assert!((lhs - rhs).norm() < 1e-9 * (1.0 + rhs.norm()));
            }
            assert!(set.phi_residual < 1e-8);
        }
    }

    #[test]
    fn conjugate_pairs_on_real_axis() {
        let p = coupling(1.5);
        let cfg = SolverConfig::default();
        for &x in &[0.3, 2.0, 3.0, 4.1] {
            let set = lyapunov_values(&p, c(x, 0.0), &cfg).unwrap();
            for d in &set.deltas {
                assert!(set.deltas.iter().any(|e| (*e - d.conj()).norm() == 0.0));
            }
        }
    }

    #[test]
    fn constant_discriminant_closed_form() {
        let cv = 2.0;
        let p = PeriodicMatrixPotential::diagonal(&[0.0, cv]);
        let cfg = SolverConfig::default();
        for &lambda in &[3.0f64, 10.0, 40.0] {
            let d = discriminant(&p, c(lambda.sqrt(), 0.0), &cfg).unwrap();
            let expected = (lambda.sqrt().cos() - (lambda - cv).sqrt().cos()).powi(2);
            assert!((d.rho.re - expected).abs() < 1e-10);
            assert_eq!(d.rho.im, 0.0);
            assert!(!d.degenerate);
        }
    }

    #[test]
    fn zero_potential_is_degenerate() {
        let cfg = SolverConfig::default();
        let d = discriminant(&PeriodicMatrixPotential::zero(2), c(2.0, 0.3), &cfg).unwrap();
        assert!(d.degenerate);
        assert!(d.rho.norm() < 1e-20);
    }

    #[test]
    fn repeated_block_discriminant_uses_distinct_branches() {
        let q = PeriodicMatrixPotential::diagonal(&[1.0]);
        let zero = PeriodicMatrixPotential::zero(1);
        let p = crate::potential::direct_sum(&crate::potential::direct_sum(&q, &q), &zero);
        let cfg = SolverConfig::default();
        let info = DegeneracyInfo::detect(&p, &cfg).unwrap();
        assert_eq!(info.distinct, 2);
        let z = c(3.0, 0.0);
        let d = discriminant_with(&p, z, &cfg, &info).unwrap();
        let expected = (z.cos() - (z * z - 1.0).sqrt().cos()).powi(2);
        assert!((d.rho_distinct - expected).norm() < 1e-10);
    }

    #[test]
    fn resultant_matches_eigenvalue_product() {
        let cfg = SolverConfig::default();
        let p3 = PeriodicMatrixPotential::new(
            DMatrix::from_row_slice(3, 3, &[0.0, 0.2, 0.0, 0.2, 1.0, 0.1, 0.0, 0.1, 2.5]),
            vec![DMatrix::from_row_slice(3, 3, &[0.3, 0.0, 0.4, 0.0, 0.0, 0.2, 0.4, 0.2, -0.1])],
            vec![],
        )
        .unwrap();
        for p in [coupling(0.9), p3] {
            for &z in &[c(2.1, 0.3), c(5.0, 0.0), c(1.0, 1.0)] {
                let ms = integrate_monodromy(&p, z, &cfg).unwrap();
                let set = lyapunov_from_sample(&ms, &cfg).unwrap();
                let rho = pair_product(&set.deltas);
                let res = discriminant_via_resultant(&char_poly(&ms));
                assert!((rho - res).norm() < 1e-6 * rho.norm().max(1e-12), "{rho} vs {res}");
            }
        }
    }

    #[test]
    fn asymptotic_delta_values() {
        let p = PeriodicMatrixPotential::diagonal(&[0.0, 3.0]);
        let z = c(20.0, 0.0);
        let v = asymptotic_delta(&p, z, 2).unwrap();
        assert!((v.re - (20f64.cos() + 3.0 * 20f64.sin() / 40.0)).abs() < 1e-15);
        assert!(asymptotic_delta(&p, z, 3).is_err());
        let free = asymptotic_delta(&PeriodicMatrixPotential::zero(2), c(3.0, 1.0), 1).unwrap();
        assert!((free - c(3.0, 1.0).cos()).norm() < 1e-15);
    }

    #[test]
    fn asymptotic_residual_decays_along_imaginary_axis() {
        let p = coupling(0.7);
        let cfg = SolverConfig::default();
        let residual = |y: f64| {
            let z = c(0.0, y);
            let set = lyapunov_values(&p, z, &cfg).unwrap();
            (1..=2)
                .map(|m| {
                    let a = asymptotic_delta(&p, z, m).unwrap();
                    (set.deltas[m - 1] - a).norm() / y.exp()
                })
                .fold(0.0, f64::max)
        };
        let (r1, r2) = (residual(10.0), residual(80.0));
        let slope = (r2 / r1).ln() / 8f64.ln();
        assert!(slope < -1.7, "slope {slope}");
    }

    #[test]
    fn det_l_asymptotics() {
        let p = coupling(0.7);
        let cfg = SolverConfig::default();
        let tr = p.trace_mean();
        let residual = |y: f64| {
            let set = lyapunov_values(&p, c(0.0, y), &cfg).unwrap();
            let log_det: f64 = set.deltas.iter().map(|d| 2.0 * (d.norm() * 2.0).ln()).sum();
            (log_det - 4.0 * y - tr / y).abs()
        };
        let (r1, r2) = (residual(10.0), residual(40.0));
        assert!(r2 < r1 / 4f64.powi(2), "{r1} {r2}");
    }

    #[test]
    fn tracking_along_real_path_is_continuous() {
        let p = coupling(0.5);
        let cfg = SolverConfig::default();
        let path: Vec<Complex64> = (0..40).map(|k| c(0.5 + k as f64 * 0.1, 0.05)).collect();
        let tracked = track_branches(&p, &path, &cfg).unwrap();
        for w in tracked.windows(2) {
            for i in 0..2 {
                assert!((w[0].deltas[i] - w[1].deltas[i]).norm() < 0.3);
            }
        }
        let free = track_branches(&PeriodicMatrixPotential::zero(2), &path, &cfg).unwrap();
        assert!(free.iter().all(|s| !s.collision_flag));
    }

    #[test]
    fn loop_without_branch_point_is_identity() {
        let p = coupling(0.5);
        let cfg = SolverConfig::default();
        let center = c(5.0, 0.0);
        let path: Vec<Complex64> =
            (0..=64).map(|k| center + Complex64::from_polar(0.2, 2.0 * std::f64::consts::PI * k as f64 / 64.0)).collect();
        let tracked = track_branches(&p, &path, &cfg).unwrap();
        assert_eq!(loop_permutation(&tracked).unwrap(), vec![0, 1]);
    }
}
