//! The `floquet` command-line driver.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::corpus;
use crate::error::{Error, Result};
use crate::monodromy::{integrate_monodromy, symplectic_residual};
use crate::oracle::fd_eigenvalues;
use crate::potential::PeriodicMatrixPotential;
use crate::quasimomentum::{
    estimate_suite_with, exponent_and_density, gap_identity_check_with, prepare,
    trace_integrals_with, upper_plane, QuasimomentumConfig, SpectralData,
};
use crate::spectrum::{eigenvalues, resonances, scan_bands, EigenKind, EigenvalueList, SpectrumConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;
pub const EXIT_CHECKS_FAILED: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "floquet", version, about = "Floquet spectral analysis for periodic matrix Schrödinger operators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: RunOptions,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Bands and gaps up to --lambda-max with classified endpoints.
    Spectrum,
    /// Periodic and antiperiodic eigenvalue clusters 0..=--n-max.
    Eigs,
    /// Real branch points of the Lyapunov functions for n = 1..=--n-max.
    Resonances,
    /// Trace integrals Q0, Q2, Q4 against their closed forms.
    Traces,
    /// Quasimomentum u + iv on the real axis and on rows of the upper half plane.
    Qmap,
    /// Invariant suite with a pass/fail table.
    Verify,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunOptions {
    /// Potential file (JSON).
    #[arg(long, global = true)]
    pub potential: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lambda_max: Option<f64>,
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Solver tolerance for structural checks.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Sample density per unit of the spectral variable.
    #[arg(long, global = true)]
    pub grid: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Imaginary offset for the phase of the Floquet product; u is
    /// extrapolated from eps and eps/2.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub allow_unclassified: bool,
    /// Verify a random potential drawn from this seed.
    #[arg(long, global = true)]
    pub random_seed: Option<u64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Validated settings for one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: Command,
    pub opts: RunOptions,
    pub spectrum: SpectrumConfig,
    pub quasimomentum: QuasimomentumConfig,
}

impl RunConfig {
    pub fn new(command: Command, opts: RunOptions) -> Result<Self> {
        let positive = |v: Option<f64>, name: &str| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::InvalidArgument(format!("--{name} must be positive"))),
            _ => Ok(()),
        };
        positive(opts.tol, "tol")?;
        positive(opts.grid, "grid")?;
        positive(opts.eps, "eps")?;
        if let Some(l) = opts.lambda_max {
            if !l.is_finite() {
                return Err(Error::InvalidArgument("--lambda-max must be finite".into()));
            }
        }
        if opts.n_max == Some(0) && matches!(command, Command::Resonances | Command::Traces | Command::Verify) {
            return Err(Error::InvalidArgument("--n-max must be at least 1".into()));
        }
        let mut spectrum = SpectrumConfig::default();
        if let Some(t) = opts.tol {
            spectrum.solver.tol = t;
        }
        if let Some(g) = opts.grid {
            spectrum.grid_per_unit = g;
        }
        let mut quasimomentum = QuasimomentumConfig { spectrum: spectrum.clone(), ..Default::default() };
        if let Some(e) = opts.eps {
            quasimomentum.eps = [e, 0.5 * e];
        }
        quasimomentum.validate()?;
        Ok(Self { command, opts, spectrum, quasimomentum })
    }

    fn load_potential(&self) -> Result<PeriodicMatrixPotential> {
        match &self.opts.potential {
            Some(path) => PeriodicMatrixPotential::load(path),
            None => Err(Error::InvalidArgument("--potential is required".into())),
        }
    }
}

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    ChecksFailed,
}

/// Fixed-width scientific notation with 12 significant digits.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.11e}")
}

fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            fmt_num(x).parse::<f64>().ok().and_then(serde_json::Number::from_f64).map_or(Value::Null, Value::Number)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let v = round_json(serde_json::to_value(value)?);
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// ζ = sign(λ)·√|λ|, the real coordinate used for z in tables.
fn zeta(lambda: f64) -> f64 {
    lambda.signum() * lambda.abs().sqrt()
}

const SPECTRUM_HEADER: &str = "kind,n,m,label,z,lambda,multiplicity,classification,residual\n";

struct Row<'a> {
    kind: &'a str,
    n: String,
    m: String,
    label: String,
    lambda: f64,
    multiplicity: usize,
    classification: &'a str,
    residual: Option<f64>,
}

impl Row<'_> {
    fn write(&self, out: &mut String) {
        let residual = self.residual.map(fmt_num).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.n,
            self.m,
            self.label,
            fmt_num(zeta(self.lambda)),
            fmt_num(self.lambda),
            self.multiplicity,
            self.classification,
            residual
        );
    }
}

pub fn cmd_spectrum(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.load_potential()?;
    let lambda_max = cfg.opts.lambda_max.unwrap_or(400.0);
    let bs = scan_bands(&p, lambda_max, &cfg.spectrum)?;
    let text = match cfg.opts.format {
        Format::Json => to_json(&bs)?,
        Format::Csv => {
            let mut s = String::from(SPECTRUM_HEADER);
            for (i, b) in bs.bands.iter().enumerate() {
                for (m, label, lambda, class) in [(0, "band-lo", b.lo, b.lo_class), (1, "band-hi", b.hi, b.hi_class)] {
                    Row {
                        kind: "band-edge",
                        n: i.to_string(),
                        m: m.to_string(),
                        label: label.into(),
                        lambda,
                        multiplicity: b.multiplicity,
                        classification: class.map_or("cutoff", |c| c.name()),
                        residual: None,
                    }
                    .write(&mut s);
                }
            }
            for (i, g) in bs.gaps.iter().enumerate() {
                for (m, label, lambda, class) in [(0, "gap-lo", g.lo, Some(g.lo_class)), (1, "gap-hi", g.hi, g.hi_class)] {
                    Row {
                        kind: "band-edge",
                        n: i.to_string(),
                        m: m.to_string(),
                        label: label.into(),
                        lambda,
                        multiplicity: 0,
                        classification: class.map_or("cutoff", |c| c.name()),
                        residual: None,
                    }
                    .write(&mut s);
                }
            }
            s
        }
    };
    emit(cfg.opts.out.as_deref(), &text)?;
    if bs.unclassified > 0 && !cfg.opts.allow_unclassified {
        eprintln!("{} band endpoints could not be classified", bs.unclassified);
        return Ok(Outcome::ChecksFailed);
    }
    Ok(Outcome::Ok)
}

fn eigen_rows(list: &EigenvalueList, out: &mut String) {
    for e in &list.entries {
        Row {
            kind: list.kind.name(),
            n: e.n.to_string(),
            m: e.m.to_string(),
            label: e.side.symbol().into(),
            lambda: e.lambda,
            multiplicity: e.multiplicity,
            classification: list.kind.name(),
            residual: Some(e.residual),
        }
        .write(out);
    }
}

pub fn cmd_eigs(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.load_potential()?;
    let (per, anti) = eigenvalues(&p, cfg.opts.n_max.unwrap_or(10), &cfg.spectrum)?;
    let text = match cfg.opts.format {
        Format::Json => to_json(&json!({ "periodic": per, "antiperiodic": anti }))?,
        Format::Csv => {
            let mut s = String::from(SPECTRUM_HEADER);
            eigen_rows(&per, &mut s);
            eigen_rows(&anti, &mut s);
            s
        }
    };
    emit(cfg.opts.out.as_deref(), &text)?;
    Ok(Outcome::Ok)
}

pub fn cmd_resonances(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.load_potential()?;
    let report = resonances(&p, 1..=cfg.opts.n_max.unwrap_or(10), &cfg.spectrum)?;
    let text = match cfg.opts.format {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut s = String::from(SPECTRUM_HEADER);
            for r in &report.resonances {
                let classification = match (r.square_root_confirmed, r.collision_confirmed) {
                    (Some(true), _) => "square-root",
                    (_, true) => "collision",
                    _ => "unconfirmed",
                };
                Row {
                    kind: "resonance",
                    n: r.n.to_string(),
                    m: r.pair.map(|(i, j)| format!("{i}-{j}")).unwrap_or_default(),
                    label: serde_json::to_value(r.side)?.as_str().unwrap_or_default().to_string(),
                    lambda: r.lambda,
                    multiplicity: r.multiplicity,
                    classification,
                    residual: None,
                }
                .write(&mut s);
            }
            s
        }
    };
    emit(cfg.opts.out.as_deref(), &text)?;
    if report.windows.iter().any(|w| w.count_mismatch) {
        eprintln!("resonance counts disagree with the contour count in some windows");
        return Ok(Outcome::ChecksFailed);
    }
    Ok(Outcome::Ok)
}

fn traces_config(cfg: &RunConfig) -> QuasimomentumConfig {
    let mut q = cfg.quasimomentum.clone();
    if let Some(n) = cfg.opts.n_max {
        q.clusters = n;
    }
    q
}

pub fn cmd_traces(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.load_potential()?;
    let qcfg = traces_config(cfg);
    let data = prepare(&p, &qcfg)?;
    let t = trace_integrals_with(&data, &qcfg)?;
    let pass = t.q0_relative_error() <= 1e-2 && t.q2_relative_error() <= 1e-2 && !t.truncation.insufficient_truncation;
    let text = match cfg.opts.format {
        Format::Json => to_json(&json!({ "traces": t, "pass": pass }))?,
        Format::Csv => {
            let mut s = String::from("quantity,value,target,relative_error\n");
            for (name, v, target, rel) in [
                ("Q0", t.q0, t.q0_target, t.q0_relative_error()),
                ("Q2", t.q2, t.q2_target, t.q2_relative_error()),
                ("Q4", t.q4, t.q4_target, t.q4_relative_error()),
            ] {
                let _ = writeln!(s, "{name},{},{},{}", fmt_num(v), fmt_num(target), fmt_num(rel));
            }
            s
        }
    };
    emit(cfg.opts.out.as_deref(), &text)?;
    Ok(if pass { Outcome::Ok } else { Outcome::ChecksFailed })
}

fn sidecar_paths(out: &Path) -> (PathBuf, PathBuf) {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "qmap".into());
    let dir = out.parent().unwrap_or_else(|| Path::new(""));
    (dir.join(format!("{stem}.json")), dir.join(format!("{stem}_upper.csv")))
}

pub fn cmd_qmap(cfg: &RunConfig) -> Result<Outcome> {
    let p = cfg.load_potential()?;
    let qcfg = traces_config(cfg);
    let data = prepare(&p, &qcfg)?;
    let t = trace_integrals_with(&data, &qcfg)?;
    let x_max = cfg.opts.lambda_max.map_or(4.0 * PI, |l| l.max(0.0).sqrt());
    let per_unit = cfg.opts.grid.unwrap_or(20.0);
    let k = (x_max * per_unit).ceil() as i64;
    let xs: Vec<f64> = (-k..=k).map(|j| j as f64 * x_max / k.max(1) as f64).collect();
    let grid = exponent_and_density(&data.potential, &xs, qcfg.eps, &qcfg.spectrum)?;
    let ys = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0];
    let upper = upper_plane(&data.potential, &xs, &ys, &qcfg.spectrum)?;
    let sidecar = json!({
        "Q0": t.q0,
        "Q2": t.q2,
        "targets": { "Q0": t.q0_target, "Q2": t.q2_target, "Q4": t.q4_target },
        "truncation": t.truncation,
        "lambda0_plus": t.lambda0_plus,
    });
    match cfg.opts.format {
        Format::Json => {
            let all = json!({ "real_axis": grid.real_axis, "upper_plane": upper, "sidecar": sidecar });
            emit(cfg.opts.out.as_deref(), &to_json(&all)?)?;
        }
        Format::Csv => {
            let mut s = String::from("x,u,v\n");
            for r in &grid.real_axis {
                let _ = writeln!(s, "{},{},{}", fmt_num(r.x), fmt_num(r.u), fmt_num(r.v));
            }
            emit(cfg.opts.out.as_deref(), &s)?;
            if let Some(out) = &cfg.opts.out {
                let (json_path, upper_path) = sidecar_paths(out);
                std::fs::write(json_path, to_json(&sidecar)?)?;
                let mut u = String::from("x,y,Re_w,Im_w\n");
                for r in &upper {
                    let _ = writeln!(u, "{},{},{},{}", fmt_num(r.x), fmt_num(r.y), fmt_num(r.w.re), fmt_num(r.w.im));
                }
                std::fs::write(upper_path, u)?;
            }
        }
    }
    Ok(Outcome::Ok)
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckRow {
    pub potential: String,
    pub check: String,
    pub value: f64,
    pub threshold: f64,
    pub status: CheckStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl CheckStatus {
    fn name(self) -> &'static str {
        match self {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "fail",
            CheckStatus::Skip => "skip",
        }
    }
}

struct Table<'a> {
    potential: &'a str,
    rows: Vec<CheckRow>,
}

impl Table<'_> {
    /// Records value ≤ threshold.
    fn le(&mut self, check: &str, value: f64, threshold: f64) {
        let status = if value <= threshold { CheckStatus::Pass } else { CheckStatus::Fail };
        self.push(check, value, threshold, status);
    }

    fn push(&mut self, check: &str, value: f64, threshold: f64, status: CheckStatus) {
        self.rows.push(CheckRow { potential: self.potential.into(), check: check.into(), value, threshold, status });
    }
}

const VERIFY_Z: [(f64, f64); 8] = [
    (0.7, 0.0),
    (3.3, 0.0),
    (9.1, 0.0),
    (14.2, 0.0),
    (1.1, 0.9),
    (6.4, -2.5),
    (0.0, 4.0),
    (-8.3, 3.7),
];

/// Structural, oracle, trace, estimate and quasimomentum checks for one potential.
pub fn verify_potential(name: &str, p: &PeriodicMatrixPotential, n_max: usize, cfg: &RunConfig) -> Result<Vec<CheckRow>> {
    let mut t = Table { potential: name, rows: Vec::new() };
    let n = p.dim();
    let solver = &cfg.spectrum.solver;

    let (mut det_err, mut symp) = (0.0f64, 0.0f64);
    for (re, im) in VERIFY_Z {
        let ms = integrate_monodromy(p, Complex64::new(re, im), solver)?;
        let det = ms.balanced_m().determinant() * (2.0 * n as f64 * ms.log_scale).exp();
        det_err = det_err.max((det - 1.0).norm());
        symp = symp.max(symplectic_residual(&ms));
    }
    t.le("det_monodromy", det_err, 1e-8);
    t.le("symplectic_residual", symp, 1e-8);

    let oracle_clusters = n_max.min(4);
    let (per, anti) = eigenvalues(p, oracle_clusters, &cfg.spectrum)?;
    for list in [&per, &anti] {
        let fd = fd_eigenvalues(p, list.kind, list.entries.len(), 512)?;
        let worst = list
            .entries
            .iter()
            .zip(&fd)
            .map(|(e, o)| (e.lambda - o.lambda).abs() / o.error_estimate.max(1e-6 * (1.0 + o.lambda.abs())))
            .fold(0.0, f64::max);
        let check = match list.kind {
            EigenKind::Periodic => "oracle_periodic",
            EigenKind::Antiperiodic => "oracle_antiperiodic",
        };
        t.le(check, worst, 1.0);
    }

    let mut qcfg = cfg.quasimomentum.clone();
    qcfg.clusters = n_max;
    let data = prepare(p, &qcfg)?;
    t.le("unclassified_endpoints", data.bands.unclassified as f64, 0.0);
    let traces = trace_integrals_with(&data, &qcfg)?;
    t.le("trace_Q0", traces.q0_relative_error(), 1e-2);
    t.le("trace_Q2", traces.q2_relative_error(), 1e-2);
    t.le("trace_tail_Q0", traces.truncation.tail_relative_q0, 5e-3);
    t.le("trace_tail_Q2", traces.truncation.tail_relative_q2, 5e-3);

    let est = estimate_suite_with(&data, &traces, &qcfg)?;
    for c in &est.checks {
        t.le(c.name, -c.slack, 0.0);
    }

    quasimomentum_structure(&mut t, &data, &qcfg)?;

    match data.largest_gap_index() {
        Some(idx) => {
            let g = gap_identity_check_with(&data, &traces, idx, &qcfg)?;
            if g.inconclusive {
                t.push("gap_identity", g.max_relative_residual, 2e-2, CheckStatus::Skip);
            } else {
                t.le("gap_identity", g.max_relative_residual, 2e-2);
            }
        }
        None => t.push("gap_identity", 0.0, 2e-2, CheckStatus::Skip),
    }
    Ok(t.rows)
}

/// u constant on gaps with values in (π/N)ℤ, v ≥ 0, v even, v concave on gaps.
fn quasimomentum_structure(t: &mut Table, data: &SpectralData, qcfg: &QuasimomentumConfig) -> Result<()> {
    let n = data.potential.dim() as f64;
    let gaps: Vec<_> = data.gaps().copied().collect();
    let mut xs = Vec::new();
    for g in &gaps {
        for k in 1..=7 {
            let x = g.x_lo + (g.x_hi - g.x_lo) * k as f64 / 8.0;
            xs.push(x);
            xs.push(-x);
        }
    }
    for piece in data.pieces.iter().filter(|p| !p.gap) {
        let x = 0.5 * (piece.x_lo + piece.x_hi);
        xs.push(x);
        xs.push(-x);
    }
    xs.push(0.5);
    xs.push(-0.5);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let grid = exponent_and_density(&data.potential, &xs, qcfg.eps, &qcfg.spectrum)?;
    let at = |x: f64| grid.real_axis.iter().find(|s| s.x == x).copied();

    let min_v = grid.real_axis.iter().map(|s| s.v).fold(f64::INFINITY, f64::min);
    t.le("v_nonnegative", -min_v.min(0.0), 0.0);
    let asym = grid
        .real_axis
        .iter()
        .filter_map(|s| at(-s.x).map(|m| (s.v - m.v).abs()))
        .fold(0.0, f64::max);
    t.le("v_even", asym, 1e-8);

    let (mut spread, mut lattice, mut concavity) = (0.0f64, 0.0f64, f64::NEG_INFINITY);
    for g in &gaps {
        let samples: Vec<_> = (1..=7)
            .filter_map(|k| at(g.x_lo + (g.x_hi - g.x_lo) * k as f64 / 8.0))
            .collect();
        let us: Vec<f64> = samples.iter().map(|s| s.u).collect();
        let (lo, hi) = us.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, &u| (a.0.min(u), a.1.max(u)));
        spread = spread.max(hi - lo);
        let k = us[0] * n / PI;
        lattice = lattice.max((k - k.round()).abs() * PI / n);
        for w in samples.windows(3) {
            concavity = concavity.max(w[0].v - 2.0 * w[1].v + w[2].v);
        }
    }
    if gaps.is_empty() {
        t.push("u_constant_on_gaps", 0.0, 1e-6, CheckStatus::Skip);
        t.push("v_concave_on_gaps", 0.0, 0.0, CheckStatus::Skip);
    } else {
        t.le("u_constant_on_gaps", spread.max(lattice), 1e-6);
        if concavity < 0.0 {
            t.push("v_concave_on_gaps", concavity, 0.0, CheckStatus::Pass);
        } else {
            t.push("v_concave_on_gaps", concavity, 0.0, CheckStatus::Fail);
        }
    }
    Ok(())
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<Outcome> {
    let n_max = cfg.opts.n_max.unwrap_or(6);
    let targets: Vec<(String, PeriodicMatrixPotential)> = if let Some(path) = &cfg.opts.potential {
        vec![(path.display().to_string(), PeriodicMatrixPotential::load(path)?)]
    } else if let Some(seed) = cfg.opts.random_seed {
        vec![(format!("random-seed-{seed}"), corpus::random_potential(seed))]
    } else {
        corpus::corpus().into_iter().map(|(n, p)| (n.to_string(), p)).collect()
    };
    let mut rows = Vec::new();
    for (name, p) in &targets {
        rows.extend(verify_potential(name, p, n_max, cfg)?);
    }
    let pass = rows.iter().all(|r| r.status != CheckStatus::Fail);
    let text = match cfg.opts.format {
        Format::Json => to_json(&json!({ "seed": cfg.opts.random_seed, "checks": rows, "pass": pass }))?,
        Format::Csv => {
            let mut s = String::from("potential,check,value,threshold,status\n");
            for r in &rows {
                let _ = writeln!(
                    s,
                    "{},{},{},{},{}",
                    r.potential,
                    r.check,
                    fmt_num(r.value),
                    fmt_num(r.threshold),
                    r.status.name()
                );
            }
            s
        }
    };
    emit(cfg.opts.out.as_deref(), &text)?;
    Ok(if pass { Outcome::Ok } else { Outcome::ChecksFailed })
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::Spectrum => cmd_spectrum(cfg),
        Command::Eigs => cmd_eigs(cfg),
        Command::Resonances => cmd_resonances(cfg),
        Command::Traces => cmd_traces(cfg),
        Command::Qmap => cmd_qmap(cfg),
        Command::Verify => cmd_verify(cfg),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = RunConfig::new(cli.command, cli.opts).and_then(|cfg| run(&cfg));
    match result {
        Ok(Outcome::Ok) => EXIT_OK,
        Ok(Outcome::ChecksFailed) => EXIT_CHECKS_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_NUMERICAL
            }
        }
    }
}
