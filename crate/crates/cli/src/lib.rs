//! Campaign runner behind the `optrank` binary.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use optrank::blackdot::{blackdot, positivity_repair, DiagMode};
use optrank::explicit::{
    generalized_kms_split, power_split, precond_hankel, precond_hartley_kms, precond_kms,
    precond_log, precond_rational, precond_z, GeneralizedKmsTerm,
};
use optrank::solvers::{cluster_report_capped, gmres, pcg, preconditioned_spectrum, SolveReport};
use optrank::structured::toeplitz_from_symbol;
use optrank::{AlgebraId, AlgebraPlusLowRank, Error as CoreError, StructuredMatrix, SymbolSpec, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const SCHEMA: u32 = 1;
pub const DEFAULT_CLI_DENSE_CAP: usize = 512;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported combination ({0})")]
    Unsupported(CoreError),
    #[error("solver did not converge for n = {0:?}")]
    NotConverged(Vec<usize>),
    #[error("{0}")]
    Core(CoreError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::NotConverged(_) | CliError::Core(_) => 1,
            CliError::Unsupported(_) => 2,
            CliError::Config(_) | CliError::Io(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::UnsupportedCombination(_)
            | CoreError::OracleUnsupported(_)
            | CoreError::UnsupportedHartleyIndex(_)
            | CoreError::NotAOneSpace(_) => CliError::Unsupported(e),
            CoreError::InvalidParameter(_)
            | CoreError::ParseAlgebra(_)
            | CoreError::DegreeViolation(_)
            | CoreError::DuplicateRoots
            | CoreError::QuadratureUnderResolved { .. } => CliError::Config(e.to_string()),
            other => CliError::Core(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Structure {
    #[default]
    Toeplitz,
    Hankel,
}

/// The matrix family of a campaign, instantiated once per size.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MatrixSpec {
    Identity,
    Kms { lambda: f64 },
    Symbol {
        symbol: SymbolSpec,
        #[serde(default)]
        structure: Structure,
        #[serde(default)]
        quadrature_points: Option<usize>,
    },
    /// Lower triangular `t_m = m^p`, or `|i-j|^p` when symmetric.
    Power { p: usize, #[serde(default)] symmetric: bool },
    GeneralizedKms { terms: Vec<GeneralizedKmsTerm> },
    Toeplitz { a: Vec<C64>, b: Vec<C64> },
    Hankel { u: Vec<C64>, v: Vec<C64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    #[default]
    Cg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    None,
    Blackdot,
    Explicit,
}

impl Method {
    fn parse(s: &str) -> CliResult<Self> {
        match s {
            "none" => Ok(Method::None),
            "blackdot" => Ok(Method::Blackdot),
            "explicit" => Ok(Method::Explicit),
            other if other.starts_with("explicit:") => Ok(Method::Explicit),
            other => Err(CliError::Config(format!("unknown method '{other}'"))),
        }
    }
}

fn default_epsilon() -> f64 {
    1e-8
}
fn default_r_max() -> usize {
    64
}
fn default_tol() -> f64 {
    1e-10
}
fn default_maxit() -> usize {
    2000
}
fn default_restart() -> usize {
    optrank::solvers::DEFAULT_RESTART
}
fn default_true() -> bool {
    true
}
fn default_cluster_radius() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub schema: u32,
    pub matrix: MatrixSpec,
    pub algebra: String,
    pub method: String,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_r_max")]
    pub r_max: usize,
    #[serde(default)]
    pub solver: SolverKind,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_maxit")]
    pub maxit: usize,
    #[serde(default = "default_restart")]
    pub restart: usize,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    /// Drop the low-rank remainder and precondition with the algebra part alone.
    #[serde(default)]
    pub algebra_only: bool,
    /// Also run the unpreconditioned solver.
    #[serde(default = "default_true")]
    pub control: bool,
    #[serde(default = "default_cluster_radius")]
    pub cluster_radius: f64,
    #[serde(default)]
    pub zero_r_diag: bool,
    #[serde(default)]
    pub positivity_delta: Option<f64>,
    /// Wall times are machine dependent; they are left blank unless requested.
    #[serde(default)]
    pub record_wall_time: bool,
}

impl CampaignConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let cfg: CampaignConfig = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> CliResult<()> {
        if self.schema != SCHEMA {
            return Err(CliError::Config(format!("schema {} is not supported (expected {SCHEMA})", self.schema)));
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            return Err(CliError::Config("sizes must be a nonempty list of positive integers".into()));
        }
        if !(self.epsilon > 0.0) || !(self.tol > 0.0) {
            return Err(CliError::Config("epsilon and tol must be positive".into()));
        }
        self.algebra_id()?;
        self.method_kind()?;
        Ok(())
    }

    pub fn algebra_id(&self) -> CliResult<AlgebraId> {
        self.algebra.parse().map_err(|e: CoreError| CliError::Config(e.to_string()))
    }

    pub fn method_kind(&self) -> CliResult<Method> {
        Method::parse(&self.method)
    }
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub dense_cap: Option<usize>,
    pub seed: Option<u64>,
}

impl RunOptions {
    fn dense_cap(&self) -> usize {
        self.dense_cap.unwrap_or(DEFAULT_CLI_DENSE_CAP)
    }
}

fn matrix_for(spec: &MatrixSpec, n: usize) -> CliResult<StructuredMatrix> {
    let c = |x: f64| C64::new(x, 0.0);
    Ok(match spec {
        MatrixSpec::Identity => {
            let mut a = vec![c(0.0); n];
            a[0] = c(1.0);
            StructuredMatrix::toeplitz(a.clone(), a)?
        }
        MatrixSpec::Kms { lambda } => StructuredMatrix::kms(n, *lambda)?,
        MatrixSpec::Symbol { symbol, structure, quadrature_points } => {
            let q = quadrature_points.unwrap_or(8 * n.max(8));
            match structure {
                Structure::Toeplitz => toeplitz_from_symbol(symbol, n, q)?,
                Structure::Hankel => optrank::explicit::hankel_from_symbol(symbol, n, q)?,
            }
        }
        MatrixSpec::Power { p, symmetric } => {
            let col: Vec<C64> = (0..n).map(|m| c((m as f64).powi(*p as i32))).collect();
            let row = if *symmetric { col.clone() } else { (0..n).map(|m| if m == 0 { col[0] } else { c(0.0) }).collect() };
            StructuredMatrix::toeplitz(col, row)?
        }
        MatrixSpec::GeneralizedKms { terms } => {
            let col: Vec<C64> = (0..n)
                .map(|m| {
                    terms
                        .iter()
                        .map(|t| {
                            let f: f64 = t.f.iter().rev().fold(0.0, |acc, k| acc * m as f64 + k);
                            c(t.gamma * f * t.lambda.powi(m as i32))
                        })
                        .sum()
                })
                .collect();
            StructuredMatrix::toeplitz(col.clone(), col)?
        }
        MatrixSpec::Toeplitz { a, b } => {
            check_len(a.len(), n)?;
            StructuredMatrix::toeplitz(a.clone(), b.clone())?
        }
        MatrixSpec::Hankel { u, v } => {
            check_len(u.len(), n)?;
            StructuredMatrix::hankel(u.clone(), v.clone())?
        }
    })
}

fn check_len(len: usize, n: usize) -> CliResult<()> {
    if len != n {
        return Err(CliError::Config(format!("explicit vectors have length {len} but size {n} was requested")));
    }
    Ok(())
}

fn explicit_for(cfg: &CampaignConfig, n: usize) -> CliResult<AlgebraPlusLowRank> {
    let id = cfg.algebra_id()?;
    let unsupported = |what: &str| CliError::Unsupported(CoreError::UnsupportedCombination(format!("no explicit splitting of {what} in {id}")));
    if let (MatrixSpec::Kms { lambda }, AlgebraId::Hartley(k)) = (&cfg.matrix, id) {
        return Ok(precond_hartley_kms(n, *lambda, k)?);
    }
    if let MatrixSpec::Identity = cfg.matrix {
        return Ok(optrank::precond::identity(id, n));
    }
    let AlgebraId::PhiCirculant(phi) = id else {
        return Err(unsupported("this matrix"));
    };
    Ok(match &cfg.matrix {
        MatrixSpec::Kms { lambda } => precond_kms(n, *lambda, phi)?,
        MatrixSpec::Symbol { symbol, structure: Structure::Hankel, .. } => precond_hankel(symbol, n, id, cfg.epsilon)?,
        MatrixSpec::Symbol { symbol, .. } => match symbol {
            SymbolSpec::ZetaLambda { lambda } => precond_z(n, *lambda, phi)?,
            SymbolSpec::KmsKappa { lambda } => precond_kms(n, *lambda, phi)?,
            SymbolSpec::RationalPq { p, q_roots, residuals } => precond_rational(p, q_roots, residuals.as_deref(), n, phi)?,
            SymbolSpec::LogSingularity { z0 } => precond_log(n, *z0, phi, cfg.epsilon)?,
            _ => return Err(unsupported("this symbol")),
        },
        MatrixSpec::Power { p, symmetric } => power_split(n, *p, phi, *symmetric)?.into_precond(0.0)?,
        MatrixSpec::GeneralizedKms { terms } => {
            let s = generalized_kms_split(terms, n, phi)?;
            s.into_precond(cfg.epsilon)?
        }
        MatrixSpec::Toeplitz { .. } | MatrixSpec::Hankel { .. } | MatrixSpec::Identity => {
            return Err(unsupported("explicit vectors"));
        }
    })
}

/// Builds the preconditioner a campaign asks for at size `n`.
pub fn build_preconditioner(cfg: &CampaignConfig, a: &StructuredMatrix) -> CliResult<Option<AlgebraPlusLowRank>> {
    let n = a.n();
    let id = cfg.algebra_id()?;
    let p = match cfg.method_kind()? {
        Method::None => return Ok(None),
        Method::Explicit => explicit_for(cfg, n)?,
        Method::Blackdot => {
            let mode = if cfg.zero_r_diag { DiagMode::ZeroRDiag } else { DiagMode::OracleDiag };
            let (p, _) = blackdot(a, id, cfg.epsilon, cfg.r_max.min(n), mode)?;
            p
        }
    };
    let p = if cfg.algebra_only { AlgebraPlusLowRank::diagonal(p.algebra(), p.d().to_vec()) } else { p };
    let p = match cfg.positivity_delta {
        Some(delta) => positivity_repair(&p, delta),
        None => p,
    };
    Ok(Some(p))
}

fn rhs(seed: u64, n: usize) -> Vec<C64> {
    let mut r = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..n).map(|_| C64::new(r.gen_range(-1.0..1.0), 0.0)).collect()
}

fn solve(cfg: &CampaignConfig, a: &StructuredMatrix, p: Option<&AlgebraPlusLowRank>, b: &[C64]) -> CliResult<SolveReport> {
    Ok(match cfg.solver {
        SolverKind::Cg => pcg(a, p, b, cfg.tol, cfg.maxit)?,
        SolverKind::Gmres => gmres(a, p, b, cfg.tol, cfg.maxit, cfg.restart)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub method: String,
    pub status: String,
    pub achieved_rank: Option<usize>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub outliers: Option<usize>,
    pub control_iterations: Option<usize>,
    pub wall_time: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuiltPreconditioner {
    pub n: usize,
    pub preconditioner: AlgebraPlusLowRank,
}

/// File written by `build`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildOutput {
    pub schema: u32,
    pub algebra: String,
    pub method: String,
    pub preconditioners: Vec<BuiltPreconditioner>,
}

impl BuildOutput {
    pub fn find(&self, n: usize) -> Option<&AlgebraPlusLowRank> {
        self.preconditioners.iter().find(|b| b.n == n).map(|b| &b.preconditioner)
    }
}

fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        b = b.num_threads(t.max(1));
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

pub fn cmd_build(cfg: &CampaignConfig, threads: Option<usize>) -> CliResult<BuildOutput> {
    let built: Vec<CliResult<BuiltPreconditioner>> = pool(threads)?.install(|| {
        cfg.sizes
            .par_iter()
            .map(|&n| {
                let a = matrix_for(&cfg.matrix, n)?;
                let p = build_preconditioner(cfg, &a)?
                    .unwrap_or_else(|| optrank::precond::identity(cfg.algebra_id().expect("validated"), n));
                Ok(BuiltPreconditioner { n, preconditioner: p })
            })
            .collect()
    });
    let mut preconditioners = built.into_iter().collect::<CliResult<Vec<_>>>()?;
    preconditioners.sort_by_key(|b| b.n);
    Ok(BuildOutput { schema: SCHEMA, algebra: cfg.algebra.clone(), method: cfg.method.clone(), preconditioners })
}

fn status_of(e: &CliError) -> String {
    match e {
        CliError::Unsupported(inner) | CliError::Core(inner) => format!("error: {inner}"),
        other => format!("error: {other}"),
    }
}

fn bench_one(cfg: &CampaignConfig, n: usize, opts: &RunOptions, loaded: Option<&BuildOutput>) -> (BenchRow, Option<CliError>) {
    let mut row = BenchRow {
        n,
        method: cfg.method.clone(),
        status: "ok".into(),
        achieved_rank: None,
        iterations: None,
        converged: None,
        outliers: None,
        control_iterations: None,
        wall_time: None,
    };
    let mut run = || -> CliResult<()> {
        let seed = opts.seed.unwrap_or(cfg.seed);
        let a = matrix_for(&cfg.matrix, n)?;
        let start = Instant::now();
        let p = match loaded {
            Some(file) => Some(
                file.find(n).cloned().ok_or_else(|| CliError::Config(format!("no stored preconditioner for n = {n}")))?,
            ),
            None => build_preconditioner(cfg, &a)?,
        };
        row.achieved_rank = Some(p.as_ref().map_or(0, AlgebraPlusLowRank::rank));
        let b = rhs(seed, n);
        let report = solve(cfg, &a, p.as_ref(), &b)?;
        let elapsed = start.elapsed().as_secs_f64();
        row.iterations = Some(report.iterations);
        row.converged = Some(report.converged);
        if cfg.record_wall_time {
            row.wall_time = Some(elapsed);
        }
        if n <= opts.dense_cap() {
            row.outliers = Some(cluster_report_capped(&a, p.as_ref(), cfg.cluster_radius, opts.dense_cap())?.outliers);
        }
        if cfg.control {
            let plain = solve(cfg, &a, None, &b)?;
            row.control_iterations = Some(plain.iterations);
        }
        if !report.converged {
            row.status = "not_converged".into();
            return Err(CliError::NotConverged(vec![n]));
        }
        Ok(())
    };
    match run() {
        Ok(()) => (row, None),
        Err(e) => {
            if !matches!(e, CliError::NotConverged(_)) {
                row.status = status_of(&e);
            }
            (row, Some(e))
        }
    }
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(ToString::to_string).unwrap_or_default()
}

pub const BENCH_HEADER: [&str; 9] =
    ["n", "method", "status", "achieved_rank", "iterations", "converged", "outliers", "control_iterations", "wall_time"];

pub fn bench_csv(rows: &[BenchRow]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BENCH_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.method.clone(),
            r.status.clone(),
            opt(&r.achieved_rank),
            opt(&r.iterations),
            opt(&r.converged),
            opt(&r.outliers),
            opt(&r.control_iterations),
            opt(&r.wall_time),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

/// Rows sorted by `n`, plus the most severe per-size failure.
pub fn cmd_bench(
    cfg: &CampaignConfig,
    opts: &RunOptions,
    threads: Option<usize>,
    loaded: Option<&BuildOutput>,
) -> CliResult<(Vec<BenchRow>, Option<CliError>)> {
    let results: Vec<(BenchRow, Option<CliError>)> =
        pool(threads)?.install(|| cfg.sizes.par_iter().map(|&n| bench_one(cfg, n, opts, loaded)).collect());
    let mut results = results;
    results.sort_by_key(|(r, _)| r.n);
    let mut worst: Option<CliError> = None;
    let mut stalled = Vec::new();
    let mut rows = Vec::with_capacity(results.len());
    for (row, err) in results {
        rows.push(row);
        match err {
            Some(CliError::NotConverged(ns)) => stalled.extend(ns),
            Some(e) if worst.as_ref().is_none_or(|w| e.exit_code() > w.exit_code()) => worst = Some(e),
            _ => {}
        }
    }
    if worst.is_none() && !stalled.is_empty() {
        worst = Some(CliError::NotConverged(stalled));
    }
    Ok((rows, worst))
}

pub fn cmd_spectrum(cfg: &CampaignConfig, opts: &RunOptions, threads: Option<usize>) -> CliResult<String> {
    let cap = opts.dense_cap();
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n > cap) {
        return Err(CliError::Core(CoreError::DenseCapExceeded { n, cap }));
    }
    let spectra: Vec<CliResult<(usize, Vec<C64>)>> = pool(threads)?.install(|| {
        cfg.sizes
            .par_iter()
            .map(|&n| {
                let a = matrix_for(&cfg.matrix, n)?;
                let p = build_preconditioner(cfg, &a)?;
                Ok((n, preconditioned_spectrum(&a, p.as_ref(), cap)?))
            })
            .collect()
    });
    let mut spectra = spectra.into_iter().collect::<CliResult<Vec<_>>>()?;
    spectra.sort_by_key(|(n, _)| *n);
    let mut out = String::from("n,index,re,im\n");
    for (n, ev) in spectra {
        for (i, z) in ev.iter().enumerate() {
            writeln!(out, "{n},{i},{:e},{:e}", z.re, z.im).expect("writing to a string");
        }
    }
    Ok(out)
}

pub fn build_json(out: &BuildOutput) -> String {
    serde_json::to_string_pretty(out).expect("preconditioners serialize")
}

pub fn load_build(path: &Path) -> CliResult<BuildOutput> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let out: BuildOutput = serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))?;
    if out.schema != SCHEMA {
        return Err(CliError::Config(format!("stored schema {} is not supported", out.schema)));
    }
    Ok(out)
}
