//! Experiment pipeline: read, scale, squeeze, pattern, factorize, refine.
//!
//! [`run_experiment`] runs one configuration and produces a flat
//! [`RunRecord`]; [`run_suite`] runs many in parallel and returns results in
//! input order. Records serialize to CSV (fixed column order, see
//! [`RunRecord::CSV_COLUMNS`]) or to a JSON array of flat objects.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::RunError;
use crate::factor::{default_tau, shifted_ic, ShiftParams};
use crate::krylov::KrylovStatus;
use crate::precision::FpFormat;
use crate::refine::{
    backward_error, default_delta, default_delta_krylov, ic_krylov_ir, ic_lu_ir, KrylovIrParams,
    Method, SolveReport,
};
use crate::sparse::{inf_norm_vector, l2_scale, read_matrix_market_file, squeeze, SparseSpd};
use crate::symbolic::ic_pattern;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    /// IC-CG-IR.
    #[default]
    Cg,
    /// IC-GMRES-IR.
    Gmres,
    /// IC-LU-IR.
    LuIr,
    /// A single preconditioned GMRES solve (one outer step).
    PlainKrylov,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Cg => "cg",
            Solver::Gmres => "gmres",
            Solver::LuIr => "lu-ir",
            Solver::PlainKrylov => "plain-krylov",
        }
    }
}

impl std::str::FromStr for Solver {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cg" => Ok(Solver::Cg),
            "gmres" => Ok(Solver::Gmres),
            "lu-ir" => Ok(Solver::LuIr),
            "plain-krylov" => Ok(Solver::PlainKrylov),
            _ => Err(format!("unknown solver `{s}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// One experiment. Unset optional fields take solver-dependent defaults,
/// see the `effective_*` methods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub matrix_path: PathBuf,
    /// Label for the record; the file stem when unset.
    pub id: Option<String>,
    pub level: usize,
    /// `fp16`, `bf16`, `fp32` or `fp64`.
    pub format: String,
    pub solver: Solver,
    pub delta: Option<f64>,
    pub delta_krylov: Option<f64>,
    pub inner_maxit: Option<usize>,
    pub outer_itmax: Option<usize>,
    pub tau: Option<f64>,
    pub shift_init: f64,
    pub max_restarts: usize,
    pub output: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            matrix_path: PathBuf::new(),
            id: None,
            level: 0,
            format: "fp16".into(),
            solver: Solver::Cg,
            delta: None,
            delta_krylov: None,
            inner_maxit: None,
            outer_itmax: None,
            tau: None,
            shift_init: 1e-3,
            max_restarts: 40,
            output: OutputFormat::Csv,
        }
    }
}

impl RunConfig {
    pub fn new(matrix_path: impl Into<PathBuf>) -> Self {
        RunConfig {
            matrix_path: matrix_path.into(),
            ..Default::default()
        }
    }

    pub fn factor_format(&self) -> Result<FpFormat, RunError> {
        self.format
            .parse()
            .map_err(|e: crate::error::FormatError| RunError::Config(e.to_string()))
    }

    pub fn effective_delta(&self) -> f64 {
        self.delta.unwrap_or_else(default_delta)
    }

    /// Inner tolerance; a single GMRES solve has to reach the outer target.
    pub fn effective_delta_krylov(&self) -> f64 {
        match (self.delta_krylov, self.solver) {
            (Some(d), _) => d,
            (None, Solver::PlainKrylov) => self.effective_delta(),
            (None, _) => default_delta_krylov(),
        }
    }

    pub fn effective_inner_maxit(&self) -> usize {
        match (self.inner_maxit, self.solver) {
            (Some(m), _) => m,
            (None, Solver::PlainKrylov) => 2000,
            (None, _) => 1000,
        }
    }

    pub fn effective_outer_itmax(&self) -> usize {
        match (self.outer_itmax, self.solver) {
            (Some(m), _) => m,
            (None, Solver::PlainKrylov) => 1,
            (None, Solver::LuIr) => 1000,
            (None, _) => 20,
        }
    }

    pub fn effective_tau(&self) -> Result<f64, RunError> {
        Ok(self.tau.unwrap_or(default_tau(self.factor_format()?)))
    }

    pub fn identifier(&self) -> String {
        self.id.clone().unwrap_or_else(|| {
            self.matrix_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default()
        })
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |msg: String| Err(RunError::Config(msg));
        if self.matrix_path.as_os_str().is_empty() {
            return bad("matrix_path is empty".into());
        }
        self.factor_format()?;
        let positive = |name: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => {
                Err(RunError::Config(format!("{name} must be positive and finite, got {x}")))
            }
            _ => Ok(()),
        };
        positive("delta", self.delta)?;
        positive("delta_krylov", self.delta_krylov)?;
        positive("tau", self.tau)?;
        if !(self.shift_init >= 0.0 && self.shift_init.is_finite()) {
            return bad(format!("shift_init must be >= 0, got {}", self.shift_init));
        }
        if self.max_restarts == 0 {
            return bad("max_restarts must be at least 1".into());
        }
        if self.inner_maxit == Some(0) {
            return bad("inner_maxit must be at least 1".into());
        }
        if self.outer_itmax == Some(0) {
            return bad("outer_itmax must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    NotConverged,
    Diverged,
    /// CG stopped on small curvature before convergence.
    SmallCurvature,
}

/// One output row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub identifier: String,
    pub level: usize,
    pub format: String,
    pub solver: Solver,
    pub n: usize,
    /// Lower-triangle entries of `A`.
    pub nnz_a: usize,
    pub norm_a: f64,
    pub norm_b: f64,
    pub nnz_l: usize,
    /// Off-diagonal entries removed when squeezing.
    pub dropped: usize,
    pub alpha: f64,
    pub nmod: usize,
    pub nscale: usize,
    pub nofl: usize,
    pub restarts: usize,
    pub resinit: f64,
    pub resfinal: f64,
    /// Backward error of the recovered solution for the unscaled system.
    pub resfinal_unscaled: f64,
    pub iouter: usize,
    pub totits: usize,
    pub maxbasis: usize,
    pub fallbacks: usize,
    pub status: RunStatus,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub const CSV_COLUMNS: [&'static str; 24] = [
        "identifier",
        "level",
        "format",
        "solver",
        "n",
        "nnz_a",
        "norm_a",
        "norm_b",
        "nnz_l",
        "dropped",
        "alpha",
        "nmod",
        "nscale",
        "nofl",
        "restarts",
        "resinit",
        "resfinal",
        "resfinal_unscaled",
        "iouter",
        "totits",
        "maxbasis",
        "fallbacks",
        "status",
        "wall_seconds",
    ];

    /// Equality ignoring `wall_seconds`.
    pub fn same_result(&self, other: &RunRecord) -> bool {
        let mut a = self.clone();
        a.wall_seconds = other.wall_seconds;
        bits_eq(&a, other)
    }
}

fn bits_eq(a: &RunRecord, b: &RunRecord) -> bool {
    let f = |x: f64, y: f64| x.to_bits() == y.to_bits();
    a.identifier == b.identifier
        && a.level == b.level
        && a.format == b.format
        && a.solver == b.solver
        && a.n == b.n
        && a.nnz_a == b.nnz_a
        && f(a.norm_a, b.norm_a)
        && f(a.norm_b, b.norm_b)
        && a.nnz_l == b.nnz_l
        && a.dropped == b.dropped
        && f(a.alpha, b.alpha)
        && a.nmod == b.nmod
        && a.nscale == b.nscale
        && a.nofl == b.nofl
        && a.restarts == b.restarts
        && f(a.resinit, b.resinit)
        && f(a.resfinal, b.resfinal)
        && f(a.resfinal_unscaled, b.resfinal_unscaled)
        && a.iouter == b.iouter
        && a.totits == b.totits
        && a.maxbasis == b.maxbasis
        && a.fallbacks == b.fallbacks
        && a.status == b.status
        && f(a.wall_seconds, b.wall_seconds)
}

/// `x = ones(n)` and `b = A x`.
pub fn build_rhs(a: &SparseSpd) -> (Vec<f64>, Vec<f64>) {
    let x = vec![1.0; a.n()];
    let b = a.matvec(&x).expect("dimensions agree");
    (b, x)
}

/// Everything a run produces, for callers that need more than the record.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub record: RunRecord,
    pub report: SolveReport,
    /// Solution of the unscaled system.
    pub solution: Vec<f64>,
}

/// Runs one configuration on a matrix read from `config.matrix_path`.
pub fn run_experiment(config: &RunConfig) -> Result<RunRecord, RunError> {
    config.validate()?;
    let a = read_matrix_market_file(&config.matrix_path).map_err(|source| RunError::Matrix {
        path: config.matrix_path.display().to_string(),
        source,
    })?;
    run_on_matrix(&a, config).map(|o| o.record)
}

/// Runs one configuration on an in-memory matrix; `matrix_path` is unused
/// apart from naming.
pub fn run_on_matrix(a: &SparseSpd, config: &RunConfig) -> Result<RunOutput, RunError> {
    let start = Instant::now();
    let f = config.factor_format()?;
    let (b, _) = build_rhs(a);
    let (ahat, s) = l2_scale(a).map_err(RunError::Scale)?;
    let bhat = s.apply_inverse(&b);

    // the fill pattern is taken from the entries that survive squeezing
    let (alow, squeezed) = squeeze(&ahat, f).map_err(RunError::Scale)?;
    let pattern = ic_pattern(&alow, config.level);
    let params = ShiftParams {
        tau: config.effective_tau()?,
        alpha_s: config.shift_init,
        max_restarts: config.max_restarts,
        safe_checks: f.is_half(),
    };
    let factor = shifted_ic(&ahat, &pattern, f, params)?;

    let delta = config.effective_delta();
    let report = match config.solver {
        Solver::LuIr => ic_lu_ir(&ahat, &bhat, &factor, delta, config.effective_outer_itmax()),
        solver => {
            let method = if solver == Solver::Cg {
                Method::Cg
            } else {
                Method::Gmres
            };
            let p = KrylovIrParams {
                method,
                delta,
                delta_krylov: config.effective_delta_krylov(),
                inner_maxit: config.effective_inner_maxit(),
                itmax: config.effective_outer_itmax(),
            };
            ic_krylov_ir(&ahat, &bhat, &factor, p)
        }
    };
    let x = s.apply_inverse(&report.solution);
    let status = if report.converged {
        RunStatus::Converged
    } else if report.diverged {
        RunStatus::Diverged
    } else if report
        .per_outer
        .last()
        .is_some_and(|p| p.status == Some(KrylovStatus::SmallCurvature))
    {
        RunStatus::SmallCurvature
    } else {
        RunStatus::NotConverged
    };
    let stats = factor.stats();
    let record = RunRecord {
        identifier: config.identifier(),
        level: config.level,
        format: f.name(),
        solver: config.solver,
        n: a.n(),
        nnz_a: a.nnz(),
        norm_a: a.inf_norm(),
        norm_b: inf_norm_vector(&b),
        nnz_l: factor.nnz(),
        dropped: squeezed.dropped_underflow + squeezed.flushed_subnormal,
        alpha: factor.alpha(),
        nmod: stats.nmod,
        nscale: stats.nscale,
        nofl: stats.nofl,
        restarts: stats.restarts,
        resinit: report.resinit,
        resfinal: report.resfinal,
        resfinal_unscaled: backward_error(a, &x, &b),
        iouter: report.iouter,
        totits: report.totits,
        maxbasis: report.maxbasis,
        fallbacks: report.fallbacks,
        status,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        record,
        report,
        solution: x,
    })
}

/// Runs every configuration, concurrently, keeping input order.
pub fn run_suite(configs: &[RunConfig]) -> Vec<Result<RunRecord, RunError>> {
    configs.par_iter().map(run_experiment).collect()
}

/// Parses a manifest with one JSON configuration per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn parse_manifest(text: &str, base: Option<&Path>) -> Result<Vec<RunConfig>, RunError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut cfg: RunConfig = serde_json::from_str(t)
            .map_err(|e| RunError::Config(format!("manifest line {}: {e}", idx + 1)))?;
        if let Some(base) = base {
            if cfg.matrix_path.is_relative() {
                cfg.matrix_path = base.join(&cfg.matrix_path);
            }
        }
        out.push(cfg);
    }
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RunRecord::CSV_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<RunRecord>, csv::Error> {
    csv::Reader::from_reader(input).deserialize().collect()
}

pub fn write_json<W: Write>(records: &[RunRecord], out: W) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, records)
}

pub fn read_json<R: Read>(input: R) -> serde_json::Result<Vec<RunRecord>> {
    serde_json::from_reader(input)
}
