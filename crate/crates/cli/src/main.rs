use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use halfic::experiment::{
    parse_manifest, run_experiment, run_suite, write_csv, write_json, OutputFormat, RunConfig,
    RunRecord, RunStatus, Solver,
};
use halfic::RunError;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Fp16,
    Bf16,
    Fp32,
    Fp64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SolverArg {
    Cg,
    Gmres,
    LuIr,
    PlainKrylov,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputArg {
    Csv,
    Json,
}

/// Incomplete Cholesky in simulated low precision with iterative refinement.
///
/// Runs one experiment on a Matrix Market file (--matrix) or every
/// configuration of a manifest (--suite, one JSON object per line) and
/// prints one record per run. The right-hand side is A times the vector of
/// ones; the solve runs on the symmetrically scaled system.
#[derive(Debug, Parser)]
#[command(name = "halfic", version)]
struct Cli {
    /// Matrix Market file (coordinate real symmetric).
    #[arg(long, required_unless_present = "suite", conflicts_with = "suite")]
    matrix: Option<PathBuf>,

    /// Manifest with one JSON run configuration per line.
    #[arg(long)]
    suite: Option<PathBuf>,

    /// Label for the record (default: file stem).
    #[arg(long)]
    id: Option<String>,

    /// Level of fill.
    #[arg(long, default_value_t = 0)]
    level: usize,

    /// Factor format.
    #[arg(long, value_enum, default_value = "fp16")]
    format: FormatArg,

    #[arg(long, value_enum, default_value = "cg")]
    solver: SolverArg,

    /// Outer backward-error target (default 1e3 * u64).
    #[arg(long)]
    delta: Option<f64>,

    /// Inner Krylov tolerance (default u64^(1/4); delta for plain-krylov).
    #[arg(long)]
    delta_krylov: Option<f64>,

    /// Inner iteration cap (default 1000; 2000 for plain-krylov).
    #[arg(long)]
    inner_maxit: Option<usize>,

    /// Outer iteration cap (default 20; 1000 for lu-ir; 1 for plain-krylov).
    #[arg(long)]
    outer_itmax: Option<usize>,

    /// Pivot threshold (default 1e-5 for half formats, 1e-20 otherwise).
    #[arg(long)]
    tau: Option<f64>,

    /// First nonzero diagonal shift.
    #[arg(long, default_value_t = 1e-3)]
    shift_init: f64,

    /// Restarts allowed after the unshifted attempt.
    #[arg(long, default_value_t = 40)]
    max_restarts: usize,

    #[arg(long, value_enum, default_value = "csv")]
    output: OutputArg,

    /// Write records here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Cli {
    fn config(&self, matrix: PathBuf) -> RunConfig {
        RunConfig {
            matrix_path: matrix,
            id: self.id.clone(),
            level: self.level,
            format: match self.format {
                FormatArg::Fp16 => "fp16",
                FormatArg::Bf16 => "bf16",
                FormatArg::Fp32 => "fp32",
                FormatArg::Fp64 => "fp64",
            }
            .into(),
            solver: match self.solver {
                SolverArg::Cg => Solver::Cg,
                SolverArg::Gmres => Solver::Gmres,
                SolverArg::LuIr => Solver::LuIr,
                SolverArg::PlainKrylov => Solver::PlainKrylov,
            },
            delta: self.delta,
            delta_krylov: self.delta_krylov,
            inner_maxit: self.inner_maxit,
            outer_itmax: self.outer_itmax,
            tau: self.tau,
            shift_init: self.shift_init,
            max_restarts: self.max_restarts,
            output: self.output_format(),
        }
    }

    fn output_format(&self) -> OutputFormat {
        match self.output {
            OutputArg::Csv => OutputFormat::Csv,
            OutputArg::Json => OutputFormat::Json,
        }
    }
}

fn report_error(identifier: &str, err: &RunError) {
    let value = serde_json::json!({ "identifier": identifier, "error": err.to_string() });
    eprintln!("{value}");
}

fn emit(records: &[RunRecord], format: OutputFormat, out: Option<&PathBuf>) -> io::Result<()> {
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(io::BufWriter::new(fs::File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    };
    if records.is_empty() {
        return sink.flush();
    }
    match format {
        OutputFormat::Csv => write_csv(records, &mut sink).map_err(io::Error::other)?,
        OutputFormat::Json => {
            write_json(records, &mut sink).map_err(io::Error::other)?;
            writeln!(sink)?;
        }
    }
    sink.flush()
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let configs = match &cli.suite {
        Some(path) => {
            let text = match fs::read_to_string(path) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("halfic: cannot read manifest {}: {e}", path.display());
                    return ExitCode::FAILURE;
                }
            };
            match parse_manifest(&text, path.parent()) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("halfic: {e}");
                    return ExitCode::FAILURE;
                }
            }
        }
        None => vec![cli.config(cli.matrix.clone().expect("clap enforces --matrix"))],
    };

    let results = if cli.suite.is_some() {
        run_suite(&configs)
    } else {
        vec![run_experiment(&configs[0])]
    };

    let mut records = Vec::with_capacity(results.len());
    let mut failures = 0;
    for (cfg, result) in configs.iter().zip(results) {
        match result {
            Ok(r) => records.push(r),
            Err(e) => {
                failures += 1;
                report_error(&cfg.identifier(), &e);
            }
        }
    }

    if let Err(e) = emit(&records, cli.output_format(), cli.out.as_ref()) {
        eprintln!("halfic: writing output: {e}");
        return ExitCode::FAILURE;
    }
    if cli.suite.is_some() {
        let converged = records
            .iter()
            .filter(|r| r.status == RunStatus::Converged)
            .count();
        eprintln!(
            "{} runs: {} records, {} converged, {} failed",
            configs.len(),
            records.len(),
            converged,
            failures
        );
    }
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
