//! Breakdown-safe incomplete Cholesky factorization in simulated low
//! precision, used as a preconditioner for mixed-precision iterative
//! refinement.
//!
//! The pipeline for a sparse SPD system `A x = b`:
//!
//! 1. [`sparse::l2_scale`] symmetrically scales `A` so every entry has
//!    magnitude at most one.
//! 2. [`sparse::squeeze`] rounds the scaled matrix into the factor format.
//! 3. [`symbolic::ic_pattern`] computes the IC(ℓ) fill pattern.
//! 4. [`factor::shifted_ic`] factorizes with overflow-safe checks, shifting
//!    the diagonal and restarting on breakdown.
//! 5. [`refine::ic_krylov_ir`] or [`refine::ic_lu_ir`] refine the solution to
//!    double-precision accuracy.
//!
//! [`experiment`] glues these together for file-based runs.

pub mod error;
pub mod experiment;
pub mod factor;
pub mod krylov;
pub mod precision;
pub mod refine;
pub mod sparse;
pub mod symbolic;
pub mod trisolve;

pub use error::{FactorError, FormatError, MatrixError, RunError};
pub use experiment::{run_experiment, run_suite, RunConfig, RunRecord, RunStatus, Solver};
pub use factor::{ic_attempt, shifted_ic, Breakdown, BreakdownKind, IcFactor, ShiftParams};
pub use krylov::{gmres, pcg, KrylovOutcome, KrylovStatus};
pub use precision::{round_to, safe_scale_check, safe_update, sim_op, FpFormat, Op, RoundOutcome};
pub use refine::{backward_error, ic_krylov_ir, ic_lu_ir, KrylovIrParams, Method, SolveReport};
pub use sparse::{l2_scale, squeeze, SparseSpd};
pub use symbolic::{ic_pattern, FillPattern};
pub use trisolve::{apply_preconditioner, backward_solve, forward_solve, ExecMode, OverflowSignal};
