//! Finite-difference laboratory for the viscous chemotaxis conservation laws
//!
//! ```text
//! u_t + (eps u^2 - v)_x = eps u_xx
//! v_t - (u v)_x         = v_xx
//! ```
//!
//! and their zero-viscosity limit (`eps = 0`), on the whole line (truncated to
//! `[-L, L]`) or on `[0, 1]` with `u = 0`, `v_x = 0` at the ends.
//!
//! * [`model`]: grids, states, problem setups, fluxes and the entropy pair.
//! * [`tridiag`]: Thomas elimination used by the implicit diffusion stages.
//! * [`stepper`]: second-order IMEX integration and trajectory recording.
//! * [`diagnostics`]: discrete norms, entropy audit, positivity floor.
//! * [`convergence`]: epsilon-ladder rate studies and self-convergence.
//! * [`hopf_cole`]: the Keller-Segel transform and parameter scaling.

pub mod convergence;
pub mod diagnostics;
pub mod error;
pub mod hopf_cole;
pub mod model;
pub mod stepper;
pub mod tridiag;

pub use convergence::{
    fit_slope, run_ladder, self_convergence, ConvergenceReport, RungError, SelfConvergence,
    SlopeFit, DEFAULT_LADDER,
};
pub use diagnostics::{
    audit_record, entropy_residual, norms, positivity_floor_check, DiagnosticsRecord,
    EntropyResidualField, FloorReport, Norms,
};
pub use error::{Error, Result};
pub use hopf_cole::{
    hopf_cole, inverse_hopf_cole, rescale_to_normalized, residual_vs_conservation_form, KsParams,
    KsState, Scaling,
};
pub use model::{
    entropy_pair, flux, make_initial, EntropyValue, Grid1D, InitialProfile, ProblemKind,
    ProblemSetup, State,
};
pub use stepper::{
    integrate, step_limit, step_viscous, Snapshot, SolverConfig, TimeStep, TrajectoryRecorder,
};
pub use tridiag::{solve_tridiagonal, TridiagonalSystem};
