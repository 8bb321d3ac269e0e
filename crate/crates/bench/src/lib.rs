//! Shared fixtures for the criterion benchmarks.

use visclimit::{make_initial, Grid1D, InitialProfile, ProblemKind, ProblemSetup, State};

/// IBVP cosine-pair setup and its initial state on `n_cells` cells.
pub fn ibvp_fixture(epsilon: f64, n_cells: usize) -> (ProblemSetup, Grid1D, State) {
    let setup = ProblemSetup::new(
        ProblemKind::Ibvp,
        epsilon,
        0.5,
        InitialProfile::CosinePair {
            amplitude_u: 0.3,
            amplitude_v: 0.5,
        },
    );
    let grid = Grid1D::unit_interval(n_cells).expect("valid grid");
    let state = make_initial(&setup, &grid).expect("compatible data");
    (setup, grid, state)
}
