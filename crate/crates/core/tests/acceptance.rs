//! Acceptance gate. Runs every criterion, prints one line per criterion and
//! exits non-zero if any of them fails.

use std::process::ExitCode;
use std::time::Instant;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use visclimit::convergence::DEFAULT_LADDER;
use visclimit::diagnostics::{entropy_monotonicity, entropy_residual, positivity_floor_check};
use visclimit::hopf_cole::{hopf_cole, inverse_hopf_cole, scaling_dual_run, KsParams, KsState};
use visclimit::stepper::{
    advance, integrate, ImexStepper, SolverConfig, System, TrajectoryRecorder,
};
use visclimit::{
    run_ladder, self_convergence, solve_tridiagonal, Grid1D, InitialProfile, ProblemKind,
    ProblemSetup, State, TridiagonalSystem,
};

struct Gate {
    failures: usize,
}

impl Gate {
    fn check(&mut self, id: &str, passed: bool, detail: String, started: Instant) {
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("[{tag}] {id}: {detail} ({:.2?})", started.elapsed());
        if !passed {
            self.failures += 1;
        }
    }
}

fn ibvp_setup(eps: f64) -> ProblemSetup {
    ProblemSetup::new(
        ProblemKind::Ibvp,
        eps,
        0.5,
        InitialProfile::CosinePair {
            amplitude_u: 0.3,
            amplitude_v: 0.5,
        },
    )
}

fn cauchy_setup(eps: f64) -> ProblemSetup {
    ProblemSetup::new(
        ProblemKind::CauchyTruncated,
        eps,
        0.5,
        InitialProfile::GaussianBump {
            amplitude_u: 0.3,
            amplitude_v: 0.3,
            width: 1.0,
        },
    )
}

fn steady_state(gate: &mut Gate) {
    let started = Instant::now();
    let mut worst = 0.0f64;
    for (kind, grid) in [
        (ProblemKind::Ibvp, Grid1D::unit_interval(256).unwrap()),
        (
            ProblemKind::CauchyTruncated,
            Grid1D::symmetric(20.0, 512).unwrap(),
        ),
    ] {
        for eps in [0.0, 0.05] {
            let setup = ProblemSetup::new(
                kind,
                eps,
                1.0,
                InitialProfile::Custom {
                    u: vec![0.0; grid.node_count()],
                    v: vec![1.0; grid.node_count()],
                },
            );
            let rest = State::rest(grid.node_count(), 1.0);
            let system = System::from_setup(&setup);
            let dt = SolverConfig::default().dt_for(&rest, &system, &grid);
            let mut stepper = ImexStepper::new(system, grid).unwrap();
            let end = advance(&mut stepper, rest.clone(), dt, 1000).unwrap();
            worst = worst.max(end.max_abs_diff(&rest));
        }
    }
    gate.check(
        "1 steady state",
        worst <= 1e-12,
        format!("max drift after 1000 steps {worst:.3e} <= 1e-12"),
        started,
    );
}

/// Conservation, entropy dissipation and the positivity floor on the two
/// reference runs.
fn reference_runs(gate: &mut Gate) {
    let started = Instant::now();
    let ibvp = ibvp_setup(0.05);
    let ibvp_grid = Grid1D::unit_interval(512).unwrap();
    let ib = integrate(
        &ibvp,
        &ibvp_grid,
        &SolverConfig::default(),
        TrajectoryRecorder::new(1),
    )
    .unwrap();
    let cauchy = cauchy_setup(0.05);
    let cauchy_grid = Grid1D::symmetric(20.0, 2048).unwrap();
    let ca = integrate(
        &cauchy,
        &cauchy_grid,
        &SolverConfig::default(),
        TrajectoryRecorder::new(1),
    )
    .unwrap();

    let drift = |rec: &TrajectoryRecorder, f: fn(&visclimit::DiagnosticsRecord) -> f64| {
        let first = f(&rec.records[0].diagnostics);
        rec.diagnostics()
            .map(|d| (f(d) - first).abs())
            .fold(0.0, f64::max)
    };
    let ib_v = drift(&ib, |d| d.mass_v_excess);
    let ca_u = drift(&ca, |d| d.mass_u);
    let ca_v = drift(&ca, |d| d.mass_v_excess);
    let far = ca.far_field.unwrap();
    gate.check(
        "2 conservation",
        ib_v <= 1e-10 && ca_u <= 1e-8 && ca_v <= 1e-8 && far.passed(),
        format!(
            "ibvp v-mass drift {ib_v:.3e} <= 1e-10; cauchy u/v drift {ca_u:.3e}/{ca_v:.3e} <= 1e-8; \
             far-field deviation {:.3e}",
            far.max_deviation
        ),
        started,
    );

    let started = Instant::now();
    let ib_records: Vec<_> = ib.diagnostics().cloned().collect();
    let ca_records: Vec<_> = ca.diagnostics().cloned().collect();
    let ib_mono = entropy_monotonicity(&ib_records, ibvp_grid.dx());
    let ca_mono = entropy_monotonicity(&ca_records, cauchy_grid.dx());
    gate.check(
        "3 entropy dissipation",
        ib_mono.passed && ca_mono.passed,
        format!(
            "worst excess over slack ibvp {:.3e}, cauchy {:.3e} (<= 0)",
            ib_mono.worst_excess, ca_mono.worst_excess
        ),
        started,
    );

    let started = Instant::now();
    let ib_floor = positivity_floor_check(&ib_records, ibvp.alpha_floor, ibvp_grid.dx());
    let ca_floor = positivity_floor_check(&ca_records, cauchy.alpha_floor, cauchy_grid.dx());
    gate.check(
        "5 positivity floor",
        ib_floor.passed && ca_floor.passed,
        format!(
            "worst margin ibvp {:.3e}, cauchy {:.3e} (>= 0); ladder runs checked under 6 and 7",
            ib_floor.worst_margin, ca_floor.worst_margin
        ),
        started,
    );
}

/// Largest L2 entropy residual at a few fixed times of a stride-one run.
fn entropy_residual_norm(n_cells: usize, dt: f64) -> f64 {
    let setup = ibvp_setup(0.05);
    let grid = Grid1D::unit_interval(n_cells).unwrap();
    let rec = integrate(
        &setup,
        &grid,
        &SolverConfig::fixed(dt),
        TrajectoryRecorder::new(1),
    )
    .unwrap();
    [0.125, 0.25, 0.375]
        .iter()
        .map(|t| {
            let k = (t / dt).round() as usize;
            let s = |j: usize| &rec.records[j].state;
            entropy_residual(s(k - 1), s(k), s(k + 1), &grid, &setup)
                .unwrap()
                .l2
        })
        .fold(0.0, f64::max)
}

fn entropy_identity(gate: &mut Gate) {
    let started = Instant::now();
    let coarse = entropy_residual_norm(512, 1.0 / 4096.0);
    let fine = entropy_residual_norm(1024, 1.0 / 8192.0);
    let ratio = coarse / fine;
    gate.check(
        "4 entropy identity residual",
        ratio >= 3.5,
        format!("l2 residual {coarse:.3e} -> {fine:.3e}, ratio {ratio:.2} >= 3.5"),
        started,
    );
}

fn cauchy_rate(gate: &mut Gate) {
    let started = Instant::now();
    let setup = cauchy_setup(DEFAULT_LADDER[0]);
    let grid = Grid1D::symmetric(20.0, 2048).unwrap();
    let report = run_ladder(&setup, &grid, &SolverConfig::default(), &DEFAULT_LADDER).unwrap();
    let grids: Vec<Grid1D> = [512, 1024, 2048]
        .iter()
        .map(|&n| Grid1D::symmetric(20.0, n).unwrap())
        .collect();
    let smallest = *DEFAULT_LADDER.last().unwrap();
    let guard = self_convergence(
        &setup.with_epsilon(smallest),
        &grids,
        &SolverConfig::default(),
    )
    .unwrap();
    let effect = report.smallest_effect();
    let slope = report.fitted_slope;
    let floors = report.baseline_floor_ok && report.errors.iter().all(|r| r.floor_ok);
    let far = report.errors.iter().all(|r| r.far_field_ok);
    gate.check(
        "6 cauchy rate",
        (0.85..=1.15).contains(&slope) && guard.resolves(effect, 0.1) && floors && far,
        format!(
            "slope {slope:.4} in [0.85, 1.15]; dx-difference {:.3e} < 0.1 x effect {effect:.3e}; \
             floors {floors}, far field {far}",
            guard.finest_difference()
        ),
        started,
    );

    let spread = report.energy_spread();
    gate.check(
        "8 energy boundedness",
        spread <= 0.25,
        format!(
            "relative spread of the energy functional {:.2}% <= 25%",
            100.0 * spread
        ),
        started,
    );
}

fn ibvp_rate(gate: &mut Gate) {
    let started = Instant::now();
    let setup = ibvp_setup(DEFAULT_LADDER[0]);
    let grid = Grid1D::unit_interval(1024).unwrap();
    let report = run_ladder(&setup, &grid, &SolverConfig::default(), &DEFAULT_LADDER).unwrap();
    let slope = report.fitted_slope;
    let floors = report.baseline_floor_ok && report.errors.iter().all(|r| r.floor_ok);
    gate.check(
        "7 ibvp rate",
        slope >= 0.70 && report.errors_monotone() && floors,
        format!(
            "slope {slope:.4} >= 0.70 (ci {:.3}..{:.3}); monotone {}; floors {floors}",
            report.slope_ci.0,
            report.slope_ci.1,
            report.errors_monotone()
        ),
        started,
    );
}

fn hopf_cole_checks(gate: &mut Gate) {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let params = KsParams {
        diffusion: 1.0,
        chi: 1.0,
        alpha_rate: 1.0,
        epsilon: 0.1,
    };
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.gen_range(8..200);
        let grid = Grid1D::new(rng.gen_range(-5.0..0.0), rng.gen_range(0.5..5.0), n).unwrap();
        let c: Vec<f64> = (0..=n).map(|_| rng.gen_range(1e-3..1e3)).collect();
        let ks = KsState {
            c: c.clone(),
            u: vec![1.0; n + 1],
            t: 0.0,
            params,
        };
        let state = hopf_cole(&ks, &grid).unwrap();
        let back = inverse_hopf_cole(&state, &grid, c[0]).unwrap();
        for (a, b) in back.iter().zip(&c) {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }

    let params = KsParams {
        diffusion: 2.0,
        chi: 2.0,
        alpha_rate: 4.0,
        epsilon: 1.0,
    };
    let grid = Grid1D::symmetric(15.0, 1024).unwrap();
    let initial = State::new(
        grid.nodes()
            .iter()
            .map(|x| 0.4 * x * (-x * x).exp())
            .collect(),
        grid.nodes()
            .iter()
            .map(|x| 1.0 + 0.3 * (-x * x).exp())
            .collect(),
        0.0,
    )
    .unwrap();
    let dual = scaling_dual_run(&params, &grid, &initial, 1.0, 1e-3, 200).unwrap();
    let tol = 5.0 * dual.dx_normalized * dual.dx_normalized;
    gate.check(
        "9 transform roundtrip and scaling",
        worst <= 1e-10 && dual.linf_diff <= tol,
        format!(
            "roundtrip relative error {worst:.3e} <= 1e-10; dual-run difference {:.3e} <= {tol:.3e}",
            dual.linf_diff
        ),
        started,
    );
}

/// Gaussian elimination with partial pivoting on the dense matrix.
fn dense_solve(sys: &TridiagonalSystem) -> Vec<f64> {
    let n = sys.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for i in 0..n {
        a[i][i] = sys.diag[i];
        if i > 0 {
            a[i][i - 1] = sys.lower[i - 1];
        }
        if i + 1 < n {
            a[i][i + 1] = sys.upper[i];
        }
        a[i][n] = sys.rhs[i];
    }
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot = &top[k];
        for row in rest {
            let f = row[k] / pivot[k];
            for (r, p) in row.iter_mut().zip(pivot).skip(k) {
                *r -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    x
}

fn tridiagonal_oracle(gate: &mut Gate) {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(64);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=64);
        let lower: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let upper: Vec<f64> = (1..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let diag = (0..n)
            .map(|i| {
                let off = if i > 0 { lower[i - 1].abs() } else { 0.0 }
                    + if i + 1 < n { upper[i].abs() } else { 0.0 };
                (off + rng.gen_range(0.1..2.0)) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
            })
            .collect();
        let rhs = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
        let sys = TridiagonalSystem::new(lower, diag, upper, rhs).unwrap();
        let x = solve_tridiagonal(&sys).unwrap();
        let y = dense_solve(&sys);
        let scale = y.iter().map(|v| v.abs()).fold(f64::MIN_POSITIVE, f64::max);
        let diff = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(diff / scale);
    }
    gate.check(
        "10 tridiagonal oracle",
        worst <= 1e-12,
        format!("max relative difference to dense elimination {worst:.3e} <= 1e-12"),
        started,
    );
}

fn main() -> ExitCode {
    let mut gate = Gate { failures: 0 };
    steady_state(&mut gate);
    reference_runs(&mut gate);
    entropy_identity(&mut gate);
    cauchy_rate(&mut gate);
    ibvp_rate(&mut gate);
    hopf_cole_checks(&mut gate);
    tridiagonal_oracle(&mut gate);
    if gate.failures == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} criteria failed", gate.failures);
        ExitCode::FAILURE
    }
}
