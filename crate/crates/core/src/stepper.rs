//! IMEX time integration.
//!
//! Space: second-order central differences, flux divergences in conservative
//! form (difference of midpoint-averaged fluxes), so nodal masses with
//! trapezoidal weights telescope exactly.
//!
//! Time: the two-stage, second-order IMEX Runge-Kutta scheme ARS(2,2,2).
//! Hyperbolic fluxes are explicit; the diffusion terms `eps u_xx` and
//! `D v_xx` are implicit (L-stable, stiffly accurate). Implicit stages are
//! solved in increment form, `(I - gamma dt K L) (U - U^n) = rhs`, so a
//! steady state produces an exactly zero right-hand side.
//!
//! Boundary closures:
//! * IBVP: `u = 0` (Dirichlet) and `v_x = 0` via a half cell of width `dx/2`
//!   at each end, equivalent to the mirror ghost `v_{-1} = v_1`.
//! * Cauchy (truncated): both fields are held at their far-field values.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{audit_record, far_field_deviation, DiagnosticsRecord};
use crate::error::{require_positive, Error, Result};
use crate::model::{make_initial, Grid1D, ProblemKind, ProblemSetup, State};
use crate::tridiag::solve_into;

/// Default Courant number.
pub const DEFAULT_CFL: f64 = 0.4;

/// Far-field contact tolerance for the truncated Cauchy problem.
pub const FAR_FIELD_TOL: f64 = 1e-8;

/// `gamma = 1 - 1/sqrt(2)`.
const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
/// `delta = 1 - 1/(2 gamma)`.
const DELTA: f64 = 1.0 - 1.0 / (2.0 * GAMMA);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TimeStep {
    Fixed(f64),
    /// Courant number; `dt` is re-derived from the state before every step.
    Cfl(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub time_step: TimeStep,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::cfl(DEFAULT_CFL)
    }
}

impl SolverConfig {
    pub const DEFAULT_MAX_STEPS: usize = 10_000_000;

    pub fn cfl(cfl: f64) -> Self {
        Self {
            time_step: TimeStep::Cfl(cfl),
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    pub fn fixed(dt: f64) -> Self {
        Self {
            time_step: TimeStep::Fixed(dt),
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }

    pub fn with_max_steps(mut self, max_steps: usize) -> Self {
        self.max_steps = max_steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.time_step {
            TimeStep::Fixed(dt) => require_positive("dt", dt)?,
            TimeStep::Cfl(c) => {
                if !(c > 0.0 && c <= 1.0) {
                    return Err(Error::Argument(format!("cfl must lie in (0, 1], got {c}")));
                }
            }
        }
        if self.max_steps == 0 {
            return Err(Error::Argument("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Step size to use from `state`.
    pub fn dt_for(&self, state: &State, system: &System, grid: &Grid1D) -> f64 {
        match self.time_step {
            TimeStep::Fixed(dt) => dt,
            TimeStep::Cfl(c) => stable_dt(state, system, grid, c),
        }
    }
}

/// Coefficients of the dimensional system
///
/// ```text
/// u_t + (eps u^2 - drive v)_x = eps u_xx
/// v_t - chemo (u v)_x         = v_diffusion v_xx
/// ```
///
/// All equal to one for the normalized equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub drive: f64,
    pub chemo: f64,
    pub v_diffusion: f64,
}

impl Coefficients {
    pub const NORMALIZED: Self = Self {
        drive: 1.0,
        chemo: 1.0,
        v_diffusion: 1.0,
    };
}

impl Default for Coefficients {
    fn default() -> Self {
        Self::NORMALIZED
    }
}

/// Everything the discrete operator depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct System {
    pub kind: ProblemKind,
    pub epsilon: f64,
    pub v_infinity: f64,
    pub coefficients: Coefficients,
}

impl System {
    pub fn from_setup(setup: &ProblemSetup) -> Self {
        Self {
            kind: setup.kind,
            epsilon: setup.epsilon,
            v_infinity: setup.v_infinity,
            coefficients: Coefficients::NORMALIZED,
        }
    }

    pub fn with_coefficients(mut self, coefficients: Coefficients) -> Self {
        self.coefficients = coefficients;
        self
    }
}

/// `dt = cfl dx / max(1, sup(2 eps |u| + 1 + chemo |u| + sqrt(drive chemo v)))`.
///
/// With unit coefficients this bounds the characteristic speeds of the
/// explicit part by `|2 eps u| + 1 + |u| + sqrt(v)`.
pub fn stable_dt(state: &State, system: &System, grid: &Grid1D, cfl: f64) -> f64 {
    let Coefficients { drive, chemo, .. } = system.coefficients;
    let speed = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(&u, &v)| {
            2.0 * system.epsilon * u.abs()
                + 1.0
                + chemo * u.abs()
                + (drive * chemo * v.max(0.0)).sqrt()
        })
        .fold(1.0, f64::max);
    cfl * grid.dx() / speed
}

/// Reusable IMEX integrator with preallocated work arrays.
#[derive(Debug, Clone)]
pub struct ImexStepper {
    system: System,
    grid: Grid1D,
    eu1: Vec<f64>,
    ev1: Vec<f64>,
    eu2: Vec<f64>,
    ev2: Vec<f64>,
    lu1: Vec<f64>,
    lv1: Vec<f64>,
    lu2: Vec<f64>,
    lv2: Vec<f64>,
    u2: Vec<f64>,
    v2: Vec<f64>,
    rhs: Vec<f64>,
    delta: Vec<f64>,
    scratch: Vec<f64>,
    flux: Vec<f64>,
    u_matrix: Band,
    v_matrix: Band,
}

#[derive(Debug, Clone)]
struct Band {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    /// `lambda = gamma dt kappa / dx^2` the band was built for.
    lambda: f64,
}

impl Band {
    fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n - 1],
            diag: vec![1.0; n],
            upper: vec![0.0; n - 1],
            lambda: f64::NAN,
        }
    }

    /// `I - lambda dx^2 L` with Dirichlet rows (identity) or Neumann half-cell rows.
    fn rebuild(&mut self, lambda: f64, neumann: bool) {
        if self.lambda == lambda {
            return;
        }
        let n = self.diag.len();
        for i in 1..n - 1 {
            self.lower[i - 1] = -lambda;
            self.diag[i] = 1.0 + 2.0 * lambda;
            self.upper[i] = -lambda;
        }
        if neumann {
            self.diag[0] = 1.0 + 2.0 * lambda;
            self.upper[0] = -2.0 * lambda;
            self.diag[n - 1] = 1.0 + 2.0 * lambda;
            self.lower[n - 2] = -2.0 * lambda;
        } else {
            self.diag[0] = 1.0;
            self.upper[0] = 0.0;
            self.diag[n - 1] = 1.0;
            self.lower[n - 2] = 0.0;
        }
        self.lambda = lambda;
    }
}

impl ImexStepper {
    pub fn new(system: System, grid: Grid1D) -> Result<Self> {
        if !(system.epsilon >= 0.0 && system.epsilon.is_finite()) {
            return Err(Error::Setup(format!(
                "epsilon must be finite and >= 0, got {}",
                system.epsilon
            )));
        }
        require_positive("v_infinity", system.v_infinity)?;
        require_positive("v_diffusion", system.coefficients.v_diffusion)?;
        if system.kind == ProblemKind::Ibvp && !grid.is_unit_interval() {
            return Err(Error::Grid("IBVP requires the domain [0, 1]".into()));
        }
        let n = grid.node_count();
        let z = || vec![0.0; n];
        Ok(Self {
            system,
            grid,
            eu1: z(),
            ev1: z(),
            eu2: z(),
            ev2: z(),
            lu1: z(),
            lv1: z(),
            lu2: z(),
            lv2: z(),
            u2: z(),
            v2: z(),
            rhs: z(),
            delta: z(),
            scratch: z(),
            flux: z(),
            u_matrix: Band::new(n),
            v_matrix: Band::new(n),
        })
    }

    pub fn system(&self) -> &System {
        &self.system
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    /// Advances `state` by `dt` in place.
    pub fn step_in_place(&mut self, state: &mut State, dt: f64) -> Result<()> {
        let n = self.grid.node_count();
        if state.len() != n {
            return Err(Error::Argument(format!(
                "state has {} nodes, grid has {n}",
                state.len()
            )));
        }
        require_positive("dt", dt)?;
        let eps = self.system.epsilon;
        let kappa_v = self.system.coefficients.v_diffusion;
        let neumann_v = self.system.kind == ProblemKind::Ibvp;
        let inv_dx2 = 1.0 / (self.grid.dx() * self.grid.dx());
        let implicit_u = eps > 0.0;

        self.u_matrix.rebuild(GAMMA * dt * eps * inv_dx2, false);
        self.v_matrix
            .rebuild(GAMMA * dt * kappa_v * inv_dx2, neumann_v);

        // stage 1 (explicit only)
        self.explicit_rhs(&state.u, &state.v, Stage::One);
        laplacian(&state.u, eps, false, inv_dx2, &mut self.lu1);
        laplacian(&state.v, kappa_v, neumann_v, inv_dx2, &mut self.lv1);

        // stage 2: (I - g dt K L) d2 = g dt (E1 + K L U1)
        for i in 0..n {
            self.rhs[i] = GAMMA * dt * (self.eu1[i] + self.lu1[i]);
        }
        self.implicit_solve(Field::U, implicit_u)?;
        for i in 0..n {
            self.u2[i] = state.u[i] + self.delta[i];
        }
        for i in 0..n {
            self.rhs[i] = GAMMA * dt * (self.ev1[i] + self.lv1[i]);
        }
        self.implicit_solve(Field::V, true)?;
        for i in 0..n {
            self.v2[i] = state.v[i] + self.delta[i];
        }

        // stage 3: (I - g dt K L) d3 = dt (d E1 + (1-d) E2 + (1-g) K L U2 + g K L U1)
        let (u2, v2) = (std::mem::take(&mut self.u2), std::mem::take(&mut self.v2));
        self.explicit_rhs(&u2, &v2, Stage::Two);
        laplacian(&u2, eps, false, inv_dx2, &mut self.lu2);
        laplacian(&v2, kappa_v, neumann_v, inv_dx2, &mut self.lv2);
        self.u2 = u2;
        self.v2 = v2;

        for i in 0..n {
            self.rhs[i] = dt
                * (DELTA * self.eu1[i]
                    + (1.0 - DELTA) * self.eu2[i]
                    + (1.0 - GAMMA) * self.lu2[i]
                    + GAMMA * self.lu1[i]);
        }
        self.implicit_solve(Field::U, implicit_u)?;
        for (u, d) in state.u.iter_mut().zip(&self.delta) {
            *u += d;
        }
        for i in 0..n {
            self.rhs[i] = dt
                * (DELTA * self.ev1[i]
                    + (1.0 - DELTA) * self.ev2[i]
                    + (1.0 - GAMMA) * self.lv2[i]
                    + GAMMA * self.lv1[i]);
        }
        self.implicit_solve(Field::V, true)?;
        for (v, d) in state.v.iter_mut().zip(&self.delta) {
            *v += d;
        }

        if self.system.kind == ProblemKind::Ibvp {
            state.u[0] = 0.0;
            state.u[n - 1] = 0.0;
        }
        state.t += dt;

        if state.u.iter().chain(&state.v).any(|x| !x.is_finite()) {
            return Err(Error::Divergence { t: state.t });
        }
        if let Some((index, &value)) = state.v.iter().enumerate().find(|(_, &v)| v <= 0.0) {
            return Err(Error::PositivityLoss {
                index,
                t: state.t,
                value,
            });
        }
        Ok(())
    }

    pub fn step(&mut self, state: &State, dt: f64) -> Result<State> {
        let mut next = state.clone();
        self.step_in_place(&mut next, dt)?;
        Ok(next)
    }

    /// Writes the explicit tendencies `-(f)_x` of both fields.
    fn explicit_rhs(&mut self, u: &[f64], v: &[f64], stage: Stage) {
        let n = u.len();
        let last = n - 1;
        let eps = self.system.epsilon;
        let Coefficients { drive, chemo, .. } = self.system.coefficients;
        let inv_2dx = 0.5 / self.grid.dx();
        let (eu, ev) = match stage {
            Stage::One => (&mut self.eu1, &mut self.ev1),
            Stage::Two => (&mut self.eu2, &mut self.ev2),
        };
        let f = &mut self.flux;

        for i in 0..n {
            f[i] = eps * u[i] * u[i] - drive * v[i];
        }
        for i in 1..last {
            eu[i] = -(f[i + 1] - f[i - 1]) * inv_2dx;
        }
        eu[0] = 0.0;
        eu[last] = 0.0;

        for i in 0..n {
            f[i] = -chemo * u[i] * v[i];
        }
        for i in 1..last {
            ev[i] = -(f[i + 1] - f[i - 1]) * inv_2dx;
        }
        match self.system.kind {
            ProblemKind::CauchyTruncated => {
                ev[0] = 0.0;
                ev[last] = 0.0;
            }
            ProblemKind::Ibvp => {
                // half cells with zero boundary flux
                ev[0] = -(f[0] + f[1]) * 2.0 * inv_2dx;
                ev[last] = (f[last - 1] + f[last]) * 2.0 * inv_2dx;
            }
        }
    }

    fn implicit_solve(&mut self, field: Field, implicit: bool) -> Result<()> {
        if !implicit {
            self.delta.copy_from_slice(&self.rhs);
            return Ok(());
        }
        let band = match field {
            Field::U => &self.u_matrix,
            Field::V => &self.v_matrix,
        };
        solve_into(
            &band.lower,
            &band.diag,
            &band.upper,
            &self.rhs,
            &mut self.scratch,
            &mut self.delta,
        )
    }
}

#[derive(Clone, Copy)]
enum Stage {
    One,
    Two,
}

#[derive(Clone, Copy)]
enum Field {
    U,
    V,
}

/// `kappa * L f` with Dirichlet (zero rows) or Neumann half-cell boundary rows.
fn laplacian(f: &[f64], kappa: f64, neumann: bool, inv_dx2: f64, out: &mut [f64]) {
    let n = f.len();
    let last = n - 1;
    if kappa == 0.0 {
        out.fill(0.0);
        return;
    }
    let c = kappa * inv_dx2;
    for i in 1..last {
        out[i] = c * (f[i - 1] - 2.0 * f[i] + f[i + 1]);
    }
    if neumann {
        out[0] = 2.0 * c * (f[1] - f[0]);
        out[last] = 2.0 * c * (f[last - 1] - f[last]);
    } else {
        out[0] = 0.0;
        out[last] = 0.0;
    }
}

fn single_step(
    state: &State,
    setup: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
) -> Result<State> {
    cfg.validate()?;
    let system = System::from_setup(setup);
    let dt = cfg.dt_for(state, &system, grid);
    ImexStepper::new(system, *grid)?.step(state, dt)
}

/// One step of the viscous system (`epsilon > 0`).
pub fn step_viscous(
    state: &State,
    setup: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
) -> Result<State> {
    if setup.epsilon <= 0.0 {
        return Err(Error::Argument(format!(
            "step_viscous needs epsilon > 0, got {}",
            setup.epsilon
        )));
    }
    single_step(state, setup, grid, cfg)
}

/// One step of the limit system (`epsilon = 0`).
pub fn step_limit(
    state: &State,
    setup: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
) -> Result<State> {
    if setup.epsilon != 0.0 {
        return Err(Error::Argument(format!(
            "step_limit needs epsilon = 0, got {}",
            setup.epsilon
        )));
    }
    single_step(state, setup, grid, cfg)
}

/// A recorded state and its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub state: State,
    pub diagnostics: DiagnosticsRecord,
}

/// Worst far-field deviation seen in the outer tenth of a truncated domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FarFieldMonitor {
    pub max_deviation: f64,
    /// Time of the first record exceeding [`FAR_FIELD_TOL`].
    pub first_violation: Option<f64>,
}

impl FarFieldMonitor {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecorder {
    pub stride: usize,
    pub records: Vec<Snapshot>,
    /// Only populated for the truncated Cauchy problem.
    pub far_field: Option<FarFieldMonitor>,
    pub steps: usize,
}

impl TrajectoryRecorder {
    pub fn new(stride: usize) -> Self {
        Self {
            stride: stride.max(1),
            records: Vec::new(),
            far_field: None,
            steps: 0,
        }
    }

    pub fn last(&self) -> Option<&Snapshot> {
        self.records.last()
    }

    pub fn diagnostics(&self) -> impl Iterator<Item = &DiagnosticsRecord> {
        self.records.iter().map(|s| &s.diagnostics)
    }

    fn push(&mut self, state: &State, grid: &Grid1D, setup: &ProblemSetup) -> Result<()> {
        let diagnostics = audit_record(state, grid, setup)?;
        if setup.kind == ProblemKind::CauchyTruncated {
            let dev = far_field_deviation(state, grid, setup.v_infinity);
            let monitor = self.far_field.get_or_insert(FarFieldMonitor {
                max_deviation: 0.0,
                first_violation: None,
            });
            monitor.max_deviation = monitor.max_deviation.max(dev);
            if dev > FAR_FIELD_TOL && monitor.first_violation.is_none() {
                monitor.first_violation = Some(state.t);
            }
        }
        self.records.push(Snapshot {
            state: state.clone(),
            diagnostics,
        });
        Ok(())
    }
}

/// Integrates `setup` from its initial data to `t_final`, recording every
/// `rec.stride` steps and always the final state.
pub fn integrate(
    setup: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
    rec: TrajectoryRecorder,
) -> Result<TrajectoryRecorder> {
    let initial = make_initial(setup, grid)?;
    integrate_from(initial, setup, grid, cfg, rec)
}

/// As [`integrate`] but starting from an explicit state.
pub fn integrate_from(
    initial: State,
    setup: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
    mut rec: TrajectoryRecorder,
) -> Result<TrajectoryRecorder> {
    cfg.validate()?;
    setup.validate()?;
    let system = System::from_setup(setup);
    let mut stepper = ImexStepper::new(system, *grid)?;
    let mut state = initial;
    let t_final = setup.t_final;
    rec.records.clear();
    rec.steps = 0;
    rec.push(&state, grid, setup)?;

    while state.t < t_final {
        if rec.steps >= cfg.max_steps {
            return Err(Error::MaxSteps {
                max_steps: cfg.max_steps,
                t: state.t,
                t_final,
            });
        }
        let mut dt = cfg.dt_for(&state, &system, grid);
        let remaining = t_final - state.t;
        let last = remaining <= dt * (1.0 + 1e-10);
        if last {
            dt = remaining;
        }
        stepper.step_in_place(&mut state, dt)?;
        if last {
            state.t = t_final;
        }
        rec.steps += 1;
        if last || rec.steps.is_multiple_of(rec.stride) {
            rec.push(&state, grid, setup)?;
        }
    }
    Ok(rec)
}

/// Runs `steps` fixed steps of size `dt` from `state` without recording.
pub fn advance(
    stepper: &mut ImexStepper,
    mut state: State,
    dt: f64,
    steps: usize,
) -> Result<State> {
    for _ in 0..steps {
        stepper.step_in_place(&mut state, dt)?;
    }
    Ok(state)
}
