//! Discrete norms, entropy audit and monitors.
//!
//! All integrals use trapezoidal weights on the vertex-centered grid.
//! Derivatives are centered in the interior; at the two end nodes they are
//! second-order one-sided (`(-3 f0 + 4 f1 - f2) / 2dx` and
//! `(2 f0 - 5 f1 + 4 f2 - f3) / dx^2`), so the H^1/H^2 norms include every
//! node.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{entropy_unchecked, log_ratio, Grid1D, ProblemSetup, State};
use crate::stepper::Snapshot;

/// Boundary handling of the discrete H^2 norm, echoed into reports.
pub const H2_BOUNDARY_STENCIL: &str = "one-sided second differences at end nodes";

/// Centered first difference, one-sided second order at the ends.
pub fn first_derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let inv = 0.5 / dx;
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) * inv;
    }
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) * inv;
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) * inv;
    d
}

/// Centered second difference, one-sided second order at the ends.
pub fn second_derivative(f: &[f64], dx: f64) -> Vec<f64> {
    let n = f.len();
    let mut d = vec![0.0; n];
    let inv = 1.0 / (dx * dx);
    for i in 1..n - 1 {
        d[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) * inv;
    }
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) * inv;
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) * inv;
    d
}

fn sq_l2(grid: &Grid1D, f: &[f64]) -> f64 {
    f.iter()
        .enumerate()
        .map(|(i, x)| grid.weight(i) * x * x)
        .sum()
}

fn linf(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// `(||f||^2, ||f_x||^2, ||f_xx||^2)`.
fn sobolev_parts(grid: &Grid1D, f: &[f64]) -> (f64, f64, f64) {
    let fx = first_derivative(f, grid.dx());
    let fxx = second_derivative(f, grid.dx());
    (sq_l2(grid, f), sq_l2(grid, &fx), sq_l2(grid, &fxx))
}

/// Discrete norms of `u` and `v - v_inf`. H^1/H^2 entries are norms, not squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub l2_u: f64,
    pub l2_v: f64,
    pub linf_u: f64,
    pub linf_v: f64,
    pub h1_u: f64,
    pub h1_v: f64,
    pub h2_u: f64,
    pub h2_v: f64,
}

pub fn norms(state: &State, grid: &Grid1D, v_inf: f64) -> Norms {
    let dv: Vec<f64> = state.v.iter().map(|v| v - v_inf).collect();
    let (u0, u1, u2) = sobolev_parts(grid, &state.u);
    let (v0, v1, v2) = sobolev_parts(grid, &dv);
    Norms {
        l2_u: u0.sqrt(),
        l2_v: v0.sqrt(),
        linf_u: linf(&state.u),
        linf_v: linf(&dv),
        h1_u: (u0 + u1).sqrt(),
        h1_v: (v0 + v1).sqrt(),
        h2_u: (u0 + u1 + u2).sqrt(),
        h2_v: (v0 + v1 + v2).sqrt(),
    }
}

/// Per-record scalars written to the diagnostics CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    /// Integral of the entropy density.
    pub entropy_total: f64,
    /// Integral of `v_x^2 / v`.
    pub dissipation_v: f64,
    /// `eps` times the integral of `u_x^2`.
    pub dissipation_u: f64,
    pub mass_u: f64,
    pub mass_v_excess: f64,
    pub min_v: f64,
    pub sup_abs_ux: f64,
    /// Squared H^2 norm of `u`.
    pub h2_u: f64,
    /// Squared H^2 norm of `v - v_inf`.
    pub h2_v: f64,
}

pub fn audit_record(
    state: &State,
    grid: &Grid1D,
    setup: &ProblemSetup,
) -> Result<DiagnosticsRecord> {
    if state.len() != grid.node_count() {
        return Err(Error::Argument(format!(
            "state has {} nodes, grid has {}",
            state.len(),
            grid.node_count()
        )));
    }
    if let Some((index, &value)) = state.v.iter().enumerate().find(|(_, &v)| v <= 0.0) {
        return Err(Error::PositivityLoss {
            index,
            t: state.t,
            value,
        });
    }
    let v_inf = setup.v_infinity;
    let eps = setup.epsilon;
    let dx = grid.dx();

    let eta: Vec<f64> = state
        .u
        .iter()
        .zip(&state.v)
        .map(|(&u, &v)| entropy_unchecked(u, v, v_inf, eps).eta)
        .collect();
    let ux = first_derivative(&state.u, dx);
    let vx = first_derivative(&state.v, dx);
    let dv: Vec<f64> = state.v.iter().map(|v| v - v_inf).collect();
    let fisher: Vec<f64> = vx.iter().zip(&state.v).map(|(g, v)| g * g / v).collect();
    let (u0, u1, u2) = sobolev_parts(grid, &state.u);
    let (v0, v1, v2) = sobolev_parts(grid, &dv);

    Ok(DiagnosticsRecord {
        t: state.t,
        entropy_total: grid.integrate(&eta),
        dissipation_v: grid.integrate(&fisher),
        dissipation_u: eps * sq_l2(grid, &ux),
        mass_u: grid.integrate(&state.u),
        mass_v_excess: grid.integrate(&dv),
        min_v: state.min_v(),
        sup_abs_ux: linf(&ux),
        h2_u: u0 + u1 + u2,
        h2_v: v0 + v1 + v2,
    })
}

/// Largest `max(|u|, |v - v_inf|)` over nodes in the outer tenth of the domain.
pub fn far_field_deviation(state: &State, grid: &Grid1D, v_inf: f64) -> f64 {
    let center = 0.5 * (grid.x_left() + grid.x_right());
    let inner = 0.9 * 0.5 * (grid.x_right() - grid.x_left());
    (0..grid.node_count())
        .filter(|&i| (grid.x(i) - center).abs() >= inner)
        .map(|i| state.u[i].abs().max((state.v[i] - v_inf).abs()))
        .fold(0.0, f64::max)
}

/// One-sided `u_xx` at `x = 0` and `x = 1`. The IBVP closure implies both
/// vanish; this is a consistency diagnostic, not an enforced condition.
pub fn boundary_uxx(state: &State, grid: &Grid1D) -> (f64, f64) {
    let d = second_derivative(&state.u, grid.dx());
    (d[0], d[d.len() - 1])
}

/// Pointwise residual of the entropy balance
/// `eta_t + q_x - eps u u_xx - v_xx ln(v / v_inf)` at interior nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyResidualField {
    /// Interior nodes `1..n-1`.
    pub residual: Vec<f64>,
    pub linf: f64,
    pub l2: f64,
}

pub fn entropy_residual(
    prev: &State,
    mid: &State,
    next: &State,
    grid: &Grid1D,
    setup: &ProblemSetup,
) -> Result<EntropyResidualField> {
    let n = grid.node_count();
    if [prev, mid, next].iter().any(|s| s.len() != n) {
        return Err(Error::Argument("states do not match the grid".into()));
    }
    let dt = equal_spacing(&[prev.t, mid.t, next.t])?;
    if let Some(s) = [prev, mid, next].into_iter().find(|s| s.min_v() <= 0.0) {
        return Err(Error::PositivityLoss {
            index: s.v.iter().position(|&v| v <= 0.0).unwrap_or(0),
            t: s.t,
            value: s.min_v(),
        });
    }
    let v_inf = setup.v_infinity;
    let eps = setup.epsilon;
    let dx = grid.dx();
    let eta = |s: &State, i: usize| entropy_unchecked(s.u[i], s.v[i], v_inf, eps).eta;
    let q: Vec<f64> = (0..n)
        .map(|i| entropy_unchecked(mid.u[i], mid.v[i], v_inf, eps).q)
        .collect();

    let inv_dx2 = 1.0 / (dx * dx);
    let residual: Vec<f64> = (1..n - 1)
        .map(|i| {
            let eta_t = (eta(next, i) - eta(prev, i)) / (2.0 * dt);
            let q_x = (q[i + 1] - q[i - 1]) / (2.0 * dx);
            let u_xx = (mid.u[i - 1] - 2.0 * mid.u[i] + mid.u[i + 1]) * inv_dx2;
            let v_xx = (mid.v[i - 1] - 2.0 * mid.v[i] + mid.v[i + 1]) * inv_dx2;
            eta_t + q_x - eps * mid.u[i] * u_xx - v_xx * log_ratio(mid.v[i], v_inf)
        })
        .collect();
    let l2 = (dx * residual.iter().map(|r| r * r).sum::<f64>()).sqrt();
    Ok(EntropyResidualField {
        linf: linf(&residual),
        l2,
        residual,
    })
}

/// Returns the common spacing of strictly increasing, equally spaced times.
pub(crate) fn equal_spacing(times: &[f64]) -> Result<f64> {
    let dt = times[1] - times[0];
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::Argument(format!(
            "times must increase, got {times:?}"
        )));
    }
    for w in times.windows(2) {
        let d = w[1] - w[0];
        if (d - dt).abs() > 1e-9 * dt {
            return Err(Error::Argument(format!(
                "times are not equally spaced: {times:?}"
            )));
        }
    }
    Ok(dt)
}

/// Outcome of the maximum-principle floor `min v >= alpha exp(-M t) - tol`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FloorReport {
    pub passed: bool,
    /// Smallest `min_v - floor` over all records.
    pub worst_margin: f64,
    pub worst_time: f64,
    pub tolerance: f64,
}

/// `M(t)` is the running maximum of `sup |u_x|` over the records up to `t`;
/// `tol = 10 dx^2`.
pub fn positivity_floor_check(records: &[DiagnosticsRecord], alpha: f64, dx: f64) -> FloorReport {
    let tolerance = 10.0 * dx * dx;
    let mut m = 0.0f64;
    let mut worst_margin = f64::INFINITY;
    let mut worst_time = 0.0;
    for r in records {
        m = m.max(r.sup_abs_ux);
        let floor = alpha * (-m * r.t).exp() - tolerance;
        let margin = r.min_v - floor;
        if margin < worst_margin {
            worst_margin = margin;
            worst_time = r.t;
        }
    }
    FloorReport {
        passed: worst_margin >= 0.0,
        worst_margin,
        worst_time,
        tolerance,
    }
}

/// Largest increase of the total entropy between consecutive records beyond
/// the allowed slack `slack_per_step * steps_between`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyMonotonicity {
    pub passed: bool,
    /// Largest `E_{k+1} - E_k - slack_k`; negative when entropy always decreased.
    pub worst_excess: f64,
    pub worst_time: f64,
}

/// Checks that `entropy_total` is non-increasing up to `10 dt dx^2` per step.
pub fn entropy_monotonicity(records: &[DiagnosticsRecord], dx: f64) -> EntropyMonotonicity {
    let mut worst_excess = f64::NEG_INFINITY;
    let mut worst_time = 0.0;
    for w in records.windows(2) {
        // summing 10 dt dx^2 over the steps between records gives 10 (t1 - t0) dx^2
        let slack = 10.0 * (w[1].t - w[0].t) * dx * dx;
        let excess = w[1].entropy_total - w[0].entropy_total - slack;
        if excess > worst_excess {
            worst_excess = excess;
            worst_time = w[1].t;
        }
    }
    EntropyMonotonicity {
        passed: worst_excess <= 0.0,
        worst_excess,
        worst_time,
    }
}

/// Discrete energy functional of a trajectory: the sup in time of the squared
/// H^2 norms plus the time-integrated dissipation
/// `eps ||u_x||^2_{H^2} + ||v_x / sqrt(v)||^2 + ||sqrt(v) u_x||^2 + ||v_xx||^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyFunctional {
    pub sup_h2: f64,
    pub dissipation: f64,
}

impl EnergyFunctional {
    pub fn total(&self) -> f64 {
        self.sup_h2 + self.dissipation
    }
}

pub fn energy_functional(
    records: &[Snapshot],
    grid: &Grid1D,
    setup: &ProblemSetup,
) -> EnergyFunctional {
    let dx = grid.dx();
    let eps = setup.epsilon;
    let rate = |s: &State| {
        let ux = first_derivative(&s.u, dx);
        let uxx = second_derivative(&s.u, dx);
        let uxxx = first_derivative(&uxx, dx);
        let vx = first_derivative(&s.v, dx);
        let vxx = second_derivative(&s.v, dx);
        let fisher: Vec<f64> = vx.iter().zip(&s.v).map(|(g, v)| g * g / v).collect();
        let weighted: Vec<f64> = ux.iter().zip(&s.v).map(|(g, v)| v * g * g).collect();
        eps * (sq_l2(grid, &ux) + sq_l2(grid, &uxx) + sq_l2(grid, &uxxx))
            + grid.integrate(&fisher)
            + grid.integrate(&weighted)
            + sq_l2(grid, &vxx)
    };
    let sup_h2 = records
        .iter()
        .map(|r| r.diagnostics.h2_u + r.diagnostics.h2_v)
        .fold(0.0, f64::max);
    let rates: Vec<f64> = records.iter().map(|r| rate(&r.state)).collect();
    let dissipation = records
        .windows(2)
        .zip(rates.windows(2))
        .map(|(r, q)| 0.5 * (r[1].state.t - r[0].state.t) * (q[0] + q[1]))
        .sum();
    EnergyFunctional {
        sup_h2,
        dissipation,
    }
}
