//! Epsilon-ladder experiments and convergence-order fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy_functional, positivity_floor_check, H2_BOUNDARY_STENCIL};
use crate::error::{Error, Result};
use crate::model::{make_initial, max_abs_diff, Grid1D, ProblemKind, ProblemSetup};
use crate::stepper::{integrate, stable_dt, SolverConfig, System, TimeStep, TrajectoryRecorder};

/// Default viscosity ladder for both problem kinds.
pub const DEFAULT_LADDER: [f64; 4] = [0.1, 0.05, 0.025, 0.0125];

/// Record stride of ladder runs; errors are maximized over recorded times.
pub const LADDER_STRIDE: usize = 5;

/// Least-squares line through `(ln eps, ln err)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_abs_residual: f64,
    /// Standard error of the slope; zero for two points.
    pub slope_std_error: f64,
}

pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 points, got {}",
            points.len()
        )));
    }
    if let Some(&(x, y)) = points
        .iter()
        .find(|(x, y)| !(*x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite()))
    {
        return Err(Error::Argument(format!(
            "log-log fit needs positive finite data, got ({x}, {y})"
        )));
    }
    let n = points.len() as f64;
    let logs: Vec<(f64, f64)> = points.iter().map(|(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Argument("abscissae are all equal".into()));
    }
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = logs
        .iter()
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let max_abs_residual = residuals.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    let slope_std_error = if points.len() > 2 {
        let ssr: f64 = residuals.iter().map(|r| r * r).sum();
        (ssr / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(SlopeFit {
        slope,
        intercept,
        max_abs_residual,
        slope_std_error,
    })
}

/// Sup-in-time L-infinity distance of one rung from the limit solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RungError {
    pub epsilon: f64,
    /// `sup_t ||u^eps - u^0||_inf`.
    pub err_u: f64,
    /// `sup_t ||v^eps - v^0||_inf`.
    pub err_v: f64,
    /// Sup over time of the sum of both norms.
    pub err_sum: f64,
    /// Discrete energy functional of the viscous run.
    pub energy: f64,
    /// Far-field monitor result (always true for the IBVP).
    pub far_field_ok: bool,
    /// Positivity floor check over the recorded states of the viscous run.
    pub floor_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n_cells: usize,
    pub x_left: f64,
    pub x_right: f64,
    pub dx: f64,
    pub dt: f64,
    pub dt_policy: String,
    pub record_stride: usize,
    pub h2_stencil: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub kind: ProblemKind,
    pub t_final: f64,
    pub eps_ladder: Vec<f64>,
    pub errors: Vec<RungError>,
    pub fitted_slope: f64,
    /// Slope plus/minus two standard errors of the least-squares fit.
    pub slope_ci: (f64, f64),
    pub max_abs_residual: f64,
    pub grid_meta: GridMeta,
    pub baseline_meta: String,
    /// Positivity floor check over the recorded states of the limit run.
    pub baseline_floor_ok: bool,
}

impl ConvergenceReport {
    /// Whether errors do not grow as epsilon decreases.
    pub fn errors_monotone(&self) -> bool {
        self.errors.windows(2).all(|w| w[1].err_sum <= w[0].err_sum)
    }

    /// `(max - min) / min` of the per-rung energy functional.
    pub fn energy_spread(&self) -> f64 {
        let (lo, hi) = self
            .errors
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                (lo.min(r.energy), hi.max(r.energy))
            });
        (hi - lo) / lo
    }

    pub fn smallest_effect(&self) -> f64 {
        self.errors.last().map_or(0.0, |r| r.err_sum)
    }
}

fn check_ladder(eps_ladder: &[f64]) -> Result<()> {
    if eps_ladder.len() < 3 {
        return Err(Error::Argument(format!(
            "a ladder needs at least 3 rungs, got {}",
            eps_ladder.len()
        )));
    }
    if let Some(e) = eps_ladder.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(Error::Argument(format!(
            "ladder values must be positive, got {e}"
        )));
    }
    if eps_ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument(format!(
            "ladder must be strictly decreasing: {eps_ladder:?}"
        )));
    }
    Ok(())
}

/// Step size shared by every run of an experiment; a CFL policy is evaluated
/// once on the initial data with the largest viscosity that will be run.
fn shared_dt(
    setup: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
    eps_max: f64,
) -> Result<(f64, String)> {
    cfg.validate()?;
    Ok(match cfg.time_step {
        TimeStep::Fixed(dt) => (dt, format!("fixed dt = {dt}")),
        TimeStep::Cfl(c) => {
            let initial = make_initial(setup, grid)?;
            let system = System::from_setup(&setup.clone().with_epsilon(eps_max));
            let dt = stable_dt(&initial, &system, grid, c);
            (
                dt,
                format!("cfl = {c} on initial data at eps = {eps_max}, frozen"),
            )
        }
    })
}

/// Integrates the limit system and one viscous run per ladder value from
/// identical initial data on the same grid and step sequence, then fits the
/// log-log slope of the sup-in-time error against epsilon.
pub fn run_ladder(
    setup_template: &ProblemSetup,
    grid: &Grid1D,
    cfg: &SolverConfig,
    eps_ladder: &[f64],
) -> Result<ConvergenceReport> {
    check_ladder(eps_ladder)?;
    let (dt, dt_policy) = shared_dt(setup_template, grid, cfg, eps_ladder[0])?;
    let run_cfg = SolverConfig::fixed(dt).with_max_steps(cfg.max_steps);

    let epsilons: Vec<f64> = std::iter::once(0.0)
        .chain(eps_ladder.iter().copied())
        .collect();
    let runs: Vec<Result<TrajectoryRecorder>> = epsilons
        .par_iter()
        .map(|&eps| {
            integrate(
                &setup_template.clone().with_epsilon(eps),
                grid,
                &run_cfg,
                TrajectoryRecorder::new(LADDER_STRIDE),
            )
            .map_err(|e| Error::Ladder {
                epsilon: eps,
                source: Box::new(e),
            })
        })
        .collect();
    let floor_ok = |run: &TrajectoryRecorder| {
        let records: Vec<_> = run.diagnostics().cloned().collect();
        positivity_floor_check(&records, setup_template.alpha_floor, grid.dx()).passed
    };
    let mut runs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let baseline = runs.remove(0);

    let mut errors = Vec::with_capacity(eps_ladder.len());
    for (&eps, run) in eps_ladder.iter().zip(&runs) {
        if run.records.len() != baseline.records.len() {
            return Err(Error::Ladder {
                epsilon: eps,
                source: Box::new(Error::Argument(
                    "record times differ from the baseline".into(),
                )),
            });
        }
        let (mut err_u, mut err_v, mut err_sum) = (0.0f64, 0.0f64, 0.0f64);
        for (a, b) in run.records.iter().zip(&baseline.records) {
            debug_assert_eq!(a.state.t, b.state.t);
            let eu = max_abs_diff(&a.state.u, &b.state.u);
            let ev = max_abs_diff(&a.state.v, &b.state.v);
            err_u = err_u.max(eu);
            err_v = err_v.max(ev);
            err_sum = err_sum.max(eu + ev);
        }
        let setup = setup_template.clone().with_epsilon(eps);
        errors.push(RungError {
            epsilon: eps,
            err_u,
            err_v,
            err_sum,
            energy: energy_functional(&run.records, grid, &setup).total(),
            far_field_ok: run.far_field.is_none_or(|m| m.passed()),
            floor_ok: floor_ok(run),
        });
    }

    let points: Vec<(f64, f64)> = errors.iter().map(|r| (r.epsilon, r.err_sum)).collect();
    let fit = fit_slope(&points).map_err(|e| Error::Ladder {
        epsilon: *eps_ladder.last().unwrap_or(&0.0),
        source: Box::new(e),
    })?;

    Ok(ConvergenceReport {
        kind: setup_template.kind,
        t_final: setup_template.t_final,
        eps_ladder: eps_ladder.to_vec(),
        errors,
        fitted_slope: fit.slope,
        slope_ci: (
            fit.slope - 2.0 * fit.slope_std_error,
            fit.slope + 2.0 * fit.slope_std_error,
        ),
        max_abs_residual: fit.max_abs_residual,
        grid_meta: GridMeta {
            n_cells: grid.n_cells(),
            x_left: grid.x_left(),
            x_right: grid.x_right(),
            dx: grid.dx(),
            dt,
            dt_policy,
            record_stride: LADDER_STRIDE,
            h2_stencil: H2_BOUNDARY_STENCIL.to_string(),
        },
        baseline_meta: format!(
            "limit system (eps = 0), same grid, dt and initial data; {} records",
            baseline.records.len()
        ),
        baseline_floor_ok: floor_ok(&baseline),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfConvergenceRow {
    pub n_cells: usize,
    pub dx: f64,
    pub dt: f64,
    /// L-infinity distance to the next finer solution at shared nodes.
    pub diff_to_finer: Option<f64>,
    /// `log2` of successive difference ratios.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfConvergence {
    pub epsilon: f64,
    pub t_final: f64,
    pub table: Vec<SelfConvergenceRow>,
    /// Log-log slope of the differences against `dx`; `None` when any
    /// difference vanishes (nothing to converge).
    pub slope: Option<f64>,
}

impl SelfConvergence {
    /// Difference between the two finest solutions.
    pub fn finest_difference(&self) -> f64 {
        self.table
            .iter()
            .rev()
            .find_map(|r| r.diff_to_finer)
            .unwrap_or(0.0)
    }

    /// True when the finest discretization difference stays below
    /// `fraction * effect`.
    pub fn resolves(&self, effect: f64, fraction: f64) -> bool {
        self.finest_difference() < fraction * effect
    }
}

/// Runs `setup` on successive factor-two refinements with `dt` halved along
/// with `dx` and reports the differences of the final states.
pub fn self_convergence(
    setup: &ProblemSetup,
    grids: &[Grid1D],
    cfg: &SolverConfig,
) -> Result<SelfConvergence> {
    if grids.len() < 2 {
        return Err(Error::Argument("need at least two grids".into()));
    }
    for w in grids.windows(2) {
        if w[1] != w[0].refined() {
            return Err(Error::Argument(format!(
                "grid with {} cells is not a factor-two refinement of {} cells",
                w[1].n_cells(),
                w[0].n_cells()
            )));
        }
    }
    let (dt0, _) = shared_dt(setup, &grids[0], cfg, setup.epsilon)?;
    let finals: Vec<Result<(f64, crate::model::State)>> = grids
        .par_iter()
        .enumerate()
        .map(|(k, grid)| {
            let dt = dt0 / (1u64 << k) as f64;
            let rec = integrate(
                setup,
                grid,
                &SolverConfig::fixed(dt).with_max_steps(cfg.max_steps),
                TrajectoryRecorder::new(usize::MAX),
            )?;
            let last = rec.records.into_iter().last().expect("final record").state;
            Ok((dt, last))
        })
        .collect();
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;

    let diffs: Vec<f64> = finals
        .windows(2)
        .map(|w| {
            let (coarse, fine) = (&w[0].1, &w[1].1);
            (0..coarse.len())
                .map(|i| {
                    (coarse.u[i] - fine.u[2 * i])
                        .abs()
                        .max((coarse.v[i] - fine.v[2 * i]).abs())
                })
                .fold(0.0, f64::max)
        })
        .collect();

    let table = grids
        .iter()
        .zip(&finals)
        .enumerate()
        .map(|(k, (g, (dt, _)))| {
            let diff = diffs.get(k).copied();
            let order = match (diff, diffs.get(k + 1)) {
                (Some(a), Some(&b)) if a > 0.0 && b > 0.0 => Some((a / b).log2()),
                _ => None,
            };
            SelfConvergenceRow {
                n_cells: g.n_cells(),
                dx: g.dx(),
                dt: *dt,
                diff_to_finer: diff,
                order,
            }
        })
        .collect();

    let slope = if diffs.iter().all(|&d| d > 0.0) && diffs.len() >= 2 {
        let pts: Vec<(f64, f64)> = grids
            .iter()
            .zip(&diffs)
            .map(|(g, &d)| (g.dx(), d))
            .collect();
        Some(fit_slope(&pts)?.slope)
    } else {
        None
    };

    Ok(SelfConvergence {
        epsilon: setup.epsilon,
        t_final: setup.t_final,
        table,
        slope,
    })
}
