//! One function per subcommand. Each writes its artifacts plus the effective
//! configuration into the output directory.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;
use visclimit::diagnostics::{entropy_monotonicity, EntropyMonotonicity};
use visclimit::hopf_cole::{hopf_cole, Scaling};
use visclimit::stepper::{System, TimeStep};
use visclimit::{
    entropy_residual, positivity_floor_check, rescale_to_normalized, residual_vs_conservation_form,
    run_ladder, self_convergence, FloorReport, TrajectoryRecorder,
};

use crate::config::{Experiment, RunConfig};
use crate::io::{self, IoError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error(transparent)]
    Run(#[from] visclimit::Error),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("threshold not met: {0}")]
    Threshold(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Run(_) | Self::Io(_) => 3,
            Self::Threshold(_) => 4,
        }
    }
}

/// Human-readable summary of a finished experiment.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub lines: Vec<String>,
}

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let out = cfg.out_dir.as_path();
    std::fs::create_dir_all(out).map_err(|source| IoError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    io::write_text(&cfg.to_string(), &out.join("effective.cfg"))?;
    match cfg.experiment {
        Experiment::Run => run(cfg, out),
        Experiment::Converge => converge(cfg, out),
        Experiment::EntropyCheck => entropy_check(cfg, out),
        Experiment::SelfConverge => self_converge(cfg, out),
        Experiment::Transform => transform(cfg, out),
    }
}

fn validated_grid(cfg: &RunConfig, n_cells: usize) -> Result<visclimit::Grid1D, CliError> {
    cfg.grid_with(n_cells)
        .map_err(|e| CliError::Validation(e.to_string()))
}

/// With `frozen_dt`, a CFL policy is evaluated once on the initial data so
/// that records are equally spaced in time.
fn trajectory(
    cfg: &RunConfig,
    frozen_dt: bool,
) -> Result<(visclimit::Grid1D, TrajectoryRecorder), CliError> {
    let grid = validated_grid(cfg, cfg.n_cells)?;
    let setup = cfg.setup();
    let initial =
        visclimit::make_initial(&setup, &grid).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut solver = cfg.solver();
    if frozen_dt {
        let dt = solver.dt_for(&initial, &System::from_setup(&setup), &grid);
        solver.time_step = TimeStep::Fixed(dt);
    }
    let rec = visclimit::stepper::integrate_from(
        initial,
        &setup,
        &grid,
        &solver,
        TrajectoryRecorder::new(cfg.stride),
    )?;
    Ok((grid, rec))
}

fn run(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (grid, rec) = trajectory(cfg, false)?;
    let last = rec
        .last()
        .expect("a trajectory always has its initial record");
    io::emit_state_csv(&last.state, &grid, &out.join("state.csv"))?;
    let records: Vec<_> = rec.diagnostics().cloned().collect();
    io::emit_diagnostics_csv(&records, &out.join("diagnostics.csv"))?;
    let mut lines = vec![format!(
        "{} steps, {} records, t = {}, min v = {:.6e}",
        rec.steps,
        records.len(),
        last.state.t,
        last.diagnostics.min_v
    )];
    if let Some(m) = rec.far_field {
        lines.push(format!(
            "far-field deviation {:.3e} ({})",
            m.max_deviation,
            if m.passed() { "ok" } else { "exceeded" }
        ));
    }
    Ok(Outcome { lines })
}

fn converge(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let grid = validated_grid(cfg, cfg.n_cells)?;
    let setup = cfg.setup().with_epsilon(cfg.eps_ladder[0]);
    visclimit::make_initial(&setup, &grid).map_err(|e| CliError::Validation(e.to_string()))?;
    let report = run_ladder(&setup, &grid, &cfg.solver(), &cfg.eps_ladder)?;
    io::emit_report_json(&report, &out.join("report.json"))?;

    let mut lines: Vec<String> = report
        .errors
        .iter()
        .map(|r| format!("eps = {:<8} error = {:.6e}", r.epsilon, r.err_sum))
        .collect();
    lines.push(format!(
        "fitted slope {:.4} (2 s.e. interval {:.4} .. {:.4})",
        report.fitted_slope, report.slope_ci.0, report.slope_ci.1
    ));
    let mut failures = Vec::new();
    if !(cfg.slope_min..=cfg.slope_max).contains(&report.fitted_slope) {
        failures.push(format!(
            "slope {:.4} outside [{}, {}]",
            report.fitted_slope, cfg.slope_min, cfg.slope_max
        ));
    }
    if report.errors.iter().any(|r| !r.far_field_ok) {
        failures.push("far-field monitor tripped".into());
    }
    if !report.baseline_floor_ok || report.errors.iter().any(|r| !r.floor_ok) {
        failures.push("positivity floor violated".into());
    }
    finish(lines, failures)
}

fn finish(lines: Vec<String>, failures: Vec<String>) -> Result<Outcome, CliError> {
    if failures.is_empty() {
        Ok(Outcome { lines })
    } else {
        for l in &lines {
            eprintln!("{l}");
        }
        Err(CliError::Threshold(failures.join("; ")))
    }
}

#[derive(Debug, Serialize)]
struct ResidualSample {
    t: f64,
    l2: f64,
    linf: f64,
}

#[derive(Debug, Serialize)]
struct EntropyReport {
    monotonicity: EntropyMonotonicity,
    floor: FloorReport,
    residual: Vec<ResidualSample>,
    max_residual_l2: f64,
}

fn entropy_check(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let (grid, rec) = trajectory(cfg, true)?;
    let setup = cfg.setup();
    let records: Vec<_> = rec.diagnostics().cloned().collect();
    io::emit_diagnostics_csv(&records, &out.join("diagnostics.csv"))?;
    let monotonicity = entropy_monotonicity(&records, grid.dx());
    let floor = positivity_floor_check(&records, setup.alpha_floor, grid.dx());

    // triples whose spacing is uneven (a clipped final step) are skipped
    let residual: Vec<ResidualSample> = rec
        .records
        .windows(3)
        .filter_map(|w| {
            entropy_residual(&w[0].state, &w[1].state, &w[2].state, &grid, &setup)
                .ok()
                .map(|r| ResidualSample {
                    t: w[1].state.t,
                    l2: r.l2,
                    linf: r.linf,
                })
        })
        .collect();
    let max_residual_l2 = residual.iter().map(|r| r.l2).fold(0.0, f64::max);
    let report = EntropyReport {
        monotonicity,
        floor,
        residual,
        max_residual_l2,
    };
    io::emit_json(&report, &out.join("entropy.json"))?;

    let lines = vec![
        format!(
            "entropy: worst excess over slack {:.3e}",
            monotonicity.worst_excess
        ),
        format!("positivity floor: worst margin {:.3e}", floor.worst_margin),
        format!(
            "entropy identity residual: max l2 {max_residual_l2:.3e} over {} record triples",
            report.residual.len()
        ),
    ];
    let mut failures = Vec::new();
    if !monotonicity.passed {
        failures.push(format!(
            "entropy increased at t = {}",
            monotonicity.worst_time
        ));
    }
    if !floor.passed {
        failures.push(format!(
            "positivity floor violated at t = {}",
            floor.worst_time
        ));
    }
    finish(lines, failures)
}

fn self_converge(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let grids = (0..cfg.levels)
        .rev()
        .map(|k| validated_grid(cfg, cfg.n_cells >> k))
        .collect::<Result<Vec<_>, _>>()?;
    let setup = cfg.setup();
    visclimit::make_initial(&setup, &grids[0]).map_err(|e| CliError::Validation(e.to_string()))?;
    let study = self_convergence(&setup, &grids, &cfg.solver())?;
    io::emit_json(&study, &out.join("self_convergence.json"))?;
    let mut lines: Vec<String> = study
        .table
        .iter()
        .filter_map(|r| {
            r.diff_to_finer
                .map(|d| format!("N = {:<6} difference to finer {d:.6e}", r.n_cells))
        })
        .collect();
    lines.push(match study.slope {
        Some(s) => format!("observed order {s:.4}"),
        None => "differences vanish; no order to report".into(),
    });
    Ok(Outcome { lines })
}

#[derive(Debug, Serialize)]
struct TransformReport {
    scaling: Scaling,
    states: usize,
    residual: Option<visclimit::hopf_cole::KsResidual>,
}

fn transform(cfg: &RunConfig, out: &Path) -> Result<Outcome, CliError> {
    let scaling =
        rescale_to_normalized(&cfg.ks).map_err(|e| CliError::Validation(e.to_string()))?;
    let mut lines = vec![format!(
        "normalized D = {}, eps = {}; x factor {}, t factor {}, gradient factor {}",
        scaling.diffusion,
        scaling.epsilon,
        scaling.space_factor,
        scaling.time_factor,
        scaling.v_factor
    )];
    let mut report = TransformReport {
        scaling,
        states: 0,
        residual: None,
    };
    if let Some(path) = &cfg.ks_input {
        let (grid, traj) = io::read_ks_csv(path, cfg.ks)?;
        report.states = traj.len();
        let last = traj.last().expect("reader rejects empty files");
        let state = hopf_cole(last, &grid)?;
        io::emit_state_csv(&state, &grid, &out.join("state.csv"))?;
        if traj.len() >= 3 {
            let r = residual_vs_conservation_form(&traj, &grid)?;
            lines.push(format!(
                "conservation-form residual: l2 u {:.3e}, l2 v {:.3e}",
                r.l2_u, r.l2_v
            ));
            report.residual = Some(r);
        }
    }
    io::emit_json(&report, &out.join("transform.json"))?;
    Ok(Outcome { lines })
}
