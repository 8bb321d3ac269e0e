use std::path::Path;
use std::process::Command;

use visclimit::hopf_cole::{inverse_hopf_cole, KsParams, KsState};
use visclimit::stepper::{ImexStepper, System};
use visclimit::{integrate, Grid1D, ProblemKind, State};
use visclimit_cli::io::{
    emit_ks_csv, emit_state_csv, read_diagnostics_csv, read_ks_csv, read_state_csv,
};
use visclimit_cli::{execute, parse_config, Experiment};

const CAUCHY_ACCEPTANCE: &str = "\
# cauchy ladder
experiment = converge
kind = cauchy
epsilon = 0.1
t_final = 0.5
n_cells = 2048
half_width = 20
profile = gaussian
amplitude_u = 0.3
amplitude_v = 0.3
width = 1
cfl = 0.4
eps_ladder = 0.1, 0.05, 0.025, 0.0125
";

fn small_ibvp(out: &Path, extra: &str) -> String {
    format!(
        "kind = ibvp\nepsilon = 0.05\nt_final = 0.1\nn_cells = 64\nout_dir = {}\n{extra}",
        out.display()
    )
}

fn bits(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

#[test]
fn rest_state_csv_is_bit_faithful() {
    let dir = tempfile::tempdir().unwrap();
    let grid = Grid1D::symmetric(20.0, 100).unwrap();
    let mut state = State::rest(grid.node_count(), 1.0);
    state.u[3] = 0.1 + 0.2;
    state.v[7] = 1.0 / 3.0;
    let path = dir.path().join("state.csv");
    emit_state_csv(&state, &grid, &path).unwrap();
    let table = read_state_csv(&path).unwrap();
    assert_eq!(bits(&table.x), bits(&grid.nodes()));
    assert_eq!(bits(&table.u), bits(&state.u));
    assert_eq!(bits(&table.v), bits(&state.v));
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("x,u,v\n"));
}

#[test]
fn diagnostics_rows_match_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = parse_config(&small_ibvp(dir.path(), "stride = 3")).unwrap();
    execute(&cfg).unwrap();
    let rows = read_diagnostics_csv(&dir.path().join("diagnostics.csv")).unwrap();
    let rec = integrate(
        &cfg.setup(),
        &cfg.grid().unwrap(),
        &cfg.solver(),
        visclimit::TrajectoryRecorder::new(3),
    )
    .unwrap();
    let records: Vec<_> = rec.diagnostics().cloned().collect();
    assert_eq!(rows.len(), records.len());
    assert_eq!(rows, records);
    assert!(rows.windows(2).all(|w| w[0].t < w[1].t));
}

#[test]
fn report_json_has_schema_keys() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = parse_config(&small_ibvp(dir.path(), "")).unwrap();
    cfg.experiment = Experiment::Converge;
    execute(&cfg).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&text).unwrap();
    let ladder = json["eps_ladder"].as_array().unwrap();
    assert_eq!(ladder.len(), 4);
    let errors = json["errors"].as_array().unwrap();
    assert_eq!(errors.len(), ladder.len());
    for (e, eps) in errors.iter().zip(ladder) {
        assert_eq!(e["epsilon"], *eps);
        assert!(e["err_sum"].as_f64().unwrap() > 0.0);
    }
    assert!(json["fitted_slope"].as_f64().unwrap().is_finite());
    assert!(json["grid_meta"]["dt"].as_f64().unwrap() > 0.0);
}

#[test]
fn acceptance_config_roundtrips() {
    let cfg = parse_config(CAUCHY_ACCEPTANCE).unwrap();
    assert_eq!(cfg.kind, ProblemKind::CauchyTruncated);
    assert_eq!(parse_config(&cfg.to_string()).unwrap(), cfg);
}

#[test]
fn effective_config_reproduces_outputs() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let cfg = parse_config(&small_ibvp(first.path(), "")).unwrap();
    execute(&cfg).unwrap();
    let echoed = std::fs::read_to_string(first.path().join("effective.cfg")).unwrap();
    let mut again = parse_config(&echoed).unwrap();
    assert_eq!(again, cfg);
    again.out_dir = second.path().to_path_buf();
    execute(&again).unwrap();
    for name in ["state.csv", "diagnostics.csv"] {
        let a = std::fs::read(first.path().join(name)).unwrap();
        let b = std::fs::read(second.path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

fn ks_trajectory(grid: &Grid1D, params: KsParams) -> Vec<KsState> {
    let system = System {
        kind: ProblemKind::CauchyTruncated,
        epsilon: params.epsilon,
        v_infinity: 1.0,
        coefficients: params.coefficients(),
    };
    let mut stepper = ImexStepper::new(system, *grid).unwrap();
    let x = grid.nodes();
    let mut state = State::new(
        x.iter().map(|x| 0.3 * x * (-x * x).exp()).collect(),
        x.iter().map(|x| 1.0 + 0.2 * (-x * x).exp()).collect(),
        0.0,
    )
    .unwrap();
    (0..5)
        .map(|k| {
            if k > 0 {
                stepper.step_in_place(&mut state, 0.01).unwrap();
            }
            KsState {
                c: inverse_hopf_cole(&state, grid, 2.0).unwrap(),
                u: state.v.clone(),
                t: 0.01 * k as f64,
                params,
            }
        })
        .collect()
}

#[test]
fn ks_trajectory_csv_roundtrips_and_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let params = KsParams {
        diffusion: 1.0,
        chi: 1.0,
        alpha_rate: 1.0,
        epsilon: 0.1,
    };
    let grid = Grid1D::symmetric(8.0, 128).unwrap();
    let traj = ks_trajectory(&grid, params);
    let path = dir.path().join("ks.csv");
    emit_ks_csv(&traj, &grid, &path).unwrap();
    let (grid2, back) = read_ks_csv(&path, params).unwrap();
    assert_eq!(grid2.n_cells(), grid.n_cells());
    assert_eq!(back.len(), traj.len());
    for (a, b) in back.iter().zip(&traj) {
        assert_eq!(bits(&a.c), bits(&b.c));
        assert_eq!(a.t.to_bits(), b.t.to_bits());
    }

    let out = dir.path().join("out");
    let text = format!(
        "experiment = transform\nkind = cauchy\nepsilon = 0.1\nt_final = 0\nks_input = {}\nout_dir = {}\n",
        path.display(),
        out.display()
    );
    execute(&parse_config(&text).unwrap()).unwrap();
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("transform.json")).unwrap())
            .unwrap();
    assert_eq!(json["states"], 5);
    assert!(json["residual"]["l2_u"].as_f64().unwrap() < 1e-2);
    assert!(out.join("state.csv").exists());
}

#[test]
fn ks_reader_rejects_mismatched_levels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ks.csv");
    std::fs::write(
        &path,
        "t,x,c,u\n0,0,1,1\n0,1,1,1\n0,2,1,1\n0.1,0,1,1\n0.1,1.5,1,1\n0.1,2,1,1\n",
    )
    .unwrap();
    let params = KsParams {
        diffusion: 1.0,
        chi: 1.0,
        alpha_rate: 1.0,
        epsilon: 0.0,
    };
    assert!(read_ks_csv(&path, params).is_err());
    std::fs::write(&path, "t,x,rho\n0,0,1\n").unwrap();
    let err = read_ks_csv(&path, params).unwrap_err();
    assert!(err.to_string().contains("expected columns"), "{err}");
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_visclimit"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: String| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_owned()
    };
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let ok = write("ok.cfg", small_ibvp(dir.path(), ""));
    assert_eq!(cli(&["run", "--config", &ok, "--out", out, "--quiet"]).0, 0);

    let bad = write(
        "bad.cfg",
        "kind = ibvp\nepsilon = -0.1\nt_final = 1\n".into(),
    );
    let (code, stderr) = cli(&["run", "--config", &bad, "--out", out]);
    assert_eq!(code, 2);
    assert!(stderr.contains("epsilon"), "{stderr}");

    let (code, _) = cli(&[
        "converge",
        "--config",
        &ok,
        "--out",
        out,
        "--eps",
        "0.1,0.2,0.05",
    ]);
    assert_eq!(code, 2);

    let stalled = write("stalled.cfg", small_ibvp(dir.path(), "max_steps = 2"));
    assert_eq!(cli(&["run", "--config", &stalled, "--out", out]).0, 3);

    let strict = write("strict.cfg", small_ibvp(dir.path(), "slope_min = 5"));
    let (code, stderr) = cli(&["converge", "--config", &strict, "--out", out, "--quiet"]);
    assert_eq!(code, 4, "{stderr}");
    assert!(Path::new(out).join("report.json").exists());
}
