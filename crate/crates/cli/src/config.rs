//! Flat `key = value` experiment configuration.

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;

use thiserror::Error;
use visclimit::convergence::DEFAULT_LADDER;
use visclimit::hopf_cole::KsParams;
use visclimit::stepper::{SolverConfig, TimeStep, DEFAULT_CFL};
use visclimit::{Grid1D, InitialProfile, ProblemKind, ProblemSetup};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` given twice (first on line {first})")]
    Duplicate {
        line: usize,
        key: String,
        first: usize,
    },
    #[error("line {line}: `{key}`: cannot parse `{value}` as {expected}")]
    Type {
        line: usize,
        key: String,
        value: String,
        expected: &'static str,
    },
    #[error("line {line}: `{key}`: {message}")]
    Invalid {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing required key `{0}`")]
    Missing(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Run,
    Converge,
    EntropyCheck,
    SelfConverge,
    Transform,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Self::Run => "run",
            Self::Converge => "converge",
            Self::EntropyCheck => "entropy-check",
            Self::SelfConverge => "self-converge",
            Self::Transform => "transform",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [
            Self::Run,
            Self::Converge,
            Self::EntropyCheck,
            Self::SelfConverge,
            Self::Transform,
        ]
        .into_iter()
        .find(|e| e.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Gaussian,
    Cosine,
}

/// Fully resolved configuration of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub kind: ProblemKind,
    pub epsilon: f64,
    pub t_final: f64,
    pub v_infinity: f64,
    pub time_step: TimeStep,
    pub max_steps: usize,
    pub n_cells: usize,
    /// `L` of the truncated domain `[-L, L]`; ignored for the IBVP.
    pub half_width: f64,
    pub profile: Profile,
    pub amplitude_u: f64,
    pub amplitude_v: f64,
    pub width: f64,
    pub stride: usize,
    pub out_dir: PathBuf,
    pub eps_ladder: Vec<f64>,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Number of factor-two grids in a self-convergence study, finest last.
    pub levels: usize,
    pub ks_input: Option<PathBuf>,
    pub ks: KsParams,
}

const KEYS: &[&str] = &[
    "experiment",
    "kind",
    "epsilon",
    "t_final",
    "v_infinity",
    "cfl",
    "dt",
    "max_steps",
    "n_cells",
    "half_width",
    "profile",
    "amplitude_u",
    "amplitude_v",
    "width",
    "stride",
    "out_dir",
    "eps_ladder",
    "slope_min",
    "slope_max",
    "levels",
    "ks_input",
    "ks_diffusion",
    "ks_chi",
    "ks_alpha",
    "ks_epsilon",
];

fn kind_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::CauchyTruncated => "cauchy",
        ProblemKind::Ibvp => "ibvp",
    }
}

/// Raw `key -> (line, value)` table.
struct Entries(HashMap<String, (usize, String)>);

impl Entries {
    fn line(&self, key: &str) -> usize {
        self.0.get(key).map_or(0, |(l, _)| *l)
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.0.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn parsed<T: std::str::FromStr>(
        &self,
        key: &str,
        expected: &'static str,
    ) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| ConfigError::Type {
                line,
                key: key.into(),
                value: value.into(),
                expected,
            }),
        }
    }

    fn float(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = self.parsed(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(self.invalid(key, "must be finite")),
            _ => Ok(v),
        }
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.float(key)?.unwrap_or(default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(self.invalid(key, &format!("must be > 0, got {v}")))
        }
    }

    fn count(&self, key: &str, default: usize, min: usize) -> Result<usize, ConfigError> {
        let v = self
            .parsed(key, "a non-negative integer")?
            .unwrap_or(default);
        if v >= min {
            Ok(v)
        } else {
            Err(self.invalid(key, &format!("must be >= {min}, got {v}")))
        }
    }

    fn invalid(&self, key: &str, message: &str) -> ConfigError {
        ConfigError::Invalid {
            line: self.line(key),
            key: key.into(),
            message: message.into(),
        }
    }
}

pub fn parse_eps_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| format!("`{}` is not a number", s.trim()))
        })
        .collect()
}

fn check_ladder(ladder: &[f64]) -> Result<(), String> {
    if ladder.len() < 3 {
        return Err(format!("needs at least 3 values, got {}", ladder.len()));
    }
    if ladder.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err("values must be finite and > 0".into());
    }
    if ladder.windows(2).any(|w| w[1] >= w[0]) {
        return Err("values must be strictly decreasing".into());
    }
    Ok(())
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut table: HashMap<String, (usize, String)> = HashMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let Some((key, value)) = body.split_once('=') else {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().into(),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(ConfigError::Syntax {
                line,
                text: raw.trim().into(),
            });
        }
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.into(),
            });
        }
        if let Some((first, _)) = table.get(key) {
            return Err(ConfigError::Duplicate {
                line,
                key: key.into(),
                first: *first,
            });
        }
        table.insert(key.into(), (line, value.into()));
    }
    let e = Entries(table);

    let experiment = match e.raw("experiment") {
        None => Experiment::Run,
        Some((line, v)) => Experiment::parse(v).ok_or_else(|| ConfigError::Type {
            line,
            key: "experiment".into(),
            value: v.into(),
            expected: "run, converge, entropy-check, self-converge or transform",
        })?,
    };
    let kind = match e.raw("kind").ok_or(ConfigError::Missing("kind"))? {
        (_, "cauchy") => ProblemKind::CauchyTruncated,
        (_, "ibvp") => ProblemKind::Ibvp,
        (line, v) => {
            return Err(ConfigError::Type {
                line,
                key: "kind".into(),
                value: v.into(),
                expected: "cauchy or ibvp",
            })
        }
    };
    let epsilon = e.float("epsilon")?.ok_or(ConfigError::Missing("epsilon"))?;
    if epsilon < 0.0 {
        return Err(e.invalid("epsilon", &format!("must be >= 0, got {epsilon}")));
    }
    let t_final = e.float("t_final")?.ok_or(ConfigError::Missing("t_final"))?;
    if t_final < 0.0 {
        return Err(e.invalid("t_final", &format!("must be >= 0, got {t_final}")));
    }
    let v_infinity = e.positive("v_infinity", 1.0)?;

    let time_step = match (e.raw("cfl").is_some(), e.raw("dt").is_some()) {
        (true, true) => return Err(e.invalid("dt", "`cfl` and `dt` are mutually exclusive")),
        (_, true) => TimeStep::Fixed(e.positive("dt", 0.0)?),
        _ => TimeStep::Cfl(e.positive("cfl", DEFAULT_CFL)?),
    };
    let max_steps = e.count("max_steps", SolverConfig::DEFAULT_MAX_STEPS, 1)?;
    let n_cells = e.count("n_cells", 1024, visclimit::model::MIN_CELLS)?;
    let half_width = e.positive("half_width", 20.0)?;

    let profile = match e.raw("profile") {
        None if kind == ProblemKind::Ibvp => Profile::Cosine,
        None => Profile::Gaussian,
        Some((_, "gaussian")) => Profile::Gaussian,
        Some((_, "cosine")) => Profile::Cosine,
        Some((line, v)) => {
            return Err(ConfigError::Type {
                line,
                key: "profile".into(),
                value: v.into(),
                expected: "gaussian or cosine",
            })
        }
    };
    if profile == Profile::Cosine && kind == ProblemKind::CauchyTruncated {
        return Err(e.invalid("profile", "cosine data is only defined for the ibvp"));
    }
    let amplitude_u = e.float("amplitude_u")?.unwrap_or(0.3);
    let default_av = if profile == Profile::Cosine { 0.5 } else { 0.3 };
    let amplitude_v = e.float("amplitude_v")?.unwrap_or(default_av);
    if amplitude_v.abs() >= v_infinity {
        return Err(e.invalid(
            "amplitude_v",
            &format!("|amplitude_v| must stay below v_infinity = {v_infinity}"),
        ));
    }
    let width = e.positive("width", 1.0)?;
    let stride = e.count("stride", 1, 1)?;
    let out_dir = PathBuf::from(e.raw("out_dir").map_or("out", |(_, v)| v));

    let eps_ladder = match e.raw("eps_ladder") {
        None => DEFAULT_LADDER.to_vec(),
        Some((line, v)) => parse_eps_list(v).map_err(|m| ConfigError::Invalid {
            line,
            key: "eps_ladder".into(),
            message: m,
        })?,
    };
    check_ladder(&eps_ladder).map_err(|m| e.invalid("eps_ladder", &m))?;

    let (default_min, default_max) = match kind {
        ProblemKind::CauchyTruncated => (0.85, 1.15),
        ProblemKind::Ibvp => (0.70, f64::INFINITY),
    };
    let slope_min: f64 = e.parsed("slope_min", "a number")?.unwrap_or(default_min);
    let slope_max: f64 = e.parsed("slope_max", "a number")?.unwrap_or(default_max);
    if slope_min.is_nan() || slope_max.is_nan() || slope_min > slope_max {
        return Err(e.invalid("slope_max", "must not be below slope_min"));
    }
    let levels = e.count("levels", 3, 2)?;
    if n_cells >> (levels - 1) < visclimit::model::MIN_CELLS || n_cells % (1 << (levels - 1)) != 0 {
        return Err(e.invalid(
            "levels",
            &format!("n_cells = {n_cells} cannot be halved {} times", levels - 1),
        ));
    }

    let ks_input = e.raw("ks_input").map(|(_, v)| PathBuf::from(v));
    let ks = KsParams {
        diffusion: e.positive("ks_diffusion", 1.0)?,
        chi: e.positive("ks_chi", 1.0)?,
        alpha_rate: e.positive("ks_alpha", 1.0)?,
        epsilon: e.float("ks_epsilon")?.unwrap_or(epsilon),
    };
    if ks.epsilon < 0.0 {
        return Err(e.invalid("ks_epsilon", "must be >= 0"));
    }

    let cfg = RunConfig {
        experiment,
        kind,
        epsilon,
        t_final,
        v_infinity,
        time_step,
        max_steps,
        n_cells,
        half_width,
        profile,
        amplitude_u,
        amplitude_v,
        width,
        stride,
        out_dir,
        eps_ladder,
        slope_min,
        slope_max,
        levels,
        ks_input,
        ks,
    };
    cfg.setup()
        .validate()
        .map_err(|err| e.invalid("kind", &err.to_string()))?;
    Ok(cfg)
}

impl RunConfig {
    /// Replaces the epsilon ladder after checking it.
    pub fn with_eps_ladder(mut self, eps_ladder: Vec<f64>) -> Result<Self, String> {
        check_ladder(&eps_ladder)?;
        self.eps_ladder = eps_ladder;
        Ok(self)
    }

    pub fn setup(&self) -> ProblemSetup {
        let profile = match self.profile {
            Profile::Gaussian => InitialProfile::GaussianBump {
                amplitude_u: self.amplitude_u,
                amplitude_v: self.amplitude_v,
                width: self.width,
            },
            Profile::Cosine => InitialProfile::CosinePair {
                amplitude_u: self.amplitude_u,
                amplitude_v: self.amplitude_v,
            },
        };
        ProblemSetup::new(self.kind, self.epsilon, self.t_final, profile)
            .with_v_infinity(self.v_infinity)
    }

    pub fn grid_with(&self, n_cells: usize) -> visclimit::Result<Grid1D> {
        match self.kind {
            ProblemKind::CauchyTruncated => Grid1D::symmetric(self.half_width, n_cells),
            ProblemKind::Ibvp => Grid1D::unit_interval(n_cells),
        }
    }

    pub fn grid(&self) -> visclimit::Result<Grid1D> {
        self.grid_with(self.n_cells)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            time_step: self.time_step,
            max_steps: self.max_steps,
        }
    }
}

/// Effective configuration with every default spelled out; parsing it back
/// yields an identical [`RunConfig`].
impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let _ = writeln!(s, "experiment = {}", self.experiment.name());
        let _ = writeln!(s, "kind = {}", kind_name(self.kind));
        let _ = writeln!(s, "epsilon = {:?}", self.epsilon);
        let _ = writeln!(s, "t_final = {:?}", self.t_final);
        let _ = writeln!(s, "v_infinity = {:?}", self.v_infinity);
        match self.time_step {
            TimeStep::Cfl(c) => writeln!(s, "cfl = {c:?}"),
            TimeStep::Fixed(dt) => writeln!(s, "dt = {dt:?}"),
        }?;
        let _ = writeln!(s, "max_steps = {}", self.max_steps);
        let _ = writeln!(s, "n_cells = {}", self.n_cells);
        let _ = writeln!(s, "half_width = {:?}", self.half_width);
        let profile = match self.profile {
            Profile::Gaussian => "gaussian",
            Profile::Cosine => "cosine",
        };
        let _ = writeln!(s, "profile = {profile}");
        let _ = writeln!(s, "amplitude_u = {:?}", self.amplitude_u);
        let _ = writeln!(s, "amplitude_v = {:?}", self.amplitude_v);
        let _ = writeln!(s, "width = {:?}", self.width);
        let _ = writeln!(s, "stride = {}", self.stride);
        let _ = writeln!(s, "out_dir = {}", self.out_dir.display());
        let ladder: Vec<String> = self.eps_ladder.iter().map(|e| format!("{e:?}")).collect();
        let _ = writeln!(s, "eps_ladder = {}", ladder.join(", "));
        let _ = writeln!(s, "slope_min = {:?}", self.slope_min);
        let _ = writeln!(s, "slope_max = {:?}", self.slope_max);
        let _ = writeln!(s, "levels = {}", self.levels);
        if let Some(p) = &self.ks_input {
            let _ = writeln!(s, "ks_input = {}", p.display());
        }
        let _ = writeln!(s, "ks_diffusion = {:?}", self.ks.diffusion);
        let _ = writeln!(s, "ks_chi = {:?}", self.ks.chi);
        let _ = writeln!(s, "ks_alpha = {:?}", self.ks.alpha_rate);
        let _ = writeln!(s, "ks_epsilon = {:?}", self.ks.epsilon);
        f.write_str(&s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = parse_config("kind = cauchy\nepsilon = 0.05\nt_final = 0.5\n").unwrap();
        assert_eq!(cfg.v_infinity, 1.0);
        assert_eq!(cfg.time_step, TimeStep::Cfl(0.4));
        assert_eq!(cfg.n_cells, 1024);
        assert_eq!(cfg.experiment, Experiment::Run);
        assert_eq!(cfg.profile, Profile::Gaussian);
        assert_eq!(cfg.eps_ladder, DEFAULT_LADDER.to_vec());
    }

    #[test]
    fn ibvp_defaults_to_cosine() {
        let cfg = parse_config("kind = ibvp\nepsilon = 0\nt_final = 1").unwrap();
        assert_eq!(cfg.profile, Profile::Cosine);
        assert_eq!(cfg.amplitude_v, 0.5);
        assert_eq!(cfg.slope_max, f64::INFINITY);
    }

    #[test]
    fn negative_epsilon_is_rejected() {
        let err = parse_config("kind = cauchy\nepsilon = -0.1\nt_final = 0.5").unwrap_err();
        assert!(
            matches!(&err, ConfigError::Invalid { line: 2, key, .. } if key == "epsilon"),
            "{err}"
        );
        assert!(err.to_string().contains(">= 0"));
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let err = parse_config("kind = cauchy\n# note\nviscosity = 1").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                line: 3,
                key: "viscosity".into()
            }
        );
        let err = parse_config("kind = cauchy\nkind = ibvp").unwrap_err();
        assert!(matches!(
            err,
            ConfigError::Duplicate {
                line: 2,
                first: 1,
                ..
            }
        ));
    }

    #[test]
    fn type_and_syntax_errors() {
        let err = parse_config("kind = cauchy\nepsilon = small\nt_final = 1").unwrap_err();
        assert!(matches!(err, ConfigError::Type { line: 2, .. }), "{err}");
        assert!(matches!(
            parse_config("kind cauchy"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert_eq!(
            parse_config("epsilon = 1\nt_final = 1"),
            Err(ConfigError::Missing("kind"))
        );
    }

    #[test]
    fn cross_field_checks() {
        let base = "kind = cauchy\nepsilon = 0.1\nt_final = 1\n";
        assert!(parse_config(&format!("{base}cfl = 0.3\ndt = 0.01")).is_err());
        assert!(parse_config(&format!("{base}profile = cosine")).is_err());
        assert!(parse_config(&format!("{base}amplitude_v = 1.5")).is_err());
        assert!(parse_config(&format!("{base}eps_ladder = 0.1, 0.2, 0.05")).is_err());
        assert!(parse_config(&format!("{base}n_cells = 64\nlevels = 5")).is_err());
        assert!(parse_config(&format!("{base}stride = 0")).is_err());
    }

    #[test]
    fn effective_config_roundtrips() {
        let text = "experiment = converge\nkind = cauchy\nepsilon = 0.1\nt_final = 0.5\n\
                    n_cells = 2048\nhalf_width = 20\namplitude_u = 0.3\namplitude_v = 0.3\nwidth = 1\n\
                    eps_ladder = 0.1, 0.05, 0.025, 0.0125\ndt = 0.0031247807340119803\n";
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&cfg.to_string()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.to_string(), again.to_string());
    }
}
