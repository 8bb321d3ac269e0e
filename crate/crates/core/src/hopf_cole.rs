//! Bridge between the Keller-Segel variables `(c, rho)` and the
//! conservation-law variables.
//!
//! With consumption `f(c) = alpha c` the Keller-Segel system
//!
//! ```text
//! c_t   = eps c_xx - alpha rho c
//! rho_t = (D rho_x - chi rho c_x / c)_x
//! ```
//!
//! becomes, under `u = -(ln c)_x` and `v = rho`,
//!
//! ```text
//! u_t + (eps u^2 - alpha v)_x = eps u_xx
//! v_t - chi (u v)_x           = D v_xx
//! ```
//!
//! so the transformed chemical gradient is the `u` field of a [`State`] and
//! the cell density is its `v` field (the one that must stay positive).
//!
//! The discrete transform differences `ln c` on cell midpoints,
//! `m_{i+1/2} = -(ln c_{i+1} - ln c_i) / dx`, and reports nodal values as
//! midpoint averages (second-order extrapolation at the two ends). The
//! inverse undoes exactly that map, so `c -> u -> c` is the identity up to
//! rounding once the multiplicative constant is pinned by an anchor value.

use serde::{Deserialize, Serialize};

use crate::diagnostics::equal_spacing;
use crate::error::{require_positive, Error, Result};
use crate::model::{Grid1D, ProblemKind, State};
use crate::stepper::{advance, Coefficients, ImexStepper, System};

/// Keller-Segel parameters: cell diffusion `D`, chemosensitivity `chi`,
/// consumption rate `alpha` and chemical diffusion `eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsParams {
    pub diffusion: f64,
    pub chi: f64,
    pub alpha_rate: f64,
    pub epsilon: f64,
}

impl KsParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("D", self.diffusion)?;
        require_positive("chi", self.chi)?;
        require_positive("alpha", self.alpha_rate)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument(format!(
                "chemical diffusion must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    /// Coefficients of the transformed (unscaled) conservation laws.
    pub fn coefficients(&self) -> Coefficients {
        Coefficients {
            drive: self.alpha_rate,
            chemo: self.chi,
            v_diffusion: self.diffusion,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsState {
    /// Chemical concentration, strictly positive.
    pub c: Vec<f64>,
    /// Cell density.
    pub u: Vec<f64>,
    pub t: f64,
    pub params: KsParams,
}

/// Maps `(c, rho)` to `(u, v) = (-(ln c)_x, rho)`.
pub fn hopf_cole(ks: &KsState, grid: &Grid1D) -> Result<State> {
    let n = grid.node_count();
    if ks.c.len() != n || ks.u.len() != n {
        return Err(Error::Argument(format!(
            "KS state has {} / {} values for {n} nodes",
            ks.c.len(),
            ks.u.len()
        )));
    }
    if let Some(&c) = ks.c.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(Error::NonPositive {
            name: "c",
            value: c,
        });
    }
    let dx = grid.dx();
    let logs: Vec<f64> = ks.c.iter().map(|c| c.ln()).collect();
    let mid: Vec<f64> = logs.windows(2).map(|w| -(w[1] - w[0]) / dx).collect();
    let m = mid.len();
    let mut grad = vec![0.0; n];
    grad[0] = 0.5 * (3.0 * mid[0] - mid[1]);
    for i in 1..n - 1 {
        grad[i] = 0.5 * (mid[i - 1] + mid[i]);
    }
    grad[n - 1] = 0.5 * (3.0 * mid[m - 1] - mid[m - 2]);
    State::new(grad, ks.u.clone(), ks.t)
}

/// Rebuilds `c` from the gradient field `state.u` with `c(x_left) = c_anchor`.
pub fn inverse_hopf_cole(state: &State, grid: &Grid1D, c_anchor: f64) -> Result<Vec<f64>> {
    require_positive("c_anchor", c_anchor)?;
    let n = grid.node_count();
    if state.len() != n {
        return Err(Error::Argument(format!(
            "state has {} nodes, grid has {n}",
            state.len()
        )));
    }
    let g = &state.u;
    if g.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("gradient field is not finite".into()));
    }
    let dx = grid.dx();
    // invert the nodal averaging: 2 g0 = 3 m0 - m1 and 2 g1 = m0 + m1
    let mut mid = Vec::with_capacity(n - 1);
    mid.push(0.5 * (g[0] + g[1]));
    for i in 1..n - 1 {
        let prev = mid[i - 1];
        mid.push(2.0 * g[i] - prev);
    }
    let mut acc = 0.0;
    let mut c = Vec::with_capacity(n);
    c.push(c_anchor);
    for m in &mid {
        acc -= m * dx;
        c.push(c_anchor * acc.exp());
    }
    Ok(c)
}

/// Scaled parameters and the factors relating physical and normalized
/// variables: `x~ = space_factor x`, `t~ = time_factor t`, and the physical
/// gradient equals `v_factor` times the normalized one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub diffusion: f64,
    pub epsilon: f64,
    pub space_factor: f64,
    pub time_factor: f64,
    pub v_factor: f64,
}

/// `t~ = alpha t`, `x~ = sqrt(alpha/chi) x`, `D~ = D/chi`, `eps~ = eps/chi`.
pub fn rescale_to_normalized(params: &KsParams) -> Result<Scaling> {
    params.validate()?;
    let s = (params.alpha_rate / params.chi).sqrt();
    Ok(Scaling {
        diffusion: params.diffusion / params.chi,
        epsilon: params.epsilon / params.chi,
        space_factor: s,
        time_factor: params.alpha_rate,
        v_factor: s,
    })
}

/// Residual norms of both transformed equations over a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResidual {
    /// Gradient equation `u_t + (eps u^2 - alpha v)_x - eps u_xx`.
    pub l2_u: f64,
    pub linf_u: f64,
    /// Density equation `v_t - chi (u v)_x - D v_xx`.
    pub l2_v: f64,
    pub linf_v: f64,
}

/// Transforms each state and evaluates both conservation laws with centered
/// differences in time and space at interior nodes. `l2` entries are the
/// largest spatial L2 norm over the interior time levels.
pub fn residual_vs_conservation_form(trajectory: &[KsState], grid: &Grid1D) -> Result<KsResidual> {
    if trajectory.len() < 3 {
        return Err(Error::Argument(format!(
            "need at least 3 states, got {}",
            trajectory.len()
        )));
    }
    let params = trajectory[0].params;
    params.validate()?;
    if trajectory.iter().any(|s| s.params != params) {
        return Err(Error::Argument(
            "parameters change along the trajectory".into(),
        ));
    }
    let times: Vec<f64> = trajectory.iter().map(|s| s.t).collect();
    let dt = equal_spacing(&times)?;
    let states = trajectory
        .iter()
        .map(|s| hopf_cole(s, grid))
        .collect::<Result<Vec<_>>>()?;

    let KsParams {
        diffusion,
        chi,
        alpha_rate,
        epsilon,
    } = params;
    let n = grid.node_count();
    let dx = grid.dx();
    let inv_2dx = 0.5 / dx;
    let inv_dx2 = 1.0 / (dx * dx);
    let mut out = KsResidual {
        l2_u: 0.0,
        linf_u: 0.0,
        l2_v: 0.0,
        linf_v: 0.0,
    };
    for w in states.windows(3) {
        let (prev, mid, next) = (&w[0], &w[1], &w[2]);
        let (u, v) = (&mid.u, &mid.v);
        let (mut su, mut sv) = (0.0, 0.0);
        for i in 1..n - 1 {
            let fu = |j: usize| epsilon * u[j] * u[j] - alpha_rate * v[j];
            let ru = (next.u[i] - prev.u[i]) / (2.0 * dt) + (fu(i + 1) - fu(i - 1)) * inv_2dx
                - epsilon * (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_dx2;
            let rv = (next.v[i] - prev.v[i]) / (2.0 * dt)
                - chi * (u[i + 1] * v[i + 1] - u[i - 1] * v[i - 1]) * inv_2dx
                - diffusion * (v[i - 1] - 2.0 * v[i] + v[i + 1]) * inv_dx2;
            su += dx * ru * ru;
            sv += dx * rv * rv;
            out.linf_u = out.linf_u.max(ru.abs());
            out.linf_v = out.linf_v.max(rv.abs());
        }
        out.l2_u = out.l2_u.max(su.sqrt());
        out.l2_v = out.l2_v.max(sv.sqrt());
    }
    Ok(out)
}

/// Result of integrating the same data in physical and normalized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualRun {
    /// L-infinity distance in normalized variables.
    pub linf_diff: f64,
    /// Mesh width of the normalized grid.
    pub dx_normalized: f64,
}

/// Integrates the dimensional conservation laws on `grid` and the normalized
/// system on the rescaled grid, with `dt` rescaled accordingly, and compares
/// the final states. Uses far-field Dirichlet closures, so `initial` must sit
/// at `(0, v_inf)` at both ends.
pub fn scaling_dual_run(
    params: &KsParams,
    grid: &Grid1D,
    initial: &State,
    v_inf: f64,
    dt: f64,
    steps: usize,
) -> Result<DualRun> {
    let scaling = rescale_to_normalized(params)?;
    let physical = System {
        kind: ProblemKind::CauchyTruncated,
        epsilon: params.epsilon,
        v_infinity: v_inf,
        coefficients: params.coefficients(),
    };
    let normalized = System {
        kind: ProblemKind::CauchyTruncated,
        epsilon: scaling.epsilon,
        v_infinity: v_inf,
        coefficients: Coefficients {
            v_diffusion: scaling.diffusion,
            ..Coefficients::NORMALIZED
        },
    };
    let s = scaling.space_factor;
    let scaled_grid = Grid1D::new(s * grid.x_left(), s * grid.x_right(), grid.n_cells())?;
    let scaled_initial = State::new(
        initial.u.iter().map(|u| u / scaling.v_factor).collect(),
        initial.v.clone(),
        scaling.time_factor * initial.t,
    )?;

    let phys = advance(
        &mut ImexStepper::new(physical, *grid)?,
        initial.clone(),
        dt,
        steps,
    )?;
    let norm = advance(
        &mut ImexStepper::new(normalized, scaled_grid)?,
        scaled_initial,
        scaling.time_factor * dt,
        steps,
    )?;

    let linf_diff = phys
        .u
        .iter()
        .zip(&norm.u)
        .map(|(p, n)| (p / scaling.v_factor - n).abs())
        .chain(phys.v.iter().zip(&norm.v).map(|(p, n)| (p - n).abs()))
        .fold(0.0, f64::max);
    Ok(DualRun {
        linf_diff,
        dx_normalized: scaled_grid.dx(),
    })
}
