//! Domain types, fluxes and the normalized entropy pair.
//!
//! The unknowns follow the conservation-law form
//!
//! ```text
//! u_t + (eps u^2 - v)_x = eps u_xx
//! v_t - (u v)_x         = v_xx
//! ```
//!
//! with `v > 0`. Setting `eps = 0` gives the limit system, so both systems share
//! one [`ProblemSetup`] and one discretization.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive, Error, Result};

/// Absolute tolerance for far-field and Dirichlet constraints on initial data.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Smallest admissible mesh.
pub const MIN_CELLS: usize = 8;

/// Uniform vertex-centered mesh: `n_cells + 1` nodes including both endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    x_left: f64,
    x_right: f64,
    n_cells: usize,
    dx: f64,
}

impl Grid1D {
    pub fn new(x_left: f64, x_right: f64, n_cells: usize) -> Result<Self> {
        if !(x_left.is_finite() && x_right.is_finite()) || x_right <= x_left {
            return Err(Error::Grid(format!(
                "need x_left < x_right, got [{x_left}, {x_right}]"
            )));
        }
        if n_cells < MIN_CELLS {
            return Err(Error::Grid(format!(
                "need at least {MIN_CELLS} cells, got {n_cells}"
            )));
        }
        Ok(Self {
            x_left,
            x_right,
            n_cells,
            dx: (x_right - x_left) / n_cells as f64,
        })
    }

    /// The IBVP domain `[0, 1]`.
    pub fn unit_interval(n_cells: usize) -> Result<Self> {
        Self::new(0.0, 1.0, n_cells)
    }

    /// Truncated line `[-half_width, half_width]` used for the Cauchy problem.
    pub fn symmetric(half_width: f64, n_cells: usize) -> Result<Self> {
        require_positive("half_width", half_width)?;
        Self::new(-half_width, half_width, n_cells)
    }

    pub fn x_left(&self) -> f64 {
        self.x_left
    }

    pub fn x_right(&self) -> f64 {
        self.x_right
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn node_count(&self) -> usize {
        self.n_cells + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        if i == self.n_cells {
            self.x_right
        } else {
            self.x_left + i as f64 * self.dx
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.node_count()).map(|i| self.x(i)).collect()
    }

    /// Same domain with twice as many cells; old node `i` becomes node `2 i`.
    pub fn refined(&self) -> Self {
        Self {
            n_cells: 2 * self.n_cells,
            dx: (self.x_right - self.x_left) / (2 * self.n_cells) as f64,
            ..*self
        }
    }

    pub fn is_unit_interval(&self) -> bool {
        self.x_left == 0.0 && self.x_right == 1.0
    }

    /// Trapezoidal quadrature weight of node `i`.
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i == self.n_cells {
            0.5 * self.dx
        } else {
            self.dx
        }
    }

    /// Trapezoidal integral of nodal values.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.node_count());
        let n = values.len();
        let interior: f64 = values[1..n - 1].iter().sum();
        self.dx * (interior + 0.5 * (values[0] + values[n - 1]))
    }
}

/// Paired fields `(u, v)` on the nodes of a grid at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(u: Vec<f64>, v: Vec<f64>, t: f64) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::Argument(format!(
                "u has {} entries but v has {}",
                u.len(),
                v.len()
            )));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::Argument(format!("v[{i}] is not finite")));
        }
        Ok(Self { u, v, t })
    }

    /// The constant state `(0, v_inf)`.
    pub fn rest(node_count: usize, v_inf: f64) -> Self {
        Self {
            u: vec![0.0; node_count],
            v: vec![v_inf; node_count],
            t: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn min_v(&self) -> f64 {
        self.v.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest pointwise difference over both fields.
    pub fn max_abs_diff(&self, other: &State) -> f64 {
        let du = max_abs_diff(&self.u, &other.u);
        let dv = max_abs_diff(&self.v, &other.v);
        du.max(dv)
    }
}

pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Whole-line problem truncated to `[-L, L]` with far-field Dirichlet data.
    CauchyTruncated,
    /// `[0, 1]` with `u = 0` and `v_x = 0` at both ends.
    Ibvp,
}

/// Initial-data generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InitialProfile {
    /// `u = a_u g`, `v = v_inf + a_v g` with `g` a unit Gaussian of the given
    /// width centered at the domain midpoint.
    GaussianBump {
        amplitude_u: f64,
        amplitude_v: f64,
        width: f64,
    },
    /// `u = a_u sin(pi x)`, `v = v_inf + a_v cos(pi x)` on `[0, 1]`.
    CosinePair { amplitude_u: f64, amplitude_v: f64 },
    /// Explicit nodal values.
    Custom { u: Vec<f64>, v: Vec<f64> },
}

impl InitialProfile {
    /// Lower bound of the generated `v` implied by the profile alone.
    fn default_floor(&self, v_inf: f64) -> f64 {
        match self {
            Self::GaussianBump { amplitude_v, .. } | Self::CosinePair { amplitude_v, .. } => {
                v_inf - amplitude_v.abs()
            }
            Self::Custom { v, .. } => v.iter().copied().fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSetup {
    pub kind: ProblemKind,
    /// Viscosity; zero selects the limit system.
    pub epsilon: f64,
    pub v_infinity: f64,
    /// Lower bound on the initial `v`.
    pub alpha_floor: f64,
    pub t_final: f64,
    pub initial_data: InitialProfile,
}

impl ProblemSetup {
    /// Setup with `v_inf = 1` and the floor `alpha` derived from the profile.
    pub fn new(
        kind: ProblemKind,
        epsilon: f64,
        t_final: f64,
        initial_data: InitialProfile,
    ) -> Self {
        let alpha_floor = initial_data.default_floor(1.0);
        Self {
            kind,
            epsilon,
            v_infinity: 1.0,
            alpha_floor,
            t_final,
            initial_data,
        }
    }

    /// Changes `v_inf` and re-derives the default floor; call
    /// [`with_alpha_floor`](Self::with_alpha_floor) afterwards to override it.
    pub fn with_v_infinity(mut self, v_infinity: f64) -> Self {
        self.v_infinity = v_infinity;
        self.alpha_floor = self.initial_data.default_floor(v_infinity);
        self
    }

    pub fn with_alpha_floor(mut self, alpha: f64) -> Self {
        self.alpha_floor = alpha;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_t_final(mut self, t_final: f64) -> Self {
        self.t_final = t_final;
        self
    }

    pub fn is_limit(&self) -> bool {
        self.epsilon == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Setup(format!(
                "epsilon must be finite and >= 0, got {}",
                self.epsilon
            )));
        }
        require_positive("v_infinity", self.v_infinity)?;
        require_positive("alpha_floor", self.alpha_floor)?;
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(Error::Setup(format!(
                "t_final must be finite and >= 0, got {}",
                self.t_final
            )));
        }
        if let InitialProfile::GaussianBump { width, .. } = self.initial_data {
            require_positive("width", width)?;
        }
        Ok(())
    }

    /// Checks that `grid` is a legal discretization of this problem's domain.
    pub fn check_grid(&self, grid: &Grid1D) -> Result<()> {
        if self.kind == ProblemKind::Ibvp && !grid.is_unit_interval() {
            return Err(Error::Grid(format!(
                "IBVP requires the domain [0, 1], got [{}, {}]",
                grid.x_left(),
                grid.x_right()
            )));
        }
        Ok(())
    }
}

/// Entropy density `eta` and entropy flux `q` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub eta: f64,
    pub q: f64,
}

/// `ln(v / v_inf)` evaluated without cancellation near `v_inf`.
#[inline]
pub(crate) fn log_ratio(v: f64, v_inf: f64) -> f64 {
    ((v - v_inf) / v_inf).ln_1p()
}

/// Convex entropy normalized at `(0, v_inf)`:
///
/// ```text
/// eta = u^2 / 2 + v ln(v / v_inf) - (v - v_inf)
/// q   = -u v ln(v / v_inf) + (2/3) eps u^3
/// ```
pub fn entropy_pair(u: f64, v: f64, v_inf: f64, epsilon: f64) -> Result<EntropyValue> {
    require_positive("v", v)?;
    require_positive("v_inf", v_inf)?;
    Ok(entropy_unchecked(u, v, v_inf, epsilon))
}

#[inline]
pub(crate) fn entropy_unchecked(u: f64, v: f64, v_inf: f64, epsilon: f64) -> EntropyValue {
    let ln = log_ratio(v, v_inf);
    EntropyValue {
        eta: 0.5 * u * u + (v * ln - (v - v_inf)),
        q: -u * v * ln + 2.0 / 3.0 * epsilon * u * u * u,
    }
}

/// Hyperbolic fluxes `(eps u^2 - v, -u v)`.
#[inline]
pub fn flux(u: f64, v: f64, epsilon: f64) -> (f64, f64) {
    (epsilon * u * u - v, -u * v)
}

/// Samples the initial data of `setup` on `grid` and checks the boundary
/// constraints of its problem kind.
pub fn make_initial(setup: &ProblemSetup, grid: &Grid1D) -> Result<State> {
    setup.validate()?;
    setup.check_grid(grid)?;
    let v_inf = setup.v_infinity;
    let nodes = grid.nodes();
    let (mut u, v) = match &setup.initial_data {
        InitialProfile::GaussianBump {
            amplitude_u,
            amplitude_v,
            width,
        } => {
            let center = 0.5 * (grid.x_left() + grid.x_right());
            let bump = |x: f64| {
                let z = (x - center) / width;
                (-0.5 * z * z).exp()
            };
            (
                nodes.iter().map(|&x| amplitude_u * bump(x)).collect(),
                nodes
                    .iter()
                    .map(|&x| v_inf + amplitude_v * bump(x))
                    .collect::<Vec<_>>(),
            )
        }
        InitialProfile::CosinePair {
            amplitude_u,
            amplitude_v,
        } => {
            if setup.kind != ProblemKind::Ibvp {
                return Err(Error::InitialData(
                    "the cosine pair does not decay to the far field; use it on [0, 1]".into(),
                ));
            }
            let pi = std::f64::consts::PI;
            (
                nodes
                    .iter()
                    .map(|&x| amplitude_u * (pi * x).sin())
                    .collect(),
                nodes
                    .iter()
                    .map(|&x| v_inf + amplitude_v * (pi * x).cos())
                    .collect(),
            )
        }
        InitialProfile::Custom { u, v } => {
            if u.len() != grid.node_count() || v.len() != grid.node_count() {
                return Err(Error::InitialData(format!(
                    "custom profile has {} / {} values for {} nodes",
                    u.len(),
                    v.len(),
                    grid.node_count()
                )));
            }
            (u.clone(), v.clone())
        }
    };

    let last = grid.n_cells();
    match setup.kind {
        ProblemKind::CauchyTruncated => {
            for i in [0, last] {
                if u[i].abs() > BOUNDARY_TOL || (v[i] - v_inf).abs() > BOUNDARY_TOL {
                    return Err(Error::InitialData(format!(
                        "(u, v) = ({:e}, {}) at x = {} is not within {BOUNDARY_TOL:e} of the far field (0, {v_inf})",
                        u[i],
                        v[i],
                        grid.x(i)
                    )));
                }
            }
        }
        ProblemKind::Ibvp => {
            for i in [0, last] {
                if u[i].abs() > BOUNDARY_TOL {
                    return Err(Error::InitialData(format!(
                        "u = {:e} at x = {} violates the Dirichlet condition",
                        u[i],
                        grid.x(i)
                    )));
                }
                u[i] = 0.0;
            }
            let (left, right) = boundary_slopes(&v, grid.dx());
            let scale = v.iter().map(|x| (x - v_inf).abs()).fold(1.0, f64::max);
            let tol = 10.0 * grid.dx() * grid.dx() * scale;
            if left.abs() > tol || right.abs() > tol {
                return Err(Error::InitialData(format!(
                    "v_x at the boundary is ({left:e}, {right:e}), exceeding {tol:e}"
                )));
            }
        }
    }

    let state = State::new(u, v, 0.0)?;
    let min_v = state.min_v();
    if min_v < setup.alpha_floor {
        return Err(Error::InitialData(format!(
            "min v = {min_v} is below the floor alpha = {}",
            setup.alpha_floor
        )));
    }
    Ok(state)
}

/// Second-order one-sided derivatives at the two endpoints.
pub(crate) fn boundary_slopes(f: &[f64], dx: f64) -> (f64, f64) {
    let n = f.len();
    let left = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
    let right = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
    (left, right)
}
