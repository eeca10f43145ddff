//! Time stepping of `u_t = Delta u` in the box with the dynamic boundary
//! condition `u_t - u_y + W'(u) = 0` on `y = 0`, and of its linearization
//! with `W'(u)` replaced by `mu q`.
//!
//! The spatial scheme is the gradient flow of the discrete energy
//!
//! ```text
//! E_h = 1/2 sum_j nu_j sum_i (u_{i+1,j} - u_{i,j})^2 / dx
//!     + 1/2 sum_i w_i sum_j (u_{i,j+1} - u_{i,j})^2 / dy
//!     + sum_i w_i W(u_{i,0})
//! ```
//!
//! (`w_i` trapezoid weights in `x`, `nu_j` trapezoid weights in `y`) with
//! lumped masses `dx * m_j`, `m_0 = 1 + dy/2`. Interior nodes get the 5-point
//! Laplacian and the boundary row the half-cell closure
//! `(1 + dy/2) u_t = (dy/2) D_xx u + (u_1 - u_0)/dy - W'(u_0)`, which is second
//! order and keeps the scheme monotone.
//!
//! `SemiImplicit` is backward Euler for the whole linear part with the
//! reaction explicit; the linear system separates under a sine transform in
//! `x` and is solved exactly with one tridiagonal solve per mode.

use std::sync::Arc;

use ndarray::Array2;
use rayon::prelude::*;
use rustdct::{DctPlanner, Dst1};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{sup_norm, trace, trace_sup_norm, GridError, HalfPlaneGrid, ScalarField};
use crate::interp::shift_row;
use crate::linalg::{compensated_sum, solve_tridiagonal};
use crate::potential::{DoubleWellPotential, PotentialError};
use crate::steady::SteadyProfile;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("unstable time step: {0}")]
    Stability(String),
    #[error("non-finite value at node (i = {i}, j = {j}) at t = {time}")]
    BlowUp { i: usize, j: usize, time: f64 },
    #[error("amplitude {amplitude} must lie in [0, 1)")]
    Amplitude { amplitude: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("profile search failed: {0}")]
    Search(String),
    #[error("at t = {time}: {source}")]
    AtTime {
        time: f64,
        #[source]
        source: Box<DynamicsError>,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    SemiImplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LateralBc {
    /// Dirichlet: the lateral columns keep the values carried by the field.
    ClampToProfile,
    /// Dirichlet: `-1` on the left column, `+1` on the right.
    ClampToPlusMinusOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopBc {
    /// Dirichlet: the top row keeps the values carried by the field.
    ClampToProfile,
    HomogeneousNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub bc_x: LateralBc,
    pub bc_top: TopBc,
}

impl SchemeConfig {
    pub fn new(dt: f64, scheme: Scheme) -> Self {
        Self {
            dt,
            scheme,
            bc_x: LateralBc::ClampToProfile,
            bc_top: TopBc::ClampToProfile,
        }
    }

    pub fn with_bc(mut self, bc_x: LateralBc, bc_top: TopBc) -> Self {
        self.bc_x = bc_x;
        self.bc_top = bc_top;
        self
    }

    /// Largest stable `dt` for `scheme` on `grid` given a reaction slope bound.
    pub fn max_stable_dt(scheme: Scheme, grid: &HalfPlaneGrid, max_slope: f64) -> f64 {
        let (dx, dy) = (grid.dx(), grid.dy());
        let react = if max_slope > 0.0 { 1.0 / max_slope } else { f64::INFINITY };
        match scheme {
            Scheme::ExplicitEuler => ((dx * dx).min(dy * dy) / 4.0).min(react),
            Scheme::SemiImplicit => (1.0 + dy / 2.0) * react,
        }
    }

    /// Checks the step-size constraints of the chosen scheme.
    pub fn validate(&self, grid: &HalfPlaneGrid, max_slope: f64) -> Result<(), DynamicsError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(DynamicsError::Parameter(format!("dt = {} must be positive", self.dt)));
        }
        let (dx, dy) = (grid.dx(), grid.dy());
        match self.scheme {
            Scheme::ExplicitEuler => {
                let diffusive = (dx * dx).min(dy * dy) / 4.0;
                if self.dt > diffusive {
                    return Err(DynamicsError::Stability(format!(
                        "ExplicitEuler needs dt <= min(dx^2, dy^2)/4 = {diffusive:.6e}, got {}",
                        self.dt
                    )));
                }
                if max_slope > 0.0 && self.dt > 1.0 / max_slope {
                    return Err(DynamicsError::Stability(format!(
                        "ExplicitEuler needs dt <= 1/max|W''| = {:.6e}, got {}",
                        1.0 / max_slope,
                        self.dt
                    )));
                }
            }
            Scheme::SemiImplicit => {
                let bound = (1.0 + dy / 2.0) / max_slope;
                if max_slope > 0.0 && self.dt > bound {
                    return Err(DynamicsError::Stability(format!(
                        "SemiImplicit needs dt <= (1 + dy/2)/max|W''| = {bound:.6e}, got {}",
                        self.dt
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Boundary reaction on `y = 0`.
#[derive(Debug, Clone, Copy)]
pub enum Reaction<'a> {
    Nonlinear(&'a DoubleWellPotential),
    /// `mu q`, with zero Dirichlet data on the lateral and top edges.
    Linear(f64),
}

impl Reaction<'_> {
    fn slope_bound(&self) -> f64 {
        match self {
            Reaction::Nonlinear(p) => p.max_curvature(),
            Reaction::Linear(mu) => mu.abs(),
        }
    }

    fn eval(&self, u: f64) -> Result<f64, PotentialError> {
        match self {
            Reaction::Nonlinear(p) => p.w_prime(u),
            Reaction::Linear(mu) => Ok(mu * u),
        }
    }

    fn potential(&self, u: f64) -> Result<f64, PotentialError> {
        match self {
            Reaction::Nonlinear(p) => p.w_eval(u),
            Reaction::Linear(mu) => Ok(0.5 * mu * u * u),
        }
    }
}

/// Relative node masses `m_j` (the `dx` factor is common to all free nodes).
fn node_mass(j: usize, ny: usize, dy: f64) -> f64 {
    if j == 0 {
        1.0 + dy / 2.0
    } else if j == ny - 1 {
        dy / 2.0
    } else {
        dy
    }
}

/// Trapezoid weights `nu_j` of the `x`-edges in row `j`.
fn row_weight(j: usize, ny: usize, dy: f64) -> f64 {
    if j == 0 || j == ny - 1 {
        dy / 2.0
    } else {
        dy
    }
}

struct ImplicitPlan {
    dst: Arc<dyn Dst1<f64>>,
    /// Unknown rows: `ny - 1` with a Dirichlet top, `ny` with Neumann.
    rows: usize,
    /// Per mode: tridiagonal `(sub, diag, sup)` of length `rows`.
    systems: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)>,
}

/// Precomputed stepper for one grid, scheme and reaction.
pub struct Stepper<'a> {
    grid: HalfPlaneGrid,
    cfg: SchemeConfig,
    reaction: Reaction<'a>,
    plan: Option<ImplicitPlan>,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: HalfPlaneGrid, cfg: SchemeConfig, reaction: Reaction<'a>) -> Result<Self, DynamicsError> {
        if let Reaction::Linear(mu) = reaction {
            if !(mu >= 0.0 && mu.is_finite()) {
                return Err(DynamicsError::Parameter(format!("mu = {mu} must be nonnegative")));
            }
        }
        cfg.validate(&grid, reaction.slope_bound())?;
        let plan = match cfg.scheme {
            Scheme::ExplicitEuler => None,
            Scheme::SemiImplicit => Some(Self::plan(&grid, &cfg, &reaction)),
        };
        Ok(Self {
            grid,
            cfg,
            reaction,
            plan,
        })
    }

    fn neumann_top(cfg: &SchemeConfig, reaction: &Reaction<'_>) -> bool {
        matches!(reaction, Reaction::Nonlinear(_)) && cfg.bc_top == TopBc::HomogeneousNeumann
    }

    fn plan(grid: &HalfPlaneGrid, cfg: &SchemeConfig, reaction: &Reaction<'_>) -> ImplicitPlan {
        let (nx, ny, dx, dy, dt) = (grid.nx(), grid.ny(), grid.dx(), grid.dy(), cfg.dt);
        let n = nx - 2;
        let neumann = Self::neumann_top(cfg, reaction);
        let rows = if neumann { ny } else { ny - 1 };
        let systems = (0..n)
            .map(|k| {
                let s = (std::f64::consts::PI * (k + 1) as f64 / (2.0 * (n + 1) as f64)).sin();
                let lambda = 4.0 / (dx * dx) * s * s;
                let mut sub = vec![0.0; rows];
                let mut diag = vec![0.0; rows];
                let mut sup = vec![0.0; rows];
                for j in 0..rows {
                    let coupling = if j == 0 || (neumann && j == ny - 1) { 1.0 / dy } else { 2.0 / dy };
                    diag[j] = node_mass(j, ny, dy) + dt * row_weight(j, ny, dy) * lambda + dt * coupling;
                    if j > 0 {
                        sub[j] = -dt / dy;
                    }
                    if j + 1 < rows {
                        sup[j] = -dt / dy;
                    }
                }
                (sub, diag, sup)
            })
            .collect();
        ImplicitPlan {
            dst: DctPlanner::new().plan_dst1(n),
            rows,
            systems,
        }
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        &self.grid
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    fn neumann(&self) -> bool {
        Self::neumann_top(&self.cfg, &self.reaction)
    }

    /// Overwrites the Dirichlet nodes that the boundary mode prescribes.
    pub fn enforce_dirichlet(&self, u: &mut Array2<f64>) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        match self.reaction {
            Reaction::Linear(_) => {
                for j in 0..ny {
                    u[[j, 0]] = 0.0;
                    u[[j, nx - 1]] = 0.0;
                }
                for i in 0..nx {
                    u[[ny - 1, i]] = 0.0;
                }
            }
            Reaction::Nonlinear(_) => {
                if self.cfg.bc_x == LateralBc::ClampToPlusMinusOne {
                    for j in 0..ny {
                        u[[j, 0]] = -1.0;
                        u[[j, nx - 1]] = 1.0;
                    }
                }
            }
        }
    }

    /// Semi-discrete `du/dt`; zero on Dirichlet nodes.
    pub fn rate(&self, u: &Array2<f64>) -> Result<Array2<f64>, DynamicsError> {
        let (nx, ny, dx, dy) = (self.grid.nx(), self.grid.ny(), self.grid.dx(), self.grid.dy());
        let neumann = self.neumann();
        let top = if neumann { ny } else { ny - 1 };
        let mut r = Array2::zeros((ny, nx));
        let (idx2, idy2) = (1.0 / (dx * dx), 1.0 / (dy * dy));
        for j in 0..top {
            for i in 1..nx - 1 {
                let dxx = (u[[j, i + 1]] - 2.0 * u[[j, i]] + u[[j, i - 1]]) * idx2;
                r[[j, i]] = if j == 0 {
                    let react = self.reaction.eval(u[[0, i]])?;
                    ((dy / 2.0) * dxx + (u[[1, i]] - u[[0, i]]) / dy - react) / (1.0 + dy / 2.0)
                } else if j == ny - 1 {
                    dxx + 2.0 * (u[[j - 1, i]] - u[[j, i]]) * idy2
                } else {
                    dxx + (u[[j + 1, i]] - 2.0 * u[[j, i]] + u[[j - 1, i]]) * idy2
                };
            }
        }
        Ok(r)
    }

    /// Advances `u` by one step of size `dt` in place and updates its time.
    pub fn step(&self, u: &mut ScalarField) -> Result<(), DynamicsError> {
        self.grid.ensure_same(u.grid())?;
        let time = u.time() + self.cfg.dt;
        {
            let v = u.values_mut();
            self.enforce_dirichlet(v);
            match &self.plan {
                None => {
                    let r = self.rate(v)?;
                    v.scaled_add(self.cfg.dt, &r);
                }
                Some(plan) => self.implicit_step(plan, v)?,
            }
        }
        u.set_time(time);
        if let Err(GridError::NonFinite { i, j }) = u.check_finite() {
            return Err(DynamicsError::BlowUp { i, j, time });
        }
        Ok(())
    }

    /// Increment form: solves `(M - dt L) d = dt M rate(u)` and adds `d`.
    fn implicit_step(&self, plan: &ImplicitPlan, u: &mut Array2<f64>) -> Result<(), DynamicsError> {
        let (nx, ny, dy, dt) = (self.grid.nx(), self.grid.ny(), self.grid.dy(), self.cfg.dt);
        let n = nx - 2;
        let rows = plan.rows;
        let r = self.rate(u)?;
        let mut rhs = vec![0.0; rows * n];
        for j in 0..rows {
            let m = node_mass(j, ny, dy);
            for (k, slot) in rhs[j * n..(j + 1) * n].iter_mut().enumerate() {
                *slot = dt * m * r[[j, k + 1]];
            }
        }
        rhs.par_chunks_mut(n).for_each(|line| plan.dst.process_dst1(line));
        let scale = 2.0 / (n + 1) as f64;
        let modes: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|k| {
                let column: Vec<f64> = (0..rows).map(|j| rhs[j * n + k]).collect();
                let (sub, diag, sup) = &plan.systems[k];
                solve_tridiagonal(sub, diag, sup, &column)
            })
            .collect();
        for (k, col) in modes.iter().enumerate() {
            for (j, v) in col.iter().enumerate() {
                rhs[j * n + k] = *v;
            }
        }
        rhs.par_chunks_mut(n).for_each(|line| {
            plan.dst.process_dst1(line);
            for v in line.iter_mut() {
                *v *= scale;
            }
        });
        for j in 0..rows {
            for k in 0..n {
                u[[j, k + 1]] += rhs[j * n + k];
            }
        }
        Ok(())
    }

    /// Discrete energy `E_h`; the reaction term is `W` (or `mu q^2 / 2`).
    pub fn energy(&self, u: &ScalarField) -> Result<f64, DynamicsError> {
        discrete_energy(u, &self.reaction)
    }

    /// `Q_h = sum over free nodes of dx m_j (du/dt)^2`, so that `dE_h/dt = -Q_h`.
    pub fn dissipation(&self, u: &ScalarField) -> Result<f64, DynamicsError> {
        let mut v = u.values().clone();
        self.enforce_dirichlet(&mut v);
        let r = self.rate(&v)?;
        let (ny, dx, dy) = (self.grid.ny(), self.grid.dx(), self.grid.dy());
        Ok(compensated_sum(
            r.indexed_iter()
                .map(|((j, _), v)| dx * node_mass(j, ny, dy) * v * v),
        ))
    }
}

fn discrete_energy(u: &ScalarField, reaction: &Reaction<'_>) -> Result<f64, DynamicsError> {
    let g = u.grid();
    let (nx, ny, dx, dy) = (g.nx(), g.ny(), g.dx(), g.dy());
    let v = u.values();
    let mut terms = Vec::with_capacity(2 * nx * ny + nx);
    for j in 0..ny {
        let nu = row_weight(j, ny, dy);
        for i in 0..nx - 1 {
            let d = v[[j, i + 1]] - v[[j, i]];
            terms.push(0.5 * nu * d * d / dx);
        }
    }
    for j in 0..ny - 1 {
        for i in 0..nx {
            let d = v[[j + 1, i]] - v[[j, i]];
            terms.push(0.5 * g.x_weight(i) * d * d / dy);
        }
    }
    for i in 0..nx {
        terms.push(g.x_weight(i) * reaction.potential(v[[0, i]])?);
    }
    Ok(compensated_sum(terms))
}

/// One step of the nonlinear system.
pub fn step(u: &ScalarField, p: &DoubleWellPotential, cfg: &SchemeConfig) -> Result<ScalarField, DynamicsError> {
    let stepper = Stepper::new(*u.grid(), *cfg, Reaction::Nonlinear(p))?;
    let mut next = u.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// One step of the linearized system with zero lateral and top data.
pub fn step_linear(q: &ScalarField, mu: f64, cfg: &SchemeConfig) -> Result<ScalarField, DynamicsError> {
    let stepper = Stepper::new(*q.grid(), *cfg, Reaction::Linear(mu))?;
    let mut next = q.clone();
    stepper.step(&mut next)?;
    Ok(next)
}

/// Discrete total energy of `u` for the potential `p`.
pub fn energy(u: &ScalarField, p: &DoubleWellPotential) -> Result<f64, DynamicsError> {
    discrete_energy(u, &Reaction::Nonlinear(p))
}

/// Discrete dissipation `Q_h` under the boundary treatment of `cfg`.
pub fn dissipation(u: &ScalarField, p: &DoubleWellPotential, cfg: &SchemeConfig) -> Result<f64, DynamicsError> {
    let stepper = Stepper {
        grid: *u.grid(),
        cfg: *cfg,
        reaction: Reaction::Nonlinear(p),
        plan: None,
    };
    stepper.dissipation(u)
}

#[derive(Debug, Clone, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<ScalarField>,
    pub trace_sup_history: Vec<f64>,
    /// `(E, Q)` at each recorded time.
    pub energy_history: Vec<(f64, f64)>,
}

/// Steps from `u0` to time `t_end`, calling `observe` at `t = 0`, every
/// `record_every` time units and at the end.
pub fn evolve_observed<F>(
    u0: &ScalarField,
    stepper: &Stepper<'_>,
    t_end: f64,
    record_every: f64,
    mut observe: F,
) -> Result<ScalarField, DynamicsError>
where
    F: FnMut(&ScalarField, &Stepper<'_>) -> Result<(), DynamicsError>,
{
    if !(t_end > 0.0) {
        return Err(DynamicsError::Parameter(format!("T = {t_end} must be positive")));
    }
    let dt = stepper.cfg.dt;
    let steps = (t_end / dt - 1e-9).ceil().max(1.0) as usize;
    let stride = ((record_every / dt).round() as usize).max(1);
    let mut u = u0.clone();
    let t0 = u.time();
    stepper.enforce_dirichlet(u.values_mut());
    observe(&u, stepper)?;
    for n in 1..=steps {
        stepper.step(&mut u).map_err(|e| DynamicsError::AtTime {
            time: u.time(),
            source: Box::new(e),
        })?;
        // recompute from the step counter to avoid drift in recorded times
        u.set_time(t0 + n as f64 * dt);
        if n % stride == 0 || n == steps {
            observe(&u, stepper)?;
        }
    }
    Ok(u)
}

fn record(traj: &mut Trajectory, u: &ScalarField, stepper: &Stepper<'_>, keep: bool) -> Result<(), DynamicsError> {
    traj.times.push(u.time());
    traj.trace_sup_history.push(trace_sup_norm(&trace(u)));
    traj.energy_history.push((stepper.energy(u)?, stepper.dissipation(u)?));
    if keep {
        traj.snapshots.push(u.clone());
    }
    Ok(())
}

/// Full nonlinear evolution with thinned snapshots.
pub fn evolve(
    u0: &ScalarField,
    p: &DoubleWellPotential,
    cfg: &SchemeConfig,
    t_end: f64,
    record_every: f64,
) -> Result<Trajectory, DynamicsError> {
    let stepper = Stepper::new(*u0.grid(), *cfg, Reaction::Nonlinear(p))?;
    let mut traj = Trajectory::default();
    evolve_observed(u0, &stepper, t_end, record_every, |u, s| record(&mut traj, u, s, true))?;
    Ok(traj)
}

/// Linearized evolution; snapshots are kept only if `keep_snapshots`.
pub fn evolve_linear(
    q0: &ScalarField,
    mu: f64,
    cfg: &SchemeConfig,
    t_end: f64,
    record_every: f64,
    keep_snapshots: bool,
) -> Result<Trajectory, DynamicsError> {
    let stepper = Stepper::new(*q0.grid(), *cfg, Reaction::Linear(mu))?;
    let mut traj = Trajectory::default();
    evolve_observed(q0, &stepper, t_end, record_every, |u, s| record(&mut traj, u, s, keep_snapshots))?;
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub x0: f64,
    pub y0: f64,
    pub width: f64,
}

impl Default for Bump {
    fn default() -> Self {
        Self {
            amplitude: 0.3,
            x0: 0.0,
            y0: 2.0,
            width: 1.5,
        }
    }
}

impl Bump {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let r2 = (x - self.x0).powi(2) + (y - self.y0).powi(2);
        self.amplitude * (-r2 / (self.width * self.width)).exp()
    }

    pub fn field(&self, grid: HalfPlaneGrid) -> ScalarField {
        ScalarField::from_fn(grid, |x, y| self.eval(x, y))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialKind {
    Shifted { xi: f64 },
    Perturbed { bump: Bump },
    ShiftedPerturbed { xi: f64, bump: Bump },
}

/// Initial data with its certified envelope:
/// `phi(x - xi1, y) - q0 <= u0 <= phi(x + xi2, y) + q0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub field: ScalarField,
    pub xi1: f64,
    pub xi2: f64,
    pub q0: ScalarField,
}

const INTERIOR_CAP: f64 = 1.0 - 1e-12;

pub fn initial_data(prof: &SteadyProfile, kind: &InitialKind) -> Result<InitialData, DynamicsError> {
    let g = *prof.grid();
    let (xi, bump) = match *kind {
        InitialKind::Shifted { xi } => (xi, None),
        InitialKind::Perturbed { bump } => (0.0, Some(bump)),
        InitialKind::ShiftedPerturbed { xi, bump } => (xi, Some(bump)),
    };
    if !xi.is_finite() {
        return Err(DynamicsError::Parameter(format!("shift {xi} is not finite")));
    }
    let q0 = match bump {
        Some(b) => {
            if !(b.amplitude >= 0.0 && b.amplitude < 1.0) {
                return Err(DynamicsError::Amplitude { amplitude: b.amplitude });
            }
            if !(b.width > 0.0) {
                return Err(DynamicsError::Parameter(format!("bump width {} must be positive", b.width)));
            }
            b.field(g)
        }
        None => ScalarField::zeros(g),
    };
    let mut field = prof.shifted(xi);
    {
        let v = field.values_mut();
        v.zip_mut_with(q0.values(), |u, q| *u = (*u + q).clamp(-INTERIOR_CAP, INTERIOR_CAP));
    }
    Ok(InitialData {
        field,
        xi1: xi.abs(),
        xi2: xi.abs(),
        q0,
    })
}

/// Linear data from a surface density on `y = 0` and a bulk density:
/// the boundary node averages the surface value with its half cell of bulk.
pub fn linear_initial_data(
    grid: HalfPlaneGrid,
    surface: impl Fn(f64) -> f64,
    bulk: impl Fn(f64, f64) -> f64,
) -> ScalarField {
    let dy = grid.dy();
    let mut f = ScalarField::from_fn(grid, &bulk);
    let v = f.values_mut();
    for i in 0..grid.nx() {
        let x = grid.x(i);
        v[[0, i]] = (surface(x) + dy / 2.0 * bulk(x, 0.0)) / (1.0 + dy / 2.0);
    }
    f
}

/// `sup |u - phi(. - s)|` over the whole field.
fn shifted_distance(u: &ScalarField, prof: &SteadyProfile, s: f64, buf: &mut [f64]) -> f64 {
    let g = u.grid();
    let phi = prof.field.values();
    let mut worst = 0.0f64;
    for j in 0..g.ny() {
        let row = phi.row(j);
        shift_row(row.as_slice().expect("rows are contiguous"), -g.lx(), g.dx(), s, buf);
        for (i, p) in buf.iter().enumerate() {
            worst = worst.max((u.at(i, j) - p).abs());
        }
    }
    worst
}

/// Best translate of the profile: returns `(x0, sup |u - phi(. - x0)|)`.
///
/// A scan over trace shifts `|s| <= Lx/2` in steps of `dx` seeds a
/// golden-section search of the full-field distance on `[s* - 4, s* + 4]`.
pub fn sup_distance_to_profile(u: &ScalarField, prof: &SteadyProfile) -> Result<(f64, f64), DynamicsError> {
    let g = *u.grid();
    g.ensure_same(prof.grid())?;
    let (lx, dx) = (g.lx(), g.dx());
    let ut = trace(u);
    let pt = prof.trace();
    let mut buf = vec![0.0; g.nx()];
    let half = (g.nx() - 1) / 4;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=2 * half {
        let s = (k as f64 - half as f64) * dx;
        shift_row(pt.as_slice(), -lx, dx, s, &mut buf);
        let d = ut
            .as_slice()
            .iter()
            .zip(&buf)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if d < best.1 {
            best = (s, d);
        }
    }
    if !best.1.is_finite() {
        return Err(DynamicsError::Search("trace distance is not finite".into()));
    }
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (best.0 - 4.0, best.0 + 4.0);
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    let mut fc = shifted_distance(u, prof, c, &mut buf);
    let mut fd = shifted_distance(u, prof, d, &mut buf);
    let mut iterations = 0;
    while b - a > 1e-6 {
        iterations += 1;
        if iterations > 200 {
            return Err(DynamicsError::Search("golden-section bracket did not shrink".into()));
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = shifted_distance(u, prof, c, &mut buf);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = shifted_distance(u, prof, d, &mut buf);
        }
    }
    let x0 = 0.5 * (a + b);
    let eps = shifted_distance(u, prof, x0, &mut buf);
    if !eps.is_finite() {
        return Err(DynamicsError::Search("field distance is not finite".into()));
    }
    Ok((x0, eps))
}

/// Largest excursion outside `[-1, 1]`.
pub fn overshoot(u: &ScalarField) -> f64 {
    (sup_norm(u) - 1.0).max(0.0)
}
