//! The stationary transition profile `phi`: closed form for the cosine
//! potential, and for general `W` a pseudo-time solve of the reduced line
//! equation `(-Delta)^{1/2} v + W'(v) = 0` followed by harmonic extension.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use rustdct::{Dct1, DctPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{trace, BoundaryTrace, GridError, HalfPlaneGrid, ScalarField};
use crate::interp::{cubic_at, monotone_root, shift_row};
use crate::linalg::fit_line;
use crate::potential::{DoubleWellPotential, PotentialError, DEFAULT_DELTA};

/// Largest admissible `|t - reference|` at either end of the line.
pub const TAIL_LIMIT: f64 = 0.05;
pub const DEFAULT_ITERATION_BUDGET: usize = 100_000;
pub const DEFAULT_STEP_FACTOR: f64 = 0.5;
const HISTORY_STRIDE: usize = 100;

#[derive(Debug, Error)]
pub enum SteadyError {
    #[error("trace does not approach the reference at the {side} end: |t - ref| = {value:.3e}")]
    Tail { side: &'static str, value: f64 },
    #[error("no convergence after {iterations} iterations, last residual {last:.3e}")]
    Convergence {
        iterations: usize,
        last: f64,
        history: Vec<f64>,
    },
    #[error("band phi(x, 0) in [-1 + {delta}, 1 - {delta}] contains no grid node")]
    Band { delta: f64 },
    #[error("tail fit: {0}")]
    Fit(String),
    #[error("trace has no sign change, cannot recentre")]
    Recentre,
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Potential(#[from] PotentialError),
}

/// `(phi, dphi/dx, dphi/dy)` of `phi(x, y) = (2/pi) atan(x / (y + 1))`.
pub fn closed_form_phi(x: f64, y: f64) -> (f64, f64, f64) {
    let a = y + 1.0;
    let r2 = a * a + x * x;
    (2.0 / PI * (x / a).atan(), 2.0 / PI * a / r2, -2.0 / PI * x / r2)
}

/// Smooth transition from `-1` to `+1` used to split off the non-decaying
/// part of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transition {
    Arctan { width: f64 },
    Tanh { width: f64 },
}

impl Default for Transition {
    fn default() -> Self {
        Transition::Tanh { width: 1.0 }
    }
}

impl Transition {
    pub fn value(&self, x: f64) -> f64 {
        match *self {
            Transition::Arctan { width } => 2.0 / PI * (x / width).atan(),
            Transition::Tanh { width } => (x / width).tanh(),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            Transition::Arctan { width } => 2.0 / PI * width / (x * x + width * width),
            Transition::Tanh { width } => {
                let s = 1.0 / (x / width).cosh();
                s * s / width
            }
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Transition::Arctan { width } => {
                let d = x * x + width * width;
                -4.0 / PI * width * x / (d * d)
            }
            Transition::Tanh { width } => {
                let z = x / width;
                let s = 1.0 / z.cosh();
                -2.0 * s * s * z.tanh() / (width * width)
            }
        }
    }

    fn width(&self) -> f64 {
        match *self {
            Transition::Arctan { width } | Transition::Tanh { width } => width,
        }
    }

    /// `(1/pi) int_0^inf (R'(x - s) - R'(x + s)) / s ds` by double-exponential
    /// quadrature over breakpoints around the peak at `s = |x|`.
    pub fn half_laplacian(&self, x: f64) -> f64 {
        let w = self.width();
        let near_zero = 1e-6 * w;
        let curvature = -2.0 * self.second_derivative(x);
        let integrand = |s: f64| {
            if s < near_zero {
                curvature
            } else if !s.is_finite() {
                0.0
            } else {
                (self.derivative(x - s) - self.derivative(x + s)) / s
            }
        };
        let a = x.abs();
        let mut breaks = vec![0.0, (a - 10.0 * w).max(0.0), a, a + 10.0 * w, a + 100.0 * w];
        breaks.dedup_by(|b, a| (*b - *a).abs() < 1e-12);
        let mut total = 0.0;
        for pair in breaks.windows(2) {
            if pair[1] > pair[0] {
                total += quadrature::double_exponential::integrate(integrand, pair[0], pair[1], 1e-14).integral;
            }
        }
        let start = *breaks.last().expect("breakpoints are nonempty");
        let tail = |u: f64| {
            if u >= 1.0 {
                return 0.0;
            }
            let s = start + u / (1.0 - u);
            integrand(s) / ((1.0 - u) * (1.0 - u))
        };
        total += quadrature::double_exponential::integrate(tail, 0.0, 1.0, 1e-14).integral;
        total / PI
    }
}

/// `(-Delta)^{1/2}` on the truncated line: the reference transition exactly by
/// quadrature, the decaying remainder through the multiplier `|eta|` on its
/// even extension (a type-I cosine transform).
pub struct HalfLaplacian {
    reference: Transition,
    ref_values: Vec<f64>,
    ref_half_laplacian: Vec<f64>,
    multiplier: Vec<f64>,
    dct: Arc<dyn Dct1<f64>>,
    scale: f64,
}

impl HalfLaplacian {
    pub fn new(grid: &HalfPlaneGrid, reference: Transition) -> Self {
        let xs = grid.xs();
        let n = xs.len();
        let ref_values = xs.iter().map(|&x| reference.value(x)).collect();
        let ref_half_laplacian = xs.par_iter().map(|&x| reference.half_laplacian(x)).collect();
        let period_half = 2.0 * grid.lx();
        let multiplier = (0..n).map(|k| PI * k as f64 / period_half).collect();
        let dct = DctPlanner::new().plan_dct1(n);
        Self {
            reference,
            ref_values,
            ref_half_laplacian,
            multiplier,
            dct,
            scale: 2.0 / (n - 1) as f64,
        }
    }

    pub fn reference(&self) -> Transition {
        self.reference
    }

    pub fn len(&self) -> usize {
        self.ref_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ref_values.is_empty()
    }

    /// Writes `(-Delta)^{1/2} t` into `out`; `work` must have the trace length.
    pub fn apply(&self, t: &[f64], out: &mut [f64], work: &mut Vec<f64>) -> Result<(), SteadyError> {
        let n = self.len();
        work.clear();
        work.extend(t.iter().zip(&self.ref_values).map(|(a, b)| a - b));
        for (side, v) in [("left", work[0]), ("right", work[n - 1])] {
            if !(v.abs() <= TAIL_LIMIT) {
                return Err(SteadyError::Tail { side, value: v.abs() });
            }
        }
        self.dct.process_dct1(work);
        for (c, m) in work.iter_mut().zip(&self.multiplier) {
            *c *= m * self.scale;
        }
        self.dct.process_dct1(work);
        for ((o, w), h) in out.iter_mut().zip(work.iter()).zip(&self.ref_half_laplacian) {
            *o = w + h;
        }
        Ok(())
    }
}

pub fn half_laplacian(t: &BoundaryTrace, reference: &Transition) -> Result<BoundaryTrace, SteadyError> {
    let op = HalfLaplacian::new(t.grid(), *reference);
    let mut out = vec![0.0; op.len()];
    op.apply(t.as_slice(), &mut out, &mut Vec::with_capacity(op.len()))?;
    Ok(BoundaryTrace::from_vec(*t.grid(), out)?)
}

/// Poisson-kernel extension of `t` into the half-plane, constant beyond
/// `+-Lx`. The trapezoid sum is singularity-subtracted and the two outer
/// tails are integrated exactly.
pub fn harmonic_extension(t: &BoundaryTrace, g: &HalfPlaneGrid) -> Result<ScalarField, GridError> {
    let tg = t.grid();
    if tg.nx() != g.nx() || tg.lx().to_bits() != g.lx().to_bits() {
        return Err(GridError::Dimension(format!(
            "trace on {} nodes over [-{}, {}] vs grid with {} nodes over [-{}, {}]",
            tg.nx(),
            tg.lx(),
            tg.lx(),
            g.nx(),
            g.lx(),
            g.lx()
        )));
    }
    let f = t.as_slice();
    let (nx, ny, dx, lx) = (g.nx(), g.ny(), g.dx(), g.lx());
    let weights: Vec<f64> = (0..nx).map(|k| g.x_weight(k)).collect();
    let rows: Vec<Vec<f64>> = (1..ny)
        .into_par_iter()
        .map(|j| {
            let y = g.y(j);
            let kernel: Vec<f64> = (0..nx)
                .map(|m| {
                    let z = m as f64 * dx;
                    y / (PI * (z * z + y * y))
                })
                .collect();
            (0..nx)
                .map(|i| {
                    let x = g.x(i);
                    let fi = f[i];
                    let mut acc = 0.0;
                    for k in 0..nx {
                        acc += weights[k] * kernel[i.abs_diff(k)] * (f[k] - fi);
                    }
                    let right = (0.5 - ((lx - x) / y).atan() / PI) * (f[nx - 1] - fi);
                    let left = (0.5 - ((lx + x) / y).atan() / PI) * (f[0] - fi);
                    fi + acc + right + left
                })
                .collect()
        })
        .collect();
    let mut field = ScalarField::zeros(*g);
    let values = field.values_mut();
    for i in 0..nx {
        values[[0, i]] = f[i];
    }
    for (j, row) in rows.into_iter().enumerate() {
        for (i, v) in row.into_iter().enumerate() {
            values[[j + 1, i]] = v;
        }
    }
    Ok(field)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyOptions {
    pub tol: f64,
    pub reference: Transition,
    /// The initial guess is `(2/pi) atan(x - initial_shift)`.
    pub initial_shift: f64,
    pub max_iterations: usize,
    /// Pseudo-time step in units of `dx`.
    pub step_factor: f64,
}

impl SteadyOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            reference: Transition::default(),
            initial_shift: 0.0,
            max_iterations: DEFAULT_ITERATION_BUDGET,
            step_factor: DEFAULT_STEP_FACTOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyProfile {
    pub field: ScalarField,
    pub dx_trace: BoundaryTrace,
    pub tail_constant: Option<f64>,
    /// Band constant at [`DEFAULT_DELTA`].
    pub beta: f64,
    /// `(sup |Delta_h phi|, sup |D_y phi - W'(phi)|)` on the grid.
    pub residual: (f64, f64),
    /// `sup |(-Delta)^{1/2} v + W'(v)|` of the returned trace.
    pub reduced_residual: f64,
    pub iterations: usize,
    /// Translation removed by recentring.
    pub centre_shift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub tail_constant: Option<f64>,
    pub beta: f64,
    pub beta_delta: f64,
    pub bulk_residual: f64,
    pub boundary_residual: f64,
    pub reduced_residual: f64,
    pub iterations: usize,
    pub centre_shift: f64,
}

impl SteadyProfile {
    /// The cosine-potential profile sampled exactly on `grid`.
    pub fn closed_form(grid: HalfPlaneGrid) -> Result<Self, SteadyError> {
        let field = ScalarField::from_fn(grid, |x, y| closed_form_phi(x, y).0);
        let dx_trace = BoundaryTrace::from_fn(grid, |x| closed_form_phi(x, 0.0).1);
        let p = DoubleWellPotential::cosine();
        let t = trace(&field);
        let op = HalfLaplacian::new(&grid, Transition::default());
        let reduced_residual = reduced_residual(&op, &p, t.as_slice())?;
        Self::assemble(field, dx_trace, &p, reduced_residual, 0, 0.0)
    }

    fn assemble(
        field: ScalarField,
        dx_trace: BoundaryTrace,
        p: &DoubleWellPotential,
        reduced_residual: f64,
        iterations: usize,
        centre_shift: f64,
    ) -> Result<Self, SteadyError> {
        let residual = field_residuals(&field, p)?;
        let mut prof = Self {
            field,
            dx_trace,
            tail_constant: None,
            beta: 0.0,
            residual,
            reduced_residual,
            iterations,
            centre_shift,
        };
        prof.tail_constant = tail_fit(&prof).ok().map(|f| f.c);
        prof.beta = beta_constant(&prof, DEFAULT_DELTA)?;
        Ok(prof)
    }

    pub fn grid(&self) -> &HalfPlaneGrid {
        self.field.grid()
    }

    pub fn trace(&self) -> BoundaryTrace {
        trace(&self.field)
    }

    pub fn sidecar(&self) -> ProfileSidecar {
        ProfileSidecar {
            tail_constant: self.tail_constant,
            beta: self.beta,
            beta_delta: DEFAULT_DELTA,
            bulk_residual: self.residual.0,
            boundary_residual: self.residual.1,
            reduced_residual: self.reduced_residual,
            iterations: self.iterations,
            centre_shift: self.centre_shift,
        }
    }

    /// `phi(x - s, y)` on the profile grid, constant beyond the lateral edges.
    pub fn shifted(&self, s: f64) -> ScalarField {
        let g = *self.grid();
        let mut out = ScalarField::zeros(g);
        let src = self.field.values();
        let dst = out.values_mut();
        let mut buf = vec![0.0; g.nx()];
        for j in 0..g.ny() {
            let row = src.row(j);
            let row = row.as_slice().expect("rows are contiguous");
            shift_row(row, -g.lx(), g.dx(), s, &mut buf);
            for (i, v) in buf.iter().enumerate() {
                dst[[j, i]] = *v;
            }
        }
        out
    }
}

fn reduced_residual(op: &HalfLaplacian, p: &DoubleWellPotential, v: &[f64]) -> Result<f64, SteadyError> {
    let mut hl = vec![0.0; v.len()];
    op.apply(v, &mut hl, &mut Vec::with_capacity(v.len()))?;
    let mut worst = 0.0f64;
    for (h, &u) in hl.iter().zip(v) {
        worst = worst.max((h + p.w_prime(u)?).abs());
    }
    Ok(worst)
}

/// `(sup |Delta_h phi| over interior nodes, sup |D_y phi - W'(phi)| on y = 0)`
/// with a second-order one-sided `D_y`.
pub fn field_residuals(f: &ScalarField, p: &DoubleWellPotential) -> Result<(f64, f64), SteadyError> {
    let g = f.grid();
    let (dx, dy) = (g.dx(), g.dy());
    let u = f.values();
    let mut bulk = 0.0f64;
    for j in 1..g.ny() - 1 {
        for i in 1..g.nx() - 1 {
            let lap = (u[[j, i + 1]] - 2.0 * u[[j, i]] + u[[j, i - 1]]) / (dx * dx)
                + (u[[j + 1, i]] - 2.0 * u[[j, i]] + u[[j - 1, i]]) / (dy * dy);
            bulk = bulk.max(lap.abs());
        }
    }
    let mut boundary = 0.0f64;
    for i in 0..g.nx() {
        let dyu = (-3.0 * u[[0, i]] + 4.0 * u[[1, i]] - u[[2, i]]) / (2.0 * dy);
        boundary = boundary.max((dyu - p.w_prime(u[[0, i]])?).abs());
    }
    Ok((bulk, boundary))
}

/// Centred differences, second-order one-sided at the two ends.
pub fn derivative_x(t: &BoundaryTrace) -> BoundaryTrace {
    let v = t.as_slice();
    let n = v.len();
    let dx = t.grid().dx();
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx);
    d[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dx);
    for i in 1..n - 1 {
        d[i] = (v[i + 1] - v[i - 1]) / (2.0 * dx);
    }
    BoundaryTrace::from_vec(*t.grid(), d).expect("finite differences of a finite trace")
}

pub fn solve_profile(p: &DoubleWellPotential, g: &HalfPlaneGrid, tol: f64) -> Result<SteadyProfile, SteadyError> {
    solve_profile_with(p, g, &SteadyOptions::new(tol))
}

pub fn solve_profile_with(
    p: &DoubleWellPotential,
    g: &HalfPlaneGrid,
    opts: &SteadyOptions,
) -> Result<SteadyProfile, SteadyError> {
    let op = HalfLaplacian::new(g, opts.reference);
    let xs = g.xs();
    let n = xs.len();
    // capped by the top eigenvalue pi/dx + max |W''|
    let tau = (opts.step_factor * g.dx()).min(1.9 / (PI / g.dx() + p.max_curvature()));
    let mut v: Vec<f64> = xs.iter().map(|&x| 2.0 / PI * (x - opts.initial_shift).atan()).collect();
    let mut hl = vec![0.0; n];
    let mut work = Vec::with_capacity(n);
    let mut rate = vec![0.0; n];
    let mut history = Vec::new();
    let mut converged = None;
    let mut last = f64::INFINITY;
    for it in 0..=opts.max_iterations {
        op.apply(&v, &mut hl, &mut work)?;
        let mut worst = 0.0f64;
        for i in 0..n {
            rate[i] = hl[i] + p.w_prime(v[i])?;
            worst = worst.max(rate[i].abs());
        }
        last = worst;
        if it % HISTORY_STRIDE == 0 {
            history.push(worst);
        }
        if worst < opts.tol {
            converged = Some(it);
            break;
        }
        if it == opts.max_iterations {
            break;
        }
        for i in 0..n {
            v[i] -= tau * rate[i];
        }
    }
    let iterations = match converged {
        Some(it) => it,
        None => {
            history.push(last);
            return Err(SteadyError::Convergence {
                iterations: opts.max_iterations,
                last,
                history,
            });
        }
    };

    let centre = monotone_root(&v, -g.lx(), g.dx()).ok_or(SteadyError::Recentre)?;
    let mut centred = vec![0.0; n];
    shift_row(&v, -g.lx(), g.dx(), -centre, &mut centred);
    let reduced = reduced_residual(&op, p, &centred)?;
    let t = BoundaryTrace::from_vec(*g, centred)?;
    let field = harmonic_extension(&t, g)?;
    let dx_trace = derivative_x(&t);
    SteadyProfile::assemble(field, dx_trace, p, reduced, iterations, centre)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub c: f64,
    pub exponent: f64,
    pub rms: f64,
    pub window: (f64, f64),
    /// Exponent near `-1` with a clean log-log line.
    pub algebraic: bool,
}

pub fn tail_fit(prof: &SteadyProfile) -> Result<TailFit, SteadyError> {
    tail_fit_trace(&prof.trace())
}

/// Fits `log(1 - t(x)) = log c + exponent log x` over `x in [Lx/4, 3Lx/4]`.
pub fn tail_fit_trace(t: &BoundaryTrace) -> Result<TailFit, SteadyError> {
    let g = t.grid();
    let (a, b) = (g.lx() / 4.0, 3.0 * g.lx() / 4.0);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &v) in t.as_slice().iter().enumerate() {
        let x = g.x(i);
        if x >= a && x <= b {
            let gap = 1.0 - v;
            if !(gap > 0.0) {
                return Err(SteadyError::Fit(format!("1 - phi = {gap:e} is not positive at x = {x}")));
            }
            xs.push(x.ln());
            ys.push(gap.ln());
        }
    }
    if xs.len() < 3 {
        return Err(SteadyError::Fit(format!("only {} nodes in the fit window", xs.len())));
    }
    let (intercept, exponent, rms) = fit_line(&xs, &ys);
    Ok(TailFit {
        c: intercept.exp(),
        exponent,
        rms,
        window: (a, b),
        algebraic: (-1.5..=-0.5).contains(&exponent) && rms < 0.05,
    })
}

/// `sup |grad phi| (1 + r)` with finite-difference gradients.
pub fn gradient_bound_check(prof: &SteadyProfile) -> f64 {
    let f = &prof.field;
    let g = f.grid();
    let u = f.values();
    let (nx, ny, dx, dy) = (g.nx(), g.ny(), g.dx(), g.dy());
    let mut worst = 0.0f64;
    for j in 0..ny {
        for i in 0..nx {
            let ux = if i == 0 {
                (-3.0 * u[[j, 0]] + 4.0 * u[[j, 1]] - u[[j, 2]]) / (2.0 * dx)
            } else if i == nx - 1 {
                (3.0 * u[[j, i]] - 4.0 * u[[j, i - 1]] + u[[j, i - 2]]) / (2.0 * dx)
            } else {
                (u[[j, i + 1]] - u[[j, i - 1]]) / (2.0 * dx)
            };
            let uy = if j == 0 {
                (-3.0 * u[[0, i]] + 4.0 * u[[1, i]] - u[[2, i]]) / (2.0 * dy)
            } else if j == ny - 1 {
                (3.0 * u[[j, i]] - 4.0 * u[[j - 1, i]] + u[[j - 2, i]]) / (2.0 * dy)
            } else {
                (u[[j + 1, i]] - u[[j - 1, i]]) / (2.0 * dy)
            };
            let r = g.x(i).hypot(g.y(j));
            worst = worst.max(ux.hypot(uy) * (1.0 + r));
        }
    }
    worst
}

/// Minimum of `d phi/dx (x, 0)` over the band `phi(x, 0) in [-1+delta, 1-delta]`,
/// including the interpolated band edges.
pub fn beta_constant(prof: &SteadyProfile, delta: f64) -> Result<f64, SteadyError> {
    let t = prof.trace();
    let v = t.as_slice();
    let d = prof.dx_trace.as_slice();
    let g = t.grid();
    let (lo, hi) = (-1.0 + delta, 1.0 - delta);
    let mut best = f64::INFINITY;
    for (&vi, &di) in v.iter().zip(d) {
        if vi >= lo && vi <= hi {
            best = best.min(di);
        }
    }
    if !best.is_finite() {
        return Err(SteadyError::Band { delta });
    }
    for level in [lo, hi] {
        let shifted: Vec<f64> = v.iter().map(|x| x - level).collect();
        if let Some(x) = monotone_root(&shifted, -g.lx(), g.dx()) {
            best = best.min(cubic_at(d, -g.lx(), g.dx(), x));
        }
    }
    Ok(best)
}
