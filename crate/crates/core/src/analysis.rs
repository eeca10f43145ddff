//! Decay analysis of the linearized problem `q_t = Delta q`,
//! `q_t - q_y + mu q = 0` on `y = 0`: the boundary symbol and its branch
//! structure, numerical Laplace/Fourier inversion, the bulk heat-kernel part,
//! power-law fits and the comparison envelopes of the nonlinear flow.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{evolve_observed, DynamicsError, Reaction, SchemeConfig, Stepper, Trajectory};
use crate::grid::{trace, BoundaryTrace, GridError, HalfPlaneGrid, ScalarField};
use crate::linalg::fit_line;
use crate::potential::PotentialConstants;
use crate::steady::SteadyProfile;

pub const TALBOT_NODES: usize = 48;
pub const ETA_NODES: usize = 4096;
/// Lower bound on `eta_max * sqrt(t)` for the Fourier truncation.
pub const ETA_SPAN: f64 = 12.0;
pub const MIN_FIT_SAMPLES: usize = 8;
/// Nodes next to the lateral and top edges reported apart from the interior.
pub const EDGE_COLLAR: usize = 4;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("fit error: {0}")]
    Fit(String),
    #[error("lambda = {lambda} lies on the branch cut (-inf, -eta^2] with eta = {eta}")]
    Branch { lambda: Complex64, eta: f64 },
    #[error("lambda = {lambda} is a pole of the boundary symbol")]
    Pole { lambda: Complex64 },
    #[error("contour crossing {crossing} does not clear the singularity at {singularity}")]
    Contour { crossing: f64, singularity: f64 },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid envelope parameters: {0}")]
    Parameter(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub window: (f64, f64),
    pub residual_rms: f64,
    pub samples: usize,
}

/// Least squares of `log norm` against `log t` over samples with `t` in `window`.
pub fn fit_decay(times: &[f64], norms: &[f64], window: (f64, f64)) -> Result<DecayFit, AnalysisError> {
    if times.len() != norms.len() {
        return Err(AnalysisError::Fit(format!(
            "{} times but {} norms",
            times.len(),
            norms.len()
        )));
    }
    let mut lt = Vec::new();
    let mut ln = Vec::new();
    for (&t, &n) in times.iter().zip(norms) {
        if t >= window.0 && t <= window.1 {
            if !(n > 0.0) || !(t > 0.0) {
                return Err(AnalysisError::Fit(format!("non-positive sample ({t}, {n}) in window")));
            }
            lt.push(t.ln());
            ln.push(n.ln());
        }
    }
    if lt.len() < MIN_FIT_SAMPLES {
        return Err(AnalysisError::Fit(format!(
            "{} samples in [{}, {}], need at least {MIN_FIT_SAMPLES}",
            lt.len(),
            window.0,
            window.1
        )));
    }
    let (intercept, exponent, rms) = fit_line(&lt, &ln);
    Ok(DecayFit {
        exponent,
        amplitude: intercept.exp(),
        window,
        residual_rms: rms,
        samples: lt.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchData {
    pub eta: f64,
    pub mu: f64,
    /// Root of `r + sqrt(r) = eta^2 - mu`, present iff `eta^2 >= mu`.
    pub r_star: Option<f64>,
    /// `r* - eta^2 = -sqrt(r*) - mu` when the root exists.
    pub spectral_abscissa: Option<f64>,
}

impl BranchData {
    /// Rightmost singularity of the symbol: the pole if present, else the branch point.
    pub fn rightmost_singularity(&self) -> f64 {
        self.spectral_abscissa.unwrap_or(-self.eta * self.eta)
    }
}

pub fn branch_root(eta: f64, mu: f64) -> BranchData {
    let s = eta * eta - mu;
    if s >= 0.0 {
        // sqrt(r) = (-1 + sqrt(1 + 4s))/2, written without cancellation
        let root = 2.0 * s / (1.0 + (1.0 + 4.0 * s).sqrt());
        let r = root * root;
        BranchData {
            eta,
            mu,
            r_star: Some(r),
            spectral_abscissa: Some(-root - mu),
        }
    } else {
        BranchData {
            eta,
            mu,
            r_star: None,
            spectral_abscissa: None,
        }
    }
}

/// `1 / (lambda + mu + sqrt(lambda + eta^2))` with the principal square root;
/// the branch point itself is admitted, the open cut is not.
pub fn boundary_symbol(lambda: Complex64, eta: f64, mu: f64) -> Result<Complex64, AnalysisError> {
    let shifted = lambda + eta * eta;
    if shifted.im == 0.0 && shifted.re < 0.0 {
        return Err(AnalysisError::Branch { lambda, eta });
    }
    let denom = lambda + mu + shifted.sqrt();
    if denom == Complex64::new(0.0, 0.0) {
        return Err(AnalysisError::Pole { lambda });
    }
    Ok(denom.inv())
}

/// Fixed-Talbot inversion of `F` at time `t` on the contour
/// `sigma + r theta (cot theta + i)`, `r = 2N / (5t)`, which crosses the real
/// axis at `sigma + r`.
pub fn talbot_invert<F>(f: F, t: f64, sigma: f64, singularity: f64, n: usize) -> Result<f64, AnalysisError>
where
    F: Fn(Complex64) -> Result<Complex64, AnalysisError>,
{
    if !(t > 0.0) {
        return Err(AnalysisError::Domain(format!("t = {t} must be positive")));
    }
    let r = 2.0 * n as f64 / (5.0 * t);
    if !(sigma + r > singularity) {
        return Err(AnalysisError::Contour {
            crossing: sigma + r,
            singularity,
        });
    }
    let mut acc = 0.5 * (r * t).exp() * f(Complex64::new(sigma + r, 0.0))?.re;
    for k in 1..n {
        let theta = k as f64 * PI / n as f64;
        let cot = theta.cos() / theta.sin();
        let s = Complex64::new(r * theta * cot, r * theta);
        let slope = Complex64::new(1.0, theta + (theta * cot - 1.0) * cot);
        let term = (s * t).exp() * f(s + sigma)? * slope;
        acc += term.re;
    }
    Ok((sigma * t).exp() * r / n as f64 * acc)
}

/// Contour shift: half the pole abscissa when the root exists, else half the
/// branch point, so the contour stays right of every singularity.
pub fn contour_shift(b: &BranchData) -> f64 {
    0.5 * b.rightmost_singularity()
}

/// Time-domain boundary response of a single Fourier mode:
/// the inverse Laplace transform of the boundary symbol at `t`.
pub fn mode_response(t: f64, eta: f64, mu: f64) -> Result<f64, AnalysisError> {
    let b = branch_root(eta, mu);
    talbot_invert(|l| boundary_symbol(l, eta, mu), t, contour_shift(&b), b.rightmost_singularity(), TALBOT_NODES)
}

fn eta_max(t: f64) -> f64 {
    (ETA_SPAN / t.sqrt()).max(3.0 * ETA_SPAN / t)
}

/// Samples of `K^(t, eta)` on `[0, eta_max]`, with the grid spacing.
fn mode_table(t: f64, mu: f64) -> Result<(Vec<f64>, f64), AnalysisError> {
    if !(t > 0.0) {
        return Err(AnalysisError::Domain(format!("t = {t} must be positive")));
    }
    let h = eta_max(t) / (ETA_NODES - 1) as f64;
    let values = (0..ETA_NODES)
        .into_par_iter()
        .map(|k| mode_response(t, k as f64 * h, mu))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((values, h))
}

fn simpson_weight(k: usize, n: usize, h: f64) -> f64 {
    if k == 0 || k == n - 1 {
        h / 3.0
    } else if k % 2 == 1 {
        4.0 * h / 3.0
    } else {
        2.0 * h / 3.0
    }
}

fn kernel_from_table(table: &[f64], h: f64, x: f64) -> f64 {
    let n = table.len();
    // Simpson needs an odd node count; the last interval falls back to a trapezoid
    let m = if n % 2 == 0 { n - 1 } else { n };
    let mut acc = 0.0;
    for (k, v) in table.iter().take(m).enumerate() {
        acc += simpson_weight(k, m, h) * v * (x * k as f64 * h).cos();
    }
    if m < n {
        let a = table[n - 2] * (x * (n - 2) as f64 * h).cos();
        let b = table[n - 1] * (x * (n - 1) as f64 * h).cos();
        acc += 0.5 * h * (a + b);
    }
    acc / PI
}

/// Boundary kernel `K(t, x) = (1/pi) int_0^inf K^(t, eta) cos(x eta) d eta`:
/// the trace at time `t` produced by a unit surface impulse at the origin.
pub fn inverse_kernel(t: f64, x: f64, mu: f64) -> Result<f64, AnalysisError> {
    let (table, h) = mode_table(t, mu)?;
    Ok(kernel_from_table(&table, h, x))
}

/// Boundary trace at time `t` of the linearized solution started from the
/// surface density `surface` and zero bulk data, by direct convolution with
/// `K(t, .)` (data treated as zero beyond the grid).
pub fn propagate_trace(surface: &BoundaryTrace, t: f64, mu: f64) -> Result<BoundaryTrace, AnalysisError> {
    let g = *surface.grid();
    let (table, h) = mode_table(t, mu)?;
    let n = g.nx();
    let dx = g.dx();
    let kernel: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|m| kernel_from_table(&table, h, m as f64 * dx))
        .collect();
    let s = surface.as_slice();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|k| g.x_weight(k) * kernel[i.abs_diff(k)] * s[k]).sum())
        .collect();
    Ok(BoundaryTrace::from_vec(g, out)?)
}

fn gaussian(t: f64, z: f64) -> f64 {
    (-z * z / (4.0 * t)).exp() / (4.0 * PI * t).sqrt()
}

/// `sum_{i'} w_{i'} G_t(x_i - x_{i'}) q0[j', i']` for every bulk row `j'`.
fn x_convolved(q0: &ScalarField, t: f64) -> Vec<Vec<f64>> {
    let g = q0.grid();
    let nx = g.nx();
    let dx = g.dx();
    let kernel: Vec<f64> = (0..nx).map(|m| gaussian(t, m as f64 * dx)).collect();
    (0..g.ny())
        .into_par_iter()
        .map(|j| {
            let row: Vec<f64> = (0..nx).map(|i| q0.at(i, j)).collect();
            if row.iter().all(|v| *v == 0.0) {
                return vec![0.0; nx];
            }
            (0..nx)
                .map(|i| (0..nx).map(|k| g.x_weight(k) * kernel[i.abs_diff(k)] * row[k]).sum())
                .collect()
        })
        .collect()
}

fn y_weight(j: usize, ny: usize, dy: f64) -> f64 {
    if j == 0 || j == ny - 1 {
        dy / 2.0
    } else {
        dy
    }
}

/// Heat flow in the plane of the odd-in-`y` extension of `q0_bulk`
/// (the boundary row is ignored), by direct quadrature.
pub fn q2_solution(q0_bulk: &ScalarField, t: f64) -> Result<ScalarField, AnalysisError> {
    if !(t > 0.0) {
        return Err(AnalysisError::Domain(format!("t = {t} must be positive")));
    }
    let g = *q0_bulk.grid();
    let (nx, ny, dy) = (g.nx(), g.ny(), g.dy());
    let a = x_convolved(q0_bulk, t);
    let rows: Vec<Vec<f64>> = (0..ny)
        .into_par_iter()
        .map(|j| {
            let y = g.y(j);
            let mut out = vec![0.0; nx];
            for (jp, arow) in a.iter().enumerate().skip(1) {
                let yp = g.y(jp);
                let w = y_weight(jp, ny, dy) * (gaussian(t, y - yp) - gaussian(t, y + yp));
                if w != 0.0 {
                    for (o, v) in out.iter_mut().zip(arow) {
                        *o += w * v;
                    }
                }
            }
            out
        })
        .collect();
    let mut f = ScalarField::zeros(g).with_time(t);
    let v = f.values_mut();
    for (j, row) in rows.into_iter().enumerate() {
        for (i, x) in row.into_iter().enumerate() {
            v[[j, i]] = x;
        }
    }
    Ok(f)
}

/// `d/dy q2(t, x, 0)` from the differentiated kernel `(y'/t) G_t(y')`.
pub fn q2_boundary_flux(q0_bulk: &ScalarField, t: f64) -> Result<BoundaryTrace, AnalysisError> {
    if !(t > 0.0) {
        return Err(AnalysisError::Domain(format!("t = {t} must be positive")));
    }
    let g = *q0_bulk.grid();
    let (nx, ny, dy) = (g.nx(), g.ny(), g.dy());
    let a = x_convolved(q0_bulk, t);
    let mut out = vec![0.0; nx];
    for (jp, arow) in a.iter().enumerate().skip(1) {
        let yp = g.y(jp);
        let w = y_weight(jp, ny, dy) * yp / t * gaussian(t, yp);
        for (o, v) in out.iter_mut().zip(arow) {
            *o += w * v;
        }
    }
    Ok(BoundaryTrace::from_vec(g, out)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayObservable {
    /// `sup_x |q(t, x, 0)|`.
    TraceSup,
    /// `sup_x |q_y(t, x, 0)|` with a second-order one-sided difference.
    BoundaryFluxSup,
}

impl DecayObservable {
    pub fn measure(&self, q: &ScalarField) -> f64 {
        match self {
            DecayObservable::TraceSup => trace(q).as_slice().iter().fold(0.0, |m, v| m.max(v.abs())),
            DecayObservable::BoundaryFluxSup => {
                let g = q.grid();
                let dy = g.dy();
                (0..g.nx())
                    .map(|i| ((-3.0 * q.at(i, 0) + 4.0 * q.at(i, 1) - q.at(i, 2)) / (2.0 * dy)).abs())
                    .fold(0.0, f64::max)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayExperiment {
    pub fit: DecayFit,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Runs the linearized flow to `t_end` and fits the decay of `observable`
/// over `[t_end/10, t_end]`.
pub fn linear_decay_experiment(
    q0: &ScalarField,
    mu: f64,
    cfg: &SchemeConfig,
    t_end: f64,
    observable: DecayObservable,
) -> Result<DecayExperiment, AnalysisError> {
    let stepper = Stepper::new(*q0.grid(), *cfg, Reaction::Linear(mu))?;
    let mut times = Vec::new();
    let mut norms = Vec::new();
    let record_every = (t_end / 400.0).max(cfg.dt);
    evolve_observed(q0, &stepper, t_end, record_every, |q, _| {
        times.push(q.time());
        norms.push(observable.measure(q));
        Ok(())
    })?;
    let fit = fit_decay(&times, &norms, (t_end / 10.0, t_end))?;
    Ok(DecayExperiment { fit, times, norms })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeParams {
    pub xi1: f64,
    pub xi2: f64,
    pub m: f64,
    pub c: f64,
}

impl EnvelopeParams {
    /// Total front displacement `2M (1 - (1 + t)^{-1/2})` by time `t`,
    /// the integral of `M (1 + t)^{-3/2}`.
    pub fn drift(&self, t: f64) -> f64 {
        2.0 * self.m * (1.0 - 1.0 / (1.0 + t).sqrt())
    }

    pub fn damping(&self, t: f64) -> f64 {
        1.0 / (1.0 + self.c * t.powf(1.5))
    }

    fn validate(&self) -> Result<(), AnalysisError> {
        if !(self.m >= 0.0 && self.m.is_finite()) {
            return Err(AnalysisError::Parameter(format!("M = {} must be nonnegative", self.m)));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(AnalysisError::Parameter(format!("C = {} must be positive", self.c)));
        }
        if !(self.xi1.is_finite() && self.xi2.is_finite()) {
            return Err(AnalysisError::Parameter("shifts must be finite".into()));
        }
        Ok(())
    }
}

/// Smallest `M` with `M (1 + t)^{-3/2} >= (mu + k)/beta * q0_sup / (1 + C t^{3/2})` for all `t >= 0`.
pub fn envelope_speed(constants: &PotentialConstants, beta: f64, q0_sup: f64, c: f64) -> f64 {
    let ratio = (0..=4000)
        .map(|k| {
            let t = if k == 0 { 0.0 } else { 10f64.powf(-3.0 + 7.0 * k as f64 / 4000.0) };
            (1.0 + t).powf(1.5) / (1.0 + c * t.powf(1.5))
        })
        .fold(0.0, f64::max);
    (constants.mu + constants.k) / beta * q0_sup * ratio
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeSample {
    pub t: f64,
    pub upper: f64,
    pub lower: f64,
    pub edge: f64,
    /// Node `(i, j)` of the worst interior violation.
    pub worst_node: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub params: EnvelopeParams,
    pub max_upper_violation: f64,
    pub max_lower_violation: f64,
    pub edge_violation: f64,
    pub times_checked: Vec<f64>,
    pub samples: Vec<EnvelopeSample>,
}

impl EnvelopeReport {
    pub fn interior_violation(&self) -> f64 {
        self.max_upper_violation.max(self.max_lower_violation)
    }
}

/// Checks `phi(x - xi1 - w(t)) - q0 d(t) <= u <= phi(x + xi2 + w(t)) + q0 d(t)`
/// at every recorded `t >= t_min`, with `w` the drift and `d` the damping.
pub fn envelope_check(
    traj: &Trajectory,
    prof: &SteadyProfile,
    q0: &ScalarField,
    params: &EnvelopeParams,
    t_min: f64,
) -> Result<EnvelopeReport, AnalysisError> {
    params.validate()?;
    let mut report = EnvelopeReport {
        params: *params,
        max_upper_violation: 0.0,
        max_lower_violation: 0.0,
        edge_violation: 0.0,
        times_checked: Vec::new(),
        samples: Vec::new(),
    };
    for u in &traj.snapshots {
        let t = u.time();
        if t < t_min {
            continue;
        }
        let s = sample_envelope(u, prof, q0, params, t)?;
        report.max_upper_violation = report.max_upper_violation.max(s.upper);
        report.max_lower_violation = report.max_lower_violation.max(s.lower);
        report.edge_violation = report.edge_violation.max(s.edge);
        report.times_checked.push(t);
        report.samples.push(s);
    }
    Ok(report)
}

/// Envelope violations of a single field at time `t`.
pub fn sample_envelope(
    u: &ScalarField,
    prof: &SteadyProfile,
    q0: &ScalarField,
    params: &EnvelopeParams,
    t: f64,
) -> Result<EnvelopeSample, AnalysisError> {
    params.validate()?;
    let g: HalfPlaneGrid = *u.grid();
    g.ensure_same(prof.grid())?;
    g.ensure_same(q0.grid())?;
    let w = params.drift(t);
    let d = params.damping(t);
    let lower_phi = prof.shifted(params.xi1 + w);
    let upper_phi = prof.shifted(-(params.xi2 + w));
    let (nx, ny) = (g.nx(), g.ny());
    let mut sample = EnvelopeSample {
        t,
        upper: 0.0,
        lower: 0.0,
        edge: 0.0,
        worst_node: (0, 0),
    };
    let mut worst = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let q = q0.at(i, j) * d;
            let v = u.at(i, j);
            let up = (v - upper_phi.at(i, j) - q).max(0.0);
            let lo = (lower_phi.at(i, j) - q - v).max(0.0);
            let edge = i < EDGE_COLLAR || i + EDGE_COLLAR >= nx || j + EDGE_COLLAR >= ny;
            if edge {
                sample.edge = sample.edge.max(up.max(lo));
            } else {
                sample.upper = sample.upper.max(up);
                sample.lower = sample.lower.max(lo);
                if up.max(lo) > worst {
                    worst = up.max(lo);
                    sample.worst_node = (i, j);
                }
            }
        }
    }
    Ok(sample)
}
