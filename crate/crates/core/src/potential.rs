//! Interfacial double-well potential `W` and the structural constants
//! `(mu, delta, k)` used by the comparison envelopes.
//!
//! Two kinds are supported: the cosine potential `W(u) = (1 + cos(pi u)) / pi^2`
//! and a clamped cubic spline through user samples of `W` on `[-1-h, 1+h]`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spline::CubicSpline;

/// Tolerance for the well conditions of tabulated potentials.
pub const WELL_TOLERANCE: f64 = 1e-5;
/// Default half-width of the well neighbourhoods.
pub const DEFAULT_DELTA: f64 = 0.25;
/// Node count per axis for the constant search.
pub const CONSTANT_GRID: usize = 400;
/// Refinement factor of the re-verification grid.
pub const VERIFY_REFINEMENT: usize = 10;

#[derive(Debug, Error)]
pub enum PotentialError {
    #[error("u = {u} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange { u: f64, lo: f64, hi: f64 },
    #[error("invalid potential table: {0}")]
    Table(String),
    #[error("potential violates the double-well conditions: {0}")]
    Invariant(String),
    #[error("delta = {0} must lie in (0, 1)")]
    Delta(f64),
    #[error(
        "no positive mu for delta = {delta}: W'(phi+q) - W'(phi) = {gap:.3e} <= 0 at phi = {phi}, q = {q}"
    )]
    ConstantsNotFound { delta: f64, phi: f64, q: f64, gap: f64 },
    #[error("constants failed re-verification ({which}) at phi = {phi}, q = {q}")]
    VerificationFailed { which: &'static str, phi: f64, q: f64 },
    #[error("cannot read potential table: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse potential table: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialKind {
    /// `W(u) = (1 + cos(pi u)) / pi^2`.
    Cosine,
    /// Clamped cubic spline through `(u, W(u))` samples.
    UserTabulated(TabulatedPotential),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedPotential {
    spline: CubicSpline,
}

impl TabulatedPotential {
    pub fn range(&self) -> (f64, f64) {
        self.spline.range()
    }

    pub fn sample_count(&self) -> usize {
        self.spline.knots().len()
    }
}

/// Double-well potential with minima at `-1` and `+1`.
///
/// Immutable once built; evaluation borrows `&self` only.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleWellPotential {
    kind: PotentialKind,
}

impl DoubleWellPotential {
    pub fn cosine() -> Self {
        Self {
            kind: PotentialKind::Cosine,
        }
    }

    /// Interpolates `(u, W(u))` samples. Abscissae must be strictly
    /// increasing and cover a neighbourhood of `[-1, 1]`.
    pub fn tabulated(samples: &[(f64, f64)]) -> Result<Self, PotentialError> {
        if samples.len() < 5 {
            return Err(PotentialError::Table(format!(
                "need at least 5 samples, got {}",
                samples.len()
            )));
        }
        if let Some(w) = samples.windows(2).find(|w| !(w[1].0 > w[0].0)) {
            return Err(PotentialError::Table(format!(
                "u column not strictly increasing at u = {}",
                w[1].0
            )));
        }
        if samples.iter().any(|(u, w)| !u.is_finite() || !w.is_finite()) {
            return Err(PotentialError::Table("non-finite sample".into()));
        }
        let (lo, hi) = (samples[0].0, samples[samples.len() - 1].0);
        if !(lo < -1.0 && hi > 1.0) {
            return Err(PotentialError::Table(format!(
                "range [{lo}, {hi}] must strictly contain [-1, 1]"
            )));
        }
        let knots: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
        let slope_lo = one_sided_slope(&knots[..3], &values[..3], true);
        let n = knots.len();
        let slope_hi = one_sided_slope(&knots[n - 3..], &values[n - 3..], false);
        let spline = CubicSpline::clamped(knots, values, slope_lo, slope_hi);
        let p = Self {
            kind: PotentialKind::UserTabulated(TabulatedPotential { spline }),
        };
        p.check_invariants()?;
        Ok(p)
    }

    /// Samples `f` at `n` equispaced points on `[lo, hi]` and tabulates it.
    pub fn tabulate_fn(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Result<Self, PotentialError> {
        let samples: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let u = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (u, f(u))
            })
            .collect();
        Self::tabulated(&samples)
    }

    /// The quartic well `(u^2 - 1)^2 / 4` tabulated on `[-1.5, 1.5]`.
    pub fn quartic_tabulated(n: usize) -> Result<Self, PotentialError> {
        Self::tabulate_fn(|u| (u * u - 1.0).powi(2) / 4.0, -1.5, 1.5, n)
    }

    /// Reads a two-column `(u, W)` CSV with a header line.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self, PotentialError> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut samples = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            if record.len() != 2 {
                return Err(PotentialError::Table(format!(
                    "row {} has {} columns, expected 2",
                    line + 2,
                    record.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| PotentialError::Table(format!("row {}: {e}", line + 2)))
            };
            samples.push((parse(&record[0])?, parse(&record[1])?));
        }
        Self::tabulated(&samples)
    }

    pub fn kind(&self) -> &PotentialKind {
        &self.kind
    }

    pub fn wells(&self) -> (f64, f64) {
        (-1.0, 1.0)
    }

    /// Valid evaluation range, `None` for the cosine potential.
    pub fn range(&self) -> Option<(f64, f64)> {
        match &self.kind {
            PotentialKind::Cosine => None,
            PotentialKind::UserTabulated(t) => Some(t.range()),
        }
    }

    /// `W'` is odd (exactly, by construction) for the cosine kind.
    pub fn has_odd_derivative(&self) -> bool {
        matches!(self.kind, PotentialKind::Cosine)
    }

    /// Upper bound for `|W''|` over the evaluation range.
    pub fn max_curvature(&self) -> f64 {
        match &self.kind {
            PotentialKind::Cosine => 1.0,
            PotentialKind::UserTabulated(t) => t.spline.max_abs_curvature(),
        }
    }

    fn spline_eval(&self, t: &TabulatedPotential, u: f64) -> Result<(f64, f64, f64), PotentialError> {
        let (lo, hi) = t.range();
        if !(u >= lo && u <= hi) {
            return Err(PotentialError::OutOfRange { u, lo, hi });
        }
        Ok(t.spline.eval(u))
    }

    pub fn w_eval(&self, u: f64) -> Result<f64, PotentialError> {
        match &self.kind {
            PotentialKind::Cosine => Ok((1.0 + cos_pi(u)) / (PI * PI)),
            PotentialKind::UserTabulated(t) => Ok(self.spline_eval(t, u)?.0),
        }
    }

    pub fn w_prime(&self, u: f64) -> Result<f64, PotentialError> {
        match &self.kind {
            PotentialKind::Cosine => Ok(-sin_pi(u) / PI),
            PotentialKind::UserTabulated(t) => Ok(self.spline_eval(t, u)?.1),
        }
    }

    pub fn w_double_prime(&self, u: f64) -> Result<f64, PotentialError> {
        match &self.kind {
            PotentialKind::Cosine => Ok(-cos_pi(u)),
            PotentialKind::UserTabulated(t) => Ok(self.spline_eval(t, u)?.2),
        }
    }

    /// Checks the double-well conditions: equal minima at `+-1`, barrier
    /// above them, `W'(+-1) = W'(0) = 0` and `W''(+-1) > 0`.
    pub fn check_invariants(&self) -> Result<(), PotentialError> {
        let w_plus = self.w_eval(1.0)?;
        let w_minus = self.w_eval(-1.0)?;
        if (w_plus - w_minus).abs() > WELL_TOLERANCE {
            return Err(PotentialError::Invariant(format!(
                "unequal minima W(-1) = {w_minus}, W(1) = {w_plus}"
            )));
        }
        for (label, u) in [("W'(-1)", -1.0), ("W'(0)", 0.0), ("W'(1)", 1.0)] {
            let d = self.w_prime(u)?;
            if d.abs() > WELL_TOLERANCE {
                return Err(PotentialError::Invariant(format!("{label} = {d:e} is not zero")));
            }
        }
        for u in [-1.0, 1.0] {
            let c = self.w_double_prime(u)?;
            if !(c > 0.0) {
                return Err(PotentialError::Invariant(format!("W''({u}) = {c} is not positive")));
            }
        }
        let floor = w_plus.max(w_minus);
        let probes: Vec<f64> = match &self.kind {
            PotentialKind::Cosine => (1..200).map(|i| -1.0 + i as f64 / 100.0).collect(),
            PotentialKind::UserTabulated(t) => t
                .spline
                .knots()
                .iter()
                .copied()
                .filter(|u| u.abs() < 1.0 - 1e-9)
                .collect(),
        };
        for u in probes {
            if !(self.w_eval(u)? > floor) {
                return Err(PotentialError::Invariant(format!(
                    "W({u}) does not exceed the well value {floor}"
                )));
            }
        }
        Ok(())
    }
}

/// `sin(pi u)` with exact zeros at the integers.
fn sin_pi(u: f64) -> f64 {
    let r = u - 2.0 * (u / 2.0).round();
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        -(PI * (1.0 + r)).sin()
    } else {
        (PI * r).sin()
    }
}

/// `cos(pi u)`, exactly `+-1` at the integers.
fn cos_pi(u: f64) -> f64 {
    let r = (u - 2.0 * (u / 2.0).round()).abs();
    if r > 0.5 {
        -(PI * (1.0 - r)).cos()
    } else {
        (PI * r).cos()
    }
}

fn one_sided_slope(x: &[f64], y: &[f64], forward: bool) -> f64 {
    // derivative of the quadratic through three points, at the outer point
    let (x0, x1, x2) = (x[0], x[1], x[2]);
    let (y0, y1, y2) = (y[0], y[1], y[2]);
    let at = if forward { x0 } else { x2 };
    let l0 = ((at - x1) + (at - x2)) / ((x0 - x1) * (x0 - x2));
    let l1 = ((at - x0) + (at - x2)) / ((x1 - x0) * (x1 - x2));
    let l2 = ((at - x0) + (at - x1)) / ((x2 - x0) * (x2 - x1));
    y0 * l0 + y1 * l1 + y2 * l2
}

/// Constants of the well/band inequalities, all with `0 < q <= delta`:
///
/// * `W'(phi+q) - W'(phi) >= mu q` for `phi` in `[1-delta, 1]` and in `[-1, -1+delta]`;
/// * `|W'(phi-q) - W'(phi)| <= k q` for `phi` in `[-1+delta, 1-delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotentialConstants {
    pub mu: f64,
    pub delta: f64,
    pub k: f64,
}

#[derive(Debug, Clone, Copy)]
struct Extremum {
    value: f64,
    phi: f64,
    q: f64,
}

fn axis(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

/// Minimum of `(W'(phi+q) - W'(phi)) / q` over the two well regions.
fn well_quotient_min(p: &DoubleWellPotential, delta: f64, n: usize) -> Result<Extremum, PotentialError> {
    let regions = [(1.0 - delta, 1.0), (-1.0, -1.0 + delta)];
    let mut best = Extremum {
        value: f64::INFINITY,
        phi: 0.0,
        q: 0.0,
    };
    for (lo, hi) in regions {
        let phis: Vec<f64> = axis(lo, hi, n).collect();
        let partial = phis
            .par_iter()
            .map(|&phi| -> Result<Extremum, PotentialError> {
                let base = p.w_prime(phi)?;
                let mut local = Extremum {
                    value: f64::INFINITY,
                    phi,
                    q: 0.0,
                };
                for j in 1..=n {
                    let q = delta * j as f64 / n as f64;
                    let v = (p.w_prime(phi + q)? - base) / q;
                    if v < local.value {
                        local = Extremum { value: v, phi, q };
                    }
                }
                Ok(local)
            })
            .collect::<Result<Vec<_>, _>>()?;
        for e in partial {
            if e.value < best.value {
                best = e;
            }
        }
    }
    Ok(best)
}

/// Maximum of `|W'(phi-q) - W'(phi)| / q` over the transition band.
fn band_quotient_max(p: &DoubleWellPotential, delta: f64, n: usize) -> Result<Extremum, PotentialError> {
    let phis: Vec<f64> = axis(-1.0 + delta, 1.0 - delta, n).collect();
    let partial = phis
        .par_iter()
        .map(|&phi| -> Result<Extremum, PotentialError> {
            let base = p.w_prime(phi)?;
            let mut local = Extremum {
                value: 0.0,
                phi,
                q: 0.0,
            };
            for j in 1..=n {
                let q = delta * j as f64 / n as f64;
                let v = (p.w_prime(phi - q)? - base).abs() / q;
                if v > local.value {
                    local = Extremum { value: v, phi, q };
                }
            }
            Ok(local)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(partial
        .into_iter()
        .fold(Extremum { value: 0.0, phi: 0.0, q: 0.0 }, |a, b| if b.value > a.value { b } else { a }))
}

/// Grid search for the largest `mu` and smallest `k`, shrunk by a 10% safety
/// factor and re-verified on a grid ten times finer.
pub fn estimate_constants(p: &DoubleWellPotential, delta: f64) -> Result<PotentialConstants, PotentialError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(PotentialError::Delta(delta));
    }
    for u in [-1.0, 1.0] {
        if !(p.w_double_prime(u)? > 0.0) {
            return Err(PotentialError::Invariant(format!("degenerate well at u = {u}")));
        }
    }
    let well = well_quotient_min(p, delta, CONSTANT_GRID)?;
    if !(well.value > 0.0) {
        let gap = p.w_prime(well.phi + well.q)? - p.w_prime(well.phi)?;
        return Err(PotentialError::ConstantsNotFound {
            delta,
            phi: well.phi,
            q: well.q,
            gap,
        });
    }
    let band = band_quotient_max(p, delta, CONSTANT_GRID)?;
    let constants = PotentialConstants {
        mu: 0.9 * well.value,
        delta,
        k: 1.1 * band.value.max(f64::MIN_POSITIVE),
    };
    verify_constants(p, &constants, CONSTANT_GRID * VERIFY_REFINEMENT)?;
    Ok(constants)
}

/// Checks both inequalities on an `n x n` grid per region.
pub fn verify_constants(
    p: &DoubleWellPotential,
    c: &PotentialConstants,
    n: usize,
) -> Result<(), PotentialError> {
    let well = well_quotient_min(p, c.delta, n)?;
    if well.value < c.mu {
        return Err(PotentialError::VerificationFailed {
            which: "mu",
            phi: well.phi,
            q: well.q,
        });
    }
    let band = band_quotient_max(p, c.delta, n)?;
    if band.value > c.k {
        return Err(PotentialError::VerificationFailed {
            which: "k",
            phi: band.phi,
            q: band.q,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn cosine_values() {
        let p = DoubleWellPotential::cosine();
        assert_eq!(p.w_eval(1.0).unwrap(), 0.0);
        assert_eq!(p.w_prime(-1.0).unwrap(), 0.0);
        assert_eq!(p.w_prime(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(p.w_prime(0.5).unwrap(), -1.0 / PI, epsilon = 1e-15);
        assert_abs_diff_eq!(p.w_double_prime(1.0).unwrap(), 1.0, epsilon = 1e-15);
        p.check_invariants().unwrap();
    }

    #[test]
    fn derivative_consistent_with_finite_differences() {
        let h = 1e-4;
        for p in [DoubleWellPotential::cosine(), DoubleWellPotential::quartic_tabulated(301).unwrap()] {
            for i in 0..40 {
                let u = -1.2 + 2.4 * i as f64 / 39.0;
                let fd = (p.w_eval(u + h).unwrap() - p.w_eval(u - h).unwrap()) / (2.0 * h);
                assert!((fd - p.w_prime(u).unwrap()).abs() < 1e-6, "u = {u}");
                let fd2 = (p.w_prime(u + h).unwrap() - p.w_prime(u - h).unwrap()) / (2.0 * h);
                assert!((fd2 - p.w_double_prime(u).unwrap()).abs() < 1e-5, "u = {u}");
            }
        }
    }

    #[test]
    fn cosine_derivative_is_odd() {
        let p = DoubleWellPotential::cosine();
        for i in 0..100 {
            let u = -1.5 + 3.0 * i as f64 / 99.0;
            assert_eq!(p.w_prime(-u).unwrap(), -p.w_prime(u).unwrap());
        }
    }

    #[test]
    fn tabulated_quartic_wells() {
        let p = DoubleWellPotential::quartic_tabulated(301).unwrap();
        assert!(p.w_prime(1.0).unwrap().abs() < WELL_TOLERANCE);
        assert!(p.w_prime(-1.0).unwrap().abs() < WELL_TOLERANCE);
        assert!((p.w_double_prime(1.0).unwrap() - 2.0).abs() < 1e-3);
        assert!(p.max_curvature() > 2.0);
    }

    #[test]
    fn tabulated_out_of_range() {
        let p = DoubleWellPotential::quartic_tabulated(101).unwrap();
        assert!(matches!(p.w_eval(1.6), Err(PotentialError::OutOfRange { .. })));
        assert!(matches!(p.w_prime(-2.0), Err(PotentialError::OutOfRange { .. })));
    }

    #[test]
    fn tabulated_rejects_bad_tables() {
        let shifted = DoubleWellPotential::tabulate_fn(|u| (u * u - 1.0).powi(2) / 4.0 + 0.1 * u, -1.5, 1.5, 101);
        assert!(matches!(shifted, Err(PotentialError::Invariant(_))));
        let short = DoubleWellPotential::tabulated(&[(-1.5, 0.0), (0.0, 1.0), (1.5, 0.0)]);
        assert!(matches!(short, Err(PotentialError::Table(_))));
        let narrow = DoubleWellPotential::tabulate_fn(|u| u * u, -0.9, 0.9, 50);
        assert!(matches!(narrow, Err(PotentialError::Table(_))));
    }

    #[test]
    fn cosine_constants_at_default_delta() {
        let p = DoubleWellPotential::cosine();
        let c = estimate_constants(&p, DEFAULT_DELTA).unwrap();
        assert!(c.mu > 0.0 && c.k > 0.0);
        // oracle: brute-force difference quotients on a 400 x 400 grid
        let n = 400;
        let mut mu_raw = f64::INFINITY;
        let mut k_raw = 0.0f64;
        let wp = |u: f64| -(PI * u).sin() / PI;
        for i in 0..n {
            for j in 1..=n {
                let q = DEFAULT_DELTA * j as f64 / n as f64;
                for phi in [
                    1.0 - DEFAULT_DELTA + DEFAULT_DELTA * i as f64 / (n - 1) as f64,
                    -1.0 + DEFAULT_DELTA * i as f64 / (n - 1) as f64,
                ] {
                    mu_raw = mu_raw.min((wp(phi + q) - wp(phi)) / q);
                }
                let phi = -1.0 + DEFAULT_DELTA + 2.0 * (1.0 - DEFAULT_DELTA) * i as f64 / (n - 1) as f64;
                k_raw = k_raw.max((wp(phi - q) - wp(phi)).abs() / q);
            }
        }
        assert_abs_diff_eq!(c.mu, 0.9 * mu_raw, epsilon = 1e-12);
        assert_abs_diff_eq!(c.k, 1.1 * k_raw, epsilon = 1e-12);
        // the corner (phi, q) = (-3/4, 1/4) is the binding pair
        let corner = (wp(-0.5) - wp(-0.75)) / 0.25;
        assert_abs_diff_eq!(mu_raw, corner, epsilon = 1e-9);
    }

    #[test]
    fn cosine_half_delta_is_degenerate() {
        // W''(+-1/2) = 0, so no positive mu survives sampling at delta = 1/2
        let p = DoubleWellPotential::cosine();
        match estimate_constants(&p, 0.5) {
            Err(PotentialError::ConstantsNotFound { phi, q, .. }) => {
                assert!(p.w_prime(phi + q).unwrap() - p.w_prime(phi).unwrap() <= 0.0);
            }
            Err(PotentialError::VerificationFailed { which, phi, q }) => {
                assert_eq!(which, "mu");
                let refined = (p.w_prime(phi + q).unwrap() - p.w_prime(phi).unwrap()) / q;
                assert!(refined < 0.9 * 2e-3);
            }
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn wide_delta_reports_genuine_witness() {
        let p = DoubleWellPotential::cosine();
        match estimate_constants(&p, 0.99) {
            Ok(c) => verify_constants(&p, &c, 1000).unwrap(),
            Err(PotentialError::ConstantsNotFound { phi, q, .. }) => {
                assert!(p.w_prime(phi + q).unwrap() - p.w_prime(phi).unwrap() <= 0.0);
            }
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn quartic_mu_below_well_curvature() {
        let p = DoubleWellPotential::quartic_tabulated(601).unwrap();
        let c = estimate_constants(&p, 0.2).unwrap();
        let min_curv = (0..=100)
            .map(|i| p.w_double_prime(0.8 + 0.2 * i as f64 / 100.0).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(c.mu > 0.0 && c.mu <= min_curv);
        // at delta = 1/2 the well region reaches W'' < 0
        assert!(estimate_constants(&p, 0.5).is_err());
    }

    #[test]
    fn reads_csv_tables() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.csv");
        let mut text = String::from("u,W\n");
        for i in 0..121 {
            let u = -1.5 + 3.0 * i as f64 / 120.0;
            text.push_str(&format!("{u},{}\n", (u * u - 1.0f64).powi(2) / 4.0));
        }
        std::fs::write(&path, &text).unwrap();
        let p = DoubleWellPotential::from_csv(&path).unwrap();
        assert!((p.w_eval(0.0).unwrap() - 0.25).abs() < 1e-6);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "u,W\n0.0,1.0\n-1.0,0.0\n1.0,0.0\n1.5,1.0\n2.0,2.0\n").unwrap();
        assert!(matches!(DoubleWellPotential::from_csv(&bad), Err(PotentialError::Table(_))));
    }
}
