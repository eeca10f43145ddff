//! Clamped cubic spline on a strictly increasing knot vector.

use crate::linalg::solve_tridiagonal;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CubicSpline {
    knots: Vec<f64>,
    values: Vec<f64>,
    /// Second derivatives at the knots.
    curvature: Vec<f64>,
}

impl CubicSpline {
    /// Builds the spline with prescribed end slopes.
    ///
    /// Callers guarantee at least three knots and strictly increasing abscissae.
    pub(crate) fn clamped(knots: Vec<f64>, values: Vec<f64>, slope_lo: f64, slope_hi: f64) -> Self {
        let n = knots.len();
        debug_assert!(n >= 3 && values.len() == n);
        let h: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
        let mut sub = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut sup = vec![0.0; n];
        let mut rhs = vec![0.0; n];

        diag[0] = h[0] / 3.0;
        sup[0] = h[0] / 6.0;
        rhs[0] = (values[1] - values[0]) / h[0] - slope_lo;
        for i in 1..n - 1 {
            sub[i] = h[i - 1] / 6.0;
            diag[i] = (h[i - 1] + h[i]) / 3.0;
            sup[i] = h[i] / 6.0;
            rhs[i] = (values[i + 1] - values[i]) / h[i] - (values[i] - values[i - 1]) / h[i - 1];
        }
        sub[n - 1] = h[n - 2] / 6.0;
        diag[n - 1] = h[n - 2] / 3.0;
        rhs[n - 1] = slope_hi - (values[n - 1] - values[n - 2]) / h[n - 2];

        let curvature = solve_tridiagonal(&sub, &diag, &sup, &rhs);
        Self {
            knots,
            values,
            curvature,
        }
    }

    pub(crate) fn range(&self) -> (f64, f64) {
        (self.knots[0], self.knots[self.knots.len() - 1])
    }

    pub(crate) fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub(crate) fn max_abs_curvature(&self) -> f64 {
        // piecewise linear second derivative: extremes sit on knots
        self.curvature.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    fn segment(&self, u: f64) -> usize {
        let n = self.knots.len();
        match self.knots.partition_point(|&k| k <= u) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value, first and second derivative at `u` (inside the knot range).
    pub(crate) fn eval(&self, u: f64) -> (f64, f64, f64) {
        let i = self.segment(u);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let h = x1 - x0;
        let a = (x1 - u) / h;
        let b = (u - x0) / h;
        let (m0, m1) = (self.curvature[i], self.curvature[i + 1]);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let value = a * y0 + b * y1 + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let slope = (y1 - y0) / h - (3.0 * a * a - 1.0) / 6.0 * h * m0 + (3.0 * b * b - 1.0) / 6.0 * h * m1;
        let curv = a * m0 + b * m1;
        (value, slope, curv)
    }
}
