//! Four-point Lagrange interpolation on uniform rows, constant beyond the ends.

/// Cubic interpolant of `values` (node `i` at `x0 + i dx`) evaluated at `x`.
pub fn cubic_at(values: &[f64], x0: f64, dx: f64, x: f64) -> f64 {
    let n = values.len();
    let s = (x - x0) / dx;
    if s <= 0.0 {
        return values[0];
    }
    if s >= (n - 1) as f64 {
        return values[n - 1];
    }
    let base = (s.floor() as usize).clamp(1, n.saturating_sub(3).max(1));
    let start = base - 1;
    if n < 4 {
        let i = s.floor() as usize;
        let t = s - i as f64;
        return values[i] * (1.0 - t) + values[(i + 1).min(n - 1)] * t;
    }
    let t = s - start as f64;
    let (p0, p1, p2, p3) = (values[start], values[start + 1], values[start + 2], values[start + 3]);
    // Lagrange basis on nodes 0, 1, 2, 3
    let l0 = -(t - 1.0) * (t - 2.0) * (t - 3.0) / 6.0;
    let l1 = t * (t - 2.0) * (t - 3.0) / 2.0;
    let l2 = -t * (t - 1.0) * (t - 3.0) / 2.0;
    let l3 = t * (t - 1.0) * (t - 2.0) / 6.0;
    p0 * l0 + p1 * l1 + p2 * l2 + p3 * l3
}

/// `out[i] = row(x_i - s)` for a row sampled at `x_i = x0 + i dx`.
pub fn shift_row(row: &[f64], x0: f64, dx: f64, s: f64, out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = cubic_at(row, x0, dx, x0 + i as f64 * dx - s);
    }
}

/// Zero of a monotone increasing sampled row, by bisection on the interpolant.
pub fn monotone_root(row: &[f64], x0: f64, dx: f64) -> Option<f64> {
    let n = row.len();
    let k = row.windows(2).position(|w| w[0] <= 0.0 && w[1] >= 0.0)?;
    let (mut a, mut b) = (x0 + k as f64 * dx, x0 + (k + 1) as f64 * dx);
    if k + 1 >= n {
        return None;
    }
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if cubic_at(row, x0, dx, m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}
