use std::f64::consts::PI;

use dynbc_core::grid::{trace, BoundaryTrace, HalfPlaneGrid};
use dynbc_core::potential::DoubleWellPotential;
use dynbc_core::steady::{
    closed_form_phi, half_laplacian, harmonic_extension, solve_profile, solve_profile_with, tail_fit, SteadyOptions,
    Transition,
};

fn trace_error(nx: usize) -> f64 {
    let g = HalfPlaneGrid::new(100.0, 20.0, nx, 21).unwrap();
    let prof = solve_profile(&DoubleWellPotential::cosine(), &g, 1e-9).unwrap();
    let t = prof.trace();
    (0..g.nx())
        .filter(|&i| g.x(i).abs() <= 50.0)
        .map(|i| (t.as_slice()[i] - closed_form_phi(g.x(i), 0.0).0).abs())
        .fold(0.0, f64::max)
}

#[test]
fn doubling_nx_halves_trace_error() {
    let coarse = trace_error(201);
    let fine = trace_error(401);
    assert!(fine <= coarse / 2.0, "{coarse:e} -> {fine:e}");
}

fn interior_residual(t: &BoundaryTrace, p: &DoubleWellPotential, half_width: f64) -> f64 {
    let g = t.grid();
    let hl = half_laplacian(t, &Transition::default()).unwrap();
    (0..g.nx())
        .filter(|&i| g.x(i).abs() <= half_width)
        .map(|i| (hl.as_slice()[i] + p.w_prime(t.as_slice()[i]).unwrap()).abs())
        .fold(0.0, f64::max)
}

fn reference_gap(lx: f64) -> f64 {
    let g = HalfPlaneGrid::new(lx, 10.0, (4.0 * lx) as usize + 1, 11).unwrap();
    let p = DoubleWellPotential::cosine();
    let a = solve_profile(&p, &g, 1e-9).unwrap();
    let mut opts = SteadyOptions::new(1e-9);
    opts.reference = Transition::Arctan { width: 2.0 };
    let b = solve_profile_with(&p, &g, &opts).unwrap();
    (0..g.nx())
        .filter(|&i| g.x(i).abs() <= 10.0)
        .map(|i| (a.trace().as_slice()[i] - b.trace().as_slice()[i]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn reference_transition_only_matters_through_truncation() {
    let short = reference_gap(30.0);
    let long = reference_gap(60.0);
    assert!(long < 2e-3 && long < short / 4.0, "{short:e} -> {long:e}");
}

#[test]
fn translated_profile_is_again_a_solution() {
    let g = HalfPlaneGrid::new(60.0, 10.0, 241, 11).unwrap();
    let p = DoubleWellPotential::cosine();
    let a = solve_profile(&p, &g, 1e-9).unwrap();
    let r0 = interior_residual(&a.trace(), &p, 20.0);
    let moved = trace(&a.shifted(3.0));
    let r3 = interior_residual(&moved, &p, 20.0);
    assert!(r3 < 2e-3, "{r0:e} {r3:e}");
}

#[test]
fn quartic_profile_is_odd_monotone_and_fat_tailed() {
    let g = HalfPlaneGrid::new(100.0, 10.0, 401, 11).unwrap();
    let p = DoubleWellPotential::quartic_tabulated(601).unwrap();
    let prof = solve_profile(&p, &g, 1e-8).unwrap();
    let t = prof.trace();
    let v = t.as_slice();
    assert!(v.windows(2).all(|w| w[1] >= w[0]));
    let n = v.len();
    for i in 0..n {
        assert!((v[i] + v[n - 1 - i]).abs() < 1e-6);
    }
    let fit = tail_fit(&prof).unwrap();
    assert!(fit.algebraic, "{fit:?}");
}

#[test]
fn residuals_decrease_under_refinement() {
    let p = DoubleWellPotential::cosine();
    let coarse = HalfPlaneGrid::new(40.0, 10.0, 81, 21).unwrap();
    let a = solve_profile(&p, &coarse, 1e-9).unwrap();
    let b = solve_profile(&p, &coarse.refined(), 1e-9).unwrap();
    assert!(b.residual.1 < a.residual.1, "{:?} {:?}", a.residual, b.residual);
}

#[test]
fn harmonic_extension_error_falls_with_refinement_and_obeys_max_principle() {
    let err = |nx: usize, ny: usize| {
        let g = HalfPlaneGrid::new(50.0, 10.0, nx, ny).unwrap();
        let t = BoundaryTrace::from_fn(g, |x| 2.0 / PI * x.atan());
        let f = harmonic_extension(&t, &g).unwrap();
        let mut e = 0.0f64;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let v = f.at(i, j);
                assert!(v.abs() <= 1.0 + 1e-12);
                if g.x(i).abs() <= 25.0 {
                    e = e.max((v - closed_form_phi(g.x(i), g.y(j)).0).abs());
                }
            }
        }
        assert_eq!(trace(&f).as_slice(), t.as_slice());
        e
    };
    let a = err(101, 21);
    let b = err(201, 41);
    assert!(b < a, "{a:e} -> {b:e}");
}
