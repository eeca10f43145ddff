use std::f64::consts::PI;

use dynbc_core::analysis::{
    envelope_check, inverse_kernel, mode_response, propagate_trace, q2_boundary_flux, q2_solution, EnvelopeParams,
};
use dynbc_core::dynamics::{evolve, initial_data, Bump, InitialKind, Scheme, SchemeConfig};
use dynbc_core::grid::{trace_sup_norm, BoundaryTrace, HalfPlaneGrid, ScalarField};
use dynbc_core::potential::DoubleWellPotential;
use dynbc_core::steady::SteadyProfile;

/// Inverse Laplace transform of `1/(s + mu + sqrt s)` for `mu < 1/4`,
/// from the partial fractions in `p = sqrt s`.
fn mode_zero_closed_form(t: f64, mu: f64) -> f64 {
    let d = (1.0 - 4.0 * mu).sqrt();
    let (a, b) = ((-1.0 + d) / 2.0, (-1.0 - d) / 2.0);
    let part = |r: f64| r * (r * r * t).exp() * libm::erfc(-r * t.sqrt());
    (part(a) - part(b)) / (a - b)
}

fn surface_mass(t: &BoundaryTrace) -> f64 {
    let g = t.grid();
    t.as_slice().iter().enumerate().map(|(i, v)| g.x_weight(i) * v).sum()
}

fn hump(x: f64) -> f64 {
    if x.abs() < 2.0 {
        (PI * x / 4.0).cos().powi(2)
    } else {
        0.0
    }
}

#[test]
fn zero_mode_matches_closed_form() {
    for mu in [0.09, 0.16, 0.21] {
        for t in [0.1_f64, 1.0, 10.0, 100.0] {
            let exact = mode_zero_closed_form(t, mu);
            let v = mode_response(t, 0.0, mu).unwrap();
            assert!((v - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "mu {mu} t {t}: {v} vs {exact}");
        }
    }
}

#[test]
fn zero_mode_decays_like_t_to_minus_three_halves() {
    let mu = 0.21;
    let slope = (mode_zero_closed_form(1400.0, mu) / mode_zero_closed_form(350.0, mu)).ln() / 4f64.ln();
    let v = (mode_response(1400.0, 0.0, mu).unwrap() / mode_response(350.0, 0.0, mu).unwrap()).ln() / 4f64.ln();
    assert!((slope + 1.5).abs() < 0.05, "{slope}");
    assert!((v - slope).abs() < 1e-4, "{v} vs {slope}");
}

#[test]
fn propagated_mass_is_zero_mode_times_data_mass() {
    let g = HalfPlaneGrid::new(200.0, 1.0, 1601, 3).unwrap();
    let s = BoundaryTrace::from_fn(g, hump);
    let m0 = surface_mass(&s);
    assert!((m0 - 2.0).abs() < 1e-6);
    for t in [1.0, 5.0, 20.0] {
        let out = propagate_trace(&s, t, 1.0).unwrap();
        let expected = mode_response(t, 0.0, 1.0).unwrap() * m0;
        let m = surface_mass(&out);
        assert!((m - expected).abs() < 0.01 * expected, "t {t}: {m} vs {expected}");
    }
}

#[test]
fn propagated_trace_of_compact_data_decays_at_least_like_t_to_minus_1_35() {
    let g = HalfPlaneGrid::new(200.0, 1.0, 801, 3).unwrap();
    let s = BoundaryTrace::from_fn(g, hump);
    let a = trace_sup_norm(&propagate_trace(&s, 10.0, 1.0).unwrap());
    let b = trace_sup_norm(&propagate_trace(&s, 40.0, 1.0).unwrap());
    let slope = (b / a).ln() / 4f64.ln();
    assert!(slope <= -1.35, "{slope}");
}

#[test]
fn kernel_is_even_and_decreases_with_mu() {
    let t = 2.0;
    for x in [0.0, 0.7, 3.0] {
        let a = inverse_kernel(t, x, 0.5).unwrap();
        assert!((a - inverse_kernel(t, -x, 0.5).unwrap()).abs() < 1e-14);
    }
    let k = |mu: f64| inverse_kernel(t, 0.0, mu).unwrap();
    let ks: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|&m| k(m)).collect();
    assert!(ks.windows(2).all(|w| w[1] < w[0]), "{ks:?}");
    assert!(ks.iter().all(|&v| v > 0.0));
}

#[test]
fn q2_matches_gaussian_image_solution() {
    let g = HalfPlaneGrid::new(20.0, 20.0, 161, 161).unwrap();
    let (s, y0) = (0.5, 3.0);
    let gauss = |x: f64, y: f64, w: f64| (-(x * x + y * y) / (4.0 * w)).exp();
    let q0 = ScalarField::from_fn(g, |x, y| gauss(x, y - y0, s) - gauss(x, y + y0, s));
    for t in [0.5, 2.0, 5.0] {
        let q = q2_solution(&q0, t).unwrap();
        let w = s + t;
        let mut worst = 0.0f64;
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let (x, y) = (g.x(i), g.y(j));
                let exact = s / w * (gauss(x, y - y0, w) - gauss(x, y + y0, w));
                worst = worst.max((q.at(i, j) - exact).abs());
            }
        }
        assert!(worst < 1e-4, "t {t}: {worst:e}");
        let flux = q2_boundary_flux(&q0, t).unwrap();
        let mut worst = 0.0f64;
        for i in 0..g.nx() {
            let x = g.x(i);
            let exact = s * y0 / (w * w) * gauss(x, y0, w);
            worst = worst.max((flux.as_slice()[i] - exact).abs());
        }
        assert!(worst < 1e-4, "flux t {t}: {worst:e}");
        assert!(q.values().iter().all(|v| v.is_finite()));
    }
}

fn envelope_fixture() -> (SteadyProfile, dynbc_core::dynamics::InitialData, dynbc_core::dynamics::Trajectory) {
    let g = HalfPlaneGrid::new(40.0, 10.0, 161, 41).unwrap();
    let p = DoubleWellPotential::cosine();
    let prof = SteadyProfile::closed_form(g).unwrap();
    let init = initial_data(
        &prof,
        &InitialKind::Perturbed {
            bump: Bump {
                amplitude: 0.2,
                ..Bump::default()
            },
        },
    )
    .unwrap();
    let traj = evolve(&init.field, &p, &SchemeConfig::new(0.1, Scheme::SemiImplicit), 10.0, 1.0).unwrap();
    (prof, init, traj)
}

#[test]
fn envelope_violation_is_monotone_in_speed_and_damping() {
    let (prof, init, traj) = envelope_fixture();
    let base = EnvelopeParams {
        xi1: init.xi1,
        xi2: init.xi2,
        m: 0.0,
        c: 1.0,
    };
    let v = |params: EnvelopeParams| envelope_check(&traj, &prof, &init.q0, &params, 0.0).unwrap().interior_violation();
    let by_m: Vec<f64> = [0.0, 0.05, 0.2, 1.0].iter().map(|&m| v(EnvelopeParams { m, ..base })).collect();
    assert!(by_m.windows(2).all(|w| w[1] <= w[0]), "{by_m:?}");
    let by_c: Vec<f64> = [0.1, 1.0, 10.0].iter().map(|&c| v(EnvelopeParams { c, ..base })).collect();
    assert!(by_c.windows(2).all(|w| w[1] >= w[0]), "{by_c:?}");
}

#[test]
fn stationary_profile_sits_inside_its_own_envelope() {
    let g = HalfPlaneGrid::new(40.0, 10.0, 161, 41).unwrap();
    let p = DoubleWellPotential::cosine();
    let prof = SteadyProfile::closed_form(g).unwrap();
    let traj = evolve(&prof.field, &p, &SchemeConfig::new(0.1, Scheme::SemiImplicit), 5.0, 1.0).unwrap();
    let params = EnvelopeParams {
        xi1: 0.5,
        xi2: 0.5,
        m: 0.0,
        c: 1.0,
    };
    let r = envelope_check(&traj, &prof, &ScalarField::zeros(g), &params, 0.0).unwrap();
    assert!(r.interior_violation() == 0.0, "{r:?}");
    assert_eq!(r.times_checked.len(), traj.snapshots.len());
}
