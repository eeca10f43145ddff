use std::f64::consts::PI;

use dynbc_core::dynamics::{
    energy, evolve, evolve_linear, initial_data, sup_distance_to_profile, Bump, InitialKind, LateralBc, Reaction,
    Scheme, SchemeConfig, Stepper, TopBc,
};
use dynbc_core::grid::{sup_diff, sup_norm, trace, trace_sup_norm, HalfPlaneGrid, ScalarField};
use dynbc_core::potential::DoubleWellPotential;
use dynbc_core::steady::SteadyProfile;

fn grid() -> HalfPlaneGrid {
    HalfPlaneGrid::new(40.0, 10.0, 161, 41).unwrap()
}

#[test]
fn zero_is_a_fixed_point_for_the_cosine_well() {
    let g = HalfPlaneGrid::new(10.0, 5.0, 41, 21).unwrap();
    let p = DoubleWellPotential::cosine();
    for scheme in [Scheme::ExplicitEuler, Scheme::SemiImplicit] {
        let stepper = Stepper::new(g, SchemeConfig::new(0.01, scheme), Reaction::Nonlinear(&p)).unwrap();
        let mut u = ScalarField::zeros(g);
        for _ in 0..20 {
            stepper.step(&mut u).unwrap();
        }
        assert!(u.values().iter().all(|&v| v == 0.0));
    }
}

#[test]
fn closed_form_profile_barely_moves() {
    let g = grid();
    let p = DoubleWellPotential::cosine();
    let prof = SteadyProfile::closed_form(g).unwrap();
    let cfg = SchemeConfig::new(0.05, Scheme::SemiImplicit);
    let stepper = Stepper::new(g, cfg, Reaction::Nonlinear(&p)).unwrap();
    let mut one = prof.field.clone();
    stepper.step(&mut one).unwrap();
    let per_time = sup_diff(&one, &prof.field).unwrap() / cfg.dt;
    let traj = evolve(&prof.field, &p, &cfg, 10.0, 10.0).unwrap();
    let drift = sup_diff(traj.snapshots.last().unwrap(), &prof.field).unwrap();
    assert!(per_time < 0.05, "{per_time}");
    assert!(drift <= 10.0 * per_time, "{drift} vs {per_time}");
}

#[test]
fn odd_data_stays_odd() {
    let g = grid();
    let p = DoubleWellPotential::cosine();
    let u0 = ScalarField::from_fn(g, |x, y| {
        (2.0 / PI * (x / (1.0 + y)).atan() + 0.4 * x * (-(x * x + (y - 1.0).powi(2))).exp()).clamp(-0.999, 0.999)
    });
    let cfg = SchemeConfig::new(0.05, Scheme::SemiImplicit).with_bc(LateralBc::ClampToPlusMinusOne, TopBc::HomogeneousNeumann);
    let traj = evolve(&u0, &p, &cfg, 5.0, 1.0).unwrap();
    for u in &traj.snapshots {
        let v = u.values();
        let n = g.nx();
        let mut worst = 0.0f64;
        for j in 0..g.ny() {
            for i in 0..n {
                worst = worst.max((v[[j, i]] + v[[j, n - 1 - i]]).abs());
            }
        }
        assert!(worst < 1e-12, "t = {}: {worst:e}", u.time());
    }
}

#[test]
fn constructed_data_stays_bounded() {
    let g = grid();
    let p = DoubleWellPotential::cosine();
    let prof = SteadyProfile::closed_form(g).unwrap();
    let init = initial_data(
        &prof,
        &InitialKind::ShiftedPerturbed {
            xi: 1.0,
            bump: Bump {
                amplitude: 0.9,
                ..Bump::default()
            },
        },
    )
    .unwrap();
    let traj = evolve(&init.field, &p, &SchemeConfig::new(0.1, Scheme::SemiImplicit), 10.0, 0.5).unwrap();
    for u in &traj.snapshots {
        assert!(sup_norm(u) <= 1.0 + 1e-12);
    }
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
    assert_eq!(traj.times.len(), traj.energy_history.len());
}

#[test]
fn energy_of_zero_and_log_growth_of_profile_energy() {
    let p = DoubleWellPotential::cosine();
    let g = HalfPlaneGrid::new(30.0, 10.0, 121, 41).unwrap();
    let e0 = energy(&ScalarField::zeros(g), &p).unwrap();
    assert!((e0 - 2.0 * 30.0 * 2.0 / (PI * PI)).abs() < 1e-10, "{e0}");
    let e = |lx: f64| {
        let n = (4.0 * lx) as usize;
        let g = HalfPlaneGrid::new(lx, lx / 2.0, 2 * n + 1, n + 1).unwrap();
        energy(&SteadyProfile::closed_form(g).unwrap().field, &p).unwrap()
    };
    let (a, b, c) = (e(50.0), e(100.0), e(200.0));
    let expected = 2.0 / PI * 2f64.ln();
    for d in [b - a, c - b] {
        assert!((d - expected).abs() < 0.15 * expected, "{a} {b} {c}");
    }
}

#[test]
fn dissipation_of_closed_form_falls_under_refinement() {
    let p = DoubleWellPotential::cosine();
    let coarse = HalfPlaneGrid::new(20.0, 10.0, 81, 41).unwrap();
    let q = |g: HalfPlaneGrid| {
        let cfg = SchemeConfig::new(1e-3, Scheme::SemiImplicit);
        Stepper::new(g, cfg, Reaction::Nonlinear(&p))
            .unwrap()
            .dissipation(&SteadyProfile::closed_form(g).unwrap().field)
            .unwrap()
    };
    let a = q(coarse);
    let b = q(coarse.refined());
    assert!(b < a / 2.0, "{a:e} -> {b:e}");
}

#[test]
fn sup_distance_examples() {
    let g = grid();
    let prof = SteadyProfile::closed_form(g).unwrap();
    let (x0, eps) = sup_distance_to_profile(&prof.shifted(2.5), &prof).unwrap();
    assert!((x0 - 2.5).abs() <= g.dx(), "{x0}");
    assert!(eps < 1e-2, "{eps}");

    let bump = Bump {
        amplitude: 0.1,
        ..Bump::default()
    };
    let mut u = prof.field.clone();
    u.values_mut().zip_mut_with(bump.field(g).values(), |a, b| *a += b);
    let (_, eps) = sup_distance_to_profile(&u, &prof).unwrap();
    assert!((0.05..=0.1 + 1e-3).contains(&eps), "{eps}");

    let (_, eps) = sup_distance_to_profile(&ScalarField::constant(g, 1.0), &prof).unwrap();
    assert!(eps > 1.5 && eps <= 2.0, "{eps}");
}

#[test]
fn explicit_scheme_is_translation_equivariant_in_the_interior() {
    let g = grid();
    let p = DoubleWellPotential::cosine();
    let base = |x: f64, y: f64| (2.0 / PI * ((x - 0.3) / (1.0 + y)).atan() + 0.2 * (-(x * x + y * y)).exp()).clamp(-1.0, 1.0);
    let u0 = ScalarField::from_fn(g, base);
    let v0 = ScalarField::from_fn(g, |x, y| base(x - g.dx(), y));
    let cfg = SchemeConfig::new(0.01, Scheme::ExplicitEuler).with_bc(LateralBc::ClampToPlusMinusOne, TopBc::HomogeneousNeumann);
    let stepper = Stepper::new(g, cfg, Reaction::Nonlinear(&p)).unwrap();
    let (mut u, mut v) = (u0, v0);
    for _ in 0..3 {
        stepper.step(&mut u).unwrap();
        stepper.step(&mut v).unwrap();
    }
    let collar = 4;
    for j in 0..g.ny() - collar {
        for i in collar + 1..g.nx() - collar {
            assert_eq!(v.at(i, j).to_bits(), u.at(i - 1, j).to_bits(), "node ({i}, {j})");
        }
    }
}

#[test]
fn linear_flow_keeps_sign_and_hat_decays() {
    let g = grid();
    let mut q0 = ScalarField::zeros(g);
    let mid = g.nx() / 2;
    for k in 0..5 {
        q0.values_mut()[[0, mid - 2 + k]] = [0.25, 0.5, 1.0, 0.5, 0.25][k];
    }
    let traj = evolve_linear(&q0, 1.0, &SchemeConfig::new(0.05, Scheme::SemiImplicit), 20.0, 0.5, true).unwrap();
    for u in &traj.snapshots {
        assert!(u.values().iter().all(|&v| v >= -1e-14));
    }
    let sups: Vec<f64> = traj.snapshots.iter().map(|u| trace_sup_norm(&trace(u))).collect();
    assert!(sups.windows(2).skip(2).all(|w| w[1] <= w[0]));
}
