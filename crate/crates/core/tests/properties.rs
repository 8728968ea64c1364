//! Randomised properties of the assembled scalar operator.

use mfd_core::analyze::certify_monotone;
use mfd_core::assembly::{discretize, Field, ProblemSpec};
use mfd_core::dualmesh::{build_hexagon_mesh, build_square_mesh};
use mfd_core::solve::{solve, SolveOptions};
use proptest::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Debug)]
struct Smooth {
    alpha: f64,
    a: f64,
    b: f64,
    c: f64,
    k: f64,
    swirl: f64,
    gamma: f64,
}

fn smooth() -> impl Strategy<Value = Smooth> {
    (
        -4.0..0.0f64,
        -3.0..3.0f64,
        -3.0..3.0f64,
        -1.0..1.0f64,
        1.0..4.0f64,
        -2.0..2.0f64,
        prop_oneof![Just(0.0), Just(1.0)],
    )
        .prop_map(|(e, a, b, c, k, swirl, gamma)| Smooth {
            alpha: 10f64.powf(e),
            a,
            b,
            c,
            k,
            swirl,
            gamma,
        })
}

/// `beta = alpha grad phi + rot psi` with `psi = swirl sin(pi x) sin(pi y)`,
/// unit source and zero data, so the solution is nonnegative.
fn spec(s: &Smooth) -> ProblemSpec {
    let Smooth {
        alpha,
        a,
        b,
        c,
        k,
        swirl,
        gamma,
    } = s.clone();
    let phi = move |p: [f64; 2]| (a * p[0] + b * p[1] + c * (k * p[0]).sin() * (k * p[1]).cos()) / alpha;
    let grad = move |p: [f64; 2]| {
        [
            a + c * k * (k * p[0]).cos() * (k * p[1]).cos(),
            b - c * k * (k * p[0]).sin() * (k * p[1]).sin(),
        ]
    };
    let rot = move |p: [f64; 2]| {
        [
            swirl * PI * (PI * p[0]).sin() * (PI * p[1]).cos(),
            -swirl * PI * (PI * p[0]).cos() * (PI * p[1]).sin(),
        ]
    };
    let beta = move |p: [f64; 2]| {
        let (g, r) = (grad(p), rot(p));
        [g[0] + r[0], g[1] + r[1]]
    };
    let spec = ProblemSpec::scalar(move |_| alpha, beta, move |_| gamma, |_| 1.0, phi);
    if swirl.abs() > 0.5 {
        spec.with_rot_part(rot)
    } else {
        spec
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 20, ..ProptestConfig::default() })]

    #[test]
    fn smooth_potentials_give_monotone_systems(s in smooth()) {
        let mesh = build_square_mesh(3).unwrap();
        let d = discretize(&mesh, &spec(&s)).unwrap();
        let rep = certify_monotone(&d.system, 2000, 0.0, f64::INFINITY).unwrap();
        prop_assert!(rep.is_z_matrix, "{s:?}");
        prop_assert!(rep.monotone, "{s:?}: {rep:?}");
        prop_assert!(rep.min_solution_value >= -1e-10, "{s:?}");
    }

    #[test]
    fn constant_shift_of_the_potential_is_invisible(shift in -50.0..50.0f64, e in -3.0..0.0f64) {
        let alpha = 10f64.powf(e);
        let make = move |c: f64| {
            ProblemSpec::scalar(
                move |_| alpha,
                |p| [1.0 + p[1], 0.5 - p[0]],
                |_| 0.0,
                |p| 1.0 + p[0] * p[0],
                move |p| (p[0] + 0.5 * p[0] * p[1] + 0.5 * p[1] - 0.25 * p[0] * p[0] + c) / alpha,
            )
            .with_dirichlet(Field::scalar(|p| p[0] - p[1]))
        };
        let mesh = build_hexagon_mesh(2);
        let opts = SolveOptions::default();
        let u = solve(&discretize(&mesh, &make(0.0)).unwrap().system, &opts).unwrap().solution.values;
        let v = solve(&discretize(&mesh, &make(shift)).unwrap().system, &opts).unwrap().solution.values;
        let scale = u.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let diff = u.iter().zip(&v).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(diff <= 1e-9 * scale, "shift {shift}, alpha {alpha}: {diff:e}");
    }
}
