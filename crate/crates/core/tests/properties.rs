use nalgebra::DVector;
use proptest::prelude::*;

use singode::builtins::{analytic_oracle, load_example};
use singode::manifolds::{decompose_orbit, uniformly_stable_manifold, DecomposeOptions, StableOptions};
use singode::navier_stokes::{ns_profile_ode, GasModel};
use singode::singular::{eval_singular_rhs, integrate_singular, time_rescale, Output, SingularOptions};

fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-1.0f64..1.0, n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rhs_times_zeta_is_f(u in state(3), name in prop::sample::select(vec!["linear_slaving", "rotation"])) {
        let sys = load_example(name).unwrap();
        let mut u = DVector::from_vec(u);
        u[2] = 0.05 + u[2].abs();
        let rhs = eval_singular_rhs(&sys.spec, &u, 1e-12).unwrap();
        let f = sys.spec.f(&u);
        prop_assert!((rhs * sys.spec.zeta(&u) - &f).amax() <= 1e-15 * (1.0 + f.amax()));
    }

    #[test]
    fn jacobians_agree_with_finite_differences(u in state(5)) {
        let ode = ns_profile_ode(&GasModel::default(), 0.0, 1.0, 1.0).unwrap();
        let mut u = DVector::from_vec(u);
        u[0] = 1.0 + 0.5 * u[0];
        u[2] = 1.0 + 0.5 * u[2];
        let a = ode.spec.jacobian_analytic(&u);
        let fd = ode.spec.jacobian_fd(&u);
        prop_assert!((&a - &fd).amax() < 1e-7 * (1.0 + a.amax()), "{a} vs {fd}");
        let g = ode.spec.flux_gradient_analytic(&u);
        let gfd = ode.spec.flux_gradient_fd(&u);
        prop_assert!((&g - &gfd).amax() < 1e-7 * (1.0 + g.amax()));
    }

    #[test]
    fn tighter_tolerance_is_closer_to_the_oracle(u1 in 0.1f64..1.0, u2 in -1.0f64..1.0, eps in 0.05f64..1.0) {
        let sys = load_example("linear_slaving").unwrap();
        let u0 = DVector::from_vec(vec![u1, u2, eps]);
        let err = |rtol: f64| {
            let opts = SingularOptions::with_tolerances(rtol, rtol * 1e-3).output(Output::Uniform(0.1)).without_equilibrium_stop();
            let traj = integrate_singular(&sys.spec, &u0, 1.0, &opts).unwrap();
            traj.samples
                .iter()
                .map(|s| (&s.u - analytic_oracle("linear_slaving", s.t, &u0).unwrap()).amax())
                .fold(0.0, f64::max)
        };
        let (loose, tight) = (err(1e-5), err(1e-10));
        prop_assert!(tight <= loose, "{tight} > {loose}");
        prop_assert!(tight < 1e-8);
    }

    #[test]
    fn time_map_is_monotone(u in state(2), eps in 1e-3f64..1.0) {
        let sys = load_example("rotation").unwrap();
        let u0 = DVector::from_vec(vec![u[0], u[1], eps]);
        let traj = integrate_singular(&sys.spec, &u0, 1.0, &SingularOptions::default().without_equilibrium_stop()).unwrap();
        let map = time_rescale(&traj).unwrap();
        prop_assert!(map.is_strictly_increasing());
        prop_assert!((traj.last().tau - 1.0 / eps).abs() < 1e-8 / eps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decomposition_parts_sum_to_the_orbit(u1 in -1.0f64..1.0, u2 in -1.0f64..1.0, eps in 0.02f64..0.5) {
        let sys = load_example("linear_slaving").unwrap();
        let bundle = uniformly_stable_manifold(&sys.spec, &sys.equilibrium_manifold(), 4, &StableOptions::default()).unwrap();
        let u0 = DVector::from_vec(vec![u1, u2, eps]);
        let opts = SingularOptions::with_tolerances(1e-12, 1e-15).output(Output::Uniform(0.05)).without_equilibrium_stop();
        let traj = integrate_singular(&sys.spec, &u0, 1.5, &opts).unwrap();
        let dec = decompose_orbit(&sys.spec, &bundle, &traj, &DecomposeOptions::default()).unwrap();
        for (i, s) in traj.samples.iter().enumerate() {
            let sum = &dec.slow[i] + &dec.fast[i] + &dec.pert[i];
            prop_assert!((sum - &s.u).amax() < 1e-14);
        }
        prop_assert!(dec.max_pert < 1e-10);
    }
}
