use cyber_contract::hamiltonian::{
    best_response_alpha, eval_g, eval_g_hat, eval_g_star, g_a_part, g_h_part, CoState, Sym3,
};
use cyber_contract::model::{Coef, Utility, Var};
use cyber_contract::simulate::{simulate_paths, SimConfig};
use cyber_contract::{CyberState, ModelParams};
use proptest::prelude::*;

fn state() -> impl Strategy<Value = CyberState> {
    (0.1f64..10.0, 0.0f64..=1.0, 0.0f64..=1.0).prop_map(|(p, s, f)| CyberState { p, s, i: f * (1.0 - s) })
}

fn costate(marks: usize) -> impl Strategy<Value = CoState> {
    (
        -2.0f64..2.0,
        prop::array::uniform3(-5.0f64..5.0),
        prop::collection::vec(-5.0f64..5.0, marks),
    )
        .prop_map(|(y, z, u)| CoState { y, z, u })
}

fn sym3() -> impl Strategy<Value = Sym3> {
    prop::array::uniform6(-5.0f64..5.0).prop_map(|g| {
        Sym3([[g[0], g[3], g[4]], [g[3], g[1], g[5]], [g[4], g[5], g[2]]])
    })
}

fn h_grid(m: &ModelParams) -> Vec<f64> {
    m.h_set.grid(11)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn epidemic_drift_and_noise_conserve_mass(t in 0.0f64..1.0, x in state(), a in 0.0f64..=2.0, h in 0.0f64..=1.0) {
        let m = ModelParams::default();
        let d = m.eval_drift_continuous(t, &x, a, h).unwrap();
        prop_assert!((d[1] + d[2] + m.recovered_drift(&x, a)).abs() <= 1e-12);
        let v = m.eval_volatility(t, &x, h).unwrap();
        prop_assert_eq!(v[1][0] + v[2][0], 0.0);
        prop_assert_eq!(v[1][1] + v[2][1], 0.0);
    }

    #[test]
    fn coefficients_are_finite(t in 0.0f64..1.0, x in state(), a in 0.0f64..=2.0, h in 0.0f64..=1.0) {
        let m = ModelParams::default();
        prop_assert!(m.eval_agent_cost(t, &x, a).unwrap().is_finite());
        prop_assert!(m.eval_principal_cost(t, &x, h).unwrap().is_finite());
        prop_assert!(m.eval_jump_model(t, &x, h).unwrap().intensities.iter().all(|l| l.is_finite() && *l >= 0.0));
        prop_assert!(m.k_at(t, &x).is_finite());
    }

    #[test]
    fn effort_cost_is_midpoint_convex(t in 0.0f64..1.0, x in state(), a1 in 0.0f64..=2.0, a2 in 0.0f64..=2.0) {
        let m = ModelParams::default();
        let mid = m.effort_cost_at(t, &x, 0.5 * (a1 + a2));
        prop_assert!(mid <= 0.5 * (m.effort_cost_at(t, &x, a1) + m.effort_cost_at(t, &x, a2)) + 1e-15);
    }

    #[test]
    fn principal_terminal_strictly_decreases_in_y(x in state(), y in -3.0f64..3.0, dy in 1e-6f64..1.0, expo in any::<bool>()) {
        let m = ModelParams::default().with(|m| if expo { m.utility = Utility::Exponential });
        let w = y + dy - m.terminal_agent_at(&x);
        prop_assume!(!expo || w < 0.99);
        prop_assert!(m.eval_principal_terminal(&x, y + dy).unwrap() < m.eval_principal_terminal(&x, y).unwrap());
    }

    #[test]
    fn hamiltonian_splits_into_effort_and_hacker_parts(t in 0.0f64..1.0, x in state(), cs in costate(2), a in 0.0f64..=2.0, h in 0.0f64..=1.0) {
        let m = ModelParams::default();
        let g = eval_g(&m, t, &x, &cs, a, h).unwrap();
        let split = g_a_part(&m, t, &x, cs.z[1], a) + g_h_part(&m, t, &x, &cs, h);
        prop_assert!((g - split).abs() <= 1e-12 * (1.0 + g.abs()));
    }

    #[test]
    fn costlier_effort_never_raises_g_star(t in 0.0f64..1.0, x in state(), cs in costate(2), c in 1.0f64..20.0) {
        let m = ModelParams::default();
        let mc = m.clone().with(|m| m.effort_cost = m.effort_cost.scaled(c));
        let hg = h_grid(&m);
        let base = eval_g_star(&m, t, &x, &cs, &hg).value;
        prop_assert!(eval_g_star(&mc, t, &x, &cs, &hg).value <= base + 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn g_hat_is_concave_in_gamma(t in 0.0f64..1.0, x in state(), cs in costate(2), g1 in sym3(), g2 in sym3(), w in 0.0f64..=1.0) {
        let m = ModelParams::default();
        let hg = h_grid(&m);
        let mut mid = Sym3::zero();
        for r in 0..3 {
            for c in 0..3 {
                mid.0[r][c] = w * g1.0[r][c] + (1.0 - w) * g2.0[r][c];
            }
        }
        let v1 = eval_g_hat(&m, t, &x, &cs, &g1, &hg).0;
        let v2 = eval_g_hat(&m, t, &x, &cs, &g2, &hg).0;
        let vm = eval_g_hat(&m, t, &x, &cs, &mid, &hg).0;
        prop_assert!(vm >= w * v1 + (1.0 - w) * v2 - 1e-12 * (1.0 + vm.abs()));
    }

    #[test]
    fn best_response_ignores_the_utility(t in 0.0f64..1.0, x in state(), z in prop::array::uniform3(-5.0f64..5.0)) {
        let m = ModelParams::default();
        let e = m.clone().with(|m| m.utility = Utility::Exponential);
        prop_assert_eq!(best_response_alpha(&m, t, &x, &z), best_response_alpha(&e, t, &x, &z));
        let a = best_response_alpha(&m, t, &x, &z);
        prop_assert!(m.a_set.contains(a));
    }

    #[test]
    fn best_response_beats_every_grid_effort(t in 0.0f64..1.0, x in state(), cs in costate(2)) {
        let m = ModelParams::default().with(|m| m.effort_cost = Coef::quadratic(0.1, &[(Var::A, 0.2)], &[(Var::A, 0.7)]));
        let a = best_response_alpha(&m, t, &x, &cs.z);
        let best = g_a_part(&m, t, &x, cs.z[1], a);
        for b in m.a_set.grid(201) {
            prop_assert!(g_a_part(&m, t, &x, cs.z[1], b) <= best + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn simulated_states_stay_valid_and_reproduce(seed in any::<u64>(), a in 0.0f64..=2.0, h in 0.0f64..=1.0) {
        let m = ModelParams::default();
        let cfg = SimConfig { n_paths: 8, dt: 1.0 / 64.0, seed, ..Default::default() };
        let pa = move |_: f64, x: &CyberState| a * x.i;
        let ph = move |_: f64, _: &CyberState| h;
        let b1 = simulate_paths(&m, &pa, &ph, m.x0, &cfg).unwrap();
        let b2 = simulate_paths(&m, &pa, &ph, m.x0, &cfg).unwrap();
        prop_assert_eq!(&b1, &b2);
        for path in &b1.states {
            for x in path {
                prop_assert!(x.p > 0.0 && x.s >= 0.0 && x.i >= 0.0 && x.s + x.i <= 1.0 + 1e-12);
            }
        }
    }
}
