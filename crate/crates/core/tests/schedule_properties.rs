use collabsgd::schedules::{
    alpha_opt_wga_general, alpha_opt_wga_m0, beta_bc, eta_bc, eta_decreasing_pl, eta_wga_nonconvex,
    eta_wga_pl, speedup_factor, tau_objective, tau_qp, PlTradeoff, ScheduleInputs,
};
use collabsgd::SimilarityParams;
use proptest::prelude::*;

/// Grid minimum of the QP objective: step 1e-2 over the simplex, then 1e-4
/// around the best coarse point.
fn grid_min(s: &[f64], z: &[f64], coeff: f64) -> f64 {
    let f = |t: &[f64]| tau_objective(t, s, z, coeff);
    match s.len() {
        2 => (0..=10_000)
            .map(|i| {
                let a = i as f64 * 1e-4;
                f(&[a, 1.0 - a])
            })
            .fold(f64::INFINITY, f64::min),
        3 => {
            let mut best = (f64::INFINITY, 0.0, 0.0);
            for i in 0..=100 {
                for j in 0..=(100 - i) {
                    let (a, b) = (i as f64 * 1e-2, j as f64 * 1e-2);
                    let v = f(&[a, b, (1.0 - a - b).max(0.0)]);
                    if v < best.0 {
                        best = (v, a, b);
                    }
                }
            }
            let (_, a0, b0) = best;
            let mut fine = best.0;
            for i in -100..=100 {
                for j in -100..=100 {
                    let a = a0 + i as f64 * 1e-4;
                    let b = b0 + j as f64 * 1e-4;
                    if a < 0.0 || b < 0.0 || a + b > 1.0 {
                        continue;
                    }
                    fine = fine.min(f(&[a, b, 1.0 - a - b]));
                }
            }
            fine
        }
        _ => unreachable!(),
    }
}

fn inputs(l: f64, mu: f64, m: f64, zeta_sq: f64, delta: f64) -> ScheduleInputs<f64> {
    ScheduleInputs {
        sim: SimilarityParams::from_constants(l, mu, m, zeta_sq, delta, 0.0),
        horizon: 1000,
        f0_gap: 1.0,
        sigma0_sq: 1.0,
        sigma_a_sq: 0.5,
        alpha: 0.3,
        oracle_var: 0.0,
        grad0_sq: 1.0,
        n: 1,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tau_qp_beats_grid(
        n in 2usize..=3,
        s in prop::collection::vec(0.0f64..5.0, 3),
        z in prop::collection::vec(0.0f64..5.0, 3),
        coeff in 0.0f64..10.0,
    ) {
        let (s, z) = (&s[..n], &z[..n]);
        let tau = tau_qp(s, z, coeff).unwrap();
        let sum: f64 = tau.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(tau.iter().all(|&t| t >= 0.0));
        let got = tau_objective(&tau, s, z, coeff);
        prop_assert!(got <= grid_min(s, z, coeff) + 1e-4);
    }

    #[test]
    fn every_step_size_respects_smoothness(
        l in 0.1f64..10.0,
        mu_frac in 0.01f64..1.0,
        sigma0_sq in 0.0f64..100.0,
        f0 in 0.0f64..100.0,
        alpha in 0.0f64..1.0,
        delta in 0.0f64..5.0,
        horizon in 1u64..100_000,
    ) {
        let mut inp = inputs(l, l * mu_frac, 0.0, 1.0, delta);
        inp.sigma0_sq = sigma0_sq;
        inp.f0_gap = f0;
        inp.alpha = alpha;
        inp.horizon = horizon;
        let cap = 1.0 / l;
        prop_assert!(eta_wga_nonconvex(&inp).unwrap() <= cap);
        prop_assert!(eta_wga_pl(&inp).unwrap() <= cap);
        prop_assert!(eta_bc(&inp).unwrap() <= cap);
        for t in [0, 1, 10, 1000] {
            prop_assert!(eta_decreasing_pl(t, &inp, 2.0).unwrap() <= cap);
        }
    }

    #[test]
    fn alpha_opt_monotone(
        n in 1usize..50,
        zeta_sq in 0.0f64..10.0,
        sigma0_sq in 0.1f64..10.0,
        horizon in 1u64..10_000,
    ) {
        let a = alpha_opt_wga_m0(n, 1.0, 2.0, zeta_sq, sigma0_sq, horizon).unwrap();
        let more_bias = alpha_opt_wga_m0(n, 1.0, 2.0, zeta_sq * 2.0 + 0.1, sigma0_sq, horizon).unwrap();
        let longer = alpha_opt_wga_m0(n, 1.0, 2.0, zeta_sq + 0.1, sigma0_sq, horizon * 2).unwrap();
        let base = alpha_opt_wga_m0(n, 1.0, 2.0, zeta_sq + 0.1, sigma0_sq, horizon).unwrap();
        let more_agents = alpha_opt_wga_m0(n + 1, 1.0, 2.0, zeta_sq, sigma0_sq, horizon).unwrap();
        prop_assert!(a > 0.0 && a < 1.0);
        prop_assert!(more_bias < a);
        prop_assert!(longer < base);
        prop_assert!(more_agents > a);
    }

    #[test]
    fn beta_monotone(delta in 0.01f64..3.0, eta in 1e-6f64..1e-2) {
        let b = beta_bc(&inputs(1.0, 1.0, 0.0, 1.0, delta), eta);
        let more_delta = beta_bc(&inputs(1.0, 1.0, 0.0, 1.0, delta * 1.5), eta);
        let more_eta = beta_bc(&inputs(1.0, 1.0, 0.0, 1.0, delta), eta * 1.5);
        if b < 1.0 {
            prop_assert!(more_delta > b);
            prop_assert!(more_eta > b);
        } else {
            prop_assert!(more_delta == 1.0 && more_eta == 1.0);
        }
    }

    #[test]
    fn linear_speedup_without_bias(n in 1usize..1000) {
        let a = alpha_opt_wga_m0(n, 1.0, 1.0, 0.0, 3.0, 100).unwrap();
        prop_assert!((speedup_factor(a).unwrap() - (n as f64 + 1.0)).abs() <= 1e-9 * n as f64);
    }

    #[test]
    fn general_alpha_reduces_to_closed_form(
        n in 1usize..200,
        zeta_sq in 0.0f64..1e-2,
        sigma_sq in 0.1f64..10.0,
        horizon in 10u64..1000,
    ) {
        let p = PlTradeoff { m: 0.0, zeta_sq, sigma0_sq: sigma_sq, sigma1_sq: sigma_sq, mu: 1.0, l: 1.0, t: horizon, n };
        let closed = alpha_opt_wga_m0(n, 1.0, 1.0, zeta_sq, sigma_sq, horizon).unwrap();
        prop_assert!((alpha_opt_wga_general(&p) - closed).abs() < 1e-6);
    }
}

#[test]
fn qp_limit_puts_mass_on_smallest_offset() {
    let s = [1.0, 2.0, 0.5];
    let z = [3.0, 0.5, 2.0];
    let tau = tau_qp(&s, &z, 1e-9).unwrap();
    assert!(tau[1] > 1.0 - 1e-6);
}

#[test]
fn sublinear_speedup_with_mismatch() {
    let speedup = |m: f64, n: usize| {
        PlTradeoff { m, zeta_sq: 0.0, sigma0_sq: 1.0, sigma1_sq: 1.0, mu: 1.0, l: 1.0, t: 1000, n }.speedup()
    };
    for n in [1, 10, 100] {
        assert!((speedup(0.0, n) - (n as f64 + 1.0)).abs() < 1e-6);
        assert!(speedup(0.5, n) < n as f64 + 1.0);
        assert!(speedup(2.0, n) < speedup(0.5, n));
    }
}
