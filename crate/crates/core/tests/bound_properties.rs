use collabsgd::bounds::{bound_bc, bound_oracle_nonconvex, bound_oracle_pl, bound_wga_nonconvex, bound_wga_pl, BoundInputs};
use collabsgd::schedules::ScheduleInputs;
use collabsgd::SimilarityParams;
use proptest::prelude::*;

#[allow(clippy::too_many_arguments)]
fn inputs(delta: f64, e0: f64, s0: f64, sa: f64, grad0_sq: f64, zeta_sq: f64, alpha: f64, eta: f64) -> BoundInputs<f64> {
    BoundInputs {
        sched: ScheduleInputs {
            sim: SimilarityParams::from_constants(1.0, 0.5, 0.0, zeta_sq, delta, 0.0),
            horizon: 500,
            f0_gap: 3.0,
            sigma0_sq: s0,
            sigma_a_sq: sa,
            alpha,
            oracle_var: 0.0,
            grad0_sq,
            n: 1,
        },
        e0,
        beta: 0.1,
        eta,
        c: 2.0,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bc_bound_monotone(
        delta in 0.01f64..1.0,
        e0 in 0.0f64..10.0,
        s0 in 0.01f64..10.0,
        sa in 0.01f64..10.0,
        g0 in 0.0f64..10.0,
        zeta_sq in 0.0f64..10.0,
        alpha in 0.05f64..1.0,
        eta in 1e-5f64..1e-2,
    ) {
        let base = inputs(delta, e0, s0, sa, g0, zeta_sq, alpha, eta);
        let b = bound_bc(&base).unwrap();
        prop_assert!(b.is_finite() && b > 0.0);
        let k = 1.3;
        let bumped = [
            inputs(delta * k, e0, s0, sa, g0, zeta_sq, alpha, eta),
            inputs(delta, e0 * k + 0.1, s0, sa, g0, zeta_sq, alpha, eta),
            inputs(delta, e0, s0 * k, sa, g0, zeta_sq, alpha, eta),
            inputs(delta, e0, s0, sa * k, g0, zeta_sq, alpha, eta),
            inputs(delta, e0, s0, sa, g0 * k + 0.1, zeta_sq, alpha, eta),
            inputs(delta, e0, s0, sa, g0, zeta_sq * k + 0.1, alpha, eta),
        ];
        for inp in bumped {
            prop_assert!(bound_bc(&inp).unwrap() > b);
        }
    }

    #[test]
    fn wga_pl_bound_monotone(zeta_sq in 0.0f64..10.0, s0 in 0.0f64..10.0, alpha in 0.0f64..0.9) {
        let b = bound_wga_pl(&inputs(0.0, 0.0, s0, 1.0, 0.0, zeta_sq, alpha, 0.01)).unwrap();
        let more_zeta = bound_wga_pl(&inputs(0.0, 0.0, s0, 1.0, 0.0, zeta_sq + 1.0, alpha, 0.01)).unwrap();
        let more_noise = bound_wga_pl(&inputs(0.0, 0.0, s0 + 1.0, 1.0, 0.0, zeta_sq, alpha, 0.01)).unwrap();
        prop_assert!(more_zeta >= b);
        prop_assert!(more_noise > b);
    }

    #[test]
    fn variance_terms_scale(s in 0.1f64..10.0, alpha in 0.0f64..0.9) {
        // F_0 = 0 and zeta = 0 leave only variance terms
        let mut base = inputs(0.0, 0.0, 2.0, 1.0, 0.0, 0.0, alpha, 0.01);
        base.sched.f0_gap = 0.0;
        let mut scaled = base.clone();
        scaled.sched.sigma0_sq *= s * s;
        scaled.sched.sigma_a_sq *= s * s;
        let ratio = |f: fn(&BoundInputs<f64>) -> collabsgd::Result<f64>| f(&scaled).unwrap() / f(&base).unwrap();
        prop_assert!((ratio(bound_wga_pl) - s * s).abs() < 1e-9 * s * s);
        prop_assert!((ratio(bound_oracle_pl) - s * s).abs() < 1e-9 * s * s);
        prop_assert!((ratio(bound_bc) - s * s).abs() < 1e-9 * s * s);

        // the square-root term of the non-convex bounds scales with s
        let mut b2 = base.clone();
        b2.sched.f0_gap = 2.0;
        let mut s2 = scaled.clone();
        s2.sched.f0_gap = 2.0;
        let mut none = b2.clone();
        none.sched.sigma0_sq = 0.0;
        none.sched.sigma_a_sq = 0.0;
        for f in [bound_wga_nonconvex as fn(&BoundInputs<f64>) -> collabsgd::Result<f64>, bound_oracle_nonconvex] {
            let fixed = f(&none).unwrap();
            let r = (f(&s2).unwrap() - fixed) / (f(&b2).unwrap() - fixed);
            prop_assert!((r - s).abs() < 1e-9 * s);
        }
    }
}

#[test]
fn alone_limits_agree() {
    let inp = inputs(0.0, 0.0, 4.0, 1.0, 0.0, 0.0, 0.0, 0.05);
    let a = bound_oracle_pl(&inp).unwrap();
    let b = bound_wga_pl(&inp).unwrap();
    assert!((a - b).abs() <= 1e-14 * a);
}

#[test]
fn bc_bias_term_decays_with_horizon() {
    let short = inputs(0.5, 0.0, 1.0, 1.0, 0.0, 100.0, 0.8, 1e-3);
    let mut long = short.clone();
    long.sched.horizon *= 1000;
    let mut unbiased = long.clone();
    unbiased.sched.sim.grad_offset_sq = 0.0;
    let gap_long = bound_bc(&long).unwrap() - bound_bc(&unbiased).unwrap();
    let mut unbiased_short = short.clone();
    unbiased_short.sched.sim.grad_offset_sq = 0.0;
    let gap_short = bound_bc(&short).unwrap() - bound_bc(&unbiased_short).unwrap();
    assert!(gap_long < gap_short / 10.0);
}
