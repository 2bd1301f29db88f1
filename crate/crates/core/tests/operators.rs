use biot_core::evolution::energy_audit_linear;
use biot_core::expr::Expr;
use biot_core::scenario::InitialContent;
use biot_core::{Discretization, EvolutionContext, PermeabilityLaw, PicardOptions, ScalarField, Scenario};
use proptest::prelude::*;

// In 1D, −(3u′)′ = −p′ with u(0) = u(1) = 0 gives ∇·u = (p − p̄)/3.
#[test]
fn one_dimensional_b_is_mean_free_third() {
    let mut prev = f64::INFINITY;
    for n in [16, 32, 64] {
        let disc = Discretization::new(1, n).unwrap();
        let p = ScalarField::interpolate_constrained(&disc.mesh, &disc.scalar, |x| {
            (std::f64::consts::PI * x[0]).sin() + x[0] * (1.0 - x[0])
        });
        let mean = 2.0 / std::f64::consts::PI + 1.0 / 6.0;
        let bp = disc.b.apply(&p);
        let exact = ScalarField::interpolate(&disc.mesh, |x| {
            ((std::f64::consts::PI * x[0]).sin() + x[0] * (1.0 - x[0]) - mean) / 3.0
        });
        let err = disc.l2_norm(&ScalarField::new(&bp.values - &exact.values));
        assert!(err < 0.5 / (n * n) as f64 + 0.05 / n as f64, "n = {n}: {err}");
        assert!(err < prev);
        prev = err;
    }
}

#[test]
fn pencil_spectrum_is_bounded_by_inf_sup() {
    // 0 ≤ (Bp, p) ≤ ‖p‖² / (λ + 2μ) in 1D, so eigenvalues lie in [0, 1/3]
    let disc = Discretization::new(1, 9).unwrap();
    let ev = disc.b.pencil_spectrum().unwrap();
    assert!(ev[0] > -1e-12);
    assert!(*ev.last().unwrap() <= 1.0 / 3.0 + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn energy_inequality_holds(
        c0 in prop_oneof![Just(0.0), 0.01f64..2.0],
        k in 0.3f64..3.0,
        a in -5.0f64..5.0,
        b in -2.0f64..2.0,
        f in -2.0f64..2.0,
        d in 0.0f64..1.0,
    ) {
        let d0 = if c0 > 0.0 { format!("{d:.6}*sin(pi*x)") } else { "0".to_string() };
        let sc = Scenario::new(1, 12, 1.0, 0.125, c0, PermeabilityLaw::constant(k).unwrap())
            .with_source(Expr::parse(&format!("{a:.6}*sin(2*pi*x)*(1+{b:.6}*t)")).unwrap())
            .with_force([Expr::parse(&format!("{f:.6}*x*t")).unwrap(), Expr::num(0.0)])
            .with_d0(InitialContent::Analytic(Expr::parse(&d0).unwrap()));
        let disc = Discretization::new(1, 12).unwrap();
        let ctx = EvolutionContext::new(&disc, &sc).unwrap();
        let out = biot_core::picard_solve_with(&ctx, PicardOptions::default()).unwrap();
        let audit = energy_audit_linear(&ctx, &out.trajectory).unwrap();
        prop_assert!(audit.passed, "violation {}", audit.max_violation);
        prop_assert_eq!(out.iterations(), 2);
    }
}
