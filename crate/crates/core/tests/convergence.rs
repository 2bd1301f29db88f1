use biot_core::diagnostics::{mms_convergence, LadderKind, MmsCase};
use biot_core::permeability::PermeabilityLaw;

fn exp_law() -> PermeabilityLaw {
    PermeabilityLaw::clamped_exponential(1.0, 0.25, 0.2, 5.0).unwrap()
}

#[test]
fn spatial_order_2d_constant_law() {
    let case = MmsCase::standard_2d(1.0, PermeabilityLaw::constant(1.0).unwrap()).unwrap();
    let t = mms_convergence(&case, &[(4, 1.0 / 8.0), (8, 1.0 / 32.0), (16, 1.0 / 128.0)], LadderKind::Spatial, 1.0, 1e-10).unwrap();
    println!("{}", t.to_csv());
    for o in t.orders_p() {
        assert!((o - 2.0).abs() <= 0.3, "{o}");
    }
}

#[test]
fn spatial_order_2d_exponential_law() {
    let case = MmsCase::standard_2d(1.0, exp_law()).unwrap();
    let t = mms_convergence(&case, &[(4, 1.0 / 8.0), (8, 1.0 / 32.0), (16, 1.0 / 128.0)], LadderKind::Spatial, 1.0, 1e-10).unwrap();
    println!("{}", t.to_csv());
    for o in t.orders_p() {
        assert!((o - 2.0).abs() <= 0.3, "{o}");
    }
}

#[test]
fn temporal_order_1d_exponential_law() {
    let case = MmsCase::standard_1d(1.0, exp_law()).unwrap();
    let t = mms_convergence(&case, &[(64, 1.0 / 8.0), (64, 1.0 / 16.0), (64, 1.0 / 32.0)], LadderKind::Temporal, 1.0, 1e-10).unwrap();
    println!("{}", t.to_csv());
    for o in t.orders_p() {
        assert!((o - 1.0).abs() <= 0.2, "{o}");
    }
}
