use isr_core::losses::{modulated_grad_p, modulated_loss, rc_batch_loss};
use isr_core::verify::{curve_suite, gradient_suite, loss_curves, slump_root};
use isr_core::Modulation;
use proptest::prelude::*;

#[test]
fn finite_differences_over_500_configurations() {
    let out = gradient_suite(500, 11, 1e-5, 1e-4);
    for s in out.suites() {
        assert!(s.passed(), "{}: {:?}", s.name, s.failures);
        assert_eq!(s.checks, 500);
    }
    assert!(out.rc_stopgrad.worst < 1e-5);
    assert!(out.pipeline.worst < 1e-4);
}

#[test]
fn curve_properties() {
    let curves = loss_curves(&[0.0, 2.0, 4.0, 6.0, 8.0]);
    assert_eq!(curves.len(), 5000);
    let out = curve_suite(&curves, 5);
    assert!(out.passed(), "{:?}", out.failures);
}

#[test]
fn suppression_values() {
    let g = |gamma: f64, p: f64| modulated_grad_p(Modulation::ReliabilityStopgrad, p, p.ln(), gamma).abs();
    assert!((g(6.0, 0.1) - 1e-5).abs() < 1e-18);
    assert!((g(6.0, 0.9) - 0.59049).abs() < 1e-12);
    assert!((g(0.0, 0.1) - 10.0).abs() < 1e-12);
}

#[test]
fn kept_gradient_root_positions() {
    for (gamma, expected) in [(2.0, 0.606_530_659_712_633), (6.0, 0.846_481_724_890_614), (8.0, 0.882_496_902_584_595)] {
        assert!((slump_root(gamma) - expected).abs() < 1e-9);
    }
}

#[test]
fn gamma_zero_is_cross_entropy() {
    let p: f64 = 0.37;
    let lp = p.ln();
    assert_eq!(modulated_loss(Modulation::ReliabilityStopgrad, p, lp, 0.0), -lp);
    assert_eq!(modulated_loss(Modulation::None, p, lp, 6.0), -lp);
}

proptest! {
    #[test]
    fn rescaled_batch_matches_unmodulated(
        ps in proptest::collection::vec(1e-3f64..1.0, 1..32),
        gamma in 0.0f64..8.0,
    ) {
        let per: Vec<f64> = ps.iter().map(|p| -p.powf(gamma) * p.ln()).collect();
        let zero: Vec<f64> = ps.iter().map(|p| -p.ln()).collect();
        let b = rc_batch_loss(&per, &zero);
        let plain = zero.iter().sum::<f64>() / zero.len() as f64;
        prop_assert!((b.loss - plain).abs() <= 1e-9 * plain.max(1.0));
        prop_assert!(b.alpha >= 1.0 - 1e-12);
    }

    #[test]
    fn stopgrad_magnitude_is_power_law(p in 1e-3f64..1.0, gamma in 0.0f64..8.0) {
        let g = modulated_grad_p(Modulation::ReliabilityStopgrad, p, p.ln(), gamma);
        prop_assert!(g <= 0.0);
        prop_assert!((g.abs() - p.powf(gamma - 1.0)).abs() <= 1e-9 * p.powf(gamma - 1.0));
    }
}
