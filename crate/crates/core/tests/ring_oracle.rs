//! Simulation-oracle equivalence on the ring: the event-driven process
//! reproduces the exact absorption-time law of the dense sub-generator.

use cpsim_core::estimators::sample_absorptions;
use cpsim_core::lattice::{Site, Window};
use cpsim_core::oracle::{build_chain, AbsorptionCdf};
use cpsim_core::process::{Absorption, Configuration};
use cpsim_core::stats::ks_test;

#[test]
fn ring_absorption_law_matches_exact_cdf() {
    let n = 5;
    let lambda = 0.6;
    let window = Window::ring(n);
    let origin = Configuration::singleton(Site(vec![0]));
    let chain = build_chain(n, lambda).unwrap();
    let cdf = AbsorptionCdf::new(&chain, 200.0);
    let samples =
        sample_absorptions(&window, lambda, 200.0, 4242, 0..10_000, &origin).unwrap();
    let times: Vec<f64> = samples
        .iter()
        .map(|s| match s.absorption {
            Absorption::Absorbed(t) => t,
            Absorption::SurvivedToHorizon => panic!("horizon too short"),
        })
        .collect();
    let report = ks_test("ring absorption", &times, |x| cdf.eval(x), 0.01).unwrap();
    assert!(report.passed, "{report:?}");
}

#[test]
fn sim_params_validation() {
    use cpsim_core::graphical::SimParams;
    let good = SimParams {
        dim: 1,
        lambda: 1.0,
        horizon: 4.0,
        window_radius: 30,
        beta: 2.0,
        seed: 1,
        replica_index: 0,
        margin: None,
    };
    assert!(good.validate().is_ok());
    assert!(good.validate_subcritical().is_ok());

    let mut supercritical = good.clone();
    supercritical.lambda = 1.7;
    assert!(supercritical.validate().is_ok());
    assert!(supercritical.validate_subcritical().is_err());

    let mut thin_window = good.clone();
    thin_window.window_radius = 10; // below ⌈βt⌉ + margin = 8 + 16
    assert!(thin_window.validate_subcritical().is_err());

    let mut bad_lambda = good;
    bad_lambda.lambda = 0.0;
    assert!(bad_lambda.validate().is_err());
}
