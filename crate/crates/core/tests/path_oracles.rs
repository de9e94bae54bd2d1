//! Cross-checks of the path machinery against brute-force enumeration on
//! small random instances.

use cpsim_core::graphical::{
    backward_reachable_set, max_lambda_path_jumps, SpaceTimePoint,
};
use cpsim_core::lattice::{PriorityOrder, Site};
use cpsim_core::process::{evolve_full, Configuration};
use cpsim_core::testkit;
use cpsim_core::workpath::{break_point, minimal_path, verify_open};
use cpsim_core::Error;

#[test]
fn minimal_path_against_enumeration() {
    let order = PriorityOrder::RadialLex;
    let mut produced = 0;
    let mut unique_checked = 0;
    for seed in 0..300u64 {
        let dim = 1 + (seed % 2) as usize;
        let radius = if dim == 1 { 3 } else { 2 };
        let n_events = 4 + (seed % 9) as usize; // ≤ 12 events
        let ev = testkit::random_fixture(seed, dim, radius, 3.0, n_events);
        let w = ev.window().clone();
        let a = Configuration::new(
            (0..w.site_count())
                .filter(|&i| !w.is_boundary(i))
                .map(|i| w.site_at(i))
                .collect(),
        );
        let origin = Site::origin(dim);
        let targets = vec![origin.clone()];
        let index = backward_reachable_set(&ev, &targets, 3.0).unwrap();
        let path = minimal_path(&ev, &a, &index, &order).unwrap();
        let enumerated = testkit::enumerate_open_paths(&ev, &a, &targets, 3.0);
        match path {
            None => assert!(enumerated.is_empty(), "seed {seed}"),
            Some(p) => {
                produced += 1;
                assert!(!enumerated.is_empty(), "seed {seed}");
                assert!(verify_open(&ev, &p), "seed {seed}: path not open");
                assert!(
                    testkit::replay_case_labels(&ev, &p, &a, &targets, 3.0, &order),
                    "seed {seed}: case labels do not replay"
                );
                if enumerated.len() == 1 {
                    unique_checked += 1;
                    let (start, jumps) = enumerated.iter().next().unwrap();
                    assert_eq!(&p.start, start, "seed {seed}");
                    let got: Vec<(Site, u64)> = p
                        .steps
                        .iter()
                        .filter(|s| s.case.is_jump())
                        .map(|s| (s.site.clone(), s.entry_time.to_bits()))
                        .collect();
                    assert_eq!(&got, jumps, "seed {seed}");
                }
            }
        }
    }
    assert!(produced > 100, "only {produced} instances produced a path");
    assert!(unique_checked > 20, "only {unique_checked} unique-path instances");
}

#[test]
fn jump_dp_against_enumeration() {
    let mut checked = 0;
    for seed in 1000..1400u64 {
        let ev = testkit::random_fixture(seed, 1, 4, 3.0, 4 + (seed % 9) as usize);
        let from = SpaceTimePoint::new(Site(vec![0]), 0.0);
        let brute = testkit::brute_max_lambda_jumps(&ev, &from, 3.0);
        let dp = max_lambda_path_jumps(&ev, &from, 3.0);
        match (brute, dp) {
            (Some(b), Ok(d)) => {
                assert_eq!(b, d, "seed {seed}");
                checked += 1;
            }
            (None, Err(Error::WindowOverflow(_))) => {
                checked += 1;
            }
            (b, d) => panic!("seed {seed}: brute {b:?} vs dp {d:?}"),
        }
    }
    assert_eq!(checked, 400);
}

#[test]
fn break_point_against_brute_force() {
    let order = PriorityOrder::RadialLex;
    let mut confirmed = 0;
    for seed in 2000..2250u64 {
        let ev = testkit::random_fixture(seed, 1, 4, 3.0, 6 + (seed % 7) as usize);
        let w = ev.window().clone();
        let full = Configuration::full(&w);
        let targets: Vec<Site> = w.iter_sites().collect();
        let index = backward_reachable_set(&ev, &targets, 3.0).unwrap();
        let path = match minimal_path(&ev, &full, &index, &order).unwrap() {
            Some(p) => p,
            None => continue,
        };
        let traj = evolve_full(&ev, &full, 0.0, 3.0, true)
            .unwrap()
            .trajectory
            .unwrap();
        // beta t = 0.6 → ball radius ⌊2βt⌋ = 1: only the two neighbors need
        // to clear, so found break points are common on small instances.
        let beta = 0.2f64;
        let t = 3.0f64;
        let radius = (2.0 * beta * t).floor() as i32;
        let bp = break_point(&ev, &path, &traj, beta, t).unwrap();
        if bp.found {
            assert!(
                testkit::brute_is_break_point(&ev, &bp.site, bp.time, radius),
                "seed {seed}: reported break point fails brute-force check"
            );
            // And it is the first one: no earlier scan point qualifies.
            for probe in [0.0, bp.time * 0.25, bp.time * 0.5, bp.time * 0.9] {
                if probe < bp.time {
                    let y = path.site_at(probe);
                    assert!(
                        !testkit::brute_is_break_point(&ev, y, probe, radius)
                            || probe >= bp.time,
                        "seed {seed}: earlier break point at {probe}"
                    );
                }
            }
            confirmed += 1;
        } else {
            // Fallback: the endpoint must genuinely fail the predicate.
            assert!(
                !testkit::brute_is_break_point(&ev, &bp.site, bp.time, radius),
                "seed {seed}: fallback despite a valid break point at the end"
            );
        }
    }
    assert!(confirmed > 50, "only {confirmed} found break points");
}

#[test]
fn good_point_decay_is_monotone_in_time() {
    // P(not good at the origin) shrinks as t grows, fixed beta.
    let mut rates = Vec::new();
    for &t in &[4.0f64, 8.0, 12.0] {
        let mut bad = 0u32;
        let replicas = 2000u64;
        for r in 0..replicas {
            let p = cpsim_core::graphical::SimParams {
                dim: 1,
                lambda: 1.0,
                horizon: t,
                window_radius: (4.0 * t) as i32 + 8,
                beta: 4.0,
                seed: 77,
                replica_index: r,
                margin: None,
            };
            let ev = cpsim_core::graphical::generate_events(&p).unwrap();
            let report = cpsim_core::workpath::classify_good(
                &ev,
                &Site(vec![0]),
                0.0,
                4.0,
                t,
                false,
            )
            .unwrap();
            if !report.is_good {
                bad += 1;
            }
        }
        rates.push(bad as f64 / replicas as f64);
    }
    assert!(
        rates[0] >= rates[1] && rates[1] >= rates[2],
        "bad-point rates not decreasing: {rates:?}"
    );
}
