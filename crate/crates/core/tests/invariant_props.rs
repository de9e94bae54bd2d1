//! Property tests for the structural invariants: quotient soundness,
//! translation invariance, flow/additivity of the evolution, and the
//! monotone coupling.

use cpsim_core::graphical::{coupled_evolve, generate_events, SimParams};
use cpsim_core::lattice::Site;
use cpsim_core::process::{canonical_form, evolve, Configuration};
use proptest::prelude::*;

fn site_strategy(dim: usize, range: i32) -> impl Strategy<Value = Site> {
    prop::collection::vec(-range..=range, dim).prop_map(Site)
}

fn config_strategy(dim: usize, range: i32, max_len: usize) -> impl Strategy<Value = Configuration> {
    prop::collection::vec(site_strategy(dim, range), 0..=max_len).prop_map(Configuration::new)
}

fn params(seed: u64) -> SimParams {
    SimParams {
        dim: 1,
        lambda: 1.1,
        horizon: 4.0,
        window_radius: 10,
        beta: 2.0,
        seed,
        replica_index: 0,
        margin: None,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn canonical_form_is_translation_invariant(
        cfg in config_strategy(2, 30, 8),
        shift in site_strategy(2, 50),
    ) {
        let shifted = cfg.translate(&shift);
        prop_assert_eq!(canonical_form(&cfg), canonical_form(&shifted));
    }

    #[test]
    fn canonical_form_is_idempotent_and_anchored(cfg in config_strategy(2, 30, 8)) {
        let k = canonical_form(&cfg);
        if !k.is_empty() {
            prop_assert_eq!(k.sites()[0].clone(), Site::origin(2));
            let realized = Configuration::new(k.sites().to_vec());
            prop_assert_eq!(canonical_form(&realized), k);
        }
    }

    #[test]
    fn quotient_equality_is_an_equivalence(
        a in config_strategy(1, 20, 6),
        shift_a in -40i32..40,
        shift_b in -40i32..40,
    ) {
        // Reflexive + symmetric + transitive along a translation chain.
        let b = a.translate(&Site(vec![shift_a]));
        let c = b.translate(&Site(vec![shift_b]));
        let (ka, kb, kc) = (canonical_form(&a), canonical_form(&b), canonical_form(&c));
        prop_assert_eq!(ka.clone(), kb.clone());
        prop_assert_eq!(kb, kc.clone());
        prop_assert_eq!(ka, kc);
    }

    #[test]
    fn evolution_flow_and_additivity(
        seed in 0u64..10_000,
        a in config_strategy(1, 6, 4),
        b in config_strategy(1, 6, 4),
        mid in 0.5f64..3.5,
    ) {
        let ev = generate_events(&params(seed)).unwrap();
        let direct = evolve(&ev, &a, 0.0, 4.0).unwrap();
        let stepped = evolve(&ev, &evolve(&ev, &a, 0.0, mid).unwrap(), mid, 4.0).unwrap();
        prop_assert_eq!(direct.clone(), stepped);

        let ua = direct;
        let ub = evolve(&ev, &b, 0.0, 4.0).unwrap();
        let uab = evolve(&ev, &a.union(&b), 0.0, 4.0).unwrap();
        prop_assert_eq!(uab, ua.union(&ub));
    }

    #[test]
    fn coupling_is_monotone(
        seed in 0u64..10_000,
        a in config_strategy(1, 6, 4),
        extra in config_strategy(1, 6, 4),
    ) {
        let ev = generate_events(&params(seed)).unwrap();
        let b = a.union(&extra);
        let (ea, eb) = coupled_evolve(&ev, &a, &b, 0.0, 4.0).unwrap();
        prop_assert!(ea.is_subset_of(&eb));
    }
}
