use std::sync::Arc;

use pcanon_core::lightleaves::{evaluate, GramOptions, LightLeaves, RexPolicy};
use pcanon_core::{CoxeterSystem, Gen, Hecke, HeckeElt, LaurentPoly};
use proptest::prelude::*;

const TYPES: [&str; 6] = ["A2", "B2", "G2", "A3", "C3", "A1~"];

fn arb_word() -> impl Strategy<Value = (&'static str, Vec<Gen>)> {
    prop::sample::select(TYPES.to_vec()).prop_flat_map(|name| {
        let n = CoxeterSystem::named(name).unwrap().num_gens() as Gen;
        (Just(name), prop::collection::vec(0..n, 0..9))
    })
}

fn arb_laurent() -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec((-3i32..4, -3i64..4), 0..4).prop_map(LaurentPoly::from_terms)
}

fn arb_elt(name: &'static str) -> impl Strategy<Value = HeckeElt> {
    let sys = CoxeterSystem::named(name).unwrap();
    let n = sys.num_gens() as Gen;
    prop::collection::vec((prop::collection::vec(0..n, 0..5), arb_laurent()), 0..4).prop_map(move |terms| {
        let mut out = HeckeElt::zero();
        for (w, c) in terms {
            out.add_term(sys.from_word(&w), &c);
        }
        out
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn canonical_words_are_stable((name, word) in arb_word()) {
        let sys = CoxeterSystem::named(name).unwrap();
        let x = sys.from_word(&word);
        prop_assert!(sys.is_reduced(x.word()));
        prop_assert_eq!(sys.from_word(x.word()), x.clone());
        for rw in sys.reduced_words(&x) {
            prop_assert_eq!(sys.from_word(&rw), x.clone());
        }
    }

    #[test]
    fn defect_parity_and_count((name, word) in arb_word()) {
        let sys = CoxeterSystem::named(name).unwrap();
        let subs = sys.all_subexpressions(&word);
        prop_assert_eq!(subs.len(), 1usize << word.len());
        for e in &subs {
            prop_assert_eq!((word.len() as i32 - e.endpoint.len() as i32 - e.defect).rem_euclid(2), 0);
        }
        if sys.is_reduced(&word) {
            let top = sys.decorate(&word, &vec![1; word.len()]);
            prop_assert_eq!(top.defect, 0);
            prop_assert_eq!(top.endpoint, sys.from_word(&word));
        }
    }

    #[test]
    fn bar_is_an_involution(a in arb_elt("B2")) {
        let h = Hecke::new(Arc::new(CoxeterSystem::named("B2").unwrap()));
        prop_assert_eq!(h.bar(&h.bar(&a)), a);
    }

    #[test]
    fn std_mult_is_associative(
        a in arb_elt("A1~"),
        b in arb_elt("A1~"),
        c in arb_elt("A1~"),
    ) {
        let h = Hecke::new(Arc::new(CoxeterSystem::named("A1~").unwrap()));
        prop_assert_eq!(h.std_mult(&h.std_mult(&a, &b), &c), h.std_mult(&a, &h.std_mult(&b, &c)));
    }
}

fn arb_small_word() -> impl Strategy<Value = (&'static str, Vec<Gen>)> {
    prop::sample::select(vec!["A2", "B2", "G2", "A3"]).prop_flat_map(|name| {
        let n = CoxeterSystem::named(name).unwrap().num_gens() as Gen;
        (Just(name), prop::collection::vec(0..n, 1..6))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leaf_degree_is_defect((name, word) in arb_small_word(), pick in any::<u64>()) {
        let sys = CoxeterSystem::named(name).unwrap();
        let ll = LightLeaves::new(&sys, RexPolicy::Lex);
        let subs = sys.all_subexpressions(&word);
        let e = &subs[(pick % subs.len() as u64) as usize];
        let leaf = ll.build(e, None).unwrap();
        prop_assert_eq!(leaf.degree, e.defect);
        let m = evaluate(&sys, &leaf).unwrap();
        prop_assert_eq!(m.degree(), e.defect);
        prop_assert!(m.check_homogeneous().is_ok());
    }

    #[test]
    fn gram_is_symmetric_and_graded((name, word) in arb_small_word(), pick in any::<u64>()) {
        let sys = CoxeterSystem::named(name).unwrap();
        let ll = LightLeaves::new(&sys, RexPolicy::RevLex);
        let ends = sys.subexpressions_by_endpoint(&word);
        let x = ends.keys().nth((pick % ends.len() as u64) as usize).unwrap().clone();
        let fam = ll.gram(&word, &x, &GramOptions { primes: vec![2], exact: true, ..Default::default() }).unwrap();
        let pairing = fam.pairing.unwrap();
        for (i, e) in fam.subexprs.iter().enumerate() {
            for (j, f) in fam.subexprs.iter().enumerate() {
                prop_assert_eq!(&pairing[i][j], &pairing[j][i]);
                if !pairing[i][j].is_zero() {
                    prop_assert_eq!(pairing[i][j].grade(), Some(e.defect + f.defect));
                }
            }
        }
    }
}
