use cantor_balance::balance::{
    approx_homomorphism, balance_threshold, is_m_balanced, is_mt_balanced, is_semibalanced, semibalance_threshold,
};
use cantor_balance::cube::all_signs;
use cantor_balance::ratio::frac;
use cantor_balance::{CubeSet, FiniteAlgebra, PieceFamily, Rational};
use proptest::prelude::*;

fn arb_set_at(n: u32) -> impl Strategy<Value = CubeSet> {
    proptest::collection::vec(any::<bool>(), 1usize << n).prop_map(move |bits| {
        CubeSet::from_atoms(n, bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u64))
    })
}

fn arb_set(max_res: u32) -> impl Strategy<Value = CubeSet> {
    (1..=max_res).prop_flat_map(arb_set_at)
}

fn arb_eps() -> impl Strategy<Value = Rational> {
    (1i64..=64, 1i64..=64).prop_map(|(p, q)| frac(p, q))
}

/// Random disjoint pieces: atoms at resolution n labelled by piece index or unassigned.
fn arb_pieces(n: u32, k: usize) -> impl Strategy<Value = PieceFamily> {
    proptest::collection::vec(0..=k, 1usize << n).prop_map(move |labels| {
        let pieces = (0..k)
            .map(|p| CubeSet::from_atoms(n, labels.iter().enumerate().filter(|(_, &l)| l == p).map(|(i, _)| i as u64)))
            .collect();
        PieceFamily::new(pieces)
    })
}

fn all_unions(fam: &PieceFamily) -> Vec<CubeSet> {
    let k = fam.pieces().len();
    (0..1u32 << k).map(|mask| fam.union_of(&(0..k).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>())).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn piece_family_matches_enumeration(
        (n, fam) in (2u32..=6).prop_flat_map(|n| (Just(n), arb_pieces(n, 5))),
        m in 1u32..=6,
        dt in 0u32..3,
        eps in arb_eps(),
    ) {
        let unions = all_unions(&fam);
        let t = m + dt;
        let tail = unions.iter().all(|u| is_m_balanced(u, m, &eps).unwrap().holds);
        prop_assert_eq!(fam.is_m_balanced(m, &eps).unwrap().holds, tail);
        let window = unions.iter().all(|u| is_mt_balanced(u, m, t, &eps).unwrap().holds);
        prop_assert_eq!(fam.is_mt_balanced(m, t, &eps).unwrap().holds, window);
        let semi = unions.iter().all(|u| is_semibalanced(u, m.min(n), &eps).holds);
        prop_assert_eq!(fam.is_semibalanced(m.min(n), &eps).holds, semi);
        // the witness of a failure really fails
        if let Some(v) = fam.is_m_balanced(m, &eps).unwrap().first_violation {
            let w = v.witness.expect("piece families report a witness");
            prop_assert!(!is_m_balanced(&w, m, &eps).unwrap().holds);
        }
    }

    #[test]
    fn single_set_is_a_one_piece_family(a in arb_set(7), m in 1u32..=7, eps in arb_eps()) {
        let fam = PieceFamily::new(vec![a.clone()]);
        prop_assert_eq!(
            fam.is_m_balanced(m, &eps).unwrap().holds,
            is_m_balanced(&a, m, &eps).unwrap().holds
        );
    }

    #[test]
    fn thresholds_characterise_predicates(a in arb_set(7), m in 1u32..=7, dt in 0u32..3, eps in arb_eps()) {
        let thr = balance_threshold(&a, m, None).unwrap();
        prop_assert_eq!(is_m_balanced(&a, m, &eps).unwrap().holds, eps > thr);
        let thr = balance_threshold(&a, m, Some(m + dt)).unwrap();
        prop_assert_eq!(is_mt_balanced(&a, m, m + dt, &eps).unwrap().holds, eps > thr);
        let thr = semibalance_threshold(&a, m);
        prop_assert_eq!(is_semibalanced(&a, m, &eps).holds, eps > thr);
    }

    #[test]
    fn violation_reproduces_the_inequality(a in arb_set(6), m in 1u32..=6, eps in arb_eps()) {
        if let Some(v) = is_m_balanced(&a, m, &eps).unwrap().first_violation {
            prop_assert!(v.lhs >= v.rhs);
            let k = v.coordinate.unwrap_or(m);
            prop_assert_eq!(v.rhs, &eps / Rational::from_integer(k.into()));
        }
    }

    #[test]
    fn homomorphism_laws_on_balanced_algebras(
        gens in proptest::collection::vec(arb_set_at(6), 1..3),
        n in 1u32..=6,
    ) {
        let h = FiniteAlgebra::new(6, gens);
        let thr = h.as_pieces().balance_threshold(n, None).unwrap();
        let eps = &thr + frac(1, 1 << 12);
        prop_assume!(eps < frac(1, 3));
        let hom = approx_homomorphism(&h, n, &eps).unwrap();
        let elems = h.elements().unwrap();
        let full = CubeSet::full(6);
        prop_assert!(hom.apply(&full).is_full());
        let bound = &eps / Rational::from_integer(n.into());
        for a in &elems {
            prop_assert!(hom.apply(a).in_level(n));
            prop_assert_eq!(hom.apply(&a.complement()), hom.apply(a).complement());
            prop_assert!(a.sym_diff(&hom.apply(a)).lambda().to_rational() < bound);
            for b in &elems {
                prop_assert_eq!(hom.apply(&a.union(b)), hom.apply(a).union(&hom.apply(b)));
            }
        }
    }
}

#[test]
fn algebra_balance_matches_cylinderwise_scan() {
    // the level algebra is (m, eps)-balanced for every m at or above its level
    let f = FiniteAlgebra::level(3, 6).unwrap();
    for m in 3..=6 {
        assert!(f.is_m_balanced(m, &frac(1, 1000)).unwrap().holds);
    }
    assert!(!f.is_m_balanced(2, &frac(1, 4)).unwrap().holds);
    for s in all_signs(2) {
        let c = CubeSet::cylinder(&s, 6).unwrap();
        assert!(f.contains(&c));
    }
}
