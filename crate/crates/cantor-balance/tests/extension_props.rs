use cantor_balance::extension::{build_gstar_witness, check_gstar, grothendieck_gap, ExtensionConfig, StarAlgebra};
use cantor_balance::measures::{FAMeasure, NormalFamily};
use cantor_balance::ratio::int;
use cantor_balance::{FiniteAlgebra, Signs};
use proptest::prelude::*;

/// Point masses marching off to the point `s` followed by `-` everywhere: measure `i` sits at
/// `s`, then `i - 1` minus signs, a plus, then `tail`. Signs of the weights vary.
fn point_family(s: &[i8], tails: &[Vec<i8>], signs: &[bool]) -> NormalFamily {
    let nus = tails
        .iter()
        .enumerate()
        .map(|(i, tail)| {
            let mut v = s.to_vec();
            v.extend(std::iter::repeat_n(-1, i));
            v.push(1);
            v.extend(tail);
            FAMeasure::point(Signs::new(v), int(if signs[i] { 1 } else { -1 }))
        })
        .collect();
    NormalFamily::new(nus, FAMeasure::point(Signs::new(s.to_vec()), int(1))).unwrap()
}

fn sign() -> impl Strategy<Value = i8> {
    prop_oneof![Just(-1i8), Just(1i8)]
}

fn arb_family(len: usize) -> impl Strategy<Value = NormalFamily> {
    (
        prop::collection::vec(sign(), 0..3),
        prop::collection::vec(prop::collection::vec(sign(), 0..2), len),
        prop::collection::vec(any::<bool>(), len),
    )
        .prop_map(|(s, tails, signs)| point_family(&s, &tails, &signs))
}

fn chain(steps: usize) -> Vec<FiniteAlgebra> {
    (1..=steps as u32).map(|j| FiniteAlgebra::level(j, j).unwrap()).collect()
}

#[test]
fn three_steps_on_a_fixed_family() {
    let fam = point_family(
        &[1, -1],
        &vec![vec![]; 12],
        &[true, false, true, true, false, false, true, false, true, false, true, true],
    );
    let cfg = ExtensionConfig::default();
    let t = std::time::Instant::now();
    let (w, state) = build_gstar_witness(&chain(3), &fam, 3, &cfg).unwrap();
    eprintln!("K=3: {:?}, res {}, a {:?} b {:?}", t.elapsed(), w.g.resolution(), w.a_seq, w.b_seq);
    assert_eq!(state.k, 3);
    assert!(check_gstar(&StarAlgebra::Clopen, &w.g, &fam, &w, &cfg).holds);
    grothendieck_gap(&fam, &w, &cfg).unwrap();
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn one_step_witnesses_hold(fam in arb_family(6)) {
        let cfg = ExtensionConfig::default();
        let (w, state) = build_gstar_witness(&chain(1), &fam, 1, &cfg).unwrap();
        prop_assert!(state.check_invariants(&fam, &cfg).is_ok());
        prop_assert!(check_gstar(&StarAlgebra::Clopen, &w.g, &fam, &w, &cfg).holds);
        prop_assert!(grothendieck_gap(&fam, &w, &cfg).is_ok());
    }
}
