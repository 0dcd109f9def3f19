use cantor_balance::algebra::FiniteAlgebra;
use cantor_balance::measures::{continuity_budget, lebesgue_decompose, separate_singular, FAMeasure, PointMass};
use cantor_balance::ratio::{frac, int};
use cantor_balance::{CubeSet, Rational, Signs};
use num_traits::Signed;
use proptest::prelude::*;

fn arb_set_at(n: u32) -> impl Strategy<Value = CubeSet> {
    proptest::collection::vec(any::<bool>(), 1usize << n).prop_map(move |bits| {
        CubeSet::from_atoms(n, bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u64))
    })
}

fn arb_rational() -> impl Strategy<Value = Rational> {
    (-8i64..=8, 1i64..=6).prop_map(|(p, q)| frac(p, q))
}

fn arb_signs(max_len: usize) -> impl Strategy<Value = Signs> {
    proptest::collection::vec(any::<bool>(), 0..=max_len)
        .prop_map(|v| Signs::new(v.into_iter().map(|b| if b { 1 } else { -1 }).collect()))
}

fn arb_measure(max_res: u32) -> impl Strategy<Value = FAMeasure> {
    (0..=max_res).prop_flat_map(move |n| {
        (
            proptest::collection::vec(arb_rational(), 1usize << n),
            proptest::collection::vec((arb_signs(8), arb_rational()), 0..4),
        )
            .prop_map(move |(density, pts)| {
                let points = pts.into_iter().map(|(prefix, weight)| PointMass { prefix, weight }).collect();
                FAMeasure::new(n, density, points).unwrap()
            })
    })
}

/// Measures on 2^n cells at resolution n, where each cell carries density or a point
/// of the same sign, so the variation is attained by clopen sets at resolution n.
fn arb_cellwise(n: u32) -> impl Strategy<Value = FAMeasure> {
    proptest::collection::vec((arb_rational(), 0i64..3, any::<bool>()), 1usize << n).prop_map(move |cells| {
        let mut density = Vec::new();
        let mut points = Vec::new();
        for (i, (d, w, with_point)) in cells.into_iter().enumerate() {
            if with_point && w > 0 {
                let sign = if d.is_negative() { -1 } else { 1 };
                points.push(PointMass { prefix: Signs::from_index(i as u64, n), weight: int(sign * w) });
            }
            density.push(d);
        }
        FAMeasure::new(n, density, points).unwrap()
    })
}

/// `sup` over clopen `B ⊆ A` at resolution `n` of `mu(B) - mu(A \ B)`.
fn variation_oracle(mu: &FAMeasure, a: &CubeSet) -> Rational {
    let atoms: Vec<u64> = a.atoms().collect();
    let n = a.resolution();
    (0u64..1 << atoms.len())
        .map(|mask| {
            let b =
                CubeSet::from_atoms(n, atoms.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x));
            mu.eval(&b) - mu.eval(&a.difference(&b))
        })
        .max()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn variation_matches_sup_over_pairs((n, mu, a) in (1u32..=3).prop_flat_map(|n| (Just(n), arb_cellwise(n), arb_set_at(n)))) {
        let _ = n;
        prop_assert_eq!(mu.variation(&a), variation_oracle(&mu, &a));
        prop_assert_eq!(mu.norm(), mu.variation(&CubeSet::full(a.resolution())));
    }

    #[test]
    fn eval_is_additive(mu in arb_measure(4), (a, b) in (1u32..=9).prop_flat_map(|n| (arb_set_at(n), arb_set_at(n)))) {
        let b = b.difference(&a);
        prop_assert_eq!(mu.eval(&a.union(&b)), mu.eval(&a) + mu.eval(&b));
        prop_assert_eq!(mu.variation(&a.union(&b)), mu.variation(&a) + mu.variation(&b));
        prop_assert!(mu.eval(&a).abs() <= mu.variation(&a));
    }

    #[test]
    fn decomposition_is_exact(mu in arb_measure(4), a in (1u32..=9).prop_flat_map(arb_set_at)) {
        let (mu1, mu2) = lebesgue_decompose(&mu);
        prop_assert_eq!(mu1.eval(&a) + mu2.eval(&a), mu.eval(&a));
        prop_assert!(!mu1.has_points());
        // the point part vanishes off its points
        let off = mu2.points().iter().fold(a.clone(), |mut acc, p| {
            let x = p.point().atom(acc.resolution());
            acc.remove(x);
            acc
        });
        prop_assert_eq!(mu2.eval(&off), int(0));
    }

    #[test]
    fn rademacher_measure_is_phi(r in 1u32..=6, a in (1u32..=8).prop_flat_map(arb_set_at)) {
        let phi = FAMeasure::rademacher(r).unwrap();
        prop_assert_eq!(phi.eval(&a), a.phi(r).to_rational());
        prop_assert_eq!(phi.variation(&a), a.lambda().to_rational());
    }

    #[test]
    fn continuity_contract(mu in arb_measure(4), a in (1u32..=8).prop_flat_map(arb_set_at), xi in (1i64..=8).prop_map(|p| frac(p, 8))) {
        let (mu1, _) = lebesgue_decompose(&mu);
        if let Some(eta) = continuity_budget(&mu1, &xi).unwrap() {
            if a.lambda().to_rational() < eta {
                prop_assert!(mu1.eval(&a).abs() < &xi / int(4));
            }
        } else {
            prop_assert_eq!(mu1.eval(&a), int(0));
        }
    }

    #[test]
    fn restriction_lowers_variation(
        mu in arb_measure(3),
        gens in proptest::collection::vec(arb_set_at(4), 0..3),
        pick in any::<u128>(),
    ) {
        let alg = FiniteAlgebra::new(4, gens);
        let a = alg.element(pick);
        prop_assert!(mu.restricted_variation(&alg, &a).unwrap() <= mu.variation(&a));
    }

    #[test]
    fn separation_of_distinct_points(p in arb_signs(6), q in arb_signs(6), e in 1i64..=100) {
        let nu = FAMeasure::point(p.clone(), int(1));
        let mu = FAMeasure::point(q.clone(), frac(-1, 2));
        let eps = frac(1, e);
        match separate_singular(&nu, std::slice::from_ref(&mu), &eps) {
            Ok(x) => {
                prop_assert!(nu.variation(&x) < eps);
                prop_assert!(mu.variation(&x.complement()) < eps);
            }
            Err(_) => {
                // only the same point cannot be separated
                prop_assert_eq!(nu.points()[0].point().atom(20), mu.points()[0].point().atom(20));
            }
        }
    }
}

#[test]
fn continuity_contract_on_all_sets_at_resolution_three() {
    let mu1 = FAMeasure::new(2, vec![frac(3, 2), frac(-1, 1), frac(0, 1), frac(5, 4)], vec![]).unwrap();
    let xi = frac(2, 5);
    let eta = continuity_budget(&mu1, &xi).unwrap().unwrap();
    for mask in 0u64..256 {
        let a = CubeSet::from_atoms(3, (0..8).filter(|i| mask >> i & 1 == 1));
        if a.lambda().to_rational() < eta {
            assert!(mu1.eval(&a).abs() < &xi / int(4));
        }
    }
}
