use cantor_balance::algebra::FiniteAlgebra;
use cantor_balance::ratio::{dyadic, frac, int, pow2_neg};
use cantor_balance::repair::driver::check_semibalance_repair;
use cantor_balance::repair::{
    bessel_defect, construct_m, construct_m_unchecked, objective_s, rademacher_tail_mass, repair_balance,
    split_repair_budget, Mode, Regime, RepairConfig, RepairInstance,
};
use cantor_balance::{CubeSet, Rational};
use proptest::prelude::*;

fn arb_set_at(n: u32) -> impl Strategy<Value = CubeSet> {
    proptest::collection::vec(any::<bool>(), 1usize << n).prop_map(move |bits| {
        CubeSet::from_atoms(n, bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i as u64))
    })
}

/// Sparse random set: each atom kept with probability about `1/2^sparsity`.
fn arb_sparse(n: u32, sparsity: u32) -> impl Strategy<Value = CubeSet> {
    proptest::collection::vec(0u32..(1 << sparsity), 1usize << n)
        .prop_map(move |v| CubeSet::from_atoms(n, v.iter().enumerate().filter(|(_, &x)| x == 0).map(|(i, _)| i as u64)))
}

/// All exchanges of one atom of `M` for one feasible atom outside it, by direct evaluation.
fn is_swap_local_min(m: &CubeSet, z: &CubeSet, feasible: &CubeSet, t: u32) -> bool {
    let s = objective_s(m, z, t).unwrap();
    for x in m.atoms() {
        for y in feasible.difference(m).atoms() {
            let mut m2 = m.clone();
            m2.remove(x);
            m2.insert(y);
            if objective_s(&m2, z, t).unwrap() < s {
                return false;
            }
        }
    }
    true
}

/// Minimum of S over every k-subset of the feasible atoms, by recursion.
fn brute_min(feasible: &[u64], k: usize, n: u32, z: &CubeSet, t: u32) -> Rational {
    fn go(i: usize, left: usize, cur: &mut CubeSet, f: &[u64], z: &CubeSet, t: u32, best: &mut Option<Rational>) {
        if left == 0 {
            let s = objective_s(cur, z, t).unwrap();
            if best.as_ref().is_none_or(|b| s < *b) {
                *best = Some(s);
            }
            return;
        }
        if f.len() - i < left {
            return;
        }
        cur.insert(f[i]);
        go(i + 1, left - 1, cur, f, z, t, best);
        cur.remove(f[i]);
        go(i + 1, left, cur, f, z, t, best);
    }
    let mut best = None;
    go(0, k, &mut CubeSet::empty(n), feasible, z, t, &mut best);
    best.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rademacher_tail_bound(d in proptest::collection::vec((-20i64..=20, 1i64..=8), 0..12), xi_i in 0usize..5) {
        let xi = [frac(1, 16), frac(1, 8), frac(1, 4), frac(1, 2), frac(15, 16)][xi_i].clone();
        let d: Vec<Rational> = d.into_iter().map(|(p, q)| frac(p, q)).collect();
        let mass = rademacher_tail_mass(&d, &xi).unwrap();
        let one_minus = int(1) - &xi;
        prop_assert!(mass >= &one_minus * &one_minus / int(3));
    }

    #[test]
    fn bessel_sum_below_mass(z in (1u32..=10).prop_flat_map(arb_set_at), t in 0u32..4) {
        let (sum, bound) = bessel_defect(&z, t);
        prop_assert!(sum <= bound);
    }

    #[test]
    fn flip_of_window_keeps_objective(
        (n, m, z) in (2u32..=6).prop_flat_map(|n| (Just(n), arb_set_at(n), arb_set_at(n))),
        t in 0u32..2,
    ) {
        let z = z.difference(&m);
        let s = objective_s(&m, &z, t).unwrap();
        let fm = m.flip(t, n).unwrap();
        let fz = z.flip(t, n).unwrap();
        prop_assert_eq!(objective_s(&fm, &fz, t).unwrap(), s);
    }

    #[test]
    fn descent_is_local_and_exhaustive_is_global(
        (n, f, z) in (3u32..=5).prop_flat_map(|n| (Just(n), arb_set_at(n), arb_sparse(n, 3))),
        t in 0u32..2,
        k in 1u64..5,
    ) {
        let z = z.intersection(&f);
        let feasible = f.difference(&z);
        prop_assume!(feasible.count() >= k);
        let inst = RepairInstance { t, eta: frac(1, 2), n, k, f: f.clone(), q: CubeSet::empty(n), z: z.clone() };
        let d = construct_m_unchecked(&inst, Mode::SwapDescent, 1_000_000).unwrap();
        let e = construct_m_unchecked(&inst, Mode::Exhaustive, 1_000_000).unwrap();
        for r in [&d, &e] {
            prop_assert!(r.m.is_subset(&feasible));
            prop_assert_eq!(r.m.count(), k);
            prop_assert_eq!(&r.s_objective, &objective_s(&r.m, &z, t).unwrap());
            prop_assert!(r.certificate.exchange_inequality);
        }
        prop_assert!(is_swap_local_min(&d.m, &z, &feasible, t));
        let atoms: Vec<u64> = feasible.atoms().collect();
        prop_assert_eq!(&e.s_objective, &brute_min(&atoms, k as usize, n, &z, t));
        prop_assert!(d.s_objective >= e.s_objective);
    }
}

/// A relaxed instance: F is a length-t cylinder minus a few atoms, Q small, Z empty
/// (the hypothesis λ(Z) < η²/64 leaves no room for atoms below resolution 2e + 6).
fn relaxed_instance(n: u32, t: u32, e: u32, k_off: u64, holes: &[u64], q_atoms: &[u64]) -> RepairInstance {
    let sign: cantor_balance::Signs = "+".repeat(t as usize).parse().unwrap();
    let mut f = CubeSet::cylinder(&sign, n).unwrap();
    for &h in holes {
        f.remove(h % (1 << n));
    }
    let lo = 1u64 << (n - e - 1);
    let k = lo + 1 + k_off % (lo - 1);
    let q = CubeSet::from_atoms(n, q_atoms.iter().map(|a| a % (1 << n)));
    RepairInstance { t, eta: pow2_neg(e), n, k, f, q, z: CubeSet::empty(n) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relaxed_certificate_holds(
        n in 10u32..=13,
        t in 0u32..=2,
        k_off in any::<u64>(),
        holes in proptest::collection::vec(any::<u64>(), 0..20),
        q_atoms in proptest::collection::vec(any::<u64>(), 0..3),
    ) {
        let e = t + 6;
        prop_assume!(n >= e + 3);
        let inst = relaxed_instance(n, t, e, k_off, &holes, &q_atoms);
        inst.check(Regime::Relaxed).unwrap();
        let r = construct_m(&inst, Mode::SwapDescent, Regime::Relaxed).unwrap();
        prop_assert!(r.certificate.exchange_inequality);
        prop_assert!(r.certificate.below_bound, "S = {} bound = {}", r.s_objective, r.certificate.bound);
        prop_assert!(r.m.is_disjoint(&inst.q) && r.m.is_subset(&inst.f));
        prop_assert_eq!(r.m.lambda().to_rational(), dyadic(inst.k as i64, n));
    }

    #[test]
    fn repair_balance_postconditions(
        gens in proptest::collection::vec(arb_set_at(3), 0..2),
        l_atoms in proptest::collection::vec(0u64..1 << 14, 0..2),
        q_atoms in proptest::collection::vec(0u64..1 << 14, 0..2),
    ) {
        let t = 3;
        let f = FiniteAlgebra::new(3, gens);
        let delta = frac(1, 4);
        // atoms must contain a dense cylinder and the algebra must be (t, delta/2)-semibalanced;
        // at resolution <= t both are automatic
        let l = CubeSet::from_atoms(14, l_atoms);
        let q = CubeSet::from_atoms(14, q_atoms);
        let p = CubeSet::empty(3);
        let r = repair_balance(&f, &p, &l, &q, t, &delta, &RepairConfig::default());
        let rep = r.unwrap();
        prop_assert!(check_semibalance_repair(&f, &p, &l, &q, &rep.m, t, &delta).is_ok());
        prop_assert_eq!(rep.m.lambda(), l.difference(&p.refine(14).unwrap()).lambda());
    }

    #[test]
    fn relaxed_repair_cancels_dense_noise(
        gens in proptest::collection::vec(arb_set_at(2), 0..3),
        p_pick in any::<u128>(),
        l in arb_sparse(12, 7),
        q in arb_sparse(12, 8),
    ) {
        let t = 4;
        let f = FiniteAlgebra::new(2, gens);
        let p = f.element(p_pick);
        let l = l.difference(&p.refine(12).unwrap());
        let q = q.difference(&l);
        let delta = frac(1, 8);
        prop_assume!(l.lambda().to_rational() < frac(1, 16) && q.lambda().to_rational() < frac(1, 16));
        let rep = repair_balance(&f, &p, &l, &q, t, &delta, &RepairConfig::default()).unwrap();
        prop_assert!(check_semibalance_repair(&f, &p, &l, &q, &rep.m, t, &delta).is_ok());
    }
}

#[test]
fn split_repair_on_trivial_chain() {
    let chain = vec![FiniteAlgebra::trivial(1)];
    let e = CubeSet::empty(1);
    let (theta, ctx) = split_repair_budget(&chain, &[1], &e, &e, 1, &frac(1, 4), &RepairConfig::default()).unwrap();
    assert!(theta > int(0));
    let l = CubeSet::from_atoms(16, [12345]);
    let q = CubeSet::from_atoms(16, [777]);
    assert!(l.lambda().to_rational() < theta);
    let out = ctx.repair(&l, &q).unwrap();
    assert!(out.m.is_disjoint(&q));
    assert!(out.m.lambda().to_rational() < frac(1, 4));
}
