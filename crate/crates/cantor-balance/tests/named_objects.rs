use cantor_balance::balance::{is_m_balanced, is_semibalanced};
use cantor_balance::cube::all_signs;
use cantor_balance::examples::*;
use cantor_balance::measures::FAMeasure;
use cantor_balance::ratio::{dyadic, frac, int, pow2_neg};
use cantor_balance::{CubeSet, Rational, Signs};
use num_traits::{Signed, Zero};

#[test]
fn u_is_balanced_at_powers_of_two() {
    for j_max in 1..=U_LEVEL_CAP {
        let u = balanced_open_u(j_max).unwrap();
        for j in 1..=j_max.min(3) {
            let eps = Rational::new((1i64 << (j + 2)).into(), (1i64 << (1 << j)).into());
            let rep = is_m_balanced(&u, 1 << j, &eps).unwrap();
            assert!(rep.holds, "j_max {j_max}, j {j}: {:?}", rep.first_violation);
        }
    }
}

#[test]
fn u_is_symmetric_inside_level_cylinders() {
    let j_max = U_LEVEL_CAP;
    let res = 1 << j_max;
    let u = balanced_open_u(j_max).unwrap();
    for j in 1..j_max {
        let len = 1u32 << j;
        for s in all_signs(len) {
            let piece = u.intersection(&CubeSet::cylinder(&s, res).unwrap());
            for r in len + 1..=res {
                assert_eq!(piece.phi_count(r), 0, "s = {s}, r = {r}");
            }
        }
    }
}

#[test]
fn u_truncations_are_nested() {
    let mut prev = balanced_open_u(1).unwrap();
    for j in 2..=U_LEVEL_CAP {
        let u = balanced_open_u(j).unwrap();
        assert!(prev.is_subset(&u));
        // |Z_n| = 2^n: one free sign per constant block
        let want: Rational = (1..=j).map(|n| Rational::new((1i64 << n).into(), (1i64 << (1 << n)).into())).sum();
        assert_eq!(u.lambda().to_rational(), want);
        assert_eq!(z_level(j).len(), 1 << j);
        prev = u;
    }
}

/// `psi_n` by brute force over all unions of length-`n` cylinders.
fn psi_oracle(b: &CubeSet, n: u32) -> Rational {
    let cyls: Vec<CubeSet> = all_signs(n).map(|s| CubeSet::cylinder(&s, b.resolution()).unwrap()).collect();
    (0u64..1 << cyls.len())
        .map(|mask| {
            let a = cyls
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .fold(CubeSet::empty(b.resolution()), |acc, (_, c)| acc.union(c));
            a.sym_diff(b).lambda().to_rational()
        })
        .min()
        .unwrap()
}

#[test]
fn plebanek_values() {
    for k in 3..=12u32 {
        let b = plebanek_b(k).unwrap();
        for n in 1..k - 1 {
            let psi = b.psi(n).unwrap().to_rational();
            assert_eq!(psi.clone() * int(n as i64), dyadic(n as i64, n), "K {k}, n {n}");
            if n <= 3 {
                assert_eq!(psi, psi_oracle(&b, n));
            }
            // the density witness of non-balance
            let c = CubeSet::cylinder(&plebanek_s_prime(n), k).unwrap();
            assert_eq!(b.intersection(&c).lambda().to_rational() / c.lambda().to_rational(), frac(1, 2));
            let rep = is_m_balanced(&b, n, &frac(1, 2)).unwrap();
            assert!(!rep.holds, "K {k}, m {n}");
        }
        // semibalance margins |phi_r(B)| <= 2^-(r-1)
        for r in 2..=k {
            assert!(b.phi(r).to_rational().abs() <= pow2_neg(r - 1));
        }
        assert!(is_semibalanced(&b, 1, &int(4)).holds);
    }
}

#[test]
fn aviles_measures() {
    let k = 8;
    let thetas: Vec<FAMeasure> = (1..=3).map(|n| aviles_measure(n, k).unwrap()).collect();
    for (i, th) in thetas.iter().enumerate() {
        assert_eq!(th.norm(), int(1));
        assert!(th.eval(&CubeSet::full(k)).is_zero());
        let n = i as u32 + 1;
        // oracle: 2^n phi_{2^n}(A ∩ <s'_n>) on a few sets
        for a in [
            CubeSet::full(k),
            CubeSet::from_atoms(k, (0..256).filter(|x| x % 3 == 0)),
            CubeSet::coordinate(1 << n, k).unwrap(),
        ] {
            let c = CubeSet::cylinder(&plebanek_s_prime(n), k).unwrap();
            let want = a.intersection(&c).phi(1 << n).to_rational() * int(1 << n);
            assert_eq!(th.eval(&a), want);
        }
    }
    for i in 0..thetas.len() {
        for j in i + 1..thetas.len() {
            assert!(thetas[i].carrier(k).unwrap().is_disjoint(&thetas[j].carrier(k).unwrap()));
        }
    }
    assert!(aviles_measure(4, 8).is_err());
}

#[test]
fn svg_mentions_every_cylinder() {
    let u = balanced_open_u(2).unwrap();
    let svg = svg_cylinders(&[(&u, "#9e0c16")], 4);
    assert_eq!(svg.matches("<polygon").count(), 1 + maximal_cylinders(&u).len());
    let _ = Signs::empty();
}
