//! Choosing a small set `M` that cancels the coordinate imbalance of `Z`.
//!
//! The objective is `S(M) = sum_{m=t+1}^{n} (phi_m(M) + phi_m(Z))^2` over sets of
//! exactly `k` atoms inside `F \ (Q ∪ Z)`. Swap descent exchanges one atom at a time;
//! exhaustive mode enumerates every feasible set and serves as the oracle.

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::balance::{dense_cylinder, is_semibalanced, BalanceReport};
use crate::cube::{atom_sign, CubeSet};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};
use crate::ratio::{self, dyadic, frac};
use crate::Rational;

pub mod driver;

pub use driver::{repair_balance, split_repair_budget, RepairConfig, SemibalanceRepair, SplitRepairContext};

/// Default cap on the number of subsets exhaustive mode will enumerate.
pub const EXHAUSTIVE_CAP: u64 = 1_000_000;
/// Default cap on the length of a vector enumerated by [`rademacher_tail_mass`].
pub const RADEMACHER_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    SwapDescent,
    Exhaustive,
}

/// Which hypotheses of the construction are enforced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Every hypothesis, including `eta < 2^-(t+10)` and `n^3 / 2^(n-1) <= eta`.
    Strict,
    /// Those two are waived; density and mass hypotheses stay.
    #[default]
    Relaxed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairInstance {
    pub t: u32,
    #[serde(with = "ratio::text")]
    pub eta: Rational,
    pub n: u32,
    pub k: u64,
    #[serde(rename = "F")]
    pub f: CubeSet,
    #[serde(rename = "Q")]
    pub q: CubeSet,
    #[serde(rename = "Z")]
    pub z: CubeSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    /// `(k / 2^n) * (n / 2^(n-1))`.
    #[serde(with = "ratio::text")]
    pub bound: Rational,
    pub below_bound: bool,
    /// The local optimality inequality at every exchange pair.
    pub exchange_inequality: bool,
    /// `(t, eta)`-semibalance of `M ∪ Z`.
    pub semibalance: BalanceReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairResult {
    #[serde(rename = "M")]
    pub m: CubeSet,
    #[serde(with = "ratio::text")]
    pub s_objective: Rational,
    pub swap_scan_count: u64,
    pub accepted_swaps: u64,
    pub certificate: Certificate,
}

/// `S(M)` for disjoint `M`, `Z`, over coordinates `(t, n]` with `n` the common resolution.
pub fn objective_s(m: &CubeSet, z: &CubeSet, t: u32) -> Result<Rational> {
    if !m.is_disjoint(z) {
        return Err(Error::Overlap("M and Z".into()));
    }
    let u = m.union(z);
    let n = u.resolution();
    let sum: BigInt = (t + 1..=n).map(|r| BigInt::from(u.phi_count(r)).pow(2)).sum();
    Ok(Rational::new(sum, BigInt::one() << (2 * n)))
}

/// Fraction of sign vectors `y` with `(sum y_m d_m)^2 >= xi * sum d_m^2`, by enumeration.
pub fn rademacher_tail_mass(d: &[Rational], xi: &Rational) -> Result<Rational> {
    rademacher_tail_mass_capped(d, xi, RADEMACHER_CAP)
}

pub fn rademacher_tail_mass_capped(d: &[Rational], xi: &Rational, cap: usize) -> Result<Rational> {
    Ok(rademacher_tail_masses(d, std::slice::from_ref(xi), cap)?.remove(0))
}

/// [`rademacher_tail_mass`] for several thresholds from one enumeration.
pub fn rademacher_tail_masses(d: &[Rational], xis: &[Rational], cap: usize) -> Result<Vec<Rational>> {
    if xis.iter().any(|xi| !xi.is_positive() || *xi >= Rational::one()) {
        return Err(Error::Parameter("need 0 < xi < 1".into()));
    }
    let n = d.len();
    if n > cap {
        return Err(Error::TooLarge { size: n as u64, cap: cap as u64 });
    }
    // clear denominators
    let l = d.iter().fold(BigInt::one(), |acc, q| num_integer::lcm(acc, q.denom().clone()));
    let ints: Vec<BigInt> = d.iter().map(|q| q.numer() * (&l / q.denom())).collect();
    let norm: BigInt = ints.iter().map(|x| x * x).sum();
    // q * sum^2 >= p * norm for each xi = p / q
    let lhs_scale: Vec<BigInt> = xis.iter().map(|xi| xi.denom().clone()).collect();
    let rhs: Vec<BigInt> = xis.iter().map(|xi| xi.numer() * &norm).collect();
    let total = 1u64 << n;
    let abs_sum: BigInt = ints.iter().map(|x| x.abs()).sum();
    let small = abs_sum.bits() <= 48 && lhs_scale.iter().all(|q| q.bits() <= 24) && rhs.iter().all(|r| r.bits() <= 120);
    let hits = if small {
        let to = |x: &BigInt| i128::try_from(x).expect("checked size");
        let ints: Vec<i128> = ints.iter().map(to).collect();
        let qs: Vec<i128> = lhs_scale.iter().map(to).collect();
        let rs: Vec<i128> = rhs.iter().map(to).collect();
        gray_walk(&ints, total, xis.len(), |sum, hits| {
            let sq = sum * sum;
            for ((h, q), r) in hits.iter_mut().zip(&qs).zip(&rs) {
                *h += u64::from(q * sq >= *r);
            }
        })
    } else {
        gray_walk(&ints, total, xis.len(), |sum: &BigInt, hits| {
            let sq = sum * sum;
            for ((h, q), r) in hits.iter_mut().zip(&lhs_scale).zip(&rhs) {
                *h += u64::from(q * &sq >= *r);
            }
        })
    };
    Ok(hits.into_iter().map(|h| Rational::new(h.into(), total.into())).collect())
}

/// Gray-code walk over sign vectors, starting from all +1; `count` tallies each sum.
fn gray_walk<T>(ints: &[T], total: u64, slots: usize, count: impl Fn(&T, &mut [u64])) -> Vec<u64>
where
    T: Clone + std::iter::Sum<T> + for<'a> std::ops::AddAssign<&'a T> + for<'a> std::ops::SubAssign<&'a T>,
{
    let mut signs = vec![true; ints.len()];
    let mut sum: T = ints.iter().cloned().sum();
    let mut hits = vec![0u64; slots];
    for step in 0..total {
        if step > 0 {
            let j = step.trailing_zeros() as usize;
            // flipping y_j moves the sum by 2 d_j
            if signs[j] {
                sum -= &ints[j];
                sum -= &ints[j];
            } else {
                sum += &ints[j];
                sum += &ints[j];
            }
            signs[j] = !signs[j];
        }
        count(&sum, &mut hits);
    }
    hits
}

/// `(sum_{m=t+1}^{n} phi_m(Z)^2, lambda(Z))`.
pub fn bessel_defect(z: &CubeSet, t: u32) -> (Rational, Rational) {
    let n = z.resolution();
    let sum: Dyadic = (t + 1..=n).map(|r| z.phi(r).square()).sum();
    (sum.to_rational(), z.lambda().to_rational())
}

/// `(k / 2^n) * (n / 2^(n-1))`.
pub fn s_bound(k: u64, n: u32) -> Rational {
    Rational::new(BigInt::from(k) * n, BigInt::one() << (2 * n - 1))
}

impl RepairInstance {
    /// Sets lifted to resolution `n`.
    fn lifted(&self) -> Result<(CubeSet, CubeSet, CubeSet)> {
        let lift = |s: &CubeSet, name: &str| {
            if s.resolution() > self.n {
                Err(Error::Hypothesis(format!("{name} is finer than resolution n = {}", self.n)))
            } else {
                s.refine(self.n)
            }
        };
        Ok((lift(&self.f, "F")?, lift(&self.q, "Q")?, lift(&self.z, "Z")?))
    }

    /// Every hypothesis of the regime, each reported separately.
    pub fn hypothesis_failures(&self, regime: Regime) -> Vec<String> {
        let mut out = Vec::new();
        let eta = &self.eta;
        if !eta.is_positive() {
            out.push("eta must be positive".into());
        }
        if regime == Regime::Strict {
            if *eta >= ratio::pow2_neg(self.t + 10) {
                out.push(format!("eta = {} is not below 2^-(t+10)", ratio::to_text(eta)));
            }
            let lhs = Rational::new(BigInt::from(self.n).pow(3), BigInt::one() << (self.n - 1));
            if lhs > *eta {
                out.push(format!("n^3 / 2^(n-1) = {} exceeds eta", ratio::to_text(&lhs)));
            }
        }
        let mass = dyadic(self.k as i64, self.n);
        if !(eta / ratio::int(2) < mass && mass < *eta) {
            out.push(format!("k / 2^n = {} is not in (eta/2, eta)", ratio::to_text(&mass)));
        }
        let (f, q, z) = match self.lifted() {
            Ok(x) => x,
            Err(e) => {
                out.push(e.to_string());
                return out;
            }
        };
        if q.lambda().to_rational() >= *eta {
            out.push("lambda(Q) is not below eta".into());
        }
        if !z.is_subset(&f) {
            out.push("Z is not a subset of F".into());
        }
        if z.lambda().to_rational() >= eta * eta / ratio::int(64) {
            out.push("lambda(Z) is not below eta^2 / 64".into());
        }
        if self.t > self.n {
            out.push("t exceeds n".into());
        } else if dense_cylinder(&f, self.t, &frac(95, 100)).is_none() {
            out.push("no cylinder of length t where F has density 95/100".into());
        }
        out
    }

    pub fn check(&self, regime: Regime) -> Result<()> {
        let fails = self.hypothesis_failures(regime);
        if fails.is_empty() {
            Ok(())
        } else {
            Err(Error::Hypothesis(fails.join("; ")))
        }
    }

    /// Atoms of `F \ (Q ∪ Z)`.
    pub fn feasible_atoms(&self) -> Result<Vec<u64>> {
        let (f, q, z) = self.lifted()?;
        Ok(f.difference(&q.union(&z)).atoms().collect())
    }
}

/// Window of coordinates `(t, n]` as a bit mask over atom indices.
fn window_mask(t: u32, n: u32) -> u64 {
    ((1u64 << n) - 1) ^ ((1u64 << t) - 1)
}

/// `g(a) = sum_{m in (t, n]} a_m d_m`.
fn score(a: u64, d: &[i64], t: u32) -> i64 {
    d.iter().enumerate().map(|(j, &dm)| atom_sign(a, t + 1 + j as u32) * dm).sum()
}

/// Searcher state: `d_m = 2^n phi_m(M ∪ Z)` for `m` in `(t, n]`.
struct Descent {
    t: u32,
    n: u32,
    d: Vec<i64>,
}

impl Descent {
    fn new(t: u32, n: u32, members: impl Iterator<Item = u64>) -> Self {
        let mut d = vec![0i64; (n - t) as usize];
        for a in members {
            for (j, dm) in d.iter_mut().enumerate() {
                *dm += atom_sign(a, t + 1 + j as u32);
            }
        }
        Descent { t, n, d }
    }

    fn s_numerator(&self) -> i128 {
        self.d.iter().map(|&x| (x as i128) * (x as i128)).sum()
    }

    /// `4^n` times the change of `S` when `x` leaves and `y` enters.
    fn delta(&self, gx: i64, gy: i64, x: u64, y: u64) -> i64 {
        let h = ((x ^ y) & window_mask(self.t, self.n)).count_ones() as i64;
        2 * (gy - gx) + 4 * h
    }

    fn swap(&mut self, x: u64, y: u64) {
        for (j, dm) in self.d.iter_mut().enumerate() {
            let r = self.t + 1 + j as u32;
            *dm += atom_sign(y, r) - atom_sign(x, r);
        }
    }
}

/// Build `M` for an instance. Hypotheses are checked for the regime; in the strict
/// regime a failed certificate is an internal error.
pub fn construct_m(inst: &RepairInstance, mode: Mode, regime: Regime) -> Result<RepairResult> {
    construct_m_capped(inst, mode, regime, EXHAUSTIVE_CAP)
}

pub fn construct_m_capped(inst: &RepairInstance, mode: Mode, regime: Regime, cap: u64) -> Result<RepairResult> {
    inst.check(regime)?;
    let result = construct_m_unchecked(inst, mode, cap)?;
    if regime == Regime::Strict && !(result.certificate.below_bound && result.certificate.semibalance.holds) {
        return Err(Error::Internal(format!(
            "certificate failed under the strict hypotheses: S = {}",
            ratio::to_text(&result.s_objective)
        )));
    }
    Ok(result)
}

/// [`construct_m`] without the hypothesis check; the certificate is still computed.
pub fn construct_m_unchecked(inst: &RepairInstance, mode: Mode, cap: u64) -> Result<RepairResult> {
    let feasible = inst.feasible_atoms()?;
    let k = inst.k as usize;
    if feasible.len() < k {
        return Err(Error::Infeasible(format!("{} feasible atoms, need {}", feasible.len(), k)));
    }
    let (_, _, z) = inst.lifted()?;
    let (chosen, scans, accepted) = match mode {
        Mode::SwapDescent => swap_descent(inst.t, inst.n, &feasible, k, &z),
        Mode::Exhaustive => (exhaustive(inst.t, inst.n, &feasible, k, &z, cap)?, 0, 0),
    };
    let m = CubeSet::from_atoms(inst.n, chosen.iter().copied());
    let s = objective_s(&m, &z, inst.t)?;
    let bound = s_bound(inst.k, inst.n);
    let certificate = Certificate {
        below_bound: s < bound,
        bound,
        exchange_inequality: exchange_inequality_holds(inst.t, inst.n, &m, &z, &feasible),
        semibalance: is_semibalanced(&m.union(&z), inst.t, &inst.eta),
    };
    Ok(RepairResult { m, s_objective: s, swap_scan_count: scans, accepted_swaps: accepted, certificate })
}

/// Starting set for the descent: mirror pairs `{a, T a}` in index order of `a`, both
/// feasible, then the first unused atoms. A mirror pair has `phi_m = 0` on `(t, n]`.
fn mirror_start(t: u32, n: u32, feasible: &[u64], k: usize) -> Vec<bool> {
    let w = window_mask(t, n);
    let mut in_m = vec![false; feasible.len()];
    let mut left = k;
    if w != 0 {
        for i in 0..feasible.len() {
            if left < 2 {
                break;
            }
            if in_m[i] {
                continue;
            }
            if let Ok(j) = feasible.binary_search(&(feasible[i] ^ w)) {
                if !in_m[j] {
                    in_m[i] = true;
                    in_m[j] = true;
                    left -= 2;
                }
            }
        }
    }
    for slot in in_m.iter_mut() {
        if left == 0 {
            break;
        }
        if !*slot {
            *slot = true;
            left -= 1;
        }
    }
    in_m
}

/// First-improvement swap descent from [`mirror_start`]. Pairs are scanned with `x` in
/// `M` and `y` outside, both in index order; after an accepted swap the scan restarts.
fn swap_descent(t: u32, n: u32, feasible: &[u64], k: usize, z: &CubeSet) -> (Vec<u64>, u64, u64) {
    let mut in_m = mirror_start(t, n, feasible, k);
    let start: Vec<u64> = (0..feasible.len()).filter(|&i| in_m[i]).map(|i| feasible[i]).collect();
    let mut st = Descent::new(t, n, z.atoms().chain(start));
    let mut g: Vec<i64> = feasible.iter().map(|&a| score(a, &st.d, t)).collect();
    let mut scans = 0u64;
    let mut accepted = 0u64;
    loop {
        let min_out = (0..feasible.len()).filter(|&i| !in_m[i]).map(|i| g[i]).min();
        let Some(min_out) = min_out else { break };
        let mut found = None;
        'outer: for xi in (0..feasible.len()).filter(|&i| in_m[i]) {
            // an improving partner needs g(y) <= g(x) - 2
            if min_out > g[xi] - 2 {
                continue;
            }
            for yi in (0..feasible.len()).filter(|&i| !in_m[i]) {
                if g[yi] > g[xi] - 2 {
                    continue;
                }
                scans += 1;
                if st.delta(g[xi], g[yi], feasible[xi], feasible[yi]) < 0 {
                    found = Some((xi, yi));
                    break 'outer;
                }
            }
        }
        let Some((xi, yi)) = found else { break };
        let (x, y) = (feasible[xi], feasible[yi]);
        st.swap(x, y);
        in_m[xi] = false;
        in_m[yi] = true;
        accepted += 1;
        // only coordinates where x and y differ move d, each by y_r - x_r = ±2
        let moved: Vec<(u32, i64)> =
            (t + 1..=n).filter(|&r| atom_sign(x, r) != atom_sign(y, r)).map(|r| (r, 2 * atom_sign(y, r))).collect();
        for (i, &a) in feasible.iter().enumerate() {
            g[i] += moved.iter().map(|&(r, dr)| atom_sign(a, r) * dr).sum::<i64>();
        }
    }
    let chosen = (0..feasible.len()).filter(|&i| in_m[i]).map(|i| feasible[i]).collect();
    (chosen, scans, accepted)
}

fn binomial(n: u64, k: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Number of feasible `M` for an instance.
pub fn feasible_count(inst: &RepairInstance) -> Result<Option<u64>> {
    let f = inst.feasible_atoms()?.len() as u64;
    if f < inst.k {
        return Ok(Some(0));
    }
    Ok(binomial(f, inst.k))
}

/// Global minimiser of `S`, first in lexicographic order of index combinations.
fn exhaustive(t: u32, n: u32, feasible: &[u64], k: usize, z: &CubeSet, cap: u64) -> Result<Vec<u64>> {
    let total = binomial(feasible.len() as u64, k as u64).unwrap_or(u64::MAX);
    if total > cap {
        return Err(Error::TooLarge { size: total, cap });
    }
    let base = Descent::new(t, n, z.atoms());
    let signs: Vec<Vec<i64>> = feasible.iter().map(|&a| (t + 1..=n).map(|r| atom_sign(a, r)).collect()).collect();
    let mut idx: Vec<usize> = (0..k).collect();
    let mut best: Option<(i128, Vec<usize>)> = None;
    loop {
        let mut d = base.d.clone();
        for &i in &idx {
            for (dm, s) in d.iter_mut().zip(&signs[i]) {
                *dm += s;
            }
        }
        let s: i128 = d.iter().map(|&x| (x as i128) * (x as i128)).sum();
        if best.as_ref().is_none_or(|(b, _)| s < *b) {
            best = Some((s, idx.clone()));
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                let (_, pick) = best.expect("at least one combination");
                return Ok(pick.into_iter().map(|i| feasible[i]).collect());
            }
            i -= 1;
            if idx[i] < feasible.len() - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// For every `x` in `M` and `y` in `F' \ M`:
/// `sum x_m phi_m(M ∪ Z) <= n / 2^(n-1) + sum y_m phi_m(M ∪ Z)`.
pub fn exchange_inequality_holds(t: u32, n: u32, m: &CubeSet, z: &CubeSet, feasible: &[u64]) -> bool {
    let st = Descent::new(t, n, m.union(z).atoms());
    let max_in = m.atoms().map(|a| score(a, &st.d, t)).max();
    let min_out = feasible.iter().filter(|&&a| !m.contains(a)).map(|&a| score(a, &st.d, t)).min();
    match (max_in, min_out) {
        // scaled by 2^n: g(x) <= 2n + g(y)
        (Some(x), Some(y)) => x <= 2 * n as i64 + y,
        _ => true,
    }
}

/// `S` of a set of atoms given as a descent state, for tests.
pub fn objective_from_atoms(t: u32, n: u32, atoms: impl Iterator<Item = u64>) -> Rational {
    let st = Descent::new(t, n, atoms);
    Rational::new(BigInt::from(st.s_numerator()), BigInt::one() << (2 * n))
}

/// The image of `A` under negation of coordinates `(t, n]`.
pub fn t_map(a: &CubeSet, t: u32) -> Result<CubeSet> {
    if t >= a.resolution() {
        return Ok(a.clone());
    }
    a.flip(t, a.resolution())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::{frac, int};
    use crate::Signs;

    #[test]
    fn objective_examples() {
        let e = CubeSet::empty(3);
        assert_eq!(objective_s(&e, &e, 0).unwrap(), int(0));
        let p = CubeSet::cylinder(&"+".parse::<Signs>().unwrap(), 1).unwrap();
        assert_eq!(objective_s(&p, &CubeSet::empty(1), 0).unwrap(), frac(1, 4));
        assert!(objective_s(&p, &p, 0).is_err());
    }

    #[test]
    fn rademacher_examples() {
        assert_eq!(rademacher_tail_mass(&[int(1), int(1)], &frac(1, 2)).unwrap(), frac(1, 2));
        assert_eq!(rademacher_tail_mass(&vec![int(0); 5], &frac(1, 2)).unwrap(), int(1));
        assert_eq!(rademacher_tail_mass(&[int(1)], &frac(1, 2)).unwrap(), int(1));
        assert!(rademacher_tail_mass(&vec![int(1); 21], &frac(1, 2)).is_err());
        assert!(rademacher_tail_mass(&[int(1)], &int(1)).is_err());
    }

    #[test]
    fn bessel_examples() {
        assert_eq!(bessel_defect(&CubeSet::empty(4), 0), (int(0), int(0)));
        let p = CubeSet::cylinder(&"+".parse::<Signs>().unwrap(), 1).unwrap();
        assert_eq!(bessel_defect(&p, 0), (frac(1, 4), frac(1, 2)));
    }

    fn instance(t: u32, eta: Rational, n: u32, k: u64, f: CubeSet) -> RepairInstance {
        RepairInstance { t, eta, n, k, q: CubeSet::empty(n), z: CubeSet::empty(n), f }
    }

    #[test]
    fn forced_choice_when_exactly_k_atoms() {
        let f = CubeSet::from_atoms(5, [0, 7, 9, 30]);
        let mut inst = instance(0, frac(1, 5), 5, 4, f.clone());
        inst.t = 0;
        // density hypothesis at t = 0 needs F of density 95/100, so check the forced case
        // directly through the searchers
        let feas: Vec<u64> = f.atoms().collect();
        let (a, _, _) = swap_descent(0, 5, &feas, 4, &CubeSet::empty(5));
        let b = exhaustive(0, 5, &feas, 4, &CubeSet::empty(5), 10).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, feas);
        assert!(inst.check(Regime::Relaxed).is_err());
    }

    #[test]
    fn single_atom_minimiser() {
        // k = 1, Z empty: every atom gives S = (n - t) / 4^n
        let n = 6;
        let t = 1;
        let f = CubeSet::full(n);
        let inst = instance(t, frac(3, 128), n, 1, f);
        let r = construct_m(&inst, Mode::SwapDescent, Regime::Relaxed).unwrap();
        assert_eq!(r.s_objective, Rational::new(BigInt::from(n - t), BigInt::one() << (2 * n)));
        let e = construct_m(&inst, Mode::Exhaustive, Regime::Relaxed).unwrap();
        assert_eq!(e.s_objective, r.s_objective);
        assert_eq!(r.m.count(), 1);
    }

    #[test]
    fn t_map_cancels_window() {
        let a = CubeSet::from_atoms(6, [5, 17, 40]);
        let t = 2;
        let u = a.union(&t_map(&a, t).unwrap());
        for m in t + 1..=6 {
            assert!(u.phi(m).is_zero());
        }
    }
}
