//! Semibalance and balance predicates, thresholds, the level-`n` rounding
//! homomorphism and the perturbation tolerance.
//!
//! Every predicate is a conjunction of strict inequalities `lhs < eps / k`.
//! A report names the first one that fails, in scan order: cylinders in index
//! order, and within a cylinder the density clause before coordinates `r`
//! in increasing order.

use std::fmt;

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::{FiniteAlgebra, PieceFamily};
use crate::cube::{CubeSet, Signs};
use crate::error::{Error, Result};
use crate::ratio::{self, dyadic};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    /// Neither the density nor the co-density inside the cylinder is small.
    Density,
    /// `|phi_r(A ∩ <s>)| / lambda(<s>)` too large for `r` in the window `(m, t]`.
    PhiWindow,
    /// The same quantity for `r > m` with no upper limit.
    PhiTail,
    /// `|phi_r(A)|` too large for `r > t`.
    Semibalance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub cylinder: Signs,
    pub coordinate: Option<u32>,
    #[serde(with = "ratio::text")]
    pub lhs: Rational,
    #[serde(with = "ratio::text")]
    pub rhs: Rational,
    /// Index of the offending member when a list of sets is checked.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub member: Option<usize>,
    /// The offending union when a piece family is checked.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub witness: Option<CubeSet>,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at cylinder '{}'", self.kind, self.cylinder)?;
        if let Some(r) = self.coordinate {
            write!(f, ", r = {r}")?;
        }
        if let Some(i) = self.member {
            write!(f, ", member {i}")?;
        }
        write!(f, ": {} >= {}", ratio::to_text(&self.lhs), ratio::to_text(&self.rhs))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub holds: bool,
    pub first_violation: Option<Violation>,
}

impl BalanceReport {
    pub fn pass() -> Self {
        BalanceReport { holds: true, first_violation: None }
    }

    pub fn fail(v: Violation) -> Self {
        BalanceReport { holds: false, first_violation: Some(v) }
    }

    pub fn into_result(self, context: &str) -> Result<()> {
        match self.first_violation {
            None => Ok(()),
            Some(v) => Err(Error::Hypothesis(format!("{context}: {v}"))),
        }
    }
}

/// Which union of pieces attains a requirement; built only when it is reported.
#[derive(Clone, Copy)]
enum Witness {
    None,
    /// Best density split inside a cylinder.
    Split,
    /// Pieces whose `phi` in this slot has the given sign.
    Sign(usize, i64),
}

/// One inequality `num / 2^exp < eps / k`.
#[derive(Clone, Copy)]
struct Requirement {
    kind: ViolationKind,
    cylinder: u64,
    level: u32,
    coordinate: Option<u32>,
    num: u64,
    exp: u32,
    k: u32,
    witness: Witness,
}

impl Requirement {
    fn lhs(&self) -> Rational {
        dyadic(self.num as i64, self.exp)
    }

    fn violation(&self, eps: &Rational, witness: Option<CubeSet>) -> Violation {
        Violation {
            kind: self.kind,
            cylinder: Signs::from_index(self.cylinder, self.level),
            coordinate: self.coordinate,
            lhs: self.lhs(),
            rhs: eps / Rational::from_integer(self.k.into()),
            member: None,
            witness,
        }
    }
}

/// `ceil(eps * 2^exp)` per exponent, `None` when it exceeds `u128`.
struct Ceilings {
    eps: Rational,
    cache: Vec<Option<Option<u128>>>,
}

impl Ceilings {
    fn new(eps: &Rational) -> Self {
        Ceilings { eps: eps.clone(), cache: vec![None; 65] }
    }

    fn get(&mut self, exp: u32) -> Option<u128> {
        let eps = &self.eps;
        *self.cache[exp as usize].get_or_insert_with(|| {
            let scaled = eps * Rational::from_integer(num_bigint::BigInt::one() << exp);
            let c = scaled.ceil().to_integer();
            if c.is_negative() {
                Some(0)
            } else {
                u128::try_from(c).ok()
            }
        })
    }

    /// `num / 2^exp >= eps / k`, decided in integers.
    fn fails(&mut self, q: &Requirement) -> bool {
        match self.get(q.exp) {
            Some(c) => q.num as u128 * q.k as u128 >= c,
            None => false,
        }
    }
}

fn first_failing<'a>(reqs: &'a [Requirement], eps: &Rational) -> Option<&'a Requirement> {
    let mut ceil = Ceilings::new(eps);
    reqs.iter().find(|q| ceil.fails(q))
}

fn first_failure(reqs: Vec<Requirement>, eps: &Rational) -> BalanceReport {
    match first_failing(&reqs, eps) {
        Some(q) => BalanceReport::fail(q.violation(eps, None)),
        None => BalanceReport::pass(),
    }
}

/// `max k * lhs` over the requirements: the predicate holds exactly for `eps` above it.
fn threshold(reqs: &[Requirement]) -> Rational {
    let top = reqs.iter().map(|q| q.exp).max().unwrap_or(0);
    reqs.iter()
        .map(|q| (q.num as u128 * q.k as u128) << (top - q.exp))
        .max()
        .map(|v| Rational::new(v.into(), num_bigint::BigInt::one() << top))
        .unwrap_or_else(Rational::zero)
}

fn check_level(m: u32) -> Result<()> {
    if m == 0 {
        Err(Error::Parameter("balance level m must be at least 1".into()))
    } else {
        Ok(())
    }
}

fn set_semibalance_reqs(a: &CubeSet, t: u32) -> Vec<Requirement> {
    let n = a.resolution();
    (t + 1..=n)
        .map(|r| Requirement {
            kind: ViolationKind::Semibalance,
            cylinder: 0,
            level: 0,
            coordinate: Some(r),
            num: a.phi_count(r).unsigned_abs(),
            exp: n,
            k: r,
            witness: Witness::None,
        })
        .collect()
}

/// Requirements of `(m, t, eps)`-balance, or of `(m, eps)`-balance when `t` is `None`.
fn set_balance_reqs(a: &CubeSet, m: u32, t: Option<u32>) -> Vec<Requirement> {
    let a = if a.resolution() < m { a.refine(m).expect("refine") } else { a.clone() };
    let n = a.resolution();
    let per = 1u64 << (n - m);
    let counts = a.prefix_counts(m);
    let phis = a.prefix_phi_counts(m);
    let (top, kind) = match t {
        Some(t) => (t.min(n), ViolationKind::PhiWindow),
        None => (n, ViolationKind::PhiTail),
    };
    let mut out = Vec::new();
    for (s, (&c, row)) in counts.iter().zip(&phis).enumerate() {
        out.push(Requirement {
            kind: ViolationKind::Density,
            cylinder: s as u64,
            level: m,
            coordinate: None,
            num: c.min(per - c),
            exp: n - m,
            k: m,
            witness: Witness::None,
        });
        for r in m + 1..=top {
            out.push(Requirement {
                kind,
                cylinder: s as u64,
                level: m,
                coordinate: Some(r),
                num: row[(r - m - 1) as usize].unsigned_abs(),
                exp: n - m,
                k: r,
                witness: Witness::None,
            });
        }
    }
    out
}

/// `(t, eps)`-semibalance: `|phi_r(A)| < eps / r` for every `r > t`.
pub fn is_semibalanced(a: &CubeSet, t: u32, eps: &Rational) -> BalanceReport {
    first_failure(set_semibalance_reqs(a, t), eps)
}

/// `(m, t, eps)`-balance.
pub fn is_mt_balanced(a: &CubeSet, m: u32, t: u32, eps: &Rational) -> Result<BalanceReport> {
    check_level(m)?;
    if t < m {
        return Err(Error::Parameter(format!("need t >= m, got m = {m}, t = {t}")));
    }
    Ok(first_failure(set_balance_reqs(a, m, Some(t)), eps))
}

/// `(m, eps)`-balance.
pub fn is_m_balanced(a: &CubeSet, m: u32, eps: &Rational) -> Result<BalanceReport> {
    check_level(m)?;
    Ok(first_failure(set_balance_reqs(a, m, None), eps))
}

/// The least value `e` such that `A` is `(t, eps)`-semibalanced for every `eps > e`.
pub fn semibalance_threshold(a: &CubeSet, t: u32) -> Rational {
    threshold(&set_semibalance_reqs(a, t))
}

/// The least value `e` such that `A` is `(m, t, eps)`-balanced (`(m, eps)`-balanced when
/// `t` is `None`) for every `eps > e`.
pub fn balance_threshold(a: &CubeSet, m: u32, t: Option<u32>) -> Result<Rational> {
    check_level(m)?;
    Ok(threshold(&set_balance_reqs(a, m, t)))
}

/// Balance of a list of sets: the first failing member, in input order.
pub fn family_is_m_balanced(family: &[CubeSet], m: u32, eps: &Rational) -> Result<BalanceReport> {
    for (i, a) in family.iter().enumerate() {
        let rep = is_m_balanced(a, m, eps)?;
        if let Some(mut v) = rep.first_violation {
            v.member = Some(i);
            return Ok(BalanceReport::fail(v));
        }
    }
    Ok(BalanceReport::pass())
}

/// Smallest `m > start`, `m` at most the family's resolution, at which every member is
/// `(m, eps)`-balanced. An empty family gives `start + 1`.
pub fn min_balance_level(family: &[CubeSet], eps: &Rational, start: u32) -> Option<u32> {
    if family.is_empty() {
        return Some(start + 1);
    }
    let n = family.iter().map(|a| a.resolution()).max().unwrap_or(1);
    (start + 1..=n).find(|&m| family_is_m_balanced(family, m, eps).map(|r| r.holds).unwrap_or(false))
}

// ---------------------------------------------------------------------------
// piece families

/// Reachable subset sums by bitset shifting; optionally keeps every prefix state.
fn subset_sums(values: &[u64], keep: bool) -> (Vec<u64>, Vec<Vec<u64>>) {
    let total: u64 = values.iter().sum();
    let words = (total as usize) / 64 + 1;
    let mut reach = vec![0u64; words];
    reach[0] = 1;
    let mut history = Vec::new();
    for &v in values {
        if keep {
            history.push(reach.clone());
        }
        if v == 0 {
            continue;
        }
        let (ws, bs) = ((v / 64) as usize, (v % 64) as u32);
        for i in (ws..words).rev() {
            let mut x = reach[i - ws] << bs;
            if bs > 0 && i > ws {
                x |= reach[i - ws - 1] >> (64 - bs);
            }
            reach[i] |= x;
        }
    }
    (reach, history)
}

fn bit(v: &[u64], i: u64) -> bool {
    v[(i / 64) as usize] >> (i % 64) & 1 == 1
}

/// The reachable subset sum `S` maximising `min(S, per - S)`.
fn best_split_value(values: &[u64], per: u64) -> u64 {
    let total: u64 = values.iter().sum();
    if 2 * total <= per {
        return total;
    }
    let (reach, _) = subset_sums(values, false);
    let half = per / 2;
    // the best sum is the reachable one closest to per / 2 from either side
    let below = (0..=half.min(total)).rev().find(|&s| bit(&reach, s)).unwrap_or(0);
    let above = (half..=total).find(|&s| bit(&reach, s)).unwrap_or(below);
    if above.min(per - above) > below.min(per - below) {
        above
    } else {
        below
    }
}

/// [`best_split_value`] with a subset achieving it, when the table fits in memory.
fn best_split(values: &[u64], per: u64) -> (u64, Option<Vec<bool>>) {
    let best = best_split_value(values, per);
    let total: u64 = values.iter().sum();
    if best == total {
        return (best, Some(vec![true; values.len()]));
    }
    if (values.len() as u64).saturating_mul(total) > 1 << 28 {
        return (best, None);
    }
    let (_, history) = subset_sums(values, true);
    let mut pick = vec![false; values.len()];
    let mut s = best;
    for i in (0..values.len()).rev() {
        if bit(&history[i], s) {
            continue;
        }
        pick[i] = true;
        s -= values[i];
    }
    debug_assert_eq!(s, 0);
    (best, Some(pick))
}

/// Per length-`m` cylinder, the pieces meeting it with their atom counts and signed
/// `phi` counts for coordinates `m + 1..=n`. Sparse, since pieces are disjoint.
struct PieceStats {
    n: u32,
    width: usize,
    cells: Vec<Vec<Cell>>,
}

struct Cell {
    piece: usize,
    count: u64,
    phis: Vec<i64>,
}

fn piece_stats(fam: &PieceFamily, m: u32) -> PieceStats {
    let n = fam.resolution().max(m);
    let width = (n - m) as usize;
    let mask = (1u64 << m) - 1;
    let mut cells: Vec<Vec<Cell>> = (0..1usize << m).map(|_| Vec::new()).collect();
    let mut count = vec![0u64; 1usize << m];
    let mut phis = vec![0i64; (1usize << m) * width];
    for (i, p) in fam.pieces().iter().enumerate() {
        let p = p.refine(n).expect("refine");
        let mut touched = Vec::new();
        for a in p.atoms() {
            let s = (a & mask) as usize;
            if count[s] == 0 {
                touched.push(s);
            }
            count[s] += 1;
            let row = &mut phis[s * width..(s + 1) * width];
            for (j, slot) in row.iter_mut().enumerate() {
                *slot += if a >> (m as usize + j) & 1 == 1 { 1 } else { -1 };
            }
        }
        for s in touched {
            let row = &mut phis[s * width..(s + 1) * width];
            cells[s].push(Cell { piece: i, count: count[s], phis: row.to_vec() });
            row.fill(0);
            count[s] = 0;
        }
    }
    PieceStats { n, width, cells }
}

fn mask_union(fam: &PieceFamily, pick: impl Fn(usize) -> bool) -> CubeSet {
    let mask: Vec<bool> = (0..fam.pieces().len()).map(pick).collect();
    fam.union_of(&mask)
}

fn signed_mass(values: impl Iterator<Item = i64>) -> (u64, i64) {
    let (mut pos, mut neg) = (0u64, 0u64);
    for v in values {
        if v > 0 {
            pos += v as u64;
        } else {
            neg += v.unsigned_abs();
        }
    }
    if pos >= neg {
        (pos, 1)
    } else {
        (neg, -1)
    }
}

fn pieces_balance_reqs(st: &PieceStats, m: u32, t: Option<u32>) -> Vec<Requirement> {
    let n = st.n;
    let per = 1u64 << (n - m);
    let (top, kind) = match t {
        Some(t) => (t.min(n), ViolationKind::PhiWindow),
        None => (n, ViolationKind::PhiTail),
    };
    debug_assert!((top - m) as usize <= st.width || top <= m);
    let mut out = Vec::new();
    for (s, cell) in st.cells.iter().enumerate() {
        let values: Vec<u64> = cell.iter().map(|c| c.count).collect();
        let best = best_split_value(&values, per);
        out.push(Requirement {
            kind: ViolationKind::Density,
            cylinder: s as u64,
            level: m,
            coordinate: None,
            num: best.min(per - best),
            exp: n - m,
            k: m,
            witness: Witness::Split,
        });
        for r in m + 1..=top {
            let j = (r - m - 1) as usize;
            let (worst, sign) = signed_mass(cell.iter().map(|c| c.phis[j]));
            out.push(Requirement {
                kind,
                cylinder: s as u64,
                level: m,
                coordinate: Some(r),
                num: worst,
                exp: n - m,
                k: r,
                witness: Witness::Sign(j, sign),
            });
        }
    }
    out
}

fn pieces_first_failure(fam: &PieceFamily, m: u32, t: Option<u32>, eps: &Rational) -> BalanceReport {
    let st = piece_stats(fam, m);
    let reqs = pieces_balance_reqs(&st, m, t);
    let Some(q) = first_failing(&reqs, eps) else {
        return BalanceReport::pass();
    };
    let cell = &st.cells[q.cylinder as usize];
    let pieces = |pick: &dyn Fn(&Cell) -> bool| {
        let chosen: Vec<usize> = cell.iter().filter(|c| pick(c)).map(|c| c.piece).collect();
        mask_union(fam, |i| chosen.contains(&i))
    };
    let witness = match q.witness {
        Witness::None => None,
        Witness::Split => {
            let values: Vec<u64> = cell.iter().map(|c| c.count).collect();
            best_split(&values, 1u64 << (st.n - m)).1.map(|p| {
                let chosen: Vec<usize> = cell.iter().zip(&p).filter(|(_, &b)| b).map(|(c, _)| c.piece).collect();
                mask_union(fam, |i| chosen.contains(&i))
            })
        }
        Witness::Sign(j, sign) => Some(pieces(&|c: &Cell| c.phis[j] * sign > 0)),
    };
    BalanceReport::fail(q.violation(eps, witness))
}

fn piece_phis(fam: &PieceFamily) -> Vec<Vec<i64>> {
    let n = fam.resolution();
    fam.pieces().iter().map(|p| (1..=n).map(|r| p.phi_count(r)).collect()).collect()
}

fn pieces_semibalance_reqs(phis: &[Vec<i64>], n: u32, t: u32) -> Vec<Requirement> {
    (t + 1..=n)
        .map(|r| {
            let j = (r - 1) as usize;
            let (worst, sign) = signed_mass(phis.iter().map(|p| p[j]));
            Requirement {
                kind: ViolationKind::Semibalance,
                cylinder: 0,
                level: 0,
                coordinate: Some(r),
                num: worst,
                exp: n,
                k: r,
                witness: Witness::Sign(j, sign),
            }
        })
        .collect()
}

impl PieceFamily {
    /// Every union of pieces is `(t, eps)`-semibalanced.
    pub fn is_semibalanced(&self, t: u32, eps: &Rational) -> BalanceReport {
        let phis = piece_phis(self);
        let reqs = pieces_semibalance_reqs(&phis, self.resolution(), t);
        match first_failing(&reqs, eps) {
            None => BalanceReport::pass(),
            Some(q) => {
                let witness = match q.witness {
                    Witness::Sign(j, sign) => Some(mask_union(self, |i| phis[i][j] * sign > 0)),
                    _ => None,
                };
                BalanceReport::fail(q.violation(eps, witness))
            }
        }
    }

    /// Every union of pieces is `(m, t, eps)`-balanced.
    pub fn is_mt_balanced(&self, m: u32, t: u32, eps: &Rational) -> Result<BalanceReport> {
        check_level(m)?;
        if t < m {
            return Err(Error::Parameter(format!("need t >= m, got m = {m}, t = {t}")));
        }
        Ok(pieces_first_failure(self, m, Some(t), eps))
    }

    /// Every union of pieces is `(m, eps)`-balanced.
    pub fn is_m_balanced(&self, m: u32, eps: &Rational) -> Result<BalanceReport> {
        check_level(m)?;
        Ok(pieces_first_failure(self, m, None, eps))
    }

    pub fn balance_threshold(&self, m: u32, t: Option<u32>) -> Result<Rational> {
        check_level(m)?;
        Ok(threshold(&pieces_balance_reqs(&piece_stats(self, m), m, t)))
    }

    pub fn semibalance_threshold(&self, t: u32) -> Rational {
        threshold(&pieces_semibalance_reqs(&piece_phis(self), self.resolution(), t))
    }

    /// Smallest `m > start`, at most the resolution, at which the family is `(m, eps)`-balanced.
    pub fn min_balance_level(&self, eps: &Rational, start: u32) -> Option<u32> {
        (start + 1..=self.resolution()).find(|&m| self.is_m_balanced(m, eps).map(|r| r.holds).unwrap_or(false))
    }
}

impl FiniteAlgebra {
    /// Every element is `(m, eps)`-balanced.
    pub fn is_m_balanced(&self, m: u32, eps: &Rational) -> Result<BalanceReport> {
        self.as_pieces().is_m_balanced(m, eps)
    }

    /// Both halves of the split family by `b` are `(m, eps)`-balanced.
    pub fn split_is_m_balanced(&self, b: &CubeSet, m: u32, eps: &Rational) -> Result<BalanceReport> {
        for fam in self.split_family(b) {
            let rep = fam.is_m_balanced(m, eps)?;
            if !rep.holds {
                return Ok(rep);
            }
        }
        Ok(BalanceReport::pass())
    }

    pub fn split_is_mt_balanced(&self, b: &CubeSet, m: u32, t: u32, eps: &Rational) -> Result<BalanceReport> {
        for fam in self.split_family(b) {
            let rep = fam.is_mt_balanced(m, t, eps)?;
            if !rep.holds {
                return Ok(rep);
            }
        }
        Ok(BalanceReport::pass())
    }
}

// ---------------------------------------------------------------------------
// rounding homomorphism

/// `h_n(A)`: the union of the length-`n` cylinders in which `A` has co-density below `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct Homomorphism {
    level: u32,
    eps: Rational,
}

impl Homomorphism {
    /// Rounding without checking any hypothesis.
    pub fn unchecked(level: u32, eps: Rational) -> Self {
        Homomorphism { level, eps }
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn apply(&self, a: &CubeSet) -> CubeSet {
        let n = self.level;
        let a = if a.resolution() < n { a.refine(n).expect("refine") } else { a.clone() };
        let res = a.resolution();
        let per = 1u64 << (res - n);
        let mut out = CubeSet::empty(res);
        let per_q = Rational::from_integer(per.into());
        for (s, c) in a.prefix_counts(n).into_iter().enumerate() {
            if Rational::from_integer((per - c).into()) < &self.eps * &per_q {
                out = out.union(&CubeSet::cylinder(&Signs::from_index(s as u64, n), res).expect("cylinder"));
            }
        }
        out
    }
}

/// The level-`n` rounding on an algebra all of whose elements are `(n, eps)`-balanced.
pub fn approx_homomorphism(h: &FiniteAlgebra, n: u32, eps: &Rational) -> Result<Homomorphism> {
    if *eps >= ratio::frac(1, 3) || !eps.is_positive() {
        return Err(Error::Parameter(format!("need 0 < eps < 1/3, got {}", ratio::to_text(eps))));
    }
    h.is_m_balanced(n, eps)?.into_result("algebra is not (n, eps)-balanced")?;
    Ok(Homomorphism { level: n, eps: eps.clone() })
}

/// `(eps - eps1) / (2^m t)`: any `B` lighter than this keeps `A ∪ B` and `A \ B`
/// `(m, t, eps)`-balanced when `A` is `(m, t, eps1)`-balanced.
pub fn perturbation_tolerance(m: u32, t: u32, eps: &Rational, eps1: &Rational) -> Result<Rational> {
    check_level(m)?;
    if t <= m {
        return Err(Error::Parameter(format!("need t > m, got m = {m}, t = {t}")));
    }
    if !eps1.is_positive() || eps1 >= eps {
        return Err(Error::Parameter("need 0 < eps1 < eps".into()));
    }
    let scale = Rational::from_integer((num_bigint::BigInt::one() << m) * t);
    Ok((eps - eps1) / scale)
}

/// `min positive mass / 100`, the balance level required by [`good_cylinder`].
pub fn good_cylinder_epsilon(f: &FiniteAlgebra) -> Rational {
    f.min_positive_mass().to_rational() / Rational::from_integer(100.into())
}

/// A cylinder of length `t` in which `A` has density at least `99/100`.
pub fn good_cylinder(a: &CubeSet, t: u32, f: &FiniteAlgebra) -> Result<Signs> {
    if t == 0 {
        return Err(Error::Parameter("level t must be at least 1".into()));
    }
    let eps = good_cylinder_epsilon(f);
    f.is_m_balanced(t, &eps)?.into_result("algebra is not (t, min mass / 100)-balanced")?;
    if a.is_empty() {
        return Err(Error::Hypothesis("set has zero measure".into()));
    }
    if !f.contains(a) {
        return Err(Error::Hypothesis("set is not an element of the algebra".into()));
    }
    dense_cylinder(a, t, &ratio::frac(99, 100))
        .ok_or_else(|| Error::Internal("no cylinder of density 99/100 under a balanced algebra".into()))
}

/// First cylinder of length `t` (index order) in which `A` has density at least `bound`.
pub fn dense_cylinder(a: &CubeSet, t: u32, bound: &Rational) -> Option<Signs> {
    let a = if a.resolution() < t { a.refine(t).expect("refine") } else { a.clone() };
    let n = a.resolution();
    a.prefix_counts(t)
        .into_iter()
        .enumerate()
        .find(|(_, c)| dyadic(*c as i64, n - t) >= *bound)
        .map(|(s, _)| Signs::from_index(s as u64, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn sg(s: &str) -> Signs {
        s.parse().unwrap()
    }

    #[test]
    fn semibalance_examples() {
        assert!(is_semibalanced(&CubeSet::full(5), 0, &frac(1, 1000)).holds);
        let p = CubeSet::cylinder(&sg("+"), 1).unwrap();
        let rep = is_semibalanced(&p, 0, &frac(1, 4));
        let v = rep.first_violation.unwrap();
        assert_eq!(v.kind, ViolationKind::Semibalance);
        assert_eq!(v.coordinate, Some(1));
        assert_eq!(v.lhs, frac(1, 2));
        assert_eq!(v.rhs, frac(1, 4));
    }

    #[test]
    fn mt_balance_examples() {
        let c = CubeSet::cylinder(&sg("+-"), 5).unwrap();
        for m in 2..=5 {
            for t in m..=6 {
                assert!(is_mt_balanced(&c, m, t, &frac(1, 100)).unwrap().holds);
            }
        }
        // {x : x1 = x2}: density 1/2 in both halves
        let a = CubeSet::from_atoms(2, [0, 3]);
        let v = is_mt_balanced(&a, 1, 2, &frac(1, 2)).unwrap().first_violation.unwrap();
        assert_eq!(v.kind, ViolationKind::Density);
        assert_eq!(v.lhs, frac(1, 2));
        assert_eq!(v.rhs, frac(1, 2));
        assert!(is_mt_balanced(&a, 2, 1, &frac(1, 2)).is_err());
    }

    #[test]
    fn m_balance_examples() {
        let p = CubeSet::cylinder(&sg("+"), 4).unwrap();
        assert!(is_m_balanced(&p, 1, &frac(2, 5)).unwrap().holds);
        let family = [CubeSet::from_atoms(3, [1, 2, 7]), CubeSet::from_atoms(3, [0])];
        assert!(family_is_m_balanced(&family, 3, &frac(1, 1000)).unwrap().holds);
        assert!(family_is_m_balanced(&family, 4, &frac(1, 1000)).unwrap().holds);
    }

    #[test]
    fn min_level_examples() {
        let fam = vec![CubeSet::cylinder(&sg("+-+"), 6).unwrap(), CubeSet::cylinder(&sg("--"), 6).unwrap()];
        assert_eq!(min_balance_level(&fam, &frac(1, 10), 0), Some(3));
        assert_eq!(min_balance_level(&[], &frac(1, 10), 4), Some(5));
    }

    #[test]
    fn perturbation_examples() {
        assert_eq!(perturbation_tolerance(1, 2, &frac(1, 2), &frac(1, 4)).unwrap(), frac(1, 16));
        assert!(perturbation_tolerance(2, 2, &frac(1, 2), &frac(1, 4)).is_err());
        assert!(perturbation_tolerance(1, 2, &frac(1, 4), &frac(1, 4)).is_err());
        let a = perturbation_tolerance(1, 3, &frac(1, 2), &frac(1, 3)).unwrap();
        let b = perturbation_tolerance(1, 3, &frac(1, 2), &frac(49, 100)).unwrap();
        assert!(b < a);
    }

    #[test]
    fn homomorphism_on_level_algebra_is_identity() {
        let h = FiniteAlgebra::level(2, 5).unwrap();
        let hom = approx_homomorphism(&h, 3, &frac(1, 4)).unwrap();
        for e in h.elements().unwrap() {
            assert_eq!(hom.apply(&e), e);
        }
        let triv = FiniteAlgebra::trivial(4);
        let hom = approx_homomorphism(&triv, 2, &frac(1, 5)).unwrap();
        assert!(hom.apply(&CubeSet::empty(4)).is_empty());
        assert!(hom.apply(&CubeSet::full(4)).is_full());
        assert!(approx_homomorphism(&triv, 2, &frac(1, 3)).is_err());
    }

    #[test]
    fn good_cylinder_examples() {
        let f = FiniteAlgebra::level(3, 5).unwrap();
        let s = sg("+-+");
        let a = CubeSet::cylinder(&s, 5).unwrap();
        assert_eq!(good_cylinder(&a, 3, &f).unwrap(), s);
        assert_eq!(good_cylinder(&CubeSet::full(5), 3, &f).unwrap(), sg("---"));
        assert!(good_cylinder(&CubeSet::empty(5), 3, &f).is_err());
    }

    #[test]
    fn best_split_reconstructs_a_subset() {
        let values = [5u64, 9, 3, 7, 1];
        let (best, pick) = best_split(&values, 32);
        let pick = pick.unwrap();
        let sum: u64 = values.iter().zip(&pick).filter(|(_, &p)| p).map(|(v, _)| v).sum();
        assert_eq!(sum, best);
        assert_eq!(best, 16);
    }
}
