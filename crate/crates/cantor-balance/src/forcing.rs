//! A desk-scale model of the forcing that adds `G`: conditions, their order, the
//! centering key, extension to a given length, hitting the two kinds of dense sets, and
//! finite descending runs with the checks a generic filter would satisfy.
//!
//! The representation `B = ⋃ B_n` is given as a finite chain; `B_n` past its end is the
//! last supplied algebra.

use std::collections::HashMap;

use num_traits::Signed;
use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAlgebra;
use crate::cube::{CubeSet, Signs};
use crate::error::{Error, Result};
use crate::extension::{
    check_gstar, one_step, CheckReport, ExtensionConfig, ExtensionState, GStarWitness, StarAlgebra,
};
use crate::measures::{FAMeasure, NormalFamily};
use crate::ratio::{int, pow2_neg};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingCondition {
    pub k: usize,
    pub m_seq: Vec<u32>,
    #[serde(rename = "G_seq")]
    pub g_seq: Vec<CubeSet>,
    #[serde(rename = "H_seq")]
    pub h_seq: Vec<CubeSet>,
    pub ms: Vec<FAMeasure>,
}

/// Everything but `Ms`, with sets in canonical form.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CenteringKey {
    pub k: usize,
    pub m_seq: Vec<u32>,
    #[serde(rename = "G_seq")]
    pub g_seq: Vec<CubeSet>,
    #[serde(rename = "H_seq")]
    pub h_seq: Vec<CubeSet>,
}

fn push_measure(ms: &mut Vec<FAMeasure>, mu: &FAMeasure) {
    if !ms.iter().any(|x| x.same_measure(mu)) {
        ms.push(mu.canonical());
    }
}

fn measures_include(big: &[FAMeasure], small: &[FAMeasure]) -> bool {
    small.iter().all(|mu| big.iter().any(|x| x.same_measure(mu)))
}

/// `B_n`, 1-based.
pub fn algebra_at(chain: &[FiniteAlgebra], n: usize) -> FiniteAlgebra {
    chain.get(n.saturating_sub(1)).or(chain.last()).cloned().unwrap_or_else(|| FiniteAlgebra::trivial(1))
}

fn chain_prefix(chain: &[FiniteAlgebra], len: usize) -> Vec<FiniteAlgebra> {
    (1..=len).map(|n| algebra_at(chain, n)).collect()
}

impl ForcingCondition {
    /// `k = 0` with `Ms = {λ} ∪ extra`.
    pub fn trivial(extra: &[FAMeasure]) -> Self {
        let mut ms = vec![FAMeasure::lebesgue(0)];
        for mu in extra {
            push_measure(&mut ms, mu);
        }
        ForcingCondition { k: 0, m_seq: Vec::new(), g_seq: Vec::new(), h_seq: Vec::new(), ms }
    }

    pub fn g_hat(&self) -> CubeSet {
        self.g_seq.iter().fold(CubeSet::empty(1), |acc, g| acc.union(g))
    }

    pub fn h_hat(&self) -> CubeSet {
        self.h_seq.iter().fold(CubeSet::empty(1), |acc, h| acc.union(h))
    }

    /// Every condition clause, the first failure reported.
    pub fn validate(&self, chain: &[FiniteAlgebra]) -> CheckReport {
        let k = self.k;
        if self.m_seq.len() != k || self.g_seq.len() != k || self.h_seq.len() != k {
            return CheckReport::fail("lengths", None, format!("sequence lengths differ from k = {k}"));
        }
        if let Some(i) = self.m_seq.windows(2).position(|w| w[0] >= w[1]) {
            return CheckReport::fail("increasing", Some(i + 2), "m is not strictly increasing");
        }
        if let Some(i) = self.ms.iter().position(|mu| !mu.is_positive() || mu.norm() != int(1)) {
            return CheckReport::fail("probability", Some(i + 1), "measure of Ms is not a probability measure");
        }
        let lambda = FAMeasure::lebesgue(0);
        if !self.ms.iter().any(|mu| mu.same_measure(&lambda)) {
            return CheckReport::fail("lebesgue", None, "λ is not in Ms");
        }
        for n in 0..k {
            for l in 0..k {
                if n == l {
                    continue;
                }
                let (gn, hn) = (&self.g_seq[n], &self.h_seq[n]);
                let clash = (n < l && (!gn.is_disjoint(&self.g_seq[l]) || !hn.is_disjoint(&self.h_seq[l])))
                    || !gn.is_disjoint(&self.h_seq[l]);
                if clash {
                    return CheckReport::fail(
                        "disjoint",
                        Some(n + 1),
                        format!("sets at positions {} and {} meet", n + 1, l + 1),
                    );
                }
            }
        }
        let used = self.g_hat().union(&self.h_hat());
        if let Some(i) = self.ms.iter().position(|mu| mu.eval(&used) >= crate::ratio::frac(1, 10)) {
            return CheckReport::fail("mass", Some(i + 1), "a measure of Ms gives the used sets 1/10 or more");
        }
        let g = self.g_hat();
        for n in 1..=k {
            match algebra_at(chain, n).split_is_m_balanced(&g, self.m_seq[n - 1], &pow2_neg(n as u32)) {
                Ok(rep) if rep.holds => {}
                Ok(rep) => {
                    let v = rep.first_violation.map(|v| v.to_string()).unwrap_or_default();
                    return CheckReport::fail("balance", Some(n), v);
                }
                Err(e) => return CheckReport::fail("balance", Some(n), e.to_string()),
            }
        }
        CheckReport::pass()
    }

    pub fn is_valid(&self, chain: &[FiniteAlgebra]) -> bool {
        self.validate(chain).holds
    }

    pub fn centering_key(&self) -> CenteringKey {
        CenteringKey {
            k: self.k,
            m_seq: self.m_seq.clone(),
            g_seq: self.g_seq.iter().map(CubeSet::canonical).collect(),
            h_seq: self.h_seq.iter().map(CubeSet::canonical).collect(),
        }
    }

    /// The condition below both, when the keys agree: `Ms` is the union.
    pub fn merge(&self, other: &ForcingCondition) -> Result<ForcingCondition> {
        if self.centering_key() != other.centering_key() {
            return Err(Error::Parameter("conditions with different keys have no canonical common extension".into()));
        }
        let mut r = self.clone();
        for mu in &other.ms {
            push_measure(&mut r.ms, mu);
        }
        Ok(r)
    }

    /// Same key and the same set of measures.
    pub fn equivalent(&self, other: &ForcingCondition) -> bool {
        self.centering_key() == other.centering_key()
            && measures_include(&self.ms, &other.ms)
            && measures_include(&other.ms, &self.ms)
    }

    fn pushed(&self, m: u32, g: CubeSet, h: CubeSet, ms: Vec<FAMeasure>) -> ForcingCondition {
        let mut q = self.clone();
        q.k += 1;
        q.m_seq.push(m);
        q.g_seq.push(g);
        q.h_seq.push(h);
        q.ms = ms;
        q
    }

    fn extension_state(&self, chain: &[FiniteAlgebra], ms: Vec<FAMeasure>) -> ExtensionState {
        let mut s = ExtensionState::new(chain_prefix(chain, self.k + 1), ms);
        s.k = self.k;
        s.m_seq = self.m_seq.clone();
        s.g_parts = self.g_seq.clone();
        s.h0_parts = self.h_seq.clone();
        s
    }
}

/// `q <= p`: `q` extends every sequence of `p` and has at least its measures.
pub fn leq(q: &ForcingCondition, p: &ForcingCondition, chain: &[FiniteAlgebra]) -> Result<bool> {
    for (name, c) in [("q", q), ("p", p)] {
        if let Some(f) = c.validate(chain).failure {
            return Err(Error::Hypothesis(format!("{name} is not a condition: {f}")));
        }
    }
    Ok(q.extends(p))
}

impl ForcingCondition {
    /// The clauses of `self <= p` without validating either side.
    pub fn extends(&self, p: &ForcingCondition) -> bool {
        let k = p.k;
        self.k >= k
            && self.m_seq[..k] == p.m_seq[..]
            && self.g_seq[..k].iter().zip(&p.g_seq).all(|(a, b)| a.same_set(b))
            && self.h_seq[..k].iter().zip(&p.h_seq).all(|(a, b)| a.same_set(b))
            && measures_include(&self.ms, &p.ms)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingConfig {
    pub extension: ExtensionConfig,
    /// Measures in each family of fresh point masses used to lengthen a condition.
    pub fresh_family_len: usize,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig { extension: ExtensionConfig { horizon: 5, ..ExtensionConfig::default() }, fresh_family_len: 4 }
    }
}

/// Unit point masses accumulating inside the shortest cylinder `<s>` missing `used`:
/// measure `i` sits at `s`, `i - 1` minus signs, then a plus.
pub fn fresh_family(used: &CubeSet, len: usize) -> Result<NormalFamily> {
    let (free, n) = (1..=used.resolution())
        .find_map(|n| used.prefix_counts(n).iter().position(|&c| c == 0).map(|x| (x as u64, n)))
        .ok_or_else(|| Error::Infeasible("no free cylinder for fresh supports".into()))?;
    let s: Vec<i8> = Signs::from_index(free, n).iter().collect();
    let nus = (0..len)
        .map(|i| {
            let mut v = s.clone();
            v.extend(std::iter::repeat_n(-1, i));
            v.push(1);
            FAMeasure::point(Signs::new(v), int(1))
        })
        .collect();
    NormalFamily::new(nus, FAMeasure::point(Signs::new(s), int(1)))
}

/// A condition below `p` of length `k_target`, one step at a time, each step fed a
/// fresh family supported off the used sets and its limit added to `Ms`.
pub fn extend_to_k(
    p: &ForcingCondition,
    k_target: usize,
    chain: &[FiniteAlgebra],
    cfg: &ForcingConfig,
) -> Result<ForcingCondition> {
    let mut q = p.clone();
    while q.k < k_target {
        let fam = fresh_family(&q.g_hat().union(&q.h_hat()), cfg.fresh_family_len)?;
        let mut ms = q.ms.clone();
        push_measure(&mut ms, &fam.limit);
        let state = q.extension_state(chain, ms.clone());
        let out = one_step(&state, &fam, 0, &cfg.extension)?;
        q = q.pushed(out.m_next, out.g_prime, out.h0, ms);
    }
    if let Some(f) = q.validate(chain).failure {
        return Err(Error::Internal(format!("extension is not a condition: {f}")));
    }
    Ok(q)
}

/// `D_k`: the last `H` is big for some `nu_n` and `G` meets it heavily. `E_k`: the last
/// `H` is big for some `nu_n` and misses `G`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DenseKind {
    D,
    E,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseHit {
    pub condition: ForcingCondition,
    /// The `n > k` witnessing membership.
    pub index: usize,
}

/// Whether `q` is in the dense set of kind `which` for `k`, witnessed by `nu_n`.
pub fn in_dense(
    q: &ForcingCondition,
    fam: &NormalFamily,
    k: usize,
    which: DenseKind,
    n: usize,
    cfg: &ExtensionConfig,
) -> bool {
    if q.k <= k || n <= k || n > fam.len() {
        return false;
    }
    let (g, h) = (&q.g_seq[q.k - 1], &q.h_seq[q.k - 1]);
    let nu = fam.get(n);
    if nu.variation(h) < cfg.variation_floor {
        return false;
    }
    match which {
        DenseKind::D => nu.eval(&g.intersection(h)).abs() >= cfg.hit_floor,
        DenseKind::E => g.is_disjoint(h),
    }
}

/// A condition `q <= p` in the dense set of kind `which` for `k`.
pub fn hit_dense(
    p: &ForcingCondition,
    fam: &NormalFamily,
    k: usize,
    which: DenseKind,
    chain: &[FiniteAlgebra],
    cfg: &ForcingConfig,
) -> Result<DenseHit> {
    if !p.ms.iter().any(|mu| mu.same_measure(&fam.limit)) {
        return Err(Error::Hypothesis("the family's limit is not in Ms".into()));
    }
    if let Some(f) = p.validate(chain).failure {
        return Err(Error::Hypothesis(format!("p is not a condition: {f}")));
    }
    let r = if p.k < k { extend_to_k(p, k, chain, cfg)? } else { p.clone() };
    let state = r.extension_state(chain, r.ms.clone());
    let out = one_step(&state, fam, k, &cfg.extension)?;
    let (h, index) = match which {
        DenseKind::D => (out.h0, out.a),
        DenseKind::E => (out.h1, out.b),
    };
    let q = r.pushed(out.m_next, out.g_prime, h, r.ms.clone());
    if let Some(f) = q.validate(chain).failure {
        return Err(Error::Internal(format!("dense hit is not a condition: {f}")));
    }
    if !leq(&q, p, chain)? || !in_dense(&q, fam, k, which, index, &cfg.extension) {
        return Err(Error::Internal("dense hit misses its target".into()));
    }
    Ok(DenseHit { condition: q, index })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenseRequest {
    pub which: DenseKind,
    /// Defaults to the largest index this family has used so far.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduledFamily {
    pub family: NormalFamily,
    pub requests: Vec<DenseRequest>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunEvent {
    /// Position in the chain of the condition that hit.
    pub position: usize,
    pub family: usize,
    pub which: DenseKind,
    pub k: usize,
    pub index: usize,
    /// Length of the hitting condition; its last `H` is the one used.
    pub level: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyWitness {
    pub family: usize,
    pub witness: GStarWitness,
    pub report: CheckReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunTranscript {
    pub chain: Vec<ForcingCondition>,
    #[serde(rename = "G")]
    pub g: CubeSet,
    #[serde(rename = "H_list")]
    pub h_list: Vec<CubeSet>,
    pub events: Vec<RunEvent>,
    /// `G ∩ H_n` is fixed by the first condition of length at least `n`.
    pub stabilization: CheckReport,
    pub witnesses: Vec<FamilyWitness>,
    /// Every condition is valid, the chain descends, and the split families of the
    /// chain's algebras by `G` are balanced at the final levels.
    pub balance: CheckReport,
    pub holds: bool,
}

fn check_stabilization(chain: &[ForcingCondition], g: &CubeSet) -> CheckReport {
    let depth = chain.last().map_or(0, |p| p.k);
    for n in 1..=depth {
        let first = chain.iter().position(|p| p.k >= n).expect("some condition reaches the depth");
        let want = chain[first].g_seq[n - 1].intersection(&chain[first].h_seq[n - 1]);
        for (i, p) in chain.iter().enumerate().skip(first) {
            if !p.g_seq[n - 1].intersection(&p.h_seq[n - 1]).same_set(&want) {
                return CheckReport::fail("i", Some(n), format!("G_n ∩ H_n changes at chain position {i}"));
            }
        }
        if !g.intersection(&chain[first].h_seq[n - 1]).same_set(&want) {
            return CheckReport::fail("i", Some(n), "G ∩ H_n differs from G_n ∩ H_n");
        }
    }
    CheckReport::pass()
}

fn check_chain(chain: &[ForcingCondition], algebras: &[FiniteAlgebra], g: &CubeSet) -> CheckReport {
    for (i, p) in chain.iter().enumerate() {
        if let Some(f) = p.validate(algebras).failure {
            return CheckReport::fail("iii", Some(i), format!("condition is invalid: {f}"));
        }
        if i > 0 && !leq(p, &chain[i - 1], algebras).unwrap_or(false) {
            return CheckReport::fail("iii", Some(i), "chain does not descend");
        }
    }
    let last = chain.last().expect("chain is never empty");
    for n in 1..=last.k {
        match algebra_at(algebras, n).split_is_m_balanced(g, last.m_seq[n - 1], &pow2_neg(n as u32)) {
            Ok(rep) if rep.holds => {}
            Ok(_) => return CheckReport::fail("iii", Some(n), "split family by G is not balanced"),
            Err(e) => return CheckReport::fail("iii", Some(n), e.to_string()),
        }
    }
    CheckReport::pass()
}

/// A descending chain from the trivial condition (with the families' limits in `Ms`)
/// hitting the scheduled dense sets round-robin, then lengthened to `depth`.
pub fn run_generic(
    schedule: &[ScheduledFamily],
    depth: usize,
    chain: &[FiniteAlgebra],
    cfg: &ForcingConfig,
) -> Result<RunTranscript> {
    let mut cfg = cfg.clone();
    cfg.extension.horizon = cfg.extension.horizon.max(depth);
    let cfg = &cfg;
    let limits: Vec<FAMeasure> = schedule.iter().map(|s| s.family.limit.clone()).collect();
    let mut conds = vec![ForcingCondition::trivial(&limits)];
    let mut events = Vec::new();
    let mut last_index: HashMap<usize, usize> = HashMap::new();
    let rounds = schedule.iter().map(|s| s.requests.len()).max().unwrap_or(0);
    for round in 0..rounds {
        for (fi, s) in schedule.iter().enumerate() {
            let Some(req) = s.requests.get(round) else { continue };
            let k = req.k.unwrap_or_else(|| last_index.get(&fi).copied().unwrap_or(0));
            let p = conds.last().expect("nonempty");
            let hit = hit_dense(p, &s.family, k, req.which, chain, cfg)?;
            // a lengthening inside hit_dense is recorded as its own link
            if hit.condition.k > p.k + 1 {
                let mut mid = hit.condition.clone();
                let len = mid.k - 1;
                mid.k = len;
                mid.m_seq.truncate(len);
                mid.g_seq.truncate(len);
                mid.h_seq.truncate(len);
                conds.push(mid);
            }
            last_index.insert(fi, hit.index);
            events.push(RunEvent {
                position: conds.len(),
                family: fi,
                which: req.which,
                k,
                index: hit.index,
                level: hit.condition.k,
            });
            conds.push(hit.condition);
        }
    }
    let last = conds.last().expect("nonempty");
    if last.k < depth {
        let q = extend_to_k(last, depth, chain, cfg)?;
        conds.push(q);
    }
    let last = conds.last().expect("nonempty");
    let g = last.g_hat();
    let h_list = last.h_seq.clone();

    let stabilization = check_stabilization(&conds, &g);
    let cfg_ext = &cfg.extension;
    let witnesses: Vec<FamilyWitness> = schedule
        .iter()
        .enumerate()
        .map(|(fi, s)| {
            let hits = |w: DenseKind| events.iter().filter(move |e| e.family == fi && e.which == w);
            let pairs: Vec<_> = hits(DenseKind::D).zip(hits(DenseKind::E)).collect();
            let witness = GStarWitness {
                g: g.clone(),
                pairs: pairs.iter().map(|(d, e)| (h_list[d.level - 1].clone(), h_list[e.level - 1].clone())).collect(),
                a_seq: pairs.iter().map(|(d, _)| d.index).collect(),
                b_seq: pairs.iter().map(|(_, e)| e.index).collect(),
            };
            let report = check_gstar(&StarAlgebra::Clopen, &g, &s.family, &witness, cfg_ext);
            FamilyWitness { family: fi, witness, report }
        })
        .collect();
    let balance = check_chain(&conds, chain, &g);
    let holds = stabilization.holds && balance.holds && witnesses.iter().all(|w| w.report.holds);
    Ok(RunTranscript { chain: conds, g, h_list, events, stabilization, witnesses, balance, holds })
}

/// Successive runs, each stage's chain of algebras enlarged by the previous `G`.
pub fn run_stages(
    stages: &[Vec<ScheduledFamily>],
    depth: usize,
    chain: &[FiniteAlgebra],
    cfg: &ForcingConfig,
) -> Result<Vec<RunTranscript>> {
    let mut algebras = chain.to_vec();
    let mut out = Vec::new();
    for schedule in stages {
        let t = run_generic(schedule, depth, &algebras, cfg)?;
        algebras = algebras.iter().map(|b| b.with_generators([t.g.clone()])).collect();
        out.push(t);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn family(len: usize) -> NormalFamily {
        let nus = (0..len)
            .map(|i| {
                let mut v = vec![1i8];
                v.extend(std::iter::repeat_n(-1, i));
                v.push(1);
                FAMeasure::point(Signs::new(v), int(if i % 3 == 1 { -1 } else { 1 }))
            })
            .collect();
        NormalFamily::new(nus, FAMeasure::point(Signs::new(vec![1]), int(1))).unwrap()
    }

    fn chain() -> Vec<FiniteAlgebra> {
        vec![FiniteAlgebra::trivial(1), FiniteAlgebra::level(1, 1).unwrap(), FiniteAlgebra::level(2, 2).unwrap()]
    }

    #[test]
    fn small_conditions() {
        let p = ForcingCondition {
            k: 1,
            m_seq: vec![1],
            g_seq: vec![CubeSet::empty(1)],
            h_seq: vec![CubeSet::empty(1)],
            ms: vec![FAMeasure::lebesgue(0)],
        };
        assert!(p.validate(&[FiniteAlgebra::trivial(1)]).holds);
        assert!(leq(&p, &p, &chain()).unwrap());

        let c = CubeSet::cylinder(&"+--".parse().unwrap(), 3).unwrap();
        let bad = ForcingCondition {
            k: 2,
            m_seq: vec![1, 2],
            g_seq: vec![c.clone(), CubeSet::empty(1)],
            h_seq: vec![CubeSet::empty(1), c.clone()],
            ms: vec![FAMeasure::lebesgue(0)],
        };
        assert_eq!(bad.validate(&chain()).failure.unwrap().clause, "disjoint");

        // mu(G ∪ H) = 1/10 exactly
        let h = CubeSet::cylinder(&"+++++".parse().unwrap(), 5).unwrap();
        let mu = FAMeasure::point("-".parse().unwrap(), crate::ratio::frac(9, 10))
            .add(&FAMeasure::point("+++++".parse().unwrap(), crate::ratio::frac(1, 10)));
        let p = ForcingCondition {
            k: 1,
            m_seq: vec![1],
            g_seq: vec![CubeSet::empty(1)],
            h_seq: vec![h],
            ms: vec![FAMeasure::lebesgue(0), mu],
        };
        assert_eq!(p.validate(&chain()).failure.unwrap().clause, "mass");
    }

    #[test]
    fn hits_and_runs() {
        let cfg = ForcingConfig::default();
        let fam = family(10);
        let p = ForcingCondition::trivial(std::slice::from_ref(&fam.limit));
        let d = hit_dense(&p, &fam, 0, DenseKind::D, &chain(), &cfg).unwrap();
        assert!(leq(&d.condition, &p, &chain()).unwrap());
        let e = hit_dense(&d.condition, &fam, d.index, DenseKind::E, &chain(), &cfg).unwrap();
        assert!(e.index > d.index);
        assert!(e.condition.g_seq[1].is_disjoint(&e.condition.h_seq[1]));

        let q = extend_to_k(&ForcingCondition::trivial(&[]), 3, &chain(), &cfg).unwrap();
        assert_eq!(q.k, 3);

        let sched = vec![ScheduledFamily {
            family: fam,
            requests: vec![
                DenseRequest { which: DenseKind::D, k: None },
                DenseRequest { which: DenseKind::E, k: None },
            ],
        }];
        let t = run_generic(&sched, 4, &chain(), &cfg).unwrap();
        assert!(t.holds, "{t:?}");
        assert_eq!(t.witnesses[0].witness.pairs.len(), 1);
        let empty = run_generic(&[], 0, &chain(), &cfg).unwrap();
        assert!(empty.holds && empty.g.is_empty() && empty.chain.len() == 1);
    }
}
