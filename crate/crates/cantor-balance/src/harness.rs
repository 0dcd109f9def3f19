//! Seeded suites that exercise the lemmas on random and exhaustive instances.
//!
//! Every suite draws from its own ChaCha stream, so a report depends only on the seed
//! and the suite. Reports carry no timings and serialize byte-identically on re-runs.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::balance::{
    approx_homomorphism, balance_threshold, is_m_balanced, is_mt_balanced, is_semibalanced, perturbation_tolerance,
    semibalance_threshold,
};
use crate::cube::{all_signs, atom_sign, CubeSet, Signs};
use crate::error::{Error, Result};
use crate::examples::{aviles_measure, balanced_open_u, plebanek_b, plebanek_s_prime};
use crate::extension::{
    check_gstar, check_step, grothendieck_gap, one_step, ExtensionConfig, ExtensionState, GStarWitness, StarAlgebra,
};
use crate::forcing::{
    extend_to_k, hit_dense, in_dense, leq, run_generic, DenseKind, DenseRequest, ForcingCondition, ForcingConfig,
    ScheduledFamily,
};
use crate::measures::{nikodym_witness, FAMeasure, NormalFamily};
use crate::ratio::{self, dyadic, frac, int, pow2_neg};
use crate::repair::{
    bessel_defect, construct_m, feasible_count, rademacher_tail_masses, Mode, Regime, RepairInstance, RepairResult,
};
use crate::{FiniteAlgebra, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Rademacher,
    Bessel,
    Certificate,
    DescentOracle,
    DisjointUnion,
    Complement,
    JoinLevel,
    BalancedSemibalanced,
    SmallPerturbation,
    Homomorphism,
    ExtensionStep,
    Forcing,
    NamedExamples,
}

impl Suite {
    pub const ALL: [Suite; 13] = [
        Suite::Rademacher,
        Suite::Bessel,
        Suite::Certificate,
        Suite::DescentOracle,
        Suite::DisjointUnion,
        Suite::Complement,
        Suite::JoinLevel,
        Suite::BalancedSemibalanced,
        Suite::SmallPerturbation,
        Suite::Homomorphism,
        Suite::ExtensionStep,
        Suite::Forcing,
        Suite::NamedExamples,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Rademacher => "rademacher",
            Suite::Bessel => "bessel",
            Suite::Certificate => "certificate",
            Suite::DescentOracle => "descent-oracle",
            Suite::DisjointUnion => "disjoint-union",
            Suite::Complement => "complement",
            Suite::JoinLevel => "join-level",
            Suite::BalancedSemibalanced => "balanced-semibalanced",
            Suite::SmallPerturbation => "small-perturbation",
            Suite::Homomorphism => "homomorphism",
            Suite::ExtensionStep => "extension-step",
            Suite::Forcing => "forcing",
            Suite::NamedExamples => "named-examples",
        }
    }

    /// What the suite checks, for the pass table.
    pub fn statement(self) -> &'static str {
        match self {
            Suite::Rademacher => "tail mass of a Rademacher sum >= (1 - xi)^2 / 3",
            Suite::Bessel => "sum_{m>t} phi_m(Z)^2 <= lambda(Z)",
            Suite::Certificate => "swap descent: feasible, locally optimal, S(M) below the bound",
            Suite::DescentOracle => "exhaustive minimum certified, descent within the bound",
            Suite::DisjointUnion => "disjoint (m,e)-balanced sets have an (m,2e)-balanced union",
            Suite::Complement => "complement keeps (t,e)-semibalance with the same margin",
            Suite::JoinLevel => "joining A_n keeps an (n,e)-balanced algebra balanced",
            Suite::BalancedSemibalanced => "(m,e)-balance = (m,t,e)-balance + cylinderwise semibalance",
            Suite::SmallPerturbation => "light perturbations keep (m,t,e)-balance",
            Suite::Homomorphism => "h_n is a homomorphism with lambda(A sym h_n(A)) < e/n",
            Suite::ExtensionStep => "extension step conclusions and the 1/5 versus 1/10 gap",
            Suite::Forcing => "order, centering, dense sets and generic runs",
            Suite::NamedExamples => "U, B, theta_n, phi_n and n phi_n values",
        }
    }

    /// Acceptance criterion the suite belongs to.
    pub fn criterion(self) -> u8 {
        match self {
            Suite::Rademacher => 1,
            Suite::Bessel => 2,
            Suite::Certificate => 3,
            Suite::DescentOracle => 4,
            Suite::DisjointUnion
            | Suite::Complement
            | Suite::JoinLevel
            | Suite::BalancedSemibalanced
            | Suite::SmallPerturbation => 5,
            Suite::Homomorphism => 6,
            Suite::ExtensionStep => 7,
            Suite::Forcing => 8,
            Suite::NamedExamples => 9,
        }
    }

    fn stream(self) -> u64 {
        self as u64 + 1
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.name() == s).ok_or_else(|| Error::Parameter(format!("unknown suite '{s}'")))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub seed: u64,
    /// Largest resolution of the random balance-lemma and homomorphism cases.
    pub resolution: u32,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig { seed: 0, resolution: 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub cases: u64,
    pub failures: u64,
    pub first_failure: Option<String>,
    /// Extremal values seen, as exact text.
    pub stats: BTreeMap<String, String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

struct Tally {
    report: SuiteReport,
    mins: BTreeMap<String, Rational>,
    maxs: BTreeMap<String, Rational>,
}

impl Tally {
    fn new(suite: Suite, seed: u64) -> Self {
        Tally {
            report: SuiteReport { suite, seed, cases: 0, failures: 0, first_failure: None, stats: BTreeMap::new() },
            mins: BTreeMap::new(),
            maxs: BTreeMap::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.report.cases += 1;
        if !ok {
            self.report.failures += 1;
            if self.report.first_failure.is_none() {
                self.report.first_failure = Some(what());
            }
        }
    }

    /// Count an `Err` as a failed case; pass the value through.
    fn ok<T>(&mut self, r: Result<T>, what: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.check(false, || format!("{}: {e}", what()));
                None
            }
        }
    }

    fn min(&mut self, key: &str, v: Rational) {
        let e = self.mins.entry(key.to_string()).or_insert_with(|| v.clone());
        if v < *e {
            *e = v;
        }
    }

    fn max(&mut self, key: &str, v: Rational) {
        let e = self.maxs.entry(key.to_string()).or_insert_with(|| v.clone());
        if v > *e {
            *e = v;
        }
    }

    fn count(&mut self, key: &str, by: u64) {
        let e = self.report.stats.entry(key.to_string()).or_insert_with(|| "0".into());
        *e = (e.parse::<u64>().unwrap_or(0) + by).to_string();
    }

    fn finish(mut self) -> SuiteReport {
        for (k, v) in self.mins {
            self.report.stats.insert(format!("min_{k}"), ratio::to_text(&v));
        }
        for (k, v) in self.maxs {
            self.report.stats.insert(format!("max_{k}"), ratio::to_text(&v));
        }
        self.report
    }
}

/// Run one suite.
pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(suite.stream());
    let mut t = Tally::new(suite, cfg.seed);
    let res = cfg.resolution.clamp(4, 16);
    match suite {
        Suite::Rademacher => rademacher_suite(&mut rng, &mut t),
        Suite::Bessel => bessel_suite(&mut rng, &mut t),
        Suite::Certificate => certificate_suite(&mut rng, &mut t),
        Suite::DescentOracle => descent_oracle_suite(&mut rng, &mut t),
        Suite::DisjointUnion => disjoint_union_suite(&mut rng, &mut t, res),
        Suite::Complement => complement_suite(&mut rng, &mut t, res),
        Suite::JoinLevel => join_level_suite(&mut rng, &mut t, res),
        Suite::BalancedSemibalanced => balanced_semibalanced_suite(&mut rng, &mut t, res),
        Suite::SmallPerturbation => small_perturbation_suite(&mut rng, &mut t, res),
        Suite::Homomorphism => homomorphism_suite(&mut rng, &mut t, res),
        Suite::ExtensionStep => extension_suite(&mut rng, &mut t),
        Suite::Forcing => forcing_suite(&mut rng, &mut t),
        Suite::NamedExamples => examples_suite(&mut rng, &mut t),
    }
    t.finish()
}

/// Run every suite in order.
pub fn run_all(cfg: &SuiteConfig) -> Vec<SuiteReport> {
    Suite::ALL.iter().map(|&s| run_suite(s, cfg)).collect()
}

// ---------------------------------------------------------------------------
// random objects

/// Resolution for exhaustive single-set enumeration.
pub const EXHAUSTIVE_SET_RESOLUTION: u32 = 4;
/// Resolution for exhaustive enumeration of pairs of sets.
pub const EXHAUSTIVE_PAIR_RESOLUTION: u32 = 3;
/// Random cases per balance lemma.
pub const RANDOM_CASES: usize = 1000;

fn signs(rng: &mut ChaCha8Rng, len: u32) -> Signs {
    Signs::from_index(if len == 0 { 0 } else { rng.gen_range(0..1u64 << len) }, len)
}

fn random_atoms(rng: &mut ChaCha8Rng, n: u32, count: usize) -> CubeSet {
    CubeSet::from_atoms(n, (0..count).map(|_| rng.gen_range(0..1u64 << n)).collect::<Vec<_>>())
}

/// Sets of several shapes: independent atoms, unions of cylinders, cylinders with sparse
/// noise and coordinate half-spaces cut by a cylinder.
fn random_set(rng: &mut ChaCha8Rng, n: u32) -> CubeSet {
    let cylinders = |rng: &mut ChaCha8Rng, max_len: u32| {
        let count = rng.gen_range(1..=4);
        (0..count).fold(CubeSet::empty(n), |acc, _| {
            let len = rng.gen_range(0..=max_len);
            acc.union(&CubeSet::cylinder(&signs(rng, len), n).expect("cylinder"))
        })
    };
    match rng.gen_range(0..4) {
        0 => {
            let p = [2u32, 4, 16][rng.gen_range(0..3)];
            CubeSet::from_atoms(n, (0..1u64 << n).filter(|_| rng.gen_range(0..p) == 0).collect::<Vec<_>>())
        }
        1 => cylinders(rng, n),
        2 => {
            let base = cylinders(rng, n.div_ceil(2));
            let noise = rng.gen_range(0..=3);
            base.sym_diff(&random_atoms(rng, n, noise))
        }
        _ => {
            let r = rng.gen_range(1..=n);
            let len = rng.gen_range(0..=n);
            CubeSet::coordinate(r, n)
                .expect("coordinate")
                .intersection(&CubeSet::cylinder(&signs(rng, len), n).expect("cylinder"))
        }
    }
}

fn set_from_mask(n: u32, mask: u64) -> CubeSet {
    CubeSet::from_atoms(n, (0..1u64 << n).filter(|a| mask >> a & 1 == 1).collect::<Vec<_>>())
}

/// Every set at resolutions `1..=max`.
fn all_sets(max: u32) -> impl Iterator<Item = CubeSet> {
    (1..=max).flat_map(|n| (0..1u64 << (1u64 << n)).map(move |mask| set_from_mask(n, mask)))
}

/// A small positive slack `2^-e`.
fn slack(rng: &mut ChaCha8Rng) -> Rational {
    pow2_neg(rng.gen_range(1..=24))
}

// ---------------------------------------------------------------------------
// criteria 1 and 2

const RADEMACHER_VECTORS: usize = 200;

fn rademacher_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    let xis = [frac(1, 16), frac(1, 8), frac(1, 4), frac(1, 2), frac(15, 16)];
    for case in 0..RADEMACHER_VECTORS {
        let len = rng.gen_range(1..=16);
        let d: Vec<Rational> = (0..len).map(|_| frac(rng.gen_range(-20..=20), rng.gen_range(1..=8))).collect();
        let Some(masses) = t.ok(rademacher_tail_masses(&d, &xis, 16), || format!("vector {case}")) else { continue };
        for (xi, mass) in xis.iter().zip(masses) {
            let one_minus = Rational::one() - xi;
            let bound = &one_minus * &one_minus / int(3);
            t.min("slack", &mass - &bound);
            t.check(mass >= bound, || {
                format!(
                    "vector {case}, xi = {}: mass {} < {}",
                    ratio::to_text(xi),
                    ratio::to_text(&mass),
                    ratio::to_text(&bound)
                )
            });
        }
    }
}

const BESSEL_SETS: usize = 500;

fn bessel_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    for case in 0..BESSEL_SETS {
        let n = rng.gen_range(8..=14);
        let z = random_set(rng, n);
        let from = rng.gen_range(0..=3);
        let (sum, mass) = bessel_defect(&z, from);
        // oracle: the squares summed coordinate by coordinate
        let direct: Rational =
            (from + 1..=n).map(|r| Rational::new(BigInt::from(z.phi_count(r)).pow(2), BigInt::one() << (2 * n))).sum();
        if mass.is_positive() {
            t.max("ratio", &sum / &mass);
        }
        t.check(direct == sum && sum <= mass, || {
            format!(
                "set {case} at resolution {n}, t = {from}: sum {} against lambda {}",
                ratio::to_text(&sum),
                ratio::to_text(&mass)
            )
        });
    }
}

// ---------------------------------------------------------------------------
// criteria 3 and 4

/// `g(a) = 2^n sum_{r in (t, n]} a_r phi_r(U)`.
fn exchange_score(a: u64, phi: &[i64], t: u32) -> i64 {
    phi.iter().enumerate().map(|(j, p)| atom_sign(a, t + 1 + j as u32) * p).sum()
}

/// Feasibility, the exchange inequality at every pair and `S(M)` below the bound,
/// each recomputed from the sets.
fn certify(inst: &RepairInstance, r: &RepairResult) -> std::result::Result<Rational, String> {
    let n = inst.n;
    let lift = |s: &CubeSet| s.refine(n).map_err(|e| e.to_string());
    let (f, q, z) = (lift(&inst.f)?, lift(&inst.q)?, lift(&inst.z)?);
    let free = f.difference(&q.union(&z));
    if !r.m.is_subset(&free) || r.m.count() != inst.k {
        return Err(format!(
            "M has {} atoms and is{} inside F \\ (Q ∪ Z)",
            r.m.count(),
            if r.m.is_subset(&free) { "" } else { " not" }
        ));
    }
    let u = r.m.union(&z);
    let phi: Vec<i64> = (inst.t + 1..=n).map(|x| u.phi_count(x)).collect();
    let s = Rational::new(phi.iter().map(|&p| BigInt::from(p).pow(2)).sum(), BigInt::one() << (2 * n));
    if s != r.s_objective {
        return Err(format!("reported S = {}, recomputed {}", ratio::to_text(&r.s_objective), ratio::to_text(&s)));
    }
    let bound = Rational::new(BigInt::from(inst.k) * n, BigInt::one() << (2 * n - 1));
    if s >= bound {
        return Err(format!("S = {} is not below {}", ratio::to_text(&s), ratio::to_text(&bound)));
    }
    let worst_in = r.m.atoms().map(|a| exchange_score(a, &phi, inst.t)).max();
    let best_out = free.difference(&r.m).atoms().map(|a| exchange_score(a, &phi, inst.t)).min();
    if let (Some(x), Some(y)) = (worst_in, best_out) {
        if x > 2 * n as i64 + y {
            return Err(format!("exchange inequality fails: {x} > 2n + {y}"));
        }
    }
    Ok(s / bound)
}

/// A relaxed-regime instance: `F` is a length-`t` cylinder with a few holes plus stray
/// atoms, `Q` a few atoms, `Z` as large as `lambda(Z) < eta^2 / 64` allows (capped at 8).
fn relaxed_instance(rng: &mut ChaCha8Rng, n: u32, t: u32, e: u32) -> RepairInstance {
    let cyl = CubeSet::cylinder(&signs(rng, t), n).expect("cylinder");
    let max_holes = (1u64 << (n - t)) / 20;
    let holes = rng.gen_range(0..=max_holes.min(40)) as usize;
    let mut f = cyl.difference(&random_atoms(rng, n, holes));
    let stray = rng.gen_range(0..=20);
    f = f.union(&random_atoms(rng, n, stray));
    let q_cap = ((1u64 << (n - e)) - 1).min(10) as usize;
    let q_count = rng.gen_range(0..=q_cap);
    let q = random_atoms(rng, n, q_count);
    let mut z = CubeSet::empty(n);
    if n >= 2 * e + 7 {
        let cap = ((1u64 << (n - 2 * e - 6)) - 1).min(8);
        let pool: Vec<u64> = f.difference(&q).atoms().collect();
        for _ in 0..rng.gen_range(0..=cap) {
            z.insert(*pool.choose(rng).expect("F is large"));
        }
    }
    let lo = 1u64 << (n - e - 1);
    let k = rng.gen_range(lo + 1..2 * lo);
    RepairInstance { t, eta: pow2_neg(e), n, k, f, q, z }
}

const CERTIFICATE_INSTANCES: usize = 100;

fn certificate_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    for case in 0..CERTIFICATE_INSTANCES {
        let n = rng.gen_range(10..=16);
        let tt = rng.gen_range(0..=3);
        let e = tt + rng.gen_range(2..=4);
        let inst = relaxed_instance(rng, n, tt, e);
        let what = || format!("instance {case} (n = {n}, t = {tt}, eta = 2^-{e}, k = {})", inst.k);
        let fails = inst.hypothesis_failures(Regime::Relaxed);
        if !fails.is_empty() {
            t.check(false, || format!("{}: generator broke a hypothesis: {}", what(), fails.join("; ")));
            continue;
        }
        let Some(r) = t.ok(construct_m(&inst, Mode::SwapDescent, Regime::Relaxed), what) else { continue };
        if !inst.z.is_empty() {
            t.count("instances_with_z", 1);
        }
        match certify(&inst, &r) {
            Ok(ratio_to_bound) => {
                t.max("s_over_bound", ratio_to_bound);
                t.check(r.certificate.below_bound && r.certificate.exchange_inequality, || {
                    format!("{}: library certificate disagrees", what())
                });
            }
            Err(msg) => t.check(false, || format!("{}: {msg}", what())),
        }
    }
}

/// Largest number of feasible sets for which exhaustive search is run.
pub const ORACLE_SUBSETS: u64 = 100_000;
const ORACLE_INSTANCES: usize = 100;

fn descent_oracle_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    let mut accepted = 0;
    let mut skipped = 0u64;
    while accepted < ORACLE_INSTANCES && skipped < 20 * ORACLE_INSTANCES as u64 {
        let n: u32 = rng.gen_range(6..=10);
        let tt = rng.gen_range(n.saturating_sub(7)..=n - 2);
        let e = n - rng.gen_range(2..=4);
        let inst = relaxed_instance(rng, n, tt, e);
        let count = feasible_count(&inst).ok().flatten();
        if !inst.hypothesis_failures(Regime::Relaxed).is_empty()
            || !matches!(count, Some(c) if c > 0 && c <= ORACLE_SUBSETS)
        {
            skipped += 1;
            continue;
        }
        accepted += 1;
        let what = || format!("instance n = {n}, t = {tt}, eta = 2^-{e}, k = {}", inst.k);
        let Some(ex) = t.ok(construct_m(&inst, Mode::Exhaustive, Regime::Relaxed), what) else { continue };
        let Some(de) = t.ok(construct_m(&inst, Mode::SwapDescent, Regime::Relaxed), what) else { continue };
        match (certify(&inst, &ex), certify(&inst, &de)) {
            (Ok(_), Ok(r)) => {
                t.max("descent_s_over_bound", r);
                t.check(de.s_objective >= ex.s_objective, || format!("{}: descent beat the global minimum", what()));
                if de.s_objective == ex.s_objective {
                    t.count("descent_hit_global_minimum", 1);
                }
            }
            (Err(m), _) => t.check(false, || format!("{}: exhaustive minimum: {m}", what())),
            (_, Err(m)) => t.check(false, || format!("{}: descent: {m}", what())),
        }
    }
    t.count("skipped_instances", skipped);
    t.count("instances", accepted as u64);
    if accepted < ORACLE_INSTANCES {
        t.check(false, || format!("only {accepted} instances with at most {ORACLE_SUBSETS} feasible sets"));
    }
}

// ---------------------------------------------------------------------------
// criterion 5

fn disjoint_union_suite(rng: &mut ChaCha8Rng, t: &mut Tally, res: u32) {
    // thresholds: A, B balanced for every eps above max(thr A, thr B), so the union's
    // threshold may be at most twice that
    for n in 1..=EXHAUSTIVE_PAIR_RESOLUTION {
        let sets: Vec<CubeSet> = (0..1u64 << (1 << n)).map(|m| set_from_mask(n, m)).collect();
        for (i, a) in sets.iter().enumerate() {
            for b in sets.iter().skip(i) {
                if !a.is_disjoint(b) {
                    continue;
                }
                for m in 1..=n {
                    let th = |x: &CubeSet| balance_threshold(x, m, None).expect("level");
                    let (ta, tb, tu) = (th(a), th(b), th(&a.union(b)));
                    let top = if ta > tb { ta } else { tb };
                    t.check(tu <= &top * int(2), || format!("A = {a:?}, B = {b:?}, m = {m}"));
                }
            }
        }
    }
    for case in 0..RANDOM_CASES {
        let n = rng.gen_range(1..=res);
        let a = random_set(rng, n);
        let b = random_set(rng, n).difference(&a);
        let m = rng.gen_range(1..=n);
        let th = |x: &CubeSet| balance_threshold(x, m, None).expect("level");
        let (ta, tb) = (th(&a), th(&b));
        let eps = if ta > tb { ta } else { tb } + slack(rng);
        let both = is_m_balanced(&a, m, &eps).expect("level").holds && is_m_balanced(&b, m, &eps).expect("level").holds;
        let union = is_m_balanced(&a.union(&b), m, &(&eps * int(2))).expect("level");
        t.check(both && union.holds, || {
            format!("random case {case}: n = {n}, m = {m}, eps = {}: {:?}", ratio::to_text(&eps), union.first_violation)
        });
    }
}

fn complement_suite(rng: &mut ChaCha8Rng, t: &mut Tally, res: u32) {
    for a in all_sets(EXHAUSTIVE_SET_RESOLUTION) {
        let c = a.complement();
        for tt in 0..=a.resolution() {
            t.check(semibalance_threshold(&a, tt) == semibalance_threshold(&c, tt), || format!("A = {a:?}, t = {tt}"));
        }
    }
    for case in 0..RANDOM_CASES {
        let n = rng.gen_range(1..=res);
        let a = random_set(rng, n);
        let tt = rng.gen_range(0..=n);
        let eps = semibalance_threshold(&a, tt) + slack(rng);
        let c = a.complement();
        let ok = is_semibalanced(&a, tt, &eps).holds && is_semibalanced(&c, tt, &eps).holds;
        t.check(ok && semibalance_threshold(&c, tt) == semibalance_threshold(&a, tt), || {
            format!("random case {case}: n = {n}, t = {tt}, eps = {}", ratio::to_text(&eps))
        });
    }
}

fn algebra_threshold(h: &FiniteAlgebra, n: u32) -> Rational {
    h.as_pieces().balance_threshold(n, None).expect("level")
}

fn join_level_suite(rng: &mut ChaCha8Rng, t: &mut Tally, res: u32) {
    for a in all_sets(EXHAUSTIVE_SET_RESOLUTION) {
        let h0 = FiniteAlgebra::new(a.resolution(), vec![a.clone()]);
        for n in 1..=a.resolution() {
            let joined = h0.with_level(n).expect("level");
            t.check(algebra_threshold(&joined, n) <= algebra_threshold(&h0, n), || {
                format!("H0 generated by {a:?}, n = {n}")
            });
        }
    }
    for case in 0..RANDOM_CASES {
        let big = rng.gen_range(1..=res);
        let gens: Vec<CubeSet> = (0..rng.gen_range(1..=3)).map(|_| random_set(rng, big)).collect();
        let h0 = FiniteAlgebra::new(big, gens);
        let n = rng.gen_range(1..=big.min(6));
        let eps = algebra_threshold(&h0, n) + slack(rng);
        let joined = h0.with_level(n).expect("level");
        let rep = joined.is_m_balanced(n, &eps).expect("level");
        t.check(h0.is_m_balanced(n, &eps).expect("level").holds && rep.holds, || {
            format!("random case {case}: resolution {big}, n = {n}: {:?}", rep.first_violation)
        });
    }
}

/// Largest threshold among the cylinderwise semibalance clauses, scaled by `2^m`.
fn cylinderwise_semibalance(a: &CubeSet, m: u32, tt: u32) -> Rational {
    let n = a.resolution();
    all_signs(m)
        .map(|s| {
            let piece = a.intersection(&CubeSet::cylinder(&s, n).expect("cylinder"));
            semibalance_threshold(&piece, tt) * Rational::from_integer(BigInt::one() << m)
        })
        .max()
        .unwrap_or_else(Rational::zero)
}

fn balanced_semibalanced_suite(rng: &mut ChaCha8Rng, t: &mut Tally, res: u32) {
    for a in all_sets(EXHAUSTIVE_SET_RESOLUTION) {
        let n = a.resolution();
        for m in 1..=n {
            let full = balance_threshold(&a, m, None).expect("level");
            t.check(semibalance_threshold(&a, m) <= full, || {
                format!("A = {a:?}, m = {m}: balanced but not semibalanced")
            });
            for tt in m..=n {
                let window = balance_threshold(&a, m, Some(tt)).expect("level");
                let split = cylinderwise_semibalance(&a, m, tt);
                let both = if window > split { window } else { split };
                t.check(full == both, || format!("A = {a:?}, m = {m}, t = {tt}"));
            }
        }
    }
    for case in 0..RANDOM_CASES {
        let n = rng.gen_range(1..=res);
        let a = random_set(rng, n);
        let m = rng.gen_range(1..=n.min(8));
        let tt = rng.gen_range(m..=n);
        let thr = balance_threshold(&a, m, None).expect("level");
        let eps = match rng.gen_range(0..3) {
            0 => &thr + slack(rng),
            1 if thr.is_positive() => &thr - &thr * slack(rng),
            _ => frac(rng.gen_range(1..=64), 64),
        };
        let lhs = is_m_balanced(&a, m, &eps).expect("level").holds;
        let scale = Rational::from_integer(BigInt::one() << m);
        let rhs = is_mt_balanced(&a, m, tt, &eps).expect("level").holds
            && all_signs(m).all(|s| {
                let piece = a.intersection(&CubeSet::cylinder(&s, n).expect("cylinder"));
                is_semibalanced(&piece, tt, &(&eps / &scale)).holds
            });
        let implied = !lhs || is_semibalanced(&a, m, &eps).holds;
        t.check(lhs == rhs && implied, || {
            format!("random case {case}: n = {n}, m = {m}, t = {tt}, eps = {}", ratio::to_text(&eps))
        });
    }
}

fn small_perturbation_suite(rng: &mut ChaCha8Rng, t: &mut Tally, res: u32) {
    // thresholds: A ∪ B and A \ B are balanced above thr(A) + 2^m t lambda(B)
    for n in 2..=EXHAUSTIVE_PAIR_RESOLUTION {
        let sets: Vec<CubeSet> = (0..1u64 << (1 << n)).map(|m| set_from_mask(n, m)).collect();
        for a in &sets {
            for m in 1..n {
                for tt in m + 1..=n {
                    let ta = balance_threshold(a, m, Some(tt)).expect("level");
                    for b in &sets {
                        let room = &ta + Rational::from_integer(BigInt::from(tt) << m) * b.lambda().to_rational();
                        let tu = balance_threshold(&a.union(b), m, Some(tt)).expect("level");
                        let td = balance_threshold(&a.difference(b), m, Some(tt)).expect("level");
                        t.check(tu <= room && td <= room, || format!("A = {a:?}, B = {b:?}, m = {m}, t = {tt}"));
                    }
                }
            }
        }
    }
    let sample = |rng: &mut ChaCha8Rng, n: u32| -> (CubeSet, u32, u32) {
        let a = random_set(rng, n);
        let m = rng.gen_range(1..n);
        (a, m, rng.gen_range(m + 1..=n))
    };
    for case in 0..RANDOM_CASES {
        let n = rng.gen_range(2..=res);
        let (a, m, tt) = sample(rng, n);
        let eps1 = balance_threshold(&a, m, Some(tt)).expect("level") + slack(rng);
        let eps = &eps1 + pow2_neg(rng.gen_range(0..=12));
        let Some(rho) = t.ok(perturbation_tolerance(m, tt, &eps, &eps1), || format!("random case {case}")) else {
            continue;
        };
        // largest atom count with count / 2^n < rho
        let scaled = &rho * Rational::from_integer(BigInt::one() << n);
        let below: BigInt = scaled.ceil().to_integer() - 1;
        let cap: u64 = u64::try_from(below).unwrap_or(0).min(1 << n);
        let count = rng.gen_range(0..=cap.min(64)) as usize;
        let b = random_atoms(rng, n, count);
        if b.lambda().to_rational() >= rho {
            continue;
        }
        let ok = |x: &CubeSet| is_mt_balanced(x, m, tt, &eps).expect("level").holds;
        t.check(
            is_mt_balanced(&a, m, tt, &eps1).expect("level").holds && ok(&a.union(&b)) && ok(&a.difference(&b)),
            || format!("random case {case}: n = {n}, m = {m}, t = {tt}, rho = {}", ratio::to_text(&rho)),
        );
    }
}

// ---------------------------------------------------------------------------
// criterion 6

const HOMOMORPHISM_ALGEBRAS: usize = 200;

/// `h_n` straight from the definition.
fn rounding_oracle(a: &CubeSet, n: u32, eps: &Rational) -> CubeSet {
    let big = a.resolution().max(n);
    let a = a.refine(big).expect("refine");
    all_signs(n).fold(CubeSet::empty(big), |acc, s| {
        let c = CubeSet::cylinder(&s, big).expect("cylinder");
        let missing = c.difference(&a).lambda().to_rational() / c.lambda().to_rational();
        if missing < *eps {
            acc.union(&c)
        } else {
            acc
        }
    })
}

fn homomorphism_suite(rng: &mut ChaCha8Rng, t: &mut Tally, res: u32) {
    let mut made = 0;
    let mut rejected = 0u64;
    while made < HOMOMORPHISM_ALGEBRAS && rejected < 50 * HOMOMORPHISM_ALGEBRAS as u64 {
        let big = rng.gen_range(6..=res.clamp(6, 10));
        let n = rng.gen_range(1..=5.min(big - 1));
        let gens: Vec<CubeSet> = (0..rng.gen_range(1..=3))
            .map(|_| {
                let cyl = (0..rng.gen_range(0..=3)).fold(CubeSet::empty(big), |acc, _| {
                    acc.union(&CubeSet::cylinder(&signs(rng, n), big).expect("cylinder"))
                });
                let noise = rng.gen_range(0..=3);
                cyl.sym_diff(&random_atoms(rng, big, noise))
            })
            .collect();
        let h = FiniteAlgebra::new(big, gens);
        let thr = algebra_threshold(&h, n);
        if thr >= frac(1, 3) {
            rejected += 1;
            continue;
        }
        made += 1;
        let eps = (&thr + frac(1, 3)) / int(2);
        let what = || format!("algebra {made}: resolution {big}, n = {n}");
        let Some(hom) = t.ok(approx_homomorphism(&h, n, &eps), what) else { continue };
        let Some(elems) = t.ok(h.elements(), what) else { continue };
        let images: Vec<CubeSet> = elems.iter().map(|a| hom.apply(a)).collect();
        let full = CubeSet::full(big);
        let bound = &eps / int(n as i64);
        let mut ok = hom.apply(&full).is_full();
        for (a, ha) in elems.iter().zip(&images) {
            let dist = a.sym_diff(ha).lambda().to_rational();
            t.max("distance_over_bound", &dist / &bound);
            ok &= ha.same_set(&rounding_oracle(a, n, &eps)) && ha.in_level(n) && dist < bound;
            ok &= hom.apply(&a.complement()).same_set(&ha.complement());
        }
        for (i, a) in elems.iter().enumerate() {
            for (b, hb) in elems.iter().zip(&images).skip(i) {
                ok &= hom.apply(&a.union(b)).same_set(&images[i].union(hb));
            }
        }
        t.check(ok, what);
    }
    t.count("rejected_draws", rejected);
    if made < HOMOMORPHISM_ALGEBRAS {
        t.check(false, || format!("only {made} balanced algebras drawn"));
    }
}

// ---------------------------------------------------------------------------
// criterion 7

const EXTENSION_INSTANCES: usize = 50;
/// Resolution ceiling for the extension instances.
pub const EXTENSION_RESOLUTION: u32 = 16;

/// Point masses marching to `prefix`: measure `i` sits at `prefix`, then `i - 1` minus
/// signs, a plus and a short tail. The limit is the point mass at `prefix`.
pub fn point_family(prefix: &Signs, tails: &[Signs], weights: &[i64]) -> Result<NormalFamily> {
    let nus = tails
        .iter()
        .zip(weights)
        .enumerate()
        .map(|(i, (tail, &w))| {
            let mut v = prefix.as_slice().to_vec();
            v.extend(std::iter::repeat_n(-1, i));
            v.push(1);
            v.extend(tail.iter());
            FAMeasure::point(Signs::new(v), int(w))
        })
        .collect();
    NormalFamily::new(nus, FAMeasure::point(prefix.clone(), int(1)))
}

fn random_family(rng: &mut ChaCha8Rng, prefix: &Signs, len: usize) -> Result<NormalFamily> {
    let tails: Vec<Signs> = (0..len)
        .map(|_| {
            let l = rng.gen_range(0..=1);
            signs(rng, l)
        })
        .collect();
    let weights: Vec<i64> = (0..len).map(|_| if rng.gen_bool(0.5) { 1 } else { -1 }).collect();
    point_family(prefix, &tails, &weights)
}

fn extension_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    let cfg = ExtensionConfig { resolution_cap: EXTENSION_RESOLUTION, horizon: 2, ..ExtensionConfig::default() };
    for case in 0..EXTENSION_INSTANCES {
        let plen = rng.gen_range(0..=2);
        let prefix = signs(rng, plen);
        let len = rng.gen_range(6..=8);
        let what = || format!("instance {case}");
        let Some(fam) = t.ok(random_family(rng, &prefix, len), what) else { continue };
        let off = rng.gen_range(0..=1);
        let chain: Vec<FiniteAlgebra> =
            (1..=2).map(|j| FiniteAlgebra::level(j + off, j + off).expect("level")).collect();
        let mut ms = vec![FAMeasure::lebesgue(0)];
        if !fam.limit.same_measure(&ms[0]) {
            ms.push(fam.limit.clone());
        }
        let mut state = ExtensionState::new(chain, ms);
        // odd instances start from a state that already has one step
        let steps = 1 + case % 2;
        let mut failed = false;
        for _ in 0..steps {
            let d = state.a_seq.last().copied().max(state.b_seq.last().copied()).unwrap_or(1);
            let Some(out) = t.ok(one_step(&state, &fam, d, &cfg), what) else {
                failed = true;
                break;
            };
            let res = [&out.g_prime, &out.h0, &out.h1].iter().map(|s| s.resolution()).max().unwrap_or(0);
            t.max("resolution", int(res as i64));
            let step = check_step(&state, &fam, d, &out, &cfg);
            let next = state.push(&out);
            let inv = next.check_invariants(&fam, &cfg);
            t.check(step.is_ok() && inv.is_ok() && res <= EXTENSION_RESOLUTION, || {
                format!("instance {case}, step {}: {:?} {:?} resolution {res}", state.k + 1, step.err(), inv.err())
            });
            state = next;
        }
        if failed {
            continue;
        }
        let w = GStarWitness {
            g: state.g_hat(),
            pairs: state.h0_parts.iter().cloned().zip(state.h1_parts.iter().cloned()).collect(),
            a_seq: state.a_seq.clone(),
            b_seq: state.b_seq.clone(),
        };
        let star = check_gstar(&StarAlgebra::Clopen, &w.g, &fam, &w, &cfg);
        let gap = grothendieck_gap(&fam, &w, &cfg);
        // oracle for the gap: |nu_a(G)| >= 3/10 - 1/10 and |nu_b|(G) <= 1/10
        let arith = w
            .a_seq
            .iter()
            .zip(&w.b_seq)
            .all(|(&a, &b)| fam.get(a).eval(&w.g).abs() >= frac(1, 5) && fam.get(b).variation(&w.g) <= frac(1, 10));
        for &a in &w.a_seq {
            t.min("nu_a_of_g", fam.get(a).eval(&w.g).abs());
        }
        t.check(star.holds && gap.is_ok() && arith, || {
            format!("instance {case}: witness {:?} gap {:?}", star.failure, gap.err())
        });
    }
}

// ---------------------------------------------------------------------------
// criterion 8

fn forcing_chain() -> Vec<FiniteAlgebra> {
    (1..=3).map(|j| FiniteAlgebra::level(j, j).expect("level")).collect()
}

/// Conditions from a few descending chains, each with every subset of a random pool added
/// to `Ms`.
fn generated_conditions(
    rng: &mut ChaCha8Rng,
    fams: &[NormalFamily; 2],
    cfg: &ForcingConfig,
    t: &mut Tally,
) -> Vec<ForcingCondition> {
    let chain = forcing_chain();
    let root = ForcingCondition::trivial(&[fams[0].limit.clone(), fams[1].limit.clone()]);
    let mut bases = vec![root.clone()];
    for (fam, which) in [(&fams[0], DenseKind::D), (&fams[1], DenseKind::E)] {
        if let Some(hit) = t.ok(hit_dense(&root, fam, 0, which, &chain, cfg), || "hit from the root".into()) {
            let deeper = t.ok(extend_to_k(&hit.condition, 2, &chain, cfg), || "extension of a hit".into());
            bases.push(hit.condition);
            bases.extend(deeper);
        }
    }
    bases.extend(t.ok(extend_to_k(&root, 2, &chain, cfg), || "extension of the root".into()));
    let point_len = rng.gen_range(4..=6);
    let pool = [
        FAMeasure::lebesgue(rng.gen_range(0..=4)),
        FAMeasure::point(signs(rng, point_len), int(1)),
        FAMeasure::point(signs(rng, 2), frac(1, 2)).add(&FAMeasure::lebesgue(0).scaled(&frac(1, 2))),
        FAMeasure::rademacher(rng.gen_range(1..=3)).expect("coordinate").add(&FAMeasure::lebesgue(3)),
    ];
    let mut out = Vec::new();
    for b in &bases {
        for mask in 0u32..1 << pool.len() {
            let mut p = b.clone();
            p.ms.extend(pool.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, mu)| mu.clone()));
            out.push(p);
        }
    }
    out
}

/// `count` random point families of length `len` in pairwise disjoint cylinders, each
/// asking for one `D` and one `E` hit.
pub fn seeded_schedule(seed: u64, count: usize, len: usize) -> Result<Vec<ScheduledFamily>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(Suite::ALL.len() as u64 + 1);
    let width = usize::BITS - count.saturating_sub(1).leading_zeros();
    let req = |which| DenseRequest { which, k: None };
    (0..count)
        .map(|i| {
            let prefix = Signs::from_index(i as u64, width.max(1));
            Ok(ScheduledFamily {
                family: random_family(&mut rng, &prefix, len)?,
                requests: vec![req(DenseKind::D), req(DenseKind::E)],
            })
        })
        .collect()
}

fn forcing_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    let cfg = ForcingConfig::default();
    let chain = forcing_chain();
    // two families in disjoint cylinders
    let p1 = signs(rng, 2);
    let mut p2 = p1.as_slice().to_vec();
    p2[0] = -p2[0];
    let p2 = Signs::new(p2);
    let fams = match (random_family(rng, &p1, 8), random_family(rng, &p2, 8)) {
        (Ok(a), Ok(b)) => [a, b],
        (Err(e), _) | (_, Err(e)) => {
            t.check(false, || format!("family: {e}"));
            return;
        }
    };

    let all = generated_conditions(rng, &fams, &cfg, t);
    let valid: Vec<ForcingCondition> = all.into_iter().filter(|p| p.is_valid(&chain)).collect();
    t.count("valid_conditions", valid.len() as u64);
    let n = valid.len();
    let le: Vec<Vec<bool>> = valid.iter().map(|q| valid.iter().map(|p| q.extends(p)).collect()).collect();
    let keys: Vec<_> = valid.iter().map(|p| p.centering_key()).collect();
    for i in 0..n {
        t.check(le[i][i], || format!("condition {i} is not below itself"));
        for j in 0..n {
            if le[i][j] && le[j][i] {
                t.check(valid[i].equivalent(&valid[j]), || {
                    format!("conditions {i} and {j} are mutually below but not equivalent")
                });
            }
            let trans = (0..n).all(|k| !(le[i][j] && le[j][k]) || le[i][k]);
            t.check(trans, || format!("transitivity fails through {i} <= {j}"));
            if i < j {
                if keys[i] == keys[j] {
                    let ok = match valid[i].merge(&valid[j]) {
                        Ok(r) => {
                            r.is_valid(&chain)
                                && r.extends(&valid[i])
                                && r.extends(&valid[j])
                                && r.centering_key() == keys[i]
                        }
                        Err(_) => false,
                    };
                    t.check(ok, || format!("conditions {i} and {j} share a key but do not merge"));
                } else {
                    t.check(valid[i].merge(&valid[j]).is_err(), || {
                        format!("conditions {i} and {j} merged across keys")
                    });
                }
            }
        }
    }

    // extensions and dense hits stay below
    let root = ForcingCondition::trivial(&[fams[0].limit.clone(), fams[1].limit.clone()]);
    if let Some(q) = t.ok(extend_to_k(&root, 3, &chain, &cfg), || "extend_to_k".into()) {
        t.check(q.k == 3 && leq(&q, &root, &chain).unwrap_or(false), || "extend_to_k is not a valid extension".into());
    }
    let mut cur = root.clone();
    let mut k = 0;
    for (step, which) in [DenseKind::D, DenseKind::E, DenseKind::D].into_iter().enumerate() {
        let fam = &fams[step % 2];
        let Some(hit) = t.ok(hit_dense(&cur, fam, k, which, &chain, &cfg), || format!("dense hit {step}")) else {
            break;
        };
        let below = leq(&hit.condition, &cur, &chain).unwrap_or(false);
        let inside = in_dense(&hit.condition, fam, k, which, hit.index, &cfg.extension);
        t.check(below && inside, || format!("dense hit {step}: below {below}, in the dense set {inside}"));
        k = hit.index;
        cur = hit.condition;
    }

    // a generic run over both families
    let req = |which| DenseRequest { which, k: None };
    let schedule: Vec<ScheduledFamily> = fams
        .iter()
        .map(|f| ScheduledFamily { family: f.clone(), requests: vec![req(DenseKind::D), req(DenseKind::E)] })
        .collect();
    if let Some(run) = t.ok(run_generic(&schedule, 4, &chain, &cfg), || "generic run".into()) {
        t.check(run.stabilization.holds, || format!("stabilization: {:?}", run.stabilization.failure));
        for (i, w) in run.witnesses.iter().enumerate() {
            t.check(w.report.holds, || format!("family {i}: {:?}", w.report.failure));
        }
        t.check(run.holds, || "run transcript does not hold".into());
    }
}

// ---------------------------------------------------------------------------
// criterion 9

fn examples_suite(rng: &mut ChaCha8Rng, t: &mut Tally) {
    // cylinders
    for len in 0..=8u32 {
        for s in all_signs(len) {
            let c = CubeSet::cylinder(&s, 8).expect("cylinder");
            t.check(c.lambda().to_rational() == pow2_neg(len), || format!("lambda(<{s}>)"));
        }
    }
    // phi_n: norm one and variation lambda
    for r in 1..=8u32 {
        let phi = FAMeasure::rademacher(r).expect("coordinate");
        t.check(phi.norm() == int(1), || format!("norm of phi_{r}"));
        let scaled = phi.scaled(&int(r as i64));
        t.check(scaled.norm() == int(r as i64), || format!("norm of {r} phi_{r}"));
        for _ in 0..10 {
            let a = random_set(rng, 8);
            t.check(phi.variation(&a) == a.lambda().to_rational(), || format!("|phi_{r}| against lambda"));
        }
    }
    // n phi_n is small on semibalanced sets
    for case in 0..200 {
        let n = rng.gen_range(2..=12);
        let a = random_set(rng, n);
        let tt = rng.gen_range(0..n);
        let eps = semibalance_threshold(&a, tt) + slack(rng);
        let ok = is_semibalanced(&a, tt, &eps).holds && (tt + 1..=n).all(|r| nikodym_witness(&a, r).abs() < eps);
        t.check(ok, || format!("semibalanced case {case}"));
    }
    // U truncations
    let u = balanced_open_u(3);
    if let Some(u) = t.ok(u, || "U".into()) {
        for j in 1..=3u32 {
            let eps = Rational::new(BigInt::one() << (j + 2), BigInt::one() << (1u32 << j));
            t.check(is_m_balanced(&u, 1 << j, &eps).map(|r| r.holds).unwrap_or(false), || format!("U at level 2^{j}"));
        }
        let want: Rational = (1..=3u32).map(|n| Rational::new(BigInt::one() << n, BigInt::one() << (1u32 << n))).sum();
        t.check(u.lambda().to_rational() == want, || "lambda(U)".into());
    }
    // Plebanek B
    for k in 3..=12u32 {
        let Some(b) = t.ok(plebanek_b(k), || format!("B at {k}")) else { continue };
        for n in 1..k - 1 {
            let psi = b.psi(n).expect("level").to_rational();
            t.check(psi * int(n as i64) == dyadic(n as i64, n), || format!("n psi_n(B), K = {k}, n = {n}"));
            let c = CubeSet::cylinder(&plebanek_s_prime(n), k).expect("cylinder");
            let density = b.intersection(&c).lambda().to_rational() / c.lambda().to_rational();
            t.check(density == frac(1, 2), || format!("density of B in <s'_{n}>"));
            let rep = is_m_balanced(&b, n, &frac(1, 2)).expect("level");
            t.check(!rep.holds, || format!("B is ({n}, 1/2)-balanced at K = {k}"));
        }
    }
    // theta_n
    let k = 8;
    let thetas: Vec<FAMeasure> = (1..=3).filter_map(|n| t.ok(aviles_measure(n, k), || format!("theta_{n}"))).collect();
    for (i, th) in thetas.iter().enumerate() {
        t.check(th.norm() == int(1), || format!("norm of theta_{}", i + 1));
        t.check(th.eval(&CubeSet::full(k)).is_zero(), || format!("theta_{}(C)", i + 1));
        for other in &thetas[i + 1..] {
            let disjoint = th.carrier(k).and_then(|a| other.carrier(k).map(|b| a.is_disjoint(&b))).unwrap_or(false);
            t.check(disjoint, || format!("support of theta_{} meets a later one", i + 1));
        }
    }
}
