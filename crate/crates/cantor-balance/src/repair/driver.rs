//! Repair drivers: cancel the imbalance a small set `L` introduces into a finite algebra,
//! and the budget computation that feeds the extension step.

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use super::{construct_m_unchecked, objective_s, t_map, Mode, Regime, RepairInstance, RepairResult, EXHAUSTIVE_CAP};
use crate::algebra::{FiniteAlgebra, PieceFamily};
use crate::balance::{approx_homomorphism, dense_cylinder, perturbation_tolerance};
use crate::cube::{CubeSet, MAX_RESOLUTION};
use crate::error::{Error, Result};
use crate::ratio::{self, frac, pow2_neg};
use crate::Rational;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairConfig {
    pub regime: Regime,
    /// Largest resolution the driver may refine to.
    pub resolution_cap: u32,
    pub mode: Mode,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig { regime: Regime::Relaxed, resolution_cap: 24, mode: Mode::SwapDescent }
    }
}

/// Per-atom summary of a repair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomRepair {
    pub atom: usize,
    #[serde(with = "ratio::text")]
    pub s_objective: Rational,
    pub swap_scan_count: u64,
    pub below_bound: bool,
    pub semibalanced: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemibalanceRepair {
    #[serde(rename = "M")]
    pub m: CubeSet,
    pub n: u32,
    /// Atoms per `M_E`; the largest one when they differ.
    pub k: u64,
    #[serde(with = "ratio::text")]
    pub eta: Rational,
    #[serde(with = "ratio::text")]
    pub theta: Rational,
    pub atoms: Vec<AtomRepair>,
}

/// Largest power of two strictly below `x`.
fn pow2_below(x: &Rational) -> u32 {
    let mut e = 0;
    while pow2_neg(e) >= *x {
        e += 1;
    }
    e
}

/// `(eta, theta)` for a repair at level `t` with target `delta`.
///
/// Strict: `eta` is the largest power of two below `min(delta / (4 |F|), 2^-(t+10))`,
/// with `|F|` the number of elements, and `theta = eta^2 / 128`.
/// Relaxed: `eta` is the largest power of two below `delta / 4` and `theta = delta / 2`.
/// The relaxed repair cancels `L` inside each atom exactly, so `λ(M) = λ(L)`.
pub fn semibalance_repair_budget(
    f: &FiniteAlgebra,
    t: u32,
    delta: &Rational,
    regime: Regime,
) -> Result<(Rational, Rational)> {
    if !delta.is_positive() {
        return Err(Error::Parameter("delta must be positive".into()));
    }
    match regime {
        Regime::Strict => {
            let size = Rational::from_integer(BigInt::one() << f.atoms().len());
            let cap = ratio::min(delta / (size * ratio::int(4)), pow2_neg(t + 10));
            let eta = pow2_neg(pow2_below(&cap));
            let theta = &eta * &eta / ratio::int(128);
            Ok((eta, theta))
        }
        Regime::Relaxed => {
            let eta = pow2_neg(pow2_below(&(delta / ratio::int(4))).max(2));
            Ok((eta, delta / ratio::int(2)))
        }
    }
}

/// Smallest `n > n0` with `n^3 / 2^(n-1) <= eta` and `eta / n < eta^2 / 64 - theta`;
/// saturates at `u32::MAX`.
fn strict_min_resolution(eta: &Rational, theta: &Rational, n0: u32) -> u32 {
    // (7) is n > eta / (eta^2/64 - theta)
    let gap = eta * eta / ratio::int(64) - theta;
    let bound = (eta / gap).floor().to_integer();
    let from7: u32 = u32::try_from(bound + 1).unwrap_or(u32::MAX);
    let mut n = from7.max(n0 + 1);
    if n > 200 {
        return n;
    }
    while Rational::new(BigInt::from(n).pow(3), BigInt::one() << (n - 1)) > *eta {
        n += 1;
    }
    n
}

fn lift(a: &CubeSet, n: u32) -> CubeSet {
    a.refine(n).expect("lifting to a finer resolution")
}

/// Checks the four postconditions of a repair; the first failure is returned as a message.
pub fn check_semibalance_repair(
    f: &FiniteAlgebra,
    p: &CubeSet,
    l: &CubeSet,
    q: &CubeSet,
    m: &CubeSet,
    t: u32,
    delta: &Rational,
) -> std::result::Result<(), String> {
    if !m.is_disjoint(&p.union(q)) {
        return Err("M meets P ∪ Q".into());
    }
    if m.lambda().to_rational() >= *delta {
        return Err("lambda(M) is not below delta".into());
    }
    let ml = m.union(l);
    let inside = PieceFamily::new(f.atoms().iter().map(|e| e.intersection(&ml)).collect());
    if let Some(v) = inside.is_semibalanced(t, delta).first_violation {
        return Err(format!("(M ∪ L) ∩ F fails: {v}"));
    }
    let outside = PieceFamily::new(f.atoms().iter().map(|e| e.difference(&ml)).collect());
    if let Some(v) = outside.is_semibalanced(t, delta).first_violation {
        return Err(format!("F \\ (M ∪ L) fails: {v}"));
    }
    Ok(())
}

/// Build `M` disjoint from `P ∪ Q` with `λ(M) < delta` such that `(M ∪ L) ∩ F` and
/// `F \ (M ∪ L)` are `(t, delta)`-semibalanced for every `F` in the algebra.
pub fn repair_balance(
    f: &FiniteAlgebra,
    p: &CubeSet,
    l: &CubeSet,
    q: &CubeSet,
    t: u32,
    delta: &Rational,
    config: &RepairConfig,
) -> Result<SemibalanceRepair> {
    if !f.contains(p) {
        return Err(Error::Hypothesis("P is not an element of the algebra".into()));
    }
    if !l.is_disjoint(p) {
        return Err(Error::Hypothesis("L meets P".into()));
    }
    let dense = frac(99, 100);
    for (i, e) in f.atoms().iter().enumerate() {
        if dense_cylinder(e, t, &dense).is_none() {
            return Err(Error::Hypothesis(format!("atom {i} has no cylinder of length {t} with density 99/100")));
        }
    }
    // the complement postcondition rests on every element being (t, delta/2)-semibalanced
    let half = delta / ratio::int(2);
    if let Some(v) = f.as_pieces().is_semibalanced(t, &half).first_violation {
        return Err(Error::Hypothesis(format!("algebra is not (t, delta/2)-semibalanced: {v}")));
    }
    let (eta, theta) = semibalance_repair_budget(f, t, delta, config.regime)?;
    for (what, s) in [("lambda(L)", l), ("lambda(Q)", q)] {
        let v = s.lambda().to_rational();
        if v >= theta {
            return Err(Error::Budget { what: what.into(), value: Box::new(v), bound: Box::new(theta) });
        }
    }
    let e = pow2_below(&(&eta * ratio::int(2))); // eta = 2^-e
    let n0 = [f.resolution(), p.resolution(), l.resolution(), q.resolution(), t].into_iter().max().unwrap_or(1);
    let cap = config.resolution_cap.min(MAX_RESOLUTION);
    let start = match config.regime {
        Regime::Strict => strict_min_resolution(&eta, &theta, n0),
        Regime::Relaxed => n0,
    };
    if start > cap {
        return Err(Error::ResolutionCap { need: start, cap });
    }
    let mut last = String::new();
    for n in start..=cap {
        let attempt = match config.regime {
            Regime::Strict => strict_repair_at(f, p, l, q, t, &eta, &theta, e, n, config.mode),
            Regime::Relaxed => relaxed_repair_at(f, p, l, q, t, &eta, &theta, n, config.mode),
        };
        match attempt {
            Ok(report) => match check_semibalance_repair(f, p, l, q, &report.m, t, delta) {
                Ok(()) => return Ok(report),
                Err(msg) => last = format!("at resolution {n}: {msg}"),
            },
            Err(Error::Infeasible(msg)) => last = format!("at resolution {n}: {msg}"),
            Err(err) => return Err(err),
        }
        if config.regime == Regime::Strict {
            return Err(Error::Internal(format!("postconditions failed under the strict hypotheses {last}")));
        }
    }
    Err(Error::Infeasible(format!("no resolution up to {cap} repairs the algebra; last failure {last}")))
}

/// One `M_E` per atom `E` outside `P`, each `k` atoms picked from `h(E)` by `S`-descent,
/// with `h` the level-`n` rounding of the algebra generated by the atoms, `Q` and `L`.
#[allow(clippy::too_many_arguments)]
fn strict_repair_at(
    f: &FiniteAlgebra,
    p: &CubeSet,
    l: &CubeSet,
    q: &CubeSet,
    t: u32,
    eta: &Rational,
    theta: &Rational,
    e: u32,
    n: u32,
    mode: Mode,
) -> Result<SemibalanceRepair> {
    let k = 3u64 << (n - e - 2);
    let h0 = f.with_generators([q.clone(), l.clone()]).refined(n);
    let h = approx_homomorphism(&h0, n, eta)?;
    let (hl, hq) = (h.apply(&lift(l, n)), h.apply(&lift(q, n)));
    let p_n = lift(p, n);
    let mut m0 = CubeSet::empty(n);
    let mut atoms = Vec::new();
    for (i, atom) in f.atoms().iter().enumerate() {
        let atom = lift(atom, n);
        // M_E \ P is empty for atoms inside P
        if atom.is_subset(&p_n) {
            continue;
        }
        let he = h.apply(&atom);
        let inst = RepairInstance { t, eta: eta.clone(), n, k, f: he.clone(), q: hq.clone(), z: hl.intersection(&he) };
        let r = construct_m_unchecked(&inst, mode, EXHAUSTIVE_CAP)?;
        atoms.push(atom_summary(i, &r));
        m0 = m0.union(&r.m);
    }
    let m = m0.difference(&lift(q, n)).difference(&p_n);
    Ok(SemibalanceRepair { m, n, k, eta: eta.clone(), theta: theta.clone(), atoms })
}

fn atom_summary(atom: usize, r: &RepairResult) -> AtomRepair {
    AtomRepair {
        atom,
        s_objective: r.s_objective.clone(),
        swap_scan_count: r.swap_scan_count,
        below_bound: r.certificate.below_bound,
        semibalanced: r.certificate.semibalance.holds,
    }
}

/// At resolution `n` every input is a union of `n`-cylinders, so rounding is the identity
/// and `Z_E = L ∩ E`. Each nonempty `Z_E` gets `|Z_E|` atoms of `E \ (L ∪ Q)`: its
/// reflection `T(Z_E)` when that fits, which cancels every `phi_r`, `r > t`, exactly;
/// otherwise the `S`-descent choice.
#[allow(clippy::too_many_arguments)]
fn relaxed_repair_at(
    f: &FiniteAlgebra,
    p: &CubeSet,
    l: &CubeSet,
    q: &CubeSet,
    t: u32,
    eta: &Rational,
    theta: &Rational,
    n: u32,
    mode: Mode,
) -> Result<SemibalanceRepair> {
    let (l_n, q_n, p_n) = (lift(l, n), lift(q, n), lift(p, n));
    let mut m = CubeSet::empty(n);
    let mut atoms = Vec::new();
    let mut k_max = 0;
    for (i, atom) in f.atoms().iter().enumerate() {
        let atom = lift(atom, n);
        let z = l_n.intersection(&atom);
        if z.is_empty() || atom.is_subset(&p_n) {
            continue;
        }
        let k = z.count();
        k_max = k_max.max(k);
        let free = atom.difference(&l_n).difference(&q_n);
        let reflected = t_map(&z, t)?;
        let m_e = if reflected.is_subset(&free) {
            atoms.push(AtomRepair {
                atom: i,
                s_objective: objective_s(&reflected, &z, t)?,
                swap_scan_count: 0,
                below_bound: true,
                semibalanced: true,
            });
            reflected
        } else {
            let inst = RepairInstance { t, eta: eta.clone(), n, k, f: atom.clone(), q: q_n.clone(), z };
            let r = construct_m_unchecked(&inst, mode, EXHAUSTIVE_CAP)?;
            atoms.push(atom_summary(i, &r));
            r.m
        };
        m = m.union(&m_e);
    }
    Ok(SemibalanceRepair { m, n, k: k_max, eta: eta.clone(), theta: theta.clone(), atoms })
}

/// Everything fixed by the budget computation; [`SplitRepairContext::repair`] runs the
/// follow-up call for a particular `L` and `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRepairContext {
    pub algebra: FiniteAlgebra,
    pub chain: Vec<FiniteAlgebra>,
    pub m_seq: Vec<u32>,
    pub k: usize,
    #[serde(rename = "G")]
    pub g: CubeSet,
    #[serde(rename = "P")]
    pub p: CubeSet,
    #[serde(with = "ratio::text")]
    pub eta: Rational,
    #[serde(with = "ratio::text")]
    pub epsilon: Rational,
    pub t: u32,
    #[serde(with = "ratio::text")]
    pub rho: Rational,
    #[serde(with = "ratio::text")]
    pub delta: Rational,
    #[serde(with = "ratio::text")]
    pub theta: Rational,
    pub config: RepairConfig,
}

/// Compute the budget `theta` below which any `L` disjoint from `P` and any `Q` can be
/// repaired without breaking the split-family balance of `G` in the first `k` algebras.
pub fn split_repair_budget(
    chain: &[FiniteAlgebra],
    m_seq: &[u32],
    g: &CubeSet,
    p: &CubeSet,
    k: usize,
    eta: &Rational,
    config: &RepairConfig,
) -> Result<(Rational, SplitRepairContext)> {
    if k == 0 || k > chain.len() || k > m_seq.len() {
        return Err(Error::Parameter(format!("index k = {k} must be in 1..={}", chain.len().min(m_seq.len()))));
    }
    if !eta.is_positive() {
        return Err(Error::Parameter("eta must be positive".into()));
    }
    if !g.is_subset(p) {
        return Err(Error::Hypothesis("G is not a subset of P".into()));
    }
    for n in 1..=k {
        let rep = chain[n - 1].split_is_m_balanced(g, m_seq[n - 1], &pow2_neg(n as u32))?;
        if let Some(v) = rep.first_violation {
            return Err(Error::Hypothesis(format!("split family of algebra {n} by G: {v}")));
        }
    }
    let m_k = m_seq[k - 1];
    let mut gens = vec![g.clone(), p.clone()];
    for b in &chain[..k] {
        gens.extend(b.generators().iter().cloned());
    }
    let res = gens.iter().map(|s| s.resolution()).max().unwrap_or(1).max(m_k);
    let algebra = FiniteAlgebra::new(res, gens).with_level(m_k)?;
    let epsilon = ratio::min(algebra.min_positive_mass().to_rational() / ratio::int(100), pow2_neg(m_k + k as u32 + 1));
    let pieces = algebra.as_pieces();
    let mut t = match pieces.min_balance_level(&epsilon, m_k) {
        Some(t) => t,
        // every element is a union of cylinders of length res <= m_k
        None if algebra.resolution() <= m_k => m_k + 1,
        None => return Err(Error::Internal("algebra is not balanced at its own resolution".into())),
    };
    loop {
        for e in algebra.atoms() {
            if dense_cylinder(e, t, &frac(99, 100)).is_none() {
                return Err(Error::Internal(format!("balanced algebra without a dense cylinder at level {t}")));
            }
        }
        let mut rho: Option<Rational> = None;
        for n in 1..=k {
            let eps = pow2_neg(n as u32);
            let mut thr = Rational::from_integer(0.into());
            for fam in chain[n - 1].split_family(g) {
                thr = thr.max(fam.balance_threshold(m_seq[n - 1], Some(t))?);
            }
            let eps1 = (&thr + &eps) / ratio::int(2);
            let r = perturbation_tolerance(m_seq[n - 1], t, &eps, &eps1)?;
            rho = Some(match rho {
                Some(x) => ratio::min(x, r),
                None => r,
            });
        }
        let rho = rho.expect("k >= 1");
        let delta = ratio::min(ratio::min(eta.clone(), &rho / ratio::int(2)), pow2_neg(m_k + k as u32 + 1));
        // repair_balance needs the algebra (t, delta/2)-semibalanced; raise t until it is
        if !pieces.is_semibalanced(t, &(&delta / ratio::int(2))).holds {
            t += 1;
            continue;
        }
        let (_, tri_theta) = semibalance_repair_budget(&algebra, t, &delta, config.regime)?;
        let half_rho = &rho / ratio::int(2);
        let theta = if tri_theta < half_rho { tri_theta } else { &rho / ratio::int(4) };
        let ctx = SplitRepairContext {
            algebra,
            chain: chain[..k].to_vec(),
            m_seq: m_seq[..k].to_vec(),
            k,
            g: g.clone(),
            p: p.clone(),
            eta: eta.clone(),
            epsilon,
            t,
            rho,
            delta,
            theta: theta.clone(),
            config: config.clone(),
        };
        return Ok((theta, ctx));
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRepairOutcome {
    #[serde(rename = "M")]
    pub m: CubeSet,
    pub repair: SemibalanceRepair,
}

impl SplitRepairContext {
    /// The follow-up call: `M` disjoint from `P ∪ Q`, `λ(M) < eta`, and the split family
    /// of every algebra `n <= k` by `G ∪ L ∪ M` is `(m_n, 2^-n)`-balanced. All verified.
    pub fn repair(&self, l: &CubeSet, q: &CubeSet) -> Result<SplitRepairOutcome> {
        if !l.is_disjoint(&self.p) {
            return Err(Error::Hypothesis("L meets P".into()));
        }
        for (what, s) in [("lambda(L)", l), ("lambda(Q)", q)] {
            let v = s.lambda().to_rational();
            if v >= self.theta {
                return Err(Error::Budget {
                    what: what.into(),
                    value: Box::new(v),
                    bound: Box::new(self.theta.clone()),
                });
            }
        }
        let report = repair_balance(&self.algebra, &self.p, l, q, self.t, &self.delta, &self.config)?;
        let m = report.m.clone();
        let fail = |msg: String| match self.config.regime {
            Regime::Strict => Error::Internal(msg),
            Regime::Relaxed => Error::Infeasible(msg),
        };
        if !m.is_disjoint(&self.p.union(q)) {
            return Err(fail("M meets P ∪ Q".into()));
        }
        if m.lambda().to_rational() >= self.eta {
            return Err(fail("lambda(M) is not below eta".into()));
        }
        let glm = self.g.union(l).union(&m);
        for n in 1..=self.k {
            let rep = self.chain[n - 1].split_is_m_balanced(&glm, self.m_seq[n - 1], &pow2_neg(n as u32))?;
            if let Some(v) = rep.first_violation {
                return Err(fail(format!("split family of algebra {n} by G ∪ L ∪ M: {v}")));
            }
        }
        Ok(SplitRepairOutcome { m, repair: report })
    }
}
