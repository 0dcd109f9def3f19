//! One-step extension of a balanced chain by a set `G` that pins down a normal family,
//! the `K`-step truncation producing a witness, and checkers for the witness patterns.
//!
//! Indices of measures in a family are 1-based, so `d = 0` allows every index.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAlgebra;
use crate::balance::is_m_balanced;
use crate::cube::CubeSet;
use crate::error::{Error, Result};
use crate::measures::{
    antichain_pair_capped, antichain_pair_from, continuity_budget, lebesgue_decompose, separate_singular_capped,
    FAMeasure, NormalFamily, SEPARATION_CAP,
};
use crate::ratio::{self, frac, int, pow2_neg};
use crate::repair::{split_repair_budget, RepairConfig};
use crate::Rational;

/// The constants of the construction. Defaults are the ones the argument is written for.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionConfig {
    /// Every `mu` in `Ms` must give the used sets less than this.
    #[serde(with = "ratio::text")]
    pub mass_budget: Rational,
    /// `|nu_a|(H0)` and `|nu_b|(H1)` must reach this.
    #[serde(with = "ratio::text")]
    pub variation_floor: Rational,
    /// `|nu_a(G' ∩ H0)|` must reach this.
    #[serde(with = "ratio::text")]
    pub hit_floor: Rational,
    /// Finest resolution for separating sets, antichains and the choice of `L`.
    pub resolution_cap: u32,
    /// Planned number of steps. Step `k + 1` takes `H0`, `H1` and `G'` fine enough to be
    /// `(m_(k+1) + j, 2^-(k+1+j) / 4)`-balanced for each later step `j`, so later levels
    /// stay low; it falls back to the coarsest choice at the cap. `0` disables this.
    pub horizon: usize,
    pub repair: RepairConfig,
}

impl Default for ExtensionConfig {
    fn default() -> Self {
        ExtensionConfig {
            mass_budget: frac(1, 10),
            variation_floor: frac(9, 10),
            hit_floor: frac(3, 10),
            resolution_cap: SEPARATION_CAP,
            horizon: 1,
            repair: RepairConfig::default(),
        }
    }
}

/// What has been built after `k` steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionState {
    pub k: usize,
    pub m_seq: Vec<u32>,
    /// `B_1, B_2, ...`; step `k + 1` needs `B_(k+1)`.
    pub chain: Vec<FiniteAlgebra>,
    #[serde(rename = "G_parts")]
    pub g_parts: Vec<CubeSet>,
    #[serde(rename = "H0_parts")]
    pub h0_parts: Vec<CubeSet>,
    #[serde(rename = "H1_parts")]
    pub h1_parts: Vec<CubeSet>,
    pub a_seq: Vec<usize>,
    pub b_seq: Vec<usize>,
    pub ms: Vec<FAMeasure>,
}

/// Result of one step, with the intermediate budgets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub a: usize,
    pub b: usize,
    pub m_next: u32,
    #[serde(rename = "G_prime")]
    pub g_prime: CubeSet,
    #[serde(rename = "H0")]
    pub h0: CubeSet,
    #[serde(rename = "H1")]
    pub h1: CubeSet,
    #[serde(rename = "L")]
    pub l: CubeSet,
    #[serde(rename = "M")]
    pub m: CubeSet,
    #[serde(rename = "X")]
    pub x: CubeSet,
    #[serde(with = "ratio::text")]
    pub xi: Rational,
    #[serde(with = "ratio::text")]
    pub eta: Rational,
    #[serde(with = "ratio::text")]
    pub theta: Rational,
}

fn union_of<'a>(sets: impl IntoIterator<Item = &'a CubeSet>) -> CubeSet {
    sets.into_iter().fold(CubeSet::empty(1), |acc, s| acc.union(s))
}

fn max_mass(ms: &[FAMeasure], a: &CubeSet) -> Rational {
    ms.iter().map(|mu| mu.eval(a)).max().unwrap_or_else(Rational::zero)
}

/// Smallest level above `start` at which every union of the algebra's atoms is
/// `(m, eps)`-balanced; past the resolution any level works.
fn next_level(alg: &FiniteAlgebra, eps: &Rational, start: u32) -> u32 {
    alg.as_pieces().min_balance_level(eps, start).unwrap_or(start + 1)
}

/// `G' ∩ H0`-candidate: the atoms of `H0` where `nu` has one sign, refined from `from`
/// until the atoms carry at least twice `floor`, the heavier sign taken.
fn choose_l(nu: &FAMeasure, h0: &CubeSet, floor: &Rational, from: u32, cap: u32) -> Result<CubeSet> {
    let start = h0.resolution().max(nu.depth()).max(from).max(1);
    let need = floor * int(2);
    for n in start..=cap.max(start) {
        let masses = nu.atom_masses(&h0.refine(n)?);
        let (pos, neg): (Vec<_>, Vec<_>) = masses.into_iter().partition(|(_, v)| v.is_positive());
        let sum = |v: &[(u64, Rational)]| v.iter().map(|(_, x)| x.abs()).sum::<Rational>();
        let (p, q) = (sum(&pos), sum(&neg));
        if &p + &q >= need {
            let side = if p >= q { pos } else { neg };
            return Ok(CubeSet::from_atoms(n, side.into_iter().map(|(x, _)| x)));
        }
    }
    Err(Error::ResolutionCap { need: cap + 1, cap })
}

impl ExtensionState {
    /// The empty start: `k = 0`, all sequences empty.
    pub fn new(chain: Vec<FiniteAlgebra>, ms: Vec<FAMeasure>) -> Self {
        ExtensionState {
            k: 0,
            m_seq: Vec::new(),
            chain,
            g_parts: Vec::new(),
            h0_parts: Vec::new(),
            h1_parts: Vec::new(),
            a_seq: Vec::new(),
            b_seq: Vec::new(),
            ms,
        }
    }

    /// `Ĝ`, the union of the `G` parts.
    pub fn g_hat(&self) -> CubeSet {
        union_of(&self.g_parts)
    }

    /// `Ĥ`, the union of every `H0` and `H1` part.
    pub fn h_hat(&self) -> CubeSet {
        union_of(self.h0_parts.iter().chain(&self.h1_parts))
    }

    fn last_m(&self) -> u32 {
        self.m_seq.last().copied().unwrap_or(0)
    }

    /// The state after appending a step.
    pub fn push(&self, out: &StepOutcome) -> ExtensionState {
        let mut s = self.clone();
        s.k += 1;
        s.m_seq.push(out.m_next);
        s.g_parts.push(out.g_prime.clone());
        s.h0_parts.push(out.h0.clone());
        s.h1_parts.push(out.h1.clone());
        s.a_seq.push(out.a);
        s.b_seq.push(out.b);
        s
    }

    /// Hypotheses of a step from this state.
    pub fn check_hypotheses(&self, fam: &NormalFamily, cfg: &ExtensionConfig) -> Result<()> {
        if self.chain.len() <= self.k {
            return Err(Error::Hypothesis(format!(
                "chain has {} algebras, step {} needs one more",
                self.chain.len(),
                self.k + 1
            )));
        }
        if !self.ms.iter().any(|mu| mu.same_measure(&fam.limit)) {
            return Err(Error::Hypothesis("the family's limit must be one of Ms".into()));
        }
        if let Some(i) = self.ms.iter().position(|mu| !mu.is_positive() || mu.norm() != int(1)) {
            return Err(Error::Hypothesis(format!("measure {i} of Ms is not a probability measure")));
        }
        let g = self.g_hat();
        for n in 1..=self.k {
            let rep = self.chain[n - 1].split_is_m_balanced(&g, self.m_seq[n - 1], &pow2_neg(n as u32))?;
            if let Some(v) = rep.first_violation {
                return Err(Error::Hypothesis(format!("split family of algebra {n} by Ĝ: {v}")));
            }
        }
        if max_mass(&self.ms, &g.union(&self.h_hat())) >= cfg.mass_budget {
            return Err(Error::Hypothesis("some measure of Ms gives Ĝ ∪ Ĥ too much mass".into()));
        }
        Ok(())
    }

    /// The inductive invariants for every prefix of the construction.
    pub fn check_invariants(&self, fam: &NormalFamily, cfg: &ExtensionConfig) -> std::result::Result<(), String> {
        let k = self.k;
        let lens = [
            self.m_seq.len(),
            self.g_parts.len(),
            self.h0_parts.len(),
            self.h1_parts.len(),
            self.a_seq.len(),
            self.b_seq.len(),
        ];
        if lens.iter().any(|&l| l != k) {
            return Err(format!("sequence lengths {lens:?} differ from k = {k}"));
        }
        let increasing = |v: &[usize]| v.windows(2).all(|w| w[0] < w[1]);
        if !self.m_seq.windows(2).all(|w| w[0] < w[1]) || !increasing(&self.a_seq) || !increasing(&self.b_seq) {
            return Err("m, a or b is not strictly increasing".into());
        }
        let mut g = CubeSet::empty(1);
        let mut used = CubeSet::empty(1);
        for j in 1..=k {
            g = g.union(&self.g_parts[j - 1]);
            for n in 1..=j {
                let rep = self.chain[n - 1]
                    .split_is_m_balanced(&g, self.m_seq[n - 1], &pow2_neg(n as u32))
                    .map_err(|e| e.to_string())?;
                if let Some(v) = rep.first_violation {
                    return Err(format!("split family of algebra {n} by G_1 ∪ ... ∪ G_{j}: {v}"));
                }
            }
            used = used.union(&self.g_parts[j - 1]).union(&self.h0_parts[j - 1]).union(&self.h1_parts[j - 1]);
            if let Some(i) = self.ms.iter().position(|mu| mu.eval(&used) >= cfg.mass_budget) {
                return Err(format!("measure {i} of Ms is too large on the sets of the first {j} steps"));
            }
        }
        let hs: Vec<&CubeSet> = self.h0_parts.iter().chain(&self.h1_parts).collect();
        for i in 0..hs.len() {
            for j in i + 1..hs.len() {
                if !hs[i].is_disjoint(hs[j]) {
                    return Err("the H sets are not pairwise disjoint".into());
                }
            }
        }
        for i in 0..k {
            for j in i + 1..k {
                if !self.g_parts[i].is_disjoint(&self.g_parts[j]) {
                    return Err(format!("G_{} meets G_{}", i + 1, j + 1));
                }
            }
        }
        for (gi, g) in self.g_parts.iter().enumerate() {
            for n in 0..k {
                if g.is_disjoint(&self.h0_parts[n]) == (gi == n) {
                    return Err(format!("G_{} against H0 of step {}", gi + 1, n + 1));
                }
                if !g.is_disjoint(&self.h1_parts[n]) {
                    return Err(format!("G_{} meets H1 of step {}", gi + 1, n + 1));
                }
            }
        }
        for n in 0..k {
            let (a, b) = (self.a_seq[n], self.b_seq[n]);
            if a == 0 || b == 0 || a > fam.len() || b > fam.len() {
                return Err(format!("index out of range at step {}", n + 1));
            }
            if fam.get(a).variation(&self.h0_parts[n]) < cfg.variation_floor
                || fam.get(b).variation(&self.h1_parts[n]) < cfg.variation_floor
            {
                return Err(format!("variation below the floor at step {}", n + 1));
            }
            let hit = fam.get(a).eval(&self.g_parts[n].intersection(&self.h0_parts[n])).abs();
            if hit < cfg.hit_floor {
                return Err(format!("|nu_a(G ∩ H0)| = {} at step {}", ratio::to_text(&hit), n + 1));
            }
        }
        Ok(())
    }
}

/// The eight conclusions of a step from `state`, plus `a, b > d`.
pub fn check_step(
    state: &ExtensionState,
    fam: &NormalFamily,
    d: usize,
    out: &StepOutcome,
    cfg: &ExtensionConfig,
) -> std::result::Result<(), String> {
    let k = state.k;
    let (g, h) = (state.g_hat(), state.h_hat());
    if out.m_next <= state.last_m() {
        return Err("m_(k+1) does not exceed m_k".into());
    }
    let mut m_seq = state.m_seq.clone();
    m_seq.push(out.m_next);
    let gg = g.union(&out.g_prime);
    for n in 1..=k + 1 {
        let alg = state.chain.get(n - 1).ok_or_else(|| format!("no algebra {n}"))?;
        let rep = alg.split_is_m_balanced(&gg, m_seq[n - 1], &pow2_neg(n as u32)).map_err(|e| e.to_string())?;
        if let Some(v) = rep.first_violation {
            return Err(format!("split family of algebra {n} by Ĝ ∪ G': {v}"));
        }
    }
    let all = gg.union(&h).union(&out.h0).union(&out.h1);
    if let Some(i) = state.ms.iter().position(|mu| mu.eval(&all) >= cfg.mass_budget) {
        return Err(format!("measure {i} of Ms is too large on Ĝ ∪ G' ∪ Ĥ ∪ H0 ∪ H1"));
    }
    if !(h.is_disjoint(&out.h0) && h.is_disjoint(&out.h1) && out.h0.is_disjoint(&out.h1)) {
        return Err("Ĥ, H0, H1 are not pairwise disjoint".into());
    }
    if !out.g_prime.is_disjoint(&g.union(&h).union(&out.h1)) {
        return Err("G' meets Ĝ ∪ Ĥ ∪ H1".into());
    }
    if !g.is_disjoint(&out.h0.union(&out.h1)) {
        return Err("Ĝ meets H0 ∪ H1".into());
    }
    if out.a <= d || out.b <= d || out.a > fam.len() || out.b > fam.len() {
        return Err(format!("indices a = {}, b = {} not in ({d}, {}]", out.a, out.b, fam.len()));
    }
    if fam.get(out.a).variation(&out.h0) < cfg.variation_floor
        || fam.get(out.b).variation(&out.h1) < cfg.variation_floor
    {
        return Err("|nu_a|(H0) or |nu_b|(H1) below the floor".into());
    }
    if fam.get(out.a).eval(&out.g_prime.intersection(&out.h0)).abs() < cfg.hit_floor {
        return Err("|nu_a(G' ∩ H0)| below the floor".into());
    }
    Ok(())
}

/// One step of the construction: new `m`, indices `a, b > d`, sets `G'`, `H0`, `H1`.
/// Every conclusion is checked before returning.
pub fn one_step(state: &ExtensionState, fam: &NormalFamily, d: usize, cfg: &ExtensionConfig) -> Result<StepOutcome> {
    state.check_hypotheses(fam, cfg)?;
    let k = state.k;
    let (g, h) = (state.g_hat(), state.h_hat());
    let p = g.union(&h);

    let e = state.chain[k].with_generators([g.clone(), h.clone()]);
    let m_next = next_level(&e, &pow2_neg(k as u32 + 1), state.last_m());

    let xi = &cfg.mass_budget - max_mass(&state.ms, &p);
    let quarter = &xi / int(4);
    let mut eta = int(1);
    let mut singular = Vec::new();
    for mu in &state.ms {
        let (mu1, mu2) = lebesgue_decompose(mu);
        if let Some(b) = continuity_budget(&mu1, &xi)? {
            eta = ratio::min(eta, b);
        }
        if mu2.has_points() {
            singular.push(mu2);
        }
    }

    let mut m_seq = state.m_seq.clone();
    m_seq.push(m_next);
    let (theta, ctx) = split_repair_budget(&state.chain[..=k], &m_seq, &g, &p, k + 1, &eta, &cfg.repair)?;

    let cap = cfg.resolution_cap;
    let x =
        separate_singular_capped(&FAMeasure::lebesgue(0), &singular, &ratio::min(theta.clone(), quarter.clone()), cap)?;
    let eps = ratio::min(&theta - x.lambda().to_rational(), quarter);
    let ahead = if cfg.horizon == 0 { 0 } else { cfg.horizon.saturating_sub(k + 1).max(1) as u32 };
    let fits = |s: &CubeSet| {
        (1..=ahead).all(|j| {
            let eps = pow2_neg(k as u32 + 1 + j) / int(4);
            is_m_balanced(s, m_next + j, &eps).is_ok_and(|r| r.holds)
        })
    };

    let mut pair = antichain_pair_capped(fam, &state.ms, d, &eps, &p, cap)?;
    let mut from = pair.h0.resolution();
    while !(fits(&pair.h0) && fits(&pair.h1)) && from < cap {
        from += 1;
        match antichain_pair_from(fam, &state.ms, d, &eps, &p, from, cap) {
            Ok(finer) => pair = finer,
            Err(_) => break,
        }
    }
    let q = pair.h0.union(&pair.h1).union(&x);

    let mut chosen = None;
    let mut from = 1;
    loop {
        let l = choose_l(fam.get(pair.a), &pair.h0, &cfg.hit_floor, from, cap)?;
        let repaired = ctx.repair(&l, &q)?;
        let g_prime = l.union(&repaired.m);
        let fit = fits(&g_prime);
        from = l.resolution() + 1;
        let at_cap = l.resolution() >= cap;
        if chosen.is_none() || fit {
            chosen = Some((l, repaired, g_prime));
        }
        if fit || at_cap {
            break;
        }
    }
    let (l, repaired, g_prime) = chosen.expect("one candidate");

    let out = StepOutcome {
        a: pair.a,
        b: pair.b,
        m_next,
        g_prime,
        h0: pair.h0,
        h1: pair.h1,
        l,
        m: repaired.m,
        x,
        xi,
        eta,
        theta,
    };
    check_step(state, fam, d, &out, cfg).map_err(|msg| match cfg.repair.regime {
        crate::repair::Regime::Strict => Error::Internal(msg),
        crate::repair::Regime::Relaxed => Error::Infeasible(msg),
    })?;
    Ok(out)
}

/// `G` with the antichain and index sequences that single out a normal family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GStarWitness {
    #[serde(rename = "G")]
    pub g: CubeSet,
    /// `(H0, H1)` per index.
    pub pairs: Vec<(CubeSet, CubeSet)>,
    pub a_seq: Vec<usize>,
    pub b_seq: Vec<usize>,
}

/// `K` steps from the empty state with `Ms = {λ, limit}`; returns the witness and the
/// final state. Every step's state invariants and the witness checks are verified.
pub fn build_gstar_witness(
    chain: &[FiniteAlgebra],
    fam: &NormalFamily,
    steps: usize,
    cfg: &ExtensionConfig,
) -> Result<(GStarWitness, ExtensionState)> {
    if chain.len() < steps {
        return Err(Error::Hypothesis(format!("{steps} steps need {steps} algebras, got {}", chain.len())));
    }
    let mut ms = vec![FAMeasure::lebesgue(0)];
    if !fam.limit.same_measure(&ms[0]) {
        ms.push(fam.limit.clone());
    }
    let cfg = &ExtensionConfig { horizon: if cfg.horizon == 0 { 0 } else { cfg.horizon.max(steps) }, ..cfg.clone() };
    let mut state = ExtensionState::new(chain.to_vec(), ms);
    for _ in 0..steps {
        let d = match (state.a_seq.last(), state.b_seq.last()) {
            (Some(&a), Some(&b)) => a.max(b),
            _ => 1,
        };
        let out = one_step(&state, fam, d, cfg)?;
        state = state.push(&out);
        state.check_invariants(fam, cfg).map_err(Error::Internal)?;
    }
    let w = GStarWitness {
        g: state.g_hat(),
        pairs: state.h0_parts.iter().cloned().zip(state.h1_parts.iter().cloned()).collect(),
        a_seq: state.a_seq.clone(),
        b_seq: state.b_seq.clone(),
    };
    let rep = check_gstar(&StarAlgebra::Clopen, &w.g, fam, &w, cfg);
    if let Some(f) = rep.failure {
        return Err(Error::Internal(format!("witness fails {f}")));
    }
    Ok((w, state))
}

/// The smaller algebra `B*` of a witness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StarAlgebra {
    /// Every clopen set.
    Clopen,
    Finite(FiniteAlgebra),
}

impl StarAlgebra {
    pub fn contains(&self, a: &CubeSet) -> bool {
        match self {
            StarAlgebra::Clopen => true,
            StarAlgebra::Finite(f) => f.contains(a),
        }
    }

    /// `|mu|` computed inside the algebra.
    pub fn variation(&self, mu: &FAMeasure, a: &CubeSet) -> Option<Rational> {
        match self {
            StarAlgebra::Clopen => Some(mu.variation(a)),
            StarAlgebra::Finite(f) => mu.restricted_variation(f, a).ok(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClauseFailure {
    pub clause: String,
    /// 1-based position in the witness, when the clause is per index.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub index: Option<usize>,
    pub message: String,
}

impl std::fmt::Display for ClauseFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "clause {}", self.clause)?;
        if let Some(i) = self.index {
            write!(f, " at index {i}")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckReport {
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<ClauseFailure>,
}

impl CheckReport {
    pub fn pass() -> Self {
        CheckReport { holds: true, failure: None }
    }

    pub fn fail(clause: &str, index: Option<usize>, message: impl Into<String>) -> Self {
        CheckReport {
            holds: false,
            failure: Some(ClauseFailure { clause: clause.into(), index, message: message.into() }),
        }
    }
}

/// Shape shared by both patterns: an antichain, increasing in-range indices.
fn check_shape(
    pairs: &[(CubeSet, CubeSet)],
    a_seq: &[usize],
    b_seq: &[usize],
    fam: &NormalFamily,
) -> Option<CheckReport> {
    if a_seq.len() != pairs.len() || b_seq.len() != pairs.len() {
        return Some(CheckReport::fail("shape", None, "index sequences and pairs differ in length"));
    }
    let hs: Vec<&CubeSet> = pairs.iter().flat_map(|(h0, h1)| [h0, h1]).collect();
    for i in 0..hs.len() {
        for j in i + 1..hs.len() {
            if !hs[i].is_disjoint(hs[j]) {
                return Some(CheckReport::fail("antichain", Some(i / 2 + 1), "H sets are not pairwise disjoint"));
            }
        }
    }
    for (name, s) in [("a", a_seq), ("b", b_seq)] {
        if !s.windows(2).all(|w| w[0] < w[1]) {
            return Some(CheckReport::fail("shape", None, format!("{name} is not strictly increasing")));
        }
        if let Some(i) = s.iter().position(|&x| x == 0 || x > fam.len()) {
            return Some(CheckReport::fail("shape", Some(i + 1), format!("{name} index outside the family")));
        }
    }
    None
}

/// Clauses (a)-(d) of the witness pattern over `B*`, first failure reported.
pub fn check_gstar(
    bstar: &StarAlgebra,
    g: &CubeSet,
    fam: &NormalFamily,
    w: &GStarWitness,
    cfg: &ExtensionConfig,
) -> CheckReport {
    if let Some(r) = check_shape(&w.pairs, &w.a_seq, &w.b_seq, fam) {
        return r;
    }
    for (n, (h0, h1)) in w.pairs.iter().enumerate() {
        let idx = Some(n + 1);
        if !bstar.contains(h0) || !bstar.contains(h1) {
            return CheckReport::fail("antichain", idx, "H sets are not in B*");
        }
        let gh0 = g.intersection(h0);
        if !bstar.contains(&gh0) {
            return CheckReport::fail("a", idx, "G ∩ H0 is not in B*");
        }
        if !g.is_disjoint(h1) {
            return CheckReport::fail("b", idx, "G meets H1");
        }
        let (na, nb) = (fam.get(w.a_seq[n]), fam.get(w.b_seq[n]));
        let big = |mu: &FAMeasure, h: &CubeSet| bstar.variation(mu, h).is_some_and(|v| v >= cfg.variation_floor);
        if !big(na, h0) || !big(nb, h1) {
            return CheckReport::fail("c", idx, "|nu_a|(H0) or |nu_b|(H1) below the floor");
        }
        if na.eval(&gh0).abs() < cfg.hit_floor {
            return CheckReport::fail("d", idx, "|nu_a(G ∩ H0)| below the floor");
        }
    }
    CheckReport::pass()
}

/// Clauses (a)-(c) of the pattern inside a finite algebra `B`.
pub fn check_g(
    b: &FiniteAlgebra,
    fam: &NormalFamily,
    g: &CubeSet,
    pairs: &[(CubeSet, CubeSet)],
    a_seq: &[usize],
    b_seq: &[usize],
    cfg: &ExtensionConfig,
) -> CheckReport {
    if let Some(r) = check_shape(pairs, a_seq, b_seq, fam) {
        return r;
    }
    if !b.contains(g) {
        return CheckReport::fail("shape", None, "G is not in B");
    }
    for (n, (h0, h1)) in pairs.iter().enumerate() {
        let idx = Some(n + 1);
        if !b.contains(h0) || !b.contains(h1) {
            return CheckReport::fail("antichain", idx, "H sets are not in B");
        }
        if !g.is_disjoint(h1) {
            return CheckReport::fail("a", idx, "G meets H1");
        }
        let big = |mu: &FAMeasure, h: &CubeSet| mu.restricted_variation(b, h).is_ok_and(|v| v >= cfg.variation_floor);
        if !big(fam.get(a_seq[n]), h0) || !big(fam.get(b_seq[n]), h1) {
            return CheckReport::fail("b", idx, "|nu_a|(H0) or |nu_b|(H1) below the floor");
        }
        if fam.get(a_seq[n]).eval(&g.intersection(h0)).abs() < cfg.hit_floor {
            return CheckReport::fail("c", idx, "|nu_a(G ∩ H0)| below the floor");
        }
    }
    CheckReport::pass()
}

/// `|nu_a(G)| >= hit - (1 - floor)` and `|nu_b|(G) <= 1 - floor` for every index of
/// the witness; with the default constants these are `1/5` and `1/10`.
pub fn grothendieck_gap(
    fam: &NormalFamily,
    w: &GStarWitness,
    cfg: &ExtensionConfig,
) -> std::result::Result<(), String> {
    let slack = int(1) - &cfg.variation_floor;
    let low = &cfg.hit_floor - &slack;
    for (n, (&a, &b)) in w.a_seq.iter().zip(&w.b_seq).enumerate() {
        let va = fam.get(a).eval(&w.g).abs();
        if va < low {
            return Err(format!(
                "|nu_a(G)| = {} below {} at index {}",
                ratio::to_text(&va),
                ratio::to_text(&low),
                n + 1
            ));
        }
        let vb = fam.get(b).variation(&w.g);
        if vb > slack {
            return Err(format!(
                "|nu_b|(G) = {} above {} at index {}",
                ratio::to_text(&vb),
                ratio::to_text(&slack),
                n + 1
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::Signs;

    /// `nu_i` is a unit mass at the point with one `+` in coordinate `i`, signs alternating.
    fn point_family(len: u32) -> NormalFamily {
        let nus = (1..=len)
            .map(|i| {
                let s = Signs::new((1..=i).map(|j| if j == i { 1 } else { -1 }).collect());
                FAMeasure::point(s, int(if i % 2 == 0 { -1 } else { 1 }))
            })
            .collect();
        NormalFamily::new(nus, FAMeasure::point(Signs::empty(), int(1))).unwrap()
    }

    #[test]
    fn first_step_from_empty_state() {
        let fam = point_family(8);
        let chain = vec![FiniteAlgebra::level(2, 2).unwrap()];
        let ms = vec![FAMeasure::lebesgue(0), fam.limit.clone()];
        let state = ExtensionState::new(chain, ms);
        let cfg = ExtensionConfig::default();
        let out = one_step(&state, &fam, 0, &cfg).unwrap();
        check_step(&state, &fam, 0, &out, &cfg).unwrap();
        let next = state.push(&out);
        next.check_invariants(&fam, &cfg).unwrap();
    }

    #[test]
    fn checkers_reject_bad_witnesses() {
        let fam = point_family(4);
        let cfg = ExtensionConfig::default();
        let h0 = CubeSet::cylinder(&"+".parse().unwrap(), 2).unwrap();
        let h1 = CubeSet::cylinder(&"-+".parse().unwrap(), 2).unwrap();
        let w = GStarWitness { g: CubeSet::empty(2), pairs: vec![(h0.clone(), h1)], a_seq: vec![1], b_seq: vec![2] };
        let rep = check_gstar(&StarAlgebra::Clopen, &w.g, &fam, &w, &cfg);
        assert_eq!(rep.failure.unwrap().clause, "d");
        let w = GStarWitness { pairs: vec![(h0.clone(), h0)], ..w };
        let rep = check_gstar(&StarAlgebra::Clopen, &w.g, &fam, &w, &cfg);
        assert_eq!(rep.failure.unwrap().clause, "antichain");
    }
}
