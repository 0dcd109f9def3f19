//! Finitely additive signed measures on the cube: a constant density on each atom of
//! some level plus finitely many point masses.
//!
//! A point is a finite sign prefix continued by `-1` forever, so membership in any
//! clopen set is decidable.

use std::collections::BTreeMap;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::algebra::FiniteAlgebra;
use crate::cube::{CubeSet, Signs, MAX_RESOLUTION};
use crate::error::{Error, Result};
use crate::ratio::{self, int};
use crate::Rational;

/// A point of the cube: `prefix` followed by `-1` in every later coordinate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub prefix: Signs,
}

impl Point {
    pub fn new(prefix: Signs) -> Self {
        Point { prefix }
    }

    /// Sign of coordinate `r` (1-based).
    pub fn coord(&self, r: u32) -> i8 {
        if (r as usize) <= self.prefix.len() {
            self.prefix.get(r as usize)
        } else {
            -1
        }
    }

    /// Index of the atom containing the point at resolution `n`.
    pub fn atom(&self, n: u32) -> u64 {
        (1..=n).filter(|&r| self.coord(r) == 1).fold(0, |acc, r| acc | 1 << (r - 1))
    }

    pub fn in_set(&self, a: &CubeSet) -> bool {
        a.contains(self.atom(a.resolution()))
    }

    /// The prefix with trailing `-` removed; equal keys mean equal points.
    fn key(&self) -> Vec<i8> {
        let s = self.prefix.as_slice();
        let end = s.iter().rposition(|&x| x == 1).map_or(0, |i| i + 1);
        s[..end].to_vec()
    }

    /// Length after which every coordinate is `-1`.
    pub fn depth(&self) -> u32 {
        self.key().len() as u32
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    pub prefix: Signs,
    #[serde(with = "ratio::text")]
    pub weight: Rational,
}

impl PointMass {
    pub fn point(&self) -> Point {
        Point::new(self.prefix.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureSpec", into = "MeasureSpec")]
pub struct FAMeasure {
    resolution: u32,
    density: Vec<Rational>,
    points: Vec<PointMass>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct MeasureSpec {
    resolution: u32,
    #[serde(with = "ratio::vec_text")]
    density: Vec<Rational>,
    #[serde(default)]
    points: Vec<PointMass>,
}

impl TryFrom<MeasureSpec> for FAMeasure {
    type Error = Error;
    fn try_from(s: MeasureSpec) -> Result<Self> {
        FAMeasure::new(s.resolution, s.density, s.points)
    }
}

impl From<FAMeasure> for MeasureSpec {
    fn from(m: FAMeasure) -> Self {
        MeasureSpec { resolution: m.resolution, density: m.density, points: m.points }
    }
}

impl FAMeasure {
    /// Points at the same location are merged, zero weights dropped, and prefixes padded
    /// with `-` to length at least `n`.
    pub fn new(n: u32, density: Vec<Rational>, points: Vec<PointMass>) -> Result<Self> {
        if n > MAX_RESOLUTION {
            return Err(Error::BadResolution(n));
        }
        if density.len() != 1usize << n {
            return Err(Error::Parameter(format!(
                "density needs {} entries at resolution {n}, got {}",
                1u64 << n,
                density.len()
            )));
        }
        let mut merged: BTreeMap<Vec<i8>, (Signs, Rational)> = BTreeMap::new();
        for p in points {
            let key = p.point().key();
            merged.entry(key).and_modify(|e| e.1 += &p.weight).or_insert((p.prefix, p.weight));
        }
        let points = merged
            .into_values()
            .filter(|(_, w)| !w.is_zero())
            .map(|(prefix, weight)| {
                let mut v = prefix.as_slice().to_vec();
                v.resize(v.len().max(n as usize), -1);
                PointMass { prefix: Signs::new(v), weight }
            })
            .collect();
        Ok(FAMeasure { resolution: n, density, points })
    }

    pub fn zero(n: u32) -> Self {
        FAMeasure { resolution: n, density: vec![int(0); 1 << n], points: Vec::new() }
    }

    /// Haar measure.
    pub fn lebesgue(n: u32) -> Self {
        FAMeasure { resolution: n, density: vec![int(1); 1 << n], points: Vec::new() }
    }

    /// Point mass `weight` at `prefix` followed by `-1`s.
    pub fn point(prefix: Signs, weight: Rational) -> Self {
        FAMeasure::new(0, vec![int(0)], vec![PointMass { prefix, weight }]).expect("valid point mass")
    }

    /// `phi_r` as a measure: density `x_r`.
    pub fn rademacher(r: u32) -> Result<Self> {
        if r == 0 || r > MAX_RESOLUTION {
            return Err(Error::BadResolution(r));
        }
        let density = (0..1u64 << r).map(|a| int(crate::cube::atom_sign(a, r))).collect();
        Ok(FAMeasure { resolution: r, density, points: Vec::new() })
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn density(&self) -> &[Rational] {
        &self.density
    }

    pub fn points(&self) -> &[PointMass] {
        &self.points
    }

    /// The same measure with its density stored at resolution `n >= resolution`.
    pub fn refined(&self, n: u32) -> Result<Self> {
        if n < self.resolution {
            return Err(Error::ResolutionTooSmall { have: n, need: self.resolution });
        }
        if n > MAX_RESOLUTION {
            return Err(Error::BadResolution(n));
        }
        let mask = (1u64 << self.resolution) - 1;
        let density = (0..1u64 << n).map(|a| self.density[(a & mask) as usize].clone()).collect();
        FAMeasure::new(n, density, self.points.clone())
    }

    /// Coarsest density resolution and shortest point prefixes; equal measures have
    /// equal canonical forms.
    pub fn canonical(&self) -> Self {
        let mut n = self.resolution;
        let mut density = self.density.clone();
        while n > 0 {
            let half = 1usize << (n - 1);
            if density[..half] != density[half..] {
                break;
            }
            density.truncate(half);
            n -= 1;
        }
        let points = self
            .points
            .iter()
            .map(|p| PointMass { prefix: Signs::new(p.point().key()), weight: p.weight.clone() })
            .collect();
        FAMeasure::new(n, density, points).expect("coarsening keeps the shape")
    }

    /// Same measure, whatever the stored resolutions.
    pub fn same_measure(&self, other: &FAMeasure) -> bool {
        self.canonical() == other.canonical()
    }

    pub fn scaled(&self, c: &Rational) -> Self {
        FAMeasure::new(
            self.resolution,
            self.density.iter().map(|d| d * c).collect(),
            self.points.iter().map(|p| PointMass { prefix: p.prefix.clone(), weight: &p.weight * c }).collect(),
        )
        .expect("scaling keeps the shape")
    }

    pub fn add(&self, other: &FAMeasure) -> Self {
        let n = self.resolution.max(other.resolution);
        let a = self.refined(n).expect("refine");
        let b = other.refined(n).expect("refine");
        let density = a.density.iter().zip(&b.density).map(|(x, y)| x + y).collect();
        let mut points = a.points;
        points.extend(b.points);
        FAMeasure::new(n, density, points).expect("sum keeps the shape")
    }

    /// Density integral over `A` with per-atom weights mapped through `f`.
    fn density_integral(&self, a: &CubeSet, f: impl Fn(&Rational) -> Rational) -> Rational {
        let n = self.resolution;
        let a = if a.resolution() < n { a.refine(n).expect("refine") } else { a.clone() };
        let counts = a.prefix_counts(n);
        let mut total = Rational::zero();
        for (d, c) in self.density.iter().zip(counts) {
            if c > 0 && !d.is_zero() {
                total += f(d) * int(c as i64);
            }
        }
        total / Rational::from_integer(num_bigint::BigInt::from(1u8) << a.resolution())
    }

    /// `mu(A)`.
    pub fn eval(&self, a: &CubeSet) -> Rational {
        let pts: Rational = self.points.iter().filter(|p| p.point().in_set(a)).map(|p| p.weight.clone()).sum();
        self.density_integral(a, |d| d.clone()) + pts
    }

    /// `|mu|(A)`.
    pub fn variation(&self, a: &CubeSet) -> Rational {
        let pts: Rational = self.points.iter().filter(|p| p.point().in_set(a)).map(|p| p.weight.abs()).sum();
        self.density_integral(a, |d| d.abs()) + pts
    }

    /// `mu` of every atom of `A` with nonzero mass, at resolution at least the measure's.
    pub fn atom_masses(&self, a: &CubeSet) -> Vec<(u64, Rational)> {
        let n = a.resolution().max(self.resolution);
        let a = a.refine(n).expect("refine");
        let mask = (1u64 << self.resolution) - 1;
        let cell = Rational::from_integer(num_bigint::BigInt::from(1u8) << n);
        let mut out: BTreeMap<u64, Rational> = BTreeMap::new();
        for x in a.atoms() {
            let d = &self.density[(x & mask) as usize];
            if !d.is_zero() {
                out.insert(x, d / &cell);
            }
        }
        for p in &self.points {
            let x = p.point().atom(n);
            if a.contains(x) {
                *out.entry(x).or_insert_with(Rational::zero) += &p.weight;
            }
        }
        out.into_iter().filter(|(_, v)| !v.is_zero()).collect()
    }

    /// `‖mu‖ = |mu|(C)`.
    pub fn norm(&self) -> Rational {
        let dens: Rational = self.density.iter().map(|d| d.abs()).sum();
        let dens = dens / Rational::from_integer(num_bigint::BigInt::from(1u8) << self.resolution);
        dens + self.points.iter().map(|p| p.weight.abs()).sum::<Rational>()
    }

    /// Variation of the restriction to a finite algebra, at an element `A` of it:
    /// `sum |mu(E)|` over atoms `E` inside `A`.
    pub fn restricted_variation(&self, alg: &FiniteAlgebra, a: &CubeSet) -> Result<Rational> {
        if !alg.contains(a) {
            return Err(Error::Hypothesis("set is not an element of the algebra".into()));
        }
        let n = alg.resolution().max(a.resolution());
        let a = a.refine(n)?;
        Ok(alg.refined(n).atoms().iter().filter(|e| e.is_subset(&a)).map(|e| self.eval(e).abs()).sum())
    }

    pub fn has_points(&self) -> bool {
        !self.points.is_empty()
    }

    pub fn is_positive(&self) -> bool {
        self.density.iter().all(|d| !d.is_negative()) && self.points.iter().all(|p| p.weight.is_positive())
    }

    /// Finest resolution needed to tell the stored points apart from every atom's density.
    pub fn depth(&self) -> u32 {
        self.points.iter().map(|p| p.point().depth()).fold(self.resolution, u32::max)
    }

    /// Support at resolution `n`: atoms with nonzero density and atoms holding a point.
    pub fn carrier(&self, n: u32) -> Result<CubeSet> {
        if n < self.resolution {
            return Err(Error::ResolutionTooSmall { have: n, need: self.resolution });
        }
        let mut out = self.density_carrier(n)?;
        for p in &self.points {
            out.insert(p.point().atom(n));
        }
        Ok(out)
    }

    fn density_carrier(&self, n: u32) -> Result<CubeSet> {
        let r = self.resolution.max(1);
        let mask = (1u64 << self.resolution) - 1;
        let base = CubeSet::from_atoms(r, (0..1u64 << r).filter(|a| !self.density[(a & mask) as usize].is_zero()));
        base.refine(n.max(r))
    }
}

/// `mu = mu1 + mu2` with `mu1` the density part and `mu2` the point part.
pub fn lebesgue_decompose(mu: &FAMeasure) -> (FAMeasure, FAMeasure) {
    let n = mu.resolution;
    let mu1 = FAMeasure { resolution: n, density: mu.density.clone(), points: Vec::new() };
    let mu2 = FAMeasure { resolution: n, density: vec![int(0); 1 << n], points: mu.points.clone() };
    (mu1, mu2)
}

/// `eta = xi / (4 max|density|)`, so that `λ(A) < eta` forces `|mu1(A)| < xi / 4`.
/// `None` when `mu1` is zero: every `eta` works.
pub fn continuity_budget(mu1: &FAMeasure, xi: &Rational) -> Result<Option<Rational>> {
    if mu1.has_points() {
        return Err(Error::DecompositionRequired);
    }
    if !xi.is_positive() {
        return Err(Error::Parameter("xi must be positive".into()));
    }
    let d_max = mu1.density.iter().map(|d| d.abs()).max().unwrap_or_else(Rational::zero);
    if d_max.is_zero() {
        return Ok(None);
    }
    Ok(Some(xi / (d_max * int(4))))
}

/// Default finest resolution tried by [`separate_singular`].
pub const SEPARATION_CAP: u32 = 24;

/// A clopen `X` with `|nu|(X) < eps` and `|mu|(C \ X) < eps` for every `mu` in `ms`.
pub fn separate_singular(nu: &FAMeasure, ms: &[FAMeasure], eps: &Rational) -> Result<CubeSet> {
    separate_singular_capped(nu, ms, eps, SEPARATION_CAP)
}

pub fn separate_singular_capped(nu: &FAMeasure, ms: &[FAMeasure], eps: &Rational, cap: u32) -> Result<CubeSet> {
    if !eps.is_positive() {
        return Err(Error::Parameter("eps must be positive".into()));
    }
    let base = ms.iter().map(|m| m.resolution).fold(nu.resolution.max(1), u32::max);
    if ms.is_empty() {
        return Ok(CubeSet::empty(base));
    }
    let cap = cap.min(MAX_RESOLUTION).max(base);
    for n in base..=cap {
        let nu_dense = nu.density_carrier(n)?;
        let nu_atoms: Vec<u64> = nu.points.iter().map(|p| p.point().atom(n)).collect();
        let mut x = CubeSet::empty(n);
        for mu in ms {
            // density cells of mu where nu has no density
            x = x.union(&mu.density_carrier(n)?.difference(&nu_dense));
            // small cells around mu's points
            for p in &mu.points {
                x.insert(p.point().atom(n));
            }
        }
        for &a in &nu_atoms {
            x.remove(a);
        }
        if nu.variation(&x) < *eps && ms.iter().all(|mu| mu.variation(&x.complement()) < *eps) {
            return Ok(x);
        }
    }
    Err(Error::NotSingular(format!("no separating clopen set up to resolution {cap}")))
}

/// A finite stand-in for a normal sequence: norm-one measures with disjoint carriers,
/// together with the limit of their variations, supplied explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFamily {
    pub measures: Vec<FAMeasure>,
    pub limit: FAMeasure,
}

impl NormalFamily {
    pub fn new(measures: Vec<FAMeasure>, limit: FAMeasure) -> Result<Self> {
        let fam = NormalFamily { measures, limit };
        fam.validate()?;
        Ok(fam)
    }

    /// Resolution at which every carrier is a clopen set separating the measures.
    pub fn carrier_resolution(&self) -> u32 {
        self.measures.iter().map(|m| m.depth()).fold(1, u32::max).min(MAX_RESOLUTION)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, m) in self.measures.iter().enumerate() {
            if m.norm() != int(1) {
                return Err(Error::Hypothesis(format!("measure {} has norm {}", i + 1, ratio::to_text(&m.norm()))));
            }
        }
        let n = self.carrier_resolution();
        let carriers = self.measures.iter().map(|m| m.carrier(n)).collect::<Result<Vec<_>>>()?;
        for i in 0..carriers.len() {
            for j in i + 1..carriers.len() {
                if !carriers[i].is_disjoint(&carriers[j]) {
                    return Err(Error::Overlap(format!("carriers of measures {} and {}", i + 1, j + 1)));
                }
            }
        }
        if !self.limit.is_positive() || self.limit.norm() != int(1) {
            return Err(Error::Hypothesis("limit is not a probability measure".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.measures.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measures.is_empty()
    }

    /// Measure `i`, 1-based.
    pub fn get(&self, i: usize) -> &FAMeasure {
        &self.measures[i - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AntichainPair {
    #[serde(rename = "H0")]
    pub h0: CubeSet,
    #[serde(rename = "H1")]
    pub h1: CubeSet,
    pub a: usize,
    pub b: usize,
}

/// Every postcondition of [`antichain_pair`]; the first failure as a message.
pub fn check_antichain_pair(
    fam: &NormalFamily,
    ms: &[FAMeasure],
    d: usize,
    eps: &Rational,
    p: &CubeSet,
    out: &AntichainPair,
) -> std::result::Result<(), String> {
    let (h0, h1) = (&out.h0, &out.h1);
    if !(h0.is_disjoint(h1) && h0.is_disjoint(p) && h1.is_disjoint(p)) {
        return Err("H0, H1, P are not pairwise disjoint".into());
    }
    if out.a <= d || out.b <= d || out.a == out.b || out.a > fam.len() || out.b > fam.len() {
        return Err(format!("indices a = {}, b = {} are not distinct and above {d}", out.a, out.b));
    }
    let h = h0.union(h1);
    if h.lambda().to_rational() >= *eps {
        return Err("lambda(H0 ∪ H1) is not below eps".into());
    }
    if let Some(i) = ms.iter().position(|mu| mu.variation(&h) >= *eps) {
        return Err(format!("measure {i} of Ms is not small on H0 ∪ H1"));
    }
    let nine = ratio::frac(9, 10);
    if fam.get(out.a).variation(h0) < nine || fam.get(out.b).variation(h1) < nine {
        return Err("|nu_a|(H0) or |nu_b|(H1) is below 9/10".into());
    }
    Ok(())
}

/// Two indices `a < b` above `d` with disjoint clopen sets `H0`, `H1` off `P`, each
/// carrying 9/10 of the respective variation and almost nothing of `λ` or of `Ms`.
///
/// Indices are 1-based. The family's carriers are walked in order, each refined until
/// the candidate set is light enough or the resolution cap is hit.
pub fn antichain_pair(
    fam: &NormalFamily,
    ms: &[FAMeasure],
    d: usize,
    eps: &Rational,
    p: &CubeSet,
) -> Result<AntichainPair> {
    antichain_pair_capped(fam, ms, d, eps, p, SEPARATION_CAP)
}

pub fn antichain_pair_capped(
    fam: &NormalFamily,
    ms: &[FAMeasure],
    d: usize,
    eps: &Rational,
    p: &CubeSet,
    cap: u32,
) -> Result<AntichainPair> {
    antichain_pair_from(fam, ms, d, eps, p, 1, cap)
}

/// [`antichain_pair_capped`] with the carriers taken at resolution `min_res` or finer.
pub fn antichain_pair_from(
    fam: &NormalFamily,
    ms: &[FAMeasure],
    d: usize,
    eps: &Rational,
    p: &CubeSet,
    min_res: u32,
    cap: u32,
) -> Result<AntichainPair> {
    if !ms.iter().any(|mu| mu.same_measure(&fam.limit)) {
        return Err(Error::Hypothesis("the family's limit must be one of Ms".into()));
    }
    if fam.limit.eval(p) >= ratio::frac(1, 10) {
        return Err(Error::Hypothesis("limit gives P mass 1/10 or more".into()));
    }
    let half = eps / int(2);
    let nine = ratio::frac(9, 10);
    let base = fam.carrier_resolution().max(p.resolution()).max(min_res).min(MAX_RESOLUTION);
    let cap = cap.min(MAX_RESOLUTION).max(base);
    let mut chosen: Vec<(usize, CubeSet)> = Vec::new();
    for i in d + 1..=fam.len() {
        let nu = fam.get(i);
        let taken = chosen.iter().fold(p.refine(base)?, |acc, (_, h)| acc.union(h));
        let found = (base..=cap).find_map(|n| {
            let h = nu.carrier(n).ok()?.difference(&taken);
            let light = h.lambda().to_rational() < half && ms.iter().all(|mu| mu.variation(&h) < half);
            (light && nu.variation(&h) >= nine).then_some(h)
        });
        if let Some(h) = found {
            chosen.push((i, h));
            if chosen.len() == 2 {
                let n = chosen.iter().map(|(_, h)| h.resolution()).max().unwrap_or(base);
                let (b, h1) = chosen.pop().expect("two chosen");
                let (a, h0) = chosen.pop().expect("two chosen");
                let out = AntichainPair { h0: h0.refine(n)?, h1: h1.refine(n)?, a, b };
                check_antichain_pair(fam, ms, d, eps, p, &out).map_err(Error::Internal)?;
                return Ok(out);
            }
        }
    }
    Err(Error::FamilyExhausted(format!("fewer than two usable indices above {d}")))
}

/// `n · phi_n(A)`: pointwise small on semibalanced sets, norm `n`.
pub fn nikodym_witness(a: &CubeSet, n: u32) -> Rational {
    a.phi(n).to_rational() * int(n as i64)
}

/// `‖n φ_n‖`.
pub fn nikodym_norm(n: u32) -> Rational {
    int(n as i64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    fn signs(s: &str) -> Signs {
        s.parse().unwrap()
    }

    #[test]
    fn eval_examples() {
        let lam = FAMeasure::lebesgue(0);
        let c = CubeSet::cylinder(&signs("+-+"), 3).unwrap();
        assert_eq!(lam.eval(&c), frac(1, 8));
        let top = FAMeasure::point(signs("+++++"), int(1));
        // all-(+1) is not finitely presented; a long + prefix stands in for it
        assert_eq!(top.eval(&CubeSet::cylinder(&signs("+"), 1).unwrap()), int(1));
        assert_eq!(top.eval(&CubeSet::cylinder(&signs("-"), 1).unwrap()), int(0));
    }

    #[test]
    fn canonical_measures() {
        let mu = FAMeasure::lebesgue(0).add(&FAMeasure::point(signs("+-"), frac(1, 3)));
        let fine = mu.refined(6).unwrap();
        assert_ne!(mu, fine);
        assert!(mu.same_measure(&fine));
        assert_eq!(fine.canonical().resolution(), 0);
        assert!(!FAMeasure::rademacher(2).unwrap().same_measure(&FAMeasure::rademacher(3).unwrap()));
    }

    #[test]
    fn rademacher_measure_norms() {
        for r in 1..=4 {
            let phi = FAMeasure::rademacher(r).unwrap();
            assert_eq!(phi.norm(), int(1));
            assert_eq!(phi.scaled(&int(r as i64)).norm(), int(r as i64));
            let a = CubeSet::from_atoms(5, [1, 4, 9, 30]);
            assert_eq!(phi.eval(&a), a.phi(r).to_rational());
            assert_eq!(phi.variation(&a), a.lambda().to_rational());
        }
        assert_eq!(FAMeasure::point(signs("-"), frac(-3, 4)).norm(), frac(3, 4));
    }

    #[test]
    fn decomposition_and_budget() {
        let mu = FAMeasure::lebesgue(1).add(&FAMeasure::point(signs("+-"), frac(1, 3)));
        let (mu1, mu2) = lebesgue_decompose(&mu);
        assert!(!mu1.has_points());
        assert_eq!(mu2.norm(), frac(1, 3));
        assert_eq!(continuity_budget(&FAMeasure::lebesgue(2), &frac(2, 5)).unwrap(), Some(frac(1, 10)));
        assert_eq!(continuity_budget(&FAMeasure::zero(2), &frac(2, 5)).unwrap(), None);
        assert_eq!(continuity_budget(&mu, &frac(1, 2)), Err(Error::DecompositionRequired));
    }

    #[test]
    fn separation_examples() {
        let nu = FAMeasure::point(signs("++++"), int(1));
        let mu = FAMeasure::point(signs("-"), int(1));
        let x = separate_singular(&nu, std::slice::from_ref(&mu), &frac(1, 1000)).unwrap();
        assert!(x.is_subset(&CubeSet::cylinder(&signs("-"), x.resolution()).unwrap()));
        assert!(separate_singular(&nu, &[], &frac(1, 2)).unwrap().is_empty());
        let x = separate_singular(&FAMeasure::lebesgue(0), std::slice::from_ref(&mu), &frac(1, 100)).unwrap();
        assert!(x.lambda().to_rational() < frac(1, 100));
        assert_eq!(mu.variation(&x.complement()), int(0));
        let err = separate_singular(&FAMeasure::lebesgue(0), &[FAMeasure::lebesgue(1)], &frac(1, 2));
        assert!(matches!(err, Err(Error::NotSingular(_))));
    }

    #[test]
    fn points_merge_and_pad() {
        let m = FAMeasure::new(
            2,
            vec![int(0); 4],
            vec![
                PointMass { prefix: signs("+"), weight: frac(1, 2) },
                PointMass { prefix: signs("+--"), weight: frac(1, 4) },
            ],
        )
        .unwrap();
        assert_eq!(m.points().len(), 1);
        assert_eq!(m.points()[0].prefix.len(), 2);
        assert_eq!(m.norm(), frac(3, 4));
    }

    #[test]
    fn antichain_on_point_masses() {
        // nu_i is a unit mass at the point with a single + in coordinate i
        let nus: Vec<FAMeasure> = (1..=5)
            .map(|i| FAMeasure::point(Signs::new((1..=i).map(|j| if j == i { 1 } else { -1 }).collect()), int(1)))
            .collect();
        let limit = FAMeasure::point(signs("-"), int(1));
        let fam = NormalFamily::new(nus, limit.clone()).unwrap();
        let ms = vec![FAMeasure::lebesgue(0), limit];
        let p = CubeSet::empty(1);
        let out = antichain_pair(&fam, &ms, 0, &frac(1, 10), &p).unwrap();
        assert_eq!((out.a, out.b), (1, 2));
        let p = CubeSet::cylinder(&signs("+"), 1).unwrap();
        let out = antichain_pair(&fam, &ms, 0, &frac(1, 10), &p).unwrap();
        assert!(out.a >= 2 && out.b >= 2);
        assert!(matches!(
            antichain_pair(&fam, &ms, 4, &frac(1, 10), &CubeSet::empty(1)),
            Err(Error::FamilyExhausted(_))
        ));
    }

    #[test]
    fn nikodym_examples() {
        let c = CubeSet::full(4);
        for n in 1..=4 {
            assert_eq!(nikodym_witness(&c, n), int(0));
            assert_eq!(nikodym_norm(n), int(n as i64));
        }
    }
}
