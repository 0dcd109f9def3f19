//! Clopen subsets of the Cantor cube at a fixed resolution.
//!
//! Atom `i` of a set at resolution `N` is the cylinder of length `N` whose
//! coordinate `b + 1` is `+1` exactly when bit `b` of `i` is set.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

pub const MAX_RESOLUTION: u32 = 32;

/// A finite sequence over `{-1, +1}`, written as a string over `{+, -}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Signs(Vec<i8>);

impl Signs {
    pub fn new(signs: Vec<i8>) -> Self {
        assert!(signs.iter().all(|&x| x == 1 || x == -1), "signs must be +1 or -1");
        Signs(signs)
    }

    pub fn empty() -> Self {
        Signs(Vec::new())
    }

    /// The sequence of length `len` encoded by the low `len` bits of `index`.
    pub fn from_index(index: u64, len: u32) -> Self {
        Signs((0..len).map(|b| if index >> b & 1 == 1 { 1 } else { -1 }).collect())
    }

    pub fn index(&self) -> u64 {
        self.0.iter().enumerate().fold(0, |acc, (b, &x)| if x == 1 { acc | 1 << b } else { acc })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[i8] {
        &self.0
    }

    /// Sign at coordinate `r` (1-based).
    pub fn get(&self, r: usize) -> i8 {
        self.0[r - 1]
    }

    pub fn push(&mut self, x: i8) {
        assert!(x == 1 || x == -1);
        self.0.push(x);
    }

    pub fn iter(&self) -> impl Iterator<Item = i8> + '_ {
        self.0.iter().copied()
    }
}

impl fmt::Display for Signs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &x in &self.0 {
            f.write_str(if x == 1 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

impl FromStr for Signs {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '+' => Ok(1),
                '-' => Ok(-1),
                other => Err(Error::Parse(format!("bad sign character {other:?}"))),
            })
            .collect::<Result<Vec<i8>>>()
            .map(Signs)
    }
}

impl Serialize for Signs {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Signs {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All sign sequences of length `m`, in index order.
pub fn all_signs(m: u32) -> impl Iterator<Item = Signs> {
    (0..1u64 << m).map(move |i| Signs::from_index(i, m))
}

/// Per-word mask of atoms whose coordinate `b + 1` is `+1`, for `b < 6`.
const COORD_MASK: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct CubeSet {
    resolution: u32,
    words: Vec<u64>,
}

fn word_count(n: u32) -> usize {
    if n <= 6 {
        1
    } else {
        1usize << (n - 6)
    }
}

fn tail_mask(n: u32) -> u64 {
    if n >= 6 {
        u64::MAX
    } else {
        (1u64 << (1u32 << n)) - 1
    }
}

fn check_resolution(n: u32) -> Result<()> {
    if n == 0 || n > MAX_RESOLUTION {
        Err(Error::BadResolution(n))
    } else {
        Ok(())
    }
}

impl CubeSet {
    pub fn empty(n: u32) -> Self {
        check_resolution(n).expect("resolution");
        CubeSet { resolution: n, words: vec![0; word_count(n)] }
    }

    pub fn full(n: u32) -> Self {
        let mut s = Self::empty(n);
        for w in &mut s.words {
            *w = u64::MAX;
        }
        s.words[0] &= tail_mask(n);
        s
    }

    pub fn from_atoms(n: u32, atoms: impl IntoIterator<Item = u64>) -> Self {
        let mut s = Self::empty(n);
        for a in atoms {
            s.insert(a);
        }
        s
    }

    /// The cylinder `<s>` at resolution `n`.
    pub fn cylinder(s: &Signs, n: u32) -> Result<Self> {
        check_resolution(n)?;
        let len = s.len() as u32;
        if len > n {
            return Err(Error::ResolutionTooSmall { have: n, need: len });
        }
        let idx = s.index();
        let mut out = Self::empty(n);
        let low_len = len.min(6);
        let mut low = tail_mask(n);
        for b in 0..low_len {
            low &= if idx >> b & 1 == 1 { COORD_MASK[b as usize] } else { !COORD_MASK[b as usize] };
        }
        let hi_len = len.saturating_sub(6);
        let hi_mask = (1u64 << hi_len) - 1;
        let hi_idx = idx >> 6;
        for (w, word) in out.words.iter_mut().enumerate() {
            if (w as u64) & hi_mask == hi_idx & hi_mask {
                *word = low;
            }
        }
        Ok(out)
    }

    /// The set `{x : x_r = +1}` at resolution `n`.
    pub fn coordinate(r: u32, n: u32) -> Result<Self> {
        check_resolution(n)?;
        if r == 0 || r > n {
            return Err(Error::ResolutionTooSmall { have: n, need: r });
        }
        Ok(CubeSet::from_atoms(n, (0..1u64 << n).filter(|a| a >> (r - 1) & 1 == 1)))
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn num_atoms(&self) -> u64 {
        1u64 << self.resolution
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn contains(&self, atom: u64) -> bool {
        self.words[(atom >> 6) as usize] >> (atom & 63) & 1 == 1
    }

    pub fn insert(&mut self, atom: u64) {
        assert!(atom < self.num_atoms(), "atom out of range");
        self.words[(atom >> 6) as usize] |= 1 << (atom & 63);
    }

    pub fn remove(&mut self, atom: u64) {
        assert!(atom < self.num_atoms(), "atom out of range");
        self.words[(atom >> 6) as usize] &= !(1 << (atom & 63));
    }

    pub fn count(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn is_full(&self) -> bool {
        self.count() == self.num_atoms()
    }

    /// Indices of the atoms in the set, ascending.
    pub fn atoms(&self) -> AtomIter<'_> {
        AtomIter { words: &self.words, word: 0, cur: self.words[0] }
    }

    /// The same set at a finer resolution.
    pub fn refine(&self, n: u32) -> Result<Self> {
        check_resolution(n)?;
        if n < self.resolution {
            return Err(Error::Parameter(format!("cannot refine resolution {} down to {}", self.resolution, n)));
        }
        if n == self.resolution {
            return Ok(self.clone());
        }
        let mut base = self.words.clone();
        let mut res = self.resolution;
        // replicate within the first word until it is full or the target is reached
        while res < 6 && res < n {
            let width = 1u32 << res;
            base[0] |= base[0] << width;
            res += 1;
        }
        if res == n {
            return Ok(CubeSet { resolution: n, words: base });
        }
        let reps = 1usize << (n - res);
        let mut words = Vec::with_capacity(base.len() * reps);
        for _ in 0..reps {
            words.extend_from_slice(&base);
        }
        Ok(CubeSet { resolution: n, words })
    }

    fn unify<'a>(a: &'a CubeSet, b: &'a CubeSet) -> (Cow<'a, CubeSet>, Cow<'a, CubeSet>) {
        let n = a.resolution.max(b.resolution);
        let lift = |s: &'a CubeSet| {
            if s.resolution == n {
                Cow::Borrowed(s)
            } else {
                Cow::Owned(s.refine(n).expect("refine to larger resolution"))
            }
        };
        (lift(a), lift(b))
    }

    fn zip(&self, other: &CubeSet, f: impl Fn(u64, u64) -> u64) -> CubeSet {
        let (a, b) = Self::unify(self, other);
        let words = a.words.iter().zip(&b.words).map(|(&x, &y)| f(x, y)).collect();
        CubeSet { resolution: a.resolution, words }
    }

    pub fn union(&self, other: &CubeSet) -> CubeSet {
        self.zip(other, |x, y| x | y)
    }

    pub fn intersection(&self, other: &CubeSet) -> CubeSet {
        self.zip(other, |x, y| x & y)
    }

    pub fn difference(&self, other: &CubeSet) -> CubeSet {
        self.zip(other, |x, y| x & !y)
    }

    pub fn sym_diff(&self, other: &CubeSet) -> CubeSet {
        self.zip(other, |x, y| x ^ y)
    }

    pub fn complement(&self) -> CubeSet {
        let mut words: Vec<u64> = self.words.iter().map(|w| !w).collect();
        words[0] &= tail_mask(self.resolution);
        CubeSet { resolution: self.resolution, words }
    }

    pub fn is_subset(&self, other: &CubeSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint(&self, other: &CubeSet) -> bool {
        self.intersection(other).is_empty()
    }

    /// Equality as subsets of the cube, regardless of resolution.
    pub fn same_set(&self, other: &CubeSet) -> bool {
        let (a, b) = Self::unify(self, other);
        a.words == b.words
    }

    pub fn lambda(&self) -> Dyadic {
        Dyadic::new(self.count(), self.resolution)
    }

    /// Number of atoms with coordinate `r` equal to `+1` minus those with `-1`.
    pub fn phi_count(&self, r: u32) -> i64 {
        assert!(r >= 1, "coordinates start at 1");
        if r > self.resolution {
            return 0;
        }
        let b = r - 1;
        let plus: u64 = if b < 6 {
            self.words.iter().map(|w| (w & COORD_MASK[b as usize]).count_ones() as u64).sum()
        } else {
            self.words
                .iter()
                .enumerate()
                .filter(|(i, _)| (*i as u64) >> (b - 6) & 1 == 1)
                .map(|(_, w)| w.count_ones() as u64)
                .sum()
        };
        2 * plus as i64 - self.count() as i64
    }

    /// `phi_r(A) = integral over A of the r-th coordinate`; zero for `r` beyond the resolution.
    pub fn phi(&self, r: u32) -> Dyadic {
        Dyadic::new(self.phi_count(r), self.resolution)
    }

    /// Image under negation of the coordinates in `(lo, hi]`.
    pub fn flip(&self, lo: u32, hi: u32) -> Result<CubeSet> {
        if hi > self.resolution {
            return Err(Error::ResolutionTooSmall { have: self.resolution, need: hi });
        }
        if lo >= hi {
            return Err(Error::Parameter(format!("flip needs lo < hi, got ({lo}, {hi}]")));
        }
        let mask: u64 = ((1u64 << hi) - 1) ^ ((1u64 << lo) - 1);
        let low = mask & 63;
        let high = (mask >> 6) as usize;
        let mut words = vec![0u64; self.words.len()];
        for (i, &w) in self.words.iter().enumerate() {
            let mut w = w;
            for k in 0..6u32 {
                if low >> k & 1 == 1 {
                    let shift = 1u32 << k;
                    let m = !COORD_MASK[k as usize];
                    w = ((w & m) << shift) | ((w >> shift) & m);
                }
            }
            words[i ^ high] = w;
        }
        Ok(CubeSet { resolution: self.resolution, words })
    }

    /// Atom counts of the set inside each cylinder of length `m`, indexed by the
    /// cylinder's sign index.
    pub fn prefix_counts(&self, m: u32) -> Vec<u64> {
        assert!(m <= self.resolution);
        let mask = (1u64 << m) - 1;
        let mut counts = vec![0u64; 1usize << m];
        for a in self.atoms() {
            counts[(a & mask) as usize] += 1;
        }
        counts
    }

    /// For each cylinder `s` of length `m` and each coordinate `r` in `(m, resolution]`,
    /// the signed count `2^N * phi_r(A ∩ <s>)`. Entry `[s][r - m - 1]`.
    pub fn prefix_phi_counts(&self, m: u32) -> Vec<Vec<i64>> {
        assert!(m <= self.resolution);
        let n = self.resolution;
        let width = (n - m) as usize;
        let mask = (1u64 << m) - 1;
        let mut out = vec![vec![0i64; width]; 1usize << m];
        for a in self.atoms() {
            let row = &mut out[(a & mask) as usize];
            for (j, slot) in row.iter_mut().enumerate() {
                if a >> (m as usize + j) & 1 == 1 {
                    *slot += 1;
                } else {
                    *slot -= 1;
                }
            }
        }
        out
    }

    /// `psi_n(A)`: the distance from `A` to the nearest union of length-`n` cylinders,
    /// via per-cylinder majority rounding.
    pub fn psi(&self, n: u32) -> Result<Dyadic> {
        if n > self.resolution {
            return Err(Error::ResolutionTooSmall { have: self.resolution, need: n });
        }
        let per = 1u64 << (self.resolution - n);
        let total: u64 = self.prefix_counts(n).into_iter().map(|c| c.min(per - c)).sum();
        Ok(Dyadic::new(total, self.resolution))
    }

    /// Whether the set is a union of cylinders of length `n`.
    pub fn in_level(&self, n: u32) -> bool {
        if n >= self.resolution {
            return true;
        }
        let per = 1u64 << (self.resolution - n);
        self.prefix_counts(n).into_iter().all(|c| c == 0 || c == per)
    }

    /// The smallest `n` for which the set is a union of cylinders of length `n`.
    pub fn level(&self) -> u32 {
        (0..=self.resolution).find(|&n| self.in_level(n)).unwrap_or(self.resolution)
    }

    /// The same set at resolution `n`, when it is a union of cylinders of length `n`.
    pub fn coarsen(&self, n: u32) -> Result<CubeSet> {
        check_resolution(n)?;
        if n >= self.resolution {
            return self.refine(n);
        }
        if !self.in_level(n) {
            return Err(Error::ResolutionTooSmall { have: n, need: self.level() });
        }
        let counts = self.prefix_counts(n);
        Ok(CubeSet::from_atoms(n, (0..counts.len() as u64).filter(|&a| counts[a as usize] > 0)))
    }

    /// The coarsest representation; equal sets have equal canonical forms.
    pub fn canonical(&self) -> CubeSet {
        self.coarsen(self.level().max(1)).expect("own level")
    }

    /// Canonical text form `N:hex`, hex digits most significant first, atom 0 being bit 0.
    pub fn to_text(&self) -> String {
        let n = self.resolution;
        let body = if n < 6 {
            let digits = (1usize << n).div_ceil(4);
            format!("{:0width$x}", self.words[0], width = digits)
        } else {
            self.words.iter().rev().map(|w| format!("{w:016x}")).collect()
        };
        format!("{n}:{body}")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (n, hex) = text.split_once(':').ok_or_else(|| Error::Parse(format!("expected N:hex, got {text:?}")))?;
        let n: u32 = n.trim().parse().map_err(|_| Error::Parse(format!("bad resolution {n:?}")))?;
        check_resolution(n)?;
        let hex = hex.trim();
        let mut out = Self::empty(n);
        if n < 6 {
            let digits = (1usize << n).div_ceil(4);
            if hex.len() != digits {
                return Err(Error::Parse(format!("expected {digits} hex digits")));
            }
            let w = u64::from_str_radix(hex, 16).map_err(|e| Error::Parse(e.to_string()))?;
            if w & !tail_mask(n) != 0 {
                return Err(Error::Parse("bits beyond the last atom are set".into()));
            }
            out.words[0] = w;
        } else {
            if hex.len() != 16 * out.words.len() {
                return Err(Error::Parse(format!("expected {} hex digits", 16 * out.words.len())));
            }
            let len = out.words.len();
            for (i, chunk) in hex.as_bytes().chunks(16).enumerate() {
                let s = std::str::from_utf8(chunk).map_err(|e| Error::Parse(e.to_string()))?;
                out.words[len - 1 - i] = u64::from_str_radix(s, 16).map_err(|e| Error::Parse(e.to_string()))?;
            }
        }
        Ok(out)
    }
}

pub struct AtomIter<'a> {
    words: &'a [u64],
    word: usize,
    cur: u64,
}

impl Iterator for AtomIter<'_> {
    type Item = u64;
    fn next(&mut self) -> Option<u64> {
        loop {
            if self.cur != 0 {
                let b = self.cur.trailing_zeros() as u64;
                self.cur &= self.cur - 1;
                return Some(((self.word as u64) << 6) | b);
            }
            self.word += 1;
            if self.word >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.word];
        }
    }
}

/// Sign of coordinate `r` (1-based) of atom `atom`.
pub fn atom_sign(atom: u64, r: u32) -> i64 {
    if atom >> (r - 1) & 1 == 1 {
        1
    } else {
        -1
    }
}

impl fmt::Debug for CubeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CubeSet({})", self.to_text())
    }
}

impl fmt::Display for CubeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl Serialize for CubeSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_text())
    }
}

impl<'de> Deserialize<'de> for CubeSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        CubeSet::from_text(&s).map_err(serde::de::Error::custom)
    }
}

/// Union of a list of sets, at the largest resolution among them and `n`.
pub fn union_all<'a>(n: u32, sets: impl IntoIterator<Item = &'a CubeSet>) -> CubeSet {
    sets.into_iter().fold(CubeSet::empty(n), |acc, s| acc.union(s))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sg(s: &str) -> Signs {
        s.parse().unwrap()
    }

    #[test]
    fn cylinder_examples() {
        let c = CubeSet::cylinder(&sg("+"), 1).unwrap();
        assert_eq!(c.to_text(), "1:2");
        assert_eq!(c.lambda(), Dyadic::new(1, 1));
        assert!(CubeSet::cylinder(&sg(""), 3).unwrap().is_full());
        assert_eq!(CubeSet::cylinder(&sg("--++"), 4).unwrap().lambda(), Dyadic::pow2_neg(4));
        assert!(matches!(CubeSet::cylinder(&sg("++"), 1), Err(Error::ResolutionTooSmall { .. })));
    }

    #[test]
    fn canonical_forms_agree_across_resolutions() {
        let c = CubeSet::cylinder(&sg("+-"), 2).unwrap();
        for n in 2..=9 {
            let r = c.refine(n).unwrap();
            assert_eq!(r.canonical(), c);
            assert!(r.coarsen(2).unwrap().same_set(&r));
        }
        assert!(CubeSet::from_atoms(3, [1]).coarsen(2).is_err());
        assert_eq!(CubeSet::full(5).canonical(), CubeSet::full(1));
    }

    #[test]
    fn cylinder_matches_atom_scan() {
        for n in 1..=9 {
            for len in 0..=n.min(8) {
                for s in all_signs(len) {
                    let c = CubeSet::cylinder(&s, n).unwrap();
                    for a in 0..1u64 << n {
                        let inside = (1..=len).all(|r| atom_sign(a, r) == s.get(r as usize) as i64);
                        assert_eq!(c.contains(a), inside, "n={n} s={s} atom={a}");
                    }
                }
            }
        }
    }

    #[test]
    fn set_operation_examples() {
        let a = CubeSet::from_atoms(3, [1, 4, 6]);
        assert!(a.union(&a.complement()).is_full());
        assert!(a.sym_diff(&a).is_empty());
        let p = CubeSet::cylinder(&sg("+"), 1).unwrap();
        let m = CubeSet::cylinder(&sg("-"), 2).unwrap();
        assert!(p.intersection(&m).is_empty());
        assert_eq!(p.intersection(&m).resolution(), 2);
    }

    #[test]
    fn phi_examples() {
        let p = CubeSet::cylinder(&sg("+"), 1).unwrap();
        assert_eq!(p.phi(1), Dyadic::new(1, 1));
        assert_eq!(p.phi(2), Dyadic::zero());
        for n in 1..=8 {
            let full = CubeSet::full(n);
            for r in 1..=n + 3 {
                assert_eq!(full.phi(r), Dyadic::zero());
            }
        }
    }

    #[test]
    fn flip_examples() {
        let p = CubeSet::cylinder(&sg("+"), 1).unwrap();
        assert_eq!(p.flip(0, 1).unwrap(), CubeSet::cylinder(&sg("-"), 1).unwrap());
        let a = CubeSet::cylinder(&sg("++"), 2).unwrap();
        let fa = a.flip(1, 2).unwrap();
        assert_eq!(fa, CubeSet::cylinder(&sg("+-"), 2).unwrap());
        // four-atom enumeration of the union {(+,+), (+,-)}
        let u = a.union(&fa);
        let direct: i64 = u.atoms().map(|x| atom_sign(x, 2)).sum();
        assert_eq!(direct, 0);
        assert_eq!(u.phi(2), Dyadic::zero());
        assert!(p.flip(0, 2).is_err());
    }

    #[test]
    fn flip_matches_atom_xor() {
        for n in [3u32, 6, 7, 9] {
            let a = CubeSet::from_atoms(n, (0..1u64 << n).filter(|x| (x * 7 + 3) % 5 < 2));
            for lo in 0..n {
                for hi in lo + 1..=n {
                    let mask = ((1u64 << hi) - 1) ^ ((1u64 << lo) - 1);
                    let expect = CubeSet::from_atoms(n, a.atoms().map(|x| x ^ mask));
                    assert_eq!(a.flip(lo, hi).unwrap(), expect);
                }
            }
        }
    }

    #[test]
    fn psi_example_and_top_level() {
        let a = CubeSet::cylinder(&sg("++"), 2).unwrap();
        assert_eq!(a.psi(1).unwrap(), Dyadic::new(1, 2));
        let b = CubeSet::from_atoms(5, [0, 3, 17, 30]);
        assert_eq!(b.psi(5).unwrap(), Dyadic::zero());
        assert!(b.psi(6).is_err());
    }

    #[test]
    fn refine_and_text_roundtrip() {
        for n in 1..=8 {
            let a = CubeSet::from_atoms(n, (0..1u64 << n).filter(|x| x % 3 == 1));
            for n2 in n..=9 {
                let r = a.refine(n2).unwrap();
                for x in 0..1u64 << n2 {
                    assert_eq!(r.contains(x), a.contains(x & ((1 << n) - 1)));
                }
            }
            let t = a.to_text();
            assert_eq!(CubeSet::from_text(&t).unwrap(), a);
        }
        assert!(CubeSet::from_text("2:1f").is_err());
    }

    #[test]
    fn level_detection() {
        let c = CubeSet::cylinder(&sg("+-+"), 7).unwrap();
        assert_eq!(c.level(), 3);
        assert!(c.in_level(3));
        assert!(!c.in_level(2));
        assert_eq!(CubeSet::full(4).level(), 0);
    }
}
