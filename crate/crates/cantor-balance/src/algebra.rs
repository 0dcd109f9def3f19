//! Finite Boolean algebras of clopen sets and union-closed piece families.

use serde::{Deserialize, Serialize};

use crate::cube::{all_signs, CubeSet};
use crate::dyadic::Dyadic;
use crate::error::{Error, Result};

/// A finite subalgebra given by generators; its atoms partition the cube.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AlgebraSpec", into = "AlgebraSpec")]
pub struct FiniteAlgebra {
    resolution: u32,
    generators: Vec<CubeSet>,
    atoms: Vec<CubeSet>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AlgebraSpec {
    resolution: u32,
    generators: Vec<CubeSet>,
}

impl TryFrom<AlgebraSpec> for FiniteAlgebra {
    type Error = Error;
    fn try_from(s: AlgebraSpec) -> Result<Self> {
        let res = s.generators.iter().map(|g| g.resolution()).max().unwrap_or(1).max(s.resolution);
        if s.generators.iter().any(|g| g.resolution() > s.resolution) {
            return Err(Error::Parameter(format!("generator finer than algebra resolution {}", s.resolution)));
        }
        Ok(FiniteAlgebra::new(res, s.generators))
    }
}

impl From<FiniteAlgebra> for AlgebraSpec {
    fn from(a: FiniteAlgebra) -> Self {
        AlgebraSpec { resolution: a.resolution, generators: a.generators }
    }
}

impl FiniteAlgebra {
    /// The algebra generated by `generators`, at resolution at least `n`.
    pub fn new(n: u32, generators: Vec<CubeSet>) -> Self {
        let n = generators.iter().map(|g| g.resolution()).fold(n, u32::max);
        let generators: Vec<CubeSet> = generators.into_iter().map(|g| g.refine(n).expect("refine generator")).collect();
        let mut atoms = vec![CubeSet::full(n)];
        for g in &generators {
            let mut next = Vec::with_capacity(atoms.len() * 2);
            for a in &atoms {
                let inside = a.intersection(g);
                let outside = a.difference(g);
                if !inside.is_empty() {
                    next.push(inside);
                }
                if !outside.is_empty() {
                    next.push(outside);
                }
            }
            atoms = next;
        }
        FiniteAlgebra { resolution: n, generators, atoms }
    }

    /// `{∅, C}`.
    pub fn trivial(n: u32) -> Self {
        Self::new(n, Vec::new())
    }

    /// The algebra of unions of cylinders of length `level`.
    pub fn level(level: u32, n: u32) -> Result<Self> {
        let n = n.max(level.max(1));
        let gens = (1..=level).map(|r| CubeSet::coordinate(r, n)).collect::<Result<Vec<_>>>()?;
        Ok(Self::new(n, gens))
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn generators(&self) -> &[CubeSet] {
        &self.generators
    }

    pub fn atoms(&self) -> &[CubeSet] {
        &self.atoms
    }

    /// Number of elements, `2^(number of atoms)`, saturating.
    pub fn size(&self) -> u128 {
        if self.atoms.len() >= 128 {
            u128::MAX
        } else {
            1u128 << self.atoms.len()
        }
    }

    /// Whether `a` is a union of atoms.
    pub fn contains(&self, a: &CubeSet) -> bool {
        if a.resolution() > self.resolution {
            let r = a.resolution();
            return self.refined(r).contains(a);
        }
        let a = a.refine(self.resolution).expect("refine");
        self.atoms.iter().all(|e| e.is_subset(&a) || e.is_disjoint(&a))
    }

    /// The same algebra expressed at a finer resolution.
    pub fn refined(&self, n: u32) -> FiniteAlgebra {
        let n = n.max(self.resolution);
        FiniteAlgebra {
            resolution: n,
            generators: self.generators.iter().map(|g| g.refine(n).expect("refine")).collect(),
            atoms: self.atoms.iter().map(|g| g.refine(n).expect("refine")).collect(),
        }
    }

    /// The algebra generated by both generator lists.
    pub fn join(&self, other: &FiniteAlgebra) -> FiniteAlgebra {
        let mut gens = self.generators.clone();
        gens.extend(other.generators.iter().cloned());
        FiniteAlgebra::new(self.resolution.max(other.resolution), gens)
    }

    pub fn with_generators(&self, extra: impl IntoIterator<Item = CubeSet>) -> FiniteAlgebra {
        let mut gens = self.generators.clone();
        gens.extend(extra);
        FiniteAlgebra::new(self.resolution, gens)
    }

    /// Join with the algebra of cylinders of length `level`.
    pub fn with_level(&self, level: u32) -> Result<FiniteAlgebra> {
        Ok(self.join(&FiniteAlgebra::level(level, self.resolution)?))
    }

    /// Element built from the atoms selected by the bits of `mask`.
    pub fn element(&self, mask: u128) -> CubeSet {
        self.atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .fold(CubeSet::empty(self.resolution), |acc, (_, a)| acc.union(a))
    }

    /// All elements; only sensible for a handful of atoms.
    pub fn elements(&self) -> Result<Vec<CubeSet>> {
        if self.atoms.len() > 20 {
            return Err(Error::TooLarge { size: 1 << self.atoms.len().min(63), cap: 1 << 20 });
        }
        Ok((0..1u128 << self.atoms.len()).map(|m| self.element(m)).collect())
    }

    /// Smallest positive measure of an element, i.e. the smallest atom.
    pub fn min_positive_mass(&self) -> Dyadic {
        self.atoms.iter().map(|a| a.lambda()).min().expect("an algebra has at least one atom")
    }

    /// All elements as unions of atoms.
    pub fn as_pieces(&self) -> PieceFamily {
        PieceFamily::new(self.atoms.clone())
    }

    /// The split family `{A ∩ B, A \ B : A in the algebra}` as two piece families.
    pub fn split_family(&self, b: &CubeSet) -> [PieceFamily; 2] {
        let inside = self.atoms.iter().map(|e| e.intersection(b)).collect();
        let outside = self.atoms.iter().map(|e| e.difference(b)).collect();
        [PieceFamily::new(inside), PieceFamily::new(outside)]
    }
}

/// The family of all unions of a list of pairwise disjoint pieces (including `∅`).
#[derive(Clone, Debug, PartialEq)]
pub struct PieceFamily {
    resolution: u32,
    pieces: Vec<CubeSet>,
}

impl PieceFamily {
    pub fn new(pieces: Vec<CubeSet>) -> Self {
        let n = pieces.iter().map(|p| p.resolution()).max().unwrap_or(1);
        let pieces: Vec<CubeSet> =
            pieces.into_iter().filter(|p| !p.is_empty()).map(|p| p.refine(n).expect("refine piece")).collect();
        for (i, a) in pieces.iter().enumerate() {
            for b in &pieces[i + 1..] {
                assert!(a.is_disjoint(b), "pieces must be pairwise disjoint");
            }
        }
        PieceFamily { resolution: n, pieces }
    }

    pub fn resolution(&self) -> u32 {
        self.resolution
    }

    pub fn pieces(&self) -> &[CubeSet] {
        &self.pieces
    }

    pub fn union_of(&self, mask: &[bool]) -> CubeSet {
        self.pieces
            .iter()
            .zip(mask)
            .filter(|(_, &b)| b)
            .fold(CubeSet::empty(self.resolution), |acc, (p, _)| acc.union(p))
    }
}

/// Cylinders of length `n` as sets at resolution `res`.
pub fn level_cylinders(n: u32, res: u32) -> Vec<CubeSet> {
    all_signs(n).map(|s| CubeSet::cylinder(&s, res).expect("cylinder")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atoms_partition_the_cube() {
        let g1 = CubeSet::from_atoms(4, [0, 1, 2, 3, 9]);
        let g2 = CubeSet::from_atoms(4, [3, 4, 5, 9, 15]);
        let alg = FiniteAlgebra::new(4, vec![g1.clone(), g2.clone()]);
        assert!(alg.atoms().len() <= 4);
        let mut u = CubeSet::empty(4);
        for (i, a) in alg.atoms().iter().enumerate() {
            assert!(!a.is_empty());
            for b in &alg.atoms()[i + 1..] {
                assert!(a.is_disjoint(b));
            }
            u = u.union(a);
        }
        assert!(u.is_full());
        assert!(alg.contains(&g1) && alg.contains(&g2));
        assert!(!alg.contains(&CubeSet::from_atoms(4, [0])));
    }

    #[test]
    fn level_algebra_atoms_are_cylinders() {
        let alg = FiniteAlgebra::level(3, 5).unwrap();
        assert_eq!(alg.atoms().len(), 8);
        for a in alg.atoms() {
            assert_eq!(a.lambda(), Dyadic::pow2_neg(3));
            assert!(a.in_level(3));
        }
        assert_eq!(FiniteAlgebra::trivial(3).atoms().len(), 1);
    }
}
