//! Named objects: a balanced open set `U` that is not clopen, the set `B` whose
//! `n psi_n` vanishes without being balanced, and the measures `theta_n` living on it.
//! Plus a triangle-style SVG of a set's maximal cylinders.

use std::fmt::Write as _;

use crate::cube::{all_signs, CubeSet, Signs};
use crate::error::{Error, Result};
use crate::measures::FAMeasure;
use crate::ratio::int;

/// Largest `j_max` for [`balanced_open_u`]; resolution `2^j_max`.
pub const U_LEVEL_CAP: u32 = 4;

fn block_constant(a: &[i8], lo: usize, hi: usize) -> bool {
    // 1-based inclusive range lo..=hi
    hi < lo || a[lo - 1..hi].iter().all(|&x| x == a[lo - 1])
}

/// Clauses (2)/(1) and (3) for index `n`: the first pair and the blocks
/// `(2^(l-1), 2^l]` for `l < n`.
fn blocks_ok(a: &[i8], n: u32) -> bool {
    let first = if n == 1 { a[0] == -a[1] } else { a[0] == a[1] };
    first && (1..n).all(|l| block_constant(a, (1 << (l - 1)) + 1, 1 << l))
}

/// Membership in `Z_n` for a sequence of length `2^n`, clause by clause.
pub fn in_z(a: &[i8], n: u32) -> bool {
    let len = 1usize << n;
    if a.len() != len || !blocks_ok(a, n) {
        return false;
    }
    let lo = (1usize << (n - 1)) + 1;
    let last = a[len - 1];
    (lo..len).all(|i| a[i - 1] == -last)
}

/// `Z_n` by filtering every sign sequence of length `2^n`.
pub fn z_level(n: u32) -> Vec<Signs> {
    all_signs(1 << n).filter(|s| in_z(s.as_slice(), n)).collect()
}

/// Whether `a` of length `2^n` can still be extended into some `Z_(n')`, `n' > n`.
fn live(a: &[i8], n: u32) -> bool {
    blocks_ok(a, n + 1)
}

/// `U_(j_max) = ⋃_(n <= j_max) ⋃_(s ∈ Z_n) <s>` at resolution `2^j_max`.
///
/// Each live cylinder of length `2^(n-1)` (the whole cube for `n = 1`) must split into
/// exactly four nonempty pieces at length `2^n`: two in `Z_n`, two still live. A
/// different count is reported as an internal error.
pub fn balanced_open_u(j_max: u32) -> Result<CubeSet> {
    if j_max == 0 {
        return Err(Error::Parameter("j_max must be at least 1".into()));
    }
    if j_max > U_LEVEL_CAP {
        return Err(Error::ResolutionCap { need: 1 << j_max, cap: 1 << U_LEVEL_CAP });
    }
    let res = 1u32 << j_max;
    let mut u = CubeSet::empty(res);
    for n in 1..=j_max {
        let len = 1usize << n;
        let plen = if n == 1 { 0 } else { len / 2 };
        let mut pieces = std::collections::BTreeMap::<Vec<i8>, u32>::new();
        for s in all_signs(len as u32) {
            let a = s.as_slice();
            let parent_live = n == 1 || live(&a[..plen], n - 1);
            if !parent_live {
                continue;
            }
            let counted = pieces.entry(a[..plen].to_vec()).or_insert(0);
            if in_z(a, n) {
                *counted += 1;
                u = u.union(&CubeSet::cylinder(&s, res)?);
            } else if live(a, n) {
                *counted += 1;
            }
        }
        if let Some((p, c)) = pieces.iter().find(|(_, &c)| c != 4) {
            return Err(Error::Internal(format!(
                "live cylinder {} of level {n} splits into {c} pieces, not 4",
                Signs::new(p.clone())
            )));
        }
    }
    Ok(u)
}

/// `(-1, ..., -1, 1, 1)` of length `k >= 2`.
pub fn plebanek_s(k: u32) -> Signs {
    let mut v = vec![-1i8; k as usize - 2];
    v.extend([1, 1]);
    Signs::new(v)
}

/// `(-1, ..., -1, 1)` of length `k >= 1`.
pub fn plebanek_s_prime(k: u32) -> Signs {
    let mut v = vec![-1i8; k as usize - 1];
    v.push(1);
    Signs::new(v)
}

/// `⋃_(k=2)^K <s_k>` at resolution `K`, with the tail `⋃_(k>K) <s_k>` replaced by
/// `<s'_K>`: half of `<(-1)^(K-1)>`, like the tail. The result agrees with the infinite
/// union on every cylinder of length below `K`.
pub fn plebanek_b(k_max: u32) -> Result<CubeSet> {
    if k_max < 3 {
        return Err(Error::Parameter("K must be at least 3".into()));
    }
    let mut b = CubeSet::cylinder(&plebanek_s_prime(k_max), k_max)?;
    for k in 2..=k_max {
        b = b.union(&CubeSet::cylinder(&plebanek_s(k), k_max)?);
    }
    Ok(b)
}

/// `theta_n(A) = 2^n phi_(2^n)(A ∩ <s'_n>)`, as a density measure at resolution `K`.
pub fn aviles_measure(n: u32, k_max: u32) -> Result<FAMeasure> {
    if n == 0 {
        return Err(Error::Parameter("n must be at least 1".into()));
    }
    let r = 1u32 << n;
    if r > k_max || n > k_max {
        return Err(Error::ResolutionTooSmall { have: k_max, need: r.max(n) });
    }
    let prefix = plebanek_s_prime(n).index();
    let mask = (1u64 << n) - 1;
    let scale = 1i64 << n;
    let density = (0..1u64 << k_max)
        .map(|a| if a & mask == prefix { int(scale * crate::cube::atom_sign(a, r)) } else { int(0) })
        .collect();
    FAMeasure::new(k_max, density, Vec::new())
}

/// The cylinders `<s>` contained in `a` whose parent cylinder is not.
pub fn maximal_cylinders(a: &CubeSet) -> Vec<Signs> {
    let n = a.resolution();
    let mut out = Vec::new();
    let mut full_parent = vec![false];
    for len in 0..=n {
        let counts = if len == 0 { vec![a.count()] } else { a.prefix_counts(len) };
        let per = 1u64 << (n - len);
        let mut full = vec![false; counts.len()];
        for (i, &c) in counts.iter().enumerate() {
            let parent = if len == 0 { false } else { full_parent[i & ((1 << (len - 1)) - 1)] };
            full[i] = c == per;
            if full[i] && !parent {
                out.push(Signs::from_index(i as u64, len));
            }
            full[i] |= parent;
        }
        full_parent = full;
    }
    out
}

/// Full binary tree of depth `depth` drawn as a triangle, each layer's cylinders filled.
/// `-` goes left.
pub fn svg_cylinders(layers: &[(&CubeSet, &str)], depth: u32) -> String {
    let (w, h) = (640.0f64, 400.0f64);
    let row = h / depth.max(1) as f64;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{}">"#, h + 10.0);
    let _ = writeln!(
        out,
        r#"<polygon points="{},5 5,{} {},{}" fill="none" stroke="black"/>"#,
        w / 2.0,
        h + 5.0,
        w - 5.0,
        h + 5.0
    );
    for (set, color) in layers {
        for s in maximal_cylinders(set) {
            let d = s.len() as f64;
            // position of the node along its row, left to right
            let pos = s.iter().fold(0u64, |acc, x| acc * 2 + u64::from(x == 1)) as f64;
            let width_at = |y: f64| (w - 10.0) * y / h;
            let y0 = 5.0 + d * row;
            let span = width_at(d * row) / 2f64.powf(d);
            let x0 = w / 2.0 - width_at(d * row) / 2.0 + span * (pos + 0.5);
            let base = (w - 10.0) / 2f64.powf(d);
            let (xl, xr) = (x0 - base / 2.0, x0 + base / 2.0);
            let _ = writeln!(
                out,
                r#"<polygon points="{x0:.2},{y0:.2} {xl:.2},{:.2} {xr:.2},{:.2}" fill="{color}" stroke="black" stroke-width="0.5"/>"#,
                h + 5.0,
                h + 5.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ratio::frac;

    #[test]
    fn first_level_of_u() {
        let z1: Vec<String> = z_level(1).iter().map(|s| s.to_string()).collect();
        assert_eq!(z1.len(), 2);
        assert!(z1.contains(&"+-".to_string()) && z1.contains(&"-+".to_string()));
        assert_eq!(balanced_open_u(1).unwrap().lambda().to_rational(), frac(1, 2));
        assert!(matches!(balanced_open_u(5), Err(Error::ResolutionCap { .. })));
    }

    #[test]
    fn cylinder_cover_roundtrip() {
        let a = CubeSet::from_atoms(4, [0, 8, 3, 7, 11, 15]);
        let cover = maximal_cylinders(&a);
        let back = cover.iter().fold(CubeSet::empty(4), |acc, s| acc.union(&CubeSet::cylinder(s, 4).unwrap()));
        assert_eq!(back, a);
        assert_eq!(maximal_cylinders(&CubeSet::full(3)), vec![Signs::empty()]);
    }
}
