//! U(1) symmetry-sector combinatorics.
//!
//! The Hilbert space of `k` qubits splits into sectors of fixed magnon number
//! `r` (qubits in `|1⟩`). A sector basis state is written as the strictly
//! increasing tuple `(n_1, …, n_r)` of magnon positions, `n_j ∈ 1..=k`. Basis
//! states are ordered by the integer key `I = Σ_j 2^(n_j - 1)` (qubit 1
//! carries bit weight 1), which coincides with colexicographic order on the
//! tuples. All maps here are 1-based to match that labelling: a sector index
//! `a` runs over `1..=d(r, k)`.

use crate::error::{Error, Result};

/// Binomial coefficient with exact integer arithmetic.
///
/// Values that do not fit in 64 bits are reported as an error rather than
/// silently wrapping.
pub fn binomial(n: usize, r: usize) -> Result<u64> {
    if r > n {
        return Ok(0);
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 1..=r {
        acc = acc * (n - r + i) as u128 / i as u128;
        if acc > u64::MAX as u128 {
            return Err(Error::BinomialOverflow { n, r });
        }
    }
    Ok(acc as u64)
}

/// Dimension of the `r`-magnon sector of `k` qubits.
pub fn sector_dim(r: usize, k: usize) -> Result<u64> {
    if r > k {
        return Err(Error::Domain(format!(
            "magnon count {r} exceeds qubit count {k}"
        )));
    }
    binomial(k, r)
}

/// `sector_dim` narrowed to `usize`, for sizing matrices.
pub fn dim(r: usize, k: usize) -> Result<usize> {
    Ok(sector_dim(r, k)? as usize)
}

fn validate_positions(positions: &[usize], k: usize) -> Result<()> {
    for (j, &n) in positions.iter().enumerate() {
        if n < 1 || n > k {
            return Err(Error::Domain(format!("position {n} outside 1..={k}")));
        }
        if j > 0 && positions[j - 1] >= n {
            return Err(Error::Domain(format!(
                "positions must be strictly increasing, got {positions:?}"
            )));
        }
    }
    Ok(())
}

/// Rank of a magnon-position tuple within its sector, `1..=d(r, k)`.
///
/// Ranks follow the key `I = Σ_j 2^(n_j - 1)` sorted in increasing order.
pub fn positions_to_index(positions: &[usize], k: usize) -> Result<usize> {
    validate_positions(positions, k)?;
    let mut rank: u64 = 0;
    for (j, &n) in positions.iter().enumerate() {
        rank += binomial(n - 1, j + 1)?;
    }
    Ok(rank as usize + 1)
}

/// Inverse of [`positions_to_index`]: the `a`-th tuple of the sector.
pub fn index_to_positions(a: usize, r: usize, k: usize) -> Result<Vec<usize>> {
    let d = dim(r, k)?;
    if a < 1 || a > d {
        return Err(Error::Domain(format!(
            "sector index {a} outside 1..={d} for r={r}, k={k}"
        )));
    }
    let mut rank = (a - 1) as u64;
    let mut out = vec![0usize; r];
    for j in (1..=r).rev() {
        // Largest n with C(n - 1, j) <= rank.
        let mut n = j;
        while n < k && binomial(n, j)? <= rank {
            n += 1;
        }
        rank -= binomial(n - 1, j)?;
        out[j - 1] = n;
    }
    Ok(out)
}

/// Removes the `m`-th magnon (1-based) from a tuple.
///
/// Returns the shortened tuple together with the antisymmetrisation sign
/// `(-1)^(m+1)` that accompanies the removal.
pub fn drop_position(positions: &[usize], m: usize) -> Result<(Vec<usize>, i32)> {
    if m < 1 || m > positions.len() {
        return Err(Error::Domain(format!(
            "drop index {m} outside 1..={}",
            positions.len()
        )));
    }
    let mut out = positions.to_vec();
    out.remove(m - 1);
    let sign = if m % 2 == 1 { 1 } else { -1 };
    Ok((out, sign))
}

/// Ordered computational basis of the `r`-magnon sector of `k` qubits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    magnons: usize,
    qubits: usize,
    order: Vec<Vec<usize>>,
}

impl SectorBasis {
    pub fn new(r: usize, k: usize) -> Result<Self> {
        let d = dim(r, k)?;
        let mut order = Vec::with_capacity(d);
        for a in 1..=d {
            order.push(index_to_positions(a, r, k)?);
        }
        Ok(Self {
            magnons: r,
            qubits: k,
            order,
        })
    }

    pub fn magnons(&self) -> usize {
        self.magnons
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// Position tuple of the `a`-th basis state (1-based).
    pub fn positions(&self, a: usize) -> &[usize] {
        &self.order[a - 1]
    }

    /// Sector index of a tuple (1-based).
    pub fn index_of(&self, positions: &[usize]) -> Result<usize> {
        if positions.len() != self.magnons {
            return Err(Error::Domain(format!(
                "tuple {:?} does not have {} entries",
                positions, self.magnons
            )));
        }
        positions_to_index(positions, self.qubits)
    }

    /// Integer key `I` of the `a`-th basis state.
    pub fn key(&self, a: usize) -> u64 {
        self.order[a - 1].iter().map(|&n| 1u64 << (n - 1)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.order.iter().map(|t| t.as_slice())
    }
}

/// All `2^w` bitmasks of `w` qubits in charge-sector order: magnon number
/// first, key `I` within each sector. This is the row/column layout of the
/// full (all-sector) block matrices.
pub fn charge_ordered_masks(w: usize) -> Vec<u64> {
    let mut masks: Vec<u64> = (0..(1u64 << w)).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks
}

/// Starting offset of each charge sector inside the layout of
/// [`charge_ordered_masks`]; entry `r` is the offset of sector `r`, with a
/// final entry equal to `2^w`.
pub fn charge_offsets(w: usize) -> Result<Vec<usize>> {
    let mut offsets = Vec::with_capacity(w + 2);
    let mut acc = 0usize;
    for r in 0..=w {
        offsets.push(acc);
        acc += dim(r, w)?;
    }
    offsets.push(acc);
    Ok(offsets)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(4, 2).unwrap(), 6);
        assert_eq!(binomial(0, 0).unwrap(), 1);
        assert_eq!(binomial(5, 6).unwrap(), 0);
        assert_eq!(binomial(20, 10).unwrap(), 184_756);
        assert!(binomial(200, 100).is_err());
    }

    #[test]
    fn sector_dims() {
        assert_eq!(sector_dim(2, 4).unwrap(), 6);
        assert_eq!(sector_dim(0, 7).unwrap(), 1);
        // Enumeration oracle: count 3-subsets of 7 explicitly.
        let mut count = 0u64;
        for a in 1..=7 {
            for b in (a + 1)..=7 {
                for c in (b + 1)..=7 {
                    let _ = (a, b, c);
                    count += 1;
                }
            }
        }
        assert_eq!(sector_dim(3, 7).unwrap(), count);
        assert!(sector_dim(5, 4).is_err());
    }

    #[test]
    fn dims_sum_to_hilbert_space() {
        for k in 0..=20 {
            let total: u64 = (0..=k).map(|r| sector_dim(r, k).unwrap()).sum();
            assert_eq!(total, 1u64 << k);
        }
    }

    #[test]
    fn ranking_matches_reference_table() {
        // k=4, r=2 sector ordered by key I.
        let expected = [
            (vec![1, 2], 3u64),
            (vec![1, 3], 5),
            (vec![2, 3], 6),
            (vec![1, 4], 9),
            (vec![2, 4], 10),
            (vec![3, 4], 12),
        ];
        for (a, (tuple, key)) in expected.iter().enumerate() {
            assert_eq!(positions_to_index(tuple, 4).unwrap(), a + 1);
            assert_eq!(index_to_positions(a + 1, 2, 4).unwrap(), *tuple);
            let i: u64 = tuple.iter().map(|&n| 1u64 << (n - 1)).sum();
            assert_eq!(i, *key);
        }
    }

    #[test]
    fn ranking_rejects_bad_tuples() {
        assert!(positions_to_index(&[2, 2], 4).is_err());
        assert!(positions_to_index(&[3, 1], 4).is_err());
        assert!(positions_to_index(&[0, 2], 4).is_err());
        assert!(positions_to_index(&[1, 5], 4).is_err());
        assert!(index_to_positions(7, 2, 4).is_err());
        assert!(index_to_positions(0, 2, 4).is_err());
    }

    #[test]
    fn zero_magnon_tuple() {
        assert_eq!(index_to_positions(1, 0, 9).unwrap(), Vec::<usize>::new());
        assert_eq!(positions_to_index(&[], 9).unwrap(), 1);
    }

    #[test]
    fn drop_position_signs() {
        assert_eq!(drop_position(&[1, 2, 3], 2).unwrap(), (vec![1, 3], -1));
        assert_eq!(drop_position(&[5], 1).unwrap(), (vec![], 1));
        assert_eq!(drop_position(&[1, 3, 4], 3).unwrap(), (vec![1, 3], 1));
        assert!(drop_position(&[1, 2], 3).is_err());
        assert!(drop_position(&[1, 2], 0).is_err());
    }

    #[test]
    fn basis_ordering_is_strictly_increasing_in_key() {
        for k in 0..=8 {
            for r in 0..=k {
                let basis = SectorBasis::new(r, k).unwrap();
                assert_eq!(basis.len(), dim(r, k).unwrap());
                for a in 2..=basis.len() {
                    assert!(basis.key(a - 1) < basis.key(a));
                }
            }
        }
    }

    #[test]
    fn charge_layout_is_consistent() {
        for w in 0..=6 {
            let masks = charge_ordered_masks(w);
            let offsets = charge_offsets(w).unwrap();
            assert_eq!(masks.len(), 1 << w);
            for r in 0..=w {
                let basis = SectorBasis::new(r, w).unwrap();
                for a in 1..=basis.len() {
                    assert_eq!(masks[offsets[r] + a - 1], basis.key(a));
                }
            }
        }
    }

    mod properties {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rank_unrank_roundtrip(k in 0usize..=12, seed in any::<u64>()) {
                for r in 0..=k {
                    let d = dim(r, k).unwrap();
                    let a = (seed % d as u64) as usize + 1;
                    let tuple = index_to_positions(a, r, k).unwrap();
                    prop_assert_eq!(positions_to_index(&tuple, k).unwrap(), a);
                }
            }
        }
    }
}
