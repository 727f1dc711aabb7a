//! Enumeration of the auxiliary-density-operator index space and O(1)
//! raise/lower neighbor lookup.
//!
//! Two truncation schemes coexist: a total-level cut `sum_k n_k <= L`
//! (dense engine) and a per-mode cap `n_k <= n_max` (tensor-train
//! engine, where each occupation runs over `0..=n_max` independently).
//! Level truncation enumerates in graded order with the first mode
//! varying slowest inside a level; cap truncation enumerates in
//! mixed-radix order with mode 1 slowest, matching the Kronecker
//! ordering of the superoperator construction.

use std::collections::HashMap;

use crate::{CoreError, Result};

pub const DEFAULT_INDEX_BUDGET: usize = 20_000_000;

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// Keep indices with total level `sum_k n_k <= L`.
    Level(usize),
    /// Keep indices with every `n_k <= n_max`.
    Cap(usize),
}

/// Number of multi-indices with K modes at level truncation L:
/// binomial(L + K, K).
pub fn level_count(k: usize, l: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 1..=k.min(l) {
        // C(l + k, k) built incrementally to stay exact
        c = c * (l.max(k) as u128 + i as u128) / i as u128;
    }
    c
}

/// Number of multi-indices with K modes under a per-mode cap: (n_max+1)^K.
pub fn cap_count(k: usize, n_max: usize) -> u128 {
    (n_max as u128 + 1).pow(k as u32)
}

#[derive(Debug)]
pub struct HierarchySpace {
    modes: usize,
    truncation: Truncation,
    index_data: Vec<u8>,
    levels: Vec<u16>,
    raise_tbl: Vec<u32>,
    lower_tbl: Vec<u32>,
    position: HashMap<Vec<u8>, u32>,
}

impl HierarchySpace {
    pub fn enumerate(modes: usize, truncation: Truncation) -> Result<Self> {
        Self::enumerate_with_budget(modes, truncation, DEFAULT_INDEX_BUDGET)
    }

    pub fn enumerate_with_budget(
        modes: usize,
        truncation: Truncation,
        budget: usize,
    ) -> Result<Self> {
        if modes == 0 {
            return Err(CoreError::Config("hierarchy needs at least one mode".into()));
        }
        let predicted = match truncation {
            Truncation::Level(l) => level_count(modes, l),
            Truncation::Cap(n) => cap_count(modes, n),
        };
        if predicted > budget as u128 {
            return Err(CoreError::ResourceCap(format!(
                "hierarchy would hold {predicted} indices (budget {budget})"
            )));
        }
        let count = predicted as usize;
        let mut index_data = Vec::with_capacity(count * modes);
        match truncation {
            Truncation::Level(l) => {
                let mut scratch = vec![0u8; modes];
                for level in 0..=l {
                    push_level(&mut index_data, &mut scratch, level, 0, modes);
                }
            }
            Truncation::Cap(n_max) => {
                let radix = n_max + 1;
                let mut idx = vec![0u8; modes];
                loop {
                    index_data.extend_from_slice(&idx);
                    // increment mixed-radix counter, last mode fastest
                    let mut pos = modes;
                    loop {
                        if pos == 0 {
                            break;
                        }
                        pos -= 1;
                        if (idx[pos] as usize) + 1 < radix {
                            idx[pos] += 1;
                            break;
                        }
                        idx[pos] = 0;
                        if pos == 0 {
                            pos = usize::MAX;
                            break;
                        }
                    }
                    if pos == usize::MAX {
                        break;
                    }
                }
            }
        }
        debug_assert_eq!(index_data.len(), count * modes);

        let mut position = HashMap::with_capacity(count);
        for i in 0..count {
            position.insert(index_data[i * modes..(i + 1) * modes].to_vec(), i as u32);
        }
        let levels = (0..count)
            .map(|i| {
                index_data[i * modes..(i + 1) * modes]
                    .iter()
                    .map(|&v| v as u16)
                    .sum()
            })
            .collect::<Vec<u16>>();

        let mut raise_tbl = vec![ABSENT; count * modes];
        let mut lower_tbl = vec![ABSENT; count * modes];
        let mut probe = vec![0u8; modes];
        for i in 0..count {
            let idx = &index_data[i * modes..(i + 1) * modes];
            for k in 0..modes {
                probe.copy_from_slice(idx);
                probe[k] = probe[k].wrapping_add(1);
                let ok_up = match truncation {
                    Truncation::Level(l) => levels[i] as usize + 1 <= l,
                    Truncation::Cap(n) => (idx[k] as usize) + 1 <= n,
                };
                if ok_up {
                    if let Some(&j) = position.get(probe.as_slice()) {
                        raise_tbl[i * modes + k] = j;
                    }
                }
                if idx[k] > 0 {
                    probe.copy_from_slice(idx);
                    probe[k] -= 1;
                    if let Some(&j) = position.get(probe.as_slice()) {
                        lower_tbl[i * modes + k] = j;
                    }
                }
            }
        }

        Ok(HierarchySpace {
            modes,
            truncation,
            index_data,
            levels,
            raise_tbl,
            lower_tbl,
            position,
        })
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn truncation(&self) -> Truncation {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn index(&self, i: usize) -> &[u8] {
        &self.index_data[i * self.modes..(i + 1) * self.modes]
    }

    pub fn level(&self, i: usize) -> usize {
        self.levels[i] as usize
    }

    pub fn position(&self, idx: &[u8]) -> Option<usize> {
        self.position.get(idx).map(|&v| v as usize)
    }

    /// Neighbor with `n_k + 1`, or None past the truncation boundary.
    #[inline]
    pub fn raise(&self, i: usize, k: usize) -> Option<usize> {
        let v = self.raise_tbl[i * self.modes + k];
        (v != ABSENT).then_some(v as usize)
    }

    /// Neighbor with `n_k - 1`, or None at occupation zero.
    #[inline]
    pub fn lower(&self, i: usize, k: usize) -> Option<usize> {
        let v = self.lower_tbl[i * self.modes + k];
        (v != ABSENT).then_some(v as usize)
    }

    /// Indices with exactly one quantum in mode k (level-1 ADOs), in mode
    /// order; used for collective-bath-mode readout.
    pub fn level_one_positions(&self) -> Vec<usize> {
        (0..self.modes)
            .filter_map(|k| {
                let mut idx = vec![0u8; self.modes];
                idx[k] = 1;
                self.position(&idx)
            })
            .collect()
    }

    /// Map positions of a level-truncated space into the cap-truncated
    /// space with `n_max = L` (zero-padding embedding).
    pub fn cap_embedding(&self, cap: &HierarchySpace) -> Result<Vec<usize>> {
        if cap.modes != self.modes {
            return Err(CoreError::Config("embedding: mode counts differ".into()));
        }
        (0..self.len())
            .map(|i| {
                cap.position(self.index(i)).ok_or_else(|| {
                    CoreError::Config("embedding target space too small".into())
                })
            })
            .collect()
    }
}

fn push_level(out: &mut Vec<u8>, scratch: &mut [u8], remaining: usize, slot: usize, modes: usize) {
    if slot == modes - 1 {
        scratch[slot] = remaining as u8;
        out.extend_from_slice(scratch);
        return;
    }
    for v in (0..=remaining).rev() {
        scratch[slot] = v as u8;
        push_level(out, scratch, remaining - v, slot + 1, modes);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_mode_level_two_ordering() {
        let sp = HierarchySpace::enumerate(2, Truncation::Level(2)).unwrap();
        let got: Vec<Vec<u8>> = (0..sp.len()).map(|i| sp.index(i).to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn cap_ordering_is_mixed_radix_mode_one_slowest() {
        let sp = HierarchySpace::enumerate(2, Truncation::Cap(1)).unwrap();
        let got: Vec<Vec<u8>> = (0..sp.len()).map(|i| sp.index(i).to_vec()).collect();
        assert_eq!(got, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn count_formulas_hold_by_enumeration() {
        for k in 1..=6usize {
            for l in 0..=6usize {
                let sp = HierarchySpace::enumerate(k, Truncation::Level(l)).unwrap();
                assert_eq!(sp.len() as u128, level_count(k, l), "K={k} L={l}");
                let sp = HierarchySpace::enumerate(k, Truncation::Cap(l)).unwrap();
                assert_eq!(sp.len() as u128, cap_count(k, l), "K={k} cap={l}");
            }
        }
    }

    #[test]
    fn printed_dense_scalar_count() {
        // 80 modes at level 5, two-state system
        assert_eq!(4u128 * level_count(80, 5), 131_206_068);
    }

    #[test]
    fn level_zero_is_single_index() {
        let sp = HierarchySpace::enumerate(5, Truncation::Level(0)).unwrap();
        assert_eq!(sp.len(), 1);
        assert_eq!(sp.index(0), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn raise_lower_roundtrip_exhaustive() {
        let sp = HierarchySpace::enumerate(3, Truncation::Level(4)).unwrap();
        for i in 0..sp.len() {
            for k in 0..3 {
                if let Some(j) = sp.raise(i, k) {
                    assert_eq!(sp.lower(j, k), Some(i));
                }
                if let Some(j) = sp.lower(i, k) {
                    assert_eq!(sp.raise(j, k), Some(i));
                }
            }
        }
    }

    #[test]
    fn boundary_neighbors_absent() {
        let sp = HierarchySpace::enumerate(2, Truncation::Level(2)).unwrap();
        let zero = sp.position(&[0, 0]).unwrap();
        assert_eq!(sp.lower(zero, 0), None);
        assert_eq!(sp.raise(zero, 0), Some(sp.position(&[1, 0]).unwrap()));
        let top = sp.position(&[2, 0]).unwrap();
        assert_eq!(sp.raise(top, 0), None);
    }

    #[test]
    fn budget_guard_trips() {
        let err = HierarchySpace::enumerate_with_budget(20, Truncation::Cap(9), 1000);
        assert!(matches!(err, Err(CoreError::ResourceCap(_))));
    }

    #[test]
    fn embedding_into_cap_space() {
        let lvl = HierarchySpace::enumerate(2, Truncation::Level(2)).unwrap();
        let cap = HierarchySpace::enumerate(2, Truncation::Cap(2)).unwrap();
        let map = lvl.cap_embedding(&cap).unwrap();
        for (i, &j) in map.iter().enumerate() {
            assert_eq!(lvl.index(i), cap.index(j));
        }
    }
}
