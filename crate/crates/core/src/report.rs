//! Storage-size estimators for the dense and tensor-train
//! representations. Two TT counting conventions circulate; both are
//! provided as reporting estimates (the uniform-rank count and the
//! coarser bound), without reconciling their disagreement on the edge
//! cores.

use crate::hierarchy::level_count;

/// Scalars stored by the dense representation: n^2 * (L+K)! / (L! K!).
pub fn dense_scalars(n: usize, k: usize, l: usize) -> u128 {
    (n as u128) * (n as u128) * level_count(k, l)
}

/// TT element count when every interior bond has rank r:
/// `r (n^2 + n_heom) + K r^2 n_heom`.
pub fn tt_elements_uniform_rank(n: usize, n_heom: usize, k: usize, r: usize) -> u128 {
    let (n, n_heom, k, r) = (n as u128, n_heom as u128, k as u128, r as u128);
    r * (n * n + n_heom) + k * r * r * n_heom
}

/// Coarser TT storage bound: `(n^2 + L) r + r^2 (K - 1) L`.
pub fn tt_elements_bound(n: usize, l: usize, k: usize, r: usize) -> u128 {
    let (n, l, k, r) = (n as u128, l as u128, k as u128, r as u128);
    (n * n + l) * r + r * r * (k - 1) * l
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn printed_storage_counts() {
        assert_eq!(dense_scalars(2, 80, 5), 131_206_068);
        assert_eq!(tt_elements_bound(2, 5, 80, 80), 2_528_720);
    }
}
