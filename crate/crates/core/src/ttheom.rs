//! Hierarchy super-Liouvillian in tensor-train operator form.
//!
//! The generator over the flattened space (system super-index, then one
//! occupation mode per decay channel, each of size `n_heom`) splits into
//! Kronecker-structured parts:
//!
//! * system part: `L_S(ADO) (x) I (x) ... (x) I`
//! * damping, one term per mode k: `i g_k I (x) .. M .. (x) I` with
//!   `M = diag(0, 1, .., n_max)` at slot k
//! * upward coupling: `Q_+ (x) .. M' .. ` with `M'[l, l+1] = 1`
//! * downward coupling: `Q_-k (x) .. M'' ..` with `M''[l, l-1] = l`
//!
//! where `Q_+ = -i(S (x) I - I (x) S^T)` and
//! `Q_-k = -i(a_k S (x) I - at_k I (x) S^T)`. Vectorization is row-major,
//! hence the transposes on the right-multiplication factors.

use ndarray::Array2;

use heom_tt::{TtOperator, TtVector};

use crate::bath::CorrelationExpansion;
use crate::system::SystemModel;
use crate::{C64, CoreError, Result};

/// Superoperator of `rho -> M rho` in row-major vectorization.
pub fn left_mult_superop(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    let mut out = Array2::<C64>::zeros((n * n, n * n));
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                out[(a * n + b, c * n + b)] = m[(a, c)];
            }
        }
    }
    out
}

/// Superoperator of `rho -> rho M` in row-major vectorization.
pub fn right_mult_superop(m: &Array2<C64>) -> Array2<C64> {
    let n = m.nrows();
    let mut out = Array2::<C64>::zeros((n * n, n * n));
    for a in 0..n {
        for b in 0..n {
            for d in 0..n {
                out[(a * n + b, a * n + d)] = m[(d, b)];
            }
        }
    }
    out
}

/// `L_S(ADO) = -i (H (x) I - I (x) H^T)`: the system Liouvillian on one
/// vectorized density matrix.
pub fn system_liouvillian_superop(h: &Array2<C64>) -> Array2<C64> {
    let minus_i = C64::new(0.0, -1.0);
    (left_mult_superop(h) - right_mult_superop(h)).mapv(|z| z * minus_i)
}

/// `Q_+ = -i (S (x) I - I (x) S^T)`.
pub fn q_plus(s: &Array2<C64>) -> Array2<C64> {
    system_liouvillian_superop(s)
}

/// `Q_-k = -i (a S (x) I - at I (x) S^T)`.
pub fn q_minus(s: &Array2<C64>, amp: C64, amp_conj: C64) -> Array2<C64> {
    let minus_i = C64::new(0.0, -1.0);
    (left_mult_superop(s).mapv(|z| z * amp) - right_mult_superop(s).mapv(|z| z * amp_conj))
        .mapv(|z| z * minus_i)
}

/// Occupation-number matrix diag(0..n_max).
pub fn mode_number_matrix(n_heom: usize) -> Array2<C64> {
    Array2::from_shape_fn((n_heom, n_heom), |(l, m)| {
        if l == m {
            C64::new(l as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Raising read: `M'[l, l+1] = 1` (row l sees occupation l+1).
pub fn mode_raise_matrix(n_heom: usize) -> Array2<C64> {
    Array2::from_shape_fn((n_heom, n_heom), |(l, m)| {
        if m == l + 1 {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Weighted lowering read: `M''[l, l-1] = l`.
pub fn mode_lower_matrix(n_heom: usize) -> Array2<C64> {
    Array2::from_shape_fn((n_heom, n_heom), |(l, m)| {
        if l >= 1 && m == l - 1 {
            C64::new(l as f64, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn site_chain(site0: Array2<C64>, k_modes: usize, n_heom: usize, slot: Option<(usize, Array2<C64>)>) -> TtOperator {
    let mut mats = Vec::with_capacity(k_modes + 1);
    mats.push(site0);
    for k in 0..k_modes {
        match &slot {
            Some((at, m)) if *at == k => mats.push(m.clone()),
            _ => mats.push(Array2::eye(n_heom)),
        }
    }
    TtOperator::from_site_matrices(&mats)
}

/// System part: `L_S(ADO) (x) prod_k I`.
pub fn build_system_part(h_eff: &Array2<C64>, k_modes: usize, n_heom: usize) -> TtOperator {
    site_chain(system_liouvillian_superop(h_eff), k_modes, n_heom, None)
}

/// Damping term for a single mode: `i g_k I (x) .. M ..`.
pub fn damping_term(gamma: C64, k: usize, nn: usize, k_modes: usize, n_heom: usize) -> TtOperator {
    let site0 = Array2::<C64>::eye(nn).mapv(|z| z * C64::i() * gamma);
    site_chain(site0, k_modes, n_heom, Some((k, mode_number_matrix(n_heom))))
}

/// Upward-coupling term for a single mode: `Q_+ (x) .. M' ..`.
pub fn plus_term(s: &Array2<C64>, k: usize, k_modes: usize, n_heom: usize) -> TtOperator {
    site_chain(q_plus(s), k_modes, n_heom, Some((k, mode_raise_matrix(n_heom))))
}

/// Downward-coupling term for a single mode: `Q_-k (x) .. M'' ..`.
pub fn minus_term(
    s: &Array2<C64>,
    amp: C64,
    amp_conj: C64,
    k: usize,
    k_modes: usize,
    n_heom: usize,
) -> TtOperator {
    site_chain(q_minus(s, amp, amp_conj), k_modes, n_heom, Some((k, mode_lower_matrix(n_heom))))
}

/// Exact sum of the damping terms of one expansion occupying modes
/// `offset..offset+len` of a K-mode chain. Exact block sums (no rounding):
/// intended for moderate mode counts and for oracle comparisons.
pub fn build_damping(
    expansion: &CorrelationExpansion,
    nn: usize,
    offset: usize,
    k_modes: usize,
    n_heom: usize,
) -> Result<TtOperator> {
    let mut acc: Option<TtOperator> = None;
    for (j, term) in expansion.terms.iter().enumerate() {
        let t = damping_term(term.exponent, offset + j, nn, k_modes, n_heom);
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    acc.ok_or_else(|| CoreError::Config("expansion has no terms".into()))
}

/// Exact sum of the upward-coupling terms of one bath over its modes.
pub fn build_plus(
    s: &Array2<C64>,
    n_terms: usize,
    offset: usize,
    k_modes: usize,
    n_heom: usize,
) -> Result<TtOperator> {
    let mut acc: Option<TtOperator> = None;
    for j in 0..n_terms {
        let t = plus_term(s, offset + j, k_modes, n_heom);
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    acc.ok_or_else(|| CoreError::Config("bath has no modes".into()))
}

/// Exact sum of the downward-coupling terms of one bath over its modes.
pub fn build_minus(
    s: &Array2<C64>,
    expansion: &CorrelationExpansion,
    offset: usize,
    k_modes: usize,
    n_heom: usize,
) -> Result<TtOperator> {
    let mut acc: Option<TtOperator> = None;
    for (j, term) in expansion.terms.iter().enumerate() {
        let t = minus_term(s, term.amp, term.amp_conj, offset + j, k_modes, n_heom);
        acc = Some(match acc {
            None => t,
            Some(a) => a.add(&t)?,
        });
    }
    acc.ok_or_else(|| CoreError::Config("expansion has no terms".into()))
}

/// The assembled generator, with the bath part cached so the system part
/// can be rebuilt cheaply under a time-dependent Hamiltonian.
#[derive(Debug, Clone)]
pub struct TtLiouvillian {
    pub op: TtOperator,
    bath_part: TtOperator,
    pub n_heom: usize,
    pub eps: f64,
    pub rmax: usize,
}

impl TtLiouvillian {
    pub fn k_modes(&self) -> usize {
        self.op.num_modes() - 1
    }

    /// Rebuild the full generator for a new effective Hamiltonian.
    pub fn with_h_eff(&self, h_eff: &Array2<C64>) -> Result<TtOperator> {
        let sys = build_system_part(h_eff, self.k_modes(), self.n_heom);
        let mut op = self.bath_part.add(&sys)?;
        let info = op.round(self.eps, self.rmax)?;
        if info.rank_capped {
            return Err(CoreError::ResourceCap(
                "generator rounding hit the rank cap; the operator must stay exact".into(),
            ));
        }
        Ok(op)
    }
}

/// Assemble the full generator: system part plus, for every decay mode,
/// damping, upward and downward couplings, rounding after each addition.
/// Hitting the rank cap while rounding the operator is a hard error.
pub fn assemble(
    model: &SystemModel,
    n_heom: usize,
    eps: f64,
    rmax: usize,
) -> Result<TtLiouvillian> {
    if n_heom < 1 {
        return Err(CoreError::Config("n_heom must be at least 1".into()));
    }
    let n = model.dim();
    let nn = n * n;
    let k_modes = model.total_modes();
    let sys = build_system_part(&model.h_static(), k_modes, n_heom);
    let mut capped = false;

    fn add_round(
        acc: &mut Option<TtOperator>,
        term: TtOperator,
        eps: f64,
        rmax: usize,
        capped: &mut bool,
    ) -> Result<()> {
        match acc {
            None => *acc = Some(term),
            Some(a) => {
                let mut sum = a.add(&term)?;
                *capped |= sum.round(eps, rmax)?.rank_capped;
                *acc = Some(sum);
            }
        }
        Ok(())
    }

    let mut bath_acc: Option<TtOperator> = None;
    let mut offset = 0usize;
    for bath in &model.baths {
        let s = &bath.coupling;
        for (j, term) in bath.expansion.terms.iter().enumerate() {
            let k = offset + j;
            add_round(
                &mut bath_acc,
                damping_term(term.exponent, k, nn, k_modes, n_heom),
                eps,
                rmax,
                &mut capped,
            )?;
            add_round(&mut bath_acc, plus_term(s, k, k_modes, n_heom), eps, rmax, &mut capped)?;
            add_round(
                &mut bath_acc,
                minus_term(s, term.amp, term.amp_conj, k, k_modes, n_heom),
                eps,
                rmax,
                &mut capped,
            )?;
        }
        offset += bath.expansion.len();
    }

    let (op, bath_part) = match bath_acc {
        Some(bp) => {
            let mut op = bp.add(&sys)?;
            capped |= op.round(eps, rmax)?.rank_capped;
            (op, bp)
        }
        None => {
            // no baths: the generator is the pure system part
            let zero = TtOperator::from_site_matrices(
                &std::iter::once(Array2::<C64>::zeros((nn, nn)))
                    .chain((0..k_modes).map(|_| Array2::zeros((n_heom, n_heom))))
                    .collect::<Vec<_>>(),
            );
            (sys.clone(), zero)
        }
    };
    if capped {
        return Err(CoreError::ResourceCap(
            "generator rounding hit the rank cap; the operator must stay exact".into(),
        ));
    }
    Ok(TtLiouvillian { op, bath_part, n_heom, eps, rmax })
}

/// Factorized initial state: rank-1 chain whose first core is the
/// vectorized density matrix and whose mode cores point at occupation 0.
pub fn initial_state(rho: &Array2<C64>, k_modes: usize, n_heom: usize) -> TtVector {
    let n = rho.nrows();
    let mut first = ndarray::Array1::<C64>::zeros(n * n);
    for i in 0..n {
        for j in 0..n {
            first[i * n + j] = rho[(i, j)];
        }
    }
    let mut factors = vec![first];
    for _ in 0..k_modes {
        let mut e0 = ndarray::Array1::<C64>::zeros(n_heom);
        e0[0] = C64::new(1.0, 0.0);
        factors.push(e0);
    }
    TtVector::rank_one(&factors)
}

/// Reduced density matrix from a TT hierarchy state: contract every mode
/// core on its zero-occupation slice.
pub fn reduce_tt(v: &TtVector) -> Array2<C64> {
    let sizes = v.mode_sizes();
    let nn = sizes[0];
    let n = (nn as f64).sqrt().round() as usize;
    assert_eq!(n * n, nn, "first mode is not a vectorized square matrix");
    let d = v.num_modes();
    // tail[r] = prod_{k=d-1..1} A_k[:, 0, :] acting on the unit boundary
    let mut tail = ndarray::Array1::<C64>::from_elem(1, C64::new(1.0, 0.0));
    for k in (1..d).rev() {
        let slice: Array2<C64> = v.core(k).slice(ndarray::s![.., 0, ..]).to_owned();
        tail = slice.dot(&tail);
    }
    let first = v.core(0);
    Array2::from_shape_fn((n, n), |(i, j)| {
        let alpha = i * n + j;
        first
            .slice(ndarray::s![0, alpha, ..])
            .iter()
            .zip(tail.iter())
            .map(|(a, b)| a * b)
            .sum()
    })
}

/// Left-multiply the system factor of a TT hierarchy state by a matrix
/// (dipole application): applies `M (x) I (x) .. I` without rank growth.
pub fn left_multiply_tt(v: &TtVector, m: &Array2<C64>) -> Result<TtVector> {
    let sizes = v.mode_sizes();
    let sup = left_mult_superop(m);
    let mut mats: Vec<Array2<C64>> = vec![sup];
    for &s in &sizes[1..] {
        mats.push(Array2::eye(s));
    }
    let op = TtOperator::from_site_matrices(&mats);
    Ok(op.apply(v)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn system_superop_matches_commutator() {
        let h = array![
            [c(1.0, 0.0), c(0.25, 0.1)],
            [c(0.25, -0.1), c(0.5, 0.0)]
        ];
        let l = system_liouvillian_superop(&h);
        // apply to a random vectorized rho and compare with -i[H, rho]
        let rho = array![[c(0.3, 0.0), c(0.1, -0.2)], [c(0.1, 0.2), c(0.7, 0.0)]];
        let want = (h.dot(&rho) - rho.dot(&h)).mapv(|z| z * c(0.0, -1.0));
        let rho_vec = ndarray::Array1::from_iter(rho.iter().cloned());
        let got = l.dot(&rho_vec);
        for i in 0..2 {
            for j in 0..2 {
                assert!((got[i * 2 + j] - want[(i, j)]).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn q_plus_for_projector_coupling() {
        let s = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let q = q_plus(&s).mapv(|z| z / c(0.0, -1.0));
        // (S (x) I - I (x) S) = diag(0, -1, 1, 0)
        let want = [0.0, -1.0, 1.0, 0.0];
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { want[i] } else { 0.0 };
                assert!((q[(i, j)] - c(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn q_minus_diagonal_structure() {
        let s = array![[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
        let (a, at) = (c(0.75, -0.25), c(0.5, 0.0625));
        let q = q_minus(&s, a, at).mapv(|z| z / c(0.0, -1.0));
        let want = [c(0.0, 0.0), -at, a, a - at];
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { want[i] } else { c(0.0, 0.0) };
                assert!((q[(i, j)] - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn initial_state_is_rank_one_and_factorized() {
        let rho = array![[c(0.25, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.75, 0.0)]];
        let v = initial_state(&rho, 3, 4);
        assert!(v.bond_ranks().iter().all(|&r| r == 1));
        assert_eq!(v.element(&[0, 0, 0, 0]), c(0.25, 0.0));
        assert_eq!(v.element(&[3, 0, 0, 0]), c(0.75, 0.0));
        assert_eq!(v.element(&[3, 1, 0, 2]), c(0.0, 0.0));
        let red = reduce_tt(&v);
        assert_eq!(red[(0, 0)], c(0.25, 0.0));
        assert_eq!(red[(1, 1)], c(0.75, 0.0));
    }
}
