//! TT operators (matrix product operators): chains of 4-way cores.

use ndarray::{Array2, Array3, Array4};

use crate::dense::DenseTensor;
use crate::vector::TtVector;
use crate::{C64, Result, RoundInfo, TtError};

/// Tensor-train operator. Core `i` has shape `(r_i, m_i, m_i, r_{i+1})`
/// with output mode before input mode.
#[derive(Debug, Clone)]
pub struct TtOperator {
    cores: Vec<Array4<C64>>,
}

impl TtOperator {
    pub fn from_cores(cores: Vec<Array4<C64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TtError::Invalid("empty core list".into()));
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[3] != 1 {
            return Err(TtError::Invalid("boundary ranks must be 1".into()));
        }
        for (i, pair) in cores.windows(2).enumerate() {
            if pair[0].shape()[3] != pair[1].shape()[0] {
                return Err(TtError::Invalid(format!(
                    "bond mismatch between cores {} and {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(TtOperator { cores })
    }

    /// Rank-1 operator from one matrix per site.
    pub fn from_site_matrices(mats: &[Array2<C64>]) -> Self {
        let cores = mats
            .iter()
            .map(|m| {
                let (a, b) = m.dim();
                Array4::from_shape_fn((1, a, b, 1), |(_, i, j, _)| m[(i, j)])
            })
            .collect();
        TtOperator { cores }
    }

    /// Identity operator on the given mode sizes.
    pub fn identity(mode_sizes: &[usize]) -> Self {
        let mats: Vec<Array2<C64>> = mode_sizes.iter().map(|&m| Array2::eye(m)).collect();
        TtOperator::from_site_matrices(&mats)
    }

    pub fn num_modes(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    pub fn bond_ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.cores.len() + 1);
        r.push(1);
        for c in &self.cores {
            r.push(c.shape()[3]);
        }
        r
    }

    pub fn max_rank(&self) -> usize {
        self.bond_ranks().into_iter().max().unwrap_or(1)
    }

    pub fn core(&self, i: usize) -> &Array4<C64> {
        &self.cores[i]
    }

    pub fn storage_len(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    pub fn rank_profile_json(&self) -> String {
        serde_json::json!({
            "kind": "tt_operator",
            "mode_sizes": self.mode_sizes(),
            "bond_ranks": self.bond_ranks(),
            "elements": self.storage_len(),
        })
        .to_string()
    }

    /// View as a TT vector with fused `(out, in)` modes; add/round/scale
    /// are delegated through this representation.
    fn to_fused(&self) -> TtVector {
        let cores = self
            .cores
            .iter()
            .map(|c| {
                let (r, mo, mi, rn) = c.dim();
                c.to_owned()
                    .into_shape((r, mo * mi, rn))
                    .expect("fuse reshape")
            })
            .collect();
        TtVector::from_cores(cores).expect("fused operator cores")
    }

    fn from_fused(v: TtVector, mode_sizes: &[usize]) -> Self {
        let cores = v
            .into_cores()
            .into_iter()
            .zip(mode_sizes)
            .map(|(c, &m)| {
                let (r, fused, rn) = c.dim();
                debug_assert_eq!(fused, m * m);
                c.into_shape((r, m, m, rn)).expect("unfuse reshape")
            })
            .collect();
        TtOperator { cores }
    }

    /// Kronecker product by core concatenation; no rank growth.
    pub fn kron(&self, other: &TtOperator) -> TtOperator {
        let mut cores = self.cores.clone();
        cores.extend(other.cores.iter().cloned());
        TtOperator { cores }
    }

    /// Exact sum; interior ranks add.
    pub fn add(&self, other: &TtOperator) -> Result<TtOperator> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(TtError::ShapeMismatch("operator add: mode sizes differ".into()));
        }
        let sizes = self.mode_sizes();
        let sum = self.to_fused().add(&other.to_fused())?;
        Ok(TtOperator::from_fused(sum, &sizes))
    }

    pub fn scale(&self, c: C64) -> TtOperator {
        let mut out = self.clone();
        out.cores[0].mapv_inplace(|z| z * c);
        out
    }

    /// SVD rounding; see `TtVector::round` for the truncation convention.
    pub fn round(&mut self, eps: f64, rmax: usize) -> Result<RoundInfo> {
        let sizes = self.mode_sizes();
        let mut fused = self.to_fused();
        let info = fused.round(eps, rmax)?;
        *self = TtOperator::from_fused(fused, &sizes);
        Ok(info)
    }

    /// Apply to a TT vector. Output bond ranks are the products of the
    /// operand ranks; no rounding is performed here.
    pub fn apply(&self, v: &TtVector) -> Result<TtVector> {
        if self.mode_sizes() != v.mode_sizes() {
            return Err(TtError::ShapeMismatch("apply: mode sizes differ".into()));
        }
        let mut cores = Vec::with_capacity(self.cores.len());
        for (w, a) in self.cores.iter().zip(v.cores_slice()) {
            let (p, mo, mi, q) = w.dim();
            let (r, _, rn) = a.dim();
            // y[(p,mo,q),(mi)] . a[(mi),(r,rn)] -> (p,mo,q,r,rn)
            let w_perm = w
                .view()
                .permuted_axes([0, 1, 3, 2])
                .as_standard_layout()
                .to_owned()
                .into_shape((p * mo * q, mi))
                .expect("apply w reshape");
            let a_perm = a
                .view()
                .permuted_axes([1, 0, 2])
                .as_standard_layout()
                .to_owned()
                .into_shape((mi, r * rn))
                .expect("apply a reshape");
            let y = w_perm.dot(&a_perm); // (p*mo*q, r*rn)
            let y = y
                .into_shape((p, mo, q, r, rn))
                .expect("apply y reshape")
                .permuted_axes([0, 3, 1, 2, 4]) // (p, r, mo, q, rn)
                .as_standard_layout()
                .to_owned()
                .into_shape((p * r, mo, q * rn))
                .expect("apply out reshape");
            cores.push(y);
        }
        TtVector::from_cores(cores)
    }

    /// Densify to a matrix (small instances only). Row index is the fused
    /// output multi-index, column the input one; mode 0 slowest.
    pub fn to_dense_matrix(&self) -> Array2<C64> {
        let mut m =
            Array3::<C64>::from_shape_fn((1, 1, 1), |_| C64::new(1.0, 0.0));
        for core in &self.cores {
            let (r, mo, mi, rn) = core.dim();
            let (no, ni, _) = m.dim();
            let mm = m
                .into_shape((no * ni, r))
                .expect("dense fold lhs");
            let cm = core
                .view()
                .to_owned()
                .into_shape((r, mo * mi * rn))
                .expect("dense fold rhs");
            let prod = mm.dot(&cm); // (no*ni, mo*mi*rn)
            m = prod
                .into_shape((no, ni, mo, mi, rn))
                .expect("dense unfold")
                .permuted_axes([0, 2, 1, 3, 4])
                .as_standard_layout()
                .to_owned()
                .into_shape((no * mo, ni * mi, rn))
                .expect("dense refold");
        }
        let (rows, cols, _) = m.dim();
        m.into_shape((rows, cols)).expect("dense final")
    }

    /// TT decomposition of a dense matrix over the given mode sizes.
    pub fn from_dense_matrix(
        mat: &Array2<C64>,
        mode_sizes: &[usize],
        eps: f64,
        rmax: usize,
    ) -> Result<(Self, RoundInfo)> {
        let total: usize = mode_sizes.iter().product();
        if mat.dim() != (total, total) {
            return Err(TtError::ShapeMismatch(format!(
                "from_dense_matrix: got {:?}, want ({total}, {total})",
                mat.dim()
            )));
        }
        let d = mode_sizes.len();
        // Reorder (i_0..i_{d-1}, j_0..j_{d-1}) -> (i_0 j_0, .., i_{d-1} j_{d-1}).
        let mut dims = Vec::with_capacity(2 * d);
        dims.extend_from_slice(mode_sizes);
        dims.extend_from_slice(mode_sizes);
        let flat = mat.as_standard_layout();
        let nd = flat
            .to_owned()
            .into_shape(dims.clone())
            .expect("pair reshape")
            .into_dyn();
        let mut perm: Vec<usize> = Vec::with_capacity(2 * d);
        for k in 0..d {
            perm.push(k);
            perm.push(d + k);
        }
        let paired = nd.permuted_axes(perm).as_standard_layout().to_owned();
        let paired_dims: Vec<usize> = mode_sizes.iter().map(|&m| m * m).collect();
        let dense = DenseTensor::from_data(
            paired_dims,
            paired.iter().cloned().collect(),
        );
        let (v, info) = TtVector::from_dense(&dense, eps, rmax)?;
        Ok((TtOperator::from_fused(v, mode_sizes), info))
    }
}
