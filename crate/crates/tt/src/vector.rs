//! TT vectors: chains of 3-way cores.

use ndarray::{s, Array1, Array2, Array3, ArrayView2};

use crate::dense::DenseTensor;
use crate::linalg::{lq_thin, qr_thin, svd_trunc};
use crate::{C64, Result, RoundInfo, TtError};

/// Tensor-train vector. Core `i` has shape `(r_i, m_i, r_{i+1})` with
/// `r_0 = r_d = 1`.
#[derive(Debug, Clone)]
pub struct TtVector {
    pub(crate) cores: Vec<Array3<C64>>,
}

impl TtVector {
    /// Build from explicit cores, checking bond consistency.
    ///
    /// Ranks only have to be mutually consistent; redundant (non-minimal)
    /// bond profiles are valid representations.
    pub fn from_cores(cores: Vec<Array3<C64>>) -> Result<Self> {
        if cores.is_empty() {
            return Err(TtError::Invalid("empty core list".into()));
        }
        if cores[0].shape()[0] != 1 || cores[cores.len() - 1].shape()[2] != 1 {
            return Err(TtError::Invalid("boundary ranks must be 1".into()));
        }
        for (i, pair) in cores.windows(2).enumerate() {
            if pair[0].shape()[2] != pair[1].shape()[0] {
                return Err(TtError::Invalid(format!(
                    "bond mismatch between cores {} and {}",
                    i,
                    i + 1
                )));
            }
        }
        Ok(TtVector { cores })
    }

    /// Rank-1 product state from per-mode vectors.
    pub fn rank_one(factors: &[Array1<C64>]) -> Self {
        let cores = factors
            .iter()
            .map(|f| Array3::from_shape_fn((1, f.len(), 1), |(_, m, _)| f[m]))
            .collect();
        TtVector { cores }
    }

    pub fn num_modes(&self) -> usize {
        self.cores.len()
    }

    pub fn mode_sizes(&self) -> Vec<usize> {
        self.cores.iter().map(|c| c.shape()[1]).collect()
    }

    /// Bond rank profile including the unit boundary ranks.
    pub fn bond_ranks(&self) -> Vec<usize> {
        let mut r = Vec::with_capacity(self.cores.len() + 1);
        r.push(1);
        for c in &self.cores {
            r.push(c.shape()[2]);
        }
        r
    }

    pub fn max_rank(&self) -> usize {
        self.bond_ranks().into_iter().max().unwrap_or(1)
    }

    pub fn core(&self, i: usize) -> &Array3<C64> {
        &self.cores[i]
    }

    pub fn core_mut(&mut self, i: usize) -> &mut Array3<C64> {
        &mut self.cores[i]
    }

    pub fn cores_slice(&self) -> &[Array3<C64>] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<Array3<C64>> {
        self.cores
    }

    /// Number of stored scalars.
    pub fn storage_len(&self) -> usize {
        self.cores.iter().map(|c| c.len()).sum()
    }

    /// Shapes and ranks as a JSON diagnostic blob.
    pub fn rank_profile_json(&self) -> String {
        serde_json::json!({
            "kind": "tt_vector",
            "mode_sizes": self.mode_sizes(),
            "bond_ranks": self.bond_ranks(),
            "elements": self.storage_len(),
        })
        .to_string()
    }

    /// Single element by full multi-index (one index per mode), computed
    /// by a left-to-right chain of vector-matrix products.
    pub fn element(&self, idx: &[usize]) -> C64 {
        assert_eq!(idx.len(), self.cores.len(), "index arity mismatch");
        let mut row: Array1<C64> = Array1::from_elem(1, C64::new(1.0, 0.0));
        for (core, &i) in self.cores.iter().zip(idx) {
            let slice: ArrayView2<C64> = core.slice(s![.., i, ..]);
            row = row.dot(&slice);
        }
        row[0]
    }

    /// Densify (small instances only). Row-major: mode 0 slowest.
    pub fn to_dense(&self) -> DenseTensor {
        let dims = self.mode_sizes();
        let mut m = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
        for core in &self.cores {
            let (r, md, rn) = core.dim();
            let core_mat = core.view().into_shape((r, md * rn)).expect("core reshape");
            let prod = m.dot(&core_mat);
            let n = prod.nrows();
            m = prod.into_shape((n * md, rn)).expect("fold reshape");
        }
        DenseTensor::from_data(dims, m.column(0).to_vec())
    }

    /// TT-SVD of a dense tensor with accuracy `eps` (relative, Frobenius)
    /// and rank cap `rmax`.
    pub fn from_dense(t: &DenseTensor, eps: f64, rmax: usize) -> Result<(Self, RoundInfo)> {
        let d = t.dims.len();
        if d == 0 || t.is_empty() {
            return Err(TtError::Invalid("from_dense: empty tensor".into()));
        }
        let norm = t.norm();
        let n_bonds = d.saturating_sub(1).max(1);
        let tol = eps * norm / (n_bonds as f64).sqrt();
        let mut info = RoundInfo::default();

        let mut rest = Array2::from_shape_vec((1, t.len()), t.data.clone())
            .map_err(|e| TtError::ShapeMismatch(e.to_string()))?;
        let mut cores: Vec<Array3<C64>> = Vec::with_capacity(d);
        let mut r_left = 1usize;
        for k in 0..d {
            let mk = t.dims[k];
            let cols: usize = t.dims[k + 1..].iter().product();
            let m = rest
                .into_shape((r_left * mk, cols))
                .expect("unfold reshape");
            if k + 1 == d {
                cores.push(m.into_shape((r_left, mk, 1)).expect("tail reshape"));
                break;
            }
            let f = svd_trunc(&m, tol, rmax)?;
            info.rank_capped |= f.rank_capped;
            let r_new = f.s.len();
            cores.push(f.u.into_shape((r_left, mk, r_new)).expect("core reshape"));
            let sv = Array2::from_diag(&f.s.mapv(|x| C64::new(x, 0.0)));
            rest = sv.dot(&f.vh);
            r_left = r_new;
        }
        Ok((TtVector { cores }, info))
    }

    /// Exact sum via block-diagonal core stacking; interior ranks add.
    pub fn add(&self, other: &TtVector) -> Result<TtVector> {
        if self.mode_sizes() != other.mode_sizes() {
            return Err(TtError::ShapeMismatch("add: mode sizes differ".into()));
        }
        let d = self.cores.len();
        if d == 1 {
            let c = &self.cores[0] + &other.cores[0];
            return Ok(TtVector { cores: vec![c] });
        }
        let mut cores = Vec::with_capacity(d);
        for i in 0..d {
            let a = &self.cores[i];
            let b = &other.cores[i];
            let (ra, m, ran) = a.dim();
            let (rb, _, rbn) = b.dim();
            let core = if i == 0 {
                let mut c = Array3::<C64>::zeros((1, m, ran + rbn));
                c.slice_mut(s![.., .., ..ran]).assign(a);
                c.slice_mut(s![.., .., ran..]).assign(b);
                c
            } else if i == d - 1 {
                let mut c = Array3::<C64>::zeros((ra + rb, m, 1));
                c.slice_mut(s![..ra, .., ..]).assign(a);
                c.slice_mut(s![ra.., .., ..]).assign(b);
                c
            } else {
                let mut c = Array3::<C64>::zeros((ra + rb, m, ran + rbn));
                c.slice_mut(s![..ra, .., ..ran]).assign(a);
                c.slice_mut(s![ra.., .., ran..]).assign(b);
                c
            };
            cores.push(core);
        }
        Ok(TtVector { cores })
    }

    /// Multiply by a scalar (absorbed in the first core).
    pub fn scale(&self, c: C64) -> TtVector {
        let mut out = self.clone();
        out.cores[0].mapv_inplace(|z| z * c);
        out
    }

    pub fn scale_inplace(&mut self, c: C64) {
        self.cores[0].mapv_inplace(|z| z * c);
    }

    /// Inner product, conjugate-linear in `self`.
    pub fn dot(&self, other: &TtVector) -> C64 {
        assert_eq!(self.mode_sizes(), other.mode_sizes(), "dot: mode sizes differ");
        let mut e = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
        for (a, b) in self.cores.iter().zip(&other.cores) {
            let (ra, m, ran) = a.dim();
            let (rb, _, rbn) = b.dim();
            let bm = b.view().into_shape((rb, m * rbn)).expect("dot reshape b");
            let t = e.dot(&bm).into_shape((ra * m, rbn)).expect("dot reshape t");
            let am = a.view().into_shape((ra * m, ran)).expect("dot reshape a");
            e = am.mapv(|z| z.conj()).t().dot(&t);
        }
        e[(0, 0)]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).re.max(0.0).sqrt()
    }

    /// Rounding: left-to-right orthogonalization, then a right-to-left
    /// truncating SVD sweep.
    pub fn round(&mut self, eps: f64, rmax: usize) -> Result<RoundInfo> {
        let d = self.cores.len();
        let mut info = RoundInfo::default();
        if d == 1 {
            return Ok(info);
        }
        for i in 0..d - 1 {
            let (r, m, rn) = self.cores[i].dim();
            let mat = self.cores[i]
                .view()
                .into_shape((r * m, rn))
                .expect("round reshape")
                .to_owned();
            let (q, rr) = qr_thin(&mat)?;
            let k = q.ncols();
            self.cores[i] = q.into_shape((r, m, k)).expect("round q reshape");
            let (_, m2, rn3) = self.cores[i + 1].dim();
            let nxt = self.cores[i + 1]
                .view()
                .into_shape((rn, m2 * rn3))
                .expect("round next reshape")
                .to_owned();
            self.cores[i + 1] = rr
                .dot(&nxt)
                .into_shape((k, m2, rn3))
                .expect("round carry reshape");
        }
        // After orthogonalization the norm sits in the last core, so the
        // local singular-value norm equals the global norm at each bond.
        let n_bonds = (d - 1) as f64;
        for i in (1..d).rev() {
            let (r, m, rn) = self.cores[i].dim();
            let mat = self.cores[i]
                .view()
                .into_shape((r, m * rn))
                .expect("trunc reshape")
                .to_owned();
            let sig_norm = mat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let tol = eps * sig_norm / n_bonds.sqrt();
            let f = svd_trunc(&mat, tol, rmax)?;
            info.rank_capped |= f.rank_capped;
            let keep = f.s.len();
            self.cores[i] = f.vh.into_shape((keep, m, rn)).expect("trunc vh reshape");
            let sv = Array2::from_diag(&f.s.mapv(|x| C64::new(x, 0.0)));
            let carry = f.u.dot(&sv);
            let (rp, mp, _) = self.cores[i - 1].dim();
            let prev = self.cores[i - 1]
                .view()
                .into_shape((rp * mp, r))
                .expect("trunc prev reshape")
                .to_owned();
            self.cores[i - 1] = prev
                .dot(&carry)
                .into_shape((rp, mp, keep))
                .expect("trunc prev carry");
        }
        Ok(info)
    }

    /// In-place `self += c * other` followed by a rounding pass.
    pub fn axpy_round(&mut self, c: C64, other: &TtVector, eps: f64, rmax: usize) -> Result<RoundInfo> {
        let sum = self.add(&other.scale(c))?;
        *self = sum;
        self.round(eps, rmax)
    }

    /// Kronecker (outer) product: mode list concatenation, no rank growth.
    pub fn kron(&self, other: &TtVector) -> TtVector {
        let mut cores = self.cores.clone();
        cores.extend(other.cores.iter().cloned());
        TtVector { cores }
    }

    /// Zero-pad interior bonds up to `targets` (length `d - 1`); bonds
    /// already at or above the target are left alone.
    pub fn pad_ranks(&mut self, targets: &[usize]) {
        let d = self.cores.len();
        assert_eq!(targets.len(), d.saturating_sub(1), "pad_ranks arity");
        for (bond, &want) in targets.iter().enumerate() {
            let have = self.cores[bond].shape()[2];
            if want <= have {
                continue;
            }
            let (r, m, _) = self.cores[bond].dim();
            let mut left = Array3::<C64>::zeros((r, m, want));
            left.slice_mut(s![.., .., ..have]).assign(&self.cores[bond]);
            self.cores[bond] = left;
            let (_, m2, rn) = self.cores[bond + 1].dim();
            let mut right = Array3::<C64>::zeros((want, m2, rn));
            right
                .slice_mut(s![..have, .., ..])
                .assign(&self.cores[bond + 1]);
            self.cores[bond + 1] = right;
        }
    }

    /// Bring to right-orthogonal form: every core except the first gets
    /// orthonormal rows in its `(r, m*rn)` unfolding.
    pub fn right_orthogonalize(&mut self) -> Result<()> {
        let d = self.cores.len();
        for i in (1..d).rev() {
            let (r, m, rn) = self.cores[i].dim();
            let mat = self.cores[i]
                .view()
                .into_shape((r, m * rn))
                .expect("ortho reshape")
                .to_owned();
            let (l, q) = lq_thin(&mat)?;
            let k = q.nrows();
            self.cores[i] = q.into_shape((k, m, rn)).expect("ortho q reshape");
            let (rp, mp, _) = self.cores[i - 1].dim();
            let prev = self.cores[i - 1]
                .view()
                .into_shape((rp * mp, r))
                .expect("ortho prev reshape")
                .to_owned();
            self.cores[i - 1] = prev
                .dot(&l)
                .into_shape((rp, mp, k))
                .expect("ortho carry reshape");
        }
        Ok(())
    }
}
