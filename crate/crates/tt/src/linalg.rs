//! SVD/QR helpers shared by the TT routines.

use ndarray::{s, Array1, Array2};
use ndarray_linalg::{QR, SVD};

use crate::{C64, Result, TtError};

/// Result of a truncated SVD `M ~= U * diag(s) * Vh`.
pub struct TruncatedSvd {
    pub u: Array2<C64>,
    pub s: Array1<f64>,
    pub vh: Array2<C64>,
    /// True when `rmax` forced a harder cut than the tolerance asked for.
    pub rank_capped: bool,
}

/// Truncated SVD with the deterministic sign convention.
///
/// Keeps the smallest rank whose discarded tail satisfies
/// `sqrt(sum_{i>r} s_i^2) <= tail_tol`, then caps at `rmax`. Exact zero
/// singular values are always dropped. The rank is never reduced below 1
/// so that chains stay contractible.
pub fn svd_trunc(m: &Array2<C64>, tail_tol: f64, rmax: usize) -> Result<TruncatedSvd> {
    let (u_opt, sv, vh_opt) = m
        .svd(true, true)
        .map_err(|e| TtError::Linalg(format!("svd: {e}")))?;
    let mut u = u_opt.expect("svd: U requested");
    let mut vh = vh_opt.expect("svd: Vh requested");

    let k = sv.len();
    // Tail 2-norms: tail[r] = ||(s_r, .., s_{k-1})||_2.
    let mut tail = vec![0.0f64; k + 1];
    for r in (0..k).rev() {
        tail[r] = (tail[r + 1].powi(2) + sv[r].powi(2)).sqrt();
    }
    let mut keep = k;
    while keep > 1 && (tail[keep - 1] <= tail_tol || sv[keep - 1] == 0.0) {
        keep -= 1;
    }
    let rank_capped = keep > rmax.max(1);
    let keep = keep.min(rmax.max(1));

    u = u.slice(s![.., ..keep]).to_owned();
    vh = vh.slice(s![..keep, ..]).to_owned();
    let sk = sv.slice(s![..keep]).to_owned();

    // Phase convention: the largest-magnitude entry of each left singular
    // vector is made real positive; the compensating phase goes into Vh.
    for j in 0..keep {
        let mut best = 0usize;
        let mut best_mag = -1.0f64;
        for i in 0..u.nrows() {
            let mag = u[(i, j)].norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        let pivot = u[(best, j)];
        if pivot.norm() > 0.0 {
            let phase = pivot / pivot.norm();
            let c = phase.conj();
            for i in 0..u.nrows() {
                u[(i, j)] *= c;
            }
            for i in 0..vh.ncols() {
                vh[(j, i)] *= phase;
            }
        }
    }

    Ok(TruncatedSvd { u, s: sk, vh, rank_capped })
}

/// Thin QR factorization `M = Q R` with orthonormal columns in `Q`.
pub fn qr_thin(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    let (rows, cols) = m.dim();
    if rows >= cols {
        let (q, r) = m.qr().map_err(|e| TtError::Linalg(format!("qr: {e}")))?;
        Ok((q, r))
    } else {
        // LAPACK thin QR needs rows >= cols; widen, factor, and slice back.
        let mut padded = Array2::<C64>::zeros((cols, cols));
        padded.slice_mut(s![..rows, ..]).assign(m);
        let (q, r) = padded.qr().map_err(|e| TtError::Linalg(format!("qr: {e}")))?;
        Ok((q.slice(s![..rows, ..rows]).to_owned(), r.slice(s![..rows, ..]).to_owned()))
    }
}

/// Thin LQ factorization `M = L Q` with orthonormal rows in `Q`.
pub fn lq_thin(m: &Array2<C64>) -> Result<(Array2<C64>, Array2<C64>)> {
    // LQ(M) from QR(M^H): M^H = Q' R'  =>  M = R'^H Q'^H.
    let mh = m.t().mapv(|z| z.conj());
    let (q, r) = qr_thin(&mh)?;
    let l = r.t().mapv(|z| z.conj());
    let qh = q.t().mapv(|z| z.conj());
    Ok((l, qh))
}

/// Frobenius norm.
pub fn fro_norm(m: &Array2<C64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn randomish(rows: usize, cols: usize) -> Array2<C64> {
        Array2::from_shape_fn((rows, cols), |(i, j)| {
            let x = ((i * 31 + j * 17 + 3) % 13) as f64 - 6.0;
            let y = ((i * 7 + j * 23 + 5) % 11) as f64 - 5.0;
            C64::new(x / 6.0, y / 5.0)
        })
    }

    #[test]
    fn svd_reconstructs() {
        let m = randomish(6, 4);
        let f = svd_trunc(&m, 0.0, usize::MAX).unwrap();
        let s = Array2::from_diag(&f.s.mapv(|x| C64::new(x, 0.0)));
        let rec = f.u.dot(&s).dot(&f.vh);
        let err = fro_norm(&(&rec - &m));
        assert!(err < 1e-12 * fro_norm(&m));
    }

    #[test]
    fn svd_phase_is_canonical() {
        let m = randomish(5, 5);
        let f = svd_trunc(&m, 0.0, usize::MAX).unwrap();
        for j in 0..f.s.len() {
            let col = f.u.column(j);
            let (mut best, mut mag) = (0usize, -1.0);
            for (i, z) in col.iter().enumerate() {
                if z.norm_sqr() > mag {
                    mag = z.norm_sqr();
                    best = i;
                }
            }
            assert!(col[best].im.abs() < 1e-12);
            assert!(col[best].re > 0.0);
        }
    }

    #[test]
    fn qr_wide_matrices() {
        let m = randomish(3, 7);
        let (q, r) = qr_thin(&m).unwrap();
        let rec = q.dot(&r);
        assert!(fro_norm(&(&rec - &m)) < 1e-12);
        let qhq = q.t().mapv(|z| z.conj()).dot(&q);
        let eye = Array2::<C64>::eye(q.ncols());
        assert!(fro_norm(&(&qhq - &eye)) < 1e-12);
    }

    #[test]
    fn lq_roundtrip() {
        let m = randomish(4, 6);
        let (l, q) = lq_thin(&m).unwrap();
        assert!(fro_norm(&(&l.dot(&q) - &m)) < 1e-12);
        let qqh = q.dot(&q.t().mapv(|z| z.conj()));
        let eye = Array2::<C64>::eye(q.nrows());
        assert!(fro_norm(&(&qqh - &eye)) < 1e-12);
    }
}
