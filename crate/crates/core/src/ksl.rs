//! Second-order projector-splitting integrator for `v' = L v` on the
//! fixed-rank tensor-train manifold (dynamical low-rank approximation).
//!
//! One step is a symmetric pair of sweeps: left-to-right over the cores
//! with half the step, then right-to-left with the other half. Within a
//! sweep each core is evolved forward under the projected generator, the
//! orthogonal factor is split off, and the bond transfer matrix is
//! evolved backward before being absorbed into the neighbor. Bond ranks
//! never change. The local core/bond equations are integrated with
//! classical RK4 substeps.

use ndarray::{Array2, Array3, Array4};

use heom_tt::{TtOperator, TtVector};
use heom_tt::linalg::{lq_thin, qr_thin};

use crate::{C64, CoreError, Result};

#[derive(Debug, Clone, Copy)]
pub struct KslOptions {
    /// RK4 substeps per local core/bond equation.
    pub substeps: usize,
}

impl Default for KslOptions {
    fn default() -> Self {
        KslOptions { substeps: 4 }
    }
}

type Env = Array3<C64>; // (bra bond, operator bond, ket bond)

fn ones_env() -> Env {
    Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0))
}

fn reshape2(a: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    a.view()
        .as_standard_layout()
        .to_owned()
        .into_shape((rows, cols))
        .expect("ksl reshape")
}

/// Effective generator applied to a core:
/// `y[a2,mo,b2] = sum l[a2,P,a] w[P,mo,mi,Q] r[b2,Q,b] x[a,mi,b]`.
fn apply_heff(l: &Env, w: &Array4<C64>, r: &Env, x: &Array3<C64>) -> Array3<C64> {
    let (a2, p, a) = l.dim();
    let (_, mo, mi, q) = w.dim();
    let (b2, _, b) = r.dim();
    // t1[(a2 p),(mi b)] = l[(a2 p), a] . x[a, (mi b)]
    let lm = reshape2(l, a2 * p, a);
    let xm = reshape2(x, a, mi * b);
    let t1 = lm.dot(&xm).into_shape((a2, p, mi, b)).expect("t1");
    // t2[(a2 b),(mo q)] = t1[(a2 b),(p mi)] . w[(p mi),(mo q)]
    let t1p = t1
        .permuted_axes([0, 3, 1, 2])
        .as_standard_layout()
        .to_owned()
        .into_shape((a2 * b, p * mi))
        .expect("t1p");
    let wp = w
        .view()
        .permuted_axes([0, 2, 1, 3])
        .as_standard_layout()
        .to_owned()
        .into_shape((p * mi, mo * q))
        .expect("wp");
    let t2 = t1p.dot(&wp).into_shape((a2, b, mo, q)).expect("t2");
    // y[(a2 mo), b2] = t2[(a2 mo),(b q)] . conj(r)[(b q), b2]
    let t2p = t2
        .permuted_axes([0, 2, 1, 3])
        .as_standard_layout()
        .to_owned()
        .into_shape((a2 * mo, b * q))
        .expect("t2p");
    // the environments already carry the bra-side conjugations
    let rp = r
        .view()
        .permuted_axes([2, 1, 0])
        .as_standard_layout()
        .to_owned()
        .into_shape((b * q, b2))
        .expect("rp");
    t2p.dot(&rp).into_shape((a2, mo, b2)).expect("y")
}

/// Effective bond generator:
/// `y[a2,b2] = sum l[a2,P,a] conj(r[b2,P,b]) s[a,b]`.
fn apply_seff(l: &Env, r: &Env, s: &Array2<C64>) -> Array2<C64> {
    let (a2, p, a) = l.dim();
    let (b2, p2, b) = r.dim();
    debug_assert_eq!(p, p2);
    let lm = reshape2(l, a2 * p, a);
    let t1 = lm.dot(s).into_shape((a2, p, b)).expect("seff t1");
    let t1m = t1
        .as_standard_layout()
        .to_owned()
        .into_shape((a2, p * b))
        .expect("seff t1m");
    let rm = reshape2(r, b2, p * b);
    t1m.dot(&rm.t())
}

/// Left environment grown through site i with a left-orthonormal core.
fn grow_left(l: &Env, w: &Array4<C64>, a: &Array3<C64>) -> Env {
    let (a2, p, a1) = l.dim();
    let (_, mo, mi, q) = w.dim();
    let (_, _, anew) = a.dim();
    // t1[a2,p,mi,an] = l . a  over ket bond
    let lm = reshape2(l, a2 * p, a1);
    let am = reshape2(a, a1, mi * anew);
    let t1 = lm.dot(&am).into_shape((a2, p, mi, anew)).expect("gl t1");
    // t2[(a2 an),(mo q)] = t1[(a2 an),(p mi)] . w[(p mi),(mo q)]
    let t1p = t1
        .permuted_axes([0, 3, 1, 2])
        .as_standard_layout()
        .to_owned()
        .into_shape((a2 * anew, p * mi))
        .expect("gl t1p");
    let wp = w
        .view()
        .permuted_axes([0, 2, 1, 3])
        .as_standard_layout()
        .to_owned()
        .into_shape((p * mi, mo * q))
        .expect("gl wp");
    let t2 = t1p.dot(&wp).into_shape((a2, anew, mo, q)).expect("gl t2");
    // out[abar, q, an] = sum_{a2, mo} conj(a[a2, mo, abar]) t2[a2, an, mo, q]
    let t2p = t2
        .permuted_axes([0, 2, 1, 3])
        .as_standard_layout()
        .to_owned()
        .into_shape((a2 * mo, anew * q))
        .expect("gl t2p");
    let abar = a.dim().2;
    let am2 = reshape2(a, a2 * mo, abar).mapv(|z| z.conj());
    am2.t()
        .dot(&t2p)
        .into_shape((abar, anew, q))
        .expect("gl out")
        .permuted_axes([0, 2, 1])
        .as_standard_layout()
        .to_owned()
}

/// Right environment grown through site i with a right-orthonormal core.
fn grow_right(r: &Env, w: &Array4<C64>, a: &Array3<C64>) -> Env {
    let (b2, q, b1) = r.dim();
    let (_, mo, mi, _) = w.dim();
    let (anew, _, _) = a.dim();
    // t1[an,mi,q,b2] = a[an,mi,b1] r-ket[b1,(q b2)]
    let am = reshape2(a, anew * mi, b1);
    let rp = r
        .view()
        .permuted_axes([2, 1, 0])
        .as_standard_layout()
        .to_owned()
        .into_shape((b1, q * b2))
        .expect("gr rp");
    let t1 = am.dot(&rp).into_shape((anew, mi, q, b2)).expect("gr t1");
    // t2[(an b2),(p mo)] = t1[(an b2),(mi q)] . w'[(mi q),(p mo)]
    let t1p = t1
        .permuted_axes([0, 3, 1, 2])
        .as_standard_layout()
        .to_owned()
        .into_shape((anew * b2, mi * q))
        .expect("gr t1p");
    let p = w.dim().0;
    let wp = w
        .view()
        .permuted_axes([2, 3, 0, 1])
        .as_standard_layout()
        .to_owned()
        .into_shape((mi * q, p * mo))
        .expect("gr wp");
    let t2 = t1p.dot(&wp).into_shape((anew, b2, p, mo)).expect("gr t2");
    // out[abar, p, an] = sum_{b2, mo} conj(a2core[abar, mo, b2]) t2[an, b2, p, mo]
    let abar = a.dim().0;
    debug_assert_eq!(abar, anew);
    let t2p = t2
        .permuted_axes([3, 1, 2, 0])
        .as_standard_layout()
        .to_owned()
        .into_shape((mo * b2, p * anew))
        .expect("gr t2p");
    let am2 = a
        .view()
        .permuted_axes([1, 2, 0])
        .as_standard_layout()
        .to_owned()
        .into_shape((mo * b2, abar))
        .expect("gr am2")
        .mapv(|z| z.conj());
    am2.t()
        .dot(&t2p)
        .into_shape((abar, p, anew))
        .expect("gr out")
}

fn check_finite2(m: &Array2<C64>) -> Result<()> {
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CoreError::Numerics(
            "singular bond transfer factor: non-finite entries in the S matrix; \
             reduce the rank or the step size"
                .into(),
        ));
    }
    Ok(())
}

fn rk4_core(f: impl Fn(&Array3<C64>) -> Array3<C64>, y: &Array3<C64>, dt: f64, substeps: usize) -> Array3<C64> {
    let h = dt / substeps as f64;
    let mut y = y.clone();
    for _ in 0..substeps {
        let k1 = f(&y);
        let k2 = f(&(&y + &k1.mapv(|z| z * 0.5 * h)));
        let k3 = f(&(&y + &k2.mapv(|z| z * 0.5 * h)));
        let k4 = f(&(&y + &k3.mapv(|z| z * h)));
        y = &y
            + &(k1.mapv(|z| z * (h / 6.0))
                + k2.mapv(|z| z * (h / 3.0))
                + k3.mapv(|z| z * (h / 3.0))
                + k4.mapv(|z| z * (h / 6.0)));
    }
    y
}

fn rk4_bond(f: impl Fn(&Array2<C64>) -> Array2<C64>, y: &Array2<C64>, dt: f64, substeps: usize) -> Array2<C64> {
    let h = dt / substeps as f64;
    let mut y = y.clone();
    for _ in 0..substeps {
        let k1 = f(&y);
        let k2 = f(&(&y + &k1.mapv(|z| z * 0.5 * h)));
        let k3 = f(&(&y + &k2.mapv(|z| z * 0.5 * h)));
        let k4 = f(&(&y + &k3.mapv(|z| z * h)));
        y = &y
            + &(k1.mapv(|z| z * (h / 6.0))
                + k2.mapv(|z| z * (h / 3.0))
                + k3.mapv(|z| z * (h / 3.0))
                + k4.mapv(|z| z * (h / 6.0)));
    }
    y
}

/// One second-order projector-splitting step of `v' = op v` over `dt`,
/// at the fixed bond ranks of `v`.
pub fn ksl_step(op: &TtOperator, v: &mut TtVector, dt: f64, opts: &KslOptions) -> Result<()> {
    if op.mode_sizes() != v.mode_sizes() {
        return Err(CoreError::Config("generator and state mode sizes differ".into()));
    }
    let d = v.num_modes();
    let substeps = opts.substeps.max(1);
    v.right_orthogonalize()?;

    // right environments for bonds d..1
    let mut renv: Vec<Env> = vec![ones_env(); d + 1];
    for i in (1..d).rev() {
        renv[i] = grow_right(&renv[i + 1], op.core(i), v.core(i));
    }
    let mut lenv: Vec<Env> = vec![ones_env(); d + 1];

    let h2 = 0.5 * dt;

    // forward half sweep
    for i in 0..d {
        let evolved = rk4_core(
            |x| apply_heff(&lenv[i], op.core(i), &renv[i + 1], x),
            v.core(i),
            h2,
            substeps,
        );
        *v.core_mut(i) = evolved;
        if i + 1 < d {
            let (r, m, rn) = v.core(i).dim();
            let mat = reshape2(v.core(i), r * m, rn);
            let (q, s) = qr_thin(&mat)?;
            check_finite2(&s)?;
            let k = q.ncols();
            *v.core_mut(i) = q.into_shape((r, m, k)).expect("ksl q reshape");
            lenv[i + 1] = grow_left(&lenv[i], op.core(i), v.core(i));
            let s_back = rk4_bond(
                |x| apply_seff(&lenv[i + 1], &renv[i + 1], x).mapv(|z| -z),
                &s,
                h2,
                substeps,
            );
            // absorb into the next core from the left
            let (rn2, m2, rn3) = v.core(i + 1).dim();
            let nxt = reshape2(v.core(i + 1), rn2, m2 * rn3);
            *v.core_mut(i + 1) = s_back
                .dot(&nxt)
                .into_shape((k, m2, rn3))
                .expect("ksl absorb");
        }
    }

    // backward half sweep
    for i in (0..d).rev() {
        let evolved = rk4_core(
            |x| apply_heff(&lenv[i], op.core(i), &renv[i + 1], x),
            v.core(i),
            h2,
            substeps,
        );
        *v.core_mut(i) = evolved;
        if i > 0 {
            let (r, m, rn) = v.core(i).dim();
            let mat = reshape2(v.core(i), r, m * rn);
            let (s, q) = lq_thin(&mat)?;
            check_finite2(&s)?;
            let k = q.nrows();
            *v.core_mut(i) = q.into_shape((k, m, rn)).expect("ksl lq reshape");
            renv[i] = grow_right(&renv[i + 1], op.core(i), v.core(i));
            let s_back = rk4_bond(
                |x| apply_seff(&lenv[i], &renv[i], x).mapv(|z| -z),
                &s,
                h2,
                substeps,
            );
            let (rp, mp, _) = v.core(i - 1).dim();
            let prev = reshape2(v.core(i - 1), rp * mp, r);
            *v.core_mut(i - 1) = prev
                .dot(&s_back)
                .into_shape((rp, mp, k))
                .expect("ksl absorb back");
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use heom_tt::DenseTensor;
    use ndarray::Array2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_tt(dims: &[usize], seed: u64) -> TtVector {
        let mut state = seed;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 33) as f64 / (1u64 << 31) as f64) - 1.0
        };
        let total: usize = dims.iter().product();
        let data: Vec<C64> = (0..total).map(|_| c(next(), next())).collect();
        let t = DenseTensor::from_data(dims.to_vec(), data);
        TtVector::from_dense(&t, 0.0, usize::MAX).unwrap().0
    }

    #[test]
    fn zero_generator_is_identity() {
        let dims = [4usize, 3, 3];
        let mut v = random_tt(&dims, 7);
        let before = v.to_dense();
        let zero = TtOperator::from_site_matrices(&[
            Array2::<C64>::zeros((4, 4)),
            Array2::<C64>::zeros((3, 3)),
            Array2::<C64>::zeros((3, 3)),
        ]);
        ksl_step(&zero, &mut v, 0.05, &KslOptions::default()).unwrap();
        let after = v.to_dense();
        assert!(before.max_abs_diff(&after) < 1e-13);
    }

    #[test]
    fn full_rank_single_site_matches_exponential() {
        // one site: the KSL step is plain integration of v' = A v
        let a = Array2::from_shape_fn((3, 3), |(i, j)| c(0.1 * (i as f64 - j as f64), 0.2 * (i + j) as f64 % 0.7));
        let op = TtOperator::from_site_matrices(&[a.clone()]);
        let v0 = ndarray::Array1::from_vec(vec![c(1.0, 0.0), c(0.5, -0.5), c(0.0, 0.25)]);
        let mut v = TtVector::rank_one(&[v0.clone()]);
        let dt = 0.01;
        let steps = 100;
        for _ in 0..steps {
            ksl_step(&op, &mut v, dt, &KslOptions::default()).unwrap();
        }
        // dense reference by RK4 with tiny steps
        let mut w = v0.clone();
        let nsub = 4000;
        let h = dt * steps as f64 / nsub as f64;
        for _ in 0..nsub {
            let k1 = a.dot(&w);
            let k2 = a.dot(&(&w + &k1.mapv(|z| z * (0.5 * h))));
            let k3 = a.dot(&(&w + &k2.mapv(|z| z * (0.5 * h))));
            let k4 = a.dot(&(&w + &k3.mapv(|z| z * h)));
            w = &w
                + &(k1.mapv(|z| z * (h / 6.0))
                    + k2.mapv(|z| z * (h / 3.0))
                    + k3.mapv(|z| z * (h / 3.0))
                    + k4.mapv(|z| z * (h / 6.0)));
        }
        let got = v.to_dense();
        for i in 0..3 {
            assert!((got.data[i] - w[i]).norm() < 1e-9, "i={i}");
        }
    }
}
