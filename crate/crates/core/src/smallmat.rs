//! Hand-rolled kernels for the small (n <= ~8) complex matrices the dense
//! hierarchy engine manipulates by the millions. Matrices are row-major
//! slices of length n*n.

use crate::C64;

#[inline]
pub fn zero(dst: &mut [C64]) {
    for v in dst.iter_mut() {
        *v = C64::new(0.0, 0.0);
    }
}

/// dst += c * src
#[inline]
pub fn axpy(dst: &mut [C64], c: C64, src: &[C64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += c * s;
    }
}

/// dst += c * a.b  (all n x n row-major)
#[inline]
pub fn mul_acc(dst: &mut [C64], a: &[C64], b: &[C64], c: C64, n: usize) {
    for i in 0..n {
        let arow = &a[i * n..(i + 1) * n];
        let drow = &mut dst[i * n..(i + 1) * n];
        for (k, &aik) in arow.iter().enumerate() {
            if aik.re == 0.0 && aik.im == 0.0 {
                continue;
            }
            let coeff = c * aik;
            let brow = &b[k * n..(k + 1) * n];
            for (d, &bkj) in drow.iter_mut().zip(brow) {
                *d += coeff * bkj;
            }
        }
    }
}

/// dst += c * (a.b - b.a)
#[inline]
pub fn commutator_acc(dst: &mut [C64], a: &[C64], b: &[C64], c: C64, n: usize) {
    mul_acc(dst, a, b, c, n);
    mul_acc(dst, b, a, -c, n);
}

#[inline]
pub fn trace(a: &[C64], n: usize) -> C64 {
    (0..n).map(|i| a[i * n + i]).sum()
}

#[inline]
pub fn max_abs(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// max |a - a^dagger| entry
#[inline]
pub fn hermiticity_defect(a: &[C64], n: usize) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (a[i * n + j] - a[j * n + i].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mul_matches_manual() {
        let a = [c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(0.0, 0.0)];
        let b = [c(0.5, 0.0), c(1.0, 0.0), c(0.0, -1.0), c(3.0, 0.0)];
        let mut d = [c(0.0, 0.0); 4];
        mul_acc(&mut d, &a, &b, c(1.0, 0.0), 2);
        // row 0: [1, i] . b = [0.5 + i*(-i), 1 + 3i] = [1.5, 1+3i]
        assert_eq!(d[0], c(1.5, 0.0));
        assert_eq!(d[1], c(1.0, 3.0));
        // row 1: [2, 0] . b = [1, 2]
        assert_eq!(d[2], c(1.0, 0.0));
        assert_eq!(d[3], c(2.0, 0.0));
    }

    #[test]
    fn commutator_of_commuting_is_zero() {
        let a = [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)];
        let b = [c(3.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0)];
        let mut d = [c(0.0, 0.0); 4];
        commutator_acc(&mut d, &a, &b, c(1.0, 0.0), 2);
        for v in &d {
            assert_eq!(*v, C64::new(0.0, 0.0));
        }
    }
}
