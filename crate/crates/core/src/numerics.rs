//! Small numerical building blocks: adaptive Gauss-Kronrod quadrature,
//! monotone cubic (PCHIP) interpolation, scalar minimization and root
//! bracketing.

use crate::{CoreError, Result};

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One G7-K15 panel: returns (kronrod estimate, error estimate).
fn gk15(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut result_g = fc * WG[3];
    let mut result_k = fc * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        result_k += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            result_g += WG[j / 2] * (f1 + f2);
        }
    }
    result_k *= h;
    result_g *= h;
    (result_k, (result_k - result_g).abs())
}

/// Adaptive quadrature on a finite interval by bisection of the worst
/// panel. Fails if the error target is not met within `max_panels`.
pub fn adaptive_quad(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_panels: usize,
) -> Result<f64> {
    struct Panel {
        a: f64,
        b: f64,
        val: f64,
        err: f64,
    }
    let (val, err) = gk15(&mut f, a, b);
    let mut panels = vec![Panel { a, b, val, err }];
    loop {
        let total: f64 = panels.iter().map(|p| p.val).sum();
        let err_sum: f64 = panels.iter().map(|p| p.err).sum();
        if err_sum <= abs_tol + rel_tol * total.abs() {
            return Ok(total);
        }
        if panels.len() >= max_panels {
            return Err(CoreError::Numerics(format!(
                "quadrature did not converge: {} panels, err {:.3e}, value {:.3e}",
                panels.len(),
                err_sum,
                total
            )));
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.err.total_cmp(&y.1.err))
            .map(|(i, _)| i)
            .unwrap();
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&mut f, p.a, mid);
        let (v2, e2) = gk15(&mut f, mid, p.b);
        panels.push(Panel { a: p.a, b: mid, val: v1, err: e1 });
        panels.push(Panel { a: mid, b: p.b, val: v2, err: e2 });
    }
}

/// Monotone cubic Hermite interpolant (Fritsch-Carlson). Knot abscissae
/// must be strictly increasing; the interpolant preserves monotonicity
/// of the data.
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(CoreError::Numerics("pchip: need >= 2 matched knots".into()));
        }
        for w in x.windows(2) {
            if w[1] <= w[0] {
                return Err(CoreError::Numerics("pchip: abscissae not increasing".into()));
            }
        }
        let mut h = vec![0.0; n - 1];
        let mut delta = vec![0.0; n - 1];
        for i in 0..n - 1 {
            h[i] = x[i + 1] - x[i];
            delta[i] = (y[i + 1] - y[i]) / h[i];
        }
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                d[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Pchip { x, y, d })
    }

    pub fn eval(&self, xq: f64) -> f64 {
        let n = self.x.len();
        if xq <= self.x[0] {
            return self.y[0] + self.d[0] * (xq - self.x[0]);
        }
        if xq >= self.x[n - 1] {
            return self.y[n - 1] + self.d[n - 1] * (xq - self.x[n - 1]);
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&xq)) {
            Ok(i) => return self.y[i],
            Err(i) => i - 1,
        };
        let h = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.y[i] + h10 * h * self.d[i] + h01 * self.y[i + 1] + h11 * h * self.d[i + 1]
    }
}

/// Golden-section maximization of a unimodal function on [a, b].
pub fn golden_max(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bisection for f(x) = 0 on a bracketing interval.
pub fn bisect(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, tol: f64, max_iter: usize) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(CoreError::Numerics("bisect: interval does not bracket a root".into()));
    }
    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a).abs() < tol {
            return Ok(m);
        }
        if fa * fm < 0.0 {
            b = m;
        } else {
            a = m;
            fa = fm;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quad_polynomial_exact() {
        let v = adaptive_quad(|x| 3.0 * x * x, 0.0, 2.0, 1e-12, 0.0, 100).unwrap();
        assert!((v - 8.0).abs() < 1e-12);
    }

    #[test]
    fn quad_oscillatory() {
        // int_0^10 cos(50 x) dx = sin(500)/50
        let v = adaptive_quad(|x| (50.0 * x).cos(), 0.0, 10.0, 1e-11, 1e-14, 4000).unwrap();
        let want = (500.0f64).sin() / 50.0;
        assert!((v - want).abs() < 1e-9);
    }

    #[test]
    fn pchip_monotone_inverse() {
        let x: Vec<f64> = (0..50).map(|i| i as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v + 0.1 * v).collect();
        let p = Pchip::new(y.clone(), x.clone()).unwrap();
        for i in 1..49 {
            let xq = 0.5 * (y[i] + y[i + 1]);
            let got = p.eval(xq);
            // inverse of a smooth monotone map is reproduced closely
            let want = {
                // solve v^2 + 0.1 v = xq
                (-0.1 + (0.01 + 4.0 * xq).sqrt()) / 2.0
            };
            assert!((got - want).abs() < 2e-3, "xq={xq} got={got} want={want}");
        }
    }

    #[test]
    fn golden_finds_peak() {
        let x = golden_max(|x| -(x - 1.3).powi(2), 0.0, 3.0, 1e-10);
        assert!((x - 1.3).abs() < 1e-8);
    }
}
