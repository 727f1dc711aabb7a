//! Fixed-step RK4 and adaptive Cash-Karp (embedded 4/5) drivers, generic
//! over any state with axpy-style vector operations.

use crate::{CoreError, Result};

pub trait OdeState: Clone {
    fn zeros_like(&self) -> Self;
    /// self += a * other
    fn scaled_add(&mut self, a: f64, other: &Self);
    /// Weighted error ratio between an embedded error estimate and the
    /// tolerances; > 1 means reject.
    fn error_ratio(&self, err: &Self, other: &Self, atol: f64, rtol: f64) -> f64;
}

/// A right-hand side writing its derivative into a caller buffer.
pub trait Rhs<S> {
    fn eval(&mut self, t: f64, y: &S, out: &mut S);
}

impl<S, F: FnMut(f64, &S, &mut S)> Rhs<S> for F {
    fn eval(&mut self, t: f64, y: &S, out: &mut S) {
        self(t, y, out)
    }
}

/// One classical RK4 step.
pub fn rk4_step<S: OdeState>(f: &mut impl Rhs<S>, t: f64, y: &S, dt: f64) -> S {
    let mut k1 = y.zeros_like();
    f.eval(t, y, &mut k1);
    let mut y2 = y.clone();
    y2.scaled_add(0.5 * dt, &k1);
    let mut k2 = y.zeros_like();
    f.eval(t + 0.5 * dt, &y2, &mut k2);
    let mut y3 = y.clone();
    y3.scaled_add(0.5 * dt, &k2);
    let mut k3 = y.zeros_like();
    f.eval(t + 0.5 * dt, &y3, &mut k3);
    let mut y4 = y.clone();
    y4.scaled_add(dt, &k3);
    let mut k4 = y.zeros_like();
    f.eval(t + dt, &y4, &mut k4);

    let mut out = y.clone();
    out.scaled_add(dt / 6.0, &k1);
    out.scaled_add(dt / 3.0, &k2);
    out.scaled_add(dt / 3.0, &k3);
    out.scaled_add(dt / 6.0, &k4);
    out
}

// Cash-Karp tableau.
const CK_C: [f64; 6] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 3.0 / 5.0, 1.0, 7.0 / 8.0];
const CK_A: [[f64; 5]; 6] = [
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0],
    [3.0 / 10.0, -9.0 / 10.0, 6.0 / 5.0, 0.0, 0.0],
    [-11.0 / 54.0, 5.0 / 2.0, -70.0 / 27.0, 35.0 / 27.0, 0.0],
    [
        1631.0 / 55296.0,
        175.0 / 512.0,
        575.0 / 13824.0,
        44275.0 / 110592.0,
        253.0 / 4096.0,
    ],
];
const CK_B5: [f64; 6] = [
    37.0 / 378.0,
    0.0,
    250.0 / 621.0,
    125.0 / 594.0,
    0.0,
    512.0 / 1771.0,
];
const CK_B4: [f64; 6] = [
    2825.0 / 27648.0,
    0.0,
    18575.0 / 48384.0,
    13525.0 / 55296.0,
    277.0 / 14336.0,
    1.0 / 4.0,
];

/// One Cash-Karp step: returns the 5th-order solution and the embedded
/// 4th/5th-order difference as the error state.
pub fn cash_karp_step<S: OdeState>(f: &mut impl Rhs<S>, t: f64, y: &S, dt: f64) -> (S, S) {
    let mut k: Vec<S> = Vec::with_capacity(6);
    for i in 0..6 {
        let mut yi = y.clone();
        for (j, kj) in k.iter().enumerate() {
            let a = CK_A[i][j];
            if a != 0.0 {
                yi.scaled_add(a * dt, kj);
            }
        }
        let mut ki = y.zeros_like();
        f.eval(t + CK_C[i] * dt, &yi, &mut ki);
        k.push(ki);
    }
    let mut y5 = y.clone();
    let mut err = y.zeros_like();
    for i in 0..6 {
        if CK_B5[i] != 0.0 {
            y5.scaled_add(CK_B5[i] * dt, &k[i]);
        }
        let d = CK_B5[i] - CK_B4[i];
        if d != 0.0 {
            err.scaled_add(d * dt, &k[i]);
        }
    }
    (y5, err)
}

#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOpts {
    pub rtol: f64,
    pub atol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Consecutive rejections at the floor step before declaring the
    /// problem stiff.
    pub max_floor_rejects: usize,
}

impl Default for AdaptiveOpts {
    fn default() -> Self {
        AdaptiveOpts { rtol: 1e-8, atol: 1e-12, dt_min: 1e-6, dt_max: f64::INFINITY, max_floor_rejects: 20 }
    }
}

/// Adaptive Cash-Karp propagation from t0 to t_end. `sink` sees every
/// accepted step.
pub fn propagate_cash_karp<S: OdeState>(
    f: &mut impl Rhs<S>,
    t0: f64,
    y0: S,
    t_end: f64,
    dt0: f64,
    opts: &AdaptiveOpts,
    mut sink: impl FnMut(f64, &S),
) -> Result<S> {
    let mut t = t0;
    let mut y = y0;
    let mut dt = dt0.min(opts.dt_max);
    let mut floor_rejects = 0usize;
    while t < t_end - 1e-14 * t_end.abs().max(1.0) {
        dt = dt.min(t_end - t);
        let (y5, err) = cash_karp_step(f, t, &y, dt);
        let ratio = y.error_ratio(&err, &y5, opts.atol, opts.rtol);
        if ratio <= 1.0 {
            t += dt;
            y = y5;
            sink(t, &y);
            floor_rejects = 0;
            let grow = if ratio > 0.0 { 0.9 * ratio.powf(-0.2) } else { 5.0 };
            dt = (dt * grow.clamp(0.2, 5.0)).min(opts.dt_max);
        } else {
            if dt <= opts.dt_min * (1.0 + 1e-12) {
                floor_rejects += 1;
                if floor_rejects >= opts.max_floor_rejects {
                    return Err(CoreError::Convergence(format!(
                        "step rejection cascade at the floor step {dt:.3e} (t = {t:.6}); problem appears stiff"
                    )));
                }
                // forced acceptance at the floor would hide errors; shrink
                // within the floor budget instead
                t += dt;
                y = y5;
                sink(t, &y);
            } else {
                let shrink = 0.9 * ratio.powf(-0.25);
                dt = (dt * shrink.clamp(0.1, 0.9)).max(opts.dt_min);
            }
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    impl OdeState for Vec<f64> {
        fn zeros_like(&self) -> Self {
            vec![0.0; self.len()]
        }
        fn scaled_add(&mut self, a: f64, other: &Self) {
            for (x, y) in self.iter_mut().zip(other) {
                *x += a * y;
            }
        }
        fn error_ratio(&self, err: &Self, other: &Self, atol: f64, rtol: f64) -> f64 {
            err.iter()
                .zip(self.iter().zip(other))
                .map(|(e, (a, b))| e.abs() / (atol + rtol * a.abs().max(b.abs())))
                .fold(0.0, f64::max)
        }
    }

    #[test]
    fn rk4_fourth_order_on_exponential() {
        // y' = -y, y(0) = 1
        let mut f = |_t: f64, y: &Vec<f64>, out: &mut Vec<f64>| out[0] = -y[0];
        let mut run = |dt: f64| {
            let mut y = vec![1.0];
            let steps = (2.0 / dt).round() as usize;
            for i in 0..steps {
                y = rk4_step(&mut f, i as f64 * dt, &y, dt);
            }
            (y[0] - (-2.0f64).exp()).abs()
        };
        let e1 = run(0.1);
        let e2 = run(0.05);
        let order = (e1 / e2).log2();
        assert!(order > 3.8 && order < 4.2, "order {order}");
    }

    #[test]
    fn cash_karp_hits_tolerance() {
        let mut f = |t: f64, _y: &Vec<f64>, out: &mut Vec<f64>| out[0] = (3.0 * t).cos();
        let y = propagate_cash_karp(
            &mut f,
            0.0,
            vec![0.0],
            5.0,
            0.5,
            &AdaptiveOpts { rtol: 1e-10, atol: 1e-12, ..Default::default() },
            |_, _| {},
        )
        .unwrap();
        assert!((y[0] - (15.0f64).sin() / 3.0).abs() < 1e-8);
    }

    #[test]
    fn stiffness_error_signalled() {
        // huge rate + tight floor forces a rejection cascade
        let mut f = |_t: f64, y: &Vec<f64>, out: &mut Vec<f64>| out[0] = -1e12 * y[0];
        let r = propagate_cash_karp(
            &mut f,
            0.0,
            vec![1.0],
            1.0,
            1e-2,
            &AdaptiveOpts {
                rtol: 1e-12,
                atol: 1e-14,
                dt_min: 1e-3,
                dt_max: 1.0,
                max_floor_rejects: 3,
            },
            |_, _| {},
        );
        assert!(matches!(r, Err(CoreError::Convergence(_))));
    }
}
