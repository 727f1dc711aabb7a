//! Linear absorption and emission spectra from dipole correlation
//! functions propagated through the full hierarchy.
//!
//! Both spectra are half-line Fourier transforms of
//! `C(t) = Tr[rho(t)^dagger rho(0)]`, where `rho(0)` is a bra-side
//! dipole-excited coherence block: `rho_S(0) mu^-` for absorption from
//! the ground state, and `mu^- rho_S(t_eq)` (applied to the full
//! equilibrated ADO stack) for emission. The transform carries an
//! exponential window `exp(-t / tau_w)`.

use ndarray::Array2;

use crate::dense::{DenseEngine, HeomState};
use crate::{C64, CoreError, Result};

#[derive(Debug, Clone)]
pub struct SpectrumOpts {
    pub t_max: f64,
    pub dt: f64,
    /// Window time constant; None picks 5x the observed correlation decay.
    pub window_tau: Option<f64>,
    pub omega_min: f64,
    pub omega_max: f64,
    pub n_omega: usize,
    pub normalize: bool,
}

#[derive(Debug, Clone)]
pub struct SpectrumResult {
    /// Frequency grid (atomic units).
    pub omega: Vec<f64>,
    pub intensity: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub window_tau: f64,
    pub normalized: bool,
    /// Set when the correlation function has not decayed by t_max, so the
    /// linewidth is window-limited rather than resolved.
    pub unresolved_linewidth: bool,
}

/// Lowering part of the dipole operator: `mu^- = sum_{k != 0} mu_k |0><k|`,
/// taking state 0 as the radiative ground state.
pub fn dipole_lowering(mu: &Array2<C64>) -> Array2<C64> {
    let n = mu.nrows();
    let mut out = Array2::<C64>::zeros((n, n));
    for k in 1..n {
        out[(0, k)] = mu[(0, k)];
    }
    out
}

/// Dipole correlation function `C(t) = Tr[rho(t)^dagger rho(0)]` along a
/// hierarchy propagation started from `initial`.
fn dipole_correlation(
    engine: &DenseEngine,
    initial: HeomState,
    dt: f64,
    n_steps: usize,
) -> Vec<C64> {
    let n = initial.dim;
    let rho0 = initial.physical();
    let overlap = |rho_t: &Array2<C64>| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += rho_t[(i, j)].conj() * rho0[(i, j)];
            }
        }
        acc
    };
    let mut c = Vec::with_capacity(n_steps + 1);
    c.push(overlap(&initial.physical()));
    engine.propagate_rk4(initial, dt, n_steps, |s| {
        c.push(overlap(&s.physical()));
    });
    c
}

/// Damped half-line transform: `Re sum_j w_j C(t_j) e^{-t_j/tau} e^{i w t_j} dt`
/// with trapezoid end weights.
pub fn half_line_transform(
    c: &[C64],
    dt: f64,
    window_tau: f64,
    omega: &[f64],
) -> Vec<f64> {
    let n = c.len();
    omega
        .iter()
        .map(|&w| {
            let mut acc = C64::new(0.0, 0.0);
            for (j, &cj) in c.iter().enumerate() {
                let t = j as f64 * dt;
                let weight = if j == 0 || j + 1 == n { 0.5 } else { 1.0 };
                let damp = (-t / window_tau).exp();
                acc += cj * damp * C64::new(0.0, w * t).exp() * weight;
            }
            (acc * dt).re
        })
        .collect()
}

fn pick_window(c: &[C64], dt: f64, t_max: f64) -> f64 {
    let c0 = c[0].norm();
    if c0 == 0.0 {
        return t_max;
    }
    let target = c0 / std::f64::consts::E;
    for (j, cj) in c.iter().enumerate() {
        if cj.norm() < target {
            return (5.0 * j as f64 * dt).max(10.0 * dt);
        }
    }
    t_max
}

fn finish(
    c: &[C64],
    opts: &SpectrumOpts,
    dt: f64,
) -> SpectrumResult {
    let window_tau = opts.window_tau.unwrap_or_else(|| pick_window(c, dt, opts.t_max));
    let omega: Vec<f64> = (0..opts.n_omega)
        .map(|i| {
            opts.omega_min
                + (opts.omega_max - opts.omega_min) * i as f64 / (opts.n_omega.max(2) - 1) as f64
        })
        .collect();
    let mut intensity = half_line_transform(c, dt, window_tau, &omega);
    let unresolved = {
        let tail = c.last().map(|z| z.norm()).unwrap_or(0.0) * (-opts.t_max / window_tau).exp();
        tail > 0.01 * c[0].norm().max(1e-300)
    };
    let mut normalized = false;
    if opts.normalize {
        let peak = intensity.iter().cloned().fold(f64::MIN, f64::max);
        if peak > 0.0 {
            for v in intensity.iter_mut() {
                *v /= peak;
            }
            normalized = true;
        }
    }
    SpectrumResult {
        omega,
        intensity,
        t_max: opts.t_max,
        dt,
        window_tau,
        normalized,
        unresolved_linewidth: unresolved,
    }
}

/// Absorption spectrum from the ground state: the initial condition is
/// the bra-side excited block `rho_S(0) mu^-` with all ADOs zero.
pub fn absorption_spectrum(
    engine: &DenseEngine,
    rho_ground: &Array2<C64>,
    opts: &SpectrumOpts,
) -> Result<(SpectrumResult, Vec<C64>)> {
    let mu = engine
        .model
        .dipole
        .as_ref()
        .ok_or_else(|| CoreError::Config("absorption needs a dipole operator".into()))?;
    let mu_minus = dipole_lowering(mu);
    let sigma0 = rho_ground.dot(&mu_minus);
    if sigma0.iter().map(|z| z.norm()).sum::<f64>() == 0.0 {
        return Err(CoreError::Config(
            "ground state carries no dipole amplitude (is state 0 the ground state?)".into(),
        ));
    }
    let n_steps = (opts.t_max / opts.dt).round() as usize;
    let init = engine.state_from_density(&sigma0)?;
    let c = dipole_correlation(engine, init, opts.dt, n_steps);
    Ok((finish(&c, opts, opts.dt), c))
}

/// Emission spectrum from an equilibrated hierarchy state (including its
/// converged ADOs): the dipole lowering operator is applied to every ADO
/// and the correlation is transformed as for absorption.
pub fn emission_spectrum(
    engine: &DenseEngine,
    equilibrium: &HeomState,
    opts: &SpectrumOpts,
) -> Result<(SpectrumResult, Vec<C64>)> {
    let mu = engine
        .model
        .dipole
        .as_ref()
        .ok_or_else(|| CoreError::Config("emission needs a dipole operator".into()))?;
    let mu_minus = dipole_lowering(mu);
    let mut init = equilibrium.left_multiply(&mu_minus);
    init.time = 0.0;
    if init.data.iter().map(|z| z.norm()).sum::<f64>() == 0.0 {
        return Err(CoreError::Config("equilibrium state carries no dipole amplitude".into()));
    }
    let n_steps = (opts.t_max / opts.dt).round() as usize;
    let c = dipole_correlation(engine, init, opts.dt, n_steps);
    Ok((finish(&c, opts, opts.dt), c))
}

/// Location of the intensity maximum (grid resolution).
pub fn peak_position(r: &SpectrumResult) -> f64 {
    let mut best = (0usize, f64::MIN);
    for (i, &v) in r.intensity.iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    r.omega[best.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_of_pure_phase_peaks_at_its_frequency() {
        let dt = 0.5;
        let w0 = 0.35;
        let c: Vec<C64> = (0..4000)
            .map(|j| C64::new(0.0, -w0 * j as f64 * dt).exp())
            .collect();
        let omega: Vec<f64> = (0..400).map(|i| 0.2 + 0.3 * i as f64 / 399.0).collect();
        let s = half_line_transform(&c, dt, 500.0, &omega);
        let peak = omega[s
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0];
        assert!((peak - w0).abs() < 2e-3, "peak {peak}");
    }

    #[test]
    fn lowering_operator_keeps_ground_row() {
        let n = 3;
        let mu = Array2::from_shape_fn((n, n), |(i, j)| {
            if i != j {
                C64::new(1.0 + (i + j) as f64, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let m = dipole_lowering(&mu);
        assert_eq!(m[(0, 1)], mu[(0, 1)]);
        assert_eq!(m[(0, 2)], mu[(0, 2)]);
        assert_eq!(m[(1, 0)], C64::new(0.0, 0.0));
        assert_eq!(m[(2, 1)], C64::new(0.0, 0.0));
    }
}
