//! The reduced system: Hamiltonian, renormalization term, dipole and
//! pulsed field, and the attached baths with their correlation
//! expansions.

use ndarray::Array2;
use ndarray_linalg::Eigh;

use crate::bath::CorrelationExpansion;
use crate::{C64, CoreError, Result};

/// A sin^2-envelope pulse defined through its vector potential so that
/// the field integrates to zero over the pulse:
/// `A(t) = (E0/w) sin^2(pi (t-ti)/tau) sin(w (t-ti))`, `E = -dA/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseField {
    pub amplitude: f64,
    pub carrier: f64,
    pub duration: f64,
    pub t_start: f64,
}

impl PulseField {
    pub fn vector_potential(&self, t: f64) -> f64 {
        let s = t - self.t_start;
        if s < 0.0 || s > self.duration {
            return 0.0;
        }
        let env = (std::f64::consts::PI * s / self.duration).sin().powi(2);
        (self.amplitude / self.carrier) * env * (self.carrier * s).sin()
    }

    /// E(t) = -dA/dt.
    pub fn evaluate(&self, t: f64) -> f64 {
        let s = t - self.t_start;
        if s < 0.0 || s > self.duration {
            return 0.0;
        }
        let pi = std::f64::consts::PI;
        let phase = pi * s / self.duration;
        let denv = 2.0 * phase.sin() * phase.cos() * pi / self.duration;
        let env = phase.sin().powi(2);
        -(self.amplitude / self.carrier)
            * (denv * (self.carrier * s).sin() + env * self.carrier * (self.carrier * s).cos())
    }
}

/// Amplitude giving a pi pulse for a sin^2 envelope: E0 = 2 pi / (mu tau).
pub fn pi_pulse_amplitude(dipole_element: f64, duration: f64) -> f64 {
    2.0 * std::f64::consts::PI / (dipole_element * duration)
}

/// One bath attached to the system: the Hermitian coupling operator and
/// the exponential expansion of its correlation function.
#[derive(Debug, Clone)]
pub struct SystemBath {
    pub coupling: Array2<C64>,
    pub expansion: CorrelationExpansion,
}

/// Location of one artificial decay mode in the flattened mode list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeRef {
    pub bath: usize,
    pub term: usize,
}

#[derive(Debug, Clone)]
pub struct SystemModel {
    hamiltonian: Array2<C64>,
    renormalization: Array2<C64>,
    pub dipole: Option<Array2<C64>>,
    pub field: Option<PulseField>,
    pub baths: Vec<SystemBath>,
}

const HERM_TOL: f64 = 1e-12;

fn check_hermitian(m: &Array2<C64>, what: &str) -> Result<()> {
    let (r, c) = m.dim();
    if r != c {
        return Err(CoreError::Config(format!("{what} must be square")));
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..r {
        for j in i..r {
            if (m[(i, j)] - m[(j, i)].conj()).norm() > HERM_TOL * scale {
                return Err(CoreError::Config(format!("{what} is not Hermitian")));
            }
        }
    }
    Ok(())
}

impl SystemModel {
    pub fn new(hamiltonian: Array2<C64>, baths: Vec<SystemBath>) -> Result<Self> {
        check_hermitian(&hamiltonian, "system Hamiltonian")?;
        let n = hamiltonian.nrows();
        for (i, b) in baths.iter().enumerate() {
            check_hermitian(&b.coupling, &format!("coupling operator of bath {i}"))?;
            if b.coupling.nrows() != n {
                return Err(CoreError::Config(format!(
                    "coupling operator of bath {i} has wrong dimension"
                )));
            }
        }
        Ok(SystemModel {
            renormalization: Array2::zeros((n, n)),
            hamiltonian,
            dipole: None,
            field: None,
            baths,
        })
    }

    pub fn with_renormalization(mut self, h_ren: Array2<C64>) -> Result<Self> {
        check_hermitian(&h_ren, "renormalization term")?;
        if h_ren.nrows() != self.dim() {
            return Err(CoreError::Config("renormalization term has wrong dimension".into()));
        }
        self.renormalization = h_ren;
        Ok(self)
    }

    /// Counterterm `sum_b lambda_b S_b^2` from per-bath reorganization
    /// energies.
    pub fn with_auto_renormalization(mut self, lambdas: &[f64]) -> Result<Self> {
        if lambdas.len() != self.baths.len() {
            return Err(CoreError::Config("one lambda per bath required".into()));
        }
        let n = self.dim();
        let mut h = Array2::<C64>::zeros((n, n));
        for (b, &lam) in self.baths.iter().zip(lambdas) {
            h = h + b.coupling.dot(&b.coupling).mapv(|z| z * lam);
        }
        self.renormalization = h;
        Ok(self)
    }

    pub fn with_dipole(mut self, mu: Array2<C64>) -> Result<Self> {
        check_hermitian(&mu, "dipole operator")?;
        if mu.nrows() != self.dim() {
            return Err(CoreError::Config("dipole operator has wrong dimension".into()));
        }
        self.dipole = Some(mu);
        Ok(self)
    }

    pub fn with_field(mut self, field: PulseField) -> Result<Self> {
        if self.dipole.is_none() {
            return Err(CoreError::Config("a pulsed field needs a dipole operator".into()));
        }
        self.field = Some(field);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.nrows()
    }

    pub fn bare_hamiltonian(&self) -> &Array2<C64> {
        &self.hamiltonian
    }

    pub fn renormalization(&self) -> &Array2<C64> {
        &self.renormalization
    }

    /// Static part H_S + H_ren.
    pub fn h_static(&self) -> Array2<C64> {
        &self.hamiltonian + &self.renormalization
    }

    /// Effective Hamiltonian at time t, including the dipole-field term.
    pub fn h_eff(&self, t: f64) -> Array2<C64> {
        let mut h = self.h_static();
        if let (Some(mu), Some(field)) = (&self.dipole, &self.field) {
            let e = field.evaluate(t);
            if e != 0.0 {
                h = h - mu.mapv(|z| z * e);
            }
        }
        h
    }

    pub fn is_time_dependent(&self) -> bool {
        self.field.is_some() && self.dipole.is_some()
    }

    /// Total artificial decay mode count K = sum_b K_b.
    pub fn total_modes(&self) -> usize {
        self.baths.iter().map(|b| b.expansion.len()).sum()
    }

    /// Flattened (bath, term) list in bath-major order; the hierarchy mode
    /// k corresponds to `mode_table()[k]`.
    pub fn mode_table(&self) -> Vec<ModeRef> {
        let mut out = Vec::with_capacity(self.total_modes());
        for (b, bath) in self.baths.iter().enumerate() {
            for k in 0..bath.expansion.len() {
                out.push(ModeRef { bath: b, term: k });
            }
        }
        out
    }

    /// Eigenvalues (ascending) and eigenvectors of the static Hamiltonian,
    /// with a deterministic phase: the largest-magnitude component of each
    /// eigenvector is made real positive.
    pub fn eigenbasis(&self) -> Result<(Vec<f64>, Array2<C64>)> {
        let h = self.h_static();
        let (vals, mut vecs) = h
            .eigh(ndarray_linalg::UPLO::Lower)
            .map_err(|e| CoreError::Numerics(format!("eigendecomposition failed: {e}")))?;
        for j in 0..vecs.ncols() {
            let col = vecs.column(j);
            let (mut best, mut mag) = (0usize, -1.0f64);
            for (i, z) in col.iter().enumerate() {
                if z.norm_sqr() > mag {
                    mag = z.norm_sqr();
                    best = i;
                }
            }
            let pivot = col[best];
            if pivot.norm() > 0.0 {
                let phase = (pivot / pivot.norm()).conj();
                for i in 0..vecs.nrows() {
                    vecs[(i, j)] *= phase;
                }
            }
        }
        Ok((vals.to_vec(), vecs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::adaptive_quad;

    #[test]
    fn pulse_area_is_zero() {
        let f = PulseField { amplitude: 3.0e-3, carrier: 0.05, duration: 992.0, t_start: 0.0 };
        let area = adaptive_quad(|t| f.evaluate(t), 0.0, 992.0, 1e-12, 1e-16, 4000).unwrap();
        assert!(area.abs() < 1e-12, "area {area}");
        // and A vanishes at both ends
        assert!(f.vector_potential(0.0).abs() < 1e-15);
        assert!(f.vector_potential(992.0).abs() < 1e-12);
    }

    #[test]
    fn field_is_derivative_of_potential() {
        let f = PulseField { amplitude: 1.0e-3, carrier: 0.06, duration: 800.0, t_start: 10.0 };
        for &t in &[50.0, 210.0, 555.5, 780.0] {
            let h = 1e-4;
            let num = -(f.vector_potential(t + h) - f.vector_potential(t - h)) / (2.0 * h);
            assert!((f.evaluate(t) - num).abs() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_hermitian_hamiltonian() {
        let h = Array2::from_shape_vec(
            (2, 2),
            vec![
                C64::new(1.0, 0.0),
                C64::new(0.2, 0.0),
                C64::new(0.3, 0.0),
                C64::new(0.5, 0.0),
            ],
        )
        .unwrap();
        assert!(SystemModel::new(h, vec![]).is_err());
    }

    #[test]
    fn eigenbasis_phase_is_deterministic() {
        let h = Array2::from_shape_vec(
            (2, 2),
            vec![
                C64::new(1.0, 0.0),
                C64::new(0.0, 0.2),
                C64::new(0.0, -0.2),
                C64::new(0.5, 0.0),
            ],
        )
        .unwrap();
        let m = SystemModel::new(h, vec![]).unwrap();
        let (vals, vecs) = m.eigenbasis().unwrap();
        assert!(vals[0] < vals[1]);
        for j in 0..2 {
            let col = vecs.column(j);
            let (mut best, mut mag) = (0usize, -1.0f64);
            for (i, z) in col.iter().enumerate() {
                if z.norm_sqr() > mag {
                    mag = z.norm_sqr();
                    best = i;
                }
            }
            assert!(col[best].im.abs() < 1e-14);
            assert!(col[best].re > 0.0);
        }
    }
}
