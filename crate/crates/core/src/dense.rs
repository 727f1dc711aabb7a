//! Reference dense propagator for the full hierarchy of auxiliary density
//! operators, plus its second-order (single-excitation) restriction.
//!
//! For each multi-index n the generator reads
//!
//! ```text
//! d/dt rho_n = -i[H, rho_n] + i sum_k n_k g_k rho_n
//!              - i sum_b [S_b, sum_{k in b} rho_{n_k^+}]
//!              - i sum_k n_k (a_k S rho_{n_k^-} - at_k rho_{n_k^-} S)
//! ```
//!
//! with hard-zero closure past the truncation boundary. The sign
//! convention matches the superoperator construction in [`crate::ttheom`]
//! exactly, so the two engines agree elementwise, not just on the
//! physical block.

use std::ops::Range;
use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::Eigh;
use rayon::prelude::*;

use crate::hierarchy::{HierarchySpace, Truncation};
use crate::integrator::{self, AdaptiveOpts, OdeState};
use crate::smallmat;
use crate::system::SystemModel;
use crate::{C64, CoreError, Result};

/// Full hierarchy state: one n x n matrix per multi-index, stored
/// contiguously in hierarchy order (row-major matrices).
#[derive(Debug, Clone)]
pub struct HeomState {
    pub space: Arc<HierarchySpace>,
    pub dim: usize,
    pub data: Vec<C64>,
    pub time: f64,
}

impl HeomState {
    /// Factorized initial condition: the physical block carries `rho`,
    /// every ADO is zero.
    pub fn factorized(space: Arc<HierarchySpace>, rho: &Array2<C64>) -> Result<Self> {
        let n = rho.nrows();
        if rho.ncols() != n {
            return Err(CoreError::Config("density matrix must be square".into()));
        }
        let zero_pos = space
            .position(&vec![0u8; space.modes()])
            .ok_or_else(|| CoreError::Config("hierarchy lacks the zero index".into()))?;
        let mut data = vec![C64::new(0.0, 0.0); space.len() * n * n];
        for i in 0..n {
            for j in 0..n {
                data[zero_pos * n * n + i * n + j] = rho[(i, j)];
            }
        }
        Ok(HeomState { space, dim: n, data, time: 0.0 })
    }

    pub fn ado(&self, pos: usize) -> &[C64] {
        let nn = self.dim * self.dim;
        &self.data[pos * nn..(pos + 1) * nn]
    }

    pub fn ado_mut(&mut self, pos: usize) -> &mut [C64] {
        let nn = self.dim * self.dim;
        &mut self.data[pos * nn..(pos + 1) * nn]
    }

    /// The physical reduced density matrix rho_{00..0}.
    pub fn physical(&self) -> Array2<C64> {
        let zero_pos = self.space.position(&vec![0u8; self.space.modes()]).expect("zero index");
        let n = self.dim;
        Array2::from_shape_fn((n, n), |(i, j)| self.ado(zero_pos)[i * n + j])
    }

    pub fn set_physical(&mut self, rho: &Array2<C64>) {
        let zero_pos = self.space.position(&vec![0u8; self.space.modes()]).expect("zero index");
        let n = self.dim;
        for i in 0..n {
            for j in 0..n {
                self.ado_mut(zero_pos)[i * n + j] = rho[(i, j)];
            }
        }
    }

    pub fn trace(&self) -> C64 {
        let zero_pos = self.space.position(&vec![0u8; self.space.modes()]).expect("zero index");
        smallmat::trace(self.ado(zero_pos), self.dim)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let zero_pos = self.space.position(&vec![0u8; self.space.modes()]).expect("zero index");
        smallmat::hermiticity_defect(self.ado(zero_pos), self.dim)
    }

    /// Smallest eigenvalue of the physical block; negative values beyond
    /// truncation noise witness positivity loss (monitored, not asserted).
    pub fn min_population_eig(&self) -> Result<f64> {
        let rho = self.physical();
        let (vals, _) = rho
            .eigh(ndarray_linalg::UPLO::Lower)
            .map_err(|e| CoreError::Numerics(format!("eigh: {e}")))?;
        Ok(vals.iter().cloned().fold(f64::INFINITY, f64::min))
    }

    /// Traces of the singly-excited ADOs in mode order: the collective
    /// bath-mode expectation readout.
    pub fn level_one_traces(&self) -> Vec<C64> {
        self.space
            .level_one_positions()
            .iter()
            .map(|&p| smallmat::trace(self.ado(p), self.dim))
            .collect()
    }

    /// Left-multiply every ADO by `op` (dipole application for response
    /// functions).
    pub fn left_multiply(&self, op: &Array2<C64>) -> HeomState {
        let n = self.dim;
        let flat: Vec<C64> = op.iter().cloned().collect();
        let mut out = self.clone();
        let nn = n * n;
        for pos in 0..self.space.len() {
            let dst = &mut out.data[pos * nn..(pos + 1) * nn];
            smallmat::zero(dst);
            smallmat::mul_acc(dst, &flat, self.ado(pos), C64::new(1.0, 0.0), n);
        }
        out
    }
}

impl OdeState for HeomState {
    fn zeros_like(&self) -> Self {
        HeomState {
            space: Arc::clone(&self.space),
            dim: self.dim,
            data: vec![C64::new(0.0, 0.0); self.data.len()],
            time: self.time,
        }
    }

    fn scaled_add(&mut self, a: f64, other: &Self) {
        for (x, y) in self.data.iter_mut().zip(&other.data) {
            *x += a * y;
        }
    }

    fn error_ratio(&self, err: &Self, other: &Self, atol: f64, rtol: f64) -> f64 {
        err.data
            .iter()
            .zip(self.data.iter().zip(&other.data))
            .map(|(e, (a, b))| e.norm() / (atol + rtol * a.norm().max(b.norm())))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
struct ModeData {
    bath: usize,
    amp: C64,
    amp_conj: C64,
    exponent: C64,
}

/// Precomputed dense-engine context for one (model, space) pair.
pub struct DenseEngine<'m> {
    pub model: &'m SystemModel,
    pub space: Arc<HierarchySpace>,
    s_flat: Vec<Vec<C64>>,
    modes: Vec<ModeData>,
    bath_modes: Vec<Range<usize>>,
    h_static_flat: Vec<C64>,
}

const PAR_BLOCK: usize = 64;

impl<'m> DenseEngine<'m> {
    pub fn new(model: &'m SystemModel, space: Arc<HierarchySpace>) -> Result<Self> {
        let k_total = model.total_modes();
        if k_total != space.modes() {
            return Err(CoreError::Config(format!(
                "hierarchy has {} modes but the model defines {k_total}",
                space.modes()
            )));
        }
        let mut modes = Vec::with_capacity(k_total);
        let mut bath_modes = Vec::with_capacity(model.baths.len());
        let mut start = 0usize;
        for (b, bath) in model.baths.iter().enumerate() {
            for term in &bath.expansion.terms {
                modes.push(ModeData {
                    bath: b,
                    amp: term.amp,
                    amp_conj: term.amp_conj,
                    exponent: term.exponent,
                });
            }
            bath_modes.push(start..start + bath.expansion.len());
            start += bath.expansion.len();
        }
        let s_flat = model
            .baths
            .iter()
            .map(|b| b.coupling.iter().cloned().collect())
            .collect();
        let h_static_flat = model.h_static().iter().cloned().collect();
        Ok(DenseEngine { model, space, s_flat, modes, bath_modes, h_static_flat })
    }

    pub fn state_from_density(&self, rho: &Array2<C64>) -> Result<HeomState> {
        HeomState::factorized(Arc::clone(&self.space), rho)
    }

    fn h_flat_at(&self, t: f64) -> Vec<C64> {
        if self.model.is_time_dependent() {
            self.model.h_eff(t).iter().cloned().collect()
        } else {
            self.h_static_flat.clone()
        }
    }

    /// Full-hierarchy right-hand side.
    pub fn rhs(&self, t: f64, state: &HeomState, out: &mut HeomState) {
        let n = state.dim;
        let nn = n * n;
        let h = self.h_flat_at(t);
        let count = self.space.len();
        let space = &*self.space;
        let data = &state.data;
        let minus_i = C64::new(0.0, -1.0);
        let plus_i = C64::new(0.0, 1.0);

        out.data
            .par_chunks_mut(nn * PAR_BLOCK)
            .enumerate()
            .for_each(|(blk, out_chunk)| {
                let mut upper = vec![C64::new(0.0, 0.0); nn];
                let first = blk * PAR_BLOCK;
                for (local, dst) in out_chunk.chunks_mut(nn).enumerate() {
                    let pos = first + local;
                    if pos >= count {
                        break;
                    }
                    let rho_n = &data[pos * nn..(pos + 1) * nn];
                    let idx = space.index(pos);
                    smallmat::zero(dst);
                    // system Liouvillian
                    smallmat::commutator_acc(dst, &h, rho_n, minus_i, n);
                    // damping: + i (sum_k n_k g_k) rho_n
                    let mut damp = C64::new(0.0, 0.0);
                    for (k, m) in self.modes.iter().enumerate() {
                        let nk = idx[k] as f64;
                        if nk != 0.0 {
                            damp += nk * m.exponent;
                        }
                    }
                    if damp != C64::new(0.0, 0.0) {
                        smallmat::axpy(dst, plus_i * damp, rho_n);
                    }
                    for (b, range) in self.bath_modes.iter().enumerate() {
                        let s = &self.s_flat[b];
                        // upward coupling: -i [S_b, sum_{k in b} rho_{n_k^+}]
                        smallmat::zero(&mut upper);
                        let mut any = false;
                        for k in range.clone() {
                            if let Some(up) = space.raise(pos, k) {
                                smallmat::axpy(
                                    &mut upper,
                                    C64::new(1.0, 0.0),
                                    &data[up * nn..(up + 1) * nn],
                                );
                                any = true;
                            }
                        }
                        if any {
                            smallmat::commutator_acc(dst, s, &upper, minus_i, n);
                        }
                        // downward coupling:
                        // -i n_k (a_k S rho_{n_k^-} - at_k rho_{n_k^-} S)
                        for k in range.clone() {
                            let nk = idx[k] as f64;
                            if nk == 0.0 {
                                continue;
                            }
                            if let Some(down) = space.lower(pos, k) {
                                let rho_d = &data[down * nn..(down + 1) * nn];
                                let m = &self.modes[k];
                                smallmat::mul_acc(dst, s, rho_d, minus_i * nk * m.amp, n);
                                smallmat::mul_acc(dst, rho_d, s, plus_i * nk * m.amp_conj, n);
                            }
                        }
                    }
                }
            });
    }

    /// Second-order (time-convolution) generator: the hierarchy restricted
    /// to single excitations, with unit occupation weights. Requires a
    /// level-1 space; coincides elementwise with [`Self::rhs`] there.
    pub fn rhs_tc2(&self, t: f64, state: &HeomState, out: &mut HeomState) -> Result<()> {
        if !matches!(self.space.truncation(), Truncation::Level(1)) {
            return Err(CoreError::Config(
                "the second-order generator needs a level-1 hierarchy".into(),
            ));
        }
        let n = state.dim;
        let nn = n * n;
        let h = self.h_flat_at(t);
        let minus_i = C64::new(0.0, -1.0);
        let plus_i = C64::new(0.0, 1.0);
        let zero_pos = self.space.position(&vec![0u8; self.space.modes()]).unwrap();
        let rho_s = state.ado(zero_pos);

        for v in out.data.iter_mut() {
            *v = C64::new(0.0, 0.0);
        }
        // physical block
        {
            let mut upper = vec![C64::new(0.0, 0.0); nn];
            let mut dst = vec![C64::new(0.0, 0.0); nn];
            smallmat::commutator_acc(&mut dst, &h, rho_s, minus_i, n);
            for (b, range) in self.bath_modes.iter().enumerate() {
                smallmat::zero(&mut upper);
                for k in range.clone() {
                    let p = self.space.raise(zero_pos, k).expect("level-1 neighbor");
                    smallmat::axpy(&mut upper, C64::new(1.0, 0.0), state.ado(p));
                }
                smallmat::commutator_acc(&mut dst, &self.s_flat[b], &upper, minus_i, n);
            }
            out.ado_mut(zero_pos).copy_from_slice(&dst);
        }
        // single-excitation blocks
        for (k, m) in self.modes.iter().enumerate() {
            let pos = self.space.raise(zero_pos, k).expect("level-1 neighbor");
            let rho_k = state.ado(pos);
            let s = self.s_flat[m.bath].clone();
            let mut dst = vec![C64::new(0.0, 0.0); nn];
            smallmat::commutator_acc(&mut dst, &h, rho_k, minus_i, n);
            smallmat::axpy(&mut dst, plus_i * m.exponent, rho_k);
            smallmat::mul_acc(&mut dst, &s, rho_s, minus_i * m.amp, n);
            smallmat::mul_acc(&mut dst, rho_s, &s, plus_i * m.amp_conj, n);
            out.ado_mut(pos).copy_from_slice(&dst);
        }
        Ok(())
    }

    /// Fixed-step RK4 propagation; `sink` sees every step.
    pub fn propagate_rk4(
        &self,
        state: HeomState,
        dt: f64,
        n_steps: usize,
        mut sink: impl FnMut(&HeomState),
    ) -> HeomState {
        let t0 = state.time;
        let mut y = state;
        let mut f = |t: f64, s: &HeomState, out: &mut HeomState| self.rhs(t, s, out);
        for step in 0..n_steps {
            let t = t0 + step as f64 * dt;
            y = integrator::rk4_step(&mut f, t, &y, dt);
            y.time = t0 + (step + 1) as f64 * dt;
            sink(&y);
        }
        y
    }

    /// Adaptive Cash-Karp propagation to `t_end`.
    pub fn propagate_rk45(
        &self,
        state: HeomState,
        t_end: f64,
        dt0: f64,
        opts: &AdaptiveOpts,
        mut sink: impl FnMut(&HeomState),
    ) -> Result<HeomState> {
        let t0 = state.time;
        let mut f = |t: f64, s: &HeomState, out: &mut HeomState| self.rhs(t, s, out);
        let mut wrapped = |t: f64, s: &HeomState| {
            let mut snap = s.clone();
            snap.time = t;
            sink(&snap);
        };
        let mut y = integrator::propagate_cash_karp(&mut f, t0, state, t_end, dt0, opts, &mut wrapped)?;
        y.time = t_end;
        Ok(y)
    }

    /// Dense matrix of the full generator in the Kronecker flat ordering
    /// (system super-index slowest, then mode occupations); columns are
    /// generator images of unit basis states. Oracle-scale only.
    pub fn liouvillian_matrix(&self) -> Array2<C64> {
        let n = self.model.dim();
        let nn = n * n;
        let count = self.space.len();
        let dim = nn * count;
        let template = HeomState {
            space: Arc::clone(&self.space),
            dim: n,
            data: vec![C64::new(0.0, 0.0); count * nn],
            time: 0.0,
        };
        let mut m = Array2::<C64>::zeros((dim, dim));
        let mut basis = template.clone();
        let mut out = template.zeros_like();
        for alpha in 0..nn {
            for pos in 0..count {
                let col = alpha * count + pos;
                for v in basis.data.iter_mut() {
                    *v = C64::new(0.0, 0.0);
                }
                basis.data[pos * nn + alpha] = C64::new(1.0, 0.0);
                self.rhs(0.0, &basis, &mut out);
                for a2 in 0..nn {
                    for p2 in 0..count {
                        let row = a2 * count + p2;
                        m[(row, col)] = out.data[p2 * nn + a2];
                    }
                }
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RelaxOpts {
    pub dt: f64,
    /// Steps between stationarity samples.
    pub check_every: usize,
    /// Samples in the trailing comparison window.
    pub window: usize,
    pub tol: f64,
    pub t_max: f64,
}

impl Default for RelaxOpts {
    fn default() -> Self {
        RelaxOpts { dt: 4.0, check_every: 25, window: 8, tol: 1e-7, t_max: 8.0e4 }
    }
}

/// Propagate until the populations and the collective bath-mode readout
/// (level-1 ADO traces) are stationary over a trailing window. Returns
/// the equilibrated full hierarchy state and the time it was reached.
pub fn relax_to_equilibrium(
    engine: &DenseEngine,
    state: HeomState,
    opts: &RelaxOpts,
) -> Result<(HeomState, f64)> {
    if engine.model.is_time_dependent() {
        return Err(CoreError::Config(
            "equilibration requires a time-independent Hamiltonian".into(),
        ));
    }
    let metric = |s: &HeomState| -> Vec<f64> {
        let n = s.dim;
        let rho = s.physical();
        let mut m: Vec<f64> = (0..n).map(|i| rho[(i, i)].re).collect();
        for tr in s.level_one_traces() {
            m.push(tr.re);
            m.push(tr.im);
        }
        m
    };
    let mut y = state;
    let mut window: Vec<Vec<f64>> = vec![metric(&y)];
    loop {
        y = engine.propagate_rk4(y, opts.dt, opts.check_every, |_| {});
        let m = metric(&y);
        window.push(m.clone());
        if window.len() > opts.window {
            window.remove(0);
            let newest = window.last().unwrap();
            let worst = window
                .iter()
                .flat_map(|w| w.iter().zip(newest).map(|(a, b)| (a - b).abs()))
                .fold(0.0, f64::max);
            if worst < opts.tol {
                let t_eq = y.time;
                return Ok((y, t_eq));
            }
        }
        if y.time > opts.t_max {
            return Err(CoreError::Convergence(format!(
                "no stationary state reached by t = {:.1}",
                opts.t_max
            )));
        }
    }
}
