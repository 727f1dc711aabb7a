//! Physical readout: reduced density matrices, the generator-basis
//! toolkit for dynamical-map diagnostics (state-space volume, canonical
//! decay rates, Choi matrix).

use std::sync::Arc;

use ndarray::Array2;
use ndarray_linalg::{Determinant, Eigh};
use rayon::prelude::*;

use crate::dense::{DenseEngine, HeomState};
use crate::hierarchy::{HierarchySpace, Truncation};
use crate::system::SystemModel;
use crate::ttheom::reduce_tt;
use crate::{C64, CoreError, Result};

/// Anything that can produce the physical reduced density matrix.
pub trait ReducedDensity {
    fn reduce(&self) -> Array2<C64>;
}

impl ReducedDensity for HeomState {
    fn reduce(&self) -> Array2<C64> {
        self.physical()
    }
}

impl ReducedDensity for heom_tt::TtVector {
    fn reduce(&self) -> Array2<C64> {
        reduce_tt(self)
    }
}

/// Orthonormal Hermitian basis of n x n matrices: the normalized identity
/// followed by the traceless generators (Pauli-type pairs for every
/// off-diagonal slot, then the diagonal ladder), normalized to
/// `Tr(G_i G_j) = delta_ij`.
pub fn generator_basis(n: usize) -> Vec<Array2<C64>> {
    let mut out = Vec::with_capacity(n * n);
    let norm = 1.0 / (n as f64).sqrt();
    out.push(Array2::from_diag_elem(n, C64::new(norm, 0.0)));
    let inv_sqrt2 = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for j in 0..n {
        for k in j + 1..n {
            let mut sym = Array2::<C64>::zeros((n, n));
            sym[(j, k)] = inv_sqrt2;
            sym[(k, j)] = inv_sqrt2;
            out.push(sym);
            let mut asym = Array2::<C64>::zeros((n, n));
            asym[(j, k)] = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
            asym[(k, j)] = C64::new(0.0, std::f64::consts::FRAC_1_SQRT_2);
            out.push(asym);
        }
    }
    for l in 1..n {
        let scale = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = Array2::<C64>::zeros((n, n));
        for m in 0..l {
            diag[(m, m)] = C64::new(scale, 0.0);
        }
        diag[(l, l)] = C64::new(-(l as f64) * scale, 0.0);
        out.push(diag);
    }
    out
}

/// Options for the map-diagnostic propagations (dense backend).
#[derive(Debug, Clone, Copy)]
pub struct MapOpts {
    pub level: usize,
    pub dt: f64,
}

fn propagate_basis_matrix(
    model: &SystemModel,
    space: &Arc<HierarchySpace>,
    g: &Array2<C64>,
    dt: f64,
    t_grid: &[f64],
) -> Result<Vec<(Array2<C64>, HeomState)>> {
    let engine = DenseEngine::new(model, Arc::clone(space))?;
    let mut state = HeomState::factorized(Arc::clone(space), g)?;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let steps = ((t - state.time) / dt).round() as usize;
        if steps > 0 {
            state = engine.propagate_rk4(state, dt, steps, |_| {});
        }
        out.push((state.physical(), state.clone()));
    }
    Ok(out)
}

/// `F_{m,n}(t) = Tr(G_m(0) G_n(t))` and the accessible-state volume
/// `V(t) = det F(t)`, from `n^2` concurrent hierarchy propagations with
/// the basis matrices as initial conditions.
pub fn f_matrix_and_volume(
    model: &SystemModel,
    opts: &MapOpts,
    t_grid: &[f64],
) -> Result<Vec<(f64, Array2<C64>, f64)>> {
    let n = model.dim();
    let basis = generator_basis(n);
    let space = Arc::new(HierarchySpace::enumerate(
        model.total_modes(),
        Truncation::Level(opts.level),
    )?);
    let propagated: Vec<Vec<Array2<C64>>> = basis
        .par_iter()
        .map(|g| {
            propagate_basis_matrix(model, &space, g, opts.dt, t_grid)
                .map(|v| v.into_iter().map(|(rho, _)| rho).collect())
        })
        .collect::<Result<_>>()?;
    let nn = n * n;
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut f = Array2::<C64>::zeros((nn, nn));
        for m in 0..nn {
            for nb in 0..nn {
                f[(m, nb)] = basis[m].dot(&propagated[nb][ti]).diag().sum();
            }
        }
        let det = f
            .det()
            .map_err(|e| CoreError::Numerics(format!("determinant: {e}")))?;
        out.push((t, f, det.re));
    }
    Ok(out)
}

/// Decoherence matrix `D_ij(t) = sum_m Tr[G_m G_i dG_m(t)/dt G_j]`
/// restricted to the traceless generators and Hermitized; its eigenvalues
/// are the canonical decay rates. Negative rates witness information
/// backflow.
pub fn canonical_rates(
    model: &SystemModel,
    opts: &MapOpts,
    t_grid: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = model.dim();
    let basis = generator_basis(n);
    let space = Arc::new(HierarchySpace::enumerate(
        model.total_modes(),
        Truncation::Level(opts.level),
    )?);
    // For every basis matrix, the physical block of the generator image
    // at each grid time.
    let derivs: Vec<Vec<Array2<C64>>> = basis
        .par_iter()
        .map(|g| -> Result<Vec<Array2<C64>>> {
            let engine = DenseEngine::new(model, Arc::clone(&space))?;
            let states = propagate_basis_matrix(model, &space, g, opts.dt, t_grid)?;
            states
                .into_iter()
                .map(|(_, full)| {
                    let mut out = full.zeros_like_state();
                    engine.rhs(full.time, &full, &mut out);
                    Ok(out.physical())
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let nn = n * n;
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut d = Array2::<C64>::zeros((nn - 1, nn - 1));
        for i in 1..nn {
            for j in 1..nn {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..nn {
                    acc += basis[m]
                        .dot(&basis[i])
                        .dot(&derivs[m][ti])
                        .dot(&basis[j])
                        .diag()
                        .sum();
                }
                d[(i - 1, j - 1)] = acc;
            }
        }
        // Hermitize: the generator preserves Hermiticity, so the skew part
        // is numerical noise plus residual Hamiltonian contributions.
        let dh = (&d + &d.t().mapv(|z| z.conj())).mapv(|z| 0.5 * z);
        let (rates, _) = dh
            .eigh(ndarray_linalg::UPLO::Lower)
            .map_err(|e| CoreError::Numerics(format!("rate eigenvalues: {e}")))?;
        out.push((t, rates.to_vec()));
    }
    Ok(out)
}

/// Choi matrix of the dynamical map at the grid times, from propagating
/// the n^2 projector initial conditions |j><k| (Hermitian-pair reduced:
/// the image of |k><j| is the dagger of the image of |j><k|). Returns the
/// matrix and its eigenvalues; positivity of the spectrum is complete
/// positivity of the map.
pub fn choi_matrix(
    model: &SystemModel,
    opts: &MapOpts,
    t_grid: &[f64],
) -> Result<Vec<(f64, Array2<C64>, Vec<f64>)>> {
    let n = model.dim();
    let space = Arc::new(HierarchySpace::enumerate(
        model.total_modes(),
        Truncation::Level(opts.level),
    )?);
    let mut pairs = Vec::new();
    for j in 0..n {
        for k in j..n {
            pairs.push((j, k));
        }
    }
    let propagated: Vec<((usize, usize), Vec<Array2<C64>>)> = pairs
        .par_iter()
        .map(|&(j, k)| {
            let mut e = Array2::<C64>::zeros((n, n));
            e[(j, k)] = C64::new(1.0, 0.0);
            propagate_basis_matrix(model, &space, &e, opts.dt, t_grid)
                .map(|v| ((j, k), v.into_iter().map(|(rho, _)| rho).collect()))
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(t_grid.len());
    for (ti, &t) in t_grid.iter().enumerate() {
        let mut choi = Array2::<C64>::zeros((n * n, n * n));
        for ((j, k), traj) in &propagated {
            let img = &traj[ti];
            for a in 0..n {
                for b in 0..n {
                    choi[(j * n + a, k * n + b)] = img[(a, b)];
                    if j != k {
                        // image of |k><j| is the dagger of the image of |j><k|
                        choi[(k * n + a, j * n + b)] = img[(b, a)].conj();
                    }
                }
            }
        }
        let (vals, _) = choi
            .eigh(ndarray_linalg::UPLO::Lower)
            .map_err(|e| CoreError::Numerics(format!("Choi eigenvalues: {e}")))?;
        out.push((t, choi, vals.to_vec()));
    }
    Ok(out)
}

impl HeomState {
    pub(crate) fn zeros_like_state(&self) -> HeomState {
        use crate::integrator::OdeState;
        self.zeros_like()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_is_orthonormal_and_complete() {
        for n in 2..=4 {
            let basis = generator_basis(n);
            assert_eq!(basis.len(), n * n);
            for (i, gi) in basis.iter().enumerate() {
                // Hermitian
                for a in 0..n {
                    for b in 0..n {
                        assert!((gi[(a, b)] - gi[(b, a)].conj()).norm() < 1e-14);
                    }
                }
                // traceless except G_0
                let tr: C64 = gi.diag().sum();
                if i == 0 {
                    assert!((tr - C64::new((n as f64).sqrt(), 0.0)).norm() < 1e-14);
                } else {
                    assert!(tr.norm() < 1e-14);
                }
                for (j, gj) in basis.iter().enumerate() {
                    let olap: C64 = gi.dot(gj).diag().sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!(
                        (olap - C64::new(want, 0.0)).norm() < 1e-13,
                        "({i},{j}) overlap {olap}"
                    );
                }
            }
        }
    }

    #[test]
    fn pauli_basis_for_two_states() {
        let basis = generator_basis(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        // sigma_x / sqrt(2)
        assert!((basis[1][(0, 1)] - C64::new(s, 0.0)).norm() < 1e-15);
        // sigma_y / sqrt(2)
        assert!((basis[2][(0, 1)] - C64::new(0.0, -s)).norm() < 1e-15);
        // sigma_z / sqrt(2)
        assert!((basis[3][(0, 0)] - C64::new(s, 0.0)).norm() < 1e-15);
        assert!((basis[3][(1, 1)] - C64::new(-s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn random_hermitian_reconstructed_from_expansion() {
        let n = 3;
        let basis = generator_basis(n);
        let mut h = Array2::<C64>::zeros((n, n));
        let vals = [0.3, -0.7, 1.1, 0.2, -0.4, 0.9];
        let mut it = vals.iter().cycle();
        for a in 0..n {
            for b in a..n {
                if a == b {
                    h[(a, a)] = C64::new(*it.next().unwrap(), 0.0);
                } else {
                    let re = *it.next().unwrap();
                    let im = *it.next().unwrap();
                    h[(a, b)] = C64::new(re, im);
                    h[(b, a)] = C64::new(re, -im);
                }
            }
        }
        let mut rec = Array2::<C64>::zeros((n, n));
        for g in &basis {
            let coef: C64 = g.dot(&h).diag().sum();
            rec = rec + g.mapv(|z| z * coef);
        }
        for a in 0..n {
            for b in 0..n {
                assert!((rec[(a, b)] - h[(a, b)]).norm() < 1e-13);
            }
        }
    }
}
