//! Mixed-integrator propagation of a TT hierarchy state: fixed-rank
//! projector-splitting steps, with a periodic TT-algebra Runge-Kutta step
//! that lets the bond ranks grow (followed by rounding), plus trace and
//! norm watchdogs.

use ndarray::Array2;

use heom_tt::TtVector;

use crate::ksl::{ksl_step, KslOptions};
use crate::system::SystemModel;
use crate::ttheom::{reduce_tt, TtLiouvillian};
use crate::{C64, Result};

#[derive(Debug, Clone, Copy)]
pub struct RankPolicy {
    /// Rounding accuracy for the rank-growth steps.
    pub eps: f64,
    /// Hard rank cap for the state.
    pub rmax: usize,
    /// Every `rank_refresh`-th step runs in TT algebra with rounding so
    /// ranks can grow; `None` disables refreshes (pure fixed-rank KSL).
    pub rank_refresh: Option<usize>,
    /// Zero-pad the initial interior bonds up to this rank.
    pub initial_rank: Option<usize>,
    /// RK4 substeps inside each local KSL equation.
    pub substeps: usize,
}

impl Default for RankPolicy {
    fn default() -> Self {
        RankPolicy { eps: 1e-10, rmax: 64, rank_refresh: Some(10), initial_rank: None, substeps: 4 }
    }
}

/// Per-step trajectory record.
#[derive(Debug, Clone)]
pub struct TtSample {
    pub time: f64,
    pub rho: Array2<C64>,
    pub trace: C64,
    pub max_rank: usize,
    pub norm: f64,
}

#[derive(Debug, Clone, Default)]
pub struct TtRunReport {
    /// Rounding hit the state rank cap at least once.
    pub rank_capped: bool,
    pub max_rank_seen: usize,
    pub max_trace_drift: f64,
    pub max_norm_drift: f64,
}

/// One TT-algebra RK4 step with rounding after every addition.
pub fn rk4_tt_step(
    liou: &heom_tt::TtOperator,
    v: &TtVector,
    dt: f64,
    eps: f64,
    rmax: usize,
) -> Result<(TtVector, bool)> {
    let mut capped = false;
    fn stage(
        liou: &heom_tt::TtOperator,
        x: &TtVector,
        eps: f64,
        rmax: usize,
        capped: &mut bool,
    ) -> Result<TtVector> {
        let mut y = liou.apply(x)?;
        *capped |= y.round(eps, rmax)?.rank_capped;
        Ok(y)
    }
    let k1 = stage(liou, v, eps, rmax, &mut capped)?;
    let mut v2 = v.clone();
    capped |= v2.axpy_round(C64::new(0.5 * dt, 0.0), &k1, eps, rmax)?.rank_capped;
    let k2 = stage(liou, &v2, eps, rmax, &mut capped)?;
    let mut v3 = v.clone();
    capped |= v3.axpy_round(C64::new(0.5 * dt, 0.0), &k2, eps, rmax)?.rank_capped;
    let k3 = stage(liou, &v3, eps, rmax, &mut capped)?;
    let mut v4 = v.clone();
    capped |= v4.axpy_round(C64::new(dt, 0.0), &k3, eps, rmax)?.rank_capped;
    let k4 = stage(liou, &v4, eps, rmax, &mut capped)?;

    let mut out = v.clone();
    capped |= out.axpy_round(C64::new(dt / 6.0, 0.0), &k1, eps, rmax)?.rank_capped;
    capped |= out.axpy_round(C64::new(dt / 3.0, 0.0), &k2, eps, rmax)?.rank_capped;
    capped |= out.axpy_round(C64::new(dt / 3.0, 0.0), &k3, eps, rmax)?.rank_capped;
    capped |= out.axpy_round(C64::new(dt / 6.0, 0.0), &k4, eps, rmax)?.rank_capped;
    Ok((out, capped))
}

/// Propagate `n_steps` of size `dt` from `t0`. A time-dependent
/// Hamiltonian triggers reassembly of the system part at each step
/// midpoint. `sink` sees a sample after every step.
pub fn propagate_tt(
    liou: &TtLiouvillian,
    model: &SystemModel,
    v: TtVector,
    t0: f64,
    dt: f64,
    n_steps: usize,
    policy: &RankPolicy,
    mut sink: impl FnMut(&TtSample),
) -> Result<(TtVector, TtRunReport)> {
    let mut v = v;
    if let Some(r0) = policy.initial_rank {
        let targets = vec![r0.min(policy.rmax); v.num_modes() - 1];
        v.pad_ranks(&targets);
    }
    let opts = KslOptions { substeps: policy.substeps };
    let mut report = TtRunReport::default();
    let trace0 = {
        let rho = reduce_tt(&v);
        (0..rho.nrows()).map(|i| rho[(i, i)]).sum::<C64>()
    };
    let norm0 = v.norm();
    let time_dependent = model.is_time_dependent();

    for step in 0..n_steps {
        let t = t0 + step as f64 * dt;
        let op_owned;
        let op = if time_dependent {
            op_owned = liou.with_h_eff(&model.h_eff(t + 0.5 * dt))?;
            &op_owned
        } else {
            &liou.op
        };
        let refresh = matches!(policy.rank_refresh, Some(r) if r > 0 && (step + 1) % r == 0);
        if refresh {
            let (next, capped) = rk4_tt_step(op, &v, dt, policy.eps, policy.rmax)?;
            report.rank_capped |= capped;
            v = next;
        } else {
            ksl_step(op, &mut v, dt, &opts)?;
        }
        let rho = reduce_tt(&v);
        let trace = (0..rho.nrows()).map(|i| rho[(i, i)]).sum::<C64>();
        let norm = v.norm();
        let max_rank = v.max_rank();
        report.max_rank_seen = report.max_rank_seen.max(max_rank);
        report.max_trace_drift = report.max_trace_drift.max((trace - trace0).norm());
        if norm0 > 0.0 {
            report.max_norm_drift = report.max_norm_drift.max((norm - norm0).abs() / norm0);
        }
        sink(&TtSample { time: t0 + (step + 1) as f64 * dt, rho, trace, max_rank, norm });
    }
    Ok((v, report))
}
