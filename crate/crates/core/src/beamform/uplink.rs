//! UL power control: the MMSE fixed point and the power solve for frozen
//! receive filters.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{bilinear, norm_sqr, ActiveSet, CVec, Support};
use crate::error::Result;
use crate::scenario::ChannelRealization;

/// Relative change in the power vector at which the iteration stops.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-10;
/// Iteration cap; slow convergence this close to the feasibility boundary
/// is reported as infeasible.
pub const FIXED_POINT_MAX_ITERATIONS: usize = 20_000;
/// Divergence guard as a multiple of the summed per-MU budgets.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UplinkPower {
    /// Component-wise minimal powers, watts
    pub p: Vec<f64>,
    /// Unit-norm MMSE filters, full length with zeros on sleeping APs
    pub v: Vec<CVec>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum UplinkOutcome {
    Converged(UplinkPower),
    Infeasible { iterations: usize, reason: String },
}

impl UplinkOutcome {
    pub fn converged(&self) -> Option<&UplinkPower> {
        match self {
            UplinkOutcome::Converged(p) => Some(p),
            UplinkOutcome::Infeasible { .. } => None,
        }
    }
}

/// `I + sum_j p_j g_j g_j^H` on noise-normalized channels.
fn covariance(gs: &[DVector<Complex64>], p: &[f64]) -> DMatrix<Complex64> {
    let m = gs[0].len();
    let mut r = DMatrix::<Complex64>::identity(m, m);
    for (g, &pj) in gs.iter().zip(p) {
        if pj != 0.0 {
            r.ger(Complex64::new(pj, 0.0), g, &g.map(|x| x.conj()), Complex64::new(1.0, 0.0));
        }
    }
    r
}

/// Minimum UL powers meeting `qos_ul` with MMSE receivers over the active
/// APs' antennas, by the standard interference-function iteration
/// `p_i <- gamma_i / (g_i^H R_i^-1 g_i)` started at zero. The iterates rise
/// monotonically, so the limit is the component-wise minimal power vector.
/// `budget_sum` (the summed per-MU limits) sets the divergence guard.
pub fn ul_fixed_point_power(
    channels: &ChannelRealization,
    qos_ul: &[f64],
    noise_power: f64,
    active: &ActiveSet,
    budget_sum: f64,
) -> Result<UplinkOutcome> {
    active.check(channels.num_aps())?;
    let support = Support::new(channels, active);
    let scale = noise_power.sqrt().recip();
    let gs: Vec<DVector<Complex64>> = channels
        .g
        .iter()
        .map(|g| DVector::from_vec(support.gather(g).into_iter().map(|x| x * scale).collect()))
        .collect();
    let k = gs.len();
    let guard = DIVERGENCE_FACTOR * budget_sum;
    let mut p = vec![0.0; k];
    for it in 1..=FIXED_POINT_MAX_ITERATIONS {
        let chol = match covariance(&gs, &p).cholesky() {
            Some(c) => c,
            None => {
                return Ok(UplinkOutcome::Infeasible {
                    iterations: it,
                    reason: "covariance lost definiteness".into(),
                })
            }
        };
        let mut next = vec![0.0; k];
        for i in 0..k {
            let a = gs[i].dotc(&chol.solve(&gs[i])).re;
            // g_i^H R_i^-1 g_i from the full covariance (Sherman-Morrison)
            let q = a / (1.0 - p[i] * a);
            next[i] = qos_ul[i] / q;
        }
        if next.iter().any(|x| !x.is_finite() || *x < 0.0) || next.iter().sum::<f64>() > guard {
            return Ok(UplinkOutcome::Infeasible {
                iterations: it,
                reason: "powers diverge".into(),
            });
        }
        let change = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let size = next.iter().cloned().fold(0.0, f64::max);
        p = next;
        if change <= FIXED_POINT_TOLERANCE * size {
            let chol = covariance(&gs, &p)
                .cholesky()
                .expect("covariance with nonnegative powers is positive definite");
            let v = gs
                .iter()
                .map(|g| {
                    let u = chol.solve(g);
                    let nrm = u.norm();
                    let compact: CVec = u.iter().map(|x| x.conj() / nrm).collect();
                    support.scatter(&compact)
                })
                .collect();
            return Ok(UplinkOutcome::Converged(UplinkPower {
                p,
                v,
                iterations: it,
            }));
        }
    }
    Ok(UplinkOutcome::Infeasible {
        iterations: FIXED_POINT_MAX_ITERATIONS,
        reason: "no convergence within the iteration cap".into(),
    })
}

/// Powers that meet every UL target with equality for fixed receive filters:
/// the solution of `(I - D F) p = D sigma^2 ||v||^2` with
/// `D = diag(gamma_i / |v_i^T g_i|^2)` and `F_ij = |v_i^T g_j|^2` off the
/// diagonal. This is the optimum of the power LP for these filters; `None`
/// when the filters cannot support the targets with nonnegative powers.
pub fn ul_power_for_filters(
    channels: &ChannelRealization,
    v_ul: &[CVec],
    qos_ul: &[f64],
    noise_power: f64,
) -> Option<Vec<f64>> {
    let k = v_ul.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for i in 0..k {
        let signal = bilinear(&v_ul[i], &channels.g[i]).norm_sqr();
        if signal == 0.0 {
            return None;
        }
        let d = qos_ul[i] / signal;
        for j in 0..k {
            if j != i {
                a[(i, j)] = -d * bilinear(&v_ul[i], &channels.g[j]).norm_sqr();
            }
        }
        b[i] = d * noise_power * norm_sqr(&v_ul[i]);
    }
    let p = a.lu().solve(&b)?;
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return None;
    }
    Some(p.iter().copied().collect())
}
