//! Relaxed-indicator pruning: solve the relaxed on/off program, switch off
//! the AP with the smallest indicator, and keep going while the binary
//! objective does not grow.

use super::{final_vdl_weight, finalize_from_virtual_dl, tolerances, AssociationResult, IterationRecord, Phase};
use crate::beamform::{
    build_joint, build_p6, check_joint_feasibility, ul_fixed_point_power, ActiveSet, JointPoint, JointSpec,
    ProgramOutcome, RhoSetting, UplinkOutcome,
};
use crate::error::Result;
use crate::scenario::{ChannelRealization, NetworkConfig, Scenario};

fn binary_settings(num_aps: usize, active: &ActiveSet) -> Vec<RhoSetting> {
    (0..num_aps)
        .map(|n| if active.contains(n) { RhoSetting::On } else { RhoSetting::Off })
        .collect()
}

fn ul_fits(config: &NetworkConfig, channels: &ChannelRealization, active: &ActiveSet) -> Result<bool> {
    let budget: f64 = config.mu_tx_limit.iter().sum();
    Ok(
        match ul_fixed_point_power(channels, &config.qos_ul, config.noise_power, active, budget)? {
            UplinkOutcome::Converged(up) => up.p.iter().zip(&config.mu_tx_limit).all(|(p, m)| p <= m),
            UplinkOutcome::Infeasible { .. } => false,
        },
    )
}

/// Beamformers of the binary program on `active` with the tie-break weight.
fn final_point(config: &NetworkConfig, channels: &ChannelRealization, active: &ActiveSet) -> Result<ProgramOutcome<JointPoint>> {
    let spec = JointSpec {
        dl: true,
        vdl: true,
        vdl_weight: final_vdl_weight(config),
        group: None,
        per_ap_dl_limit: false,
        ul_sum_limit: true,
        rho: Some(binary_settings(config.num_aps, active)),
    };
    build_joint(config, channels, active, &spec)?.solve(&tolerances())
}

pub fn algorithm_rip(scenario: &Scenario, channels: &ChannelRealization) -> Result<AssociationResult> {
    let config = &scenario.config;
    let n_aps = config.num_aps;
    let all = ActiveSet::all(n_aps);
    let pre = check_joint_feasibility(channels, config, &all)?;
    if !pre.feasible() {
        return Ok(AssociationResult::infeasible(config, all, pre.diagnostics));
    }
    let tol = tolerances();
    let mut trace = Vec::new();
    let mut diagnostics = Vec::new();
    let mut current = all;
    let mut phi_prev = f64::INFINITY;
    let mut step = 0;
    while current.len() > 1 {
        let relaxed: Vec<RhoSetting> = (0..n_aps)
            .map(|n| if current.contains(n) { RhoSetting::Free } else { RhoSetting::Off })
            .collect();
        let point = match build_p6(config, channels, &relaxed)?.solve(&tol)? {
            ProgramOutcome::Optimal(p) => p,
            ProgramOutcome::Infeasible => {
                diagnostics.push(format!("relaxed program infeasible on {:?}", current.as_slice()));
                break;
            }
            ProgramOutcome::Failed(m) => {
                diagnostics.push(format!("relaxed solve failed: {m}"));
                break;
            }
        };
        let mut weakest = None;
        for n in current.iter() {
            if weakest.is_none_or(|w: usize| point.rho[n] < point.rho[w]) {
                weakest = Some(n);
            }
        }
        let weakest = weakest.expect("active set is not empty");
        let mut next = current.clone();
        next.remove(weakest);
        let binary = match build_p6(config, channels, &binary_settings(n_aps, &next))?.solve(&tol)? {
            ProgramOutcome::Optimal(p) => p,
            _ => break,
        };
        if !ul_fits(config, channels, &next)? || binary.objective > phi_prev {
            break;
        }
        step += 1;
        let mut rec = IterationRecord::new(Phase::Removal, step);
        rec.rho = Some(point.rho);
        rec.removed = Some(weakest);
        rec.objective = Some(binary.objective);
        trace.push(rec);
        phi_prev = binary.objective;
        current = next;
    }
    let point = match final_point(config, channels, &current)? {
        ProgramOutcome::Optimal(p) => p,
        ProgramOutcome::Infeasible => {
            diagnostics.push("binary program infeasible on the final set".into());
            let mut r = AssociationResult::infeasible(config, current, diagnostics);
            r.trace = trace;
            return Ok(r);
        }
        ProgramOutcome::Failed(m) => {
            diagnostics.push(format!("final solve failed: {m}"));
            let mut r = AssociationResult::infeasible(config, current, diagnostics);
            r.trace = trace;
            return Ok(r);
        }
    };
    finalize_from_virtual_dl(config, channels, current, point.w_dl, point.w_vdl, trace, true, diagnostics)
}
