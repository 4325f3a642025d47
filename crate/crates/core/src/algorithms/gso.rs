//! Group-sparsity AP selection: reweighted penalized solves pick a
//! candidate set, a UL price rule grows it until the UL targets fit, and a
//! final unpenalized solve on the set gives the beamformers.

use serde::{Deserialize, Serialize};

use super::{
    assemble, final_vdl_weight, finalize_from_virtual_dl, threshold_support, tolerances,
    AssociationResult, GsoParams, IterationRecord, Phase,
};
use crate::beamform::{
    build_joint, check_joint_feasibility, min_power_dl_beamforming, ul_fixed_point_power,
    ActiveSet, BeamformingSolution, JointPoint, JointSpec, ProgramOutcome, UplinkOutcome,
};
use crate::error::{Error, Result};
use crate::scenario::{ChannelRealization, NetworkConfig, Scenario};

/// Weights for the next penalized solve: `P_c,n / (t_n + epsilon)`.
pub fn reweight_betas(t_prev: &[f64], static_power: &[f64], epsilon: f64) -> Vec<f64> {
    t_prev
        .iter()
        .zip(static_power)
        .map(|(t, pc)| pc / (t + epsilon))
        .collect()
}

/// Output of one price step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceState {
    /// MUs whose minimal UL power exceeds their budget
    pub violating: Vec<usize>,
    /// `(ap, price)` for every AP outside the candidate set
    pub prices: Vec<(usize, f64)>,
}

/// Prices each sleeping AP by the UL channel gain it offers the violating
/// MUs, each weighted by its relative power overshoot, per watt of static
/// power. Returns the AP with the highest price (lowest index on
/// ties).
///
/// `p_tilde` are the minimal UL powers on the candidate set; pass values
/// twice the budgets to weight every MU alike when they do not exist.
pub fn price_update(
    channels: &ChannelRealization,
    p_tilde: &[f64],
    mu_tx_limit: &[f64],
    static_power: &[f64],
    candidate: &ActiveSet,
) -> Result<(PriceState, usize)> {
    let violating: Vec<usize> = (0..p_tilde.len())
        .filter(|&i| p_tilde[i] > mu_tx_limit[i])
        .collect();
    if violating.is_empty() {
        return Err(Error::EmptyViolatorSet);
    }
    let mut prices = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for n in (0..channels.num_aps()).filter(|&n| !candidate.contains(n)) {
        let gain: f64 = violating
            .iter()
            .map(|&i| (p_tilde[i] - mu_tx_limit[i]) / mu_tx_limit[i] * channels.ul_gain(i, n))
            .sum();
        let price = gain / static_power[n];
        prices.push((n, price));
        if best.is_none_or(|(_, b)| price > b) {
            best = Some((n, price));
        }
    }
    let (chosen, _) = best.ok_or(Error::NoCandidateLeft)?;
    Ok((PriceState { violating, prices }, chosen))
}

fn penalized_spec(config: &NetworkConfig, beta: &[f64], params: &GsoParams, dl_only: bool) -> JointSpec {
    let zero = beta.iter().all(|b| *b == 0.0);
    JointSpec {
        dl: true,
        vdl: !dl_only,
        vdl_weight: if zero { final_vdl_weight(config) } else { config.weight },
        group: Some((beta.to_vec(), params.penalty)),
        per_ap_dl_limit: true,
        ul_sum_limit: !dl_only,
        rho: None,
    }
}

fn solve_penalized(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
    beta: &[f64],
    params: &GsoParams,
    dl_only: bool,
) -> Result<ProgramOutcome<JointPoint>> {
    build_joint(config, channels, active, &penalized_spec(config, beta, params, dl_only))?.solve(&tolerances())
}

struct Reweighted {
    t: Vec<f64>,
    converged: bool,
}

/// Seeds the group values with an unweighted solve, then reweights until
/// every weight moves by at most `eta` relative or `l_max` is reached.
fn reweight_loop(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    params: &GsoParams,
    dl_only: bool,
    trace: &mut Vec<IterationRecord>,
) -> Result<std::result::Result<Reweighted, String>> {
    let all = ActiveSet::all(config.num_aps);
    let zero = vec![0.0; config.num_aps];
    let init = match solve_penalized(config, channels, &all, &zero, params, dl_only)? {
        ProgramOutcome::Optimal(p) => p,
        ProgramOutcome::Infeasible => return Ok(Err("unweighted program infeasible".into())),
        ProgramOutcome::Failed(m) => return Ok(Err(format!("unweighted solve failed: {m}"))),
    };
    let mut rec = IterationRecord::new(Phase::Init, 0);
    rec.t = Some(init.group.clone());
    rec.objective = Some(init.objective);
    trace.push(rec);

    let mut t = init.group;
    let mut beta_prev: Option<Vec<f64>> = None;
    for l in 1..=params.l_max {
        let beta = reweight_betas(&t, &config.ap_static_power, params.epsilon);
        let point = match solve_penalized(config, channels, &all, &beta, params, dl_only)? {
            ProgramOutcome::Optimal(p) => p,
            ProgramOutcome::Infeasible => return Ok(Err(format!("weighted program infeasible at step {l}"))),
            ProgramOutcome::Failed(m) => return Ok(Err(format!("weighted solve failed at step {l}: {m}"))),
        };
        let mut rec = IterationRecord::new(Phase::Reweight, l);
        rec.beta = Some(beta.clone());
        rec.t = Some(point.group.clone());
        rec.objective = Some(point.objective);
        trace.push(rec);
        t = point.group;
        let settled = beta_prev.as_ref().is_some_and(|bp| {
            beta.iter()
                .zip(bp)
                .all(|(b, p)| (b - p).abs() <= params.convergence_eta * p)
        });
        if settled {
            return Ok(Ok(Reweighted { t, converged: true }));
        }
        beta_prev = Some(beta);
    }
    Ok(Ok(Reweighted { t, converged: false }))
}

/// Candidate AP with the largest group value among those not yet active.
fn strongest_outside(t: &[f64], active: &ActiveSet) -> Option<usize> {
    let mut best: Option<usize> = None;
    for n in (0..t.len()).filter(|&n| !active.contains(n)) {
        if best.is_none_or(|b| t[n] > t[b]) {
            best = Some(n);
        }
    }
    best
}

fn fail(config: &NetworkConfig, active: ActiveSet, trace: Vec<IterationRecord>, msg: String) -> AssociationResult {
    let mut r = AssociationResult::infeasible(config, active, vec![msg]);
    r.trace = trace;
    r
}

/// Group-sparsity selection for joint DL and UL.
pub fn algorithm_gso(
    scenario: &Scenario,
    channels: &ChannelRealization,
    params: &GsoParams,
) -> Result<AssociationResult> {
    let config = &scenario.config;
    let all = ActiveSet::all(config.num_aps);
    let pre = check_joint_feasibility(channels, config, &all)?;
    if !pre.feasible() {
        return Ok(AssociationResult::infeasible(config, all, pre.diagnostics));
    }
    let mut trace = Vec::new();
    let rw = match reweight_loop(config, channels, params, false, &mut trace)? {
        Ok(rw) => rw,
        Err(msg) => return Ok(fail(config, all, trace, msg)),
    };
    let mut candidate = threshold_support(&rw.t, params.sparsity_threshold);
    let mut diagnostics = Vec::new();
    let budget: f64 = config.mu_tx_limit.iter().sum();

    // UL price loop: grow the set until the minimal UL powers fit
    let mut step = 0;
    loop {
        if candidate.len() == config.num_aps {
            break;
        }
        let p_tilde = match ul_fixed_point_power(channels, &config.qos_ul, config.noise_power, &candidate, budget)? {
            UplinkOutcome::Converged(up) => {
                if up.p.iter().zip(&config.mu_tx_limit).all(|(p, m)| p <= m) {
                    break;
                }
                up.p
            }
            UplinkOutcome::Infeasible { .. } => config.mu_tx_limit.iter().map(|m| 2.0 * m).collect(),
        };
        let (state, chosen) = price_update(channels, &p_tilde, &config.mu_tx_limit, &config.ap_static_power, &candidate)?;
        step += 1;
        candidate.insert(chosen);
        let mut rec = IterationRecord::new(Phase::Price, step);
        rec.added = Some(chosen);
        trace.push(rec);
        log::debug!("price step {step}: violators {:?}, added AP {chosen}", state.violating);
    }

    // restricted unpenalized solve, adding APs back while it is infeasible
    let zero = vec![0.0; config.num_aps];
    let point = loop {
        match solve_penalized(config, channels, &candidate, &zero, params, false)? {
            ProgramOutcome::Optimal(p) => break p,
            outcome => {
                if let ProgramOutcome::Failed(m) = outcome {
                    diagnostics.push(format!("restricted solve failed: {m}"));
                }
                let Some(n) = strongest_outside(&rw.t, &candidate) else {
                    return Ok(fail(config, candidate, trace, "restricted program infeasible with every AP on".into()));
                };
                candidate.insert(n);
                step += 1;
                let mut rec = IterationRecord::new(Phase::Restore, step);
                rec.added = Some(n);
                trace.push(rec);
            }
        }
    };
    finalize_from_virtual_dl(config, channels, candidate, point.w_dl, point.w_vdl, trace, rw.converged, diagnostics)
}

/// Group-sparsity selection that only looks at the DL; the UL is checked
/// afterwards on the chosen set.
pub fn algorithm_gso_dl_only(
    scenario: &Scenario,
    channels: &ChannelRealization,
    params: &GsoParams,
) -> Result<AssociationResult> {
    let config = &scenario.config;
    let all = ActiveSet::all(config.num_aps);
    if !min_power_dl_beamforming(config, channels, &all, true)?.is_optimal() {
        return Ok(AssociationResult::infeasible(config, all, vec!["DL targets infeasible with every AP on".into()]));
    }
    let mut trace = Vec::new();
    let rw = match reweight_loop(config, channels, params, true, &mut trace)? {
        Ok(rw) => rw,
        Err(msg) => return Ok(fail(config, all, trace, msg)),
    };
    let mut candidate = threshold_support(&rw.t, params.sparsity_threshold);
    let mut step = 0;
    let dl = loop {
        match min_power_dl_beamforming(config, channels, &candidate, true)? {
            ProgramOutcome::Optimal(p) => break p,
            _ => {
                let Some(n) = strongest_outside(&rw.t, &candidate) else {
                    return Ok(fail(config, candidate, trace, "DL program infeasible with every AP on".into()));
                };
                candidate.insert(n);
                step += 1;
                let mut rec = IterationRecord::new(Phase::Restore, step);
                rec.added = Some(n);
                trace.push(rec);
            }
        }
    };
    let budget: f64 = config.mu_tx_limit.iter().sum();
    let mut solution = BeamformingSolution::zeros(&config.antennas_per_ap, config.num_mus);
    solution.w_dl = dl.w_dl;
    let mut diagnostics = Vec::new();
    match ul_fixed_point_power(channels, &config.qos_ul, config.noise_power, &candidate, budget)? {
        UplinkOutcome::Converged(up) => {
            solution.v_ul = up.v;
            solution.p_ul = up.p;
        }
        UplinkOutcome::Infeasible { reason, .. } => {
            diagnostics.push(format!("UL targets unreachable on the chosen set: {reason}"));
            let mut r = AssociationResult::infeasible(config, candidate, diagnostics);
            r.trace = trace;
            return Ok(r);
        }
    }
    Ok(assemble(config, channels, candidate, solution, trace, rw.converged, diagnostics))
}
