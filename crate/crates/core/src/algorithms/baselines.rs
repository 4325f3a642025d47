//! Reference schemes: exhaustive search, all APs on, and nearest-AP rules.
//! These solve the UL with MMSE receivers directly, so their virtual-DL
//! beamformers stay zero.

use super::{assemble, AssociationResult};
use crate::beamform::{
    check_joint_feasibility, min_power_dl_beamforming, ul_fixed_point_power, ActiveSet, BeamformingSolution,
    ProgramOutcome, UplinkOutcome,
};
use crate::error::{Error, Result};
use crate::scenario::{ChannelRealization, NetworkConfig, Scenario};

/// Largest network the exhaustive search accepts.
pub const DEFAULT_ES_CAP: usize = 10;

/// Minimum-power beamformers and UL powers for a fixed active set, checked
/// and priced like any other scheme's output.
pub fn evaluate_active_set(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
) -> Result<AssociationResult> {
    let report = check_joint_feasibility(channels, config, active)?;
    if !report.feasible() {
        return Ok(AssociationResult::infeasible(config, active.clone(), report.diagnostics));
    }
    let dl = report.dl_solution.expect("feasible report carries DL beamformers");
    let ul = report.ul_power.expect("feasible report carries UL powers");
    let mut solution = BeamformingSolution::zeros(&config.antennas_per_ap, config.num_mus);
    solution.w_dl = dl.w_dl;
    solution.v_ul = ul.v;
    solution.p_ul = ul.p;
    Ok(assemble(config, channels, active.clone(), solution, Vec::new(), true, report.diagnostics))
}

pub fn joint_processing(scenario: &Scenario, channels: &ChannelRealization) -> Result<AssociationResult> {
    evaluate_active_set(&scenario.config, channels, &ActiveSet::all(scenario.config.num_aps))
}

pub fn exhaustive_search(scenario: &Scenario, channels: &ChannelRealization) -> Result<AssociationResult> {
    exhaustive_search_with_cap(scenario, channels, DEFAULT_ES_CAP)
}

/// Tries every nonempty AP subset in order of static power and keeps the
/// cheapest feasible one. Once the static power alone reaches the best total
/// found, no later subset can win and the search stops.
pub fn exhaustive_search_with_cap(
    scenario: &Scenario,
    channels: &ChannelRealization,
    cap: usize,
) -> Result<AssociationResult> {
    let config = &scenario.config;
    let n = config.num_aps;
    if n > cap {
        return Err(Error::ExhaustiveCapExceeded { cap, got: n });
    }
    let static_of = |mask: u64| -> f64 {
        (0..n).filter(|b| mask >> b & 1 == 1).map(|b| config.ap_static_power[b]).sum()
    };
    let mut masks: Vec<u64> = (1..1u64 << n).collect();
    masks.sort_by(|a, b| static_of(*a).total_cmp(&static_of(*b)).then(a.cmp(b)));
    let budget: f64 = config.mu_tx_limit.iter().sum();
    let mut best: Option<(f64, ActiveSet)> = None;
    let mut tried = 0usize;
    for mask in masks {
        let stat = static_of(mask);
        if best.as_ref().is_some_and(|(b, _)| stat >= *b) {
            break;
        }
        tried += 1;
        let active = ActiveSet::from_mask(mask, n);
        let ul = match ul_fixed_point_power(channels, &config.qos_ul, config.noise_power, &active, budget)? {
            UplinkOutcome::Converged(up) if up.p.iter().zip(&config.mu_tx_limit).all(|(p, m)| p <= m) => up,
            _ => continue,
        };
        let ProgramOutcome::Optimal(dl) = min_power_dl_beamforming(config, channels, &active, true)? else {
            continue;
        };
        let total = stat + dl.dl_power() + config.weight * ul.p.iter().sum::<f64>();
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            best = Some((total, active));
        }
    }
    log::debug!("exhaustive search evaluated {tried} of {} subsets", (1u64 << n) - 1);
    match best {
        Some((_, active)) => evaluate_active_set(config, channels, &active),
        None => Ok(AssociationResult::infeasible(
            config,
            ActiveSet::all(n),
            vec!["no AP subset is feasible".into()],
        )),
    }
}

fn strongest_per_mu(num_mus: usize, num_aps: usize, score: impl Fn(usize, usize) -> f64) -> ActiveSet {
    let mut aps = Vec::with_capacity(num_mus);
    for i in 0..num_mus {
        let mut best = 0;
        for n in 1..num_aps {
            if score(i, n) > score(i, best) {
                best = n;
            }
        }
        aps.push(best);
    }
    ActiveSet::new(aps)
}

/// Each MU picks the AP with the strongest received DL reference signal,
/// sent by AP `n` at `reference_power[n]` spread over its antennas.
pub fn apirss_select(scenario: &Scenario, channels: &ChannelRealization, reference_power: &[f64]) -> ActiveSet {
    let cfg = &scenario.config;
    strongest_per_mu(cfg.num_mus, cfg.num_aps, |i, n| {
        reference_power[n] * channels.dl_gain(i, n) / cfg.antennas_per_ap[n] as f64
    })
}

/// Each MU picks the AP that hears it best in the UL.
pub fn muirss_select(scenario: &Scenario, channels: &ChannelRealization) -> ActiveSet {
    let cfg = &scenario.config;
    strongest_per_mu(cfg.num_mus, cfg.num_aps, |i, n| channels.ul_gain(i, n))
}
