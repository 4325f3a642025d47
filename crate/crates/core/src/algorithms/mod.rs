//! AP selection schemes. Each produces an [`AssociationResult`] from a
//! scenario and one channel realization.

mod baselines;
mod gso;
mod rip;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::beamform::{
    dl_sinr, ul_power_for_filters, ul_sinr, weighted_total_power, ActiveSet, BeamformingSolution,
    CVec, ObjectiveBreakdown, Penalty, CHECK_TOLERANCE, DEFAULT_SPARSITY_THRESHOLD,
};
use crate::conic::SolverTolerances;
use crate::error::Result;
use crate::scenario::{ChannelRealization, NetworkConfig, Scenario};

pub use baselines::{
    apirss_select, evaluate_active_set, exhaustive_search, exhaustive_search_with_cap,
    joint_processing, muirss_select, DEFAULT_ES_CAP,
};
pub use gso::{algorithm_gso, algorithm_gso_dl_only, price_update, reweight_betas, PriceState};
pub use rip::algorithm_rip;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GsoParams {
    /// Stabilizer in the reweighting rule
    pub epsilon: f64,
    /// Relative change in every weight below which reweighting stops
    pub convergence_eta: f64,
    pub l_max: usize,
    pub penalty: Penalty,
    /// Group values at or below this fraction of the largest count as zero
    pub sparsity_threshold: f64,
}

impl Default for GsoParams {
    fn default() -> Self {
        GsoParams {
            epsilon: 1e-6,
            convergence_eta: 1e-3,
            l_max: 30,
            penalty: Penalty::L12,
            sparsity_threshold: DEFAULT_SPARSITY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Unweighted solve that seeds the group values
    Init,
    Reweight,
    /// AP added by the UL price rule
    Price,
    /// AP added back after a restricted solve turned infeasible
    Restore,
    /// Relaxed on/off solve followed by a removal
    Removal,
}

/// One step of an iterative scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub phase: Phase,
    pub iteration: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub added: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub removed: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
}

impl IterationRecord {
    pub(crate) fn new(phase: Phase, iteration: usize) -> Self {
        IterationRecord {
            phase,
            iteration,
            beta: None,
            t: None,
            rho: None,
            added: None,
            removed: None,
            objective: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub active: ActiveSet,
    pub solution: BeamformingSolution,
    pub objective: ObjectiveBreakdown,
    pub feasible: bool,
    /// Reweighting stopped on the weight-change rule rather than `l_max`
    pub converged: bool,
    pub trace: Vec<IterationRecord>,
    pub diagnostics: Vec<String>,
}

impl AssociationResult {
    pub(crate) fn infeasible(config: &NetworkConfig, active: ActiveSet, diagnostics: Vec<String>) -> Self {
        AssociationResult {
            active,
            solution: BeamformingSolution::zeros(&config.antennas_per_ap, config.num_mus),
            objective: ObjectiveBreakdown::default(),
            feasible: false,
            converged: false,
            trace: Vec::new(),
            diagnostics,
        }
    }

    pub fn trace_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.trace)?)
    }
}

/// Every scheme the harness can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    GsoL12,
    #[serde(rename = "gso_l1inf")]
    GsoL1Inf,
    Rip,
    Es,
    Jp,
    Apirss,
    Muirss,
    GsoDlOnly,
}

impl Scheme {
    pub const ALL: [Scheme; 8] = [
        Scheme::GsoL12,
        Scheme::GsoL1Inf,
        Scheme::Rip,
        Scheme::Es,
        Scheme::Jp,
        Scheme::Apirss,
        Scheme::Muirss,
        Scheme::GsoDlOnly,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scheme::GsoL12 => "gso_l12",
            Scheme::GsoL1Inf => "gso_l1inf",
            Scheme::Rip => "rip",
            Scheme::Es => "es",
            Scheme::Jp => "jp",
            Scheme::Apirss => "apirss",
            Scheme::Muirss => "muirss",
            Scheme::GsoDlOnly => "gso_dl_only",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Scheme::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| format!("unknown scheme {s}"))
    }
}

/// Runs `scheme` with default parameters.
pub fn run_scheme(scheme: Scheme, scenario: &Scenario, channels: &ChannelRealization) -> Result<AssociationResult> {
    let l12 = GsoParams::default();
    match scheme {
        Scheme::GsoL12 => algorithm_gso(scenario, channels, &l12),
        Scheme::GsoL1Inf => algorithm_gso(
            scenario,
            channels,
            &GsoParams {
                penalty: Penalty::L1Inf,
                ..l12
            },
        ),
        Scheme::Rip => algorithm_rip(scenario, channels),
        Scheme::Es => exhaustive_search(scenario, channels),
        Scheme::Jp => joint_processing(scenario, channels),
        Scheme::Apirss => {
            let active = apirss_select(scenario, channels, &scenario.config.ap_tx_limit);
            evaluate_active_set(&scenario.config, channels, &active)
        }
        Scheme::Muirss => {
            let active = muirss_select(scenario, channels);
            evaluate_active_set(&scenario.config, channels, &active)
        }
        Scheme::GsoDlOnly => algorithm_gso_dl_only(scenario, channels, &l12),
    }
}

pub(crate) fn tolerances() -> SolverTolerances {
    SolverTolerances::default()
}

/// Virtual-DL weight used when only the beamformers matter: the weighted
/// program has the same minimizer for any positive weight, and weight zero
/// would leave the virtual-DL part without a unique solution.
pub(crate) fn final_vdl_weight(config: &NetworkConfig) -> f64 {
    if config.weight > 0.0 {
        config.weight
    } else {
        1.0
    }
}

/// Indices with `values[n] > threshold * max(values)`.
pub(crate) fn threshold_support(values: &[f64], threshold: f64) -> ActiveSet {
    let max = values.iter().cloned().fold(0.0, f64::max);
    ActiveSet::new(
        (0..values.len())
            .filter(|&n| max > 0.0 && values[n] > threshold * max)
            .collect(),
    )
}

/// Re-evaluates SINRs and budgets of `solution` outside any solver.
pub fn verify_solution(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    solution: &BeamformingSolution,
    active: &ActiveSet,
) -> Vec<String> {
    let mut out = Vec::new();
    let tol = CHECK_TOLERANCE;
    if let Some(ap) = solution.support().iter().find(|&n| !active.contains(n)) {
        out.push(format!("sleeping AP {ap} has a nonzero block"));
    }
    for (i, s) in dl_sinr(channels, &solution.w_dl, config.noise_power).iter().enumerate() {
        if *s < config.qos_dl[i] * (1.0 - tol) {
            out.push(format!("DL SINR of MU {i} is {s:.6e}, target {:.6e}", config.qos_dl[i]));
        }
    }
    let ul = ul_sinr(channels, &solution.v_ul, &solution.p_ul, config.noise_power);
    for (i, s) in ul.iter().enumerate() {
        if *s < config.qos_ul[i] * (1.0 - tol) {
            out.push(format!("UL SINR of MU {i} is {s:.6e}, target {:.6e}", config.qos_ul[i]));
        }
    }
    for (n, p) in solution.dl_power_per_ap().iter().enumerate() {
        if *p > config.ap_tx_limit[n] * (1.0 + tol) {
            out.push(format!("AP {n} transmits {p:.6e} W over its budget"));
        }
    }
    for (i, p) in solution.p_ul.iter().enumerate() {
        if *p > config.mu_tx_limit[i] * (1.0 + tol) {
            out.push(format!("MU {i} transmits {p:.6e} W over its budget"));
        }
    }
    out
}

/// UL filters `v_i = conj(w_vdl_i)` and the powers that meet the UL targets
/// with them, then the independent checks and the objective.
pub(crate) fn finalize_from_virtual_dl(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: ActiveSet,
    w_dl: Vec<CVec>,
    w_vdl: Vec<CVec>,
    trace: Vec<IterationRecord>,
    converged: bool,
    mut diagnostics: Vec<String>,
) -> Result<AssociationResult> {
    let v_ul: Vec<CVec> = w_vdl
        .iter()
        .map(|w| w.iter().map(Complex64::conj).collect())
        .collect();
    let Some(p_ul) = ul_power_for_filters(channels, &v_ul, &config.qos_ul, config.noise_power) else {
        diagnostics.push("virtual-DL filters cannot support the UL targets".into());
        let mut r = AssociationResult::infeasible(config, active, diagnostics);
        r.trace = trace;
        return Ok(r);
    };
    let solution = BeamformingSolution {
        antennas_per_ap: config.antennas_per_ap.clone(),
        w_dl,
        w_vdl,
        v_ul,
        p_ul,
    };
    Ok(assemble(config, channels, active, solution, trace, converged, diagnostics))
}

pub(crate) fn assemble(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: ActiveSet,
    solution: BeamformingSolution,
    trace: Vec<IterationRecord>,
    converged: bool,
    mut diagnostics: Vec<String>,
) -> AssociationResult {
    let violations = verify_solution(config, channels, &solution, &active);
    let feasible = violations.is_empty();
    diagnostics.extend(violations);
    let objective = weighted_total_power(&solution, &active, config).unwrap_or_default();
    AssociationResult {
        active,
        solution,
        objective,
        feasible,
        converged,
        trace,
        diagnostics,
    }
}
