use serde::{Deserialize, Serialize};

use super::programs::{min_power_dl_beamforming, JointPoint, ProgramOutcome};
use super::uplink::{ul_fixed_point_power, UplinkOutcome, UplinkPower};
use super::ActiveSet;
use crate::error::Result;
use crate::scenario::{ChannelRealization, NetworkConfig};

/// DL and UL verdicts for one active set, with their witnesses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub dl_feasible: bool,
    pub ul_feasible: bool,
    /// Minimum-power DL beamformers under the per-AP budgets
    pub dl_solution: Option<JointPoint>,
    /// Component-wise minimal UL powers, present whenever the fixed point
    /// converged (even if some MU exceeds its budget)
    pub ul_power: Option<UplinkPower>,
    /// MUs whose minimal power exceeds their budget
    pub ul_violators: Vec<usize>,
    pub diagnostics: Vec<String>,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.dl_feasible && self.ul_feasible
    }
}

/// The DL and UL halves decouple once the active set is fixed. The DL half is
/// the minimum-power program with per-AP budgets; the UL half is exact because
/// the fixed point is component-wise minimal, so a budget violation there
/// cannot be traded away.
pub fn check_joint_feasibility(
    channels: &ChannelRealization,
    config: &NetworkConfig,
    active: &ActiveSet,
) -> Result<FeasibilityReport> {
    let mut diagnostics = Vec::new();
    let budget: f64 = config.mu_tx_limit.iter().sum();
    let ul = ul_fixed_point_power(channels, &config.qos_ul, config.noise_power, active, budget)?;
    let (ul_power, ul_violators, ul_feasible) = match ul {
        UplinkOutcome::Converged(up) => {
            let violators: Vec<usize> = (0..up.p.len())
                .filter(|&i| up.p[i] > config.mu_tx_limit[i])
                .collect();
            if !violators.is_empty() {
                diagnostics.push(format!("UL budget exceeded by MUs {violators:?}"));
            }
            let ok = violators.is_empty();
            (Some(up), violators, ok)
        }
        UplinkOutcome::Infeasible { reason, .. } => {
            diagnostics.push(format!("UL targets unreachable: {reason}"));
            (None, (0..channels.num_mus()).collect(), false)
        }
    };
    let (dl_solution, dl_feasible) = match min_power_dl_beamforming(config, channels, active, true)? {
        ProgramOutcome::Optimal(p) => (Some(p), true),
        ProgramOutcome::Infeasible => {
            diagnostics.push("DL targets infeasible under per-AP budgets".into());
            (None, false)
        }
        ProgramOutcome::Failed(msg) => {
            diagnostics.push(format!("DL solve failed: {msg}"));
            (None, false)
        }
    };
    Ok(FeasibilityReport {
        dl_feasible,
        ul_feasible,
        dl_solution,
        ul_power,
        ul_violators,
        diagnostics,
    })
}
