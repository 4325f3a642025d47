use serde::{Deserialize, Serialize};

use super::{trial_seed, FADING_STREAM, PLACEMENT_STREAM};
use crate::algorithms::{run_scheme, Scheme};
use crate::beamform::ActiveSet;
use crate::error::Result;
use crate::scenario::{generate_scenario, sample_channel, NetworkConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoPanel {
    pub scheme: Scheme,
    pub active: ActiveSet,
    pub feasible: bool,
    pub total_power: f64,
    pub diagnostics: Vec<String>,
}

/// Layout and the AP sets chosen by each scheme on one heterogeneous
/// network, ready to be drawn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoFig1 {
    pub seed: u64,
    pub area_side: f64,
    pub ap_positions: Vec<[f64; 2]>,
    /// High-power APs (the ones with pinned positions)
    pub hap_indices: Vec<usize>,
    pub mu_positions: Vec<[f64; 2]>,
    pub panels: Vec<DemoPanel>,
}

/// Two high-power and eight low-power APs serving eight MUs at 8 dB in both
/// directions. The exhaustive search is included when `with_es` is set.
pub fn demo_fig1(seed: u64, with_es: bool) -> Result<DemoFig1> {
    let config = NetworkConfig::heterogeneous(10, 8);
    let scenario = generate_scenario(&config, trial_seed(seed, 0, PLACEMENT_STREAM))?;
    let channels = sample_channel(&scenario, trial_seed(seed, 0, FADING_STREAM));
    let mut schemes = vec![Scheme::GsoL12, Scheme::Rip];
    if with_es {
        schemes.push(Scheme::Es);
    }
    schemes.extend([Scheme::Apirss, Scheme::Muirss, Scheme::GsoDlOnly]);
    let mut panels = Vec::new();
    for scheme in schemes {
        let r = run_scheme(scheme, &scenario, &channels)?;
        panels.push(DemoPanel {
            scheme,
            active: r.active,
            feasible: r.feasible,
            total_power: r.objective.total,
            diagnostics: r.diagnostics,
        });
    }
    Ok(DemoFig1 {
        seed,
        area_side: config.area_side,
        ap_positions: scenario.ap_positions.clone(),
        hap_indices: (0..config.fixed_ap_positions.len()).collect(),
        mu_positions: scenario.mu_positions.clone(),
        panels,
    })
}
