//! Fixed instances shared by the benchmarks.

use cran_core::scenario::{generate_scenario, sample_channel, ChannelRealization, NetworkConfig, Scenario};

/// Homogeneous network with `n` APs and `k` MUs, feasible with every AP on
/// at 8 dB. Seeds are scanned from `seed` until one qualifies.
pub fn feasible_instance(n: usize, k: usize, seed: u64) -> (Scenario, ChannelRealization) {
    let cfg = NetworkConfig::homogeneous(n, k);
    let all = cran_core::beamform::ActiveSet::all(n);
    (seed..)
        .map(|s| {
            let sc = generate_scenario(&cfg, s).expect("preset is valid");
            let ch = sample_channel(&sc, s + 1);
            (sc, ch)
        })
        .find(|(sc, ch)| {
            cran_core::beamform::check_joint_feasibility(ch, &sc.config, &all)
                .map(|r| r.feasible())
                .unwrap_or(false)
        })
        .expect("some seed is feasible")
}
