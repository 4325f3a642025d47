//! Beamforming problems built from one channel realization.
//!
//! Complex beamformers are stored as length-`M` vectors stacked AP by AP,
//! matching [`ChannelRealization`]. Conic programs only carry the antennas of
//! the APs in the active set; sleeping APs get exact zeros when the solution
//! is scattered back to full length.

mod feasibility;
mod programs;
mod uplink;

use std::ops::Range;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{ChannelRealization, NetworkConfig};

pub use feasibility::{check_joint_feasibility, FeasibilityReport};
pub use programs::{
    build_joint, build_min_power_dl, build_min_power_vdl, build_p4, build_p5, build_p6,
    min_power_dl_beamforming, virtual_dl_beamforming, JointPoint, JointProgram, JointSpec,
    Penalty, ProgramOutcome, RhoSetting,
};
pub use uplink::{ul_fixed_point_power, ul_power_for_filters, UplinkOutcome, UplinkPower};

/// Relative threshold below which a per-AP group value counts as zero.
pub const DEFAULT_SPARSITY_THRESHOLD: f64 = 1e-4;

/// Relative slack allowed when re-checking SINR targets and power budgets.
pub const CHECK_TOLERANCE: f64 = 1e-6;

pub type CVec = Vec<Complex64>;

/// Sorted set of AP indices that are switched on.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct ActiveSet(Vec<usize>);

impl ActiveSet {
    pub fn new(mut aps: Vec<usize>) -> Self {
        aps.sort_unstable();
        aps.dedup();
        ActiveSet(aps)
    }

    pub fn all(num_aps: usize) -> Self {
        ActiveSet((0..num_aps).collect())
    }

    pub fn from_mask(mask: u64, num_aps: usize) -> Self {
        ActiveSet((0..num_aps).filter(|n| mask >> n & 1 == 1).collect())
    }

    pub fn contains(&self, ap: usize) -> bool {
        self.0.binary_search(&ap).is_ok()
    }

    pub fn insert(&mut self, ap: usize) {
        if let Err(pos) = self.0.binary_search(&ap) {
            self.0.insert(pos, ap);
        }
    }

    pub fn remove(&mut self, ap: usize) {
        if let Ok(pos) = self.0.binary_search(&ap) {
            self.0.remove(pos);
        }
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub(crate) fn check(&self, num_aps: usize) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::EmptyActiveSet);
        }
        if let Some(&n) = self.0.iter().find(|&&n| n >= num_aps) {
            return Err(Error::InvalidConfig(format!("AP {n} out of range")));
        }
        Ok(())
    }
}

/// Antennas of the active APs, in AP order, as ranges into full vectors.
#[derive(Debug, Clone)]
pub(crate) struct Support {
    pub aps: Vec<usize>,
    pub ranges: Vec<Range<usize>>,
    pub full_len: usize,
}

impl Support {
    pub fn new(channels: &ChannelRealization, active: &ActiveSet) -> Self {
        Support {
            aps: active.as_slice().to_vec(),
            ranges: active.iter().map(|n| channels.ap_block(n)).collect(),
            full_len: channels.num_antennas(),
        }
    }

    pub fn len(&self) -> usize {
        self.ranges.iter().map(|r| r.len()).sum()
    }

    pub fn gather(&self, full: &[Complex64]) -> CVec {
        self.ranges
            .iter()
            .flat_map(|r| full[r.clone()].iter().copied())
            .collect()
    }

    pub fn scatter(&self, compact: &[Complex64]) -> CVec {
        let mut full = vec![Complex64::default(); self.full_len];
        let mut k = 0;
        for r in &self.ranges {
            for slot in &mut full[r.clone()] {
                *slot = compact[k];
                k += 1;
            }
        }
        full
    }
}

/// `a^H b`
pub(crate) fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `a^T b`
pub(crate) fn bilinear(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sqr(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum()
}

/// `|h_i^H w_i|^2 / (sum_{j != i} |h_i^H w_j|^2 + noise)` per MU.
pub fn dl_sinr(channels: &ChannelRealization, w_dl: &[CVec], noise_power: f64) -> Vec<f64> {
    sinr_with(&channels.h, w_dl, noise_power)
}

/// Virtual DL SINR: the DL formula evaluated on the UL channels.
pub fn vdl_sinr(channels: &ChannelRealization, w_vdl: &[CVec], noise_power: f64) -> Vec<f64> {
    sinr_with(&channels.g, w_vdl, noise_power)
}

fn sinr_with(chan: &[CVec], w: &[CVec], noise_power: f64) -> Vec<f64> {
    chan.iter()
        .enumerate()
        .map(|(i, c)| {
            let gains: Vec<f64> = w.iter().map(|wj| inner(c, wj).norm_sqr()).collect();
            let interference: f64 = gains.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, g)| g).sum();
            gains[i] / (interference + noise_power)
        })
        .collect()
}

/// `p_i |v_i^T g_i|^2 / (sum_{j != i} p_j |v_i^T g_j|^2 + noise ||v_i||^2)` per
/// MU; a zero filter gives SINR 0.
pub fn ul_sinr(channels: &ChannelRealization, v_ul: &[CVec], p_ul: &[f64], noise_power: f64) -> Vec<f64> {
    v_ul.iter()
        .enumerate()
        .map(|(i, v)| {
            let vv = norm_sqr(v);
            if vv == 0.0 {
                return 0.0;
            }
            let mut signal = 0.0;
            let mut interference = 0.0;
            for (j, g) in channels.g.iter().enumerate() {
                let gain = p_ul[j] * bilinear(v, g).norm_sqr();
                if j == i {
                    signal = gain;
                } else {
                    interference += gain;
                }
            }
            signal / (interference + noise_power * vv)
        })
        .collect()
}

/// DL beamformers, virtual-DL beamformers, UL receive filters and UL powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamformingSolution {
    pub antennas_per_ap: Vec<usize>,
    pub w_dl: Vec<CVec>,
    pub w_vdl: Vec<CVec>,
    pub v_ul: Vec<CVec>,
    pub p_ul: Vec<f64>,
}

impl BeamformingSolution {
    pub fn zeros(antennas_per_ap: &[usize], num_mus: usize) -> Self {
        let m: usize = antennas_per_ap.iter().sum();
        let z = vec![vec![Complex64::default(); m]; num_mus];
        BeamformingSolution {
            antennas_per_ap: antennas_per_ap.to_vec(),
            w_dl: z.clone(),
            w_vdl: z.clone(),
            v_ul: z,
            p_ul: vec![0.0; num_mus],
        }
    }

    fn block(&self, ap: usize) -> Range<usize> {
        let start: usize = self.antennas_per_ap[..ap].iter().sum();
        start..start + self.antennas_per_ap[ap]
    }

    /// `sum_i ||w_dl_{i,n}||^2` per AP.
    pub fn dl_power_per_ap(&self) -> Vec<f64> {
        (0..self.antennas_per_ap.len())
            .map(|n| {
                let r = self.block(n);
                self.w_dl.iter().map(|w| norm_sqr(&w[r.clone()])).sum()
            })
            .collect()
    }

    fn block_norms(&self, vecs: &[CVec]) -> Vec<f64> {
        (0..self.antennas_per_ap.len())
            .map(|n| {
                let r = self.block(n);
                vecs.iter().map(|w| norm_sqr(&w[r.clone()])).sum::<f64>().sqrt()
            })
            .collect()
    }

    /// APs whose DL beamformer or UL filter block is nonzero.
    pub fn support(&self) -> ActiveSet {
        let dl = self.block_norms(&self.w_dl);
        let ul = self.block_norms(&self.v_ul);
        ActiveSet::new(
            (0..dl.len())
                .filter(|&n| dl[n] > 0.0 || ul[n] > 0.0)
                .collect(),
        )
    }

    pub fn audit(&self, channels: &ChannelRealization, noise_power: f64) -> SolutionAudit {
        SolutionAudit {
            dl_block_norms: self.block_norms(&self.w_dl),
            vdl_block_norms: self.block_norms(&self.w_vdl),
            ul_filter_block_norms: self.block_norms(&self.v_ul),
            dl_sinr: dl_sinr(channels, &self.w_dl, noise_power),
            ul_sinr: ul_sinr(channels, &self.v_ul, &self.p_ul, noise_power),
            p_ul: self.p_ul.clone(),
        }
    }

    /// Solution plus per-AP block norms and achieved SINRs, as JSON.
    pub fn to_audit_json(&self, channels: &ChannelRealization, noise_power: f64) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            solution: &'a BeamformingSolution,
            audit: SolutionAudit,
        }
        Ok(serde_json::to_string_pretty(&Export {
            solution: self,
            audit: self.audit(channels, noise_power),
        })?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionAudit {
    pub dl_block_norms: Vec<f64>,
    pub vdl_block_norms: Vec<f64>,
    pub ul_filter_block_norms: Vec<f64>,
    pub dl_sinr: Vec<f64>,
    pub ul_sinr: Vec<f64>,
    pub p_ul: Vec<f64>,
}

/// Terms of the weighted network power, in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct ObjectiveBreakdown {
    pub ap_static: f64,
    pub ap_transmit: f64,
    /// `lambda * sum_i p_i`
    pub mu_transmit: f64,
    pub total: f64,
}

impl ObjectiveBreakdown {
    /// Static plus transmit power of the active APs.
    pub fn ap_side(&self) -> f64 {
        self.ap_static + self.ap_transmit
    }
}

/// Static power of the active APs, DL transmit power and weighted UL power.
pub fn weighted_total_power(
    solution: &BeamformingSolution,
    active: &ActiveSet,
    config: &NetworkConfig,
) -> Result<ObjectiveBreakdown> {
    let support = solution.support();
    if let Some(ap) = support.iter().find(|&n| !active.contains(n)) {
        return Err(Error::SleepingApTransmits { ap });
    }
    let ap_static: f64 = active.iter().map(|n| config.ap_static_power[n]).sum();
    let ap_transmit: f64 = solution.w_dl.iter().map(|w| norm_sqr(w)).sum();
    let mu_transmit = if config.weight == 0.0 {
        0.0
    } else {
        config.weight * solution.p_ul.iter().sum::<f64>()
    };
    Ok(ObjectiveBreakdown {
        ap_static,
        ap_transmit,
        mu_transmit,
        total: ap_static + ap_transmit + mu_transmit,
    })
}
