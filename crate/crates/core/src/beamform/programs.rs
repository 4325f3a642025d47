//! Conic programs over DL and virtual-DL beamformers.
//!
//! Every beamformer entry becomes two real variables (real, imaginary part).
//! Channels are divided by the noise amplitude so the SINR cones carry a unit
//! noise term. Since a common phase rotation of `w_i` changes neither SINR nor
//! power, `c_i^H w_i` is taken real and the SINR constraint becomes
//!
//! ```text
//! ||(c_i^H w_1, .., c_i^H w_K, 1)|| <= sqrt(1 + 1/gamma_i) Re(c_i^H w_i)
//! ```

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ActiveSet, CVec, Support};
use crate::conic::{self, AffineExpr, ConeProgram, ConeStatus, ProgramBuilder, SolverTolerances, Var};
use crate::error::{Error, Result};
use crate::scenario::{ChannelRealization, NetworkConfig};

/// Group-sparsity penalty on the per-AP beamformer blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    /// Euclidean norm of the stacked block
    #[default]
    L12,
    /// Largest entry magnitude in the block
    L1Inf,
}

/// State of an AP's on/off indicator in the relaxed program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoSetting {
    Off,
    On,
    Free,
}

/// Which pieces make up a joint program.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub dl: bool,
    pub vdl: bool,
    /// Objective weight on `sum_i ||w_vdl_i||^2`
    pub vdl_weight: f64,
    /// Per-AP weights (all APs) and penalty; zero weights drop the group cone
    pub group: Option<(Vec<f64>, Penalty)>,
    /// `sum_i ||w_dl_{i,n}||^2 <= P_dl_max_n` on every active AP
    pub per_ap_dl_limit: bool,
    /// `sum_i ||w_vdl_i||^2 <= sum_i P_ul_max_i`
    pub ul_sum_limit: bool,
    /// Relaxed indicators (all APs); replaces `per_ap_dl_limit` with the
    /// coupled DL and virtual-DL budget cones
    pub rho: Option<Vec<RhoSetting>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProgramOutcome<T> {
    Optimal(T),
    Infeasible,
    Failed(String),
}

impl<T> ProgramOutcome<T> {
    pub fn optimal(self) -> Option<T> {
        match self {
            ProgramOutcome::Optimal(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_optimal(&self) -> bool {
        matches!(self, ProgramOutcome::Optimal(_))
    }
}

/// Solution of a joint program, scattered back to full-length vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub w_dl: Vec<CVec>,
    pub w_vdl: Vec<CVec>,
    /// Per-AP group value under the program's penalty (L12 if none), zero on
    /// sleeping APs
    pub group: Vec<f64>,
    /// Indicator values; 1 on active APs when the program has none
    pub rho: Vec<f64>,
    /// Program objective including constant terms
    pub objective: f64,
    pub iterations: usize,
}

impl JointPoint {
    pub fn dl_power(&self) -> f64 {
        self.w_dl.iter().map(|w| super::norm_sqr(w)).sum()
    }

    pub fn vdl_power(&self) -> f64 {
        self.w_vdl.iter().map(|w| super::norm_sqr(w)).sum()
    }
}

/// A built program plus the map from its variables back to beamformers.
#[derive(Debug, Clone)]
pub struct JointProgram {
    pub program: ConeProgram,
    /// Objective terms that do not depend on the variables
    pub constant: f64,
    support: Support,
    block_sizes: Vec<usize>,
    num_aps: usize,
    num_mus: usize,
    dl_base: Option<usize>,
    vdl_base: Option<usize>,
    rho_vars: Vec<(usize, Var)>,
    rho: Option<Vec<RhoSetting>>,
    penalty: Penalty,
}

/// Real variables of one direction: `(re, im)` for MU `i`, compact antenna `a`.
struct Block {
    base: usize,
    mc: usize,
}

impl Block {
    fn re(&self, i: usize, a: usize) -> Var {
        Var(self.base + 2 * (i * self.mc + a))
    }

    fn im(&self, i: usize, a: usize) -> Var {
        Var(self.base + 2 * (i * self.mc + a) + 1)
    }

    /// `Re(c^H w_i)` and `Im(c^H w_i)`
    fn inner(&self, c: &[Complex64], i: usize) -> (AffineExpr, AffineExpr) {
        let mut re = AffineExpr::zero();
        let mut im = AffineExpr::zero();
        for (a, ca) in c.iter().enumerate() {
            re.add_term(self.re(i, a), ca.re);
            re.add_term(self.im(i, a), ca.im);
            im.add_term(self.im(i, a), ca.re);
            im.add_term(self.re(i, a), -ca.im);
        }
        (re, im)
    }

    fn entries(&self, users: std::ops::Range<usize>, antennas: std::ops::Range<usize>) -> Vec<AffineExpr> {
        let mut out = Vec::new();
        for i in users {
            for a in antennas.clone() {
                out.push(self.re(i, a).into());
                out.push(self.im(i, a).into());
            }
        }
        out
    }
}

fn add_block(b: &mut ProgramBuilder, tag: &str, k: usize, mc: usize) -> Block {
    let base = b.num_vars();
    for i in 0..k {
        for a in 0..mc {
            b.add_var(format!("{tag}[{i}][{a}].re"));
            b.add_var(format!("{tag}[{i}][{a}].im"));
        }
    }
    Block { base, mc }
}

fn add_sinr_cones(b: &mut ProgramBuilder, block: &Block, chans: &[CVec], qos: &[f64]) {
    let k = chans.len();
    for (i, c) in chans.iter().enumerate() {
        let mut exprs = Vec::with_capacity(2 * k + 2);
        let (own, _) = block.inner(c, i);
        exprs.push(own.scaled((1.0 + 1.0 / qos[i]).sqrt()));
        for j in 0..k {
            let (re, im) = block.inner(c, j);
            exprs.push(re);
            exprs.push(im);
        }
        exprs.push(AffineExpr::constant(1.0));
        b.add_soc(exprs);
    }
}

/// Builds the program described by `spec` over the antennas of `active`.
pub fn build_joint(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
    spec: &JointSpec,
) -> Result<JointProgram> {
    let n_aps = channels.num_aps();
    active.check(n_aps)?;
    if config.num_aps != n_aps || config.num_mus != channels.num_mus() {
        return Err(Error::DimensionMismatch(
            "channel realization does not match the network config".into(),
        ));
    }
    if !spec.dl && !spec.vdl {
        return Err(Error::InvalidProgram("program needs at least one direction".into()));
    }
    if let Some((beta, _)) = &spec.group {
        if beta.len() != n_aps || beta.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidProgram("group weights must be N nonnegative values".into()));
        }
    }
    if let Some(rho) = &spec.rho {
        if rho.len() != n_aps {
            return Err(Error::InvalidProgram("rho settings must cover every AP".into()));
        }
        if active.iter().any(|n| rho[n] == RhoSetting::Off) {
            return Err(Error::InvalidProgram("AP fixed off inside the active set".into()));
        }
    }

    let support = Support::new(channels, active);
    let k = channels.num_mus();
    let mc = support.len();
    let inv_sigma = config.noise_power.sqrt().recip();
    let normalize = |vs: &[CVec]| -> Vec<CVec> {
        vs.iter()
            .map(|v| support.gather(v).into_iter().map(|x| x * inv_sigma).collect())
            .collect()
    };
    // compact antenna range of each active AP, in support order
    let mut local = Vec::with_capacity(support.aps.len());
    let mut start = 0;
    for r in &support.ranges {
        local.push(start..start + r.len());
        start += r.len();
    }
    let ul_budget: f64 = config.mu_tx_limit.iter().sum();

    let mut b = ProgramBuilder::new();
    let dl = spec.dl.then(|| add_block(&mut b, "w_dl", k, mc));
    let vdl = spec.vdl.then(|| add_block(&mut b, "w_vdl", k, mc));

    if let Some(blk) = &dl {
        add_sinr_cones(&mut b, blk, &normalize(&channels.h), &config.qos_dl);
        let s = b.add_var("dl_power");
        b.set_cost(s, 1.0);
        b.add_squared_norm_bound(blk.entries(0..k, 0..mc), s.into());
    }
    if let Some(blk) = &vdl {
        add_sinr_cones(&mut b, blk, &normalize(&channels.g), &config.qos_ul);
        if spec.vdl_weight > 0.0 {
            let s = b.add_var("vdl_power");
            b.set_cost(s, spec.vdl_weight);
            b.add_squared_norm_bound(blk.entries(0..k, 0..mc), s.into());
        }
        if spec.ul_sum_limit {
            let mut exprs = vec![AffineExpr::constant(ul_budget.sqrt())];
            exprs.extend(blk.entries(0..k, 0..mc));
            b.add_soc(exprs);
        }
    }

    let penalty = spec.group.as_ref().map(|(_, p)| *p).unwrap_or_default();
    if let Some((beta, penalty)) = &spec.group {
        for (pos, &n) in support.aps.iter().enumerate() {
            if beta[n] == 0.0 {
                continue;
            }
            let t = b.add_var(format!("t[{n}]"));
            b.set_cost(t, beta[n]);
            let mut entries = Vec::new();
            for blk in dl.iter().chain(vdl.iter()) {
                entries.extend(blk.entries(0..k, local[pos].clone()));
            }
            match penalty {
                Penalty::L12 => {
                    let mut exprs = vec![AffineExpr::from(t)];
                    exprs.extend(entries);
                    b.add_soc(exprs);
                }
                Penalty::L1Inf => {
                    for pair in entries.chunks(2) {
                        b.add_soc(vec![t.into(), pair[0].clone(), pair[1].clone()]);
                    }
                }
            }
        }
    }

    let mut constant = 0.0;
    let mut rho_vars = Vec::new();
    match &spec.rho {
        None => {
            if let (Some(blk), true) = (&dl, spec.per_ap_dl_limit) {
                for (pos, &n) in support.aps.iter().enumerate() {
                    let mut exprs = vec![AffineExpr::constant(config.ap_tx_limit[n].sqrt())];
                    exprs.extend(blk.entries(0..k, local[pos].clone()));
                    b.add_soc(exprs);
                }
            }
        }
        Some(rho) => {
            let mut fixed_on = 0usize;
            for (pos, &n) in support.aps.iter().enumerate() {
                let bound = |b: &mut ProgramBuilder, blk: &Block, scale: f64, rho: Option<Var>| {
                    let entries = blk.entries(0..k, local[pos].clone());
                    match rho {
                        Some(r) => b.add_squared_norm_bound(entries, AffineExpr::term(r, scale)),
                        None => {
                            let mut exprs = vec![AffineExpr::constant(scale.sqrt())];
                            exprs.extend(entries);
                            b.add_soc(exprs);
                        }
                    }
                };
                let var = match rho[n] {
                    RhoSetting::Free => {
                        let r = b.add_var(format!("rho[{n}]"));
                        b.set_cost(r, config.ap_static_power[n]);
                        b.add_nonneg(r.into());
                        b.add_nonneg(AffineExpr::constant(1.0) - AffineExpr::from(r));
                        rho_vars.push((n, r));
                        Some(r)
                    }
                    _ => {
                        constant += config.ap_static_power[n];
                        fixed_on += 1;
                        None
                    }
                };
                if let Some(blk) = &dl {
                    bound(&mut b, blk, config.ap_tx_limit[n], var);
                }
                if let Some(blk) = &vdl {
                    bound(&mut b, blk, ul_budget, var);
                }
            }
            if fixed_on == 0 {
                let mut sum = AffineExpr::constant(-1.0);
                for &(_, r) in &rho_vars {
                    sum.add_term(r, 1.0);
                }
                b.add_nonneg(sum);
            }
        }
    }

    let program = b.build();
    program.validate()?;
    Ok(JointProgram {
        program,
        constant,
        block_sizes: channels.antennas_per_ap.clone(),
        support,
        num_aps: n_aps,
        num_mus: k,
        dl_base: dl.map(|x| x.base),
        vdl_base: vdl.map(|x| x.base),
        rho_vars,
        rho: spec.rho.clone(),
        penalty,
    })
}

impl JointProgram {
    fn beamformers(&self, base: Option<usize>, x: &[f64]) -> Vec<CVec> {
        let mc = self.support.len();
        (0..self.num_mus)
            .map(|i| match base {
                Some(base) => {
                    let compact: CVec = (0..mc)
                        .map(|a| {
                            let at = base + 2 * (i * mc + a);
                            Complex64::new(x[at], x[at + 1])
                        })
                        .collect();
                    self.support.scatter(&compact)
                }
                None => vec![Complex64::default(); self.support.full_len],
            })
            .collect()
    }

    pub fn extract(&self, solution: &conic::ConeSolution) -> JointPoint {
        let x = &solution.primal;
        let w_dl = self.beamformers(self.dl_base, x);
        let w_vdl = self.beamformers(self.vdl_base, x);
        let mut group = vec![0.0; self.num_aps];
        let mut start = 0;
        for (n, g) in group.iter_mut().enumerate() {
            let r = start..start + self.block_sizes[n];
            start = r.end;
            if !self.support.aps.contains(&n) {
                continue;
            }
            let entries = w_dl.iter().chain(&w_vdl).flat_map(|w| w[r.clone()].iter());
            *g = match self.penalty {
                Penalty::L12 => entries.map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
                Penalty::L1Inf => entries.map(|c| c.norm()).fold(0.0, f64::max),
            };
        }
        let mut rho: Vec<f64> = (0..self.num_aps)
            .map(|n| if self.support.aps.contains(&n) { 1.0 } else { 0.0 })
            .collect();
        if self.rho.is_some() {
            for &(n, v) in &self.rho_vars {
                rho[n] = x[v.0].clamp(0.0, 1.0);
            }
        }
        JointPoint {
            w_dl,
            w_vdl,
            group,
            rho,
            objective: solution.objective_value + self.constant,
            iterations: solution.iterations,
        }
    }

    pub fn solve(&self, tol: &SolverTolerances) -> Result<ProgramOutcome<JointPoint>> {
        let sol = conic::solve(&self.program, tol)?;
        Ok(match sol.status {
            ConeStatus::Optimal => ProgramOutcome::Optimal(self.extract(&sol)),
            ConeStatus::PrimalInfeasible => ProgramOutcome::Infeasible,
            ConeStatus::DualInfeasible => ProgramOutcome::Failed("program reported unbounded".into()),
            ConeStatus::NumericalFailure => {
                ProgramOutcome::Failed(sol.residuals.violations.join("; "))
            }
        })
    }
}

fn joint_base(config: &NetworkConfig) -> JointSpec {
    JointSpec {
        dl: true,
        vdl: true,
        vdl_weight: config.weight,
        group: None,
        per_ap_dl_limit: false,
        ul_sum_limit: false,
        rho: None,
    }
}

/// Penalized joint program without power budgets.
pub fn build_p4(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
    beta: &[f64],
    penalty: Penalty,
) -> Result<JointProgram> {
    let spec = JointSpec {
        group: Some((beta.to_vec(), penalty)),
        ..joint_base(config)
    };
    build_joint(config, channels, active, &spec)
}

/// [`build_p4`] plus per-AP DL budgets and the summed UL budget on the
/// virtual-DL beamformers.
pub fn build_p5(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
    beta: &[f64],
    penalty: Penalty,
) -> Result<JointProgram> {
    let spec = JointSpec {
        group: Some((beta.to_vec(), penalty)),
        per_ap_dl_limit: true,
        ul_sum_limit: true,
        ..joint_base(config)
    };
    build_joint(config, channels, active, &spec)
}

/// Relaxed on/off program. APs set `Off` are removed, `On` APs pay their
/// static power as a constant, `Free` APs carry an indicator in `[0, 1]`.
pub fn build_p6(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    rho: &[RhoSetting],
) -> Result<JointProgram> {
    let active = ActiveSet::new((0..rho.len()).filter(|&n| rho[n] != RhoSetting::Off).collect());
    let spec = JointSpec {
        ul_sum_limit: true,
        rho: Some(rho.to_vec()),
        ..joint_base(config)
    };
    build_joint(config, channels, &active, &spec)
}

pub fn build_min_power_dl(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
    per_ap_limits: bool,
) -> Result<JointProgram> {
    let spec = JointSpec {
        vdl: false,
        per_ap_dl_limit: per_ap_limits,
        ..joint_base(config)
    };
    build_joint(config, channels, active, &spec)
}

pub fn build_min_power_vdl(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
) -> Result<JointProgram> {
    let spec = JointSpec {
        dl: false,
        vdl_weight: 1.0,
        ..joint_base(config)
    };
    build_joint(config, channels, active, &spec)
}

/// Minimum sum-power DL beamformers meeting the DL targets, optionally
/// under the per-AP budgets.
pub fn min_power_dl_beamforming(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
    per_ap_limits: bool,
) -> Result<ProgramOutcome<JointPoint>> {
    build_min_power_dl(config, channels, active, per_ap_limits)?.solve(&SolverTolerances::default())
}

/// Minimum sum-power virtual-DL beamformers meeting the UL targets.
pub fn virtual_dl_beamforming(
    config: &NetworkConfig,
    channels: &ChannelRealization,
    active: &ActiveSet,
) -> Result<ProgramOutcome<JointPoint>> {
    build_min_power_vdl(config, channels, active)?.solve(&SolverTolerances::default())
}
