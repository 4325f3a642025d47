//! Network layouts and fading channel draws.
//!
//! APs and MUs live in a square of side `area_side` centered on the origin.
//! Channel power gain on a link is `d^-alpha * X` with `X ~ Exp(1)` drawn once
//! per MU-AP link; each antenna gets an independent uniform phase.

use std::ops::Range;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Links shorter than this are evaluated at this distance.
pub const MIN_DISTANCE: f64 = 1.0;

/// Reference distance used by the presets. With `d0 = 1 m` and -50 dBm noise
/// a 3 km square is almost never feasible at the preset SINR targets, so the
/// presets fold a fixed gain of `d0^alpha` into the pathloss.
pub const PRESET_PATHLOSS_REFERENCE: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DuplexMode {
    /// `g_i = conj(h_i)`
    #[default]
    TddReciprocal,
    /// DL and UL drawn independently
    FddIndependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Unit-mean exponential power gain per link
    #[default]
    Rayleigh,
    /// Pathloss only; the multiplicative factor is fixed to 1
    Unit,
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Network parameters with per-AP and per-MU quantities expanded.
/// SINR targets are linear here; the JSON form carries them in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkConfigFile", into = "NetworkConfigFile")]
pub struct NetworkConfig {
    pub num_aps: usize,
    pub num_mus: usize,
    pub antennas_per_ap: Vec<usize>,
    pub area_side: f64,
    pub pathloss_exponent: f64,
    /// Distance `d0` at which the mean pathloss gain is 1
    pub pathloss_reference: f64,
    pub noise_power: f64,
    pub ap_static_power: Vec<f64>,
    pub ap_tx_limit: Vec<f64>,
    pub mu_tx_limit: Vec<f64>,
    pub qos_dl: Vec<f64>,
    pub qos_ul: Vec<f64>,
    pub weight: f64,
    pub duplex_mode: DuplexMode,
    pub fading: FadingModel,
    pub fixed_ap_positions: Vec<[f64; 2]>,
    pub p_olt: f64,
}

/// Scalar-or-list field in the JSON config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, len: usize, field: &str) -> Result<Vec<T>> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); len]),
            OneOrMany::Many(vs) if vs.len() == len => Ok(vs.clone()),
            OneOrMany::Many(vs) => Err(Error::InvalidConfig(format!(
                "{field} has {} entries, expected {len}",
                vs.len()
            ))),
        }
    }
}

impl<T: Clone + PartialEq> OneOrMany<T> {
    fn compact(values: Vec<T>) -> Self {
        match values.first() {
            Some(first) if values.iter().all(|v| v == first) => OneOrMany::One(first.clone()),
            _ => OneOrMany::Many(values),
        }
    }
}

/// On-disk form of [`NetworkConfig`]. Units are SI except the SINR targets,
/// which are in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfigFile {
    pub num_aps: usize,
    pub num_mus: usize,
    pub antennas_per_ap: OneOrMany<usize>,
    pub area_side: f64,
    pub pathloss_exponent: f64,
    #[serde(default = "default_reference")]
    pub pathloss_reference: f64,
    pub noise_power: f64,
    pub ap_static_power: OneOrMany<f64>,
    pub ap_tx_limit: OneOrMany<f64>,
    pub mu_tx_limit: OneOrMany<f64>,
    pub qos_dl_db: OneOrMany<f64>,
    pub qos_ul_db: OneOrMany<f64>,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub duplex_mode: DuplexMode,
    #[serde(default)]
    pub fading: FadingModel,
    #[serde(default)]
    pub fixed_ap_positions: Vec<[f64; 2]>,
    #[serde(default)]
    pub p_olt: f64,
}

fn default_weight() -> f64 {
    1.0
}

fn default_reference() -> f64 {
    1.0
}

impl TryFrom<NetworkConfigFile> for NetworkConfig {
    type Error = Error;

    fn try_from(f: NetworkConfigFile) -> Result<Self> {
        let n = f.num_aps;
        let k = f.num_mus;
        let to_lin = |v: Vec<f64>| v.into_iter().map(db_to_linear).collect::<Vec<_>>();
        let config = NetworkConfig {
            num_aps: n,
            num_mus: k,
            antennas_per_ap: f.antennas_per_ap.expand(n, "antennas_per_ap")?,
            area_side: f.area_side,
            pathloss_exponent: f.pathloss_exponent,
            pathloss_reference: f.pathloss_reference,
            noise_power: f.noise_power,
            ap_static_power: f.ap_static_power.expand(n, "ap_static_power")?,
            ap_tx_limit: f.ap_tx_limit.expand(n, "ap_tx_limit")?,
            mu_tx_limit: f.mu_tx_limit.expand(k, "mu_tx_limit")?,
            qos_dl: to_lin(f.qos_dl_db.expand(k, "qos_dl_db")?),
            qos_ul: to_lin(f.qos_ul_db.expand(k, "qos_ul_db")?),
            weight: f.weight,
            duplex_mode: f.duplex_mode,
            fading: f.fading,
            fixed_ap_positions: f.fixed_ap_positions,
            p_olt: f.p_olt,
        };
        config.validate()?;
        Ok(config)
    }
}

impl From<NetworkConfig> for NetworkConfigFile {
    fn from(c: NetworkConfig) -> Self {
        let to_db = |v: Vec<f64>| v.into_iter().map(linear_to_db).collect::<Vec<_>>();
        NetworkConfigFile {
            num_aps: c.num_aps,
            num_mus: c.num_mus,
            antennas_per_ap: OneOrMany::compact(c.antennas_per_ap),
            area_side: c.area_side,
            pathloss_exponent: c.pathloss_exponent,
            pathloss_reference: c.pathloss_reference,
            noise_power: c.noise_power,
            ap_static_power: OneOrMany::compact(c.ap_static_power),
            ap_tx_limit: OneOrMany::compact(c.ap_tx_limit),
            mu_tx_limit: OneOrMany::compact(c.mu_tx_limit),
            qos_dl_db: OneOrMany::compact(to_db(c.qos_dl)),
            qos_ul_db: OneOrMany::compact(to_db(c.qos_ul)),
            weight: c.weight,
            duplex_mode: c.duplex_mode,
            fading: c.fading,
            fixed_ap_positions: c.fixed_ap_positions,
            p_olt: c.p_olt,
        }
    }
}

impl NetworkConfig {
    /// Homogeneous setup: 2 W static, 1 W per-AP budget, 2 antennas per AP,
    /// 0.5 W per-MU budget, 3 km square, pathloss exponent 3, -50 dBm noise,
    /// equal 8 dB targets.
    pub fn homogeneous(num_aps: usize, num_mus: usize) -> Self {
        NetworkConfig {
            num_aps,
            num_mus,
            antennas_per_ap: vec![2; num_aps],
            area_side: 3000.0,
            pathloss_exponent: 3.0,
            pathloss_reference: PRESET_PATHLOSS_REFERENCE,
            noise_power: 1e-8,
            ap_static_power: vec![2.0; num_aps],
            ap_tx_limit: vec![1.0; num_aps],
            mu_tx_limit: vec![0.5; num_mus],
            qos_dl: vec![db_to_linear(8.0); num_mus],
            qos_ul: vec![db_to_linear(8.0); num_mus],
            weight: 1.0,
            duplex_mode: DuplexMode::TddReciprocal,
            fading: FadingModel::Rayleigh,
            fixed_ap_positions: Vec::new(),
            p_olt: 20.0,
        }
    }

    /// Heterogeneous setup: the first two APs are high-power APs (50 W
    /// static, 20 W budget) pinned at (-750, 0) and (750, 0); the rest are
    /// low-power APs as in [`NetworkConfig::homogeneous`].
    pub fn heterogeneous(num_aps: usize, num_mus: usize) -> Self {
        assert!(num_aps >= 2, "heterogeneous layout needs the two HAPs");
        let mut c = Self::homogeneous(num_aps, num_mus);
        for n in 0..2 {
            c.ap_static_power[n] = 50.0;
            c.ap_tx_limit[n] = 20.0;
        }
        c.fixed_ap_positions = vec![[-750.0, 0.0], [750.0, 0.0]];
        c
    }

    pub fn total_antennas(&self) -> usize {
        self.antennas_per_ap.iter().sum()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.num_aps == 0 {
            return bad("num_aps must be positive".into());
        }
        if self.num_mus == 0 {
            return bad("num_mus must be positive".into());
        }
        if self.antennas_per_ap.len() != self.num_aps
            || self.ap_static_power.len() != self.num_aps
            || self.ap_tx_limit.len() != self.num_aps
        {
            return bad("per-AP vectors must have num_aps entries".into());
        }
        if self.mu_tx_limit.len() != self.num_mus
            || self.qos_dl.len() != self.num_mus
            || self.qos_ul.len() != self.num_mus
        {
            return bad("per-MU vectors must have num_mus entries".into());
        }
        if self.antennas_per_ap.iter().any(|&m| m == 0) {
            return bad("every AP needs at least one antenna".into());
        }
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.area_side)
            || !positive(self.pathloss_exponent)
            || !positive(self.pathloss_reference)
            || !positive(self.noise_power)
        {
            return bad("area, pathloss and noise parameters must be positive".into());
        }
        for (name, vals) in [
            ("ap_static_power", &self.ap_static_power),
            ("ap_tx_limit", &self.ap_tx_limit),
            ("mu_tx_limit", &self.mu_tx_limit),
            ("qos_dl", &self.qos_dl),
            ("qos_ul", &self.qos_ul),
        ] {
            if !vals.iter().all(|&v| positive(v)) {
                return bad(format!("{name} entries must be positive"));
            }
        }
        if !(self.weight >= 0.0 && self.weight.is_finite()) {
            return bad("weight must be nonnegative".into());
        }
        if self.p_olt < 0.0 {
            return bad("p_olt must be nonnegative".into());
        }
        if self.fixed_ap_positions.len() > self.num_aps {
            return bad("more fixed AP positions than APs".into());
        }
        let half = self.area_side / 2.0;
        if self
            .fixed_ap_positions
            .iter()
            .any(|p| p[0].abs() > half || p[1].abs() > half)
        {
            return bad("fixed AP position outside the area".into());
        }
        Ok(())
    }

    /// Changes the MU count, replicating the (uniform) per-MU settings.
    pub fn set_num_mus(&mut self, k: usize) -> Result<()> {
        let uniform = |v: &[f64]| v.iter().all(|x| *x == v[0]);
        if !(uniform(&self.mu_tx_limit) && uniform(&self.qos_dl) && uniform(&self.qos_ul)) {
            return Err(Error::InvalidConfig(
                "cannot resize MU set with non-uniform per-MU settings".into(),
            ));
        }
        self.num_mus = k;
        self.mu_tx_limit = vec![self.mu_tx_limit[0]; k];
        self.qos_dl = vec![self.qos_dl[0]; k];
        self.qos_ul = vec![self.qos_ul[0]; k];
        self.validate()
    }

    pub fn set_sinr_targets_db(&mut self, dl_db: f64, ul_db: f64) {
        self.qos_dl = vec![db_to_linear(dl_db); self.num_mus];
        self.qos_ul = vec![db_to_linear(ul_db); self.num_mus];
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: NetworkConfig,
    pub ap_positions: Vec<[f64; 2]>,
    pub mu_positions: Vec<[f64; 2]>,
    pub seed: u64,
}

impl Scenario {
    pub fn distance(&self, mu: usize, ap: usize) -> f64 {
        let a = self.ap_positions[ap];
        let b = self.mu_positions[mu];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
    }

    /// Deterministic pathloss factor `(max(d, 1 m) / d0)^-alpha`.
    pub fn pathloss(&self, mu: usize, ap: usize) -> f64 {
        (self.distance(mu, ap).max(MIN_DISTANCE) / self.config.pathloss_reference)
            .powf(-self.config.pathloss_exponent)
    }
}

/// Places APs (honoring fixed positions, in order) and MUs uniformly in the
/// area.
pub fn generate_scenario(config: &NetworkConfig, seed: u64) -> Result<Scenario> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = config.area_side / 2.0;
    let draw = |rng: &mut ChaCha8Rng| [rng.random_range(-half..=half), rng.random_range(-half..=half)];
    let mut ap_positions = config.fixed_ap_positions.clone();
    while ap_positions.len() < config.num_aps {
        ap_positions.push(draw(&mut rng));
    }
    let mu_positions = (0..config.num_mus).map(|_| draw(&mut rng)).collect();
    Ok(Scenario {
        config: config.clone(),
        ap_positions,
        mu_positions,
        seed,
    })
}

/// DL and UL channels of all MUs; vectors are stacked AP by AP.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub antennas_per_ap: Vec<usize>,
    /// `h[i]`: DL channel to MU `i`, length `M`
    pub h: Vec<Vec<Complex64>>,
    /// `g[i]`: UL channel from MU `i`, length `M`
    pub g: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    pub fn new(
        antennas_per_ap: Vec<usize>,
        h: Vec<Vec<Complex64>>,
        g: Vec<Vec<Complex64>>,
    ) -> Result<Self> {
        let m: usize = antennas_per_ap.iter().sum();
        if h.len() != g.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} DL vs {} UL channel vectors",
                h.len(),
                g.len()
            )));
        }
        if h.iter().chain(&g).any(|v| v.len() != m) {
            return Err(Error::DimensionMismatch(format!(
                "channel vectors must have {m} entries"
            )));
        }
        Ok(ChannelRealization {
            antennas_per_ap,
            h,
            g,
        })
    }

    /// Reciprocal channels: `g_i = conj(h_i)`.
    pub fn reciprocal(antennas_per_ap: Vec<usize>, h: Vec<Vec<Complex64>>) -> Result<Self> {
        let g = h.iter().map(|v| v.iter().map(|c| c.conj()).collect()).collect();
        Self::new(antennas_per_ap, h, g)
    }

    pub fn num_mus(&self) -> usize {
        self.h.len()
    }

    pub fn num_aps(&self) -> usize {
        self.antennas_per_ap.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.antennas_per_ap.iter().sum()
    }

    pub fn ap_block(&self, ap: usize) -> Range<usize> {
        let start: usize = self.antennas_per_ap[..ap].iter().sum();
        start..start + self.antennas_per_ap[ap]
    }

    /// `||h_{i,n}||^2`
    pub fn dl_gain(&self, mu: usize, ap: usize) -> f64 {
        self.h[mu][self.ap_block(ap)].iter().map(|c| c.norm_sqr()).sum()
    }

    /// `||g_{i,n}||^2`
    pub fn ul_gain(&self, mu: usize, ap: usize) -> f64 {
        self.g[mu][self.ap_block(ap)].iter().map(|c| c.norm_sqr()).sum()
    }
}

fn draw_link(rng: &mut ChaCha8Rng, pathloss: f64, fading: FadingModel, antennas: usize) -> Vec<Complex64> {
    let factor: f64 = match fading {
        FadingModel::Rayleigh => Exp1.sample(rng),
        FadingModel::Unit => 1.0,
    };
    let amplitude = (pathloss * factor).sqrt();
    (0..antennas)
        .map(|_| {
            let phase = rng.random_range(0.0..std::f64::consts::TAU);
            Complex64::from_polar(amplitude, phase)
        })
        .collect()
}

pub fn sample_channel(scenario: &Scenario, seed: u64) -> ChannelRealization {
    let cfg = &scenario.config;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let link_vectors = |rng: &mut ChaCha8Rng| -> Vec<Vec<Complex64>> {
        (0..cfg.num_mus)
            .map(|i| {
                (0..cfg.num_aps)
                    .flat_map(|n| {
                        draw_link(rng, scenario.pathloss(i, n), cfg.fading, cfg.antennas_per_ap[n])
                    })
                    .collect()
            })
            .collect()
    };
    let h = link_vectors(&mut rng);
    let g = match cfg.duplex_mode {
        DuplexMode::TddReciprocal => h
            .iter()
            .map(|v| v.iter().map(|c| c.conj()).collect())
            .collect(),
        DuplexMode::FddIndependent => link_vectors(&mut rng),
    };
    ChannelRealization {
        antennas_per_ap: cfg.antennas_per_ap.clone(),
        h,
        g,
    }
}
