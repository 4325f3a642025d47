//! Monte Carlo experiments: sweep a parameter, run several schemes on the
//! same channel draws, and reduce the records to tables and series.

mod aggregate;
mod demo;
mod emit;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithms::{run_scheme, Scheme, DEFAULT_ES_CAP};
use crate::error::{Error, Result};
use crate::scenario::{generate_scenario, sample_channel, NetworkConfig};

pub use aggregate::{aggregate, SummaryRow};
pub use demo::{demo_fig1, DemoFig1, DemoPanel};
pub use emit::{emit, read_records, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Feasibility,
    SumPower,
    Tradeoff,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Feasibility => "feasibility",
            Mode::SumPower => "sum_power",
            Mode::Tradeoff => "tradeoff",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        [Mode::Feasibility, Mode::SumPower, Mode::Tradeoff]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown mode {s}"))
    }
}

/// Parameter varied across sweep points. SINR pairs are `[DL, UL]` in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum Sweep {
    #[default]
    None,
    NumMus(Vec<usize>),
    ApStaticPower(Vec<f64>),
    Lambda(Vec<f64>),
    SinrTargets(Vec<[f64; 2]>),
}

/// One setting of the swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub index: usize,
    pub label: String,
    /// Numeric x coordinate for series output; the DL target for SINR pairs
    pub value: f64,
    pub config: NetworkConfig,
}

impl Sweep {
    pub fn len(&self) -> usize {
        match self {
            Sweep::None => 1,
            Sweep::NumMus(v) => v.len(),
            Sweep::ApStaticPower(v) | Sweep::Lambda(v) => v.len(),
            Sweep::SinrTargets(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self, base: &NetworkConfig) -> Result<Vec<SweepPoint>> {
        let mut out = Vec::with_capacity(self.len());
        for index in 0..self.len() {
            let mut config = base.clone();
            let (label, value) = match self {
                Sweep::None => ("base".to_string(), 0.0),
                Sweep::NumMus(v) => {
                    config.set_num_mus(v[index])?;
                    (format!("K={}", v[index]), v[index] as f64)
                }
                Sweep::ApStaticPower(v) => {
                    config.ap_static_power = vec![v[index]; config.num_aps];
                    (format!("Pc={}", v[index]), v[index])
                }
                Sweep::Lambda(v) => {
                    config.weight = v[index];
                    (format!("lambda={}", v[index]), v[index])
                }
                Sweep::SinrTargets(v) => {
                    let [dl, ul] = v[index];
                    config.set_sinr_targets_db(dl, ul);
                    (format!("{dl}/{ul}dB"), dl)
                }
            };
            config.validate()?;
            out.push(SweepPoint {
                index,
                label,
                value,
                config,
            });
        }
        Ok(out)
    }
}

fn default_es_cap() -> usize {
    DEFAULT_ES_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub base: NetworkConfig,
    #[serde(default)]
    pub sweep: Sweep,
    pub num_trials: usize,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
    pub mode: Mode,
    /// Networks larger than this skip the exhaustive search
    #[serde(default = "default_es_cap")]
    pub es_cap: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("at least one scheme is required".into()));
        }
        if self.sweep.is_empty() {
            return Err(Error::InvalidConfig("sweep has no points".into()));
        }
        self.base.validate()?;
        self.sweep.points(&self.base).map(|_| ())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub mode: Mode,
    pub sweep_index: usize,
    pub sweep_label: String,
    pub sweep_value: f64,
    pub trial_index: usize,
    pub scheme: Scheme,
    pub feasible: bool,
    pub ap_static: f64,
    pub ap_transmit: f64,
    pub mu_transmit: f64,
    pub total: f64,
    pub active_count: usize,
    pub wall_time_s: f64,
    pub diagnostic: String,
}

/// A scheme left out of a sweep point, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipMarker {
    pub sweep_index: usize,
    pub scheme: Scheme,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ExperimentOutput {
    pub records: Vec<TrialRecord>,
    pub skipped: Vec<SkipMarker>,
}

/// Seeds for `(trial, stream)` from the master seed, via the splitmix64
/// finalizer. Each trial's seeds depend only on its own index.
pub fn trial_seed(master_seed: u64, trial: usize, stream: u64) -> u64 {
    let mut z = master_seed
        ^ (trial as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ stream.wrapping_mul(0xd1b5_4a32_d192_ed03);
    for _ in 0..2 {
        z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

pub const PLACEMENT_STREAM: u64 = 0;
pub const FADING_STREAM: u64 = 1;

fn run_trial(cfg: &ExperimentConfig, point: &SweepPoint, trial: usize, schemes: &[Scheme]) -> Vec<TrialRecord> {
    let base = |scheme: Scheme| TrialRecord {
        mode: cfg.mode,
        sweep_index: point.index,
        sweep_label: point.label.clone(),
        sweep_value: point.value,
        trial_index: trial,
        scheme,
        feasible: false,
        ap_static: 0.0,
        ap_transmit: 0.0,
        mu_transmit: 0.0,
        total: 0.0,
        active_count: 0,
        wall_time_s: 0.0,
        diagnostic: String::new(),
    };
    let scenario = match generate_scenario(&point.config, trial_seed(cfg.master_seed, trial, PLACEMENT_STREAM)) {
        Ok(s) => s,
        Err(e) => {
            return schemes
                .iter()
                .map(|&s| TrialRecord {
                    diagnostic: e.to_string(),
                    ..base(s)
                })
                .collect()
        }
    };
    let channels = sample_channel(&scenario, trial_seed(cfg.master_seed, trial, FADING_STREAM));
    schemes
        .iter()
        .map(|&scheme| {
            let start = Instant::now();
            let outcome = run_scheme(scheme, &scenario, &channels);
            let wall_time_s = start.elapsed().as_secs_f64();
            match outcome {
                Ok(r) => TrialRecord {
                    feasible: r.feasible,
                    ap_static: r.objective.ap_static,
                    ap_transmit: r.objective.ap_transmit,
                    mu_transmit: r.objective.mu_transmit,
                    total: r.objective.total,
                    active_count: if r.feasible { r.active.len() } else { 0 },
                    wall_time_s,
                    diagnostic: r.diagnostics.join("; "),
                    ..base(scheme)
                },
                Err(e) => TrialRecord {
                    wall_time_s,
                    diagnostic: format!("scheme error: {e}"),
                    ..base(scheme)
                },
            }
        })
        .collect()
}

/// Runs every scheme on every `(sweep point, trial)` pair on the calling
/// thread pool. Records come back sorted by sweep point, trial and scheme
/// whatever the execution order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let points = cfg.sweep.points(&cfg.base)?;
    let mut skipped = Vec::new();
    let mut per_point: Vec<Vec<Scheme>> = Vec::new();
    for p in &points {
        let mut schemes = cfg.schemes.clone();
        schemes.sort();
        schemes.dedup();
        if p.config.num_aps > cfg.es_cap && schemes.contains(&Scheme::Es) {
            schemes.retain(|s| *s != Scheme::Es);
            skipped.push(SkipMarker {
                sweep_index: p.index,
                scheme: Scheme::Es,
                reason: format!("N={} exceeds the exhaustive-search cap {}", p.config.num_aps, cfg.es_cap),
            });
        }
        per_point.push(schemes);
    }
    let jobs: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..cfg.num_trials).map(move |t| (p, t)))
        .collect();
    let mut records: Vec<TrialRecord> = jobs
        .par_iter()
        .flat_map_iter(|&(p, t)| run_trial(cfg, &points[p], t, &per_point[p]))
        .collect();
    records.sort_by(|a, b| {
        (a.sweep_index, a.trial_index, a.scheme).cmp(&(b.sweep_index, b.trial_index, b.scheme))
    });
    Ok(ExperimentOutput { records, skipped })
}

/// [`run_experiment`] on a dedicated pool of `workers` threads.
pub fn run_experiment_with_workers(cfg: &ExperimentConfig, workers: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
    pool.install(|| run_experiment(cfg))
}
