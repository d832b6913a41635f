//! Monte Carlo drop loop.

use std::collections::BTreeMap;
use std::time::Instant;

use log::{debug, info, warn};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::antenna::{build_codebook, Codebook};
use crate::channel::{
    apply_csi_error, draw_clustered, draw_rayleigh, ChannelMatrix, ChannelModel, ImperfectCsiConfig,
};
use crate::metrics::{linear_to_db, sinr, DropMetrics, EmpiricalDistribution, LinkBudget};
use crate::precoding::{build_precoder, equivalent_matrix, PrecoderContext, PrecoderKind};
use crate::{Error, Result, C64};

use super::config::ScenarioConfig;
use super::seed::drop_seed;

/// Percentiles reported per precoder.
pub const REPORTED_PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

/// A precoder that could not be built for one drop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecoderFailure {
    pub drop: u64,
    pub precoder: PrecoderKind,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropOutcome {
    pub drop: u64,
    pub seed: u64,
    /// One entry per successfully built precoder, in configured order.
    pub metrics: Vec<DropMetrics>,
    pub failures: Vec<PrecoderFailure>,
}

/// Aggregates of one precoder over a cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrecoderSummary {
    pub precoder: PrecoderKind,
    pub samples: usize,
    pub failures: usize,
    /// `p5`, `p25`, `p50`, `p75`, `p95` of the SINR in dB.
    pub sinr_percentiles_db: BTreeMap<String, f64>,
    /// Order-statistic ~95% interval of the median SINR, dB.
    pub median_sinr_ci_db: (f64, f64),
    /// Mean per-UE capacity over UEs and drops, bits/s/Hz.
    pub mean_capacity_bps_hz: f64,
    /// Mean over drops of the sum capacity of the M UEs, bits/s/Hz.
    pub sum_capacity_bps_hz: f64,
    #[serde(skip)]
    pub sinr_db: Option<EmpiricalDistribution>,
}

/// Everything produced by one (channel model, tau, power) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub channel_model: ChannelModel,
    pub tau: f64,
    pub tx_power_dbm: f64,
    pub drops: u64,
    pub summaries: Vec<PrecoderSummary>,
    pub failures: Vec<PrecoderFailure>,
    #[serde(skip)]
    pub records: Vec<DropMetrics>,
}

impl CellResult {
    pub fn summary(&self, kind: PrecoderKind) -> Option<&PrecoderSummary> {
        self.summaries.iter().find(|s| s.precoder == kind)
    }

    /// SINR distribution (dB) of a precoder; `None` if it never succeeded.
    pub fn distribution(&self, kind: PrecoderKind) -> Option<&EmpiricalDistribution> {
        self.summary(kind).and_then(|s| s.sinr_db.as_ref())
    }

    pub fn records_for(&self, kind: PrecoderKind) -> impl Iterator<Item = &DropMetrics> {
        self.records.iter().filter(move |r| r.precoder == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RuntimeInfo {
    pub version: String,
    pub jobs: usize,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationResult {
    pub config: ScenarioConfig,
    pub cells: Vec<CellResult>,
    pub runtime: RuntimeInfo,
}

/// Runs drops for one cell of a scenario.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: ScenarioConfig,
    codebook: Codebook,
    csi: ImperfectCsiConfig,
}

impl Simulator {
    /// Prepares a simulator for the scalar cell of `cfg` (any grid or sweep
    /// section is ignored; use [`run_experiment`] for those).
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let codebook = build_codebook(
            &cfg.array,
            cfg.codebook.oversampling_vertical,
            cfg.codebook.oversampling_horizontal,
            cfg.phase_bits,
        )?;
        Ok(Simulator {
            csi: ImperfectCsiConfig::new(cfg.tau)?,
            cfg: ScenarioConfig {
                grid: None,
                sweep: None,
                ..cfg.clone()
            },
            codebook,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn codebook(&self) -> &Codebook {
        &self.codebook
    }

    /// Draws the true channel of a drop.
    pub fn draw_channel(&self, rng: &mut ChaCha8Rng) -> Result<ChannelMatrix> {
        let cfg = &self.cfg;
        let params = cfg.channel.for_model(cfg.channel_model);
        let links = (0..cfg.num_ues)
            .map(|_| params.draw_served_link(cfg.distance_m, cfg.shadowing, rng))
            .collect::<Result<Vec<_>>>()?;
        match cfg.channel_model {
            ChannelModel::Rayleigh => draw_rayleigh(cfg.num_antennas(), links, rng),
            model => {
                let mut h = DMatrix::<C64>::zeros(cfg.num_antennas(), cfg.num_ues);
                for (m, link) in links.iter().enumerate() {
                    let (_, column) = draw_clustered(params, &cfg.array, &cfg.element, link, rng)?;
                    h.column_mut(m).copy_from(&column);
                }
                Ok(ChannelMatrix { h, links, model })
            }
        }
    }

    /// One Monte Carlo drop: a single channel (and CSI error) realization
    /// shared by every configured precoder.
    pub fn run_drop(&self, drop_index: u64) -> Result<DropOutcome> {
        let cfg = &self.cfg;
        let seed = drop_seed(cfg.master_seed, drop_index);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let channel = self.draw_channel(&mut rng)?;
        let estimate = apply_csi_error(&channel, self.csi, &mut rng);

        let budget = LinkBudget {
            tx_power_dbm: cfg.tx_power_dbm,
            noise_figure_db: cfg.noise_figure_db,
            bandwidth_hz: cfg.bandwidth_hz,
            per_ue_path_loss_db: channel.links.iter().map(|l| l.path_loss_db).collect(),
        };
        let snrs = budget.snrs_linear();
        let snr_db: Vec<f64> = snrs.iter().map(|&s| linear_to_db(s)).collect();
        let ctx = PrecoderContext {
            codebook: &self.codebook,
            snr: cfg.precoder_snr.reduce(&snrs),
            quantize_linear_bits: cfg.quantize_all_precoders.then_some(cfg.phase_bits),
        };

        let mut metrics = Vec::with_capacity(cfg.precoders.len());
        let mut failures = Vec::new();
        for &kind in &cfg.precoders {
            let precoder = match build_precoder(kind, &estimate.h, &ctx) {
                Ok(p) => p,
                Err(e @ (Error::ZfSingular { .. } | Error::NotPositiveDefinite { .. })) => {
                    warn!("drop {drop_index}: {e}");
                    failures.push(PrecoderFailure {
                        drop: drop_index,
                        precoder: kind,
                        reason: e.to_string(),
                    });
                    continue;
                }
                Err(e) => return Err(e),
            };
            let eq = equivalent_matrix(&channel.h, &precoder)?;
            let sinrs = sinr(&eq, &snrs);
            metrics.push(DropMetrics::new(
                drop_index,
                kind,
                seed,
                &sinrs,
                snr_db.clone(),
                precoder.beams,
            ));
        }
        Ok(DropOutcome {
            drop: drop_index,
            seed,
            metrics,
            failures,
        })
    }

    /// Runs drops `0..cfg.drops` on `jobs` worker threads (`0` = current
    /// thread only). Output is identical for every `jobs` value.
    pub fn run(&self, jobs: usize) -> Result<CellResult> {
        let drops = self.cfg.drops;
        let outcomes: Vec<DropOutcome> = if jobs == 0 {
            (0..drops)
                .map(|d| self.run_drop(d))
                .collect::<Result<_>>()?
        } else {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            pool.install(|| {
                (0..drops)
                    .into_par_iter()
                    .map(|d| self.run_drop(d))
                    .collect::<Result<_>>()
            })?
        };
        Ok(self.aggregate(outcomes))
    }

    fn aggregate(&self, outcomes: Vec<DropOutcome>) -> CellResult {
        let cfg = &self.cfg;
        let mut records = Vec::with_capacity(outcomes.len() * cfg.precoders.len());
        let mut failures = Vec::new();
        for outcome in outcomes {
            records.extend(outcome.metrics);
            failures.extend(outcome.failures);
        }
        let summaries = cfg
            .precoders
            .iter()
            .map(|&kind| summarize(kind, &records, &failures, cfg.drops))
            .collect();
        CellResult {
            channel_model: cfg.channel_model,
            tau: cfg.tau,
            tx_power_dbm: cfg.tx_power_dbm,
            drops: cfg.drops,
            summaries,
            failures,
            records,
        }
    }
}

fn summarize(
    kind: PrecoderKind,
    records: &[DropMetrics],
    failures: &[PrecoderFailure],
    drops: u64,
) -> PrecoderSummary {
    let mine: Vec<&DropMetrics> = records.iter().filter(|r| r.precoder == kind).collect();
    let failed = failures.iter().filter(|f| f.precoder == kind).count();
    debug_assert_eq!(mine.len() + failed, drops as usize);

    let sinr_samples: Vec<f64> = mine
        .iter()
        .flat_map(|r| r.sinr_db.iter().copied())
        .collect();
    let capacities: Vec<f64> = mine
        .iter()
        .flat_map(|r| r.capacity_bits.iter().copied())
        .collect();
    let samples = sinr_samples.len();
    let dist = EmpiricalDistribution::new(sinr_samples).ok();

    let mut sinr_percentiles_db = BTreeMap::new();
    let mut median_sinr_ci_db = (f64::NAN, f64::NAN);
    if let Some(d) = &dist {
        for p in REPORTED_PERCENTILES {
            sinr_percentiles_db.insert(format!("p{p}"), d.percentile(p));
        }
        median_sinr_ci_db = d.median_confidence_interval();
    }
    let mean_capacity = if capacities.is_empty() {
        f64::NAN
    } else {
        capacities.iter().sum::<f64>() / capacities.len() as f64
    };
    let sum_capacity = if mine.is_empty() {
        f64::NAN
    } else {
        mine.iter().map(|r| r.sum_capacity()).sum::<f64>() / mine.len() as f64
    };
    PrecoderSummary {
        precoder: kind,
        samples,
        failures: failed,
        sinr_percentiles_db,
        median_sinr_ci_db,
        mean_capacity_bps_hz: mean_capacity,
        sum_capacity_bps_hz: sum_capacity,
        sinr_db: dist,
    }
}

/// Runs every cell of `cfg` (its grid, or the scalar cell).
pub fn run_experiment(cfg: &ScenarioConfig, jobs: usize) -> Result<SimulationResult> {
    cfg.validate()?;
    let start = Instant::now();
    let mut cells = Vec::new();
    for cell in cfg.cells() {
        info!(
            "{}: {} drops, {} channel, tau = {}",
            cfg.name, cell.drops, cell.channel_model, cell.tau
        );
        cells.push(Simulator::new(&cell)?.run(jobs)?);
    }
    Ok(SimulationResult {
        config: cfg.clone(),
        cells,
        runtime: RuntimeInfo {
            version: crate::sim::version().to_string(),
            jobs,
            elapsed_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// One row of the capacity-vs-power table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub channel_model: ChannelModel,
    pub tau: f64,
    pub tx_power_dbm: f64,
    pub precoder: PrecoderKind,
    pub mean_capacity_bps_hz: f64,
    pub sum_capacity_bps_hz: f64,
    pub median_sinr_db: f64,
    pub samples: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: ScenarioConfig,
    pub rows: Vec<SweepRow>,
    pub runtime: RuntimeInfo,
}

impl SweepResult {
    /// Mean capacity of `kind` at `power` in the given cell.
    pub fn mean_capacity(
        &self,
        model: ChannelModel,
        tau: f64,
        kind: PrecoderKind,
        power_dbm: f64,
    ) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| {
                r.channel_model == model
                    && r.tau == tau
                    && r.precoder == kind
                    && r.tx_power_dbm == power_dbm
            })
            .map(|r| r.mean_capacity_bps_hz)
    }
}

/// Re-runs every cell at each transmit power. Drop seeds do not depend on
/// the power, so all points share the same channel realizations.
pub fn sweep_tx_power(
    cfg: &ScenarioConfig,
    powers_dbm: &[f64],
    jobs: usize,
) -> Result<SweepResult> {
    cfg.validate()?;
    if powers_dbm.is_empty() {
        return Err(Error::config("sweep.tx_powers_dbm", "must not be empty"));
    }
    let start = Instant::now();
    let mut rows = Vec::new();
    for cell in cfg.cells() {
        for &power in powers_dbm {
            debug!("sweep {} at {power} dBm", cell.channel_model);
            let point = ScenarioConfig {
                tx_power_dbm: power,
                ..cell.clone()
            };
            let result = Simulator::new(&point)?.run(jobs)?;
            for s in &result.summaries {
                rows.push(SweepRow {
                    channel_model: result.channel_model,
                    tau: result.tau,
                    tx_power_dbm: power,
                    precoder: s.precoder,
                    mean_capacity_bps_hz: s.mean_capacity_bps_hz,
                    sum_capacity_bps_hz: s.sum_capacity_bps_hz,
                    median_sinr_db: s
                        .sinr_db
                        .as_ref()
                        .map_or(f64::NAN, EmpiricalDistribution::median),
                    samples: s.samples,
                    failures: s.failures,
                });
            }
        }
    }
    Ok(SweepResult {
        config: cfg.clone(),
        rows,
        runtime: RuntimeInfo {
            version: crate::sim::version().to_string(),
            jobs,
            elapsed_s: start.elapsed().as_secs_f64(),
        },
    })
}

/// Median SINR gap of each linear precoder against GoB-SLNR, per cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MedianGap {
    pub channel_model: ChannelModel,
    pub tau: f64,
    pub precoder: PrecoderKind,
    pub reference: PrecoderKind,
    pub gap_db: f64,
}

pub fn median_gaps(result: &SimulationResult) -> Vec<MedianGap> {
    let reference = PrecoderKind::GobSlnr;
    let mut gaps = Vec::new();
    for cell in &result.cells {
        let Some(base) = cell.distribution(reference) else {
            continue;
        };
        for kind in [
            PrecoderKind::MatchedFilter,
            PrecoderKind::ZeroForcing,
            PrecoderKind::Mmse,
        ] {
            if let Some(d) = cell.distribution(kind) {
                gaps.push(MedianGap {
                    channel_model: cell.channel_model,
                    tau: cell.tau,
                    precoder: kind,
                    reference,
                    gap_db: crate::metrics::median_gap(d, base),
                });
            }
        }
    }
    gaps
}
