//! Channel generation: i.i.d. Rayleigh baseline, clustered geometric channels
//! (NYU-style and 3GPP-UMa-style statistics), distance-dependent path loss with
//! LOS / NLOS / outage states, and Gauss-Markov imperfect CSI.
//!
//! A clustered link is
//!
//! ```text
//! h = sum_k sum_l g_kl * F(dir_kl) * u(dir_kl)
//! ```
//!
//! with small-scale gains `g_kl` normalized so that `E[sum |g_kl|^2] = 1`.
//! Large-scale loss is kept out of `h`; it only enters the link budget.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::antenna::{
    field_factor, steering_phase_steps, ArrayGeometry, Direction, ElementPattern,
};
use crate::linalg::frobenius_normalized;
use crate::{Error, Result, C64};

/// Upper bound on condition redraws before a link is declared unusable.
const MAX_OUTAGE_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Rayleigh,
    Nyu,
    Uma,
}

impl ChannelModel {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelModel::Rayleigh => "rayleigh",
            ChannelModel::Nyu => "nyu",
            ChannelModel::Uma => "uma",
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkCondition {
    Los,
    Nlos,
    Outage,
}

/// Large-scale state of one gNB-UE link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkState {
    pub condition: LinkCondition,
    /// Infinite for links in outage.
    pub path_loss_db: f64,
    pub distance_m: f64,
}

/// `PL = intercept + 10 * exponent * log10(d) + X`, `X ~ N(0, shadowing_std^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossParams {
    pub intercept_db: f64,
    pub exponent: f64,
    pub shadowing_std_db: f64,
}

impl PathLossParams {
    pub fn mean_db(&self, distance_m: f64) -> f64 {
        self.intercept_db + 10.0 * self.exponent * distance_m.log10()
    }
}

/// Distance-dependent link-state probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConditionModel {
    /// `p_out = max(0, 1 - exp(-outage_slope * d + outage_offset))`,
    /// `p_los = (1 - p_out) * exp(-d / los_decay_m)`.
    Nyu {
        los_decay_m: f64,
        outage_slope_per_m: f64,
        outage_offset: f64,
    },
    /// 3GPP UMa LOS probability (UE height <= 13 m), no outage state.
    Uma { breakpoint_m: f64, decay_m: f64 },
    /// Every link is NLOS.
    AlwaysNlos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionProbabilities {
    pub los: f64,
    pub nlos: f64,
    pub outage: f64,
}

impl ConditionModel {
    pub fn probabilities(&self, distance_m: f64) -> ConditionProbabilities {
        let (los, outage) = match *self {
            ConditionModel::Nyu {
                los_decay_m,
                outage_slope_per_m,
                outage_offset,
            } => {
                let outage =
                    (1.0 - (-outage_slope_per_m * distance_m + outage_offset).exp()).max(0.0);
                ((1.0 - outage) * (-distance_m / los_decay_m).exp(), outage)
            }
            ConditionModel::Uma {
                breakpoint_m,
                decay_m,
            } => {
                let los = if distance_m <= breakpoint_m {
                    1.0
                } else {
                    let near = breakpoint_m / distance_m;
                    near + (-distance_m / decay_m).exp() * (1.0 - near)
                };
                (los, 0.0)
            }
            ConditionModel::AlwaysNlos => (0.0, 0.0),
        };
        ConditionProbabilities {
            los,
            nlos: (1.0 - los - outage).max(0.0),
            outage,
        }
    }

    /// Samples the link condition at `distance_m`.
    pub fn draw<R: Rng + ?Sized>(&self, distance_m: f64, rng: &mut R) -> LinkCondition {
        let p = self.probabilities(distance_m);
        let u: f64 = rng.random();
        if u < p.outage {
            LinkCondition::Outage
        } else if u < p.outage + p.los {
            LinkCondition::Los
        } else {
            LinkCondition::Nlos
        }
    }
}

/// Integer count distribution used for cluster and sub-path numbers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CountDistribution {
    Fixed {
        value: usize,
    },
    /// Poisson draw clamped to `[min, max]`.
    Poisson {
        mean: f64,
        min: usize,
        max: usize,
    },
    /// Uniform on `{min, ..., max}`.
    Uniform {
        min: usize,
        max: usize,
    },
}

impl CountDistribution {
    pub fn max_value(&self) -> usize {
        match *self {
            CountDistribution::Fixed { value } => value,
            CountDistribution::Poisson { max, .. } | CountDistribution::Uniform { max, .. } => max,
        }
    }

    fn validate(&self, field: &str) -> Result<()> {
        let ok = match *self {
            CountDistribution::Fixed { value } => value >= 1,
            CountDistribution::Poisson { mean, min, max } => {
                mean > 0.0 && mean.is_finite() && min >= 1 && min <= max
            }
            CountDistribution::Uniform { min, max } => min >= 1 && min <= max,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(
                field,
                "count distribution must produce values >= 1",
            ))
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        match *self {
            CountDistribution::Fixed { value } => value,
            CountDistribution::Poisson { mean, min, max } => {
                let k: f64 = Poisson::new(mean).expect("validated mean").sample(rng);
                (k as usize).clamp(min, max)
            }
            CountDistribution::Uniform { min, max } => rng.random_range(min..=max),
        }
    }
}

/// Cluster statistics of a geometric channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterStatistics {
    pub clusters_los: CountDistribution,
    pub clusters_nlos: CountDistribution,
    pub subpaths: CountDistribution,
    /// Cluster power fractions are `U^(power_decay - 1) * 10^(-0.1 Z)` before
    /// normalization, `U ~ Uniform(0, 1]`.
    pub power_decay: f64,
    /// Standard deviation of `Z` in dB.
    pub power_shadowing_db: f64,
    /// Range of cluster central azimuths (degrees).
    pub azimuth_range_deg: [f64; 2],
    /// Range of cluster central zenith angles (degrees).
    pub zenith_range_deg: [f64; 2],
    /// RMS of the Laplacian intra-cluster azimuth offsets (degrees).
    pub azimuth_spread_deg: f64,
    /// RMS of the Laplacian intra-cluster zenith offsets (degrees).
    pub zenith_spread_deg: f64,
}

impl ClusterStatistics {
    pub fn nyu() -> Self {
        ClusterStatistics {
            clusters_los: CountDistribution::Poisson {
                mean: 1.8,
                min: 1,
                max: 4,
            },
            clusters_nlos: CountDistribution::Poisson {
                mean: 1.8,
                min: 1,
                max: 4,
            },
            subpaths: CountDistribution::Uniform { min: 1, max: 10 },
            power_decay: 2.8,
            power_shadowing_db: 4.0,
            azimuth_range_deg: [-60.0, 60.0],
            zenith_range_deg: [60.0, 120.0],
            azimuth_spread_deg: 10.0,
            zenith_spread_deg: 6.0,
        }
    }

    pub fn uma() -> Self {
        ClusterStatistics {
            clusters_los: CountDistribution::Fixed { value: 12 },
            clusters_nlos: CountDistribution::Fixed { value: 20 },
            subpaths: CountDistribution::Fixed { value: 20 },
            power_decay: 2.3,
            power_shadowing_db: 3.0,
            ..ClusterStatistics::nyu()
        }
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        self.clusters_los
            .validate(&format!("{prefix}.clusters_los"))?;
        self.clusters_nlos
            .validate(&format!("{prefix}.clusters_nlos"))?;
        self.subpaths.validate(&format!("{prefix}.subpaths"))?;
        if !(self.power_decay >= 1.0 && self.power_decay.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.power_decay"),
                "must be >= 1",
            ));
        }
        if !(self.power_shadowing_db >= 0.0 && self.power_shadowing_db.is_finite()) {
            return Err(Error::config(
                format!("{prefix}.power_shadowing_db"),
                "must be >= 0",
            ));
        }
        let [az_lo, az_hi] = self.azimuth_range_deg;
        if !(az_lo <= az_hi && az_lo >= -180.0 && az_hi <= 180.0) {
            return Err(Error::config(
                format!("{prefix}.azimuth_range_deg"),
                "must be an ordered range within [-180, 180]",
            ));
        }
        let [ze_lo, ze_hi] = self.zenith_range_deg;
        if !(ze_lo <= ze_hi && ze_lo >= 0.0 && ze_hi <= 180.0) {
            return Err(Error::config(
                format!("{prefix}.zenith_range_deg"),
                "must be an ordered range within [0, 180]",
            ));
        }
        if !(self.azimuth_spread_deg >= 0.0 && self.zenith_spread_deg >= 0.0) {
            return Err(Error::config(
                format!("{prefix}.azimuth_spread_deg"),
                "angular spreads must be >= 0",
            ));
        }
        Ok(())
    }
}

/// Everything needed to draw links for one channel model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModelParams {
    pub condition: ConditionModel,
    pub los: PathLossParams,
    pub nlos: PathLossParams,
    /// `None` for the Rayleigh model, which has no geometry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterStatistics>,
}

const NYU_LOS: PathLossParams = PathLossParams {
    intercept_db: 61.4,
    exponent: 2.0,
    shadowing_std_db: 5.8,
};

const NYU_NLOS: PathLossParams = PathLossParams {
    intercept_db: 72.0,
    exponent: 2.92,
    shadowing_std_db: 8.7,
};

impl LinkModelParams {
    pub fn nyu() -> Self {
        LinkModelParams {
            condition: ConditionModel::Nyu {
                los_decay_m: 67.1,
                outage_slope_per_m: 1.0 / 30.0,
                outage_offset: 5.2,
            },
            los: NYU_LOS,
            nlos: NYU_NLOS,
            clusters: Some(ClusterStatistics::nyu()),
        }
    }

    /// 3GPP UMa at 28 GHz: `28 + 22 log10 d + 20 log10 f` (LOS) and
    /// `13.54 + 39.08 log10 d + 20 log10 f` (NLOS), folded into the
    /// intercept/exponent form.
    pub fn uma() -> Self {
        let carrier = 20.0 * 28f64.log10();
        LinkModelParams {
            condition: ConditionModel::Uma {
                breakpoint_m: 18.0,
                decay_m: 63.0,
            },
            los: PathLossParams {
                intercept_db: 28.0 + carrier,
                exponent: 2.2,
                shadowing_std_db: 4.0,
            },
            nlos: PathLossParams {
                intercept_db: 13.54 + carrier,
                exponent: 3.908,
                shadowing_std_db: 6.0,
            },
            clusters: Some(ClusterStatistics::uma()),
        }
    }

    /// Rayleigh links are NLOS at the scenario distance with NYU NLOS loss.
    pub fn rayleigh() -> Self {
        LinkModelParams {
            condition: ConditionModel::AlwaysNlos,
            los: NYU_LOS,
            nlos: NYU_NLOS,
            clusters: None,
        }
    }

    fn validate(&self, prefix: &str) -> Result<()> {
        for (name, p) in [("los", &self.los), ("nlos", &self.nlos)] {
            if !(p.intercept_db.is_finite() && p.exponent.is_finite()) {
                return Err(Error::config(format!("{prefix}.{name}"), "must be finite"));
            }
            if !(p.shadowing_std_db >= 0.0 && p.shadowing_std_db.is_finite()) {
                return Err(Error::config(
                    format!("{prefix}.{name}.shadowing_std_db"),
                    "must be >= 0",
                ));
            }
        }
        if let Some(stats) = &self.clusters {
            stats.validate(&format!("{prefix}.clusters"))?;
        }
        Ok(())
    }

    /// Path loss for a link in the given condition.
    pub fn path_loss<R: Rng + ?Sized>(
        &self,
        distance_m: f64,
        condition: LinkCondition,
        shadowing: bool,
        rng: &mut R,
    ) -> LinkState {
        let params = match condition {
            LinkCondition::Los => &self.los,
            LinkCondition::Nlos => &self.nlos,
            LinkCondition::Outage => {
                return LinkState {
                    condition,
                    path_loss_db: f64::INFINITY,
                    distance_m,
                }
            }
        };
        let mut path_loss_db = params.mean_db(distance_m);
        if shadowing && params.shadowing_std_db > 0.0 {
            let x: f64 = rng.sample(StandardNormal);
            path_loss_db += params.shadowing_std_db * x;
        }
        LinkState {
            condition,
            path_loss_db,
            distance_m,
        }
    }

    /// Draws a served link: outage states are redrawn so the UE stays served.
    pub fn draw_served_link<R: Rng + ?Sized>(
        &self,
        distance_m: f64,
        shadowing: bool,
        rng: &mut R,
    ) -> Result<LinkState> {
        for _ in 0..MAX_OUTAGE_REDRAWS {
            let condition = self.condition.draw(distance_m, rng);
            if condition != LinkCondition::Outage {
                return Ok(self.path_loss(distance_m, condition, shadowing, rng));
            }
        }
        Err(Error::PersistentOutage {
            attempts: MAX_OUTAGE_REDRAWS,
            distance_m,
        })
    }
}

/// Parameter sets for all three models, overridable from the scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    pub rayleigh: LinkModelParams,
    pub nyu: LinkModelParams,
    pub uma: LinkModelParams,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            rayleigh: LinkModelParams::rayleigh(),
            nyu: LinkModelParams::nyu(),
            uma: LinkModelParams::uma(),
        }
    }
}

impl ChannelParams {
    pub fn for_model(&self, model: ChannelModel) -> &LinkModelParams {
        match model {
            ChannelModel::Rayleigh => &self.rayleigh,
            ChannelModel::Nyu => &self.nyu,
            ChannelModel::Uma => &self.uma,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.rayleigh.validate("channel.rayleigh")?;
        self.nyu.validate("channel.nyu")?;
        self.uma.validate("channel.uma")?;
        for (name, p) in [("nyu", &self.nyu), ("uma", &self.uma)] {
            if p.clusters.is_none() {
                return Err(Error::config(
                    format!("channel.{name}.clusters"),
                    "clustered models need cluster statistics",
                ));
            }
        }
        Ok(())
    }
}

/// One ray of a cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubPath {
    pub gain: C64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub power: f64,
    pub subpaths: Vec<SubPath>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
}

impl ClusterSet {
    /// A single ray with the given gain and direction.
    pub fn single(gain: C64, direction: Direction) -> Self {
        ClusterSet {
            clusters: vec![Cluster {
                power: gain.norm_sqr(),
                subpaths: vec![SubPath { gain, direction }],
            }],
        }
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn subpaths(&self) -> impl Iterator<Item = &SubPath> {
        self.clusters.iter().flat_map(|c| c.subpaths.iter())
    }

    /// Sum of `|g_kl|^2` over all rays.
    pub fn total_power(&self) -> f64 {
        self.subpaths().map(|s| s.gain.norm_sqr()).sum()
    }

    /// Assembles the channel vector `sum g * F(dir) * u(dir)`.
    pub fn synthesize(&self, geometry: &ArrayGeometry, element: &ElementPattern) -> DVector<C64> {
        let (n_v, n_h) = (geometry.n_vertical, geometry.n_horizontal);
        let mut h = DVector::<C64>::zeros(n_v * n_h);
        let mut row = vec![C64::new(0.0, 0.0); n_h];
        for ray in self.subpaths() {
            // Same separable phases as `steering_vector`, generated by
            // rotation instead of one sin/cos per element.
            let (v_step, h_step) = steering_phase_steps(geometry, ray.direction);
            let h_rot = C64::from_polar(1.0, h_step);
            let mut z = C64::new(1.0, 0.0);
            for entry in row.iter_mut() {
                *entry = z;
                z *= h_rot;
            }
            let v_rot = C64::from_polar(1.0, v_step);
            let mut v = ray.gain * field_factor(element, ray.direction);
            for chunk in h.as_mut_slice().chunks_exact_mut(n_h) {
                for (out, phasor) in chunk.iter_mut().zip(&row) {
                    *out += v * phasor;
                }
                v *= v_rot;
            }
        }
        h
    }
}

/// Circularly-symmetric complex Gaussian with unit variance.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Zero-mean Laplacian sample with the given RMS.
fn laplace<R: Rng + ?Sized>(rms: f64, rng: &mut R) -> f64 {
    if rms == 0.0 {
        return 0.0;
    }
    let scale = rms / std::f64::consts::SQRT_2;
    let u: f64 = rng.random::<f64>() - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn uniform_in<R: Rng + ?Sized>(range: [f64; 2], rng: &mut R) -> f64 {
    range[0] + (range[1] - range[0]) * rng.random::<f64>()
}

/// Draws cluster count, rays, angles and small-scale gains for one link.
pub fn draw_cluster_set<R: Rng + ?Sized>(
    stats: &ClusterStatistics,
    condition: LinkCondition,
    rng: &mut R,
) -> Result<ClusterSet> {
    let count = match condition {
        LinkCondition::Los => stats.clusters_los,
        LinkCondition::Nlos => stats.clusters_nlos,
        LinkCondition::Outage => return Err(Error::OutageLink),
    }
    .draw(rng);

    let shadow = Normal::new(0.0, stats.power_shadowing_db).expect("validated spread");
    let mut raw_powers = Vec::with_capacity(count);
    let mut centers = Vec::with_capacity(count);
    for _ in 0..count {
        let u = 1.0 - rng.random::<f64>();
        let z: f64 = shadow.sample(rng);
        raw_powers.push(u.powf(stats.power_decay - 1.0) * 10f64.powf(-0.1 * z));
        centers.push((
            uniform_in(stats.zenith_range_deg, rng),
            uniform_in(stats.azimuth_range_deg, rng),
        ));
    }
    let total: f64 = raw_powers.iter().sum();

    let mut clusters = Vec::with_capacity(count);
    for (power, (theta_c, phi_c)) in raw_powers.into_iter().zip(centers) {
        let power = power / total;
        let rays = stats.subpaths.draw(rng);
        let amplitude = (power / rays as f64).sqrt();
        let subpaths = (0..rays)
            .map(|_| {
                let theta = theta_c + laplace(stats.zenith_spread_deg, rng);
                let phi = phi_c + laplace(stats.azimuth_spread_deg, rng);
                SubPath {
                    gain: complex_normal(rng) * amplitude,
                    direction: Direction::wrapped(theta, phi),
                }
            })
            .collect();
        clusters.push(Cluster { power, subpaths });
    }
    Ok(ClusterSet { clusters })
}

/// Draws a clustered channel vector for one served link.
pub fn draw_clustered<R: Rng + ?Sized>(
    params: &LinkModelParams,
    geometry: &ArrayGeometry,
    element: &ElementPattern,
    link: &LinkState,
    rng: &mut R,
) -> Result<(ClusterSet, DVector<C64>)> {
    if link.condition == LinkCondition::Outage {
        return Err(Error::OutageLink);
    }
    let stats = params
        .clusters
        .as_ref()
        .ok_or_else(|| Error::config("channel.clusters", "model has no cluster statistics"))?;
    let set = draw_cluster_set(stats, link.condition, rng)?;
    let h = set.synthesize(geometry, element);
    Ok((set, h))
}

/// True (or estimated) channel for all served UEs of a drop.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    /// `N_T x M`, column `m` is UE `m`'s channel.
    pub h: DMatrix<C64>,
    pub links: Vec<LinkState>,
    pub model: ChannelModel,
}

impl ChannelMatrix {
    pub fn num_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.h.ncols()
    }

    /// `H / ||H||_F`.
    pub fn normalized(&self) -> Result<DMatrix<C64>> {
        frobenius_normalized(&self.h).ok_or(Error::DegeneratePrecoder)
    }

    /// Long-format dump: `ue,element,re,im`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["ue", "element", "re", "im"])?;
        for (ue, column) in self.h.column_iter().enumerate() {
            for (element, z) in column.iter().enumerate() {
                out.write_record([
                    ue.to_string(),
                    element.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `N_T x M` matrix of i.i.d. `CN(0, 1/M)` entries; one column per link.
pub fn draw_rayleigh<R: Rng + ?Sized>(
    n_t: usize,
    links: Vec<LinkState>,
    rng: &mut R,
) -> Result<ChannelMatrix> {
    let m = links.len();
    if m == 0 || m > n_t {
        return Err(Error::config(
            "num_ues",
            format!("need 1 <= M <= N_T, got M = {m}, N_T = {n_t}"),
        ));
    }
    let scale = (1.0 / m as f64).sqrt();
    // Column-major fill keeps the draw order UE by UE.
    let mut h = DMatrix::<C64>::zeros(n_t, m);
    for mut column in h.column_iter_mut() {
        for z in column.iter_mut() {
            *z = complex_normal(rng) * scale;
        }
    }
    Ok(ChannelMatrix {
        h,
        links,
        model: ChannelModel::Rayleigh,
    })
}

/// Quality of the transmitter's channel estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImperfectCsiConfig {
    tau: f64,
}

impl ImperfectCsiConfig {
    pub fn new(tau: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&tau) {
            Ok(ImperfectCsiConfig { tau })
        } else {
            Err(Error::config("tau", format!("{tau} outside [0, 1]")))
        }
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn is_perfect(&self) -> bool {
        self.tau == 1.0
    }
}

/// Gauss-Markov estimate `H_e = tau * H + sqrt(1 - tau^2) * E`, `E ~ CN(0, 1)`.
///
/// With `tau == 1` no error is drawn and the RNG is left untouched.
pub fn apply_csi_error<R: Rng + ?Sized>(
    h: &ChannelMatrix,
    cfg: ImperfectCsiConfig,
    rng: &mut R,
) -> ChannelMatrix {
    if cfg.is_perfect() {
        return h.clone();
    }
    let tau = cfg.tau;
    let spread = (1.0 - tau * tau).sqrt();
    let mut estimate = h.clone();
    for z in estimate.h.iter_mut() {
        *z = *z * tau + complex_normal(rng) * spread;
    }
    estimate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::steering_vector;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn nlos(distance_m: f64) -> LinkState {
        LinkState {
            condition: LinkCondition::Nlos,
            path_loss_db: 100.0,
            distance_m,
        }
    }

    #[test]
    fn nyu_path_loss_reference_values() {
        let p = LinkModelParams::nyu();
        let mut r = rng(0);
        let los = p.path_loss(100.0, LinkCondition::Los, false, &mut r);
        assert!((los.path_loss_db - 101.4).abs() < 1e-12);
        let nlos = p.path_loss(100.0, LinkCondition::Nlos, false, &mut r);
        assert!((nlos.path_loss_db - 130.4).abs() < 1e-12);
        let unit = p.path_loss(1.0, LinkCondition::Nlos, false, &mut r);
        assert_eq!(unit.path_loss_db, 72.0);
        let out = p.path_loss(100.0, LinkCondition::Outage, true, &mut r);
        assert!(out.path_loss_db.is_infinite());
    }

    #[test]
    fn shadowing_has_configured_spread() {
        let p = LinkModelParams::nyu();
        let mut r = rng(3);
        let n = 200_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                p.path_loss(100.0, LinkCondition::Los, true, &mut r)
                    .path_loss_db
                    - 101.4
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.05);
        assert!((var.sqrt() - 5.8).abs() < 0.05);
    }

    #[test]
    fn condition_probabilities_sum_to_one() {
        for model in [
            LinkModelParams::nyu().condition,
            LinkModelParams::uma().condition,
            ConditionModel::AlwaysNlos,
        ] {
            for d in [1e-3, 1.0, 10.0, 50.0, 100.0, 200.0, 500.0] {
                let p = model.probabilities(d);
                assert!((p.los + p.nlos + p.outage - 1.0).abs() < 1e-12);
                assert!(p.los >= 0.0 && p.nlos >= 0.0 && p.outage >= 0.0);
            }
        }
        let near = LinkModelParams::nyu().condition.probabilities(1e-9);
        assert!((near.los - 1.0).abs() < 1e-6);
        let far = LinkModelParams::nyu().condition.probabilities(300.0);
        assert!(far.outage > 0.9);
    }

    #[test]
    fn condition_frequencies_match_closed_form() {
        let model = LinkModelParams::nyu().condition;
        for d in [100.0, 180.0] {
            let p = model.probabilities(d);
            let expected_out = (1.0 - (-d / 30.0 + 5.2f64).exp()).max(0.0);
            assert!((p.outage - expected_out).abs() < 1e-15);
            let mut r = rng(11);
            let n = 1_000_000;
            let outages = (0..n)
                .filter(|_| model.draw(d, &mut r) == LinkCondition::Outage)
                .count();
            assert!((outages as f64 / n as f64 - expected_out).abs() < 0.005);
        }
    }

    #[test]
    fn condition_draw_is_deterministic() {
        let model = LinkModelParams::nyu().condition;
        let a: Vec<_> = {
            let mut r = rng(5);
            (0..50).map(|_| model.draw(100.0, &mut r)).collect()
        };
        let b: Vec<_> = {
            let mut r = rng(5);
            (0..50).map(|_| model.draw(100.0, &mut r)).collect()
        };
        assert_eq!(a, b);
    }

    #[test]
    fn rayleigh_entry_variance_is_one_over_m() {
        let mut r = rng(1);
        let draws = 1_000_000 / 256;
        let mut power = 0.0;
        let mut count = 0usize;
        for _ in 0..draws {
            let h = draw_rayleigh(64, vec![nlos(100.0); 4], &mut r).unwrap();
            power += h.h.iter().map(|z| z.norm_sqr()).sum::<f64>();
            count += h.h.len();
        }
        assert!((power / count as f64 - 0.25).abs() < 0.01);
    }

    #[test]
    fn rayleigh_is_seed_deterministic() {
        let a = draw_rayleigh(64, vec![nlos(100.0); 4], &mut rng(9)).unwrap();
        let b = draw_rayleigh(64, vec![nlos(100.0); 4], &mut rng(9)).unwrap();
        assert_eq!(a, b);
        assert!(draw_rayleigh(2, vec![nlos(100.0); 4], &mut rng(9)).is_err());
    }

    #[test]
    fn single_ray_channel_is_weighted_steering() {
        let g = ArrayGeometry::default();
        let e = ElementPattern::default();
        let dir = Direction::new(80.0, -20.0).unwrap();
        let set = ClusterSet::single(C64::new(1.0, 0.0), dir);
        let h = set.synthesize(&g, &e);
        let expected = steering_vector(&g, dir) * C64::from(field_factor(&e, dir));
        assert!((h - expected).norm() < 1e-14);
    }

    #[test]
    fn nyu_cluster_counts_bounded() {
        let stats = ClusterStatistics::nyu();
        let mut r = rng(2);
        let mut max_seen = 0;
        for i in 0..100_000 {
            let cond = if i % 2 == 0 {
                LinkCondition::Los
            } else {
                LinkCondition::Nlos
            };
            let set = draw_cluster_set(&stats, cond, &mut r).unwrap();
            max_seen = max_seen.max(set.num_clusters());
            for c in &set.clusters {
                assert!((1..=10).contains(&c.subpaths.len()));
            }
        }
        assert!((1..=4).contains(&max_seen));
        assert_eq!(max_seen, 4);
    }

    #[test]
    fn uma_nlos_has_twenty_clusters() {
        let stats = ClusterStatistics::uma();
        let mut r = rng(4);
        for _ in 0..1000 {
            let set = draw_cluster_set(&stats, LinkCondition::Nlos, &mut r).unwrap();
            assert_eq!(set.num_clusters(), 20);
            assert!(set.clusters.iter().all(|c| c.subpaths.len() == 20));
        }
        let set = draw_cluster_set(&stats, LinkCondition::Los, &mut r).unwrap();
        assert_eq!(set.num_clusters(), 12);
    }

    #[test]
    fn small_scale_power_has_unit_mean() {
        for stats in [ClusterStatistics::nyu(), ClusterStatistics::uma()] {
            let mut r = rng(6);
            let n = 20_000;
            let mean = (0..n)
                .map(|_| {
                    draw_cluster_set(&stats, LinkCondition::Nlos, &mut r)
                        .unwrap()
                        .total_power()
                })
                .sum::<f64>()
                / n as f64;
            assert!((mean - 1.0).abs() < 0.03, "mean power {mean}");
        }
    }

    #[test]
    fn array_power_without_field_factor_is_n_t() {
        // With an isotropic element the expected channel power is N_T.
        let g = ArrayGeometry::default();
        let iso = ElementPattern {
            g_max_dbi: 0.0,
            sla_v: 1e-9,
            a_max: 1e-9,
            ..ElementPattern::default()
        };
        let stats = ClusterStatistics::nyu();
        let mut r = rng(8);
        let n = 20_000;
        let mut power = 0.0;
        for _ in 0..n {
            let set = draw_cluster_set(&stats, LinkCondition::Nlos, &mut r).unwrap();
            power += set.synthesize(&g, &iso).norm_squared();
        }
        let mean = power / n as f64;
        assert!((mean / 64.0 - 1.0).abs() < 0.03, "mean {mean}");
    }

    #[test]
    fn outage_link_is_rejected() {
        let p = LinkModelParams::nyu();
        let link = LinkState {
            condition: LinkCondition::Outage,
            path_loss_db: f64::INFINITY,
            distance_m: 100.0,
        };
        let err = draw_clustered(
            &p,
            &ArrayGeometry::default(),
            &ElementPattern::default(),
            &link,
            &mut rng(0),
        );
        assert!(matches!(err, Err(Error::OutageLink)));
    }

    #[test]
    fn served_link_redraws_outage() {
        let p = LinkModelParams::nyu();
        let mut r = rng(12);
        // 170 m has a large outage probability but stays below one.
        for _ in 0..1000 {
            let link = p.draw_served_link(170.0, true, &mut r).unwrap();
            assert_ne!(link.condition, LinkCondition::Outage);
        }
        assert!(matches!(
            p.draw_served_link(1000.0, true, &mut r),
            Err(Error::PersistentOutage { .. })
        ));
    }

    #[test]
    fn csi_error_endpoints() {
        let mut r = rng(7);
        let h = draw_rayleigh(16, vec![nlos(100.0); 2], &mut r).unwrap();
        let same = apply_csi_error(&h, ImperfectCsiConfig::new(1.0).unwrap(), &mut r);
        assert_eq!(same, h);

        let a = apply_csi_error(&h, ImperfectCsiConfig::new(0.0).unwrap(), &mut rng(1));
        let mut zero = h.clone();
        zero.h.fill(C64::default());
        let b = apply_csi_error(&zero, ImperfectCsiConfig::new(0.0).unwrap(), &mut rng(1));
        assert_eq!(a.h, b.h);
        assert!(ImperfectCsiConfig::new(1.5).is_err());
        assert!(ImperfectCsiConfig::new(-0.1).is_err());
    }

    #[test]
    fn csi_error_variance_on_zero_channel() {
        let zero = ChannelMatrix {
            h: DMatrix::zeros(1000, 1000),
            links: vec![nlos(100.0); 1000],
            model: ChannelModel::Rayleigh,
        };
        let est = apply_csi_error(&zero, ImperfectCsiConfig::new(0.6).unwrap(), &mut rng(2));
        let var = est.h.iter().map(|z| z.norm_sqr()).sum::<f64>() / 1e6;
        assert!((var - 0.64).abs() < 0.01);
    }

    #[test]
    fn channel_csv_shape() {
        let h = draw_rayleigh(3, vec![nlos(100.0); 2], &mut rng(0)).unwrap();
        let mut buf = Vec::new();
        h.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 7);
        assert!(text.starts_with("ue,element,re,im\n"));
    }

    #[test]
    fn default_params_validate_and_roundtrip() {
        let params = ChannelParams::default();
        params.validate().unwrap();
        let text = toml::to_string(&params).unwrap();
        let back: ChannelParams = toml::from_str(&text).unwrap();
        assert_eq!(back, params);
    }
}
