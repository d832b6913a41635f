//! Scenario configuration and its TOML file format.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::antenna::{ArrayGeometry, ElementPattern};
use crate::channel::{ChannelModel, ChannelParams};
use crate::precoding::PrecoderKind;
use crate::{Error, Result};

/// Version of the scenario file schema. Files must state it explicitly.
pub const SCHEMA_VERSION: u32 = 1;

/// Reference SNR handed to the SNR-aware precoders (MMSE regularization and
/// the SLNR noise term), derived from the per-UE SNRs of a drop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SnrReference {
    /// Arithmetic mean of the linear per-UE SNRs.
    #[default]
    Mean,
    Min,
    Max,
}

impl SnrReference {
    pub fn reduce(self, snrs: &[f64]) -> f64 {
        match self {
            SnrReference::Mean => snrs.iter().sum::<f64>() / snrs.len() as f64,
            SnrReference::Min => snrs.iter().cloned().fold(f64::INFINITY, f64::min),
            SnrReference::Max => snrs.iter().cloned().fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookConfig {
    pub oversampling_vertical: usize,
    pub oversampling_horizontal: usize,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        CodebookConfig {
            oversampling_vertical: 1,
            oversampling_horizontal: 1,
        }
    }
}

/// Runs the scenario once per (channel model, tau) combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub channel_models: Vec<ChannelModel>,
    pub taus: Vec<f64>,
}

/// Transmit powers for the capacity sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tx_powers_dbm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema_version: u32,
    pub name: String,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub num_ues: usize,
    pub tx_power_dbm: f64,
    pub phase_bits: u32,
    pub quantize_all_precoders: bool,
    pub tau: f64,
    pub channel_model: ChannelModel,
    pub precoders: Vec<PrecoderKind>,
    pub precoder_snr: SnrReference,
    pub drops: u64,
    pub master_seed: u64,
    pub shadowing: bool,
    pub array: ArrayGeometry,
    pub element: ElementPattern,
    pub codebook: CodebookConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
    pub channel: ChannelParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            schema_version: SCHEMA_VERSION,
            name: "custom".to_string(),
            noise_figure_db: 7.0,
            bandwidth_hz: 1e9,
            distance_m: 100.0,
            num_ues: 4,
            tx_power_dbm: 30.0,
            phase_bits: 6,
            quantize_all_precoders: false,
            tau: 0.99,
            channel_model: ChannelModel::Nyu,
            precoders: PrecoderKind::ALL.to_vec(),
            precoder_snr: SnrReference::Mean,
            drops: 10_000,
            master_seed: 1,
            shadowing: true,
            array: ArrayGeometry::default(),
            element: ElementPattern::default(),
            codebook: CodebookConfig::default(),
            grid: None,
            sweep: None,
            channel: ChannelParams::default(),
        }
    }
}

/// Every scenario key with its default, for `--help` output.
pub const CONFIG_KEYS_HELP: &str = "\
Scenario file keys (TOML; unknown keys are rejected; defaults in brackets):
  schema_version          required, must be 1
  name                    artifact prefix [custom]
  noise_figure_db         receiver noise figure, dB [7]
  bandwidth_hz            noise bandwidth, Hz [1e9]
  distance_m              gNB-UE distance, m [100]
  num_ues                 served UEs M, 1 <= M <= N_T [4]
  tx_power_dbm            transmit power P_T, dBm [30]
  phase_bits              grid-of-beams phase-shifter bits, 0 = ideal [6]
  quantize_all_precoders  also quantize MF/ZF/MMSE weights [false]
  tau                     CSI quality, 1 = perfect [0.99]
  channel_model           rayleigh | nyu | uma [nyu]
  precoders               list of gob_p | gob_slnr | mf | zf | mmse [all]
  precoder_snr            SNR fed to MMSE / SLNR: mean | min | max [mean]
  drops                   Monte Carlo drops per cell [10000]
  master_seed             u64 master seed [1]
  shadowing               draw log-normal shadowing [true]
  [array]                 n_vertical [8], n_horizontal [8],
                          spacing_vertical [0.7], spacing_horizontal [0.5]
                          (wavelengths), carrier_frequency_hz [28e9]
  [element]               theta_3db [65], phi_3db [65], sla_v [30],
                          a_max [30], g_max_dbi [8]
  [codebook]              oversampling_vertical [1], oversampling_horizontal [1]
  [grid]                  optional: channel_models = [...], taus = [...]
  [sweep]                 optional: tx_powers_dbm = [...]
  [channel.rayleigh|nyu|uma]
                          optional full override of a model's condition,
                          los/nlos path loss and cluster statistics
                          (print a preset with `mmsim preset NAME` for the layout)";

impl ScenarioConfig {
    /// Parses and validates a scenario document.
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::ConfigParse {
            path: origin.to_path_buf(),
            message,
        };
        let table: toml::Table = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        match table.get("schema_version") {
            None => {
                return Err(Error::config(
                    "schema_version",
                    format!("missing (expected {SCHEMA_VERSION})"),
                ))
            }
            Some(toml::Value::Integer(v)) if *v == i64::from(SCHEMA_VERSION) => {}
            Some(other) => {
                return Err(Error::config(
                    "schema_version",
                    format!("unsupported version {other} (expected {SCHEMA_VERSION})"),
                ))
            }
        }
        let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, path)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    pub fn num_antennas(&self) -> usize {
        self.array.num_elements()
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("expected {SCHEMA_VERSION}, got {}", self.schema_version),
            ));
        }
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
        {
            return Err(Error::config("name", "use letters, digits, '_' or '-'"));
        }
        self.array.validate()?;
        self.element.validate()?;
        self.channel.validate()?;
        let n_t = self.num_antennas();
        if self.num_ues == 0 {
            return Err(Error::config("num_ues", "must serve at least one UE"));
        }
        if self.num_ues > n_t {
            return Err(Error::config(
                "num_ues",
                format!(
                    "M <= N_T violated: {} UEs exceed the {} antenna elements",
                    self.num_ues, n_t
                ),
            ));
        }
        if self.drops == 0 {
            return Err(Error::config("drops", "must be at least 1"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("bandwidth_hz", "must be > 0"));
        }
        if !(self.noise_figure_db >= 0.0 && self.noise_figure_db.is_finite()) {
            return Err(Error::config("noise_figure_db", "must be >= 0"));
        }
        if !(self.distance_m > 0.0 && self.distance_m.is_finite()) {
            return Err(Error::config("distance_m", "must be > 0"));
        }
        if !self.tx_power_dbm.is_finite() {
            return Err(Error::config("tx_power_dbm", "must be finite"));
        }
        if self.phase_bits > 16 {
            return Err(Error::config("phase_bits", "must be at most 16"));
        }
        validate_tau("tau", self.tau)?;
        if self.precoders.is_empty() {
            return Err(Error::config("precoders", "list at least one precoder"));
        }
        let unique: BTreeSet<_> = self.precoders.iter().collect();
        if unique.len() != self.precoders.len() {
            return Err(Error::config("precoders", "duplicate entries"));
        }
        if self.codebook.oversampling_vertical == 0 {
            return Err(Error::config(
                "codebook.oversampling_vertical",
                "must be at least 1",
            ));
        }
        if self.codebook.oversampling_horizontal == 0 {
            return Err(Error::config(
                "codebook.oversampling_horizontal",
                "must be at least 1",
            ));
        }
        if let Some(grid) = &self.grid {
            if grid.channel_models.is_empty() {
                return Err(Error::config("grid.channel_models", "must not be empty"));
            }
            if grid.taus.is_empty() {
                return Err(Error::config("grid.taus", "must not be empty"));
            }
            for &tau in &grid.taus {
                validate_tau("grid.taus", tau)?;
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.tx_powers_dbm.is_empty() {
                return Err(Error::config("sweep.tx_powers_dbm", "must not be empty"));
            }
            if sweep.tx_powers_dbm.iter().any(|p| !p.is_finite()) {
                return Err(Error::config("sweep.tx_powers_dbm", "must be finite"));
            }
        }
        Ok(())
    }

    /// Single-cell configurations: one per grid combination (models outer,
    /// taus inner), or `self` when no grid is set.
    pub fn cells(&self) -> Vec<ScenarioConfig> {
        let single = |model: ChannelModel, tau: f64| ScenarioConfig {
            channel_model: model,
            tau,
            grid: None,
            sweep: None,
            ..self.clone()
        };
        match &self.grid {
            None => vec![single(self.channel_model, self.tau)],
            Some(grid) => grid
                .channel_models
                .iter()
                .flat_map(|&m| grid.taus.iter().map(move |&t| (m, t)))
                .map(|(m, t)| single(m, t))
                .collect(),
        }
    }
}

fn validate_tau(field: &str, tau: f64) -> Result<()> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(Error::config(field, format!("tau = {tau} outside [0, 1]")))
    }
}
