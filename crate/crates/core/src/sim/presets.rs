//! Named scenarios reproducing the reference evaluation.

use crate::channel::ChannelModel;
use crate::{Error, Result};

use super::config::{GridConfig, ScenarioConfig, SweepConfig};

/// `(name, description)` of every preset.
pub const PRESETS: [(&str, &str); 6] = [
    ("fig2a", "SINR CDF, Rayleigh channel, perfect CSI"),
    (
        "fig2b",
        "SINR CDF, NYU-style clustered channel, perfect CSI",
    ),
    (
        "fig2c",
        "SINR CDF, 3GPP UMa-style clustered channel, perfect CSI",
    ),
    (
        "fig3",
        "mean capacity vs transmit power 0..60 dBm, NYU and UMa, perfect CSI",
    ),
    (
        "fig4",
        "SINR CDF with imperfect CSI (tau = 0.99), NYU and UMa",
    ),
    ("table2", "median SINR gaps, NYU and UMa x tau in {1, 0.99}"),
];

/// Transmit powers of the capacity sweep preset.
pub const SWEEP_POWERS_DBM: [f64; 7] = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0];

const REALISTIC: [ChannelModel; 2] = [ChannelModel::Nyu, ChannelModel::Uma];

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let base = ScenarioConfig {
        name: name.to_string(),
        tau: 1.0,
        ..ScenarioConfig::default()
    };
    let cfg = match name {
        "fig2a" => ScenarioConfig {
            channel_model: ChannelModel::Rayleigh,
            ..base
        },
        "fig2b" => ScenarioConfig {
            channel_model: ChannelModel::Nyu,
            ..base
        },
        "fig2c" => ScenarioConfig {
            channel_model: ChannelModel::Uma,
            ..base
        },
        "fig3" => ScenarioConfig {
            grid: Some(GridConfig {
                channel_models: REALISTIC.to_vec(),
                taus: vec![1.0],
            }),
            sweep: Some(SweepConfig {
                tx_powers_dbm: SWEEP_POWERS_DBM.to_vec(),
            }),
            ..base
        },
        "fig4" => ScenarioConfig {
            tau: 0.99,
            grid: Some(GridConfig {
                channel_models: REALISTIC.to_vec(),
                taus: vec![0.99],
            }),
            ..base
        },
        "table2" => ScenarioConfig {
            grid: Some(GridConfig {
                channel_models: REALISTIC.to_vec(),
                taus: vec![1.0, 0.99],
            }),
            ..base
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(cfg)
}
