//! Monte Carlo link-level simulator for downlink multi-user MIMO precoding
//! over Rayleigh and clustered mmWave channels.
//!
//! The crate is organised bottom-up:
//!
//! - [`antenna`]: planar array geometry, element pattern, steering vectors and
//!   the DFT grid-of-beams codebook.
//! - [`channel`]: Rayleigh and clustered channel generation, path loss,
//!   link-state draws and Gauss-Markov CSI error.
//! - [`precoding`]: grid-of-beams (power / SLNR), MF, ZF and MMSE precoders and
//!   the equivalent matrix.
//! - [`metrics`]: link budget, SINR, capacity and empirical distributions.
//! - [`sim`]: scenario configuration, presets, the drop loop and artifact
//!   writers.
//!
//! Complex matrices are [`nalgebra::DMatrix`] of [`C64`]. A channel matrix is
//! `N_T x M` with one column per UE.

pub mod antenna;
pub mod channel;
mod error;
pub mod linalg;
pub mod metrics;
pub mod precoding;
pub mod sim;

pub use error::{Error, Result};

pub use antenna::{
    build_codebook, element_gain, field_factor, steering_vector, ArrayGeometry, Codebook,
    Direction, ElementPattern,
};
pub use channel::{
    apply_csi_error, draw_clustered, draw_rayleigh, ChannelMatrix, ChannelModel, ClusterSet,
    LinkCondition, LinkState,
};
pub use metrics::{capacity, median_gap, sinr, DropMetrics, EmpiricalDistribution, LinkBudget};
pub use precoding::{equivalent_matrix, EquivalentMatrix, PrecoderKind, PrecodingMatrix};
pub use sim::{preset, ScenarioConfig, SimulationResult, Simulator};

/// Double precision complex sample.
pub type C64 = nalgebra::Complex<f64>;
