//! Downlink precoders and the equivalent matrix.
//!
//! Every constructor takes a channel estimate (`N_T x M`, one column per UE),
//! works on its Frobenius-normalized form `Ĥ`, and returns a precoder whose
//! Frobenius norm is one. Path loss never enters the precoder; it only shows
//! up in the per-UE SNR used by the SINR computation.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::antenna::{quantize_phases, Codebook};
use crate::linalg::{condition_number, frobenius_normalized};
use crate::{Error, Result, C64};

/// Largest Gram-matrix condition number accepted by zero forcing.
pub const ZF_CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PrecoderKind {
    #[serde(rename = "gob_p")]
    GobPower,
    #[serde(rename = "gob_slnr")]
    GobSlnr,
    #[serde(rename = "mf")]
    MatchedFilter,
    #[serde(rename = "zf")]
    ZeroForcing,
    #[serde(rename = "mmse")]
    Mmse,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 5] = [
        PrecoderKind::GobPower,
        PrecoderKind::GobSlnr,
        PrecoderKind::MatchedFilter,
        PrecoderKind::ZeroForcing,
        PrecoderKind::Mmse,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PrecoderKind::GobPower => "gob_p",
            PrecoderKind::GobSlnr => "gob_slnr",
            PrecoderKind::MatchedFilter => "mf",
            PrecoderKind::ZeroForcing => "zf",
            PrecoderKind::Mmse => "mmse",
        }
    }

    /// Grid-of-beams precoders pick from the fixed codebook.
    pub fn is_grid_of_beams(self) -> bool {
        matches!(self, PrecoderKind::GobPower | PrecoderKind::GobSlnr)
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PrecoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrecoderKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                Error::config(
                    "precoders",
                    format!("unknown precoder `{s}` (expected gob_p|gob_slnr|mf|zf|mmse)"),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecodingMatrix {
    /// `N_T x M`, column `m` serves UE `m`.
    pub w: DMatrix<C64>,
    pub kind: PrecoderKind,
    pub normalized: bool,
    /// Selected codebook indices for grid-of-beams precoders.
    pub beams: Option<Vec<usize>>,
}

impl PrecodingMatrix {
    fn normalized(kind: PrecoderKind, w: DMatrix<C64>, beams: Option<Vec<usize>>) -> Result<Self> {
        Ok(PrecodingMatrix {
            w: normalize_frobenius(&w)?,
            kind,
            normalized: true,
            beams,
        })
    }
}

/// `Ĥ^H Ŵ`: row `m` is what UE `m` receives from each stream.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentMatrix {
    pub h_bar: DMatrix<C64>,
    pub precoder_kind: PrecoderKind,
}

/// `W / ||W||_F`.
pub fn normalize_frobenius(w: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    frobenius_normalized(w).ok_or(Error::DegeneratePrecoder)
}

fn normalized_estimate(h_est: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    if h_est.ncols() == 0 || h_est.ncols() > h_est.nrows() {
        return Err(Error::DimensionMismatch {
            expected: (h_est.nrows(), h_est.nrows().max(1)),
            found: h_est.shape(),
        });
    }
    normalize_frobenius(h_est)
}

/// `|ĥ_m^H b_z|^2` for every UE `m` (rows) and beam `z` (columns).
fn beam_gains(h_hat: &DMatrix<C64>, codebook: &Codebook) -> Result<DMatrix<f64>> {
    if codebook.is_empty() {
        return Err(Error::config("codebook", "codebook has no beams"));
    }
    if codebook.num_elements() != h_hat.nrows() {
        return Err(Error::DimensionMismatch {
            expected: (h_hat.nrows(), codebook.len()),
            found: (codebook.num_elements(), codebook.len()),
        });
    }
    Ok((h_hat.adjoint() * codebook.matrix()).map(|z| z.norm_sqr()))
}

/// Index of the largest metric; the first (lowest) index wins ties.
fn argmax(metrics: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (index, value) in metrics.enumerate() {
        if value > best.1 {
            best = (index, value);
        }
    }
    best.0
}

fn assemble_beams(codebook: &Codebook, beams: &[usize]) -> DMatrix<C64> {
    let mut w = DMatrix::<C64>::zeros(codebook.num_elements(), beams.len());
    for (m, &z) in beams.iter().enumerate() {
        w.column_mut(m).copy_from(&codebook.matrix().column(z));
    }
    w
}

/// Per-UE beam maximizing received power `|ĥ_m^H b_z|^2`.
pub fn select_beams_power(h_est: &DMatrix<C64>, codebook: &Codebook) -> Result<Vec<usize>> {
    let gains = beam_gains(&normalized_estimate(h_est)?, codebook)?;
    Ok(gains
        .row_iter()
        .map(|row| argmax(row.iter().copied()))
        .collect())
}

/// Per-UE beam maximizing `|ĥ_m^H b_z|^2 / (noise + sum_{i != m} |ĥ_i^H b_z|^2)`.
pub fn select_beams_slnr(
    h_est: &DMatrix<C64>,
    codebook: &Codebook,
    noise_term: f64,
) -> Result<Vec<usize>> {
    if !(noise_term > 0.0 && noise_term.is_finite()) {
        return Err(Error::config(
            "noise_term",
            format!("SLNR noise term must be positive and finite, got {noise_term}"),
        ));
    }
    let gains = beam_gains(&normalized_estimate(h_est)?, codebook)?;
    let ues = gains.nrows();
    Ok((0..ues)
        .map(|m| {
            argmax((0..gains.ncols()).map(|z| {
                let leakage: f64 = (0..ues).filter(|&i| i != m).map(|i| gains[(i, z)]).sum();
                gains[(m, z)] / (noise_term + leakage)
            }))
        })
        .collect())
}

/// Grid of beams, received-power criterion.
pub fn gob_power(h_est: &DMatrix<C64>, codebook: &Codebook) -> Result<PrecodingMatrix> {
    let beams = select_beams_power(h_est, codebook)?;
    let w = assemble_beams(codebook, &beams);
    PrecodingMatrix::normalized(PrecoderKind::GobPower, w, Some(beams))
}

/// Grid of beams, per-UE SLNR criterion. `noise_term` is the normalized
/// noise level `1 / SNR`.
pub fn gob_slnr(
    h_est: &DMatrix<C64>,
    codebook: &Codebook,
    noise_term: f64,
) -> Result<PrecodingMatrix> {
    let beams = select_beams_slnr(h_est, codebook, noise_term)?;
    let w = assemble_beams(codebook, &beams);
    PrecodingMatrix::normalized(PrecoderKind::GobSlnr, w, Some(beams))
}

/// Matched filter (conjugate beamforming): `W = Ĥ`.
pub fn mf(h_est: &DMatrix<C64>) -> Result<PrecodingMatrix> {
    let h_hat = normalized_estimate(h_est)?;
    PrecodingMatrix::normalized(PrecoderKind::MatchedFilter, h_hat, None)
}

/// Zero forcing: `W = Ĥ (Ĥ^H Ĥ)^{-1}`.
///
/// Computed from the thin QR factorization `Ĥ = Q R` as `W = Q R^{-H}`, which
/// never forms the Gram matrix explicitly. The Gram condition number is
/// `cond(R)^2`.
pub fn zf(h_est: &DMatrix<C64>) -> Result<PrecodingMatrix> {
    let h_hat = normalized_estimate(h_est)?;
    let m = h_hat.ncols();
    let qr = h_hat.qr();
    let r = qr.r();
    let condition = condition_number(&r).powi(2);
    // NaN (from a singular R) must fail the guard as well.
    if condition.is_nan() || condition > ZF_CONDITION_LIMIT {
        return Err(Error::ZfSingular {
            condition,
            limit: ZF_CONDITION_LIMIT,
        });
    }
    let r_inv_h = r
        .adjoint()
        .solve_lower_triangular(&DMatrix::<C64>::identity(m, m))
        .ok_or(Error::ZfSingular {
            condition: f64::INFINITY,
            limit: ZF_CONDITION_LIMIT,
        })?;
    PrecodingMatrix::normalized(PrecoderKind::ZeroForcing, qr.q() * r_inv_h, None)
}

/// Regularized zero forcing: `W = Ĥ (Ĥ^H Ĥ + I / snr)^{-1}`, solved through a
/// Cholesky factorization of the loaded Gram matrix.
pub fn mmse(h_est: &DMatrix<C64>, snr: f64) -> Result<PrecodingMatrix> {
    if !(snr > 0.0 && snr.is_finite()) {
        return Err(Error::config(
            "snr",
            format!("MMSE needs a positive finite SNR, got {snr}"),
        ));
    }
    let h_hat = normalized_estimate(h_est)?;
    let m = h_hat.ncols();
    let h_adj = h_hat.adjoint();
    let loaded = &h_adj * &h_hat + DMatrix::<C64>::identity(m, m) * C64::from(1.0 / snr);
    let chol = loaded.cholesky().ok_or(Error::NotPositiveDefinite {
        kind: PrecoderKind::Mmse,
    })?;
    // A is Hermitian, so W = Ĥ A^{-1} = (A^{-1} Ĥ^H)^H.
    let w = chol.solve(&h_adj).adjoint();
    PrecodingMatrix::normalized(PrecoderKind::Mmse, w, None)
}

/// Inputs shared by all precoders of one drop.
#[derive(Debug, Clone, Copy)]
pub struct PrecoderContext<'a> {
    pub codebook: &'a Codebook,
    /// Scalar SNR used by MMSE regularization and the SLNR noise term.
    pub snr: f64,
    /// When set, linear precoders are phase-quantized to this many bits too.
    pub quantize_linear_bits: Option<u32>,
}

/// Builds the precoder of the requested kind from a channel estimate.
pub fn build_precoder(
    kind: PrecoderKind,
    h_est: &DMatrix<C64>,
    ctx: &PrecoderContext<'_>,
) -> Result<PrecodingMatrix> {
    let mut precoder = match kind {
        PrecoderKind::GobPower => return gob_power(h_est, ctx.codebook),
        PrecoderKind::GobSlnr => return gob_slnr(h_est, ctx.codebook, 1.0 / ctx.snr),
        PrecoderKind::MatchedFilter => mf(h_est)?,
        PrecoderKind::ZeroForcing => zf(h_est)?,
        PrecoderKind::Mmse => mmse(h_est, ctx.snr)?,
    };
    if let Some(bits) = ctx.quantize_linear_bits.filter(|&b| b > 0) {
        quantize_phases(&mut precoder.w, bits);
        precoder.w = normalize_frobenius(&precoder.w)?;
    }
    Ok(precoder)
}

/// `Ĥ^H Ŵ` evaluated on the true channel, whatever estimate built `Ŵ`.
pub fn equivalent_matrix(h_true: &DMatrix<C64>, w: &PrecodingMatrix) -> Result<EquivalentMatrix> {
    if h_true.shape() != w.w.shape() {
        return Err(Error::DimensionMismatch {
            expected: h_true.shape(),
            found: w.w.shape(),
        });
    }
    let w_hat = if w.normalized {
        w.w.clone()
    } else {
        normalize_frobenius(&w.w)?
    };
    let h_hat = normalize_frobenius(h_true)?;
    Ok(EquivalentMatrix {
        h_bar: h_hat.adjoint() * w_hat,
        precoder_kind: w.kind,
    })
}
