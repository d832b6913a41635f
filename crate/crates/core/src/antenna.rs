//! Transmit antenna model: uniform planar array (UPA) geometry, the
//! single-element radiation pattern, 3D steering vectors and the DFT
//! grid-of-beams codebook.
//!
//! Angles follow the usual spherical convention: `theta` is the zenith angle
//! (90 deg is the horizon / array boresight) and `phi` the azimuth measured
//! from boresight. Elements are indexed row-major, vertical index `p` outer
//! and horizontal index `q` inner, so element `(p, q)` sits at `p * n_h + q`.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Layout of the planar array. Spacings are expressed in wavelengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub n_vertical: usize,
    pub n_horizontal: usize,
    pub spacing_vertical: f64,
    pub spacing_horizontal: f64,
    pub carrier_frequency_hz: f64,
}

impl Default for ArrayGeometry {
    /// 8x8 array at 28 GHz with (0.7, 0.5) wavelength spacing.
    fn default() -> Self {
        ArrayGeometry {
            n_vertical: 8,
            n_horizontal: 8,
            spacing_vertical: 0.7,
            spacing_horizontal: 0.5,
            carrier_frequency_hz: 28e9,
        }
    }
}

impl ArrayGeometry {
    pub fn new(
        n_vertical: usize,
        n_horizontal: usize,
        spacing_vertical: f64,
        spacing_horizontal: f64,
        carrier_frequency_hz: f64,
    ) -> Result<Self> {
        let geometry = ArrayGeometry {
            n_vertical,
            n_horizontal,
            spacing_vertical,
            spacing_horizontal,
            carrier_frequency_hz,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_vertical == 0 {
            return Err(Error::config("array.n_vertical", "must be at least 1"));
        }
        if self.n_horizontal == 0 {
            return Err(Error::config("array.n_horizontal", "must be at least 1"));
        }
        if !(self.spacing_vertical > 0.0 && self.spacing_vertical.is_finite()) {
            return Err(Error::config("array.spacing_vertical", "must be > 0"));
        }
        if !(self.spacing_horizontal > 0.0 && self.spacing_horizontal.is_finite()) {
            return Err(Error::config("array.spacing_horizontal", "must be > 0"));
        }
        if !(self.carrier_frequency_hz > 0.0 && self.carrier_frequency_hz.is_finite()) {
            return Err(Error::config("array.carrier_frequency_hz", "must be > 0"));
        }
        Ok(())
    }

    /// Total element count `N_T`.
    pub fn num_elements(&self) -> usize {
        self.n_vertical * self.n_horizontal
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency_hz
    }
}

/// Parameters of the single-element radiation pattern (angles in degrees,
/// attenuations in dB).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementPattern {
    pub theta_3db: f64,
    pub phi_3db: f64,
    pub sla_v: f64,
    pub a_max: f64,
    pub g_max_dbi: f64,
}

impl Default for ElementPattern {
    fn default() -> Self {
        ElementPattern {
            theta_3db: 65.0,
            phi_3db: 65.0,
            sla_v: 30.0,
            a_max: 30.0,
            g_max_dbi: 8.0,
        }
    }
}

impl ElementPattern {
    pub fn validate(&self) -> Result<()> {
        for (field, value) in [
            ("element.theta_3db", self.theta_3db),
            ("element.phi_3db", self.phi_3db),
            ("element.sla_v", self.sla_v),
            ("element.a_max", self.a_max),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::config(field, "must be positive and finite"));
            }
        }
        if !self.g_max_dbi.is_finite() {
            return Err(Error::config("element.g_max_dbi", "must be finite"));
        }
        Ok(())
    }

    /// Element gain in dBi towards `dir`.
    pub fn gain_db(&self, dir: Direction) -> f64 {
        let vertical = -(12.0 * ((dir.theta - 90.0) / self.theta_3db).powi(2)).min(self.sla_v);
        let horizontal = -(12.0 * (dir.phi / self.phi_3db).powi(2)).min(self.a_max);
        self.g_max_dbi - (-(vertical + horizontal)).min(self.a_max)
    }
}

/// Departure direction in degrees: zenith `theta` in `[0, 180]`, azimuth `phi`
/// in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub theta: f64,
    pub phi: f64,
}

impl Direction {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(0.0..=180.0).contains(&theta) {
            return Err(Error::config("theta", format!("{theta} outside [0, 180]")));
        }
        if !(-180.0..180.0).contains(&phi) {
            return Err(Error::config("phi", format!("{phi} outside [-180, 180)")));
        }
        Ok(Direction { theta, phi })
    }

    /// Folds arbitrary angles back into the valid ranges: zenith is clamped,
    /// azimuth wrapped.
    pub fn wrapped(theta: f64, phi: f64) -> Self {
        let theta = theta.clamp(0.0, 180.0);
        let mut phi = (phi + 180.0).rem_euclid(360.0) - 180.0;
        if phi >= 180.0 {
            phi -= 360.0;
        }
        Direction { theta, phi }
    }

    pub const BORESIGHT: Direction = Direction {
        theta: 90.0,
        phi: 0.0,
    };
}

/// Spatial signature `u(dir)` of the array; every entry has unit modulus.
pub fn steering_vector(geometry: &ArrayGeometry, dir: Direction) -> DVector<C64> {
    let (vertical_step, horizontal_step) = steering_phase_steps(geometry, dir);

    // Separable in (p, q): n_v + n_h complex exponentials instead of n_v * n_h.
    let vertical: Vec<C64> = (0..geometry.n_vertical)
        .map(|p| C64::from_polar(1.0, vertical_step * p as f64))
        .collect();
    let horizontal: Vec<C64> = (0..geometry.n_horizontal)
        .map(|q| C64::from_polar(1.0, horizontal_step * q as f64))
        .collect();

    DVector::from_iterator(
        geometry.num_elements(),
        vertical
            .iter()
            .flat_map(|v| horizontal.iter().map(move |h| v * h)),
    )
}

/// Phase increments (radians) between adjacent rows and adjacent columns.
pub(crate) fn steering_phase_steps(geometry: &ArrayGeometry, dir: Direction) -> (f64, f64) {
    let (sin_t, cos_t) = dir.theta.to_radians().sin_cos();
    let sin_p = dir.phi.to_radians().sin();
    (
        2.0 * PI * geometry.spacing_vertical * cos_t,
        2.0 * PI * geometry.spacing_horizontal * sin_t * sin_p,
    )
}

/// Linear power gain of a single element towards `dir`.
pub fn element_gain(params: &ElementPattern, dir: Direction) -> f64 {
    10f64.powf(params.gain_db(dir) / 10.0)
}

/// Amplitude field factor: square root of the element power gain. No
/// element-level phase is modeled, so the factor is real and non-negative.
pub fn field_factor(params: &ElementPattern, dir: Direction) -> f64 {
    element_gain(params, dir).sqrt()
}

/// Grid of fixed DFT beams spanning the array's spatial-frequency plane.
///
/// Beams are stored as the columns of an `N_T x Z` matrix; beam `(a, b)` for
/// vertical index `a` and horizontal index `b` is column `a * (n_h * o_h) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    beams: DMatrix<C64>,
    pub oversampling_vertical: usize,
    pub oversampling_horizontal: usize,
    pub phase_bits: u32,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.beams.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.ncols() == 0
    }

    /// Number of antenna elements each beam spans.
    pub fn num_elements(&self) -> usize {
        self.beams.nrows()
    }

    pub fn beam(&self, index: usize) -> DVector<C64> {
        self.beams.column(index).into_owned()
    }

    /// All beams as the columns of one matrix.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.beams
    }

    /// Writes one row per beam: `beam,re_0,im_0,re_1,im_1,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["beam".to_string()];
        for e in 0..self.num_elements() {
            header.push(format!("re_{e}"));
            header.push(format!("im_{e}"));
        }
        out.write_record(&header)?;
        for (index, beam) in self.beams.column_iter().enumerate() {
            let mut row = vec![index.to_string()];
            for w in beam.iter() {
                row.push(w.re.to_string());
                row.push(w.im.to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Rounds every entry's phase to the nearest point of the `2^bits` uniform
/// phase grid, keeping its modulus. `bits == 0` leaves the input unchanged.
pub fn quantize_phases(matrix: &mut DMatrix<C64>, bits: u32) {
    if bits == 0 {
        return;
    }
    let step = 2.0 * PI / f64::from(1u32 << bits.min(31));
    for w in matrix.iter_mut() {
        let (modulus, phase) = w.to_polar();
        *w = C64::from_polar(modulus, (phase / step).round() * step);
    }
}

/// Builds the oversampled 2D DFT codebook, optionally phase-quantized.
pub fn build_codebook(
    geometry: &ArrayGeometry,
    oversampling_vertical: usize,
    oversampling_horizontal: usize,
    phase_bits: u32,
) -> Result<Codebook> {
    geometry.validate()?;
    if oversampling_vertical == 0 {
        return Err(Error::config(
            "codebook.oversampling_vertical",
            "must be at least 1",
        ));
    }
    if oversampling_horizontal == 0 {
        return Err(Error::config(
            "codebook.oversampling_horizontal",
            "must be at least 1",
        ));
    }
    if phase_bits > 16 {
        return Err(Error::config("phase_bits", "must be at most 16"));
    }

    let (n_v, n_h) = (geometry.n_vertical, geometry.n_horizontal);
    let grid_v = n_v * oversampling_vertical;
    let grid_h = n_h * oversampling_horizontal;
    let n_t = geometry.num_elements();

    let mut beams = DMatrix::<C64>::zeros(n_t, grid_v * grid_h);
    for a in 0..grid_v {
        for b in 0..grid_h {
            let mut column = beams.column_mut(a * grid_h + b);
            for p in 0..n_v {
                for q in 0..n_h {
                    // Reduce the integer products first so the phase stays exact.
                    let phase = -2.0
                        * PI
                        * ((p * a % grid_v) as f64 / grid_v as f64
                            + (q * b % grid_h) as f64 / grid_h as f64);
                    column[p * n_h + q] = C64::from_polar(1.0, phase);
                }
            }
        }
    }

    quantize_phases(&mut beams, phase_bits);
    for mut column in beams.column_iter_mut() {
        let norm = column.norm();
        column /= C64::from(norm);
    }

    Ok(Codebook {
        beams,
        oversampling_vertical,
        oversampling_horizontal,
        phase_bits,
    })
}
