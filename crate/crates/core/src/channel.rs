//! Planar-array steering vectors, sparse multipath channels and the SNR
//! link budget.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// SNR reported for a channel with no usable projection onto the beam.
/// Anything at or below this maps to zero rate.
pub const SNR_OUTAGE_DB: f64 = -300.0;

/// Relative power `|hᴴf|² / (‖h‖²‖f‖²)` below which the projection counts as
/// exactly zero.
const ZERO_PROJECTION: f64 = 1e-24;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("no propagation paths: deep outage")]
    NoPaths,
}

/// Angle pair in degrees: azimuth φ, elevation θ.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Direction {
    pub azimuth: f64,
    pub elevation: f64,
}

impl Direction {
    pub const fn new(azimuth: f64, elevation: f64) -> Self {
        Self { azimuth, elevation }
    }

    pub fn offset(self, d_az: f64, d_el: f64) -> Self {
        Self::new(self.azimuth + d_az, self.elevation + d_el)
    }

    /// Euclidean distance in the (φ, θ) degree plane.
    pub fn distance(self, o: Direction) -> f64 {
        (self.azimuth - o.azimuth).hypot(self.elevation - o.elevation)
    }
}

/// Uniform planar array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayGeometry {
    pub rows: usize,
    pub cols: usize,
    /// Element spacing in wavelengths.
    pub spacing: f64,
}

impl Default for ArrayGeometry {
    fn default() -> Self {
        Self { rows: 8, cols: 8, spacing: 0.5 }
    }
}

impl ArrayGeometry {
    pub fn elements(&self) -> usize {
        self.rows * self.cols
    }
}

/// Steering vector `a(φ, θ)`: element `(m, n)` (row-major, `m` vertical) has
/// phase `2π d (m sin θ + n cos θ sin φ)`.
pub fn array_response(dir: Direction, geom: &ArrayGeometry) -> Vec<Complex64> {
    let (az, el) = (dir.azimuth.to_radians(), dir.elevation.to_radians());
    let k = 2.0 * PI * geom.spacing;
    let v = k * el.sin();
    let h = k * el.cos() * az.sin();
    let mut out = Vec::with_capacity(geom.elements());
    for m in 0..geom.rows {
        for n in 0..geom.cols {
            out.push(Complex64::cis(m as f64 * v + n as f64 * h));
        }
    }
    out
}

/// Unit-norm beamforming vector pointing at `dir`.
pub fn beam_vector(dir: Direction, geom: &ArrayGeometry) -> Vec<Complex64> {
    let scale = 1.0 / (geom.elements() as f64).sqrt();
    let mut v = array_response(dir, geom);
    v.iter_mut().for_each(|x| *x *= scale);
    v
}

/// One departing multipath component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    /// Linear amplitude gain including path loss.
    pub gain: Complex64,
    pub aod: Direction,
}

impl Path {
    pub fn from_loss_db(loss_db: f64, aod: Direction) -> Self {
        Self { gain: Complex64::new(10f64.powf(-loss_db / 20.0), 0.0), aod }
    }
}

/// `h = Σ hℓ aᴴ(φℓ, θℓ)` stored element-wise, so the received amplitude for a
/// beam `f` is `Σₙ hₙ fₙ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVector(pub Vec<Complex64>);

impl ChannelVector {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum()
    }

    /// Received amplitude `hᴴf`.
    pub fn project(&self, f: &[Complex64]) -> Complex64 {
        self.0.iter().zip(f).map(|(h, f)| h * f).sum()
    }
}

/// Sum of steered paths with their gains as given.
pub fn assemble_channel(paths: &[Path], geom: &ArrayGeometry) -> Result<ChannelVector, ChannelError> {
    if paths.is_empty() {
        return Err(ChannelError::NoPaths);
    }
    let mut h = vec![Complex64::new(0.0, 0.0); geom.elements()];
    for p in paths {
        for (acc, a) in h.iter_mut().zip(array_response(p.aod, geom)) {
            *acc += p.gain * a.conj();
        }
    }
    Ok(ChannelVector(h))
}

/// Like [`assemble_channel`] with an independent uniform phase drawn for every
/// path (small-scale fading of this realization).
pub fn assemble_faded_channel<R: Rng + ?Sized>(
    paths: &[Path],
    geom: &ArrayGeometry,
    rng: &mut R,
) -> Result<ChannelVector, ChannelError> {
    let faded: Vec<Path> = paths
        .iter()
        .map(|p| Path { gain: p.gain * Complex64::cis(rng.random_range(0.0..2.0 * PI)), aod: p.aod })
        .collect();
    assemble_channel(&faded, geom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { tx_power_dbm: 10.0, noise_density_dbm_hz: -174.0, bandwidth_hz: 100e6 }
    }
}

impl LinkBudget {
    /// σ² in dBm over the signal bandwidth.
    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }
}

/// `p |hᴴf|² / σ²` in dB, or [`SNR_OUTAGE_DB`] when the projection vanishes.
pub fn snr_db(h: &ChannelVector, f: &[Complex64], budget: &LinkBudget) -> f64 {
    debug_assert!(
        (f.iter().map(|x| x.norm_sqr()).sum::<f64>() - 1.0).abs() < 1e-9,
        "beam vector must have unit norm"
    );
    let power = h.project(f).norm_sqr();
    if power <= ZERO_PROJECTION * h.norm_sqr() || power == 0.0 {
        return SNR_OUTAGE_DB;
    }
    let snr = budget.tx_power_dbm + 10.0 * power.log10() - budget.noise_power_dbm();
    snr.max(SNR_OUTAGE_DB)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Spectral efficiency `log₂(1 + SNR)` in bit/s/Hz; outage gives 0.
pub fn rate(snr_db: f64) -> f64 {
    if snr_db <= SNR_OUTAGE_DB {
        0.0
    } else {
        (1.0 + db_to_linear(snr_db)).log2()
    }
}
