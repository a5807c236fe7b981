//! Geometric optical wireless channel.
//!
//! LoS DC gain of a Lambertian emitter of order `m` seen by a detector of area
//! `A` at distance `d`, emission angle `φ` and incidence angle `ψ`:
//!
//! ```text
//! H = (m+1)·A / (2π d²) · cosᵐ(φ) · T · g · cos(ψ)    for ψ < FoV, else 0
//! ```
//!
//! The diffuse (DLoS) path is a single wall bounce: the emitter illuminates a
//! wall patch, which re-emits a fraction `ρ` as an order-1 Lambertian source
//! towards the detector. A partial direct term may be added.

mod scenario;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modem::Waveform;
use crate::seed::stream_rng;

pub use scenario::{ChannelScenario, Geometry, WallBounce};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("{field} = {value} is out of range: {reason}")]
    Domain { field: &'static str, value: f64, reason: &'static str },
    #[error("invalid channel scenario: {0}")]
    Scenario(String),
}

fn domain(field: &'static str, value: f64, reason: &'static str) -> ChannelError {
    ChannelError::Domain { field, value, reason }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedSpec {
    pub half_power_semi_angle_deg: f64,
    pub optical_power_w: f64,
}

impl Default for LedSpec {
    fn default() -> Self {
        Self { half_power_semi_angle_deg: 60.0, optical_power_w: 1.0 }
    }
}

impl LedSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        lambertian_order(self.half_power_semi_angle_deg)?;
        if !(self.optical_power_w.is_finite() && self.optical_power_w > 0.0) {
            return Err(domain("optical_power_w", self.optical_power_w, "must be positive"));
        }
        Ok(())
    }

    pub fn lambertian_order(&self) -> Result<f64, ChannelError> {
        lambertian_order(self.half_power_semi_angle_deg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorSpec {
    pub active_area_m2: f64,
    pub fov_semi_angle_deg: f64,
    pub responsivity_a_per_w: f64,
    #[serde(default = "one")]
    pub optical_filter_gain: f64,
    #[serde(default = "one")]
    pub concentrator_gain: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            active_area_m2: 1e-4,
            fov_semi_angle_deg: 60.0,
            responsivity_a_per_w: 0.64,
            optical_filter_gain: 1.0,
            concentrator_gain: 1.0,
        }
    }
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        let positive = |field, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(domain(field, v, "must be positive"))
            }
        };
        positive("active_area_m2", self.active_area_m2)?;
        positive("responsivity_a_per_w", self.responsivity_a_per_w)?;
        if !(self.fov_semi_angle_deg > 0.0 && self.fov_semi_angle_deg <= 90.0) {
            return Err(domain("fov_semi_angle_deg", self.fov_semi_angle_deg, "must lie in (0, 90]"));
        }
        if !(self.optical_filter_gain > 0.0 && self.optical_filter_gain <= 1.0) {
            return Err(domain("optical_filter_gain", self.optical_filter_gain, "must lie in (0, 1]"));
        }
        if !(self.concentrator_gain.is_finite() && self.concentrator_gain >= 1.0) {
            return Err(domain("concentrator_gain", self.concentrator_gain, "must be at least 1"));
        }
        Ok(())
    }

    /// Collection factor `A·T·g·cos(ψ)`, zero outside the field of view.
    fn collection(&self, incidence_deg: f64) -> f64 {
        if incidence_deg >= self.fov_semi_angle_deg {
            return 0.0;
        }
        self.active_area_m2 * self.optical_filter_gain * self.concentrator_gain * incidence_deg.to_radians().cos()
    }
}

/// One straight optical path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkGeometry {
    pub distance_m: f64,
    /// Angle off the emitter axis, `[0, 90)`.
    pub emit_angle_deg: f64,
    /// Angle off the receiver axis, `[0, 180)`.
    pub incidence_angle_deg: f64,
}

impl LinkGeometry {
    pub fn facing(distance_m: f64) -> Self {
        Self { distance_m, emit_angle_deg: 0.0, incidence_angle_deg: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.distance_m.is_finite() && self.distance_m > 0.0) {
            return Err(domain("distance_m", self.distance_m, "must be positive"));
        }
        if !(0.0..90.0).contains(&self.emit_angle_deg) {
            return Err(domain("emit_angle_deg", self.emit_angle_deg, "must lie in [0, 90)"));
        }
        if !(0.0..180.0).contains(&self.incidence_angle_deg) {
            return Err(domain("incidence_angle_deg", self.incidence_angle_deg, "must lie in [0, 180)"));
        }
        Ok(())
    }
}

/// Single-bounce wall reflection with an optional partial direct path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DlosGeometry {
    pub wall_reflectance: f64,
    pub patch_area_m2: f64,
    /// Emitter to wall patch; incidence measured from the wall normal.
    pub incident: LinkGeometry,
    /// Wall patch to detector; emission measured from the wall normal.
    pub reflected: LinkGeometry,
    #[serde(default)]
    pub los: Option<LinkGeometry>,
}

impl DlosGeometry {
    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(0.0..=1.0).contains(&self.wall_reflectance) {
            return Err(domain("wall_reflectance", self.wall_reflectance, "must lie in [0, 1]"));
        }
        if !(self.patch_area_m2.is_finite() && self.patch_area_m2 > 0.0) {
            return Err(domain("patch_area_m2", self.patch_area_m2, "must be positive"));
        }
        self.incident.validate()?;
        self.reflected.validate()?;
        if let Some(los) = &self.los {
            los.validate()?;
        }
        Ok(())
    }
}

/// Additive receiver noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "value", rename_all = "snake_case")]
pub enum NoiseSpec {
    /// Noise variance set so that AC signal power / noise variance hits this SNR.
    FixedSnrDb(f64),
    /// Noise variance per sample, in A².
    NoisePower(f64),
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), ChannelError> {
        match *self {
            NoiseSpec::FixedSnrDb(s) if !s.is_finite() => Err(domain("fixed_snr_db", s, "must be finite")),
            NoiseSpec::NoisePower(p) if !(p.is_finite() && p >= 0.0) => {
                Err(domain("noise_power", p, "must be finite and non-negative"))
            }
            _ => Ok(()),
        }
    }
}

/// `m = -ln 2 / ln(cos Φ½)`.
pub fn lambertian_order(half_power_semi_angle_deg: f64) -> Result<f64, ChannelError> {
    let a = half_power_semi_angle_deg;
    if !(a > 0.0 && a < 90.0) {
        return Err(domain("half_power_semi_angle_deg", a, "must lie in (0, 90)"));
    }
    if a == 60.0 {
        // cos(60°) rounds to 0.5000000000000001 in binary
        return Ok(1.0);
    }
    Ok(-std::f64::consts::LN_2 / a.to_radians().cos().ln())
}

/// Radiant intensity factor `(m+1)/(2π d²)·cosᵐ(φ)` per square metre of
/// receiving aperture.
fn emitter_term(order: f64, distance_m: f64, emit_angle_deg: f64) -> f64 {
    (order + 1.0) / (2.0 * std::f64::consts::PI * distance_m * distance_m)
        * emit_angle_deg.to_radians().cos().powf(order)
}

/// Dimensionless LoS DC gain.
pub fn los_gain(led: &LedSpec, det: &DetectorSpec, geo: &LinkGeometry) -> Result<f64, ChannelError> {
    led.validate()?;
    det.validate()?;
    geo.validate()?;
    let m = led.lambertian_order()?;
    Ok(emitter_term(m, geo.distance_m, geo.emit_angle_deg) * det.collection(geo.incidence_angle_deg))
}

/// Emitter → wall patch gain per unit patch area.
pub fn incident_leg_gain(led: &LedSpec, leg: &LinkGeometry) -> Result<f64, ChannelError> {
    leg.validate()?;
    let m = led.lambertian_order()?;
    let cos_in = if leg.incidence_angle_deg >= 90.0 { 0.0 } else { leg.incidence_angle_deg.to_radians().cos() };
    Ok(emitter_term(m, leg.distance_m, leg.emit_angle_deg) * cos_in)
}

/// Wall patch (order-1 Lambertian re-emitter) → detector gain.
pub fn reflected_leg_gain(det: &DetectorSpec, leg: &LinkGeometry) -> Result<f64, ChannelError> {
    leg.validate()?;
    Ok(emitter_term(1.0, leg.distance_m, leg.emit_angle_deg) * det.collection(leg.incidence_angle_deg))
}

/// Single-bounce diffuse gain plus the optional direct term.
pub fn dlos_gain(led: &LedSpec, det: &DetectorSpec, geo: &DlosGeometry) -> Result<f64, ChannelError> {
    led.validate()?;
    det.validate()?;
    geo.validate()?;
    let bounce = incident_leg_gain(led, &geo.incident)?
        * geo.wall_reflectance
        * geo.patch_area_m2
        * reflected_leg_gain(det, &geo.reflected)?;
    let direct = match &geo.los {
        Some(los) => los_gain(led, det, los)?,
        None => 0.0,
    };
    Ok(bounce + direct)
}

/// `rx[i] = gain · responsivity · tx[i] + n[i]` with white Gaussian `n`.
///
/// In fixed-SNR mode the noise variance is the AC power of the noiseless
/// received signal divided by the linear SNR; a silent signal gets no noise.
pub fn apply_channel(
    tx: &Waveform,
    gain: f64,
    responsivity: f64,
    noise: &NoiseSpec,
    seed: u64,
) -> Result<Waveform, ChannelError> {
    if !(gain.is_finite() && gain >= 0.0) {
        return Err(domain("gain", gain, "must be finite and non-negative"));
    }
    if !(responsivity.is_finite() && responsivity >= 0.0) {
        return Err(domain("responsivity", responsivity, "must be finite and non-negative"));
    }
    noise.validate()?;
    let scale = gain * responsivity;
    let mut rx: Vec<f64> = tx.samples().iter().map(|x| scale * x).collect();
    let variance = match *noise {
        NoiseSpec::NoisePower(p) => p,
        NoiseSpec::FixedSnrDb(snr_db) => ac_power(&rx) / 10f64.powf(snr_db / 10.0),
    };
    if variance > 0.0 {
        let sigma = variance.sqrt();
        let mut rng = stream_rng(seed, "awgn", 0);
        for x in &mut rx {
            let n: f64 = rng.sample(StandardNormal);
            *x += sigma * n;
        }
    }
    Ok(Waveform::new(rx, tx.sample_rate_hz()))
}

/// Variance about the mean.
pub fn ac_power(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}
