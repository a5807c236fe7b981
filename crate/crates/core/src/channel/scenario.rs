use serde::{Deserialize, Serialize};

use super::{dlos_gain, los_gain, ChannelError, DetectorSpec, DlosGeometry, LedSpec, LinkGeometry, NoiseSpec};

/// Parametric wall bounce: LED and receiver at equal height, `distance_m`
/// apart along a wall at perpendicular offset `wall_offset_m`. The LED points
/// at the receiver; the receiver points at the LED, then turns towards the
/// wall by `receiver_tilt_deg`. The bounce is taken at the wall point midway
/// between them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallBounce {
    pub distance_m: f64,
    pub wall_offset_m: f64,
    pub receiver_tilt_deg: f64,
    pub wall_reflectance: f64,
    pub patch_area_m2: f64,
    /// Sum the direct path, which arrives at `receiver_tilt_deg` incidence.
    pub include_los: bool,
}

impl WallBounce {
    pub fn resolve(&self) -> Result<DlosGeometry, ChannelError> {
        let (d, w) = (self.distance_m, self.wall_offset_m);
        if !(d.is_finite() && d > 0.0) {
            return Err(ChannelError::Domain { field: "distance_m", value: d, reason: "must be positive" });
        }
        if !(w.is_finite() && w > 0.0) {
            return Err(ChannelError::Domain { field: "wall_offset_m", value: w, reason: "must be positive" });
        }
        if !(0.0..180.0).contains(&self.receiver_tilt_deg) {
            return Err(ChannelError::Domain {
                field: "receiver_tilt_deg",
                value: self.receiver_tilt_deg,
                reason: "must lie in [0, 180)",
            });
        }
        let leg = (0.25 * d * d + w * w).sqrt();
        // angle of the patch seen from either end, off the LED-receiver line
        let off_axis = w.atan2(0.5 * d).to_degrees();
        // angle at the patch, off the wall normal
        let at_wall = (0.5 * d).atan2(w).to_degrees();
        let incident = LinkGeometry { distance_m: leg, emit_angle_deg: off_axis, incidence_angle_deg: at_wall };
        let reflected = LinkGeometry {
            distance_m: leg,
            emit_angle_deg: at_wall,
            incidence_angle_deg: (off_axis - self.receiver_tilt_deg).abs(),
        };
        let los = self.include_los.then_some(LinkGeometry {
            distance_m: d,
            emit_angle_deg: 0.0,
            incidence_angle_deg: self.receiver_tilt_deg,
        });
        Ok(DlosGeometry {
            wall_reflectance: self.wall_reflectance,
            patch_area_m2: self.patch_area_m2,
            incident,
            reflected,
            los,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Los(LinkGeometry),
    Dlos(DlosGeometry),
    WallBounce(WallBounce),
}

/// A complete link: emitter, detector, path geometry and noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelScenario {
    #[serde(default)]
    pub led: LedSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    pub geometry: Geometry,
    pub noise: NoiseSpec,
}

impl ChannelScenario {
    pub fn from_json(text: &str) -> Result<Self, ChannelError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let scenario: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| ChannelError::Scenario(format!("{}: {}", e.path(), e.inner())))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        self.led.validate()?;
        self.detector.validate()?;
        self.noise.validate()?;
        match &self.geometry {
            Geometry::Los(g) => g.validate(),
            Geometry::Dlos(g) => g.validate(),
            Geometry::WallBounce(g) => g.resolve()?.validate(),
        }
    }

    /// DC gain of the configured geometry.
    pub fn gain(&self) -> Result<f64, ChannelError> {
        match &self.geometry {
            Geometry::Los(g) => los_gain(&self.led, &self.detector, g),
            Geometry::Dlos(g) => dlos_gain(&self.led, &self.detector, g),
            Geometry::WallBounce(g) => dlos_gain(&self.led, &self.detector, &g.resolve()?),
        }
    }

    /// Replaces the transmitter-receiver distance.
    pub fn with_distance(mut self, distance_m: f64) -> Result<Self, ChannelError> {
        match &mut self.geometry {
            Geometry::Los(g) => g.distance_m = distance_m,
            Geometry::WallBounce(g) => g.distance_m = distance_m,
            Geometry::Dlos(_) => {
                return Err(ChannelError::Scenario("explicit dlos legs have no single distance to sweep".into()))
            }
        }
        Ok(self)
    }

    /// Replaces the receiver angle (incidence for LoS, tilt for a wall bounce).
    pub fn with_receiver_angle(mut self, angle_deg: f64) -> Result<Self, ChannelError> {
        match &mut self.geometry {
            Geometry::Los(g) => g.incidence_angle_deg = angle_deg,
            Geometry::WallBounce(g) => g.receiver_tilt_deg = angle_deg,
            Geometry::Dlos(_) => {
                return Err(ChannelError::Scenario("explicit dlos legs have no single receiver angle to sweep".into()))
            }
        }
        Ok(self)
    }

    /// Electrical AC power of the received signal for a transmit waveform
    /// whose AC RMS is `1 / bias_amplitude` of its mean, the mean being the
    /// LED's optical power.
    pub fn received_ac_power(&self, bias_amplitude: f64) -> Result<f64, ChannelError> {
        let amplitude = self.gain()? * self.detector.responsivity_a_per_w * self.led.optical_power_w / bias_amplitude;
        Ok(amplitude * amplitude)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOS: &str = r#"{
        "led": {"half_power_semi_angle_deg": 60, "optical_power_w": 1},
        "detector": {"active_area_m2": 1e-4, "fov_semi_angle_deg": 60, "responsivity_a_per_w": 0.64},
        "geometry": {"kind": "los", "distance_m": 2, "emit_angle_deg": 0, "incidence_angle_deg": 0},
        "noise": {"mode": "fixed_snr_db", "value": 20}
    }"#;

    #[test]
    fn parses_los_scenario() {
        let s = ChannelScenario::from_json(LOS).unwrap();
        assert_eq!(s.noise, NoiseSpec::FixedSnrDb(20.0));
        assert!((s.gain().unwrap() - 2e-4 / (2.0 * std::f64::consts::PI * 4.0)).abs() < 1e-15);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad = LOS.replace("\"optical_power_w\": 1", "\"optical_power_w\": 1, \"colour\": \"red\"");
        let err = ChannelScenario::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("colour"), "{err}");
        let bad = LOS.replace("\"incidence_angle_deg\": 0}", "\"incidence_angle_deg\": 0, \"tilt\": 3}");
        assert!(ChannelScenario::from_json(&bad).is_err());
        let bad = LOS.replace("\"noise\"", "\"extra\": 1, \"noise\"");
        assert!(ChannelScenario::from_json(&bad).is_err());
    }

    #[test]
    fn wall_bounce_geometry() {
        let wb = WallBounce {
            distance_m: 8.0,
            wall_offset_m: 3.0,
            receiver_tilt_deg: 0.0,
            wall_reflectance: 0.7,
            patch_area_m2: 1.0,
            include_los: false,
        };
        let g = wb.resolve().unwrap();
        assert!((g.incident.distance_m - 5.0).abs() < 1e-12);
        assert!((g.incident.emit_angle_deg - 36.869_897_645_844_02).abs() < 1e-9);
        assert!((g.incident.incidence_angle_deg - 53.130_102_354_155_98).abs() < 1e-9);
        assert_eq!(g.reflected.incidence_angle_deg, g.incident.emit_angle_deg);
        let tilted = WallBounce { receiver_tilt_deg: g.incident.emit_angle_deg, ..wb }.resolve().unwrap();
        assert!(tilted.reflected.incidence_angle_deg.abs() < 1e-12);
    }

    #[test]
    fn axis_overrides() {
        let s = ChannelScenario::from_json(LOS).unwrap();
        let far = s.with_distance(4.0).unwrap();
        assert!((far.gain().unwrap() / s.gain().unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(s.with_receiver_angle(70.0).unwrap().gain().unwrap(), 0.0);
    }
}
