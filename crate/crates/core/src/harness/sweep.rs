use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_ber_point, BerResult, HarnessError, LinkChannel, StopPolicy};
use crate::channel::{ChannelScenario, NoiseSpec};
use crate::modem::{Modem, OfdmConfig, MAX_FRAME_SYMBOLS};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrDb,
    DistanceM,
    IncidenceAngleDeg,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::DistanceM => "distance_m",
            SweepAxis::IncidenceAngleDeg => "incidence_angle_deg",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A BER sweep over one axis of a fixed channel scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub scenario: ChannelScenario,
    #[serde(default)]
    pub modem: OfdmConfig,
    #[serde(default = "defaults::min_bits")]
    pub min_bits: u64,
    #[serde(default = "defaults::min_errors")]
    pub min_errors: u64,
    #[serde(default = "defaults::max_bits")]
    pub max_bits: u64,
    #[serde(default = "defaults::frame_symbols")]
    pub frame_symbols: usize,
    #[serde(default)]
    pub seed: u64,
}

mod defaults {
    use super::StopPolicy;
    pub fn min_bits() -> u64 {
        StopPolicy::default().min_bits
    }
    pub fn min_errors() -> u64 {
        StopPolicy::default().min_errors
    }
    pub fn max_bits() -> u64 {
        StopPolicy::default().max_bits
    }
    pub fn frame_symbols() -> usize {
        64
    }
}

pub const MIN_SWEEP_BITS: u64 = 100_000;

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let spec: Self = serde_path_to_error::deserialize(de)
            .map_err(|e| HarnessError::Config(format!("{}: {}", e.path(), e.inner())))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn policy(&self) -> StopPolicy {
        StopPolicy { min_bits: self.min_bits, min_errors: self.min_errors, max_bits: self.max_bits }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::Config("values must not be empty".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(HarnessError::Config("values must be finite".into()));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(HarnessError::Config("values must be strictly monotone".into()));
        }
        if self.min_bits < MIN_SWEEP_BITS {
            return Err(HarnessError::Config(format!("min_bits {} is below {MIN_SWEEP_BITS}", self.min_bits)));
        }
        if self.max_bits < self.min_bits {
            return Err(HarnessError::Config(format!(
                "max_bits {} is below min_bits {}",
                self.max_bits, self.min_bits
            )));
        }
        if self.frame_symbols == 0 || self.frame_symbols > MAX_FRAME_SYMBOLS {
            return Err(HarnessError::Config(format!("frame_symbols must lie in 1..={MAX_FRAME_SYMBOLS}")));
        }
        self.modem.validate()?;
        self.scenario.validate()?;
        Ok(())
    }

    /// Scenario for the point at `value` on the sweep axis.
    pub fn scenario_at(&self, value: f64) -> Result<ChannelScenario, HarnessError> {
        let s = self.scenario;
        Ok(match self.axis {
            SweepAxis::SnrDb => ChannelScenario { noise: NoiseSpec::FixedSnrDb(value), ..s },
            SweepAxis::DistanceM => s.with_distance(value)?,
            SweepAxis::IncidenceAngleDeg => s.with_receiver_angle(value)?,
        })
    }
}

/// Runs every point (in parallel) and returns results in input order. Point
/// `i` uses seed `derive_seed(spec.seed, "point", i)`, so the output does not
/// depend on scheduling.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<BerResult>, HarnessError> {
    spec.validate()?;
    let modem = Modem::new(spec.modem.clone())?;
    let policy = spec.policy();
    spec.values
        .par_iter()
        .enumerate()
        .map(|(index, &value)| {
            let point = || -> Result<BerResult, HarnessError> {
                let channel = LinkChannel::from_scenario(&spec.scenario_at(value)?)?;
                let seed = derive_seed(spec.seed, "point", index as u64);
                let stats = run_ber_point(&modem, &channel, &policy, spec.frame_symbols, seed)?;
                Ok(BerResult::new(spec.axis, value, &stats))
            };
            point().map_err(|e| HarnessError::Point { index, axis: spec.axis, value, source: Box::new(e) })
        })
        .collect()
}
