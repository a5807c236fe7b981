use serde::{Deserialize, Serialize};

use super::pn::pilot_phase_table;
use super::ModemError;
use rustfft::num_complex::Complex64;

/// A known pilot: subcarrier index and its unit-magnitude value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pilot {
    pub index: usize,
    /// `[re, im]`
    pub value: [f64; 2],
}

impl Pilot {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.value[0], self.value[1])
    }
}

/// DCO-OFDM modem configuration.
///
/// In complex-baseband mode (`hermitian_mode = false`) every non-pilot bin, DC
/// included, carries data and the complex baseband is sent as interleaved
/// in-phase/quadrature intensity samples, so the optical sample rate is twice
/// `iq_rate_hz`. In Hermitian mode only bins `1..n_fft/2` are loaded, their
/// conjugates mirror the upper half, and one real sample is sent per IQ sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OfdmConfigFile")]
pub struct OfdmConfig {
    pub n_fft: usize,
    pub n_pilot: usize,
    pub modulation_order: usize,
    pub iq_rate_hz: f64,
    pub cp_len: usize,
    pub hermitian_mode: bool,
    pub dc_bias_db: f64,
    pub pilot_pattern: Vec<Pilot>,
    pub preamble_len: usize,
}

/// On-disk form; absent fields take the defaults of [`OfdmConfig::default`].
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct OfdmConfigFile {
    #[serde(default = "defaults::n_fft")]
    n_fft: usize,
    #[serde(default)]
    n_pilot: Option<usize>,
    #[serde(default = "defaults::modulation_order")]
    modulation_order: usize,
    #[serde(default = "defaults::iq_rate_hz")]
    iq_rate_hz: f64,
    #[serde(default)]
    cp_len: Option<usize>,
    #[serde(default)]
    hermitian_mode: bool,
    #[serde(default = "defaults::dc_bias_db")]
    dc_bias_db: f64,
    #[serde(default)]
    pilot_pattern: Option<Vec<Pilot>>,
    #[serde(default)]
    preamble_len: Option<usize>,
}

mod defaults {
    pub fn n_fft() -> usize {
        64
    }
    pub fn modulation_order() -> usize {
        4
    }
    pub fn iq_rate_hz() -> f64 {
        200_000.0
    }
    pub fn dc_bias_db() -> f64 {
        super::DEFAULT_DC_BIAS_DB
    }
}

pub const DEFAULT_N_PILOT: usize = 4;
pub const DEFAULT_DC_BIAS_DB: f64 = 9.0;

impl TryFrom<OfdmConfigFile> for OfdmConfig {
    type Error = ModemError;

    fn try_from(f: OfdmConfigFile) -> Result<Self, ModemError> {
        let n_pilot = match (&f.pilot_pattern, f.n_pilot) {
            (Some(p), Some(n)) if p.len() != n => {
                return Err(ModemError::config(
                    "n_pilot",
                    format!("{n} does not match pilot_pattern length {}", p.len()),
                ))
            }
            (Some(p), _) => p.len(),
            (None, n) => n.unwrap_or(DEFAULT_N_PILOT),
        };
        let mut cfg = OfdmConfig {
            n_fft: f.n_fft,
            n_pilot,
            modulation_order: f.modulation_order,
            iq_rate_hz: f.iq_rate_hz,
            cp_len: f.cp_len.unwrap_or(f.n_fft / 4),
            hermitian_mode: f.hermitian_mode,
            dc_bias_db: f.dc_bias_db,
            pilot_pattern: Vec::new(),
            preamble_len: f.preamble_len.unwrap_or(4 * f.n_fft),
        };
        cfg.pilot_pattern = match f.pilot_pattern {
            Some(p) => p,
            None => {
                cfg.validate_shape()?;
                evenly_spaced_pilots(&cfg)
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl Default for OfdmConfig {
    /// reference modem with a quarter-symbol cyclic prefix.
    fn default() -> Self {
        Self::complex_baseband(16)
    }
}

impl OfdmConfig {
    /// The reference operating point: 64 bins, 4 pilots, 4-QAM,
    /// 200 kHz, no cyclic prefix, complex-baseband accounting (375 kbps).
    pub fn reference() -> Self {
        Self::complex_baseband(0)
    }

    pub fn complex_baseband(cp_len: usize) -> Self {
        Self::build(false, cp_len)
    }

    /// Real-baseband variant of the reference modem (Hermitian symmetric).
    pub fn hermitian() -> Self {
        Self::build(true, 16)
    }

    fn build(hermitian_mode: bool, cp_len: usize) -> Self {
        let mut cfg = OfdmConfig {
            n_fft: 64,
            n_pilot: DEFAULT_N_PILOT,
            modulation_order: 4,
            iq_rate_hz: 200_000.0,
            cp_len,
            hermitian_mode,
            dc_bias_db: DEFAULT_DC_BIAS_DB,
            pilot_pattern: Vec::new(),
            preamble_len: 256,
        };
        cfg.pilot_pattern = evenly_spaced_pilots(&cfg);
        cfg
    }

    /// Rebuilds the pilot pattern as `n_pilot` evenly spaced pilots.
    pub fn with_pilots(mut self, n_pilot: usize) -> Result<Self, ModemError> {
        self.n_pilot = n_pilot;
        self.validate_shape()?;
        self.pilot_pattern = evenly_spaced_pilots(&self);
        self.validate()?;
        Ok(self)
    }

    pub fn from_json(text: &str) -> Result<Self, ModemError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: OfdmConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ModemError::Config { field: path, reason: e.into_inner().to_string() }
        })?;
        Self::try_from(file)
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation_order.trailing_zeros() as usize
    }

    /// Subcarriers eligible to carry pilots or data.
    pub fn usable_bins(&self) -> Vec<usize> {
        if self.hermitian_mode {
            (1..self.n_fft / 2).collect()
        } else {
            (1..self.n_fft).collect()
        }
    }

    /// Data-bearing bins in ascending order.
    pub fn data_bins(&self) -> Vec<usize> {
        let start = if self.hermitian_mode { 1 } else { 0 };
        let end = if self.hermitian_mode { self.n_fft / 2 } else { self.n_fft };
        (start..end).filter(|k| !self.pilot_pattern.iter().any(|p| p.index == *k)).collect()
    }

    pub fn n_data(&self) -> usize {
        if self.hermitian_mode {
            self.n_fft / 2 - 1 - self.n_pilot
        } else {
            self.n_fft - self.n_pilot
        }
    }

    /// Payload bits carried by one OFDM symbol.
    pub fn bits_per_ofdm_symbol(&self) -> usize {
        self.n_data() * self.bits_per_symbol()
    }

    /// Optical (real) samples per second of emitted waveforms.
    pub fn sample_rate_hz(&self) -> f64 {
        if self.hermitian_mode {
            self.iq_rate_hz
        } else {
            2.0 * self.iq_rate_hz
        }
    }

    /// Real samples per OFDM symbol including the cyclic prefix.
    pub fn symbol_len(&self) -> usize {
        let iq = self.n_fft + self.cp_len;
        if self.hermitian_mode {
            iq
        } else {
            2 * iq
        }
    }

    /// DC bias as a multiple of the AC RMS.
    pub fn bias_amplitude(&self) -> f64 {
        10f64.powf(self.dc_bias_db / 20.0)
    }

    fn validate_shape(&self) -> Result<(), ModemError> {
        if self.n_fft < 4 || !self.n_fft.is_multiple_of(2) {
            return Err(ModemError::config("n_fft", format!("{} must be even and at least 4", self.n_fft)));
        }
        let usable = self.usable_bins().len();
        if self.n_pilot >= usable {
            return Err(ModemError::config(
                "n_pilot",
                format!("{} pilots leave no data bins among {usable} usable subcarriers", self.n_pilot),
            ));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ModemError> {
        self.validate_shape()?;
        let m = self.modulation_order;
        if m < 4 || !m.is_power_of_two() || !m.trailing_zeros().is_multiple_of(2) || m > 1 << 16 {
            return Err(ModemError::config(
                "modulation_order",
                format!("{m} is not a square QAM order (4, 16, 64, ...)"),
            ));
        }
        if !(self.iq_rate_hz.is_finite() && self.iq_rate_hz > 0.0) {
            return Err(ModemError::config("iq_rate_hz", format!("{} must be positive", self.iq_rate_hz)));
        }
        if self.cp_len >= self.n_fft {
            return Err(ModemError::config("cp_len", format!("{} must be below n_fft {}", self.cp_len, self.n_fft)));
        }
        if !(self.dc_bias_db.is_finite() && self.dc_bias_db >= 0.0) {
            return Err(ModemError::config(
                "dc_bias_db",
                format!("{} must be finite and non-negative", self.dc_bias_db),
            ));
        }
        if self.preamble_len < 16 || !self.preamble_len.is_multiple_of(4) {
            return Err(ModemError::config(
                "preamble_len",
                format!("{} must be a multiple of 4 and at least 16", self.preamble_len),
            ));
        }
        if self.pilot_pattern.len() != self.n_pilot {
            return Err(ModemError::config(
                "pilot_pattern",
                format!("{} entries but n_pilot is {}", self.pilot_pattern.len(), self.n_pilot),
            ));
        }
        let usable = self.usable_bins();
        for (i, p) in self.pilot_pattern.iter().enumerate() {
            if !usable.contains(&p.index) {
                return Err(ModemError::config(
                    "pilot_pattern",
                    format!(
                        "pilot {i} at bin {} is outside the usable bins {}..={}",
                        p.index,
                        usable[0],
                        usable[usable.len() - 1]
                    ),
                ));
            }
            if self.pilot_pattern[..i].iter().any(|q| q.index == p.index) {
                return Err(ModemError::config("pilot_pattern", format!("bin {} used twice", p.index)));
            }
            if (p.complex().norm() - 1.0).abs() > 1e-6 {
                return Err(ModemError::config("pilot_pattern", format!("pilot {i} is not unit magnitude")));
            }
        }
        Ok(())
    }
}

/// `n_pilot` pilots spread evenly over the usable bins, values from the fixed
/// phase table.
fn evenly_spaced_pilots(cfg: &OfdmConfig) -> Vec<Pilot> {
    let usable = cfg.usable_bins();
    let n = cfg.n_pilot;
    pilot_phase_table(n)
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let pos = ((2 * i + 1) * usable.len()) / (2 * n);
            Pilot { index: usable[pos], value: [v.re, v.im] }
        })
        .collect()
}

/// Net payload bit rate.
///
/// `iq_rate × bits_per_subcarrier × n_data / (n_fft + cp_len)`, with
/// `n_data = n_fft - n_pilot` in complex-baseband mode and
/// `n_fft/2 - 1 - n_pilot` in Hermitian mode.
pub fn compute_data_rate(config: &OfdmConfig) -> Result<f64, ModemError> {
    config.validate()?;
    let bits_per_symbol = (config.n_data() * config.bits_per_symbol()) as f64;
    Ok(config.iq_rate_hz * bits_per_symbol / (config.n_fft + config.cp_len) as f64)
}
