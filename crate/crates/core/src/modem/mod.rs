//! DCO-OFDM baseband modem.
//!
//! A frame is a real preamble (two identical balanced ±1 halves) followed by
//! OFDM symbols. The AC part of the symbols is scaled to unit RMS, the DC bias
//! is added and negative samples are clipped to zero.

mod config;
mod estimate;
mod framing;
mod ofdm;
mod pn;
mod qam;
mod sync;
mod waveform;

use thiserror::Error;

pub use config::{compute_data_rate, OfdmConfig, Pilot, DEFAULT_DC_BIAS_DB, DEFAULT_N_PILOT};
pub use estimate::estimate_channel;
pub use framing::{
    bits_to_bytes, bytes_to_bits, decode_message, demodulate_stream, encode_message, modulate_stream, StreamOutput,
    HEADER_BITS, MAX_MESSAGE_BITS,
};
pub use ofdm::{demodulate_frame, modulate_frame, synchronize, Demodulated, Modem, MAX_FRAME_SYMBOLS};
pub use qam::{demap_symbols, map_bits, Constellation};
pub use sync::{COARSE_THRESHOLD, FINE_THRESHOLD};
pub use waveform::{read_waveform, write_waveform, Waveform, WaveformIoError, WAVEFORM_MAGIC, WAVEFORM_VERSION};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Reported when the error vector vanishes.
pub const SNR_CAP_DB: f64 = 100.0;
/// Fewest symbols [`estimate_snr`] accepts.
pub const MIN_SNR_SYMBOLS: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModemError {
    #[error("invalid modem configuration: {field}: {reason}")]
    Config { field: String, reason: String },
    #[error("framing error: {0}")]
    Framing(String),
    #[error("no preamble found (best correlation {peak:.3})")]
    SyncFailure { peak: f64 },
    #[error("degenerate channel: pilot observation at bin {bin} is zero")]
    DegenerateChannel { bin: usize },
    #[error("truncated frame: need {needed} samples, have {available}")]
    TruncatedFrame { needed: usize, available: usize },
    #[error("SNR estimate needs at least {MIN_SNR_SYMBOLS} symbols, got {0}")]
    TooFewSymbols(usize),
}

impl ModemError {
    pub(crate) fn config(field: &str, reason: impl Into<String>) -> Self {
        ModemError::Config { field: field.to_string(), reason: reason.into() }
    }
}

/// Bits carried by one frame, padded to a whole number of OFDM symbols.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FramePayload {
    bits: Vec<u8>,
}

impl FramePayload {
    /// Zero-pads `bits` to the next symbol boundary.
    pub fn padded(mut bits: Vec<u8>, config: &OfdmConfig) -> Result<Self, ModemError> {
        check_bits(&bits)?;
        let per_symbol = config.bits_per_ofdm_symbol();
        let rem = bits.len() % per_symbol;
        if rem != 0 {
            bits.resize(bits.len() + per_symbol - rem, 0);
        }
        Ok(Self { bits })
    }

    /// Accepts `bits` only if already aligned to OFDM symbols.
    pub fn aligned(bits: Vec<u8>, config: &OfdmConfig) -> Result<Self, ModemError> {
        check_bits(&bits)?;
        let per_symbol = config.bits_per_ofdm_symbol();
        if !bits.len().is_multiple_of(per_symbol) {
            return Err(ModemError::Framing(format!(
                "{} bits is not a multiple of the {per_symbol}-bit symbol capacity",
                bits.len()
            )));
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

fn check_bits(bits: &[u8]) -> Result<(), ModemError> {
    match bits.iter().position(|&b| b > 1) {
        Some(i) => Err(ModemError::Framing(format!("bit {i} has value {}", bits[i]))),
        None => Ok(()),
    }
}

/// Receiver-side measurements for one demodulated frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkMetrics {
    /// EVM-based SNR; absent when fewer than [`MIN_SNR_SYMBOLS`] data symbols.
    pub snr_db: Option<f64>,
    pub bits: usize,
    pub symbols: usize,
    pub frame_start: usize,
}

/// Decision-directed EVM SNR: `10·log10(mean |ref|² / mean |y - ref|²)`
/// where `ref` is the nearest constellation point. Capped at [`SNR_CAP_DB`].
pub fn estimate_snr(equalized: &[Complex64], constellation: &Constellation) -> Result<f64, ModemError> {
    if equalized.len() < MIN_SNR_SYMBOLS {
        return Err(ModemError::TooFewSymbols(equalized.len()));
    }
    let (signal, error) = evm_sums(equalized, constellation);
    Ok(snr_from_sums(signal, error))
}

/// `(Σ|ref|², Σ|y - ref|²)` against the nearest constellation points.
pub fn evm_sums(equalized: &[Complex64], constellation: &Constellation) -> (f64, f64) {
    equalized.iter().fold((0.0, 0.0), |(s, e), &y| {
        let r = constellation.nearest(y);
        (s + r.norm_sqr(), e + (y - r).norm_sqr())
    })
}

pub fn snr_from_sums(signal: f64, error: f64) -> f64 {
    if error <= 0.0 {
        return SNR_CAP_DB;
    }
    (10.0 * (signal / error).log10()).min(SNR_CAP_DB)
}
