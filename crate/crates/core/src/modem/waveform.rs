//! Optical intensity waveforms and the `VLCW` file format.
//!
//! Layout, all little-endian: magic `b"VLCW"`, version `u16`, sample rate
//! `f64`, sample count `u64`, then `count` samples as `f32`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

pub const WAVEFORM_MAGIC: [u8; 4] = *b"VLCW";
pub const WAVEFORM_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    samples: Vec<f64>,
    sample_rate_hz: f64,
}

impl Waveform {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Self {
        Self { samples, sample_rate_hz }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            0.0
        } else {
            self.samples.iter().sum::<f64>() / self.samples.len() as f64
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.samples.len());
        out.extend_from_slice(&WAVEFORM_MAGIC);
        out.extend_from_slice(&WAVEFORM_VERSION.to_le_bytes());
        out.extend_from_slice(&self.sample_rate_hz.to_le_bytes());
        out.extend_from_slice(&(self.samples.len() as u64).to_le_bytes());
        for &s in &self.samples {
            out.extend_from_slice(&(s as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WaveformIoError> {
        let truncated = |offset: usize, needed: usize| WaveformIoError::Truncated { offset, needed };
        if bytes.len() < HEADER_LEN {
            return Err(truncated(bytes.len(), HEADER_LEN));
        }
        if bytes[..4] != WAVEFORM_MAGIC {
            return Err(WaveformIoError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != WAVEFORM_VERSION {
            return Err(WaveformIoError::UnsupportedVersion(version));
        }
        let sample_rate_hz = f64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
        let count = u64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes"));
        let needed = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(4))
            .and_then(|b| b.checked_add(HEADER_LEN))
            .ok_or(WaveformIoError::Truncated { offset: bytes.len(), needed: usize::MAX })?;
        if bytes.len() < needed {
            return Err(truncated(bytes.len(), needed));
        }
        let samples = bytes[HEADER_LEN..needed]
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
            .collect();
        Ok(Self { samples, sample_rate_hz })
    }
}

#[derive(Debug, Error)]
pub enum WaveformIoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("not a VLCW file (magic {0:02x?})")]
    BadMagic([u8; 4]),
    #[error("unsupported VLCW version {0}")]
    UnsupportedVersion(u16),
    #[error("waveform truncated at byte offset {offset}, expected {needed} bytes")]
    Truncated { offset: usize, needed: usize },
}

pub fn write_waveform(path: &Path, waveform: &Waveform) -> Result<(), WaveformIoError> {
    let io = |source| WaveformIoError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    w.write_all(&waveform.to_bytes()).map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_waveform(path: &Path) -> Result<Waveform, WaveformIoError> {
    let io = |source| WaveformIoError::Io { path: path.to_path_buf(), source };
    let mut bytes = Vec::new();
    BufReader::new(File::open(path).map_err(io)?).read_to_end(&mut bytes).map_err(io)?;
    Waveform::from_bytes(&bytes)
}
