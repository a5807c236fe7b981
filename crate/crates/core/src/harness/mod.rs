//! Monte-Carlo BER measurement.
//!
//! A point sends seeded random frames through modulate → channel → demodulate
//! and counts bit errors. It keeps going while fewer than `min_bits` bits have
//! been sent, or while fewer than `min_errors` errors have been seen and the
//! `max_bits` cap is not reached. A frame that fails synchronization is scored
//! as if the receiver had output all zeros.

mod output;
mod sweep;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

use crate::channel::{apply_channel, ChannelError, ChannelScenario, NoiseSpec};
use crate::modem::{snr_from_sums, FramePayload, Modem, ModemError, Waveform};
use crate::seed::{derive_seed, stream_rng};

pub use output::{read_results_json, results_to_csv, results_to_json, write_results, OutputFormat};
pub use sweep::{run_sweep, SweepAxis, SweepSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid sweep: {0}")]
    Config(String),
    #[error("sweep point {index} ({axis} = {value}): {source}")]
    Point { index: usize, axis: SweepAxis, value: f64, source: Box<HarnessError> },
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{}: {source}", path.display())]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("malformed results: {0}")]
    Parse(String),
}

/// Stopping rule for one point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopPolicy {
    pub min_bits: u64,
    pub min_errors: u64,
    pub max_bits: u64,
}

impl Default for StopPolicy {
    fn default() -> Self {
        Self { min_bits: 100_000, min_errors: 100, max_bits: 100_000_000 }
    }
}

impl StopPolicy {
    pub fn keep_going(&self, bits: u64, errors: u64) -> bool {
        bits < self.min_bits || (errors < self.min_errors && bits < self.max_bits)
    }
}

/// Electrical link seen by the harness: the transmit waveform is scaled so its
/// DC bias level equals `optical_power_w`, then multiplied by `gain ·
/// responsivity`, then noise is added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkChannel {
    pub gain: f64,
    pub responsivity: f64,
    pub optical_power_w: f64,
    pub noise: NoiseSpec,
}

impl LinkChannel {
    /// Unit gain, unit power; only the noise matters.
    pub fn awgn(noise: NoiseSpec) -> Self {
        Self { gain: 1.0, responsivity: 1.0, optical_power_w: 1.0, noise }
    }

    pub fn from_scenario(s: &ChannelScenario) -> Result<Self, ChannelError> {
        s.validate()?;
        Ok(Self {
            gain: s.gain()?,
            responsivity: s.detector.responsivity_a_per_w,
            optical_power_w: s.led.optical_power_w,
            noise: s.noise,
        })
    }

    /// Scales a modulator output (mean `bias_amplitude`) to the LED's optical
    /// power and passes it through the link.
    pub fn transmit(&self, tx: &Waveform, bias_amplitude: f64, seed: u64) -> Result<Waveform, ChannelError> {
        let to_optical = self.optical_power_w / bias_amplitude;
        let tx = Waveform::new(tx.samples().iter().map(|x| x * to_optical).collect(), tx.sample_rate_hz());
        apply_channel(&tx, self.gain, self.responsivity, &self.noise, seed)
    }
}

/// Raw counts of one measurement point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PointStats {
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub frames: u64,
    pub sync_failures: u64,
    pub measured_snr_db: Option<f64>,
}

impl PointStats {
    pub fn ber(&self) -> f64 {
        if self.bits_sent == 0 {
            0.0
        } else {
            self.bit_errors as f64 / self.bits_sent as f64
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerResult {
    pub axis: SweepAxis,
    pub value: f64,
    pub bits_sent: u64,
    pub bit_errors: u64,
    pub ber: f64,
    pub measured_snr_db: Option<f64>,
    pub sync_failures: u64,
}

impl BerResult {
    pub fn new(axis: SweepAxis, value: f64, stats: &PointStats) -> Self {
        Self {
            axis,
            value,
            bits_sent: stats.bits_sent,
            bit_errors: stats.bit_errors,
            ber: stats.ber(),
            measured_snr_db: stats.measured_snr_db,
            sync_failures: stats.sync_failures,
        }
    }

    /// 95 % Wilson score interval on the BER.
    pub fn wilson_interval(&self) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits_sent, 1.959_963_984_540_054)
    }
}

pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Gaussian tail probability `Q(x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Gray-coded square QAM bit error rate on AWGN at `Es/N0 = snr_per_symbol_db`.
///
/// Exact `Q(√(Es/N0))` for 4-QAM; the usual nearest-neighbour approximation
/// `(4/k)(1 - 1/√M)·Q(√(3·Es/N0/(M-1)))` for larger orders.
pub fn theoretical_ber_qam(snr_per_symbol_db: f64, modulation_order: usize) -> f64 {
    let es_n0 = 10f64.powf(snr_per_symbol_db / 10.0);
    let m = modulation_order as f64;
    let k = m.log2();
    if modulation_order == 4 {
        return q_function(es_n0.sqrt());
    }
    (4.0 / k) * (1.0 - 1.0 / m.sqrt()) * q_function((3.0 * es_n0 / (m - 1.0)).sqrt())
}

/// Runs one Monte-Carlo point with `frame_symbols` OFDM symbols per frame.
pub fn run_ber_point(
    modem: &Modem,
    channel: &LinkChannel,
    policy: &StopPolicy,
    frame_symbols: usize,
    seed: u64,
) -> Result<PointStats, HarnessError> {
    if frame_symbols == 0 {
        return Err(HarnessError::Config("frame_symbols must be positive".into()));
    }
    let cfg = modem.config();
    let frame_bits = frame_symbols * cfg.bits_per_ofdm_symbol();
    let mut stats = PointStats::default();
    let (mut signal, mut error) = (0.0, 0.0);

    while policy.keep_going(stats.bits_sent, stats.bit_errors) {
        let frame = stats.frames;
        let mut rng = stream_rng(seed, "payload", frame);
        let bits: Vec<u8> = (0..frame_bits).map(|_| rng.gen_range(0..2u8)).collect();
        let payload = FramePayload::aligned(bits, cfg)?;
        let tx = modem.modulate(&payload)?;
        let rx = channel.transmit(&tx, cfg.bias_amplitude(), derive_seed(seed, "channel", frame))?;

        let errors = match modem.receive(&rx) {
            Ok((demod, _)) if demod.bits.len() == frame_bits => {
                let (s, e) = crate::modem::evm_sums(&demod.equalized, modem.constellation());
                signal += s;
                error += e;
                payload.bits().iter().zip(&demod.bits).filter(|(a, b)| a != b).count()
            }
            Ok(_)
            | Err(ModemError::SyncFailure { .. })
            | Err(ModemError::TruncatedFrame { .. })
            | Err(ModemError::DegenerateChannel { .. }) => {
                stats.sync_failures += 1;
                payload.bits().iter().filter(|&&b| b == 1).count()
            }
            Err(e) => return Err(e.into()),
        };
        stats.bit_errors += errors as u64;
        stats.bits_sent += frame_bits as u64;
        stats.frames += 1;
    }
    if signal > 0.0 {
        stats.measured_snr_db = Some(snr_from_sums(signal, error));
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modem::OfdmConfig;

    #[test]
    fn q_function_reference_points() {
        assert!((theoretical_ber_qam(0.0, 4) - 0.158_655_253_931_457).abs() < 1e-4);
        assert!((theoretical_ber_qam(6.02, 4) - 0.022_750_131_948_179).abs() < 1e-4);
        let mut last = 1.0;
        for snr in (-10..30).map(f64::from) {
            let b = theoretical_ber_qam(snr, 4);
            assert!(b < last);
            last = b;
        }
        assert!(theoretical_ber_qam(60.0, 4) < 1e-100);
    }

    #[test]
    fn stop_policy() {
        let p = StopPolicy { min_bits: 1000, min_errors: 10, max_bits: 5000 };
        assert!(p.keep_going(999, 500));
        assert!(p.keep_going(1000, 9));
        assert!(!p.keep_going(1000, 10));
        assert!(!p.keep_going(5000, 0));
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(50, 10_000, 1.96);
        assert!(lo < 0.005 && 0.005 < hi);
        assert_eq!(wilson_interval(0, 100, 1.96).0, 0.0);
    }

    #[test]
    fn noiseless_point_is_error_free_and_deterministic() {
        let modem = Modem::new(OfdmConfig::reference()).unwrap();
        let policy = StopPolicy { min_bits: 100_000, ..StopPolicy::default() };
        let ch = LinkChannel::awgn(NoiseSpec::NoisePower(0.0));
        let a = run_ber_point(&modem, &ch, &policy, 16, 3).unwrap();
        assert_eq!((a.bit_errors, a.sync_failures), (0, 0));
        assert!(a.bits_sent >= 100_000);
        let ch = LinkChannel::awgn(NoiseSpec::FixedSnrDb(8.0));
        let b1 = run_ber_point(&modem, &ch, &policy, 16, 4).unwrap();
        let b2 = run_ber_point(&modem, &ch, &policy, 16, 4).unwrap();
        assert_eq!(b1, b2);
        assert!(b1.bit_errors > 0);
    }
}
