use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::estimate::estimate_channel;
use super::pn::{balanced_pn, scramble_in_place};
use super::qam::Constellation;
use super::sync::{locate, SyncPoint};
use super::{evm_sums, snr_from_sums, FramePayload, LinkMetrics, ModemError, OfdmConfig, Waveform, MIN_SNR_SYMBOLS};

/// Longest frame the modulator accepts, in OFDM symbols.
pub const MAX_FRAME_SYMBOLS: usize = 4096;

/// Immutable modem built from a validated [`OfdmConfig`].
#[derive(Clone)]
pub struct Modem {
    config: OfdmConfig,
    constellation: Constellation,
    data_bins: Vec<usize>,
    preamble: Vec<f64>,
    ifft: Arc<dyn Fft<f64>>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Modem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Modem").field("config", &self.config).finish_non_exhaustive()
    }
}

/// Output of [`Modem::demodulate_at`].
#[derive(Debug, Clone)]
pub struct Demodulated {
    pub bits: Vec<u8>,
    /// Equalized data symbols in transmission order.
    pub equalized: Vec<Complex64>,
    pub channel: Vec<Complex64>,
}

impl Modem {
    pub fn new(config: OfdmConfig) -> Result<Self, ModemError> {
        config.validate()?;
        let constellation = Constellation::new(config.modulation_order)?;
        let half = balanced_pn(config.preamble_len / 2);
        let preamble = half.iter().chain(half.iter()).copied().collect();
        let mut planner = FftPlanner::new();
        Ok(Self {
            data_bins: config.data_bins(),
            constellation,
            preamble,
            ifft: planner.plan_fft_inverse(config.n_fft),
            fft: planner.plan_fft_forward(config.n_fft),
            config,
        })
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    pub fn constellation(&self) -> &Constellation {
        &self.constellation
    }

    /// The known AC preamble (zero mean, unit RMS).
    pub fn preamble(&self) -> &[f64] {
        &self.preamble
    }

    pub fn frame_len(&self, n_symbols: usize) -> usize {
        self.config.preamble_len + n_symbols * self.config.symbol_len()
    }

    /// Subcarrier values of every OFDM symbol of the frame.
    pub fn frequency_symbols(&self, payload: &FramePayload) -> Result<Vec<Vec<Complex64>>, ModemError> {
        let cfg = &self.config;
        let per_symbol = cfg.bits_per_ofdm_symbol();
        if !payload.len().is_multiple_of(per_symbol) {
            return Err(ModemError::Framing(format!(
                "{} bits is not a multiple of the {per_symbol}-bit symbol capacity",
                payload.len()
            )));
        }
        let n_symbols = payload.len() / per_symbol;
        if n_symbols > MAX_FRAME_SYMBOLS {
            return Err(ModemError::Framing(format!(
                "{} bits needs {n_symbols} symbols, frame limit is {MAX_FRAME_SYMBOLS}",
                payload.len()
            )));
        }
        let bps = cfg.bits_per_symbol();
        let n = cfg.n_fft;
        let mut scrambled = payload.bits().to_vec();
        scramble_in_place(&mut scrambled);
        Ok(scrambled
            .chunks(per_symbol)
            .map(|chunk| {
                let mut bins = vec![Complex64::new(0.0, 0.0); n];
                for pilot in &cfg.pilot_pattern {
                    bins[pilot.index] = pilot.complex();
                }
                for (&k, bits) in self.data_bins.iter().zip(chunk.chunks(bps)) {
                    bins[k] = self.constellation.map(bits);
                }
                if cfg.hermitian_mode {
                    for k in 1..n / 2 {
                        bins[n - k] = bins[k].conj();
                    }
                }
                bins
            })
            .collect())
    }

    /// Complex time-domain symbols (inverse FFT, no cyclic prefix, no scaling).
    pub fn baseband_symbols(&self, payload: &FramePayload) -> Result<Vec<Vec<Complex64>>, ModemError> {
        let mut symbols = self.frequency_symbols(payload)?;
        for s in &mut symbols {
            self.ifft.process(s);
        }
        Ok(symbols)
    }

    /// Pre-bias real frame: preamble followed by the cyclic-prefixed symbols,
    /// the symbol part scaled to unit RMS.
    pub fn ac_frame(&self, payload: &FramePayload) -> Result<Vec<f64>, ModemError> {
        let cfg = &self.config;
        let symbols = self.baseband_symbols(payload)?;
        let mut body = Vec::with_capacity(symbols.len() * cfg.symbol_len());
        for s in &symbols {
            let with_cp = s[cfg.n_fft - cfg.cp_len..].iter().chain(s.iter());
            if cfg.hermitian_mode {
                body.extend(with_cp.map(|x| x.re));
            } else {
                body.extend(with_cp.flat_map(|x| [x.re, x.im]));
            }
        }
        if !body.is_empty() {
            let rms = (body.iter().map(|x| x * x).sum::<f64>() / body.len() as f64).sqrt();
            if rms > 0.0 {
                body.iter_mut().for_each(|x| *x /= rms);
            }
        }
        let mut frame = Vec::with_capacity(self.preamble.len() + body.len());
        frame.extend_from_slice(&self.preamble);
        frame.extend(body);
        Ok(frame)
    }

    /// Emits `preamble ∥ symbols` as a non-negative intensity waveform.
    pub fn modulate(&self, payload: &FramePayload) -> Result<Waveform, ModemError> {
        let bias = self.config.bias_amplitude();
        let samples = self.ac_frame(payload)?.into_iter().map(|x| (x + bias).max(0.0)).collect();
        Ok(Waveform::new(samples, self.config.sample_rate_hz()))
    }

    pub(crate) fn sync(&self, samples: &[f64]) -> Result<SyncPoint, ModemError> {
        locate(samples, &self.preamble)
    }

    /// Index of the first preamble sample.
    pub fn synchronize(&self, samples: &[f64]) -> Result<usize, ModemError> {
        self.sync(samples).map(|s| s.start)
    }

    /// Demodulates `n_symbols` OFDM symbols of a frame whose preamble starts at
    /// `start`. The DC level is taken as the mean over the preamble.
    pub fn demodulate_at(&self, samples: &[f64], start: usize, n_symbols: usize) -> Result<Demodulated, ModemError> {
        let cfg = &self.config;
        let n = cfg.n_fft;
        let needed = start + self.frame_len(n_symbols);
        if samples.len() < needed {
            return Err(ModemError::TruncatedFrame { needed, available: samples.len() });
        }
        let pre = &samples[start..start + cfg.preamble_len];
        let dc = pre.iter().sum::<f64>() / pre.len() as f64;

        let body = &samples[start + cfg.preamble_len..needed];
        let mut spectra = Vec::with_capacity(n_symbols);
        for chunk in body.chunks(cfg.symbol_len()) {
            let mut bins: Vec<Complex64> = if cfg.hermitian_mode {
                chunk[cfg.cp_len..].iter().map(|&x| Complex64::new(x - dc, 0.0)).collect()
            } else {
                chunk[2 * cfg.cp_len..].chunks(2).map(|iq| Complex64::new(iq[0] - dc, iq[1] - dc)).collect()
            };
            self.fft.process(&mut bins);
            spectra.push(bins);
        }

        let channel = if cfg.pilot_pattern.is_empty() {
            blind_flat_gain(&spectra, &self.data_bins, n)
        } else {
            let obs: Vec<Vec<Complex64>> =
                spectra.iter().map(|s| cfg.pilot_pattern.iter().map(|p| s[p.index]).collect()).collect();
            if obs.is_empty() {
                vec![Complex64::new(1.0, 0.0); n]
            } else {
                estimate_channel(&obs, cfg)?
            }
        };

        let mut equalized = Vec::with_capacity(n_symbols * self.data_bins.len());
        let mut bits = Vec::with_capacity(n_symbols * cfg.bits_per_ofdm_symbol());
        for s in &spectra {
            for &k in &self.data_bins {
                let y = s[k] / channel[k];
                self.constellation.demap_into(y, &mut bits);
                equalized.push(y);
            }
        }
        scramble_in_place(&mut bits);
        Ok(Demodulated { bits, equalized, channel })
    }

    /// Sync, then demodulate every whole symbol after the preamble.
    pub fn receive(&self, rx: &Waveform) -> Result<(Demodulated, LinkMetrics), ModemError> {
        let samples = rx.samples();
        let start = self.synchronize(samples)?;
        let after = samples.len() - start - self.config.preamble_len;
        let sym_len = self.config.symbol_len();
        if !after.is_multiple_of(sym_len) {
            return Err(ModemError::TruncatedFrame {
                needed: start + self.frame_len(after / sym_len + 1),
                available: samples.len(),
            });
        }
        let n_symbols = after / sym_len;
        let demod = self.demodulate_at(samples, start, n_symbols)?;
        let snr_db = (demod.equalized.len() >= MIN_SNR_SYMBOLS).then(|| {
            let (s, e) = evm_sums(&demod.equalized, &self.constellation);
            snr_from_sums(s, e)
        });
        let metrics = LinkMetrics { snr_db, bits: demod.bits.len(), symbols: n_symbols, frame_start: start };
        Ok((demod, metrics))
    }

    pub fn demodulate(&self, rx: &Waveform) -> Result<(FramePayload, LinkMetrics), ModemError> {
        let (demod, metrics) = self.receive(rx)?;
        Ok((FramePayload::aligned(demod.bits, &self.config)?, metrics))
    }
}

/// Without pilots, assume a real positive flat channel and normalize the data
/// bins to unit average energy.
fn blind_flat_gain(spectra: &[Vec<Complex64>], data_bins: &[usize], n: usize) -> Vec<Complex64> {
    let count = spectra.len() * data_bins.len();
    let power = spectra.iter().flat_map(|s| data_bins.iter().map(move |&k| s[k].norm_sqr())).sum::<f64>();
    let g = if count == 0 || power == 0.0 { 1.0 } else { (power / count as f64).sqrt() };
    vec![Complex64::new(g, 0.0); n]
}

pub fn modulate_frame(payload: &FramePayload, config: &OfdmConfig) -> Result<Waveform, ModemError> {
    Modem::new(config.clone())?.modulate(payload)
}

pub fn synchronize(rx: &Waveform, config: &OfdmConfig) -> Result<usize, ModemError> {
    Modem::new(config.clone())?.synchronize(rx.samples())
}

pub fn demodulate_frame(rx: &Waveform, config: &OfdmConfig) -> Result<(FramePayload, LinkMetrics), ModemError> {
    Modem::new(config.clone())?.demodulate(rx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_payload(cfg: &OfdmConfig, symbols: usize, seed: u64) -> FramePayload {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bits = (0..symbols * cfg.bits_per_ofdm_symbol()).map(|_| rng.gen_range(0..2u8)).collect();
        FramePayload::aligned(bits, cfg).unwrap()
    }

    #[test]
    fn empty_payload_is_preamble_only() {
        let cfg = OfdmConfig::reference();
        let w = modulate_frame(&FramePayload::default(), &cfg).unwrap();
        assert_eq!(w.len(), cfg.preamble_len);
        let (p, m) = demodulate_frame(&w, &cfg).unwrap();
        assert!(p.is_empty());
        assert_eq!(m.symbols, 0);
    }

    #[test]
    fn one_twenty_bits_is_one_symbol() {
        let cfg = OfdmConfig::reference();
        let p = random_payload(&cfg, 1, 9);
        assert_eq!(p.len(), 120);
        let w = modulate_frame(&p, &cfg).unwrap();
        assert_eq!(w.len(), cfg.preamble_len + cfg.symbol_len());
        assert_eq!(w.sample_rate_hz(), 400_000.0);
    }

    #[test]
    fn hermitian_symbols_are_real() {
        let modem = Modem::new(OfdmConfig::hermitian()).unwrap();
        let p = random_payload(modem.config(), 8, 4);
        let worst = modem.baseband_symbols(&p).unwrap().iter().flatten().map(|x| x.im.abs()).fold(0.0, f64::max);
        assert!(worst < 1e-9, "{worst}");
        for bins in modem.frequency_symbols(&p).unwrap() {
            let n = bins.len();
            assert_eq!(bins[0], Complex64::new(0.0, 0.0));
            assert_eq!(bins[n / 2], Complex64::new(0.0, 0.0));
            for k in 1..n / 2 {
                assert_eq!(bins[k], bins[n - k].conj());
            }
        }
    }

    #[test]
    fn ac_frame_has_unit_rms_and_waveform_is_nonnegative() {
        for cfg in [OfdmConfig::reference(), OfdmConfig::hermitian()] {
            let modem = Modem::new(cfg).unwrap();
            let p = random_payload(modem.config(), 5, 1);
            let ac = modem.ac_frame(&p).unwrap();
            let rms = (ac.iter().map(|x| x * x).sum::<f64>() / ac.len() as f64).sqrt();
            assert!((rms - 1.0).abs() < 1e-6);
            assert!(modem.modulate(&p).unwrap().samples().iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn loopback_and_scaled_roundtrip() {
        for cfg in [OfdmConfig::reference(), OfdmConfig::default(), OfdmConfig::hermitian()] {
            let modem = Modem::new(cfg).unwrap();
            let p = random_payload(modem.config(), 12, 2);
            let w = modem.modulate(&p).unwrap();
            assert_eq!(modem.synchronize(w.samples()).unwrap(), 0);
            let (out, _) = modem.demodulate(&w).unwrap();
            assert_eq!(out, p);
            let scaled = Waveform::new(w.samples().iter().map(|x| 0.1 * x).collect(), w.sample_rate_hz());
            assert_eq!(modem.demodulate(&scaled).unwrap().0, p);
        }
    }

    #[test]
    fn pure_delay_is_found() {
        let modem = Modem::new(OfdmConfig::reference()).unwrap();
        let p = random_payload(modem.config(), 3, 5);
        let w = modem.modulate(&p).unwrap();
        let mut delayed = vec![0.0; 500];
        delayed.extend_from_slice(w.samples());
        let rx = Waveform::new(delayed, w.sample_rate_hz());
        assert_eq!(modem.synchronize(rx.samples()).unwrap(), 500);
        let (out, m) = modem.demodulate(&rx).unwrap();
        assert_eq!(m.frame_start, 500);
        assert_eq!(out, p);
    }

    #[test]
    fn pilotless_config_roundtrips_under_gain() {
        let cfg = OfdmConfig::hermitian().with_pilots(0).unwrap();
        let modem = Modem::new(cfg).unwrap();
        let p = random_payload(modem.config(), 20, 6);
        let w = modem.modulate(&p).unwrap();
        let scaled = Waveform::new(w.samples().iter().map(|x| 0.2 * x).collect(), w.sample_rate_hz());
        assert_eq!(modem.demodulate(&scaled).unwrap().0, p);
    }

    #[test]
    fn oversized_and_ragged_payloads_rejected() {
        let cfg = OfdmConfig::reference();
        let modem = Modem::new(cfg.clone()).unwrap();
        let huge = FramePayload::aligned(vec![0; (MAX_FRAME_SYMBOLS + 1) * 120], &cfg).unwrap();
        assert!(matches!(modem.modulate(&huge), Err(ModemError::Framing(_))));
        let ragged = FramePayload::padded(vec![0; 130], &cfg).unwrap();
        assert!(FramePayload::aligned(ragged.bits()[..130].to_vec(), &cfg).is_err());
    }

    #[test]
    fn truncated_frame_is_reported() {
        let modem = Modem::new(OfdmConfig::reference()).unwrap();
        let w = modem.modulate(&random_payload(modem.config(), 2, 7)).unwrap();
        let cut = Waveform::new(w.samples()[..w.len() - 5].to_vec(), w.sample_rate_hz());
        assert!(matches!(modem.demodulate(&cut), Err(ModemError::TruncatedFrame { .. })));
    }
}
