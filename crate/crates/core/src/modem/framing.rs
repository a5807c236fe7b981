//! Message layer over OFDM frames.
//!
//! A message frame carries a 16-bit big-endian bit count, then the message
//! bits, then zero padding to the symbol boundary. Byte streams longer than
//! one frame are split and the frames concatenated back to back.

use super::{evm_sums, snr_from_sums, FramePayload, Modem, ModemError, Waveform, MIN_SNR_SYMBOLS};

pub const HEADER_BITS: usize = 16;
pub const MAX_MESSAGE_BITS: usize = u16::MAX as usize;

/// Most significant bit first.
pub fn bytes_to_bits(bytes: &[u8]) -> Vec<u8> {
    bytes.iter().flat_map(|b| (0..8).rev().map(move |i| (b >> i) & 1)).collect()
}

/// Most significant bit first; a trailing partial byte is zero-filled.
pub fn bits_to_bytes(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8).map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | (b << (7 - i)))).collect()
}

pub fn encode_message(bits: &[u8], modem: &Modem) -> Result<FramePayload, ModemError> {
    if bits.len() > MAX_MESSAGE_BITS {
        return Err(ModemError::Framing(format!("{} bits exceeds the {MAX_MESSAGE_BITS}-bit header", bits.len())));
    }
    let mut framed = Vec::with_capacity(HEADER_BITS + bits.len());
    framed.extend((0..HEADER_BITS).rev().map(|i| ((bits.len() >> i) & 1) as u8));
    framed.extend_from_slice(bits);
    FramePayload::padded(framed, modem.config())
}

fn header_len(bits: &[u8]) -> usize {
    bits[..HEADER_BITS].iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b))
}

pub fn decode_message(payload: &FramePayload) -> Result<Vec<u8>, ModemError> {
    let bits = payload.bits();
    if bits.len() < HEADER_BITS {
        return Err(ModemError::Framing("frame shorter than its length header".into()));
    }
    let len = header_len(bits);
    if HEADER_BITS + len > bits.len() {
        return Err(ModemError::Framing(format!("header claims {len} bits, frame holds {}", bits.len() - HEADER_BITS)));
    }
    Ok(bits[HEADER_BITS..HEADER_BITS + len].to_vec())
}

/// Modulates `bytes` as back-to-back message frames of at most
/// `max_frame_bytes` each. Empty input yields a preamble-only waveform and zero
/// frames.
pub fn modulate_stream(bytes: &[u8], modem: &Modem, max_frame_bytes: usize) -> Result<(Waveform, usize), ModemError> {
    let max_frame_bytes = max_frame_bytes.clamp(1, MAX_MESSAGE_BITS / 8);
    let rate = modem.config().sample_rate_hz();
    if bytes.is_empty() {
        return Ok((modem.modulate(&FramePayload::default())?, 0));
    }
    let mut samples = Vec::new();
    let mut frames = 0;
    for chunk in bytes.chunks(max_frame_bytes) {
        let payload = encode_message(&bytes_to_bits(chunk), modem)?;
        samples.extend(modem.modulate(&payload)?.into_samples());
        frames += 1;
    }
    Ok((Waveform::new(samples, rate), frames))
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamOutput {
    pub bytes: Vec<u8>,
    pub frames: usize,
    pub sync_failures: usize,
    pub snr_db: Option<f64>,
}

/// Inverse of [`modulate_stream`]. Stops at the first sync failure.
pub fn demodulate_stream(rx: &Waveform, modem: &Modem) -> Result<StreamOutput, ModemError> {
    let cfg = modem.config();
    let samples = rx.samples();
    let per_symbol = cfg.bits_per_ofdm_symbol();
    let mut out = StreamOutput { bytes: Vec::new(), frames: 0, sync_failures: 0, snr_db: None };
    let (mut signal, mut error, mut symbols) = (0.0, 0.0, 0usize);
    let mut pos = 0;

    while samples.len() - pos >= cfg.preamble_len {
        let rest = &samples[pos..];
        let start = match modem.synchronize(rest) {
            Ok(s) => s,
            Err(ModemError::SyncFailure { .. }) => {
                out.sync_failures += 1;
                break;
            }
            Err(e) => return Err(e),
        };
        if rest.len() - start < modem.frame_len(1) {
            // preamble-only frame
            break;
        }
        let first = modem.demodulate_at(rest, start, 1)?;
        let len = header_len(&first.bits);
        let n_symbols = (HEADER_BITS + len).div_ceil(per_symbol);
        let demod = modem.demodulate_at(rest, start, n_symbols)?;
        let message = decode_message(&FramePayload::aligned(demod.bits, cfg)?)?;
        if message.len() % 8 != 0 {
            return Err(ModemError::Framing(format!(
                "frame {} carries {} bits, not whole bytes",
                out.frames,
                message.len()
            )));
        }
        out.bytes.extend(bits_to_bytes(&message));
        let (s, e) = evm_sums(&demod.equalized, modem.constellation());
        signal += s;
        error += e;
        symbols += demod.equalized.len();
        out.frames += 1;
        pos += start + modem.frame_len(n_symbols);
    }
    if symbols >= MIN_SNR_SYMBOLS {
        out.snr_db = Some(snr_from_sums(signal, error));
    }
    Ok(out)
}
