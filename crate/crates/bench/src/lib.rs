//! Fixtures shared by the criterion targets.

use rand::Rng;
use vlcsim_core::modem::{FramePayload, OfdmConfig};
use vlcsim_core::stream_rng;

/// A random payload filling `n_symbols` OFDM symbols of `config`.
pub fn random_payload(config: &OfdmConfig, n_symbols: usize, seed: u64) -> FramePayload {
    let mut rng = stream_rng(seed, "bench-payload", 0);
    let bits = (0..n_symbols * config.bits_per_ofdm_symbol()).map(|_| rng.gen_range(0..2u8)).collect();
    FramePayload::aligned(bits, config).expect("aligned by construction")
}
