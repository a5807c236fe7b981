use rustfft::num_complex::Complex64;

use super::{ModemError, OfdmConfig};

/// Per-subcarrier channel estimate from pilot observations.
///
/// `observations[s][p]` is the received value of pilot `p` (in
/// `config.pilot_pattern` order) in OFDM symbol `s`. The least-squares gain
/// `rx / known` is averaged over symbols, then interpolated linearly (complex)
/// between pilots sorted by bin; bins outside the outermost pilots take the
/// nearest pilot's value. Returns `n_fft` gains.
pub fn estimate_channel(observations: &[Vec<Complex64>], config: &OfdmConfig) -> Result<Vec<Complex64>, ModemError> {
    let pilots = &config.pilot_pattern;
    if pilots.is_empty() {
        return Err(ModemError::config("n_pilot", "channel estimation needs at least one pilot"));
    }
    if observations.is_empty() {
        return Err(ModemError::Framing("no OFDM symbols to estimate from".into()));
    }

    let mut anchors: Vec<(usize, Complex64)> = Vec::with_capacity(pilots.len());
    for (p, pilot) in pilots.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for sym in observations {
            let y = sym[p];
            if y.norm_sqr() == 0.0 {
                return Err(ModemError::DegenerateChannel { bin: pilot.index });
            }
            acc += y / pilot.complex();
        }
        anchors.push((pilot.index, acc / observations.len() as f64));
    }
    anchors.sort_by_key(|a| a.0);

    let (first, last) = (anchors[0], anchors[anchors.len() - 1]);
    let gains = (0..config.n_fft)
        .map(|k| {
            if k <= first.0 {
                return first.1;
            }
            if k >= last.0 {
                return last.1;
            }
            let i = anchors.partition_point(|a| a.0 <= k);
            let (k0, h0) = anchors[i - 1];
            let (k1, h1) = anchors[i];
            let t = (k - k0) as f64 / (k1 - k0) as f64;
            h0 * (1.0 - t) + h1 * t
        })
        .collect();
    Ok(gains)
}
