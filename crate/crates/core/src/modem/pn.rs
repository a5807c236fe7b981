use rustfft::num_complex::Complex64;
use std::f64::consts::FRAC_PI_4;

/// 16-bit Galois LFSR (taps 16,14,13,11). Used wherever the modem needs a
/// fixed pseudo-random table that must not depend on any RNG crate version.
pub(crate) struct Lfsr16(u16);

impl Lfsr16 {
    pub(crate) fn new(seed: u16) -> Self {
        Self(if seed == 0 { 0xace1 } else { seed })
    }

    pub(crate) fn next_bit(&mut self) -> u16 {
        let out = self.0 & 1;
        self.0 >>= 1;
        if out == 1 {
            self.0 ^= 0xb400;
        }
        out
    }

    pub(crate) fn next_bits(&mut self, n: u32) -> u32 {
        (0..n).fold(0, |acc, _| (acc << 1) | u32::from(self.next_bit()))
    }

    /// Uniform integer in `0..bound` by rejection.
    pub(crate) fn below(&mut self, bound: u32) -> u32 {
        let bits = 32 - (bound.max(2) - 1).leading_zeros();
        loop {
            let v = self.next_bits(bits);
            if v < bound {
                return v;
            }
        }
    }
}

/// Balanced ±1 sequence of length `len` (even): half +1, half -1, shuffled.
/// Exactly zero mean and unit RMS.
pub(crate) fn balanced_pn(len: usize) -> Vec<f64> {
    let mut seq: Vec<f64> = (0..len).map(|i| if i < len / 2 { 1.0 } else { -1.0 }).collect();
    let mut lfsr = Lfsr16::new(0x5eed);
    for i in (1..len).rev() {
        let j = lfsr.below(i as u32 + 1) as usize;
        seq.swap(i, j);
    }
    seq
}

/// Additive scrambler: the data bits of a frame are XORed with this fixed
/// sequence so that structured payloads (long runs, repeated patterns) do not
/// load every subcarrier with the same point and produce clipped peaks.
pub(crate) fn scramble_in_place(bits: &mut [u8]) {
    let mut lfsr = Lfsr16::new(0x3a5f);
    for b in bits {
        *b ^= lfsr.next_bit() as u8;
    }
}

/// Fixed table of unit-magnitude pilot values with phases in {π/4 + kπ/2}.
pub(crate) fn pilot_phase_table(count: usize) -> Vec<Complex64> {
    let mut lfsr = Lfsr16::new(0x9117);
    (0..count)
        .map(|_| {
            let quadrant = lfsr.next_bits(2) as f64;
            Complex64::from_polar(1.0, FRAC_PI_4 + quadrant * 2.0 * FRAC_PI_4)
        })
        .collect()
}
