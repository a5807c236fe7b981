//! Gray-coded square QAM.
//!
//! Each symbol's bits split into an in-phase half (first) and a quadrature
//! half (second), most significant bit first. Within a half, the Gray code
//! `g` selects level index `i = gray⁻¹(g)` and the amplitude is
//! `(L - 1 - 2i) · scale`, so all-zero bits sit on the positive corner. For
//! 4-QAM: `00 → (+1, +1)/√2`, `01 → (+1, -1)/√2`, `10 → (-1, +1)/√2`,
//! `11 → (-1, -1)/√2`. `scale` normalizes the average symbol energy to 1.

use rustfft::num_complex::Complex64;

use super::ModemError;

#[derive(Debug, Clone)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    levels: usize,
    scale: f64,
}

fn gray(i: usize) -> usize {
    i ^ (i >> 1)
}

fn gray_inverse(mut g: usize) -> usize {
    let mut i = g;
    while g > 0 {
        g >>= 1;
        i ^= g;
    }
    i
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self, ModemError> {
        if order < 4 || !order.is_power_of_two() || !order.trailing_zeros().is_multiple_of(2) {
            return Err(ModemError::config("modulation_order", format!("{order} is not a square QAM order")));
        }
        let bits_per_symbol = order.trailing_zeros() as usize;
        let levels = 1 << (bits_per_symbol / 2);
        let scale = (1.5 / (order as f64 - 1.0)).sqrt();
        Ok(Self { order, bits_per_symbol, levels, scale })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    fn level(&self, bits: &[u8]) -> f64 {
        let g = bits.iter().fold(0usize, |acc, &b| (acc << 1) | usize::from(b));
        let i = gray_inverse(g);
        (self.levels as f64 - 1.0 - 2.0 * i as f64) * self.scale
    }

    fn decide(&self, x: f64, out: &mut Vec<u8>) {
        let l = self.levels as f64;
        let i = (((l - 1.0) - x / self.scale) / 2.0).round().clamp(0.0, l - 1.0) as usize;
        let g = gray(i);
        let half = self.bits_per_symbol / 2;
        out.extend((0..half).rev().map(|b| ((g >> b) & 1) as u8));
    }

    pub fn map(&self, bits: &[u8]) -> Complex64 {
        let half = self.bits_per_symbol / 2;
        Complex64::new(self.level(&bits[..half]), self.level(&bits[half..]))
    }

    /// Appends the hard-decision bits for `symbol`.
    pub fn demap_into(&self, symbol: Complex64, out: &mut Vec<u8>) {
        self.decide(symbol.re, out);
        self.decide(symbol.im, out);
    }

    /// Nearest constellation point.
    pub fn nearest(&self, symbol: Complex64) -> Complex64 {
        let mut bits = Vec::with_capacity(self.bits_per_symbol);
        self.demap_into(symbol, &mut bits);
        self.map(&bits)
    }

    pub fn points(&self) -> Vec<Complex64> {
        (0..self.order)
            .map(|v| {
                let bits: Vec<u8> = (0..self.bits_per_symbol).rev().map(|b| ((v >> b) & 1) as u8).collect();
                self.map(&bits)
            })
            .collect()
    }
}

/// Maps a bit sequence onto Gray-coded, unit-energy QAM points.
pub fn map_bits(bits: &[u8], modulation_order: usize) -> Result<Vec<Complex64>, ModemError> {
    let c = Constellation::new(modulation_order)?;
    if !bits.len().is_multiple_of(c.bits_per_symbol) {
        return Err(ModemError::Framing(format!(
            "{} bits is not a multiple of {} bits per symbol",
            bits.len(),
            c.bits_per_symbol
        )));
    }
    Ok(bits.chunks(c.bits_per_symbol).map(|chunk| c.map(chunk)).collect())
}

/// Hard-decision demapping.
pub fn demap_symbols(symbols: &[Complex64], modulation_order: usize) -> Result<Vec<u8>, ModemError> {
    let c = Constellation::new(modulation_order)?;
    let mut out = Vec::with_capacity(symbols.len() * c.bits_per_symbol);
    for &s in symbols {
        c.demap_into(s, &mut out);
    }
    Ok(out)
}
