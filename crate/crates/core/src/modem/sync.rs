//! Preamble timing.
//!
//! Coarse stage: Schmidl-Cox style autocorrelation between the two halves of
//! a sliding `2L` window, after removing the window mean,
//! `M(d) = P(d)² / (E₁(d)·E₂(d))` for `P(d) > 0`, where `P` is the lag-`L`
//! cross sum and `E₁`, `E₂` the energies of the two halves. The first crossing
//! of the threshold anchors the search and the maximum within one preamble
//! length after it locates the earliest preamble to within a few samples.
//!
//! Fine stage: Pearson correlation of the received samples with the known
//! preamble over `±L/2` around the coarse peak. The returned index maximizes it.

use super::ModemError;

/// Minimum coarse metric for a preamble to count as present.
pub const COARSE_THRESHOLD: f64 = 0.25;
/// Minimum correlation with the known preamble at the chosen index.
pub const FINE_THRESHOLD: f64 = 0.5;

const ENERGY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SyncPoint {
    pub start: usize,
    pub coarse_metric: f64,
    pub correlation: f64,
}

fn prefix(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for v in values {
        acc += v;
        out.push(acc);
    }
    out
}

/// Coarse metric for every start `d` in `0..=len - 2·half`.
pub(crate) fn autocorrelation_metric(samples: &[f64], half: usize) -> Vec<f64> {
    let n = samples.len();
    if n < 2 * half {
        return Vec::new();
    }
    let s1 = prefix(samples.iter().copied());
    let s2 = prefix(samples.iter().map(|x| x * x));
    let lag = prefix((0..n - half).map(|i| samples[i] * samples[i + half]));
    let l = half as f64;
    (0..=n - 2 * half)
        .map(|d| {
            let sum_a = s1[d + half] - s1[d];
            let sum_b = s1[d + 2 * half] - s1[d + half];
            let mu = (sum_a + sum_b) / (2.0 * l);
            let p = (lag[d + half] - lag[d]) - l * mu * mu;
            let ea = (s2[d + half] - s2[d]) - 2.0 * mu * sum_a + l * mu * mu;
            let eb = (s2[d + 2 * half] - s2[d + half]) - 2.0 * mu * sum_b + l * mu * mu;
            let norm = ea * eb;
            if p <= 0.0 || norm <= ENERGY_FLOOR {
                0.0
            } else {
                (p * p / norm).min(1.0)
            }
        })
        .collect()
}

/// Pearson correlation of `window` with a zero-mean `reference`.
fn correlation(window: &[f64], reference: &[f64], reference_energy: f64) -> f64 {
    let n = window.len() as f64;
    let (mut sum, mut sq, mut cross) = (0.0, 0.0, 0.0);
    for (&x, &p) in window.iter().zip(reference) {
        sum += x;
        sq += x * x;
        cross += x * p;
    }
    let var = sq - sum * sum / n;
    if var <= ENERGY_FLOOR {
        return 0.0;
    }
    cross / (var * reference_energy).sqrt()
}

/// Locates `preamble` (zero mean, two identical halves) in `samples`.
pub(crate) fn locate(samples: &[f64], preamble: &[f64]) -> Result<SyncPoint, ModemError> {
    let len = preamble.len();
    if samples.len() < len {
        return Err(ModemError::TruncatedFrame { needed: len, available: samples.len() });
    }
    let half = len / 2;
    let metric = autocorrelation_metric(samples, half);
    let Some(first) = metric.iter().position(|&m| m >= COARSE_THRESHOLD) else {
        let peak = metric.iter().copied().fold(0.0, f64::max);
        return Err(ModemError::SyncFailure { peak });
    };
    let end = (first + len).min(metric.len());
    let (coarse, coarse_metric) = metric[first..end]
        .iter()
        .copied()
        .enumerate()
        .fold((first, f64::NEG_INFINITY), |best, (i, m)| if m > best.1 { (first + i, m) } else { best });

    let energy: f64 = preamble.iter().map(|p| p * p).sum();
    let lo = coarse.saturating_sub(half / 2);
    let hi = (coarse + half / 2).min(samples.len() - len);
    let (start, correlation) = (lo..=hi)
        .map(|d| (d, correlation(&samples[d..d + len], preamble, energy)))
        .fold((lo, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
    if correlation < FINE_THRESHOLD {
        return Err(ModemError::SyncFailure { peak: correlation.max(0.0) });
    }
    Ok(SyncPoint { start, coarse_metric, correlation })
}

#[cfg(test)]
mod tests {
    use super::super::pn::balanced_pn;
    use super::*;

    fn preamble() -> Vec<f64> {
        let half = balanced_pn(64);
        half.iter().chain(half.iter()).copied().collect()
    }

    #[test]
    fn metric_peaks_at_one_on_clean_preamble() {
        let p = preamble();
        let mut s = vec![0.0; 37];
        s.extend(p.iter().map(|x| x + 3.0));
        let m = autocorrelation_metric(&s, 64);
        assert!((m[37] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn locates_delayed_and_scaled_preamble() {
        let p = preamble();
        let mut s = vec![0.0; 500];
        s.extend(p.iter().map(|x| 0.1 * x + 0.5));
        s.extend(std::iter::repeat_n(0.5, 40));
        let sp = locate(&s, &p).unwrap();
        assert_eq!(sp.start, 500);
        assert!(sp.correlation > 0.999);
    }

    #[test]
    fn earliest_of_two_preambles_wins() {
        let p = preamble();
        let mut s = vec![0.0; 50];
        s.extend(p.iter().map(|x| 0.2 * x + 1.0));
        s.extend(std::iter::repeat_n(1.0, 300));
        s.extend(p.iter().map(|x| x + 1.0));
        assert_eq!(locate(&s, &p).unwrap().start, 50);
    }

    #[test]
    fn flat_input_fails() {
        let p = preamble();
        assert!(matches!(locate(&vec![0.0; 400], &p), Err(ModemError::SyncFailure { .. })));
        assert!(matches!(locate(&vec![2.0; 400], &p), Err(ModemError::SyncFailure { .. })));
        assert!(matches!(locate(&[0.0; 10], &p), Err(ModemError::TruncatedFrame { .. })));
    }
}
