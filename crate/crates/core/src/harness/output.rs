//! Result files. CSV columns, in order:
//! `axis,value,bits_sent,bit_errors,ber,measured_snr_db,sync_failures`
//! (an unmeasured SNR is an empty field). JSON is an array of objects with the
//! same fields plus `ber_wilson_low` / `ber_wilson_high` (95 % Wilson interval).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BerResult, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

pub const CSV_HEADER: [&str; 7] =
    ["axis", "value", "bits_sent", "bit_errors", "ber", "measured_snr_db", "sync_failures"];

#[derive(Serialize, Deserialize)]
struct JsonRow {
    #[serde(flatten)]
    result: BerResult,
    ber_wilson_low: f64,
    ber_wilson_high: f64,
}

pub fn results_to_csv(results: &[BerResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).expect("in-memory write");
    for r in results {
        w.write_record([
            r.axis.as_str().to_string(),
            r.value.to_string(),
            r.bits_sent.to_string(),
            r.bit_errors.to_string(),
            r.ber.to_string(),
            r.measured_snr_db.map(|s| s.to_string()).unwrap_or_default(),
            r.sync_failures.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub fn results_to_json(results: &[BerResult]) -> String {
    let rows: Vec<JsonRow> = results
        .iter()
        .map(|r| {
            let (lo, hi) = r.wilson_interval();
            JsonRow { result: r.clone(), ber_wilson_low: lo, ber_wilson_high: hi }
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&rows).expect("results serialize");
    text.push('\n');
    text
}

pub fn read_results_json(text: &str) -> Result<Vec<BerResult>, HarnessError> {
    let rows: Vec<JsonRow> = serde_json::from_str(text).map_err(|e| HarnessError::Parse(e.to_string()))?;
    Ok(rows.into_iter().map(|r| r.result).collect())
}

pub fn write_results(results: &[BerResult], path: &Path, format: OutputFormat) -> Result<(), HarnessError> {
    let text = match format {
        OutputFormat::Csv => results_to_csv(results),
        OutputFormat::Json => results_to_json(results),
    };
    fs::write(path, text).map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::super::SweepAxis;
    use super::*;

    fn sample(n: usize) -> Vec<BerResult> {
        (0..n)
            .map(|i| BerResult {
                axis: SweepAxis::DistanceM,
                value: 3.0 * i as f64 + 0.1,
                bits_sent: 1_000_000,
                bit_errors: i as u64 * 7,
                ber: i as f64 * 7e-6,
                measured_snr_db: if i == 1 { None } else { Some(14.2 - i as f64 / 3.0) },
                sync_failures: i as u64,
            })
            .collect()
    }

    #[test]
    fn csv_shape() {
        assert_eq!(results_to_csv(&[]), "axis,value,bits_sent,bit_errors,ber,measured_snr_db,sync_failures\n");
        let text = results_to_csv(&sample(3));
        assert_eq!(text.lines().count(), 4);
        assert_eq!(text.lines().nth(2).unwrap(), "distance_m,3.1,1000000,7,0.000007,,1");
    }

    #[test]
    fn json_roundtrip() {
        let r = sample(3);
        assert_eq!(read_results_json(&results_to_json(&r)).unwrap(), r);
        assert!(results_to_json(&r).contains("ber_wilson_high"));
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = write_results(&sample(1), Path::new("/nonexistent-dir/x.csv"), OutputFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
