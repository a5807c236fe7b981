use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};

fn preset(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name).to_string_lossy().into_owned()
}

fn vlcsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vlcsim")).args(args).current_dir(dir).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn workdir() -> tempfile::TempDir {
    tempfile::tempdir().unwrap()
}

fn path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

#[test]
fn rate_reports_reference_and_default() {
    let dir = workdir();
    let out = vlcsim(dir.path(), &["--config", &preset("modem-reference.json"), "rate"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&out).trim(), "375000 bps");
    let out = vlcsim(dir.path(), &["rate"]);
    assert_eq!(stdout(&out).trim(), "300000 bps");
}

#[test]
fn byte_loopback_is_identical() {
    let dir = workdir();
    let mut rng = rand::rngs::StdRng::seed_from_u64(8);
    let data: Vec<u8> = (0..5000).map(|_| rng.gen()).collect();
    fs::write(path(dir.path(), "in.bin"), &data).unwrap();
    for config in ["modem-reference.json", "modem-hermitian.json", "modem-16qam.json"] {
        let cfg = preset(config);
        let out = vlcsim(
            dir.path(),
            &["--config", &cfg, "modulate", "--in", "in.bin", "--out", "tx.vlcw", "--max-frame-bytes", "700"],
        );
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert!(stdout(&out).contains("frames: 8"));
        let out = vlcsim(dir.path(), &["--config", &cfg, "demodulate", "--in", "tx.vlcw", "--out", "rx.bin"]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(fs::read(path(dir.path(), "rx.bin")).unwrap(), data, "{config}");
    }
}

#[test]
fn one_twenty_bits_make_one_symbol() {
    let dir = workdir();
    let bits: String = (0..120).map(|i| if (i * 7) % 3 == 0 { '1' } else { '0' }).collect();
    fs::write(path(dir.path(), "bits.txt"), format!("{bits}\n")).unwrap();
    let cfg = preset("modem-reference.json");
    let out = vlcsim(dir.path(), &["--config", &cfg, "modulate", "--raw-bits", "--in", "bits.txt", "--out", "tx.vlcw"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    // 256 preamble samples plus one 64-bin symbol sent as interleaved I/Q.
    assert!(stdout(&out).contains("samples: 384 at 400000 Hz"), "{}", stdout(&out));
    let out = vlcsim(dir.path(), &["--config", &cfg, "demodulate", "--raw-bits", "--in", "tx.vlcw", "--out", "rx.txt"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(path(dir.path(), "rx.txt")).unwrap().trim(), bits);
}

#[test]
fn empty_input_warns_and_writes_preamble_only() {
    let dir = workdir();
    fs::write(path(dir.path(), "empty.bin"), b"").unwrap();
    let out = vlcsim(dir.path(), &["modulate", "--in", "empty.bin", "--out", "tx.vlcw"]);
    assert_eq!(code(&out), 0);
    assert!(stderr(&out).contains("warning"));
    assert!(stdout(&out).contains("samples: 256 "), "{}", stdout(&out));
}

#[test]
fn noisy_waveform_reports_configured_snr() {
    let dir = workdir();
    let mut rng = rand::rngs::StdRng::seed_from_u64(9);
    let data: Vec<u8> = (0..3000).map(|_| rng.gen()).collect();
    fs::write(path(dir.path(), "in.bin"), &data).unwrap();
    let out = vlcsim(
        dir.path(),
        &[
            "--seed",
            "4",
            "modulate",
            "--in",
            "in.bin",
            "--out",
            "tx.vlcw",
            "--channel",
            &preset("channel-awgn-20db.json"),
        ],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = vlcsim(dir.path(), &["demodulate", "--in", "tx.vlcw", "--out", "rx.bin", "--metrics", "m.json"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(path(dir.path(), "m.json")).unwrap()).unwrap();
    let snr = metrics["snr_db"].as_f64().unwrap();
    assert!((snr - 20.0).abs() <= 1.0, "snr {snr}");
    assert_eq!(metrics["sync_failures"], 0);
}

#[test]
fn config_errors_exit_2_and_name_the_field() {
    let dir = workdir();
    fs::write(path(dir.path(), "bad.json"), r#"{ "n_fft": 64, "modulation_order": 6 }"#).unwrap();
    fs::write(path(dir.path(), "in.bin"), b"abc").unwrap();
    let out = vlcsim(dir.path(), &["--config", "bad.json", "modulate", "--in", "in.bin", "--out", "tx.vlcw"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("modulation_order"), "{}", stderr(&out));

    fs::write(path(dir.path(), "typo.json"), r#"{ "n_ftt": 64 }"#).unwrap();
    let out = vlcsim(dir.path(), &["--config", "typo.json", "rate"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("n_ftt"), "{}", stderr(&out));
}

#[test]
fn flag_misuse_exits_2() {
    let dir = workdir();
    let out = vlcsim(dir.path(), &["modulate", "--in", "a", "--out", "b", "--snr-db", "3", "--channel", "c.json"]);
    assert_eq!(code(&out), 2);
    let out = vlcsim(dir.path(), &["rate", "--bogus"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn io_problems_exit_3() {
    let dir = workdir();
    let out = vlcsim(dir.path(), &["ber-sweep", "--sweep", "missing.json", "--out", "r.csv"]);
    assert_eq!(code(&out), 3);

    fs::write(path(dir.path(), "in.bin"), b"some payload").unwrap();
    assert_eq!(code(&vlcsim(dir.path(), &["modulate", "--in", "in.bin", "--out", "tx.vlcw"])), 0);
    let full = fs::read(path(dir.path(), "tx.vlcw")).unwrap();
    fs::write(path(dir.path(), "cut.vlcw"), &full[..full.len() - 5]).unwrap();
    let out = vlcsim(dir.path(), &["demodulate", "--in", "cut.vlcw", "--out", "rx.bin"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("offset"), "{}", stderr(&out));
}

#[test]
fn unsynchronizable_input_exits_4() {
    let dir = workdir();
    fs::write(path(dir.path(), "in.bin"), b"x").unwrap();
    assert_eq!(code(&vlcsim(dir.path(), &["modulate", "--in", "in.bin", "--out", "tx.vlcw"])), 0);
    let mut bytes = fs::read(path(dir.path(), "tx.vlcw")).unwrap();
    let mut rng = rand::rngs::StdRng::seed_from_u64(10);
    for chunk in bytes[22..].chunks_mut(4) {
        chunk.copy_from_slice(&rng.gen_range(0.0..1.0f32).to_le_bytes());
    }
    fs::write(path(dir.path(), "noise.vlcw"), &bytes).unwrap();
    let out = vlcsim(dir.path(), &["demodulate", "--in", "noise.vlcw", "--out", "rx.bin"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

fn small_sweep(dir: &Path) {
    let mut spec: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(preset("garage-los.json")).unwrap()).unwrap();
    spec["values"] = serde_json::json!([20, 39, 45]);
    spec["min_bits"] = 100_000.into();
    spec["max_bits"] = 100_000.into();
    fs::write(dir.join("sweep.json"), spec.to_string()).unwrap();
}

#[test]
fn ber_sweep_is_seed_deterministic() {
    let dir = workdir();
    small_sweep(dir.path());
    let run = |seed: &str, out: &str| {
        let o = vlcsim(dir.path(), &["--seed", seed, "ber-sweep", "--sweep", "sweep.json", "--out", out]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        fs::read_to_string(path(dir.path(), out)).unwrap()
    };
    let a = run("1", "a.csv");
    assert_eq!(a, run("1", "b.csv"));
    assert_ne!(a, run("2", "c.csv"));
    assert_eq!(a.lines().count(), 4);
}

fn garage(dir: &Path, config: &str, seed: &str, ticks: &str, out: &str) -> Output {
    vlcsim(
        dir,
        &[
            "--seed",
            seed,
            "--config",
            &preset(config),
            "garage-sim",
            "--layout",
            &preset("garage-layout.json"),
            "--scenario",
            &preset("garage-scenario.json"),
            "--ticks",
            ticks,
            "--out",
            out,
        ],
    )
}

#[test]
fn zero_ticks_give_an_empty_log() {
    let dir = workdir();
    let out = garage(dir.path(), "garage-sim-perfect.json", "1", "0", "log.ndjson");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(fs::read_to_string(path(dir.path(), "log.ndjson")).unwrap(), "");
    assert!(stdout(&out).contains("ticks: 0, simulated time: 0 ms, events: 0"));
}

#[test]
fn perfect_links_deliver_every_report() {
    let dir = workdir();
    let out = garage(dir.path(), "garage-sim-perfect.json", "1", "800", "log.ndjson");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("report delivery ratio: 1.000"), "{}", stdout(&out));
}

#[test]
fn garage_log_is_seed_deterministic() {
    let dir = workdir();
    for (seed, out) in [("3", "a.ndjson"), ("3", "b.ndjson"), ("4", "c.ndjson")] {
        assert_eq!(code(&garage(dir.path(), "garage-sim-optical.json", seed, "500", out)), 0);
    }
    let read = |n| fs::read(path(dir.path(), n)).unwrap();
    assert_eq!(read("a.ndjson"), read("b.ndjson"));
    assert_ne!(read("a.ndjson"), read("c.ndjson"));
}
