use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use vlcsim_core::channel::{ChannelScenario, NoiseSpec};
use vlcsim_core::harness::{results_to_csv, results_to_json, run_sweep, HarnessError, LinkChannel, SweepSpec};
use vlcsim_core::modem::{
    demodulate_stream, modulate_stream, read_waveform, write_waveform, FramePayload, Modem, ModemError, OfdmConfig,
    WaveformIoError,
};
use vlcsim_core::protocol::{Event, GarageLayout, ProtocolError, Scenario, SimConfig, WorldState};
use vlcsim_core::{compute_data_rate, derive_seed};

/// DCO-OFDM visible light link and garage V2I simulator.
#[derive(Debug, Parser)]
#[command(name = "vlcsim", version)]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Modem configuration JSON (simulation configuration JSON for garage-sim).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Turn a payload file into a waveform file.
    Modulate(ModulateArgs),
    /// Recover the payload from a waveform file.
    Demodulate(DemodulateArgs),
    /// Run a BER sweep described by a JSON file.
    BerSweep(SweepArgs),
    /// Run the garage dissemination simulation.
    GarageSim(GarageArgs),
    /// Print the modem's net data rate.
    Rate,
}

#[derive(Debug, Args)]
struct ModulateArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Input is ASCII '0'/'1' text sent as one frame without a length header.
    #[arg(long)]
    raw_bits: bool,
    /// Largest payload per frame in byte mode.
    #[arg(long, default_value_t = 1024, conflicts_with = "raw_bits")]
    max_frame_bytes: usize,
    /// Add white noise at this electrical SNR.
    #[arg(long, value_name = "DB", conflicts_with = "channel")]
    snr_db: Option<f64>,
    /// Pass the waveform through a channel scenario JSON.
    #[arg(long, value_name = "FILE")]
    channel: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DemodulateArgs {
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, value_name = "FILE")]
    metrics: Option<PathBuf>,
    /// Write every demodulated bit as ASCII text; the waveform must hold one frame.
    #[arg(long)]
    raw_bits: bool,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    sweep: PathBuf,
    /// CSV results.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Also write JSON results with Wilson intervals.
    #[arg(long, value_name = "FILE")]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GarageArgs {
    #[arg(long, value_name = "FILE")]
    layout: PathBuf,
    #[arg(long, value_name = "FILE")]
    scenario: PathBuf,
    #[arg(long)]
    ticks: u64,
    /// Event log (newline-delimited JSON).
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Tick length; defaults to the simulation config's tick_ms.
    #[arg(long, value_name = "MS")]
    dt_ms: Option<u64>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Link(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Io(_) => 3,
            Failure::Link(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Config(m) | Failure::Io(m) | Failure::Link(m) => m,
        }
    }
}

impl From<WaveformIoError> for Failure {
    fn from(e: WaveformIoError) -> Self {
        Failure::Io(e.to_string())
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Io { .. } => Failure::Io(e.to_string()),
            HarnessError::Point { ref source, .. } if matches!(**source, HarnessError::Io { .. }) => {
                Failure::Io(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn config_error(e: ModemError) -> Failure {
    Failure::Config(e.to_string())
}

fn link_error(e: ModemError) -> Failure {
    match e {
        ModemError::Config { .. } => Failure::Config(e.to_string()),
        _ => Failure::Link(e.to_string()),
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| Failure::Io(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
}

fn modem_config(path: Option<&Path>) -> Result<OfdmConfig, Failure> {
    match path {
        None => Ok(OfdmConfig::default()),
        Some(p) => OfdmConfig::from_json(&read_text(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display()))),
    }
}

fn parse_bit_text(text: &str, path: &Path) -> Result<Vec<u8>, Failure> {
    text.chars()
        .filter(|c| !c.is_whitespace())
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Failure::Io(format!("{}: unexpected character {other:?} in bit file", path.display()))),
        })
        .collect()
}

fn bit_text(bits: &[u8]) -> String {
    let mut s: String = bits.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect();
    s.push('\n');
    s
}

fn modulate(cli: &Cli, args: &ModulateArgs) -> Result<(), Failure> {
    let modem = Modem::new(modem_config(cli.config.as_deref())?).map_err(config_error)?;
    let cfg = modem.config();
    let rate = compute_data_rate(cfg).map_err(config_error)?;
    let channel = match (&args.channel, args.snr_db) {
        (Some(p), _) => Some(
            LinkChannel::from_scenario(
                &ChannelScenario::from_json(&read_text(p)?)
                    .map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?,
            )
            .map_err(|e| Failure::Config(e.to_string()))?,
        ),
        (None, Some(db)) => Some(LinkChannel::awgn(NoiseSpec::FixedSnrDb(db))),
        (None, None) => None,
    };

    let (waveform, frames, empty) = if args.raw_bits {
        let bits = parse_bit_text(&read_text(&args.input)?, &args.input)?;
        let empty = bits.is_empty();
        let payload = FramePayload::padded(bits, cfg).map_err(link_error)?;
        (modem.modulate(&payload).map_err(link_error)?, 1, empty)
    } else {
        let bytes = read_bytes(&args.input)?;
        let (w, frames) = modulate_stream(&bytes, &modem, args.max_frame_bytes).map_err(link_error)?;
        (w, frames, bytes.is_empty())
    };
    if empty {
        eprintln!("warning: {} is empty; writing a preamble-only waveform", args.input.display());
    }
    let waveform = match channel {
        None => waveform,
        Some(ch) => {
            let seed = derive_seed(cli.seed.unwrap_or(0), "modulate", 0);
            ch.transmit(&waveform, cfg.bias_amplitude(), seed).map_err(|e| Failure::Config(e.to_string()))?
        }
    };
    write_waveform(&args.out, &waveform)?;
    println!("frames: {frames}");
    println!("samples: {} at {} Hz", waveform.len(), waveform.sample_rate_hz());
    println!("data rate: {rate} bps");
    Ok(())
}

fn demodulate(cli: &Cli, args: &DemodulateArgs) -> Result<(), Failure> {
    let modem = Modem::new(modem_config(cli.config.as_deref())?).map_err(config_error)?;
    let waveform = read_waveform(&args.input)?;
    let (snr_db, frames, sync_failures, bits) = if args.raw_bits {
        let (payload, metrics) = modem.demodulate(&waveform).map_err(link_error)?;
        write_file(&args.out, bit_text(payload.bits()))?;
        (metrics.snr_db, 1, 0, payload.len())
    } else {
        let out = demodulate_stream(&waveform, &modem).map_err(link_error)?;
        write_file(&args.out, &out.bytes)?;
        (out.snr_db, out.frames, out.sync_failures, out.bytes.len() * 8)
    };
    if let Some(path) = &args.metrics {
        let metrics = json!({ "snr_db": snr_db, "frames": frames, "sync_failures": sync_failures, "bits": bits });
        write_file(path, format!("{}\n", serde_json::to_string_pretty(&metrics).expect("plain JSON value")))?;
    }
    println!("frames: {frames}, sync failures: {sync_failures}, bits: {bits}");
    match snr_db {
        Some(db) => println!("snr: {db:.2} dB"),
        None => println!("snr: n/a"),
    }
    if frames == 0 && sync_failures > 0 {
        return Err(Failure::Link(format!("no frame could be synchronized in {}", args.input.display())));
    }
    Ok(())
}

fn ber_sweep(cli: &Cli, args: &SweepArgs) -> Result<(), Failure> {
    let text = read_text(&args.sweep)?;
    let mut spec =
        SweepSpec::from_json(&text).map_err(|e| Failure::Config(format!("{}: {e}", args.sweep.display())))?;
    if let Some(path) = &cli.config {
        spec.modem = modem_config(Some(path))?;
    }
    if let Some(seed) = cli.seed {
        spec.seed = derive_seed(seed, "ber-sweep", 0);
    }
    let results = run_sweep(&spec)?;
    write_file(&args.out, results_to_csv(&results))?;
    if let Some(path) = &args.json {
        write_file(path, results_to_json(&results))?;
    }
    println!("{:>12} {:>12} {:>10} {:>12}", spec.axis.as_str(), "bits", "errors", "ber");
    for r in &results {
        println!("{:>12} {:>12} {:>10} {:>12.4e}", r.value, r.bits_sent, r.bit_errors, r.ber);
    }
    Ok(())
}

fn garage_sim(cli: &Cli, args: &GarageArgs) -> Result<(), Failure> {
    let config = match &cli.config {
        None => SimConfig::default(),
        Some(p) => {
            SimConfig::from_json(&read_text(p)?).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?
        }
    };
    let layout = GarageLayout::from_json(&read_text(&args.layout)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.layout.display())))?;
    let scenario = Scenario::from_json(&read_text(&args.scenario)?)
        .map_err(|e| Failure::Config(format!("{}: {e}", args.scenario.display())))?;
    let dt_ms = args.dt_ms.unwrap_or(config.tick_ms);
    if dt_ms == 0 {
        return Err(Failure::Config("--dt-ms must be positive".into()));
    }
    let mut world = WorldState::new(config, layout, &scenario)?;
    let master = cli.seed.unwrap_or(0);
    for tick in 0..args.ticks {
        world.step(dt_ms, derive_seed(master, "garage-sim", tick))?;
    }
    let file =
        fs::File::create(&args.out).map_err(|e| Failure::Io(format!("cannot write {}: {e}", args.out.display())))?;
    Event::write_ndjson(world.events(), BufWriter::new(file))
        .map_err(|e| Failure::Io(format!("cannot write {}: {e}", args.out.display())))?;

    let summary = world.summary();
    println!("ticks: {}, simulated time: {} ms, events: {}", summary.ticks, summary.time_ms, world.events().len());
    for v in &summary.vehicles {
        println!(
            "vehicle {}: tiles delivered {}, tiles held {}, reports delivered {}/{}",
            v.vehicle_id, v.tiles_delivered, v.tiles_held, v.reports_delivered, v.reports_in_coverage
        );
    }
    println!("report delivery ratio: {:.3}", summary.report_delivery_ratio);
    Ok(())
}

fn rate(cli: &Cli) -> Result<(), Failure> {
    let cfg = modem_config(cli.config.as_deref())?;
    println!("{} bps", compute_data_rate(&cfg).map_err(config_error)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Modulate(a) => modulate(&cli, a),
        Command::Demodulate(a) => demodulate(&cli, a),
        Command::BerSweep(a) => ber_sweep(&cli, a),
        Command::GarageSim(a) => garage_sim(&cli, a),
        Command::Rate => rate(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
