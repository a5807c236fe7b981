//! Tick-driven garage simulation.
//!
//! Each tick spawns due vehicles, integrates their kinematics, sends the due
//! uplink reports through the covering detectors, fuses what arrives, re-plans
//! each LED's tile set and then streams segments from every LED queue within
//! its byte budget. All randomness is drawn from streams keyed by the tick seed,
//! so a tick is a pure function of `(state, dt_ms, seed)`. The log records every
//! tick's `(dt_ms, seed)`, which is enough to replay a run from its initial state.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{
    chunk_tile, detector_capture, parse_json, plan_dissemination, CellId, FuseOutcome, GarageLayout, MapServer, Pose,
    ProtocolError, Reassembler, Segment, SegmentOutcome, VehicleReport, REPORT_BITS, REPORT_LEN,
};
use crate::channel::{los_gain, DetectorSpec, LedSpec, LinkGeometry};
use crate::harness::theoretical_ber_qam;
use crate::modem::{compute_data_rate, OfdmConfig};
use crate::seed::stream_rng;

/// Optical link budget evaluated between a ceiling fixture and a cell centre.
///
/// Ceiling fixtures face straight down and vehicle optics straight up, so the
/// emission and incidence angles are both the angle off vertical. The same LED
/// and photodiode models are used on both ends of the link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OpticalLinks {
    #[serde(default)]
    pub led: LedSpec,
    #[serde(default)]
    pub detector: DetectorSpec,
    pub noise_power_a2: f64,
    #[serde(default = "default_vehicle_height")]
    pub vehicle_height_m: f64,
}

fn default_vehicle_height() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkQuality {
    Perfect,
    FixedBer { ber: f64 },
    Optical(OpticalLinks),
}

impl LinkQuality {
    fn ber(&self, fixture: [f64; 3], cell_centre: [f64; 3], modem: &OfdmConfig) -> Result<f64, ProtocolError> {
        match self {
            Self::Perfect => Ok(0.0),
            Self::FixedBer { ber } => Ok(*ber),
            Self::Optical(o) => {
                let dz = fixture[2] - o.vehicle_height_m;
                if dz <= 0.0 {
                    return Ok(0.5);
                }
                let (dx, dy) = (fixture[0] - cell_centre[0], fixture[1] - cell_centre[1]);
                let distance_m = (dx * dx + dy * dy + dz * dz).sqrt();
                let angle = (dz / distance_m).acos().to_degrees();
                let geo = LinkGeometry { distance_m, emit_angle_deg: angle, incidence_angle_deg: angle };
                let gain = los_gain(&o.led, &o.detector, &geo).map_err(|e| ProtocolError::Config(e.to_string()))?;
                if gain == 0.0 {
                    return Ok(0.5);
                }
                let amplitude = gain * o.detector.responsivity_a_per_w * o.led.optical_power_w / modem.bias_amplitude();
                let snr_db = 10.0 * (amplitude * amplitude / o.noise_power_a2).log10();
                Ok(theoretical_ber_qam(snr_db, modem.modulation_order).min(0.5))
            }
        }
    }

    fn validate(&self) -> Result<(), ProtocolError> {
        match self {
            Self::Perfect => Ok(()),
            Self::FixedBer { ber } if (0.0..=0.5).contains(ber) => Ok(()),
            Self::FixedBer { ber } => Err(ProtocolError::Config(format!("link.ber = {ber} must lie in [0, 0.5]"))),
            Self::Optical(o) => {
                let cfg = |e: crate::channel::ChannelError| ProtocolError::Config(e.to_string());
                o.led.validate().map_err(cfg)?;
                o.detector.validate().map_err(cfg)?;
                if !(o.noise_power_a2.is_finite() && o.noise_power_a2 > 0.0) {
                    return Err(ProtocolError::Config(format!(
                        "link.noise_power_a2 = {} must be positive",
                        o.noise_power_a2
                    )));
                }
                if !o.vehicle_height_m.is_finite() {
                    return Err(ProtocolError::Config("link.vehicle_height_m must be finite".into()));
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    #[serde(default = "defaults::relevance_radius")]
    pub relevance_radius: u32,
    #[serde(default = "defaults::report_period_ms")]
    pub report_period_ms: u64,
    #[serde(default = "defaults::tick_ms")]
    pub tick_ms: u64,
    #[serde(default = "defaults::segment_bytes")]
    pub segment_bytes: usize,
    #[serde(default = "defaults::base_payload_bytes")]
    pub base_payload_bytes: usize,
    #[serde(default = "defaults::max_payload_bytes")]
    pub max_payload_bytes: usize,
    #[serde(default = "OfdmConfig::reference")]
    pub modem: OfdmConfig,
    #[serde(default = "defaults::link")]
    pub link: LinkQuality,
}

mod defaults {
    pub fn relevance_radius() -> u32 {
        1
    }
    pub fn report_period_ms() -> u64 {
        100
    }
    pub fn tick_ms() -> u64 {
        10
    }
    pub fn segment_bytes() -> usize {
        300
    }
    pub fn base_payload_bytes() -> usize {
        1200
    }
    pub fn max_payload_bytes() -> usize {
        4096
    }
    pub fn link() -> super::LinkQuality {
        super::LinkQuality::Perfect
    }
}

impl Default for SimConfig {
    fn default() -> Self {
        parse_json("simulation config", "{}").expect("all fields have defaults")
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let cfg: Self = parse_json("simulation config", text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |m: String| Err(ProtocolError::Config(m));
        if self.report_period_ms == 0 {
            return bad("report_period_ms must be positive".into());
        }
        if self.tick_ms == 0 {
            return bad("tick_ms must be positive".into());
        }
        if self.segment_bytes == 0 {
            return bad("segment_bytes must be positive".into());
        }
        if self.max_payload_bytes < self.base_payload_bytes + REPORT_LEN {
            return bad(format!(
                "max_payload_bytes {} must leave room for one {REPORT_LEN}-byte report after the {}-byte base",
                self.max_payload_bytes, self.base_payload_bytes
            ));
        }
        self.modem.validate().map_err(|e| ProtocolError::Config(format!("modem: {e}")))?;
        self.link.validate()
    }

    /// Downlink byte budget per LED per second.
    pub fn bytes_per_second(&self) -> f64 {
        compute_data_rate(&self.modem).expect("validated modem") / 8.0
    }
}

/// Constant acceleration and turn rate held for `duration_ms`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicPhase {
    pub duration_ms: u64,
    #[serde(default)]
    pub accel_mps2: f64,
    #[serde(default)]
    pub turn_rate_dps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spawn {
    pub time_ms: u64,
    pub vehicle_id: u32,
    pub pose: Pose,
    #[serde(default)]
    pub speed_mps: f64,
    /// Played back to back from the spawn time; afterwards the vehicle coasts.
    #[serde(default)]
    pub phases: Vec<KinematicPhase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub spawns: Vec<Spawn>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        parse_json("scenario", text)
    }

    pub fn validate(&self, layout: &GarageLayout) -> Result<(), ProtocolError> {
        let mut ids = BTreeSet::new();
        for s in &self.spawns {
            let bad = |m: &str| Err(ProtocolError::Config(format!("spawn of vehicle {}: {m}", s.vehicle_id)));
            if !ids.insert(s.vehicle_id) {
                return bad("duplicate vehicle id");
            }
            layout.cell_of(&s.pose)?;
            if !(s.speed_mps.is_finite() && s.speed_mps >= 0.0) {
                return bad("speed_mps must be finite and non-negative");
            }
            if s.phases.iter().any(|p| p.duration_ms == 0 || !p.accel_mps2.is_finite() || !p.turn_rate_dps.is_finite())
            {
                return bad("phases need a positive duration and finite rates");
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: u32,
    pub pose: Pose,
    pub speed_mps: f64,
    pub accel_mps2: f64,
    pub cell: CellId,
    pub spawn_ms: u64,
    pub phases: Vec<KinematicPhase>,
    pub next_report_ms: u64,
    pub reassembler: Reassembler,
    pub reports_sent: u64,
    pub reports_in_coverage: u64,
    pub reports_delivered: u64,
    pub tiles_delivered: u64,
}

impl Vehicle {
    fn phase_at(&self, time_ms: u64) -> (f64, f64) {
        let mut elapsed = time_ms.saturating_sub(self.spawn_ms);
        for p in &self.phases {
            if elapsed < p.duration_ms {
                return (p.accel_mps2, p.turn_rate_dps);
            }
            elapsed -= p.duration_ms;
        }
        (0.0, 0.0)
    }

    fn report(&self, timestamp_ms: u64) -> VehicleReport {
        let a = self.accel_mps2 as f32;
        VehicleReport {
            vehicle_id: self.id,
            timestamp_ms,
            speed_mps: self.speed_mps as f32,
            acceleration_mps2: a,
            deceleration_mps2: (-a).max(0.0),
            brake_status: a < 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
struct LedQueue {
    targets: BTreeSet<CellId>,
    queue: VecDeque<Segment>,
    credit_bytes: f64,
    bytes_sent: u64,
}

/// One line of the NDJSON event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time_ms: u64,
    pub kind: String,
    pub fields: Value,
}

impl Event {
    fn new(time_ms: u64, kind: &str, fields: Value) -> Self {
        Self { time_ms, kind: kind.to_owned(), fields }
    }

    pub fn write_ndjson<W: Write>(events: &[Event], mut out: W) -> std::io::Result<()> {
        for e in events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(input: R) -> Result<Vec<Event>, ProtocolError> {
        let mut events = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ProtocolError::Parse { what: "event log", message: e.to_string() })?;
            if line.trim().is_empty() {
                continue;
            }
            let e = serde_json::from_str(&line)
                .map_err(|e| ProtocolError::Parse { what: "event log", message: format!("line {}: {e}", i + 1) })?;
            events.push(e);
        }
        Ok(events)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VehicleSummary {
    pub vehicle_id: u32,
    pub tiles_delivered: u64,
    pub tiles_held: usize,
    pub reports_sent: u64,
    pub reports_in_coverage: u64,
    pub reports_delivered: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub ticks: u64,
    pub time_ms: u64,
    pub vehicles: Vec<VehicleSummary>,
    /// Delivered reports over reports sent from a cell some detector sees;
    /// zero when no report was attempted.
    pub report_delivery_ratio: f64,
    pub led_bytes_sent: BTreeMap<u32, u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    config: SimConfig,
    layout: GarageLayout,
    uplink_ber: BTreeMap<(u32, CellId), f64>,
    downlink_ber: BTreeMap<(u32, CellId), f64>,
    pending: VecDeque<Spawn>,
    time_ms: u64,
    ticks: u64,
    vehicles: BTreeMap<u32, Vehicle>,
    server: MapServer,
    leds: BTreeMap<u32, LedQueue>,
    planned: BTreeMap<u32, BTreeSet<CellId>>,
    log: Vec<Event>,
}

impl WorldState {
    pub fn new(config: SimConfig, layout: GarageLayout, scenario: &Scenario) -> Result<Self, ProtocolError> {
        config.validate()?;
        layout.validate()?;
        scenario.validate(&layout)?;
        let mut pending: Vec<Spawn> = scenario.spawns.clone();
        pending.sort_by_key(|s| (s.time_ms, s.vehicle_id));
        let link_table = |fixtures: &[super::layout::Fixture]| -> Result<BTreeMap<(u32, CellId), f64>, ProtocolError> {
            let mut table = BTreeMap::new();
            for f in fixtures {
                for &c in &f.cells {
                    table.insert((f.id, c), config.link.ber(f.position_m, layout.cell_centre(c), &config.modem)?);
                }
            }
            Ok(table)
        };
        let uplink_ber = link_table(&layout.detectors)?;
        let downlink_ber = link_table(&layout.leds)?;
        let server = MapServer::new(&layout, config.base_payload_bytes, config.max_payload_bytes)?;
        let leds = layout.leds.iter().map(|l| (l.id, LedQueue::default())).collect();
        Ok(Self {
            config,
            layout,
            uplink_ber,
            downlink_ber,
            pending: pending.into(),
            time_ms: 0,
            ticks: 0,
            vehicles: BTreeMap::new(),
            server,
            leds,
            planned: BTreeMap::new(),
            log: Vec::new(),
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn layout(&self) -> &GarageLayout {
        &self.layout
    }

    pub fn time_ms(&self) -> u64 {
        self.time_ms
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn vehicles(&self) -> impl Iterator<Item = &Vehicle> {
        self.vehicles.values()
    }

    pub fn vehicle(&self, id: u32) -> Option<&Vehicle> {
        self.vehicles.get(&id)
    }

    pub fn server(&self) -> &MapServer {
        &self.server
    }

    pub fn events(&self) -> &[Event] {
        &self.log
    }

    /// Tiles each LED has ever been planned to stream.
    pub fn planned(&self) -> &BTreeMap<u32, BTreeSet<CellId>> {
        &self.planned
    }

    /// Current plan of one LED.
    pub fn led_targets(&self, led: u32) -> Option<&BTreeSet<CellId>> {
        self.leds.get(&led).map(|q| &q.targets)
    }

    pub fn led_bytes_sent(&self) -> BTreeMap<u32, u64> {
        self.leds.iter().map(|(id, q)| (*id, q.bytes_sent)).collect()
    }

    pub fn summary(&self) -> SimSummary {
        let vehicles: Vec<VehicleSummary> = self
            .vehicles
            .values()
            .map(|v| VehicleSummary {
                vehicle_id: v.id,
                tiles_delivered: v.tiles_delivered,
                tiles_held: v.reassembler.tiles().count(),
                reports_sent: v.reports_sent,
                reports_in_coverage: v.reports_in_coverage,
                reports_delivered: v.reports_delivered,
            })
            .collect();
        let attempted: u64 = vehicles.iter().map(|v| v.reports_in_coverage).sum();
        let delivered: u64 = vehicles.iter().map(|v| v.reports_delivered).sum();
        SimSummary {
            ticks: self.ticks,
            time_ms: self.time_ms,
            report_delivery_ratio: if attempted == 0 { 0.0 } else { delivered as f64 / attempted as f64 },
            vehicles,
            led_bytes_sent: self.led_bytes_sent(),
        }
    }

    /// Advances the world by `dt_ms` and returns the events this tick appended.
    pub fn step(&mut self, dt_ms: u64, seed: u64) -> Result<&[Event], ProtocolError> {
        if dt_ms == 0 {
            return Err(ProtocolError::Config("dt_ms must be positive".into()));
        }
        let first = self.log.len();
        self.log.push(Event::new(self.time_ms, "tick", json!({ "dt_ms": dt_ms, "seed": seed })));
        self.spawn_due();
        self.advance_kinematics(dt_ms);
        self.time_ms += dt_ms;
        self.ticks += 1;
        self.uplink(seed);
        self.replan();
        self.downlink(dt_ms, seed);
        Ok(&self.log[first..])
    }

    fn emit(&mut self, kind: &str, fields: Value) {
        self.log.push(Event::new(self.time_ms, kind, fields));
    }

    fn spawn_due(&mut self) {
        while self.pending.front().is_some_and(|s| s.time_ms <= self.time_ms) {
            let s = self.pending.pop_front().expect("front exists");
            let cell = self.layout.cell_of(&s.pose).expect("validated spawn pose");
            self.emit("spawn", json!({ "vehicle": s.vehicle_id, "pose": s.pose, "speed_mps": s.speed_mps }));
            self.emit("cell_entered", json!({ "vehicle": s.vehicle_id, "cell": cell }));
            self.vehicles.insert(
                s.vehicle_id,
                Vehicle {
                    id: s.vehicle_id,
                    pose: s.pose,
                    speed_mps: s.speed_mps,
                    accel_mps2: 0.0,
                    cell,
                    spawn_ms: self.time_ms,
                    phases: s.phases,
                    next_report_ms: self.time_ms,
                    reassembler: Reassembler::new(),
                    reports_sent: 0,
                    reports_in_coverage: 0,
                    reports_delivered: 0,
                    tiles_delivered: 0,
                },
            );
        }
    }

    fn advance_kinematics(&mut self, dt_ms: u64) {
        let dt = dt_ms as f64 / 1000.0;
        let (w, h) = self.layout.extent_m();
        let mut moved = Vec::new();
        for v in self.vehicles.values_mut() {
            let (a, turn) = v.phase_at(self.time_ms);
            let (distance, speed) = if v.speed_mps + a * dt >= 0.0 {
                (v.speed_mps * dt + 0.5 * a * dt * dt, v.speed_mps + a * dt)
            } else {
                (v.speed_mps * v.speed_mps / (2.0 * -a), 0.0)
            };
            let accel = if speed == 0.0 && a < 0.0 { 0.0 } else { a };
            let (sin, cos) = v.pose.heading_deg.to_radians().sin_cos();
            let mut x = v.pose.x_m + distance * cos;
            let mut y = v.pose.y_m + distance * sin;
            let heading = (v.pose.heading_deg + turn * dt).rem_euclid(360.0);
            let inside = (0.0..w).contains(&x) && (0.0..h).contains(&y);
            let (speed, accel) = if inside {
                (speed, accel)
            } else {
                let edge = |v: f64, max: f64| v.clamp(0.0, max - max * f64::EPSILON * 4.0);
                x = edge(x, w);
                y = edge(y, h);
                moved.push((v.id, None));
                (0.0, 0.0)
            };
            v.pose = Pose { x_m: x, y_m: y, heading_deg: heading };
            v.speed_mps = speed;
            v.accel_mps2 = accel;
            let cell = self.layout.cell_of(&v.pose).expect("pose kept inside the garage");
            if cell != v.cell {
                v.cell = cell;
                moved.push((v.id, Some(cell)));
            }
        }
        for (id, cell) in moved {
            match cell {
                Some(c) => self.emit("cell_entered", json!({ "vehicle": id, "cell": c })),
                None => self.emit("halted_at_wall", json!({ "vehicle": id })),
            }
        }
    }

    fn uplink(&mut self, seed: u64) {
        let mut rng = stream_rng(seed, "uplink", 0);
        let ids: Vec<u32> = self.vehicles.keys().copied().collect();
        for id in ids {
            loop {
                let v = &self.vehicles[&id];
                if v.next_report_ms > self.time_ms {
                    break;
                }
                let report = v.report(v.next_report_ms);
                let cell = v.cell;
                let detectors = detector_capture(&self.layout, &v.pose).expect("pose kept inside the garage");
                let v = self.vehicles.get_mut(&id).expect("vehicle exists");
                v.next_report_ms += self.config.report_period_ms;
                v.reports_sent += 1;
                if detectors.is_empty() {
                    continue;
                }
                v.reports_in_coverage += 1;
                let captured: Vec<u32> = detectors
                    .into_iter()
                    .filter(|d| {
                        let ber = self.uplink_ber[&(*d, cell)];
                        rng.gen::<f64>() < (1.0 - ber).powi(REPORT_BITS as i32)
                    })
                    .collect();
                if captured.is_empty() {
                    self.emit("report_lost", json!({ "vehicle": id, "timestamp_ms": report.timestamp_ms }));
                    continue;
                }
                self.vehicles.get_mut(&id).expect("vehicle exists").reports_delivered += 1;
                for d in captured {
                    match self.server.fuse_report(&report, cell).expect("report from a valid pose") {
                        FuseOutcome::Fused { tile, version } => self.emit(
                            "report_fused",
                            json!({ "vehicle": id, "detector": d, "timestamp_ms": report.timestamp_ms, "tile": tile, "version": version }),
                        ),
                        FuseOutcome::Duplicate => {}
                        FuseOutcome::Stale { last_timestamp_ms } => self.emit(
                            "stale_report",
                            json!({ "vehicle": id, "detector": d, "timestamp_ms": report.timestamp_ms, "last_timestamp_ms": last_timestamp_ms }),
                        ),
                    }
                }
            }
        }
    }

    fn replan(&mut self) {
        let mut targets: BTreeMap<u32, BTreeSet<CellId>> = self.leds.keys().map(|id| (*id, BTreeSet::new())).collect();
        for v in self.vehicles.values() {
            let plan = plan_dissemination(&self.layout, &v.pose, self.config.relevance_radius)
                .expect("pose kept inside the garage");
            for (led, tile) in plan {
                targets.get_mut(&led).expect("planned LEDs exist").insert(tile);
            }
        }
        for (led, tiles) in targets {
            let q = self.leds.get_mut(&led).expect("queue per LED");
            if q.targets != tiles {
                q.queue.retain(|s| tiles.contains(&s.tile_id));
                q.targets = tiles.clone();
                self.planned.entry(led).or_default().extend(tiles.iter().copied());
                self.emit("plan", json!({ "led": led, "tiles": tiles }));
            }
        }
    }

    fn downlink(&mut self, dt_ms: u64, seed: u64) {
        let mut rng = stream_rng(seed, "downlink", 0);
        let budget = self.config.bytes_per_second() * dt_ms as f64 / 1000.0;
        let led_ids: Vec<u32> = self.leds.keys().copied().collect();
        for led in led_ids {
            let receivers: Vec<u32> = self
                .vehicles
                .values()
                .filter(|v| self.layout.led(led).expect("queue per LED").covers(v.cell))
                .map(|v| v.id)
                .collect();
            let (mut segments, mut bytes, mut lost) = (0u64, 0u64, 0u64);
            let mut completions = Vec::new();
            let q = self.leds.get_mut(&led).expect("queue per LED");
            q.credit_bytes += budget;
            loop {
                if q.queue.is_empty() {
                    for tile in &q.targets {
                        let t = self.server.tile(*tile).expect("tiles exist for every cell");
                        q.queue.extend(chunk_tile(t, self.config.segment_bytes).expect("validated segment size"));
                    }
                    if q.queue.is_empty() {
                        q.credit_bytes = 0.0;
                        break;
                    }
                }
                let wire = q.queue.front().expect("queue refilled").wire_len();
                if q.credit_bytes < wire as f64 {
                    break;
                }
                let seg = q.queue.pop_front().expect("queue refilled");
                q.credit_bytes -= wire as f64;
                q.bytes_sent += wire as u64;
                segments += 1;
                bytes += wire as u64;
                for id in &receivers {
                    let v = self.vehicles.get_mut(id).expect("receiver exists");
                    let ber = self.downlink_ber[&(led, v.cell)];
                    if rng.gen::<f64>() >= (1.0 - ber).powi((wire * 8) as i32) {
                        lost += 1;
                        continue;
                    }
                    match v.reassembler.accept(&seg) {
                        Ok(SegmentOutcome::Completed { version }) => {
                            v.tiles_delivered += 1;
                            completions
                                .push(json!({ "vehicle": id, "led": led, "tile": seg.tile_id, "version": version }));
                        }
                        Ok(_) => {}
                        Err(e) => completions.push(json!({ "vehicle": id, "led": led, "error": e.to_string() })),
                    }
                }
            }
            if segments > 0 {
                self.emit("downlink", json!({ "led": led, "segments": segments, "bytes": bytes, "lost": lost }));
            }
            for c in completions {
                let kind = if c.get("error").is_some() { "protocol_error" } else { "tile_delivered" };
                self.emit(kind, c);
            }
        }
    }
}

/// Pure form of [`WorldState::step`]: returns the advanced state and this tick's events.
pub fn step_simulation(world: &WorldState, dt_ms: u64, seed: u64) -> Result<(WorldState, Vec<Event>), ProtocolError> {
    let mut next = world.clone();
    let events = next.step(dt_ms, seed)?.to_vec();
    Ok((next, events))
}

/// Re-runs the ticks recorded in `log` from `initial`.
pub fn replay(initial: &WorldState, log: &[Event]) -> Result<WorldState, ProtocolError> {
    let mut world = initial.clone();
    for e in log.iter().filter(|e| e.kind == "tick") {
        let field = |name: &str| {
            e.fields.get(name).and_then(Value::as_u64).ok_or_else(|| ProtocolError::Parse {
                what: "event log",
                message: format!("tick at {} ms lacks an integer {name}", e.time_ms),
            })
        };
        world.step(field("dt_ms")?, field("seed")?)?;
    }
    Ok(world)
}
