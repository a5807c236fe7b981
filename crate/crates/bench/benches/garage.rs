use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use vlcsim_core::protocol::{
    chunk_tile, decode_vehicle_report, encode_vehicle_report, reassemble, PayloadKind, Scenario, SimConfig,
};
use vlcsim_core::{derive_seed, CellId, GarageLayout, MapTile, VehicleReport, WorldState};

const LAYOUT: &str = include_str!("../../../presets/garage-layout.json");
const SCENARIO: &str = include_str!("../../../presets/garage-scenario.json");
const OPTICAL: &str = include_str!("../../../presets/garage-sim-optical.json");

fn world(config: &str) -> WorldState {
    let config = SimConfig::from_json(config).unwrap();
    WorldState::new(config, GarageLayout::from_json(LAYOUT).unwrap(), &Scenario::from_json(SCENARIO).unwrap()).unwrap()
}

fn sim_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("garage_step");
    for (name, config) in [("perfect", "{}"), ("optical", OPTICAL)] {
        let mut warmed = world(config);
        for t in 0..300 {
            warmed.step(10, derive_seed(1, "tick", t)).unwrap();
        }
        group.bench_function(name, |b| {
            b.iter_batched(|| warmed.clone(), |mut w| w.step(10, 99).map(|e| e.len()).unwrap(), BatchSize::SmallInput)
        });
    }
    group.finish();
}

fn wire(c: &mut Criterion) {
    let report = VehicleReport {
        vehicle_id: 7,
        timestamp_ms: 123_456,
        speed_mps: 3.5,
        acceleration_mps2: -0.5,
        deceleration_mps2: 0.5,
        brake_status: true,
    };
    let bytes = encode_vehicle_report(&report).unwrap();
    c.bench_function("report_encode", |b| b.iter(|| encode_vehicle_report(&report).unwrap()));
    c.bench_function("report_decode", |b| b.iter(|| decode_vehicle_report(&bytes).unwrap()));

    let tile = MapTile {
        tile_id: CellId::new(3, 2),
        version: 9,
        kind: PayloadKind::Fused,
        payload: (0..4096u32).map(|i| i as u8).collect(),
    };
    let mut segs = chunk_tile(&tile, 300).unwrap();
    segs.reverse();
    c.bench_function("tile_chunk_4k", |b| b.iter(|| chunk_tile(&tile, 300).unwrap()));
    c.bench_function("tile_reassemble_4k", |b| b.iter(|| reassemble(&segs).unwrap()));
}

criterion_group!(benches, sim_step, wire);
criterion_main!(benches);
