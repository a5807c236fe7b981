use std::collections::BTreeMap;

use rand::RngCore;
use serde::Serialize;

use super::{
    encode_vehicle_report, CellId, GarageLayout, MapTile, PayloadKind, ProtocolError, VehicleReport, REPORT_LEN,
};
use crate::seed::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum FuseOutcome {
    Fused {
        tile: CellId,
        version: u64,
    },
    /// Same timestamp as the last fused report from this vehicle.
    Duplicate,
    /// Older than the last fused report from this vehicle; ignored.
    Stale {
        last_timestamp_ms: u64,
    },
}

impl FuseOutcome {
    pub fn changed_tiles(&self) -> Vec<CellId> {
        match self {
            Self::Fused { tile, .. } => vec![*tile],
            _ => Vec::new(),
        }
    }
}

/// The infrastructure's versioned online map.
///
/// Each tile starts with a synthetic sensor payload (point cloud or video,
/// alternating in a checkerboard) at version 0. Fusing a vehicle report appends
/// the encoded report to its tile's dynamic-object record and bumps the version.
/// When a tile would exceed `max_payload_bytes` the oldest records are dropped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapServer {
    tiles: BTreeMap<CellId, MapTile>,
    base_len: usize,
    max_payload_bytes: usize,
    last_fused: BTreeMap<u32, u64>,
}

impl MapServer {
    pub fn new(
        layout: &GarageLayout,
        base_payload_bytes: usize,
        max_payload_bytes: usize,
    ) -> Result<Self, ProtocolError> {
        if max_payload_bytes < base_payload_bytes + REPORT_LEN {
            return Err(ProtocolError::Config(format!(
                "max_payload_bytes {max_payload_bytes} cannot hold a {base_payload_bytes}-byte base plus one report"
            )));
        }
        let tiles = layout
            .cells()
            .map(|cell| {
                let mut payload = vec![0u8; base_payload_bytes];
                stream_rng(0x7113, "tile-base", (u64::from(cell.x) << 32) | u64::from(cell.y)).fill_bytes(&mut payload);
                let kind = if (cell.x + cell.y) % 2 == 0 { PayloadKind::Pointcloud } else { PayloadKind::Video };
                (cell, MapTile { tile_id: cell, version: 0, kind, payload })
            })
            .collect();
        Ok(Self { tiles, base_len: base_payload_bytes, max_payload_bytes, last_fused: BTreeMap::new() })
    }

    pub fn tile(&self, id: CellId) -> Option<&MapTile> {
        self.tiles.get(&id)
    }

    pub fn tiles(&self) -> impl Iterator<Item = &MapTile> {
        self.tiles.values()
    }

    pub fn last_fused(&self, vehicle_id: u32) -> Option<u64> {
        self.last_fused.get(&vehicle_id).copied()
    }

    /// Folds a decoded report from a vehicle located in `cell` into that cell's tile.
    pub fn fuse_report(&mut self, report: &VehicleReport, cell: CellId) -> Result<FuseOutcome, ProtocolError> {
        let record = encode_vehicle_report(report)?;
        let tile = self.tiles.get_mut(&cell).ok_or_else(|| {
            ProtocolError::Domain(format!("report from vehicle {} in unknown cell {cell}", report.vehicle_id))
        })?;
        if let Some(&last) = self.last_fused.get(&report.vehicle_id) {
            if report.timestamp_ms == last {
                return Ok(FuseOutcome::Duplicate);
            }
            if report.timestamp_ms < last {
                return Ok(FuseOutcome::Stale { last_timestamp_ms: last });
            }
        }
        while tile.payload.len() + REPORT_LEN > self.max_payload_bytes {
            tile.payload.drain(self.base_len..self.base_len + REPORT_LEN);
        }
        tile.payload.extend_from_slice(&record);
        tile.version += 1;
        tile.kind = PayloadKind::Fused;
        self.last_fused.insert(report.vehicle_id, report.timestamp_ms);
        Ok(FuseOutcome::Fused { tile: cell, version: tile.version })
    }
}
