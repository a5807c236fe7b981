//! Vehicle-to-infrastructure exchange over the optical links.
//!
//! Vehicles send fixed-width kinematic reports up to ceiling detectors, a map
//! server folds them into versioned map tiles, and ceiling LEDs stream the
//! tiles near each vehicle back down as fixed-size segments.

mod layout;
mod report;
mod server;
mod sim;
mod tile;

use thiserror::Error;

pub use layout::{detector_capture, plan_dissemination, CellId, Fixture, GarageLayout, Lane, ParkingSpot, Pose};
pub use report::{decode_vehicle_report, encode_vehicle_report, VehicleReport, REPORT_BITS, REPORT_LEN};
pub use server::{FuseOutcome, MapServer};
pub use sim::{
    replay, step_simulation, Event, KinematicPhase, LinkQuality, OpticalLinks, Scenario, SimConfig, SimSummary, Spawn,
    Vehicle, VehicleSummary, WorldState,
};
pub use tile::{
    chunk_tile, reassemble, MapTile, PayloadKind, Reassembler, Reassembly, Segment, SegmentOutcome, SEGMENT_HEADER_LEN,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("report CRC mismatch: stored {stored:#06x}, computed {computed:#06x}")]
    Corrupt { stored: u16, computed: u16 },
    #[error("buffer holds {available} bytes, need {needed}")]
    Truncated { needed: usize, available: usize },
    #[error("invalid report field {field}: {reason}")]
    InvalidReport { field: &'static str, reason: &'static str },
    #[error("{0}")]
    Domain(String),
    #[error("invalid layout: {0}")]
    Layout(String),
    #[error("segment conflict: {0}")]
    Conflict(String),
    #[error("invalid simulation input: {0}")]
    Config(String),
    #[error("cannot parse {what}: {message}")]
    Parse { what: &'static str, message: String },
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(what: &'static str, text: &str) -> Result<T, ProtocolError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| ProtocolError::Parse { what, message: e.to_string() })
}
