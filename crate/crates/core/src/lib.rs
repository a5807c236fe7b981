//! Visible light vehicle-to-infrastructure link simulator.
//!
//! [`modem`] is a DCO-OFDM transceiver, [`channel`] the geometric optical
//! channel with additive receiver noise, [`harness`] the Monte-Carlo BER
//! machinery and [`protocol`] the garage map-dissemination layer built on top.

pub mod channel;
pub mod harness;
pub mod modem;
pub mod protocol;
pub mod seed;

pub use channel::{ChannelError, ChannelScenario, DetectorSpec, LedSpec, LinkGeometry, NoiseSpec};
pub use harness::{BerResult, HarnessError, SweepAxis, SweepSpec};
pub use modem::{compute_data_rate, FramePayload, LinkMetrics, Modem, ModemError, OfdmConfig, Waveform};
pub use protocol::{CellId, Event, GarageLayout, MapTile, ProtocolError, Segment, VehicleReport, WorldState};
pub use seed::{derive_seed, stream_rng};
