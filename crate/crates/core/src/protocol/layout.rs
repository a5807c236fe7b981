use std::collections::{BTreeSet, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{parse_json, ProtocolError};

/// Grid coordinates of a cell; tiles share the same ids. Serialized as `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct CellId {
    pub x: u32,
    pub y: u32,
}

impl CellId {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl From<[u32; 2]> for CellId {
    fn from([x, y]: [u32; 2]) -> Self {
        Self { x, y }
    }
}

impl From<CellId> for [u32; 2] {
    fn from(c: CellId) -> Self {
        [c.x, c.y]
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A ceiling LED or detector with the cells it has line of sight to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixture {
    pub id: u32,
    pub position_m: [f64; 3],
    pub cells: Vec<CellId>,
}

impl Fixture {
    pub fn covers(&self, cell: CellId) -> bool {
        self.cells.contains(&cell)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParkingSpot {
    pub id: u32,
    pub cell: CellId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lane {
    pub id: u32,
    pub cells: Vec<CellId>,
}

/// Planar vehicle position in metres from the garage's south-west corner.
/// Heading is measured counter-clockwise from east (+x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pose {
    pub x_m: f64,
    pub y_m: f64,
    pub heading_deg: f64,
}

/// Uniform grid of square cells, `width` along x and `height` along y.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GarageLayout {
    pub width: u32,
    pub height: u32,
    pub cell_size_m: f64,
    pub leds: Vec<Fixture>,
    pub detectors: Vec<Fixture>,
    #[serde(default)]
    pub spots: Vec<ParkingSpot>,
    #[serde(default)]
    pub lanes: Vec<Lane>,
}

impl GarageLayout {
    pub fn from_json(text: &str) -> Result<Self, ProtocolError> {
        let layout: Self = parse_json("garage layout", text)?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        let err = |m: String| Err(ProtocolError::Layout(m));
        if self.width == 0 || self.height == 0 {
            return err(format!("grid must be at least 1x1, got {}x{}", self.width, self.height));
        }
        if !(self.cell_size_m.is_finite() && self.cell_size_m > 0.0) {
            return err(format!("cell_size_m must be positive, got {}", self.cell_size_m));
        }
        for (what, set) in [("led", &self.leds), ("detector", &self.detectors)] {
            let mut ids = HashSet::new();
            for f in set {
                if !ids.insert(f.id) {
                    return err(format!("duplicate {what} id {}", f.id));
                }
                if f.position_m.iter().any(|v| !v.is_finite()) {
                    return err(format!("{what} {} has a non-finite position", f.id));
                }
                if f.cells.is_empty() {
                    return err(format!("{what} {} covers no cells", f.id));
                }
                if let Some(c) = f.cells.iter().find(|c| !self.contains(**c)) {
                    return err(format!("{what} {} references cell {c} outside the grid", f.id));
                }
            }
        }
        if let Some(s) = self.spots.iter().find(|s| !self.contains(s.cell)) {
            return err(format!("parking spot {} references cell {} outside the grid", s.id, s.cell));
        }
        for lane in &self.lanes {
            if lane.cells.is_empty() {
                return err(format!("lane {} has no cells", lane.id));
            }
            if let Some(c) = lane.cells.iter().find(|c| !self.contains(**c)) {
                return err(format!("lane {} references cell {c} outside the grid", lane.id));
            }
        }
        Ok(())
    }

    pub fn contains(&self, cell: CellId) -> bool {
        cell.x < self.width && cell.y < self.height
    }

    pub fn extent_m(&self) -> (f64, f64) {
        (f64::from(self.width) * self.cell_size_m, f64::from(self.height) * self.cell_size_m)
    }

    pub fn cells(&self) -> impl Iterator<Item = CellId> + '_ {
        (0..self.height).flat_map(move |y| (0..self.width).map(move |x| CellId::new(x, y)))
    }

    pub fn cell_of(&self, pose: &Pose) -> Result<CellId, ProtocolError> {
        let (w, h) = self.extent_m();
        let inside = |v: f64, max: f64| v.is_finite() && (0.0..max).contains(&v);
        if !(inside(pose.x_m, w) && inside(pose.y_m, h) && pose.heading_deg.is_finite()) {
            return Err(ProtocolError::Domain(format!(
                "pose ({}, {}) heading {} lies outside the {w} x {h} m garage",
                pose.x_m, pose.y_m, pose.heading_deg
            )));
        }
        let x = ((pose.x_m / self.cell_size_m) as u32).min(self.width - 1);
        let y = ((pose.y_m / self.cell_size_m) as u32).min(self.height - 1);
        Ok(CellId::new(x, y))
    }

    /// Centre of a cell at floor level.
    pub fn cell_centre(&self, cell: CellId) -> [f64; 3] {
        [(f64::from(cell.x) + 0.5) * self.cell_size_m, (f64::from(cell.y) + 0.5) * self.cell_size_m, 0.0]
    }

    pub fn leds_covering(&self, cell: CellId) -> impl Iterator<Item = &Fixture> {
        self.leds.iter().filter(move |l| l.covers(cell))
    }

    pub fn led(&self, id: u32) -> Option<&Fixture> {
        self.leds.iter().find(|l| l.id == id)
    }

    pub fn detector(&self, id: u32) -> Option<&Fixture> {
        self.detectors.iter().find(|d| d.id == id)
    }

    /// Tiles within Chebyshev distance `radius` of `cell` that are not behind
    /// the vehicle: the cell offset must have a non-negative projection on the
    /// heading direction. The vehicle's own tile is always included.
    pub fn relevant_tiles(&self, cell: CellId, heading_deg: f64, radius: u32) -> Vec<CellId> {
        let (sin, cos) = heading_deg.to_radians().sin_cos();
        let r = i64::from(radius);
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (i64::from(cell.x) + dx, i64::from(cell.y) + dy);
                if x < 0 || y < 0 || x >= i64::from(self.width) || y >= i64::from(self.height) {
                    continue;
                }
                if dx as f64 * cos + dy as f64 * sin >= -1e-9 {
                    out.push(CellId::new(x as u32, y as u32));
                }
            }
        }
        out
    }
}

/// `(led_id, tile_id)` pairs to stream for a vehicle at `pose`: every LED
/// covering the vehicle's cell paired with every relevant tile.
pub fn plan_dissemination(
    layout: &GarageLayout,
    pose: &Pose,
    radius: u32,
) -> Result<BTreeSet<(u32, CellId)>, ProtocolError> {
    let cell = layout.cell_of(pose)?;
    let tiles = layout.relevant_tiles(cell, pose.heading_deg, radius);
    Ok(layout.leds_covering(cell).flat_map(|l| tiles.iter().map(move |t| (l.id, *t))).collect())
}

/// Ids of detectors whose field of view includes the vehicle's cell.
pub fn detector_capture(layout: &GarageLayout, pose: &Pose) -> Result<BTreeSet<u32>, ProtocolError> {
    let cell = layout.cell_of(pose)?;
    Ok(layout.detectors.iter().filter(|d| d.covers(cell)).map(|d| d.id).collect())
}
