use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CellId, ProtocolError};

/// Framing bytes charged against the link budget for every segment:
/// tile x/y (2+2), version (4), seq/total (2+2), kind (1), length (2), reserved (1).
pub const SEGMENT_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PayloadKind {
    Pointcloud,
    Video,
    Fused,
}

/// One grid cell's worth of the online map.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapTile {
    pub tile_id: CellId,
    pub version: u64,
    pub kind: PayloadKind,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub tile_id: CellId,
    pub version: u64,
    pub seq_no: u32,
    pub total_segments: u32,
    pub kind: PayloadKind,
    pub bytes: Vec<u8>,
}

impl Segment {
    /// Bytes this segment occupies on the downlink, header included.
    pub fn wire_len(&self) -> usize {
        SEGMENT_HEADER_LEN + self.bytes.len()
    }
}

/// Splits a tile into `ceil(len / segment_bytes)` segments.
///
/// An empty payload still yields one zero-length segment so that the tile's
/// version can be delivered.
pub fn chunk_tile(tile: &MapTile, segment_bytes: usize) -> Result<Vec<Segment>, ProtocolError> {
    if segment_bytes == 0 {
        return Err(ProtocolError::Config("segment payload size must be at least 1 byte".into()));
    }
    let chunks: Vec<&[u8]> =
        if tile.payload.is_empty() { vec![&[][..]] } else { tile.payload.chunks(segment_bytes).collect() };
    let total = u32::try_from(chunks.len())
        .map_err(|_| ProtocolError::Config(format!("tile {} needs too many segments", tile.tile_id)))?;
    Ok(chunks
        .into_iter()
        .enumerate()
        .map(|(i, c)| Segment {
            tile_id: tile.tile_id,
            version: tile.version,
            seq_no: i as u32,
            total_segments: total,
            kind: tile.kind,
            bytes: c.to_vec(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentOutcome {
    /// Stored; the tile is still incomplete.
    Accepted,
    /// This segment completed the tile at the given version.
    Completed { version: u64 },
    /// Already held, either as a received part or as a completed tile.
    Duplicate,
    /// Older than a version already seen for this tile; dropped.
    Stale,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Pending {
    version: u64,
    total: u32,
    kind: PayloadKind,
    parts: BTreeMap<u32, Vec<u8>>,
}

/// Per-receiver segment reassembly across many tiles.
///
/// For each tile only the newest version is kept: a segment of a newer version
/// discards any partial older one, and segments older than what is held are
/// dropped. Completed tiles therefore only ever move forward in version.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Reassembler {
    complete: BTreeMap<CellId, MapTile>,
    pending: BTreeMap<CellId, Pending>,
}

impl Reassembler {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn accept(&mut self, seg: &Segment) -> Result<SegmentOutcome, ProtocolError> {
        if seg.total_segments == 0 || seg.seq_no >= seg.total_segments {
            return Err(ProtocolError::Conflict(format!(
                "tile {} v{}: seq_no {} outside total_segments {}",
                seg.tile_id, seg.version, seg.seq_no, seg.total_segments
            )));
        }
        if let Some(done) = self.complete.get(&seg.tile_id) {
            if seg.version < done.version {
                return Ok(SegmentOutcome::Stale);
            }
            if seg.version == done.version {
                return Ok(SegmentOutcome::Duplicate);
            }
        }
        let slot = self.pending.entry(seg.tile_id).or_insert_with(|| Pending {
            version: seg.version,
            total: seg.total_segments,
            kind: seg.kind,
            parts: BTreeMap::new(),
        });
        if seg.version < slot.version {
            return Ok(SegmentOutcome::Stale);
        }
        if seg.version > slot.version {
            *slot = Pending { version: seg.version, total: seg.total_segments, kind: seg.kind, parts: BTreeMap::new() };
        }
        if seg.total_segments != slot.total || seg.kind != slot.kind {
            return Err(ProtocolError::Conflict(format!(
                "tile {} v{}: segment says {} parts of {:?}, earlier segments said {} of {:?}",
                seg.tile_id, seg.version, seg.total_segments, seg.kind, slot.total, slot.kind
            )));
        }
        if let Some(held) = slot.parts.get(&seg.seq_no) {
            if *held != seg.bytes {
                return Err(ProtocolError::Conflict(format!(
                    "tile {} v{}: two different payloads for seq_no {}",
                    seg.tile_id, seg.version, seg.seq_no
                )));
            }
            return Ok(SegmentOutcome::Duplicate);
        }
        slot.parts.insert(seg.seq_no, seg.bytes.clone());
        if slot.parts.len() < slot.total as usize {
            return Ok(SegmentOutcome::Accepted);
        }
        let done = self.pending.remove(&seg.tile_id).expect("slot exists");
        let tile = MapTile {
            tile_id: seg.tile_id,
            version: done.version,
            kind: done.kind,
            payload: done.parts.into_values().flatten().collect(),
        };
        self.complete.insert(seg.tile_id, tile);
        Ok(SegmentOutcome::Completed { version: done.version })
    }

    pub fn tile(&self, id: CellId) -> Option<&MapTile> {
        self.complete.get(&id)
    }

    /// Completed tiles, newest version of each.
    pub fn tiles(&self) -> impl Iterator<Item = &MapTile> {
        self.complete.values()
    }

    /// Version and missing sequence numbers of an in-progress tile.
    pub fn missing(&self, id: CellId) -> Option<(u64, Vec<u32>)> {
        self.pending.get(&id).map(|p| (p.version, (0..p.total).filter(|s| !p.parts.contains_key(s)).collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reassembly {
    Complete(MapTile),
    Partial { tile_id: CellId, version: u64, missing: Vec<u32> },
}

/// Reassembles the segments of a single tile, in any order and with duplicates.
///
/// The newest version present wins; if it is incomplete the missing sequence
/// numbers are reported even when an older version is complete.
pub fn reassemble(segments: &[Segment]) -> Result<Reassembly, ProtocolError> {
    let first = segments.first().ok_or_else(|| ProtocolError::Conflict("no segments to reassemble".into()))?;
    let id = first.tile_id;
    let mut r = Reassembler::new();
    for s in segments {
        if s.tile_id != id {
            return Err(ProtocolError::Conflict(format!("segments mix tiles {} and {}", id, s.tile_id)));
        }
        r.accept(s)?;
    }
    match (r.missing(id), r.complete.remove(&id)) {
        (Some((version, missing)), _) => Ok(Reassembly::Partial { tile_id: id, version, missing }),
        (None, Some(tile)) => Ok(Reassembly::Complete(tile)),
        (None, None) => unreachable!("every accepted segment is pending or complete"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tile(len: usize, version: u64) -> MapTile {
        MapTile {
            tile_id: CellId::new(2, 1),
            version,
            kind: PayloadKind::Pointcloud,
            payload: (0..len).map(|i| (i * 7 + version as usize) as u8).collect(),
        }
    }

    #[test]
    fn empty_payload_is_one_empty_segment() {
        let segs = chunk_tile(&tile(0, 0), 300).unwrap();
        assert_eq!(segs.len(), 1);
        assert!(segs[0].bytes.is_empty());
        assert_eq!(segs[0].total_segments, 1);
        assert_eq!(reassemble(&segs).unwrap(), Reassembly::Complete(tile(0, 0)));
    }

    #[test]
    fn thousand_bytes_in_300_byte_segments() {
        let segs = chunk_tile(&tile(1000, 3), 300).unwrap();
        let lens: Vec<usize> = segs.iter().map(|s| s.bytes.len()).collect();
        assert_eq!(lens, [300, 300, 300, 100]);
        assert!(segs.iter().all(|s| s.total_segments == 4));
    }

    #[test]
    fn zero_segment_size_is_rejected() {
        assert!(chunk_tile(&tile(10, 0), 0).is_err());
    }

    #[test]
    fn reverse_order_with_duplicates() {
        let t = tile(1000, 1);
        let mut segs = chunk_tile(&t, 300).unwrap();
        segs.reverse();
        segs.push(segs[1].clone());
        assert_eq!(reassemble(&segs).unwrap(), Reassembly::Complete(t));
    }

    #[test]
    fn missing_parts_are_reported() {
        let segs = chunk_tile(&tile(1000, 1), 300).unwrap();
        let partial = [segs[0].clone(), segs[3].clone()];
        assert_eq!(
            reassemble(&partial).unwrap(),
            Reassembly::Partial { tile_id: CellId::new(2, 1), version: 1, missing: vec![1, 2] }
        );
    }

    #[test]
    fn newest_version_wins() {
        let old = chunk_tile(&tile(500, 1), 200).unwrap();
        let new = chunk_tile(&tile(500, 2), 200).unwrap();
        let mixed: Vec<Segment> =
            vec![old[0].clone(), new[0].clone(), old[1].clone(), new[1].clone(), old[2].clone(), new[2].clone()];
        assert_eq!(reassemble(&mixed).unwrap(), Reassembly::Complete(tile(500, 2)));

        let mut r = Reassembler::new();
        for s in &new {
            r.accept(s).unwrap();
        }
        assert_eq!(r.accept(&old[0]).unwrap(), SegmentOutcome::Stale);
        assert_eq!(r.accept(&new[1]).unwrap(), SegmentOutcome::Duplicate);
        assert_eq!(r.tile(CellId::new(2, 1)).unwrap().version, 2);
    }

    #[test]
    fn conflicting_totals_are_an_error() {
        let mut segs = chunk_tile(&tile(1000, 1), 300).unwrap();
        segs[2].total_segments = 5;
        assert!(matches!(reassemble(&segs), Err(ProtocolError::Conflict(_))));
    }

    #[test]
    fn seq_beyond_total_is_an_error() {
        let mut segs = chunk_tile(&tile(10, 1), 300).unwrap();
        segs[0].seq_no = 1;
        assert!(reassemble(&segs).is_err());
    }
}
