use crc::{Crc, CRC_16_IBM_3740};
use serde::{Deserialize, Serialize};

use super::ProtocolError;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xffff, no reflection, no xor-out.
const CCITT_FALSE: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

/// Encoded size: id, timestamp, three f32 kinematics, brake flag, CRC.
pub const REPORT_LEN: usize = 4 + 8 + 4 + 4 + 4 + 1 + 2;
pub const REPORT_BITS: usize = REPORT_LEN * 8;

/// A CAN-bus kinematic snapshot sent uplink by a vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleReport {
    pub vehicle_id: u32,
    pub timestamp_ms: u64,
    pub speed_mps: f32,
    pub acceleration_mps2: f32,
    pub deceleration_mps2: f32,
    pub brake_status: bool,
}

impl VehicleReport {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let bad = |field, reason| Err(ProtocolError::InvalidReport { field, reason });
        if !(self.speed_mps.is_finite() && self.speed_mps >= 0.0) {
            return bad("speed_mps", "must be finite and non-negative");
        }
        if !self.acceleration_mps2.is_finite() {
            return bad("acceleration_mps2", "must be finite");
        }
        if !(self.deceleration_mps2.is_finite() && self.deceleration_mps2 >= 0.0) {
            return bad("deceleration_mps2", "must be finite and non-negative");
        }
        Ok(())
    }
}

pub fn encode_vehicle_report(report: &VehicleReport) -> Result<[u8; REPORT_LEN], ProtocolError> {
    report.validate()?;
    let mut out = [0u8; REPORT_LEN];
    out[0..4].copy_from_slice(&report.vehicle_id.to_le_bytes());
    out[4..12].copy_from_slice(&report.timestamp_ms.to_le_bytes());
    out[12..16].copy_from_slice(&report.speed_mps.to_le_bytes());
    out[16..20].copy_from_slice(&report.acceleration_mps2.to_le_bytes());
    out[20..24].copy_from_slice(&report.deceleration_mps2.to_le_bytes());
    out[24] = u8::from(report.brake_status);
    let crc = CCITT_FALSE.checksum(&out[..REPORT_LEN - 2]);
    out[REPORT_LEN - 2..].copy_from_slice(&crc.to_le_bytes());
    Ok(out)
}

/// Decodes the first [`REPORT_LEN`] bytes of `bytes`, checking the CRC first.
pub fn decode_vehicle_report(bytes: &[u8]) -> Result<VehicleReport, ProtocolError> {
    if bytes.len() < REPORT_LEN {
        return Err(ProtocolError::Truncated { needed: REPORT_LEN, available: bytes.len() });
    }
    let bytes = &bytes[..REPORT_LEN];
    let stored = u16::from_le_bytes([bytes[REPORT_LEN - 2], bytes[REPORT_LEN - 1]]);
    let computed = CCITT_FALSE.checksum(&bytes[..REPORT_LEN - 2]);
    if stored != computed {
        return Err(ProtocolError::Corrupt { stored, computed });
    }
    let f32_at = |i: usize| f32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let brake_status = match bytes[24] {
        0 => false,
        1 => true,
        _ => return Err(ProtocolError::InvalidReport { field: "brake_status", reason: "flag byte must be 0 or 1" }),
    };
    let report = VehicleReport {
        vehicle_id: u32::from_le_bytes(bytes[0..4].try_into().unwrap()),
        timestamp_ms: u64::from_le_bytes(bytes[4..12].try_into().unwrap()),
        speed_mps: f32_at(12),
        acceleration_mps2: f32_at(16),
        deceleration_mps2: f32_at(20),
        brake_status,
    };
    report.validate()?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> VehicleReport {
        VehicleReport {
            vehicle_id: 7,
            timestamp_ms: 1_234_567,
            speed_mps: 3.5,
            acceleration_mps2: -1.25,
            deceleration_mps2: 1.25,
            brake_status: true,
        }
    }

    #[test]
    fn crc_check_value() {
        assert_eq!(CCITT_FALSE.checksum(b"123456789"), 0x29b1);
    }

    #[test]
    fn record_is_27_bytes() {
        assert_eq!(REPORT_LEN, 27);
        let bytes = encode_vehicle_report(&sample()).unwrap();
        assert_eq!(bytes.len(), 27);
        assert_eq!(&bytes[0..4], &[7, 0, 0, 0]);
        assert_eq!(bytes[24], 1);
    }

    #[test]
    fn roundtrip() {
        let r = sample();
        assert_eq!(decode_vehicle_report(&encode_vehicle_report(&r).unwrap()).unwrap(), r);
    }

    #[test]
    fn every_single_bit_flip_is_rejected() {
        let bytes = encode_vehicle_report(&sample()).unwrap();
        for bit in 0..REPORT_BITS {
            let mut b = bytes;
            b[bit / 8] ^= 0x80 >> (bit % 8);
            assert!(matches!(decode_vehicle_report(&b), Err(ProtocolError::Corrupt { .. })), "bit {bit}");
        }
    }

    #[test]
    fn short_buffer_is_truncation() {
        let bytes = encode_vehicle_report(&sample()).unwrap();
        assert_eq!(decode_vehicle_report(&bytes[..20]), Err(ProtocolError::Truncated { needed: 27, available: 20 }));
    }

    #[test]
    fn negative_deceleration_is_rejected() {
        let r = VehicleReport { deceleration_mps2: -0.1, ..sample() };
        assert!(encode_vehicle_report(&r).is_err());
    }
}
