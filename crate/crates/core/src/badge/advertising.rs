//! Advertising packet broadcast every 200 ms.
//!
//! Layout (25 bytes, within the 31-byte advertising budget):
//!
//! | bytes | content |
//! |---|---|
//! | `02 01 06` | flags: LE general discoverable, no BR/EDR |
//! | `06 09 'H' 'D' 'B' 'D' 'G'` | complete local name |
//! | `0E FF` | manufacturer specific data, 13 bytes follow |
//! | `FF FF` | company id (reserved test value) |
//! | 2 | badge id, little-endian |
//! | 1 | group |
//! | 6 | MAC address |
//! | 1 | battery byte `V·100 − 100` |
//! | 1 | status flags |

use thiserror::Error;

pub const DEVICE_NAME: &[u8; 5] = b"HDBDG";
pub const ADVERTISING_PERIOD_MS: u64 = 200;
pub const MAX_ADVERTISING_LEN: usize = 31;
pub const COMPANY_ID: u16 = 0xFFFF;
pub const ADVERTISING_LEN: usize = 25;

const AD_FLAGS: u8 = 0x01;
const AD_COMPLETE_NAME: u8 = 0x09;
const AD_MANUFACTURER: u8 = 0xFF;
const MANUFACTURER_LEN: usize = 13;

/// Status byte of the advertising packet and the status response.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct StatusFlags(pub u8);

impl StatusFlags {
    pub const SYNCED: u8 = 1 << 0;
    pub const MICROPHONE: u8 = 1 << 1;
    pub const SCAN: u8 = 1 << 2;
    pub const ACCEL: u8 = 1 << 3;
    pub const ACCEL_EVENT: u8 = 1 << 4;
    pub const BATTERY: u8 = 1 << 5;

    /// Bit of a recording source (`Source as usize` order).
    pub fn source_bit(index: usize) -> u8 {
        assert!(index < 5);
        1 << (index + 1)
    }

    pub fn contains(self, bits: u8) -> bool {
        self.0 & bits == bits
    }

    pub fn set(&mut self, bits: u8, on: bool) {
        if on {
            self.0 |= bits;
        } else {
            self.0 &= !bits;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AdvertisingPacket {
    pub id: u16,
    pub group: u8,
    pub mac: [u8; 6],
    pub battery: u8,
    pub status: StatusFlags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum AdvertisingError {
    #[error("advertising data is malformed")]
    Malformed,
    #[error("not a badge advertisement")]
    NotABadge,
}

impl AdvertisingPacket {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(ADVERTISING_LEN);
        out.extend_from_slice(&[2, AD_FLAGS, 0x06]);
        out.push(1 + DEVICE_NAME.len() as u8);
        out.push(AD_COMPLETE_NAME);
        out.extend_from_slice(DEVICE_NAME);
        out.push(1 + MANUFACTURER_LEN as u8);
        out.push(AD_MANUFACTURER);
        out.extend_from_slice(&COMPANY_ID.to_le_bytes());
        out.extend_from_slice(&self.id.to_le_bytes());
        out.push(self.group);
        out.extend_from_slice(&self.mac);
        out.push(self.battery);
        out.push(self.status.0);
        debug_assert_eq!(out.len(), ADVERTISING_LEN);
        out
    }

    /// Parses the AD structures and picks out the badge fields. Unknown AD
    /// types are skipped.
    pub fn decode(data: &[u8]) -> Result<AdvertisingPacket, AdvertisingError> {
        if data.len() > MAX_ADVERTISING_LEN {
            return Err(AdvertisingError::Malformed);
        }
        let mut name_ok = false;
        let mut payload = None;
        let mut rest = data;
        while let Some((&len, tail)) = rest.split_first() {
            let len = len as usize;
            if len == 0 || tail.len() < len {
                return Err(AdvertisingError::Malformed);
            }
            let (ty, body) = (tail[0], &tail[1..len]);
            match ty {
                AD_COMPLETE_NAME => name_ok = body == DEVICE_NAME,
                AD_MANUFACTURER if body.len() == MANUFACTURER_LEN => payload = Some(body),
                _ => {}
            }
            rest = &tail[len..];
        }
        let p = payload.filter(|_| name_ok).ok_or(AdvertisingError::NotABadge)?;
        if u16::from_le_bytes([p[0], p[1]]) != COMPANY_ID {
            return Err(AdvertisingError::NotABadge);
        }
        Ok(AdvertisingPacket {
            id: u16::from_le_bytes([p[2], p[3]]),
            group: p[4],
            mac: p[5..11].try_into().unwrap(),
            battery: p[11],
            status: StatusFlags(p[12]),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> AdvertisingPacket {
        AdvertisingPacket {
            id: 0x1234,
            group: 7,
            mac: [0xC0, 1, 2, 3, 4, 5],
            battery: 200,
            status: StatusFlags(StatusFlags::SYNCED | StatusFlags::SCAN),
        }
    }

    #[test]
    fn layout_is_bit_exact() {
        let bytes = sample().encode();
        assert_eq!(
            bytes,
            [
                0x02, 0x01, 0x06, 0x06, 0x09, b'H', b'D', b'B', b'D', b'G', 0x0E, 0xFF, 0xFF, 0xFF, 0x34, 0x12, 7, 0xC0,
                1, 2, 3, 4, 5, 200, 0b101
            ]
        );
        assert!(bytes.len() <= MAX_ADVERTISING_LEN);
    }

    #[test]
    fn decode_round_trips_and_rejects_strangers() {
        let p = sample();
        assert_eq!(AdvertisingPacket::decode(&p.encode()), Ok(p));
        let mut other = p.encode();
        other[5] = b'X';
        assert_eq!(AdvertisingPacket::decode(&other), Err(AdvertisingError::NotABadge));
        assert_eq!(AdvertisingPacket::decode(&[5, 1]), Err(AdvertisingError::Malformed));
    }

    #[test]
    fn source_bits_follow_the_status_table() {
        assert_eq!(StatusFlags::source_bit(0), StatusFlags::MICROPHONE);
        assert_eq!(StatusFlags::source_bit(4), StatusFlags::BATTERY);
        let mut f = StatusFlags::default();
        f.set(StatusFlags::ACCEL, true);
        assert!(f.contains(StatusFlags::ACCEL));
        f.set(StatusFlags::ACCEL, false);
        assert_eq!(f.0, 0);
    }
}
