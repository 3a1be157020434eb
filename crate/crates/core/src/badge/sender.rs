//! Framing and the byte FIFOs between the application and the 20-byte
//! transport.
//!
//! A frame is a 2-byte little-endian length followed by that many bytes of
//! an encoded message. The TX side is sliced into packets without regard to
//! frame boundaries; the RX side reassembles by length.

use std::collections::VecDeque;

use thiserror::Error;

/// Largest packet the transport accepts.
pub const MTU: usize = 20;
pub const FRAME_HEADER: usize = 2;
pub const DEFAULT_TX_CAPACITY: usize = 1024;
pub const DEFAULT_RX_CAPACITY: usize = 512;

pub fn frame(payload: &[u8]) -> Vec<u8> {
    assert!(payload.len() <= u16::MAX as usize, "frame payload too long");
    let mut out = Vec::with_capacity(FRAME_HEADER + payload.len());
    out.extend_from_slice(&(payload.len() as u16).to_le_bytes());
    out.extend_from_slice(payload);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("announced frame length {0} exceeds the receive buffer")]
    TooLong(usize),
    #[error("receive buffer overflow")]
    Overflow,
}

/// Reassembles frames from arbitrarily sliced input.
#[derive(Debug, Clone)]
pub struct FrameReader {
    buf: VecDeque<u8>,
    capacity: usize,
}

impl Default for FrameReader {
    fn default() -> Self {
        FrameReader::new(DEFAULT_RX_CAPACITY)
    }
}

impl FrameReader {
    /// `capacity` bounds the buffered bytes, header included.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > FRAME_HEADER);
        FrameReader {
            buf: VecDeque::new(),
            capacity,
        }
    }

    pub fn push(&mut self, bytes: &[u8]) -> Result<(), FrameError> {
        if self.buf.len() + bytes.len() > self.capacity {
            return Err(FrameError::Overflow);
        }
        self.buf.extend(bytes);
        Ok(())
    }

    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    pub fn clear(&mut self) {
        self.buf.clear();
    }

    /// Next complete frame payload, `Ok(None)` while incomplete.
    pub fn next_frame(&mut self) -> Result<Option<Vec<u8>>, FrameError> {
        if self.buf.len() < FRAME_HEADER {
            return Ok(None);
        }
        let len = u16::from_le_bytes([self.buf[0], self.buf[1]]) as usize;
        if FRAME_HEADER + len > self.capacity {
            return Err(FrameError::TooLong(len));
        }
        if self.buf.len() < FRAME_HEADER + len {
            return Ok(None);
        }
        self.buf.drain(..FRAME_HEADER);
        Ok(Some(self.buf.drain(..len).collect()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("TX FIFO has {free} bytes free, frame needs {needed}")]
pub struct TxFull {
    pub free: usize,
    pub needed: usize,
}

/// TX and RX FIFOs of the badge side of a connection.
#[derive(Debug, Clone)]
pub struct Sender {
    tx: VecDeque<u8>,
    tx_capacity: usize,
    rx: FrameReader,
    sent_bytes: u64,
}

impl Default for Sender {
    fn default() -> Self {
        Sender::new(DEFAULT_TX_CAPACITY, DEFAULT_RX_CAPACITY)
    }
}

impl Sender {
    pub fn new(tx_capacity: usize, rx_capacity: usize) -> Self {
        Sender {
            tx: VecDeque::new(),
            tx_capacity,
            rx: FrameReader::new(rx_capacity),
            sent_bytes: 0,
        }
    }

    pub fn tx_capacity(&self) -> usize {
        self.tx_capacity
    }

    pub fn tx_len(&self) -> usize {
        self.tx.len()
    }

    pub fn tx_free(&self) -> usize {
        self.tx_capacity - self.tx.len()
    }

    /// Queues a whole frame or nothing.
    pub fn push_frame(&mut self, payload: &[u8]) -> Result<(), TxFull> {
        let needed = FRAME_HEADER + payload.len();
        if needed > self.tx_free() {
            return Err(TxFull {
                free: self.tx_free(),
                needed,
            });
        }
        self.tx.extend(frame(payload));
        Ok(())
    }

    /// Up to [`MTU`] bytes from the head of the TX FIFO, left in place until
    /// [`Sender::commit_slice`] confirms the transport took them.
    pub fn peek_slice(&self) -> Option<Vec<u8>> {
        if self.tx.is_empty() {
            return None;
        }
        Some(self.tx.iter().take(MTU).copied().collect())
    }

    pub fn commit_slice(&mut self, len: usize) {
        assert!(len <= self.tx.len().min(MTU));
        self.tx.drain(..len);
        self.sent_bytes += len as u64;
    }

    /// Removes and returns the next slice.
    pub fn take_slice(&mut self) -> Option<Vec<u8>> {
        let s = self.peek_slice()?;
        self.commit_slice(s.len());
        Some(s)
    }

    pub fn sent_bytes(&self) -> u64 {
        self.sent_bytes
    }

    pub fn rx(&mut self) -> &mut FrameReader {
        &mut self.rx
    }

    /// Drops everything queued in both directions.
    pub fn reset(&mut self) {
        self.tx.clear();
        self.rx.clear();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_header_is_little_endian_length() {
        assert_eq!(frame(&[0xAA; 121])[..2], [0x79, 0x00]);
        assert_eq!(frame(&[]), vec![0, 0]);
    }

    #[test]
    fn hundred_byte_frame_takes_six_slices() {
        let mut s = Sender::default();
        s.push_frame(&[1; 98]).unwrap();
        let mut sizes = Vec::new();
        while let Some(p) = s.take_slice() {
            sizes.push(p.len());
        }
        assert_eq!(sizes, [20, 20, 20, 20, 20]);
        assert_eq!(s.sent_bytes(), 100);
    }

    #[test]
    fn push_is_all_or_nothing() {
        let mut s = Sender::new(10, 64);
        assert_eq!(s.push_frame(&[0; 9]), Err(TxFull { free: 10, needed: 11 }));
        assert_eq!(s.tx_len(), 0);
        s.push_frame(&[0; 8]).unwrap();
        assert_eq!(s.tx_free(), 0);
    }

    #[test]
    fn reader_waits_for_complete_frames() {
        let mut r = FrameReader::new(64);
        r.push(&[3, 0, 1]).unwrap();
        assert_eq!(r.next_frame(), Ok(None));
        r.push(&[2, 3, 1, 0]).unwrap();
        assert_eq!(r.next_frame(), Ok(Some(vec![1, 2, 3])));
        assert_eq!(r.next_frame(), Ok(None));
        r.push(&[9]).unwrap();
        assert_eq!(r.next_frame(), Ok(Some(vec![9])));
    }

    #[test]
    fn reader_rejects_oversized_frames() {
        let mut r = FrameReader::new(16);
        r.push(&[100, 0]).unwrap();
        assert_eq!(r.next_frame(), Err(FrameError::TooLong(100)));
        assert_eq!(r.push(&[0; 15]), Err(FrameError::Overflow));
    }
}
