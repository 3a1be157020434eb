//! Exchange structures between producer and consumer contexts.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FifoError {
    #[error("a slot is already open on this side")]
    AlreadyOpen,
    #[error("handle does not belong to the open slot")]
    StaleHandle,
    #[error("no slot can be opened for writing")]
    NoSlot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotState {
    Free,
    Writing,
    Finalized,
    Reading,
}

/// Handle to the slot currently open for writing.
#[derive(Debug, PartialEq, Eq)]
pub struct WriteSlot(usize);

/// Handle to the slot currently open for reading.
#[derive(Debug, PartialEq, Eq)]
pub struct ReadSlot(usize);

/// Fixed set of preallocated chunk slots handed between a sampling side
/// and a processing side without copying.
///
/// When the writer needs a slot and none is free, the most recently
/// finalized slot is reopened and its content sacrificed.
#[derive(Debug, Clone)]
pub struct ChunkFifo<T> {
    slots: Vec<T>,
    states: Vec<SlotState>,
    /// Finalized slots, oldest first.
    queue: std::collections::VecDeque<usize>,
    writing: Option<usize>,
    reading: Option<usize>,
    finalized: u64,
    overwritten: u64,
}

impl<T: Default> ChunkFifo<T> {
    pub fn new(slot_count: usize) -> Self {
        assert!(slot_count > 0);
        ChunkFifo {
            slots: (0..slot_count).map(|_| T::default()).collect(),
            states: vec![SlotState::Free; slot_count],
            queue: Default::default(),
            writing: None,
            reading: None,
            finalized: 0,
            overwritten: 0,
        }
    }
}

impl<T> ChunkFifo<T> {
    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn state(&self, slot: usize) -> SlotState {
        self.states[slot]
    }

    /// Finalized chunks waiting for the reader.
    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    /// Total chunks closed by the writer.
    pub fn finalized_count(&self) -> u64 {
        self.finalized
    }

    /// Finalized chunks that were reclaimed before being read.
    pub fn overwritten_count(&self) -> u64 {
        self.overwritten
    }

    pub fn open_write(&mut self) -> Result<WriteSlot, FifoError> {
        if self.writing.is_some() {
            return Err(FifoError::AlreadyOpen);
        }
        let slot = match self.states.iter().position(|&s| s == SlotState::Free) {
            Some(slot) => slot,
            None => {
                let slot = self.queue.pop_back().ok_or(FifoError::NoSlot)?;
                self.overwritten += 1;
                slot
            }
        };
        self.states[slot] = SlotState::Writing;
        self.writing = Some(slot);
        Ok(WriteSlot(slot))
    }

    pub fn write_slot(&mut self, handle: &WriteSlot) -> &mut T {
        assert_eq!(self.writing, Some(handle.0), "stale write handle");
        &mut self.slots[handle.0]
    }

    pub fn close_write(&mut self, handle: WriteSlot) -> Result<(), FifoError> {
        if self.writing != Some(handle.0) {
            return Err(FifoError::StaleHandle);
        }
        self.writing = None;
        self.states[handle.0] = SlotState::Finalized;
        self.queue.push_back(handle.0);
        self.finalized += 1;
        Ok(())
    }

    /// Abandons the slot open for writing without publishing it.
    pub fn cancel_write(&mut self, handle: WriteSlot) -> Result<(), FifoError> {
        if self.writing != Some(handle.0) {
            return Err(FifoError::StaleHandle);
        }
        self.writing = None;
        self.states[handle.0] = SlotState::Free;
        Ok(())
    }

    /// Opens the oldest finalized slot, or `Ok(None)` when nothing is pending.
    pub fn open_read(&mut self) -> Result<Option<ReadSlot>, FifoError> {
        if self.reading.is_some() {
            return Err(FifoError::AlreadyOpen);
        }
        Ok(self.queue.pop_front().map(|slot| {
            self.states[slot] = SlotState::Reading;
            self.reading = Some(slot);
            ReadSlot(slot)
        }))
    }

    pub fn read_slot(&self, handle: &ReadSlot) -> &T {
        assert_eq!(self.reading, Some(handle.0), "stale read handle");
        &self.slots[handle.0]
    }

    pub fn close_read(&mut self, handle: ReadSlot) -> Result<(), FifoError> {
        if self.reading != Some(handle.0) {
            return Err(FifoError::StaleHandle);
        }
        self.reading = None;
        self.states[handle.0] = SlotState::Free;
        Ok(())
    }
}

/// Bounded ring buffer for streaming. A push into a full buffer evicts the
/// oldest unread element.
#[derive(Debug, Clone)]
pub struct CircularFifo<T> {
    buf: Vec<Option<T>>,
    read: usize,
    len: usize,
    evicted: u64,
}

impl<T> CircularFifo<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        CircularFifo {
            buf: (0..capacity).map(|_| None).collect(),
            read: 0,
            len: 0,
            evicted: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.buf.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn evicted_count(&self) -> u64 {
        self.evicted
    }

    /// Appends `item`, returning the element evicted to make room.
    pub fn push(&mut self, item: T) -> Option<T> {
        let cap = self.capacity();
        let write = (self.read + self.len) % cap;
        let evicted = if self.len == cap {
            self.read = (self.read + 1) % cap;
            self.evicted += 1;
            self.buf[write].take()
        } else {
            self.len += 1;
            None
        };
        self.buf[write] = Some(item);
        evicted
    }

    pub fn pop(&mut self) -> Option<T> {
        if self.len == 0 {
            return None;
        }
        let item = self.buf[self.read].take();
        self.read = (self.read + 1) % self.capacity();
        self.len -= 1;
        item
    }

    pub fn clear(&mut self) {
        while self.pop().is_some() {}
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        (0..self.len).filter_map(move |i| self.buf[(self.read + i) % self.capacity()].as_ref())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(f: &mut ChunkFifo<u32>, v: u32) {
        let h = f.open_write().unwrap();
        *f.write_slot(&h) = v;
        f.close_write(h).unwrap();
    }

    fn read(f: &mut ChunkFifo<u32>) -> Option<u32> {
        let h = f.open_read().unwrap()?;
        let v = *f.read_slot(&h);
        f.close_read(h).unwrap();
        Some(v)
    }

    #[test]
    fn full_fifo_overwrites_last_written() {
        let mut f = ChunkFifo::new(2);
        write(&mut f, 1);
        write(&mut f, 2);
        write(&mut f, 3);
        assert_eq!(read(&mut f), Some(1));
        assert_eq!(read(&mut f), Some(3));
        assert_eq!(read(&mut f), None);
        assert_eq!(f.overwritten_count(), 1);
    }

    #[test]
    fn alternating_preserves_order() {
        let mut f = ChunkFifo::new(2);
        write(&mut f, 1);
        assert_eq!(read(&mut f), Some(1));
        write(&mut f, 2);
        assert_eq!(read(&mut f), Some(2));
    }

    #[test]
    fn double_open_is_rejected() {
        let mut f: ChunkFifo<u32> = ChunkFifo::new(3);
        let _w = f.open_write().unwrap();
        assert_eq!(f.open_write(), Err(FifoError::AlreadyOpen));
    }

    #[test]
    fn cancelled_write_is_not_published() {
        let mut f: ChunkFifo<u32> = ChunkFifo::new(1);
        let h = f.open_write().unwrap();
        f.cancel_write(h).unwrap();
        assert_eq!(f.state(0), SlotState::Free);
        assert_eq!(f.pending(), 0);
        assert_eq!(f.finalized_count(), 0);
    }

    #[test]
    fn single_slot_busy_reading() {
        let mut f = ChunkFifo::new(1);
        write(&mut f, 1);
        let r = f.open_read().unwrap().unwrap();
        assert_eq!(f.open_write(), Err(FifoError::NoSlot));
        f.close_read(r).unwrap();
        assert!(f.open_write().is_ok());
    }

    #[test]
    fn handles_are_zero_copy() {
        let mut f: ChunkFifo<[u8; 32]> = ChunkFifo::new(2);
        let h = f.open_write().unwrap();
        let p1 = f.write_slot(&h).as_ptr();
        f.write_slot(&h)[0] = 7;
        let p2 = f.write_slot(&h).as_ptr();
        assert_eq!(p1, p2);
        f.close_write(h).unwrap();
        let r = f.open_read().unwrap().unwrap();
        assert_eq!(f.read_slot(&r).as_ptr(), p1);
    }

    #[test]
    fn circular_evicts_oldest() {
        let mut c = CircularFifo::new(3);
        for i in 1..=4 {
            c.push(i);
        }
        assert_eq!(c.iter().copied().collect::<Vec<_>>(), [2, 3, 4]);
        assert_eq!((c.pop(), c.pop(), c.pop(), c.pop()), (Some(2), Some(3), Some(4), None));
        assert_eq!(c.evicted_count(), 1);
    }
}
