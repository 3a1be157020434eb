//! Chunks in and out of the filesystem: tinybuf encoding on the way in, a
//! timestamp search and forward stream on the way out.

use thiserror::Error;

use super::chunks::{Chunk, ChunkError, Source};
use super::proto::Timestamp;
use crate::seqfs::{ElementRef, Filesystem, FsError, PartitionConfig, PartitionHandle};
use crate::vmem::{VirtualStorage, FLASH_PAGE_SIZE};

/// Partition of each source in the default layout: the three bulk sources
/// fill the flash, events and battery readings go to EEPROM.
pub fn default_partitions() -> [(Source, PartitionConfig); 5] {
    [
        (Source::Microphone, PartitionConfig::dynamic(1, 128 * FLASH_PAGE_SIZE, true)),
        (Source::Scan, PartitionConfig::dynamic(2, 64 * FLASH_PAGE_SIZE, true)),
        (Source::Accel, PartitionConfig::dynamic(3, 64 * FLASH_PAGE_SIZE, true)),
        (Source::AccelEvent, PartitionConfig::dynamic(4, 16 * 1024, true)),
        (Source::Battery, PartitionConfig::dynamic(5, 16 * 1024, true)),
    ]
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Fs(#[from] FsError),
    #[error(transparent)]
    Chunk(#[from] ChunkError),
}

/// Position of a running query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cursor {
    source: Source,
    next: Option<ElementRef>,
    last_ms: Option<i64>,
    since_ms: i64,
    /// Chunks delivered so far.
    pub chunks: u32,
    /// Elements skipped because they failed CRC or decoding.
    pub corrupted: u32,
}

impl Cursor {
    pub fn source(&self) -> Source {
        self.source
    }

    pub fn is_done(&self) -> bool {
        self.next.is_none()
    }
}

/// Result of a complete query.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub chunks: Vec<Chunk>,
    pub corrupted: u32,
}

#[derive(Debug)]
pub struct Storer {
    fs: Filesystem,
    handles: [PartitionHandle; 5],
    stored: [u64; 5],
    failed: [u64; 5],
    corrupted: u64,
}

impl Storer {
    /// Registers (and thereby mounts) the default partitions.
    pub fn new(storage: VirtualStorage) -> Result<Storer, FsError> {
        Storer::with_partitions(storage, default_partitions())
    }

    pub fn with_partitions(storage: VirtualStorage, parts: [(Source, PartitionConfig); 5]) -> Result<Storer, FsError> {
        Storer::build(storage, parts.map(|(s, cfg)| (s, None, cfg)))
    }

    /// Places each partition at an explicit start address. Addresses must
    /// increase in the given order.
    pub fn with_layout(storage: VirtualStorage, parts: [(Source, usize, PartitionConfig); 5]) -> Result<Storer, FsError> {
        Storer::build(storage, parts.map(|(s, at, cfg)| (s, Some(at), cfg)))
    }

    fn build(storage: VirtualStorage, parts: [(Source, Option<usize>, PartitionConfig); 5]) -> Result<Storer, FsError> {
        let mut fs = Filesystem::new(storage);
        let mut handles = [None; 5];
        for (source, at, cfg) in parts {
            if let Some(at) = at {
                fs.skip_to(at);
            }
            handles[source.index()] = Some(fs.register(cfg)?);
        }
        let handles = handles.map(|h| h.expect("every source has a partition"));
        Ok(Storer {
            fs,
            handles,
            stored: [0; 5],
            failed: [0; 5],
            corrupted: 0,
        })
    }

    pub fn fs(&self) -> &Filesystem {
        &self.fs
    }

    pub fn fs_mut(&mut self) -> &mut Filesystem {
        &mut self.fs
    }

    pub fn storage(&self) -> &VirtualStorage {
        self.fs.storage()
    }

    pub fn into_storage(self) -> VirtualStorage {
        self.fs.into_storage()
    }

    pub fn handle(&self, source: Source) -> PartitionHandle {
        self.handles[source.index()]
    }

    /// Chunks stored per source since construction.
    pub fn stored_count(&self, source: Source) -> u64 {
        self.stored[source.index()]
    }

    /// Stores that failed per source since construction.
    pub fn failed_count(&self, source: Source) -> u64 {
        self.failed[source.index()]
    }

    /// Corrupted elements skipped by queries since construction.
    pub fn corrupted_count(&self) -> u64 {
        self.corrupted
    }

    /// Encodes and appends a chunk; returns its record number.
    pub fn store(&mut self, chunk: &Chunk) -> Result<u16, StoreError> {
        let i = chunk.source().index();
        let result = chunk
            .encode()
            .map_err(StoreError::from)
            .and_then(|bytes| Ok(self.fs.store(self.handles[i], &bytes)?));
        match &result {
            Ok(_) => self.stored[i] += 1,
            Err(_) => self.failed[i] += 1,
        }
        result
    }

    /// Starts a query for the chunks of `source` from the oldest one whose
    /// timestamp is at or after `since`.
    pub fn query(&self, source: Source, since: &Timestamp) -> Result<Cursor, FsError> {
        let since_ms = since.as_millis();
        let next = self.locate(source, |ms| ms >= since_ms)?;
        Ok(Cursor {
            source,
            next,
            last_ms: None,
            since_ms,
            chunks: 0,
            corrupted: 0,
        })
    }

    /// Next chunk of a query, skipping (and counting) corrupted elements.
    pub fn next(&mut self, cursor: &mut Cursor) -> Result<Option<Chunk>, FsError> {
        let h = self.handle(cursor.source);
        while let Some(e) = cursor.next.take() {
            match self.fs.read(h, &e) {
                Ok(bytes) => {
                    cursor.next = self.successor(cursor, &e)?;
                    match Chunk::decode(cursor.source, &bytes) {
                        Ok(chunk) => {
                            cursor.last_ms = Some(chunk.timestamp().as_millis());
                            cursor.chunks += 1;
                            return Ok(Some(chunk));
                        }
                        Err(_) => self.count_corrupted(cursor),
                    }
                }
                Err(FsError::Corrupted { .. }) => {
                    self.count_corrupted(cursor);
                    cursor.next = self.successor(cursor, &e)?;
                }
                Err(FsError::Stale) => cursor.next = self.relocate(cursor)?,
                Err(err) => return Err(err),
            }
        }
        Ok(None)
    }

    /// Runs a whole query.
    pub fn query_all(&mut self, source: Source, since: &Timestamp) -> Result<QueryResult, FsError> {
        let mut cursor = self.query(source, since)?;
        let mut chunks = Vec::new();
        while let Some(c) = self.next(&mut cursor)? {
            chunks.push(c);
        }
        Ok(QueryResult {
            chunks,
            corrupted: cursor.corrupted,
        })
    }

    fn count_corrupted(&mut self, cursor: &mut Cursor) {
        cursor.corrupted += 1;
        self.corrupted += 1;
    }

    fn successor(&self, cursor: &Cursor, e: &ElementRef) -> Result<Option<ElementRef>, FsError> {
        match self.fs.next(self.handle(cursor.source), e) {
            Ok(n) => Ok(Some(n)),
            Err(FsError::EndReached) => Ok(None),
            Err(FsError::Stale) => self.relocate(cursor),
            Err(err) => Err(err),
        }
    }

    /// Finds where to continue after the element under the cursor was
    /// overwritten.
    fn relocate(&self, cursor: &Cursor) -> Result<Option<ElementRef>, FsError> {
        match cursor.last_ms {
            Some(last) => self.locate(cursor.source, |ms| ms > last),
            None => {
                let since = cursor.since_ms;
                self.locate(cursor.source, |ms| ms >= since)
            }
        }
    }

    /// Walks back from the newest element while `wanted(timestamp)` holds
    /// and returns the last element visited that qualified. Corrupted
    /// elements do not stop the walk; the forward pass counts them.
    fn locate(&self, source: Source, wanted: impl Fn(i64) -> bool) -> Result<Option<ElementRef>, FsError> {
        let h = self.handle(source);
        let mut e = match self.fs.latest(h) {
            Ok(e) => e,
            Err(FsError::Empty) => return Ok(None),
            Err(err) => return Err(err),
        };
        let mut first = None;
        loop {
            let qualifies = match self.fs.read(h, &e) {
                Ok(bytes) => Chunk::decode(source, &bytes).map_or(true, |c| wanted(c.timestamp().as_millis())),
                Err(FsError::Corrupted { .. }) => true,
                Err(err) => return Err(err),
            };
            if !qualifies {
                return Ok(first);
            }
            first = Some(e);
            e = match self.fs.prev(h, &e) {
                Ok(p) => p,
                Err(FsError::BeginReached) => return Ok(first),
                Err(err) => return Err(err),
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::badge::proto::{BatteryChunk, MicrophoneChunk};

    fn battery(ms: i64, v: f32) -> Chunk {
        Chunk::Battery(BatteryChunk {
            timestamp: Timestamp::from_millis(ms),
            voltage: v,
        })
    }

    #[test]
    fn default_layout_fills_flash_and_fits_eeprom() {
        let storer = Storer::new(VirtualStorage::default()).unwrap();
        let fs = storer.fs();
        assert_eq!(fs.address_range(storer.handle(Source::Accel)).unwrap().end, 256 * 1024);
        assert_eq!(fs.address_range(storer.handle(Source::AccelEvent)).unwrap().start, 256 * 1024);
    }

    #[test]
    fn full_mic_chunk_occupies_127_bytes() {
        let mut storer = Storer::new(VirtualStorage::default()).unwrap();
        let chunk = Chunk::Microphone(MicrophoneChunk {
            timestamp: Timestamp::from_millis(5000),
            sample_period_ms: 50,
            data: vec![7; 112],
        });
        assert_eq!(chunk.encode().unwrap().len(), 121);
        storer.store(&chunk).unwrap();
        storer.store(&chunk).unwrap();
        let h = storer.handle(Source::Microphone);
        let els = storer.fs().elements(h).unwrap();
        assert_eq!(els[1].addr - els[0].addr, 127);
    }

    #[test]
    fn query_since_examples() {
        let mut s = Storer::new(VirtualStorage::default()).unwrap();
        for t in 1..=3 {
            s.store(&battery(t * 1000, t as f32)).unwrap();
        }
        let all = s.query_all(Source::Battery, &Timestamp::default()).unwrap();
        assert_eq!(all.chunks.len(), 3);
        let tail = s.query_all(Source::Battery, &Timestamp::from_millis(2000)).unwrap();
        assert_eq!(tail.chunks, vec![battery(2000, 2.0), battery(3000, 3.0)]);
        let none = s.query_all(Source::Battery, &Timestamp::from_millis(9000)).unwrap();
        assert!(none.chunks.is_empty());
        let empty = s.query_all(Source::Microphone, &Timestamp::default()).unwrap();
        assert!(empty.chunks.is_empty());
        assert_eq!(s.stored_count(Source::Battery), 3);
    }

    #[test]
    fn corrupted_elements_are_skipped_and_counted() {
        let mut s = Storer::new(VirtualStorage::default()).unwrap();
        for t in 1..=3 {
            s.store(&battery(t * 1000, 3.0)).unwrap();
        }
        let h = s.handle(Source::Battery);
        let middle = s.fs().elements(h).unwrap()[1];
        // Flip a payload byte in EEPROM behind the filesystem's back.
        let addr = middle.addr + 6;
        let mut b = s.storage().read_vec(addr, 1).unwrap();
        b[0] ^= 0x40;
        s.fs_mut().storage_mut().store(addr, &b).unwrap();
        let r = s.query_all(Source::Battery, &Timestamp::default()).unwrap();
        assert_eq!(r.chunks, vec![battery(1000, 3.0), battery(3000, 3.0)]);
        assert_eq!(r.corrupted, 1);
        assert_eq!(s.corrupted_count(), 1);
    }

    #[test]
    fn cursor_survives_overwrite_of_its_position() {
        let parts = [
            (Source::Microphone, PartitionConfig::dynamic(1, 128 * FLASH_PAGE_SIZE, true)),
            (Source::Scan, PartitionConfig::dynamic(2, 64 * FLASH_PAGE_SIZE, true)),
            (Source::Accel, PartitionConfig::dynamic(3, 64 * FLASH_PAGE_SIZE, true)),
            (Source::AccelEvent, PartitionConfig::dynamic(4, 1024, true)),
            (Source::Battery, PartitionConfig::dynamic(5, 200, true)),
        ];
        let mut s = Storer::with_partitions(VirtualStorage::default(), parts).unwrap();
        for t in 0..8 {
            s.store(&battery(t * 1000, 3.0)).unwrap();
        }
        let mut cursor = s.query(Source::Battery, &Timestamp::default()).unwrap();
        let first = s.next(&mut cursor).unwrap().unwrap();
        // Keep storing until everything the cursor pointed at is gone.
        for t in 8..20 {
            s.store(&battery(t * 1000, 3.0)).unwrap();
        }
        let mut seen = vec![first.timestamp().as_millis()];
        while let Some(c) = s.next(&mut cursor).unwrap() {
            seen.push(c.timestamp().as_millis());
        }
        assert!(seen.windows(2).all(|w| w[0] < w[1]), "{seen:?}");
        assert_eq!(*seen.last().unwrap(), 19_000);
    }
}
