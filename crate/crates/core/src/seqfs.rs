//! Sequential log filesystem over [`VirtualStorage`].
//!
//! Each partition is a ring of elements written back to back. An element is
//! a small header followed by its payload:
//!
//! ```text
//! rec:u16 | xor_len:u16 (dynamic only) | crc:u16 (if enabled) | payload
//! ```
//!
//! `xor_len` is the XOR of the previous and the current payload length, so
//! the list can be walked in both directions from any element whose length
//! is known. The first element of every lap is preceded by a 14-byte
//! metadata block that records the partition and the address of the last
//! element of the previous lap. A separate swap area at the head of the
//! partition keeps a backup of the lap being closed while the metadata is
//! rewritten.
//!
//! The byte-level layout and the crash-safety argument are in
//! `docs/seqfs-layout.md`.

use crc::{Crc, CRC_16_IBM_3740};
use thiserror::Error;

use crate::vmem::{MemError, Unit, VirtualStorage};

pub const METADATA_SIZE: usize = 14;
pub const BACKUP_SIZE: usize = 20;
/// Swap area size for partitions that live entirely in EEPROM. Partitions
/// touching flash reserve one full page instead.
pub const EEPROM_SWAP_SIZE: usize = 32;
/// Record numbers count modulo this value; `0xFFFF` never names an element.
pub const REC_MODULUS: u32 = 0xFFFF;
/// Marker written after the newest element; never a valid record number.
pub const END_MARKER: u16 = 0xFFFF;
pub const NO_ADDRESS: u32 = 0xFFFF_FFFF;
/// Upper bound on elements in one lap, keeping record numbers of two
/// consecutive laps distinct.
pub const MAX_ELEMENTS_PER_LAP: usize = 32_767;

const CRC16: Crc<u16> = Crc::<u16>::new(&CRC_16_IBM_3740);

/// CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection).
pub fn crc16(data: &[u8]) -> u16 {
    CRC16.checksum(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Static { element_size: usize },
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConfig {
    pub id: u16,
    pub size: usize,
    pub layout: Layout,
    pub crc: bool,
}

impl PartitionConfig {
    pub fn dynamic(id: u16, size: usize, crc: bool) -> Self {
        PartitionConfig {
            id,
            size,
            layout: Layout::Dynamic,
            crc,
        }
    }

    pub fn fixed(id: u16, size: usize, element_size: usize, crc: bool) -> Self {
        PartitionConfig {
            id,
            size,
            layout: Layout::Static { element_size },
            crc,
        }
    }

    /// Element header size: 2, 4, 4 or 6 bytes.
    pub fn header_size(&self) -> usize {
        2 + if self.layout == Layout::Dynamic { 2 } else { 0 } + if self.crc { 2 } else { 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsError {
    #[error(transparent)]
    Mem(#[from] MemError),
    #[error("partition needs {requested} bytes but only {available} remain")]
    StorageExhausted { requested: usize, available: usize },
    #[error("partition id {0:#06x} already registered")]
    DuplicatePartition(u16),
    #[error("invalid partition configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("partitions touching flash must start and end on page boundaries")]
    UnalignedFlashPartition,
    #[error("payload of {len} bytes exceeds the limit of {max}")]
    PayloadTooLarge { len: usize, max: usize },
    #[error("static partition expects {expected}-byte elements, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },
    #[error("unknown partition handle")]
    UnknownPartition,
    #[error("partition is empty")]
    Empty,
    #[error("no older element")]
    BeginReached,
    #[error("no newer element")]
    EndReached,
    #[error("element {rec} failed its CRC check")]
    Corrupted { rec: u16 },
    #[error("element is no longer stored")]
    Stale,
}

/// Handle returned by [`Filesystem::register`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartitionHandle(usize);

/// Position of one stored element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementRef {
    /// Address of the element header.
    pub addr: usize,
    /// Payload length.
    pub len: usize,
    pub rec: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Header {
    rec: u16,
    xor_len: u16,
    crc: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Metadata {
    id: u16,
    size: u32,
    last_addr: u32,
    first_len: u16,
}

impl Metadata {
    fn encode(&self) -> [u8; METADATA_SIZE] {
        let mut b = [0u8; METADATA_SIZE];
        b[0..2].copy_from_slice(&self.id.to_le_bytes());
        b[2..6].copy_from_slice(&self.size.to_le_bytes());
        b[6..10].copy_from_slice(&self.last_addr.to_le_bytes());
        b[10..12].copy_from_slice(&self.first_len.to_le_bytes());
        let crc = crc16(&b[..12]);
        b[12..14].copy_from_slice(&crc.to_le_bytes());
        b
    }

    fn decode(b: &[u8]) -> Option<Metadata> {
        let crc = u16::from_le_bytes([b[12], b[13]]);
        (crc16(&b[..12]) == crc).then(|| Metadata {
            id: u16::from_le_bytes([b[0], b[1]]),
            size: u32::from_le_bytes(b[2..6].try_into().unwrap()),
            last_addr: u32::from_le_bytes(b[6..10].try_into().unwrap()),
            first_len: u16::from_le_bytes([b[10], b[11]]),
        })
    }
}

/// Copy of the lap being closed, written to the swap area before the
/// metadata block is invalidated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Backup {
    id: u16,
    size: u32,
    last_addr: u32,
    last_len: u16,
    last_rec: u16,
    /// Elements of the backed-up lap starting below this address may be
    /// damaged by the lap that replaces them.
    floor: u32,
}

impl Backup {
    fn encode(&self) -> [u8; BACKUP_SIZE] {
        let mut b = [0u8; BACKUP_SIZE];
        b[0..2].copy_from_slice(&self.id.to_le_bytes());
        b[2..6].copy_from_slice(&self.size.to_le_bytes());
        b[6..10].copy_from_slice(&self.last_addr.to_le_bytes());
        b[10..12].copy_from_slice(&self.last_len.to_le_bytes());
        b[12..14].copy_from_slice(&self.last_rec.to_le_bytes());
        b[14..18].copy_from_slice(&self.floor.to_le_bytes());
        let crc = crc16(&b[..18]);
        b[18..20].copy_from_slice(&crc.to_le_bytes());
        b
    }

    fn decode(b: &[u8]) -> Option<Backup> {
        let crc = u16::from_le_bytes([b[18], b[19]]);
        (crc16(&b[..18]) == crc).then(|| Backup {
            id: u16::from_le_bytes([b[0], b[1]]),
            size: u32::from_le_bytes(b[2..6].try_into().unwrap()),
            last_addr: u32::from_le_bytes(b[6..10].try_into().unwrap()),
            last_len: u16::from_le_bytes([b[10], b[11]]),
            last_rec: u16::from_le_bytes([b[12], b[13]]),
            floor: u32::from_le_bytes(b[14..18].try_into().unwrap()),
        })
    }
}

fn rec_next(rec: u16) -> u16 {
    ((rec as u32 + 1) % REC_MODULUS) as u16
}

fn rec_prev(rec: u16) -> u16 {
    ((rec as u32 + REC_MODULUS - 1) % REC_MODULUS) as u16
}

/// The previous lap: a chain walked backwards from `last` down to `oldest`.
#[derive(Debug, Clone, Copy)]
struct Older {
    last: ElementRef,
    oldest: ElementRef,
    /// Elements starting below this address are gone.
    floor: usize,
}

/// The current lap, from its first element to the newest one.
#[derive(Debug, Clone, Copy)]
struct Newer {
    first: ElementRef,
    latest: ElementRef,
}

#[derive(Debug, Clone)]
struct Partition {
    cfg: PartitionConfig,
    start: usize,
    swap_size: usize,
    region_start: usize,
    region_end: usize,
    newer: Option<Newer>,
    older: Option<Older>,
    /// Metadata is invalid but the backup is not: the next store must
    /// start a new lap.
    backup_mode: bool,
    /// The next store must start a new lap (backup mode, or leftovers of an
    /// interrupted write in the frontier's flash page).
    force_wrap: bool,
    /// Flash below the frontier up to here is known to be erased.
    erased_to: usize,
}

impl Partition {
    fn hdr(&self) -> usize {
        self.cfg.header_size()
    }

    fn end_of(&self, e: &ElementRef) -> usize {
        e.addr + self.hdr() + e.len
    }

    fn first_addr(&self) -> usize {
        self.region_start + METADATA_SIZE
    }

    fn max_payload(&self) -> usize {
        let room = self.region_end - self.first_addr() - self.hdr();
        match self.cfg.layout {
            Layout::Static { element_size } => element_size,
            Layout::Dynamic => room.min(u16::MAX as usize),
        }
    }
}

/// Counters describing what a partition holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PartitionStats {
    pub elements: usize,
    pub payload_bytes: usize,
}

#[derive(Debug, Clone)]
pub struct Filesystem {
    storage: VirtualStorage,
    partitions: Vec<Partition>,
    next_free: usize,
}

impl Filesystem {
    pub fn new(storage: VirtualStorage) -> Self {
        Filesystem {
            storage,
            partitions: Vec::new(),
            next_free: 0,
        }
    }

    pub fn storage(&self) -> &VirtualStorage {
        &self.storage
    }

    pub fn storage_mut(&mut self) -> &mut VirtualStorage {
        &mut self.storage
    }

    pub fn into_storage(self) -> VirtualStorage {
        self.storage
    }

    /// Address where the next registered partition will start.
    pub fn next_address(&self) -> usize {
        self.next_free
    }

    /// Moves the placement cursor forward, e.g. to put the following
    /// partitions into EEPROM.
    pub fn skip_to(&mut self, addr: usize) {
        assert!(addr >= self.next_free, "partitions are placed in increasing order");
        self.next_free = addr;
    }

    pub fn handles(&self) -> impl Iterator<Item = PartitionHandle> {
        (0..self.partitions.len()).map(PartitionHandle)
    }

    pub fn handle_by_id(&self, id: u16) -> Option<PartitionHandle> {
        self.partitions.iter().position(|p| p.cfg.id == id).map(PartitionHandle)
    }

    pub fn config(&self, h: PartitionHandle) -> Result<PartitionConfig, FsError> {
        Ok(self.part(h)?.cfg)
    }

    /// Virtual address range `[start, end)` owned by a partition.
    pub fn address_range(&self, h: PartitionHandle) -> Result<std::ops::Range<usize>, FsError> {
        let p = self.part(h)?;
        Ok(p.start..p.region_end)
    }

    /// First address of the element region (after the swap area).
    pub fn region_start(&self, h: PartitionHandle) -> Result<usize, FsError> {
        Ok(self.part(h)?.region_start)
    }

    /// Largest payload a single element may carry.
    pub fn max_payload(&self, h: PartitionHandle) -> Result<usize, FsError> {
        Ok(self.part(h)?.max_payload())
    }

    /// For static partitions: elements that fit in one lap.
    pub fn lap_capacity(&self, h: PartitionHandle) -> Result<Option<usize>, FsError> {
        let p = self.part(h)?;
        Ok(match p.cfg.layout {
            Layout::Static { element_size } => {
                Some((p.region_end - p.region_start - METADATA_SIZE) / (p.hdr() + element_size))
            }
            Layout::Dynamic => None,
        })
    }

    fn part(&self, h: PartitionHandle) -> Result<&Partition, FsError> {
        self.partitions.get(h.0).ok_or(FsError::UnknownPartition)
    }

    /// Claims the next `cfg.size` bytes of storage for a partition and
    /// adopts whatever valid partition image is already on the media.
    pub fn register(&mut self, cfg: PartitionConfig) -> Result<PartitionHandle, FsError> {
        if cfg.id == 0 || cfg.id == 0xFFFF {
            return Err(FsError::InvalidConfig("partition ids 0x0000 and 0xFFFF are reserved"));
        }
        if self.partitions.iter().any(|p| p.cfg.id == cfg.id) {
            return Err(FsError::DuplicatePartition(cfg.id));
        }
        if let Layout::Static { element_size } = cfg.layout {
            if element_size == 0 || element_size > u16::MAX as usize {
                return Err(FsError::InvalidConfig("static element size must be 1..=65535"));
            }
        }
        let start = self.next_free;
        let available = self.storage.size().saturating_sub(start);
        if cfg.size > available {
            return Err(FsError::StorageExhausted {
                requested: cfg.size,
                available,
            });
        }
        let end = start + cfg.size;
        let flash = self.storage.flash_size();
        let swap_size = if start < flash {
            let page = self.storage.erase_block_size(start);
            if !start.is_multiple_of(page) || (end < flash && !end.is_multiple_of(page)) {
                return Err(FsError::UnalignedFlashPartition);
            }
            page
        } else {
            EEPROM_SWAP_SIZE
        };
        let hdr = cfg.header_size();
        let min_payload = match cfg.layout {
            Layout::Static { element_size } => element_size,
            Layout::Dynamic => 1,
        };
        if cfg.size < swap_size + METADATA_SIZE + hdr + min_payload + 2 {
            return Err(FsError::InvalidConfig("partition too small for metadata and one element"));
        }
        let region = cfg.size - swap_size;
        let smallest_element = hdr + if let Layout::Static { element_size } = cfg.layout { element_size } else { 0 };
        if region / smallest_element > MAX_ELEMENTS_PER_LAP {
            return Err(FsError::InvalidConfig("partition could hold more than 32767 elements per lap"));
        }
        let mut part = Partition {
            cfg,
            start,
            swap_size,
            region_start: start + swap_size,
            region_end: end,
            newer: None,
            older: None,
            backup_mode: false,
            force_wrap: false,
            erased_to: start + swap_size,
        };
        mount(&self.storage, &mut part)?;
        self.partitions.push(part);
        self.next_free = end;
        Ok(PartitionHandle(self.partitions.len() - 1))
    }

    /// Re-reads every partition from the media, as after a reboot.
    pub fn remount(&mut self) -> Result<(), FsError> {
        for part in &mut self.partitions {
            mount(&self.storage, part)?;
        }
        Ok(())
    }

    /// Appends an element and returns its record number.
    pub fn store(&mut self, h: PartitionHandle, payload: &[u8]) -> Result<u16, FsError> {
        let part = self.partitions.get_mut(h.0).ok_or(FsError::UnknownPartition)?;
        match part.cfg.layout {
            Layout::Static { element_size } if payload.len() != element_size => {
                return Err(FsError::SizeMismatch {
                    expected: element_size,
                    actual: payload.len(),
                })
            }
            _ => {}
        }
        if payload.len() > part.max_payload() {
            return Err(FsError::PayloadTooLarge {
                len: payload.len(),
                max: part.max_payload(),
            });
        }
        let storage = &mut self.storage;
        let placement = match (&part.newer, part.force_wrap || part.backup_mode) {
            (Some(newer), false) => {
                let s = part.end_of(&newer.latest);
                (s + part.hdr() + payload.len() <= part.region_end).then_some((s, newer.latest))
            }
            _ => None,
        };
        match placement {
            Some((s, prev)) => append(storage, part, s, prev, payload),
            None => start_lap(storage, part, payload),
        }
    }

    /// Invalidates the partition with two small metadata writes.
    pub fn clear_partition(&mut self, h: PartitionHandle) -> Result<(), FsError> {
        let part = self.partitions.get_mut(h.0).ok_or(FsError::UnknownPartition)?;
        // backup first, so a torn clear never exposes a stale backup
        self.storage.zero(part.start, BACKUP_SIZE)?;
        self.storage.zero(part.region_start, METADATA_SIZE)?;
        reset(part);
        Ok(())
    }

    /// Erases all storage back to 0xFF.
    pub fn clear_all(&mut self) -> Result<(), FsError> {
        let size = self.storage.size();
        self.storage.erase(0..size)?;
        for part in &mut self.partitions {
            reset(part);
        }
        Ok(())
    }

    pub fn is_empty(&self, h: PartitionHandle) -> Result<bool, FsError> {
        let p = self.part(h)?;
        Ok(p.newer.is_none() && p.older.is_none())
    }

    pub fn latest(&self, h: PartitionHandle) -> Result<ElementRef, FsError> {
        let p = self.part(h)?;
        match (&p.newer, &p.older) {
            (Some(n), _) => Ok(n.latest),
            (None, Some(o)) => Ok(o.last),
            (None, None) => Err(FsError::Empty),
        }
    }

    pub fn oldest(&self, h: PartitionHandle) -> Result<ElementRef, FsError> {
        let p = self.part(h)?;
        match (&p.older, &p.newer) {
            (Some(o), _) => Ok(o.oldest),
            (None, Some(n)) => Ok(n.first),
            (None, None) => Err(FsError::Empty),
        }
    }

    fn locate(&self, p: &Partition, e: &ElementRef) -> Result<bool, FsError> {
        let header = read_header(&self.storage, p, e.addr)?;
        if header.rec != e.rec {
            return Err(FsError::Stale);
        }
        if let Some(n) = &p.newer {
            if (n.first.addr..=n.latest.addr).contains(&e.addr) {
                return Ok(true);
            }
        }
        if let Some(o) = &p.older {
            if (o.oldest.addr..=o.last.addr).contains(&e.addr) {
                return Ok(false);
            }
        }
        Err(FsError::Stale)
    }

    /// The element stored just before `e`.
    pub fn prev(&self, h: PartitionHandle, e: &ElementRef) -> Result<ElementRef, FsError> {
        let p = self.part(h)?;
        let in_newer = self.locate(p, e)?;
        if in_newer {
            let n = p.newer.as_ref().unwrap();
            if e.addr == n.first.addr {
                return p.older.as_ref().map(|o| o.last).ok_or(FsError::BeginReached);
            }
        } else if e.addr == p.older.as_ref().unwrap().oldest.addr {
            return Err(FsError::BeginReached);
        }
        predecessor(&self.storage, p, e)?.ok_or(FsError::Stale)
    }

    /// The element stored just after `e`.
    pub fn next(&self, h: PartitionHandle, e: &ElementRef) -> Result<ElementRef, FsError> {
        let p = self.part(h)?;
        let in_newer = self.locate(p, e)?;
        if in_newer {
            if e.addr == p.newer.as_ref().unwrap().latest.addr {
                return Err(FsError::EndReached);
            }
        } else if e.addr == p.older.as_ref().unwrap().last.addr {
            return p.newer.as_ref().map(|n| n.first).ok_or(FsError::EndReached);
        }
        successor(&self.storage, p, e)?.ok_or(FsError::Stale)
    }

    /// Payload of `e`, verified against its CRC when the partition has one.
    pub fn read(&self, h: PartitionHandle, e: &ElementRef) -> Result<Vec<u8>, FsError> {
        let p = self.part(h)?;
        self.locate(p, e)?;
        let header = read_header(&self.storage, p, e.addr)?;
        let payload = self.storage.read_vec(e.addr + p.hdr(), e.len)?;
        if p.cfg.crc && crc16(&payload) != header.crc {
            return Err(FsError::Corrupted { rec: e.rec });
        }
        Ok(payload)
    }

    /// All live elements, oldest first.
    pub fn elements(&self, h: PartitionHandle) -> Result<Vec<ElementRef>, FsError> {
        let mut out = Vec::new();
        let mut cur = match self.oldest(h) {
            Ok(e) => e,
            Err(FsError::Empty) => return Ok(out),
            Err(e) => return Err(e),
        };
        loop {
            out.push(cur);
            match self.next(h, &cur) {
                Ok(n) => cur = n,
                Err(FsError::EndReached) => return Ok(out),
                Err(e) => return Err(e),
            }
        }
    }

    pub fn stats(&self, h: PartitionHandle) -> Result<PartitionStats, FsError> {
        let elements = self.elements(h)?;
        Ok(PartitionStats {
            elements: elements.len(),
            payload_bytes: elements.iter().map(|e| e.len).sum(),
        })
    }
}

fn reset(part: &mut Partition) {
    part.newer = None;
    part.older = None;
    part.backup_mode = false;
    part.force_wrap = false;
    part.erased_to = part.region_start;
}

fn read_header(storage: &VirtualStorage, p: &Partition, addr: usize) -> Result<Header, MemError> {
    let mut b = [0u8; 6];
    let hdr = p.hdr();
    storage.read(addr, &mut b[..hdr])?;
    let rec = u16::from_le_bytes([b[0], b[1]]);
    let mut off = 2;
    let mut xor_len = 0;
    if p.cfg.layout == Layout::Dynamic {
        xor_len = u16::from_le_bytes([b[off], b[off + 1]]);
        off += 2;
    }
    let crc = if p.cfg.crc { u16::from_le_bytes([b[off], b[off + 1]]) } else { 0 };
    Ok(Header { rec, xor_len, crc })
}

/// Length of the element next to one of length `len` whose header carries
/// `xor_len`.
fn neighbour_len(p: &Partition, xor_len: u16, len: usize) -> usize {
    match p.cfg.layout {
        Layout::Static { element_size } => element_size,
        Layout::Dynamic => (xor_len ^ len as u16) as usize,
    }
}

/// Follows the XOR link backwards. Returns `None` when the computed
/// predecessor would fall outside the element region.
fn predecessor(storage: &VirtualStorage, p: &Partition, e: &ElementRef) -> Result<Option<ElementRef>, MemError> {
    let header = read_header(storage, p, e.addr)?;
    let len = neighbour_len(p, header.xor_len, e.len);
    let Some(addr) = e.addr.checked_sub(p.hdr() + len) else {
        return Ok(None);
    };
    if addr < p.first_addr() {
        return Ok(None);
    }
    Ok(Some(ElementRef {
        addr,
        len,
        rec: rec_prev(e.rec),
    }))
}

/// Follows the XOR link forwards, reading the successor's header.
fn successor(storage: &VirtualStorage, p: &Partition, e: &ElementRef) -> Result<Option<ElementRef>, MemError> {
    let addr = p.end_of(e);
    if addr + p.hdr() > p.region_end {
        return Ok(None);
    }
    let header = read_header(storage, p, addr)?;
    let len = neighbour_len(p, header.xor_len, e.len);
    if addr + p.hdr() + len > p.region_end {
        return Ok(None);
    }
    Ok(Some(ElementRef {
        addr,
        len,
        rec: rec_next(e.rec),
    }))
}

fn header_matches(storage: &VirtualStorage, p: &Partition, e: &ElementRef) -> Result<bool, MemError> {
    if e.addr < p.first_addr() || p.end_of(e) > p.region_end {
        return Ok(false);
    }
    Ok(read_header(storage, p, e.addr)?.rec == e.rec)
}

/// Reconstructs the in-memory view of a partition from the media.
fn mount(storage: &VirtualStorage, p: &mut Partition) -> Result<(), FsError> {
    reset(p);
    let mut mbuf = [0u8; METADATA_SIZE];
    storage.read(p.region_start, &mut mbuf)?;
    if let Some(meta) = Metadata::decode(&mbuf).filter(|m| m.id == p.cfg.id && m.size as usize == p.cfg.size) {
        if mount_from_metadata(storage, p, meta)? {
            return Ok(());
        }
        reset(p);
    }
    let mut bbuf = [0u8; BACKUP_SIZE];
    storage.read(p.start, &mut bbuf)?;
    if let Some(backup) = Backup::decode(&bbuf).filter(|b| b.id == p.cfg.id && b.size as usize == p.cfg.size) {
        let last = ElementRef {
            addr: backup.last_addr as usize,
            len: backup.last_len as usize,
            rec: backup.last_rec,
        };
        let floor = backup.floor as usize;
        if last.addr >= floor && header_matches(storage, p, &last)? {
            p.older = Some(walk_back(storage, p, last, floor)?);
        }
        p.backup_mode = true;
        p.force_wrap = true;
    }
    Ok(())
}

fn mount_from_metadata(storage: &VirtualStorage, p: &mut Partition, meta: Metadata) -> Result<bool, FsError> {
    let hdr = p.hdr();
    let first_addr = p.first_addr();
    let first_len = meta.first_len as usize;
    if let Layout::Static { element_size } = p.cfg.layout {
        if first_len != element_size {
            return Ok(false);
        }
    }
    if first_addr + hdr + first_len > p.region_end {
        return Ok(false);
    }
    let first_header = read_header(storage, p, first_addr)?;
    if first_header.rec as u32 >= REC_MODULUS {
        return Ok(false);
    }
    let first = ElementRef {
        addr: first_addr,
        len: first_len,
        rec: first_header.rec,
    };
    let mut latest = first;
    while let Some(next) = successor(storage, p, &latest)? {
        if read_header(storage, p, next.addr)?.rec != next.rec {
            break;
        }
        latest = next;
    }
    p.newer = Some(Newer { first, latest });
    let frontier = p.end_of(&latest);
    let floor = storage.block_roundup((frontier + 2).min(p.region_end));
    p.erased_to = floor;

    if meta.last_addr != NO_ADDRESS {
        let last = ElementRef {
            addr: meta.last_addr as usize,
            len: neighbour_len(p, first_header.xor_len, first_len),
            rec: rec_prev(first.rec),
        };
        if last.addr >= floor && header_matches(storage, p, &last)? {
            p.older = Some(walk_back(storage, p, last, floor)?);
        }
    }

    // leftovers of an interrupted write in the frontier's flash page cannot
    // be overwritten in place
    let tail_end = floor.min(storage.flash_size());
    if frontier < tail_end {
        let tail = storage.read_vec(frontier, tail_end - frontier)?;
        if tail.iter().any(|&b| b != 0xFF) {
            p.force_wrap = true;
        }
    }
    Ok(true)
}

/// Walks an older lap back from `last` to the lowest intact element at or
/// above `floor`.
fn walk_back(storage: &VirtualStorage, p: &Partition, last: ElementRef, floor: usize) -> Result<Older, MemError> {
    let mut oldest = last;
    while let Some(prev) = predecessor(storage, p, &oldest)? {
        if prev.addr < floor || !header_matches(storage, p, &prev)? {
            break;
        }
        oldest = prev;
    }
    Ok(Older { last, oldest, floor })
}

/// Drops older-lap elements starting below `floor` and returns the highest
/// one dropped, or the already-dead element just below the survivors.
fn advance_older(storage: &VirtualStorage, p: &mut Partition, floor: usize) -> Result<Option<ElementRef>, MemError> {
    let Some(mut older) = p.older else {
        return Ok(None);
    };
    let mut dropped = predecessor(storage, p, &older.oldest)?;
    older.floor = older.floor.max(floor);
    while older.oldest.addr < older.floor {
        dropped = Some(older.oldest);
        if older.oldest.addr == older.last.addr {
            p.older = None;
            return Ok(dropped);
        }
        match successor(storage, p, &older.oldest)? {
            Some(next) => older.oldest = next,
            None => {
                p.older = None;
                return Ok(dropped);
            }
        }
    }
    p.older = Some(older);
    Ok(dropped)
}

/// Makes a doomed element unreachable before anything overwrites it. On
/// flash the pending page erase does this; an EEPROM header gets the
/// end marker.
fn kill(storage: &mut VirtualStorage, p: &Partition, e: Option<ElementRef>, min_addr: usize) -> Result<(), MemError> {
    let Some(e) = e else { return Ok(()) };
    if e.addr < min_addr || e.addr < p.first_addr() || e.addr + 2 > p.region_end {
        return Ok(());
    }
    if matches!(storage.map(e.addr), Some((Unit::Eeprom, _))) {
        storage.store(e.addr, &END_MARKER.to_le_bytes())?;
    }
    Ok(())
}

/// Erases flash pages in `[from, to)` that are not yet known to be erased.
fn prepare(storage: &mut VirtualStorage, p: &mut Partition, from: usize, to: usize) -> Result<(), MemError> {
    let lo = from.max(p.erased_to);
    let hi = to.min(storage.flash_size());
    if lo < hi {
        storage.erase(lo..hi)?;
    }
    p.erased_to = p.erased_to.max(to);
    Ok(())
}

/// Writes end marker, body and finally the record number (the commit).
fn write_element(
    storage: &mut VirtualStorage,
    p: &Partition,
    addr: usize,
    rec: u16,
    xor_len: u16,
    payload: &[u8],
) -> Result<(), MemError> {
    let end = addr + p.hdr() + payload.len();
    if end + 2 <= p.region_end {
        storage.store(end, &END_MARKER.to_le_bytes())?;
    }
    let mut body = Vec::with_capacity(p.hdr() - 2 + payload.len());
    if p.cfg.layout == Layout::Dynamic {
        body.extend_from_slice(&xor_len.to_le_bytes());
    }
    if p.cfg.crc {
        body.extend_from_slice(&crc16(payload).to_le_bytes());
    }
    body.extend_from_slice(payload);
    storage.store(addr + 2, &body)?;
    storage.store(addr, &rec.to_le_bytes())?;
    Ok(())
}

/// Writes the metadata block with its id last. Until the id lands the
/// block cannot name this partition, so a torn write never revives an
/// older block whose tail happens to match.
fn write_metadata(storage: &mut VirtualStorage, p: &Partition, meta: &Metadata) -> Result<(), MemError> {
    let bytes = meta.encode();
    let current = storage.read_vec(p.region_start, 2)?;
    if u16::from_le_bytes([current[0], current[1]]) == p.cfg.id {
        storage.zero(p.region_start, 2)?;
    }
    storage.store(p.region_start + 2, &bytes[2..])?;
    storage.store(p.region_start, &bytes[..2])?;
    Ok(())
}

fn append(
    storage: &mut VirtualStorage,
    p: &mut Partition,
    s: usize,
    prev: ElementRef,
    payload: &[u8],
) -> Result<u16, FsError> {
    let end = s + p.hdr() + payload.len();
    let floor = storage.block_roundup((end + 2).min(p.region_end));
    let doomed = advance_older(storage, p, floor)?;
    let doomed = doomed.filter(|d| d.addr >= s);
    kill(storage, p, doomed, s)?;
    prepare(storage, p, s, floor)?;
    let rec = rec_next(prev.rec);
    write_element(storage, p, s, rec, (prev.len ^ payload.len()) as u16, payload)?;
    let e = ElementRef {
        addr: s,
        len: payload.len(),
        rec,
    };
    p.newer.as_mut().expect("append needs a current lap").latest = e;
    Ok(rec)
}

fn start_lap(storage: &mut VirtualStorage, p: &mut Partition, payload: &[u8]) -> Result<u16, FsError> {
    let first_addr = p.first_addr();
    let end = first_addr + p.hdr() + payload.len();
    let new_floor = storage.block_roundup((end + 2).min(p.region_end));
    let mut floor = new_floor;

    // the lap being closed becomes the older lap; anything older is dropped
    let resuming = p.backup_mode;
    let closing = if resuming {
        p.older.take().inspect(|o| {
            floor = floor.max(o.floor);
        })
    } else if let Some(n) = p.newer.take() {
        let backup = Backup {
            id: p.cfg.id,
            size: p.cfg.size as u32,
            last_addr: n.latest.addr as u32,
            last_len: n.latest.len as u16,
            last_rec: n.latest.rec,
            floor: new_floor as u32,
        };
        if p.start < storage.flash_size() {
            storage.erase(p.start..p.start + p.swap_size)?;
        }
        storage.store(p.start, &backup.encode())?;
        storage.zero(p.region_start, METADATA_SIZE)?;
        p.backup_mode = true;
        p.force_wrap = true;
        Some(Older {
            last: n.latest,
            oldest: n.first,
            floor: new_floor,
        })
    } else {
        None
    };
    p.older = closing;
    p.newer = None;

    let doomed = advance_older(storage, p, floor)?;
    if resuming {
        // a reboot before the new metadata lands walks down to the backup's
        // floor, one after it down to the new floor
        kill(storage, p, doomed, first_addr)?;
    }
    p.erased_to = p.region_start;
    prepare(storage, p, p.region_start, floor)?;

    let (rec, xor_len, last_addr) = match closing {
        Some(c) => (rec_next(c.last.rec), (c.last.len ^ payload.len()) as u16, c.last.addr as u32),
        None => (0, payload.len() as u16, NO_ADDRESS),
    };
    write_element(storage, p, first_addr, rec, xor_len, payload)?;
    let meta = Metadata {
        id: p.cfg.id,
        size: p.cfg.size as u32,
        last_addr,
        first_len: payload.len() as u16,
    };
    write_metadata(storage, p, &meta)?;

    let first = ElementRef {
        addr: first_addr,
        len: payload.len(),
        rec,
    };
    p.newer = Some(Newer { first, latest: first });
    p.backup_mode = false;
    p.force_wrap = false;
    Ok(rec)
}
