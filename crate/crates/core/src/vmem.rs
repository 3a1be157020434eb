//! Flash and EEPROM memory models, their byte-level storage layers, and the
//! virtual storage that concatenates both address spaces.
//!
//! Both models draw from a shared [`PowerRail`]. Every physical byte that a
//! store or erase commits costs one unit of the rail's budget; once the
//! budget is exhausted the rail halts and all further mutations fail with
//! [`MemError::PowerLoss`], leaving exactly the committed prefix on media.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::ops::Range;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;

use thiserror::Error;

pub const FLASH_PAGES: usize = 256;
pub const FLASH_PAGE_SIZE: usize = 1024;
pub const FLASH_WORD_SIZE: usize = 4;
pub const FLASH_WORD_STORE_NS: u64 = 46_300;
pub const FLASH_PAGE_ERASE_NS: u64 = 22_300_000;

pub const EEPROM_PAGES: usize = 1024;
pub const EEPROM_PAGE_SIZE: usize = 256;
pub const EEPROM_STORE_NS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MemError {
    #[error("range {addr:#x}+{len} outside memory of {size} bytes")]
    OutOfRange { addr: usize, len: usize, size: usize },
    #[error("power lost during storage operation")]
    PowerLoss,
    #[error("flash store to unaligned word address {0:#x}")]
    Unaligned(usize),
}

#[derive(Debug)]
struct RailState {
    budget: AtomicU64,
    halted: AtomicBool,
    committed: AtomicU64,
}

/// Shared power supply with an optional cut-off after a number of
/// physically committed bytes.
#[derive(Debug, Clone)]
pub struct PowerRail(Arc<RailState>);

impl Default for PowerRail {
    fn default() -> Self {
        PowerRail(Arc::new(RailState {
            budget: AtomicU64::new(u64::MAX),
            halted: AtomicBool::new(false),
            committed: AtomicU64::new(0),
        }))
    }
}

impl PowerRail {
    /// Arms the rail to halt after `n` more physical bytes.
    pub fn cut_after(&self, n: u64) {
        self.0.budget.store(n, Ordering::Relaxed);
        self.0.halted.store(false, Ordering::Relaxed);
    }

    /// Restores unlimited power (a reboot).
    pub fn restore(&self) {
        self.cut_after(u64::MAX);
    }

    pub fn is_halted(&self) -> bool {
        self.0.halted.load(Ordering::Relaxed)
    }

    /// Total physical bytes committed since creation.
    pub fn committed(&self) -> u64 {
        self.0.committed.load(Ordering::Relaxed)
    }

    /// Requests `n` bytes of budget and returns how many may be committed.
    /// Granting fewer than requested halts the rail.
    fn draw(&self, n: u64) -> u64 {
        if self.is_halted() {
            return 0;
        }
        let budget = self.0.budget.load(Ordering::Relaxed);
        let granted = if budget == u64::MAX { n } else { budget.min(n) };
        if budget != u64::MAX {
            self.0.budget.store(budget - granted, Ordering::Relaxed);
        }
        if granted < n {
            self.0.halted.store(true, Ordering::Relaxed);
        }
        self.0.committed.fetch_add(granted, Ordering::Relaxed);
        granted
    }

    fn check(&self) -> Result<(), MemError> {
        if self.is_halted() {
            Err(MemError::PowerLoss)
        } else {
            Ok(())
        }
    }
}

fn check_range(addr: usize, len: usize, size: usize) -> Result<(), MemError> {
    if addr.checked_add(len).is_some_and(|end| end <= size) {
        Ok(())
    } else {
        Err(MemError::OutOfRange { addr, len, size })
    }
}

/// NOR flash: word-granular programming that can only clear bits, and
/// page-granular erase back to all ones.
#[derive(Debug, Clone)]
pub struct FlashModel {
    page_size: usize,
    cells: Vec<u8>,
    erase_counts: Vec<u32>,
    faults: u64,
    busy_ns: u64,
    rail: PowerRail,
}

impl Default for FlashModel {
    fn default() -> Self {
        FlashModel::new(FLASH_PAGES, FLASH_PAGE_SIZE)
    }
}

impl FlashModel {
    pub fn new(pages: usize, page_size: usize) -> Self {
        assert!(page_size.is_multiple_of(FLASH_WORD_SIZE) && page_size > 0);
        FlashModel {
            page_size,
            cells: vec![0xFF; pages * page_size],
            erase_counts: vec![0; pages],
            faults: 0,
            busy_ns: 0,
            rail: PowerRail::default(),
        }
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    pub fn pages(&self) -> usize {
        self.erase_counts.len()
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn erase_count(&self, page: usize) -> u32 {
        self.erase_counts[page]
    }

    pub fn erase_counts(&self) -> &[u32] {
        &self.erase_counts
    }

    /// Number of word stores that attempted to set a cleared bit.
    pub fn fault_count(&self) -> u64 {
        self.faults
    }

    /// Accumulated device time spent storing and erasing.
    pub fn busy_ns(&self) -> u64 {
        self.busy_ns
    }

    pub fn read(&self, addr: usize, buf: &mut [u8]) -> Result<(), MemError> {
        check_range(addr, buf.len(), self.size())?;
        buf.copy_from_slice(&self.cells[addr..addr + buf.len()]);
        Ok(())
    }

    /// Programs one word: each cell becomes `old & new`.
    pub fn store_word(&mut self, addr: usize, word: [u8; FLASH_WORD_SIZE]) -> Result<(), MemError> {
        if !addr.is_multiple_of(FLASH_WORD_SIZE) {
            return Err(MemError::Unaligned(addr));
        }
        check_range(addr, FLASH_WORD_SIZE, self.size())?;
        self.rail.check()?;
        // only bytes that actually change state cost power
        let changing = word.iter().filter(|&&b| b != 0xFF).count() as u64;
        let granted = self.rail.draw(changing);
        self.busy_ns += FLASH_WORD_STORE_NS;
        let mut budget = granted;
        let mut faulted = false;
        for (i, &b) in word.iter().enumerate() {
            if b == 0xFF {
                continue;
            }
            if budget == 0 {
                break;
            }
            budget -= 1;
            let cell = &mut self.cells[addr + i];
            if b & !*cell != 0 {
                faulted = true;
            }
            *cell &= b;
        }
        if faulted {
            self.faults += 1;
        }
        if granted < changing {
            return Err(MemError::PowerLoss);
        }
        Ok(())
    }

    /// Resets a page to 0xFF. An interrupted erase clears a prefix of the page.
    pub fn erase_page(&mut self, page: usize) -> Result<(), MemError> {
        if page >= self.pages() {
            return Err(MemError::OutOfRange {
                addr: page * self.page_size,
                len: self.page_size,
                size: self.size(),
            });
        }
        self.rail.check()?;
        let granted = self.rail.draw(self.page_size as u64) as usize;
        let start = page * self.page_size;
        self.cells[start..start + granted].fill(0xFF);
        self.busy_ns += FLASH_PAGE_ERASE_NS;
        if granted < self.page_size {
            return Err(MemError::PowerLoss);
        }
        self.erase_counts[page] += 1;
        Ok(())
    }

    fn hash_state<H: Hasher>(&self, h: &mut H) {
        self.cells.hash(h);
        self.erase_counts.hash(h);
        self.faults.hash(h);
        self.busy_ns.hash(h);
    }
}

/// EEPROM: byte-granular stores with implicit erase.
#[derive(Debug, Clone)]
pub struct EepromModel {
    page_size: usize,
    cells: Vec<u8>,
    store_ops: u64,
    busy_ns: u64,
    rail: PowerRail,
}

impl Default for EepromModel {
    fn default() -> Self {
        EepromModel::new(EEPROM_PAGES, EEPROM_PAGE_SIZE)
    }
}

impl EepromModel {
    pub fn new(pages: usize, page_size: usize) -> Self {
        EepromModel {
            page_size,
            cells: vec![0xFF; pages * page_size],
            store_ops: 0,
            busy_ns: 0,
            rail: PowerRail::default(),
        }
    }

    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn page_size(&self) -> usize {
        self.page_size
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn store_ops(&self) -> u64 {
        self.store_ops
    }

    pub fn busy_ns(&self) -> u64 {
        self.busy_ns
    }

    pub fn read(&self, addr: usize, buf: &mut [u8]) -> Result<(), MemError> {
        check_range(addr, buf.len(), self.size())?;
        buf.copy_from_slice(&self.cells[addr..addr + buf.len()]);
        Ok(())
    }

    pub fn store(&mut self, addr: usize, bytes: &[u8]) -> Result<(), MemError> {
        check_range(addr, bytes.len(), self.size())?;
        if bytes.is_empty() {
            return Ok(());
        }
        self.rail.check()?;
        let granted = self.rail.draw(bytes.len() as u64) as usize;
        self.cells[addr..addr + granted].copy_from_slice(&bytes[..granted]);
        self.store_ops += 1;
        self.busy_ns += EEPROM_STORE_NS;
        if granted < bytes.len() {
            return Err(MemError::PowerLoss);
        }
        Ok(())
    }

    fn hash_state<H: Hasher>(&self, h: &mut H) {
        self.cells.hash(h);
        self.store_ops.hash(h);
        self.busy_ns.hash(h);
    }
}

/// Byte-addressed layer over [`FlashModel`], optimized for consecutive
/// stores.
///
/// It tracks one contiguous range known to be erased and unwritten. Stores
/// inside that range go straight to the device. A store elsewhere inspects
/// each covered page and erases it first unless the target bytes already
/// read 0xFF; erasing discards the rest of that page. Partial words are
/// padded with 0xFF mask bytes so neighbouring cells keep their content.
#[derive(Debug, Clone)]
pub struct FlashStorage {
    model: FlashModel,
    writable: Range<usize>,
}

impl FlashStorage {
    pub fn new(model: FlashModel) -> Self {
        FlashStorage {
            model,
            writable: 0..0,
        }
    }

    pub fn model(&self) -> &FlashModel {
        &self.model
    }

    pub fn size(&self) -> usize {
        self.model.size()
    }

    /// The range currently tracked as erased and unwritten.
    pub fn writable_range(&self) -> Range<usize> {
        self.writable.clone()
    }

    pub fn read(&self, addr: usize, buf: &mut [u8]) -> Result<(), MemError> {
        self.model.read(addr, buf)
    }

    pub fn store(&mut self, addr: usize, bytes: &[u8]) -> Result<(), MemError> {
        check_range(addr, bytes.len(), self.size())?;
        if bytes.is_empty() {
            return Ok(());
        }
        let end = addr + bytes.len();
        if !(self.writable.start <= addr && end <= self.writable.end) {
            let ps = self.model.page_size();
            for page in addr / ps..end.div_ceil(ps) {
                let lo = addr.max(page * ps);
                let hi = end.min((page + 1) * ps);
                if self.model.cells()[lo..hi].iter().any(|&b| b != 0xFF) {
                    self.model.erase_page(page)?;
                }
            }
            let last_page_end = end.div_ceil(ps) * ps;
            self.writable = end..last_page_end;
        } else {
            self.writable.start = end;
        }
        self.program(addr, bytes)
    }

    /// Programs bytes without any erase, using AND semantics. Writing
    /// zeros is always possible this way.
    pub fn program(&mut self, addr: usize, bytes: &[u8]) -> Result<(), MemError> {
        check_range(addr, bytes.len(), self.size())?;
        let end = addr + bytes.len();
        let mut word_addr = addr - addr % FLASH_WORD_SIZE;
        while word_addr < end {
            let mut word = [0xFF; FLASH_WORD_SIZE];
            for (i, slot) in word.iter_mut().enumerate() {
                let a = word_addr + i;
                if (addr..end).contains(&a) {
                    *slot = bytes[a - addr];
                }
            }
            self.model.store_word(word_addr, word)?;
            word_addr += FLASH_WORD_SIZE;
        }
        if self.writable.start < end && addr < self.writable.end {
            self.writable.start = end.min(self.writable.end);
        }
        Ok(())
    }

    /// Erases every page overlapping `range`.
    pub fn erase(&mut self, range: Range<usize>) -> Result<(), MemError> {
        if range.is_empty() {
            return Ok(());
        }
        check_range(range.start, range.len(), self.size())?;
        let ps = self.model.page_size();
        let first = range.start / ps;
        let last = range.end.div_ceil(ps);
        for page in first..last {
            self.model.erase_page(page)?;
        }
        let erased = first * ps..last * ps;
        if self.writable.end == erased.start && !self.writable.is_empty() {
            self.writable.end = erased.end;
        } else {
            self.writable = erased;
        }
        Ok(())
    }
}

/// Byte-addressed layer over [`EepromModel`]; one device store per call.
#[derive(Debug, Clone)]
pub struct EepromStorage {
    model: EepromModel,
}

impl EepromStorage {
    pub fn new(model: EepromModel) -> Self {
        EepromStorage { model }
    }

    pub fn model(&self) -> &EepromModel {
        &self.model
    }

    pub fn size(&self) -> usize {
        self.model.size()
    }

    pub fn read(&self, addr: usize, buf: &mut [u8]) -> Result<(), MemError> {
        self.model.read(addr, buf)
    }

    pub fn store(&mut self, addr: usize, bytes: &[u8]) -> Result<(), MemError> {
        self.model.store(addr, bytes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Flash,
    Eeprom,
}

/// Flash at `[0, flash_size)`, EEPROM directly after it.
#[derive(Debug, Clone)]
pub struct VirtualStorage {
    flash: FlashStorage,
    eeprom: EepromStorage,
    rail: PowerRail,
}

impl Default for VirtualStorage {
    fn default() -> Self {
        VirtualStorage::new(FlashModel::default(), EepromModel::default())
    }
}

impl VirtualStorage {
    pub fn new(mut flash: FlashModel, mut eeprom: EepromModel) -> Self {
        let rail = PowerRail::default();
        flash.rail = rail.clone();
        eeprom.rail = rail.clone();
        VirtualStorage {
            flash: FlashStorage::new(flash),
            eeprom: EepromStorage::new(eeprom),
            rail,
        }
    }

    pub fn size(&self) -> usize {
        self.flash.size() + self.eeprom.size()
    }

    pub fn flash_size(&self) -> usize {
        self.flash.size()
    }

    pub fn flash(&self) -> &FlashStorage {
        &self.flash
    }

    pub fn eeprom(&self) -> &EepromStorage {
        &self.eeprom
    }

    pub fn rail(&self) -> &PowerRail {
        &self.rail
    }

    /// Total simulated device time of both units.
    pub fn busy_ns(&self) -> u64 {
        self.flash.model().busy_ns() + self.eeprom.model().busy_ns()
    }

    /// Maps a virtual address to its unit and local address.
    pub fn map(&self, addr: usize) -> Option<(Unit, usize)> {
        if addr < self.flash.size() {
            Some((Unit::Flash, addr))
        } else if addr < self.size() {
            Some((Unit::Eeprom, addr - self.flash.size()))
        } else {
            None
        }
    }

    pub fn unmap(&self, unit: Unit, local: usize) -> usize {
        match unit {
            Unit::Flash => local,
            Unit::Eeprom => self.flash.size() + local,
        }
    }

    /// Smallest independently erasable block at `addr`: a flash page, or a
    /// single EEPROM byte.
    pub fn erase_block_size(&self, addr: usize) -> usize {
        match self.map(addr) {
            Some((Unit::Flash, _)) => self.flash.model().page_size(),
            _ => 1,
        }
    }

    /// Rounds `addr` up to the next erase-block boundary.
    pub fn block_roundup(&self, addr: usize) -> usize {
        let bs = self.erase_block_size(addr.saturating_sub(1).min(self.size().saturating_sub(1)));
        addr.div_ceil(bs) * bs
    }

    /// Splits `[addr, addr+len)` at the unit boundary.
    fn split(&self, addr: usize, len: usize) -> impl Iterator<Item = (Unit, usize, Range<usize>)> {
        let fsize = self.flash.size();
        let end = addr + len;
        let mut parts = Vec::with_capacity(2);
        if addr < fsize {
            let hi = end.min(fsize);
            parts.push((Unit::Flash, addr, 0..hi - addr));
        }
        if end > fsize {
            let lo = addr.max(fsize);
            parts.push((Unit::Eeprom, lo - fsize, lo - addr..len));
        }
        parts.into_iter().filter(|(_, _, r)| !r.is_empty())
    }

    pub fn read(&self, addr: usize, buf: &mut [u8]) -> Result<(), MemError> {
        check_range(addr, buf.len(), self.size())?;
        for (unit, local, r) in self.split(addr, buf.len()) {
            match unit {
                Unit::Flash => self.flash.read(local, &mut buf[r])?,
                Unit::Eeprom => self.eeprom.read(local, &mut buf[r])?,
            }
        }
        Ok(())
    }

    pub fn read_vec(&self, addr: usize, len: usize) -> Result<Vec<u8>, MemError> {
        let mut buf = vec![0; len];
        self.read(addr, &mut buf)?;
        Ok(buf)
    }

    pub fn store(&mut self, addr: usize, bytes: &[u8]) -> Result<(), MemError> {
        check_range(addr, bytes.len(), self.size())?;
        for (unit, local, r) in self.split(addr, bytes.len()) {
            match unit {
                Unit::Flash => self.flash.store(local, &bytes[r])?,
                Unit::Eeprom => self.eeprom.store(local, &bytes[r])?,
            }
        }
        Ok(())
    }

    /// Clears `len` bytes to zero without erasing. On flash this is a plain
    /// program operation, valid on any prior content.
    pub fn zero(&mut self, addr: usize, len: usize) -> Result<(), MemError> {
        check_range(addr, len, self.size())?;
        let zeros = vec![0u8; len];
        for (unit, local, r) in self.split(addr, len) {
            match unit {
                Unit::Flash => self.flash.program(local, &zeros[r])?,
                Unit::Eeprom => self.eeprom.store(local, &zeros[r])?,
            }
        }
        Ok(())
    }

    /// Brings every erase block overlapping `range` to 0xFF.
    pub fn erase(&mut self, range: Range<usize>) -> Result<(), MemError> {
        check_range(range.start, range.len(), self.size())?;
        for (unit, local, r) in self.split(range.start, range.len()) {
            match unit {
                Unit::Flash => self.flash.erase(local..local + r.len())?,
                Unit::Eeprom => self.eeprom.store(local, &vec![0xFF; r.len()])?,
            }
        }
        Ok(())
    }

    /// Hash of all observable model state, for read-purity checks.
    pub fn digest(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.flash.model().hash_state(&mut h);
        self.flash.writable.hash(&mut h);
        self.eeprom.model().hash_state(&mut h);
        h.finish()
    }

    /// Flat memory image: flash cells followed by EEPROM cells.
    pub fn dump(&self) -> Vec<u8> {
        let mut out = self.flash.model().cells().to_vec();
        out.extend_from_slice(self.eeprom.model().cells());
        out
    }

    /// Replaces the cell contents with an image produced by [`dump`](Self::dump).
    pub fn load(&mut self, image: &[u8]) -> Result<(), MemError> {
        if image.len() != self.size() {
            return Err(MemError::OutOfRange {
                addr: 0,
                len: image.len(),
                size: self.size(),
            });
        }
        let fsize = self.flash.size();
        self.flash.model.cells.copy_from_slice(&image[..fsize]);
        self.eeprom.model.cells.copy_from_slice(&image[fsize..]);
        self.flash.writable = 0..0;
        Ok(())
    }

    pub fn from_image(image: &[u8]) -> Result<Self, MemError> {
        let mut storage = VirtualStorage::default();
        storage.load(image)?;
        Ok(storage)
    }
}
