//! Power-loss campaign: mixed chunk stores across all five partitions with
//! the supply cut in the middle of random stores, each followed by a reboot
//! and a check of the recovered contents against a reference.
//!
//! For a store interrupted by a cut, `before` is the partition content just
//! before it and `after` the content a completed store would have left.
//! Recovery must keep every element of `before` that `after` still holds
//! (nothing committed is lost) and may only contain elements of `before`
//! plus the new one (nothing appears from nowhere). Every other partition
//! must come back unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use badge_core::badge::proto::{
    AccelChunk, AccelEventChunk, BatteryChunk, MicrophoneChunk, ScanChunk, ScanResultData, Timestamp,
};
use badge_core::badge::{Chunk, Source, Storer};
use badge_core::seqfs::{FsError, PartitionConfig};
use badge_core::vmem::{VirtualStorage, FLASH_PAGE_SIZE};

/// Small partitions, so a campaign wraps every partition many times.
pub fn compact_layout(flash_size: usize) -> [(Source, usize, PartitionConfig); 5] {
    let page = FLASH_PAGE_SIZE;
    [
        (Source::Microphone, 0, PartitionConfig::dynamic(1, 4 * page, true)),
        (Source::Scan, 4 * page, PartitionConfig::dynamic(2, 3 * page, true)),
        (Source::Accel, 7 * page, PartitionConfig::dynamic(3, 3 * page, true)),
        (Source::AccelEvent, flash_size, PartitionConfig::dynamic(4, 300, true)),
        (Source::Battery, flash_size + 300, PartitionConfig::dynamic(5, 400, true)),
    ]
}

fn mount(storage: VirtualStorage) -> Result<Storer, FsError> {
    let layout = compact_layout(storage.flash_size());
    Storer::with_layout(storage, layout)
}

type Contents = Vec<(u16, Vec<u8>)>;

fn contents(storer: &Storer, source: Source) -> Contents {
    let fs = storer.fs();
    let h = storer.handle(source);
    fs.elements(h)
        .expect("mounted partition")
        .iter()
        .map(|e| (e.rec, fs.read(h, e).expect("alive element reads")))
        .collect()
}

fn all_contents(storer: &Storer) -> [Contents; 5] {
    Source::ALL.map(|s| contents(storer, s))
}

/// A chunk of a random source whose timestamp makes it unique.
pub fn random_chunk(rng: &mut ChaCha8Rng, serial: u32) -> Chunk {
    let timestamp = Timestamp {
        seconds: serial,
        ms: rng.gen_range(0..1000),
    };
    match Source::ALL[rng.gen_range(0..5)] {
        Source::Microphone => Chunk::Microphone(MicrophoneChunk {
            timestamp,
            sample_period_ms: 50,
            data: (0..rng.gen_range(1..=112)).map(|_| rng.gen()).collect(),
        }),
        Source::Scan => Chunk::Scan(ScanChunk {
            timestamp,
            devices: (0..rng.gen_range(0..=29))
                .map(|_| ScanResultData {
                    id: rng.gen(),
                    rssi: rng.gen_range(-100..-30),
                    count: rng.gen_range(1..20),
                })
                .collect(),
        }),
        Source::Accel => Chunk::Accel(AccelChunk {
            timestamp,
            magnitudes: (0..rng.gen_range(1..=50)).map(|_| rng.gen()).collect(),
        }),
        Source::AccelEvent => Chunk::AccelEvent(AccelEventChunk { timestamp }),
        Source::Battery => Chunk::Battery(BatteryChunk {
            timestamp,
            voltage: rng.gen_range(2.0..3.3),
        }),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub cuts: u64,
    pub stores: u64,
    /// Elements recovered that were neither there before nor being stored.
    pub phantoms: u64,
    /// Elements committed before the cut, kept by a completed store, but
    /// missing after recovery.
    pub lost: u64,
    /// Recovered elements whose record numbers do not run consecutively.
    pub order_violations: u64,
    /// Untouched partitions whose content changed across the reboot.
    pub collateral_changes: u64,
    /// Interrupted stores whose element survived the cut anyway.
    pub completed_despite_cut: u64,
}

impl CampaignReport {
    pub fn is_clean(&self) -> bool {
        self.phantoms == 0 && self.lost == 0 && self.order_violations == 0 && self.collateral_changes == 0
    }
}

/// Runs `cuts` interrupted stores, with up to seven uninterrupted stores
/// between consecutive cuts.
pub fn run_campaign(seed: u64, cuts: u64) -> CampaignReport {
    run_campaign_with_image(seed, cuts).0
}

/// Like [`run_campaign`], also returning the final memory, which mounts
/// with [`compact_layout`].
pub fn run_campaign_with_image(seed: u64, cuts: u64) -> (CampaignReport, VirtualStorage) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut storer = mount(VirtualStorage::default()).expect("blank storage mounts");
    let mut report = CampaignReport {
        seed,
        ..CampaignReport::default()
    };
    let mut serial = 0u32;
    while report.cuts < cuts {
        for _ in 0..rng.gen_range(0..8) {
            serial += 1;
            storer.store(&random_chunk(&mut rng, serial)).expect("store without a cut succeeds");
            report.stores += 1;
        }
        serial += 1;
        let chunk = random_chunk(&mut rng, serial);
        let source = chunk.source();
        let before = all_contents(&storer);

        let mut copy = mount(VirtualStorage::from_image(&storer.storage().dump()).expect("valid image"))
            .expect("copy mounts");
        let committed = copy.storage().rail().committed();
        let new_rec = copy.store(&chunk).expect("store on the copy succeeds");
        let cost = copy.storage().rail().committed() - committed;
        let after = contents(&copy, source);
        let new_payload = after.last().expect("new element").1.clone();
        drop(copy);

        storer.storage().rail().cut_after(rng.gen_range(0..cost.max(1)));
        let result = storer.store(&chunk);
        assert!(result.is_err(), "a store cut short cannot succeed");
        report.cuts += 1;
        report.stores += 1;

        let storage = storer.into_storage();
        storage.rail().restore();
        storer = mount(storage).expect("storage mounts after a power cut");
        let recovered = all_contents(&storer);

        for s in Source::ALL {
            let got = &recovered[s.index()];
            let old = &before[s.index()];
            if s != source {
                report.collateral_changes += (got != old) as u64;
                continue;
            }
            let new_item = (new_rec, new_payload.clone());
            report.phantoms += got.iter().filter(|e| !old.contains(e) && **e != new_item).count() as u64;
            report.lost += old.iter().filter(|e| after.contains(e) && !got.contains(e)).count() as u64;
            report.completed_despite_cut += got.contains(&new_item) as u64;
            report.order_violations += got
                .windows(2)
                .filter(|w| (w[0].0 as u32 + 1) % 0xFFFF != w[1].0 as u32)
                .count() as u64;
        }
    }
    (report, storer.into_storage())
}
