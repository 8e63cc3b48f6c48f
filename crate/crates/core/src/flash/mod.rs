//! Flash devices: geometry, latency profiles, vSSD carving, the FTL block
//! pool, DRAM write cache, and the per-unit service timeline.

mod cache;
mod ftl;
mod timeline;

pub use cache::{CacheEntry, WriteCache};
pub use ftl::{BlockUse, FlashUnit, GcReport, MemberSnapshot, UnitCounters};
pub use timeline::Timeline;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Nanos, NS_PER_MS, NS_PER_US};

pub const PAGE_SIZE: u64 = 4096;
pub const DEFAULT_PAGES_PER_BLOCK: u32 = 256;
pub const DEFAULT_ENDURANCE: u32 = 30_000;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlashError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("resource conflict: {0}")]
    ResourceConflict(String),
    #[error("requested capacity {requested} exceeds slice capacity {available}")]
    CapacityOverflow { requested: u64, available: u64 },
    #[error("logical page {lpn} out of range ({pages} pages)")]
    OutOfRange { lpn: u64, pages: u64 },
    #[error("no erasable block and no free space left")]
    OutOfSpace,
    #[error("no collocated vSSD can lend {0} blocks")]
    NoLender(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    PSsd,
    IntelDc,
    Optane,
}

/// Per-page and per-block operation latencies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub read_ns: Nanos,
    pub program_ns: Nanos,
    /// `None` models a device that writes in place and never collects.
    pub erase_ns: Option<Nanos>,
}

impl DeviceProfile {
    pub fn of(kind: ProfileKind) -> Self {
        match kind {
            ProfileKind::PSsd => DeviceProfile {
                read_ns: 70 * NS_PER_US,
                program_ns: 600 * NS_PER_US,
                erase_ns: Some(4 * NS_PER_MS),
            },
            ProfileKind::IntelDc => DeviceProfile {
                read_ns: 90 * NS_PER_US,
                program_ns: 70 * NS_PER_US,
                erase_ns: Some(3 * NS_PER_MS),
            },
            ProfileKind::Optane => DeviceProfile {
                read_ns: 10 * NS_PER_US,
                program_ns: 10 * NS_PER_US,
                erase_ns: None,
            },
        }
    }

    pub fn gc_free(&self) -> bool {
        self.erase_ns.is_none()
    }

    pub fn validate(&self) -> Result<(), FlashError> {
        if self.read_ns == 0 || self.program_ns == 0 {
            return Err(FlashError::InvalidGeometry(
                "read and program latency must be positive".into(),
            ));
        }
        if let Some(e) = self.erase_ns {
            if e <= self.program_ns || e <= self.read_ns {
                return Err(FlashError::InvalidGeometry(
                    "erase latency must exceed program and read latency".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SsdGeometry {
    pub channels: u32,
    pub chips_per_channel: u32,
    pub blocks_per_chip: u32,
    pub pages_per_block: u32,
    pub page_size: u64,
    pub profile: DeviceProfile,
}

impl SsdGeometry {
    pub fn validate(&self) -> Result<(), FlashError> {
        let counts = [
            ("channels", self.channels as u64),
            ("chips_per_channel", self.chips_per_channel as u64),
            ("blocks_per_chip", self.blocks_per_chip as u64),
            ("pages_per_block", self.pages_per_block as u64),
            ("page_size", self.page_size),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(FlashError::InvalidGeometry(format!("{name} must be >= 1")));
            }
        }
        self.profile.validate()
    }

    pub fn chips(&self) -> u32 {
        self.channels * self.chips_per_channel
    }

    pub fn block_bytes(&self) -> u64 {
        self.pages_per_block as u64 * self.page_size
    }

    pub fn chip_bytes(&self) -> u64 {
        self.blocks_per_chip as u64 * self.block_bytes()
    }

    pub fn capacity_bytes(&self) -> u64 {
        self.chips() as u64 * self.chip_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Isolation {
    /// Dedicated channels (all chips on them).
    Hardware { channels: Vec<u32> },
    /// Dedicated chips `(channel, chip)`; members of one channel group share
    /// a block pool and collect together.
    Software { chips: Vec<(u32, u32)>, group: u32 },
}

/// Static description of one carved vSSD.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VssdSlice {
    pub id: u32,
    pub isolation: Isolation,
    /// Physical blocks backing the slice.
    pub blocks: u32,
    /// Exported logical capacity in bytes.
    pub capacity: u64,
    /// Number of operations the slice can service concurrently.
    pub parallelism: u32,
}

/// Carves one SSD into vSSDs and checks the isolation invariants.
#[derive(Debug, Clone)]
pub struct SsdAllocator {
    geometry: SsdGeometry,
    used_chips: BTreeSet<(u32, u32)>,
    hw_channels: BTreeSet<u32>,
    group_channels: Vec<(u32, BTreeSet<u32>)>,
    slices: Vec<VssdSlice>,
}

impl SsdAllocator {
    pub fn new(geometry: SsdGeometry) -> Result<Self, FlashError> {
        geometry.validate()?;
        Ok(SsdAllocator {
            geometry,
            used_chips: BTreeSet::new(),
            hw_channels: BTreeSet::new(),
            group_channels: Vec::new(),
            slices: Vec::new(),
        })
    }

    pub fn geometry(&self) -> &SsdGeometry {
        &self.geometry
    }

    pub fn slices(&self) -> &[VssdSlice] {
        &self.slices
    }

    pub fn create_vssd(
        &mut self,
        id: u32,
        isolation: Isolation,
        capacity: u64,
    ) -> Result<&VssdSlice, FlashError> {
        let g = self.geometry;
        let chips: Vec<(u32, u32)> = match &isolation {
            Isolation::Hardware { channels } => {
                if channels.is_empty() {
                    return Err(FlashError::ResourceConflict("no channels requested".into()));
                }
                for &c in channels {
                    if c >= g.channels {
                        return Err(FlashError::ResourceConflict(format!("channel {c} does not exist")));
                    }
                    if self.hw_channels.contains(&c) || self.used_chips.iter().any(|&(ch, _)| ch == c) {
                        return Err(FlashError::ResourceConflict(format!("channel {c} already allocated")));
                    }
                }
                channels
                    .iter()
                    .flat_map(|&c| (0..g.chips_per_channel).map(move |k| (c, k)))
                    .collect()
            }
            Isolation::Software { chips, group } => {
                if chips.is_empty() {
                    return Err(FlashError::ResourceConflict("no chips requested".into()));
                }
                let mut span = BTreeSet::new();
                for &(c, k) in chips {
                    if c >= g.channels || k >= g.chips_per_channel {
                        return Err(FlashError::ResourceConflict(format!("chip ({c},{k}) does not exist")));
                    }
                    if self.hw_channels.contains(&c) || self.used_chips.contains(&(c, k)) {
                        return Err(FlashError::ResourceConflict(format!("chip ({c},{k}) already allocated")));
                    }
                    span.insert(c);
                }
                if let Some((_, existing)) = self.group_channels.iter().find(|(gid, _)| gid == group) {
                    if *existing != span {
                        return Err(FlashError::ResourceConflict(format!(
                            "channel group {group} spans {existing:?}, request spans {span:?}"
                        )));
                    }
                }
                chips.clone()
            }
        };
        let blocks = chips.len() as u32 * g.blocks_per_chip;
        let available = blocks as u64 * g.block_bytes();
        if capacity > available {
            return Err(FlashError::CapacityOverflow {
                requested: capacity,
                available,
            });
        }
        let parallelism = chips.len() as u32;
        match &isolation {
            Isolation::Hardware { channels } => self.hw_channels.extend(channels.iter().copied()),
            Isolation::Software { group, .. } => {
                if !self.group_channels.iter().any(|(gid, _)| gid == group) {
                    let span = chips.iter().map(|&(c, _)| c).collect();
                    self.group_channels.push((*group, span));
                }
            }
        }
        self.used_chips.extend(chips);
        self.slices.push(VssdSlice {
            id,
            isolation,
            blocks,
            capacity,
            parallelism,
        });
        Ok(self.slices.last().expect("just pushed"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom(channels: u32, chips: u32) -> SsdGeometry {
        SsdGeometry {
            channels,
            chips_per_channel: chips,
            blocks_per_chip: 8,
            pages_per_block: 16,
            page_size: PAGE_SIZE,
            profile: DeviceProfile::of(ProfileKind::PSsd),
        }
    }

    #[test]
    fn hardware_channels_are_disjoint() {
        let mut a = SsdAllocator::new(geom(4, 2)).unwrap();
        a.create_vssd(0, Isolation::Hardware { channels: vec![0, 1] }, 0).unwrap();
        let err = a.create_vssd(1, Isolation::Hardware { channels: vec![1, 2] }, 0);
        assert!(matches!(err, Err(FlashError::ResourceConflict(_))));
        a.create_vssd(1, Isolation::Hardware { channels: vec![2, 3] }, 0).unwrap();
    }

    #[test]
    fn capacity_is_bounded_by_the_slice() {
        let mut a = SsdAllocator::new(geom(4, 2)).unwrap();
        let slice_bytes = 2 * 8 * 16 * PAGE_SIZE;
        let err = a.create_vssd(0, Isolation::Hardware { channels: vec![0] }, slice_bytes + 1);
        assert!(matches!(err, Err(FlashError::CapacityOverflow { .. })));
        let s = a.create_vssd(0, Isolation::Hardware { channels: vec![0] }, slice_bytes).unwrap();
        assert_eq!(s.parallelism, 2);
    }

    #[test]
    fn channel_groups_span_the_same_channels() {
        let mut a = SsdAllocator::new(geom(4, 4)).unwrap();
        let sw = |chips: Vec<(u32, u32)>| Isolation::Software { chips, group: 7 };
        a.create_vssd(0, sw(vec![(0, 0), (1, 0)]), 0).unwrap();
        a.create_vssd(1, sw(vec![(0, 1), (1, 1)]), 0).unwrap();
        assert!(a.create_vssd(2, sw(vec![(0, 2), (2, 2)]), 0).is_err());
        // A hardware vSSD cannot take a channel a software vSSD already uses.
        assert!(a.create_vssd(3, Isolation::Hardware { channels: vec![1] }, 0).is_err());
    }

    #[test]
    fn server_scale_vssd_count() {
        // 16 SSDs with 128 software-isolated vSSDs each: one chip per vSSD.
        let mut total = 0;
        for _ in 0..16 {
            let mut a = SsdAllocator::new(geom(16, 8)).unwrap();
            for i in 0..128u32 {
                let chip = (i / 8, i % 8);
                a.create_vssd(
                    i,
                    Isolation::Software {
                        chips: vec![chip],
                        group: i / 8,
                    },
                    0,
                )
                .unwrap();
            }
            total += a.slices().len();
        }
        assert_eq!(total, 2048);
    }

    #[test]
    fn profile_validation() {
        for k in [ProfileKind::PSsd, ProfileKind::IntelDc, ProfileKind::Optane] {
            DeviceProfile::of(k).validate().unwrap();
        }
        let bad = DeviceProfile {
            read_ns: 10,
            program_ns: 100,
            erase_ns: Some(50),
        };
        assert!(bad.validate().is_err());
    }
}
