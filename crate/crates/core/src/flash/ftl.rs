//! Page-mapped flash translation layer over a shared block pool.
//!
//! A [`FlashUnit`] is the set of blocks that collect together: one
//! hardware-isolated vSSD, or every member of a software channel group.
//! Each member keeps its own logical-to-physical map and free list; members
//! of a group can lend each other erased blocks.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{DeviceProfile, FlashError};
use crate::engine::Nanos;

const INVALID: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockUse {
    Free,
    Active,
    Used,
}

#[derive(Debug, Clone)]
struct Block {
    home: u16,
    owner: u16,
    state: BlockUse,
    valid: u32,
    next: u32,
    erase_count: u32,
}

#[derive(Debug, Clone)]
struct Member {
    l2p: Vec<u32>,
    content: Vec<u64>,
    free: VecDeque<u32>,
    active: Option<u32>,
    held: u32,
}

/// Cost and effect of one collection episode.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcReport {
    pub victims: u32,
    pub pages_migrated: u64,
    pub blocks_erased: u64,
    pub blocks_returned: u32,
    pub duration_ns: Nanos,
}

impl GcReport {
    pub fn merge(&mut self, o: &GcReport) {
        self.victims += o.victims;
        self.pages_migrated += o.pages_migrated;
        self.blocks_erased += o.blocks_erased;
        self.blocks_returned += o.blocks_returned;
        self.duration_ns += o.duration_ns;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitCounters {
    pub host_pages: u64,
    pub gc_pages: u64,
    pub erases: u64,
    pub emergency_gcs: u64,
    pub borrows: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberSnapshot {
    pub free_ratio: f64,
    pub free_blocks: u32,
    pub held_blocks: u32,
    pub borrowed_blocks: u32,
    pub lent_blocks: u32,
    pub mapped_pages: u64,
    /// `(erase_count, blocks)` pairs over the member's home blocks.
    pub erase_histogram: Vec<(u32, u32)>,
}

#[derive(Debug, Clone)]
pub struct FlashUnit {
    profile: DeviceProfile,
    pages_per_block: u32,
    blocks: Vec<Block>,
    p2l: Vec<u32>,
    members: Vec<Member>,
    /// Free ratio an emergency collection restores.
    emergency_target: f64,
    counters: UnitCounters,
}

impl FlashUnit {
    /// `members[i] = (home_blocks, logical_pages)`.
    pub fn new(
        profile: DeviceProfile,
        pages_per_block: u32,
        members: &[(u32, u64)],
        emergency_target: f64,
    ) -> Result<Self, FlashError> {
        if pages_per_block == 0 || members.is_empty() {
            return Err(FlashError::InvalidGeometry("empty unit".into()));
        }
        let mut blocks = Vec::new();
        let mut ms = Vec::new();
        for (i, &(nblocks, lpages)) in members.iter().enumerate() {
            let phys = nblocks as u64 * pages_per_block as u64;
            // Out-of-place writes need at least one spare block to make progress.
            let limit = if profile.gc_free() { phys } else { phys.saturating_sub(pages_per_block as u64) };
            if lpages > limit {
                return Err(FlashError::CapacityOverflow {
                    requested: lpages,
                    available: limit,
                });
            }
            let first = blocks.len() as u32;
            for _ in 0..nblocks {
                blocks.push(Block {
                    home: i as u16,
                    owner: i as u16,
                    state: BlockUse::Free,
                    valid: 0,
                    next: 0,
                    erase_count: 0,
                });
            }
            ms.push(Member {
                l2p: vec![INVALID; lpages as usize],
                content: vec![0; lpages as usize],
                free: (first..first + nblocks).collect(),
                active: None,
                held: nblocks,
            });
        }
        let pages = blocks.len() * pages_per_block as usize;
        Ok(FlashUnit {
            profile,
            pages_per_block,
            blocks,
            p2l: vec![INVALID; pages],
            members: ms,
            emergency_target,
            counters: UnitCounters::default(),
        })
    }

    pub fn profile(&self) -> &DeviceProfile {
        &self.profile
    }

    pub fn members(&self) -> usize {
        self.members.len()
    }

    pub fn pages_per_block(&self) -> u32 {
        self.pages_per_block
    }

    pub fn logical_pages(&self, m: usize) -> u64 {
        self.members[m].l2p.len() as u64
    }

    pub fn counters(&self) -> &UnitCounters {
        &self.counters
    }

    pub fn free_blocks(&self, m: usize) -> u32 {
        self.members[m].free.len() as u32
    }

    pub fn held_blocks(&self, m: usize) -> u32 {
        self.members[m].held
    }

    /// Free blocks over blocks currently held; borrowed blocks count toward
    /// the borrower.
    pub fn free_ratio(&self, m: usize) -> f64 {
        if self.profile.gc_free() {
            return 1.0;
        }
        let mem = &self.members[m];
        if mem.held == 0 {
            return 0.0;
        }
        mem.free.len() as f64 / mem.held as f64
    }

    /// Free ratio of the whole pool.
    pub fn unit_free_ratio(&self) -> f64 {
        if self.profile.gc_free() {
            return 1.0;
        }
        let free: usize = self.members.iter().map(|m| m.free.len()).sum();
        free as f64 / self.blocks.len() as f64
    }

    /// Latest content version stored for `lpn`; `None` means never written.
    pub fn read(&self, m: usize, lpn: u64) -> Result<Option<u64>, FlashError> {
        let mem = &self.members[m];
        let pages = mem.l2p.len() as u64;
        if lpn >= pages {
            return Err(FlashError::OutOfRange { lpn, pages });
        }
        let v = mem.content[lpn as usize];
        Ok((v != 0).then_some(v))
    }

    pub fn is_mapped(&self, m: usize, lpn: u64) -> bool {
        self.members[m]
            .l2p
            .get(lpn as usize)
            .is_some_and(|&p| p != INVALID)
    }

    pub fn physical_page(&self, m: usize, lpn: u64) -> Option<u32> {
        self.members[m]
            .l2p
            .get(lpn as usize)
            .copied()
            .filter(|&p| p != INVALID)
    }

    /// Program one logical page. Content versions are last-writer-wins by
    /// version number, so replicas converge regardless of local reordering.
    /// Returns the report of an emergency collection if one was needed.
    pub fn write(&mut self, m: usize, lpn: u64, version: u64) -> Result<Option<GcReport>, FlashError> {
        let pages = self.members[m].l2p.len() as u64;
        if lpn >= pages {
            return Err(FlashError::OutOfRange { lpn, pages });
        }
        let li = lpn as usize;
        let c = &mut self.members[m].content[li];
        *c = (*c).max(version);
        self.counters.host_pages += 1;
        if self.profile.gc_free() {
            self.members[m].l2p[li] = lpn as u32;
            return Ok(None);
        }
        let mut emergency = None;
        // Keep one erased block in reserve so collection can always migrate.
        if self.needs_block(m) && self.members[m].free.len() <= 1 {
            self.counters.emergency_gcs += 1;
            let target = self.emergency_target;
            let r = self.collect(m, target, 1)?;
            if self.members[m].free.is_empty() && self.needs_block(m) {
                return Err(FlashError::OutOfSpace);
            }
            emergency = Some(r);
        }
        self.program(m, lpn as u32)?;
        Ok(emergency)
    }

    fn needs_block(&self, m: usize) -> bool {
        match self.members[m].active {
            None => true,
            Some(b) => self.blocks[b as usize].next >= self.pages_per_block,
        }
    }

    /// Place `lpn` on the next free page of the member's active block.
    fn program(&mut self, m: usize, lpn: u32) -> Result<(), FlashError> {
        if self.needs_block(m) {
            if let Some(b) = self.members[m].active.take() {
                self.blocks[b as usize].state = BlockUse::Used;
            }
            let b = self.members[m].free.pop_front().ok_or(FlashError::OutOfSpace)?;
            self.blocks[b as usize].state = BlockUse::Active;
            self.members[m].active = Some(b);
        }
        let b = self.members[m].active.expect("active block");
        let blk = &mut self.blocks[b as usize];
        let ppn = b * self.pages_per_block + blk.next;
        blk.next += 1;
        blk.valid += 1;
        let old = std::mem::replace(&mut self.members[m].l2p[lpn as usize], ppn);
        if old != INVALID {
            self.invalidate(old);
        }
        self.p2l[ppn as usize] = lpn;
        Ok(())
    }

    fn invalidate(&mut self, ppn: u32) {
        self.p2l[ppn as usize] = INVALID;
        let b = (ppn / self.pages_per_block) as usize;
        self.blocks[b].valid -= 1;
    }

    /// Greedy victim: fewest valid pages among the member's written blocks,
    /// then borrowed before own, then the lowest block id.
    fn pick_victim(&self, m: usize) -> Option<u32> {
        let mut best: Option<(u32, bool, u32)> = None;
        for (i, b) in self.blocks.iter().enumerate() {
            if b.owner as usize != m || b.state != BlockUse::Used {
                continue;
            }
            let key = (b.valid, b.home as usize == m, i as u32);
            if best.is_none_or(|k| key < k) {
                best = Some(key);
            }
        }
        best.map(|(_, _, i)| i)
    }

    /// Greedy collection on one member until its free ratio reaches `target`
    /// and at least `min_victims` blocks were reclaimed.
    pub fn collect(&mut self, m: usize, target: f64, min_victims: u32) -> Result<GcReport, FlashError> {
        let mut r = GcReport::default();
        if self.profile.gc_free() {
            return Ok(r);
        }
        // A borrowed active block is closed so it can be evacuated.
        if let Some(b) = self.members[m].active {
            if self.blocks[b as usize].home as usize != m {
                self.blocks[b as usize].state = BlockUse::Used;
                self.members[m].active = None;
            }
        }
        loop {
            let borrowed_used = self.blocks.iter().any(|b| b.owner as usize == m && b.home as usize != m && b.state == BlockUse::Used);
            if self.free_ratio(m) >= target && r.victims >= min_victims && !borrowed_used {
                break;
            }
            let Some(v) = self.pick_victim(m) else { break };
            let valid = self.blocks[v as usize].valid;
            let own = self.blocks[v as usize].home as usize == m;
            if own && valid >= self.pages_per_block {
                break;
            }
            // Migration needs room outside the victim.
            let room = self.members[m].free.len() as u64 * self.pages_per_block as u64
                + self.members[m]
                    .active
                    .map_or(0, |a| (self.pages_per_block - self.blocks[a as usize].next) as u64);
            if (valid as u64) > room {
                break;
            }
            self.migrate(m, v, &mut r)?;
            self.erase(v, &mut r);
        }
        // Hand back erased borrowed blocks.
        let mut keep = VecDeque::new();
        while let Some(b) = self.members[m].free.pop_front() {
            let home = self.blocks[b as usize].home as usize;
            if home != m {
                self.blocks[b as usize].owner = home as u16;
                self.members[m].held -= 1;
                self.members[home].held += 1;
                self.members[home].free.push_back(b);
                r.blocks_returned += 1;
            } else {
                keep.push_back(b);
            }
        }
        self.members[m].free = keep;
        if r.victims == 0 && self.members[m].free.is_empty() && self.needs_block(m) {
            return Err(FlashError::OutOfSpace);
        }
        Ok(r)
    }

    /// Collect every member of the unit in one episode.
    pub fn collect_all(&mut self, target: f64, min_victims: u32) -> Result<GcReport, FlashError> {
        let mut total = GcReport::default();
        for m in 0..self.members.len() {
            let r = self.collect(m, target, min_victims)?;
            total.merge(&r);
        }
        Ok(total)
    }

    fn migrate(&mut self, m: usize, victim: u32, r: &mut GcReport) -> Result<(), FlashError> {
        let ppb = self.pages_per_block;
        let base = victim * ppb;
        for ppn in base..base + ppb {
            let lpn = self.p2l[ppn as usize];
            if lpn == INVALID {
                continue;
            }
            // The victim is Used, never Active, so program() cannot land on it.
            self.program(m, lpn)?;
            r.pages_migrated += 1;
            self.counters.gc_pages += 1;
            r.duration_ns += self.profile.read_ns + self.profile.program_ns;
        }
        debug_assert_eq!(self.blocks[victim as usize].valid, 0);
        Ok(())
    }

    fn erase(&mut self, b: u32, r: &mut GcReport) {
        let blk = &mut self.blocks[b as usize];
        blk.erase_count += 1;
        blk.valid = 0;
        blk.next = 0;
        blk.state = BlockUse::Free;
        let owner = blk.owner as usize;
        self.members[owner].free.push_back(b);
        r.victims += 1;
        r.blocks_erased += 1;
        r.duration_ns += self.profile.erase_ns.unwrap_or(0);
        self.counters.erases += 1;
    }

    /// Move `group_blocks` erased blocks from a collocated member to
    /// `borrower`. A lender qualifies if it keeps at least `reserve_ratio` of
    /// its remaining blocks free. Returns the lender.
    pub fn borrow(&mut self, borrower: usize, group_blocks: u32, reserve_ratio: f64) -> Result<usize, FlashError> {
        let lender = (0..self.members.len())
            .filter(|&l| l != borrower)
            .filter(|&l| {
                let mem = &self.members[l];
                let free = mem.free.len() as u32;
                if free < group_blocks {
                    return false;
                }
                let held_after = (mem.held - group_blocks) as f64;
                (free - group_blocks) as f64 >= reserve_ratio * held_after
            })
            .max_by_key(|&l| (self.members[l].free.len(), std::cmp::Reverse(l)))
            .ok_or(FlashError::NoLender(group_blocks))?;
        for _ in 0..group_blocks {
            // Lend from the back so the lender keeps its oldest free blocks.
            let b = self.members[lender].free.pop_back().expect("checked");
            self.blocks[b as usize].owner = borrower as u16;
            self.members[borrower].free.push_back(b);
        }
        self.members[lender].held -= group_blocks;
        self.members[borrower].held += group_blocks;
        self.counters.borrows += 1;
        Ok(lender)
    }

    pub fn borrowed_blocks(&self, m: usize) -> u32 {
        self.blocks
            .iter()
            .filter(|b| b.owner as usize == m && b.home as usize != m)
            .count() as u32
    }

    pub fn lent_blocks(&self, m: usize) -> u32 {
        self.blocks
            .iter()
            .filter(|b| b.home as usize == m && b.owner as usize != m)
            .count() as u32
    }

    pub fn erase_counts(&self) -> impl Iterator<Item = u32> + '_ {
        self.blocks.iter().map(|b| b.erase_count)
    }

    /// Mean erase count over every block of the unit.
    pub fn mean_erase_count(&self) -> f64 {
        let total: u64 = self.blocks.iter().map(|b| b.erase_count as u64).sum();
        total as f64 / self.blocks.len() as f64
    }

    pub fn total_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_state(&self, b: u32) -> (BlockUse, u32, u32) {
        let blk = &self.blocks[b as usize];
        (blk.state, blk.valid, blk.erase_count)
    }

    /// Logical content of a member: `content[lpn]`, 0 for never written.
    pub fn contents(&self, m: usize) -> &[u64] {
        &self.members[m].content
    }

    pub fn snapshot(&self, m: usize) -> MemberSnapshot {
        let mut hist = std::collections::BTreeMap::new();
        for b in self.blocks.iter().filter(|b| b.home as usize == m) {
            *hist.entry(b.erase_count).or_insert(0u32) += 1;
        }
        MemberSnapshot {
            free_ratio: self.free_ratio(m),
            free_blocks: self.free_blocks(m),
            held_blocks: self.held_blocks(m),
            borrowed_blocks: self.borrowed_blocks(m),
            lent_blocks: self.lent_blocks(m),
            mapped_pages: self.members[m].l2p.iter().filter(|&&p| p != INVALID).count() as u64,
            erase_histogram: hist.into_iter().collect(),
        }
    }

    /// Check mapping soundness and block accounting; returns a description of
    /// the first violation.
    pub fn audit(&self) -> Result<(), String> {
        if self.profile.gc_free() {
            return Ok(());
        }
        let ppb = self.pages_per_block;
        let mut valid = vec![0u32; self.blocks.len()];
        for (m, mem) in self.members.iter().enumerate() {
            for (lpn, &ppn) in mem.l2p.iter().enumerate() {
                if ppn == INVALID {
                    continue;
                }
                if self.p2l[ppn as usize] != lpn as u32 {
                    return Err(format!("member {m} lpn {lpn} -> ppn {ppn} not reflected in p2l"));
                }
                let b = (ppn / ppb) as usize;
                if self.blocks[b].owner as usize != m {
                    return Err(format!("member {m} maps into block {b} owned by {}", self.blocks[b].owner));
                }
                valid[b] += 1;
            }
        }
        let live_p2l = self.p2l.iter().filter(|&&l| l != INVALID).count();
        let live_l2p: u32 = valid.iter().sum();
        if live_p2l != live_l2p as usize {
            return Err(format!("{live_p2l} live physical pages but {live_l2p} mapped logical pages"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.valid != valid[i] {
                return Err(format!("block {i} valid count {} != {}", b.valid, valid[i]));
            }
            if b.state == BlockUse::Free && (b.valid != 0 || b.next != 0) {
                return Err(format!("free block {i} holds data"));
            }
        }
        for (m, mem) in self.members.iter().enumerate() {
            let held = self.blocks.iter().filter(|b| b.owner as usize == m).count() as u32;
            if held != mem.held {
                return Err(format!("member {m} holds {held} blocks, accounted {}", mem.held));
            }
            for &b in &mem.free {
                if self.blocks[b as usize].state != BlockUse::Free || self.blocks[b as usize].owner as usize != m {
                    return Err(format!("member {m} free list has non-free block {b}"));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flash::ProfileKind;

    fn pssd() -> DeviceProfile {
        DeviceProfile::of(ProfileKind::PSsd)
    }

    #[test]
    fn fresh_unit_is_empty() {
        let u = FlashUnit::new(pssd(), 4, &[(100, 200)], 0.45).unwrap();
        assert_eq!(u.free_ratio(0), 1.0);
        assert!(u.erase_counts().all(|e| e == 0));
        assert_eq!(u.read(0, 5).unwrap(), None);
    }

    #[test]
    fn overwrite_is_out_of_place() {
        let mut u = FlashUnit::new(pssd(), 4, &[(4, 8)], 0.45).unwrap();
        u.write(0, 3, 1).unwrap();
        let first = u.physical_page(0, 3).unwrap();
        u.write(0, 3, 2).unwrap();
        let second = u.physical_page(0, 3).unwrap();
        assert_ne!(first, second);
        assert_eq!(u.block_state(first / 4).1, 1);
        assert_eq!(u.read(0, 3).unwrap(), Some(2));
        u.audit().unwrap();
    }

    #[test]
    fn free_ratio_boundaries() {
        let mut u = FlashUnit::new(pssd(), 1, &[(100, 99)], 0.45).unwrap();
        for lpn in 0..75 {
            u.write(0, lpn, 1).unwrap();
        }
        assert_eq!(u.free_ratio(0), 0.25);
    }

    #[test]
    fn greedy_prefers_fewest_valid() {
        // Two full blocks of 16 pages; invalidate 13 in block 0 and 6 in
        // block 1 so they hold 3 and 10 valid pages.
        let mut u = FlashUnit::new(pssd(), 16, &[(6, 32)], 0.45).unwrap();
        for lpn in 0..32 {
            u.write(0, lpn, 1).unwrap();
        }
        for lpn in 0..13 {
            u.write(0, lpn, 2).unwrap();
        }
        for lpn in 16..22 {
            u.write(0, lpn, 2).unwrap();
        }
        assert_eq!(u.block_state(0).1, 3);
        assert_eq!(u.block_state(1).1, 10);
        let r = u.collect(0, 0.0, 1).unwrap();
        assert_eq!(r.victims, 1);
        assert_eq!(u.block_state(0).0, BlockUse::Free);
        assert_eq!(r.pages_migrated, 3);
        let p = pssd();
        assert_eq!(r.duration_ns, 3 * (p.read_ns + p.program_ns) + p.erase_ns.unwrap());
        u.audit().unwrap();
    }

    #[test]
    fn empty_victim_costs_one_erase() {
        let mut u = FlashUnit::new(pssd(), 2, &[(4, 4)], 0.45).unwrap();
        u.write(0, 0, 1).unwrap();
        u.write(0, 1, 1).unwrap();
        u.write(0, 0, 2).unwrap();
        u.write(0, 1, 2).unwrap();
        u.write(0, 2, 1).unwrap();
        let r = u.collect(0, 0.0, 1).unwrap();
        assert_eq!((r.pages_migrated, r.blocks_erased), (0, 1));
        assert_eq!(r.duration_ns, pssd().erase_ns.unwrap());
    }

    #[test]
    fn emergency_collection_keeps_writes_going() {
        let mut u = FlashUnit::new(pssd(), 8, &[(8, 48)], 0.3).unwrap();
        for i in 0..5_000u64 {
            u.write(0, (i * 7) % 48, i + 1).unwrap();
        }
        assert!(u.counters().emergency_gcs > 0);
        u.audit().unwrap();
    }

    #[test]
    fn borrowing_and_return() {
        // Two members of 16 blocks each; lender has 16 free.
        let mut u = FlashUnit::new(pssd(), 4, &[(16, 40), (16, 40)], 0.45).unwrap();
        let lender = u.borrow(0, 4, 0.35).unwrap();
        assert_eq!(lender, 1);
        assert_eq!(u.held_blocks(0), 20);
        assert_eq!(u.free_ratio(1), 1.0);
        assert_eq!(u.held_blocks(1), 12);
        // Fill member 0 so it writes into borrowed blocks, then collect.
        for i in 0..400u64 {
            u.write(0, i % 40, i + 1).unwrap();
        }
        u.audit().unwrap();
        let before: u64 = u.erase_counts().map(u64::from).sum();
        let r = u.collect(0, 0.45, 1).unwrap();
        u.audit().unwrap();
        assert_eq!(u.borrowed_blocks(0), 0);
        assert_eq!(u.held_blocks(1), 16);
        assert_eq!(u.lent_blocks(1), 0);
        let after: u64 = u.erase_counts().map(u64::from).sum();
        assert_eq!(after - before, r.blocks_erased);
    }

    #[test]
    fn borrow_fails_without_spare() {
        let mut u = FlashUnit::new(pssd(), 4, &[(8, 20), (8, 20)], 0.45).unwrap();
        for i in 0..20 {
            u.write(1, i, 1).unwrap();
        }
        assert_eq!(u.borrow(0, 4, 0.35), Err(FlashError::NoLender(4)));
    }

    #[test]
    fn gc_free_profile_never_collects() {
        let mut u = FlashUnit::new(DeviceProfile::of(ProfileKind::Optane), 4, &[(4, 16)], 0.45).unwrap();
        for i in 0..1000 {
            u.write(0, i % 16, i + 1).unwrap();
        }
        assert_eq!(u.free_ratio(0), 1.0);
        assert_eq!(u.counters().erases, 0);
    }
}
