use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub lpn: u64,
    pub version: u64,
    pub bytes: u64,
}

/// DRAM write buffer in front of one vSSD. Writes are acknowledged once
/// buffered and drained to flash in FIFO order.
#[derive(Debug, Clone)]
pub struct WriteCache {
    capacity: u64,
    occupancy: u64,
    pending: VecDeque<CacheEntry>,
    // lpn -> (newest buffered version, buffered copies)
    index: HashMap<u64, (u64, u32)>,
    peak: u64,
}

impl WriteCache {
    pub fn new(capacity: u64) -> Self {
        WriteCache {
            capacity,
            occupancy: 0,
            pending: VecDeque::new(),
            index: HashMap::new(),
            peak: 0,
        }
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn peak(&self) -> u64 {
        self.peak
    }

    pub fn fill(&self) -> f64 {
        if self.capacity == 0 {
            return 1.0;
        }
        self.occupancy as f64 / self.capacity as f64
    }

    pub fn len(&self) -> usize {
        self.pending.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pending.is_empty()
    }

    pub fn has_room(&self, bytes: u64) -> bool {
        self.occupancy + bytes <= self.capacity
    }

    /// Buffer a write; returns `false` (and buffers nothing) if it does not fit.
    pub fn insert(&mut self, lpn: u64, version: u64, bytes: u64) -> bool {
        if !self.has_room(bytes) {
            return false;
        }
        self.occupancy += bytes;
        self.peak = self.peak.max(self.occupancy);
        self.pending.push_back(CacheEntry { lpn, version, bytes });
        let e = self.index.entry(lpn).or_insert((0, 0));
        e.0 = e.0.max(version);
        e.1 += 1;
        true
    }

    /// Newest buffered version of `lpn`, if any.
    pub fn lookup(&self, lpn: u64) -> Option<u64> {
        self.index.get(&lpn).map(|e| e.0)
    }

    /// Take the oldest buffered write for flushing.
    pub fn pop(&mut self) -> Option<CacheEntry> {
        let e = self.pending.pop_front()?;
        self.occupancy -= e.bytes;
        if let Some(slot) = self.index.get_mut(&e.lpn) {
            slot.1 -= 1;
            if slot.1 == 0 {
                self.index.remove(&e.lpn);
            }
        }
        Some(e)
    }

    pub fn iter(&self) -> impl Iterator<Item = &CacheEntry> {
        self.pending.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounded_and_fifo() {
        let mut c = WriteCache::new(8192);
        assert!(c.insert(1, 10, 4096));
        assert!(c.insert(1, 11, 4096));
        assert!(!c.insert(2, 12, 4096));
        assert_eq!(c.lookup(1), Some(11));
        assert_eq!(c.pop().unwrap().version, 10);
        assert_eq!(c.lookup(1), Some(11));
        assert_eq!(c.pop().unwrap().version, 11);
        assert_eq!(c.lookup(1), None);
        assert_eq!(c.occupancy(), 0);
        assert_eq!(c.peak(), 8192);
    }
}
