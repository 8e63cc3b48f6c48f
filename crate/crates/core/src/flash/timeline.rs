use crate::engine::{Nanos, SimTime};

/// Occupancy of one flash unit's parallel slots (one per chip). A GC
/// episode holds every slot for its whole duration.
#[derive(Debug, Clone)]
pub struct Timeline {
    slots: Vec<SimTime>,
    gc_until: SimTime,
    busy_ns: u128,
}

impl Timeline {
    pub fn new(slots: u32) -> Self {
        Timeline {
            slots: vec![SimTime::ZERO; slots.max(1) as usize],
            gc_until: SimTime::ZERO,
            busy_ns: 0,
        }
    }

    pub fn slots(&self) -> usize {
        self.slots.len()
    }

    pub fn in_gc(&self, now: SimTime) -> bool {
        now < self.gc_until
    }

    pub fn gc_until(&self) -> SimTime {
        self.gc_until
    }

    /// Lowest-index slot free at `now`, unless a GC episode holds the unit.
    pub fn free_slot(&self, now: SimTime) -> Option<usize> {
        if self.in_gc(now) {
            return None;
        }
        self.slots.iter().position(|&t| t <= now)
    }

    pub fn inflight(&self, now: SimTime) -> usize {
        self.slots.iter().filter(|&&t| t > now).count()
    }

    /// Instant at which every slot and any GC episode are done.
    pub fn idle_at(&self) -> SimTime {
        self.slots
            .iter()
            .copied()
            .max()
            .unwrap_or(SimTime::ZERO)
            .max(self.gc_until)
    }

    pub fn occupy(&mut self, slot: usize, now: SimTime, dur: Nanos) -> SimTime {
        let start = now.max(self.slots[slot]).max(self.gc_until);
        let end = start + dur;
        self.slots[slot] = end;
        self.busy_ns += dur as u128;
        end
    }

    /// Serve one operation on the earliest available slot, waiting out any
    /// GC episode. Returns `(start, completion)`.
    pub fn service(&mut self, now: SimTime, dur: Nanos) -> (SimTime, SimTime) {
        let (slot, &t) = self
            .slots
            .iter()
            .enumerate()
            .min_by_key(|&(i, &t)| (t, i))
            .expect("at least one slot");
        let start = now.max(t).max(self.gc_until);
        (start, self.occupy(slot, start, dur))
    }

    /// Start a GC episode once in-flight operations drain. Returns
    /// `(start, end)`.
    pub fn start_gc(&mut self, now: SimTime, dur: Nanos) -> (SimTime, SimTime) {
        let start = now.max(self.idle_at());
        let end = start + dur;
        self.gc_until = end;
        self.busy_ns += dur as u128 * self.slots.len() as u128;
        (start, end)
    }

    /// Slot-nanoseconds of work scheduled so far.
    pub fn busy_ns(&self) -> u128 {
        self.busy_ns
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{NS_PER_MS, NS_PER_US};
    use crate::flash::{DeviceProfile, ProfileKind};

    #[test]
    fn idle_read_is_fast() {
        let p = DeviceProfile::of(ProfileKind::PSsd);
        let mut t = Timeline::new(4);
        let (_, done) = t.service(SimTime::ZERO, p.read_ns);
        assert!(done.as_ns() < 100 * NS_PER_US);
    }

    #[test]
    fn read_waits_for_erase() {
        let p = DeviceProfile::of(ProfileKind::PSsd);
        let mut t = Timeline::new(4);
        let erase = p.erase_ns.unwrap();
        t.start_gc(SimTime::ZERO, erase);
        let arrive = SimTime::from_ms(1);
        let (start, done) = t.service(arrive, p.read_ns);
        assert_eq!(start.as_ns(), erase);
        assert_eq!(done.as_ns(), erase + p.read_ns);
        assert!(done.since(arrive) >= 3 * NS_PER_MS);
    }

    #[test]
    fn gc_starts_after_inflight_work() {
        let mut t = Timeline::new(2);
        t.occupy(0, SimTime::ZERO, 500);
        let (start, end) = t.start_gc(SimTime(100), 1000);
        assert_eq!((start, end), (SimTime(500), SimTime(1500)));
        assert_eq!(t.free_slot(SimTime(1000)), None);
        assert_eq!(t.free_slot(SimTime(1500)), Some(0));
    }
}
