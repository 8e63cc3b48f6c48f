//! Deterministic discrete-event core.
//!
//! A single virtual clock in integer nanoseconds, a priority queue of pending
//! events ordered by `(fire_at, seq)`, and a set of named random streams that
//! are derived from one master seed. Every other part of the simulator moves
//! time forward only through an [`Engine`].

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::ops::{Add, AddAssign};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Durations are plain nanosecond counts.
pub type Nanos = u64;

pub const NS_PER_US: Nanos = 1_000;
pub const NS_PER_MS: Nanos = 1_000_000;
pub const NS_PER_SEC: Nanos = 1_000_000_000;

/// An instant on the simulation clock, in nanoseconds since start.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub fn from_us(us: u64) -> Self {
        SimTime(us * NS_PER_US)
    }

    pub fn from_ms(ms: u64) -> Self {
        SimTime(ms * NS_PER_MS)
    }

    pub fn from_secs(s: u64) -> Self {
        SimTime(s * NS_PER_SEC)
    }

    pub fn as_ns(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / NS_PER_SEC as f64
    }

    /// Elapsed time since `earlier`, zero if `earlier` is in the future.
    pub fn since(self, earlier: SimTime) -> Nanos {
        self.0.saturating_sub(earlier.0)
    }
}

impl Add<Nanos> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: Nanos) -> SimTime {
        SimTime(self.0.saturating_add(rhs))
    }
}

impl AddAssign<Nanos> for SimTime {
    fn add_assign(&mut self, rhs: Nanos) {
        self.0 = self.0.saturating_add(rhs);
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6}s", self.as_secs_f64())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("unknown random stream `{0}`")]
    UnknownStream(String),
    #[error("random stream `{0}` registered twice")]
    DuplicateStream(String),
}

/// Handle returned by [`Engine::schedule`]; used to cancel a pending event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

/// Index of a registered random stream, cheaper than a name lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId(usize);

struct Pending<E> {
    fire_at: SimTime,
    seq: u64,
    kind: E,
}

impl<E> PartialEq for Pending<E> {
    fn eq(&self, other: &Self) -> bool {
        self.fire_at == other.fire_at && self.seq == other.seq
    }
}

impl<E> Eq for Pending<E> {}

impl<E> PartialOrd for Pending<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<E> Ord for Pending<E> {
    // Reversed so the max-heap pops the earliest (fire_at, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .fire_at
            .cmp(&self.fire_at)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Derive the seed of a named stream from the master seed.
///
/// FNV-1a over the name followed by a splitmix64 finalizer; stable across
/// platforms and releases.
pub fn derive_seed(master: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    splitmix64(master ^ h)
}

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A fresh generator for `(master, name)`.
pub fn stream_rng(master: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, name))
}

pub struct Engine<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Pending<E>>,
    cancelled: HashSet<u64>,
    seed: u64,
    stream_names: Vec<String>,
    streams: Vec<ChaCha8Rng>,
    dispatched: u64,
}

impl<E> Engine<E> {
    pub fn new(seed: u64) -> Self {
        Engine {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            seed,
            stream_names: Vec::new(),
            streams: Vec::new(),
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Pending events, including cancelled ones not yet discarded.
    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, delay: Nanos, kind: E) -> EventHandle {
        self.schedule_at(self.now + delay, kind)
    }

    /// Schedule at an absolute instant; instants in the past fire at `now`.
    pub fn schedule_at(&mut self, at: SimTime, kind: E) -> EventHandle {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Pending {
            fire_at: at.max(self.now),
            seq,
            kind,
        });
        EventHandle(seq)
    }

    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.next_seq {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pop the next live event if it fires at or before `end`, advancing the
    /// clock to its fire time.
    pub fn pop_until(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            let top = self.queue.peek()?;
            if top.fire_at > end {
                return None;
            }
            let ev = self.queue.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&ev.seq) {
                continue;
            }
            debug_assert!(ev.fire_at >= self.now);
            self.now = ev.fire_at;
            self.dispatched += 1;
            return Some((ev.fire_at, ev.kind));
        }
    }

    /// Pop the next live event regardless of its time.
    pub fn step(&mut self) -> Option<(SimTime, E)> {
        self.pop_until(SimTime::MAX)
    }

    /// Move the clock forward without dispatching; never moves it backwards.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }

    /// Dispatch every event with `fire_at <= end` through `handler`, then
    /// set the clock to `end`. Returns the number of events dispatched.
    pub fn run_until<F>(&mut self, end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Engine<E>, SimTime, E),
    {
        let mut n = 0;
        while let Some((t, ev)) = self.pop_until(end) {
            handler(self, t, ev);
            n += 1;
        }
        self.advance_to(end);
        n
    }

    pub fn register_stream(&mut self, name: &str) -> Result<StreamId, EngineError> {
        if self.stream_names.iter().any(|n| n == name) {
            return Err(EngineError::DuplicateStream(name.to_string()));
        }
        self.stream_names.push(name.to_string());
        self.streams.push(stream_rng(self.seed, name));
        Ok(StreamId(self.streams.len() - 1))
    }

    pub fn stream_id(&self, name: &str) -> Result<StreamId, EngineError> {
        self.stream_names
            .iter()
            .position(|n| n == name)
            .map(StreamId)
            .ok_or_else(|| EngineError::UnknownStream(name.to_string()))
    }

    /// Uniform sample in `[0, 1)` from a registered stream.
    pub fn rng_draw(&mut self, name: &str) -> Result<f64, EngineError> {
        let id = self.stream_id(name)?;
        Ok(self.draw(id))
    }

    pub fn draw(&mut self, id: StreamId) -> f64 {
        self.streams[id.0].random::<f64>()
    }

    pub fn rng(&mut self, id: StreamId) -> &mut ChaCha8Rng {
        &mut self.streams[id.0]
    }
}
