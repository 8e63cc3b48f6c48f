//! Server-side I/O scheduling.
//!
//! Baselines (FIFO, Deadline-like, Kyber-like) and their network-aware
//! variants, which order requests by `net + waited + predicted return`.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Nanos, SimTime, NS_PER_US};

pub const WINDOW_LEN: usize = 100;
pub const DEFAULT_PRIOR_NS: Nanos = 100 * NS_PER_US;
pub const KYBER_EPOCH: u32 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    Read = 0,
    Write = 1,
}

impl Dir {
    pub fn idx(self) -> usize {
        self as usize
    }

    pub fn other(self) -> Dir {
        match self {
            Dir::Read => Dir::Write,
            Dir::Write => Dir::Read,
        }
    }
}

/// Mean of the most recent [`WINDOW_LEN`] samples, kept with an exact
/// integer running sum.
#[derive(Debug, Clone)]
pub struct SlidingWindow {
    buf: [u64; WINDOW_LEN],
    len: usize,
    head: usize,
    sum: u64,
    prior: Nanos,
}

impl SlidingWindow {
    pub fn new(prior: Nanos) -> Self {
        SlidingWindow {
            buf: [0; WINDOW_LEN],
            len: 0,
            head: 0,
            sum: 0,
            prior,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Record a sample and return the new mean.
    pub fn update(&mut self, sample: Nanos) -> f64 {
        if self.len == WINDOW_LEN {
            self.sum -= self.buf[self.head];
        } else {
            self.len += 1;
        }
        self.buf[self.head] = sample;
        self.sum += sample;
        self.head = (self.head + 1) % WINDOW_LEN;
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.len == 0 {
            return self.prior as f64;
        }
        self.sum as f64 / self.len as f64
    }

    /// Mean rounded to the nearest nanosecond.
    pub fn predict_ns(&self) -> Nanos {
        if self.len == 0 {
            return self.prior;
        }
        let n = self.len as u64;
        (self.sum + n / 2) / n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchedVariant {
    Fifo,
    Deadline,
    Kyber,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown scheduler variant `{0}` (expected fifo, deadline or kyber)")]
pub struct UnknownVariant(pub String);

impl FromStr for SchedVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fifo" | "noop" | "no-op" => Ok(SchedVariant::Fifo),
            "deadline" => Ok(SchedVariant::Deadline),
            "kyber" => Ok(SchedVariant::Kyber),
            _ => Err(UnknownVariant(s.to_string())),
        }
    }
}

impl fmt::Display for SchedVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedVariant::Fifo => "fifo",
            SchedVariant::Deadline => "deadline",
            SchedVariant::Kyber => "kyber",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulerPolicy {
    pub variant: SchedVariant,
    pub coordinated: bool,
    /// Deadline (Deadline) or P95 target (Kyber) for reads; unused by FIFO.
    pub read_target_ns: Nanos,
    pub write_target_ns: Nanos,
}

impl SchedulerPolicy {
    pub fn new(variant: SchedVariant, coordinated: bool) -> Self {
        let us = NS_PER_US;
        let (r, w) = match (variant, coordinated) {
            (SchedVariant::Fifo, _) => (0, 0),
            (SchedVariant::Deadline, false) => (500 * us, 1750 * us),
            (SchedVariant::Deadline, true) => (1500 * us, 2750 * us),
            (SchedVariant::Kyber, false) => (750 * us, 3000 * us),
            (SchedVariant::Kyber, true) => (1750 * us, 4000 * us),
        };
        SchedulerPolicy {
            variant,
            coordinated,
            read_target_ns: r,
            write_target_ns: w,
        }
    }

    pub fn target(&self, d: Dir) -> Nanos {
        match d {
            Dir::Read => self.read_target_ns,
            Dir::Write => self.write_target_ns,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "{}-{}",
            self.variant,
            if self.coordinated { "coordinated" } else { "baseline" }
        )
    }
}

/// Look up a policy by variant name.
pub fn configure_policy(variant: &str, coordinated: bool) -> Result<SchedulerPolicy, UnknownVariant> {
    Ok(SchedulerPolicy::new(variant.parse()?, coordinated))
}

/// One request waiting in a server queue.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Queued {
    pub id: u64,
    pub dir: Dir,
    pub net_ns: Nanos,
    pub enqueue: SimTime,
    pub predict_ns: Nanos,
}

impl Queued {
    /// `net + (now - enqueue) + predict`.
    pub fn priority(&self, now: SimTime) -> Nanos {
        self.net_ns + now.since(self.enqueue) + self.predict_ns
    }

    // Priority minus `now`: constant over time, so it orders the queue.
    fn static_key(&self) -> i64 {
        (self.net_ns + self.predict_ns) as i64 - self.enqueue.as_ns() as i64
    }
}

/// Direction chosen by the deadline turn logic: a head past its deadline is
/// served first, the more overdue one when both are; otherwise reads go
/// first.
pub fn deadline_turn(read_head_age: Option<Nanos>, write_head_age: Option<Nanos>, p: &SchedulerPolicy) -> Option<Dir> {
    match (read_head_age, write_head_age) {
        (None, None) => None,
        (Some(_), None) => Some(Dir::Read),
        (None, Some(_)) => Some(Dir::Write),
        (Some(r), Some(w)) => {
            let r_over = r.saturating_sub(p.read_target_ns);
            let w_over = w.saturating_sub(p.write_target_ns);
            if w_over > r_over {
                Some(Dir::Write)
            } else {
                Some(Dir::Read)
            }
        }
    }
}

#[derive(Debug, Clone, Default)]
struct DirQueue {
    fifo: BTreeMap<u64, Queued>,
    by_prio: BTreeSet<(i64, Reverse<u64>)>,
}

impl DirQueue {
    fn push(&mut self, seq: u64, q: Queued) {
        self.by_prio.insert((q.static_key(), Reverse(seq)));
        self.fifo.insert(seq, q);
    }

    fn oldest(&self) -> Option<(u64, &Queued)> {
        self.fifo.iter().next().map(|(&s, q)| (s, q))
    }

    fn best(&self) -> Option<(u64, &Queued)> {
        let &(_, Reverse(seq)) = self.by_prio.iter().next_back()?;
        Some((seq, &self.fifo[&seq]))
    }

    fn remove(&mut self, seq: u64) -> Queued {
        let q = self.fifo.remove(&seq).expect("queued");
        self.by_prio.remove(&(q.static_key(), Reverse(seq)));
        q
    }
}

#[derive(Debug, Clone)]
struct Kyber {
    budget: [u32; 2],
    max: u32,
    samples: [Vec<Nanos>; 2],
    completions: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedCounters {
    pub dispatched: [u64; 2],
    pub throttled: u64,
    pub budget_changes: u64,
}

/// One queue in front of one flash unit.
#[derive(Debug, Clone)]
pub struct Scheduler {
    policy: SchedulerPolicy,
    queues: [DirQueue; 2],
    next_seq: u64,
    inflight: [u32; 2],
    kyber: Option<Kyber>,
    counters: SchedCounters,
}

impl Scheduler {
    pub fn new(policy: SchedulerPolicy, slots: u32) -> Self {
        let kyber = (policy.variant == SchedVariant::Kyber).then(|| Kyber {
            budget: [slots.max(1); 2],
            max: slots.max(1),
            samples: [Vec::new(), Vec::new()],
            completions: 0,
        });
        Scheduler {
            policy,
            queues: [DirQueue::default(), DirQueue::default()],
            next_seq: 0,
            inflight: [0; 2],
            kyber,
            counters: SchedCounters::default(),
        }
    }

    pub fn policy(&self) -> &SchedulerPolicy {
        &self.policy
    }

    pub fn counters(&self) -> &SchedCounters {
        &self.counters
    }

    pub fn len(&self) -> usize {
        self.queues[0].fifo.len() + self.queues[1].fifo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn queued(&self, d: Dir) -> usize {
        self.queues[d.idx()].fifo.len()
    }

    pub fn inflight(&self, d: Dir) -> u32 {
        self.inflight[d.idx()]
    }

    pub fn kyber_budget(&self, d: Dir) -> Option<u32> {
        self.kyber.as_ref().map(|k| k.budget[d.idx()])
    }

    pub fn enqueue(&mut self, q: Queued) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queues[q.dir.idx()].push(seq, q);
    }

    /// Remove every queued write, oldest first.
    pub fn take_writes(&mut self) -> Vec<Queued> {
        let q = std::mem::take(&mut self.queues[Dir::Write.idx()]);
        q.fifo.into_values().collect()
    }

    /// Age used by the deadline turn logic; the coordinated variant measures
    /// it end to end.
    fn head_age(&self, d: Dir, now: SimTime) -> Option<Nanos> {
        let (_, q) = self.queues[d.idx()].oldest()?;
        Some(if self.policy.coordinated {
            q.priority(now)
        } else {
            now.since(q.enqueue)
        })
    }

    /// Direction the policy would serve next, ignoring intra-queue order.
    pub fn turn(&self, now: SimTime) -> Option<Dir> {
        match self.policy.variant {
            SchedVariant::Fifo => {
                let r = self.queues[0].oldest().map(|(s, _)| s);
                let w = self.queues[1].oldest().map(|(s, _)| s);
                if self.policy.coordinated {
                    let r = self.queues[0].best().map(|(s, q)| (q.static_key(), Reverse(s)));
                    let w = self.queues[1].best().map(|(s, q)| (q.static_key(), Reverse(s)));
                    return match (r, w) {
                        (None, None) => None,
                        (Some(_), None) => Some(Dir::Read),
                        (None, Some(_)) => Some(Dir::Write),
                        (Some(a), Some(b)) => Some(if a >= b { Dir::Read } else { Dir::Write }),
                    };
                }
                match (r, w) {
                    (None, None) => None,
                    (Some(_), None) => Some(Dir::Read),
                    (None, Some(_)) => Some(Dir::Write),
                    (Some(a), Some(b)) => Some(if a < b { Dir::Read } else { Dir::Write }),
                }
            }
            SchedVariant::Deadline => deadline_turn(
                self.head_age(Dir::Read, now),
                self.head_age(Dir::Write, now),
                &self.policy,
            ),
            SchedVariant::Kyber => {
                let k = self.kyber.as_ref().expect("kyber state");
                let open = |d: Dir| {
                    !self.queues[d.idx()].fifo.is_empty() && self.inflight[d.idx()] < k.budget[d.idx()]
                };
                if open(Dir::Read) {
                    Some(Dir::Read)
                } else if open(Dir::Write) {
                    Some(Dir::Write)
                } else {
                    None
                }
            }
        }
    }

    /// Pick the next request to send to the device, or `None` if the queue
    /// is empty or throttled.
    pub fn dispatch(&mut self, now: SimTime) -> Option<Queued> {
        let Some(d) = self.turn(now) else {
            if !self.is_empty() {
                self.counters.throttled += 1;
            }
            return None;
        };
        let dq = &self.queues[d.idx()];
        let seq = if self.policy.coordinated {
            dq.best()?.0
        } else {
            dq.oldest()?.0
        };
        let q = self.queues[d.idx()].remove(seq);
        self.inflight[d.idx()] += 1;
        self.counters.dispatched[d.idx()] += 1;
        Some(q)
    }

    /// Report a completed request. `latency` is what the policy's targets
    /// are measured against (server time, or end-to-end estimate for the
    /// coordinated variant).
    pub fn complete(&mut self, d: Dir, latency: Nanos) {
        self.inflight[d.idx()] = self.inflight[d.idx()].saturating_sub(1);
        let targets = [self.policy.read_target_ns, self.policy.write_target_ns];
        let Some(k) = self.kyber.as_mut() else { return };
        k.samples[d.idx()].push(latency);
        k.completions += 1;
        if k.completions < KYBER_EPOCH {
            return;
        }
        let mut breached = [false; 2];
        for (i, s) in k.samples.iter_mut().enumerate() {
            if s.is_empty() {
                continue;
            }
            s.sort_unstable();
            let rank = ((s.len() as f64 * 0.95).ceil() as usize).clamp(1, s.len());
            breached[i] = s[rank - 1] > targets[i];
            s.clear();
        }
        let before = k.budget;
        if breached[0] || breached[1] {
            for i in 0..2 {
                if breached[i] {
                    k.budget[1 - i] = (k.budget[1 - i] / 2).max(1);
                }
            }
        } else {
            for b in &mut k.budget {
                *b = (*b * 2).min(k.max);
            }
        }
        if k.budget != before {
            self.counters.budget_changes += 1;
        }
        k.completions = 0;
    }
}
