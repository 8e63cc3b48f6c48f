//! Workload generation, network path latency, and switch queueing.

use std::collections::{BTreeMap, VecDeque};
use std::io::BufRead;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Nanos, SimTime, NS_PER_MS, NS_PER_SEC, NS_PER_US};
use crate::sched::Dir;

pub const DEFAULT_THETA: f64 = 0.99;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid workload: {0}")]
    Workload(String),
    #[error("trace line {line}: {msg}")]
    Trace { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KeyDist {
    Zipfian { theta: f64 },
    Uniform,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Arrival {
    /// Poisson arrivals per volume.
    Open { rate_per_sec: f64 },
    /// Fixed number of clients per volume, each issuing its next request
    /// `think_ns` after the previous one completes.
    Closed {
        clients: u32,
        #[serde(default)]
        think_ns: Nanos,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Pattern {
    Mixed,
    /// Alternating all-write and all-read phases; the write phase takes
    /// `write_ratio` of each cycle.
    Phased { cycle_ns: Nanos },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadSpec {
    pub write_ratio: f64,
    pub request_size: u64,
    /// Keys per volume.
    pub key_space: u64,
    pub distribution: KeyDist,
    pub arrival: Arrival,
    pub pattern: Pattern,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            write_ratio: 0.5,
            request_size: 4096,
            key_space: 100_000,
            distribution: KeyDist::Zipfian { theta: DEFAULT_THETA },
            arrival: Arrival::Closed { clients: 32, think_ns: 0 },
            pattern: Pattern::Mixed,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<(), TrafficError> {
        if !(0.0..=1.0).contains(&self.write_ratio) {
            return Err(TrafficError::Workload(format!("write_ratio {} outside [0,1]", self.write_ratio)));
        }
        if self.key_space == 0 || self.request_size == 0 {
            return Err(TrafficError::Workload("key_space and request_size must be positive".into()));
        }
        if let KeyDist::Zipfian { theta } = self.distribution {
            if !(theta > 0.0 && theta < 1.0) {
                return Err(TrafficError::Workload(format!("zipf theta {theta} outside (0,1)")));
            }
        }
        match self.arrival {
            Arrival::Open { rate_per_sec } if !(rate_per_sec > 0.0) => {
                return Err(TrafficError::Workload("open-loop rate must be positive".into()))
            }
            Arrival::Closed { clients: 0, .. } => {
                return Err(TrafficError::Workload("closed loop needs at least one client".into()))
            }
            _ => {}
        }
        if let Pattern::Phased { cycle_ns: 0 } = self.pattern {
            return Err(TrafficError::Workload("phase cycle must be positive".into()));
        }
        Ok(())
    }

    /// Apply a named application profile (write ratio and pattern).
    pub fn with_preset(mut self, name: &str) -> Result<Self, TrafficError> {
        let (w, phased) = preset(name)?;
        self.write_ratio = w;
        self.pattern = if phased {
            Pattern::Phased {
                cycle_ns: 2 * NS_PER_SEC,
            }
        } else {
            Pattern::Mixed
        };
        Ok(self)
    }
}

/// Write ratio and whether the profile is phased.
pub fn preset(name: &str) -> Result<(f64, bool), TrafficError> {
    Ok(match name.to_ascii_lowercase().as_str() {
        "tpc-h" | "tpch" => (0.0227, false),
        "seats" => (0.1034, false),
        "auctionmark" => (0.5376, true),
        "tpc-c" | "tpcc" => (0.5995, false),
        "twitter" => (0.9786, false),
        "ycsb-a" => (0.5, false),
        "ycsb-b" => (0.05, false),
        "ycsb-c" => (0.0, false),
        _ => return Err(TrafficError::UnknownPreset(name.to_string())),
    })
}

pub const PRESETS: [&str; 5] = ["tpc-h", "seats", "auctionmark", "tpc-c", "twitter"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestSkeleton {
    pub dir: Dir,
    pub key: u64,
}

/// Multiplicative bijection on `[0, n)` so popular ranks are spread over
/// the key space.
#[derive(Debug, Clone, Copy)]
pub struct Scrambler {
    n: u64,
    mul: u64,
}

impl Scrambler {
    pub fn new(n: u64) -> Self {
        let mut mul = 0x9E37_79B9 % n.max(1);
        while n > 1 && gcd(mul, n) != 1 {
            mul += 1;
        }
        Scrambler { n, mul: mul.max(1) }
    }

    pub fn apply(&self, x: u64) -> u64 {
        ((x as u128 * self.mul as u128) % self.n as u128) as u64
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Per-volume request generator.
#[derive(Debug, Clone)]
pub struct Workload {
    spec: WorkloadSpec,
    zipf: Option<Zipf<f64>>,
    scramble: Scrambler,
    next_seq: u64,
}

impl Workload {
    pub fn new(spec: WorkloadSpec) -> Result<Self, TrafficError> {
        spec.validate()?;
        let zipf = match spec.distribution {
            KeyDist::Zipfian { theta } => Some(
                Zipf::new(spec.key_space as f64, theta)
                    .map_err(|e| TrafficError::Workload(e.to_string()))?,
            ),
            _ => None,
        };
        Ok(Workload {
            scramble: Scrambler::new(spec.key_space),
            spec,
            zipf,
            next_seq: 0,
        })
    }

    pub fn spec(&self) -> &WorkloadSpec {
        &self.spec
    }

    /// Key with popularity rank `rank` (0 = most popular).
    pub fn key_of_rank(&self, rank: u64) -> u64 {
        self.scramble.apply(rank)
    }

    pub fn next_request<R: Rng>(&mut self, now: SimTime, rng: &mut R) -> RequestSkeleton {
        let dir = match self.spec.pattern {
            Pattern::Mixed => {
                // Draw even at the boundaries so the stream position does
                // not depend on the ratio.
                let u: f64 = rng.random();
                if u < self.spec.write_ratio {
                    Dir::Write
                } else {
                    Dir::Read
                }
            }
            Pattern::Phased { cycle_ns } => {
                let pos = now.as_ns() % cycle_ns;
                if (pos as f64) < self.spec.write_ratio * cycle_ns as f64 {
                    Dir::Write
                } else {
                    Dir::Read
                }
            }
        };
        let key = match self.spec.distribution {
            KeyDist::Zipfian { .. } => {
                let rank = self.zipf.as_ref().expect("zipf").sample(rng) as u64 - 1;
                self.scramble.apply(rank.min(self.spec.key_space - 1))
            }
            KeyDist::Uniform => rng.random_range(0..self.spec.key_space),
            KeyDist::Sequential => {
                let k = self.next_seq % self.spec.key_space;
                self.next_seq += 1;
                k
            }
        };
        RequestSkeleton { dir, key }
    }
}

/// Generalized harmonic number `sum_{k=1}^{n} k^{-theta}`.
pub fn zipf_normalizer(n: u64, theta: f64) -> f64 {
    (1..=n).map(|k| (k as f64).powf(-theta)).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetClass {
    Fast,
    Medium,
    Slow,
}

impl NetClass {
    pub fn median_ns(self) -> Nanos {
        match self {
            NetClass::Fast => 40 * NS_PER_US,
            NetClass::Medium => 200 * NS_PER_US,
            NetClass::Slow => NS_PER_MS,
        }
    }
}

impl FromStr for NetClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fast" => Ok(NetClass::Fast),
            "medium" => Ok(NetClass::Medium),
            "slow" => Ok(NetClass::Slow),
            _ => Err(format!("unknown network class `{s}`")),
        }
    }
}

/// Lognormal sigma giving P99 = 5x median: ln(5) / z_0.99.
pub fn default_sigma() -> f64 {
    5f64.ln() / 2.326_347_874_040_840_8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Congestion {
    pub start_ns: Nanos,
    pub duration_ns: Nanos,
    pub added_ns: Nanos,
}

impl Congestion {
    fn active(&self, now: SimTime) -> bool {
        now.as_ns() >= self.start_ns && now.as_ns() < self.start_ns + self.duration_ns
    }
}

/// Random congestion episodes: Poisson starts at `rate_per_sec`, fixed
/// duration and added delay, over `[0, horizon)`.
pub fn random_episodes<R: Rng>(
    rate_per_sec: f64,
    duration_ns: Nanos,
    added_ns: Nanos,
    horizon: Nanos,
    rng: &mut R,
) -> Vec<Congestion> {
    let mut out = Vec::new();
    if rate_per_sec <= 0.0 {
        return out;
    }
    let mean_gap = NS_PER_SEC as f64 / rate_per_sec;
    let mut t = 0.0;
    loop {
        let u: f64 = rng.random();
        t += -mean_gap * (1.0 - u).ln();
        if t >= horizon as f64 {
            break;
        }
        out.push(Congestion {
            start_ns: t as Nanos,
            duration_ns,
            added_ns,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub arrival_offset_ns: Nanos,
    pub dir: Dir,
    pub latency_ns: Nanos,
}

/// Parse a latency trace: CSV with columns
/// `arrival_offset_ns,direction,latency_ns` and an optional header row.
pub fn parse_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>, TrafficError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if i == 0 && cols.first() == Some(&"arrival_offset_ns") {
            continue;
        }
        let err = |msg: &str| TrafficError::Trace {
            line: i + 1,
            msg: msg.to_string(),
        };
        if cols.len() != 3 {
            return Err(err("expected 3 columns"));
        }
        let arrival_offset_ns = cols[0].parse().map_err(|_| err("bad arrival_offset_ns"))?;
        let dir = match cols[1].to_ascii_lowercase().as_str() {
            "read" | "r" => Dir::Read,
            "write" | "w" => Dir::Write,
            _ => return Err(err("direction must be read or write")),
        };
        let latency_ns = cols[2].parse().map_err(|_| err("bad latency_ns"))?;
        out.push(TraceRecord {
            arrival_offset_ns,
            dir,
            latency_ns,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
enum Base {
    LogNormal(LogNormal<f64>),
    /// Per-direction replay queues, cycled when exhausted.
    Trace { samples: [Vec<Nanos>; 2], pos: [usize; 2] },
}

/// Client-to-rack path latency model.
#[derive(Debug, Clone)]
pub struct NetProfile {
    base: Base,
    episodes: Vec<Congestion>,
}

impl NetProfile {
    pub fn lognormal(median_ns: Nanos, sigma: f64) -> Self {
        let ln = LogNormal::new((median_ns as f64).ln(), sigma).expect("valid lognormal");
        NetProfile {
            base: Base::LogNormal(ln),
            episodes: Vec::new(),
        }
    }

    pub fn class(c: NetClass) -> Self {
        Self::lognormal(c.median_ns(), default_sigma())
    }

    pub fn from_trace(records: &[TraceRecord]) -> Result<Self, TrafficError> {
        let mut samples = [Vec::new(), Vec::new()];
        let mut sorted: Vec<&TraceRecord> = records.iter().collect();
        sorted.sort_by_key(|r| r.arrival_offset_ns);
        for r in sorted {
            samples[r.dir.idx()].push(r.latency_ns);
        }
        if samples.iter().all(|s| s.is_empty()) {
            return Err(TrafficError::Trace {
                line: 0,
                msg: "trace is empty".into(),
            });
        }
        // A direction missing from the trace borrows the other's samples.
        if samples[0].is_empty() {
            samples[0] = samples[1].clone();
        }
        if samples[1].is_empty() {
            samples[1] = samples[0].clone();
        }
        Ok(NetProfile {
            base: Base::Trace { samples, pos: [0, 0] },
            episodes: Vec::new(),
        })
    }

    pub fn with_episodes(mut self, episodes: Vec<Congestion>) -> Self {
        self.episodes = episodes;
        self
    }

    pub fn episodes(&self) -> &[Congestion] {
        &self.episodes
    }

    pub fn sample_path_latency<R: Rng>(&mut self, dir: Dir, now: SimTime, rng: &mut R) -> Nanos {
        let base = match &mut self.base {
            Base::LogNormal(d) => d.sample(rng).round().max(0.0) as Nanos,
            Base::Trace { samples, pos } => {
                let s = &samples[dir.idx()];
                let v = s[pos[dir.idx()] % s.len()];
                pos[dir.idx()] += 1;
                v
            }
        };
        let extra: Nanos = self.episodes.iter().filter(|e| e.active(now)).map(|e| e.added_ns).sum();
        base + extra
    }
}

/// GCRA token bucket: `rate` packets per second with `burst` packets of
/// slack. Returns the delay before a packet arriving at `now` may leave.
#[derive(Debug, Clone)]
pub struct TokenBucket {
    interval_ns: f64,
    tolerance_ns: f64,
    tat: f64,
}

impl TokenBucket {
    pub fn new(rate_per_sec: f64, burst: u32) -> Self {
        assert!(rate_per_sec > 0.0, "token rate must be positive");
        let interval_ns = NS_PER_SEC as f64 / rate_per_sec;
        TokenBucket {
            interval_ns,
            tolerance_ns: interval_ns * burst.saturating_sub(1) as f64,
            tat: 0.0,
        }
    }

    pub fn delay(&mut self, now: SimTime) -> Nanos {
        let t = now.as_ns() as f64;
        let tat = self.tat.max(t);
        let depart = t.max(tat - self.tolerance_ns);
        self.tat = tat + self.interval_ns;
        (depart - t).round() as Nanos
    }
}

/// Strict-priority queue (class 0 served first), FIFO within a class.
#[derive(Debug, Clone)]
pub struct PriorityQueue<T> {
    classes: Vec<VecDeque<T>>,
}

impl<T> PriorityQueue<T> {
    pub fn new(classes: usize) -> Self {
        PriorityQueue {
            classes: (0..classes.max(1)).map(|_| VecDeque::new()).collect(),
        }
    }

    pub fn enqueue(&mut self, class: usize, item: T) {
        let c = class.min(self.classes.len() - 1);
        self.classes[c].push_back(item);
    }

    pub fn dequeue(&mut self) -> Option<T> {
        self.classes.iter_mut().find_map(|q| q.pop_front())
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Deficit round robin over flows.
#[derive(Debug, Clone)]
pub struct DrrQueue<T> {
    quantum: u64,
    flows: BTreeMap<u32, (VecDeque<(u64, T)>, u64)>,
    active: VecDeque<u32>,
}

impl<T> DrrQueue<T> {
    pub fn new(quantum: u64) -> Self {
        DrrQueue {
            quantum,
            flows: BTreeMap::new(),
            active: VecDeque::new(),
        }
    }

    pub fn enqueue(&mut self, flow: u32, bytes: u64, item: T) {
        let e = self.flows.entry(flow).or_insert_with(|| (VecDeque::new(), 0));
        if e.0.is_empty() {
            self.active.push_back(flow);
        }
        e.0.push_back((bytes, item));
    }

    /// Returns `(flow, item)`.
    pub fn dequeue(&mut self) -> Option<(u32, T)> {
        loop {
            let flow = *self.active.front()?;
            let (q, deficit) = self.flows.get_mut(&flow).expect("active flow");
            let head = q.front().expect("active flows are nonempty").0;
            if *deficit >= head {
                *deficit -= head;
                let (_, item) = q.pop_front().expect("nonempty");
                if q.is_empty() {
                    *deficit = 0;
                    self.active.pop_front();
                }
                return Some((flow, item));
            }
            *deficit += self.quantum;
            self.active.rotate_left(1);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SwitchQueuePolicy {
    TokenBucket { rate_per_sec: f64, burst: u32 },
    FairQueue,
    Priority,
}

impl SwitchQueuePolicy {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            SwitchQueuePolicy::TokenBucket { rate_per_sec, burst } => {
                if !(*rate_per_sec > 0.0) || *burst == 0 {
                    return Err("token bucket rate and burst must be positive".into());
                }
            }
            SwitchQueuePolicy::FairQueue | SwitchQueuePolicy::Priority => {}
        }
        Ok(())
    }
}

/// Egress queueing at the switch in continuous time. Storage packets share
/// a link with exogenous background traffic; the policy decides how much of
/// that traffic and of other storage flows a packet waits behind.
#[derive(Debug, Clone)]
pub struct SwitchPort {
    policy: SwitchQueuePolicy,
    link_ns_per_byte: f64,
    background_load: f64,
    background_burst_ns: Nanos,
    buckets: BTreeMap<u32, TokenBucket>,
    flow_busy: BTreeMap<u32, f64>,
    link_busy: f64,
}

impl SwitchPort {
    pub fn new(policy: SwitchQueuePolicy, link_gbps: f64, background_load: f64, background_burst_ns: Nanos) -> Self {
        SwitchPort {
            policy,
            link_ns_per_byte: 8.0 / link_gbps,
            background_load: background_load.clamp(0.0, 0.99),
            background_burst_ns,
            buckets: BTreeMap::new(),
            flow_busy: BTreeMap::new(),
            link_busy: 0.0,
        }
    }

    pub fn policy(&self) -> &SwitchQueuePolicy {
        &self.policy
    }

    /// Queueing delay for a storage packet of `bytes` on `flow`; `active_flows`
    /// is the number of flows sharing the port under fair queueing.
    pub fn enqueue_at_switch<R: Rng>(
        &mut self,
        flow: u32,
        bytes: u64,
        active_flows: u32,
        now: SimTime,
        rng: &mut R,
    ) -> Nanos {
        let t = now.as_ns() as f64;
        let tx = bytes as f64 * self.link_ns_per_byte;
        // Background traffic present at arrival.
        let busy_bg = self.background_load > 0.0 && rng.random::<f64>() < self.background_load;
        let u: f64 = rng.random();
        let wait = match self.policy {
            SwitchQueuePolicy::Priority => {
                // Storage is the high class: it waits only for the one
                // background frame already on the wire.
                let residual = if busy_bg { u * tx } else { 0.0 };
                let start = t.max(self.link_busy) + residual;
                self.link_busy = start + tx;
                start - t
            }
            SwitchQueuePolicy::FairQueue => {
                let share = tx * active_flows.max(1) as f64;
                let busy = self.flow_busy.entry(flow).or_insert(0.0);
                let bg = if busy_bg { u * self.background_burst_ns as f64 / active_flows.max(1) as f64 } else { 0.0 };
                let start = t.max(*busy) + bg;
                *busy = start + share;
                start - t
            }
            SwitchQueuePolicy::TokenBucket { rate_per_sec, burst } => {
                let shaped = self
                    .buckets
                    .entry(flow)
                    .or_insert_with(|| TokenBucket::new(rate_per_sec, burst))
                    .delay(now) as f64;
                let bg = if busy_bg { u * self.background_burst_ns as f64 } else { 0.0 };
                let start = (t + shaped).max(self.link_busy) + bg;
                self.link_busy = start + tx;
                start - t
            }
        };
        wait.round().max(0.0) as Nanos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::stream_rng;

    #[test]
    fn write_ratio_boundaries() {
        let mut rng = stream_rng(1, "workload");
        for (w, want) in [(0.0, Dir::Read), (1.0, Dir::Write)] {
            let mut g = Workload::new(WorkloadSpec {
                write_ratio: w,
                ..Default::default()
            })
            .unwrap();
            assert!((0..10_000).all(|_| g.next_request(SimTime::ZERO, &mut rng).dir == want));
        }
    }

    #[test]
    fn scrambler_is_a_bijection() {
        for n in [1u64, 2, 10, 97, 1000, 65_536] {
            let s = Scrambler::new(n);
            let mut seen: Vec<u64> = (0..n).map(|x| s.apply(x)).collect();
            seen.sort_unstable();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn phased_pattern_alternates() {
        let mut rng = stream_rng(1, "workload");
        let mut g = Workload::new(WorkloadSpec {
            write_ratio: 0.25,
            pattern: Pattern::Phased { cycle_ns: 1000 },
            ..Default::default()
        })
        .unwrap();
        assert_eq!(g.next_request(SimTime(100), &mut rng).dir, Dir::Write);
        assert_eq!(g.next_request(SimTime(300), &mut rng).dir, Dir::Read);
        assert_eq!(g.next_request(SimTime(1100), &mut rng).dir, Dir::Write);
    }

    #[test]
    fn presets_match_profiles() {
        assert_eq!(preset("Twitter").unwrap(), (0.9786, false));
        assert_eq!(preset("auctionmark").unwrap(), (0.5376, true));
        assert!(preset("tpc-e").is_err());
    }

    #[test]
    fn token_bucket_spacing() {
        let mut tb = TokenBucket::new(10_000.0, 1);
        let d: Vec<Nanos> = (0..3).map(|_| tb.delay(SimTime::ZERO)).collect();
        assert_eq!(d, vec![0, 100 * NS_PER_US, 200 * NS_PER_US]);
    }

    #[test]
    fn strict_priority() {
        let mut q = PriorityQueue::new(2);
        for i in 0..5 {
            q.enqueue(0, i);
        }
        q.enqueue(1, 99);
        let order: Vec<i32> = std::iter::from_fn(|| q.dequeue()).collect();
        assert_eq!(order, vec![0, 1, 2, 3, 4, 99]);
    }

    #[test]
    fn congestion_window_adds_delay() {
        let mut rng = stream_rng(3, "network");
        let mut p = NetProfile::class(NetClass::Fast).with_episodes(vec![Congestion {
            start_ns: NS_PER_SEC,
            duration_ns: NS_PER_SEC,
            added_ns: 500 * NS_PER_US,
        }]);
        for i in 0..1000 {
            let t = SimTime(NS_PER_SEC + i * 1000);
            assert!(p.sample_path_latency(Dir::Read, t, &mut rng) >= 500 * NS_PER_US);
        }
    }

    #[test]
    fn trace_parsing_and_errors() {
        let text = "arrival_offset_ns,direction,latency_ns\n0,read,10\n5,write,20\n9,read,30\n";
        let recs = parse_trace(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 3);
        let mut p = NetProfile::from_trace(&recs).unwrap();
        let mut rng = stream_rng(0, "network");
        assert_eq!(p.sample_path_latency(Dir::Read, SimTime::ZERO, &mut rng), 10);
        assert_eq!(p.sample_path_latency(Dir::Read, SimTime::ZERO, &mut rng), 30);
        assert_eq!(p.sample_path_latency(Dir::Write, SimTime::ZERO, &mut rng), 20);
        assert!(parse_trace("0,sideways,1\n".as_bytes()).is_err());
        assert!(parse_trace("0,read\n".as_bytes()).is_err());
        assert!(parse_trace("x,read,1\n".as_bytes()).is_err());
    }
}
