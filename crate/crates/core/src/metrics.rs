//! Run statistics and their on-disk forms: exact percentiles, log-bucketed
//! histograms, the GC episode log, and the JSON report.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Nanos, NS_PER_SEC, NS_PER_US};
use crate::switch::SwitchCounters;

pub const REPORT_SCHEMA: u32 = 1;

/// Nearest-rank percentile of an ascending slice; 0 for an empty slice.
pub fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let n = sorted.len();
    // The epsilon keeps exact ranks like 99.9% of 1000 from rounding up.
    let rank = (p * n as f64 / 100.0 - 1e-9).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub count: u64,
    pub mean_ns: f64,
    pub p50_ns: u64,
    pub p95_ns: u64,
    pub p99_ns: u64,
    pub p999_ns: u64,
    pub max_ns: u64,
}

impl LatencyStats {
    /// Sorts `samples` in place.
    pub fn from_samples(samples: &mut [u64]) -> Self {
        samples.sort_unstable();
        let n = samples.len();
        if n == 0 {
            return LatencyStats::default();
        }
        let sum: u128 = samples.iter().map(|&x| x as u128).sum();
        LatencyStats {
            count: n as u64,
            mean_ns: sum as f64 / n as f64,
            p50_ns: percentile(samples, 50.0),
            p95_ns: percentile(samples, 95.0),
            p99_ns: percentile(samples, 99.0),
            p999_ns: percentile(samples, 99.9),
            max_ns: samples[n - 1],
        }
    }

    pub fn get(&self, name: &str) -> Option<u64> {
        Some(match name {
            "p50" => self.p50_ns,
            "p95" => self.p95_ns,
            "p99" => self.p99_ns,
            "p99.9" => self.p999_ns,
            "max" => self.max_ns,
            _ => return None,
        })
    }
}

pub const PERCENTILES: [&str; 4] = ["p50", "p95", "p99", "p99.9"];

/// Logarithmic histogram from 1 µs to 10 s with 5% wide buckets, plus an
/// underflow and an overflow bucket.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogHistogram {
    counts: Vec<u64>,
}

const HIST_LO: f64 = NS_PER_US as f64;
const HIST_HI: f64 = 10.0 * NS_PER_SEC as f64;
const HIST_GROWTH: f64 = 1.05;

impl Default for LogHistogram {
    fn default() -> Self {
        Self::new()
    }
}

impl LogHistogram {
    pub fn new() -> Self {
        let inner = ((HIST_HI / HIST_LO).ln() / HIST_GROWTH.ln()).ceil() as usize;
        LogHistogram {
            counts: vec![0; inner + 2],
        }
    }

    pub fn buckets(&self) -> usize {
        self.counts.len()
    }

    pub fn bucket_of(&self, ns: Nanos) -> usize {
        let x = ns as f64;
        if x < HIST_LO {
            return 0;
        }
        let i = ((x / HIST_LO).ln() / HIST_GROWTH.ln()).floor() as usize + 1;
        i.min(self.counts.len() - 1)
    }

    /// `[lo, hi)` of bucket `i` in nanoseconds; the outer buckets are open.
    pub fn bounds(&self, i: usize) -> (f64, f64) {
        let last = self.counts.len() - 1;
        match i {
            0 => (0.0, HIST_LO),
            _ if i == last => (HIST_LO * HIST_GROWTH.powi(i as i32 - 1), f64::INFINITY),
            _ => (
                HIST_LO * HIST_GROWTH.powi(i as i32 - 1),
                HIST_LO * HIST_GROWTH.powi(i as i32),
            ),
        }
    }

    pub fn record(&mut self, ns: Nanos) {
        let b = self.bucket_of(ns);
        self.counts[b] += 1;
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// `bucket_lo_ns,bucket_hi_ns,read_count,read_cdf,write_count,write_cdf`,
/// skipping buckets empty in both directions.
pub fn write_histograms<W: Write>(w: &mut W, read: &LogHistogram, write: &LogHistogram) -> io::Result<()> {
    writeln!(w, "bucket_lo_ns,bucket_hi_ns,read_count,read_cdf,write_count,write_cdf")?;
    let (rt, wt) = (read.total().max(1) as f64, write.total().max(1) as f64);
    let (mut rc, mut wc) = (0u64, 0u64);
    for i in 0..read.buckets() {
        let (r, wr) = (read.counts()[i], write.counts()[i]);
        rc += r;
        wc += wr;
        if r == 0 && wr == 0 {
            continue;
        }
        let (lo, hi) = read.bounds(i);
        let hi = if hi.is_finite() { format!("{hi:.0}") } else { "inf".into() };
        writeln!(
            w,
            "{lo:.0},{hi},{r},{:.6},{wr},{:.6}",
            rc as f64 / rt,
            wc as f64 / wt
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpisodeKind {
    Soft,
    Regular,
    Background,
    /// Regular request whose retries ran out without a reply.
    Forced,
    /// Uncoordinated collection by a mode without switch coordination.
    Local,
    /// Synchronous collection inside a write when free space ran out.
    Emergency,
}

impl EpisodeKind {
    pub fn name(self) -> &'static str {
        match self {
            EpisodeKind::Soft => "soft",
            EpisodeKind::Regular => "regular",
            EpisodeKind::Background => "background",
            EpisodeKind::Forced => "forced",
            EpisodeKind::Local => "local",
            EpisodeKind::Emergency => "emergency",
        }
    }

    /// Granted without regard to the replica's state.
    pub fn undeniable(self) -> bool {
        matches!(self, EpisodeKind::Regular | EpisodeKind::Forced)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GcEpisode {
    pub server: u32,
    pub ssd: u32,
    pub vssds: Vec<u32>,
    pub kind: EpisodeKind,
    pub requested_ns: Nanos,
    pub start_ns: Nanos,
    pub end_ns: Nanos,
    pub victims: u32,
    pub pages_migrated: u64,
    pub blocks_erased: u64,
}

pub fn write_gc_log<W: Write>(w: &mut W, eps: &[GcEpisode]) -> io::Result<()> {
    writeln!(
        w,
        "server,ssd,vssds,kind,requested_ns,start_ns,end_ns,duration_ns,victims,pages_migrated,blocks_erased"
    )?;
    for e in eps {
        let vs: Vec<String> = e.vssds.iter().map(u32::to_string).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{}",
            e.server,
            e.ssd,
            vs.join(";"),
            e.kind.name(),
            e.requested_ns,
            e.start_ns,
            e.end_ns,
            e.end_ns - e.start_ns,
            e.victims,
            e.pages_migrated,
            e.blocks_erased
        )?;
    }
    Ok(())
}

/// Simultaneous-GC time between replica pairs, split by whether either
/// overlapping episode was undeniable.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapAudit {
    pub total_ns: Nanos,
    /// Overlap where both episodes were deniable (soft, background, local or
    /// emergency).
    pub without_regular_ns: Nanos,
    pub overlapping_pairs: u64,
}

/// `replica[v]` is v's partner. Episodes are matched per vSSD.
pub fn audit_overlap(eps: &[GcEpisode], replica: &[u32]) -> OverlapAudit {
    let mut per_vssd: BTreeMap<u32, Vec<(Nanos, Nanos, bool)>> = BTreeMap::new();
    for e in eps {
        for &v in &e.vssds {
            per_vssd
                .entry(v)
                .or_default()
                .push((e.start_ns, e.end_ns, e.kind.undeniable()));
        }
    }
    let mut a = OverlapAudit::default();
    for (&v, mine) in &per_vssd {
        let r = replica[v as usize];
        if r <= v {
            continue;
        }
        let Some(theirs) = per_vssd.get(&r) else { continue };
        let mut pair_overlap = 0;
        for &(s1, e1, u1) in mine {
            for &(s2, e2, u2) in theirs {
                let o = e1.min(e2).saturating_sub(s1.max(s2));
                if o == 0 {
                    continue;
                }
                pair_overlap += o;
                if !u1 && !u2 {
                    a.without_regular_ns += o;
                }
            }
        }
        if pair_overlap > 0 {
            a.overlapping_pairs += 1;
            a.total_ns += pair_overlap;
        }
    }
    a
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestCounts {
    pub generated: u64,
    pub completed: u64,
    pub reads: u64,
    pub writes: u64,
    pub dropped: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DirLatency {
    pub read: LatencyStats,
    pub write: LatencyStats,
}

/// Measured reads by how they were served; the three sum to all reads.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadBreakdown {
    pub direct: u64,
    pub redirected: u64,
    /// Waited for a collection on the serving device.
    pub blocked: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WriteBreakdown {
    /// Server-side copies programmed to flash on the request path.
    pub flash: u64,
    /// Server-side copies absorbed by the write cache.
    pub cached: u64,
    /// Measured writes whose critical copy waited on a collection or on a
    /// full cache.
    pub gc_blocked: u64,
    pub cache_stalls: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GcSummary {
    pub episodes: u64,
    pub by_kind: BTreeMap<String, u64>,
    /// Sum of episode durations.
    pub blocked_ns: Nanos,
    pub pages_migrated: u64,
    pub blocks_erased: u64,
    pub requests_sent: u64,
    pub delays: u64,
    pub overlap: OverlapAudit,
    /// Reads that waited on a background collection.
    pub bg_mispredictions: u64,
    pub borrows: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Safety {
    /// Reads that waited on a non-background collection although the
    /// switch saw their replica idle when it routed them.
    pub redirect_violations: u64,
    /// Requests whose phase durations did not add up to their latency.
    pub additivity_errors: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub pairs_checked: u64,
    pub mismatched_pages: u64,
    /// First few `(vssd, replica, lpn)` mismatches.
    pub examples: Vec<(u32, u32, u64)>,
}

impl ConsistencyReport {
    pub fn is_clean(&self) -> bool {
        self.mismatched_pages == 0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WearSummary {
    pub mean_erase_count: f64,
    pub max_ssd_wear: f64,
    pub rack_imbalance: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseTotals {
    pub inbound_ns: u128,
    pub switch_ns: u128,
    pub queue_ns: u128,
    pub service_ns: u128,
    pub return_ns: u128,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub mode: String,
    pub seed: u64,
    pub workload_identity: String,
    pub scheduler: String,
    pub switch_queue: String,
    pub device: String,
    pub network: String,
    pub write_ratio: f64,
    pub duration_ns: Nanos,
    pub measured_ns: Nanos,
    pub requests: RequestCounts,
    pub iops: f64,
    pub latency: DirLatency,
    pub reads: ReadBreakdown,
    pub writes: WriteBreakdown,
    pub phases: PhaseTotals,
    pub gc: GcSummary,
    pub switch: SwitchCounters,
    pub safety: Safety,
    pub consistency: ConsistencyReport,
    pub wear: WearSummary,
    pub events: u64,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("malformed report: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("reports describe different workloads ({0} vs {1})")]
    Mismatch(String, String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioRow {
    pub direction: String,
    pub percentile: String,
    pub baseline_ns: u64,
    pub treatment_ns: u64,
    /// `baseline / treatment`; absent when the treatment value is zero.
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub baseline: String,
    pub treatment: String,
    pub rows: Vec<RatioRow>,
    pub baseline_iops: f64,
    pub treatment_iops: f64,
    /// `(treatment - baseline) / baseline`.
    pub iops_delta: f64,
}

pub fn speedup(baseline: u64, treatment: u64) -> Option<f64> {
    match (baseline, treatment) {
        (0, 0) => Some(1.0),
        (_, 0) => None,
        (b, t) => Some(b as f64 / t as f64),
    }
}

/// Compare two JSON reports of the same workload.
pub fn compare(baseline: &str, treatment: &str) -> Result<Comparison, CompareError> {
    let a: Report = serde_json::from_str(baseline)?;
    let b: Report = serde_json::from_str(treatment)?;
    if a.workload_identity != b.workload_identity {
        return Err(CompareError::Mismatch(a.workload_identity, b.workload_identity));
    }
    let mut rows = Vec::new();
    for (dir, la, lb) in [
        ("read", &a.latency.read, &b.latency.read),
        ("write", &a.latency.write, &b.latency.write),
    ] {
        for p in PERCENTILES {
            let (x, y) = (la.get(p).expect("known"), lb.get(p).expect("known"));
            rows.push(RatioRow {
                direction: dir.into(),
                percentile: p.into(),
                baseline_ns: x,
                treatment_ns: y,
                speedup: speedup(x, y),
            });
        }
    }
    let iops_delta = if a.iops > 0.0 { (b.iops - a.iops) / a.iops } else { 0.0 };
    Ok(Comparison {
        baseline: a.mode,
        treatment: b.mode,
        rows,
        baseline_iops: a.iops,
        treatment_iops: b.iops,
        iops_delta,
    })
}

impl Comparison {
    pub fn to_table(&self) -> String {
        let mut s = format!("{} -> {}\n", self.baseline, self.treatment);
        s.push_str("direction percentile   baseline_us  treatment_us  speedup\n");
        for r in &self.rows {
            let sp = r.speedup.map_or("n/a".to_string(), |x| format!("{x:.2}x"));
            s.push_str(&format!(
                "{:<9} {:<10} {:>12.1} {:>13.1}  {}\n",
                r.direction,
                r.percentile,
                r.baseline_ns as f64 / 1e3,
                r.treatment_ns as f64 / 1e3,
                sp
            ));
        }
        s.push_str(&format!(
            "iops {:.1} -> {:.1} ({:+.2}%)\n",
            self.baseline_iops,
            self.treatment_iops,
            self.iops_delta * 100.0
        ));
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<u64> = (1..=1000).collect();
        assert_eq!(percentile(&v, 50.0), 500);
        assert_eq!(percentile(&v, 99.9), 999);
        assert_eq!(percentile(&v, 100.0), 1000);
        assert_eq!(percentile(&[7], 99.9), 7);
        assert_eq!(percentile(&[], 50.0), 0);
    }

    #[test]
    fn histogram_buckets_are_five_percent() {
        let h = LogHistogram::new();
        for i in 1..h.buckets() - 1 {
            let (lo, hi) = h.bounds(i);
            assert!((hi / lo - 1.05).abs() < 1e-9);
            assert_eq!(h.bucket_of(lo.ceil() as u64), i, "bucket {i}");
        }
        assert_eq!(h.bucket_of(10), 0);
        assert_eq!(h.bucket_of(100 * NS_PER_SEC), h.buckets() - 1);
    }

    fn ep(v: u32, kind: EpisodeKind, s: u64, e: u64) -> GcEpisode {
        GcEpisode {
            server: 0,
            ssd: 0,
            vssds: vec![v],
            kind,
            requested_ns: s,
            start_ns: s,
            end_ns: e,
            victims: 0,
            pages_migrated: 0,
            blocks_erased: 0,
        }
    }

    #[test]
    fn overlap_audit_classifies() {
        let replica = vec![1, 0, 3, 2];
        let eps = vec![
            ep(0, EpisodeKind::Soft, 0, 100),
            ep(1, EpisodeKind::Soft, 100, 200),
            ep(2, EpisodeKind::Regular, 0, 100),
            ep(3, EpisodeKind::Soft, 50, 150),
        ];
        let a = audit_overlap(&eps, &replica);
        assert_eq!(a.total_ns, 50);
        assert_eq!(a.without_regular_ns, 0);
        assert_eq!(a.overlapping_pairs, 1);
        let eps = vec![ep(0, EpisodeKind::Soft, 0, 100), ep(1, EpisodeKind::Background, 90, 200)];
        assert_eq!(audit_overlap(&eps, &replica).without_regular_ns, 10);
    }

    fn report(mode: &str, p999: u64) -> String {
        let mut r = Report {
            mode: mode.into(),
            workload_identity: "w".into(),
            iops: 100.0,
            ..Report::default()
        };
        r.latency.read.p999_ns = p999;
        r.to_json()
    }

    #[test]
    fn compare_ratios() {
        let c = compare(&report("a", 5), &report("a", 5)).unwrap();
        assert!(c.rows.iter().all(|r| r.speedup == Some(1.0)));
        let c = compare(&report("vdc", 12_400_000), &report("rb", 2_800_000)).unwrap();
        let row = c.rows.iter().find(|r| r.direction == "read" && r.percentile == "p99.9").unwrap();
        assert!((row.speedup.unwrap() - 4.43).abs() < 0.005);
    }

    #[test]
    fn compare_rejects_missing_percentile() {
        let full = report("a", 1);
        let broken = full.replace("\"p999_ns\"", "\"p999_missing\"");
        assert!(matches!(compare(&full, &broken), Err(CompareError::Parse(_))));
    }
}
