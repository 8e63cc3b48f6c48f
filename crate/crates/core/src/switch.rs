//! Top-of-rack switch data plane.
//!
//! Two match tables keyed by vSSD id: the replica table (GC bit + replica id)
//! and the destination table (server address + GC bit). Reads are redirected
//! away from a vSSD in GC when its replica is idle, writes are duplicated to
//! both replicas, and GC requests are accepted or delayed against the
//! replica's state.

use std::collections::BTreeMap;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Nanos;
use crate::packet::{ns_to_ticks, Body, GcCode, Packet};

pub const DEFAULT_CAPACITY: usize = 65_536;
pub const DEFAULT_PIPELINE_NS: Nanos = 800;

/// Accounted bytes per table entry: 4-byte key, 5 bytes of fields and a
/// fixed 11-byte match-action overhead.
pub const ENTRY_BYTES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicaEntry {
    pub gc_status: u8,
    pub replica: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DestEntry {
    pub server_ip: Ipv4Addr,
    pub gc_status: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SwitchError {
    #[error("vSSD {0} is already registered")]
    Duplicate(u32),
    #[error("switch tables are full ({0} entries)")]
    Capacity(usize),
    #[error("vSSD {0} is not registered")]
    UnknownVssd(u32),
    #[error("gc code {0:?} is a reply, not a request")]
    NotARequest(GcCode),
}

/// Result of pushing one packet through the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    /// Packets leaving the switch; each carries its own `dst`.
    pub out: Vec<Packet>,
    /// Extra pipeline passes the packet needed.
    pub recirculations: u32,
    pub kind: DecisionKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionKind {
    Ack,
    WriteFanOut,
    ReadDirect,
    ReadRedirected,
    /// Read forwarded to a vSSD in GC because its replica is in GC too.
    ReadBothBusy,
    GcReply(GcCode),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchCounters {
    pub packets: u64,
    pub dropped_unknown: u64,
    pub redirected_reads: u64,
    pub gc_accepts: u64,
    pub gc_delays: u64,
    pub recirculations: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub vssd_id: u32,
    pub gc_status: u8,
    pub replica_id: u32,
    pub server_ip: Ipv4Addr,
    pub dst_gc_status: u8,
}

#[derive(Debug, Clone)]
pub struct SwitchPlane {
    replica_table: BTreeMap<u32, ReplicaEntry>,
    dest_table: BTreeMap<u32, DestEntry>,
    capacity: usize,
    pipeline_ns: Nanos,
    counters: SwitchCounters,
}

impl Default for SwitchPlane {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY, DEFAULT_PIPELINE_NS)
    }
}

/// Accounted memory for one table holding `entries` rows.
pub fn table_bytes(entries: usize) -> usize {
    entries * ENTRY_BYTES
}

impl SwitchPlane {
    pub fn new(capacity: usize, pipeline_ns: Nanos) -> Self {
        SwitchPlane {
            replica_table: BTreeMap::new(),
            dest_table: BTreeMap::new(),
            capacity,
            pipeline_ns,
            counters: SwitchCounters::default(),
        }
    }

    pub fn pipeline_ns(&self) -> Nanos {
        self.pipeline_ns
    }

    pub fn len(&self) -> usize {
        self.replica_table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replica_table.is_empty()
    }

    pub fn counters(&self) -> &SwitchCounters {
        &self.counters
    }

    pub fn replica_entry(&self, v: u32) -> Option<ReplicaEntry> {
        self.replica_table.get(&v).copied()
    }

    pub fn dest_entry(&self, v: u32) -> Option<DestEntry> {
        self.dest_table.get(&v).copied()
    }

    /// Both GC bits of `v`, `(replica_table, dest_table)`.
    pub fn gc_bits(&self, v: u32) -> Option<(u8, u8)> {
        Some((self.replica_table.get(&v)?.gc_status, self.dest_table.get(&v)?.gc_status))
    }

    /// Whether a read addressed to `v` right now would be redirected.
    pub fn would_redirect(&self, v: u32) -> bool {
        match self.replica_table.get(&v) {
            Some(r) if r.gc_status == 1 => self
                .dest_table
                .get(&r.replica)
                .is_some_and(|d| d.gc_status == 0),
            _ => false,
        }
    }

    pub fn dump(&self) -> Vec<TableRow> {
        self.replica_table
            .iter()
            .map(|(&v, r)| {
                let d = self.dest_table[&v];
                TableRow {
                    vssd_id: v,
                    gc_status: r.gc_status,
                    replica_id: r.replica,
                    server_ip: d.server_ip,
                    dst_gc_status: d.gc_status,
                }
            })
            .collect()
    }

    pub fn memory_bytes(&self) -> usize {
        table_bytes(self.replica_table.len())
    }

    /// Add one traversal's worth of latency: the pipeline cost for each pass
    /// plus the egress queueing delay.
    pub fn traverse(&self, pkt: Packet, queue_delay: Nanos, recirculations: u32) -> Packet {
        let ns = self.pipeline_ns * (1 + u64::from(recirculations)) + queue_delay;
        let ticks = u32::try_from(ns_to_ticks(ns)).unwrap_or(u32::MAX);
        pkt.add_hop_latency(ticks)
    }

    pub fn register_vssd(&mut self, pkt: &Packet) -> Result<Packet, SwitchError> {
        let Body::CreateVssd {
            server_ip,
            replica_vssd,
            ..
        } = pkt.body
        else {
            unreachable!("register_vssd called with {:?}", pkt.op());
        };
        let v = pkt.vssd_id;
        if self.replica_table.contains_key(&v) {
            return Err(SwitchError::Duplicate(v));
        }
        if self.replica_table.len() >= self.capacity {
            return Err(SwitchError::Capacity(self.capacity));
        }
        self.replica_table.insert(
            v,
            ReplicaEntry {
                gc_status: 0,
                replica: replica_vssd,
            },
        );
        self.dest_table.insert(
            v,
            DestEntry {
                server_ip,
                gc_status: 0,
            },
        );
        Ok(reply(*pkt))
    }

    pub fn deregister_vssd(&mut self, pkt: &Packet) -> Result<Packet, SwitchError> {
        let v = pkt.vssd_id;
        if self.replica_table.remove(&v).is_none() {
            return Err(SwitchError::UnknownVssd(v));
        }
        self.dest_table.remove(&v);
        Ok(reply(*pkt))
    }

    /// Run one packet through the pipeline.
    pub fn process_packet(&mut self, pkt: Packet) -> Result<Decision, SwitchError> {
        self.counters.packets += 1;
        let res = self.process_inner(pkt);
        if let Err(SwitchError::UnknownVssd(_)) = res {
            self.counters.dropped_unknown += 1;
        }
        res
    }

    fn process_inner(&mut self, mut pkt: Packet) -> Result<Decision, SwitchError> {
        match pkt.body {
            Body::CreateVssd { .. } => Ok(Decision {
                out: vec![self.register_vssd(&pkt)?],
                recirculations: 0,
                kind: DecisionKind::Ack,
            }),
            Body::DelVssd => Ok(Decision {
                out: vec![self.deregister_vssd(&pkt)?],
                recirculations: 0,
                kind: DecisionKind::Ack,
            }),
            Body::Write { .. } => {
                let v = pkt.vssd_id;
                let r = self.replica(v)?;
                let rdest = self.dest(r.replica)?;
                let mut copy = pkt;
                copy.vssd_id = r.replica;
                copy.dst = rdest.server_ip;
                Ok(Decision {
                    out: vec![pkt, copy],
                    recirculations: 0,
                    kind: DecisionKind::WriteFanOut,
                })
            }
            Body::Read { .. } => {
                let v = pkt.vssd_id;
                let r = self.replica(v)?;
                let mut kind = DecisionKind::ReadDirect;
                if r.gc_status == 1 {
                    let rdest = self.dest(r.replica)?;
                    if rdest.gc_status == 0 {
                        pkt.dst = rdest.server_ip;
                        pkt.vssd_id = r.replica;
                        kind = DecisionKind::ReadRedirected;
                        self.counters.redirected_reads += 1;
                    } else {
                        kind = DecisionKind::ReadBothBusy;
                    }
                }
                Ok(Decision {
                    out: vec![pkt],
                    recirculations: 0,
                    kind,
                })
            }
            Body::Gc(code) => self.handle_gc_request(pkt, code),
        }
    }

    fn handle_gc_request(&mut self, mut pkt: Packet, code: GcCode) -> Result<Decision, SwitchError> {
        if !code.is_request() {
            return Err(SwitchError::NotARequest(code));
        }
        let v = pkt.vssd_id;
        let replica = self.replica(v)?.replica;
        // The replica must be resolvable before any state changes.
        self.dest(replica)?;
        self.replica_table.get_mut(&v).expect("checked").gc_status = 1;
        let mut recirculations = 0;
        let out_code = match code {
            GcCode::Soft => {
                recirculations = 1;
                self.counters.recirculations += 1;
                if self.dest_table[&replica].gc_status == 1 {
                    self.replica_table.get_mut(&v).expect("checked").gc_status = 0;
                    self.counters.gc_delays += 1;
                    GcCode::Delay
                } else {
                    self.dest_table.get_mut(&v).expect("checked").gc_status = 1;
                    self.counters.gc_accepts += 1;
                    GcCode::Accept
                }
            }
            GcCode::Finish => {
                self.replica_table.get_mut(&v).expect("checked").gc_status = 0;
                self.dest_table.get_mut(&v).expect("checked").gc_status = 0;
                GcCode::Finish
            }
            _ => {
                self.dest_table.get_mut(&v).expect("checked").gc_status = 1;
                self.counters.gc_accepts += 1;
                GcCode::Accept
            }
        };
        pkt.body = Body::Gc(out_code);
        Ok(Decision {
            out: vec![reply(pkt)],
            recirculations,
            kind: DecisionKind::GcReply(out_code),
        })
    }

    fn replica(&self, v: u32) -> Result<ReplicaEntry, SwitchError> {
        self.replica_table
            .get(&v)
            .copied()
            .ok_or(SwitchError::UnknownVssd(v))
    }

    fn dest(&self, v: u32) -> Result<DestEntry, SwitchError> {
        self.dest_table
            .get(&v)
            .copied()
            .ok_or(SwitchError::UnknownVssd(v))
    }
}

fn reply(mut pkt: Packet) -> Packet {
    pkt.dst = pkt.src;
    pkt
}
