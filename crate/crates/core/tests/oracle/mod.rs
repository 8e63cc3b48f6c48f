//! Reference models shared by the integration and acceptance tests. Each one
//! is written from the published description, independently of the crate.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::net::Ipv4Addr;

use rand::Rng;
use racksim::packet::{Body, GcCode, Packet};

/// Line-by-line interpreter of the switch workflow listing. Amendments,
/// all shared with the crate: FINISH clears the destination bit as well, a
/// WRITE is also copied to the replica's server, and the replica's status is
/// read from the destination table, as the prose describes for both the
/// read check and the SOFT check.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Alg1 {
    pub gc_status: BTreeMap<u32, u8>,
    pub dst_gc_status: BTreeMap<u32, u8>,
    pub dst: BTreeMap<u32, Ipv4Addr>,
    pub replica: BTreeMap<u32, u32>,
}

impl Alg1 {
    pub fn register(&mut self, v: u32, ip: Ipv4Addr, replica: u32) {
        self.gc_status.insert(v, 0);
        self.dst_gc_status.insert(v, 0);
        self.dst.insert(v, ip);
        self.replica.insert(v, replica);
    }

    /// Packets forwarded for `pkt`, or `None` when the vSSD (or its replica)
    /// is unknown and the packet is dropped.
    pub fn process_packet(&mut self, mut pkt: Packet) -> Option<Vec<Packet>> {
        let v = pkt.vssd_id;
        let replica = *self.replica.get(&v)?;
        if !self.dst.contains_key(&replica) {
            return None;
        }
        match pkt.body {
            Body::Write { .. } => {
                let mut copy = pkt;
                copy.vssd_id = replica;
                copy.dst = self.dst[&replica];
                Some(vec![pkt, copy])
            }
            Body::Read { .. } => {
                if self.gc_status[&v] == 1 && self.dst_gc_status[&replica] == 0 {
                    pkt.dst = self.dst[&replica];
                    pkt.vssd_id = replica;
                }
                Some(vec![pkt])
            }
            Body::Gc(code) => {
                self.gc_status.insert(v, 1);
                if code == GcCode::Soft {
                    if self.dst_gc_status[&replica] == 1 {
                        pkt.body = Body::Gc(GcCode::Delay);
                        self.gc_status.insert(v, 0);
                    } else {
                        pkt.body = Body::Gc(GcCode::Accept);
                        self.dst_gc_status.insert(v, 1);
                    }
                } else if code == GcCode::Finish {
                    self.gc_status.insert(v, 0);
                    self.dst_gc_status.insert(v, 0);
                } else {
                    self.dst_gc_status.insert(v, 1);
                    pkt.body = Body::Gc(GcCode::Accept);
                }
                pkt.dst = pkt.src;
                Some(vec![pkt])
            }
            _ => unreachable!("table maintenance packets are not generated"),
        }
    }
}

pub fn server_ip(s: u32) -> Ipv4Addr {
    Ipv4Addr::new(10, 0, s as u8, 1)
}

pub fn client_ip(v: u32) -> Ipv4Addr {
    Ipv4Addr::new(10, 1, (v >> 8) as u8, v as u8)
}

/// READ, WRITE or a GC request (SOFT, REGULAR, BG, FINISH) for a random
/// vSSD below `n`, with a random LAT.
pub fn random_traffic<R: Rng>(rng: &mut R, n: u32) -> Packet {
    let v = rng.random_range(0..n);
    let body = match rng.random_range(0..8) {
        0..=2 => Body::Read {
            lba: rng.random(),
            len: 4096,
        },
        3 | 4 => Body::Write {
            lba: rng.random(),
            len: 4096,
        },
        5 => Body::Gc(GcCode::Soft),
        6 => Body::Gc(if rng.random_bool(0.5) { GcCode::Regular } else { GcCode::Bg }),
        _ => Body::Gc(GcCode::Finish),
    };
    let src = if matches!(body, Body::Gc(_)) { server_ip(v / 16) } else { client_ip(v) };
    let mut p = Packet::new(v, src, Ipv4Addr::new(10, 255, 0, 1), body);
    p.lat = rng.random_range(0..1 << 20);
    p
}

/// Any valid packet, including table maintenance.
pub fn random_packet<R: Rng>(rng: &mut R) -> Packet {
    let ip = |rng: &mut R| Ipv4Addr::from(rng.random::<u32>());
    let body = match rng.random_range(0..5) {
        0 => Body::CreateVssd {
            server_ip: ip(rng),
            replica_vssd: rng.random(),
            replica_ip: ip(rng),
        },
        1 => Body::DelVssd,
        2 => Body::Write {
            lba: rng.random(),
            len: rng.random(),
        },
        3 => Body::Read {
            lba: rng.random(),
            len: rng.random(),
        },
        _ => Body::Gc(GcCode::ALL[rng.random_range(0..GcCode::ALL.len())]),
    };
    let mut p = Packet::new(rng.random(), ip(rng), ip(rng), body);
    p.lat = rng.random();
    p
}

/// Mean of the last 100 samples, recomputed from scratch each time.
pub struct WindowOracle {
    samples: VecDeque<u64>,
    prior: u64,
}

impl WindowOracle {
    pub fn new(prior: u64) -> Self {
        WindowOracle {
            samples: VecDeque::new(),
            prior,
        }
    }

    pub fn push(&mut self, x: u64) -> f64 {
        self.samples.push_back(x);
        if self.samples.len() > 100 {
            self.samples.pop_front();
        }
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.samples.is_empty() {
            return self.prior as f64;
        }
        let total: u128 = self.samples.iter().map(|&x| x as u128).sum();
        total as f64 / self.samples.len() as f64
    }
}

/// Exponential smoothing of idle gaps starting from a zero prediction. With
/// `integer` set, each prediction is rounded to whole nanoseconds before it
/// feeds the next step.
pub fn idle_recurrence(alpha: f64, gaps: &[u64], integer: bool) -> Vec<f64> {
    let mut prev = 0.0;
    gaps.iter()
        .map(|&g| {
            prev = alpha * g as f64 + (1.0 - alpha) * prev;
            if integer {
                prev = prev.round();
            }
            prev
        })
        .collect()
}
