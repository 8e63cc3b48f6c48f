//! Wire format for coordination packets.
//!
//! Layout (all integers big-endian):
//!
//! ```text
//! OP(1) | VSSD_ID(4) | LAT(4) | payload | SRC(4) | DST(4)
//! ```
//!
//! The payload depends on the op: one GC code byte for `GC_OP`, the 12-byte
//! placement triple for `CREATE_VSSD`, nothing for `DEL_VSSD`, and
//! `LBA(8) | LEN(4)` for reads and writes. The trailing addresses stand in for
//! the L3 envelope the header would ride inside.

use std::io::{self, Read, Write};
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::Nanos;

pub const HEADER_LEN: usize = 9;
pub const ENVELOPE_LEN: usize = 8;
/// Resolution of the LAT field.
pub const LAT_TICK_NS: Nanos = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum OpCode {
    CreateVssd = 0,
    DelVssd = 1,
    Write = 2,
    Read = 3,
    GcOp = 4,
}

impl OpCode {
    pub const ALL: [OpCode; 5] = [
        OpCode::CreateVssd,
        OpCode::DelVssd,
        OpCode::Write,
        OpCode::Read,
        OpCode::GcOp,
    ];

    pub fn from_byte(b: u8) -> Result<Self, PacketError> {
        Self::ALL
            .get(b as usize)
            .copied()
            .ok_or(PacketError::UnknownOpCode(b))
    }

    fn payload_len(self) -> usize {
        match self {
            OpCode::CreateVssd => 12,
            OpCode::DelVssd => 0,
            OpCode::Write | OpCode::Read => 12,
            OpCode::GcOp => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
#[repr(u8)]
pub enum GcCode {
    Soft = 0,
    Regular = 1,
    Bg = 2,
    Accept = 3,
    Delay = 4,
    Finish = 5,
}

impl GcCode {
    pub const ALL: [GcCode; 6] = [
        GcCode::Soft,
        GcCode::Regular,
        GcCode::Bg,
        GcCode::Accept,
        GcCode::Delay,
        GcCode::Finish,
    ];

    pub fn from_byte(b: u8) -> Result<Self, PacketError> {
        Self::ALL
            .get(b as usize)
            .copied()
            .ok_or(PacketError::UnknownGcCode(b))
    }

    pub fn is_request(self) -> bool {
        !matches!(self, GcCode::Accept | GcCode::Delay)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Body {
    CreateVssd {
        server_ip: Ipv4Addr,
        replica_vssd: u32,
        replica_ip: Ipv4Addr,
    },
    DelVssd,
    Write { lba: u64, len: u32 },
    Read { lba: u64, len: u32 },
    Gc(GcCode),
}

impl Body {
    pub fn op(&self) -> OpCode {
        match self {
            Body::CreateVssd { .. } => OpCode::CreateVssd,
            Body::DelVssd => OpCode::DelVssd,
            Body::Write { .. } => OpCode::Write,
            Body::Read { .. } => OpCode::Read,
            Body::Gc(_) => OpCode::GcOp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Packet {
    pub vssd_id: u32,
    /// Accumulated network latency in [`LAT_TICK_NS`] ticks.
    pub lat: u32,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub body: Body,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("buffer truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("unknown op code byte {0:#04x}")]
    UnknownOpCode(u8),
    #[error("unknown gc code byte {0}")]
    UnknownGcCode(u8),
    #[error("{0} trailing bytes after packet")]
    TrailingBytes(usize),
    #[error("latency of {0} ns does not fit the 32-bit LAT field")]
    LatOverflow(u64),
}

/// Convert nanoseconds to LAT ticks, rounding to the nearest tick.
pub fn ns_to_ticks(ns: Nanos) -> u64 {
    (ns + LAT_TICK_NS / 2) / LAT_TICK_NS
}

pub fn ticks_to_ns(ticks: u32) -> Nanos {
    u64::from(ticks) * LAT_TICK_NS
}

impl Packet {
    pub fn new(vssd_id: u32, src: Ipv4Addr, dst: Ipv4Addr, body: Body) -> Self {
        Packet {
            vssd_id,
            lat: 0,
            src,
            dst,
            body,
        }
    }

    pub fn op(&self) -> OpCode {
        self.body.op()
    }

    pub fn gc(&self) -> Option<GcCode> {
        match self.body {
            Body::Gc(c) => Some(c),
            _ => None,
        }
    }

    /// Set LAT from a nanosecond value, failing if it does not fit.
    pub fn with_lat_ns(mut self, ns: Nanos) -> Result<Self, PacketError> {
        self.lat = u32::try_from(ns_to_ticks(ns)).map_err(|_| PacketError::LatOverflow(ns))?;
        Ok(self)
    }

    pub fn lat_ns(&self) -> Nanos {
        ticks_to_ns(self.lat)
    }

    /// Add one hop's latency (in ticks), saturating at the field width.
    pub fn add_hop_latency(mut self, hop_ticks: u32) -> Self {
        self.lat = self.lat.saturating_add(hop_ticks);
        self
    }

    pub fn add_hop_ns(self, hop: Nanos) -> Self {
        let ticks = u32::try_from(ns_to_ticks(hop)).unwrap_or(u32::MAX);
        self.add_hop_latency(ticks)
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN + self.op().payload_len() + ENVELOPE_LEN
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        self.encode_into(&mut out);
        out
    }

    pub fn encode_into(&self, out: &mut Vec<u8>) {
        out.push(self.op() as u8);
        out.extend_from_slice(&self.vssd_id.to_be_bytes());
        out.extend_from_slice(&self.lat.to_be_bytes());
        match self.body {
            Body::CreateVssd {
                server_ip,
                replica_vssd,
                replica_ip,
            } => {
                out.extend_from_slice(&server_ip.octets());
                out.extend_from_slice(&replica_vssd.to_be_bytes());
                out.extend_from_slice(&replica_ip.octets());
            }
            Body::DelVssd => {}
            Body::Write { lba, len } | Body::Read { lba, len } => {
                out.extend_from_slice(&lba.to_be_bytes());
                out.extend_from_slice(&len.to_be_bytes());
            }
            Body::Gc(code) => out.push(code as u8),
        }
        out.extend_from_slice(&self.src.octets());
        out.extend_from_slice(&self.dst.octets());
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, PacketError> {
        if bytes.len() < HEADER_LEN {
            return Err(PacketError::Truncated {
                need: HEADER_LEN,
                have: bytes.len(),
            });
        }
        let op = OpCode::from_byte(bytes[0])?;
        let need = HEADER_LEN + op.payload_len() + ENVELOPE_LEN;
        if bytes.len() < need {
            return Err(PacketError::Truncated {
                need,
                have: bytes.len(),
            });
        }
        if bytes.len() > need {
            return Err(PacketError::TrailingBytes(bytes.len() - need));
        }
        let vssd_id = be_u32(&bytes[1..5]);
        let lat = be_u32(&bytes[5..9]);
        let p = &bytes[HEADER_LEN..];
        let body = match op {
            OpCode::CreateVssd => Body::CreateVssd {
                server_ip: ip(&p[0..4]),
                replica_vssd: be_u32(&p[4..8]),
                replica_ip: ip(&p[8..12]),
            },
            OpCode::DelVssd => Body::DelVssd,
            OpCode::Write => Body::Write {
                lba: be_u64(&p[0..8]),
                len: be_u32(&p[8..12]),
            },
            OpCode::Read => Body::Read {
                lba: be_u64(&p[0..8]),
                len: be_u32(&p[8..12]),
            },
            OpCode::GcOp => Body::Gc(GcCode::from_byte(p[0])?),
        };
        let env = &bytes[need - ENVELOPE_LEN..];
        Ok(Packet {
            vssd_id,
            lat,
            src: ip(&env[0..4]),
            dst: ip(&env[4..8]),
            body,
        })
    }
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes(b.try_into().expect("4 bytes"))
}

fn be_u64(b: &[u8]) -> u64 {
    u64::from_be_bytes(b.try_into().expect("8 bytes"))
}

fn ip(b: &[u8]) -> Ipv4Addr {
    Ipv4Addr::new(b[0], b[1], b[2], b[3])
}

/// Append one length-prefixed record (u32 BE length, then the packet bytes).
pub fn write_record<W: Write>(w: &mut W, p: &Packet) -> io::Result<()> {
    let bytes = p.encode();
    w.write_all(&(bytes.len() as u32).to_be_bytes())?;
    w.write_all(&bytes)
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("record {index}: {source}")]
    Packet { index: usize, source: PacketError },
}

/// Read every record from a packet-trace stream.
pub fn read_records<R: Read>(r: &mut R) -> Result<Vec<Packet>, TraceError> {
    let mut out = Vec::new();
    let mut len_buf = [0u8; 4];
    loop {
        match r.read_exact(&mut len_buf) {
            Ok(()) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let len = u32::from_be_bytes(len_buf) as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf)?;
        let p = Packet::decode(&buf).map_err(|source| TraceError::Packet {
            index: out.len(),
            source,
        })?;
        out.push(p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_pkt(lat: u32) -> Packet {
        Packet {
            vssd_id: 7,
            lat,
            src: Ipv4Addr::new(10, 0, 0, 1),
            dst: Ipv4Addr::new(10, 0, 1, 2),
            body: Body::Read { lba: 42, len: 4096 },
        }
    }

    #[test]
    fn header_layout() {
        let b = read_pkt(0).encode();
        assert_eq!(b[0], OpCode::Read as u8);
        assert_eq!(&b[1..5], &[0, 0, 0, 7]);
        assert_eq!(&b[5..9], &[0, 0, 0, 0]);
        assert_eq!(b.len(), HEADER_LEN + 12 + ENVELOPE_LEN);
    }

    #[test]
    fn finish_is_five_on_the_wire() {
        let p = Packet::new(
            1,
            Ipv4Addr::LOCALHOST,
            Ipv4Addr::LOCALHOST,
            Body::Gc(GcCode::Finish),
        );
        assert_eq!(p.encode()[HEADER_LEN], 5);
    }

    #[test]
    fn rejects_bad_bytes() {
        let mut b = read_pkt(3).encode();
        b[0] = 0xFF;
        assert_eq!(Packet::decode(&b), Err(PacketError::UnknownOpCode(0xFF)));

        let mut g = Packet::new(1, Ipv4Addr::LOCALHOST, Ipv4Addr::LOCALHOST, Body::Gc(GcCode::Soft)).encode();
        g[HEADER_LEN] = 9;
        assert_eq!(Packet::decode(&g), Err(PacketError::UnknownGcCode(9)));

        let b = read_pkt(3).encode();
        assert!(matches!(
            Packet::decode(&b[..b.len() - 1]),
            Err(PacketError::Truncated { .. })
        ));
        assert!(matches!(
            Packet::decode(&b[..4]),
            Err(PacketError::Truncated { need: 9, have: 4 })
        ));
        let mut long = b.clone();
        long.push(0);
        assert_eq!(Packet::decode(&long), Err(PacketError::TrailingBytes(1)));
    }

    #[test]
    fn hop_latency() {
        assert_eq!(read_pkt(100).add_hop_latency(50).lat, 150);
        assert_eq!(read_pkt(100).add_hop_latency(0), read_pkt(100));
        assert_eq!(read_pkt(u32::MAX).add_hop_latency(10).lat, u32::MAX);
    }

    #[test]
    fn tick_rounding() {
        assert_eq!(ns_to_ticks(800), 13); // 12.5 ticks rounds up
        assert_eq!(ns_to_ticks(10_000), 156); // 156.25
        assert_eq!(ns_to_ticks(31), 0);
        assert_eq!(ns_to_ticks(32), 1);
        assert!(read_pkt(0).with_lat_ns(u64::MAX / 2).is_err());
    }

    #[test]
    fn trace_records_round_trip() {
        let pkts = vec![read_pkt(1), read_pkt(2).add_hop_latency(9)];
        let mut buf = Vec::new();
        for p in &pkts {
            write_record(&mut buf, p).unwrap();
        }
        assert_eq!(read_records(&mut buf.as_slice()).unwrap(), pkts);
    }
}
