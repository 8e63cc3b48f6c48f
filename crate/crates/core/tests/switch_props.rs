mod oracle;

use std::net::Ipv4Addr;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use racksim::packet::{Body, GcCode, Packet};
use racksim::switch::{DecisionKind, SwitchError, SwitchPlane};

use oracle::Alg1;

const VSSDS: u32 = 16;

fn setup() -> (SwitchPlane, Alg1) {
    let mut sw = SwitchPlane::default();
    let mut or = Alg1::default();
    for v in 0..VSSDS {
        let ip = oracle::server_ip(v % 4);
        let r = v ^ 1;
        let create = Packet::new(
            v,
            ip,
            Ipv4Addr::UNSPECIFIED,
            Body::CreateVssd {
                server_ip: ip,
                replica_vssd: r,
                replica_ip: oracle::server_ip(r % 4),
            },
        );
        sw.register_vssd(&create).unwrap();
        or.register(v, ip, r);
    }
    (sw, or)
}

fn gc(v: u32, code: GcCode) -> Packet {
    Packet::new(v, oracle::server_ip(v % 4), Ipv4Addr::UNSPECIFIED, Body::Gc(code))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn matches_reference_interpreter(seed in any::<u64>(), len in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sw, mut or) = setup();
        for _ in 0..len {
            let p = oracle::random_traffic(&mut rng, VSSDS + 1);
            let want = or.process_packet(p);
            match sw.process_packet(p) {
                Ok(d) => prop_assert_eq!(Some(d.out), want),
                Err(e) => {
                    prop_assert!(want.is_none());
                    prop_assert_eq!(e, SwitchError::UnknownVssd(p.vssd_id));
                }
            }
        }
    }

    /// Reads are only rewritten toward a replica whose destination entry is
    /// idle.
    #[test]
    fn redirects_target_idle_replicas(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut sw, _) = setup();
        for _ in 0..300 {
            let p = oracle::random_traffic(&mut rng, VSSDS);
            let before: Vec<_> = (0..VSSDS).map(|v| sw.gc_bits(v).unwrap()).collect();
            let d = sw.process_packet(p).unwrap();
            if d.kind == DecisionKind::ReadRedirected {
                let target = d.out[0].vssd_id;
                prop_assert_eq!(target, p.vssd_id ^ 1);
                prop_assert_eq!(before[target as usize].1, 0);
                prop_assert_eq!(before[p.vssd_id as usize].0, 1);
            }
        }
    }

    /// With only SOFT requests and matching FINISHes, at most one vSSD of a
    /// pair holds a grant at any time.
    #[test]
    fn soft_grants_are_exclusive(ops in proptest::collection::vec((0..VSSDS, any::<bool>()), 1..400)) {
        let (mut sw, _) = setup();
        let mut granted = [false; VSSDS as usize];
        for (v, finish) in ops {
            if finish {
                if granted[v as usize] {
                    sw.process_packet(gc(v, GcCode::Finish)).unwrap();
                    granted[v as usize] = false;
                }
            } else if !granted[v as usize] {
                let d = sw.process_packet(gc(v, GcCode::Soft)).unwrap();
                prop_assert_eq!(d.recirculations, 1);
                granted[v as usize] = d.kind == DecisionKind::GcReply(GcCode::Accept);
            }
            for p in (0..VSSDS).step_by(2) {
                prop_assert!(!(granted[p as usize] && granted[p as usize + 1]));
                let (a, b) = (sw.gc_bits(p).unwrap(), sw.gc_bits(p + 1).unwrap());
                prop_assert!(!(a.0 == 1 && b.0 == 1));
            }
        }
    }
}

#[test]
fn regular_is_never_denied() {
    let (mut sw, _) = setup();
    sw.process_packet(gc(0, GcCode::Soft)).unwrap();
    let d = sw.process_packet(gc(1, GcCode::Regular)).unwrap();
    assert_eq!(d.kind, DecisionKind::GcReply(GcCode::Accept));
    assert_eq!(d.out[0].dst, oracle::server_ip(1));
    assert_eq!(sw.gc_bits(1), Some((1, 1)));
}

#[test]
fn soft_is_delayed_behind_replica() {
    let (mut sw, _) = setup();
    sw.process_packet(gc(0, GcCode::Bg)).unwrap();
    let d = sw.process_packet(gc(1, GcCode::Soft)).unwrap();
    assert_eq!(d.kind, DecisionKind::GcReply(GcCode::Delay));
    assert_eq!(sw.gc_bits(1), Some((0, 0)));
    sw.process_packet(gc(0, GcCode::Finish)).unwrap();
    let d = sw.process_packet(gc(1, GcCode::Soft)).unwrap();
    assert_eq!(d.kind, DecisionKind::GcReply(GcCode::Accept));
}

#[test]
fn write_reaches_both_replicas() {
    let (mut sw, _) = setup();
    let w = Packet::new(2, oracle::client_ip(2), Ipv4Addr::UNSPECIFIED, Body::Write { lba: 8, len: 4096 });
    let d = sw.process_packet(w).unwrap();
    let dsts: Vec<_> = d.out.iter().map(|p| (p.vssd_id, p.dst)).collect();
    assert_eq!(dsts, [(2, Ipv4Addr::UNSPECIFIED), (3, oracle::server_ip(3))]);
}
