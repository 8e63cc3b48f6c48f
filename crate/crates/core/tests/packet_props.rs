use std::net::Ipv4Addr;

use proptest::prelude::*;
use racksim::packet::{ns_to_ticks, read_records, write_record, Body, GcCode, Packet, LAT_TICK_NS};

fn body() -> impl Strategy<Value = Body> {
    prop_oneof![
        (any::<u32>(), any::<u32>(), any::<u32>()).prop_map(|(s, r, ri)| Body::CreateVssd {
            server_ip: Ipv4Addr::from(s),
            replica_vssd: r,
            replica_ip: Ipv4Addr::from(ri),
        }),
        Just(Body::DelVssd),
        (any::<u64>(), any::<u32>()).prop_map(|(lba, len)| Body::Write { lba, len }),
        (any::<u64>(), any::<u32>()).prop_map(|(lba, len)| Body::Read { lba, len }),
        proptest::sample::select(GcCode::ALL.to_vec()).prop_map(Body::Gc),
    ]
}

fn packet() -> impl Strategy<Value = Packet> {
    (any::<u32>(), any::<u32>(), any::<u32>(), any::<u32>(), body()).prop_map(|(v, lat, s, d, b)| {
        let mut p = Packet::new(v, Ipv4Addr::from(s), Ipv4Addr::from(d), b);
        p.lat = lat;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn encode_decode_round_trip(p in packet()) {
        let bytes = p.encode();
        prop_assert_eq!(bytes.len(), p.encoded_len());
        prop_assert_eq!(Packet::decode(&bytes), Ok(p));
    }

    #[test]
    fn truncated_input_is_rejected(p in packet(), cut in 0usize..64) {
        let bytes = p.encode();
        let cut = cut.min(bytes.len() - 1);
        prop_assert!(Packet::decode(&bytes[..cut]).is_err());
    }

    #[test]
    fn arbitrary_bytes_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
        if let Ok(p) = Packet::decode(&bytes) {
            prop_assert_eq!(Packet::decode(&p.encode()), Ok(p));
        }
    }

    #[test]
    fn latency_ticks_round_trip(ns in 0u64..(u32::MAX as u64 * LAT_TICK_NS)) {
        let p = Packet::new(1, Ipv4Addr::LOCALHOST, Ipv4Addr::LOCALHOST, Body::DelVssd).with_lat_ns(ns).unwrap();
        prop_assert_eq!(u64::from(p.lat), ns_to_ticks(ns));
        prop_assert!(p.lat_ns().abs_diff(ns) <= LAT_TICK_NS);
    }

    #[test]
    fn trace_records_round_trip(ps in proptest::collection::vec(packet(), 0..20)) {
        let mut buf = Vec::new();
        for p in &ps {
            write_record(&mut buf, p).unwrap();
        }
        prop_assert_eq!(read_records(&mut buf.as_slice()).unwrap(), ps);
    }
}

#[test]
fn gc_codes_have_fixed_numerals() {
    let wire: Vec<u8> = GcCode::ALL.iter().map(|&c| c as u8).collect();
    assert_eq!(wire, [0, 1, 2, 3, 4, 5]);
    assert!(GcCode::from_byte(6).is_err());
}
