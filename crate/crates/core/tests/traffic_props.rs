use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use racksim::engine::SimTime;
use racksim::sched::Dir;
use racksim::traffic::{
    zipf_normalizer, Arrival, KeyDist, NetClass, NetProfile, Pattern, Scrambler, TokenBucket, Workload, WorkloadSpec,
};

fn spec(dist: KeyDist, write_ratio: f64) -> WorkloadSpec {
    WorkloadSpec {
        write_ratio,
        key_space: 1000,
        distribution: dist,
        arrival: Arrival::Closed { clients: 1, think_ns: 0 },
        pattern: Pattern::Mixed,
        ..WorkloadSpec::default()
    }
}

#[test]
fn zipf_head_mass_matches_normalizer() {
    let theta = 0.99;
    let mut w = Workload::new(spec(KeyDist::Zipfian { theta }, 0.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let n = 200_000;
    let top = w.key_of_rank(0);
    let hits = (0..n).filter(|_| w.next_request(SimTime::ZERO, &mut rng).key == top).count();
    let want = 1.0 / zipf_normalizer(1000, theta);
    let got = hits as f64 / n as f64;
    assert!((got - want).abs() < 0.01, "top key share {got:.4}, expected {want:.4}");
}

#[test]
fn write_ratio_is_respected() {
    let mut w = Workload::new(spec(KeyDist::Uniform, 0.3)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 100_000;
    let writes = (0..n)
        .filter(|_| w.next_request(SimTime::ZERO, &mut rng).dir == Dir::Write)
        .count();
    assert!((writes as f64 / n as f64 - 0.3).abs() < 0.01);
}

#[test]
fn network_classes_have_their_medians() {
    for class in [NetClass::Fast, NetClass::Medium, NetClass::Slow] {
        let mut net = NetProfile::class(class);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut xs: Vec<u64> = (0..20_001)
            .map(|_| net.sample_path_latency(Dir::Read, SimTime::ZERO, &mut rng))
            .collect();
        xs.sort_unstable();
        let median = xs[xs.len() / 2] as f64;
        let want = class.median_ns() as f64;
        assert!((median / want - 1.0).abs() < 0.05, "{class:?}: median {median} vs {want}");
    }
}

#[test]
fn token_bucket_admits_burst_then_paces() {
    let mut tb = TokenBucket::new(1000.0, 4);
    let delays: Vec<u64> = (0..6).map(|_| tb.delay(SimTime::ZERO)).collect();
    assert_eq!(delays, [0, 0, 0, 0, 1_000_000, 2_000_000]);
}

proptest! {
    #[test]
    fn scrambler_is_a_permutation(n in 1u64..3000) {
        let s = Scrambler::new(n);
        let mut seen = vec![false; n as usize];
        for x in 0..n {
            let y = s.apply(x);
            prop_assert!(y < n);
            prop_assert!(!seen[y as usize]);
            seen[y as usize] = true;
        }
    }

    #[test]
    fn keys_stay_in_range(seed in any::<u64>(), theta in 0.1f64..0.999, uniform in any::<bool>()) {
        let dist = if uniform { KeyDist::Uniform } else { KeyDist::Zipfian { theta } };
        let mut w = Workload::new(spec(dist, 0.5)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..500 {
            prop_assert!(w.next_request(SimTime::ZERO, &mut rng).key < 1000);
        }
    }
}
