mod oracle;

use proptest::prelude::*;
use racksim::gc::{trigger_gc, GcMonitorConfig, IdlePredictor};
use racksim::packet::GcCode;
use racksim::sched::{SlidingWindow, WINDOW_LEN};

use oracle::WindowOracle;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn window_mean_is_exact(prior in 0u64..1_000_000, xs in proptest::collection::vec(0u64..u32::MAX as u64, 0..400)) {
        let mut w = SlidingWindow::new(prior);
        let mut o = WindowOracle::new(prior);
        prop_assert_eq!(w.mean().to_bits(), o.mean().to_bits());
        for x in xs {
            prop_assert_eq!(w.update(x).to_bits(), o.push(x).to_bits());
        }
        prop_assert!(w.len() <= WINDOW_LEN);
    }

    #[test]
    fn idle_predictor_follows_recurrence(alpha in 0.05f64..=1.0, gaps in proptest::collection::vec(0u64..1_000_000_000, 1..300)) {
        let mut p = IdlePredictor::new(alpha);
        let exact = oracle::idle_recurrence(alpha, &gaps, true);
        let real = oracle::idle_recurrence(alpha, &gaps, false);
        for (i, &g) in gaps.iter().enumerate() {
            let got = p.idle_update(g);
            prop_assert_eq!(got as f64, exact[i]);
            prop_assert!((got as f64 - real[i]).abs() <= 0.5 / alpha + 1e-6);
        }
    }
}

#[test]
fn alpha_one_tracks_the_last_gap() {
    let mut p = IdlePredictor::new(1.0);
    for g in [5, 900, 17, 0] {
        assert_eq!(p.idle_update(g), g);
    }
}

#[test]
fn triggers_follow_thresholds() {
    let cfg = GcMonitorConfig::default();
    let long_idle = cfg.bg_idle_threshold_ns + 1;
    assert_eq!(trigger_gc(0.9, 0, &cfg), None);
    assert_eq!(trigger_gc(0.9, long_idle, &cfg), Some(GcCode::Bg));
    assert_eq!(trigger_gc(cfg.soft_threshold - 0.01, long_idle, &cfg), Some(GcCode::Soft));
    assert_eq!(trigger_gc(cfg.gc_threshold - 0.01, 0, &cfg), Some(GcCode::Regular));
}
