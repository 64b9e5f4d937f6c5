use mentorgraph::scheduler::{next_interval, predict_recall, update_ease, Quality, SchedulerConfig};
use proptest::prelude::*;

fn q(v: u8) -> Quality {
    Quality::new(v).unwrap()
}

proptest! {
    #[test]
    fn ease_has_a_floor_and_grows_with_quality(ef in 1.3..4.0f64, g in 0u8..5) {
        let lo = update_ease(ef, q(g));
        let hi = update_ease(ef, q(g + 1));
        prop_assert!(lo >= 1.3);
        prop_assert!(hi >= lo);
    }

    #[test]
    fn intervals_grow_once_established(n in 2u32..20, prev in 1u32..400, ef in 1.3..3.0f64) {
        let next = next_interval(n, prev, ef);
        prop_assert!(next >= prev);
        prop_assert_eq!(next, (f64::from(prev) * ef).round() as u32);
    }

    #[test]
    fn recall_decays_with_elapsed_time(a in 0.0..200.0f64, b in 0.0..200.0f64, ef in 1.3..3.0f64, i in 1u32..100) {
        let cfg = SchedulerConfig::default();
        let (near, far) = if a <= b { (a, b) } else { (b, a) };
        let r_near = predict_recall(near, ef, f64::from(i), &cfg);
        let r_far = predict_recall(far, ef, f64::from(i), &cfg);
        prop_assert!(r_far <= r_near);
        prop_assert!(r_far > 0.0 && r_near <= 1.0);
    }

    #[test]
    fn recall_rises_with_ease_and_interval(dt in 0.1..100.0f64, ef in 1.3..2.9f64, i in 1u32..60) {
        let cfg = SchedulerConfig::default();
        let base = predict_recall(dt, ef, f64::from(i), &cfg);
        prop_assert!(predict_recall(dt, ef + 0.1, f64::from(i), &cfg) > base);
        prop_assert!(predict_recall(dt, ef, f64::from(i + 1), &cfg) > base);
    }
}

#[test]
fn first_three_intervals() {
    let mut ef = 2.5;
    let mut interval = 0;
    let mut seen = Vec::new();
    for n in 0..4 {
        ef = update_ease(ef, q(4));
        interval = next_interval(n, interval, ef);
        seen.push(interval);
    }
    // q = 4 leaves EF at 2.5
    assert_eq!(seen, [1, 6, 15, 38]);
}

#[test]
fn recall_at_zero_elapsed_is_certain() {
    assert_eq!(predict_recall(0.0, 2.5, 6.0, &SchedulerConfig::default()), 1.0);
}
