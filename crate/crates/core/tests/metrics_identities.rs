use prachjam::campaign::IntervalRecord;
use prachjam::metrics::{compute_metrics, metrics_from_counts, Counts, MetricsError};
use proptest::prelude::*;

fn record() -> impl Strategy<Value = IntervalRecord> {
    (any::<bool>(), 0u64..700, any::<bool>(), any::<u64>()).prop_flat_map(
        |(valid, sent, ok, seed)| {
            let detected = if ok { 1..=sent.max(1) } else { 0..=sent.min(3) };
            detected.prop_map(move |d| IntervalRecord {
                index: 0,
                valid,
                preambles_sent: sent.max(d),
                preambles_detected: d,
                ra_succeeded: ok,
                time_to_success: None,
                seed,
            })
        },
    )
}

proptest! {
    #[test]
    fn formulas_match_brute_force(records in prop::collection::vec(record(), 1..60)) {
        let valid: Vec<_> = records.iter().filter(|r| r.valid).collect();
        match compute_metrics(&records) {
            Err(MetricsError::AllInvalid(_)) => prop_assert!(valid.is_empty()),
            Err(e) => prop_assert!(false, "{e}"),
            Ok(m) => {
                let n_i = records.len() as u64;
                let n_e = n_i - valid.len() as u64;
                let mut n_ra_s = 0u64;
                let mut n_p_j = 0u64;
                let mut sent = 0u64;
                for r in &valid {
                    if r.ra_succeeded { n_ra_s += 1; }
                    n_p_j += r.preambles_sent - r.preambles_detected;
                    sent += r.preambles_sent;
                }
                prop_assert_eq!(m.n_ra_s + m.n_ra_u + m.n_e, n_i);
                prop_assert_eq!(m.n_e, n_e);
                prop_assert_eq!(m.n_p_j, n_p_j);
                // Cross-multiplied, so the comparison is exact.
                let e_s = m.e_s;
                prop_assert_eq!(e_s.num as u128 * (n_i - n_e) as u128, n_ra_s as u128 * e_s.den as u128);
                let mean = m.mean_preambles_per_interval;
                prop_assert_eq!(mean.num as u128 * (n_i - n_e) as u128, (n_p_j + n_ra_s) as u128 * mean.den as u128);
                let count = m.mean_preambles_sent_per_interval.unwrap();
                prop_assert_eq!(count.num as u128 * (n_i - n_e) as u128, sent as u128 * count.den as u128);
                match m.e_p_j {
                    Some(f) => prop_assert_eq!(f.num as u128 * (n_p_j + n_ra_s) as u128, n_ra_s as u128 * f.den as u128),
                    None => prop_assert_eq!(n_p_j + n_ra_s, 0),
                }
            }
        }
    }
}

#[test]
fn table_rows() {
    let rows = [
        (800, 13, 33, 343_522, 437.0, 96.0, 4.2),
        (40, 0, 9, 169_630, 4241.0, 53.0, 22.5),
        (800, 11, 224, 295_103, 374.0, 758.0, 28.4),
    ];
    for (n_i, n_e, n_ra_s, n_p_j, mean, ppm, es) in rows {
        let m = metrics_from_counts(Counts {
            n_intervals: n_i,
            n_e,
            n_ra_s,
            n_p_j,
            n_p_sent: None,
        })
        .unwrap();
        assert!((m.mean_preambles_per_interval_value - mean).abs() <= 1.0);
        assert!((m.e_p_j_ppm.unwrap() - ppm).abs() <= 1.0);
        assert!((m.e_s_value * 100.0 - es).abs() <= 0.1);
    }
}
