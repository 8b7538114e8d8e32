//! Missed-detection rate of S1 and S2 across jammer design SNR.

use prachjam::channel::ChannelConfig;
use prachjam::detector::DetectorConfig;
use prachjam::jammer::{JammerConfig, JammerKind};
use prachjam::link::{run_preamble_trials, Link};
use prachjam::par::Execution;
use prachjam::prach::{occasions_in_frame, CellConfig, PrachConfig};

fn main() {
    let trials: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10_000);
    let cell = CellConfig::desk_preset();
    let occ = occasions_in_frame(&PrachConfig::table_i(), &cell, 1)[0];
    println!("snr_db,s1_missed,s2_missed");
    for snr in [0.0, -6.0, -10.0, -12.0, -14.0, -16.0, -18.0, -20.0] {
        let mut row = vec![];
        for kind in [JammerKind::S1, JammerKind::S2] {
            let jammer = JammerConfig {
                kind,
                snr_db: snr,
                ..Default::default()
            };
            let link = Link::new(
                cell.clone(),
                ChannelConfig::default(),
                jammer,
                DetectorConfig::default(),
                1.0,
                139,
            )
            .unwrap();
            let s = run_preamble_trials(&link, &occ, true, trials, 1, Execution::Parallel).unwrap();
            row.push(s.missed_rate());
        }
        println!("{snr},{:.5},{:.5}", row[0], row[1]);
    }
}
