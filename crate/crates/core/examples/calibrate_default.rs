//! Re-derives `DEFAULT_THRESHOLD_FACTOR`.
use prachjam::detector::{calibrate_threshold, DetectorConfig, DEFAULT_TARGET_FAR};
use prachjam::par::Execution;
use prachjam::rng::stream;

fn main() {
    let mut rng = stream(0, 0, 0);
    let t = calibrate_threshold(
        DEFAULT_TARGET_FAR,
        1_000_000,
        &DetectorConfig::default(),
        139,
        Execution::Parallel,
        &mut rng,
    )
    .expect("calibration");
    println!("{t}");
}
