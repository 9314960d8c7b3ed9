//! Recomputes the H1 shift: `cargo run --release --example calibrate -- 400000`.

use robust_mct::sim::{calibrate_effect, DEFAULT_SEED};

fn main() {
    let runs: usize = std::env::args().nth(1).map_or(400_000, |s| s.parse().expect("run count"));
    let effect = calibrate_effect(0.84, runs, DEFAULT_SEED).expect("calibration");
    println!("effect {effect:.15} sigma");
}
