//! Deterministic verification harness: assembles desk-scale instances, runs
//! the theorem suites over a dimension/degree grid, and emits replayable
//! reports.

pub mod report;
pub mod suites;

pub use report::{Counterexample, PropertyResult, Status, SuiteConfig, SuiteReport};
pub use suites::{replay_counterexample, run_suites, SUITE_NAMES};

/// splitmix64 step, the mixing function for per-trial seed derivation.
fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

/// Deterministic per-trial seed: a function of the master seed, a stable
/// label (suite/property/instance) and the trial index only.
pub fn derive_seed(master: u64, label: &str, trial: u64) -> u64 {
    let mut h = splitmix64(master ^ 0x5851F42D4C957F2D);
    for b in label.bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ trial.wrapping_mul(0xA24BAED4963EE407))
}
