#![allow(dead_code)]

use ltrc_core::bootstrap::LatentParams;
use ltrc_core::rng::stream;
use ltrc_core::simstudy::{generate_dataset, SimConfig};
use ltrc_core::Dataset;

/// A simulated dataset with at least two failures from each cause. Draws
/// again from the next stream index until that holds.
pub fn dataset_with_both_causes(seed: u64, n: usize, fraction: f64, params: LatentParams) -> Dataset {
    let config = SimConfig::new(n, fraction, params);
    for index in 0.. {
        let mut rng = stream(seed, "test-data", index);
        let d = generate_dataset(&config, &mut rng).expect("valid design");
        if d.m1() >= 2 && d.m2() >= 2 {
            return d;
        }
    }
    unreachable!()
}

/// Parameters that give a mix of failures and censoring on the default design.
pub fn moderate_params(alpha: f64, u1: f64, u2: f64) -> LatentParams {
    // median lifetime of each cause between 2 and 15 years
    let scale = |u: f64| {
        let median = 2.0 + 13.0 * u;
        std::f64::consts::LN_2 / median.powf(alpha)
    };
    LatentParams::common(alpha, scale(u1), scale(u2))
}
