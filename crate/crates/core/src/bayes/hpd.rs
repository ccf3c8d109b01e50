//! Credible intervals from posterior draws.

use crate::bootstrap::{floor_index, ConfidenceInterval, IntervalMethod};
use crate::error::{Error, Result};

fn check_two_beta(two_beta: f64) -> Result<()> {
    if two_beta > 0.0 && two_beta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tail mass must be in (0, 1), got {two_beta}"
        )))
    }
}

/// Sorts the draws and returns them with the number `k = [2N beta]` of
/// candidate windows, each spanning `N - k` order statistics.
fn windows(samples: &[f64], two_beta: f64) -> Result<(Vec<f64>, usize)> {
    check_two_beta(two_beta)?;
    let n = samples.len();
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidArgument("NaN among posterior draws".into()));
    }
    let k = floor_index(n as f64 * two_beta);
    if k == 0 || n < k + 1 {
        let needed = (1.0 / two_beta).ceil() as usize;
        return Err(Error::TooFewSamples { needed, got: n });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok((sorted, k))
}

fn interval(sorted: &[f64], k: usize, j: usize, two_beta: f64, method: IntervalMethod) -> ConfidenceInterval {
    // 1-based candidate j is (g_(j), g_(j + N - k - 1))
    let n = sorted.len();
    let lower = sorted[j - 1];
    let upper = sorted[j + n - k - 2];
    ConfidenceInterval {
        lower,
        upper,
        level: 1.0 - two_beta,
        method,
        degenerate: lower == upper,
    }
}

/// Shortest of the candidate windows `(g_(j), g_(j+N-[2N beta]-1))`,
/// `j = 1..[2N beta]`; ties go to the smallest `j`.
pub fn hpd_interval(samples: &[f64], two_beta: f64) -> Result<ConfidenceInterval> {
    let (sorted, k) = windows(samples, two_beta)?;
    let n = sorted.len();
    let mut best = 1;
    let mut best_width = f64::INFINITY;
    for j in 1..=k {
        let width = sorted[j + n - k - 2] - sorted[j - 1];
        if width < best_width {
            best = j;
            best_width = width;
        }
    }
    Ok(interval(&sorted, k, best, two_beta, IntervalMethod::HpdCredible))
}

/// Equal-tail interval: the middle candidate window, i.e. the `beta` and
/// `1 - beta` sample quantiles. Being one of the HPD candidates, it is never
/// shorter than [`hpd_interval`].
pub fn symmetric_interval(samples: &[f64], two_beta: f64) -> Result<ConfidenceInterval> {
    let (sorted, k) = windows(samples, two_beta)?;
    Ok(interval(&sorted, k, k / 2 + 1, two_beta, IntervalMethod::SymmetricCredible))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn hand_enumeration_tie() {
        let xs: Vec<f64> = (1..=10).map(f64::from).collect();
        let ci = hpd_interval(&xs, 0.2).unwrap();
        assert_eq!((ci.lower, ci.upper), (1.0, 8.0));
        let sym = symmetric_interval(&xs, 0.2).unwrap();
        assert_eq!((sym.lower, sym.upper), (2.0, 9.0));
    }

    #[test]
    fn picks_dense_region() {
        let xs = [0.0, 10.0, 10.1, 10.2, 10.3, 10.4, 10.5, 10.6, 10.7, 30.0];
        let ci = hpd_interval(&xs, 0.2).unwrap();
        assert_eq!((ci.lower, ci.upper), (10.0, 10.7));
    }

    #[test]
    fn standard_normal() {
        let mut rng = stream(11, "hpd", 0);
        let xs: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ci = hpd_interval(&xs, 0.05).unwrap();
        assert!((ci.lower + 1.96).abs() < 0.05 && (ci.upper - 1.96).abs() < 0.05, "{ci:?}");
        assert_eq!(ci.level, 0.95);
    }

    #[test]
    fn too_few() {
        assert!(hpd_interval(&[1.0, 2.0], 0.1).is_err());
        assert!(hpd_interval(&[1.0, 2.0], 1.0).is_err());
    }
}
