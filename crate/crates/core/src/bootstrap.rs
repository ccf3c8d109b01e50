//! Parametric bootstrap under the truncation/censoring design of the data.
//!
//! Each resample keeps every unit's `(tau_L, tau_R, truncated)` and redraws its
//! latent cause-specific lifetimes from the fitted model. For truncated units
//! both latent times are drawn conditional on exceeding `tau_L`, which is the
//! same as conditioning their minimum because the two are independent.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Observation, Outcome};
use crate::error::{check_positive, Error, Result};
use crate::mle::{solve_alpha, CommonShapeFit, SolverOptions};
use crate::rng::stream;
use crate::separate::{fit_separate_from, SeparateShapeFit};
use crate::special::normal_upper;

/// Shapes and rates of the two latent Weibull lifetimes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentParams {
    pub alpha1: f64,
    pub lambda1: f64,
    pub alpha2: f64,
    pub lambda2: f64,
}

impl LatentParams {
    pub fn common(alpha: f64, lambda1: f64, lambda2: f64) -> Self {
        LatentParams {
            alpha1: alpha,
            lambda1,
            alpha2: alpha,
            lambda2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("alpha1", self.alpha1)?;
        check_positive("lambda1", self.lambda1)?;
        check_positive("alpha2", self.alpha2)?;
        check_positive("lambda2", self.lambda2)
    }
}

impl From<&CommonShapeFit> for LatentParams {
    fn from(f: &CommonShapeFit) -> Self {
        LatentParams::common(f.alpha_hat, f.lambda1_hat, f.lambda2_hat)
    }
}

impl From<&SeparateShapeFit> for LatentParams {
    fn from(f: &SeparateShapeFit) -> Self {
        LatentParams {
            alpha1: f.alpha1_hat,
            lambda1: f.lambda1_hat,
            alpha2: f.alpha2_hat,
            lambda2: f.lambda2_hat,
        }
    }
}

/// Weibull(alpha, lambda) draw conditioned on exceeding `floor` (use 0 for
/// no conditioning), by inverting the conditional survival function.
pub fn weibull_beyond<R: Rng + ?Sized>(rng: &mut R, alpha: f64, lambda: f64, floor: f64) -> f64 {
    // 1 - U lies in (0, 1]
    let u: f64 = 1.0 - rng.random::<f64>();
    let base = if floor > 0.0 { floor.powf(alpha) } else { 0.0 };
    (base - u.ln() / lambda).powf(1.0 / alpha)
}

/// Draws one unit's outcome given its design `(tau_L, tau_R, truncated)`.
pub fn draw_unit<R: Rng + ?Sized>(
    rng: &mut R,
    params: &LatentParams,
    tau_l: f64,
    tau_r: f64,
    truncated: bool,
) -> Observation {
    let floor = if truncated { tau_l } else { 0.0 };
    let t1 = weibull_beyond(rng, params.alpha1, params.lambda1, floor);
    let t2 = weibull_beyond(rng, params.alpha2, params.lambda2, floor);
    let (t, outcome) = if t1 <= t2 {
        (t1, Outcome::Cause1)
    } else {
        (t2, Outcome::Cause2)
    };
    if t >= tau_r {
        Observation {
            t: tau_r,
            tau_l,
            tau_r,
            outcome: Outcome::Censored,
            truncated,
        }
    } else {
        Observation {
            t,
            tau_l,
            tau_r,
            outcome,
            truncated,
        }
    }
}

/// A fresh dataset with the template's design and outcomes drawn from `params`.
pub fn resample_dataset<R: Rng + ?Sized>(
    template: &Dataset,
    params: &LatentParams,
    rng: &mut R,
) -> Result<Dataset> {
    params.validate()?;
    let observations = template
        .observations()
        .iter()
        .map(|o| draw_unit(rng, params, o.tau_l, o.tau_r, o.truncated))
        .collect();
    Dataset::new(observations)
}

/// The fitted model a bootstrap resamples from.
#[derive(Clone, Copy, Debug)]
pub enum BootstrapModel<'a> {
    Common(&'a CommonShapeFit),
    Separate(&'a SeparateShapeFit),
}

impl BootstrapModel<'_> {
    pub fn parameter_names(&self) -> Vec<String> {
        let names: &[&str] = match self {
            BootstrapModel::Common(_) => &["alpha", "lambda1", "lambda2"],
            BootstrapModel::Separate(_) => &["alpha1", "lambda1", "alpha2", "lambda2"],
        };
        names.iter().map(|s| s.to_string()).collect()
    }

    pub fn estimates(&self) -> Vec<f64> {
        match self {
            BootstrapModel::Common(f) => f.params().to_vec(),
            BootstrapModel::Separate(f) => f.params().to_vec(),
        }
    }

    fn latent(&self) -> LatentParams {
        match self {
            BootstrapModel::Common(f) => LatentParams::from(*f),
            BootstrapModel::Separate(f) => LatentParams::from(*f),
        }
    }

    fn refit(&self, data: &Dataset, opts: &SolverOptions) -> Result<Vec<f64>> {
        match self {
            BootstrapModel::Common(f) => {
                let fit = solve_alpha(data, &opts.with_init(f.alpha_hat))?;
                if !fit.converged {
                    return Err(Error::Convergence {
                        message: "bootstrap refit".into(),
                        trace: vec![fit.alpha_hat],
                    });
                }
                Ok(fit.params().to_vec())
            }
            BootstrapModel::Separate(f) => {
                let fit = fit_separate_from(data, opts, [f.alpha1_hat, f.alpha2_hat])?;
                if !fit.converged() {
                    return Err(Error::Convergence {
                        message: "bootstrap refit".into(),
                        trace: vec![fit.alpha1_hat, fit.alpha2_hat],
                    });
                }
                Ok(fit.params().to_vec())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BootstrapDistribution {
    pub parameter_names: Vec<String>,
    /// One row per successful replicate, in replicate order.
    pub estimates: Vec<Vec<f64>>,
    pub b: usize,
    pub seed: u64,
    pub failed_replicates: usize,
}

impl BootstrapDistribution {
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.estimates.iter().map(|row| row[j]).collect()
    }
}

/// `b` resample-and-refit cycles. Replicate `i` uses the stream
/// `(seed, "bootstrap", i)`, so the result does not depend on threading.
pub fn bootstrap_distribution(
    dataset: &Dataset,
    model: BootstrapModel<'_>,
    b: usize,
    seed: u64,
    opts: &SolverOptions,
) -> Result<BootstrapDistribution> {
    if b < 2 {
        return Err(Error::InvalidArgument(format!("bootstrap needs B >= 2, got {b}")));
    }
    let params = model.latent();
    params.validate()?;
    let results: Vec<Option<Vec<f64>>> = (0..b)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, "bootstrap", i as u64);
            let data = resample_dataset(dataset, &params, &mut rng).ok()?;
            model.refit(&data, opts).ok()
        })
        .collect();
    let estimates: Vec<Vec<f64>> = results.into_iter().flatten().collect();
    let failed_replicates = b - estimates.len();
    if 2 * failed_replicates > b {
        return Err(Error::UnstableBootstrap {
            failed: failed_replicates,
            total: b,
        });
    }
    Ok(BootstrapDistribution {
        parameter_names: model.parameter_names(),
        estimates,
        b,
        seed,
        failed_replicates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalMethod {
    BcBootstrap,
    PercentileBootstrap,
    SymmetricCredible,
    HpdCredible,
}

impl IntervalMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            IntervalMethod::BcBootstrap => "bc_bootstrap",
            IntervalMethod::PercentileBootstrap => "percentile_bootstrap",
            IntervalMethod::SymmetricCredible => "symmetric_credible",
            IntervalMethod::HpdCredible => "hpd_credible",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub method: IntervalMethod,
    /// Set when the interval collapsed to a point (zero spread).
    pub degenerate: bool,
}

impl ConfidenceInterval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Display variant with a negative lower bound raised to zero.
    pub fn clamped_at_zero(self) -> Self {
        ConfidenceInterval {
            lower: self.lower.max(0.0),
            upper: self.upper.max(0.0),
            ..self
        }
    }
}

pub(crate) fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("level must be in (0, 1), got {level}")))
    }
}

/// Greatest integer not above `x`, tolerant of representation error such as
/// `100 * 0.05 = 4.999...`.
pub(crate) fn floor_index(x: f64) -> usize {
    (x + 1e-9 * x.abs().max(1.0)).floor().max(0.0) as usize
}

/// Bias-corrected normal interval `theta - b -+ z sqrt(v)`. Not floored at 0.
pub fn bc_interval(estimates: &[f64], original: f64, level: f64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let n = estimates.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mean = estimates.iter().sum::<f64>() / n as f64;
    let var = estimates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let bias = mean - original;
    let center = original - bias;
    let half = normal_upper((1.0 - level) / 2.0) * var.sqrt();
    Ok(ConfidenceInterval {
        lower: center - half,
        upper: center + half,
        level,
        method: IntervalMethod::BcBootstrap,
        degenerate: var == 0.0,
    })
}

/// Order-statistic interval `(x_([B beta/2]), x_([B (1 - beta/2)]))`, 1-based
/// indices clamped to `[1, B]`.
pub fn percentile_interval(estimates: &[f64], level: f64) -> Result<ConfidenceInterval> {
    check_level(level)?;
    let n = estimates.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let mut sorted = estimates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let beta = 1.0 - level;
    let idx = |x: f64| floor_index(x).clamp(1, n) - 1;
    let lower = sorted[idx(n as f64 * beta / 2.0)];
    let upper = sorted[idx(n as f64 * (1.0 - beta / 2.0))];
    Ok(ConfidenceInterval {
        lower,
        upper,
        level,
        method: IntervalMethod::PercentileBootstrap,
        degenerate: lower == upper,
    })
}

/// Row of an interval table, `parameter,level,method,lower,upper`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalRow {
    pub parameter: String,
    pub level: f64,
    pub method: IntervalMethod,
    pub lower: f64,
    pub upper: f64,
}

impl IntervalRow {
    pub fn new(parameter: &str, ci: &ConfidenceInterval) -> Self {
        IntervalRow {
            parameter: parameter.to_string(),
            level: ci.level,
            method: ci.method,
            lower: ci.lower,
            upper: ci.upper,
        }
    }
}

/// Both bootstrap intervals for every parameter at every level.
pub fn bootstrap_interval_table(
    dist: &BootstrapDistribution,
    originals: &[f64],
    levels: &[f64],
) -> Result<Vec<IntervalRow>> {
    let mut rows = Vec::new();
    for (j, name) in dist.parameter_names.iter().enumerate() {
        let col = dist.column(j);
        for &level in levels {
            rows.push(IntervalRow::new(name, &bc_interval(&col, originals[j], level)?));
            rows.push(IntervalRow::new(name, &percentile_interval(&col, level)?));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::transformer_dataset;
    use crate::rng::stream;
    use approx::assert_relative_eq;

    #[test]
    fn dominant_cause_wins() {
        let p = LatentParams::common(1.0, 1e6, 1.0);
        let mut rng = stream(1, "t", 0);
        let n = 10_000;
        let wins = (0..n)
            .filter(|_| draw_unit(&mut rng, &p, 0.0, 1e9, false).outcome == Outcome::Cause1)
            .count();
        assert!(wins as f64 / n as f64 >= 0.999);
    }

    #[test]
    fn cause_probability_matches_rate_ratio() {
        let p = LatentParams::common(2.0, 0.0625, 0.04);
        let mut rng = stream(2, "t", 0);
        let n = 100_000;
        let wins = (0..n)
            .filter(|_| draw_unit(&mut rng, &p, 0.0, f64::INFINITY, false).outcome == Outcome::Cause1)
            .count();
        let expect = 0.0625 / (0.0625 + 0.04);
        assert!((wins as f64 / n as f64 - expect).abs() < 0.01);
    }

    #[test]
    fn exponential_memorylessness() {
        let mut rng = stream(3, "t", 0);
        let n = 100_000;
        let mean = (0..n).map(|_| weibull_beyond(&mut rng, 1.0, 1.0, 1.0) - 1.0).sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn bc_hand_example() {
        let ci = bc_interval(&[1.0, 2.0, 3.0], 2.0, 0.95).unwrap();
        assert_relative_eq!(ci.lower, 2.0 - 1.959_963_984_540_054, epsilon = 1e-12);
        assert_relative_eq!(ci.upper, 2.0 + 1.959_963_984_540_054, epsilon = 1e-12);
        assert!(!ci.degenerate);
    }

    #[test]
    fn bc_degenerate() {
        let ci = bc_interval(&[4.0; 10], 4.0, 0.9).unwrap();
        assert_eq!((ci.lower, ci.upper), (4.0, 4.0));
        assert!(ci.degenerate);
    }

    #[test]
    fn bc_can_go_negative() {
        let ci = bc_interval(&[0.1, 5.0, 20.0, 0.2], 1.0, 0.9).unwrap();
        assert!(ci.lower < 0.0);
        assert_eq!(ci.clamped_at_zero().lower, 0.0);
    }

    #[test]
    fn percentile_index_arithmetic() {
        let xs: Vec<f64> = (1..=100).rev().map(|i| i as f64).collect();
        let ci = percentile_interval(&xs, 0.9).unwrap();
        assert_eq!((ci.lower, ci.upper), (5.0, 95.0));
        let ci = percentile_interval(&xs, 0.95).unwrap();
        assert_eq!((ci.lower, ci.upper), (2.0, 97.0));
        // clamping at index 1
        let ci = percentile_interval(&[3.0, 1.0, 2.0], 0.9).unwrap();
        assert_eq!(ci.lower, 1.0);
        assert_eq!(ci.upper, 2.0);
    }

    #[test]
    fn level_validation() {
        assert!(bc_interval(&[1.0, 2.0], 1.0, 1.0).is_err());
        assert!(percentile_interval(&[1.0, 2.0], 0.0).is_err());
        assert!(percentile_interval(&[1.0], 0.9).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let d = transformer_dataset(100.0).unwrap();
        let fit = solve_alpha(&d, &SolverOptions::default()).unwrap();
        let opts = SolverOptions::default();
        let a = bootstrap_distribution(&d, BootstrapModel::Common(&fit), 50, 9, &opts).unwrap();
        let b = bootstrap_distribution(&d, BootstrapModel::Common(&fit), 50, 9, &opts).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.estimates.len() + a.failed_replicates, 50);
    }

    #[test]
    fn degenerate_template_is_unstable() {
        let d = Dataset::new(vec![Observation::untruncated(0.5, 1.0, Outcome::Cause1).unwrap()]).unwrap();
        let fake = CommonShapeFit {
            alpha_hat: 1.0,
            lambda1_hat: 1.0,
            lambda2_hat: 1.0,
            loglik: 0.0,
            iterations: 0,
            converged: true,
            unimodality_certified: true,
            method: crate::mle::ShapeMethod::FixedPoint,
        };
        let err = bootstrap_distribution(&d, BootstrapModel::Common(&fake), 2, 1, &SolverOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::UnstableBootstrap { failed: 2, total: 2 }));
    }
}
