//! Bayesian inference with a Dirichlet-Gamma prior on the scales.
//!
//! For a known shape the posterior of `(lambda1, lambda2)` is again
//! Dirichlet-Gamma. For an unknown shape the scales are integrated out, the
//! shape is drawn from its log-concave marginal, and the scales are then
//! drawn from the conditional Dirichlet-Gamma. The separate-shape posterior
//! factorizes over causes and is sampled the same way, one cause at a time.

mod alpha;
mod ars;
mod dg;
mod hpd;

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta as BetaDist, ContinuousCDF, Gamma as GammaDist};

pub use ars::AdaptiveRejection;
pub use dg::{dg_moments, dg_sample, DgMoments, DgParams, DgSampler};
pub use hpd::{hpd_interval, symmetric_interval};

use crate::bootstrap::{check_level, IntervalRow};
use crate::data::{Cause, Dataset};
use crate::error::{check_positive, Error, Result};
use crate::rng::{stream, StreamRng};
use crate::weights::{failure_log_sum, Exposure};
use alpha::{AlphaPosterior, GridSampler};

/// Default number of posterior draws.
pub const DEFAULT_DRAWS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub dg: DgParams,
    /// Gamma shape `c` of the prior on alpha.
    pub alpha_shape: f64,
    /// Gamma rate `d` of the prior on alpha.
    pub alpha_rate: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            dg: DgParams::default(),
            alpha_shape: 1e-4,
            alpha_rate: 1e-4,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        self.dg.validate()?;
        check_positive("c", self.alpha_shape)?;
        check_positive("d", self.alpha_rate)
    }
}

/// Independent gamma priors per cause: `alpha_j ~ GA(a_j, b_j)` and
/// `lambda_j ~ GA(c_j, d_j)`. Index 0 is cause 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatePriorSpec {
    pub alpha_shape: [f64; 2],
    pub alpha_rate: [f64; 2],
    pub lambda_shape: [f64; 2],
    pub lambda_rate: [f64; 2],
}

impl Default for SeparatePriorSpec {
    fn default() -> Self {
        SeparatePriorSpec {
            alpha_shape: [1e-4; 2],
            alpha_rate: [1e-4; 2],
            lambda_shape: [1e-4; 2],
            lambda_rate: [1e-4; 2],
        }
    }
}

impl SeparatePriorSpec {
    pub fn validate(&self) -> Result<()> {
        for j in 0..2 {
            check_positive("a_j", self.alpha_shape[j])?;
            check_positive("b_j", self.alpha_rate[j])?;
            check_positive("c_j", self.lambda_shape[j])?;
            check_positive("d_j", self.lambda_rate[j])?;
        }
        Ok(())
    }
}

/// Which sampler produced the shape draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaSampler {
    AdaptiveRejection,
    GridInversion,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub alpha: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub draws: Vec<PosteriorDraw>,
    pub seed: u64,
    pub n: usize,
    pub sampler: AlphaSampler,
    pub warnings: Vec<String>,
}

impl PosteriorDraws {
    pub fn alpha(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.alpha).collect()
    }

    pub fn lambda1(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.lambda1).collect()
    }

    pub fn lambda2(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.lambda2).collect()
    }

    /// `alpha,lambda1,lambda2` CSV with a header line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha,lambda1,lambda2\n");
        for d in &self.draws {
            let _ = writeln!(s, "{},{},{}", d.alpha, d.lambda1, d.lambda2);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparateDraw {
    pub alpha1: f64,
    pub lambda1: f64,
    pub alpha2: f64,
    pub lambda2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparatePosteriorDraws {
    pub draws: Vec<SeparateDraw>,
    pub seed: u64,
    pub n: usize,
    pub samplers: [AlphaSampler; 2],
    pub warnings: Vec<String>,
}

impl SeparatePosteriorDraws {
    /// Columns in the order `alpha1, lambda1, alpha2, lambda2`.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.draws
            .iter()
            .map(|d| [d.alpha1, d.lambda1, d.alpha2, d.lambda2][j])
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("alpha1,lambda1,alpha2,lambda2\n");
        for d in &self.draws {
            let _ = writeln!(s, "{},{},{},{}", d.alpha1, d.lambda1, d.alpha2, d.lambda2);
        }
        s
    }
}

/// Joint credible region for `(lambda1, lambda2)` at a known shape: the
/// trapezoid `A <= lambda1 + lambda2 <= B`, `C <= lambda1/(lambda1 + lambda2) <= D`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CredibleTrapezoid {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub area: f64,
}

impl CredibleTrapezoid {
    pub fn contains(&self, lambda1: f64, lambda2: f64) -> bool {
        let total = lambda1 + lambda2;
        let share = lambda1 / total;
        self.a <= total && total <= self.b && self.c <= share && share <= self.d
    }
}

fn w2_at(dataset: &Dataset, alpha: f64) -> f64 {
    Exposure::new(dataset).sums(alpha).w2
}

/// Conjugate update `DG(b0 + w2(a), a0 + m, a1 + m1, a2 + m2)`.
pub fn posterior_dg(dataset: &Dataset, alpha: f64, prior: &DgParams) -> Result<DgParams> {
    check_positive("alpha", alpha)?;
    prior.validate()?;
    Ok(update(prior, w2_at(dataset, alpha), dataset))
}

fn update(prior: &DgParams, w2: f64, dataset: &Dataset) -> DgParams {
    DgParams {
        b: prior.b + w2,
        a0: prior.a0 + dataset.m() as f64,
        a1: prior.a1 + dataset.m1() as f64,
        a2: prior.a2 + dataset.m2() as f64,
    }
}

/// Posterior means (squared-error Bayes estimates) and variances of the
/// scales at a known shape.
pub fn bayes_known_alpha(dataset: &Dataset, alpha: f64, prior: &DgParams) -> Result<DgMoments> {
    Ok(dg_moments(&posterior_dg(dataset, alpha, prior)?))
}

/// Equal-tail trapezoid with both factors at tail mass `1 - sqrt(1 - gamma)`,
/// so their product has coverage `1 - gamma`.
pub fn credible_trapezoid(
    dataset: &Dataset,
    alpha: f64,
    prior: &DgParams,
    gamma_total: f64,
) -> Result<CredibleTrapezoid> {
    if !(gamma_total > 0.0 && gamma_total < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be in (0, 1), got {gamma_total}"
        )));
    }
    let post = posterior_dg(dataset, alpha, prior)?;
    let g = 1.0 - (1.0 - gamma_total).sqrt();
    let total = GammaDist::new(post.a0, post.b).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let share = BetaDist::new(post.a1, post.a2).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let (a, b) = (total.inverse_cdf(g / 2.0), total.inverse_cdf(1.0 - g / 2.0));
    let (c, d) = (share.inverse_cdf(g / 2.0), share.inverse_cdf(1.0 - g / 2.0));
    Ok(CredibleTrapezoid {
        a,
        b,
        c,
        d,
        gamma1: g,
        gamma2: g,
        area: (b * b - a * a) * (d - c) / 2.0,
    })
}

fn common_alpha_posterior(dataset: &Dataset, prior: &PriorSpec) -> AlphaPosterior {
    let m = dataset.m() as f64;
    AlphaPosterior {
        exposure: Exposure::new(dataset),
        coef: prior.alpha_shape - 1.0 + m,
        rate: prior.alpha_rate,
        log_sum: failure_log_sum(dataset, None),
        power: prior.dg.a0 + m,
        shift: prior.dg.b,
    }
}

fn cause_alpha_posterior(dataset: &Dataset, prior: &SeparatePriorSpec, cause: Cause) -> AlphaPosterior {
    let j = cause.index() as usize - 1;
    let m = dataset.failures(cause) as f64;
    AlphaPosterior {
        exposure: Exposure::new(dataset),
        coef: prior.alpha_shape[j] - 1.0 + m,
        rate: prior.alpha_rate[j],
        log_sum: failure_log_sum(dataset, Some(cause)),
        power: prior.lambda_shape[j] + m,
        shift: prior.lambda_rate[j],
    }
}

/// Unnormalized log marginal posterior of the common shape.
pub fn log_posterior_alpha(dataset: &Dataset, prior: &PriorSpec, alpha: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    prior.validate()?;
    Ok(common_alpha_posterior(dataset, prior).log_density(alpha))
}

/// Unnormalized log marginal posterior of one cause's shape.
pub fn log_posterior_cause_alpha(
    dataset: &Dataset,
    prior: &SeparatePriorSpec,
    cause: Cause,
    alpha: f64,
) -> Result<f64> {
    check_positive("alpha", alpha)?;
    prior.validate()?;
    Ok(cause_alpha_posterior(dataset, prior, cause).log_density(alpha))
}

/// Whether the common-shape marginal is certified log-concave.
pub fn log_concavity_certified(dataset: &Dataset, prior: &PriorSpec) -> bool {
    common_alpha_posterior(dataset, prior).certified()
}

/// Draws shapes from an [`AlphaPosterior`], preferring adaptive rejection
/// and falling back to grid inversion.
struct ShapeDraws<'a> {
    post: &'a AlphaPosterior,
    mode: f64,
    kind: AlphaSampler,
    warnings: Vec<String>,
}

impl<'a> ShapeDraws<'a> {
    fn new(post: &'a AlphaPosterior, label: &str) -> Result<Self> {
        let mode = post.mode()?;
        let mut warnings = Vec::new();
        let kind = if post.certified() {
            AlphaSampler::AdaptiveRejection
        } else {
            warnings.push(format!(
                "{label}: log-concavity not certified; using grid-inversion sampling"
            ));
            AlphaSampler::GridInversion
        };
        Ok(ShapeDraws {
            post,
            mode,
            kind,
            warnings,
        })
    }

    /// Runs `n` rounds of `shape draw, then follow(alpha)`.
    fn run<T>(
        mut self,
        n: usize,
        rng: &mut StreamRng,
        label: &str,
        mut follow: impl FnMut(f64, &mut StreamRng) -> Result<T>,
    ) -> Result<(Vec<T>, AlphaSampler, Vec<String>)> {
        let mut out = Vec::with_capacity(n);
        if self.kind == AlphaSampler::AdaptiveRejection {
            match self.post.rejection_sampler(self.mode) {
                Ok(mut ars) => {
                    while out.len() < n {
                        match ars.sample(rng) {
                            Ok(a) => out.push(follow(a, rng)?),
                            Err(e) => {
                                self.warnings.push(format!(
                                    "{label}: rejection sampler stopped after {} draws ({e}); \
                                     using grid-inversion sampling",
                                    out.len()
                                ));
                                self.kind = AlphaSampler::GridInversion;
                                break;
                            }
                        }
                    }
                }
                Err(e) => {
                    self.warnings
                        .push(format!("{label}: {e}; using grid-inversion sampling"));
                    self.kind = AlphaSampler::GridInversion;
                }
            }
        }
        if out.len() < n {
            let grid: GridSampler = self.post.grid_sampler(self.mode)?;
            while out.len() < n {
                let a = grid.sample(rng);
                out.push(follow(a, rng)?);
            }
        }
        Ok((out, self.kind, self.warnings))
    }
}

fn check_draw_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of draws must be at least 1".into()));
    }
    Ok(())
}

/// `n` draws of `(alpha, lambda1, lambda2)` from the common-shape posterior.
pub fn sample_posterior(dataset: &Dataset, prior: &PriorSpec, n: usize, seed: u64) -> Result<PosteriorDraws> {
    check_draw_count(n)?;
    prior.validate()?;
    dataset.require_both_causes()?;
    let post = common_alpha_posterior(dataset, prior);
    let mut rng = stream(seed, "posterior", 0);
    let (draws, sampler, warnings) = ShapeDraws::new(&post, "alpha")?.run(n, &mut rng, "alpha", |alpha, rng| {
        let w2 = post.exposure.sums(alpha).w2;
        let (lambda1, lambda2) = DgSampler::new(&update(&prior.dg, w2, dataset))?.sample(rng);
        Ok(PosteriorDraw {
            alpha,
            lambda1,
            lambda2,
        })
    })?;
    Ok(PosteriorDraws {
        draws,
        seed,
        n,
        sampler,
        warnings,
    })
}

type CauseDraws = (Vec<(f64, f64)>, AlphaSampler, Vec<String>);

fn sample_cause(
    dataset: &Dataset,
    prior: &SeparatePriorSpec,
    cause: Cause,
    n: usize,
    seed: u64,
) -> Result<CauseDraws> {
    let j = cause.index() as usize - 1;
    let post = cause_alpha_posterior(dataset, prior, cause);
    let label = format!("alpha{}", cause.index());
    let mut rng = stream(seed, "posterior-separate", j as u64);
    ShapeDraws::new(&post, &label)?.run(n, &mut rng, &label, |alpha, rng| {
        let shape = post.power;
        let rate = post.shift + post.exposure.sums(alpha).w2;
        let g = Gamma::new(shape, 1.0 / rate).map_err(|e| Error::Sampler(e.to_string()))?;
        Ok((alpha, sample_positive(&g, rng)))
    })
}

fn sample_positive<R: Rng + ?Sized>(g: &Gamma<f64>, rng: &mut R) -> f64 {
    g.sample(rng).max(f64::MIN_POSITIVE)
}

/// `n` draws of `(alpha1, lambda1, alpha2, lambda2)` from the separate-shape
/// posterior; the two causes use independent streams and run in parallel.
pub fn sample_posterior_separate(
    dataset: &Dataset,
    prior: &SeparatePriorSpec,
    n: usize,
    seed: u64,
) -> Result<SeparatePosteriorDraws> {
    check_draw_count(n)?;
    prior.validate()?;
    dataset.require_both_causes()?;
    let (c1, c2) = rayon::join(
        || sample_cause(dataset, prior, Cause::One, n, seed),
        || sample_cause(dataset, prior, Cause::Two, n, seed),
    );
    let (d1, s1, mut warnings) = c1?;
    let (d2, s2, w2) = c2?;
    warnings.extend(w2);
    let draws = d1
        .into_iter()
        .zip(d2)
        .map(|((alpha1, lambda1), (alpha2, lambda2))| SeparateDraw {
            alpha1,
            lambda1,
            alpha2,
            lambda2,
        })
        .collect();
    Ok(SeparatePosteriorDraws {
        draws,
        seed,
        n,
        samplers: [s1, s2],
        warnings,
    })
}

/// Monte Carlo posterior mean of `g` and its variance with divisor `N`.
pub fn bayes_estimates_mc<T>(draws: &[T], g: impl Fn(&T) -> f64) -> Result<(f64, f64)> {
    let n = draws.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let values: Vec<f64> = draws.iter().map(g).collect();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    Ok((mean, var))
}

/// Symmetric and HPD credible intervals for each named column at each level.
pub fn credible_interval_table(
    names: &[&str],
    columns: &[Vec<f64>],
    levels: &[f64],
) -> Result<Vec<IntervalRow>> {
    let mut rows = Vec::new();
    for (name, col) in names.iter().zip(columns) {
        for &level in levels {
            check_level(level)?;
            rows.push(IntervalRow::new(name, &symmetric_interval(col, 1.0 - level)?));
            rows.push(IntervalRow::new(name, &hpd_interval(col, 1.0 - level)?));
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{transformer_dataset, Observation, Outcome};
    use approx::assert_relative_eq;

    #[test]
    fn empty_data_returns_prior() {
        let prior = DgParams::new(2.0, 3.0, 1.5, 0.5).unwrap();
        assert_eq!(posterior_dg(&Dataset::empty(), 1.7, &prior).unwrap(), prior);
        assert_eq!(
            bayes_known_alpha(&Dataset::empty(), 1.7, &prior).unwrap(),
            dg_moments(&prior)
        );
    }

    #[test]
    fn transformer_posterior_parameters() {
        let d = transformer_dataset(100.0).unwrap();
        let post = posterior_dg(&d, 2.795, &DgParams::default()).unwrap();
        assert_relative_eq!(post.a0, 47.0001, epsilon = 1e-12);
        assert_relative_eq!(post.a1, 14.0001, epsilon = 1e-12);
        assert_relative_eq!(post.a2, 33.0001, epsilon = 1e-12);
        assert_relative_eq!(post.b, 1e-4 + w2_at(&d, 2.795), epsilon = 1e-12);
    }

    #[test]
    fn ratio_identity_and_mle_limit() {
        let d = transformer_dataset(100.0).unwrap();
        let m = bayes_known_alpha(&d, 2.795, &DgParams::default()).unwrap();
        assert_relative_eq!(m.mean1 / m.mean2, 14.0001 / 33.0001, max_relative = 1e-14);
        let w2 = w2_at(&d, 2.795);
        assert!((m.mean1 / (14.0 / w2) - 1.0).abs() < 1e-3);
        assert!((m.mean2 / (33.0 / w2) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn trapezoid_product_coverage() {
        let d = transformer_dataset(100.0).unwrap();
        let t = credible_trapezoid(&d, 2.795, &DgParams::default(), 0.1).unwrap();
        assert_relative_eq!((1.0 - t.gamma1) * (1.0 - t.gamma2), 0.9, epsilon = 1e-14);
        assert!(0.0 < t.a && t.a < t.b && 0.0 < t.c && t.c < t.d && t.d < 1.0);
        assert_relative_eq!(t.area, (t.b * t.b - t.a * t.a) * (t.d - t.c) / 2.0);
    }

    #[test]
    fn mc_hand_example() {
        let (m, v) = bayes_estimates_mc(&[1.0, 2.0, 3.0], |x| *x).unwrap();
        assert_relative_eq!(m, 2.0);
        assert_relative_eq!(v, 2.0 / 3.0);
        let (m, v) = bayes_estimates_mc(&[1.0, 2.0, 3.0], |_| 5.0).unwrap();
        assert_eq!((m, v), (5.0, 0.0));
        assert!(bayes_estimates_mc(&[1.0], |x| *x).is_err());
    }

    #[test]
    fn posterior_requires_both_causes() {
        let d = Dataset::new(vec![Observation::untruncated(1.0, 2.0, Outcome::Cause1).unwrap()]).unwrap();
        assert!(sample_posterior(&d, &PriorSpec::default(), 10, 1).is_err());
    }

    #[test]
    fn transformer_certificate() {
        let d = transformer_dataset(100.0).unwrap();
        assert!(log_concavity_certified(&d, &PriorSpec::default()));
    }

    #[test]
    fn posterior_draws_are_deterministic() {
        let d = transformer_dataset(100.0).unwrap();
        let a = sample_posterior(&d, &PriorSpec::default(), 500, 9).unwrap();
        let b = sample_posterior(&d, &PriorSpec::default(), 500, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sampler, AlphaSampler::AdaptiveRejection);
        assert!(a.draws.iter().all(|x| x.alpha > 0.0 && x.lambda1 > 0.0 && x.lambda2 > 0.0));
    }
}
