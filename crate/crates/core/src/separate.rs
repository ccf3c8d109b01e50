//! Separate-shape model: cause j has its own Weibull(alpha_j, lambda_j), and a
//! likelihood-ratio test of `alpha_1 = alpha_2`.
//!
//! The log-likelihood splits into one block per cause, each of the same form
//! as the common-shape profile with `(m, w1)` replaced by `(m_j, w_j*)`, where
//! `w_j*` sums `ln t` over failures from cause j.

use serde::{Deserialize, Serialize};

use crate::data::{Cause, Dataset};
use crate::error::{check_positive, Result};
use crate::mle::{scale_hat, solve_alpha, CommonShapeFit, ProfileProblem, ShapeMethod, SolverOptions};
use crate::weights::{failure_log_sum, Exposure};

/// Upper 5% point of the chi-square distribution with one degree of freedom.
pub const CHI2_1_95: f64 = 3.841;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparateShapeFit {
    pub alpha1_hat: f64,
    pub lambda1_hat: f64,
    pub alpha2_hat: f64,
    pub lambda2_hat: f64,
    pub loglik: f64,
    pub converged1: bool,
    pub converged2: bool,
    pub unimodality_certified: bool,
    pub method1: ShapeMethod,
    pub method2: ShapeMethod,
}

impl SeparateShapeFit {
    pub fn params(&self) -> [f64; 4] {
        [self.alpha1_hat, self.lambda1_hat, self.alpha2_hat, self.lambda2_hat]
    }

    pub fn converged(&self) -> bool {
        self.converged1 && self.converged2
    }
}

fn block(m: f64, log_sum: f64, w2: f64, alpha: f64, lambda: f64) -> f64 {
    let mut v = (alpha - 1.0) * log_sum - lambda * w2;
    if m > 0.0 {
        v += m * (alpha.ln() + lambda.ln());
    }
    v
}

pub fn log_likelihood_separate(
    dataset: &Dataset,
    alpha1: f64,
    lambda1: f64,
    alpha2: f64,
    lambda2: f64,
) -> Result<f64> {
    check_positive("alpha1", alpha1)?;
    check_positive("lambda1", lambda1)?;
    check_positive("alpha2", alpha2)?;
    check_positive("lambda2", lambda2)?;
    let exposure = Exposure::new(dataset);
    let b1 = block(
        dataset.m1() as f64,
        failure_log_sum(dataset, Some(Cause::One)),
        exposure.sums(alpha1).w2,
        alpha1,
        lambda1,
    );
    let b2 = block(
        dataset.m2() as f64,
        failure_log_sum(dataset, Some(Cause::Two)),
        exposure.sums(alpha2).w2,
        alpha2,
        lambda2,
    );
    Ok(b1 + b2)
}

pub(crate) fn cause_problem(dataset: &Dataset, cause: Cause) -> ProfileProblem {
    ProfileProblem {
        exposure: Exposure::new(dataset),
        count: dataset.failures(cause) as f64,
        log_sum: failure_log_sum(dataset, Some(cause)),
    }
}

/// Profile of one cause's shape: `m_j ln a - m_j ln w2(a) + a w_j*`.
pub fn cause_profile_loglik(dataset: &Dataset, cause: Cause, alpha: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    dataset.require_both_causes()?;
    Ok(cause_problem(dataset, cause).value(alpha))
}

/// Scale estimate and block log-likelihood at a cause's optimal shape, where
/// `lambda w2 = m`.
fn profile_block(problem: &ProfileProblem, alpha: f64) -> Result<(f64, f64)> {
    let log_w2 = problem.exposure.scaled(alpha).log_w2;
    let m = problem.count;
    let lambda = scale_hat(m, log_w2, alpha)?;
    let ll = m * alpha.ln() + (alpha - 1.0) * problem.log_sum - m + m * (m.ln() - log_w2);
    Ok((lambda, ll))
}

pub fn fit_separate(dataset: &Dataset, opts: &SolverOptions) -> Result<SeparateShapeFit> {
    fit_separate_from(dataset, opts, [opts.init, opts.init])
}

/// As [`fit_separate`] but with a separate starting shape per cause.
pub fn fit_separate_from(
    dataset: &Dataset,
    opts: &SolverOptions,
    inits: [f64; 2],
) -> Result<SeparateShapeFit> {
    dataset.require_both_causes()?;
    let p1 = cause_problem(dataset, Cause::One);
    let p2 = cause_problem(dataset, Cause::Two);
    let (o1, o2) = (opts.with_init(inits[0]), opts.with_init(inits[1]));
    let (s1, s2) = rayon::join(|| p1.maximize(&o1), || p2.maximize(&o2));
    let (s1, s2) = (s1?, s2?);
    let (lambda1_hat, ll1) = profile_block(&p1, s1.alpha)?;
    let (lambda2_hat, ll2) = profile_block(&p2, s2.alpha)?;
    let loglik = ll1 + ll2;
    Ok(SeparateShapeFit {
        alpha1_hat: s1.alpha,
        lambda1_hat,
        alpha2_hat: s2.alpha,
        lambda2_hat,
        loglik,
        converged1: s1.converged,
        converged2: s2.converged,
        unimodality_certified: s1.certified && s2.certified,
        method1: s1.method,
        method2: s2.method,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub statistic: f64,
    pub critical_value_95: f64,
    pub reject: bool,
    pub common: CommonShapeFit,
    pub separate: SeparateShapeFit,
}

/// Likelihood-ratio test of equal shapes against separate shapes.
pub fn lrt_equal_shapes(dataset: &Dataset, opts: &SolverOptions) -> Result<LrtResult> {
    let common = solve_alpha(dataset, opts)?;
    let separate = fit_separate(dataset, opts)?;
    let statistic = -2.0 * (common.loglik - separate.loglik);
    Ok(LrtResult {
        statistic,
        critical_value_95: CHI2_1_95,
        reject: statistic > CHI2_1_95,
        common,
        separate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{transformer_dataset, Observation, Outcome};
    use crate::mle::log_likelihood;
    use approx::assert_relative_eq;

    #[test]
    fn nests_common_model() {
        let d = transformer_dataset(100.0).unwrap();
        for &(a, l1, l2) in &[(1.0, 2.0, 3.0), (2.795, 6.759, 15.932), (0.4, 0.1, 9.0)] {
            assert_relative_eq!(
                log_likelihood_separate(&d, a, l1, a, l2).unwrap(),
                log_likelihood(&d, a, l1, l2).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn empty_cause_block() {
        let d = Dataset::new(vec![Observation::untruncated(1.0, 2.0, Outcome::Cause1).unwrap()]).unwrap();
        // cause-1 block vanishes at t = 1, alpha = 1, lambda = 1 except -lambda w2
        let ll = log_likelihood_separate(&d, 1.0, 1.0, 3.0, 0.5).unwrap();
        assert_relative_eq!(ll, -1.0 - 0.5, epsilon = 1e-14);
    }

    #[test]
    fn transformer_separate_fit() {
        let d = transformer_dataset(100.0).unwrap();
        let fit = fit_separate(&d, &SolverOptions::default()).unwrap();
        assert!((fit.alpha1_hat - 2.817).abs() < 1e-3, "{fit:?}");
        assert!((fit.lambda1_hat - 6.933).abs() < 5e-3);
        assert!((fit.alpha2_hat - 2.786).abs() < 1e-3);
        assert!((fit.lambda2_hat - 15.768).abs() < 5e-3);
        assert!(fit.converged());
        let direct = log_likelihood_separate(
            &d,
            fit.alpha1_hat,
            fit.lambda1_hat,
            fit.alpha2_hat,
            fit.lambda2_hat,
        )
        .unwrap();
        assert_relative_eq!(direct, fit.loglik, max_relative = 1e-12);
    }

    #[test]
    fn transformer_lrt() {
        let d = transformer_dataset(100.0).unwrap();
        let lrt = lrt_equal_shapes(&d, &SolverOptions::default()).unwrap();
        assert!((lrt.statistic - 0.0018).abs() < 5e-4, "{}", lrt.statistic);
        assert!(!lrt.reject);
        assert_eq!(lrt.critical_value_95, 3.841);
    }
}
