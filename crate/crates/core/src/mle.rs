//! Maximum likelihood for the common-shape model.
//!
//! For a fixed shape the scale MLEs are closed form, `lambda_j = m_j / w2(alpha)`,
//! so the fit reduces to maximizing the profile
//! `p(alpha) = m ln alpha - m ln w2(alpha) + alpha w1`. The stationarity
//! condition is iterated as `alpha <- h(alpha) = m w2 / (m w2' - w1 w2)`;
//! when that iteration misbehaves the profile is maximized by golden-section
//! search on a grid-located bracket instead.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{check_positive, Error, Result};
use crate::weights::{failure_log_sum, Exposure};

/// Lower end of the shape scan grid.
pub const GRID_MIN: f64 = 1e-3;
/// Upper end of the shape scan grid.
pub const GRID_MAX: f64 = 1e3;
/// Points in the log-spaced scan grid.
pub const GRID_POINTS: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub init: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            init: 1.0,
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

impl SolverOptions {
    pub fn with_init(self, init: f64) -> Self {
        SolverOptions { init, ..self }
    }

    fn validate(&self) -> Result<()> {
        check_positive("init", self.init)?;
        check_positive("tol", self.tol)?;
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// Which path produced the shape estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShapeMethod {
    FixedPoint,
    GoldenSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommonShapeFit {
    pub alpha_hat: f64,
    pub lambda1_hat: f64,
    pub lambda2_hat: f64,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `d(alpha) >= 0` at every scan grid point.
    pub unimodality_certified: bool,
    pub method: ShapeMethod,
}

impl CommonShapeFit {
    pub fn params(&self) -> [f64; 3] {
        [self.alpha_hat, self.lambda1_hat, self.lambda2_hat]
    }
}

/// Log-spaced shape grid used for bracketing and certificates.
pub fn scan_grid() -> Vec<f64> {
    log_grid(GRID_MIN, GRID_MAX, GRID_POINTS)
}

pub(crate) fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Full log-likelihood of the common-shape model.
pub fn log_likelihood(dataset: &Dataset, alpha: f64, lambda1: f64, lambda2: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    check_positive("lambda1", lambda1)?;
    check_positive("lambda2", lambda2)?;
    let w1 = failure_log_sum(dataset, None);
    let w2 = Exposure::new(dataset).sums(alpha).w2;
    Ok(loglik_from_parts(dataset, w1, w2, alpha, lambda1, lambda2))
}

fn loglik_from_parts(dataset: &Dataset, w1: f64, w2: f64, alpha: f64, l1: f64, l2: f64) -> f64 {
    let (m1, m2) = (dataset.m1() as f64, dataset.m2() as f64);
    let mut ll = (m1 + m2) * alpha.ln() + (alpha - 1.0) * w1 - (l1 + l2) * w2;
    if m1 > 0.0 {
        ll += m1 * l1.ln();
    }
    if m2 > 0.0 {
        ll += m2 * l2.ln();
    }
    ll
}

/// Discriminant `w2 w2'' - w2'^2`; nonnegative everywhere implies a unimodal profile.
pub fn d_alpha(dataset: &Dataset, alpha: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    Ok(Exposure::new(dataset).sums(alpha).d())
}

/// Profile log-likelihood of the shape (additive constant dropped).
pub fn profile_loglik(dataset: &Dataset, alpha: f64) -> Result<f64> {
    check_positive("alpha", alpha)?;
    dataset.require_both_causes()?;
    Ok(ProfileProblem::common(dataset).value(alpha))
}

/// Fits the common-shape model.
pub fn solve_alpha(dataset: &Dataset, opts: &SolverOptions) -> Result<CommonShapeFit> {
    opts.validate()?;
    dataset.require_both_causes()?;
    let problem = ProfileProblem::common(dataset);
    let sol = problem.maximize(opts)?;
    let log_w2 = problem.exposure.scaled(sol.alpha).log_w2;
    let (m1, m2) = (dataset.m1() as f64, dataset.m2() as f64);
    let lambda1_hat = scale_hat(m1, log_w2, sol.alpha)?;
    let lambda2_hat = scale_hat(m2, log_w2, sol.alpha)?;
    // at the optimum (lambda1 + lambda2) w2 = m, so ln w2 is all that is needed
    let m = m1 + m2;
    let loglik = m * sol.alpha.ln() + (sol.alpha - 1.0) * problem.log_sum - m
        + m1 * (m1.ln() - log_w2)
        + m2 * (m2.ln() - log_w2);
    Ok(CommonShapeFit {
        alpha_hat: sol.alpha,
        lambda1_hat,
        lambda2_hat,
        loglik,
        iterations: sol.iterations,
        converged: sol.converged,
        unimodality_certified: sol.certified,
        method: sol.method,
    })
}

/// `count / w2` from `ln w2`, refusing values outside the f64 range.
pub(crate) fn scale_hat(count: f64, log_w2: f64, alpha: f64) -> Result<f64> {
    let lambda = count * (-log_w2).exp();
    if lambda > 0.0 && lambda.is_finite() {
        Ok(lambda)
    } else {
        Err(Error::ScaleUnderflow { alpha, log_w2 })
    }
}

/// One row of the profile/diagnostic export.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProfilePoint {
    pub alpha: f64,
    pub p_alpha: f64,
    pub d_alpha: f64,
    pub d_tilde_alpha: f64,
}

/// `p`, `d` and `d~` (with prior rate `b0`) on the scan grid.
pub fn profile_table(dataset: &Dataset, b0: f64) -> Result<Vec<ProfilePoint>> {
    dataset.require_both_causes()?;
    let problem = ProfileProblem::common(dataset);
    Ok(scan_grid()
        .into_iter()
        .map(|alpha| {
            let s = problem.exposure.sums(alpha);
            ProfilePoint {
                alpha,
                p_alpha: problem.value(alpha),
                d_alpha: s.d(),
                d_tilde_alpha: s.d_tilde(b0),
            }
        })
        .collect())
}

/// `true` when `d(alpha) >= 0` (to rounding) on the whole scan grid.
pub(crate) fn certify_unimodal(exposure: &Exposure) -> bool {
    scan_grid().into_iter().all(|alpha| {
        let s = exposure.scaled(alpha);
        // d / w2^2 = r2 - r1^2
        let v = s.r2 - s.r1 * s.r1;
        !v.is_finite() || v >= -1e-10 * s.r2.abs().max(s.r1 * s.r1)
    })
}

#[derive(Clone, Debug)]
pub(crate) struct ShapeSolution {
    pub alpha: f64,
    pub iterations: usize,
    pub converged: bool,
    pub certified: bool,
    pub method: ShapeMethod,
}

/// `count ln a - count ln w2(a) + a log_sum` with its maximizer. The common
/// model uses `(m, w1)`; each cause of the separate model uses `(m_j, w_j*)`.
pub(crate) struct ProfileProblem {
    pub exposure: Exposure,
    pub count: f64,
    pub log_sum: f64,
}

impl ProfileProblem {
    pub fn common(dataset: &Dataset) -> Self {
        ProfileProblem {
            exposure: Exposure::new(dataset),
            count: dataset.m() as f64,
            log_sum: failure_log_sum(dataset, None),
        }
    }

    pub fn value(&self, alpha: f64) -> f64 {
        let s = self.exposure.scaled(alpha);
        let v = self.count * (alpha.ln() - s.log_w2) + alpha * self.log_sum;
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    pub fn derivative(&self, alpha: f64) -> f64 {
        let s = self.exposure.scaled(alpha);
        self.count / alpha - self.count * s.r1 + self.log_sum
    }

    fn second_derivative(&self, alpha: f64) -> f64 {
        let s = self.exposure.scaled(alpha);
        -self.count * (1.0 / (alpha * alpha) + s.r2 - s.r1 * s.r1)
    }

    /// The fixed-point map `h`.
    pub fn h(&self, alpha: f64) -> f64 {
        let s = self.exposure.scaled(alpha);
        self.count / (self.count * s.r1 - self.log_sum)
    }

    fn fixed_point(&self, opts: &SolverOptions) -> std::result::Result<(f64, usize), Vec<f64>> {
        let mut trace = Vec::with_capacity(opts.max_iter.min(64));
        let mut alpha = opts.init;
        for k in 1..=opts.max_iter {
            let next = self.h(alpha);
            if !(next > 0.0 && next.is_finite()) {
                trace.push(next);
                return Err(trace);
            }
            if trace.len() < 64 {
                trace.push(next);
            }
            if (next - alpha).abs() <= opts.tol {
                return Ok((next, k));
            }
            alpha = next;
        }
        Err(trace)
    }

    fn golden_section(&self, opts: &SolverOptions) -> Option<(f64, usize)> {
        let grid = scan_grid();
        let values: Vec<f64> = grid.iter().map(|&a| self.value(a)).collect();
        let (best, _) = values
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
        if best == 0 || best == grid.len() - 1 {
            return None;
        }
        let (mut lo, mut hi) = (grid[best - 1], grid[best + 1]);
        let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let (mut f1, mut f2) = (self.value(x1), self.value(x2));
        let mut iterations = 0;
        while hi - lo > opts.tol && iterations < 200 {
            iterations += 1;
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - inv_phi * (hi - lo);
                f1 = self.value(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + inv_phi * (hi - lo);
                f2 = self.value(x2);
            }
        }
        let mut alpha = 0.5 * (lo + hi);
        // Newton polish, kept inside the final bracket widened by one step.
        let (blo, bhi) = (grid[best - 1], grid[best + 1]);
        for _ in 0..20 {
            let g = self.derivative(alpha);
            let h2 = self.second_derivative(alpha);
            if !(h2 < 0.0) || !g.is_finite() {
                break;
            }
            let next = alpha - g / h2;
            if !(next > blo && next < bhi) {
                break;
            }
            let done = (next - alpha).abs() <= 0.1 * opts.tol;
            alpha = next;
            iterations += 1;
            if done {
                break;
            }
        }
        Some((alpha, iterations))
    }

    pub fn maximize(&self, opts: &SolverOptions) -> Result<ShapeSolution> {
        let certified = certify_unimodal(&self.exposure);
        let fixed = self.fixed_point(opts);
        let fixed_ok = match &fixed {
            Ok((alpha, _)) => self.second_derivative(*alpha) < 0.0,
            Err(_) => false,
        };
        if certified && fixed_ok {
            let (alpha, iterations) = fixed.unwrap();
            return Ok(self.solution(alpha, iterations, true, ShapeMethod::FixedPoint, opts));
        }
        let golden = self.golden_section(opts);
        let chosen = match (fixed, golden) {
            (Ok((fa, fi)), Some((ga, gi))) if fixed_ok => {
                if self.value(fa) >= self.value(ga) {
                    (fa, fi, ShapeMethod::FixedPoint)
                } else {
                    (ga, gi, ShapeMethod::GoldenSection)
                }
            }
            (_, Some((ga, gi))) => (ga, gi, ShapeMethod::GoldenSection),
            (Ok((fa, fi)), None) if fixed_ok => (fa, fi, ShapeMethod::FixedPoint),
            (fixed, None) => {
                let trace = match fixed {
                    Ok((a, _)) => vec![a],
                    Err(t) => t,
                };
                return Err(Error::Convergence {
                    message: "fixed-point iteration failed and the profile maximum is not interior to the scan grid"
                        .into(),
                    trace,
                });
            }
        };
        Ok(self.solution(chosen.0, chosen.1, certified, chosen.2, opts))
    }

    fn solution(
        &self,
        alpha: f64,
        iterations: usize,
        certified: bool,
        method: ShapeMethod,
        opts: &SolverOptions,
    ) -> ShapeSolution {
        let residual = (alpha - self.h(alpha)).abs();
        ShapeSolution {
            alpha,
            iterations,
            converged: residual <= opts.tol.max(1e-12 * alpha),
            certified,
            method,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{transformer_dataset, Observation, Outcome};
    use approx::assert_relative_eq;

    #[test]
    fn exponential_unit_loglik() {
        let d = Dataset::new(vec![Observation::untruncated(1.0, 2.0, Outcome::Cause1).unwrap()]).unwrap();
        assert_relative_eq!(log_likelihood(&d, 1.0, 1.0, 1.0).unwrap(), -2.0, epsilon = 1e-14);
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        let d = transformer_dataset(100.0).unwrap();
        assert!(matches!(log_likelihood(&d, 0.0, 1.0, 1.0), Err(Error::Domain { .. })));
        assert!(matches!(log_likelihood(&d, 1.0, -1.0, 1.0), Err(Error::Domain { .. })));
        assert!(d_alpha(&d, -2.0).is_err());
    }

    #[test]
    fn profile_hand_value() {
        let d = Dataset::new(vec![
            Observation::untruncated(1.0, 2.0, Outcome::Cause1).unwrap(),
            Observation::untruncated(1.0, 1.0, Outcome::Censored).unwrap(),
        ])
        .unwrap();
        // single cause present: the profile refuses
        assert!(matches!(profile_loglik(&d, 1.0), Err(Error::EmptyCause { cause: 2 })));
        let p = ProfileProblem::common(&d);
        assert_relative_eq!(p.value(1.0), -(2f64).ln(), epsilon = 1e-14);
    }

    #[test]
    fn transformer_mle() {
        let d = transformer_dataset(100.0).unwrap();
        let fit = solve_alpha(&d, &SolverOptions::default()).unwrap();
        assert!((fit.alpha_hat - 2.795).abs() < 1e-3, "{fit:?}");
        assert!((fit.lambda1_hat - 6.759).abs() < 5e-3);
        assert!((fit.lambda2_hat - 15.932).abs() < 5e-3);
        assert!(fit.converged);
        assert!(fit.unimodality_certified);
        assert_relative_eq!(fit.lambda1_hat / fit.lambda2_hat, 14.0 / 33.0, max_relative = 1e-12);
    }

    #[test]
    fn degenerate_cause_refused() {
        let d = Dataset::new(vec![
            Observation::untruncated(0.5, 2.0, Outcome::Cause1).unwrap(),
            Observation::untruncated(2.0, 2.0, Outcome::Censored).unwrap(),
        ])
        .unwrap();
        assert!(matches!(
            solve_alpha(&d, &SolverOptions::default()),
            Err(Error::EmptyCause { cause: 2 })
        ));
    }

    #[test]
    fn profile_tends_to_minus_infinity() {
        let d = transformer_dataset(100.0).unwrap();
        let p = ProfileProblem::common(&d);
        let top = p.value(2.795);
        assert!(p.value(1e-6) < top - 100.0);
        assert!(p.value(1e3) < top - 100.0);
    }

    #[test]
    fn stationarity_at_estimate() {
        let d = transformer_dataset(100.0).unwrap();
        let opts = SolverOptions::default();
        let fit = solve_alpha(&d, &opts).unwrap();
        let p = ProfileProblem::common(&d);
        assert!(p.derivative(fit.alpha_hat).abs() <= 10.0 * opts.tol);
    }

    #[test]
    fn bad_init_falls_back() {
        let d = transformer_dataset(100.0).unwrap();
        let opts = SolverOptions {
            init: 1e4,
            tol: 1e-10,
            max_iter: 3,
        };
        let fit = solve_alpha(&d, &opts).unwrap();
        assert_eq!(fit.method, ShapeMethod::GoldenSection);
        assert!((fit.alpha_hat - 2.7954).abs() < 1e-3);
    }
}
