//! The exposure sum `w2(alpha) = sum t^alpha - sum_{truncated} tau_L^alpha`
//! and its alpha-derivatives.
//!
//! The profile and posterior code works with the scale-free ratios
//! `w2'/w2`, `w2''/w2` and `ln w2`, computed after factoring out the largest
//! term so that large shapes on unscaled data do not overflow.

use crate::data::{Cause, Dataset};
use crate::error::{check_positive, Result};

/// `w2` and its first two derivatives in alpha.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WSums {
    pub w2: f64,
    pub w2_prime: f64,
    pub w2_double_prime: f64,
}

impl WSums {
    /// Cauchy-Schwarz discriminant `w2 w2'' - w2'^2`.
    pub fn d(&self) -> f64 {
        self.w2 * self.w2_double_prime - self.w2_prime * self.w2_prime
    }

    /// Same discriminant with `w2` shifted by a prior rate `b0`.
    pub fn d_tilde(&self, b0: f64) -> f64 {
        (self.w2 + b0) * self.w2_double_prime - self.w2_prime * self.w2_prime
    }
}

/// Returns `(w1, w2, w2', w2'')` where `w1` is the sum of log failure times.
pub fn w_functions(dataset: &Dataset, alpha: f64) -> Result<(f64, WSums)> {
    check_positive("alpha", alpha)?;
    let kernel = Exposure::new(dataset);
    Ok((failure_log_sum(dataset, None), kernel.sums(alpha)))
}

/// Sum of `ln t` over failures from `cause`, or over all failures if `None`.
pub fn failure_log_sum(dataset: &Dataset, cause: Option<Cause>) -> f64 {
    let obs = dataset.observations();
    match cause {
        None => obs
            .iter()
            .filter(|o| o.outcome.is_failure())
            .map(|o| o.t.ln())
            .sum(),
        Some(c) => dataset
            .cause_indices(c)
            .iter()
            .map(|&i| obs[i].t.ln())
            .sum(),
    }
}

/// `ln w2` together with `w2'/w2` and `w2''/w2`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Scaled {
    pub log_w2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Precomputed log-times for repeated evaluation of `w2` at many shapes.
#[derive(Clone, Debug)]
pub(crate) struct Exposure {
    log_t: Vec<f64>,
    // (ln t, ln tau_L) for truncated units, kept paired so each unit's
    // contribution t^a - tau^a stays positive.
    log_trunc: Vec<(f64, f64)>,
    max_log: f64,
}

impl Exposure {
    pub fn new(dataset: &Dataset) -> Self {
        let mut log_t = Vec::new();
        let mut log_trunc = Vec::new();
        for o in dataset.observations() {
            if o.truncated {
                log_trunc.push((o.t.ln(), o.tau_l.ln()));
            } else {
                log_t.push(o.t.ln());
            }
        }
        let max_log = log_t
            .iter()
            .copied()
            .chain(log_trunc.iter().map(|p| p.0))
            .fold(f64::NEG_INFINITY, f64::max);
        Exposure {
            log_t,
            log_trunc,
            max_log,
        }
    }

    fn raw(&self, alpha: f64, shift: f64) -> (f64, f64, f64) {
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        for &lt in &self.log_t {
            let e = (alpha * lt - shift).exp();
            s0 += e;
            s1 += e * lt;
            s2 += e * lt * lt;
        }
        for &(lt, ll) in &self.log_trunc {
            let et = (alpha * lt - shift).exp();
            let el = (alpha * ll - shift).exp();
            s0 += et - el;
            s1 += et * lt - el * ll;
            s2 += et * lt * lt - el * ll * ll;
        }
        (s0, s1, s2)
    }

    pub fn sums(&self, alpha: f64) -> WSums {
        let (w2, w2_prime, w2_double_prime) = self.raw(alpha, 0.0);
        WSums {
            w2,
            w2_prime,
            w2_double_prime,
        }
    }

    pub fn scaled(&self, alpha: f64) -> Scaled {
        if !self.max_log.is_finite() {
            return Scaled {
                log_w2: f64::NEG_INFINITY,
                r1: 0.0,
                r2: 0.0,
            };
        }
        let shift = alpha * self.max_log;
        let (s0, s1, s2) = self.raw(alpha, shift);
        Scaled {
            log_w2: s0.ln() + shift,
            r1: s1 / s0,
            r2: s2 / s0,
        }
    }
}
