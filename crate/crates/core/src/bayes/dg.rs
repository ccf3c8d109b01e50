//! Dirichlet-Gamma distribution on `(lambda1, lambda2)`: the total
//! `lambda1 + lambda2 ~ Gamma(a0, rate b)` and the share
//! `lambda1 / (lambda1 + lambda2) ~ Beta(a1, a2)`, independently.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{check_positive, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgParams {
    /// Gamma rate of the total.
    pub b: f64,
    /// Gamma shape of the total.
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl DgParams {
    pub fn new(b: f64, a0: f64, a1: f64, a2: f64) -> Result<Self> {
        let p = DgParams { b, a0, a1, a2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("b", self.b)?;
        check_positive("a0", self.a0)?;
        check_positive("a1", self.a1)?;
        check_positive("a2", self.a2)
    }
}

impl Default for DgParams {
    fn default() -> Self {
        DgParams {
            b: 1e-4,
            a0: 1e-4,
            a1: 1e-4,
            a2: 1e-4,
        }
    }
}

/// Means and variances of `lambda1`, `lambda2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DgMoments {
    pub mean1: f64,
    pub mean2: f64,
    pub var1: f64,
    pub var2: f64,
}

pub fn dg_moments(p: &DgParams) -> DgMoments {
    let s = p.a1 + p.a2;
    let mean = |ai: f64| p.a0 * ai / (p.b * s);
    let var = |ai: f64| {
        p.a0 * ai / (p.b * p.b * s) * ((ai + 1.0) * (p.a0 + 1.0) / (s + 1.0) - p.a0 * ai / s)
    };
    DgMoments {
        mean1: mean(p.a1),
        mean2: mean(p.a2),
        var1: var(p.a1),
        var2: var(p.a2),
    }
}

/// Reusable sampler; building the gamma and beta generators once is cheaper
/// than per draw.
#[derive(Clone, Copy, Debug)]
pub struct DgSampler {
    total: Gamma<f64>,
    share: Beta<f64>,
}

impl DgSampler {
    pub fn new(p: &DgParams) -> Result<Self> {
        p.validate()?;
        let total = Gamma::new(p.a0, 1.0 / p.b).map_err(|e| Error::Sampler(e.to_string()))?;
        let share = Beta::new(p.a1, p.a2).map_err(|e| Error::Sampler(e.to_string()))?;
        Ok(DgSampler { total, share })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let lambda = self.total.sample(rng);
        let p = self.share.sample(rng);
        (p * lambda, (1.0 - p) * lambda)
    }
}

pub fn dg_sample<R: Rng + ?Sized>(p: &DgParams, rng: &mut R) -> Result<(f64, f64)> {
    Ok(DgSampler::new(p)?.sample(rng))
}
