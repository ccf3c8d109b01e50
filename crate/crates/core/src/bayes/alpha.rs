//! Marginal posterior of a Weibull shape after the scale has been integrated
//! out. The common model and each cause of the separate model share one form,
//!
//! `ln pi(a) = coef ln a - rate a + a log_sum - power ln(shift + w2(a))`,
//!
//! with `(coef, rate, log_sum, power, shift)` equal to
//! `(c - 1 + m, d, w1, a0 + m, b0)` for the common model and
//! `(a_j - 1 + m_j, b_j, w_j*, c_j + m_j, d_j)` for cause j.

use rand::Rng;

use crate::bayes::ars::AdaptiveRejection;
use crate::error::{Error, Result};
use crate::mle::{log_grid, GRID_MAX, GRID_MIN, GRID_POINTS};
use crate::weights::Exposure;

const GRID_CELLS: usize = 4096;
// log-density drop that bounds the grid-inversion support
const TAIL_DROP: f64 = 40.0;

#[derive(Clone, Debug)]
pub(crate) struct AlphaPosterior {
    pub exposure: Exposure,
    pub coef: f64,
    pub rate: f64,
    pub log_sum: f64,
    pub power: f64,
    pub shift: f64,
}

impl AlphaPosterior {
    /// `ln(shift + w2)` together with `w2'/(shift + w2)` and `w2''/(shift + w2)`.
    fn denominator(&self, alpha: f64) -> (f64, f64, f64) {
        let s = self.exposure.scaled(alpha);
        if !s.log_w2.is_finite() {
            return (self.shift.ln(), 0.0, 0.0);
        }
        let ratio = self.shift * (-s.log_w2).exp();
        let scale = 1.0 / (1.0 + ratio);
        (s.log_w2 + ratio.ln_1p(), s.r1 * scale, s.r2 * scale)
    }

    pub fn log_density(&self, alpha: f64) -> f64 {
        self.value_and_slope(alpha).0
    }

    pub fn value_and_slope(&self, alpha: f64) -> (f64, f64) {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return (f64::NEG_INFINITY, 0.0);
        }
        let (ln_den, q1, _) = self.denominator(alpha);
        let v = self.coef * alpha.ln() - self.rate * alpha + alpha * self.log_sum - self.power * ln_den;
        let dv = self.coef / alpha - self.rate + self.log_sum - self.power * q1;
        (if v.is_nan() { f64::NEG_INFINITY } else { v }, dv)
    }

    /// `d~(a) / (shift + w2)^2`, the sign of `(shift + w2) w2'' - w2'^2`.
    pub fn d_tilde_scaled(&self, alpha: f64) -> f64 {
        let (_, q1, q2) = self.denominator(alpha);
        q2 - q1 * q1
    }

    /// Log-concavity certificate: `d~ >= 0` on the scan grid and a
    /// non-negative coefficient on `ln a`.
    pub fn certified(&self) -> bool {
        self.coef >= 0.0
            && log_grid(GRID_MIN, GRID_MAX, GRID_POINTS).into_iter().all(|a| {
                let v = self.d_tilde_scaled(a);
                !v.is_finite() || v >= -1e-10
            })
    }

    /// Golden-section search on the log scale, bracketed by the best scan
    /// grid point.
    pub fn mode(&self) -> Result<f64> {
        let grid = log_grid(GRID_MIN, GRID_MAX, GRID_POINTS);
        let values: Vec<f64> = grid.iter().map(|&a| self.log_density(a)).collect();
        let (best, &vmax) = values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty grid");
        if !vmax.is_finite() || best == 0 || best == grid.len() - 1 {
            return Err(Error::Convergence {
                message: "posterior mode of the shape is not inside the search range".into(),
                trace: values,
            });
        }
        let (mut lo, mut hi) = (grid[best - 1].ln(), grid[best + 1].ln());
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let f = |u: f64| self.log_density(u.exp());
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..200 {
            if hi - lo < 1e-12 {
                break;
            }
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = f(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = f(x1);
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    /// Rough posterior scale from the curvature at the mode.
    fn spread(&self, mode: f64) -> f64 {
        let e = 1e-4 * mode;
        let curv = (self.value_and_slope(mode + e).1 - self.value_and_slope(mode - e).1) / (2.0 * e);
        if curv < 0.0 && curv.is_finite() {
            (-1.0 / curv).sqrt()
        } else {
            0.25 * mode
        }
    }

    pub fn rejection_sampler(&self, mode: f64) -> Result<AdaptiveRejection<impl Fn(f64) -> (f64, f64) + '_>> {
        let sd = self.spread(mode);
        let left = |k: f64| {
            let x = mode - k * sd;
            if x > 0.0 {
                x
            } else {
                mode / (1.0 + k)
            }
        };
        let mut right = mode + 2.0 * sd;
        let mut steps = 0;
        while self.value_and_slope(right).1 >= 0.0 {
            right = mode + (right - mode) * 2.0;
            steps += 1;
            if steps > 60 {
                return Err(Error::Sampler("no negative slope right of the mode".into()));
            }
        }
        let start = [left(2.0), left(0.5), mode + 0.5 * sd, right];
        AdaptiveRejection::new(move |a| self.value_and_slope(a), &start)
    }

    pub fn grid_sampler(&self, mode: f64) -> Result<GridSampler> {
        let top = self.log_density(mode);
        let sd = self.spread(mode);
        let mut lo = mode;
        for _ in 0..10_000 {
            let next = lo - 0.5 * sd;
            if next <= 0.0 {
                lo = 0.0;
                break;
            }
            lo = next;
            if self.log_density(lo) < top - TAIL_DROP {
                break;
            }
        }
        let mut hi = mode;
        for _ in 0..10_000 {
            hi += 0.5 * sd;
            if self.log_density(hi) < top - TAIL_DROP {
                break;
            }
        }
        GridSampler::new(|a| self.log_density(a) - top, lo, hi)
    }
}

/// Piecewise-constant approximation of a density on `[lo, hi]`, sampled by
/// inverting its CDF.
#[derive(Clone, Debug)]
pub struct GridSampler {
    lo: f64,
    width: f64,
    cdf: Vec<f64>,
}

impl GridSampler {
    pub fn new(log_density: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) {
            return Err(Error::Sampler("empty support for grid sampling".into()));
        }
        let width = (hi - lo) / GRID_CELLS as f64;
        let mut cdf = Vec::with_capacity(GRID_CELLS);
        let mut total = 0.0;
        for i in 0..GRID_CELLS {
            let mid = lo + (i as f64 + 0.5) * width;
            let p = log_density(mid).exp();
            total += if p.is_finite() { p } else { 0.0 };
            cdf.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::Sampler("density vanishes on the grid".into()));
        }
        Ok(GridSampler { lo, width, cdf })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let total = *self.cdf.last().unwrap();
        let target = rng.random::<f64>() * total;
        let i = self.cdf.partition_point(|&c| c < target).min(self.cdf.len() - 1);
        let u: f64 = rng.random();
        (self.lo + (i as f64 + u) * self.width).max(f64::MIN_POSITIVE)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn grid_sampler_gamma() {
        // Gamma(3, 1): mean 3
        let g = GridSampler::new(|x: f64| 2.0 * x.ln() - x, 0.0, 60.0).unwrap();
        let mut rng = stream(3, "grid", 0);
        let n = 100_000;
        let mean = (0..n).map(|_| g.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((mean - 3.0).abs() < 0.03, "{mean}");
    }
}
