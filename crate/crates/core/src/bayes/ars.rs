//! Adaptive rejection sampling for log-concave densities on `(0, inf)`.
//!
//! The envelope is the piecewise-exponential hull of tangents to `ln f` at a
//! set of abscissae; the squeeze is the chord hull between them. Every
//! rejected proposal adds its abscissa, so the envelope tightens as sampling
//! proceeds. A proposal lying above the tangent hull means the density is not
//! log-concave, reported as an error so the caller can switch samplers.

use rand::Rng;

use crate::error::{Error, Result};

const MAX_POINTS: usize = 64;

#[derive(Clone, Copy, Debug)]
struct Knot {
    x: f64,
    h: f64,
    dh: f64,
}

pub struct AdaptiveRejection<F> {
    log_density: F,
    knots: Vec<Knot>,
    // z[j] is the right end of tangent piece j; the first piece starts at 0.
    z: Vec<f64>,
    // cumulative (unnormalized) envelope mass up to the end of piece j
    cum: Vec<f64>,
    shift: f64,
    pub evaluations: usize,
}

impl<F> AdaptiveRejection<F>
where
    F: Fn(f64) -> (f64, f64),
{
    /// `log_density` returns `(ln f(x), d/dx ln f(x))` up to a constant.
    /// Needs a point with positive slope and one with negative slope.
    pub fn new(log_density: F, start: &[f64]) -> Result<Self> {
        let mut knots: Vec<Knot> = start
            .iter()
            .filter(|&&x| x > 0.0 && x.is_finite())
            .map(|&x| {
                let (h, dh) = log_density(x);
                Knot { x, h, dh }
            })
            .collect();
        knots.sort_by(|a, b| a.x.total_cmp(&b.x));
        knots.dedup_by(|a, b| a.x == b.x);
        if knots.iter().any(|k| !k.h.is_finite() || !k.dh.is_finite()) {
            return Err(Error::Sampler("log density not finite at a starting point".into()));
        }
        if knots.last().map_or(true, |k| k.dh >= 0.0) {
            return Err(Error::Sampler("rightmost starting point must have negative slope".into()));
        }
        let evaluations = knots.len();
        let mut s = AdaptiveRejection {
            log_density,
            knots,
            z: Vec::new(),
            cum: Vec::new(),
            shift: 0.0,
            evaluations,
        };
        s.rebuild()?;
        Ok(s)
    }

    fn rebuild(&mut self) -> Result<()> {
        let k = &self.knots;
        for w in k.windows(2) {
            if w[1].dh > w[0].dh + 1e-9 * (w[0].dh.abs() + w[1].dh.abs() + 1.0) {
                return Err(Error::Sampler("slopes increase: density is not log-concave".into()));
            }
        }
        self.shift = k.iter().map(|k| k.h).fold(f64::NEG_INFINITY, f64::max);
        self.z.clear();
        for w in k.windows(2) {
            let (a, b) = (w[0], w[1]);
            let z = if (a.dh - b.dh).abs() < 1e-12 * (a.dh.abs() + 1.0) {
                0.5 * (a.x + b.x)
            } else {
                (b.h - a.h - b.x * b.dh + a.x * a.dh) / (a.dh - b.dh)
            };
            // tangents of a concave function cross between their abscissae
            let slack = 1e-8 * (a.x.abs() + b.x.abs());
            if z < a.x - slack || z > b.x + slack {
                return Err(Error::Sampler("tangents cross outside their abscissae: not log-concave".into()));
            }
            self.z.push(z.clamp(a.x, b.x));
        }
        self.z.push(f64::INFINITY);
        self.cum.clear();
        let mut total = 0.0;
        let mut left = 0.0;
        for (j, knot) in self.knots.iter().enumerate() {
            let right = self.z[j];
            total += self.piece_mass(knot, left, right);
            self.cum.push(total);
            left = right;
        }
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::Sampler("envelope has no finite mass".into()));
        }
        Ok(())
    }

    fn upper(&self, knot: &Knot, x: f64) -> f64 {
        knot.h - self.shift + (x - knot.x) * knot.dh
    }

    fn piece_mass(&self, knot: &Knot, a: f64, b: f64) -> f64 {
        let ua = self.upper(knot, a);
        let s = knot.dh;
        if b.is_infinite() {
            return (ua).exp() / -s;
        }
        let width = b - a;
        if (s * width).abs() < 1e-10 {
            return ua.exp() * width;
        }
        ua.exp() * (s * width).exp_m1() / s
    }

    fn piece_start(&self, j: usize) -> f64 {
        if j == 0 {
            0.0
        } else {
            self.z[j - 1]
        }
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, usize) {
        let total = *self.cum.last().unwrap();
        let target = rng.random::<f64>() * total;
        let j = self.cum.partition_point(|&c| c < target).min(self.knots.len() - 1);
        let (a, b) = (self.piece_start(j), self.z[j]);
        let s = self.knots[j].dh;
        let u: f64 = rng.random();
        let x = if b.is_infinite() {
            a + (1.0 - u).ln() / s
        } else if (s * (b - a)).abs() < 1e-10 {
            a + u * (b - a)
        } else if s > 0.0 {
            b + (u + (1.0 - u) * (-s * (b - a)).exp()).ln() / s
        } else {
            a + (u * (s * (b - a)).exp_m1()).ln_1p() / s
        };
        (x.clamp(a, b).max(f64::MIN_POSITIVE), j)
    }

    fn lower(&self, x: f64) -> f64 {
        let i = self.knots.partition_point(|k| k.x < x);
        if i == 0 || i == self.knots.len() {
            return f64::NEG_INFINITY;
        }
        let (a, b) = (self.knots[i - 1], self.knots[i]);
        ((b.x - x) * a.h + (x - a.x) * b.h) / (b.x - a.x) - self.shift
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<f64> {
        for _ in 0..10_000 {
            let (x, j) = self.propose(rng);
            let u = self.upper(&self.knots[j], x);
            let w: f64 = rng.random();
            let ln_w = w.ln();
            if ln_w <= self.lower(x) - u {
                return Ok(x);
            }
            let (h, dh) = (self.log_density)(x);
            self.evaluations += 1;
            let h_shifted = h - self.shift;
            if h_shifted > u + 1e-8 * (1.0 + u.abs()) {
                return Err(Error::Sampler(format!(
                    "density exceeds tangent envelope at {x}: not log-concave"
                )));
            }
            let accept = ln_w <= h_shifted - u;
            if self.knots.len() < MAX_POINTS && h.is_finite() && dh.is_finite() {
                let pos = self.knots.partition_point(|k| k.x < x);
                if self.knots.get(pos).map_or(true, |k| k.x != x) {
                    self.knots.insert(pos, Knot { x, h, dh });
                    self.rebuild()?;
                }
            }
            if accept {
                return Ok(x);
            }
        }
        Err(Error::Sampler("rejection sampler made no progress".into()))
    }
}
