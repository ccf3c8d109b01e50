//! Monte Carlo evaluation of the estimators on simulated LTRC competing-risks
//! data.
//!
//! Units installed before the truncation year are kept only if they fail on
//! or after it; a discarded unit is replaced by a fresh draw of both its
//! installation year and its lifetimes. Every unit is censored at the
//! censoring year. Times are measured in years from installation.

use std::fmt::Write as _;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bayes::{hpd_interval, sample_posterior, symmetric_interval, PriorSpec, DEFAULT_DRAWS};
use crate::bootstrap::{
    bc_interval, bootstrap_distribution, percentile_interval, BootstrapModel, ConfidenceInterval,
    IntervalMethod, LatentParams,
};
use crate::data::{Dataset, Observation, Outcome};
use crate::error::{Error, Result};
use crate::mle::{solve_alpha, SolverOptions};
use crate::rng::{child_seed, stream};
use crate::separate::lrt_equal_shapes;

/// Cap on redraws of a single truncated unit.
pub const MAX_REDRAWS: usize = 1_000_000;
pub const DEFAULT_REPLICATIONS: usize = 200;
pub const FULL_REPLICATIONS: usize = 1000;
pub const DEFAULT_BOOTSTRAP_B: usize = 1000;

/// Installation years with their probabilities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearPool {
    pub years: Vec<(i32, f64)>,
}

impl YearPool {
    /// Every year in `first..=last` with equal probability.
    pub fn uniform(first: i32, last: i32) -> Self {
        let k = (last - first + 1) as f64;
        YearPool {
            years: (first..=last).map(|y| (y, 1.0 / k)).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let total: f64 = self.years.iter().map(|y| y.1).sum();
        if self.years.is_empty() || self.years.iter().any(|y| !(y.1 >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "year pool probabilities must be non-negative and sum to 1, got {total}"
            )));
        }
        Ok(())
    }

    fn sampler(&self) -> Result<WeightedIndex<f64>> {
        WeightedIndex::new(self.years.iter().map(|y| y.1)).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

/// Which inference families a study evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Methods {
    pub mle: bool,
    pub bayes: bool,
}

impl Default for Methods {
    fn default() -> Self {
        Methods { mle: true, bayes: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n: usize,
    pub truncation_fraction: f64,
    pub params: LatentParams,
    pub replications: usize,
    pub bootstrap_b: usize,
    pub posterior_n: usize,
    pub seed: u64,
    pub truncation_year: i32,
    pub censor_year: i32,
    pub pre_years: YearPool,
    pub post_years: YearPool,
    pub levels: Vec<f64>,
    pub methods: Methods,
    pub solver: SolverOptions,
    pub prior: PriorSpec,
}

impl SimConfig {
    pub fn new(n: usize, truncation_fraction: f64, params: LatentParams) -> Self {
        SimConfig {
            n,
            truncation_fraction,
            params,
            replications: DEFAULT_REPLICATIONS,
            bootstrap_b: DEFAULT_BOOTSTRAP_B,
            posterior_n: DEFAULT_DRAWS,
            seed: 1,
            truncation_year: 1980,
            censor_year: 1984,
            pre_years: YearPool::uniform(1975, 1979),
            post_years: YearPool::uniform(1980, 1983),
            levels: vec![0.90, 0.95],
            methods: Methods::default(),
            solver: SolverOptions::default(),
            prior: PriorSpec::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.pre_years.validate()?;
        self.post_years.validate()?;
        if self.n == 0 {
            return Err(Error::InvalidArgument("sample size must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.truncation_fraction) {
            return Err(Error::InvalidArgument(format!(
                "truncation fraction must be in [0, 1], got {}",
                self.truncation_fraction
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidArgument("replications must be at least 1".into()));
        }
        if self.censor_year <= self.truncation_year {
            return Err(Error::InvalidArgument("censoring year must follow truncation year".into()));
        }
        if self.pre_years.years.iter().any(|y| y.0 >= self.truncation_year)
            || self.post_years.years.iter().any(|y| y.0 < self.truncation_year || y.0 >= self.censor_year)
        {
            return Err(Error::InvalidArgument("installation years do not match the design".into()));
        }
        Ok(())
    }

    /// Number of truncated units in each dataset.
    pub fn truncated_count(&self) -> usize {
        (self.n as f64 * self.truncation_fraction).round() as usize
    }
}

fn latent_lifetime<R: Rng + ?Sized>(rng: &mut R, p: &LatentParams) -> (f64, Outcome) {
    let draw = |rng: &mut R, alpha: f64, lambda: f64| {
        let u: f64 = 1.0 - rng.random::<f64>();
        (-u.ln() / lambda).powf(1.0 / alpha)
    };
    let t1 = draw(rng, p.alpha1, p.lambda1);
    let t2 = draw(rng, p.alpha2, p.lambda2);
    if t1 <= t2 {
        (t1, Outcome::Cause1)
    } else {
        (t2, Outcome::Cause2)
    }
}

/// One unit installed in a year from the pre-truncation pool (`truncated`)
/// or the post-truncation pool.
pub fn generate_unit<R: Rng + ?Sized>(config: &SimConfig, truncated: bool, rng: &mut R) -> Result<Observation> {
    let pool = if truncated { &config.pre_years } else { &config.post_years };
    let years = pool.sampler()?;
    for _ in 0..MAX_REDRAWS {
        let year = pool.years[years.sample(rng)].0;
        let (life, cause) = latent_lifetime(rng, &config.params);
        let tau_l = (config.truncation_year - year) as f64;
        let tau_r = (config.censor_year - year) as f64;
        if truncated && life <= tau_l {
            continue;
        }
        let (t, outcome) = if life >= tau_r {
            (tau_r, Outcome::Censored)
        } else {
            (life, cause)
        };
        return if truncated {
            Observation::truncated(t, tau_l, tau_r, outcome)
        } else {
            Observation::untruncated(t, tau_r, outcome)
        };
    }
    Err(Error::Convergence {
        message: format!("no truncated unit survived to the truncation year in {MAX_REDRAWS} draws"),
        trace: Vec::new(),
    })
}

/// A dataset with exactly `round(n * fraction)` truncated units, listed first.
pub fn generate_dataset<R: Rng + ?Sized>(config: &SimConfig, rng: &mut R) -> Result<Dataset> {
    config.validate()?;
    let k = config.truncated_count();
    let observations = (0..config.n)
        .map(|i| generate_unit(config, i < k, rng))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(observations)
}

/// Dataset for replication `index` of a study.
pub fn replication_dataset(config: &SimConfig, index: usize) -> Result<Dataset> {
    let mut rng = stream(config.seed, "simulation", index as u64);
    generate_dataset(config, &mut rng)
}

pub const PARAMETER_NAMES: [&str; 3] = ["alpha", "lambda1", "lambda2"];

#[derive(Clone, Debug, Default)]
struct Replication {
    censored_fraction: f64,
    mle: Option<[f64; 3]>,
    bayes: Option<[f64; 3]>,
    // (parameter, level index, interval)
    intervals: Vec<(usize, usize, ConfidenceInterval)>,
    mle_error: Option<String>,
    bayes_error: Option<String>,
}

fn run_mle(config: &SimConfig, data: &Dataset, index: usize, out: &mut Replication) -> Result<()> {
    let fit = solve_alpha(data, &config.solver)?;
    let est = fit.params();
    let seed = child_seed(config.seed, "simulation-bootstrap", index as u64);
    let dist = bootstrap_distribution(data, BootstrapModel::Common(&fit), config.bootstrap_b, seed, &config.solver)?;
    let mut intervals = Vec::new();
    for j in 0..3 {
        let col = dist.column(j);
        for (l, &level) in config.levels.iter().enumerate() {
            intervals.push((j, l, bc_interval(&col, est[j], level)?));
            intervals.push((j, l, percentile_interval(&col, level)?));
        }
    }
    out.mle = Some(est);
    out.intervals.extend(intervals);
    Ok(())
}

fn run_bayes(config: &SimConfig, data: &Dataset, index: usize, out: &mut Replication) -> Result<()> {
    let seed = child_seed(config.seed, "simulation-posterior", index as u64);
    let draws = sample_posterior(data, &config.prior, config.posterior_n, seed)?;
    let cols = [draws.alpha(), draws.lambda1(), draws.lambda2()];
    let mut est = [0.0; 3];
    let mut intervals = Vec::new();
    for (j, col) in cols.iter().enumerate() {
        est[j] = col.iter().sum::<f64>() / col.len() as f64;
        for (l, &level) in config.levels.iter().enumerate() {
            intervals.push((j, l, symmetric_interval(col, 1.0 - level)?));
            intervals.push((j, l, hpd_interval(col, 1.0 - level)?));
        }
    }
    out.bayes = Some(est);
    out.intervals.extend(intervals);
    Ok(())
}

fn replicate(config: &SimConfig, index: usize) -> Result<Replication> {
    let data = replication_dataset(config, index)?;
    let mut out = Replication {
        censored_fraction: data.censored_indices().len() as f64 / data.n() as f64,
        ..Replication::default()
    };
    if config.methods.mle {
        if let Err(e) = run_mle(config, &data, index, &mut out) {
            out.mle = None;
            out.intervals.clear();
            out.mle_error = Some(e.to_string());
        }
    }
    if config.methods.bayes {
        let keep = out.intervals.len();
        if let Err(e) = run_bayes(config, &data, index, &mut out) {
            out.bayes = None;
            out.intervals.truncate(keep);
            out.bayes_error = Some(e.to_string());
        }
    }
    Ok(out)
}

/// Bias and RMSE of a point estimator for one parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub parameter: String,
    pub estimator: String,
    pub bias: f64,
    pub rmse: f64,
}

/// Coverage probability and average length of one interval method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalSummary {
    pub parameter: String,
    pub nominal: f64,
    pub method: IntervalMethod,
    pub coverage: f64,
    pub average_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub config: SimConfig,
    pub points: Vec<PointSummary>,
    pub intervals: Vec<IntervalSummary>,
    pub mle_successes: usize,
    pub mle_failures: usize,
    pub bayes_successes: usize,
    pub bayes_failures: usize,
    /// First few failure messages, for diagnosis.
    pub failure_messages: Vec<String>,
    pub mean_censored_fraction: f64,
}

impl SimResult {
    pub fn point(&self, parameter: &str, estimator: &str) -> Option<&PointSummary> {
        self.points
            .iter()
            .find(|p| p.parameter == parameter && p.estimator == estimator)
    }

    pub fn interval(&self, parameter: &str, nominal: f64, method: IntervalMethod) -> Option<&IntervalSummary> {
        self.intervals
            .iter()
            .find(|s| s.parameter == parameter && s.nominal == nominal && s.method == method)
    }

    /// Rows `param,trunc,metric,nominal,method,value`, without a header.
    pub fn csv_rows(&self) -> String {
        let trunc = self.config.truncation_fraction;
        let mut s = String::new();
        for p in &self.points {
            let _ = writeln!(s, "{},{trunc},bias,,{},{}", p.parameter, p.estimator, p.bias);
            let _ = writeln!(s, "{},{trunc},rmse,,{},{}", p.parameter, p.estimator, p.rmse);
        }
        for i in &self.intervals {
            let m = i.method.as_str();
            let _ = writeln!(s, "{},{trunc},cp,{},{m},{}", i.parameter, i.nominal, i.coverage);
            let _ = writeln!(s, "{},{trunc},al,{},{m},{}", i.parameter, i.nominal, i.average_length);
        }
        s
    }
}

pub const CSV_HEADER: &str = "param,trunc,metric,nominal,method,value";

/// CSV for several studies (e.g. both truncation levels of one table).
pub fn results_csv(results: &[SimResult]) -> String {
    let mut s = format!("{CSV_HEADER}\n");
    for r in results {
        s.push_str(&r.csv_rows());
    }
    s
}

fn point_summary(parameter: &str, estimator: &str, truth: f64, estimates: &[f64]) -> PointSummary {
    let k = estimates.len() as f64;
    let (bias, rmse) = if estimates.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let bias = estimates.iter().map(|e| e - truth).sum::<f64>() / k;
        let mse = estimates.iter().map(|e| (e - truth).powi(2)).sum::<f64>() / k;
        (bias, mse.sqrt())
    };
    PointSummary {
        parameter: parameter.to_string(),
        estimator: estimator.to_string(),
        bias,
        rmse,
    }
}

/// Runs every replication (in parallel, one stream per replication) and
/// aggregates bias, RMSE, coverage and average length.
pub fn run_study(config: &SimConfig) -> Result<SimResult> {
    config.validate()?;
    for &level in &config.levels {
        crate::bootstrap::check_level(level)?;
    }
    let reps: Vec<Replication> = (0..config.replications)
        .into_par_iter()
        .map(|i| replicate(config, i))
        .collect::<Result<_>>()?;
    let p = &config.params;
    let truth = [p.alpha1, p.lambda1, p.lambda2];

    let mut points = Vec::new();
    let mut intervals = Vec::new();
    let families: &[(bool, &str, fn(&Replication) -> Option<[f64; 3]>, [IntervalMethod; 2])] = &[
        (
            config.methods.mle,
            "mle",
            |r| r.mle,
            [IntervalMethod::BcBootstrap, IntervalMethod::PercentileBootstrap],
        ),
        (
            config.methods.bayes,
            "bayes",
            |r| r.bayes,
            [IntervalMethod::SymmetricCredible, IntervalMethod::HpdCredible],
        ),
    ];
    for &(enabled, name, get, methods) in families {
        if !enabled {
            continue;
        }
        for (j, param) in PARAMETER_NAMES.iter().enumerate() {
            let est: Vec<f64> = reps.iter().filter_map(get).map(|e| e[j]).collect();
            points.push(point_summary(param, name, truth[j], &est));
            for (l, &nominal) in config.levels.iter().enumerate() {
                for method in methods {
                    let cis: Vec<&ConfidenceInterval> = reps
                        .iter()
                        .flat_map(|r| r.intervals.iter())
                        .filter(|(pj, pl, ci)| *pj == j && *pl == l && ci.method == method)
                        .map(|(_, _, ci)| ci)
                        .collect();
                    let k = cis.len() as f64;
                    let coverage = cis.iter().filter(|ci| ci.contains(truth[j])).count() as f64 / k;
                    let average_length = cis.iter().map(|ci| ci.width()).sum::<f64>() / k;
                    intervals.push(IntervalSummary {
                        parameter: param.to_string(),
                        nominal,
                        method,
                        coverage,
                        average_length,
                    });
                }
            }
        }
    }
    let count = |f: fn(&Replication) -> bool| reps.iter().filter(|r| f(r)).count();
    let failure_messages = reps
        .iter()
        .flat_map(|r| r.mle_error.iter().chain(r.bayes_error.iter()))
        .take(10)
        .cloned()
        .collect();
    Ok(SimResult {
        config: config.clone(),
        points,
        intervals,
        mle_successes: count(|r| r.mle.is_some()),
        mle_failures: count(|r| r.mle_error.is_some()),
        bayes_successes: count(|r| r.bayes.is_some()),
        bayes_failures: count(|r| r.bayes_error.is_some()),
        failure_messages,
        mean_censored_fraction: reps.iter().map(|r| r.censored_fraction).sum::<f64>() / reps.len() as f64,
    })
}

/// Mean censored fraction over `units` units generated at one truncation level.
pub fn censored_fraction(config: &SimConfig, units: usize, seed: u64) -> Result<f64> {
    config.validate()?;
    let mut rng = stream(seed, "censoring", 0);
    let k = (units as f64 * config.truncation_fraction).round() as usize;
    let mut censored = 0usize;
    for i in 0..units {
        if generate_unit(config, i < k, &mut rng)?.outcome == Outcome::Censored {
            censored += 1;
        }
    }
    Ok(censored as f64 / units as f64)
}

/// Rejection rate of the 5% likelihood-ratio test of equal shapes over the
/// study's replications; replications whose fits fail are skipped.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtPower {
    pub rejection_rate: f64,
    pub successes: usize,
    pub failures: usize,
}

pub fn lrt_power(config: &SimConfig) -> Result<LrtPower> {
    config.validate()?;
    let outcomes: Vec<Option<bool>> = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            let data = replication_dataset(config, i).ok()?;
            lrt_equal_shapes(&data, &config.solver).ok().map(|r| r.reject)
        })
        .collect();
    let ok: Vec<bool> = outcomes.iter().flatten().copied().collect();
    Ok(LrtPower {
        rejection_rate: ok.iter().filter(|&&r| r).count() as f64 / ok.len().max(1) as f64,
        successes: ok.len(),
        failures: outcomes.len() - ok.len(),
    })
}

/// The two parameter settings of the reference design.
pub fn design_params(setting: usize) -> Option<LatentParams> {
    match setting {
        1 => Some(LatentParams::common(2.0, 0.0625, 0.04)),
        2 => Some(LatentParams::common(0.5, 0.378, 0.408)),
        _ => None,
    }
}

/// Named presets `table1` .. `table8`. Each covers 10% and 30% truncation.
/// Tables 1-4 evaluate the MLE with bootstrap intervals, 5-8 the Bayes
/// estimates with credible intervals; odd tables use n = 100, even n = 200.
pub fn preset(name: &str) -> Result<Vec<SimConfig>> {
    let k: usize = name
        .strip_prefix("table")
        .and_then(|s| s.parse().ok())
        .filter(|k| (1..=8).contains(k))
        .ok_or_else(|| Error::InvalidArgument(format!("unknown preset {name:?}; expected table1..table8")))?;
    let params = design_params(if matches!(k, 1 | 2 | 5 | 6) { 1 } else { 2 }).unwrap();
    let n = if k % 2 == 1 { 100 } else { 200 };
    let methods = if k <= 4 {
        Methods { mle: true, bayes: false }
    } else {
        Methods { mle: false, bayes: true }
    };
    Ok([0.1, 0.3]
        .into_iter()
        .map(|frac| SimConfig {
            methods,
            ..SimConfig::new(n, frac, params)
        })
        .collect())
}
