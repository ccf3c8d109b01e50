use std::fmt::Write as _;
use std::path::Path;

use ltrc_core::bayes::{
    bayes_estimates_mc, credible_interval_table, sample_posterior, sample_posterior_separate, PriorSpec,
    SeparatePriorSpec,
};
use ltrc_core::bootstrap::{bootstrap_distribution, bootstrap_interval_table, BootstrapModel, IntervalRow};
use ltrc_core::data::{parse_transformer_csv, parse_transformer_str, to_dataset};
use ltrc_core::mle::{profile_table, solve_alpha, SolverOptions};
use ltrc_core::separate::{fit_separate, lrt_equal_shapes};
use ltrc_core::simstudy::{preset, results_csv, run_study, FULL_REPLICATIONS};
use ltrc_core::{Dataset, Error, TRANSFORMER_CSV};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::args::{BayesArgs, BootstrapArgs, Command, DataArgs, FitArgs, ProfileArgs, SimulateArgs};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to reproduce a run's artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub command: Command,
}

impl RunManifest {
    pub fn new(command: &Command) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            tool: "ltrc".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.clone(),
        }
    }
}

/// Output of one command: text for the terminal and named artifacts.
#[derive(Debug, Default)]
pub struct Report {
    pub stdout: String,
    pub files: Vec<(String, String)>,
    pub warnings: Vec<String>,
    /// False when some requested computation did not converge.
    pub converged: bool,
}

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_)
            | Error::Parse { .. }
            | Error::Consistency { .. }
            | Error::InvalidObservation { .. }
            | Error::InvalidArgument(_)
            | Error::Domain { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type Outcome = std::result::Result<Report, Failure>;

pub fn execute(command: &Command) -> Outcome {
    match command {
        Command::Fit(a) => fit(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Bayes(a) => bayes(a),
        Command::Lrt(a) => lrt(a),
        Command::Profile(a) => profile(a),
        Command::Simulate(a) => simulate(a),
        Command::Replay(_) => Err(Failure::input("replay cannot be nested")),
    }
}

fn load(args: &DataArgs) -> Result<Dataset, Failure> {
    let records = match &args.input {
        Some(path) => parse_transformer_csv(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?,
        None => parse_transformer_str(TRANSFORMER_CSV)?,
    };
    Ok(to_dataset(&records, args.trunc_year, args.censor_year, args.scale)?)
}

fn solver(tol: f64) -> Result<SolverOptions, Failure> {
    if !(tol > 0.0) {
        return Err(Failure::input(format!("--tol must be positive, got {tol}")));
    }
    Ok(SolverOptions {
        tol,
        ..SolverOptions::default()
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

fn data_line(d: &Dataset) -> String {
    format!(
        "n = {}, cause 1 failures = {}, cause 2 failures = {}, censored = {}\n",
        d.n(),
        d.m1(),
        d.m2(),
        d.censored_indices().len()
    )
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn fit(args: &FitArgs) -> Outcome {
    let data = load(&args.data)?;
    let opts = solver(args.data.tol)?;
    let common = solve_alpha(&data, &opts)?;
    let mut out = String::new();
    out.push_str(&data_line(&data));
    let _ = writeln!(out, "\nCommon shape MLE");
    let _ = writeln!(out, "  alpha    {:>12.6}", common.alpha_hat);
    let _ = writeln!(out, "  lambda1  {:>12.6}", common.lambda1_hat);
    let _ = writeln!(out, "  lambda2  {:>12.6}", common.lambda2_hat);
    let _ = writeln!(out, "  loglik   {:>12.6}", common.loglik);
    let _ = writeln!(
        out,
        "  converged: {}, unimodality certified: {}, method: {:?}, iterations: {}",
        yes_no(common.converged),
        yes_no(common.unimodality_certified),
        common.method,
        common.iterations
    );
    let mut converged = common.converged;
    let separate = if args.separate {
        let s = fit_separate(&data, &opts)?;
        let _ = writeln!(out, "\nSeparate shape MLE");
        let _ = writeln!(out, "  alpha1   {:>12.6}", s.alpha1_hat);
        let _ = writeln!(out, "  lambda1  {:>12.6}", s.lambda1_hat);
        let _ = writeln!(out, "  alpha2   {:>12.6}", s.alpha2_hat);
        let _ = writeln!(out, "  lambda2  {:>12.6}", s.lambda2_hat);
        let _ = writeln!(out, "  loglik   {:>12.6}", s.loglik);
        let _ = writeln!(
            out,
            "  converged: {}, unimodality certified: {}",
            yes_no(s.converged()),
            yes_no(s.unimodality_certified)
        );
        converged &= s.converged();
        Some(s)
    } else {
        None
    };
    Ok(Report {
        stdout: out,
        files: vec![("fit.json".into(), to_json(&json!({ "common": common, "separate": separate })))],
        warnings: Vec::new(),
        converged,
    })
}

fn interval_csv(rows: &[IntervalRow]) -> String {
    let mut s = String::from("parameter,level,method,lower,upper\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.parameter, r.level, r.method.as_str(), r.lower, r.upper);
    }
    s
}

fn interval_table(rows: &[IntervalRow]) -> String {
    let mut s = format!("{:<9} {:>6}  {:<22} {:>12} {:>12}\n", "param", "level", "method", "lower", "upper");
    for r in rows {
        let _ = writeln!(
            s,
            "{:<9} {:>6}  {:<22} {:>12.6} {:>12.6}",
            r.parameter,
            r.level,
            r.method.as_str(),
            r.lower,
            r.upper
        );
    }
    s
}

fn bootstrap(args: &BootstrapArgs) -> Outcome {
    let data = load(&args.data)?;
    let opts = solver(args.data.tol)?;
    let common;
    let separate;
    let model = if args.separate {
        separate = fit_separate(&data, &opts)?;
        BootstrapModel::Separate(&separate)
    } else {
        common = solve_alpha(&data, &opts)?;
        BootstrapModel::Common(&common)
    };
    let dist = bootstrap_distribution(&data, model, args.b, args.seed, &opts)?;
    let rows = bootstrap_interval_table(&dist, &model.estimates(), &args.level)?;
    let mut warnings = Vec::new();
    if dist.failed_replicates > 0 {
        warnings.push(format!(
            "{} of {} bootstrap refits failed and were dropped",
            dist.failed_replicates, dist.b
        ));
    }
    let mut estimates = dist.parameter_names.join(",");
    estimates.push('\n');
    for row in &dist.estimates {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        estimates.push_str(&cells.join(","));
        estimates.push('\n');
    }
    let mut out = data_line(&data);
    let _ = writeln!(out, "\nBootstrap intervals (B = {}, seed = {})", args.b, args.seed);
    out.push_str(&interval_table(&rows));
    Ok(Report {
        stdout: out,
        files: vec![
            ("bootstrap_intervals.csv".into(), interval_csv(&rows)),
            ("bootstrap_estimates.csv".into(), estimates),
        ],
        warnings,
        converged: true,
    })
}

#[derive(Serialize)]
struct Estimate<'a> {
    parameter: &'a str,
    mean: f64,
    variance: f64,
}

fn bayes(args: &BayesArgs) -> Outcome {
    let data = load(&args.data)?;
    let (names, columns, draws_csv, warnings, sampler): (Vec<&str>, Vec<Vec<f64>>, String, Vec<String>, String) =
        if args.separate {
            let d = sample_posterior_separate(&data, &SeparatePriorSpec::default(), args.n, args.seed)?;
            (
                vec!["alpha1", "lambda1", "alpha2", "lambda2"],
                (0..4).map(|j| d.column(j)).collect(),
                d.to_csv(),
                d.warnings.clone(),
                format!("{:?}", d.samplers),
            )
        } else {
            let d = sample_posterior(&data, &PriorSpec::default(), args.n, args.seed)?;
            (
                vec!["alpha", "lambda1", "lambda2"],
                vec![d.alpha(), d.lambda1(), d.lambda2()],
                d.to_csv(),
                d.warnings.clone(),
                format!("{:?}", d.sampler),
            )
        };
    let mut estimates = Vec::new();
    for (name, col) in names.iter().zip(&columns) {
        let (mean, variance) = bayes_estimates_mc(col, |x| *x)?;
        estimates.push(Estimate {
            parameter: name,
            mean,
            variance,
        });
    }
    let rows = credible_interval_table(&names, &columns, &args.level)?;
    let mut out = data_line(&data);
    let _ = writeln!(out, "\nPosterior means (N = {}, seed = {}, shape sampler {sampler})", args.n, args.seed);
    for e in &estimates {
        let _ = writeln!(out, "  {:<8} {:>12.6}  (variance {:.6})", e.parameter, e.mean, e.variance);
    }
    out.push('\n');
    out.push_str(&interval_table(&rows));
    let summary = json!({ "estimates": estimates, "sampler": sampler, "warnings": warnings });
    Ok(Report {
        stdout: out,
        files: vec![
            ("bayes.json".into(), to_json(&summary)),
            ("posterior_draws.csv".into(), draws_csv),
            ("credible_intervals.csv".into(), interval_csv(&rows)),
        ],
        warnings,
        converged: true,
    })
}

fn lrt(args: &DataArgs) -> Outcome {
    let data = load(args)?;
    let r = lrt_equal_shapes(&data, &solver(args.tol)?)?;
    let mut out = data_line(&data);
    let _ = writeln!(out, "\nLikelihood-ratio test of equal shapes");
    let _ = writeln!(out, "  loglik (common)    {:>12.6}", r.common.loglik);
    let _ = writeln!(out, "  loglik (separate)  {:>12.6}", r.separate.loglik);
    let _ = writeln!(out, "  statistic          {:>12.6}", r.statistic);
    let _ = writeln!(out, "  critical (5%)      {:>12.3}", r.critical_value_95);
    let _ = writeln!(
        out,
        "  decision: {}",
        if r.reject { "reject equal shapes" } else { "fail to reject equal shapes" }
    );
    Ok(Report {
        stdout: out,
        files: vec![("lrt.json".into(), to_json(&r))],
        warnings: Vec::new(),
        converged: r.common.converged && r.separate.converged(),
    })
}

fn profile(args: &ProfileArgs) -> Outcome {
    let data = load(&args.data)?;
    if !(args.b0 > 0.0) {
        return Err(Failure::input(format!("--b0 must be positive, got {}", args.b0)));
    }
    let table = profile_table(&data, args.b0)?;
    let mut csv = String::from("alpha,p_alpha,d_alpha,d_tilde_alpha\n");
    for p in &table {
        let _ = writeln!(csv, "{},{},{},{}", p.alpha, p.p_alpha, p.d_alpha, p.d_tilde_alpha);
    }
    let best = table
        .iter()
        .filter(|p| p.p_alpha.is_finite())
        .max_by(|a, b| a.p_alpha.total_cmp(&b.p_alpha));
    let negative = table.iter().filter(|p| p.d_alpha < 0.0).count();
    let mut out = data_line(&data);
    let _ = writeln!(out, "\nProfile on {} grid points", table.len());
    if let Some(b) = best {
        let _ = writeln!(out, "  grid maximum at alpha = {:.6}, p = {:.6}", b.alpha, b.p_alpha);
    }
    let _ = writeln!(out, "  grid points with d(alpha) < 0: {negative}");
    Ok(Report {
        stdout: out,
        files: vec![("profile.csv".into(), csv)],
        warnings: Vec::new(),
        converged: true,
    })
}

fn simulate(args: &SimulateArgs) -> Outcome {
    let tol = solver(args.tol)?;
    let mut results = Vec::new();
    let mut warnings = Vec::new();
    for mut config in preset(&args.preset)? {
        config.replications = if args.full { FULL_REPLICATIONS } else { args.replications };
        config.bootstrap_b = args.b;
        config.posterior_n = args.n;
        config.levels = args.level.clone();
        config.seed = args.seed;
        config.solver = tol;
        let r = run_study(&config)?;
        let failures = r.mle_failures + r.bayes_failures;
        if failures > 0 {
            warnings.push(format!(
                "{} truncation {}: {failures} replication fits failed and were excluded",
                args.preset, config.truncation_fraction
            ));
        }
        results.push(r);
    }
    let mut out = String::new();
    for r in &results {
        let c = &r.config;
        let _ = writeln!(
            out,
            "{}: n = {}, truncation {}, {} replications, censored fraction {:.3}",
            args.preset, c.n, c.truncation_fraction, c.replications, r.mean_censored_fraction
        );
        for p in &r.points {
            let _ = writeln!(out, "  {:<8} {:<6} bias {:>9.4}  rmse {:>8.4}", p.parameter, p.estimator, p.bias, p.rmse);
        }
        for i in &r.intervals {
            let _ = writeln!(
                out,
                "  {:<8} {:>5} {:<22} cp {:>6.3}  al {:>8.4}",
                i.parameter,
                i.nominal,
                i.method.as_str(),
                i.coverage,
                i.average_length
            );
        }
    }
    Ok(Report {
        stdout: out,
        files: vec![("simulation.csv".into(), results_csv(&results))],
        warnings,
        converged: true,
    })
}

/// Writes the artifacts and the manifest; nothing is written unless the
/// directory can be created.
pub fn write_outputs(dir: &Path, manifest: &RunManifest, report: &Report) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in &report.files {
        std::fs::write(dir.join(name), contents)?;
    }
    std::fs::write(dir.join("manifest.json"), to_json(manifest))
}

pub fn read_manifest(path: &Path) -> Result<RunManifest, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Failure::input(format!(
            "unsupported manifest schema version {} (expected {SCHEMA_VERSION})",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}
