mod common;

use common::{dataset_with_both_causes, moderate_params};
use ltrc_core::bayes::{
    hpd_interval, log_concavity_certified, log_posterior_alpha, posterior_dg, sample_posterior,
    sample_posterior_separate, symmetric_interval, DgParams, PriorSpec, SeparatePriorSpec,
};
use ltrc_core::bootstrap::{bc_interval, bootstrap_distribution, percentile_interval, BootstrapModel};
use ltrc_core::data::{parse_transformer_str, to_dataset, RawTransformerRecord};
use ltrc_core::mle::{log_likelihood, scan_grid, solve_alpha};
use ltrc_core::separate::fit_separate;
use ltrc_core::simstudy::{replication_dataset, run_study, Methods, SimConfig};
use ltrc_core::{w_functions, Dataset, SolverOptions};
use proptest::prelude::*;

const CASES: u32 = 1000;

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: CASES,
        // skipped cases are those whose likelihood has no interior maximum
        max_global_rejects: 20 * CASES,
        ..ProptestConfig::default()
    }
}

prop_compose! {
    fn small_dataset()(
        seed in any::<u64>(),
        n in 12usize..40,
        fraction in 0.0f64..0.6,
        alpha in 0.5f64..3.0,
        u1 in 0.0f64..1.0,
        u2 in 0.0f64..1.0,
    ) -> Dataset {
        dataset_with_both_causes(seed, n, fraction, moderate_params(alpha, u1, u2))
    }
}

prop_compose! {
    fn calendar_record()(install in 1950i32..2007, delta in 0u8..3)(
        install in Just(install),
        // a unit installed before 1980 is only seen if it lasted past 1980
        failure_year in (install.max(1980) + 1)..2008,
        delta in Just(delta),
    ) -> RawTransformerRecord {
        RawTransformerRecord {
            serial: 0,
            install_year: install,
            exit_year: if delta == 0 { 2008 } else { failure_year },
            nu: u8::from(install >= 1980),
            delta,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn calendar_round_trip(mut records in prop::collection::vec(calendar_record(), 1..30)) {
        for (i, r) in records.iter_mut().enumerate() {
            r.serial = i as i64 + 1;
        }
        let d = to_dataset(&records, 1980, 2008, 1.0).unwrap();
        prop_assert_eq!(d.calendar_records(2008, 1.0), records.clone());
        prop_assert_eq!(d.m1() + d.m2() + d.censored_indices().len(), d.n());

        let text: String = std::iter::once("sn,install_year,exit_year,nu,delta\n".to_string())
            .chain(records.iter().map(|r| {
                format!("{},{},{},{},{}\n", r.serial, r.install_year, r.exit_year, r.nu, r.delta)
            }))
            .collect();
        prop_assert_eq!(parse_transformer_str(&text).unwrap(), records);
    }

    #[test]
    fn rescaling_keeps_structure(d in small_dataset(), factor in 0.01f64..100.0) {
        let s = d.rescaled(1.0 / factor).unwrap();
        prop_assert_eq!(s.censored_indices(), d.censored_indices());
        prop_assert_eq!(s.cause_indices(ltrc_core::Cause::One), d.cause_indices(ltrc_core::Cause::One));
        for (a, b) in s.observations().iter().zip(d.observations()) {
            prop_assert_eq!(a.outcome, b.outcome);
            prop_assert_eq!(a.truncated, b.truncated);
            prop_assert!(rel(a.t * factor, b.t) < 1e-14);
            prop_assert!(rel(a.tau_r * factor, b.tau_r) < 1e-14);
        }
    }

    #[test]
    fn scale_equivariance(d in small_dataset(), c in 0.01f64..100.0) {
        let opts = SolverOptions::default();
        let base = solve_alpha(&d, &opts);
        let scaled = solve_alpha(&d.rescaled(c).unwrap(), &opts);
        prop_assume!(base.is_ok() && scaled.is_ok());
        let (base, scaled) = (base.unwrap(), scaled.unwrap());
        prop_assume!(base.converged && scaled.converged);
        prop_assert!(rel(scaled.alpha_hat, base.alpha_hat) < 1e-6, "{} vs {}", scaled.alpha_hat, base.alpha_hat);
        let factor = c.powf(-base.alpha_hat);
        prop_assert!(rel(scaled.lambda1_hat, base.lambda1_hat * factor) < 1e-5);
        prop_assert!(rel(scaled.lambda2_hat, base.lambda2_hat * factor) < 1e-5);
    }

    #[test]
    fn mle_ratio_and_stationarity(d in small_dataset()) {
        let opts = SolverOptions::default();
        let fit = solve_alpha(&d, &opts);
        prop_assume!(fit.as_ref().is_ok_and(|f| f.converged));
        let fit = fit.unwrap();
        let ratio = d.m1() as f64 / d.m2() as f64;
        prop_assert!(rel(fit.lambda1_hat / fit.lambda2_hat, ratio) < 1e-12);
        let (w1, s) = w_functions(&d, fit.alpha_hat).unwrap();
        let m = d.m() as f64;
        let score = m / fit.alpha_hat - m * s.w2_prime / s.w2 + w1;
        // the score is checked relative to its largest term
        let size = (m / fit.alpha_hat).max(w1.abs()).max(1.0);
        prop_assert!(score.abs() <= 10.0 * opts.tol * size, "score {score}");
    }

    #[test]
    fn mle_beats_random_parameters(
        d in small_dataset(),
        alpha in 0.05f64..10.0,
        l1 in 1e-4f64..2.0,
        l2 in 1e-4f64..2.0,
    ) {
        let fit = solve_alpha(&d, &SolverOptions::default());
        prop_assume!(fit.is_ok());
        let fit = fit.unwrap();
        let best = log_likelihood(&d, fit.alpha_hat, fit.lambda1_hat, fit.lambda2_hat).unwrap();
        prop_assert!((best - fit.loglik).abs() <= 1e-9 * best.abs().max(1.0));
        let other = log_likelihood(&d, alpha, l1, l2).unwrap();
        prop_assert!(best >= other - 1e-9 * best.abs().max(1.0), "{best} < {other}");
    }

    #[test]
    fn nesting_inequality(d in small_dataset()) {
        let opts = SolverOptions::default();
        let (common, separate) = (solve_alpha(&d, &opts), fit_separate(&d, &opts));
        prop_assume!(common.is_ok() && separate.is_ok());
        let (common, separate) = (common.unwrap(), separate.unwrap());
        prop_assert!(separate.loglik >= common.loglik - 1e-8 * common.loglik.abs().max(1.0),
            "{} < {}", separate.loglik, common.loglik);
    }

    #[test]
    fn hpd_never_longer_than_symmetric(
        samples in prop::collection::vec(0.0f64..1e3, 100..400),
        two_beta in 0.01f64..0.5,
    ) {
        let hpd = hpd_interval(&samples, two_beta).unwrap();
        let sym = symmetric_interval(&samples, two_beta).unwrap();
        prop_assert!(hpd.width() <= sym.width());
        prop_assert!(hpd.lower <= hpd.upper);
        let n = samples.len() as f64;
        let inside = samples.iter().filter(|&&x| hpd.contains(x)).count() as f64 / n;
        let cap = (n * two_beta + 1e-9).floor() / n;
        prop_assert!(inside >= 1.0 - two_beta - 2.0 / n.sqrt());
        prop_assert!(inside <= 1.0 - two_beta + cap + 1e-12);
    }

    #[test]
    fn bootstrap_interval_shapes(
        estimates in prop::collection::vec(-50.0f64..50.0, 10..300),
        original in -50.0f64..50.0,
        narrow in 0.5f64..0.9,
        extra in 0.01f64..0.09,
    ) {
        let wide = narrow + extra;
        let p_narrow = percentile_interval(&estimates, narrow).unwrap();
        let p_wide = percentile_interval(&estimates, wide).unwrap();
        for v in [p_narrow.lower, p_narrow.upper, p_wide.lower, p_wide.upper] {
            prop_assert!(estimates.contains(&v));
        }
        prop_assert!(p_wide.lower <= p_narrow.lower && p_narrow.upper <= p_wide.upper);

        let b_narrow = bc_interval(&estimates, original, narrow).unwrap();
        let b_wide = bc_interval(&estimates, original, wide).unwrap();
        prop_assert!(b_wide.lower <= b_narrow.lower && b_narrow.upper <= b_wide.upper);
        let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
        let center = (b_narrow.lower + b_narrow.upper) / 2.0;
        prop_assert!((center - (2.0 * original - mean)).abs() < 1e-9 * (1.0 + mean.abs() + original.abs()));
    }

    #[test]
    fn conjugate_update_splits(
        a in small_dataset(),
        b in small_dataset(),
        alpha in 0.2f64..5.0,
        b0 in 1e-4f64..3.0,
        a0 in 1e-4f64..3.0,
    ) {
        let prior = DgParams::new(b0, a0, a0 / 2.0, a0 / 2.0).unwrap();
        let pooled = posterior_dg(&a.concat(&b).unwrap(), alpha, &prior).unwrap();
        let sequential = posterior_dg(&b, alpha, &posterior_dg(&a, alpha, &prior).unwrap()).unwrap();
        prop_assert!(rel(sequential.b, pooled.b) < 1e-12);
        prop_assert!(rel(sequential.a0, pooled.a0) < 1e-14);
        prop_assert!(rel(sequential.a1, pooled.a1) < 1e-14);
        prop_assert!(rel(sequential.a2, pooled.a2) < 1e-14);
    }

    #[test]
    fn log_concave_when_certified(
        d in small_dataset(),
        c in 1e-4f64..5.0,
        rate in 1e-4f64..2.0,
        b0 in 1e-4f64..5.0,
        a0 in 1e-4f64..5.0,
    ) {
        let prior = PriorSpec {
            dg: DgParams::new(b0, a0, a0 / 2.0, a0 / 2.0).unwrap(),
            alpha_shape: c,
            alpha_rate: rate,
        };
        if log_concavity_certified(&d, &prior) {
            let f = |x: f64| log_posterior_alpha(&d, &prior, x).unwrap();
            for alpha in scan_grid() {
                let h = 1e-3 * alpha;
                let (lo, mid, hi) = (f(alpha - h), f(alpha), f(alpha + h));
                let second = (hi - 2.0 * mid + lo) / (h * h);
                // rounding in three evaluations, amplified by 1/h^2
                let noise = 1e3 * f64::EPSILON * (lo.abs() + 2.0 * mid.abs() + hi.abs()) / (h * h);
                prop_assert!(second <= 1e-6 + noise, "alpha {alpha}: {second} (noise {noise})");
            }
        }
    }

    #[test]
    fn posterior_is_deterministic_and_positive(d in small_dataset(), seed in any::<u64>()) {
        let prior = PriorSpec::default();
        let first = sample_posterior(&d, &prior, 50, seed).unwrap();
        let second = sample_posterior(&d, &prior, 50, seed).unwrap();
        prop_assert_eq!(&first, &second);
        for draw in &first.draws {
            prop_assert!(draw.alpha > 0.0 && draw.lambda1 > 0.0 && draw.lambda2 > 0.0);
        }
        let sep = SeparatePriorSpec::default();
        let first = sample_posterior_separate(&d, &sep, 50, seed).unwrap();
        prop_assert_eq!(first, sample_posterior_separate(&d, &sep, 50, seed).unwrap());
    }

    #[test]
    fn bootstrap_is_deterministic_across_pools(d in small_dataset(), seed in any::<u64>()) {
        let opts = SolverOptions::default();
        let fit = solve_alpha(&d, &opts);
        prop_assume!(fit.is_ok());
        let fit = fit.unwrap();
        let run = || bootstrap_distribution(&d, BootstrapModel::Common(&fit), 8, seed, &opts).ok();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let threaded = pool.install(run);
        prop_assert_eq!(run(), threaded);
    }

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), fraction in 0.0f64..0.5, index in 0usize..1000) {
        let mut config = SimConfig::new(20, fraction, moderate_params(2.0, 0.3, 0.2));
        config.seed = seed;
        prop_assert_eq!(replication_dataset(&config, index).unwrap(), replication_dataset(&config, index).unwrap());
        let d = replication_dataset(&config, index).unwrap();
        for o in d.observations() {
            prop_assert!(o.t > 0.0 && o.t <= o.tau_r);
            prop_assert!(!o.truncated || o.t > o.tau_l);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, ..ProptestConfig::default() })]

    #[test]
    fn study_is_bit_exact(seed in any::<u64>()) {
        let mut config = SimConfig::new(25, 0.3, moderate_params(2.0, 0.3, 0.2));
        config.seed = seed;
        config.replications = 2;
        config.bootstrap_b = 10;
        config.posterior_n = 20;
        config.methods = Methods { mle: true, bayes: true };
        let a = format!("{:?}", run_study(&config).unwrap());
        let b = format!("{:?}", run_study(&config).unwrap());
        prop_assert_eq!(a, b);
    }
}
