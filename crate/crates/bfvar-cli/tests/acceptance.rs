//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the computed values (run with `cargo test --test acceptance --
//! --nocapture` to see every line). Tolerances are pinned in the
//! assertions.
//!
//! Criterion 5's archeology height value is computed and asserted exactly as
//! stated; the underlying published figure is not reproducible from these
//! summary statistics (see the repository README), so that assertion is
//! expected to stay red while everything around it passes.

use std::process::Command;
use std::time::Instant;

use bfvar::elicitation::{self, ElicitationTarget};
use bfvar::kgroups::{self, ChainConfig};
use bfvar::one_sample::{self, OneSampleProblem};
use bfvar::two_sample::{self, DeltaHypothesis, DeltaInterval};
use bfvar::verify;
use bfvar::{GroupStats, HypothesisSpec, PriorSpec, SdConvention};

fn check(criterion: &str, ok: bool, detail: String, t0: Instant) {
    let status = if ok { "PASS" } else { "FAIL" };
    println!("{status} criterion {criterion} ({:.2?}): {detail}", t0.elapsed());
    assert!(ok, "criterion {criterion}: {detail}");
}

fn g(n: u64, ss: f64) -> GroupStats {
    GroupStats::new(n, ss).unwrap()
}

fn from_sd(n: u64, sd: f64) -> GroupStats {
    GroupStats::from_sd(n, sd, SdConvention::Unbiased).unwrap()
}

/// 1. PCB one-sample interval test (n=7, sd(x), sigma0^2 = 0.10, alpha=2.16,
///    alternative delta in [1, inf)): BF_0m = 1.04 +/- 0.03. The published
///    value arises from plugging the sample sd into the divisor-n formulas,
///    so the sufficient statistic is n * sd^2 with sd from the raw readings.
#[test]
fn criterion_01_pcb_one_sample() {
    let t0 = Instant::now();
    let x = [6.2, 5.8, 5.7, 6.3, 5.9, 5.8, 6.0];
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let ss_raw: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss_raw / (x.len() as f64 - 1.0)).sqrt();
    let stats = GroupStats::from_sd(7, sd, SdConvention::Mle).unwrap();
    let problem = OneSampleProblem::new(stats.n(), stats.ss(), 1.0 / 0.10).unwrap();
    let r = one_sample::log_bf_directed_one(
        &problem,
        2.16,
        &DeltaHypothesis::Point(1.0),
        &DeltaHypothesis::Interval(DeltaInterval::new(1.0, f64::INFINITY).unwrap()),
    )
    .unwrap();
    let bf_0m = (-r.log_bf10).exp();
    check("1 PCB BF_0m", (bf_0m - 1.04).abs() <= 0.03, format!("BF_0m = {bf_0m:.4} (target 1.04 +/- 0.03)"), t0);
}

/// 2. Laser vs digitizer directed test: BF_+0 = 4.93 +/- 0.05.
#[test]
fn criterion_02_laser_digitizer_directed() {
    let t0 = Instant::now();
    let laser = from_sd(990, 0.89);
    let digit = from_sd(990, 0.98);
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let r = two_sample::log_bf_directed(
        &laser,
        &digit,
        &prior,
        &DeltaHypothesis::Interval(DeltaInterval::new(1.0, f64::INFINITY).unwrap()),
        &DeltaHypothesis::Point(1.0),
    )
    .unwrap();
    let bf = r.log_bf10.exp();
    check("2 BF_+0", (bf - 4.93).abs() <= 0.05, format!("BF_+0 = {bf:.4} (target 4.93 +/- 0.05)"), t0);
}

/// 3. Laser vs digitizer interval null: BF_0'1' = 7.03 +/- 0.07.
#[test]
fn criterion_03_laser_digitizer_interval() {
    let t0 = Instant::now();
    let laser = from_sd(990, 0.89);
    let digit = from_sd(990, 0.98);
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let r = two_sample::log_bf_directed(
        &laser,
        &digit,
        &prior,
        &DeltaHypothesis::Interval(DeltaInterval::new(0.90, 1.10).unwrap()),
        &DeltaHypothesis::Interval(DeltaInterval::new(1.10, f64::INFINITY).unwrap()),
    )
    .unwrap();
    let bf = r.log_bf10.exp();
    check("3 BF_0'1'", (bf - 7.03).abs() <= 0.07, format!("BF_0'1' = {bf:.4} (target 7.03 +/- 0.07)"), t0);
}

/// 4. Elicitation reproduces alpha = 4.50 (95% mass on delta in [1/2, 2])
///    and alpha = 2.16 (even odds of halving the variance, prior truncated
///    to delta >= 1, i.e. delta >= sqrt(2) given delta >= 1).
#[test]
fn criterion_04_elicitation() {
    let t0 = Instant::now();
    let a1 = elicitation::solve_alpha(
        &ElicitationTarget::new(DeltaInterval::new(0.5, 2.0).unwrap(), 0.95, None).unwrap(),
    )
    .unwrap();
    let a2 = elicitation::solve_alpha(
        &ElicitationTarget::new(
            DeltaInterval::new(2f64.sqrt(), f64::INFINITY).unwrap(),
            0.5,
            Some(DeltaInterval::new(1.0, f64::INFINITY).unwrap()),
        )
        .unwrap(),
    )
    .unwrap();
    let ok = (a1 - 4.50).abs() <= 0.05 && (a2 - 2.16).abs() <= 0.05;
    check("4 elicitation", ok, format!("alpha = {a1:.4} (target 4.50 +/- 0.05), {a2:.4} (target 2.16 +/- 0.05)"), t0);
}

fn archeology_log_bf(sds: [f64; 3], seed: u64) -> (f64, f64) {
    let stats: Vec<GroupStats> = [117u64, 171, 55]
        .iter()
        .zip(sds.iter())
        .map(|(&n, &sd)| from_sd(n, sd))
        .collect();
    let order = HypothesisSpec::parse("1>2>3", 3).unwrap();
    let equal = HypothesisSpec::parse("1=2=3", 3).unwrap();
    let config = ChainConfig::default();
    let num = kgroups::log_ml_hypothesis(&order, &stats, 0.5, &config, seed).unwrap();
    let den = kgroups::log_ml_hypothesis(&equal, &stats, 0.5, &config, seed ^ 0x5a5a).unwrap();
    let se = (num.se * num.se + den.se * den.se).sqrt();
    (num.log_ml - den.log_ml, se)
}

/// 5a. Archeology aperture: log BF("1>2>3" vs "1=2=3") = 22 +/- 0.5 with
///     bridge mc_se below 0.05.
#[test]
fn criterion_05a_archeology_aperture() {
    let t0 = Instant::now();
    let (log_bf, se) = archeology_log_bf([5.83, 8.13, 12.74], 1001);
    let ok = (log_bf - 22.0).abs() <= 0.5 && se < 0.05;
    check("5a aperture", ok, format!("log BF = {log_bf:.3} (target 22 +/- 0.5), mc_se = {se:.4}"), t0);
}

/// 5b. Archeology height: BF("1>2>3" vs "1=2=3") = 1.14 +/- 0.06 as stated.
///     Expected red: the exact value for these summary statistics is
///     BF ~ 0.0014 under every data/direction assignment (see README).
#[test]
fn criterion_05b_archeology_height() {
    let t0 = Instant::now();
    let result = std::panic::catch_unwind(|| archeology_log_bf([9.6, 7.23, 7.81], 1002));
    match result {
        Ok((log_bf, se)) => {
            let bf = log_bf.exp();
            let ok = (bf - 1.14).abs() <= 0.06 && se < 0.05;
            check("5b height", ok, format!("BF = {bf:.4} (target 1.14 +/- 0.06), mc_se = {se:.4}"), t0);
        }
        Err(_) => {
            // the order constraint has almost no posterior mass; the budget
            // doubling can run out of satisfying draws entirely
            check(
                "5b height",
                false,
                "no posterior draws satisfy the order constraint (posterior mass ~ 1e-4)".to_string(),
                t0,
            );
        }
    }
}

/// 6. Math Garden: log BF_r0 = 1666.6 +/- 1.0 and log BF_r1 = 6.57 +/- 0.5.
///    Groups are listed grade-ascending so that "1>2>3>4>5>6" on the
///    precision weights expresses the increasing-variability hypothesis.
#[test]
fn criterion_06_math_garden() {
    let t0 = Instant::now();
    let ns = [6410u64, 9395, 9160, 7549, 6007, 3280];
    let sds = [3.08, 3.69, 4.62, 4.97, 5.39, 5.99];
    let stats: Vec<GroupStats> = ns.iter().zip(sds.iter()).map(|(&n, &sd)| from_sd(n, sd)).collect();
    let config = ChainConfig::default();
    let h_r = HypothesisSpec::parse("1>2>3>4>5>6", 6).unwrap();
    let h_0 = HypothesisSpec::parse("1=2=3=4=5=6", 6).unwrap();
    let h_f = HypothesisSpec::parse("1,2,3,4,5,6", 6).unwrap();
    let ml_r = kgroups::log_ml_hypothesis(&h_r, &stats, 0.5, &config, 2024).unwrap();
    let ml_0 = kgroups::log_ml_hypothesis(&h_0, &stats, 0.5, &config, 2025).unwrap();
    let ml_f = kgroups::log_ml_hypothesis(&h_f, &stats, 0.5, &config, 2026).unwrap();
    let bf_r0 = ml_r.log_ml - ml_0.log_ml;
    let bf_r1 = ml_r.log_ml - ml_f.log_ml;
    let ok = (bf_r0 - 1666.6).abs() <= 1.0 && (bf_r1 - 6.57).abs() <= 0.5;
    check(
        "6 Math Garden",
        ok,
        format!("log BF_r0 = {bf_r0:.3} (target 1666.6 +/- 1.0), log BF_r1 = {bf_r1:.3} (target 6.57 +/- 0.5)"),
        t0,
    );
}

/// 7. Oracle equivalence: closed form vs quadrature on 100 randomized
///    inputs within 1e-8 in log; bridge vs closed form at K=2 within
///    max(0.02, 3 mc_se); bridge vs simplex quadrature at K=3 within 0.02.
#[test]
fn criterion_07_oracle_equivalence() {
    let t0 = Instant::now();
    use rand::Rng;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(20200313);
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let g1 = g(rng.gen_range(2..400), rng.gen_range(0.05..60.0));
        let g2 = g(rng.gen_range(2..400), rng.gen_range(0.05..60.0));
        let closed = two_sample::log_ml_h1(&g1, &g2, &prior).unwrap();
        let quad = verify::quad_ml_two(&g1, &g2, &prior).unwrap();
        worst = worst.max((closed - quad).abs());
    }
    let cfg = ChainConfig::default();
    let (g1, g2) = (g(10, 8.0), g(12, 15.0));
    let draws = kgroups::sample_posterior(&[g1, g2], 0.5, &cfg, 7).unwrap();
    let br2 = kgroups::bridge_log_ml(&draws, &[g1, g2], 0.5).unwrap();
    let closed2 = two_sample::log_ml_h1(&g1, &g2, &prior).unwrap();
    let k2_diff = (br2.log_ml - closed2).abs();
    let k2_tol = (3.0 * br2.se).max(0.02);

    let stats3 = [g(25, 12.0), g(30, 40.0), g(20, 30.0)];
    let draws3 = kgroups::sample_posterior(&stats3, 0.5, &cfg, 8).unwrap();
    let br3 = kgroups::bridge_log_ml(&draws3, &stats3, 0.5).unwrap();
    let quad3 = verify::quad_ml_k3(&stats3, 0.5).unwrap();
    let k3_diff = (br3.log_ml - quad3).abs();

    let ok = worst <= 1e-8 && k2_diff <= k2_tol && k3_diff <= 0.02;
    check(
        "7 oracle equivalence",
        ok,
        format!("max closed-vs-quad |dlog| = {worst:.2e} (<= 1e-8), K=2 bridge |dlog| = {k2_diff:.4} (<= {k2_tol:.4}), K=3 bridge-vs-quad |dlog| = {k3_diff:.4} (<= 0.02)"),
        t0,
    );
}

/// 8. Desiderata: predictive-matching zeros, label/measurement invariance
///    to 1e-10, information-consistency trend, limit-consistency bound
///    1e-2 between n2 = 1e6 and 1e7, model-selection medians over 200
///    replications.
#[test]
fn criterion_08_desiderata() {
    let t0 = Instant::now();
    let report = verify::desiderata_suite(20200313).unwrap();
    let mut missing = Vec::new();
    for name in [
        "predictive_matching",
        "label_invariance",
        "measurement_invariance",
        "information_consistency_trend",
        "limit_consistency",
        "model_selection_consistency",
    ] {
        let item = report.outcomes.iter().find(|o| o.name == name);
        if !item.map(|o| o.passed).unwrap_or(false) {
            missing.push(name);
        }
    }
    for o in &report.outcomes {
        println!("  desiderata {}: {} ({})", o.name, if o.passed { "pass" } else { "FAIL" }, o.detail);
    }
    check("8 desiderata", missing.is_empty() && report.all_passed(), format!("failing: {missing:?}"), t0);
}

/// 9. Posterior integrity: densities normalize to 1 (1e-6), the rho/delta
///    change of variables is exact to 1e-10, and the K=2 MCMC marginal is
///    within KS distance 0.02 of the closed-form posterior.
#[test]
fn criterion_09_posterior_integrity() {
    let t0 = Instant::now();
    let (g1, g2) = (g(10, 8.0), g(12, 15.0));
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let rule = bfvar::specfun::gauss_legendre(400).unwrap();
    let rho_mass = rule.integrate(0.0, 1.0, |r| two_sample::posterior_rho_pdf(r, &g1, &g2, &prior).unwrap());
    let delta_mass = rule.integrate(0.0, 1.0, |r| {
        if r <= 0.0 || r >= 1.0 {
            return 0.0;
        }
        let d = (r / (1.0 - r)).sqrt();
        two_sample::posterior_delta_pdf(d, &g1, &g2, &prior).unwrap() / (2.0 * d * (1.0 - r) * (1.0 - r))
    });
    let mut cov_worst: f64 = 0.0;
    for d in [0.4f64, 0.9, 1.1, 2.5] {
        let rho = d * d / (1.0 + d * d);
        let jac = 2.0 * d / (1.0 + d * d).powi(2);
        let lhs = two_sample::posterior_delta_pdf(d, &g1, &g2, &prior).unwrap();
        let rhs = two_sample::posterior_rho_pdf(rho, &g1, &g2, &prior).unwrap() * jac;
        cov_worst = cov_worst.max((lhs - rhs).abs() / lhs.max(1.0));
    }
    // K=2 MCMC marginal against the closed-form CDF
    let cfg = ChainConfig { chains: 4, warmup: 600, draws_per_chain: 2500 };
    let draws = kgroups::sample_posterior(&[g1, g2], 0.5, &cfg, 2024).unwrap();
    let mut xs: Vec<f64> = draws.draws().iter().map(|d| d[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let mut ks: f64 = 0.0;
    for idx in (0..n).step_by(n / 200) {
        let x = xs[idx];
        let d = (x / (1.0 - x)).sqrt();
        let cdf = two_sample::posterior_delta_mass(&DeltaInterval::new(0.0, d).unwrap(), &g1, &g2, &prior).unwrap();
        ks = ks.max((cdf - (idx + 1) as f64 / n as f64).abs()).max((cdf - idx as f64 / n as f64).abs());
    }
    let ok = (rho_mass - 1.0).abs() <= 1e-6 && (delta_mass - 1.0).abs() <= 1e-6 && cov_worst <= 1e-10 && ks < 0.02;
    check(
        "9 posterior integrity",
        ok,
        format!("rho mass err {:.1e}, delta mass err {:.1e}, change-of-variables err {cov_worst:.1e}, KS = {ks:.4}", (rho_mass - 1.0).abs(), (delta_mass - 1.0).abs()),
        t0,
    );
}

/// 10. Determinism: identical seeds give byte-identical CLI reports.
#[test]
fn criterion_10_cli_determinism() {
    let t0 = Instant::now();
    let args = [
        "k", "--ns", "117,171,55", "--sds", "5.83,8.13,12.74", "--hyp", "1>2>3", "--hyp", "1=2=3",
        "--alpha", "0.5", "--seed", "42", "--chains", "2", "--warmup", "300", "--draws", "1000",
    ];
    let run = || Command::new(env!("CARGO_BIN_EXE_bfvar")).args(args).output().unwrap();
    let a = run();
    let b = run();
    let ok = a.status.success() && a.stdout == b.stdout;
    check("10 determinism", ok, format!("byte-identical reports: {}", a.stdout == b.stdout), t0);
}
