//! Command line for default Bayes factor variance tests from summary
//! statistics or CSV data. Prints one JSON report per invocation.
//!
//! Exit codes: 0 success, 2 validation/parse errors, 3 numeric failures.

mod ingest;
mod plots;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bfvar::kgroups::{self, ChainConfig};
use bfvar::one_sample::{self, OneSampleProblem};
use bfvar::two_sample::{self, DeltaHypothesis, DeltaInterval};
use bfvar::verify;
use bfvar::{Error, GroupStats, HypothesisSpec, PriorSpec, SdConvention};

use report::*;

#[derive(Parser)]
#[command(
    name = "bfvar",
    about = "Default Bayes factors for testing the (in)equality of Gaussian population variances",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Seed for all stochastic computations
    #[arg(long, env = "BFVAR_SEED", default_value_t = 1729)]
    seed: u64,
    /// Convention converting a reported sd into a sum of squares
    #[arg(long, value_parser = parse_divisor, default_value = "n-1")]
    sd_divisor: SdConvention,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
    /// Emit prior/posterior density and alpha-sensitivity tables into this directory
    #[arg(long)]
    emit_plots: Option<PathBuf>,
    /// Number of grid points in the sensitivity table
    #[arg(long, default_value_t = 50)]
    sens_points: usize,
}

#[derive(Args, Clone)]
struct CsvOpts {
    /// Read raw observations from this CSV file instead of summary statistics
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Column holding the group label
    #[arg(long, default_value = "group")]
    group_col: String,
    /// Column holding the observation value
    #[arg(long, default_value = "value")]
    value_col: String,
}

#[derive(Subcommand)]
enum Command {
    /// Test one population variance against a reference value
    One {
        #[arg(long, required_unless_present = "csv")]
        n: Option<u64>,
        #[arg(long, required_unless_present = "csv")]
        sd: Option<f64>,
        /// Reference population standard deviation sigma_0
        #[arg(long)]
        popsd: f64,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Null hypothesis interval a,b on delta = sigma_0/sigma (default: point null delta = 1)
        #[arg(long, value_parser = parse_interval)]
        null_interval: Option<DeltaInterval>,
        /// Alternative hypothesis interval a,b on delta (default: unrestricted)
        #[arg(long, value_parser = parse_interval)]
        alt_interval: Option<DeltaInterval>,
        #[command(flatten)]
        csv_opts: CsvOpts,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compare the variances of two groups
    Two {
        #[arg(long, required_unless_present = "csv")]
        n1: Option<u64>,
        #[arg(long, required_unless_present = "csv")]
        sd1: Option<f64>,
        #[arg(long, required_unless_present = "csv")]
        n2: Option<u64>,
        #[arg(long, required_unless_present = "csv")]
        sd2: Option<f64>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        /// Null hypothesis interval a,b on delta = sigma_2/sigma_1 (default: point null delta = 1)
        #[arg(long, value_parser = parse_interval)]
        null_interval: Option<DeltaInterval>,
        /// Alternative hypothesis interval a,b on delta (default: unrestricted)
        #[arg(long, value_parser = parse_interval)]
        alt_interval: Option<DeltaInterval>,
        #[command(flatten)]
        csv_opts: CsvOpts,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Compare constraint hypotheses over K groups
    K {
        /// Comma-separated group sizes
        #[arg(long, value_delimiter = ',', required_unless_present = "csv")]
        ns: Option<Vec<u64>>,
        /// Comma-separated group standard deviations
        #[arg(long, value_delimiter = ',', required_unless_present = "csv")]
        sds: Option<Vec<f64>>,
        /// Hypothesis strings like "1=2=3", "1,2,3", "1>2>3" (repeatable)
        #[arg(long = "hyp", required = true)]
        hyps: Vec<String>,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        chains: usize,
        #[arg(long, default_value_t = 1000)]
        warmup: usize,
        /// Post-warmup draws per chain
        #[arg(long, default_value_t = 5000)]
        draws: usize,
        #[command(flatten)]
        csv_opts: CsvOpts,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve for the prior shape alpha attaining a delta-interval probability
    Elicit {
        /// Target interval a,b on the sd ratio delta
        #[arg(long, value_parser = parse_interval)]
        interval: DeltaInterval,
        /// Target probability of the interval
        #[arg(long)]
        prob: f64,
        /// Truncate the prior to this interval first
        #[arg(long, value_parser = parse_interval)]
        truncate: Option<DeltaInterval>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run the oracle and desiderata verification suite
    #[command(hide = true)]
    Verify {
        #[arg(long, env = "BFVAR_SEED", default_value_t = 1729)]
        seed: u64,
    },
}

fn parse_interval(s: &str) -> Result<DeltaInterval, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected 'lo,hi', got '{s}'"));
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| format!("bad lower bound '{}'", parts[0]))?;
    let hi_raw = parts[1].trim();
    let hi: f64 = if hi_raw.eq_ignore_ascii_case("inf") || hi_raw.eq_ignore_ascii_case("infinity") {
        f64::INFINITY
    } else {
        hi_raw.parse().map_err(|_| format!("bad upper bound '{hi_raw}'"))?
    };
    DeltaInterval::new(lo, hi).map_err(|e| e.to_string())
}

fn parse_divisor(s: &str) -> Result<SdConvention, String> {
    match s {
        "n-1" => Ok(SdConvention::Unbiased),
        "n" => Ok(SdConvention::Mle),
        other => Err(format!("expected 'n-1' or 'n', got '{other}'")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            let (kind, code) = match err.downcast_ref::<Error>() {
                Some(Error::Numeric(_)) => ("numeric", 3u8),
                Some(Error::Domain(_)) => ("domain", 2),
                Some(Error::Parse { .. }) => ("parse", 2),
                Some(Error::Validation(_)) => ("validation", 2),
                None => ("other", 2),
            };
            let obj = ErrorObject { error: ErrorBody { kind, message: err.to_string() } };
            println!("{}", serde_json::to_string_pretty(&obj).expect("error object serializes"));
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::One { n, sd, popsd, alpha, null_interval, alt_interval, csv_opts, common } => {
            let (labels, stats) = load_groups(&csv_opts, 1, || {
                Ok(vec![GroupStats::from_sd(n.unwrap(), sd.unwrap(), common.sd_divisor)?])
            })?;
            if !(popsd.is_finite() && popsd > 0.0) {
                return Err(Error::Domain(format!("popsd must be positive, got {popsd}")).into());
            }
            let problem = OneSampleProblem::new(stats[0].n(), stats[0].ss(), 1.0 / (popsd * popsd))?;
            let null = null_interval.map_or(DeltaHypothesis::Point(1.0), DeltaHypothesis::Interval);
            let alt = alt_interval.map_or(
                DeltaHypothesis::Interval(DeltaInterval::full()),
                DeltaHypothesis::Interval,
            );
            // the untruncated point-null case has the Tricomi closed form;
            // anything else goes through quadrature
            let r = match (&null, &alt) {
                (DeltaHypothesis::Point(p), DeltaHypothesis::Interval(iv)) if *p == 1.0 && iv.is_full() => {
                    one_sample::log_bf10_one(&problem, alpha)?
                }
                _ => one_sample::log_bf_directed_one(&problem, alpha, &null, &alt)?,
            };
            let summary = one_sample::delta_posterior_summary_one(&problem, alpha, 0.95)?;
            if let Some(dir) = &common.emit_plots {
                plots::emit_one(dir, &problem, alpha, common.sens_points)?;
            }
            let report = Report {
                schema_version: SCHEMA_VERSION,
                kind: "one",
                seed: common.seed,
                alpha: alpha_info(&PriorSpec::symmetric(alpha)?),
                groups: group_infos(&labels, &stats),
                hypotheses: None,
                results: vec![BfRow {
                    numerator: describe_delta(&alt),
                    denominator: describe_delta(&null),
                    log_bf: r.log_bf10,
                    bf: bf_value(r.log_bf10),
                    mc_se: r.mc_se,
                    method: r.method.as_str(),
                }],
                posterior: Some(PosteriorInfo {
                    delta: Some(DeltaInfo {
                        definition: "sigma_0 / sigma",
                        mean: summary.mean,
                        median: summary.median,
                        ci_lo: summary.ci_lo,
                        ci_hi: summary.ci_hi,
                        level: summary.level,
                    }),
                    pairwise_delta: None,
                }),
                diagnostics: None,
            };
            finish(&common.output, &report)
        }
        Command::Two { n1, sd1, n2, sd2, alpha, null_interval, alt_interval, csv_opts, common } => {
            let (labels, stats) = load_groups(&csv_opts, 2, || {
                Ok(vec![
                    GroupStats::from_sd(n1.unwrap(), sd1.unwrap(), common.sd_divisor)?,
                    GroupStats::from_sd(n2.unwrap(), sd2.unwrap(), common.sd_divisor)?,
                ])
            })?;
            let prior = PriorSpec::symmetric(alpha)?;
            let (g1, g2) = (&stats[0], &stats[1]);
            let (r, num_label, den_label) = match (&null_interval, &alt_interval) {
                (None, None) => (
                    two_sample::log_bf10(g1, g2, &prior)?,
                    "delta in (0, inf)".to_string(),
                    "delta = 1".to_string(),
                ),
                (null, alt) => {
                    let null = null.map_or(DeltaHypothesis::Point(1.0), DeltaHypothesis::Interval);
                    let alt = alt.map_or(
                        DeltaHypothesis::Interval(DeltaInterval::full()),
                        DeltaHypothesis::Interval,
                    );
                    (
                        two_sample::log_bf_directed(g1, g2, &prior, &alt, &null)?,
                        describe_delta(&alt),
                        describe_delta(&null),
                    )
                }
            };
            let summary = two_sample::delta_posterior_summary(g1, g2, &prior, 0.95)?;
            if let Some(dir) = &common.emit_plots {
                plots::emit_two(dir, g1, g2, &prior, common.sens_points)?;
            }
            let report = Report {
                schema_version: SCHEMA_VERSION,
                kind: "two",
                seed: common.seed,
                alpha: alpha_info(&prior),
                groups: group_infos(&labels, &stats),
                hypotheses: None,
                results: vec![BfRow {
                    numerator: num_label,
                    denominator: den_label,
                    log_bf: r.log_bf10,
                    bf: bf_value(r.log_bf10),
                    mc_se: r.mc_se,
                    method: r.method.as_str(),
                }],
                posterior: Some(PosteriorInfo {
                    delta: Some(DeltaInfo {
                        definition: "sigma_2 / sigma_1",
                        mean: summary.mean,
                        median: summary.median,
                        ci_lo: summary.ci_lo,
                        ci_hi: summary.ci_hi,
                        level: summary.level,
                    }),
                    pairwise_delta: None,
                }),
                diagnostics: None,
            };
            finish(&common.output, &report)
        }
        Command::K { ns, sds, hyps, alpha, chains, warmup, draws, csv_opts, common } => {
            let (labels, stats) = load_groups(&csv_opts, 0, || {
                let ns = ns.as_ref().unwrap();
                let sds = sds.as_ref().unwrap();
                if ns.len() != sds.len() {
                    return Err(Error::Validation(format!(
                        "--ns has {} entries but --sds has {}",
                        ns.len(),
                        sds.len()
                    )));
                }
                ns.iter()
                    .zip(sds.iter())
                    .map(|(&n, &sd)| GroupStats::from_sd(n, sd, common.sd_divisor))
                    .collect()
            })?;
            let k = stats.len();
            if k < 2 {
                return Err(Error::Validation("K-group analysis needs at least two groups".into()).into());
            }
            if common.emit_plots.is_some() {
                return Err(Error::Validation(
                    "--emit-plots is available for the one- and two-sample commands".into(),
                )
                .into());
            }
            let specs: Vec<HypothesisSpec> =
                hyps.iter().map(|h| HypothesisSpec::parse(h, k)).collect::<Result<_, _>>()?;
            let config = ChainConfig { chains, warmup, draws_per_chain: draws };
            // one ML per hypothesis on its own deterministic seed stream
            let mut infos = Vec::with_capacity(specs.len());
            let mut mls = Vec::with_capacity(specs.len());
            for (i, spec) in specs.iter().enumerate() {
                let seed_i = common.seed.wrapping_add((i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
                let ml = kgroups::log_ml_hypothesis(spec, &stats, alpha, &config, seed_i)?;
                infos.push(HypothesisInfo {
                    text: hyps[i].clone(),
                    log_ml: ml.log_ml,
                    mc_se: ml.stochastic.then_some(ml.se),
                    stochastic: ml.stochastic,
                    budget_flagged: ml.budget_flagged,
                });
                mls.push(ml);
            }
            let mut results = Vec::new();
            for i in 0..specs.len() {
                for j in (i + 1)..specs.len() {
                    let log_bf = mls[i].log_ml - mls[j].log_ml;
                    let stochastic = mls[i].stochastic || mls[j].stochastic;
                    results.push(BfRow {
                        numerator: hyps[i].clone(),
                        denominator: hyps[j].clone(),
                        log_bf,
                        bf: bf_value(log_bf),
                        mc_se: stochastic
                            .then(|| (mls[i].se * mls[i].se + mls[j].se * mls[j].se).sqrt()),
                        method: if stochastic { "bridge_encompassing" } else { "closed_form" },
                    });
                }
            }
            // pairwise posterior summaries under the unconstrained model
            let free = kgroups::sample_posterior(
                &stats,
                alpha,
                &config,
                common.seed.wrapping_add(0x5ca1_ab1e),
            )?;
            let pairs = kgroups::pairwise_delta_summaries(&free, 0.95)?
                .into_iter()
                .map(|p| PairInfo {
                    group_i: p.i + 1,
                    group_j: p.j + 1,
                    mean: p.mean,
                    ci_lo: p.ci_lo,
                    ci_hi: p.ci_hi,
                    p_delta_gt_1: p.p_gt_1,
                })
                .collect();
            let report = Report {
                schema_version: SCHEMA_VERSION,
                kind: "k",
                seed: common.seed,
                alpha: alpha_info(&PriorSpec::symmetric(alpha)?),
                groups: group_infos(&labels, &stats),
                hypotheses: Some(infos),
                results,
                posterior: Some(PosteriorInfo { delta: None, pairwise_delta: Some(pairs) }),
                diagnostics: Some(Diagnostics {
                    chains,
                    draws: free.draws().len(),
                    acceptance_rate: free.acceptance_rate(),
                    ess_min: free.ess_min(),
                    flagged: free.flagged(),
                }),
            };
            finish(&common.output, &report)
        }
        Command::Elicit { interval, prob, truncate, output } => {
            let target = bfvar::elicitation::ElicitationTarget::new(interval, prob, truncate)?;
            let alpha = bfvar::elicitation::solve_alpha(&target)?;
            let achieved = bfvar::elicitation::delta_interval_prob(&interval, alpha, truncate.as_ref())?;
            let obj = serde_json::json!({
                "schema_version": SCHEMA_VERSION,
                "kind": "elicit",
                "interval": [interval.lo(), interval.hi()],
                "prob": prob,
                "truncation": truncate.map(|t| vec![t.lo(), t.hi()]),
                "alpha": alpha,
                "achieved_prob": achieved,
            });
            write_json(&output, &obj)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { seed } => {
            let report = verify::desiderata_suite(seed)?;
            print!("{report}");
            if report.all_passed() {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(3))
            }
        }
    }
}

fn load_groups(
    csv_opts: &CsvOpts,
    expect: usize,
    fallback: impl FnOnce() -> Result<Vec<GroupStats>, Error>,
) -> anyhow::Result<(Vec<String>, Vec<GroupStats>)> {
    match &csv_opts.csv {
        Some(path) => {
            let ing = ingest::ingest_csv(
                path.to_str().ok_or_else(|| Error::Validation("non-UTF-8 path".into()))?,
                &csv_opts.group_col,
                &csv_opts.value_col,
            )?;
            if expect != 0 && ing.stats.len() != expect {
                return Err(Error::Validation(format!(
                    "expected {expect} group(s) in the CSV, found {} ({:?})",
                    ing.stats.len(),
                    ing.labels
                ))
                .into());
            }
            Ok((ing.labels, ing.stats))
        }
        None => {
            let stats = fallback()?;
            let labels = (1..=stats.len()).map(|i| i.to_string()).collect();
            Ok((labels, stats))
        }
    }
}

fn alpha_info(prior: &PriorSpec) -> AlphaInfo {
    AlphaInfo {
        alpha1: prior.alpha1(),
        alpha2: prior.alpha2(),
        information_consistent: prior.is_information_consistent(),
    }
}

fn group_infos(labels: &[String], stats: &[GroupStats]) -> Vec<GroupInfo> {
    labels
        .iter()
        .zip(stats.iter())
        .map(|(label, g)| GroupInfo {
            label: label.clone(),
            n: g.n(),
            ss: g.ss(),
            sd_unbiased: (g.n() > 1).then(|| (g.ss() / (g.n() as f64 - 1.0)).sqrt()),
        })
        .collect()
}

fn describe_delta(h: &DeltaHypothesis) -> String {
    match h {
        DeltaHypothesis::Point(d) => format!("delta = {d}"),
        DeltaHypothesis::Interval(iv) => {
            if iv.is_full() {
                "delta in (0, inf)".to_string()
            } else if iv.hi().is_infinite() {
                format!("delta in [{}, inf)", iv.lo())
            } else {
                format!("delta in [{}, {}]", iv.lo(), iv.hi())
            }
        }
    }
}

fn finish(output: &Option<PathBuf>, report: &Report) -> anyhow::Result<ExitCode> {
    let value = serde_json::to_value(report)?;
    write_json(&output.clone(), &value)?;
    Ok(ExitCode::SUCCESS)
}

fn write_json(output: &Option<PathBuf>, value: &serde_json::Value) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match output {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}
