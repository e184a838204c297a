//! Plot-data emission: plain tab-separated (x, y) tables for prior and
//! posterior densities of delta plus a log-spaced alpha sensitivity table.
//! No rendering.

use std::io::Write;
use std::path::Path;

use bfvar::one_sample::{self, OneSampleProblem};
use bfvar::specfun::reg_inc_beta;
use bfvar::two_sample;
use bfvar::{GroupStats, PriorSpec};

pub const SENS_LO: f64 = 0.5;
pub const SENS_HI: f64 = 100.0;

fn write_table(dir: &Path, name: &str, header: &str, rows: &[(f64, f64)]) -> anyhow::Result<()> {
    let mut f = std::fs::File::create(dir.join(name))?;
    writeln!(f, "{header}")?;
    for (x, y) in rows {
        writeln!(f, "{x}\t{y}")?;
    }
    Ok(())
}

/// Prior density of delta = sigma_2/sigma_1 under Beta(a1, a2) on rho.
fn prior_delta_pdf(d: f64, a1: f64, a2: f64) -> f64 {
    let lb = bfvar::specfun::log_beta(a1, a2).expect("valid alphas");
    (2f64.ln() + (2.0 * a1 - 1.0) * d.ln() - (a1 + a2) * (d * d).ln_1p() - lb).exp()
}

/// Prior quantile of delta by bisection on the rho CDF.
fn prior_delta_quantile(p: f64, a1: f64, a2: f64) -> f64 {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if reg_inc_beta(mid, a1, a2).expect("valid") < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = 0.5 * (lo + hi);
    (r / (1.0 - r)).sqrt()
}

fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (llo, lhi) = (lo.ln(), hi.ln());
    (0..n).map(|i| (llo + (lhi - llo) * i as f64 / (n - 1) as f64).exp()).collect()
}

pub fn emit_two(
    dir: &Path,
    g1: &GroupStats,
    g2: &GroupStats,
    prior: &PriorSpec,
    sens_points: usize,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let (a1, a2) = (prior.alpha1(), prior.alpha2());
    // delta grid covering essentially all prior and posterior mass
    let s = two_sample::delta_posterior_summary(g1, g2, prior, 0.9995)?;
    let lo = prior_delta_quantile(2.5e-4, a1, a2).min(s.ci_lo);
    let hi = prior_delta_quantile(1.0 - 2.5e-4, a1, a2).max(s.ci_hi);
    let grid = log_spaced(lo, hi, 1001);
    let prior_rows: Vec<(f64, f64)> = grid.iter().map(|&d| (d, prior_delta_pdf(d, a1, a2))).collect();
    write_table(dir, "prior_delta.tsv", "delta\tdensity", &prior_rows)?;
    let post_rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&d| Ok((d, two_sample::posterior_delta_pdf(d, g1, g2, prior)?)))
        .collect::<Result<_, bfvar::Error>>()?;
    write_table(dir, "posterior_delta.tsv", "delta\tdensity", &post_rows)?;
    let sens: Vec<(f64, f64)> = log_spaced(SENS_LO, SENS_HI, sens_points.max(2))
        .into_iter()
        .map(|a| {
            let p = PriorSpec::symmetric(a)?;
            Ok((a, two_sample::log_bf10(g1, g2, &p)?.log_bf10))
        })
        .collect::<Result<_, bfvar::Error>>()?;
    write_table(dir, "sensitivity.tsv", "alpha\tlog_bf10", &sens)?;
    Ok(())
}

pub fn emit_one(
    dir: &Path,
    problem: &OneSampleProblem,
    alpha: f64,
    sens_points: usize,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let s = one_sample::delta_posterior_summary_one(problem, alpha, 0.9995)?;
    let lo = prior_delta_quantile(2.5e-4, alpha, alpha).min(s.ci_lo);
    let hi = prior_delta_quantile(1.0 - 2.5e-4, alpha, alpha).max(s.ci_hi);
    let grid = log_spaced(lo, hi, 1001);
    let prior_rows: Vec<(f64, f64)> = grid.iter().map(|&d| (d, prior_delta_pdf(d, alpha, alpha))).collect();
    write_table(dir, "prior_delta.tsv", "delta\tdensity", &prior_rows)?;
    let post_rows: Vec<(f64, f64)> = grid
        .iter()
        .map(|&d| Ok((d, one_sample::posterior_delta_pdf_one(d, problem, alpha)?)))
        .collect::<Result<_, bfvar::Error>>()?;
    write_table(dir, "posterior_delta.tsv", "delta\tdensity", &post_rows)?;
    let sens: Vec<(f64, f64)> = log_spaced(SENS_LO, SENS_HI, sens_points.max(2))
        .into_iter()
        .map(|a| Ok((a, one_sample::log_bf10_one(problem, a)?.log_bf10)))
        .collect::<Result<_, bfvar::Error>>()?;
    write_table(dir, "sensitivity.tsv", "alpha\tlog_bf10", &sens)?;
    Ok(())
}
