//! Closed-form marginal likelihoods, Bayes factors, and posterior densities
//! for two groups, with directional and interval-null variants and the 1939
//! Jeffreys comparator.
//!
//! Parameterization: rho = tau_1 / (tau_1 + tau_2) carries a Beta(alpha_1,
//! alpha_2) prior; the sd ratio is delta = sigma_2 / sigma_1 =
//! sqrt(rho / (1 - rho)). All marginal likelihoods share the convention
//! constant from the mean/precision integration, so it cancels in every
//! Bayes factor; raw log-ML values are convention-dependent.

use crate::error::{domain, Result};
use crate::hypotheses::GroupStats;
use crate::specfun::logquad::{log_integrate, LogIntegrand};
use crate::specfun::{self, lbeta, lgamma};

/// Shape parameters of the Beta prior on rho (symmetric default
/// alpha1 = alpha2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    alpha1: f64,
    alpha2: f64,
}

impl PriorSpec {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !alpha1.is_finite() || !alpha2.is_finite() || alpha1 <= 0.0 || alpha2 <= 0.0 {
            return Err(domain(format!("prior shapes must be finite and positive, got ({alpha1}, {alpha2})")));
        }
        Ok(PriorSpec { alpha1, alpha2 })
    }

    pub fn symmetric(alpha: f64) -> Result<Self> {
        PriorSpec::new(alpha, alpha)
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }

    /// Information consistency holds only for alpha <= 1/2; larger shapes
    /// are allowed but flagged by this predicate.
    pub fn is_information_consistent(&self) -> bool {
        self.alpha1 <= 0.5 && self.alpha2 <= 0.5
    }
}

/// How a Bayes factor was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ClosedForm,
    Quadrature,
    BridgeEncompassing,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed_form",
            Method::Quadrature => "quadrature",
            Method::BridgeEncompassing => "bridge_encompassing",
        }
    }
}

/// A log Bayes factor with its computation method and, for stochastic
/// methods, a Monte-Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesFactorResult {
    pub log_bf10: f64,
    pub method: Method,
    pub mc_se: Option<f64>,
}

/// A delta interval [lo, hi), hi may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaInterval {
    lo: f64,
    hi: f64,
}

impl DeltaInterval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0) || lo.is_nan() || hi.is_nan() || !(hi > lo) {
            return Err(domain(format!("delta interval requires 0 <= lo < hi, got [{lo}, {hi}]")));
        }
        Ok(DeltaInterval { lo, hi })
    }

    pub fn full() -> Self {
        DeltaInterval { lo: 0.0, hi: f64::INFINITY }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_full(&self) -> bool {
        self.lo == 0.0 && self.hi.is_infinite()
    }

    /// Image of the interval under rho = delta^2 / (1 + delta^2).
    pub fn rho_image(&self) -> (f64, f64) {
        (rho_of_delta(self.lo), rho_of_delta(self.hi))
    }
}

/// One side of a directed/interval comparison: a point sd ratio or an
/// interval carrying the truncated prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DeltaHypothesis {
    Point(f64),
    Interval(DeltaInterval),
}

pub(crate) fn rho_of_delta(d: f64) -> f64 {
    if d.is_infinite() {
        1.0
    } else {
        let d2 = d * d;
        d2 / (1.0 + d2)
    }
}

fn validate_pair(g1: &GroupStats, g2: &GroupStats) -> Result<()> {
    let n = g1.n() + g2.n();
    if n < 3 {
        return Err(domain(format!("total sample size must be at least 3, got {n}")));
    }
    if g1.ss() + g2.ss() <= 0.0 {
        return Err(domain("total sum of squares must be positive"));
    }
    // ss = 0 with n >= 2 sits at the information-consistency limit and is
    // not an evaluable point
    for (i, g) in [g1, g2].iter().enumerate() {
        if g.n() >= 2 && g.ss() == 0.0 {
            return Err(domain(format!("group {} has n >= 2 but zero sum of squares", i + 1)));
        }
    }
    Ok(())
}

/// Shared convention constant from integrating the means and the mean
/// precision: ((2-n)/2) ln(2 pi) + ln Gamma((n-2)/2) - (1/2) ln(n1 n2).
fn convention_constant(n1: u64, n2: u64) -> f64 {
    let n = (n1 + n2) as f64;
    (2.0 - n) / 2.0 * (2.0 * std::f64::consts::PI).ln() + lgamma((n - 2.0) / 2.0)
        - 0.5 * ((n1 as f64).ln() + (n2 as f64).ln())
}

/// Test-relevant log-likelihood h(d | rho) including the convention
/// constant; rho and 1 - rho are passed separately for endpoint accuracy.
pub(crate) fn log_h(rho: f64, one_minus_rho: f64, g1: &GroupStats, g2: &GroupStats) -> f64 {
    let n = (g1.n() + g2.n()) as f64;
    let q = rho * g1.ss() + one_minus_rho * g2.ss();
    convention_constant(g1.n(), g2.n())
        + (g1.n() as f64 - 1.0) / 2.0 * rho.ln()
        + (g2.n() as f64 - 1.0) / 2.0 * one_minus_rho.ln()
        + (2.0 - n) / 2.0 * q.ln()
}

/// Log marginal likelihood under H0 (equal variances).
pub fn log_ml_h0(g1: &GroupStats, g2: &GroupStats) -> Result<f64> {
    validate_pair(g1, g2)?;
    let n = (g1.n() + g2.n()) as f64;
    Ok(convention_constant(g1.n(), g2.n()) + (2.0 - n) / 2.0 * (g1.ss() + g2.ss()).ln())
}

/// ln of the rho integral
/// int_0^1 rho^(b-1) (1-rho)^(cb-1) (rho ss1 + (1-rho) ss2)^((2-n)/2) drho,
/// evaluated through the hypergeometric closed form in the label
/// orientation with ss1 <= ss2.
fn log_rho_integral(g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    let (n1, ss1, n2, ss2, a1, a2) = if g1.ss() > g2.ss() {
        (g2.n() as f64, g2.ss(), g1.n() as f64, g1.ss(), prior.alpha2, prior.alpha1)
    } else {
        (g1.n() as f64, g1.ss(), g2.n() as f64, g2.ss(), prior.alpha1, prior.alpha2)
    };
    let n = n1 + n2;
    let a = (n - 2.0) / 2.0;
    let b = (n1 - 1.0) / 2.0 + a1;
    let c = (n - 2.0) / 2.0 + a1 + a2;
    let z = 1.0 - ss1 / ss2;
    Ok(lbeta(b, (n2 - 1.0) / 2.0 + a2) + (2.0 - n) / 2.0 * ss2.ln() + specfun::log_2f1(a, b, c, z)?)
}

/// Log marginal likelihood under H1 (Beta(alpha1, alpha2) prior on rho).
pub fn log_ml_h1(g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    validate_pair(g1, g2)?;
    Ok(convention_constant(g1.n(), g2.n()) - lbeta(prior.alpha1, prior.alpha2)
        + log_rho_integral(g1, g2, prior)?)
}

/// Log Bayes factor of H1 (unequal variances) against H0.
///
/// The predictively matched sizes (1,1), (2,1), (1,2) return exactly 0.
pub fn log_bf10(g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<BayesFactorResult> {
    let sizes = (g1.n(), g2.n());
    if matches!(sizes, (1, 1) | (2, 1) | (1, 2)) {
        return Ok(BayesFactorResult { log_bf10: 0.0, method: Method::ClosedForm, mc_se: None });
    }
    let v = log_ml_h1(g1, g2, prior)? - log_ml_h0(g1, g2)?;
    Ok(BayesFactorResult { log_bf10: v, method: Method::ClosedForm, mc_se: None })
}

/// ln of the posterior normalizer: the rho integral above.
fn log_posterior_norm(g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    log_rho_integral(g1, g2, prior)
}

fn log_posterior_rho_unnorm(rho: f64, one_minus_rho: f64, g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> f64 {
    let n = (g1.n() + g2.n()) as f64;
    let b = (g1.n() as f64 - 1.0) / 2.0 + prior.alpha1;
    let cb = (g2.n() as f64 - 1.0) / 2.0 + prior.alpha2;
    let q = rho * g1.ss() + one_minus_rho * g2.ss();
    (b - 1.0) * rho.ln() + (cb - 1.0) * one_minus_rho.ln() + (2.0 - n) / 2.0 * q.ln()
}

/// Posterior density of rho (normalized).
pub fn posterior_rho_pdf(rho: f64, g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    validate_pair(g1, g2)?;
    if !(0.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(domain(format!("rho must lie in [0, 1], got {rho}")));
    }
    let b = (g1.n() as f64 - 1.0) / 2.0 + prior.alpha1;
    let cb = (g2.n() as f64 - 1.0) / 2.0 + prior.alpha2;
    if rho == 0.0 {
        return if b > 1.0 {
            Ok(0.0)
        } else if b == 1.0 {
            posterior_rho_pdf(f64::MIN_POSITIVE, g1, g2, prior)
        } else {
            Err(domain("posterior density of rho diverges at rho = 0"))
        };
    }
    if rho == 1.0 {
        return if cb > 1.0 {
            Ok(0.0)
        } else if cb == 1.0 {
            posterior_rho_pdf(1.0 - f64::EPSILON, g1, g2, prior)
        } else {
            Err(domain("posterior density of rho diverges at rho = 1"))
        };
    }
    let ln = log_posterior_rho_unnorm(rho, 1.0 - rho, g1, g2, prior) - log_posterior_norm(g1, g2, prior)?;
    Ok(ln.exp())
}

/// Posterior density of the sd ratio delta = sigma_2 / sigma_1 (normalized);
/// the change-of-variables image of the rho posterior.
pub fn posterior_delta_pdf(delta: f64, g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    validate_pair(g1, g2)?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(domain(format!("delta must be positive and finite, got {delta}")));
    }
    let n = (g1.n() + g2.n()) as f64;
    let b = (g1.n() as f64 - 1.0) / 2.0 + prior.alpha1;
    let asum = prior.alpha1 + prior.alpha2;
    let d2 = delta * delta;
    let ln = 2f64.ln() + (2.0 * b - 1.0) * delta.ln() - asum * d2.ln_1p()
        + (2.0 - n) / 2.0 * (d2 * g1.ss() + g2.ss()).ln()
        - log_posterior_norm(g1, g2, prior)?;
    Ok(ln.exp())
}

/// Joint posterior density of (rho, tau) where tau is the mean precision.
pub fn joint_posterior_pdf(rho: f64, tau: f64, g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    validate_pair(g1, g2)?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(domain(format!("rho must lie in (0, 1), got {rho}")));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(domain(format!("tau must be positive and finite, got {tau}")));
    }
    let n = (g1.n() + g2.n()) as f64;
    let b = (g1.n() as f64 - 1.0) / 2.0 + prior.alpha1;
    let cb = (g2.n() as f64 - 1.0) / 2.0 + prior.alpha2;
    let q = rho * g1.ss() + (1.0 - rho) * g2.ss();
    let ln = ((n - 2.0) / 2.0 - 1.0) * tau.ln() + (b - 1.0) * rho.ln() + (cb - 1.0) * (-rho).ln_1p()
        - tau * q
        - lgamma((n - 2.0) / 2.0)
        - log_posterior_norm(g1, g2, prior)?;
    Ok(ln.exp())
}

/// Truncated-prior log marginal likelihood of a delta hypothesis.
pub(crate) fn log_ml_delta_hypothesis(
    hyp: &DeltaHypothesis,
    g1: &GroupStats,
    g2: &GroupStats,
    prior: &PriorSpec,
) -> Result<f64> {
    match hyp {
        DeltaHypothesis::Point(d) => {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(domain(format!("point hypothesis requires finite delta > 0, got {d}")));
            }
            let d2 = d * d;
            let rho = d2 / (1.0 + d2);
            let omr = 1.0 / (1.0 + d2);
            Ok(log_h(rho, omr, g1, g2))
        }
        DeltaHypothesis::Interval(iv) => {
            let (rlo, rhi) = iv.rho_image();
            let (a1, a2) = (prior.alpha1, prior.alpha2);
            let mass = specfun::reg_inc_beta(rhi, a1, a2)? - specfun::reg_inc_beta(rlo, a1, a2)?;
            if mass <= 0.0 {
                return Err(domain(format!(
                    "prior mass of delta interval [{}, {}] is zero",
                    iv.lo, iv.hi
                )));
            }
            let e1 = (g1.n() as f64 - 1.0) / 2.0 + a1 - 1.0;
            let e2 = (g2.n() as f64 - 1.0) / 2.0 + a2 - 1.0;
            let v = log_rho_weighted_integral(g1, g2, e1, e2, rlo, rhi)?;
            Ok(v + convention_constant(g1.n(), g2.n()) - lbeta(a1, a2) - mass.ln())
        }
    }
}

/// Stationary point of rho^e1 (1-rho)^e2 (rho ss1 + (1-rho) ss2)^(-gamma)
/// inside (lo, hi), if any.
fn rho_peak(e1: f64, e2: f64, gamma: f64, ss1: f64, ss2: f64, lo: f64, hi: f64) -> Option<f64> {
    let d = ss1 - ss2;
    let qa = d * (gamma - e1 - e2);
    let qb = e1 * (d - ss2) - e2 * ss2 - gamma * d;
    let qc = e1 * ss2;
    let roots = crate::specfun::solve_quadratic(qa, qb, qc);
    roots.into_iter().find(|&r| r > lo && r < hi)
}

/// ln of int_{rlo}^{rhi} rho^e1 (1-rho)^e2 (rho ss1 + (1-rho) ss2)^((2-n)/2)
/// drho in log space, with the endpoint powers carried by the quadrature
/// weights when the interval touches 0 or 1.
fn log_rho_weighted_integral(
    g1: &GroupStats,
    g2: &GroupStats,
    e1: f64,
    e2: f64,
    rlo: f64,
    rhi: f64,
) -> Result<f64> {
    let n = (g1.n() + g2.n()) as f64;
    let (ss1, ss2) = (g1.ss(), g2.ss());
    let at_zero = rlo == 0.0;
    let at_one = rhi == 1.0;
    let f = move |x: f64, d_lo: f64, d_hi: f64| -> f64 {
        let rho = if at_zero { d_lo } else { x };
        let omr = if at_one { d_hi } else { 1.0 - x };
        if rho <= 0.0 || omr <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut v = (2.0 - n) / 2.0 * (rho * ss1 + omr * ss2).ln();
        if !at_zero {
            v += e1 * rho.ln();
        }
        if !at_one {
            v += e2 * omr.ln();
        }
        v
    };
    let gamma = (n - 2.0) / 2.0;
    let peak = rho_peak(e1, e2, gamma, ss1, ss2, rlo, rhi);
    log_integrate(
        &LogIntegrand {
            f: &f,
            left_pow: if at_zero { e1 + 1.0 } else { 1.0 },
            right_pow: if at_one { e2 + 1.0 } else { 1.0 },
            peak: peak.map(|p| (p, None)),
            noise: 1e-15 * (e1.abs() + e2.abs() + gamma),
        },
        rlo,
        rhi,
    )
}

/// Log Bayes factor between two delta hypotheses (numerator vs denominator),
/// each a point or an interval carrying the truncated Beta prior.
pub fn log_bf_directed(
    g1: &GroupStats,
    g2: &GroupStats,
    prior: &PriorSpec,
    numerator: &DeltaHypothesis,
    denominator: &DeltaHypothesis,
) -> Result<BayesFactorResult> {
    validate_pair(g1, g2)?;
    if let (DeltaHypothesis::Interval(a), DeltaHypothesis::Interval(b)) = (numerator, denominator) {
        // disjointness is required for proper interval-vs-interval tests;
        // a full-support side encodes the unconstrained model and is exempt
        if !a.is_full() && !b.is_full() {
            let overlap = a.lo.max(b.lo) < a.hi.min(b.hi);
            if overlap && a != b {
                return Err(domain("interval hypotheses overlap beyond endpoints"));
            }
        }
    }
    let num = log_ml_delta_hypothesis(numerator, g1, g2, prior)?;
    let den = log_ml_delta_hypothesis(denominator, g1, g2, prior)?;
    Ok(BayesFactorResult { log_bf10: num - den, method: Method::Quadrature, mc_se: None })
}

/// Jeffreys's 1939 approximate Bayes factor for the agreement of two
/// standard errors (BF in favour of equality), using unbiased sample sds.
pub fn jeffreys_bf01_1939(g1: &GroupStats, g2: &GroupStats) -> Result<f64> {
    if g1.n() < 2 || g2.n() < 2 || g1.ss() <= 0.0 || g2.ss() <= 0.0 {
        return Err(domain("jeffreys_bf01_1939 requires n >= 2 and ss > 0 in both groups"));
    }
    let (n1, n2) = (g1.n() as f64, g2.n() as f64);
    let s1 = (g1.ss() / (n1 - 1.0)).sqrt();
    let s2 = (g2.ss() / (n2 - 1.0)).sqrt();
    let z = (s1 / s2).ln();
    let nn = n1 + n2;
    let log_pref = 1.5 * (nn - 2.0).ln() - (2.0 * (std::f64::consts::PI * (n1 - 1.0) * (n2 - 1.0)).sqrt()).ln();
    Ok((log_pref + 2.0 * (n2 - n1) / (nn - 2.0) * z - (n1 - 1.0) * (n2 - 1.0) / (nn - 2.0) * z * z).exp())
}

/// Posterior mass P(delta in [lo, hi] | data) by quadrature of the rho
/// posterior.
pub fn posterior_delta_mass(iv: &DeltaInterval, g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    validate_pair(g1, g2)?;
    let (rlo, rhi) = iv.rho_image();
    if rlo >= rhi {
        return Ok(0.0);
    }
    let norm = log_posterior_norm(g1, g2, prior)?;
    let e1 = (g1.n() as f64 - 1.0) / 2.0 + prior.alpha1 - 1.0;
    let e2 = (g2.n() as f64 - 1.0) / 2.0 + prior.alpha2 - 1.0;
    let v = log_rho_weighted_integral(g1, g2, e1, e2, rlo, rhi)?;
    Ok((v - norm).exp().min(1.0))
}

/// Posterior summary of delta: mean (when integrable) and a central
/// credible interval found by bisection on the posterior CDF.
pub fn delta_posterior_summary(
    g1: &GroupStats,
    g2: &GroupStats,
    prior: &PriorSpec,
    level: f64,
) -> Result<DeltaSummary> {
    validate_pair(g1, g2)?;
    if !(0.0 < level && level < 1.0) {
        return Err(domain("credible level must lie in (0, 1)"));
    }
    let tail = 0.5 * (1.0 - level);
    let lo = delta_quantile(g1, g2, prior, tail)?;
    let hi = delta_quantile(g1, g2, prior, 1.0 - tail)?;
    let median = delta_quantile(g1, g2, prior, 0.5)?;
    // E[delta] = int sqrt(rho/(1-rho)) p(rho) drho, finite when the (1-rho)
    // exponent stays above -1 with margin
    let cb = (g2.n() as f64 - 1.0) / 2.0 + prior.alpha2;
    let mean = if cb > 0.55 {
        let norm = log_posterior_norm(g1, g2, prior)?;
        let e1 = (g1.n() as f64 - 1.0) / 2.0 + prior.alpha1 - 0.5;
        let e2 = cb - 1.5;
        let v = log_rho_weighted_integral(g1, g2, e1, e2, 0.0, 1.0)?;
        Some((v - norm).exp())
    } else {
        None
    };
    Ok(DeltaSummary { mean, median, ci_lo: lo, ci_hi: hi, level })
}

/// Posterior quantile of delta via bisection on the rho CDF.
fn delta_quantile(g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec, p: f64) -> Result<f64> {
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let mass = posterior_delta_mass(
            &DeltaInterval { lo: 0.0, hi: delta_of_rho(mid) },
            g1,
            g2,
            prior,
        )?;
        if mass < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(delta_of_rho(0.5 * (lo + hi)))
}

fn delta_of_rho(r: f64) -> f64 {
    if r >= 1.0 {
        f64::INFINITY
    } else {
        (r / (1.0 - r)).sqrt()
    }
}

/// Posterior summary of the sd ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaSummary {
    pub mean: Option<f64>,
    pub median: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub level: f64,
}
