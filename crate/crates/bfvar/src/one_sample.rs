//! Testing one population variance against a fixed reference value, as the
//! n2 -> infinity limit of the two-sample test.
//!
//! Parameterization: xi = tau / tau0 carries a BetaPrime(alpha, alpha)
//! prior; the sd ratio is delta = sigma0 / sigma = sqrt(xi), so delta > 1
//! means the sampled population is more precise than the reference. The
//! point Bayes factor is closed-form through Tricomi's U with
//! a = (n-1)/2 + alpha, b = (n-1)/2 - alpha + 1, z = tau0 ss / 2 (the
//! arguments produced by the limit derivation); directional and interval
//! variants integrate the same integrand under a truncated prior.

use crate::error::{domain, Result};
use crate::specfun::logquad::{log_integrate, LogIntegrand};
use crate::specfun::{self, lbeta, lgamma};
use crate::two_sample::{BayesFactorResult, DeltaHypothesis, Method};

/// One-sample problem: sample size, sum of squared deviations, and the
/// reference precision tau0 = 1 / sigma0^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSampleProblem {
    n: u64,
    ss: f64,
    tau0: f64,
}

impl OneSampleProblem {
    pub fn new(n: u64, ss: f64, tau0: f64) -> Result<Self> {
        if n < 1 {
            return Err(domain("OneSampleProblem requires n >= 1"));
        }
        if !ss.is_finite() || ss < 0.0 {
            return Err(domain(format!("ss must be finite and >= 0, got {ss}")));
        }
        if n == 1 && ss != 0.0 {
            return Err(domain("a single observation has zero sum of squares"));
        }
        if !tau0.is_finite() || tau0 <= 0.0 {
            return Err(domain(format!("tau0 must be finite and positive, got {tau0}")));
        }
        Ok(OneSampleProblem { n, ss, tau0 })
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn ss(&self) -> f64 {
        self.ss
    }

    pub fn tau0(&self) -> f64 {
        self.tau0
    }

    fn validate_informative(&self) -> Result<()> {
        if self.n >= 2 && self.ss == 0.0 {
            return Err(domain("n >= 2 with zero sum of squares is degenerate"));
        }
        Ok(())
    }

    /// z = tau0 * ss / 2, the exponential rate in xi = tau/tau0 coordinates.
    fn z(&self) -> f64 {
        0.5 * self.tau0 * self.ss
    }

    /// Log-likelihood factor ell(xi) = xi^((n-1)/2) exp(-z xi), normalized so
    /// that Bayes factors against the point xi = 1 need no extra constants.
    fn log_ell(&self, xi: f64) -> f64 {
        (self.n as f64 - 1.0) / 2.0 * xi.ln() - self.z() * xi
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(domain(format!("alpha must be finite and positive, got {alpha}")));
    }
    Ok(())
}

/// Log Bayes factor of the unrestricted alternative against the point null
/// tau = tau0, via Tricomi's U. Predictively matched: n = 1 returns 0.
pub fn log_bf10_one(problem: &OneSampleProblem, alpha: f64) -> Result<BayesFactorResult> {
    check_alpha(alpha)?;
    if problem.n == 1 {
        return Ok(BayesFactorResult { log_bf10: 0.0, method: Method::ClosedForm, mc_se: None });
    }
    problem.validate_informative()?;
    let nf = problem.n as f64;
    let a = (nf - 1.0) / 2.0 + alpha;
    let b = (nf - 1.0) / 2.0 - alpha + 1.0;
    let z = problem.z();
    let v = lgamma(a) + specfun::log_tricomi_u(a, b, z)? + z - lbeta(alpha, alpha);
    Ok(BayesFactorResult { log_bf10: v, method: Method::ClosedForm, mc_se: None })
}

/// Truncated-prior log marginal likelihood (relative to the shared constant)
/// of a delta hypothesis, delta = sigma0 / sigma.
pub(crate) fn log_ml_delta_hypothesis_one(
    hyp: &DeltaHypothesis,
    problem: &OneSampleProblem,
    alpha: f64,
) -> Result<f64> {
    match hyp {
        DeltaHypothesis::Point(d) => {
            if !(*d > 0.0) || !d.is_finite() {
                return Err(domain(format!("point hypothesis requires finite delta > 0, got {d}")));
            }
            Ok(problem.log_ell(d * d))
        }
        DeltaHypothesis::Interval(iv) => {
            // rho = xi / (1 + xi) = delta^2 / (1 + delta^2) maps the xi
            // integral onto (0, 1); the prior becomes Beta(alpha, alpha)
            let (rlo, rhi) = iv.rho_image();
            let mass = specfun::reg_inc_beta(rhi, alpha, alpha)? - specfun::reg_inc_beta(rlo, alpha, alpha)?;
            if mass <= 0.0 {
                return Err(domain(format!("prior mass of delta interval [{}, {}] is zero", iv.lo(), iv.hi())));
            }
            let df = problem.n as f64 - 1.0;
            let z = problem.z();
            let e1 = alpha - 1.0 + df / 2.0;
            let e2 = alpha - 1.0 - df / 2.0;
            let v = log_xi_weighted_integral(e1, e2, z, rlo, rhi.min(1.0))?;
            Ok(v - lbeta(alpha, alpha) - mass.ln())
        }
    }
}

/// Log Bayes factor of an alternative delta hypothesis against a null delta
/// hypothesis under truncated priors (alternative in the numerator).
pub fn log_bf_directed_one(
    problem: &OneSampleProblem,
    alpha: f64,
    null_hypothesis: &DeltaHypothesis,
    alt_hypothesis: &DeltaHypothesis,
) -> Result<BayesFactorResult> {
    check_alpha(alpha)?;
    if problem.n == 1 {
        return Ok(BayesFactorResult { log_bf10: 0.0, method: Method::Quadrature, mc_se: None });
    }
    problem.validate_informative()?;
    let num = log_ml_delta_hypothesis_one(alt_hypothesis, problem, alpha)?;
    let den = log_ml_delta_hypothesis_one(null_hypothesis, problem, alpha)?;
    Ok(BayesFactorResult { log_bf10: num - den, method: Method::Quadrature, mc_se: None })
}

/// ln of int_{rlo}^{rhi} r^e1 (1-r)^e2 exp(-z r/(1-r)) dr: the xi integral
/// mapped to rho = xi/(1+xi), with the rho power in the quadrature weight
/// when the interval starts at 0 and the exact distance to 1 feeding the
/// exponential rate.
fn log_xi_weighted_integral(e1: f64, e2: f64, z: f64, rlo: f64, rhi: f64) -> Result<f64> {
    let at_zero = rlo == 0.0;
    let at_one = rhi == 1.0;
    let f = move |x: f64, d_lo: f64, d_hi: f64| -> f64 {
        let rho = if at_zero { d_lo } else { x };
        // the exponential kills the right endpoint; when the interval stops
        // short of 1, the distance to 1 is just 1 - x
        let omr = if at_one { d_hi } else { 1.0 - x };
        if rho <= 0.0 || omr <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut v = e2 * omr.ln() - z * rho / omr;
        if !at_zero {
            v += e1 * rho.ln();
        }
        v
    };
    // stationary point: e1 (1-r)^2 - e2 r (1-r) - z r = 0
    let peak = specfun::solve_quadratic(e1 + e2, -2.0 * e1 - e2 - z, e1)
        .into_iter()
        .find(|&r| r > rlo && r < rhi);
    log_integrate(
        &LogIntegrand {
            f: &f,
            left_pow: if at_zero { e1 + 1.0 } else { 1.0 },
            right_pow: 1.0,
            peak: peak.map(|p| (p, None)),
            noise: 1e-15 * (e1.abs() + e2.abs() + z + 1.0),
        },
        rlo,
        rhi,
    )
}

fn log_posterior_norm_one(problem: &OneSampleProblem, alpha: f64) -> Result<f64> {
    log_ml_delta_hypothesis_one(
        &DeltaHypothesis::Interval(crate::two_sample::DeltaInterval::full()),
        problem,
        alpha,
    )
}

/// Posterior density of delta = sigma0 / sigma (normalized by quadrature).
pub fn posterior_delta_pdf_one(delta: f64, problem: &OneSampleProblem, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    problem.validate_informative()?;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(domain(format!("delta must be positive and finite, got {delta}")));
    }
    if problem.n == 1 {
        return Err(domain("posterior of delta requires n >= 2"));
    }
    let xi = delta * delta;
    // prior density in xi times likelihood, pushed forward to delta
    let log_prior_xi = (alpha - 1.0) * xi.ln() - 2.0 * alpha * xi.ln_1p() - lbeta(alpha, alpha);
    let ln = (2.0 * delta).ln() + log_prior_xi + problem.log_ell(xi) - log_posterior_norm_one(problem, alpha)?;
    Ok(ln.exp())
}

/// Posterior mass P(delta in [lo, hi] | data).
pub fn posterior_delta_mass_one(
    iv: &crate::two_sample::DeltaInterval,
    problem: &OneSampleProblem,
    alpha: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    problem.validate_informative()?;
    let num = log_ml_delta_hypothesis_one(&DeltaHypothesis::Interval(*iv), problem, alpha)?;
    let den = log_posterior_norm_one(problem, alpha)?;
    let (rlo, rhi) = iv.rho_image();
    let mass_prior = specfun::reg_inc_beta(rhi, alpha, alpha)? - specfun::reg_inc_beta(rlo, alpha, alpha)?;
    // ml_interval = int over interval / prior mass, so undo the conditioning
    Ok(((num + mass_prior.ln()) - den).exp().min(1.0))
}

/// Posterior summary of delta = sigma0 / sigma.
pub fn delta_posterior_summary_one(
    problem: &OneSampleProblem,
    alpha: f64,
    level: f64,
) -> Result<crate::two_sample::DeltaSummary> {
    check_alpha(alpha)?;
    problem.validate_informative()?;
    if !(0.0 < level && level < 1.0) {
        return Err(domain("credible level must lie in (0, 1)"));
    }
    let tail = 0.5 * (1.0 - level);
    let q = |p: f64| -> Result<f64> {
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let d = (mid / (1.0 - mid)).sqrt();
            let mass = posterior_delta_mass_one(
                &crate::two_sample::DeltaInterval::new(0.0, d)?,
                problem,
                alpha,
            )?;
            if mass < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        Ok((r / (1.0 - r)).sqrt())
    };
    let ci_lo = q(tail)?;
    let ci_hi = q(1.0 - tail)?;
    let median = q(0.5)?;
    // E[delta]: xi^((n-1)/2 + alpha - 1/2) tail at infinity decays like
    // xi^(-alpha - 1/2) e^(-z xi); always integrable for z > 0
    let norm = log_posterior_norm_one(problem, alpha)?;
    let df = problem.n as f64 - 1.0;
    let z = problem.z();
    let e1 = alpha - 0.5 + df / 2.0;
    let e2 = alpha - 1.5 - df / 2.0;
    let v = log_xi_weighted_integral(e1, e2, z, 0.0, 1.0)?;
    let mean = Some((v - lbeta(alpha, alpha) - norm).exp());
    Ok(crate::two_sample::DeltaSummary { mean, median, ci_lo, ci_hi, level })
}

#[cfg(test)]
mod tests;
