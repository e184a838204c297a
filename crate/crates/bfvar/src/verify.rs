//! Independent oracles and the desiderata simulation harness.
//!
//! The quadrature oracles here deliberately avoid the code paths they
//! arbitrate: the integrands are recoded from the marginal-likelihood
//! definitions and integrated with an adaptive Simpson rule in log scale
//! (the library's own evaluators use Gauss-Legendre panels and the
//! hypergeometric closed forms).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, numeric, Result};
use crate::hypotheses::GroupStats;
use crate::kgroups;
use crate::one_sample::{self, OneSampleProblem};
use crate::specfun::lgamma;
use crate::two_sample::{self, PriorSpec};

/// Scenario for the simulation-based consistency checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationScenario {
    pub k: usize,
    pub taus: Vec<f64>,
    pub ns: Vec<u64>,
    pub replications: u32,
    pub seed: u64,
}

impl SimulationScenario {
    pub fn new(taus: Vec<f64>, ns: Vec<u64>, replications: u32, seed: u64) -> Result<Self> {
        if taus.len() != ns.len() || taus.is_empty() {
            return Err(domain("taus and ns must be nonempty and of equal length"));
        }
        if taus.iter().any(|t| !(*t > 0.0)) {
            return Err(domain("precisions must be positive"));
        }
        if replications < 1 {
            return Err(domain("need at least one replication"));
        }
        Ok(SimulationScenario { k: taus.len(), taus, ns, replications, seed })
    }
}

// ---------------------------------------------------------------------------
// independent log-space adaptive Simpson integration

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// ln of (h/6)(fa + 4 fm + fb) given log values.
fn log_simpson_piece(h: f64, la: f64, lm: f64, lb: f64) -> f64 {
    let m = la.max(lm + 4f64.ln()).max(lb);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + ((la - m).exp() + 4.0 * (lm - m).exp() + (lb - m).exp()).ln() + (h / 6.0).ln()
}

fn simpson_rec(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    la: f64,
    lm: f64,
    lb: f64,
    whole: f64,
    g_scale: f64,
    depth: usize,
    budget: &mut usize,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let lml = f(0.5 * (a + m));
    let lmr = f(0.5 * (m + b));
    let left = log_simpson_piece(m - a, la, lml, lm);
    let right = log_simpson_piece(b - m, lm, lmr, lb);
    let sum = log_add(left, right);
    // error is judged against the global integral scale: negligible pieces
    // and pieces whose absolute error cannot move the total are accepted
    let close = if sum == f64::NEG_INFINITY || sum < g_scale - 45.0 {
        true
    } else {
        let rel = if whole == f64::NEG_INFINITY { 1.0 } else { (sum - whole).exp_m1().abs() };
        rel * (sum - g_scale).exp() < 1e-12
    };
    if close {
        return Ok(sum);
    }
    if depth == 0 || *budget == 0 {
        return Err(numeric(format!(
            "adaptive Simpson recursion exhausted (depth {depth}, budget {budget}, [{a}, {b}], sum {sum}, whole {whole})"
        )));
    }
    *budget -= 1;
    let l = simpson_rec(f, a, m, la, lml, lm, left, g_scale, depth - 1, budget)?;
    let r = simpson_rec(f, m, b, lm, lmr, lb, right, g_scale, depth - 1, budget)?;
    Ok(log_add(l, r))
}

/// ln of the integral of exp(f) over [a, b]: a uniform pre-partition (so
/// narrow peaks are found), a crude global pass for the error scale, then
/// adaptive Simpson refinement.
fn log_simpson_adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, pieces: usize) -> Result<f64> {
    let mut budget = 400_000usize;
    let step = (b - a) / pieces as f64;
    let mut cells = Vec::with_capacity(pieces);
    let mut g_scale = f64::NEG_INFINITY;
    for i in 0..pieces {
        let x0 = a + step * i as f64;
        let x1 = x0 + step;
        let xm = 0.5 * (x0 + x1);
        let (la, lm, lb) = (f(x0), f(xm), f(x1));
        let whole = log_simpson_piece(x1 - x0, la, lm, lb);
        g_scale = log_add(g_scale, whole);
        cells.push((x0, x1, la, lm, lb, whole));
    }
    let mut total = f64::NEG_INFINITY;
    for (x0, x1, la, lm, lb, whole) in cells {
        let v = simpson_rec(f, x0, x1, la, lm, lb, whole, g_scale, 52, &mut budget)?;
        total = log_add(total, v);
    }
    Ok(total)
}

// ---------------------------------------------------------------------------
// oracles

/// Oracle for the two-sample H1 marginal likelihood: direct quadrature of
/// int_0^1 h(d | rho) pi(rho) drho with the integrand written from the
/// likelihood-times-prior definition.
///
/// Supports the oracle regime (both exponents nonnegative, i.e. n_k >= 2 or
/// alpha >= 1); the closed form it arbitrates covers the rest.
pub fn quad_ml_two(g1: &GroupStats, g2: &GroupStats, prior: &PriorSpec) -> Result<f64> {
    let (n1, n2) = (g1.n() as f64, g2.n() as f64);
    let n = n1 + n2;
    if (g1.n() + g2.n()) < 3 || g1.ss() + g2.ss() <= 0.0 {
        return Err(domain("degenerate two-sample input"));
    }
    let (ss1, ss2) = (g1.ss(), g2.ss());
    let (a1, a2) = (prior.alpha1(), prior.alpha2());
    let log_c = (2.0 - n) / 2.0 * (2.0 * std::f64::consts::PI).ln() + lgamma((n - 2.0) / 2.0)
        - 0.5 * (n1 * n2).ln()
        - crate::specfun::log_beta(a1, a2)?;
    let e1 = (n1 - 1.0) / 2.0 + a1 - 1.0;
    let e2 = (n2 - 1.0) / 2.0 + a2 - 1.0;
    if e1 < 0.0 || e2 < 0.0 {
        return Err(domain("quadrature oracle requires nonnegative rho exponents"));
    }
    let f = move |r: f64| -> f64 { powers_log(r, e1, e2) + (2.0 - n) / 2.0 * (r * ss1 + (1.0 - r) * ss2).ln() };
    Ok(log_c + log_simpson_adaptive(&f, 0.0, 1.0, 64)?)
}

/// e1 ln r + e2 ln(1-r) with exact zero-exponent handling so the integrand
/// stays continuous at the endpoints.
fn powers_log(r: f64, e1: f64, e2: f64) -> f64 {
    if r < 0.0 || r > 1.0 {
        return f64::NEG_INFINITY;
    }
    let mut v = 0.0;
    if e1 != 0.0 {
        v += e1 * r.ln();
    }
    if e2 != 0.0 {
        v += e2 * (1.0 - r).ln();
    }
    v
}

/// Oracle for the K = 3 unconstrained marginal likelihood: nested adaptive
/// simplex quadrature of the Dirichlet-weighted likelihood.
pub fn quad_ml_k3(stats: &[GroupStats], alpha: f64) -> Result<f64> {
    if stats.len() != 3 {
        return Err(domain("quad_ml_k3 requires exactly three groups"));
    }
    if !(alpha > 0.0) {
        return Err(domain("alpha must be positive"));
    }
    let ns: Vec<f64> = stats.iter().map(|g| g.n() as f64).collect();
    let sss: Vec<f64> = stats.iter().map(|g| g.ss()).collect();
    let n: f64 = ns.iter().sum();
    let gamma = (n - 3.0) / 2.0;
    let e: Vec<f64> = ns.iter().map(|&ni| (ni - 1.0) / 2.0 + alpha - 1.0).collect();
    let log_c = (3.0 - n) / 2.0 * (2.0 * std::f64::consts::PI).ln() + lgamma(gamma)
        - 0.5 * ns.iter().map(|x| x.ln()).sum::<f64>()
        + lgamma(3.0 * alpha)
        - 3.0 * lgamma(alpha);
    if e.iter().any(|&x| x < 0.0) {
        return Err(domain("quadrature oracle requires nonnegative rho exponents"));
    }
    let e0 = e[0];
    let e1 = e[1];
    let e2 = e[2];
    let (s0, s1, s2) = (sss[0], sss[1], sss[2]);
    let inner = move |r0: f64| -> Result<f64> {
        let rem = 1.0 - r0;
        let f = move |r1: f64| -> f64 {
            let r2 = rem - r1;
            if r1 < 0.0 || r2 < 0.0 {
                return f64::NEG_INFINITY;
            }
            let mut v = -gamma * (r0 * s0 + r1 * s1 + r2 * s2).ln();
            if e1 != 0.0 {
                v += e1 * r1.ln();
            }
            if e2 != 0.0 {
                v += e2 * r2.ln();
            }
            v
        };
        log_simpson_adaptive(&f, 0.0, rem, 48)
    };
    let outer = move |r0: f64| -> f64 {
        if r0 < 0.0 || r0 >= 1.0 {
            return f64::NEG_INFINITY;
        }
        if e0 != 0.0 && r0 == 0.0 {
            return f64::NEG_INFINITY;
        }
        match inner(r0) {
            Ok(v) => {
                if e0 == 0.0 {
                    v
                } else {
                    e0 * r0.ln() + v
                }
            }
            Err(_) => f64::NAN,
        }
    };
    let v = log_simpson_adaptive(&outer, 0.0, 1.0, 48)?;
    if v.is_nan() {
        return Err(numeric("inner quadrature failed"));
    }
    Ok(log_c + v)
}

/// Draw Gaussian group samples (zero means, precisions from the scenario)
/// and reduce them to per-group sufficient statistics; deterministic
/// per (seed, replication).
pub fn simulate(scenario: &SimulationScenario) -> Vec<Vec<GroupStats>> {
    let mut out = Vec::with_capacity(scenario.replications as usize);
    for rep in 0..scenario.replications {
        let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
        rng.set_stream(rep as u64 + 1);
        let mut groups = Vec::with_capacity(scenario.k);
        for (&tau, &n) in scenario.taus.iter().zip(scenario.ns.iter()) {
            let sd = (1.0 / tau).sqrt();
            let xs: Vec<f64> = (0..n).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let mean = xs.iter().sum::<f64>() / n as f64;
            let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
            groups.push(GroupStats::new(n, ss).expect("simulated stats are valid"));
        }
        out.push(groups);
    }
    out
}

/// One pass/fail line of the desiderata suite.
#[derive(Debug, Clone, PartialEq)]
pub struct DesideratumOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Pass/fail report over all checked properties.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiderataReport {
    pub outcomes: Vec<DesideratumOutcome>,
}

impl DesiderataReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl std::fmt::Display for DesiderataReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{} {}: {}", if o.passed { "PASS" } else { "FAIL" }, o.name, o.detail)?;
        }
        Ok(())
    }
}

fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Run the desiderata checks (invariance properties plus the numeric
/// consistency bounds); deterministic for a fixed seed.
pub fn desiderata_suite(seed: u64) -> Result<DesiderataReport> {
    let mut outcomes = Vec::new();
    let mut push = |name: &str, passed: bool, detail: String| {
        outcomes.push(DesideratumOutcome { name: name.to_string(), passed, detail });
    };
    let prior = PriorSpec::symmetric(0.5)?;

    // predictive matching: exact zeros at the three uninformative sizes
    {
        let cases = [
            (GroupStats::new(1, 0.0)?, GroupStats::new(1, 0.0)?),
            (GroupStats::new(2, 1.3)?, GroupStats::new(1, 0.0)?),
            (GroupStats::new(1, 0.0)?, GroupStats::new(2, 0.7)?),
        ];
        let all_zero = cases
            .iter()
            .all(|(a, b)| two_sample::log_bf10(a, b, &prior).map(|r| r.log_bf10 == 0.0).unwrap_or(false));
        push("predictive_matching", all_zero, "log BF10 = 0 at (1,1), (2,1), (1,2)".into());
    }

    // label invariance to 1e-10 on randomized inputs
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(101);
        let mut worst: f64 = 0.0;
        for _ in 0..25 {
            let g1 = GroupStats::new(rng.gen_range(2..200), rng.gen_range(0.1..50.0))?;
            let g2 = GroupStats::new(rng.gen_range(2..200), rng.gen_range(0.1..50.0))?;
            let a = two_sample::log_bf10(&g1, &g2, &prior)?.log_bf10;
            let b = two_sample::log_bf10(&g2, &g1, &prior)?.log_bf10;
            worst = worst.max((a - b).abs());
        }
        push("label_invariance", worst <= 1e-10, format!("max |swap difference| = {worst:.2e}"));
    }

    // measurement invariance to 1e-10
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(102);
        let mut worst: f64 = 0.0;
        for _ in 0..25 {
            let n1 = rng.gen_range(2..300);
            let n2 = rng.gen_range(2..300);
            let ss1 = rng.gen_range(0.05..40.0);
            let ss2 = rng.gen_range(0.05..40.0);
            let c = rng.gen_range(1e-3..1e3);
            let a = two_sample::log_bf10(&GroupStats::new(n1, ss1)?, &GroupStats::new(n2, ss2)?, &prior)?.log_bf10;
            let b = two_sample::log_bf10(&GroupStats::new(n1, ss1 * c)?, &GroupStats::new(n2, ss2 * c)?, &prior)?
                .log_bf10;
            worst = worst.max((a - b).abs());
        }
        push("measurement_invariance", worst <= 1e-10, format!("max |scaling difference| = {worst:.2e}"));
    }

    // information consistency trend: BF01 decreasing toward 0 at n1=n2=2
    {
        let mut prev = f64::INFINITY;
        let mut ok = true;
        let mut last = f64::NAN;
        for &ratio in &[1e-2, 1e-4, 1e-6, 1e-8] {
            let bf01 = -two_sample::log_bf10(&GroupStats::new(2, ratio)?, &GroupStats::new(2, 1.0)?, &prior)?
                .log_bf10;
            ok &= bf01 < prev;
            prev = bf01;
            last = bf01;
        }
        push(
            "information_consistency_trend",
            ok && last < 0.0,
            format!("log BF01 at ss1/ss2 = 1e-8: {last:.3}"),
        );
    }

    // limit consistency: huge-n2 two-sample BFs settle and agree with the
    // one-sample Tricomi value
    {
        let g1 = GroupStats::new(50, 43.0)?;
        let s2sq = 0.9;
        let bf = |n2: u64| -> Result<f64> {
            let g2 = GroupStats::new(n2, (n2 as f64 - 1.0) * s2sq)?;
            Ok(two_sample::log_bf10(&g1, &g2, &prior)?.log_bf10)
        };
        let a = bf(1_000_000)?;
        let b = bf(10_000_000)?;
        let one = one_sample::log_bf10_one(&OneSampleProblem::new(50, 43.0, 1.0 / s2sq)?, 0.5)?.log_bf10;
        let ok = (a - b).abs() < 1e-2 && (b - one).abs() < 1e-2;
        push(
            "limit_consistency",
            ok,
            format!("two-sample at n2=1e6: {a:.6}, 1e7: {b:.6}, one-sample: {one:.6}"),
        );
    }

    // model selection consistency: medians over 200 replications
    {
        let reps = 200;
        let med = |n: u64, tau2: f64, seed_off: u64| -> Result<f64> {
            let sc = SimulationScenario::new(vec![1.0, tau2], vec![n, n], reps, seed ^ seed_off)?;
            let mut vals = Vec::with_capacity(reps as usize);
            for groups in simulate(&sc) {
                vals.push(two_sample::log_bf10(&groups[0], &groups[1], &prior)?.log_bf10);
            }
            Ok(median(&mut vals))
        };
        // under H0 (equal precisions) the BF should head to zero
        let h0_small = med(50, 1.0, 11)?;
        let h0_large = med(400, 1.0, 12)?;
        // under delta = 1.5 (sigma2 = 1.5 sigma1 means tau2 = 1/2.25)
        let h1_small = med(50, 1.0 / 2.25, 13)?;
        let h1_large = med(400, 1.0 / 2.25, 14)?;
        let ok = h0_large < h0_small && h0_small < 0.0 && h1_large > h1_small && h1_small > 0.0;
        push(
            "model_selection_consistency",
            ok,
            format!("H0 medians: n=50 {h0_small:.3}, n=400 {h0_large:.3}; delta=1.5 medians: n=50 {h1_small:.3}, n=400 {h1_large:.3}"),
        );
    }

    // Jeffreys 1939 comparator, alpha = 1: relative disagreement shrinks
    // from N=10 to N=200 on the Fig. 6 grid (and monotonically at delta=1)
    {
        let prior1 = PriorSpec::symmetric(1.0)?;
        let mut ok = true;
        let mut detail = String::new();
        for &delta in &[1.0, 1.1, 1.2, 1.3, 1.4, 1.5] {
            let mut rels = Vec::new();
            for &n in &[10u64, 20, 50, 100, 200] {
                let g1 = GroupStats::new(n, (n as f64 - 1.0) * 1.0)?;
                let g2 = GroupStats::new(n, (n as f64 - 1.0) * delta * delta)?;
                let ours = two_sample::log_bf10(&g1, &g2, &prior1)?.log_bf10;
                let jeff = -two_sample::jeffreys_bf01_1939(&g1, &g2)?.ln();
                rels.push((ours - jeff).abs() / ours.abs().max(1.0));
            }
            let endpoint_shrinks = rels.last().unwrap() < rels.first().unwrap();
            let monotone_at_null = delta != 1.0 || rels.windows(2).all(|w| w[1] < w[0]);
            ok &= endpoint_shrinks && monotone_at_null;
            detail.push_str(&format!("d={delta}: {:.4}->{:.4}; ", rels.first().unwrap(), rels.last().unwrap()));
        }
        push("jeffreys_1939_agreement", ok, detail);
    }

    // oracle spot checks: closed forms against the independent quadratures
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(103);
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let g1 = GroupStats::new(rng.gen_range(2..500), rng.gen_range(0.5..80.0))?;
            let g2 = GroupStats::new(rng.gen_range(2..500), rng.gen_range(0.5..80.0))?;
            let closed = two_sample::log_ml_h1(&g1, &g2, &prior)?;
            let quad = quad_ml_two(&g1, &g2, &prior)?;
            worst = worst.max((closed - quad).abs());
        }
        push("two_sample_oracle_agreement", worst < 1e-8, format!("max |closed - quadrature| = {worst:.2e}"));
    }
    {
        let p = OneSampleProblem::new(23, 17.0, 1.4)?;
        let closed = one_sample::log_bf10_one(&p, 0.8)?.log_bf10;
        let quad = one_sample::log_bf_directed_one(
            &p,
            0.8,
            &two_sample::DeltaHypothesis::Point(1.0),
            &two_sample::DeltaHypothesis::Interval(two_sample::DeltaInterval::full()),
        )?
        .log_bf10;
        push(
            "one_sample_tricomi_vs_quadrature",
            (closed - quad).abs() < 1e-6,
            format!("|closed - quadrature| = {:.2e}", (closed - quad).abs()),
        );
    }
    {
        // K=2 closed form equals the block-model single-block closed form
        let g1 = GroupStats::new(31, 12.0)?;
        let g2 = GroupStats::new(44, 80.0)?;
        let a = kgroups::log_ml_h0_k(&[g1, g2])?;
        let b = two_sample::log_ml_h0(&g1, &g2)?;
        push("k2_h0_agreement", (a - b).abs() < 1e-12, format!("|difference| = {:.2e}", (a - b).abs()));
    }

    Ok(DesiderataReport { outcomes })
}
