//! Bayes factors among constraint hypotheses for K >= 2 groups.
//!
//! Equality blocks are pooled into pseudo-groups, each keeping one Dirichlet
//! weight alpha; the block model's likelihood exponents come from the tied
//! precision derivation (block degrees of freedom sum (n_i - 1) over
//! members, total exponent (K - n)/2 with the original group count), so a
//! single block reproduces the all-equal closed form exactly and all
//! singleton blocks reproduce the unconstrained model. Multi-block marginal
//! likelihoods go through seeded MCMC plus bridge sampling; order
//! constraints multiply in the encompassing posterior/prior fraction, with
//! the prior fraction computed exactly by linear-extension counting.

pub(crate) mod bridge;
pub(crate) mod mcmc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{domain, numeric, Result};
use crate::hypotheses::{GroupStats, HypothesisSpec};
use crate::specfun::lgamma;
use crate::two_sample::{BayesFactorResult, Method};

/// MCMC chain settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws_per_chain: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { chains: 4, warmup: 1000, draws_per_chain: 5000 }
    }
}

/// Post-warmup posterior draws of the simplex weights, with diagnostics.
#[derive(Debug, Clone)]
pub struct PosteriorDraws {
    draws: Vec<Vec<f64>>,
    chains: usize,
    seed: u64,
    acceptance_rate: f64,
    ess_min: f64,
    flagged: bool,
}

impl PosteriorDraws {
    pub fn draws(&self) -> &[Vec<f64>] {
        &self.draws
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.acceptance_rate
    }

    pub fn ess_min(&self) -> f64 {
        self.ess_min
    }

    /// True when ess_min fell below 400.
    pub fn flagged(&self) -> bool {
        self.flagged
    }
}

/// Bridge-sampling estimate of a log marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BridgeResult {
    pub log_ml: f64,
    pub se: f64,
    pub iterations: usize,
}

/// The equality-collapsed likelihood model over blocks.
pub(crate) struct BlockModel {
    dfs: Vec<f64>,
    sss: Vec<f64>,
    gamma: f64,
    log_const: f64,
    alpha: f64,
}

impl BlockModel {
    fn from_spec(stats: &[GroupStats], spec: &HypothesisSpec, alpha: f64) -> Result<Self> {
        if stats.len() != spec.k() {
            return Err(domain(format!("expected {} groups, got {}", spec.k(), stats.len())));
        }
        check_alpha(alpha)?;
        let k = stats.len();
        if k < 2 {
            return Err(domain("K-group analysis requires at least two groups"));
        }
        let n: u64 = stats.iter().map(|g| g.n()).sum();
        if n < k as u64 + 1 {
            return Err(domain(format!("need total n >= K+1 = {}, got {n}", k + 1)));
        }
        let total_ss: f64 = stats.iter().map(|g| g.ss()).sum();
        if total_ss <= 0.0 {
            return Err(domain("total sum of squares must be positive"));
        }
        let mut dfs = Vec::with_capacity(spec.blocks().len());
        let mut sss = Vec::with_capacity(spec.blocks().len());
        for block in spec.blocks() {
            let df: f64 = block.iter().map(|&i| stats[i].n() as f64 - 1.0).sum();
            let ss: f64 = block.iter().map(|&i| stats[i].ss()).sum();
            if df >= 1.0 && ss == 0.0 {
                return Err(domain("a block with positive degrees of freedom has zero sum of squares"));
            }
            dfs.push(df);
            sss.push(ss);
        }
        let nf = n as f64;
        let kf = k as f64;
        let gamma = (nf - kf) / 2.0;
        let log_const = (kf - nf) / 2.0 * (2.0 * std::f64::consts::PI).ln() + lgamma(gamma)
            - 0.5 * stats.iter().map(|g| (g.n() as f64).ln()).sum::<f64>();
        Ok(BlockModel { dfs, sss, gamma, log_const, alpha })
    }

    fn from_groups(stats: &[GroupStats], alpha: f64) -> Result<Self> {
        let k = stats.len();
        let spec = HypothesisSpec::new(k, (0..k).map(|i| vec![i]).collect(), vec![])?;
        BlockModel::from_spec(stats, &spec, alpha)
    }

    pub(crate) fn k(&self) -> usize {
        self.dfs.len()
    }

    pub(crate) fn log_const(&self) -> f64 {
        self.log_const
    }

    pub(crate) fn log_dirichlet_norm(&self) -> f64 {
        let k = self.k() as f64;
        lgamma(k * self.alpha) - k * lgamma(self.alpha)
    }

    /// Log of the simplex integrand prod rho^(df/2 + alpha - 1) times
    /// (sum rho ss)^(-gamma); -inf outside the open simplex.
    pub(crate) fn log_integrand(&self, rho: &[f64]) -> f64 {
        debug_assert_eq!(rho.len(), self.k());
        let mut s = 0.0;
        let mut q = 0.0;
        for ((&r, &df), &ss) in rho.iter().zip(self.dfs.iter()).zip(self.sss.iter()) {
            if !(r > 0.0) || r >= 1.0 {
                return f64::NEG_INFINITY;
            }
            s += (df / 2.0 + self.alpha - 1.0) * r.ln();
            q += r * ss;
        }
        s - self.gamma * q.ln()
    }

    /// Closed-form log ML when the model has a single block (rho = 1).
    fn log_ml_single_block(&self) -> f64 {
        self.log_const - self.gamma * self.sss[0].ln()
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(domain(format!("alpha must be finite and positive, got {alpha}")));
    }
    Ok(())
}

/// Closed-form log marginal likelihood of the all-equal model
/// (rho_k = 1/K); reduces to the two-sample H0 value at K = 2.
pub fn log_ml_h0_k(stats: &[GroupStats]) -> Result<f64> {
    if stats.len() < 2 {
        return Err(domain("log_ml_h0_k requires K >= 2 groups"));
    }
    let model = BlockModel::from_spec(
        stats,
        &HypothesisSpec::new(stats.len(), vec![(0..stats.len()).collect()], vec![])?,
        1.0,
    )?;
    Ok(model.log_ml_single_block())
}

/// Unnormalized log posterior of the unconstrained model's weights,
/// including the Dirichlet normalizer: integrating its exponential over the
/// simplex gives the H1 marginal likelihood up to the shared convention
/// constant. Boundary points return -infinity.
pub fn unnorm_log_post(rho: &[f64], stats: &[GroupStats], alpha: f64) -> Result<f64> {
    let model = BlockModel::from_groups(stats, alpha)?;
    if rho.len() != model.k() {
        return Err(domain(format!("rho has length {}, expected {}", rho.len(), model.k())));
    }
    if rho.iter().any(|r| !(*r > 0.0) || *r >= 1.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let sum: f64 = rho.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(domain(format!("rho must sum to 1 within 1e-9, got {sum}")));
    }
    Ok(model.log_dirichlet_norm() + model.log_integrand(rho))
}

/// Sample the unconstrained posterior of the simplex weights.
pub fn sample_posterior(stats: &[GroupStats], alpha: f64, config: &ChainConfig, seed: u64) -> Result<PosteriorDraws> {
    let model = BlockModel::from_groups(stats, alpha)?;
    mcmc::sample_posterior_model(&model, config, seed)
}

/// Bridge-sampling estimate of the unconstrained model's log marginal
/// likelihood from posterior draws of the same (stats, alpha).
pub fn bridge_log_ml(draws: &PosteriorDraws, stats: &[GroupStats], alpha: f64) -> Result<BridgeResult> {
    let model = BlockModel::from_groups(stats, alpha)?;
    bridge::bridge_model(draws, &model)
}

/// Exact Dirichlet(alpha, ..., alpha) draws via normalized Gamma variates.
pub fn sample_prior(k: usize, alpha: f64, n_draws: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if k < 2 {
        return Err(domain("sample_prior requires k >= 2"));
    }
    check_alpha(alpha)?;
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| domain(format!("invalid Gamma shape: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_draws);
    for _ in 0..n_draws {
        let mut v: Vec<f64> = (0..k).map(|_| gamma.sample(&mut rng)).collect();
        let s: f64 = v.iter().sum();
        if s <= 0.0 {
            // all-zero underflow is possible for tiny alpha; resample flat
            v = vec![1.0; k];
        }
        let s: f64 = v.iter().sum();
        for x in &mut v {
            *x /= s;
        }
        out.push(v);
    }
    Ok(out)
}

/// Prior probability that a symmetric Dirichlet draw over the hypothesis blocks
/// respects the order constraints, computed exactly by counting linear
/// extensions (blocks are exchangeable under the per-block alpha).
pub fn prior_order_fraction(spec: &HypothesisSpec) -> Result<f64> {
    let m = spec.blocks().len();
    if spec.order().is_empty() {
        return Ok(1.0);
    }
    if m > 20 {
        return Err(numeric("linear-extension counting supports at most 20 blocks"));
    }
    let mut out_mask = vec![0u32; m];
    for &(g, l) in spec.order() {
        out_mask[g] |= 1 << l;
    }
    let full: u32 = if m == 32 { u32::MAX } else { (1 << m) - 1 };
    let mut ways = vec![0.0f64; (full as usize) + 1];
    ways[0] = 1.0;
    for s in 1..=full {
        let mut total = 0.0;
        let mut rest = s;
        while rest != 0 {
            let b = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            // block b can be the smallest of s iff nothing in s must lie below it
            if out_mask[b] & s == 0 {
                total += ways[(s ^ (1 << b)) as usize];
            }
        }
        ways[s as usize] = total;
    }
    let mut fact = 1.0;
    for i in 2..=m {
        fact *= i as f64;
    }
    Ok(ways[full as usize] / fact)
}

/// Encompassing-prior estimate of log BF of the order-constrained model
/// against its order-free base model, from posterior and prior draws on the
/// collapsed block simplex. Returns (log_bf_r1, se).
pub fn encompassing_fraction(
    spec: &HypothesisSpec,
    posterior: &PosteriorDraws,
    prior_draws: &[Vec<f64>],
) -> Result<(f64, f64)> {
    if spec.order().is_empty() {
        return Ok((0.0, 0.0));
    }
    let m = spec.blocks().len();
    let check_dims = |d: &[Vec<f64>], what: &str| -> Result<()> {
        if d.is_empty() || d[0].len() != m {
            return Err(domain(format!("{what} draws must have {m} block coordinates")));
        }
        Ok(())
    };
    check_dims(posterior.draws(), "posterior")?;
    check_dims(prior_draws, "prior")?;
    let count = |d: &[Vec<f64>]| d.iter().filter(|rho| spec.satisfies_order_blocks(rho)).count();
    let c_post = count(posterior.draws());
    let c_prior = count(prior_draws);
    if c_post == 0 || c_prior == 0 {
        return Err(numeric(
            "no draws satisfy the order constraint; increase the draw budget or use the \
             analytic prior fraction",
        ));
    }
    let n_post = posterior.draws().len() as f64;
    let n_prior = prior_draws.len() as f64;
    let p_post = c_post as f64 / n_post;
    let p_prior = c_prior as f64 / n_prior;
    let se = ((1.0 - p_post) / (p_post * n_post) + (1.0 - p_prior) / (p_prior * n_prior)).sqrt();
    Ok((p_post.ln() - p_prior.ln(), se))
}

/// Log marginal likelihood of one hypothesis: collapse equality blocks,
/// closed form for a single block, bridge sampling otherwise, plus the
/// encompassing fraction when order constraints are present.
pub fn log_ml_hypothesis(
    spec: &HypothesisSpec,
    stats: &[GroupStats],
    alpha: f64,
    config: &ChainConfig,
    seed: u64,
) -> Result<HypothesisMl> {
    let model = BlockModel::from_spec(stats, spec, alpha)?;
    if model.k() == 1 {
        return Ok(HypothesisMl {
            log_ml: model.log_ml_single_block(),
            se: 0.0,
            stochastic: false,
            draws: None,
            budget_flagged: false,
        });
    }
    let mut cfg = *config;
    let mut budget_flagged = false;
    loop {
        let draws = mcmc::sample_posterior_model(&model, &cfg, seed)?;
        let br = bridge::bridge_model(&draws, &model)?;
        if !spec.has_order() {
            return Ok(HypothesisMl {
                log_ml: br.log_ml,
                se: br.se,
                stochastic: true,
                draws: Some(draws),
                budget_flagged,
            });
        }
        let satisfied = draws.draws().iter().filter(|rho| spec.satisfies_order_blocks(rho)).count();
        // lopsided orders: double the budget (up to 8x) until at least 50
        // posterior draws respect the constraint
        if satisfied < 50 && cfg.draws_per_chain < config.draws_per_chain * 8 {
            cfg.draws_per_chain *= 2;
            budget_flagged = true;
            continue;
        }
        if satisfied == 0 {
            return Err(numeric(
                "no posterior draw satisfies the order constraint even after doubling the \
                 draw budget to 8x; the constrained hypothesis has vanishing posterior mass",
            ));
        }
        let n = draws.draws().len() as f64;
        let p_post = satisfied as f64 / n;
        let p_prior = prior_order_fraction(spec)?;
        // binomial error with the indicator's own effective sample size:
        // consecutive MCMC draws are correlated, so n would overstate it
        let n_eff = mcmc::indicator_ess(&draws, |rho| spec.satisfies_order_blocks(rho)).max(8.0);
        let se = (br.se * br.se + (1.0 - p_post) / (p_post * n_eff)).sqrt();
        return Ok(HypothesisMl {
            log_ml: br.log_ml + p_post.ln() - p_prior.ln(),
            se,
            stochastic: true,
            draws: Some(draws),
            budget_flagged: budget_flagged || satisfied < 50,
        });
    }
}

/// Per-hypothesis marginal-likelihood estimate with its diagnostics.
pub struct HypothesisMl {
    pub log_ml: f64,
    pub se: f64,
    pub stochastic: bool,
    /// Posterior draws of the collapsed block weights (absent for a
    /// single-block hypothesis, which is closed-form).
    pub draws: Option<PosteriorDraws>,
    /// True when the lopsided-order budget doubling was triggered.
    pub budget_flagged: bool,
}

/// Log Bayes factor between two hypotheses on the same groups.
pub fn log_bf(
    numerator: &HypothesisSpec,
    denominator: &HypothesisSpec,
    stats: &[GroupStats],
    alpha: f64,
    config: &ChainConfig,
    seed: u64,
) -> Result<BayesFactorResult> {
    if numerator.k() != denominator.k() {
        return Err(domain("hypotheses refer to different group counts"));
    }
    let num = log_ml_hypothesis(numerator, stats, alpha, config, seed)?;
    let den = log_ml_hypothesis(
        denominator,
        stats,
        alpha,
        config,
        seed ^ 0x9e37_79b9_7f4a_7c15,
    )?;
    let stochastic = num.stochastic || den.stochastic;
    Ok(BayesFactorResult {
        log_bf10: num.log_ml - den.log_ml,
        method: if stochastic { Method::BridgeEncompassing } else { Method::ClosedForm },
        mc_se: stochastic.then(|| (num.se * num.se + den.se * den.se).sqrt()),
    })
}

/// Pairwise posterior summary of delta_ij = sigma_j / sigma_i =
/// sqrt(rho_i / rho_j) from simplex draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairwiseDelta {
    /// 0-based group indices (i, j), i < j.
    pub i: usize,
    pub j: usize,
    pub mean: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fraction of draws with delta_ij > 1.
    pub p_gt_1: f64,
}

/// Pairwise delta summaries for every pair i < j.
pub fn pairwise_delta_summaries(draws: &PosteriorDraws, level: f64) -> Result<Vec<PairwiseDelta>> {
    if !(0.0 < level && level < 1.0) {
        return Err(domain("credible level must lie in (0, 1)"));
    }
    let k = match draws.draws().first() {
        Some(d) => d.len(),
        None => return Err(domain("no draws")),
    };
    let tail = 0.5 * (1.0 - level);
    let mut out = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let mut ds: Vec<f64> = draws.draws().iter().map(|rho| (rho[i] / rho[j]).sqrt()).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = ds.len();
            let mean = ds.iter().sum::<f64>() / n as f64;
            let q = |p: f64| ds[((p * n as f64) as usize).min(n - 1)];
            let p_gt_1 = ds.iter().filter(|&&d| d > 1.0).count() as f64 / n as f64;
            out.push(PairwiseDelta { i, j, mean, ci_lo: q(tail), ci_hi: q(1.0 - tail), p_gt_1 });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
