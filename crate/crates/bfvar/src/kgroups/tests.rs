use super::*;
use crate::hypotheses::GroupStats;
use crate::two_sample::{self, PriorSpec};
use approx::assert_abs_diff_eq;

fn g(n: u64, ss: f64) -> GroupStats {
    GroupStats::new(n, ss).unwrap()
}

fn spec(text: &str, k: usize) -> HypothesisSpec {
    HypothesisSpec::parse(text, k).unwrap()
}

fn quick_config() -> ChainConfig {
    ChainConfig { chains: 4, warmup: 600, draws_per_chain: 2500 }
}

#[test]
fn ml_h0_k_matches_two_sample_at_k2() {
    for (g1, g2) in [(g(10, 8.0), g(12, 15.0)), (g(3, 2.0), g(7, 0.4)), (g(117, 500.0), g(55, 900.0))] {
        let a = log_ml_h0_k(&[g1, g2]).unwrap();
        let b = two_sample::log_ml_h0(&g1, &g2).unwrap();
        assert_abs_diff_eq!(a, b, epsilon = 1e-12 * b.abs().max(1.0));
    }
}

#[test]
fn ml_h0_k_permutation_invariant_and_frozen() {
    let stats = [g(5, 3.2), g(9, 7.7), g(4, 1.1)];
    let v = log_ml_h0_k(&stats).unwrap();
    // frozen 40-digit direct evaluation of the all-equal closed form
    assert_abs_diff_eq!(v, -27.482992060166465686, epsilon = 1e-12);
    let perm = [g(9, 7.7), g(4, 1.1), g(5, 3.2)];
    assert_abs_diff_eq!(log_ml_h0_k(&perm).unwrap(), v, epsilon = 1e-12);
}

#[test]
fn ml_h0_k_validation() {
    assert!(log_ml_h0_k(&[g(5, 3.0)]).is_err());
    assert!(log_ml_h0_k(&[g(1, 0.0), g(2, 0.0), g(1, 0.0)]).is_err()); // zero ss
    assert!(log_ml_h0_k(&[g(1, 0.0), g(1, 0.0)]).is_err()); // n < K+1
}

#[test]
fn unnorm_log_post_frozen_and_boundary() {
    let stats = [g(5, 3.2), g(9, 7.7), g(4, 1.1)];
    let v = unnorm_log_post(&[0.2, 0.5, 0.3], &stats, 0.7).unwrap();
    assert_abs_diff_eq!(v, -19.278424845920222906, epsilon = 1e-12);
    // permutation symmetry under symmetric stats
    let sym = [g(6, 4.0), g(6, 4.0), g(6, 4.0)];
    let a = unnorm_log_post(&[0.2, 0.5, 0.3], &sym, 0.5).unwrap();
    let b = unnorm_log_post(&[0.5, 0.3, 0.2], &sym, 0.5).unwrap();
    assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    // boundary is -inf, not an error
    assert_eq!(unnorm_log_post(&[0.0, 0.5, 0.5], &stats, 0.5).unwrap(), f64::NEG_INFINITY);
    // off-simplex is an error
    assert!(unnorm_log_post(&[0.5, 0.2, 0.2], &stats, 0.5).is_err());
}

#[test]
fn unnorm_log_post_matches_two_sample_shape_at_k2() {
    // differences of the K=2 integrand match differences of the closed-form
    // posterior density pointwise
    let (g1, g2) = (g(10, 8.0), g(12, 15.0));
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let stats = [g1, g2];
    let pairs = [(0.2, 0.6), (0.35, 0.8), (0.05, 0.5)];
    for (r1, r2) in pairs {
        let lhs = unnorm_log_post(&[r1, 1.0 - r1], &stats, 0.5).unwrap()
            - unnorm_log_post(&[r2, 1.0 - r2], &stats, 0.5).unwrap();
        let rhs = two_sample::posterior_rho_pdf(r1, &g1, &g2, &prior).unwrap().ln()
            - two_sample::posterior_rho_pdf(r2, &g1, &g2, &prior).unwrap().ln();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10);
    }
}

#[test]
fn prior_draws_are_simplex_with_dirichlet_moments() {
    let k = 4;
    let alpha = 0.8;
    let n = 40_000;
    let draws = sample_prior(k, alpha, n, 99).unwrap();
    assert_eq!(draws.len(), n);
    for d in &draws {
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(d.iter().all(|&x| x > 0.0));
    }
    let kf = k as f64;
    let want_mean = 1.0 / kf;
    let want_var = want_mean * (1.0 - want_mean) / (kf * alpha + 1.0);
    for c in 0..k {
        let xs: Vec<f64> = draws.iter().map(|d| d[c]).collect();
        let m = xs.iter().sum::<f64>() / n as f64;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n as f64 - 1.0);
        let se_mean = (want_var / n as f64).sqrt();
        assert!((m - want_mean).abs() < 3.0 * se_mean, "mean {m} vs {want_mean}");
        // variance of the sample variance, normal approximation
        let se_var = want_var * (2.0 / (n as f64 - 1.0)).sqrt() * 2.0;
        assert!((v - want_var).abs() < 3.0 * se_var, "var {v} vs {want_var}");
    }
}

#[test]
fn prior_draws_deterministic() {
    let a = sample_prior(3, 0.5, 100, 7).unwrap();
    let b = sample_prior(3, 0.5, 100, 7).unwrap();
    assert_eq!(a, b);
    let c = sample_prior(3, 0.5, 100, 8).unwrap();
    assert_ne!(a, c);
}

#[test]
fn posterior_symmetric_means() {
    let stats = [g(30, 29.0), g(30, 29.0), g(30, 29.0)];
    let draws = sample_posterior(&stats, 0.5, &quick_config(), 42).unwrap();
    assert!(draws.acceptance_rate() > 0.3 && draws.acceptance_rate() < 0.5, "acceptance {}", draws.acceptance_rate());
    for c in 0..3 {
        let xs: Vec<f64> = draws.draws().iter().map(|d| d[c]).collect();
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let sd = (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt();
        let mcse = sd / draws.ess_min().sqrt();
        assert!((m - 1.0 / 3.0).abs() < 3.0 * mcse, "coord {c}: mean {m}, mcse {mcse}");
    }
}

#[test]
fn posterior_deterministic_given_seed() {
    let stats = [g(10, 8.0), g(12, 15.0)];
    let cfg = ChainConfig { chains: 2, warmup: 200, draws_per_chain: 300 };
    let a = sample_posterior(&stats, 0.5, &cfg, 13).unwrap();
    let b = sample_posterior(&stats, 0.5, &cfg, 13).unwrap();
    assert_eq!(a.draws(), b.draws());
    assert_eq!(a.acceptance_rate(), b.acceptance_rate());
    for d in a.draws() {
        assert!(d.iter().all(|&x| x > 0.0));
        assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn posterior_k2_marginal_matches_closed_form() {
    // Kolmogorov-Smirnov distance between the MCMC marginal of rho_1 and
    // the closed-form CDF below 0.02 with 10^4 draws
    let (g1, g2) = (g(10, 8.0), g(12, 15.0));
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let cfg = ChainConfig { chains: 4, warmup: 600, draws_per_chain: 2500 };
    let draws = sample_posterior(&[g1, g2], 0.5, &cfg, 2024).unwrap();
    let mut xs: Vec<f64> = draws.draws().iter().map(|d| d[0]).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    let mut ks: f64 = 0.0;
    for idx in (0..n).step_by(n / 200) {
        let x = xs[idx];
        let d = (x / (1.0 - x)).sqrt();
        let cdf = two_sample::posterior_delta_mass(
            &two_sample::DeltaInterval::new(0.0, d).unwrap(),
            &g1,
            &g2,
            &prior,
        )
        .unwrap();
        let emp_hi = (idx + 1) as f64 / n as f64;
        let emp_lo = idx as f64 / n as f64;
        ks = ks.max((cdf - emp_hi).abs()).max((cdf - emp_lo).abs());
    }
    assert!(ks < 0.02, "KS distance {ks}");
    assert!(draws.ess_min() > 400.0, "ess {}", draws.ess_min());
}

#[test]
fn bridge_matches_closed_form_at_k2() {
    let (g1, g2) = (g(10, 8.0), g(12, 15.0));
    let prior = PriorSpec::symmetric(0.5).unwrap();
    // 2e4 draws as the contract stipulates
    let cfg = ChainConfig { chains: 4, warmup: 1000, draws_per_chain: 5000 };
    let draws = sample_posterior(&[g1, g2], 0.5, &cfg, 7).unwrap();
    let br = bridge_log_ml(&draws, &[g1, g2], 0.5).unwrap();
    let closed = two_sample::log_ml_h1(&g1, &g2, &prior).unwrap();
    assert!((br.log_ml - closed).abs() <= 3.0 * br.se.max(1e-4), "bridge {} vs {} (se {})", br.log_ml, closed, br.se);
    assert!((br.log_ml - closed).abs() <= 0.01, "bridge {} vs {}", br.log_ml, closed);
    assert!(br.se > 0.0 && br.se.is_finite());
    assert!(br.iterations >= 1);
}

#[test]
fn bridge_homogeneity_and_bf_invariance() {
    let stats = [g(14, 9.0), g(11, 4.0), g(9, 7.0)];
    let scaled: Vec<GroupStats> = stats.iter().map(|s| g(s.n(), s.ss() * 3.0)).collect();
    let cfg = quick_config();
    let d1 = sample_posterior(&stats, 0.5, &cfg, 5).unwrap();
    let b1 = bridge_log_ml(&d1, &stats, 0.5).unwrap();
    let d2 = sample_posterior(&scaled, 0.5, &cfg, 5).unwrap();
    let b2 = bridge_log_ml(&d2, &scaled, 0.5).unwrap();
    let n: u64 = stats.iter().map(|s| s.n()).sum();
    let shift = (3.0 - n as f64) / 2.0 * 3.0f64.ln();
    let tol = 3.0 * (b1.se * b1.se + b2.se * b2.se).sqrt().max(0.003);
    assert!((b2.log_ml - b1.log_ml - shift).abs() < tol, "{} vs {}", b2.log_ml - b1.log_ml, shift);
    // the BF against H0 is exactly scale-free up to MC noise
    let bf1 = b1.log_ml - log_ml_h0_k(&stats).unwrap();
    let bf2 = b2.log_ml - log_ml_h0_k(&scaled).unwrap();
    assert!((bf1 - bf2).abs() < tol);
}

#[test]
fn prior_order_fraction_cases() {
    // full chain over m blocks: 1/m!
    assert_abs_diff_eq!(prior_order_fraction(&spec("1>2>3", 3)).unwrap(), 1.0 / 6.0, epsilon = 1e-12);
    assert_abs_diff_eq!(prior_order_fraction(&spec("1>2>3>4>5>6", 6)).unwrap(), 1.0 / 720.0, epsilon = 1e-12);
    // no order: 1
    assert_abs_diff_eq!(prior_order_fraction(&spec("1,2,3", 3)).unwrap(), 1.0, epsilon = 1e-15);
    // 1 > (2,3): two linear extensions of three blocks -> 2/6
    assert_abs_diff_eq!(prior_order_fraction(&spec("1>(2,3)", 3)).unwrap(), 1.0 / 3.0, epsilon = 1e-12);
    // mixed shape over 5 blocks: 1=2 > (3,4,5=6) > 7
    let f = prior_order_fraction(&spec("1=2>(3,4,5=6)>7", 7)).unwrap();
    // linear extensions: top fixed, bottom fixed, middle 3 free -> 3!/5! = 1/20
    assert_abs_diff_eq!(f, 0.05, epsilon = 1e-12);
}

#[test]
fn encompassing_fraction_against_analytic_prior() {
    let h = spec("1>2>3", 3);
    let prior = sample_prior(3, 0.5, 60_000, 21).unwrap();
    let stats = [g(40, 20.0), g(40, 39.0), g(40, 80.0)];
    let draws = sample_posterior(&stats, 0.5, &quick_config(), 3).unwrap();
    let (log_bf_r1, se) = encompassing_fraction(&h, &draws, &prior).unwrap();
    assert!(se > 0.0);
    // prior fraction close to 1/6 within 3 binomial se
    let c = prior.iter().filter(|r| h.satisfies_order(r).unwrap()).count();
    let p = c as f64 / prior.len() as f64;
    let want = 1.0 / 6.0;
    let se_p = (want * (1.0 - want) / prior.len() as f64).sqrt();
    assert!((p - want).abs() < 3.0 * se_p, "prior fraction {p}");
    assert!(log_bf_r1.is_finite());
    // vacuous order
    let free = spec("1,2,3", 3);
    assert_eq!(encompassing_fraction(&free, &draws, &prior).unwrap(), (0.0, 0.0));
}

#[test]
fn k2_directed_matches_two_sample_quadrature() {
    // full pipeline at K=2: "1>2" vs "1=2" equals the closed-form directed BF
    let (g1, g2) = (g(18, 6.0), g(14, 11.0));
    let prior = PriorSpec::symmetric(0.5).unwrap();
    let cfg = ChainConfig { chains: 4, warmup: 1000, draws_per_chain: 5000 };
    let r = log_bf(&spec("1>2", 2), &spec("1=2", 2), &[g1, g2], 0.5, &cfg, 11).unwrap();
    assert_eq!(r.method, Method::BridgeEncompassing);
    let mc_se = r.mc_se.unwrap();
    // rho_1 > rho_2 means delta = sigma2/sigma1 > 1
    let direct = two_sample::log_bf_directed(
        &g1,
        &g2,
        &prior,
        &two_sample::DeltaHypothesis::Interval(two_sample::DeltaInterval::new(1.0, f64::INFINITY).unwrap()),
        &two_sample::DeltaHypothesis::Point(1.0),
    )
    .unwrap();
    let tol = (3.0 * mc_se).max(0.02);
    assert!((r.log_bf10 - direct.log_bf10).abs() < tol, "{} vs {} (tol {tol})", r.log_bf10, direct.log_bf10);
}

#[test]
fn log_bf_same_single_block_is_zero() {
    let stats = [g(5, 3.0), g(6, 4.0), g(7, 5.0)];
    let h0 = spec("1=2=3", 3);
    let r = log_bf(&h0, &h0, &stats, 0.5, &quick_config(), 1).unwrap();
    assert_eq!(r.log_bf10, 0.0);
    assert_eq!(r.method, Method::ClosedForm);
    assert!(r.mc_se.is_none());
}

#[test]
fn log_bf_transitivity_within_noise() {
    let stats = [g(25, 12.0), g(30, 40.0), g(20, 30.0)];
    let cfg = quick_config();
    let a = spec("1,2,3", 3);
    let b = spec("1=2,3", 3);
    let c = spec("1=2=3", 3);
    let ab = log_bf(&a, &b, &stats, 0.5, &cfg, 17).unwrap();
    let bc = log_bf(&b, &c, &stats, 0.5, &cfg, 18).unwrap();
    let ac = log_bf(&a, &c, &stats, 0.5, &cfg, 19).unwrap();
    let se = (ab.mc_se.unwrap_or(0.0).powi(2) + bc.mc_se.unwrap_or(0.0).powi(2) + ac.mc_se.unwrap_or(0.0).powi(2))
        .sqrt();
    assert!(
        (ab.log_bf10 + bc.log_bf10 - ac.log_bf10).abs() < (3.0 * se).max(0.02),
        "{} + {} vs {}",
        ab.log_bf10,
        bc.log_bf10,
        ac.log_bf10
    );
}

#[test]
fn log_bf_label_invariance() {
    // permuting groups and the hypothesis string leaves the BF unchanged
    // within Monte-Carlo error
    let stats = [g(25, 12.0), g(30, 40.0), g(20, 30.0)];
    let perm = [g(30, 40.0), g(20, 30.0), g(25, 12.0)];
    let cfg = quick_config();
    let r1 = log_bf(&spec("1>2>3", 3), &spec("1=2=3", 3), &stats, 0.5, &cfg, 4).unwrap();
    let r2 = log_bf(&spec("3>1>2", 3), &spec("1=2=3", 3), &perm, 0.5, &cfg, 5).unwrap();
    let se = (r1.mc_se.unwrap().powi(2) + r2.mc_se.unwrap().powi(2)).sqrt();
    assert!((r1.log_bf10 - r2.log_bf10).abs() < (3.0 * se).max(0.03), "{} vs {}", r1.log_bf10, r2.log_bf10);
}

#[test]
fn pairwise_summaries_have_sane_shape() {
    let stats = [g(40, 20.0), g(40, 39.0), g(40, 80.0)];
    let draws = sample_posterior(&stats, 0.5, &quick_config(), 3).unwrap();
    let pairs = pairwise_delta_summaries(&draws, 0.95).unwrap();
    assert_eq!(pairs.len(), 3);
    for p in &pairs {
        assert!(p.ci_lo <= p.mean && p.mean <= p.ci_hi, "{p:?}");
        assert!((0.0..=1.0).contains(&p.p_gt_1));
    }
    // group 3 has the largest variance: delta_13 = sigma_3/sigma_1 should
    // concentrate above 1
    let p13 = pairs.iter().find(|p| p.i == 0 && p.j == 2).unwrap();
    assert!(p13.p_gt_1 > 0.9, "{p13:?}");
}

#[test]
fn vanishing_order_mass_errors_after_budget_cap() {
    // the data order the precisions the other way around; essentially no
    // posterior draw can satisfy "2>1"
    let stats = [g(100, 5.0), g(100, 500.0)];
    let cfg = ChainConfig { chains: 2, warmup: 300, draws_per_chain: 500 };
    let r = log_bf(&spec("2>1", 2), &spec("1=2", 2), &stats, 0.5, &cfg, 3);
    match r {
        Err(crate::error::Error::Numeric(msg)) => {
            assert!(msg.contains("order constraint"), "{msg}");
        }
        other => panic!("expected numeric error, got {other:?}"),
    }
}

#[test]
fn math_garden_adjacent_pairs_concentrate_above_one() {
    // joint-model pairwise posteriors: P(delta_ij > 1 | d) must exceed
    // 0.999 for every adjacent grade pair
    let ns = [6410u64, 9395, 9160, 7549, 6007, 3280];
    let sds = [3.08, 3.69, 4.62, 4.97, 5.39, 5.99];
    let stats: Vec<GroupStats> = ns
        .iter()
        .zip(sds.iter())
        .map(|(&n, &sd)| GroupStats::from_sd(n, sd, crate::hypotheses::SdConvention::Unbiased).unwrap())
        .collect();
    let draws = sample_posterior(&stats, 0.5, &quick_config(), 11).unwrap();
    let pairs = pairwise_delta_summaries(&draws, 0.95).unwrap();
    for p in &pairs {
        assert!((0.0..=1.0).contains(&p.p_gt_1));
    }
    for p in pairs.iter().filter(|p| p.j == p.i + 1) {
        assert!(p.p_gt_1 > 0.999, "adjacent pair ({}, {}): {}", p.i, p.j, p.p_gt_1);
    }
}
