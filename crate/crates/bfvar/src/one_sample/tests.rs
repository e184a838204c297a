use super::*;
use crate::two_sample::DeltaInterval;
use approx::assert_abs_diff_eq;

fn problem(n: u64, ss: f64, tau0: f64) -> OneSampleProblem {
    OneSampleProblem::new(n, ss, tau0).unwrap()
}

#[test]
fn predictive_matching_n1() {
    let p = problem(1, 0.0, 2.0);
    assert_eq!(log_bf10_one(&p, 0.5).unwrap().log_bf10, 0.0);
    assert_eq!(log_bf10_one(&p, 3.0).unwrap().log_bf10, 0.0);
}

#[test]
fn validation_errors() {
    assert!(OneSampleProblem::new(0, 0.0, 1.0).is_err());
    assert!(OneSampleProblem::new(1, 1.0, 1.0).is_err());
    assert!(OneSampleProblem::new(5, -1.0, 1.0).is_err());
    assert!(OneSampleProblem::new(5, 1.0, 0.0).is_err());
    assert!(log_bf10_one(&problem(5, 0.0, 1.0), 0.5).is_err());
    assert!(log_bf10_one(&problem(5, 1.0, 1.0), 0.0).is_err());
}

#[test]
fn tricomi_path_matches_quadrature() {
    // the untruncated directed BF integrates the same integrand the U
    // formula evaluates in closed form
    for &(n, ss, tau0, alpha) in &[
        (7u64, 6.0 * 0.22 * 0.22, 10.0, 2.16),
        (50, 49.0 * 1.3, 0.8, 0.5),
        (20, 19.0 * 0.5, 2.0, 1.0),
        (1000, 999.0 * 2.0, 0.4, 0.25),
    ] {
        let p = problem(n, ss, tau0);
        let closed = log_bf10_one(&p, alpha).unwrap().log_bf10;
        let quad = log_bf_directed_one(
            &p,
            alpha,
            &DeltaHypothesis::Point(1.0),
            &DeltaHypothesis::Interval(DeltaInterval::full()),
        )
        .unwrap()
        .log_bf10;
        assert!(
            (closed - quad).abs() < 1e-6 * closed.abs().max(1.0),
            "n={n}: closed {closed} vs quad {quad}"
        );
    }
}

#[test]
fn pcb_example_orientation() {
    // seven PCB readings, sd(x) = 0.2225394...; the published analysis plugs
    // the unbiased sd into the divisor-n formulas, so ss = n * sd^2
    let x: [f64; 7] = [6.2, 5.8, 5.7, 6.3, 5.9, 5.8, 6.0];
    let mean = x.iter().sum::<f64>() / 7.0;
    let ss_raw: f64 = x.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss_raw / 6.0).sqrt();
    let p = problem(7, 7.0 * sd * sd, 10.0);
    let r = log_bf_directed_one(
        &p,
        2.16,
        &DeltaHypothesis::Point(1.0),
        &DeltaHypothesis::Interval(DeltaInterval::new(1.0, f64::INFINITY).unwrap()),
    )
    .unwrap();
    let bf_0m = (-r.log_bf10).exp();
    assert_abs_diff_eq!(bf_0m, 1.0184551673566513, epsilon = 1e-6);
}

#[test]
fn identical_hypotheses_give_even_odds() {
    let p = problem(12, 11.0 * 0.8, 2.0);
    let iv = DeltaHypothesis::Interval(DeltaInterval::new(0.5, 2.0).unwrap());
    let r = log_bf_directed_one(&p, 0.7, &iv, &iv).unwrap();
    assert_abs_diff_eq!(r.log_bf10, 0.0, epsilon = 1e-12);
}

#[test]
fn scale_invariance() {
    // (ss, tau0) -> (c ss, tau0 / c) leaves every BF unchanged
    let alpha = 0.8;
    let base = log_bf10_one(&problem(23, 17.0, 1.4), alpha).unwrap().log_bf10;
    for &c in &[1e-4, 0.3, 12.0, 1e6] {
        let v = log_bf10_one(&problem(23, 17.0 * c, 1.4 / c), alpha).unwrap().log_bf10;
        assert_abs_diff_eq!(v, base, epsilon = 1e-10 * base.abs().max(1.0));
    }
}

#[test]
fn posterior_delta_normalizes() {
    let p = problem(30, 29.0 * 0.5, 1.5);
    let alpha = 0.5;
    // integrate the delta density over (0, inf) by the rho substitution
    let rule = crate::specfun::gauss_legendre(400).unwrap();
    let total = rule.integrate(0.0, 1.0, |r| {
        if r <= 0.0 || r >= 1.0 {
            return 0.0;
        }
        let d = (r / (1.0 - r)).sqrt();
        posterior_delta_pdf_one(d, &p, alpha).unwrap() / (2.0 * d * (1.0 - r) * (1.0 - r))
    });
    assert_abs_diff_eq!(total, 1.0, epsilon = 1e-6);
}

#[test]
fn posterior_mode_near_consistency_point() {
    // large n: mode of the delta posterior approaches sqrt(tau_hat / tau0)
    let n = 10_000u64;
    let tau_hat = 2.0;
    let ss = (n as f64 - 1.0) / tau_hat;
    let p = problem(n, ss, 1.0);
    let alpha = 0.5;
    let target = tau_hat.sqrt();
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut d = 0.8 * target;
    while d < 1.2 * target {
        let v = posterior_delta_pdf_one(d, &p, alpha).unwrap();
        if v > best.1 {
            best = (d, v);
        }
        d += target * 0.0005;
    }
    assert!((best.0 - target).abs() / target < 0.05, "mode {} vs {target}", best.0);
}

#[test]
fn change_of_variables_to_xi_density() {
    // p_xi(xi) = p_delta(sqrt(xi)) / (2 sqrt(xi)) pointwise
    let p = problem(15, 14.0 * 1.2, 0.9);
    let alpha = 1.3;
    let norm = log_ml_delta_hypothesis_one(&DeltaHypothesis::Interval(DeltaInterval::full()), &p, alpha).unwrap();
    for &xi in &[0.2f64, 0.7, 1.0, 2.5, 9.0] {
        let d = xi.sqrt();
        let lhs = posterior_delta_pdf_one(d, &p, alpha).unwrap() / (2.0 * d);
        let log_prior = (alpha - 1.0) * xi.ln() - 2.0 * alpha * xi.ln_1p() - crate::specfun::log_beta(alpha, alpha).unwrap();
        let rhs = (log_prior + p.log_ell(xi) - norm).exp();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-10 * lhs.max(1e-10));
    }
}

#[test]
fn summary_brackets_truth() {
    let n = 200u64;
    let tau_hat = 4.0; // delta ~ 2 against tau0 = 1
    let p = problem(n, (n as f64 - 1.0) / tau_hat, 1.0);
    let s = delta_posterior_summary_one(&p, 0.5, 0.95).unwrap();
    assert!(s.ci_lo < 2.0 && 2.0 < s.ci_hi, "{s:?}");
    assert!((s.median - 2.0).abs() < 0.2);
    assert!((s.mean.unwrap() - 2.0).abs() < 0.2);
}
