//! Numerically stable special functions and quadrature.
//!
//! Everything that can be large or small is carried in log scale: the
//! Gaussian hypergeometric function and Tricomi's U are returned as logs, and
//! the generic integrator works on log-integrands. Accuracy targets are
//! documented per function; double precision throughout.

pub(crate) mod logquad;

use crate::error::{domain, numeric, Result};

/// Nodes and weights of a Gauss-Legendre rule on [-1, 1].
///
/// Nodes are strictly increasing and symmetric about 0; weights are positive
/// and sum to 2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    /// Apply the rule to `f` over [a, b].
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(self.weights.iter())
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }
}

// Lanczos approximation (g = 607/128, 15 coefficients, Godfrey's set);
// relative error of ln Gamma below 1e-14 on (0, 1e10).
const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS: [f64; 15] = [
    0.99999999999999709182,
    57.156235665862923517,
    -59.597960355475491248,
    14.136097974741747174,
    -0.49191381609762019978,
    0.33994649984811888699e-4,
    0.46523628927048575665e-4,
    -0.98374475304879564677e-4,
    0.15808870322491248884e-3,
    -0.21026444172410488319e-3,
    0.21743961811521264320e-3,
    -0.16431810653676389022e-3,
    0.84418223983852743293e-4,
    -0.26190838401581408670e-4,
    0.36899182659531622704e-5,
];

pub(crate) fn lgamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // reflection keeps the Lanczos argument away from 0
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - lgamma(1.0 - x);
    }
    let xm = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (xm + i as f64);
    }
    let t = xm + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (xm + 0.5) * t.ln() - t + acc.ln()
}

/// ln Gamma(x) for x > 0.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(domain(format!("log_gamma requires finite x > 0, got {x}")));
    }
    Ok(lgamma(x))
}

pub(crate) fn lbeta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// ln B(a, b) for a, b > 0.
pub fn log_beta(a: f64, b: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || a <= 0.0 || b <= 0.0 {
        return Err(domain(format!("log_beta requires finite a, b > 0, got ({a}, {b})")));
    }
    Ok(lbeta(a, b))
}

/// Regularized incomplete beta function I_x(a, b).
///
/// Continued-fraction evaluation (modified Lentz); absolute error below
/// 1e-13 across the tested range.
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !x.is_finite() {
        return Err(domain(format!("reg_inc_beta requires x in [0, 1], got {x}")));
    }
    if !a.is_finite() || !b.is_finite() || a <= 0.0 || b <= 0.0 {
        return Err(domain(format!("reg_inc_beta requires a, b > 0, got ({a}, {b})")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let front = (a * x.ln() + b * (-x).ln_1p() - lbeta(a, b)).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(front * beta_cf(x, a, b)? / a)
    } else {
        Ok(1.0 - front * beta_cf(1.0 - x, b, a)? / b)
    }
}

fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=4000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(numeric(format!("reg_inc_beta continued fraction did not converge (a={a}, b={b}, x={x})")))
}

pub(crate) fn gauss_legendre_unchecked(order: usize) -> (Vec<f64>, Vec<f64>) {
    let n = order;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0;
            let mut p1 = 0.0;
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j as f64 + 1.0) * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            pp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / pp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Gauss-Legendre rule of the given order on [-1, 1]; exact for polynomials
/// of degree <= 2*order - 1.
pub fn gauss_legendre(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(domain("gauss_legendre requires order >= 1"));
    }
    let (nodes, weights) = gauss_legendre_unchecked(order);
    Ok(QuadratureRule { nodes, weights })
}

const MAX_SERIES_TERMS: usize = 1_000_000;

/// Streaming signed log-sum accumulator.
struct SignedLogSum {
    pos_max: f64,
    pos_sum: f64,
    neg_max: f64,
    neg_sum: f64,
}

impl SignedLogSum {
    fn new() -> Self {
        SignedLogSum { pos_max: f64::NEG_INFINITY, pos_sum: 0.0, neg_max: f64::NEG_INFINITY, neg_sum: 0.0 }
    }

    fn add(&mut self, log_abs: f64, positive: bool) {
        let (m, s) = if positive { (&mut self.pos_max, &mut self.pos_sum) } else { (&mut self.neg_max, &mut self.neg_sum) };
        if log_abs == f64::NEG_INFINITY {
            return;
        }
        if log_abs > *m {
            *s = *s * (*m - log_abs).exp() + 1.0;
            *m = log_abs;
        } else {
            *s += (log_abs - *m).exp();
        }
    }

    /// ln of (positive part - negative part); error on sign loss or severe
    /// cancellation.
    fn log_value(&self) -> Result<f64> {
        let lp = self.pos_max + self.pos_sum.ln();
        if self.neg_max == f64::NEG_INFINITY {
            return Ok(lp);
        }
        let ln = self.neg_max + self.neg_sum.ln();
        if ln >= lp {
            return Err(numeric("series sum is not positive"));
        }
        let ratio = (ln - lp).exp();
        if 1.0 - ratio < 1e-13 {
            return Err(numeric("series suffered catastrophic cancellation"));
        }
        Ok(lp + (-ratio).ln_1p())
    }

    fn current_log_abs(&self) -> f64 {
        self.pos_max.max(self.neg_max)
    }
}

/// ln 2F1(a, b; c; z) in the Euler-integral regime c > b > 0, z <= 1.
///
/// Power series after Euler/Pfaff transformations when the transformed
/// series is well conditioned; falls back to log-space quadrature of the
/// Euler integral otherwise. The two paths agree on their overlap (tested).
pub fn log_2f1(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    if ![a, b, c, z].iter().all(|v| v.is_finite()) {
        return Err(domain("log_2f1 requires finite arguments"));
    }
    if z > 1.0 {
        return Err(domain(format!("log_2f1 requires z <= 1, got {z}")));
    }
    if !(c > b && b > 0.0) {
        return Err(domain(format!("log_2f1 requires c > b > 0 (Euler regime), got b={b}, c={c}")));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == 1.0 {
        // Gauss summation; finite only when c - a - b > 0
        if c - a - b <= 0.0 {
            return Err(domain("log_2f1 at z = 1 requires c - a - b > 0"));
        }
        return Ok(lgamma(c) + lgamma(c - a - b) - lgamma(c - a) - lgamma(c - b));
    }

    // candidate routes: (log prefactor, a', b', z')
    let mut routes: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(4);
    routes.push((0.0, a, b, z));
    routes.push(((c - a - b) * (-z).ln_1p(), c - a, c - b, z));
    if z < 0.0 {
        let w = z / (z - 1.0);
        routes.push((-a * (-z).ln_1p(), a, c - b, w));
        routes.push((-b * (-z).ln_1p(), c - a, b, w));
    }
    // prefer all-positive-parameter routes with the cheapest expected tail
    routes.sort_by(|x, y| route_cost(x, c).partial_cmp(&route_cost(y, c)).unwrap());
    for &(prefix, ra, rb, rz) in &routes {
        if rz.abs() >= 1.0 {
            continue;
        }
        if let Ok(v) = series_2f1_signed(ra, rb, c, rz, MAX_SERIES_TERMS) {
            return Ok(prefix + v);
        }
    }
    log_2f1_euler_integral(a, b, c, z)
}

fn route_cost(route: &(f64, f64, f64, f64), c: f64) -> f64 {
    let (_, a, b, z) = *route;
    if z.abs() >= 1.0 {
        return f64::INFINITY;
    }
    // rough expected term count: geometric decay at rate |z| with polynomial
    // drag k^(a + b - c - 1)
    let base = 39.0 / (-(z.abs().ln())).max(1e-12);
    let drag = (a + b - c - 1.0).max(0.0);
    let mixed_sign_penalty = if a < 0.0 || b < 0.0 { 1e7 } else { 0.0 };
    base * (1.0 + 0.1 * drag) + mixed_sign_penalty
}

/// Power series with cumulative sign tracking, log-scale accumulation.
fn series_2f1_signed(a: f64, b: f64, c: f64, z: f64, max_terms: usize) -> Result<f64> {
    let mut acc = SignedLogSum::new();
    acc.add(0.0, true);
    let mut log_term = 0.0_f64;
    let mut positive = true;
    let mut small_streak = 0;
    for k in 0..max_terms {
        let kf = k as f64;
        let na = a + kf;
        let nb = b + kf;
        if na == 0.0 || nb == 0.0 {
            return acc.log_value();
        }
        log_term += na.abs().ln() + nb.abs().ln() + z.abs().ln() - (c + kf).ln() - (kf + 1.0).ln();
        let step_positive = ((na > 0.0) == (nb > 0.0)) == (z > 0.0);
        positive = positive == step_positive;
        acc.add(log_term, positive);
        if log_term < acc.current_log_abs() + (1e-17f64).ln() {
            small_streak += 1;
            if small_streak >= 3 && k >= 8 {
                return acc.log_value();
            }
        } else {
            small_streak = 0;
        }
        if log_term > 1e12 {
            return Err(numeric("2F1 series diverged"));
        }
    }
    Err(numeric(format!("2F1 series did not converge within {max_terms} terms (a={a}, b={b}, c={c}, z={z})")))
}

/// Euler-integral route: ln of
/// int_0^1 rho^(b-1) (1-rho)^(c-b-1) (1-z rho)^(-a) drho / B(b, c-b).
fn log_2f1_euler_integral(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    let cb = c - b;
    // the rho and (1-rho) powers ride in the quadrature weights; only the
    // (1 - z rho) factor stays here, formed as (1-rho) + rho (1-z) so both
    // addends are positive for z < 1
    let f = move |_r: f64, d_lo: f64, d_hi: f64| -> f64 {
        let one_minus_zr = d_hi + d_lo * (1.0 - z);
        -a * one_minus_zr.ln()
    };
    let peak = euler_integrand_peak(a, b, c, z);
    let noise = 1e-15 * (a.abs() + b + cb);
    let v = logquad::log_integrate(
        &logquad::LogIntegrand { f: &f, left_pow: b, right_pow: cb, peak: peak.map(|p| (p, None)), noise },
        0.0,
        1.0,
    )?;
    Ok(v - lbeta(b, cb))
}

/// Stationary point of the Euler integrand (quadratic in rho), if interior.
fn euler_integrand_peak(a: f64, b: f64, c: f64, z: f64) -> Option<f64> {
    let b1 = b - 1.0;
    let b2 = c - b - 1.0;
    let qa = z * (c - 2.0 - a);
    let qb = a * z - b1 * (1.0 + z) - b2;
    let qc = b1;
    let roots = solve_quadratic(qa, qb, qc);
    roots.into_iter().find(|&r| r > 0.0 && r < 1.0)
}

pub(crate) fn solve_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    if a.abs() < 1e-300 {
        if b.abs() < 1e-300 {
            return vec![];
        }
        return vec![-c / b];
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return vec![];
    }
    let sq = disc.sqrt();
    // numerically stable pair
    let q = -0.5 * (b + b.signum() * sq);
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// ln U(a, b, z) for a > 0, z > 0, via the integral
/// U = (1/Gamma(a)) int_0^inf t^(a-1) (1+t)^(b-a-1) e^(-zt) dt,
/// evaluated in log scale in the coordinate v = ln t.
pub fn log_tricomi_u(a: f64, b: f64, z: f64) -> Result<f64> {
    if !a.is_finite() || !b.is_finite() || !z.is_finite() {
        return Err(domain("log_tricomi_u requires finite arguments"));
    }
    if a <= 0.0 || z <= 0.0 {
        return Err(domain(format!("log_tricomi_u requires a > 0 and z > 0, got a={a}, z={z}")));
    }
    let g = move |v: f64| -> f64 {
        let ev = v.exp();
        if !ev.is_finite() || z * ev > 1e306 {
            return f64::NEG_INFINITY;
        }
        let softplus = if v > 36.0 { v + (-v).exp().ln_1p() } else { ev.ln_1p() };
        a * v + (b - a - 1.0) * softplus - z * ev
    };
    // stationary point of the t-space integrand: z t^2 + (z + 1 - b) t - a = 0
    let tstar = {
        let qb = z + 1.0 - b;
        let disc = qb * qb + 4.0 * z * a;
        (-qb + disc.sqrt()) / (2.0 * z)
    };
    let vstar = tstar.max(1e-300).ln();
    let mut scale = 1.0;
    let h = 1e-4;
    let d2 = (g(vstar + h) - 2.0 * g(vstar) + g(vstar - h)) / (h * h);
    if d2 < 0.0 {
        let s = (-1.0 / d2).sqrt();
        if s.is_finite() && s > 1e-8 {
            scale = s;
        }
    }
    let noise = 1e-15 * (a + b.abs() + z * tstar + 1.0);
    let log_integral = logquad::log_integrate_line(&g, vstar, scale, noise)?;
    Ok(log_integral - lgamma(a))
}

#[cfg(test)]
pub(crate) fn log_2f1_integral_for_tests(a: f64, b: f64, c: f64, z: f64) -> Result<f64> {
    log_2f1_euler_integral(a, b, c, z)
}
