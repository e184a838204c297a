//! Iterative optimal bridge sampling estimator of the log marginal
//! likelihood, with a moment-matched Gaussian proposal in the unconstrained
//! stick coordinates.
//!
//! The posterior sample is split in half: the first half fits the proposal
//! moments, the second enters the estimator, and as many fresh proposal
//! draws are generated (seeded deterministically from the posterior's own
//! seed). The iteration is the standard Meng-Wong update on r, run until
//! successive log updates differ by less than 1e-10; the standard error is
//! the usual relative-MSE approximation with the posterior term corrected
//! by the effective sample size of its bridge weights.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{mcmc, BlockModel, BridgeResult, PosteriorDraws};
use crate::error::{domain, numeric, Result};

const MAX_ITER: usize = 20_000;
const TOL: f64 = 1e-10;
const PROPOSAL_STREAM: u64 = 0x5eed_b71d;

struct Mvn {
    mean: Vec<f64>,
    chol: Vec<Vec<f64>>, // lower triangular
    log_norm: f64,       // -(m/2) ln(2 pi) - sum ln L_ii
}

impl Mvn {
    fn fit(sample: &[Vec<f64>]) -> Result<Mvn> {
        let n = sample.len();
        let m = sample[0].len();
        if n < m + 2 {
            return Err(domain("too few draws to fit the bridge proposal"));
        }
        let mut mean = vec![0.0; m];
        for row in sample {
            for i in 0..m {
                mean[i] += row[i];
            }
        }
        for v in &mut mean {
            *v /= n as f64;
        }
        let mut cov = vec![vec![0.0; m]; m];
        for row in sample {
            for i in 0..m {
                for j in 0..=i {
                    cov[i][j] += (row[i] - mean[i]) * (row[j] - mean[j]);
                }
            }
        }
        for i in 0..m {
            for j in 0..=i {
                cov[i][j] /= (n - 1) as f64;
                cov[j][i] = cov[i][j];
            }
        }
        let chol = cholesky(&cov)
            .ok_or_else(|| numeric("bridge proposal covariance is not positive definite"))?;
        let log_det_half: f64 = chol.iter().enumerate().map(|(i, r)| r[i].ln()).sum();
        let log_norm = -0.5 * m as f64 * (2.0 * std::f64::consts::PI).ln() - log_det_half;
        Ok(Mvn { mean, chol, log_norm })
    }

    fn log_pdf(&self, y: &[f64]) -> f64 {
        let m = self.mean.len();
        let mut z = vec![0.0; m];
        // forward solve L z = y - mean
        for i in 0..m {
            let mut s = y[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol[i][j] * z[j];
            }
            z[i] = s / self.chol[i][i];
        }
        self.log_norm - 0.5 * z.iter().map(|v| v * v).sum::<f64>()
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let m = self.mean.len();
        let z: Vec<f64> = (0..m).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        (0..m)
            .map(|i| self.mean[i] + (0..=i).map(|j| self.chol[i][j] * z[j]).sum::<f64>())
            .collect()
    }
}

fn cholesky(a: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let m = a.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                // tiny ridge against nearly singular sample covariances
                let d = s + 1e-12 * a[i][i].abs().max(1e-12);
                if d <= 0.0 {
                    return None;
                }
                l[i][j] = d.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    Some(l)
}

pub(crate) fn bridge_model(draws: &PosteriorDraws, model: &BlockModel) -> Result<BridgeResult> {
    let all = draws.draws();
    if all.len() < 16 {
        return Err(domain("bridge sampling needs at least 16 posterior draws"));
    }
    if all[0].len() != model.k() {
        return Err(domain(format!(
            "draws have {} coordinates but the model has {} blocks",
            all[0].len(),
            model.k()
        )));
    }
    let ys: Vec<Vec<f64>> = all.iter().map(|rho| mcmc::sticks_from_rho(rho)).collect();
    let half = ys.len() / 2;
    let proposal = Mvn::fit(&ys[..half])?;
    let estimation = &ys[half..];
    let n1 = estimation.len();
    let n2 = n1;

    let mut rng = ChaCha8Rng::seed_from_u64(draws.seed());
    rng.set_stream(PROPOSAL_STREAM);

    // l_i on posterior draws, l~_j on proposal draws
    let l_post: Vec<f64> = estimation
        .iter()
        .map(|y| mcmc::log_target(model, y) - proposal.log_pdf(y))
        .collect();
    let l_prop: Vec<f64> = (0..n2)
        .map(|_| {
            let y = proposal.draw(&mut rng);
            mcmc::log_target(model, &y) - proposal.log_pdf(&y)
        })
        .collect();

    let mut lstar: Vec<f64> = l_post.clone();
    lstar.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lstar = lstar[lstar.len() / 2];

    let s1 = n1 as f64 / (n1 + n2) as f64;
    let s2 = n2 as f64 / (n1 + n2) as f64;

    let mut r = 1.0_f64;
    let mut log_r = 0.0_f64;
    let mut iterations = 0;
    loop {
        iterations += 1;
        // numerator: mean over proposal draws of e^(l-lstar) / (s1 e^(l-lstar) + s2 r)
        let num: f64 = l_prop
            .iter()
            .map(|&l| {
                let e = (l - lstar).exp();
                if e.is_infinite() {
                    1.0 / s1
                } else {
                    e / (s1 * e + s2 * r)
                }
            })
            .sum::<f64>()
            / n2 as f64;
        let den: f64 = l_post
            .iter()
            .map(|&l| {
                let e = (l - lstar).exp();
                1.0 / (s1 * e + s2 * r)
            })
            .sum::<f64>()
            / n1 as f64;
        if !(num > 0.0) || !(den > 0.0) || !num.is_finite() || !den.is_finite() {
            return Err(numeric("bridge iteration produced a non-finite update"));
        }
        let r_new = num / den;
        let log_r_new = r_new.ln();
        let delta = (log_r_new - log_r).abs();
        r = r_new;
        log_r = log_r_new;
        if delta < TOL {
            break;
        }
        if iterations >= MAX_ITER {
            return Err(numeric(format!(
                "bridge sampling did not converge within {MAX_ITER} iterations (last delta {delta:.3e})"
            )));
        }
    }

    // relative-MSE approximation of the estimator variance
    let f2: Vec<f64> = l_prop
        .iter()
        .map(|&l| {
            let e = (l - lstar).exp();
            if e.is_infinite() {
                1.0 / s1
            } else {
                e / (s1 * e + s2 * r)
            }
        })
        .collect();
    let f1: Vec<f64> = l_post
        .iter()
        .map(|&l| {
            let e = (l - lstar).exp();
            1.0 / (s1 * e + s2 * r)
        })
        .collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], mu: f64| v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() as f64 - 1.0);
    let mu2 = mean(&f2);
    let mu1 = mean(&f1);
    let ess1 = ess_of(&f1).max(4.0);
    let re2 = var(&f2, mu2) / (n2 as f64 * mu2 * mu2) + var(&f1, mu1) / (ess1 * mu1 * mu1);
    let se = re2.max(0.0).sqrt();

    Ok(BridgeResult { log_ml: log_r + lstar + model.log_const(), se, iterations })
}

fn ess_of(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 8 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (x[i] - mean) * (x[i + lag] - mean);
        }
        s / n as f64 / var
    };
    let mut tau = 1.0;
    let mut prev = f64::INFINITY;
    let mut lag = 1;
    while lag + 1 < n / 2 {
        let pair = autocov(lag) + autocov(lag + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        prev = pair;
        tau += 2.0 * pair;
        lag += 2;
    }
    n as f64 / tau
}
