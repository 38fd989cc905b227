//! Dirichlet maximum-likelihood fitting: inverse digamma by Newton's method
//! and the fixed-point update on observed log-mean sufficient statistics.

use statrs::function::gamma::{digamma, ln_gamma};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Trigamma via the ascending recurrence and the asymptotic series.
pub fn trigamma(x: f64) -> f64 {
    assert!(x > 0.0, "trigamma domain");
    let mut acc = 0.0;
    let mut x = x;
    while x < 6.0 {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // 1/x + 1/(2x^2) + 1/(6x^3) - 1/(30x^5) + 1/(42x^7) - 1/(30x^9)
    acc + inv
        + 0.5 * inv2
        + inv2 * inv * (1.0 / 6.0 + inv2 * (-1.0 / 30.0 + inv2 * (1.0 / 42.0 - inv2 / 30.0)))
}

/// Inverse digamma: the `x > 0` with `digamma(x) = y`, to 1e-10.
///
/// Initialization is `exp(y) + 1/2` for `y >= -2.22` and `-1 / (y + gamma)`
/// below, then at most ten Newton steps.
pub fn digamma_inverse(y: f64) -> f64 {
    let mut x = if y >= -2.22 {
        y.exp() + 0.5
    } else {
        -1.0 / (y + EULER_GAMMA)
    };
    for _ in 0..10 {
        let step = (digamma(x) - y) / trigamma(x);
        x -= step;
        if x <= 0.0 {
            x = 1e-12;
        }
        if step.abs() < 1e-12 * x.max(1.0) {
            break;
        }
    }
    x
}

/// Outcome of the fixed-point fit.
#[derive(Debug, Clone, PartialEq)]
pub enum DirichletFit {
    Converged { alpha: Vec<f64>, iterations: usize },
    Diverged,
}

/// Maximum-likelihood concentration for observed sufficient statistics
/// `log_p_bar[k] = mean_i log p_ik`, by iterating
/// `alpha_k <- inv_digamma(digamma(sum alpha) + log_p_bar[k])`.
///
/// Returns [`DirichletFit::Diverged`] after `max_iter` iterations without
/// convergence or if the precision blows up, which happens when the observed
/// distributions carry no variance.
pub fn fit_dirichlet(log_p_bar: &[f64], max_iter: usize) -> DirichletFit {
    let k = log_p_bar.len();
    assert!(k >= 2);
    // By Jensen, sum_k exp(log_p_bar[k]) <= 1 with equality exactly when the
    // observed distributions carry no variance; near the boundary the
    // implied precision exceeds any useful magnitude, so treat it as
    // divergent up front.
    let mass: f64 = log_p_bar.iter().map(|lp| lp.exp()).sum();
    if mass >= 1.0 - 1e-7 {
        return DirichletFit::Diverged;
    }
    // Moment-matched start: for precision c the expected statistics satisfy
    // mass ~ 1 - (k - 1) / (2c), which puts the start close to the fixed
    // point and keeps the iteration count low.
    let c0 = ((k as f64 - 1.0) / (2.0 * (1.0 - mass))).clamp(1e-3, 1e7);
    let mut alpha: Vec<f64> = log_p_bar.iter().map(|lp| c0 * lp.exp() / mass).collect();
    for it in 0..max_iter {
        let total: f64 = alpha.iter().sum();
        if !total.is_finite() || total > 1e8 {
            return DirichletFit::Diverged;
        }
        let base = digamma(total);
        let mut max_rel = 0.0f64;
        let mut next = Vec::with_capacity(k);
        for (i, &lp) in log_p_bar.iter().enumerate() {
            let a = digamma_inverse(base + lp);
            max_rel = max_rel.max((a - alpha[i]).abs() / alpha[i].max(1e-12));
            next.push(a);
        }
        alpha = next;
        if max_rel < 1e-12 {
            return DirichletFit::Converged {
                alpha,
                iterations: it + 1,
            };
        }
    }
    DirichletFit::Diverged
}

/// Per-sample Dirichlet log-likelihood
/// `ln Gamma(sum a) - sum ln Gamma(a_k) + sum (a_k - 1) log_p_bar[k]`,
/// the objective the fixed point maximizes.
pub fn dirichlet_log_likelihood(alpha: &[f64], log_p_bar: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let mut ll = ln_gamma(total);
    for (&a, &lp) in alpha.iter().zip(log_p_bar) {
        ll -= ln_gamma(a);
        ll += (a - 1.0) * lp;
    }
    ll
}
