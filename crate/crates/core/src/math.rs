//! Log-domain numerics and the handful of random variates the samplers need.

use alloc::vec::Vec;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Natural log of a probability that may be exactly zero.
pub fn ln_prob(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else {
        libm::log(p)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    if m == f64::INFINITY {
        return m;
    }
    let s: f64 = xs.iter().map(|&x| libm::exp(x - m)).sum();
    m + libm::log(s)
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + libm::log(libm::exp(a - m) + libm::exp(b - m))
}

/// Normalize log-weights in place into probabilities. Returns the log normalizer.
pub fn normalize_log(xs: &mut [f64]) -> f64 {
    let z = log_sum_exp(xs);
    for x in xs.iter_mut() {
        *x = if z == f64::NEG_INFINITY {
            0.0
        } else {
            libm::exp(*x - z)
        };
    }
    z
}

/// Draw an index proportional to nonnegative weights. `None` when every weight is zero.
pub fn sample_weighted<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return None;
    }
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            if u < w {
                return Some(i);
            }
            u -= w;
            last = Some(i);
        }
    }
    last
}

/// Draw an index proportional to `exp(log_weights)`.
pub fn sample_log_weighted<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Option<usize> {
    let m = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m.is_nan() {
        return None;
    }
    let w: Vec<f64> = log_weights.iter().map(|&x| libm::exp(x - m)).collect();
    sample_weighted(rng, &w)
}

/// Log of a Gamma(shape, 1) variate, stable for very small shapes.
pub fn sample_log_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return libm::log(g);
    }
    // G(a) = G(a + 1) * U^(1/a)
    let g: f64 = Gamma::new(shape + 1.0, 1.0)
        .expect("positive shape")
        .sample(rng);
    let u: f64 = open01(rng);
    libm::log(g) + libm::log(u) / shape
}

/// Dirichlet draw returned as log-probabilities (normalized).
pub fn sample_dirichlet_log<R: Rng + ?Sized>(rng: &mut R, alphas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = alphas.iter().map(|&a| sample_log_gamma(rng, a)).collect();
    let z = log_sum_exp(&out);
    for x in out.iter_mut() {
        *x -= z;
    }
    out
}

pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, alphas: &[f64]) -> Vec<f64> {
    let logs = sample_dirichlet_log(rng, alphas);
    let mut p: Vec<f64> = logs.iter().map(|&l| libm::exp(l)).collect();
    let s: f64 = p.iter().sum();
    for x in p.iter_mut() {
        *x /= s;
    }
    p
}

/// Log density of a Dirichlet at a point of the open simplex.
pub fn dirichlet_log_density(x: &[f64], alphas: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), alphas.len());
    let a0: f64 = alphas.iter().sum();
    let mut lp = ln_gamma(a0);
    for (&xi, &ai) in x.iter().zip(alphas) {
        lp += (ai - 1.0) * ln_prob(xi) - ln_gamma(ai);
    }
    lp
}

/// One stick-breaking proportion `v ~ Beta(1, alpha)` as `(ln v, ln(1 - v))`.
pub fn sample_stick_log<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> (f64, f64) {
    // inverse CDF: 1 - v = U^(1/alpha)
    let u: f64 = open01(rng);
    let ln_rest = libm::log(u) / alpha;
    let ln_v = libm::log(-libm::expm1(ln_rest));
    (ln_v, ln_rest)
}

/// Uniform draw on the open interval (0, 1).
pub fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// Log marginal likelihood of a bag of counts under Dirichlet-multinomial with
/// symmetric prior `beta`, conditioned on existing counts `prior`.
pub fn dirmult_log_predictive(
    prior: impl Fn(usize) -> f64,
    prior_total: f64,
    bag: &[(usize, u32)],
    vocab_size: usize,
    beta: f64,
) -> f64 {
    let vb = vocab_size as f64 * beta;
    let m: u32 = bag.iter().map(|&(_, c)| c).sum();
    let mut lp = ln_gamma(prior_total + vb) - ln_gamma(prior_total + m as f64 + vb);
    for &(v, c) in bag {
        let n = prior(v);
        lp += ln_gamma(n + c as f64 + beta) - ln_gamma(n + beta);
    }
    lp
}
