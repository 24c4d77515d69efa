//! Poisson, binomial, gamma and Erlang helpers, evaluated in log space where
//! it matters.

use libm::{exp, lgamma, log, log1p};

/// ln(n!)
pub fn ln_factorial(n: u64) -> f64 {
    if n < 2 {
        0.0
    } else {
        lgamma(n as f64 + 1.0)
    }
}

/// ln C(n, k); `-inf` when k > n.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0 || k == n {
        return 0.0;
    }
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

/// ln of the Poisson(λ) pmf at k.
pub fn ln_poisson_pmf(k: u64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * log(lambda) - lambda - ln_factorial(k)
}

/// λ^k e^{-λ} / k!
pub fn poisson_pmf(k: u64, lambda: f64) -> f64 {
    exp(ln_poisson_pmf(k, lambda))
}

const GAMMA_EPS: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 100_000;

// Series for ln P(a, x) valid for x < a + 1.
fn ln_gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..GAMMA_MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * GAMMA_EPS {
            break;
        }
    }
    a * log(x) - x - lgamma(a) + log(sum)
}

// Lentz continued fraction for ln Q(a, x) valid for x >= a + 1.
fn ln_gamma_q_cf(a: f64, x: f64) -> f64 {
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..GAMMA_MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < GAMMA_EPS {
            break;
        }
    }
    a * log(x) - x - lgamma(a) + log(h)
}

/// Regularized lower incomplete gamma P(a, x) for a > 0, x ≥ 0.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return 1.0;
    }
    if x < a + 1.0 {
        exp(ln_gamma_p_series(a, x))
    } else {
        1.0 - exp(ln_gamma_q_cf(a, x))
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        1.0 - exp(ln_gamma_p_series(a, x))
    } else {
        exp(ln_gamma_q_cf(a, x))
    }
}

/// ln P(a, x), accurate when P is far below the smallest normal double.
pub fn ln_gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        ln_gamma_p_series(a, x)
    } else {
        log1p(-exp(ln_gamma_q_cf(a, x)))
    }
}

/// CDF of Erlang(k, rate) at t.
pub fn erlang_cdf(k: u32, rate: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    gamma_p(k as f64, rate * t)
}

/// Density of Erlang(k, rate) at t.
pub fn erlang_pdf(k: u32, rate: f64, t: f64) -> f64 {
    if t < 0.0 || k == 0 {
        return 0.0;
    }
    if t == 0.0 {
        return if k == 1 { rate } else { 0.0 };
    }
    let k = k as f64;
    exp(k * log(rate) + (k - 1.0) * log(t) - rate * t - lgamma(k))
}
