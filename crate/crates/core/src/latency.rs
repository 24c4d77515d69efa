//! Queuing-time law of an arriving scheduling request and its convolutions
//! with service time and frame alignment.
//!
//! An SR that lands at position l of its RRH's queue (counting transfers
//! already present) starts at once when l ≤ ĉ. Otherwise it waits for
//! l − ĉ completions of the ĉ busy servers, an Erlang(l − ĉ, ĉμ) delay.

use alloc::boxed::Box;
use alloc::format;
use alloc::vec::Vec;

use libm::{exp, expm1, lgamma, log};

use crate::error::{Error, Result};
use crate::markov::{OccupancyDistribution, OccupancyKind};
use crate::quadrature;
use crate::special::{gamma_p, ln_gamma_p};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErlangTerm {
    pub weight: f64,
    pub shape: u32,
    pub rate: f64,
}

/// Atom at zero plus a weighted sum of Erlang laws.
#[derive(Debug, Clone, PartialEq)]
pub struct LatencyMixture {
    pub atom_weight: f64,
    pub components: Vec<ErlangTerm>,
    /// ĉμ, the rate shared by every component of a queuing-time mixture.
    pub rate_common: f64,
    /// Frame length; sets the scale of percentile searches.
    pub frame: f64,
}

impl LatencyMixture {
    /// All mass at zero.
    pub fn atom(rate_common: f64, frame: f64) -> Self {
        LatencyMixture {
            atom_weight: 1.0,
            components: Vec::new(),
            rate_common,
            frame,
        }
    }

    /// A single Erlang(shape, rate) law.
    pub fn erlang(shape: u32, rate: f64, frame: f64) -> Self {
        LatencyMixture {
            atom_weight: 0.0,
            components: alloc::vec![ErlangTerm {
                weight: 1.0,
                shape,
                rate
            }],
            rate_common: rate,
            frame,
        }
    }

    pub fn total_weight(&self) -> f64 {
        self.atom_weight + self.components.iter().map(|c| c.weight).sum::<f64>()
    }

    pub fn mean(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.weight * c.shape as f64 / c.rate)
            .sum()
    }

    /// Pr(t₂ ≤ t)
    pub fn cdf(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let mut v = self.atom_weight;
        for c in &self.components {
            v += c.weight * gamma_p(c.shape as f64, c.rate * t);
        }
        v.min(1.0)
    }
}

/// Queuing-time law seen by an arriving SR at an RRH whose pre-arrival
/// occupancy is `pi`, with `servers` servers of rate `mu` each.
///
/// Each frame with q' > q contributes its q' − q arrivals, one at each
/// position q+1..=q'. Summed over q', position l collects π_q·Pr(q' ≥ l | q),
/// and the weights are normalised by the expected number of arrivals.
pub fn queuing_time_mixture(
    pi: &OccupancyDistribution,
    lambda: f64,
    servers: u32,
    mu: f64,
    frame: f64,
) -> Result<LatencyMixture> {
    if pi.kind != OccupancyKind::StationaryPreArrival {
        return Err(Error::arg(
            "queuing-time law needs a pre-arrival distribution",
        ));
    }
    if servers == 0 {
        return Err(Error::arg("servers must be at least 1"));
    }
    if !(mu > 0.0 && frame > 0.0) {
        return Err(Error::arg(format!(
            "service rate and frame must be positive, got {mu} and {frame}"
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!(
            "arrival rate must be finite and non-negative, got {lambda}"
        )));
    }
    let rate = servers as f64 * mu;
    if lambda == 0.0 {
        return Ok(LatencyMixture::atom(rate, frame));
    }
    let q_max = pi.q_max();
    // tail[m] = Pr(v ≥ m)
    let tail: Vec<f64> = (0..=q_max)
        .map(|m| {
            if m == 0 {
                1.0
            } else {
                gamma_p(m as f64, lambda)
            }
        })
        .collect();

    let mut position = alloc::vec![0.0; q_max + 1];
    for (q, &w) in pi.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for l in (q + 1)..=q_max {
            position[l] += w * tail[l - q];
        }
    }
    let total: f64 = position.iter().sum();
    if !(total > 0.0) {
        // Every state is saturated: no SR is ever admitted.
        return Ok(LatencyMixture::atom(rate, frame));
    }
    let c = servers as usize;
    let atom_weight = position.iter().take(c + 1).sum::<f64>() / total;
    let components = position
        .iter()
        .enumerate()
        .skip(c + 1)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, w)| ErlangTerm {
            weight: w / total,
            shape: (l - c) as u32,
            rate,
        })
        .collect();
    Ok(LatencyMixture {
        atom_weight,
        components,
        rate_common: rate,
        frame,
    })
}

/// Pr(t₂ ≤ t)
pub fn queuing_time_cdf(mix: &LatencyMixture, t: f64) -> f64 {
    mix.cdf(t)
}

/// CDF of Erlang(k, a) + Exp(b).
pub fn hypoexponential_cdf(k: u32, a: f64, b: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let kf = k as f64;
    let erlang = gamma_p(kf, a * t);
    let lagged = if a == b {
        return gamma_p(kf + 1.0, b * t);
    } else if a > b {
        // e^{-bt} (a/(a-b))^k P(k, (a-b)t)
        exp(-b * t + kf * log(a / (a - b)) + ln_gamma_p(kf, (a - b) * t))
    } else {
        // a^k t^k e^{-bt}/(k-1)! · Σ_n (dt)^n / (n! (n+k))
        let d = b - a;
        let lead = kf * log(a * t) - b * t - lgamma(kf);
        let dt = d * t;
        let ln_dt = log(dt);
        let mut sum = 0.0;
        let mut n = 0u32;
        let mut ln_fact = 0.0;
        loop {
            let ln_term = lead + n as f64 * ln_dt - ln_fact - log(n as f64 + kf);
            let term = exp(ln_term);
            sum += term;
            if (n as f64) > dt && term <= 1e-17 * sum {
                break;
            }
            n += 1;
            ln_fact += log(n as f64);
            if n > 1_000_000 {
                break;
            }
        }
        sum
    };
    (erlang - lagged).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKind {
    /// t₂
    Queuing,
    /// t₂ + t₃
    System,
    /// t₁ + t₂ + t₃
    Total,
}

/// A cumulative distribution over delays.
#[derive(Debug, Clone, PartialEq)]
pub enum LatencyCdf {
    Queuing(LatencyMixture),
    System {
        mixture: LatencyMixture,
        service_rate: f64,
    },
    /// `inner` smoothed by a Uniform(0, frame) alignment delay.
    Total {
        inner: Box<LatencyCdf>,
        frame: f64,
        quad_tol: f64,
    },
}

impl LatencyCdf {
    pub fn kind(&self) -> DelayKind {
        match self {
            LatencyCdf::Queuing(_) => DelayKind::Queuing,
            LatencyCdf::System { .. } => DelayKind::System,
            LatencyCdf::Total { .. } => DelayKind::Total,
        }
    }

    fn frame(&self) -> f64 {
        match self {
            LatencyCdf::Queuing(m) | LatencyCdf::System { mixture: m, .. } => m.frame,
            LatencyCdf::Total { frame, .. } => *frame,
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if t < 0.0 {
            return Ok(0.0);
        }
        match self {
            LatencyCdf::Queuing(m) => Ok(m.cdf(t)),
            LatencyCdf::System {
                mixture,
                service_rate,
            } => {
                let b = *service_rate;
                let mut v = mixture.atom_weight * -expm1(-b * t);
                for c in &mixture.components {
                    v += c.weight * hypoexponential_cdf(c.shape, c.rate, b, t);
                }
                Ok(v.min(1.0))
            }
            LatencyCdf::Total {
                inner,
                frame,
                quad_tol,
            } => {
                let upper = t.min(*frame);
                let mut failed = None;
                let v = quadrature::integrate(
                    |x| match inner.eval(t - x) {
                        Ok(v) => v,
                        Err(e) => {
                            failed = Some(e);
                            0.0
                        }
                    },
                    0.0,
                    upper,
                    quad_tol * frame,
                )?;
                if let Some(e) = failed {
                    return Err(e);
                }
                Ok((v / frame).clamp(0.0, 1.0))
            }
        }
    }
}

/// Law of t₂ + t₃ with Exp(mu) service.
pub fn system_time_cdf(mix: &LatencyMixture, mu: f64) -> Result<LatencyCdf> {
    if !(mu > 0.0) {
        return Err(Error::arg(format!(
            "service rate must be positive, got {mu}"
        )));
    }
    Ok(LatencyCdf::System {
        mixture: mix.clone(),
        service_rate: mu,
    })
}

/// Law of `sys` plus a Uniform(0, frame) alignment delay.
pub fn total_time_cdf(sys: &LatencyCdf, frame: f64, quad_tol: f64) -> Result<LatencyCdf> {
    if !(frame > 0.0) {
        return Err(Error::arg(format!("frame must be positive, got {frame}")));
    }
    Ok(LatencyCdf::Total {
        inner: Box::new(sys.clone()),
        frame,
        quad_tol,
    })
}

const MAX_DOUBLINGS: usize = 200;

/// Smallest t with CDF(t) ≥ zeta, to within `width`.
pub fn percentile(cdf: &LatencyCdf, zeta: f64, width: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::arg(format!(
            "percentile level must lie in (0, 1), got {zeta}"
        )));
    }
    if !(width > 0.0) {
        return Err(Error::arg(format!(
            "bisection width must be positive, got {width}"
        )));
    }
    if cdf.eval(0.0)? >= zeta {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = 10.0 * cdf.frame();
    let mut value = cdf.eval(hi)?;
    let mut doublings = 0;
    while value < zeta {
        if doublings == MAX_DOUBLINGS || !hi.is_finite() {
            return Err(Error::PercentileUnbounded {
                zeta,
                plateau: value,
            });
        }
        lo = hi;
        hi *= 2.0;
        value = cdf.eval(hi)?;
        doublings += 1;
    }
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if cdf.eval(mid)? >= zeta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Tolerances;
    use crate::markov::{stationary_distribution, transition_matrix};
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn chain_mixture(lambda: f64, c: u32, m: u32, mu: f64, frame: f64) -> LatencyMixture {
        let tol = Tolerances::default();
        let p = transition_matrix(lambda, c, mu * frame, m, &tol).unwrap();
        let pi = stationary_distribution(&p, tol.power_iter_tol).unwrap();
        queuing_time_mixture(&pi, lambda, c, mu, frame).unwrap()
    }

    #[test]
    fn empty_queue_never_waits() {
        let pi = OccupancyDistribution {
            probs: vec![1.0, 0.0, 0.0, 0.0],
            kind: OccupancyKind::StationaryPreArrival,
        };
        let mix = queuing_time_mixture(&pi, 2.0, 3, 0.2, 10.0).unwrap();
        assert_eq!(mix.atom_weight, 1.0);
        assert!(mix.components.is_empty());
        let mix = queuing_time_mixture(&pi, 0.0, 1, 0.2, 10.0).unwrap();
        assert_eq!(mix.atom_weight, 1.0);
    }

    #[test]
    fn mixture_matches_pairwise_construction() {
        // Direct transcription of the per-(q, q') uniform-position rule.
        let (lambda, c, m, mu, frame) = (1.3, 2u32, 4u32, 0.2, 10.0);
        let tol = Tolerances::default();
        let p = transition_matrix(lambda, c, mu * frame, m, &tol).unwrap();
        let pi = stationary_distribution(&p, 1e-14).unwrap();
        let mix = queuing_time_mixture(&pi, lambda, c, mu, frame).unwrap();
        let q_max = pi.q_max();
        let mut atom = 0.0;
        let mut comp = vec![0.0; q_max + 1];
        let mut total = 0.0;
        for q in 0..=q_max {
            for (d, pr) in crate::markov::post_arrival_row(q, lambda, q_max)
                .into_iter()
                .enumerate()
            {
                if d == 0 {
                    continue;
                }
                let w = pi.probs[q] * pr * d as f64;
                total += w;
                for l in (q + 1)..=(q + d) {
                    if l <= c as usize {
                        atom += w / d as f64;
                    } else {
                        comp[l - c as usize] += w / d as f64;
                    }
                }
            }
        }
        assert!(close(mix.atom_weight, atom / total, 1e-13));
        for term in &mix.components {
            assert!(close(term.weight, comp[term.shape as usize] / total, 1e-13));
            assert_eq!(term.rate, c as f64 * mu);
        }
    }

    #[test]
    fn mixture_normalised() {
        for &(lambda, c) in &[(0.5, 1u32), (10.0, 10), (10.0, 6), (30.0, 16)] {
            let mix = chain_mixture(lambda, c, 200, 0.2, 10.0);
            assert!(close(mix.total_weight(), 1.0, 1e-9));
            let mut shapes: Vec<u32> = mix.components.iter().map(|c| c.shape).collect();
            shapes.dedup();
            assert_eq!(shapes.len(), mix.components.len());
            assert!(shapes.iter().all(|s| *s > 0));
        }
    }

    #[test]
    fn queuing_cdf_examples() {
        let mix = chain_mixture(10.0, 10, 200, 0.2, 10.0);
        assert_eq!(queuing_time_cdf(&mix, 0.0), mix.atom_weight);
        assert!(close(queuing_time_cdf(&mix, 1e6), 1.0, 1e-9));
        let e = LatencyMixture::erlang(1, 1.0, 10.0);
        assert!(close(queuing_time_cdf(&e, 1.0), 0.632_121, 1e-6));
    }

    #[test]
    fn percentile_of_atom() {
        let mut mix = LatencyMixture::erlang(3, 1.0, 10.0);
        mix.atom_weight = 0.995;
        mix.components[0].weight = 0.005;
        assert_eq!(
            percentile(&LatencyCdf::Queuing(mix), 0.99, 1e-9).unwrap(),
            0.0
        );
    }

    #[test]
    fn percentile_of_exponential() {
        let cdf = LatencyCdf::Queuing(LatencyMixture::erlang(1, 2.0, 1.0));
        let p = percentile(&cdf, 0.99, 1e-12).unwrap();
        assert!(close(p, -log(0.01) / 2.0, 1e-11));
        assert!(percentile(&cdf, 1.0, 1e-9).is_err());
    }

    #[test]
    fn percentile_plateau_is_an_error() {
        let mut mix = LatencyMixture::erlang(1, 1.0, 1.0);
        mix.components[0].weight = 0.5;
        assert!(matches!(
            percentile(&LatencyCdf::Queuing(mix), 0.9, 1e-9),
            Err(Error::PercentileUnbounded { .. })
        ));
    }

    #[test]
    fn system_time_examples() {
        let atom = system_time_cdf(&LatencyMixture::atom(1.0, 10.0), 0.5).unwrap();
        for &t in &[0.0, 0.3, 1.0, 7.0] {
            assert!(close(atom.eval(t).unwrap(), 1.0 - exp(-0.5 * t), 1e-15));
        }
        let sys = system_time_cdf(&LatencyMixture::erlang(1, 2.0, 10.0), 1.0).unwrap();
        let e = exp(-1.0);
        assert!(close(sys.eval(1.0).unwrap(), 1.0 - 2.0 * e + e * e, 1e-12));
        assert!(close(sys.eval(1.0).unwrap(), 0.399_576, 1e-6));
    }

    #[test]
    fn hypoexponential_all_regimes_match_convolution() {
        for &(k, a, b) in &[
            (1u32, 2.0, 1.0),
            (5, 2.0, 0.2),
            (40, 5.0, 0.2),
            (3, 0.2, 0.2),
            (2, 0.5, 2.0),
            (7, 1.0, 3.0),
        ] {
            for &t in &[0.01, 0.5, 2.0, 10.0, 40.0] {
                let numeric = quadrature::integrate(
                    |x| crate::special::erlang_pdf(k, a, x) * -expm1(-b * (t - x)),
                    0.0,
                    t,
                    1e-13,
                )
                .unwrap();
                let closed = hypoexponential_cdf(k, a, b, t);
                assert!(
                    close(closed, numeric, 1e-10),
                    "k={k} a={a} b={b} t={t}: {closed} vs {numeric}"
                );
            }
        }
    }

    #[test]
    fn total_time_examples() {
        let frame = 10.0;
        let step = LatencyCdf::Queuing(LatencyMixture::atom(1.0, frame));
        let total = total_time_cdf(&step, frame, 1e-10).unwrap();
        for &t in &[0.0, 2.5, 9.0, 10.0, 15.0] {
            assert!(
                close(total.eval(t).unwrap(), (t / frame).min(1.0), 1e-9),
                "t={t}"
            );
        }

        let mu = 0.2;
        let sys = system_time_cdf(&LatencyMixture::atom(mu, frame), mu).unwrap();
        let total = total_time_cdf(&sys, frame, 1e-10).unwrap();
        let expect = 1.0 - (1.0 - exp(-mu * frame)) / (mu * frame);
        assert!(close(total.eval(frame).unwrap(), expect, 1e-8));
        assert!(close(expect, 0.567_668, 1e-6));
        assert_eq!(total.kind(), DelayKind::Total);
    }

    #[test]
    fn total_below_system_below_queuing() {
        let mix = chain_mixture(10.0, 10, 200, 0.2, 10.0);
        let q = LatencyCdf::Queuing(mix.clone());
        let sys = system_time_cdf(&mix, 0.2).unwrap();
        let total = total_time_cdf(&sys, 10.0, 1e-10).unwrap();
        for i in 0..200 {
            let t = i as f64 * 0.5;
            let (a, b, c) = (
                q.eval(t).unwrap(),
                sys.eval(t).unwrap(),
                total.eval(t).unwrap(),
            );
            assert!(b <= a + 1e-12 && c <= b + 1e-9, "t={t}");
        }
        assert!(close(total.eval(1e4).unwrap(), 1.0, 1e-9));
        let p_sys = percentile(&sys, 0.99, 1e-9).unwrap();
        let p_tot = percentile(&total, 0.99, 1e-9).unwrap();
        assert!(p_tot > p_sys);
    }
}
