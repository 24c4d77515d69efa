//! Per-RRH occupancy chain observed at frame boundaries.
//!
//! State q is the number of transfers (queued or in service) at an RRH just
//! before the scheduling requests of a frame arrive. Between consecutive
//! frames, v ~ Poisson(λ) requests arrive and then up to ĉ servers work for
//! one frame, so q' = min(q + v, Q) and the next state is q' less the
//! completions. Occupancy is capped at Q = ĉ + M.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use libm::{exp, expm1, log};

use crate::config::{per_rrh_servers, SystemConfig, Tolerances};
use crate::error::{Error, Result};
use crate::quadrature;
use crate::special::{erlang_pdf, gamma_p, ln_binomial, poisson_pmf};

/// Largest state space (Q + 1) a chain may have.
pub const MAX_STATES: usize = 2048;

/// Row defect beyond which a constructed row is renormalised.
const RENORMALISE_ABOVE: f64 = 1e-12;
/// Row defect beyond which a row is rejected outright.
const ROW_DEFECT_LIMIT: f64 = 1e-9;

/// Probability that `j` of `occupied` transfers are still in service after a
/// frame when every transfer has its own server.
pub fn psi_all_served(occupied: u32, j: u32, _servers: u32, mu_f: f64) -> f64 {
    if j > occupied {
        return 0.0;
    }
    let done = occupied - j;
    let completion = -expm1(-mu_f);
    if done > 0 && completion == 0.0 {
        return 0.0;
    }
    let mut ln = ln_binomial(occupied as u64, j as u64) - mu_f * j as f64;
    if done > 0 {
        ln += done as f64 * log(completion);
    }
    exp(ln)
}

/// Probability that `j ≥ servers` remain when all servers stay busy for the
/// whole frame, so completions are Poisson with mean `servers·μF`.
pub fn psi_all_busy(occupied: u32, j: u32, servers: u32, mu_f: f64) -> f64 {
    if j > occupied || j < servers || occupied <= servers {
        return 0.0;
    }
    poisson_pmf((occupied - j) as u64, servers as f64 * mu_f)
}

/// Probability that `j < servers` remain when the frame starts with a queue.
///
/// Servers first drain `occupied − servers + 1` transfers at rate `servers·μF`
/// per frame, at which point a server falls idle at frame-normalised time t.
/// The `servers − 1` still running then finish independently over the
/// remaining `1 − t` of the frame.
pub fn psi_partial_idle(
    occupied: u32,
    j: u32,
    servers: u32,
    mu_f: f64,
    quad_tol: f64,
) -> Result<f64> {
    if occupied <= servers || j >= servers {
        return Ok(0.0);
    }
    idle_after_drain(occupied - servers + 1, j, servers, mu_f, quad_tol)
}

// Probability that j < c remain when a server first idles after `shape`
// completions at rate c·μF.
fn idle_after_drain(shape: u32, j: u32, c: u32, mu_f: f64, quad_tol: f64) -> Result<f64> {
    if mu_f <= 0.0 {
        return Ok(0.0);
    }
    let rate = c as f64 * mu_f;
    let ln_comb = ln_binomial((c - 1) as u64, j as u64);
    let done = c - j - 1;
    let integrand = |t: f64| {
        let density = erlang_pdf(shape, rate, t);
        if density == 0.0 {
            return 0.0;
        }
        let rest = 1.0 - t;
        let mut ln = ln_comb - rest * j as f64 * mu_f;
        if done > 0 {
            let completion = -expm1(-rest * mu_f);
            if completion <= 0.0 {
                return 0.0;
            }
            ln += done as f64 * log(completion);
        }
        exp(ln) * density
    };
    quadrature::integrate(integrand, 0.0, 1.0, quad_tol)
}

/// ψ for any (occupied, j), dispatching on the three regimes.
pub fn psi(occupied: u32, j: u32, servers: u32, mu_f: f64, quad_tol: f64) -> Result<f64> {
    if j > occupied {
        Ok(0.0)
    } else if occupied <= servers {
        Ok(psi_all_served(occupied, j, servers, mu_f))
    } else if j >= servers {
        Ok(psi_all_busy(occupied, j, servers, mu_f))
    } else {
        psi_partial_idle(occupied, j, servers, mu_f, quad_tol)
    }
}

/// Row-stochastic transition matrix over states 0..=q_max.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub servers: u32,
    pub q_max: u32,
    pub lambda: f64,
    pub mu_f: f64,
    rows: Vec<f64>,
}

impl TransitionMatrix {
    /// Wrap an explicit matrix given row by row. Rows must be stochastic.
    pub fn from_rows(servers: u32, lambda: f64, mu_f: f64, rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::arg("empty transition matrix"));
        }
        let mut flat = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::arg(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::arg(format!("row {i} has an entry outside [0, 1]")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_DEFECT_LIMIT {
                return Err(Error::RowDefect { row: i, sum });
            }
            flat.extend_from_slice(row);
        }
        Ok(TransitionMatrix {
            servers,
            q_max: (n - 1) as u32,
            lambda,
            mu_f,
            rows: flat,
        })
    }

    pub fn states(&self) -> usize {
        self.q_max as usize + 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i * self.states() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.states();
        &self.rows[i * n..(i + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.rows.chunks(self.states())
    }

    /// One step of the chain: returns dist·P.
    pub fn step(&self, dist: &[f64], out: &mut [f64]) {
        let n = self.states();
        out.iter_mut().for_each(|x| *x = 0.0);
        for (i, &w) in dist.iter().enumerate().take(n) {
            if w == 0.0 {
                continue;
            }
            for (o, p) in out.iter_mut().zip(self.row(i)) {
                *o += w * p;
            }
        }
    }
}

/// Build the chain for arrival rate `lambda`, `servers` servers and a queue
/// of at most `queue_truncation` beyond them.
pub fn transition_matrix(
    lambda: f64,
    servers: u32,
    mu_f: f64,
    queue_truncation: u32,
    tol: &Tolerances,
) -> Result<TransitionMatrix> {
    if servers == 0 {
        return Err(Error::arg("a chain needs at least one server"));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!(
            "arrival rate must be finite and non-negative, got {lambda}"
        )));
    }
    if !(mu_f >= 0.0 && mu_f.is_finite()) {
        return Err(Error::arg(format!(
            "mu*F must be finite and non-negative, got {mu_f}"
        )));
    }
    let states = servers as usize + queue_truncation as usize + 1;
    if states > MAX_STATES {
        return Err(Error::StateSpaceTooLarge {
            states,
            limit: MAX_STATES,
        });
    }
    let q_max = (states - 1) as u32;
    let n = states;

    // psi_table[o * n + j] = ψ_{o,j}
    let mut psi_table = vec![0.0; n * n];
    for o in 0..=q_max {
        for j in 0..=o {
            psi_table[o as usize * n + j as usize] =
                psi(o, j, servers, mu_f, tol.quadrature_abs_tol)?;
        }
    }

    let pmf: Vec<f64> = (0..n as u64).map(|k| poisson_pmf(k, lambda)).collect();

    let mut rows = vec![0.0; n * n];
    for i in 0..n {
        let room = n - 1 - i;
        let row = &mut rows[i * n..(i + 1) * n];
        let mut cumulative = 0.0;
        let mut k = 0;
        while k < room && cumulative < 1.0 - tol.poisson_tail_mass {
            let w = pmf[k];
            cumulative += w;
            if w > 0.0 {
                let from = &psi_table[(i + k) * n..(i + k + 1) * n];
                for (r, p) in row.iter_mut().zip(from).take(i + k + 1) {
                    *r += w * p;
                }
            }
            k += 1;
        }
        // Everything not summed explicitly saturates the queue.
        let tail = if k == 0 {
            1.0
        } else {
            gamma_p(k as f64, lambda)
        };
        if tail > 0.0 {
            let from = &psi_table[(n - 1) * n..n * n];
            for (r, p) in row.iter_mut().zip(from) {
                *r += tail * p;
            }
        }
        let sum: f64 = row.iter().sum();
        let defect = (sum - 1.0).abs();
        if defect > ROW_DEFECT_LIMIT || !sum.is_finite() {
            return Err(Error::RowDefect { row: i, sum });
        }
        if defect > RENORMALISE_ABOVE {
            row.iter_mut().for_each(|p| *p /= sum);
        }
    }
    Ok(TransitionMatrix {
        servers,
        q_max,
        lambda,
        mu_f,
        rows,
    })
}

/// Chain for RRH `rrh_index` with `servers` servers assigned to it.
pub fn build_transition_matrix(
    config: &SystemConfig,
    rrh_index: usize,
    servers: u32,
) -> Result<TransitionMatrix> {
    config.validate()?;
    if rrh_index >= config.num_rrh {
        return Err(Error::arg(format!(
            "rrh index {rrh_index} out of range 0..{}",
            config.num_rrh
        )));
    }
    transition_matrix(
        config.arrival_rates[rrh_index],
        servers,
        config.mu_f(),
        config.queue_truncation,
        &config.tolerances,
    )
}

/// Chain for RRH `rrh_index` when the whole pool has `total_servers`.
pub fn build_split_matrix(
    config: &SystemConfig,
    rrh_index: usize,
    total_servers: u32,
) -> Result<TransitionMatrix> {
    let servers = per_rrh_servers(config, total_servers, rrh_index)?;
    build_transition_matrix(config, rrh_index, servers)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OccupancyKind {
    /// π, seen by the frame boundary just before arrivals.
    StationaryPreArrival,
    /// q', seen just after the frame's arrivals joined.
    PostArrival,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyDistribution {
    pub probs: Vec<f64>,
    pub kind: OccupancyKind,
}

impl OccupancyDistribution {
    pub fn q_max(&self) -> usize {
        self.probs.len().saturating_sub(1)
    }

    pub fn mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| i as f64 * p)
            .sum()
    }

    /// Pr(q ≥ from)
    pub fn tail_mass(&self, from: usize) -> f64 {
        self.probs.iter().skip(from).sum()
    }
}

/// Iteration cap for [`stationary_distribution`].
pub const MAX_POWER_ITERATIONS: usize = 1_000_000;

/// Stationary law of `p` by power iteration from the empty state.
pub fn stationary_distribution(p: &TransitionMatrix, tol: f64) -> Result<OccupancyDistribution> {
    if !(tol > 0.0) {
        return Err(Error::arg(format!("tolerance must be positive, got {tol}")));
    }
    let n = p.states();
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    let mut next = vec![0.0; n];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_POWER_ITERATIONS {
        p.step(&pi, &mut next);
        residual = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        core::mem::swap(&mut pi, &mut next);
        if residual < tol {
            // Absorb rounding drift so the vector sums to one.
            let sum: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|x| *x /= sum);
            return Ok(OccupancyDistribution {
                probs: pi,
                kind: OccupancyKind::StationaryPreArrival,
            });
        }
    }
    Err(Error::NotConverged {
        iterations: MAX_POWER_ITERATIONS,
        residual,
    })
}

/// Pr(q' | q) for q' in q..=q_max: Poisson arrivals, with every arrival
/// beyond the cap folded into q_max.
pub fn post_arrival_row(q: usize, lambda: f64, q_max: usize) -> Vec<f64> {
    let room = q_max.saturating_sub(q);
    let mut row = Vec::with_capacity(room + 1);
    for k in 0..room {
        row.push(poisson_pmf(k as u64, lambda));
    }
    row.push(if room == 0 {
        1.0
    } else {
        gamma_p(room as f64, lambda)
    });
    row
}

/// Occupancy immediately after arrivals, given the pre-arrival law `pi`.
pub fn post_arrival_distribution(
    pi: &OccupancyDistribution,
    lambda: f64,
    q_max: usize,
) -> Result<OccupancyDistribution> {
    if pi.kind != OccupancyKind::StationaryPreArrival {
        return Err(Error::arg(
            "post-arrival law needs a pre-arrival distribution",
        ));
    }
    if pi.probs.len() > q_max + 1 {
        return Err(Error::arg(format!(
            "distribution has {} states but q_max is {q_max}",
            pi.probs.len()
        )));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::arg(format!(
            "arrival rate must be finite and non-negative, got {lambda}"
        )));
    }
    let mut out = vec![0.0; q_max + 1];
    for (q, &w) in pi.probs.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (d, p) in post_arrival_row(q, lambda, q_max).into_iter().enumerate() {
            out[q + d] += w * p;
        }
    }
    Ok(OccupancyDistribution {
        probs: out,
        kind: OccupancyKind::PostArrival,
    })
}
