//! Frame-based discrete-event simulation of the whole pool.
//!
//! Scheduling requests join their RRH's FIFO queue only at frame starts.
//! Free servers go to queue heads by a round-robin cursor that advances one
//! RRH per grant and skips RRHs that are empty or already running L
//! transfers. Service is continuous in time: a server freed mid-frame is
//! handed on at once.

mod stats;

use alloc::collections::{BinaryHeap, VecDeque};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson};

use crate::config::{stability_check, SystemConfig};
use crate::error::{Error, Result};

pub use stats::{empirical_percentile, DelaySamples, RunningStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ServerPolicy {
    /// A fixed pool of this many servers.
    LongTerm { servers: u32 },
    /// Each frame powers Σ_j min(L, l_j) servers, l_j being the transfers
    /// at RRH j just after arrivals.
    ShortTerm,
}

/// Transfers an RRH may hold (queued plus in service) before new arrivals
/// are turned away.
pub const DEFAULT_QUEUE_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub system: SystemConfig,
    pub policy: ServerPolicy,
    pub num_frames: u64,
    /// Leading frames left out of every statistic.
    pub warmup_frames: u64,
    pub seed: u64,
    pub queue_cap: usize,
    /// Keep a record of every completed transfer.
    pub record_transfers: bool,
    /// Histogram the per-RRH occupancy seen just before each frame's arrivals.
    pub track_occupancy: bool,
}

impl SimulationConfig {
    pub fn new(system: SystemConfig, policy: ServerPolicy, num_frames: u64, seed: u64) -> Self {
        SimulationConfig {
            system,
            policy,
            num_frames,
            warmup_frames: 0,
            seed,
            queue_cap: DEFAULT_QUEUE_CAP,
            record_transfers: false,
            track_occupancy: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        if self.num_frames == 0 {
            return Err(Error::config("num_frames must be at least 1"));
        }
        if self.warmup_frames >= self.num_frames {
            return Err(Error::config(format!(
                "warmup_frames ({}) must be below num_frames ({})",
                self.warmup_frames, self.num_frames
            )));
        }
        if self.queue_cap == 0 {
            return Err(Error::config("queue_cap must be at least 1"));
        }
        if let ServerPolicy::LongTerm { servers } = self.policy {
            if servers == 0 || servers > self.system.max_servers() {
                return Err(Error::config(format!(
                    "servers must lie in 1..={}, got {servers}",
                    self.system.max_servers()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferRecord {
    pub id: u64,
    pub rrh: u32,
    pub arrival_frame: u64,
    pub t1: f64,
    pub t2: f64,
    pub t3: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub frames_observed: u64,
    /// Queuing delay of each transfer that arrived after warmup and completed.
    pub t2: DelaySamples,
    pub t1: RunningStats,
    pub t3: RunningStats,
    pub transfers: Option<Vec<TransferRecord>>,
    /// occupancy[j][q]: observed frames in which RRH j held q transfers just
    /// before arrivals.
    pub occupancy: Option<Vec<Vec<u64>>>,
    /// Servers powered, summed over observed frames.
    pub active_server_frames: f64,
    /// L·N per observed frame.
    pub offered_server_frames: f64,
    /// Counters over the whole run, warmup included:
    /// arrivals = transfers_completed + in_system + transfers_blocked.
    pub arrivals: u64,
    pub transfers_completed: u64,
    pub transfers_blocked: u64,
    pub in_system: u64,
    pub peak_busy: u32,
    pub peak_budget: u32,
    pub peak_rrh_in_service: u32,
}

impl SimulationResult {
    pub fn empirical_savings(&self) -> f64 {
        if self.offered_server_frames == 0.0 {
            return 1.0;
        }
        1.0 - self.active_server_frames / self.offered_server_frames
    }

    /// Empirical probability mass of RRH `rrh` occupancy.
    pub fn occupancy_distribution(&self, rrh: usize) -> Option<Vec<f64>> {
        let hist = self.occupancy.as_ref()?.get(rrh)?;
        let total: u64 = hist.iter().sum();
        Some(hist.iter().map(|c| *c as f64 / total as f64).collect())
    }
}

#[derive(Debug, Clone, Copy)]
struct Pending {
    id: u64,
    arrival_frame: u64,
    arrival_time: f64,
    t1: f64,
    demand: f64,
}

#[derive(Debug, Clone, Copy)]
struct Busy {
    finish: f64,
    start: f64,
    rrh: u32,
    job: Pending,
}

impl PartialEq for Busy {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Busy {}
impl PartialOrd for Busy {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Busy {
    fn cmp(&self, other: &Self) -> Ordering {
        self.finish
            .total_cmp(&other.finish)
            .then(self.job.id.cmp(&other.job.id))
    }
}

struct Pool {
    queues: Vec<VecDeque<Pending>>,
    in_service: Vec<u32>,
    busy: BinaryHeap<Reverse<Busy>>,
    cursor: usize,
    max_concurrent: u32,
    peak_busy: u32,
    peak_rrh: u32,
}

impl Pool {
    fn occupancy(&self, j: usize) -> usize {
        self.queues[j].len() + self.in_service[j] as usize
    }

    fn next_eligible(&self) -> Option<usize> {
        let n = self.queues.len();
        (0..n)
            .map(|d| (self.cursor + d) % n)
            .find(|&j| !self.queues[j].is_empty() && self.in_service[j] < self.max_concurrent)
    }

    /// Hand free servers to queue heads at time `now`.
    fn assign(&mut self, now: f64, budget: u32) {
        while (self.busy.len() as u32) < budget {
            let Some(j) = self.next_eligible() else { break };
            let job = self.queues[j]
                .pop_front()
                .expect("eligible queue is non-empty");
            self.in_service[j] += 1;
            self.busy.push(Reverse(Busy {
                finish: now + job.demand,
                start: now,
                rrh: j as u32,
                job,
            }));
            self.cursor = (j + 1) % self.queues.len();
            self.peak_busy = self.peak_busy.max(self.busy.len() as u32);
            self.peak_rrh = self.peak_rrh.max(self.in_service[j]);
            debug_assert!(self.in_service[j] <= self.max_concurrent);
        }
        debug_assert!(self.busy.len() as u32 <= budget);
    }
}

/// Run the simulation described by `config`.
pub fn simulate(config: &SimulationConfig) -> Result<SimulationResult> {
    config.validate()?;
    let sys = &config.system;
    let n = sys.num_rrh;
    let frame = sys.frame_duration;
    let l_cap = sys.max_concurrent;

    let demand =
        Exp::new(sys.service_rate).map_err(|e| Error::config(format!("service rate: {e}")))?;
    let mut arrivals_dist = Vec::with_capacity(n);
    for &lambda in &sys.arrival_rates {
        arrivals_dist.push(if lambda > 0.0 {
            Some(
                Poisson::new(lambda)
                    .map_err(|e| Error::config(format!("arrival rate {lambda}: {e}")))?,
            )
        } else {
            None
        });
    }
    let mut rngs: Vec<ChaCha8Rng> = (0..n)
        .map(|j| {
            let mut r = ChaCha8Rng::seed_from_u64(config.seed);
            r.set_stream(j as u64);
            r
        })
        .collect();

    let mut pool = Pool {
        queues: vec![VecDeque::new(); n],
        in_service: vec![0; n],
        busy: BinaryHeap::new(),
        cursor: 0,
        max_concurrent: l_cap,
        peak_busy: 0,
        peak_rrh: 0,
    };
    let mut result = SimulationResult {
        frames_observed: 0,
        t2: DelaySamples::default(),
        t1: RunningStats::default(),
        t3: RunningStats::default(),
        transfers: config.record_transfers.then(Vec::new),
        occupancy: config.track_occupancy.then(|| vec![Vec::new(); n]),
        active_server_frames: 0.0,
        offered_server_frames: 0.0,
        arrivals: 0,
        transfers_completed: 0,
        transfers_blocked: 0,
        in_system: 0,
        peak_busy: 0,
        peak_budget: 0,
        peak_rrh_in_service: 0,
    };
    let offered = sys.max_servers() as f64;
    let mut next_id = 0u64;

    for f in 0..config.num_frames {
        let t0 = f as f64 * frame;
        let t_end = t0 + frame;
        let observed = f >= config.warmup_frames;

        if observed {
            if let Some(hist) = result.occupancy.as_mut() {
                for (j, h) in hist.iter_mut().enumerate() {
                    let q = pool.occupancy(j);
                    if h.len() <= q {
                        h.resize(q + 1, 0);
                    }
                    h[q] += 1;
                }
            }
        }

        for j in 0..n {
            let Some(dist) = &arrivals_dist[j] else {
                continue;
            };
            let rng = &mut rngs[j];
            let v = dist.sample(rng) as u64;
            for _ in 0..v {
                let t1 = rng.random::<f64>() * frame;
                let d = demand.sample(rng);
                result.arrivals += 1;
                if pool.occupancy(j) >= config.queue_cap {
                    result.transfers_blocked += 1;
                    continue;
                }
                pool.queues[j].push_back(Pending {
                    id: next_id,
                    arrival_frame: f,
                    arrival_time: t0,
                    t1,
                    demand: d,
                });
                next_id += 1;
            }
        }

        let budget = match config.policy {
            ServerPolicy::LongTerm { servers } => servers,
            ServerPolicy::ShortTerm => (0..n).map(|j| (pool.occupancy(j) as u32).min(l_cap)).sum(),
        };
        result.peak_budget = result.peak_budget.max(budget);
        if observed {
            result.frames_observed += 1;
            result.active_server_frames += budget as f64;
            result.offered_server_frames += offered;
        }

        pool.assign(t0, budget);
        while let Some(Reverse(next)) = pool.busy.peek().copied() {
            if next.finish >= t_end {
                break;
            }
            pool.busy.pop();
            let j = next.rrh as usize;
            pool.in_service[j] -= 1;
            result.transfers_completed += 1;
            if next.job.arrival_frame >= config.warmup_frames {
                let t2 = next.start - next.job.arrival_time;
                result.t2.push(t2);
                result.t1.push(next.job.t1);
                result.t3.push(next.job.demand);
                if let Some(records) = result.transfers.as_mut() {
                    records.push(TransferRecord {
                        id: next.job.id,
                        rrh: next.rrh,
                        arrival_frame: next.job.arrival_frame,
                        t1: next.job.t1,
                        t2,
                        t3: next.job.demand,
                    });
                }
            }
            pool.assign(next.finish, budget);
        }
    }

    result.in_system = (0..n).map(|j| pool.occupancy(j) as u64).sum();
    result.peak_busy = pool.peak_busy;
    result.peak_rrh_in_service = pool.peak_rrh;
    result.t2.finish();
    debug_assert_eq!(
        result.arrivals,
        result.transfers_completed + result.in_system + result.transfers_blocked
    );
    Ok(result)
}

/// Warmup used by the simulation-based provisioning search.
pub fn default_warmup(frames: u64) -> u64 {
    frames / 100
}

/// Smallest pool size whose empirical ζ-percentile of t₂ is below τ.
///
/// Every candidate reuses `seed`, so neighbouring sizes see the same traffic.
pub fn required_servers_by_simulation(
    config: &SystemConfig,
    tau: f64,
    zeta: f64,
    frames: u64,
    seed: u64,
) -> Result<u32> {
    let start = simulation_search_start(config)?;
    let mut best = 0.0f64;
    for c in start..=config.max_servers() {
        let (ok, fraction) = simulated_target_met(config, c, tau, zeta, frames, seed)?;
        best = best.max(fraction);
        if ok {
            return Ok(c);
        }
    }
    Err(Error::Infeasible {
        max_servers: config.max_servers(),
        best_probability: best,
    })
}

/// Smallest pool size that is stable and can give every RRH with traffic a
/// server of its own.
pub fn simulation_search_start(config: &SystemConfig) -> Result<u32> {
    config.validate()?;
    let max = config.max_servers();
    let baseline = stability_check(config, max)?;
    if !baseline.stable {
        return Err(Error::Unstable {
            servers: max,
            rho_bbu: baseline.rho_bbu,
            max_rho_rrh: baseline.max_rho_rrh(),
        });
    }
    let active = config.arrival_rates.iter().filter(|l| **l > 0.0).count() as u32;
    let floor = if active == 0 {
        config.num_rrh as u32
    } else {
        active
    };
    for c in floor..=max {
        if stability_check(config, c)?.stable {
            return Ok(c);
        }
    }
    Ok(max)
}

/// Simulate a pool of `servers` and report whether the empirical
/// ζ-percentile of t₂ is below τ, along with the empirical Pr(t₂ < τ).
pub fn simulated_target_met(
    config: &SystemConfig,
    servers: u32,
    tau: f64,
    zeta: f64,
    frames: u64,
    seed: u64,
) -> Result<(bool, f64)> {
    if !(tau > 0.0) || !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::arg(format!(
            "need tau > 0 and zeta in (0, 1), got {tau} and {zeta}"
        )));
    }
    let mut sc = SimulationConfig::new(
        config.clone(),
        ServerPolicy::LongTerm { servers },
        frames,
        seed,
    );
    sc.warmup_frames = default_warmup(frames);
    let r = simulate(&sc)?;
    if r.t2.is_empty() {
        return Ok((true, 1.0));
    }
    Ok((r.t2.percentile(zeta)? < tau, r.t2.fraction_below(tau)))
}
