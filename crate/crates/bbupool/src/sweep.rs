//! Server-count and savings sweeps. Points run on the rayon pool; rows come
//! back in sweep order.

use std::io::Write;

use bbupool_core::latency::LatencyCdf;
use bbupool_core::savings::analyze_pool;
use bbupool_core::sim::required_servers_by_simulation;
use bbupool_core::{
    long_term_savings, percentile, short_term_expected_savings, stability_check, SystemConfig,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::{AppError, Result};

/// An inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !start.is_finite() || !stop.is_finite() || step.is_nan() || step <= 0.0 || stop < start {
            return Err(AppError::Config(format!("bad range {start}:{stop}:{step}")));
        }
        Ok(Range { start, stop, step })
    }

    /// `start:stop:step`, `start:stop` (step 1) or a single value.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| AppError::Config(format!("bad range `{s}`")))
        };
        match parts.as_slice() {
            [a] => Range::new(num(a)?, num(a)?, 1.0),
            [a, b] => Range::new(num(a)?, num(b)?, 1.0),
            [a, b, c] => Range::new(num(a)?, num(b)?, num(c)?),
            _ => Err(AppError::Config(format!("bad range `{s}`"))),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        // Snap to 12 significant digits so 0.2*3 prints as 0.6.
        (0..=n)
            .map(|i| {
                let v = self.start + i as f64 * self.step;
                format!("{v:.11e}").parse().unwrap_or(v)
            })
            .collect()
    }
}

/// `cfg` with every RRH at `lambda`.
pub fn with_equal_rates(cfg: &SystemConfig, lambda: f64) -> Result<SystemConfig> {
    Ok(cfg.clone().with_arrival_rates(vec![lambda; cfg.num_rrh])?)
}

/// `cfg` with rates rescaled (keeping their proportions) so that the full
/// pool of L·N servers runs at utilisation `rho`.
pub fn at_utilisation(cfg: &SystemConfig, rho: f64) -> Result<SystemConfig> {
    let total = rho * cfg.max_servers() as f64 * cfg.mu_f();
    let sum = cfg.total_arrival_rate();
    let rates = if sum > 0.0 {
        cfg.arrival_rates.iter().map(|l| l / sum * total).collect()
    } else {
        vec![total / cfg.num_rrh as f64; cfg.num_rrh]
    };
    Ok(cfg.clone().with_arrival_rates(rates)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerSweepRow {
    pub servers: u32,
    /// Mean per-RRH arrival rate.
    pub lambda: f64,
    pub zeta: f64,
    /// Worst ζ-percentile of t2 over the RRHs; empty when not computable.
    pub percentile_t2: Option<f64>,
    pub status: String,
}

/// ζ-percentiles of queuing delay for every (λ, c) pair. An empty `lambdas`
/// keeps the configured rates.
pub fn sweep_servers(
    cfg: &SystemConfig,
    lambdas: &[f64],
    servers: &[u32],
    zetas: &[f64],
) -> Result<Vec<ServerSweepRow>> {
    let configs: Vec<SystemConfig> = if lambdas.is_empty() {
        vec![cfg.clone()]
    } else {
        lambdas
            .iter()
            .map(|&l| with_equal_rates(cfg, l))
            .collect::<Result<_>>()?
    };
    let points: Vec<(&SystemConfig, u32)> = configs
        .iter()
        .flat_map(|c| servers.iter().map(move |&s| (c, s)))
        .collect();
    let rows: Vec<Vec<ServerSweepRow>> = points
        .par_iter()
        .map(|&(c, s)| server_point(c, s, zetas))
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

fn server_point(cfg: &SystemConfig, servers: u32, zetas: &[f64]) -> Vec<ServerSweepRow> {
    let lambda = cfg.total_arrival_rate() / cfg.num_rrh as f64;
    let row = |zeta: f64, value: Option<f64>, status: String| ServerSweepRow {
        servers,
        lambda,
        zeta,
        percentile_t2: value,
        status,
    };
    let pool = match analyze_pool(cfg, servers) {
        Ok(p) => p,
        Err(e) => return zetas.iter().map(|&z| row(z, None, status_of(&e))).collect(),
    };
    zetas
        .iter()
        .map(|&zeta| {
            let mut worst: Result<f64, bbupool_core::Error> = Ok(0.0);
            for a in &pool.rrhs {
                let p = percentile(
                    &LatencyCdf::Queuing(a.mixture.clone()),
                    zeta,
                    cfg.tolerances.percentile_tol,
                );
                worst = match (worst, p) {
                    (Ok(w), Ok(p)) => Ok(w.max(p)),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                };
            }
            match worst {
                Ok(v) => row(zeta, Some(v), "ok".into()),
                Err(e) => row(zeta, None, status_of(&e)),
            }
        })
        .collect()
}

fn status_of(e: &bbupool_core::Error) -> String {
    use bbupool_core::Error as E;
    match e {
        E::Unstable { .. } => "unstable".into(),
        E::Infeasible { .. } => "infeasible".into(),
        other => format!("error: {other}"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepPolicy {
    LongTerm,
    ShortTerm,
    LongTermSim,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SavingsRow {
    pub policy: SweepPolicy,
    pub lambda_total: f64,
    pub rho_bbu: f64,
    pub tau: Option<f64>,
    pub zeta: Option<f64>,
    pub frame: f64,
    pub servers: Option<u32>,
    pub normalized_cost: Option<f64>,
    pub savings: Option<f64>,
    pub upper_bound: f64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsSweep {
    pub rhos: Vec<f64>,
    pub taus: Vec<f64>,
    pub zetas: Vec<f64>,
    /// Frame lengths for the short-term rows, at fixed per-unit-time load.
    pub frames: Vec<f64>,
    /// Simulated long-term rows: (frames, seed).
    pub simulate: Option<(u64, u64)>,
}

pub fn sweep_savings(cfg: &SystemConfig, grid: &SavingsSweep) -> Result<Vec<SavingsRow>> {
    let configs: Vec<SystemConfig> = grid
        .rhos
        .iter()
        .map(|&r| at_utilisation(cfg, r))
        .collect::<Result<_>>()?;
    let mut tasks: Vec<(usize, Task)> = Vec::new();
    for (i, _) in configs.iter().enumerate() {
        for &tau in &grid.taus {
            for &zeta in &grid.zetas {
                tasks.push((i, Task::LongTerm { tau, zeta }));
            }
        }
        for &frame in &grid.frames {
            tasks.push((i, Task::ShortTerm { frame }));
        }
        if let Some((frames, seed)) = grid.simulate {
            for &tau in &grid.taus {
                for &zeta in &grid.zetas {
                    tasks.push((
                        i,
                        Task::Simulated {
                            tau,
                            zeta,
                            frames,
                            seed,
                        },
                    ));
                }
            }
        }
    }
    tasks
        .par_iter()
        .map(|(i, task)| savings_point(&configs[*i], *task))
        .collect()
}

#[derive(Debug, Clone, Copy)]
enum Task {
    LongTerm {
        tau: f64,
        zeta: f64,
    },
    ShortTerm {
        frame: f64,
    },
    Simulated {
        tau: f64,
        zeta: f64,
        frames: u64,
        seed: u64,
    },
}

fn savings_point(cfg: &SystemConfig, task: Task) -> Result<SavingsRow> {
    let rho_bbu = stability_check(cfg, cfg.max_servers())?.rho_bbu;
    let mut row = SavingsRow {
        policy: SweepPolicy::LongTerm,
        lambda_total: cfg.total_arrival_rate(),
        rho_bbu,
        tau: None,
        zeta: None,
        frame: cfg.frame_duration,
        servers: None,
        normalized_cost: None,
        savings: None,
        upper_bound: 1.0 - rho_bbu,
        status: "ok".into(),
    };
    let fill = |row: &mut SavingsRow, servers: u32| {
        let cost = servers as f64 / cfg.max_servers() as f64;
        row.servers = Some(servers);
        row.normalized_cost = Some(cost);
        row.savings = Some(1.0 - cost);
    };
    match task {
        Task::LongTerm { tau, zeta } => {
            row.tau = Some(tau);
            row.zeta = Some(zeta);
            match long_term_savings(cfg, tau, zeta) {
                Ok(r) => fill(&mut row, r.servers_provisioned.unwrap_or(0)),
                Err(e) => row.status = status_of(&e),
            }
        }
        Task::ShortTerm { frame } => {
            row.policy = SweepPolicy::ShortTerm;
            let scaled = cfg.with_frame_duration(frame)?;
            row.frame = frame;
            row.lambda_total = scaled.total_arrival_rate();
            match short_term_expected_savings(&scaled) {
                Ok(r) => {
                    row.normalized_cost = Some(r.normalized_cost);
                    row.savings = Some(r.savings);
                }
                Err(e) => row.status = status_of(&e),
            }
        }
        Task::Simulated {
            tau,
            zeta,
            frames,
            seed,
        } => {
            row.policy = SweepPolicy::LongTermSim;
            row.tau = Some(tau);
            row.zeta = Some(zeta);
            match required_servers_by_simulation(cfg, tau, zeta, frames, seed) {
                Ok(c) => fill(&mut row, c),
                Err(e) => row.status = status_of(&e),
            }
        }
    }
    Ok(row)
}

pub fn write_csv<W: Write, T: Serialize>(rows: &[T], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write, T: Serialize>(rows: &[T], mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows)?;
    writeln!(out)?;
    Ok(())
}
