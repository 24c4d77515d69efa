//! JSON summary and raw CSV of a simulation run.

use std::io::Write;

use bbupool_core::sim::{SimulationConfig, SimulationResult};
use bbupool_core::ServerPolicy;
use serde::Serialize;

use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileValue {
    pub zeta: f64,
    pub t2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    pub num_rrh: usize,
    pub max_concurrent: u32,
    pub frame_duration: f64,
    pub service_rate: f64,
    pub arrival_rates: Vec<f64>,
    pub policy: &'static str,
    pub servers: Option<u32>,
    pub num_frames: u64,
    pub warmup_frames: u64,
    pub seed: u64,
    pub queue_cap: usize,
    pub frames_observed: u64,
    pub arrivals: u64,
    pub transfers_completed: u64,
    pub transfers_blocked: u64,
    pub in_system: u64,
    pub active_server_frames: f64,
    pub offered_server_frames: f64,
    pub empirical_savings: f64,
    pub peak_busy: u32,
    pub peak_budget: u32,
    pub t2_samples: u64,
    pub t2_zero_fraction: f64,
    pub t2_mean: f64,
    pub t1_mean: f64,
    pub t3_mean: f64,
    pub percentiles: Vec<PercentileValue>,
}

pub fn summarize(cfg: &SimulationConfig, r: &SimulationResult, zetas: &[f64]) -> SimSummary {
    let (policy, servers) = match cfg.policy {
        ServerPolicy::LongTerm { servers } => ("lt", Some(servers)),
        ServerPolicy::ShortTerm => ("st", None),
    };
    let n = r.t2.len();
    SimSummary {
        num_rrh: cfg.system.num_rrh,
        max_concurrent: cfg.system.max_concurrent,
        frame_duration: cfg.system.frame_duration,
        service_rate: cfg.system.service_rate,
        arrival_rates: cfg.system.arrival_rates.clone(),
        policy,
        servers,
        num_frames: cfg.num_frames,
        warmup_frames: cfg.warmup_frames,
        seed: cfg.seed,
        queue_cap: cfg.queue_cap,
        frames_observed: r.frames_observed,
        arrivals: r.arrivals,
        transfers_completed: r.transfers_completed,
        transfers_blocked: r.transfers_blocked,
        in_system: r.in_system,
        active_server_frames: r.active_server_frames,
        offered_server_frames: r.offered_server_frames,
        empirical_savings: r.empirical_savings(),
        peak_busy: r.peak_busy,
        peak_budget: r.peak_budget,
        t2_samples: n,
        t2_zero_fraction: if n == 0 {
            1.0
        } else {
            r.t2.zeros as f64 / n as f64
        },
        t2_mean: r.t2.mean(),
        t1_mean: r.t1.mean,
        t3_mean: r.t3.mean,
        percentiles: zetas
            .iter()
            .map(|&zeta| PercentileValue {
                zeta,
                t2: r.t2.percentile(zeta).ok(),
            })
            .collect(),
    }
}

pub fn write_json<W: Write>(s: &SimSummary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, s)?;
    writeln!(out)?;
    Ok(())
}

/// One row per completed transfer: transfer_id, rrh, t1, t2, t3.
pub fn write_raw_csv<W: Write>(r: &SimulationResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["transfer_id", "rrh", "t1", "t2", "t3"])?;
    for t in r.transfers.iter().flatten() {
        w.serialize((t.id, t.rrh, t.t1, t.t2, t.t3))?;
    }
    w.flush()?;
    Ok(())
}
