//! System parameters, stability predicates and the per-RRH server split.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Numerical knobs shared by the analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute error target for adaptive quadrature.
    pub quadrature_abs_tol: f64,
    /// Poisson mass left out of explicit summation (it is folded into the
    /// saturated state, not dropped).
    pub poisson_tail_mass: f64,
    /// L1 change between successive power-iteration steps that counts as converged.
    pub power_iter_tol: f64,
    /// Final bracket width of the percentile bisection.
    pub percentile_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quadrature_abs_tol: 1e-10,
            poisson_tail_mass: 1e-12,
            power_iter_tol: 1e-12,
            percentile_tol: 1e-9,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("quadrature_abs_tol", self.quadrature_abs_tol),
            ("poisson_tail_mass", self.poisson_tail_mass),
            ("power_iter_tol", self.power_iter_tol),
            ("percentile_tol", self.percentile_tol),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }
}

/// Model parameters.
///
/// Arrival rates are per frame; the service rate is per resource-time unit.
/// Fields are public for convenience; every analysis entry point calls
/// [`SystemConfig::validate`] before use.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// N
    pub num_rrh: usize,
    /// L, the most transfers one RRH may have in service at once.
    pub max_concurrent: u32,
    /// F
    pub frame_duration: f64,
    /// μ
    pub service_rate: f64,
    /// λ_j, mean scheduling requests per frame at each RRH.
    pub arrival_rates: Vec<f64>,
    /// M, the queue length beyond the servers kept by the truncated chain.
    pub queue_truncation: u32,
    pub tolerances: Tolerances,
}

/// Queue truncation used when none is given. Large enough that the
/// stationary law over the first c states is unaffected to 1e-6 up to
/// ρ = 0.9 at the reference parameters.
pub const DEFAULT_QUEUE_TRUNCATION: u32 = 200;

impl SystemConfig {
    pub fn new(
        max_concurrent: u32,
        frame_duration: f64,
        service_rate: f64,
        arrival_rates: Vec<f64>,
    ) -> Result<Self> {
        let cfg = SystemConfig {
            num_rrh: arrival_rates.len(),
            max_concurrent,
            frame_duration,
            service_rate,
            arrival_rates,
            queue_truncation: DEFAULT_QUEUE_TRUNCATION,
            tolerances: Tolerances::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// The reference deployment: L = 25, F = 10, μ = 0.2, one RRH per entry
    /// of `arrival_rates`.
    pub fn reference(arrival_rates: Vec<f64>) -> Result<Self> {
        Self::new(25, 10.0, 0.2, arrival_rates)
    }

    pub fn with_queue_truncation(mut self, m: u32) -> Result<Self> {
        self.queue_truncation = m;
        self.validate()?;
        Ok(self)
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances) -> Result<Self> {
        self.tolerances = tolerances;
        self.validate()?;
        Ok(self)
    }

    pub fn with_arrival_rates(mut self, arrival_rates: Vec<f64>) -> Result<Self> {
        self.num_rrh = arrival_rates.len();
        self.arrival_rates = arrival_rates;
        self.validate()?;
        Ok(self)
    }

    /// Change the frame length while holding the per-unit-time arrival
    /// intensity λ_j/F fixed.
    pub fn with_frame_duration(&self, frame_duration: f64) -> Result<Self> {
        if !(frame_duration > 0.0 && frame_duration.is_finite()) {
            return Err(Error::config(format!(
                "frame_duration must be positive, got {frame_duration}"
            )));
        }
        let scale = frame_duration / self.frame_duration;
        let mut cfg = self.clone();
        cfg.frame_duration = frame_duration;
        for l in &mut cfg.arrival_rates {
            *l *= scale;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_rrh == 0 {
            return Err(Error::config("num_rrh must be at least 1"));
        }
        if self.arrival_rates.len() != self.num_rrh {
            return Err(Error::config(format!(
                "expected {} arrival rates, got {}",
                self.num_rrh,
                self.arrival_rates.len()
            )));
        }
        if let Some(l) = self
            .arrival_rates
            .iter()
            .find(|l| !(**l >= 0.0 && l.is_finite()))
        {
            return Err(Error::config(format!(
                "arrival rates must be finite and non-negative, got {l}"
            )));
        }
        if self.max_concurrent == 0 {
            return Err(Error::config("max_concurrent must be at least 1"));
        }
        if !(self.frame_duration > 0.0 && self.frame_duration.is_finite()) {
            return Err(Error::config(format!(
                "frame_duration must be positive, got {}",
                self.frame_duration
            )));
        }
        if !(self.service_rate > 0.0 && self.service_rate.is_finite()) {
            return Err(Error::config(format!(
                "service_rate must be positive, got {}",
                self.service_rate
            )));
        }
        if self.queue_truncation == 0 {
            return Err(Error::config("queue_truncation must be at least 1"));
        }
        if (self.num_rrh as u64) * (self.max_concurrent as u64) > u32::MAX as u64 {
            return Err(Error::config("num_rrh * max_concurrent overflows"));
        }
        self.tolerances.validate()
    }

    /// Expected completions per busy server per frame.
    pub fn mu_f(&self) -> f64 {
        self.service_rate * self.frame_duration
    }

    pub fn total_arrival_rate(&self) -> f64 {
        self.arrival_rates.iter().sum()
    }

    /// L·N, the pool size that never constrains the air interface.
    pub fn max_servers(&self) -> u32 {
        self.max_concurrent * self.num_rrh as u32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub servers: u32,
    pub rho_bbu: f64,
    pub rho_rrh: Vec<f64>,
    pub stable: bool,
}

impl StabilityReport {
    pub fn max_rho_rrh(&self) -> f64 {
        self.rho_rrh.iter().copied().fold(0.0, f64::max)
    }
}

fn check_servers(config: &SystemConfig, servers: u32) -> Result<()> {
    if servers == 0 {
        return Err(Error::arg("servers must be at least 1"));
    }
    if servers > config.max_servers() {
        return Err(Error::arg(format!(
            "servers = {servers} exceeds the air-interface limit L*N = {}",
            config.max_servers()
        )));
    }
    Ok(())
}

/// Pool and per-RRH utilisation with `servers` servers in the pool.
pub fn stability_check(config: &SystemConfig, servers: u32) -> Result<StabilityReport> {
    config.validate()?;
    check_servers(config, servers)?;
    let mu_f = config.mu_f();
    let rho_bbu = config.total_arrival_rate() / (servers as f64 * mu_f);
    let per_rrh_capacity = config.max_concurrent as f64 * mu_f;
    let rho_rrh: Vec<f64> = config
        .arrival_rates
        .iter()
        .map(|l| l / per_rrh_capacity)
        .collect();
    let stable = rho_bbu < 1.0 && rho_rrh.iter().all(|r| *r < 1.0);
    Ok(StabilityReport {
        servers,
        rho_bbu,
        rho_rrh,
        stable,
    })
}

/// Servers assigned to RRH `rrh_index` when analysing it in isolation:
/// its share of `total_servers` in proportion to its arrival rate, rounded
/// down. With no load at all the pool is split evenly.
pub fn per_rrh_servers(config: &SystemConfig, total_servers: u32, rrh_index: usize) -> Result<u32> {
    config.validate()?;
    if rrh_index >= config.num_rrh {
        return Err(Error::arg(format!(
            "rrh index {rrh_index} out of range 0..{}",
            config.num_rrh
        )));
    }
    if total_servers > config.max_servers() {
        return Err(Error::arg(format!(
            "servers = {total_servers} exceeds the air-interface limit L*N = {}",
            config.max_servers()
        )));
    }
    let total = config.total_arrival_rate();
    if total == 0.0 {
        return Ok(total_servers / config.num_rrh as u32);
    }
    let share = config.arrival_rates[rrh_index] * total_servers as f64 / total;
    // Guard against a share like 9.999999999 that should be exactly 10.
    let nearest = libm::round(share);
    let share = if (share - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        libm::floor(share)
    };
    Ok(share as u32)
}
