//! Long-term provisioning against a latency target and short-term
//! per-frame allocation savings.

use alloc::collections::btree_map::{BTreeMap, Entry};
use alloc::format;
use alloc::vec::Vec;

use crate::config::{per_rrh_servers, stability_check, StabilityReport, SystemConfig};
use crate::error::{Error, Result};
use crate::latency::{queuing_time_mixture, LatencyMixture};
use crate::markov::{
    post_arrival_distribution, stationary_distribution, transition_matrix, OccupancyDistribution,
    TransitionMatrix,
};

/// One RRH's chain solved with a fixed number of servers.
#[derive(Debug, Clone, PartialEq)]
pub struct RrhAnalysis {
    pub lambda: f64,
    pub servers: u32,
    pub matrix: TransitionMatrix,
    pub stationary: OccupancyDistribution,
    pub mixture: LatencyMixture,
}

impl RrhAnalysis {
    /// λ/(ĉμF); at or above 1 the answer depends on the queue truncation.
    pub fn chain_utilisation(&self) -> f64 {
        self.lambda / (self.servers as f64 * self.matrix.mu_f)
    }
}

/// Solve the chain of an RRH with arrival rate `lambda` and `servers` servers.
pub fn analyze_chain(config: &SystemConfig, lambda: f64, servers: u32) -> Result<RrhAnalysis> {
    config.validate()?;
    if servers == 0 && lambda > 0.0 {
        return Err(Error::arg("an RRH with traffic needs at least one server"));
    }
    // A silent RRH needs no servers; a one-server chain gives the same answer.
    let chain_servers = servers.max(1);
    let matrix = transition_matrix(
        lambda,
        chain_servers,
        config.mu_f(),
        config.queue_truncation,
        &config.tolerances,
    )?;
    let stationary = stationary_distribution(&matrix, config.tolerances.power_iter_tol)?;
    let mixture = queuing_time_mixture(
        &stationary,
        lambda,
        chain_servers,
        config.service_rate,
        config.frame_duration,
    )?;
    Ok(RrhAnalysis {
        lambda,
        servers,
        matrix,
        stationary,
        mixture,
    })
}

/// Memo of solved chains keyed by (λ, ĉ).
#[derive(Debug, Default)]
pub struct ChainCache {
    chains: BTreeMap<(u64, u32), RrhAnalysis>,
}

impl ChainCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &mut self,
        config: &SystemConfig,
        lambda: f64,
        servers: u32,
    ) -> Result<&RrhAnalysis> {
        match self.chains.entry((lambda.to_bits(), servers)) {
            Entry::Occupied(e) => Ok(e.into_mut()),
            Entry::Vacant(e) => Ok(e.insert(analyze_chain(config, lambda, servers)?)),
        }
    }

    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }
}

/// Every RRH analysed with its proportional share of `total_servers`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolAnalysis {
    pub stability: StabilityReport,
    pub rrhs: Vec<RrhAnalysis>,
}

fn unstable(report: &StabilityReport) -> Error {
    Error::Unstable {
        servers: report.servers,
        rho_bbu: report.rho_bbu,
        max_rho_rrh: report.max_rho_rrh(),
    }
}

/// Analyse the pool at `total_servers`. Fails with [`Error::Unstable`] when
/// the pool or an air interface is overloaded.
pub fn analyze_pool(config: &SystemConfig, total_servers: u32) -> Result<PoolAnalysis> {
    let stability = stability_check(config, total_servers)?;
    if !stability.stable {
        return Err(unstable(&stability));
    }
    let mut cache = ChainCache::new();
    let mut rrhs = Vec::with_capacity(config.num_rrh);
    for j in 0..config.num_rrh {
        let servers = per_rrh_servers(config, total_servers, j)?;
        let lambda = config.arrival_rates[j];
        if servers == 0 && lambda > 0.0 {
            return Err(unstable(&stability));
        }
        rrhs.push(cache.get(config, lambda, servers)?.clone());
    }
    Ok(PoolAnalysis { stability, rrhs })
}

/// Smallest pool size worth analysing: stable overall, every RRH with
/// traffic gets at least one server, and every split chain is itself stable.
pub fn min_stable_servers(config: &SystemConfig) -> Result<u32> {
    config.validate()?;
    let max = config.max_servers();
    let baseline = stability_check(config, max)?;
    if !baseline.stable {
        return Err(unstable(&baseline));
    }
    let idle = config.total_arrival_rate() == 0.0;
    let mu_f = config.mu_f();
    for c in 1..=max {
        if !stability_check(config, c)?.stable {
            continue;
        }
        let mut ok = true;
        for (j, &lambda) in config.arrival_rates.iter().enumerate() {
            let s = per_rrh_servers(config, c, j)?;
            let needs_server = idle || lambda > 0.0;
            if (needs_server && s == 0) || (lambda > 0.0 && lambda >= s as f64 * mu_f) {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(c);
        }
    }
    Err(unstable(&baseline))
}

/// Outcome of the provisioning search.
#[derive(Debug, Clone, PartialEq)]
pub struct Provisioning {
    pub servers: u32,
    /// min over RRHs of Pr(t₂ < τ) at the chosen size.
    pub probability: f64,
    /// (c, min over RRHs of Pr(t₂ < τ)) for every size tried.
    pub trace: Vec<(u32, f64)>,
}

/// Search upward from [`min_stable_servers`] for the first pool size where
/// every RRH meets Pr(t₂ < τ) ≥ ζ.
pub fn long_term_provisioning(config: &SystemConfig, tau: f64, zeta: f64) -> Result<Provisioning> {
    check_target(tau, zeta)?;
    let start = min_stable_servers(config)?;
    let mut cache = ChainCache::new();
    let mut trace = Vec::new();
    let mut best = 0.0f64;
    for c in start..=config.max_servers() {
        let mut worst = 1.0f64;
        for j in 0..config.num_rrh {
            let servers = per_rrh_servers(config, c, j)?;
            let a = cache.get(config, config.arrival_rates[j], servers)?;
            worst = worst.min(a.mixture.cdf(tau));
        }
        trace.push((c, worst));
        best = best.max(worst);
        if worst >= zeta {
            return Ok(Provisioning {
                servers: c,
                probability: worst,
                trace,
            });
        }
    }
    Err(Error::Infeasible {
        max_servers: config.max_servers(),
        best_probability: best,
    })
}

pub fn long_term_min_servers(config: &SystemConfig, tau: f64, zeta: f64) -> Result<u32> {
    long_term_provisioning(config, tau, zeta).map(|p| p.servers)
}

fn check_target(tau: f64, zeta: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::arg(format!("tau must be positive, got {tau}")));
    }
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::arg(format!("zeta must lie in (0, 1), got {zeta}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SavingsPolicy {
    LongTerm,
    ShortTerm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavingsReport {
    pub policy: SavingsPolicy,
    /// Pool size chosen by the long-term search.
    pub servers_provisioned: Option<u32>,
    pub normalized_cost: f64,
    pub savings: f64,
    /// 1 − ρ_BBU with the full pool of L·N servers.
    pub upper_bound: f64,
    pub rho_bbu: f64,
}

fn baseline_rho(config: &SystemConfig) -> Result<f64> {
    Ok(stability_check(config, config.max_servers())?.rho_bbu)
}

pub fn long_term_savings(config: &SystemConfig, tau: f64, zeta: f64) -> Result<SavingsReport> {
    let servers = long_term_min_servers(config, tau, zeta)?;
    let rho_bbu = baseline_rho(config)?;
    let normalized_cost = servers as f64 / config.max_servers() as f64;
    Ok(SavingsReport {
        policy: SavingsPolicy::LongTerm,
        servers_provisioned: Some(servers),
        normalized_cost,
        savings: 1.0 - normalized_cost,
        upper_bound: 1.0 - rho_bbu,
        rho_bbu,
    })
}

/// Expected fraction of the L·N servers left off when each frame powers
/// exactly Σ_j min(L, l_j) of them.
pub fn short_term_expected_savings(config: &SystemConfig) -> Result<SavingsReport> {
    let baseline = stability_check(config, config.max_servers())?;
    if !baseline.stable {
        return Err(unstable(&baseline));
    }
    let l = config.max_concurrent;
    let mut cache = ChainCache::new();
    let mut weighted = 0.0;
    for &lambda in &config.arrival_rates {
        let a = cache.get(config, lambda, l)?;
        let post = post_arrival_distribution(&a.stationary, lambda, a.matrix.q_max as usize)?;
        let used: f64 = post
            .probs
            .iter()
            .enumerate()
            .map(|(q, p)| (q as f64).min(l as f64) * p)
            .sum();
        weighted += l as f64 * (1.0 - used / l as f64);
    }
    let savings = weighted / (l as f64 * config.num_rrh as f64);
    Ok(SavingsReport {
        policy: SavingsPolicy::ShortTerm,
        servers_provisioned: None,
        normalized_cost: 1.0 - savings,
        savings,
        upper_bound: 1.0 - baseline.rho_bbu,
        rho_bbu: baseline.rho_bbu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latency::{percentile, LatencyCdf};
    use alloc::vec;

    fn table1(l: f64) -> SystemConfig {
        SystemConfig::reference(vec![l, l]).unwrap()
    }

    #[test]
    fn idle_pool() {
        let cfg = table1(0.0);
        assert_eq!(min_stable_servers(&cfg).unwrap(), 2);
        assert_eq!(long_term_min_servers(&cfg, 1.0, 0.99).unwrap(), 2);
        let r = long_term_savings(&cfg, 1.0, 0.99).unwrap();
        assert!((r.savings - 0.96).abs() < 1e-15);
        assert_eq!(r.savings, 1.0 - r.normalized_cost);
        let st = short_term_expected_savings(&cfg).unwrap();
        assert_eq!(st.savings, 1.0);
    }

    #[test]
    fn min_stable_respects_split_chains() {
        // λ = 10 per RRH: the pool is stable from c = 11 but c = 11 splits
        // into 5 + 5 servers, each exactly saturated.
        assert_eq!(min_stable_servers(&table1(10.0)).unwrap(), 12);
        assert_eq!(min_stable_servers(&table1(5.0)).unwrap(), 6);
    }

    #[test]
    fn overloaded_air_interface() {
        let cfg = table1(60.0);
        assert!(matches!(
            min_stable_servers(&cfg),
            Err(Error::Unstable { .. })
        ));
        assert!(matches!(
            short_term_expected_savings(&cfg),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn unstable_pool_is_reported() {
        let cfg = table1(10.0);
        assert!(matches!(
            analyze_pool(&cfg, 10),
            Err(Error::Unstable { .. })
        ));
        assert!(analyze_pool(&cfg, 11).is_ok());
    }

    #[test]
    fn reference_percentile() {
        let pool = analyze_pool(&table1(10.0), 20).unwrap();
        let p = percentile(
            &LatencyCdf::Queuing(pool.rrhs[0].mixture.clone()),
            0.99,
            1e-9,
        )
        .unwrap();
        // Exact value of the model; see the crate README for how it relates
        // to published curves.
        assert!((p - 4.704).abs() < 2e-3, "{p}");
    }

    #[test]
    fn savings_orderings() {
        let cfg = table1(10.0);
        let r1 = long_term_savings(&cfg, 1.0, 0.99).unwrap();
        let r10 = long_term_savings(&cfg, 10.0, 0.99).unwrap();
        assert!(r10.savings >= r1.savings);
        assert!(r1.savings < r1.upper_bound);
        let r999 = long_term_savings(&cfg, 1.0, 0.999).unwrap();
        assert!(r999.savings <= r1.savings);

        let st10 = short_term_expected_savings(&cfg).unwrap();
        let st5 = short_term_expected_savings(&cfg.with_frame_duration(5.0).unwrap()).unwrap();
        assert!(st5.savings > st10.savings);
        assert!(st10.savings < st10.upper_bound);
    }

    #[test]
    fn provisioning_trace_is_monotone() {
        let p = long_term_provisioning(&table1(10.0), 1.0, 0.99).unwrap();
        for w in p.trace.windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-12);
        }
        assert_eq!(p.trace.last().unwrap().0, p.servers);
    }

    #[test]
    fn infeasible_target() {
        let cfg = table1(10.0).with_queue_truncation(20).unwrap();
        assert!(long_term_min_servers(&cfg, 1.0, 0.0).is_err());
        assert!(long_term_min_servers(&cfg, 0.0, 0.5).is_err());
    }
}
