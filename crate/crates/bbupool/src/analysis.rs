//! Single operating-point analysis and its text, JSON and CSV renderings.

use std::fmt::Write as _;
use std::io::Write;

use bbupool_core::latency::LatencyCdf;
use bbupool_core::savings::{analyze_pool, RrhAnalysis};
use bbupool_core::{
    percentile, stability_check, system_time_cdf, total_time_cdf, Error, SystemConfig,
};
use serde::Serialize;

use crate::format::{g6, percentile_label};
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PercentileRow {
    pub zeta: f64,
    /// Queuing delay t2.
    pub queuing: f64,
    /// t2 + t3
    pub system: f64,
    /// t1 + t2 + t3
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RrhReport {
    pub rrh: usize,
    pub lambda: f64,
    pub servers: u32,
    pub chain_utilisation: f64,
    pub q_max: u32,
    pub mean_occupancy: f64,
    /// Pr(q ≥ ĉ): a frame starts with every server of this RRH busy.
    pub busy_probability: f64,
    /// π at the truncation boundary.
    pub truncation_mass: f64,
    /// Pr(t2 = 0)
    pub no_wait_probability: f64,
    pub mean_queuing: f64,
    /// Pr(t2 < τ) when τ was given.
    pub below_tau: Option<f64>,
    pub percentiles: Vec<PercentileRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalyzeReport {
    pub servers: u32,
    pub rho_bbu: f64,
    pub rho_rrh: Vec<f64>,
    pub stable: bool,
    pub tau: Option<f64>,
    pub rrhs: Vec<RrhReport>,
}

pub struct Analysis {
    pub report: AnalyzeReport,
    pub chains: Vec<RrhAnalysis>,
}

fn rrh_report(
    cfg: &SystemConfig,
    j: usize,
    a: &RrhAnalysis,
    zetas: &[f64],
    tau: Option<f64>,
) -> Result<RrhReport> {
    let width = cfg.tolerances.percentile_tol;
    let queuing = LatencyCdf::Queuing(a.mixture.clone());
    let system = system_time_cdf(&a.mixture, cfg.service_rate)?;
    let total = total_time_cdf(
        &system,
        cfg.frame_duration,
        cfg.tolerances.quadrature_abs_tol,
    )?;
    let percentiles = zetas
        .iter()
        .map(|&zeta| {
            Ok(PercentileRow {
                zeta,
                queuing: percentile(&queuing, zeta, width)?,
                system: percentile(&system, zeta, width)?,
                total: percentile(&total, zeta, width)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pi = &a.stationary;
    Ok(RrhReport {
        rrh: j,
        lambda: a.lambda,
        servers: a.servers,
        chain_utilisation: a.chain_utilisation(),
        q_max: a.matrix.q_max,
        mean_occupancy: pi.mean(),
        busy_probability: pi.tail_mass(a.matrix.servers as usize),
        truncation_mass: *pi.probs.last().unwrap_or(&0.0),
        no_wait_probability: a.mixture.atom_weight,
        mean_queuing: a.mixture.mean(),
        below_tau: tau.map(|t| a.mixture.cdf(t)),
        percentiles,
    })
}

/// Analyse `cfg` with `servers` in the pool. An unstable pool yields a report
/// with no per-RRH section rather than an error.
pub fn analyze(
    cfg: &SystemConfig,
    servers: u32,
    zetas: &[f64],
    tau: Option<f64>,
) -> Result<Analysis> {
    let stability = stability_check(cfg, servers)?;
    let mut report = AnalyzeReport {
        servers,
        rho_bbu: stability.rho_bbu,
        rho_rrh: stability.rho_rrh.clone(),
        stable: stability.stable,
        tau,
        rrhs: Vec::new(),
    };
    let pool = match analyze_pool(cfg, servers) {
        Ok(p) => p,
        Err(Error::Unstable { .. }) => {
            report.stable = false;
            return Ok(Analysis {
                report,
                chains: Vec::new(),
            });
        }
        Err(e) => return Err(e.into()),
    };
    for (j, a) in pool.rrhs.iter().enumerate() {
        report.rrhs.push(rrh_report(cfg, j, a, zetas, tau)?);
    }
    Ok(Analysis {
        report,
        chains: pool.rrhs,
    })
}

pub fn render_text(r: &AnalyzeReport) -> String {
    let mut s = String::new();
    let rho: Vec<String> = r.rho_rrh.iter().map(|x| g6(*x)).collect();
    writeln!(s, "servers={}", r.servers).unwrap();
    writeln!(
        s,
        "rho_bbu={} rho_rrh=[{}] stable={}",
        g6(r.rho_bbu),
        rho.join(", "),
        r.stable
    )
    .unwrap();
    if !r.stable {
        writeln!(
            s,
            "unstable: no stationary regime, percentiles not computed"
        )
        .unwrap();
        return s;
    }
    for rrh in &r.rrhs {
        writeln!(
            s,
            "rrh {}: lambda={} servers={} utilisation={} mean_q={} Pr(q>=c)={} Pr(q=Q)={} Pr(t2=0)={} mean(t2)={}",
            rrh.rrh,
            g6(rrh.lambda),
            rrh.servers,
            g6(rrh.chain_utilisation),
            g6(rrh.mean_occupancy),
            g6(rrh.busy_probability),
            g6(rrh.truncation_mass),
            g6(rrh.no_wait_probability),
            g6(rrh.mean_queuing),
        )
        .unwrap();
        if rrh.chain_utilisation >= 1.0 {
            writeln!(
                s,
                "  warning: per-RRH utilisation >= 1, results depend on queue_truncation"
            )
            .unwrap();
        }
        if let (Some(tau), Some(p)) = (r.tau, rrh.below_tau) {
            writeln!(s, "  Pr(t2<{})={}", g6(tau), g6(p)).unwrap();
        }
        for p in &rrh.percentiles {
            let label = percentile_label(p.zeta);
            writeln!(
                s,
                "  {label}(t2)={} {label}(t2+t3)={} {label}(t1+t2+t3)={}",
                g6(p.queuing),
                g6(p.system),
                g6(p.total)
            )
            .unwrap();
        }
    }
    s
}

/// One row per RRH and percentile level.
pub fn write_csv<W: Write>(r: &AnalyzeReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "servers",
        "rrh",
        "lambda",
        "rrh_servers",
        "zeta",
        "t2",
        "t2_t3",
        "t1_t2_t3",
    ])?;
    for rrh in &r.rrhs {
        for p in &rrh.percentiles {
            w.serialize((
                r.servers,
                rrh.rrh,
                rrh.lambda,
                rrh.servers,
                p.zeta,
                p.queuing,
                p.system,
                p.total,
            ))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// CDFs of t2, t2+t3 and t1+t2+t3 on `points` evenly spaced values of t in
/// [0, t_max], one block per RRH.
pub fn write_cdf_csv<W: Write>(
    cfg: &SystemConfig,
    chains: &[RrhAnalysis],
    t_max: f64,
    points: usize,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rrh", "t", "t2", "t2_t3", "t1_t2_t3"])?;
    for (j, a) in chains.iter().enumerate() {
        let system = system_time_cdf(&a.mixture, cfg.service_rate)?;
        let total = total_time_cdf(
            &system,
            cfg.frame_duration,
            cfg.tolerances.quadrature_abs_tol,
        )?;
        for i in 0..points {
            let t = if points > 1 {
                t_max * i as f64 / (points - 1) as f64
            } else {
                0.0
            };
            w.serialize((j, t, a.mixture.cdf(t), system.eval(t)?, total.eval(t)?))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Transition matrix, one row per state.
pub fn write_matrix_csv<W: Write>(a: &RrhAnalysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["state".to_string()];
    header.extend((0..a.matrix.states()).map(|j| format!("to_{j}")));
    w.write_record(&header)?;
    for (i, row) in a.matrix.rows().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(row.iter().map(|p| format!("{p:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stationary_csv<W: Write>(a: &RrhAnalysis, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["state", "probability"])?;
    for (i, p) in a.stationary.probs.iter().enumerate() {
        w.serialize((i, p))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_report() {
        let cfg = SystemConfig::reference(vec![10.0, 10.0]).unwrap();
        let a = analyze(&cfg, 20, &[0.99], Some(1.0)).unwrap();
        let text = render_text(&a.report);
        assert!(text.contains("rho_bbu=0.5"), "{text}");
        assert!(text.contains("p99(t2)=4.70"), "{text}");
        assert_eq!(a.report.rrhs.len(), 2);
        assert_eq!(a.report.rrhs[0].servers, 10);
    }

    #[test]
    fn idle_report() {
        let cfg = SystemConfig::reference(vec![0.0, 0.0]).unwrap();
        let a = analyze(&cfg, 2, &[0.9, 0.99], None).unwrap();
        for r in &a.report.rrhs {
            for p in &r.percentiles {
                assert_eq!(p.queuing, 0.0);
            }
        }
        assert!(render_text(&a.report).contains("p99(t2)=0 "));
    }

    #[test]
    fn unstable_report() {
        let cfg = SystemConfig::reference(vec![10.0, 10.0]).unwrap();
        let a = analyze(&cfg, 10, &[0.99], None).unwrap();
        assert!(!a.report.stable);
        assert!(render_text(&a.report).contains("unstable"));
    }
}
