use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bbupool::analysis;
use bbupool::configfile::{self, ConfigOverrides};
use bbupool::simulation;
use bbupool::sweep::{self, Range, SavingsSweep};
use bbupool::{AppError, Result};
use bbupool_core::sim::{default_warmup, SimulationConfig, DEFAULT_QUEUE_CAP};
use bbupool_core::{simulate, ServerPolicy, SystemConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Queuing latency and server-hour savings of a baseband server pool.
#[derive(Parser)]
#[command(name = "bbupool", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stability, occupancy and delay percentiles at one pool size.
    Analyze(AnalyzeArgs),
    /// Queuing-delay percentile against pool size.
    SweepServers(SweepServersArgs),
    /// Long- and short-term savings against load.
    SweepSavings(SweepSavingsArgs),
    /// Run the frame-based simulator.
    Simulate(SimulateArgs),
    /// Print the effective configuration in config-file form.
    Config(ConfigOnly),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-RRH arrival rates per frame, comma separated.
    #[arg(long, value_delimiter = ',')]
    lambda: Option<Vec<f64>>,
    /// Number of RRHs; a single --lambda value is copied to each.
    #[arg(long)]
    num_rrh: Option<usize>,
    /// Per-RRH cap L on transfers in service.
    #[arg(long)]
    max_concurrent: Option<u32>,
    /// Frame length F.
    #[arg(long)]
    frame_duration: Option<f64>,
    /// Service rate mu per unit time.
    #[arg(long)]
    service_rate: Option<f64>,
    /// Queue states M kept beyond the server count.
    #[arg(long)]
    queue_truncation: Option<u32>,
}

impl ConfigArgs {
    fn load(&self) -> Result<SystemConfig> {
        self.overrides()?.build()
    }

    /// For sweeps that set the rates themselves: `lambda` may be omitted.
    fn load_shape(&self) -> Result<SystemConfig> {
        let mut o = self.overrides()?;
        if o.lambda.is_none() {
            o.lambda = Some(vec![0.0; o.num_rrh.unwrap_or(2)]);
        }
        o.build()
    }

    fn overrides(&self) -> Result<ConfigOverrides> {
        let file = match &self.config {
            Some(p) => configfile::load(p)?,
            None => ConfigOverrides::default(),
        };
        let flags = ConfigOverrides {
            num_rrh: self.num_rrh,
            max_concurrent: self.max_concurrent,
            frame_duration: self.frame_duration,
            service_rate: self.service_rate,
            lambda: self.lambda.clone(),
            queue_truncation: self.queue_truncation,
            ..Default::default()
        };
        Ok(file.merge(&flags))
    }
}

#[derive(Args)]
struct ConfigOnly {
    #[command(flatten)]
    cfg: ConfigArgs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReportFormat {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TableFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Lt,
    St,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Pool size (default L*N).
    #[arg(long)]
    servers: Option<u32>,
    /// Percentile level; repeatable.
    #[arg(long = "zeta", default_values_t = vec![0.99])]
    zetas: Vec<f64>,
    /// Also report Pr(t2 < tau).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, value_enum, default_value_t = ReportFormat::Text)]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the delay CDFs as CSV.
    #[arg(long)]
    cdf_out: Option<PathBuf>,
    /// Largest t in the CDF export (default 10 frames).
    #[arg(long)]
    cdf_max: Option<f64>,
    #[arg(long, default_value_t = 201)]
    cdf_points: usize,
    /// Write each RRH's transition matrix and stationary law as CSV here.
    #[arg(long)]
    dump_chain: Option<PathBuf>,
}

#[derive(Args)]
struct SweepServersArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Pool sizes as start:stop[:step] (default 1:L*N).
    #[arg(long)]
    servers: Option<String>,
    /// Per-RRH rates, one curve each; every RRH gets the same rate.
    #[arg(long, value_delimiter = ',')]
    curves: Vec<f64>,
    #[arg(long = "zeta", default_values_t = vec![0.99])]
    zetas: Vec<f64>,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepSavingsArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Pool utilisation at L*N servers, as start:stop:step.
    #[arg(long, default_value = "0.1:0.9:0.1")]
    rho: String,
    #[arg(long = "tau", default_values_t = vec![1.0, 10.0])]
    taus: Vec<f64>,
    #[arg(long = "zeta", default_values_t = vec![0.99, 0.999])]
    zetas: Vec<f64>,
    /// Frame lengths for short-term rows (default: the configured one).
    #[arg(long = "frame")]
    frames_list: Vec<f64>,
    /// Add long-term rows sized by simulation.
    #[arg(long)]
    simulate: bool,
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = TableFormat::Csv)]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long, value_enum, default_value_t = PolicyArg::Lt)]
    policy: PolicyArg,
    /// Pool size for the long-term policy (default L*N).
    #[arg(long)]
    servers: Option<u32>,
    /// Frames to simulate.
    #[arg(long, default_value_t = 100_000)]
    frames: u64,
    /// Frames dropped from statistics (default frames/100).
    #[arg(long)]
    warmup: Option<u64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = DEFAULT_QUEUE_CAP)]
    queue_cap: usize,
    #[arg(long = "zeta", default_values_t = vec![0.99])]
    zetas: Vec<f64>,
    /// Write every completed transfer as CSV.
    #[arg(long)]
    raw_out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = TableFormat::Json)]
    format: TableFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| AppError::Io(format!("{}: {e}", p.display())))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        AppError::Io(format!("{}: {e}", path.display()))
    })?))
}

fn check_zetas(zetas: &[f64]) -> Result<()> {
    if let Some(z) = zetas.iter().find(|z| !(**z > 0.0 && **z < 1.0)) {
        return Err(AppError::Config(format!(
            "--zeta must lie in (0, 1), got {z}"
        )));
    }
    Ok(())
}

fn run_analyze(a: AnalyzeArgs) -> Result<()> {
    let cfg = a.cfg.load()?;
    check_zetas(&a.zetas)?;
    let servers = a.servers.unwrap_or(cfg.max_servers());
    let result = analysis::analyze(&cfg, servers, &a.zetas, a.tau)?;
    let mut out = open_out(a.out.as_deref())?;
    match a.format {
        ReportFormat::Text => out.write_all(analysis::render_text(&result.report).as_bytes())?,
        ReportFormat::Csv => analysis::write_csv(&result.report, &mut out)?,
        ReportFormat::Json => {
            serde_json::to_writer_pretty(&mut out, &result.report)?;
            writeln!(out)?;
        }
    }
    out.flush()?;
    if let Some(path) = &a.cdf_out {
        let t_max = a.cdf_max.unwrap_or(10.0 * cfg.frame_duration);
        analysis::write_cdf_csv(&cfg, &result.chains, t_max, a.cdf_points, create(path)?)?;
    }
    if let Some(dir) = &a.dump_chain {
        std::fs::create_dir_all(dir)
            .map_err(|e| AppError::Io(format!("{}: {e}", dir.display())))?;
        for (j, chain) in result.chains.iter().enumerate() {
            analysis::write_matrix_csv(chain, create(&dir.join(format!("rrh{j}_matrix.csv")))?)?;
            analysis::write_stationary_csv(
                chain,
                create(&dir.join(format!("rrh{j}_stationary.csv")))?,
            )?;
        }
    }
    Ok(())
}

fn run_sweep_servers(a: SweepServersArgs) -> Result<()> {
    let cfg = if a.curves.is_empty() {
        a.cfg.load()?
    } else {
        a.cfg.load_shape()?
    };
    check_zetas(&a.zetas)?;
    let range = match &a.servers {
        Some(s) => Range::parse(s)?,
        None => Range::new(1.0, cfg.max_servers() as f64, 1.0)?,
    };
    let servers: Vec<u32> = range
        .values()
        .into_iter()
        .map(|c| c.round() as u32)
        .collect();
    if servers.iter().any(|&c| c == 0 || c > cfg.max_servers()) {
        return Err(AppError::Config(format!(
            "--servers must lie in 1..={}",
            cfg.max_servers()
        )));
    }
    let rows = sweep::sweep_servers(&cfg, &a.curves, &servers, &a.zetas)?;
    let out = open_out(a.out.as_deref())?;
    match a.format {
        TableFormat::Csv => sweep::write_csv(&rows, out),
        TableFormat::Json => sweep::write_json(&rows, out),
    }
}

fn run_sweep_savings(a: SweepSavingsArgs) -> Result<()> {
    let cfg = a.cfg.load_shape()?;
    check_zetas(&a.zetas)?;
    let rhos = Range::parse(&a.rho)?.values();
    if let Some(r) = rhos.iter().find(|r| !(**r >= 0.0 && **r < 1.0)) {
        return Err(AppError::Config(format!(
            "--rho values must lie in [0, 1), got {r}"
        )));
    }
    let grid = SavingsSweep {
        rhos,
        taus: a.taus,
        zetas: a.zetas,
        frames: if a.frames_list.is_empty() {
            vec![cfg.frame_duration]
        } else {
            a.frames_list
        },
        simulate: a.simulate.then_some((a.frames, a.seed)),
    };
    let rows = sweep::sweep_savings(&cfg, &grid)?;
    let out = open_out(a.out.as_deref())?;
    match a.format {
        TableFormat::Csv => sweep::write_csv(&rows, out),
        TableFormat::Json => sweep::write_json(&rows, out),
    }
}

fn run_simulate(a: SimulateArgs) -> Result<()> {
    let system = a.cfg.load()?;
    check_zetas(&a.zetas)?;
    let policy = match a.policy {
        PolicyArg::Lt => ServerPolicy::LongTerm {
            servers: a.servers.unwrap_or(system.max_servers()),
        },
        PolicyArg::St => ServerPolicy::ShortTerm,
    };
    let mut sc = SimulationConfig::new(system, policy, a.frames, a.seed);
    sc.warmup_frames = a.warmup.unwrap_or(default_warmup(a.frames));
    sc.queue_cap = a.queue_cap;
    sc.record_transfers = a.raw_out.is_some();
    let result = simulate(&sc)?;
    if result.transfers_blocked > 0 {
        eprintln!(
            "warning: {} arrivals blocked by the queue cap",
            result.transfers_blocked
        );
    }
    let summary = simulation::summarize(&sc, &result, &a.zetas);
    let mut out = open_out(a.out.as_deref())?;
    match a.format {
        TableFormat::Json => simulation::write_json(&summary, &mut out)?,
        TableFormat::Csv => sweep::write_csv(&summary.percentiles, &mut out)?,
    }
    out.flush()?;
    if let Some(path) = &a.raw_out {
        simulation::write_raw_csv(&result, create(path)?)?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::SweepServers(a) => run_sweep_servers(a),
        Command::SweepSavings(a) => run_sweep_savings(a),
        Command::Simulate(a) => run_simulate(a),
        Command::Config(a) => {
            print!("{}", configfile::dump(&a.cfg.load()?));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
