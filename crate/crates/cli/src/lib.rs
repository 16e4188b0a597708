//! Command-line front end. [`dispatch`] parses argv, runs one subcommand and
//! maps the outcome to an exit code: 0 on success, 1 on a usage or argument
//! error, 2 on a runtime or domain error. Diagnostics go to stderr; data
//! goes to files, or to stdout where a subcommand says so.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use linksched::clt::{
    lyapunov_profile, mc_residual_oracle, moment_u, moment_v, residual_moments, FrontierParams, Sampling, SeriesOptions,
};
use linksched::harness::{convergence_study, run_experiment, save_records, ExperimentSpec};
use linksched::meanfield::{mf_solve, MfOptions};
use linksched::net::{generate_topology, linear_chain, PlacementRule};
use linksched::oracle::{boltzmann_argmax, enumerate_feasible, FeasibilityRule};
use linksched::scheduler::{schedule, ResidualMode, ScheduleOptions, UpdatePolicy};
use linksched::{Configuration, Error, Execution, NeighborhoodSystem, Network, SchedulingParams};

#[derive(Debug, Parser)]
#[command(name = "linksched", version, about = "Distributed SINR link scheduling toolkit")]
struct Cli {
    /// Worker threads for internal parallel loops (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,

    /// Seed for every random choice. Required by gen (random layouts),
    /// schedule, and clt with --mc-samples; overrides the seed in a sweep spec.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a network and write it as JSON.
    Gen(GenArgs),
    /// Enumerate feasible configurations or find the maximum-likelihood one.
    Oracle(OracleArgs),
    /// Solve the mean-field fixed point for a network.
    Mf(MfArgs),
    /// Frontier moments, Lyapunov ratios and a Monte Carlo normality check.
    Clt(CltArgs),
    /// Run the distributed scheduler once.
    Schedule(ScheduleArgs),
    /// Run an experiment sweep from a spec file.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct LayoutArgs {
    /// Links in a random layout.
    #[arg(long, default_value_t = 200)]
    links: usize,
    /// Side of the square deployment area in meters.
    #[arg(long, default_value_t = 10.0)]
    area_side: f64,
    /// Receiver distance bound around its transmitter.
    #[arg(long, default_value_t = 1.0)]
    radius: f64,
    /// Path-loss exponent.
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    /// Background noise power.
    #[arg(long, default_value_t = 1e-4)]
    noise: f64,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[command(flatten)]
    layout: LayoutArgs,
    /// Build a deterministic chain of this many nodes instead (no seed needed).
    #[arg(long, value_name = "NODES")]
    linear: Option<usize>,
    /// Node spacing of the chain.
    #[arg(long, default_value_t = 1.0)]
    spacing: f64,
    /// Output network JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum RuleKind {
    /// Hop-count separation on a chain.
    Separation,
    /// Full-information SINR feasibility.
    Sinr,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Use a unit-spaced chain of this many nodes.
    #[arg(long, value_name = "NODES", conflicts_with = "net")]
    linear: Option<usize>,
    /// Network JSON to examine.
    #[arg(long)]
    net: Option<PathBuf>,
    /// Feasibility rule.
    #[arg(long, value_enum, default_value_t = RuleKind::Separation)]
    rule: RuleKind,
    /// Separation rule: links required between active links for contention.
    #[arg(long, default_value_t = 1)]
    contention: usize,
    /// Separation rule: links required between active links for interference.
    #[arg(long, default_value_t = 2)]
    interference: usize,
    /// SINR threshold (linear) for the SINR rule and --argmax.
    #[arg(long, default_value_t = 10.0)]
    sinr_th: f64,
    /// Keep only configurations with no feasible strict superset.
    #[arg(long)]
    maximal: bool,
    /// Report the lowest-energy configuration instead of enumerating.
    #[arg(long)]
    argmax: bool,
    /// Neighborhood radius for --argmax.
    #[arg(long, default_value_t = 2.0)]
    gamma_f: f64,
    /// Output format on stdout.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Also write the JSON to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MfArgs {
    /// Network JSON.
    #[arg(long)]
    net: PathBuf,
    /// Neighborhood radius.
    #[arg(long)]
    gamma_f: f64,
    /// SINR threshold (linear).
    #[arg(long, default_value_t = 10.0)]
    sinr_th: f64,
    /// Fixed-point tolerance on the max-norm residual.
    #[arg(long, default_value_t = MfOptions::default().tol)]
    tol: f64,
    /// Sweep budget.
    #[arg(long, default_value_t = MfOptions::default().max_iter)]
    max_iter: usize,
    /// Weight on the new iterate.
    #[arg(long, default_value_t = MfOptions::default().damping)]
    damping: f64,
    /// Output MfSolution JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CltArgs {
    /// Neighborhood radius.
    #[arg(long)]
    gamma_f: f64,
    /// Smallest transmitter spacing.
    #[arg(long, default_value_t = 1.0)]
    r_l: f64,
    /// Largest transmitter spacing.
    #[arg(long, default_value_t = 2.0)]
    r_u: f64,
    /// Path-loss exponent.
    #[arg(long, default_value_t = 4.0)]
    alpha: f64,
    /// Transmit power.
    #[arg(long, default_value_t = 1.0)]
    p0: f64,
    /// Relative truncation tolerance of the series.
    #[arg(long, default_value_t = SeriesOptions::default().rel_tol)]
    rel_tol: f64,
    /// Rows in the per-frontier CSV (default: the truncation depth).
    #[arg(long)]
    k_max: Option<usize>,
    /// Monte Carlo samples for the KS distance; 0 skips it.
    #[arg(long, default_value_t = 0)]
    mc_samples: usize,
    /// Per-frontier CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON output.
    #[arg(long)]
    summary: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Update {
    Sync,
    Async,
}

#[derive(Debug, Args)]
struct ScheduleArgs {
    /// Network JSON; without it a random layout is generated from --seed.
    #[arg(long)]
    net: Option<PathBuf>,
    #[command(flatten)]
    layout: LayoutArgs,
    /// Residual handling: ignore, mf, mf-meas:<sigma> or clt.
    #[arg(long, default_value = "clt")]
    mode: String,
    /// Neighborhood radius.
    #[arg(long)]
    gamma_f: f64,
    /// SINR threshold (linear).
    #[arg(long, default_value_t = 10.0)]
    sinr_th: f64,
    /// Round budget.
    #[arg(long, default_value_t = ScheduleOptions::with_seed(0).max_rounds)]
    max_iter: usize,
    /// Activation probability scale.
    #[arg(long, default_value_t = ScheduleOptions::with_seed(0).access_probability)]
    access_probability: f64,
    /// Update order within a round.
    #[arg(long, value_enum, default_value_t = Update::Sync)]
    update: Update,
    /// Output ScheduleTrace JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// ExperimentSpec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Per-replication CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Summary JSON (default: the --out path with extension .summary.json).
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Also run the convergence study and write per-round curves here.
    #[arg(long)]
    curves: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Argument(m) => Failure::Usage(m),
            other => Failure::Runtime(other),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

type Outcome = Result<(), Failure>;

/// Parses `argv` (program name first), runs it, and returns the exit code.
pub fn dispatch<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be >= 1");
            return 1;
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = match cli.command {
        Command::Gen(a) => gen(a, cli.seed),
        Command::Oracle(a) => oracle(a),
        Command::Mf(a) => mf(a),
        Command::Clt(a) => clt(a, cli.seed),
        Command::Schedule(a) => run_schedule(a, cli.seed),
        Command::Sweep(a) => sweep(a, cli.seed),
    };
    match out {
        Ok(()) => 0,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            1
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64, Failure> {
    seed.ok_or_else(|| Failure::Usage(format!("{what} is stochastic and needs --seed")))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Outcome {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn random_layout(l: &LayoutArgs, seed: u64) -> Result<Network, Error> {
    generate_topology(seed, l.links, l.area_side, PlacementRule::DiskAroundTransmitter { radius: l.radius }, l.alpha, l.noise)
}

fn gen(a: GenArgs, seed: Option<u64>) -> Outcome {
    let net = match a.linear {
        Some(n) => linear_chain(n, a.spacing, a.layout.alpha, a.layout.noise)?,
        None => random_layout(&a.layout, require_seed(seed, "a random layout")?)?,
    };
    net.save(&a.out)?;
    eprintln!("wrote {} links to {}", net.n_links(), a.out.display());
    Ok(())
}

#[derive(Serialize)]
struct OracleRow {
    active: Vec<usize>,
    labels: Vec<(u64, u64)>,
}

#[derive(Serialize)]
struct ArgmaxReport {
    active: Vec<usize>,
    labels: Vec<(u64, u64)>,
    energy: f64,
}

fn labels(net: &Network, c: &Configuration) -> Vec<(u64, u64)> {
    c.active_links().iter().map(|&l| net.link_label(l)).collect()
}

fn row_text(labels: &[(u64, u64)]) -> String {
    labels.iter().map(|(t, r)| format!("({t},{r})")).collect::<Vec<_>>().join(" ")
}

fn oracle(a: OracleArgs) -> Outcome {
    let net = match (&a.linear, &a.net) {
        (Some(n), _) => linear_chain(*n, 1.0, 4.0, 0.0)?,
        (None, Some(p)) => Network::load(p)?,
        (None, None) => return Err(Failure::Usage("oracle needs --linear or --net".into())),
    };
    let params = SchedulingParams::for_network(&net, a.sinr_th)?;
    let json = if a.argmax {
        let nbhd = NeighborhoodSystem::new(&net, a.gamma_f)?;
        let best = boltzmann_argmax(&net, &nbhd, &params, Execution::default())?;
        let report = ArgmaxReport { active: best.config.active_links(), labels: labels(&net, &best.config), energy: best.energy };
        if let Format::Table = a.format {
            println!("{}\tH = {:.6e}", row_text(&report.labels), report.energy);
        }
        serde_json::to_value(report)?
    } else {
        let rule = match a.rule {
            RuleKind::Separation => {
                FeasibilityRule::Separation { contention_links: a.contention, interference_links: a.interference }
            }
            RuleKind::Sinr => FeasibilityRule::Sinr { params },
        };
        let configs = enumerate_feasible(&net, &rule, a.maximal, Execution::default())?;
        let rows: Vec<OracleRow> =
            configs.iter().map(|c| OracleRow { active: c.active_links(), labels: labels(&net, c) }).collect();
        if let Format::Table = a.format {
            for r in &rows {
                println!("{}", row_text(&r.labels));
            }
            eprintln!("{} configurations", rows.len());
        }
        serde_json::to_value(rows)?
    };
    if let Format::Json = a.format {
        println!("{}", serde_json::to_string_pretty(&json)?);
    }
    if let Some(p) = &a.out {
        write_json(&json, p)?;
    }
    Ok(())
}

fn mf(a: MfArgs) -> Outcome {
    let net = Network::load(&a.net)?;
    let params = SchedulingParams::for_network(&net, a.sinr_th)?;
    let nbhd = NeighborhoodSystem::new(&net, a.gamma_f)?;
    let opts = MfOptions { tol: a.tol, max_iter: a.max_iter, damping: a.damping };
    let sol = mf_solve(&net, &nbhd, &params, None, opts)?;
    write_json(&sol, &a.out)?;
    eprintln!(
        "{} after {} iterations, residual {:.3e}",
        if sol.converged { "converged" } else { "NOT converged" },
        sol.iterations,
        sol.residual_norm
    );
    Ok(())
}

#[derive(Serialize)]
struct CltSummary {
    mean: f64,
    variance: f64,
    variance_exact_terms: f64,
    variance_shared_x0: f64,
    truncation_k: usize,
    converged: bool,
    /// Null unless Monte Carlo samples were requested.
    ks_distance: Option<f64>,
    mc_mean: Option<f64>,
    mc_variance: Option<f64>,
}

fn clt(a: CltArgs, seed: Option<u64>) -> Outcome {
    let p = FrontierParams::new(a.gamma_f, a.r_l, a.r_u, a.alpha, a.p0)?;
    let m = residual_moments(&p, SeriesOptions { rel_tol: a.rel_tol, ..SeriesOptions::default() }, false)?;
    let k_max = a.k_max.unwrap_or(m.truncation_k).max(1);
    // undefined with no spread in spacing or zero power
    let ratios = lyapunov_profile(&p, k_max).ok();
    let mut w = csv::Writer::from_path(&a.out).map_err(Error::from)?;
    w.write_record(["k", "E_u", "V_u", "E_v", "V_v", "lyapunov_ratio_at_k"]).map_err(Error::from)?;
    for k in 1..=k_max {
        let u = moment_u(k, &p)?;
        let v = moment_v(k, &p)?;
        let ratio = ratios.as_ref().map_or(String::new(), |r| r[k - 1].ratio.to_string());
        w.write_record([
            k.to_string(),
            u.mean.to_string(),
            u.variance.to_string(),
            v.mean.to_string(),
            v.variance.to_string(),
            ratio,
        ])
        .map_err(Error::from)?;
    }
    w.flush()?;
    let mc = if a.mc_samples > 0 {
        let seed = require_seed(seed, "--mc-samples")?;
        Some(mc_residual_oracle(&p, m.truncation_k, a.mc_samples, seed, Sampling::ProductDensity, Execution::default())?)
    } else {
        None
    };
    let summary = CltSummary {
        mean: m.mean,
        variance: m.variance,
        variance_exact_terms: m.variance_exact_terms,
        variance_shared_x0: m.variance_shared_x0,
        truncation_k: m.truncation_k,
        converged: m.converged,
        ks_distance: mc.as_ref().map(|s| s.ks_normal),
        mc_mean: mc.as_ref().map(|s| s.mean),
        mc_variance: mc.as_ref().map(|s| s.variance),
    };
    write_json(&summary, &a.summary)
}

fn run_schedule(a: ScheduleArgs, seed: Option<u64>) -> Outcome {
    let seed = require_seed(seed, "schedule")?;
    let net = match &a.net {
        Some(p) => {
            let net = Network::load(p)?;
            // an explicit --alpha overrides the stored exponent
            if a.layout.alpha != net.alpha() { net.with_alpha(a.layout.alpha)? } else { net }
        }
        None => random_layout(&a.layout, seed)?,
    };
    let mode: ResidualMode = a.mode.parse()?;
    let params = SchedulingParams::for_network(&net, a.sinr_th)?;
    let nbhd = NeighborhoodSystem::new(&net, a.gamma_f)?;
    let opts = ScheduleOptions {
        max_rounds: a.max_iter,
        access_probability: a.access_probability,
        update: match a.update {
            Update::Sync => UpdatePolicy::Synchronous,
            Update::Async => UpdatePolicy::Asynchronous,
        },
        ..ScheduleOptions::with_seed(seed)
    };
    let trace = schedule(&net, &nbhd, &params, mode, &opts)?;
    write_json(&trace, &a.out)?;
    let ids: Vec<String> = trace.config.active_links().iter().map(|l| l.to_string()).collect();
    println!("{}", ids.join(" "));
    eprintln!(
        "{} active, outage {:.4}, {} iterations, {}",
        trace.outage.active,
        trace.outage.probability,
        trace.iterations,
        if trace.converged { "converged" } else { "NOT converged" }
    );
    Ok(())
}

fn sweep(a: SweepArgs, seed: Option<u64>) -> Outcome {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let result = run_experiment(&spec, Execution::default())?;
    save_records(&result.records, &a.out)?;
    let summary = a.summary.clone().unwrap_or_else(|| a.out.with_extension("summary.json"));
    result.report.save(&summary)?;
    for p in &result.report.points {
        eprintln!(
            "{:>10} gamma_f={} alpha={} sinr_th={}: outage {:.4} +- {:.4}, {:.1} active, {} failures",
            p.mode, p.gamma_f, p.alpha, p.sinr_th, p.mean_outage, p.stderr_outage, p.mean_active_links, p.failures.len()
        );
    }
    if let Some(curves) = &a.curves {
        let study = convergence_study(&spec, Execution::default())?;
        study.write_curves(BufWriter::new(File::create(curves)?))?;
        write_json(&study.histogram, &curves.with_extension("histogram.json"))?;
    }
    Ok(())
}
