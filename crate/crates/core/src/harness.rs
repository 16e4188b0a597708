//! Experiment orchestration: sweeps over (mode, gamma_f, alpha, SINR_th),
//! replicated on random topologies, with outage always re-evaluated under
//! full information.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::exec::Execution;
use crate::net::{generate_topology, NeighborhoodSystem, PlacementRule, SchedulingParams};
use crate::rng::derive_seed;
use crate::scheduler::{schedule, ResidualMode, ScheduleOptions, ScheduleTrace, UpdatePolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    /// Replication r uses seeds[r % len], re-derived by r / len.
    pub seeds: Vec<u64>,
    #[serde(default = "default_links")]
    pub n_links: usize,
    #[serde(default = "default_side")]
    pub area_side: f64,
    #[serde(default)]
    pub placement: PlacementRule,
    #[serde(default = "default_noise")]
    pub noise: f64,
}

fn default_links() -> usize {
    200
}
fn default_side() -> f64 {
    10.0
}
fn default_noise() -> f64 {
    1e-4
}
fn default_replications() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub gamma_f: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sinr_th: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SchedulerKnobs {
    pub max_rounds: usize,
    pub access_probability: f64,
    pub activation_floor: f64,
    pub quiet_window: usize,
    pub update: UpdatePolicy,
}

impl Default for SchedulerKnobs {
    fn default() -> Self {
        let o = ScheduleOptions::with_seed(0);
        SchedulerKnobs {
            max_rounds: o.max_rounds,
            access_probability: o.access_probability,
            activation_floor: o.activation_floor,
            quiet_window: o.quiet_window,
            update: o.update,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub topology: TopologySpec,
    pub sweep: SweepSpec,
    /// Mode labels: `ignore`, `mf`, `mf-meas:<sigma>`, `clt`.
    pub modes: Vec<String>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    /// Scheduler randomness derives from this seed, the grid point and the
    /// replication index.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub scheduler: SchedulerKnobs,
    /// Leave non-converged runs out of the aggregates (they stay in the
    /// per-replication records).
    #[serde(default)]
    pub exclude_nonconverged: bool,
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_reader(std::fs::File::open(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.gamma_f.is_empty() || self.sweep.alpha.is_empty() || self.sweep.sinr_th.is_empty() {
            return Err(argument("sweep lists must be nonempty"));
        }
        if self.modes.is_empty() {
            return Err(argument("at least one mode is required"));
        }
        if self.topology.seeds.is_empty() {
            return Err(argument("topology seed list must be nonempty"));
        }
        if self.replications == 0 {
            return Err(argument("replications must be >= 1"));
        }
        self.parsed_modes()?;
        Ok(())
    }

    fn parsed_modes(&self) -> Result<Vec<ResidualMode>> {
        self.modes.iter().map(|m| m.parse()).collect()
    }

    fn topology_seed(&self, replication: usize) -> u64 {
        let seeds = &self.topology.seeds;
        derive_seed(seeds[replication % seeds.len()], &[(replication / seeds.len()) as u64])
    }

    /// Independent of the mode, so modes are compared on common draws.
    fn scheduler_seed(&self, point: &GridPoint, replication: usize) -> u64 {
        derive_seed(
            self.seed,
            &[point.gamma_f.to_bits(), point.alpha.to_bits(), point.sinr_th.to_bits(), replication as u64],
        )
    }

    fn grid(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::new();
        for mode in self.parsed_modes()? {
            for &gamma_f in &self.sweep.gamma_f {
                for &alpha in &self.sweep.alpha {
                    for &sinr_th in &self.sweep.sinr_th {
                        out.push(GridPoint { mode, gamma_f, alpha, sinr_th });
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub mode: ResidualMode,
    pub gamma_f: f64,
    pub alpha: f64,
    pub sinr_th: f64,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub mode: String,
    pub gamma_f: f64,
    pub alpha: f64,
    pub sinr_th: f64,
    pub replication: usize,
    pub outage: f64,
    pub active_links: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationFailure {
    pub replication: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub mode: String,
    pub gamma_f: f64,
    pub alpha: f64,
    pub sinr_th: f64,
    pub replications: usize,
    /// Replications entering the aggregates.
    pub included: usize,
    pub mean_outage: f64,
    pub stderr_outage: f64,
    pub mean_active_links: f64,
    pub mean_iterations: f64,
    pub median_iterations: f64,
    pub nonconvergence_rate: f64,
    pub failures: Vec<ReplicationFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageReport {
    pub points: Vec<PointReport>,
}

impl OutageReport {
    pub fn point(&self, mode: &str, gamma_f: f64, alpha: f64, sinr_th: f64) -> Option<&PointReport> {
        self.points
            .iter()
            .find(|p| p.mode == mode && p.gamma_f == gamma_f && p.alpha == alpha && p.sinr_th == sinr_th)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub records: Vec<ReplicationRecord>,
    pub report: OutageReport,
}

struct Job {
    point: usize,
    replication: usize,
}

struct JobOutcome {
    point: GridPoint,
    replication: usize,
    result: Result<ScheduleTrace>,
}

fn run_one(spec: &ExperimentSpec, point: &GridPoint, replication: usize) -> Result<ScheduleTrace> {
    let t = &spec.topology;
    let net = generate_topology(
        spec.topology_seed(replication),
        t.n_links,
        t.area_side,
        t.placement,
        point.alpha,
        t.noise,
    )?;
    let nbhd = NeighborhoodSystem::new(&net, point.gamma_f)?;
    let params = SchedulingParams::for_network(&net, point.sinr_th)?;
    let k = &spec.scheduler;
    let opts = ScheduleOptions {
        max_rounds: k.max_rounds,
        access_probability: k.access_probability,
        activation_floor: k.activation_floor,
        quiet_window: k.quiet_window,
        update: k.update,
        ..ScheduleOptions::with_seed(spec.scheduler_seed(point, replication))
    };
    // the trace's outage is the full-information evaluation of the final configuration
    schedule(&net, &nbhd, &params, point.mode, &opts)
}

fn run_jobs(spec: &ExperimentSpec, exec: Execution) -> Result<Vec<JobOutcome>> {
    spec.validate()?;
    let grid = spec.grid()?;
    let jobs: Vec<Job> = (0..grid.len())
        .flat_map(|point| (0..spec.replications).map(move |replication| Job { point, replication }))
        .collect();
    Ok(exec.map(&jobs, |job| JobOutcome {
        point: grid[job.point],
        replication: job.replication,
        result: run_one(spec, &grid[job.point], job.replication),
    }))
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn aggregate(
    point: &GridPoint,
    records: &[ReplicationRecord],
    failures: Vec<ReplicationFailure>,
    replications: usize,
    exclude_nonconverged: bool,
) -> PointReport {
    let used: Vec<&ReplicationRecord> =
        records.iter().filter(|r| r.converged || !exclude_nonconverged).collect();
    let n = used.len() as f64;
    let mean = |f: &dyn Fn(&ReplicationRecord) -> f64| used.iter().map(|r| f(r)).sum::<f64>() / n;
    let mean_outage = mean(&|r| r.outage);
    let stderr_outage = if used.len() > 1 {
        let v = used.iter().map(|r| (r.outage - mean_outage).powi(2)).sum::<f64>() / (n - 1.0);
        (v / n).sqrt()
    } else {
        0.0
    };
    let nonconverged = records.iter().filter(|r| !r.converged).count();
    PointReport {
        mode: point.mode.to_string(),
        gamma_f: point.gamma_f,
        alpha: point.alpha,
        sinr_th: point.sinr_th,
        replications,
        included: used.len(),
        mean_outage,
        stderr_outage,
        mean_active_links: mean(&|r| r.active_links as f64),
        mean_iterations: mean(&|r| r.iterations as f64),
        median_iterations: median(used.iter().map(|r| r.iterations as f64).collect()),
        nonconvergence_rate: if records.is_empty() { 0.0 } else { nonconverged as f64 / records.len() as f64 },
        failures,
    }
}

/// Runs every (grid point, replication) job. Failed replications are
/// listed in the report and left out of the records.
pub fn run_experiment(spec: &ExperimentSpec, exec: Execution) -> Result<ExperimentResult> {
    let outcomes = run_jobs(spec, exec)?;
    let mut records = Vec::with_capacity(outcomes.len());
    let mut points = Vec::new();
    for chunk in outcomes.chunks(spec.replications) {
        let point = chunk[0].point;
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for o in chunk {
            match &o.result {
                Ok(trace) => rows.push(ReplicationRecord {
                    mode: point.mode.to_string(),
                    gamma_f: point.gamma_f,
                    alpha: point.alpha,
                    sinr_th: point.sinr_th,
                    replication: o.replication,
                    outage: trace.outage.probability,
                    active_links: trace.outage.active,
                    iterations: trace.iterations,
                    converged: trace.converged,
                }),
                Err(e) => failures.push(ReplicationFailure { replication: o.replication, message: e.to_string() }),
            }
        }
        points.push(aggregate(&point, &rows, failures, spec.replications, spec.exclude_nonconverged));
        records.extend(rows);
    }
    Ok(ExperimentResult { records, report: OutageReport { points } })
}

const RECORD_COLUMNS: [&str; 9] =
    ["mode", "gamma_f", "alpha", "sinr_th", "replication", "outage", "active_links", "iterations", "converged"];

/// The header is written even when `records` is empty.
pub fn write_records<W: Write>(records: &[ReplicationRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(RECORD_COLUMNS)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ReplicationRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let headers = rd.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS) {
        return Err(argument(format!("unexpected CSV header: {headers:?}")));
    }
    rd.deserialize().map(|r| r.map_err(Into::into)).collect()
}

pub fn save_records(records: &[ReplicationRecord], path: impl AsRef<Path>) -> Result<()> {
    write_records(records, std::fs::File::create(path)?)
}

pub fn load_records(path: impl AsRef<Path>) -> Result<Vec<ReplicationRecord>> {
    read_records(std::fs::File::open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub mode: String,
    pub gamma_f: f64,
    pub alpha: f64,
    pub sinr_th: f64,
    pub replication: usize,
    pub iterations: usize,
    pub converged: bool,
    pub changed_per_round: Vec<usize>,
    pub active_per_round: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub runs: Vec<ConvergenceRun>,
    /// Per mode label: iterations -> number of converged replications.
    pub histogram: BTreeMap<String, BTreeMap<usize, usize>>,
    pub failures: Vec<ReplicationFailure>,
}

impl ConvergenceStudy {
    pub fn median_iterations(&self, mode: &str) -> f64 {
        median(
            self.runs
                .iter()
                .filter(|r| r.mode == mode && r.converged)
                .map(|r| r.iterations as f64)
                .collect(),
        )
    }

    /// Long-format CSV: one row per (run, round).
    pub fn write_curves<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["mode", "gamma_f", "alpha", "sinr_th", "replication", "round", "changed", "active"])?;
        for r in &self.runs {
            for (i, (c, a)) in r.changed_per_round.iter().zip(&r.active_per_round).enumerate() {
                w.serialize((&r.mode, r.gamma_f, r.alpha, r.sinr_th, r.replication, i + 1, c, a))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Iteration counts and per-round change curves for every replication.
pub fn convergence_study(spec: &ExperimentSpec, exec: Execution) -> Result<ConvergenceStudy> {
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    let mut histogram: BTreeMap<String, BTreeMap<usize, usize>> = BTreeMap::new();
    for o in run_jobs(spec, exec)? {
        match o.result {
            Ok(t) => {
                if t.converged {
                    *histogram.entry(t.mode.clone()).or_default().entry(t.iterations).or_default() += 1;
                }
                runs.push(ConvergenceRun {
                    mode: t.mode.clone(),
                    gamma_f: o.point.gamma_f,
                    alpha: o.point.alpha,
                    sinr_th: o.point.sinr_th,
                    replication: o.replication,
                    iterations: t.iterations,
                    converged: t.converged,
                    changed_per_round: t.rounds.iter().map(|r| r.changed()).collect(),
                    active_per_round: t.rounds.iter().map(|r| r.active).collect(),
                });
            }
            Err(e) => failures.push(ReplicationFailure { replication: o.replication, message: e.to_string() }),
        }
    }
    Ok(ConvergenceStudy { runs, histogram, failures })
}
