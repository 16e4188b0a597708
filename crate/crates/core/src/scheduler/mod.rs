//! Randomized distributed scheduler. Each link decides from its own view
//! (neighborhood states plus a residual-interference model) whether to
//! switch on or off; rounds repeat until nothing changes.

mod factor_graph;
mod messages;

pub use factor_graph::{FactorGraph, LocalView};
pub use messages::{
    local_interference, local_potential_normal, msg_fn_to_var, msg_meanfield,
    msg_var_to_fn_normal,
};

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clt::{residual_moments, FrontierParams, SeriesOptions};
use crate::error::{argument, Error, Result};
use crate::meanfield::{mf_from_measurement, mf_solve, MfCoefficients, MfOptions};
use crate::net::{
    exact_residual, outage_probability, Configuration, NeighborhoodSystem, Network, Outage,
    SchedulingParams,
};
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MfSource {
    /// First round uses the mean-field fixed point; later rounds use the
    /// field induced by the current configuration.
    Solve,
    /// The field induced by the current configuration, seen through a
    /// per-link relative Gaussian error fixed for the whole run.
    Measurement { relative_sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Spacing {
    /// r_l and r_u are the smallest and largest nearest-neighbor distances
    /// among transmitters of the active links in scope (plus the owner);
    /// with fewer than three points the fallback pair is used.
    Estimated { fallback_r_l: f64, fallback_r_u: f64 },
    Fixed { r_l: f64, r_u: f64 },
}

impl Default for Spacing {
    fn default() -> Self {
        Spacing::Estimated { fallback_r_l: 1.0, fallback_r_u: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltVariance {
    /// Summed V(u_k)/(r_u r_l).
    #[default]
    Formula,
    ExactTerms,
    SharedSpacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CltPolicy {
    #[serde(default)]
    pub spacing: Spacing,
    #[serde(default)]
    pub variance: CltVariance,
    #[serde(default = "default_series_tol")]
    pub rel_tol: f64,
}

fn default_series_tol() -> f64 {
    1e-8
}

impl Default for CltPolicy {
    fn default() -> Self {
        CltPolicy { spacing: Spacing::default(), variance: CltVariance::default(), rel_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ResidualMode {
    Ignore,
    MeanField { source: MfSource },
    NormalClt { policy: CltPolicy },
}

impl ResidualMode {
    pub fn mean_field() -> Self {
        ResidualMode::MeanField { source: MfSource::Solve }
    }

    pub fn clt() -> Self {
        ResidualMode::NormalClt { policy: CltPolicy::default() }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ResidualMode::MeanField { source: MfSource::Measurement { relative_sigma } }
                if !(*relative_sigma >= 0.0 && relative_sigma.is_finite()) =>
            {
                Err(argument(format!("relative sigma must be >= 0, got {relative_sigma}")))
            }
            ResidualMode::NormalClt { policy } => {
                let (a, b) = match policy.spacing {
                    Spacing::Estimated { fallback_r_l, fallback_r_u } => (fallback_r_l, fallback_r_u),
                    Spacing::Fixed { r_l, r_u } => (r_l, r_u),
                };
                if !(a > 0.0 && a <= b && b.is_finite()) {
                    return Err(argument(format!("spacing needs 0 < r_l <= r_u, got ({a}, {b})")));
                }
                if !(policy.rel_tol > 0.0) {
                    return Err(argument("series tolerance must be > 0"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Labels: `ignore`, `mf`, `mf-meas:<sigma>`, `clt`.
impl fmt::Display for ResidualMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResidualMode::Ignore => write!(f, "ignore"),
            ResidualMode::MeanField { source: MfSource::Solve } => write!(f, "mf"),
            ResidualMode::MeanField { source: MfSource::Measurement { relative_sigma } } => {
                write!(f, "mf-meas:{relative_sigma}")
            }
            ResidualMode::NormalClt { .. } => write!(f, "clt"),
        }
    }
}

impl FromStr for ResidualMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ignore" => Ok(ResidualMode::Ignore),
            "mf" => Ok(ResidualMode::mean_field()),
            "clt" => Ok(ResidualMode::clt()),
            _ => {
                let sigma = s
                    .strip_prefix("mf-meas:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| argument(format!("unknown residual mode '{s}'")))?;
                let mode = ResidualMode::MeanField { source: MfSource::Measurement { relative_sigma: sigma } };
                mode.validate()?;
                Ok(mode)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdatePolicy {
    /// All links decide on the configuration at the start of the round;
    /// simultaneous activations are resolved by random priority.
    #[default]
    Synchronous,
    /// Links decide one at a time in a fresh random order each round and
    /// see earlier decisions of the same round.
    Asynchronous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    pub seed: u64,
    pub max_rounds: usize,
    /// A link whose success probability p clears the floor switches on with
    /// probability access_probability * p.
    pub access_probability: f64,
    pub activation_floor: f64,
    /// Consecutive quiet rounds required to declare convergence.
    pub quiet_window: usize,
    pub update: UpdatePolicy,
    pub initial: Option<Configuration>,
    pub mf: MfOptions,
}

impl ScheduleOptions {
    pub fn with_seed(seed: u64) -> Self {
        ScheduleOptions {
            seed,
            max_rounds: 100,
            access_probability: 1.0,
            activation_floor: 0.5,
            quiet_window: 3,
            update: UpdatePolicy::Synchronous,
            initial: None,
            mf: MfOptions::default(),
        }
    }

    fn validate(&self, net: &Network) -> Result<()> {
        if !(self.access_probability > 0.0 && self.access_probability <= 1.0) {
            return Err(argument("access probability must lie in (0, 1]"));
        }
        if !(self.activation_floor > 0.0 && self.activation_floor <= 1.0) {
            return Err(argument("activation floor must lie in (0, 1]"));
        }
        if self.quiet_window == 0 || self.max_rounds == 0 {
            return Err(argument("quiet window and max rounds must be >= 1"));
        }
        if let Some(c) = &self.initial {
            c.check_domain(net)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub active: usize,
    pub activated: usize,
    pub deactivated: usize,
    /// Nothing changed and no link was eligible to change.
    pub quiet: bool,
    /// Configuration after the round.
    pub config: Configuration,
}

impl RoundRecord {
    pub fn changed(&self) -> usize {
        self.activated + self.deactivated
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleTrace {
    pub mode: String,
    pub config: Configuration,
    pub rounds: Vec<RoundRecord>,
    /// Last round in which the configuration changed (0 if it never did).
    pub iterations: usize,
    pub converged: bool,
    pub outage: Outage,
}

struct Residuals<'a> {
    net: &'a Network,
    nbhd: &'a NeighborhoodSystem,
    mode: ResidualMode,
    /// Mean-field fixed point in power units, used in the first round only.
    mf_initial: Option<Vec<f64>>,
    /// Per-link multiplicative measurement error.
    factors: Option<Vec<f64>>,
    p0: f64,
    cache: HashMap<(u64, u64), (f64, f64)>,
}

impl<'a> Residuals<'a> {
    fn new(
        net: &'a Network,
        nbhd: &'a NeighborhoodSystem,
        params: &SchedulingParams,
        mode: ResidualMode,
        opts: &ScheduleOptions,
    ) -> Result<Self> {
        let mut mf_initial = None;
        let mut factors = None;
        match mode {
            ResidualMode::MeanField { source: MfSource::Solve } => {
                let sol = mf_solve(net, nbhd, params, None, opts.mf)?;
                mf_initial = Some(sol.residual_power(&MfCoefficients::new(net, params)));
            }
            ResidualMode::MeanField { source: MfSource::Measurement { relative_sigma } } => {
                let seed = derive_seed(opts.seed, &[0x3EA5]);
                factors = Some(mf_from_measurement(&vec![1.0; net.n_links()], relative_sigma, seed)?);
            }
            _ => {}
        }
        let n = net.n_links().max(1);
        let p0 = (0..net.n_links()).map(|l| net.tx_power(l)).sum::<f64>() / n as f64;
        Ok(Residuals { net, nbhd, mode, mf_initial, factors, p0, cache: HashMap::new() })
    }

    /// Mean and variance (power units) of Res for `link` in `round`.
    fn get(&mut self, link: usize, round: usize, config: &Configuration, graph: &FactorGraph) -> Result<(f64, f64)> {
        match self.mode {
            ResidualMode::Ignore => Ok((0.0, 0.0)),
            ResidualMode::MeanField { source: MfSource::Solve } => {
                if round == 1 {
                    if let Some(h) = &self.mf_initial {
                        return Ok((h[link], 0.0));
                    }
                }
                Ok((exact_residual(link, config, self.nbhd, self.net), 0.0))
            }
            ResidualMode::MeanField { source: MfSource::Measurement { .. } } => {
                let f = self.factors.as_ref().map_or(1.0, |f| f[link]);
                Ok((f * exact_residual(link, config, self.nbhd, self.net), 0.0))
            }
            // no interferer can lie beyond a neighborhood that already holds every link
            ResidualMode::NormalClt { .. } if self.nbhd.outside(link).is_empty() => Ok((0.0, 0.0)),
            ResidualMode::NormalClt { policy } => {
                let (r_l, r_u) = match policy.spacing {
                    Spacing::Fixed { r_l, r_u } => (r_l, r_u),
                    Spacing::Estimated { fallback_r_l, fallback_r_u } => {
                        estimate_spacing(self.net, &graph.view(link, config))
                            .unwrap_or((fallback_r_l, fallback_r_u))
                    }
                };
                let key = (r_l.to_bits(), r_u.to_bits());
                if let Some(&v) = self.cache.get(&key) {
                    return Ok(v);
                }
                let fp = FrontierParams::new(self.nbhd.gamma_f(), r_l, r_u, self.net.alpha(), self.p0)?;
                let m = residual_moments(&fp, SeriesOptions { rel_tol: policy.rel_tol, max_terms: 10_000_000 }, false)?;
                let var = match policy.variance {
                    CltVariance::Formula => m.variance,
                    CltVariance::ExactTerms => m.variance_exact_terms,
                    CltVariance::SharedSpacing => m.variance_shared_x0,
                };
                self.cache.insert(key, (m.mean, var));
                Ok((m.mean, var))
            }
        }
    }
}

/// Smallest and largest nearest-neighbor distance among the transmitters of
/// active links in the view plus the owner.
pub fn estimate_spacing(net: &Network, view: &LocalView) -> Option<(f64, f64)> {
    let mut pts: Vec<_> = view.active_neighbors().map(|m| net.tx_pos(m)).collect();
    pts.push(net.tx_pos(view.owner()));
    if pts.len() < 3 {
        return None;
    }
    let nn: Vec<f64> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            pts.iter()
                .enumerate()
                .filter(|&(k, _)| k != i)
                .map(|(_, q)| p.distance(q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let lo = nn.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = nn.iter().copied().fold(0.0, f64::max);
    (lo > 0.0).then_some((lo, hi))
}

fn success_probability(
    link: usize,
    view: &LocalView,
    net: &Network,
    extra: &[usize],
    res: (f64, f64),
    mode: &ResidualMode,
    r_th: f64,
) -> Result<f64> {
    match mode {
        ResidualMode::NormalClt { .. } => {
            let (mean, sd) = local_potential_normal(view, net, extra, res.0, res.1)?;
            msg_var_to_fn_normal(mean, sd * sd, r_th)
        }
        _ => {
            debug_assert_eq!(view.owner(), link);
            msg_meanfield(view, net, extra, res.0, r_th)
        }
    }
}

/// Random draws for link j in round t come from a stream keyed by
/// (seed, t, j), so results do not depend on evaluation order.
///
/// Runs the scheduler from `opts.initial` (empty by default) until
/// `opts.quiet_window` consecutive quiet rounds or `opts.max_rounds`.
pub fn schedule(
    net: &Network,
    nbhd: &NeighborhoodSystem,
    params: &SchedulingParams,
    mode: ResidualMode,
    opts: &ScheduleOptions,
) -> Result<ScheduleTrace> {
    mode.validate()?;
    opts.validate(net)?;
    if nbhd.len() != net.n_links() {
        return Err(argument("neighborhood system does not match the network"));
    }
    let n = net.n_links();
    let graph = FactorGraph::new(nbhd);
    let mut residuals = Residuals::new(net, nbhd, params, mode, opts)?;
    let mut config = opts.initial.clone().unwrap_or_else(|| Configuration::empty(n));
    let mut rounds = Vec::new();
    let mut quiet_run = 0;
    let mut iterations = 0;
    let floor = opts.activation_floor;
    let q = opts.access_probability;
    for round in 1..=opts.max_rounds {
        let (activated, deactivated, eligible) = match opts.update {
            UpdatePolicy::Synchronous => {
                let mut p = vec![0.0; n];
                for (j, pj) in p.iter_mut().enumerate() {
                    let res = residuals.get(j, round, &config, &graph)?;
                    *pj = success_probability(j, &graph.view(j, &config), net, &[], res, &mode, params.r_th)?;
                }
                let draws: Vec<(f64, f64)> = (0..n)
                    .map(|j| {
                        let mut rng = stream(opts.seed, &[round as u64, j as u64]);
                        (rng.random(), rng.random())
                    })
                    .collect();
                let on: Vec<usize> = (0..n).filter(|&j| !config.is_active(j) && p[j] >= floor).collect();
                let off: Vec<usize> = (0..n).filter(|&j| config.is_active(j) && p[j] < floor).collect();
                let tentative: Vec<usize> = on.iter().copied().filter(|&j| draws[j].0 < q * p[j]).collect();
                let mut confirmed = Vec::new();
                for &j in &tentative {
                    let ahead: Vec<usize> =
                        tentative.iter().copied().filter(|&m| draws[m].1 < draws[j].1).collect();
                    let res = residuals.get(j, round, &config, &graph)?;
                    let p2 = success_probability(j, &graph.view(j, &config), net, &ahead, res, &mode, params.r_th)?;
                    if p2 >= floor {
                        confirmed.push(j);
                    }
                }
                for &j in &confirmed {
                    config.set(j, true);
                }
                for &j in &off {
                    config.set(j, false);
                }
                (confirmed.len(), off.len(), on.len() + off.len())
            }
            UpdatePolicy::Asynchronous => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(&mut stream(opts.seed, &[round as u64, u64::MAX]));
                let (mut a, mut d, mut e) = (0, 0, 0);
                for j in order {
                    let res = residuals.get(j, round, &config, &graph)?;
                    let p = success_probability(j, &graph.view(j, &config), net, &[], res, &mode, params.r_th)?;
                    let u: f64 = stream(opts.seed, &[round as u64, j as u64]).random();
                    if config.is_active(j) && p < floor {
                        config.set(j, false);
                        d += 1;
                        e += 1;
                    } else if !config.is_active(j) && p >= floor {
                        e += 1;
                        if u < q * p {
                            config.set(j, true);
                            a += 1;
                        }
                    }
                }
                (a, d, e)
            }
        };
        let changed = activated + deactivated > 0;
        let quiet = !changed && eligible == 0;
        if changed {
            iterations = round;
        }
        rounds.push(RoundRecord {
            round,
            active: config.count_active(),
            activated,
            deactivated,
            quiet,
            config: config.clone(),
        });
        quiet_run = if quiet { quiet_run + 1 } else { 0 };
        if quiet_run >= opts.quiet_window {
            break;
        }
    }
    let outage = outage_probability(&config, net, params)?;
    Ok(ScheduleTrace {
        mode: mode.to_string(),
        config,
        rounds,
        iterations,
        converged: quiet_run >= opts.quiet_window,
        outage,
    })
}
