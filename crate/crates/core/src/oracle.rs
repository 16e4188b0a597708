//! Ground truth for small instances: exhaustive enumeration of feasible
//! configurations, exact minimization of the system potential energy, and
//! a heat-bath sampler for checking the Boltzmann normalization.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{argument, Error, Result};
use crate::exec::Execution;
use crate::net::{
    exact_residuals, potential_energy, Configuration, GainTable, NeighborhoodSystem, Network,
    SchedulingParams,
};
use crate::rng::stream;

pub const MAX_ENUMERATION_LINKS: usize = 24;
pub const MAX_SAMPLER_LINKS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeasibilityRule {
    /// Hop-count rule on a linear chain: any two active links must have at
    /// least `contention_links` links between them (contention) and at
    /// least `interference_links` links between them (interference).
    Separation { contention_links: usize, interference_links: usize },
    /// Every active link meets R_ij <= R_th under full information.
    Sinr { params: SchedulingParams },
}

impl FeasibilityRule {
    /// The chain example: one contention link, two interference links.
    pub fn chain_example() -> Self {
        FeasibilityRule::Separation { contention_links: 1, interference_links: 2 }
    }

    fn validate(&self, net: &Network) -> Result<()> {
        match self {
            FeasibilityRule::Separation { .. } => {
                let chain = net.links().windows(2).all(|w| w[0].rx == w[1].tx);
                if !chain {
                    return Err(argument("separation rule requires a linear chain of links"));
                }
            }
            FeasibilityRule::Sinr { params } => {
                if !(params.r_th > 0.0) {
                    return Err(argument("sinr rule needs R_th > 0"));
                }
            }
        }
        Ok(())
    }

    fn checker<'a>(&self, net: &'a Network) -> Box<dyn Fn(u64) -> bool + Sync + 'a> {
        let n = net.n_links();
        match *self {
            FeasibilityRule::Separation { contention_links, interference_links } => {
                let gap = contention_links.max(interference_links) + 1;
                Box::new(move |mask: u64| {
                    let mut last: Option<usize> = None;
                    for i in (0..n).filter(|&i| mask >> i & 1 == 1) {
                        if let Some(prev) = last {
                            if i - prev < gap {
                                return false;
                            }
                        }
                        last = Some(i);
                    }
                    true
                })
            }
            FeasibilityRule::Sinr { params } => {
                let table = GainTable::new(net);
                let noise = net.noise();
                Box::new(move |mask: u64| {
                    let active: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
                    active.iter().all(|&j| {
                        let i: f64 =
                            active.iter().filter(|&&m| m != j).map(|&m| table.power(j, m)).sum();
                        (i + noise) / table.signal(j) <= params.r_th
                    })
                })
            }
        }
    }

    /// Checks one configuration against the rule.
    pub fn is_feasible(&self, config: &Configuration, net: &Network) -> Result<bool> {
        self.validate(net)?;
        config.check_domain(net)?;
        if net.n_links() > 64 {
            return Err(Error::Size { links: net.n_links(), limit: 64 });
        }
        Ok(self.checker(net)(config.mask()))
    }
}

fn guard(net: &Network, limit: usize) -> Result<()> {
    if net.n_links() > limit {
        return Err(Error::Size { links: net.n_links(), limit });
    }
    Ok(())
}

const CHUNK_BITS: u32 = 12;

fn chunks(n: usize) -> Vec<(u64, u64)> {
    let total = 1u64 << n;
    let size = 1u64 << CHUNK_BITS.min(n as u32);
    (0..total / size).map(|c| (c * size, (c + 1) * size)).collect()
}

/// All configurations satisfying `rule`, sorted by active-link count and
/// then lexicographically by active link indices. With `maximal`, only
/// configurations with no feasible strict superset are kept. Both rules are
/// closed under removing links, so a configuration is maximal exactly when
/// no single additional link keeps it feasible.
pub fn enumerate_feasible(
    net: &Network,
    rule: &FeasibilityRule,
    maximal: bool,
    exec: Execution,
) -> Result<Vec<Configuration>> {
    guard(net, MAX_ENUMERATION_LINKS)?;
    rule.validate(net)?;
    let n = net.n_links();
    let check = rule.checker(net);
    let parts = exec.map(&chunks(n), |&(lo, hi)| {
        let feasible: Vec<u64> = (lo..hi).filter(|&m| check(m)).collect();
        feasible
    });
    let feasible: Vec<u64> = parts.into_iter().flatten().collect();
    let kept: Vec<u64> = if maximal {
        let mut is_feasible = vec![false; 1usize << n];
        for &m in &feasible {
            is_feasible[m as usize] = true;
        }
        feasible
            .into_iter()
            .filter(|&m| (0..n).all(|k| m >> k & 1 == 1 || !is_feasible[(m | 1 << k) as usize]))
            .collect()
    } else {
        feasible
    };
    let mut configs: Vec<Configuration> =
        kept.into_iter().map(|m| Configuration::from_mask(n, m)).collect();
    configs.sort_by_key(|c| (c.count_active(), c.active_links()));
    Ok(configs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Argmax {
    pub config: Configuration,
    pub energy: f64,
}

/// Energy of every mask in `[lo, hi)` walked in Gray-code order, so each
/// step flips one link and updates the interference vector in O(L).
fn scan_energies(
    table: &GainTable,
    noise: f64,
    params: &SchedulingParams,
    lo: u64,
    hi: u64,
    mut visit: impl FnMut(u64, f64),
) {
    let n = table.n_links();
    let gray = |i: u64| i ^ (i >> 1);
    let mut state = gray(lo);
    let mut interference: Vec<f64> = (0..n)
        .map(|j| (0..n).filter(|&m| m != j && state >> m & 1 == 1).map(|m| table.power(j, m)).sum())
        .collect();
    let energy = |state: u64, interference: &[f64]| -> f64 {
        (0..n)
            .filter(|&j| state >> j & 1 == 1)
            .map(|j| {
                let r = (interference[j] + noise) / table.signal(j);
                let penalty = if r > params.r_th { params.beta } else { 0.0 };
                -params.r0 + r + penalty
            })
            .sum()
    };
    for i in lo..hi {
        visit(state, energy(state, &interference));
        if i + 1 == hi {
            break;
        }
        let bit = (i + 1).trailing_zeros() as usize;
        let on = state >> bit & 1 == 0;
        state ^= 1 << bit;
        for (j, slot) in interference.iter_mut().enumerate() {
            if j != bit {
                let p = table.power(j, bit);
                if on {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        if !on {
            // removing an infinite contribution leaves NaN; rebuild those rows
            for (j, slot) in interference.iter_mut().enumerate() {
                if !slot.is_finite() {
                    *slot = (0..n)
                        .filter(|&m| m != j && state >> m & 1 == 1)
                        .map(|m| table.power(j, m))
                        .sum();
                }
            }
        }
    }
}

fn lex_less(a: u64, b: u64) -> bool {
    // compares active-index lists; the list with the smaller first
    // differing index (or the prefix) wins
    if a == b {
        return false;
    }
    let diff = a ^ b;
    let low = diff.trailing_zeros();
    let below = (1u64 << low) - 1;
    if a >> low & 1 == 1 {
        // a continues with `low`; b wins only if it has already ended
        b & !below != 0
    } else {
        a & !below == 0
    }
}

/// Energies within a relative 1e-12 count as tied; incremental updates
/// round differently from direct evaluation.
fn improves(cand: (u64, f64), best: (u64, f64)) -> bool {
    if !best.1.is_finite() {
        return cand.1 < best.1 || (cand.1 == best.1 && lex_less(cand.0, best.0));
    }
    let tol = 1e-12 * best.1.abs().max(1.0);
    cand.1 < best.1 - tol || ((cand.1 - best.1).abs() <= tol && lex_less(cand.0, best.0))
}

/// Configuration minimizing the exact potential energy (equivalently
/// maximizing the Boltzmann probability). Ties go to the lexicographically
/// smallest list of active link indices.
pub fn boltzmann_argmax(
    net: &Network,
    nbhd: &NeighborhoodSystem,
    params: &SchedulingParams,
    exec: Execution,
) -> Result<Argmax> {
    guard(net, MAX_ENUMERATION_LINKS)?;
    let n = net.n_links();
    let table = GainTable::new(net);
    let noise = net.noise();
    let best_of = |(lo, hi): &(u64, u64)| {
        let mut best = (0u64, f64::INFINITY);
        scan_energies(&table, noise, params, *lo, *hi, |mask, h| {
            if improves((mask, h), best) {
                best = (mask, h);
            }
        });
        best
    };
    let candidates = exec.map(&chunks(n), best_of);
    let mut best = (0u64, f64::INFINITY);
    for c in candidates {
        if improves(c, best) {
            best = c;
        }
    }
    let config = Configuration::from_mask(n, best.0);
    let energy = potential_energy(&config, net, nbhd, params, &exact_residuals(&config, nbhd, net))?;
    Ok(Argmax { config, energy })
}

/// Exact Boltzmann probabilities exp(-H)/Z for every mask, index = mask.
pub fn boltzmann_probabilities(
    net: &Network,
    nbhd: &NeighborhoodSystem,
    params: &SchedulingParams,
) -> Result<Vec<f64>> {
    guard(net, MAX_ENUMERATION_LINKS)?;
    let n = net.n_links();
    let energies = (0..1u64 << n)
        .map(|m| {
            let c = Configuration::from_mask(n, m);
            potential_energy(&c, net, nbhd, params, &exact_residuals(&c, nbhd, net))
        })
        .collect::<Result<Vec<f64>>>()?;
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|h| (-(h - min)).exp()).collect();
    let z: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / z).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    pub n_links: usize,
    pub sweeps: usize,
    /// Visit counts keyed by configuration mask (low bit = link 0).
    pub counts: BTreeMap<u64, u64>,
}

impl EmpiricalDistribution {
    pub fn frequency(&self, mask: u64) -> f64 {
        *self.counts.get(&mask).unwrap_or(&0) as f64 / self.sweeps as f64
    }
}

/// Heat-bath Gibbs sampler over exp(-H) with exact residuals. One sweep
/// updates every link once in index order; the state after each sweep is
/// recorded.
pub fn mc_boltzmann_sample(
    net: &Network,
    nbhd: &NeighborhoodSystem,
    params: &SchedulingParams,
    seed: u64,
    n_sweeps: usize,
) -> Result<EmpiricalDistribution> {
    guard(net, MAX_SAMPLER_LINKS)?;
    let n = net.n_links();
    let mut rng = stream(seed, &[0xB017]);
    let mut config = Configuration::empty(n);
    let energy = |c: &Configuration| -> Result<f64> {
        potential_energy(c, net, nbhd, params, &exact_residuals(c, nbhd, net))
    };
    let mut counts = BTreeMap::new();
    for _ in 0..n_sweeps {
        for link in 0..n {
            config.set(link, false);
            let h0 = energy(&config)?;
            config.set(link, true);
            let h1 = energy(&config)?;
            let dh = h1 - h0;
            let p_on = if dh.is_nan() { 0.5 } else { 1.0 / (1.0 + dh.exp()) };
            config.set(link, rng.random::<f64>() < p_on);
        }
        *counts.entry(config.mask()).or_insert(0) += 1;
    }
    Ok(EmpiricalDistribution { n_links: n, sweeps: n_sweeps, counts })
}
