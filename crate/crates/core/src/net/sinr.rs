use serde::{Deserialize, Serialize};

use super::{Configuration, NeighborhoodSystem, Network, Point, SchedulingParams};
use crate::error::{argument, domain, Result};

/// G(i,j) = |X_i - X_j|^(-alpha).
pub fn channel_gain(xi: Point, xj: Point, alpha: f64) -> Result<f64> {
    let d = xi.distance(&xj);
    if d == 0.0 {
        return Err(domain("channel gain diverges for coincident points"));
    }
    Ok(d.powf(-alpha))
}

/// U(x): 1 for x > 0, else 0.
pub fn unit_step(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

fn check_link(link: usize, config: &Configuration, net: &Network) -> Result<()> {
    config.check_domain(net)?;
    if link >= net.n_links() {
        return Err(argument(format!("link index {link} out of range")));
    }
    Ok(())
}

/// Full-information inverse SINR of `link` under `config`.
pub fn inverse_sinr(link: usize, config: &Configuration, net: &Network) -> Result<f64> {
    check_link(link, config, net)?;
    let interference: f64 = (0..net.n_links())
        .filter(|&m| m != link && config.is_active(m))
        .map(|m| net.received_power(link, m))
        .sum();
    Ok((interference + net.noise()) / net.signal_power(link))
}

/// Inverse SINR restricted to the neighborhood of `link`, plus a supplied
/// residual interference `res` (power units).
pub fn inverse_sinr_local(
    link: usize,
    config: &Configuration,
    nbhd: &NeighborhoodSystem,
    res: f64,
    net: &Network,
) -> Result<f64> {
    check_link(link, config, net)?;
    if !(res >= 0.0) {
        return Err(argument(format!("residual interference must be >= 0, got {res}")));
    }
    let local: f64 = nbhd
        .neighbors(link)
        .iter()
        .filter(|&&m| config.is_active(m))
        .map(|&m| net.received_power(link, m))
        .sum();
    Ok((local + net.noise() + res) / net.signal_power(link))
}

/// h_ij: interference at the receiver of `link` from active links outside
/// its neighborhood.
pub fn exact_residual(
    link: usize,
    config: &Configuration,
    nbhd: &NeighborhoodSystem,
    net: &Network,
) -> f64 {
    nbhd.outside(link)
        .iter()
        .filter(|&&m| config.is_active(m))
        .map(|&m| net.received_power(link, m))
        .sum()
}

pub fn exact_residuals(
    config: &Configuration,
    nbhd: &NeighborhoodSystem,
    net: &Network,
) -> Vec<f64> {
    (0..net.n_links()).map(|l| exact_residual(l, config, nbhd, net)).collect()
}

/// System potential energy H(sigma) with per-link residuals `residual`
/// (power units). Passing [`exact_residuals`] gives the exact energy;
/// passing an approximation gives the corresponding approximated energy.
pub fn potential_energy(
    config: &Configuration,
    net: &Network,
    nbhd: &NeighborhoodSystem,
    params: &SchedulingParams,
    residual: &[f64],
) -> Result<f64> {
    config.check_domain(net)?;
    if residual.len() != net.n_links() {
        return Err(argument("residual vector length must equal the link count"));
    }
    let mut h = 0.0;
    for ij in config.active_links() {
        let s = net.signal_power(ij);
        let local: f64 = nbhd
            .neighbors(ij)
            .iter()
            .filter(|&&mn| config.is_active(mn))
            .map(|&mn| net.received_power(ij, mn))
            .sum();
        let r = (local + net.noise() + residual[ij]) / s;
        h += -params.r0 + net.noise() / s;
        h += local / s;
        h += residual[ij] / s;
        h += params.beta * unit_step(r - params.r_th);
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub value: f64,
    pub feasible: bool,
    pub violating: Vec<usize>,
}

/// sum (R_0 - R_ij) sigma_ij with full-information R_ij, plus whether every
/// active link meets R_ij <= R_th.
pub fn objective_value(
    config: &Configuration,
    net: &Network,
    params: &SchedulingParams,
) -> Result<Objective> {
    config.check_domain(net)?;
    let mut value = 0.0;
    let mut violating = Vec::new();
    for ij in config.active_links() {
        let r = inverse_sinr(ij, config, net)?;
        value += params.r0 - r;
        if r > params.r_th {
            violating.push(ij);
        }
    }
    Ok(Objective { value, feasible: violating.is_empty(), violating })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outage {
    pub probability: f64,
    pub active: usize,
    pub violating: usize,
    /// Set when no link is active; `probability` is then 0.
    pub no_active_links: bool,
}

/// Fraction of active links whose full-information inverse SINR exceeds R_th.
pub fn outage_probability(
    config: &Configuration,
    net: &Network,
    params: &SchedulingParams,
) -> Result<Outage> {
    let obj = objective_value(config, net, params)?;
    let active = config.count_active();
    let violating = obj.violating.len();
    Ok(Outage {
        probability: if active == 0 { 0.0 } else { violating as f64 / active as f64 },
        active,
        violating,
        no_active_links: active == 0,
    })
}

/// Dense received-power table: `power(j, m)` is the power at the receiver
/// of link j from the transmitter of link m.
#[derive(Debug, Clone)]
pub struct GainTable {
    n: usize,
    rx_power: Vec<f64>,
}

impl GainTable {
    pub fn new(net: &Network) -> Self {
        let n = net.n_links();
        let mut rx_power = vec![0.0; n * n];
        for j in 0..n {
            for m in 0..n {
                rx_power[j * n + m] =
                    if m == j { net.signal_power(j) } else { net.received_power(j, m) };
            }
        }
        GainTable { n, rx_power }
    }

    pub fn n_links(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn power(&self, victim: usize, source: usize) -> f64 {
        self.rx_power[victim * self.n + source]
    }

    #[inline]
    pub fn signal(&self, link: usize) -> f64 {
        self.rx_power[link * self.n + link]
    }

    /// Total interference at `link` from active links other than itself.
    pub fn interference(&self, link: usize, active: &[bool]) -> f64 {
        let row = &self.rx_power[link * self.n..(link + 1) * self.n];
        row.iter()
            .zip(active)
            .enumerate()
            .filter(|&(m, (_, &a))| a && m != link)
            .map(|(_, (&p, _))| p)
            .sum()
    }
}
