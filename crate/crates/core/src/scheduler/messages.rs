//! Messages exchanged on the factor graph. Function node j evaluates the
//! local inverse SINR
//!   psi_j = (sum_{m in N_j active} P_m G(m, j) + N_b + Res_j) / S_j
//! from its view and reports the probability that psi_j stays below R_th.

use statrs::distribution::{ContinuousCDF, Normal};

use super::factor_graph::LocalView;
use crate::error::{argument, Result};
use crate::net::Network;

/// Interference at the owner's receiver from active links in its scope,
/// with `extra` links added on top.
pub fn local_interference(view: &LocalView, net: &Network, extra: &[usize]) -> f64 {
    let j = view.owner();
    view.active_neighbors()
        .chain(extra.iter().copied().filter(|&m| view.state(m).is_some() && m != j))
        .map(|m| net.received_power(j, m))
        .sum()
}

/// Mean and standard deviation of psi_j when Res_j has the given mean and
/// variance (power units).
pub fn local_potential_normal(
    view: &LocalView,
    net: &Network,
    extra: &[usize],
    res_mean: f64,
    res_variance: f64,
) -> Result<(f64, f64)> {
    if !(res_variance >= 0.0) {
        return Err(argument(format!("residual variance must be >= 0, got {res_variance}")));
    }
    if !(res_mean >= 0.0) {
        return Err(argument(format!("residual mean must be >= 0, got {res_mean}")));
    }
    let s = net.signal_power(view.owner());
    let psi = (local_interference(view, net, extra) + net.noise() + res_mean) / s;
    Ok((psi, res_variance.sqrt() / s))
}

/// Deterministic message: 1 when R_th > psi, else 0.
pub fn msg_fn_to_var(psi: f64, r_th: f64) -> f64 {
    if r_th > psi {
        1.0
    } else {
        0.0
    }
}

/// P(psi < R_th) for psi ~ N(mean, variance); zero variance falls back to
/// the deterministic message.
pub fn msg_var_to_fn_normal(mean: f64, variance: f64, r_th: f64) -> Result<f64> {
    if !(variance >= 0.0) {
        return Err(argument(format!("variance must be >= 0, got {variance}")));
    }
    if variance == 0.0 || !mean.is_finite() {
        return Ok(msg_fn_to_var(mean, r_th));
    }
    let n = Normal::new(mean, variance.sqrt()).map_err(|e| argument(e.to_string()))?;
    Ok(n.cdf(r_th))
}

/// Mean-field message: the deterministic message with Res_j fixed at the
/// supplied field (power units).
pub fn msg_meanfield(
    view: &LocalView,
    net: &Network,
    extra: &[usize],
    residual_power: f64,
    r_th: f64,
) -> Result<f64> {
    let (psi, _) = local_potential_normal(view, net, extra, residual_power, 0.0)?;
    Ok(msg_fn_to_var(psi, r_th))
}
