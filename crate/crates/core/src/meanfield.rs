//! Mean-field approximation of the residual interference. Each link's
//! outside-neighborhood interference is replaced by the deterministic field
//! h*_ij = sum_{mn outside N_ij} a_ij,mn mu_mn, where mu is the fixed point of
//! mu_ij = logistic(-(a_ij + h*_ij + sum_{mn in N_ij} a_ij,mn mu_mn)).
//!
//! Fields are normalized by the signal power S_ij; multiply by S_ij
//! ([`MfSolution::residual_power`]) to obtain interference in power units.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use crate::net::{GainTable, NeighborhoodSystem, Network, SchedulingParams};
use crate::rng::stream;

/// a_ij = -R_0 + N_b/S_ij and a_ij,mn = P_m l_mj^-alpha / S_ij.
#[derive(Debug, Clone)]
pub struct MfCoefficients {
    n: usize,
    pub self_term: Vec<f64>,
    coupling: Vec<f64>,
    signal: Vec<f64>,
}

impl MfCoefficients {
    pub fn new(net: &Network, params: &SchedulingParams) -> Self {
        let table = GainTable::new(net);
        let n = net.n_links();
        let signal: Vec<f64> = (0..n).map(|j| table.signal(j)).collect();
        let self_term = signal.iter().map(|s| -params.r0 + net.noise() / s).collect();
        let mut coupling = vec![0.0; n * n];
        for j in 0..n {
            for m in (0..n).filter(|&m| m != j) {
                coupling[j * n + m] = table.power(j, m) / signal[j];
            }
        }
        MfCoefficients { n, self_term, coupling, signal }
    }

    pub fn n_links(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn coupling(&self, victim: usize, source: usize) -> f64 {
        self.coupling[victim * self.n + source]
    }

    pub fn signal(&self, link: usize) -> f64 {
        self.signal[link]
    }

    /// sum_m a_jm x_m over `sources`, with 0 * inf taken as 0.
    pub fn weighted_sum(&self, victim: usize, sources: &[usize], x: &[f64]) -> f64 {
        sources
            .iter()
            .filter(|&&m| x[m] != 0.0)
            .map(|&m| self.coupling(victim, m) * x[m])
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MfOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Weight on the new iterate: mu <- (1 - d) mu + d T(mu).
    pub damping: f64,
}

impl Default for MfOptions {
    fn default() -> Self {
        MfOptions { tol: 1e-8, max_iter: 500, damping: 0.5 }
    }
}

impl MfOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(argument(format!("tolerance must be > 0, got {}", self.tol)));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(argument(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if self.max_iter == 0 {
            return Err(argument("max_iter must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MfSolution {
    /// Normalized residual field per link.
    pub h_star: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    /// ||T(mu) - mu||_inf at the returned iterate.
    pub residual_norm: f64,
    pub converged: bool,
}

impl MfSolution {
    /// h*_ij S_ij: the residual in power units, usable as `res` in
    /// [`crate::net::inverse_sinr_local`].
    pub fn residual_power(&self, coeffs: &MfCoefficients) -> Vec<f64> {
        self.h_star.iter().enumerate().map(|(j, h)| h * coeffs.signal(j)).collect()
    }
}

fn logistic_neg(field: f64) -> f64 {
    if field >= 0.0 {
        let e = (-field).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + field.exp())
    }
}

/// One evaluation of the fixed-point map at `link` given `mu`.
pub fn mf_map(
    link: usize,
    mu: &[f64],
    coeffs: &MfCoefficients,
    nbhd: &NeighborhoodSystem,
) -> (f64, f64) {
    let h = coeffs.weighted_sum(link, nbhd.outside(link), mu);
    let local = coeffs.weighted_sum(link, nbhd.neighbors(link), mu);
    (logistic_neg(coeffs.self_term[link] + h + local), h)
}

fn fixed_point_residual(mu: &[f64], coeffs: &MfCoefficients, nbhd: &NeighborhoodSystem) -> f64 {
    (0..mu.len()).map(|j| (mf_map(j, mu, coeffs, nbhd).0 - mu[j]).abs()).fold(0.0, f64::max)
}

/// Damped Gauss-Seidel iteration in link order. Stops when the fixed-point
/// residual drops to `opts.tol`; a run that hits `max_iter` is returned with
/// `converged = false`.
///
/// Strongly coupled links can trap the sweep in a limit cycle. When the
/// residual has not fallen by a tenth over [`STALL_WINDOW`] sweeps, up to
/// [`NEWTON_STEPS`] Newton steps on mu - T(mu) = 0 are tried, and kept only if they lower
/// the residual. Each such attempt counts as one iteration. If they do
/// not help, the damping is halved for the rest of the solve, down to
/// [`MIN_DAMPING`]. A solve still unconverged after `max_iter` sweeps falls
/// back to continuation in the coupling scale; its Newton steps are added
/// to `iterations`.
pub fn mf_solve(
    net: &Network,
    nbhd: &NeighborhoodSystem,
    params: &SchedulingParams,
    init: Option<&[f64]>,
    opts: MfOptions,
) -> Result<MfSolution> {
    opts.validate()?;
    let n = net.n_links();
    if nbhd.len() != n {
        return Err(argument("neighborhood system does not match the network"));
    }
    let mut mu = match init {
        Some(x) => {
            if x.len() != n {
                return Err(argument("initial mu length must equal the link count"));
            }
            if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(argument("initial mu must lie in [0, 1]"));
            }
            x.to_vec()
        }
        None => vec![0.5; n],
    };
    let coeffs = MfCoefficients::new(net, params);
    let mut residual = fixed_point_residual(&mu, &coeffs, nbhd);
    let mut damping = opts.damping;
    let mut history = vec![residual];
    let mut recent: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    while residual > opts.tol && iterations < opts.max_iter {
        iterations += 1;
        let stalled = history.len() > STALL_WINDOW
            && residual > 0.9 * history[history.len() - 1 - STALL_WINDOW];
        if stalled {
            // a limit cycle circles the fixed point, so its average is a
            // better Newton start than any single iterate
            let mut center = vec![0.0; n];
            for x in &recent {
                for (c, v) in center.iter_mut().zip(x) {
                    *c += v / recent.len() as f64;
                }
            }
            let best = [newton_polish(&center, &coeffs, nbhd), newton_polish(&mu, &coeffs, nbhd)]
                .into_iter()
                .flatten()
                .min_by(|a, b| a.1.total_cmp(&b.1));
            history.clear();
            recent.clear();
            if let Some((next, r)) = best.filter(|b| b.1 < residual) {
                mu = next;
                residual = r;
                history.push(residual);
                continue;
            }
            damping = (0.5 * damping).max(MIN_DAMPING);
        }
        for j in 0..n {
            let (t, _) = mf_map(j, &mu, &coeffs, nbhd);
            mu[j] = (1.0 - damping) * mu[j] + damping * t;
        }
        residual = fixed_point_residual(&mu, &coeffs, nbhd);
        history.push(residual);
        recent.push(mu.clone());
        if recent.len() > STALL_WINDOW {
            recent.remove(0);
        }
    }
    if residual > opts.tol {
        if let Some((x, spent)) = continuation(&coeffs, nbhd, opts.tol) {
            mu = x;
            residual = fixed_point_residual(&mu, &coeffs, nbhd);
            iterations += spent;
        }
    }
    if residual > opts.tol {
        if let Some((x, spent)) = continuation(&coeffs, nbhd, opts.tol) {
            mu = x;
            residual = fixed_point_residual(&mu, &coeffs, nbhd);
            iterations += spent;
        }
    }
    let h_star = (0..n).map(|j| coeffs.weighted_sum(j, nbhd.outside(j), &mu)).collect();
    Ok(MfSolution { h_star, mu, iterations, residual_norm: residual, converged: residual <= opts.tol })
}

/// H(mu, lambda) = mu - T_lambda(mu) and its n x (n + 1) Jacobian, the last
/// column being dH/dlambda.
fn homotopy(y: &[f64], coeffs: &MfCoefficients, nbhd: &NeighborhoodSystem) -> (Vec<f64>, Vec<f64>) {
    let n = y.len() - 1;
    let (mu, lambda) = (&y[..n], y[n]);
    let mut h = vec![0.0; n];
    let mut jac = vec![0.0; n * (n + 1)];
    for j in 0..n {
        let field = coeffs.weighted_sum(j, nbhd.outside(j), mu) + coeffs.weighted_sum(j, nbhd.neighbors(j), mu);
        let t = logistic_neg(coeffs.self_term[j] + lambda * field);
        h[j] = mu[j] - t;
        let w = t * (1.0 - t);
        let row = &mut jac[j * (n + 1)..(j + 1) * (n + 1)];
        for (m, cell) in row[..n].iter_mut().enumerate() {
            let c = if m == j { 0.0 } else { coeffs.coupling(j, m) };
            *cell = if w == 0.0 || c == 0.0 { 0.0 } else { lambda * w * c };
        }
        row[j] += 1.0;
        row[n] = if w == 0.0 { 0.0 } else { w * field };
    }
    (h, jac)
}

/// The Jacobian with `extra` appended as a last row.
fn bordered(jac: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut a = jac.to_vec();
    a.extend_from_slice(extra);
    a
}

fn unit_tangent(jac: &[f64], prev: &[f64]) -> Option<Vec<f64>> {
    let n1 = prev.len();
    let mut rhs = vec![0.0; n1];
    rhs[n1 - 1] = 1.0;
    let t = solve_dense(bordered(jac, prev), rhs, n1)?;
    let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
    norm.is_finite().then(|| t.iter().map(|v| v / norm).collect())
}

/// Follows the solution curve of mu = T_lambda(mu), couplings scaled by
/// lambda, from the explicit point at lambda = 0 to lambda = 1 by
/// pseudo-arclength continuation, which passes folds where lambda turns
/// back. Returns the point and the Newton steps spent, or None if the curve
/// is lost.
fn continuation(coeffs: &MfCoefficients, nbhd: &NeighborhoodSystem, tol: f64) -> Option<(Vec<f64>, usize)> {
    let n = coeffs.n_links();
    let mut y: Vec<f64> = coeffs.self_term.iter().map(|&a| logistic_neg(a)).collect();
    y.push(0.0);
    let mut tangent = vec![0.0; n + 1];
    tangent[n] = 1.0;
    let mut ds = 0.1f64;
    let mut spent = 0;
    loop {
        let (_, jac) = homotopy(&y, coeffs, nbhd);
        tangent = unit_tangent(&jac, &tangent)?;
        let pred: Vec<f64> = y.iter().zip(&tangent).map(|(v, t)| v + ds * t).collect();
        let mut z = pred.clone();
        let mut ok = false;
        for _ in 0..CORRECTOR_STEPS {
            spent += 1;
            let (h, jac) = homotopy(&z, coeffs, nbhd);
            let mut rhs: Vec<f64> = h.iter().map(|v| -v).collect();
            rhs.push(-(0..=n).map(|k| tangent[k] * (z[k] - pred[k])).sum::<f64>());
            let Some(delta) = solve_dense(bordered(&jac, &tangent), rhs, n + 1) else { break };
            for (v, d) in z.iter_mut().zip(&delta) {
                *v += d;
            }
            if z[..n].iter().any(|v| !(0.0..=1.0).contains(v)) {
                break;
            }
            let step = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
            let res = homotopy(&z, coeffs, nbhd).0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if res <= PATH_TOL.max(tol) && step <= PATH_TOL.sqrt() {
                ok = true;
                break;
            }
        }
        if spent > CONTINUATION_BUDGET {
            return None;
        }
        if !ok {
            ds *= 0.5;
            if ds < 1e-8 {
                return None;
            }
            continue;
        }
        if z[n] >= 1.0 {
            // land on lambda = 1 from the chord between the last two points
            let f = (1.0 - y[n]) / (z[n] - y[n]);
            let mut x: Vec<f64> = (0..n).map(|k| y[k] + f * (z[k] - y[k])).collect();
            for _ in 0..2 * CORRECTOR_STEPS {
                if fixed_point_residual(&x, coeffs, nbhd) <= tol {
                    return Some((x, spent));
                }
                spent += 1;
                x = newton_step(&x, coeffs, nbhd, 1.0)?;
            }
            return (fixed_point_residual(&x, coeffs, nbhd) <= tol).then_some((x, spent));
        }
        y = z;
        ds = (1.5 * ds).min(0.5);
    }
}

const CORRECTOR_STEPS: usize = 8;
/// Corrector tolerance on the path; only the end point must meet `tol`.
const PATH_TOL: f64 = 1e-6;
const CONTINUATION_BUDGET: usize = 400;

pub const STALL_WINDOW: usize = 10;
pub const MIN_DAMPING: f64 = 1.0 / 64.0;

/// The map with every coupling scaled by `lambda`.
fn scaled_map(j: usize, mu: &[f64], coeffs: &MfCoefficients, nbhd: &NeighborhoodSystem, lambda: f64) -> f64 {
    let field = coeffs.weighted_sum(j, nbhd.outside(j), mu) + coeffs.weighted_sum(j, nbhd.neighbors(j), mu);
    logistic_neg(coeffs.self_term[j] + if lambda == 1.0 { field } else { lambda * field })
}

fn merit(x: &[f64], coeffs: &MfCoefficients, nbhd: &NeighborhoodSystem, lambda: f64) -> f64 {
    (0..x.len()).map(|j| (scaled_map(j, x, coeffs, nbhd, lambda) - x[j]).powi(2)).sum()
}

/// Up to [`NEWTON_STEPS`] Newton steps from `start`, each backtracked on the
/// squared residual. Returns the end point and its max-norm residual, or
/// None if the first step already fails.
fn newton_polish(start: &[f64], coeffs: &MfCoefficients, nbhd: &NeighborhoodSystem) -> Option<(Vec<f64>, f64)> {
    let mut x = start.to_vec();
    let mut moved = false;
    for _ in 0..NEWTON_STEPS {
        match newton_step(&x, coeffs, nbhd, 1.0) {
            Some(nx) => {
                x = nx;
                moved = true;
            }
            None => break,
        }
    }
    moved.then(|| {
        let r = fixed_point_residual(&x, coeffs, nbhd);
        (x, r)
    })
}

pub const NEWTON_STEPS: usize = 30;

/// Newton step for F(mu) = mu - T(mu) with backtracking on |F|^2; None
/// when no step length down to 1/1024 lowers it.
fn newton_step(
    mu: &[f64],
    coeffs: &MfCoefficients,
    nbhd: &NeighborhoodSystem,
    lambda: f64,
) -> Option<Vec<f64>> {
    let n = mu.len();
    let t: Vec<f64> = (0..n).map(|j| scaled_map(j, mu, coeffs, nbhd, lambda)).collect();
    let base: f64 = t.iter().zip(mu).map(|(a, b)| (a - b).powi(2)).sum();
    if base == 0.0 {
        return None;
    }
    // dF_j/dmu_m = delta_jm + lambda T_j (1 - T_j) a_jm
    let mut jac = vec![0.0; n * n];
    for j in 0..n {
        let w = lambda * t[j] * (1.0 - t[j]);
        for m in 0..n {
            let c = if m == j { 0.0 } else { coeffs.coupling(j, m) };
            let d = if w == 0.0 || c == 0.0 { 0.0 } else { w * c };
            jac[j * n + m] = d + if m == j { 1.0 } else { 0.0 };
        }
    }
    let rhs: Vec<f64> = (0..n).map(|j| t[j] - mu[j]).collect();
    let delta = solve_dense(jac, rhs, n)?;
    let mut step = 1.0;
    while step >= 1.0 / 1024.0 {
        let cand: Vec<f64> = mu.iter().zip(&delta).map(|(m, d)| (m + step * d).clamp(0.0, 1.0)).collect();
        if merit(&cand, coeffs, nbhd, lambda) < base {
            return Some(cand);
        }
        step *= 0.5;
    }
    None
}

/// Gaussian elimination with partial pivoting; None for a singular matrix.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let pivot = (col..n).max_by(|&x, &y| a[x * n + col].abs().total_cmp(&a[y * n + col].abs()))?;
        if !(a[pivot * n + col].abs() > 1e-300) || !a[pivot * n + col].is_finite() {
            return None;
        }
        if pivot != col {
            for k in 0..n {
                a.swap(col * n + k, pivot * n + k);
            }
            b.swap(col, pivot);
        }
        for row in col + 1..n {
            let f = a[row * n + col] / a[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    a[row * n + k] -= f * a[col * n + k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row * n + k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row * n + row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Stand-in for a measured residual: each true value is perturbed by an
/// independent relative Gaussian error and clamped at zero.
pub fn mf_from_measurement(true_residual: &[f64], relative_sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(relative_sigma >= 0.0 && relative_sigma.is_finite()) {
        return Err(argument(format!("relative sigma must be >= 0, got {relative_sigma}")));
    }
    if true_residual.iter().any(|h| !(*h >= 0.0)) {
        return Err(argument("residuals must be >= 0"));
    }
    let mut rng = stream(seed, &[0x3EA5]);
    Ok(true_residual
        .iter()
        .map(|&h| {
            let e: f64 = StandardNormal.sample(&mut rng);
            (h * (1.0 + relative_sigma * e)).max(0.0)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergy {
    pub value: f64,
    /// Set always: the -ln Z_Q term is not evaluated.
    pub omits_log_partition: bool,
}

/// mu-dependent part of the variational free energy:
/// -sum h*_ij mu_ij + sum_ij sum_{mn outside N_ij} a_ij,mn mu_ij mu_mn.
pub fn variational_free_energy(
    mu: &[f64],
    h_star: &[f64],
    coeffs: &MfCoefficients,
    nbhd: &NeighborhoodSystem,
) -> Result<FreeEnergy> {
    let n = coeffs.n_links();
    if mu.len() != n || h_star.len() != n || nbhd.len() != n {
        return Err(argument("mu, h* and the neighborhood system must cover every link"));
    }
    if mu.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(argument("mu must lie in [0, 1]"));
    }
    let mut value = 0.0;
    for j in (0..n).filter(|&j| mu[j] != 0.0) {
        value += mu[j] * (coeffs.weighted_sum(j, nbhd.outside(j), mu) - h_star[j]);
    }
    Ok(FreeEnergy { value, omits_log_partition: true })
}
