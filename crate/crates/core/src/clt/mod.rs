//! Frontier model of the residual interference and its normal
//! approximation.
//!
//! Interferers outside the neighborhood sit on concentric frontiers. The
//! k-th frontier has mean radius gamma_f + k r_c with r_c = (r_l + r_u)/2;
//! its actual radius is the previous mean radius plus an increment
//! x_k ~ U(r_l, r_u), and interferers along it are spaced x_0 ~ U(r_l, r_u)
//! apart. The frontier contributes u_k = 2 pi P_0 r_k^(1-alpha) per unit
//! spacing and v_k = u_k / x_0 in total.

mod mc;
pub mod quadrature;

pub use mc::{mc_residual_oracle, McSummary, Sampling};

use serde::{Deserialize, Serialize};

use crate::error::{argument, Result};
use quadrature::Rule;

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierParams {
    pub gamma_f: f64,
    pub r_l: f64,
    pub r_u: f64,
    pub alpha: f64,
    pub p0: f64,
}

impl FrontierParams {
    /// Requires 0 < r_l <= r_u, gamma_f > 0, P_0 >= 0 and alpha > 2 (the
    /// frontier series diverges otherwise).
    pub fn new(gamma_f: f64, r_l: f64, r_u: f64, alpha: f64, p0: f64) -> Result<Self> {
        let p = FrontierParams { gamma_f, r_l, r_u, alpha, p0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.gamma_f, self.r_l, self.r_u, self.alpha, self.p0]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(argument("frontier parameters must be finite"));
        }
        if !(self.gamma_f > 0.0) {
            return Err(argument(format!("gamma_f must be > 0, got {}", self.gamma_f)));
        }
        if !(self.r_l > 0.0 && self.r_l <= self.r_u) {
            return Err(argument(format!(
                "frontier spacing needs 0 < r_l <= r_u, got ({}, {})",
                self.r_l, self.r_u
            )));
        }
        if !(self.alpha > 2.0) {
            return Err(argument(format!(
                "frontier series needs alpha > 2, got {}",
                self.alpha
            )));
        }
        if !(self.p0 >= 0.0) {
            return Err(argument(format!("P_0 must be >= 0, got {}", self.p0)));
        }
        Ok(())
    }

    pub fn r_c(&self) -> f64 {
        0.5 * (self.r_l + self.r_u)
    }

    fn width(&self) -> f64 {
        self.r_u - self.r_l
    }

    /// E[1/x_0] = ln(r_u/r_l)/(r_u - r_l).
    pub fn mean_inv_spacing(&self) -> f64 {
        let w = self.width();
        if w == 0.0 {
            1.0 / self.r_l
        } else {
            (w / self.r_l).ln_1p() / w
        }
    }

    /// E[1/x_0^2] = 1/(r_l r_u).
    pub fn mean_inv_spacing_sq(&self) -> f64 {
        1.0 / (self.r_l * self.r_u)
    }

    /// Mean radius of the previous frontier, gamma_f + (k-1) r_c.
    fn base(&self, k: usize) -> f64 {
        self.gamma_f + (k - 1) as f64 * self.r_c()
    }
}

/// <r_k> = gamma_f + k r_c.
pub fn frontier_mean_radius(k: usize, p: &FrontierParams) -> f64 {
    p.gamma_f + k as f64 * p.r_c()
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(argument("frontier index starts at 1"));
    }
    Ok(())
}

/// (1/w) * integral_{D + r_l}^{D + r_l + w} t^(e-1) dt, written to avoid
/// cancellation when w is small relative to D.
fn mean_power(d2: f64, w: f64, e: f64) -> f64 {
    if w == 0.0 {
        return d2.powf(e - 1.0);
    }
    d2.powf(e) * (e * (w / d2).ln_1p()).exp_m1() / (e * w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentsU {
    pub mean: f64,
    pub second: f64,
    pub variance: f64,
}

/// E[u_k] = 2 pi P_0 (D1^(2-a) - D2^(2-a)) / ((2-a)(r_u - r_l)) and
/// E[u_k^2] = 4 pi^2 P_0^2 (D1^(3-2a) - D2^(3-2a)) / ((3-2a)(r_u - r_l)),
/// D1 = <r_(k-1)> + r_u, D2 = <r_(k-1)> + r_l.
pub fn moment_u(k: usize, p: &FrontierParams) -> Result<MomentsU> {
    p.validate()?;
    check_k(k)?;
    let d2 = p.base(k) + p.r_l;
    let c = 2.0 * PI * p.p0;
    let mean = c * mean_power(d2, p.width(), 2.0 - p.alpha);
    let second = c * c * mean_power(d2, p.width(), 3.0 - 2.0 * p.alpha);
    let variance = if p.width() == 0.0 { 0.0 } else { (second - mean * mean).max(0.0) };
    Ok(MomentsU { mean, second, variance })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentsV {
    pub mean: f64,
    /// V(u_k)/(r_u r_l).
    pub variance: f64,
    /// E[u_k^2] E[1/x_0^2] - E[u_k]^2 E[1/x_0]^2, the variance of u_k/x_0
    /// with x_0 independent of u_k.
    pub variance_exact: f64,
}

pub fn moment_v(k: usize, p: &FrontierParams) -> Result<MomentsV> {
    let u = moment_u(k, p)?;
    let inv = p.mean_inv_spacing();
    Ok(MomentsV {
        mean: u.mean * inv,
        variance: u.variance * p.mean_inv_spacing_sq(),
        variance_exact: if p.width() == 0.0 {
            0.0
        } else {
            (u.second * p.mean_inv_spacing_sq() - (u.mean * inv).powi(2)).max(0.0)
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierTerm {
    pub k: usize,
    pub u: MomentsU,
    pub v: MomentsV,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesOptions {
    /// Stop once E[v_k] falls below `rel_tol` times the running mean.
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesOptions {
    fn default() -> Self {
        SeriesOptions { rel_tol: 1e-8, max_terms: 1_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualMoments {
    pub mean: f64,
    /// Sum of the per-frontier V(u_k)/(r_u r_l).
    pub variance: f64,
    /// Sum of per-frontier exact variances (independent spacing per frontier).
    pub variance_exact_terms: f64,
    /// Variance of (sum_k u_k)/x_0 with a single spacing shared by all frontiers.
    pub variance_shared_x0: f64,
    pub truncation_k: usize,
    /// False when `max_terms` was reached before the tolerance.
    pub converged: bool,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub terms: Vec<FrontierTerm>,
}

/// Moments of psi = sum_k v_k, truncated by `opts`. With `keep_terms` the
/// per-frontier moments are returned as well.
pub fn residual_moments(
    p: &FrontierParams,
    opts: SeriesOptions,
    keep_terms: bool,
) -> Result<ResidualMoments> {
    p.validate()?;
    if !(opts.rel_tol > 0.0) || opts.max_terms == 0 {
        return Err(argument("series options need rel_tol > 0 and max_terms >= 1"));
    }
    let mut terms = Vec::new();
    let (mut mean, mut var, mut var_exact, mut s_mean, mut s_var) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut k = 0;
    let mut converged = false;
    while k < opts.max_terms {
        k += 1;
        let u = moment_u(k, p)?;
        let v = moment_v(k, p)?;
        mean += v.mean;
        var += v.variance;
        var_exact += v.variance_exact;
        s_mean += u.mean;
        s_var += u.variance;
        if keep_terms {
            terms.push(FrontierTerm { k, u, v });
        }
        if v.mean <= opts.rel_tol * mean {
            converged = true;
            break;
        }
    }
    let s_second = s_var + s_mean * s_mean;
    let shared = (s_second * p.mean_inv_spacing_sq() - (s_mean * p.mean_inv_spacing()).powi(2)).max(0.0);
    Ok(ResidualMoments {
        mean,
        variance: var,
        variance_exact_terms: var_exact,
        variance_shared_x0: shared,
        truncation_k: k,
        converged,
        terms,
    })
}

/// E|v_k - E v_k|^3 by two-dimensional Gauss-Legendre quadrature over
/// (x_k, x_0). The inner integral is split where v_k crosses its mean.
pub fn third_abs_central_v(k: usize, p: &FrontierParams) -> Result<f64> {
    let m = moment_v(k, p)?.mean;
    if p.width() == 0.0 || p.p0 == 0.0 {
        return Ok(0.0);
    }
    let c = 2.0 * PI * p.p0;
    let d = p.base(k);
    let e = 1.0 - p.alpha;
    let rule = Rule::new(24);
    let inv_w2 = 1.0 / (p.width() * p.width());
    let outer = |x0: f64| {
        let f = |x: f64| (c * (d + x).powf(e) / x0 - m).abs().powi(3);
        let kink = (m * x0 / c).powf(1.0 / e) - d;
        if kink > p.r_l && kink < p.r_u {
            rule.integrate(p.r_l, kink, f) + rule.integrate(kink, p.r_u, f)
        } else {
            rule.integrate(p.r_l, p.r_u, f)
        }
    };
    Ok(inv_w2 * rule.adaptive(p.r_l, p.r_u, 1e-11, 1024, outer))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovPoint {
    pub k: usize,
    /// (sum E|v - Ev|^3)^(1/3) / sqrt(sum exact variances).
    pub ratio: f64,
    /// Same numerator over the root of the summed V(u_k)/(r_u r_l).
    pub ratio_formula_variance: f64,
}

/// Lyapunov ratios for K = 1..=k_max.
pub fn lyapunov_profile(p: &FrontierParams, k_max: usize) -> Result<Vec<LyapunovPoint>> {
    p.validate()?;
    check_k(k_max)?;
    if p.p0 == 0.0 {
        return Err(argument("Lyapunov ratio is undefined for P_0 = 0"));
    }
    if p.width() == 0.0 {
        return Err(argument("Lyapunov ratio is undefined for r_l = r_u"));
    }
    let (mut third, mut var, mut var_formula) = (0.0, 0.0, 0.0);
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let v = moment_v(k, p)?;
        third += third_abs_central_v(k, p)?;
        var += v.variance_exact;
        var_formula += v.variance;
        out.push(LyapunovPoint {
            k,
            ratio: third.cbrt() / var.sqrt(),
            ratio_formula_variance: third.cbrt() / var_formula.sqrt(),
        });
    }
    Ok(out)
}

/// Lyapunov ratio at truncation `k` using exact per-frontier variances.
pub fn lyapunov_ratio(p: &FrontierParams, k: usize) -> Result<f64> {
    Ok(lyapunov_profile(p, k)?.last().map(|x| x.ratio).unwrap_or(f64::NAN))
}

/// Lyapunov ratio at truncation `k` using the V(u_k)/(r_u r_l) variances.
pub fn lyapunov_ratio_formula_variance(p: &FrontierParams, k: usize) -> Result<f64> {
    Ok(lyapunov_profile(p, k)?.last().map(|x| x.ratio_formula_variance).unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> FrontierParams {
        FrontierParams::new(4.0, 1.0, 2.0, 4.0, 1.0).unwrap()
    }

    #[test]
    fn hand_computed_first_frontier() {
        let u = moment_u(1, &base()).unwrap();
        // 2 pi (1/36 - 1/25) / (-2)
        let want = 2.0 * PI * (1.0 / 25.0 - 1.0 / 36.0) / 2.0;
        assert!((u.mean - want).abs() < 1e-15);
        assert!((u.mean - 0.038397).abs() < 1e-6);
        let v = moment_v(1, &base()).unwrap();
        assert!((v.mean - want * 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn mean_radius() {
        assert_eq!(frontier_mean_radius(0, &base()), 4.0);
        assert_eq!(frontier_mean_radius(3, &base()), 8.5);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(FrontierParams::new(4.0, 1.0, 2.0, 2.0, 1.0).is_err());
        assert!(FrontierParams::new(4.0, 1.0, 2.0, 1.5, 1.0).is_err());
        assert!(FrontierParams::new(4.0, 2.0, 1.0, 4.0, 1.0).is_err());
        assert!(FrontierParams::new(0.0, 1.0, 2.0, 4.0, 1.0).is_err());
        assert!(moment_u(0, &base()).is_err());
        let zero = FrontierParams::new(4.0, 1.0, 2.0, 4.0, 0.0).unwrap();
        assert!(lyapunov_ratio(&zero, 5).is_err());
    }

    #[test]
    fn equal_bounds_take_the_limit() {
        let p = FrontierParams::new(4.0, 1.5, 1.5, 4.0, 1.0).unwrap();
        let u = moment_u(2, &p).unwrap();
        let r: f64 = 4.0 + 1.5 + 1.5;
        assert!((u.mean - 2.0 * PI * r.powf(-3.0)).abs() < 1e-15);
        assert_eq!(u.variance, 0.0);
        let near = FrontierParams::new(4.0, 1.5, 1.5 + 1e-9, 4.0, 1.0).unwrap();
        let un = moment_u(2, &near).unwrap();
        assert!((un.mean - u.mean).abs() < 1e-9 * u.mean);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let rule = Rule::new(32);
        for &(g, rl, ru, a) in &[(4.0, 1.0, 2.0, 4.0), (3.0, 1.0, 3.0, 3.0), (6.0, 2.0, 3.0, 6.0)] {
            let p = FrontierParams::new(g, rl, ru, a, 1.3).unwrap();
            for k in [1usize, 2, 7, 40] {
                let d = g + (k - 1) as f64 * p.r_c();
                let w = ru - rl;
                let c = 2.0 * PI * 1.3;
                let u = |x: f64| c * (d + x).powf(1.0 - a);
                let eu = rule.integrate(rl, ru, u) / w;
                let eu2 = rule.integrate(rl, ru, |x| u(x).powi(2)) / w;
                let einv = rule.integrate(rl, ru, |x| 1.0 / x) / w;
                let einv2 = rule.integrate(rl, ru, |x| 1.0 / (x * x)) / w;
                let mu = moment_u(k, &p).unwrap();
                let mv = moment_v(k, &p).unwrap();
                assert!((mu.mean - eu).abs() < 1e-12 * eu);
                assert!((mu.second - eu2).abs() < 1e-12 * eu2);
                assert!((mv.mean - eu * einv).abs() < 1e-12 * mv.mean);
                let exact = eu2 * einv2 - (eu * einv).powi(2);
                assert!((mv.variance_exact - exact).abs() < 1e-9 * exact);
            }
        }
    }

    #[test]
    fn formula_variance_understates_exact_variance() {
        let m = residual_moments(&base(), SeriesOptions::default(), false).unwrap();
        assert!(m.converged);
        assert!(m.variance < m.variance_exact_terms);
        assert!(m.variance_exact_terms < m.variance_shared_x0);
    }

    #[test]
    fn truncation_reports_nonconvergence() {
        let m = residual_moments(&base(), SeriesOptions { rel_tol: 1e-12, max_terms: 5 }, true).unwrap();
        assert!(!m.converged);
        assert_eq!(m.truncation_k, 5);
        assert_eq!(m.terms.len(), 5);
    }

    #[test]
    fn third_moment_against_brute_force_grid() {
        let p = base();
        let m = moment_v(1, &p).unwrap().mean;
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = 1.0 + (i as f64 + 0.5) * h;
                let x0 = 1.0 + (j as f64 + 0.5) * h;
                s += (2.0 * PI * (4.0 + x).powf(-3.0) / x0 - m).abs().powi(3);
            }
        }
        let brute = s * h * h;
        let quad = third_abs_central_v(1, &p).unwrap();
        assert!((quad - brute).abs() < 1e-5 * brute, "{quad} vs {brute}");
    }

    #[test]
    fn lyapunov_ratio_settles() {
        let prof = lyapunov_profile(&base(), 20).unwrap();
        let last = prof.last().unwrap();
        assert!(last.ratio > 0.0 && last.ratio < 1.5);
        assert!((prof[9].ratio - last.ratio).abs() < 0.01);
        assert!(last.ratio_formula_variance > last.ratio);
    }
}
