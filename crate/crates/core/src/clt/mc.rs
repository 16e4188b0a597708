//! Monte Carlo estimate of the residual distribution under the frontier
//! model, used as an independent check on the closed-form moments.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::FrontierParams;
use crate::error::{argument, Result};
use crate::exec::{compensated_sum, Execution};
use crate::rng::stream;

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// r_k = <r_(k-1)> + x_k independently per frontier; the density the
    /// closed-form moments integrate against.
    #[default]
    ProductDensity,
    /// r_k = r_(k-1) + x_k, a cumulative walk from r_0 = gamma_f. Its mean
    /// sits above the closed form because r^(1-alpha) is convex.
    RandomWalk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub samples: usize,
    pub frontiers: usize,
    pub mean: f64,
    pub variance: f64,
    pub third_central: f64,
    pub std_error: f64,
    /// Kolmogorov-Smirnov distance to the normal with the sample mean and
    /// variance.
    pub ks_normal: f64,
}

const BLOCK: usize = 4096;

fn draw(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Draws `n_samples` realizations of psi = sum_{k<=frontiers} u_k / x_0,
/// one spacing x_0 per realization.
pub fn mc_residual_oracle(
    p: &FrontierParams,
    frontiers: usize,
    n_samples: usize,
    seed: u64,
    sampling: Sampling,
    exec: Execution,
) -> Result<McSummary> {
    p.validate()?;
    if frontiers == 0 || n_samples < 2 {
        return Err(argument("Monte Carlo needs at least one frontier and two samples"));
    }
    let c = 2.0 * PI * p.p0;
    let e = 1.0 - p.alpha;
    let int_e = (e.fract() == 0.0 && e.abs() < 64.0).then_some(e as i32);
    let rc = p.r_c();
    let blocks: Vec<(usize, usize)> = (0..n_samples.div_ceil(BLOCK))
        .map(|b| (b, BLOCK.min(n_samples - b * BLOCK)))
        .collect();
    let parts = exec.map(&blocks, |&(b, len)| {
        let mut rng = stream(seed, &[0xC17, b as u64]);
        (0..len)
            .map(|_| {
                let x0 = draw(&mut rng, p.r_l, p.r_u);
                let mut r = p.gamma_f;
                let mut s = 0.0;
                for k in 1..=frontiers {
                    let x = draw(&mut rng, p.r_l, p.r_u);
                    let rk = match sampling {
                        Sampling::ProductDensity => p.gamma_f + (k - 1) as f64 * rc + x,
                        Sampling::RandomWalk => {
                            r += x;
                            r
                        }
                    };
                    s += match int_e {
                        Some(i) => rk.powi(i),
                        None => rk.powf(e),
                    };
                }
                c * s / x0
            })
            .collect::<Vec<f64>>()
    });
    let mut xs: Vec<f64> = parts.into_iter().flatten().collect();
    let n = xs.len() as f64;
    let mean = compensated_sum(xs.iter().copied()) / n;
    let variance = compensated_sum(xs.iter().map(|x| (x - mean).powi(2))) / (n - 1.0);
    let third_central = compensated_sum(xs.iter().map(|x| (x - mean).powi(3))) / n;
    let ks_normal = if variance > 0.0 {
        let normal = Normal::new(mean, variance.sqrt())
            .map_err(|e| argument(format!("normal reference: {e}")))?;
        xs.sort_by(f64::total_cmp);
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = normal.cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(McSummary {
        samples: n_samples,
        frontiers,
        mean,
        variance,
        third_central,
        std_error: (variance / n).sqrt(),
        ks_normal,
    })
}
